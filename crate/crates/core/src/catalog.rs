//! Virtual users: the subsets of users that may be activated together.

use std::fmt;

use crate::error::{Error, Result};

/// Largest user count accepted by [`VirtualUserCatalog::homogeneous`].
pub const MAX_USERS: usize = 20;

/// A set of users activated together in one slot. Members are 0-based and
/// sorted; the text form is 1-based (`1+3`), with `-` for the idle set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VirtualUser {
    members: Vec<usize>,
    mask: u32,
}

impl VirtualUser {
    fn new(members: Vec<usize>) -> Self {
        let mask = members.iter().fold(0u32, |m, &i| m | (1 << i));
        Self { members, mask }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn contains(&self, user: usize) -> bool {
        user < 32 && self.mask & (1 << user) != 0
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }
}

impl fmt::Display for VirtualUser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.members.is_empty() {
            return f.write_str("-");
        }
        for (k, i) in self.members.iter().enumerate() {
            if k > 0 {
                f.write_str("+")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

/// The ordered family of activatable subsets for a homogeneous system.
///
/// Ordering is by subset size, then lexicographic on sorted members, so
/// index 0 is always the empty set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualUserCatalog {
    n: usize,
    n_max: usize,
    subsets: Vec<VirtualUser>,
}

impl VirtualUserCatalog {
    /// All subsets of `n` users with at most `n_max` members.
    pub fn homogeneous(n: usize, n_max: usize) -> Result<Self> {
        if n == 0 || n > MAX_USERS {
            return Err(Error::InvalidConfig(format!(
                "user count {n} outside 1..={MAX_USERS}"
            )));
        }
        if n_max == 0 || n_max > n {
            return Err(Error::InvalidConfig(format!(
                "n_max = {n_max} must lie in 1..={n}"
            )));
        }
        let mut subsets = Vec::new();
        for size in 0..=n_max {
            let mut combo: Vec<usize> = (0..size).collect();
            loop {
                subsets.push(VirtualUser::new(combo.clone()));
                // advance to the next combination in lexicographic order
                let Some(pos) = (0..size).rev().find(|&p| combo[p] < n - size + p) else {
                    break;
                };
                combo[pos] += 1;
                for q in pos + 1..size {
                    combo[q] = combo[q - 1] + 1;
                }
            }
        }
        Ok(Self { n, n_max, subsets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Catalog size `m`.
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn get(&self, j: usize) -> &VirtualUser {
        &self.subsets[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &VirtualUser> {
        self.subsets.iter()
    }

    pub fn index_of_members(&self, members: &[usize]) -> Option<usize> {
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        self.subsets.iter().position(|v| v.members == sorted)
    }

    pub fn index_of_mask(&self, mask: u32) -> Option<usize> {
        self.subsets.iter().position(|v| v.mask == mask)
    }

    /// Parses the 1-based `1+3` form (or `-` for the idle set).
    pub fn parse_subset(&self, text: &str) -> Result<usize> {
        let text = text.trim();
        let members = if text == "-" || text.is_empty() {
            Vec::new()
        } else {
            text.split('+')
                .map(|t| match t.trim().parse::<usize>() {
                    Ok(i) if (1..=self.n).contains(&i) => Ok(i - 1),
                    _ => Err(Error::Parse(format!("bad user index {t:?} in {text:?}"))),
                })
                .collect::<Result<Vec<_>>>()?
        };
        self.index_of_members(&members)
            .ok_or_else(|| Error::Parse(format!("{text:?} is not in the catalog")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn catalog_sizes() {
        assert_eq!(VirtualUserCatalog::homogeneous(5, 2).unwrap().len(), 16);
        assert_eq!(VirtualUserCatalog::homogeneous(3, 3).unwrap().len(), 8);
        for n in 1..=8 {
            for n_max in 1..=n {
                let c = VirtualUserCatalog::homogeneous(n, n_max).unwrap();
                let m: usize = (0..=n_max).map(|k| binomial(n, k)).sum();
                assert_eq!(c.len(), m);
            }
        }
    }

    #[test]
    fn two_users_single_activation() {
        let c = VirtualUserCatalog::homogeneous(2, 1).unwrap();
        let text: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        assert_eq!(text, ["-", "1", "2"]);
    }

    #[test]
    fn ordering_is_size_then_lexicographic() {
        let c = VirtualUserCatalog::homogeneous(4, 2).unwrap();
        let text: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        assert_eq!(
            text,
            ["-", "1", "2", "3", "4", "1+2", "1+3", "1+4", "2+3", "2+4", "3+4"]
        );
        let masks: std::collections::HashSet<u32> = c.iter().map(|v| v.mask()).collect();
        assert_eq!(masks.len(), c.len());
    }

    #[test]
    fn invalid_configurations() {
        assert!(VirtualUserCatalog::homogeneous(2, 3).is_err());
        assert!(VirtualUserCatalog::homogeneous(21, 1).is_err());
        assert!(VirtualUserCatalog::homogeneous(3, 0).is_err());
    }

    #[test]
    fn parse_subset_text() {
        let c = VirtualUserCatalog::homogeneous(3, 2).unwrap();
        assert_eq!(c.parse_subset("-").unwrap(), 0);
        assert_eq!(c.parse_subset("3+1").unwrap(), c.index_of_members(&[0, 2]).unwrap());
        assert!(c.parse_subset("4").is_err());
        assert!(c.parse_subset("1+2+3").is_err());
    }
}
