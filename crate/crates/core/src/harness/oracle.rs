//! Exact optimal short-term utility for deterministic rates.
//!
//! Forward dynamic program over per-user activation counts. A layer keeps,
//! for every count vector still able to reach a fair terminal state, the
//! best accumulated rate. Rates are scaled to integers by the lcm of their
//! denominators so the inner loop runs in `i128`.

use std::collections::HashMap;

use crate::catalog::VirtualUserCatalog;
use crate::demand::TemporalDemand;
use crate::error::{Error, Result};
use crate::feasibility::inequality_feasible;
use crate::rational::{lcm_u64, Rational};

pub const ORACLE_MAX_USERS: usize = 4;
pub const ORACLE_MAX_WINDOW: u64 = 64;
const ORACLE_MAX_STATES: usize = 4_000_000;

/// `U*_s`: the largest average utility of any schedule meeting the demand.
pub fn oracle_optimal_utility(
    s: u64,
    demand: &TemporalDemand,
    catalog: &VirtualUserCatalog,
    rates: &[Rational],
) -> Result<Rational> {
    if catalog.n() > ORACLE_MAX_USERS || s > ORACLE_MAX_WINDOW {
        return Err(Error::ResourceLimit(format!(
            "oracle limited to n <= {ORACLE_MAX_USERS}, s <= {ORACLE_MAX_WINDOW} (got n = {}, s = {s})",
            catalog.n()
        )));
    }
    if rates.len() != catalog.len() || demand.n() != catalog.n() {
        return Err(Error::InvalidInput("rates, demand and catalog disagree".into()));
    }
    if s == 0 || !inequality_feasible(s, demand, catalog.n_max())?.feasible {
        return Err(Error::InfeasibleWindow { s, reason: "no fair schedule exists".into() });
    }

    let scale = lcm_u64(rates.iter().map(|r| r.denom_u64()).collect::<Result<Vec<_>>>()?)
        .ok_or_else(|| Error::ResourceLimit("rate denominators overflow".into()))?;
    let scaled: Vec<i128> = rates
        .iter()
        .map(|r| {
            let v = r.clone() * Rational::from(scale);
            v.floor()
                .try_into()
                .map_err(|_| Error::ResourceLimit("scaled rate overflows i128".into()))
        })
        .collect::<Result<_>>()?;

    let bounds = demand.count_bounds(s)?;
    let (lo, hi) = (&bounds.lower, &bounds.upper);
    let n = catalog.n();
    let n_max = catalog.n_max() as u64;
    let radix: Vec<u64> = hi.iter().map(|&h| h.min(s) + 1).collect();
    let encode = |c: &[u64]| c.iter().zip(&radix).rev().fold(0u64, |acc, (&ci, &r)| acc * r + ci);

    // can the remaining `left` slots still lift every user to its lower bound?
    let reachable = |c: &[u64], left: u64| {
        let mut owed = 0;
        for i in 0..n {
            let d = lo[i].saturating_sub(c[i]);
            if d > left {
                return false;
            }
            owed += d;
        }
        owed <= left * n_max
    };

    let mut layer: HashMap<u64, (Vec<u64>, i128)> = HashMap::new();
    layer.insert(0, (vec![0; n], 0));
    for t in 1..=s {
        let mut next: HashMap<u64, (Vec<u64>, i128)> = HashMap::with_capacity(layer.len() * 2);
        for (counts, value) in layer.values() {
            for (j, v) in catalog.iter().enumerate() {
                let mut c = counts.clone();
                if v.members().iter().any(|&i| {
                    c[i] += 1;
                    c[i] > hi[i]
                }) {
                    continue;
                }
                if !reachable(&c, s - t) {
                    continue;
                }
                let total = value
                    .checked_add(scaled[j])
                    .ok_or_else(|| Error::ResourceLimit("utility sum overflows".into()))?;
                let key = encode(&c);
                match next.get_mut(&key) {
                    Some(entry) if entry.1 >= total => {}
                    Some(entry) => entry.1 = total,
                    None => {
                        next.insert(key, (c, total));
                    }
                }
            }
        }
        if next.len() > ORACLE_MAX_STATES {
            return Err(Error::ResourceLimit(format!("{} states at slot {t}", next.len())));
        }
        layer = next;
    }

    let best = layer
        .values()
        .filter(|(c, _)| c.iter().zip(lo).all(|(ci, l)| ci >= l))
        .map(|&(_, v)| v)
        .max()
        .ok_or_else(|| Error::InfeasibleWindow { s, reason: "no fair terminal state".into() })?;
    let numer = Rational::from_integer(
        i64::try_from(best).map_err(|_| Error::ResourceLimit("utility overflows i64".into()))?,
    );
    Ok(numer / Rational::from(scale) / Rational::from(s))
}

/// Optimal utilities for every feasible `s` in `1..=s_max`.
pub fn oracle_curve(
    s_max: u64,
    demand: &TemporalDemand,
    catalog: &VirtualUserCatalog,
    rates: &[Rational],
) -> Result<Vec<(u64, Rational)>> {
    let mut out = Vec::new();
    for s in 1..=s_max {
        if inequality_feasible(s, demand, catalog.n_max())?.feasible {
            out.push((s, oracle_optimal_utility(s, demand, catalog, rates)?));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperadditivityViolation {
    pub s: u64,
    pub s_prime: u64,
    /// `s*U_s + s'*U_s'`
    pub split: Rational,
    /// `(s+s')*U_{s+s'}`
    pub joint: Rational,
}

/// Checks `s*U*_s + s'*U*_s' <= (s+s')*U*_{s+s'}` for all feasible
/// `s, s' <= s_max` with `s + s'` feasible.
pub fn check_superadditivity(
    s_max: u64,
    demand: &TemporalDemand,
    catalog: &VirtualUserCatalog,
    rates: &[Rational],
) -> Result<Vec<SuperadditivityViolation>> {
    let curve: HashMap<u64, Rational> = oracle_curve(2 * s_max, demand, catalog, rates)?
        .into_iter()
        .collect();
    let mut violations = Vec::new();
    for s in 1..=s_max {
        for s_prime in s..=s_max {
            let (Some(u), Some(u_prime), Some(u_joint)) =
                (curve.get(&s), curve.get(&s_prime), curve.get(&(s + s_prime)))
            else {
                continue;
            };
            let split = Rational::from(s) * u + Rational::from(s_prime) * u_prime;
            let joint = Rational::from(s + s_prime) * u_joint;
            if split > joint {
                violations.push(SuperadditivityViolation { s, s_prime, split, joint });
            }
        }
    }
    Ok(violations)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    Flat,
}

/// Sign of `U*_{s+1} - U*_s` for each `s` in the range where both windows
/// are feasible.
pub fn check_nonmonotonicity(
    range: std::ops::RangeInclusive<u64>,
    demand: &TemporalDemand,
    catalog: &VirtualUserCatalog,
    rates: &[Rational],
) -> Result<Vec<(u64, Direction)>> {
    let mut out = Vec::new();
    let mut prev: Option<(u64, Rational)> = None;
    for s in *range.start()..=range.end() + 1 {
        if s == 0 || !inequality_feasible(s, demand, catalog.n_max())?.feasible {
            prev = None;
            continue;
        }
        let u = oracle_optimal_utility(s, demand, catalog, rates)?;
        if let Some((ps, pu)) = prev.take() {
            let dir = match u.cmp(&pu) {
                std::cmp::Ordering::Greater => Direction::Increasing,
                std::cmp::Ordering::Less => Direction::Decreasing,
                std::cmp::Ordering::Equal => Direction::Flat,
            };
            out.push((ps, dir));
        }
        prev = Some((s, u));
    }
    Ok(out)
}
