//! Feasible window lengths, the share-to-virtual-user mapping, and ordered
//! round robin construction.
//!
//! Feasibility of a window `s` reduces to integer slot counts: a window is
//! feasible iff counts `c_i` exist with `ceil(s*lower_i) <= c_i <=
//! floor(s*upper_i)` and `sum c_i <= s * n_max`. Given such counts, a
//! schedule is built by wrap-around packing: each user's `c_i` tokens are
//! laid consecutively on a tape of `n_max` rows by `s` columns, and column
//! `k` becomes the user set of slot `k`. Since `c_i <= s`, no user lands
//! twice in one column.

use crate::catalog::VirtualUserCatalog;
use crate::demand::TemporalDemand;
use crate::error::{Error, Result};
use crate::rational::{lcm_u64, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub witness_counts: Option<Vec<u64>>,
    pub witness_shares: Option<Vec<Rational>>,
}

impl FeasibilityResult {
    fn infeasible() -> Self {
        Self { feasible: false, witness_counts: None, witness_shares: None }
    }
}

/// Per-virtual-user activation fractions `a_j = l_j / s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualShareVector {
    pub s: u64,
    /// Slots per virtual user, `l_j = s * a_j`.
    pub slots: Vec<u64>,
    pub shares: Vec<Rational>,
}

/// lcm of the reduced denominators.
pub fn d_res(shares: &[Rational]) -> Result<u64> {
    if shares.is_empty() {
        return Err(Error::InvalidInput("d_res of an empty share vector".into()));
    }
    let denoms = shares.iter().map(Rational::denom_u64).collect::<Result<Vec<_>>>()?;
    lcm_u64(denoms).ok_or_else(|| Error::ResourceLimit("lcm of denominators overflows u64".into()))
}

fn check_share_vector(shares: &[Rational], n_max: usize) -> Result<()> {
    let one = Rational::one();
    if let Some(w) = shares.iter().find(|w| w.is_negative() || *w > &one) {
        return Err(Error::InvalidInput(format!("share {w} outside [0, 1]")));
    }
    let sum: Rational = shares.iter().sum();
    if sum > n_max as u64 {
        return Err(Error::StructurallyInfeasible { sum: sum.to_string(), n_max });
    }
    Ok(())
}

/// Window `s` is feasible under equality constraints iff `d_res(w)` divides `s`.
pub fn equality_feasible(s: u64, shares: &[Rational], n_max: usize) -> Result<bool> {
    if s == 0 {
        return Err(Error::InvalidInput("window length must be positive".into()));
    }
    check_share_vector(shares, n_max)?;
    Ok(s.is_multiple_of(d_res(shares)?))
}

/// Feasibility under inequality constraints, with the minimal-count witness.
pub fn inequality_feasible(
    s: u64,
    demand: &TemporalDemand,
    n_max: usize,
) -> Result<FeasibilityResult> {
    if s == 0 {
        return Err(Error::InvalidInput("window length must be positive".into()));
    }
    let bounds = demand.count_bounds(s)?;
    let fits = bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .all(|(&lo, &hi)| lo <= hi.min(s));
    let total: u64 = bounds.lower.iter().sum();
    if !fits || total > s * n_max as u64 {
        return Ok(FeasibilityResult::infeasible());
    }
    let shares = bounds
        .lower
        .iter()
        .map(|&c| Rational::from(c) / Rational::from(s))
        .collect();
    Ok(FeasibilityResult {
        feasible: true,
        witness_counts: Some(bounds.lower),
        witness_shares: Some(shares),
    })
}

/// Window length beyond which every `s` is feasible under inequality
/// constraints: `d_res(lower) + n * max(d_alpha, d_delta)`, where `d_alpha`
/// and `d_delta` are the reduced denominators of `n_max - sum(lower)` and
/// `min_i(upper_i - lower_i)`.
pub fn contiguity_threshold(demand: &TemporalDemand, n_max: usize) -> Result<u64> {
    let n = demand.n() as u64;
    if demand.lower().iter().zip(demand.upper()).any(|(lo, hi)| lo >= hi) {
        return Err(Error::NotApplicable(
            "some user has lower == upper; use equality_feasible".into(),
        ));
    }
    let slack = Rational::from(n_max as u64) - demand.lower().iter().sum::<Rational>();
    if slack <= 0 {
        return Err(Error::NotApplicable(format!(
            "lower demands leave no slack below n_max = {n_max}"
        )));
    }
    let gap = demand
        .lower()
        .iter()
        .zip(demand.upper())
        .map(|(lo, hi)| hi - lo)
        .min()
        .expect("demand is non-empty");
    let d_eps = slack.denom_u64()?.max(gap.denom_u64()?);
    let overflow = || Error::ResourceLimit("contiguity threshold overflows u64".into());
    n.checked_mul(d_eps)
        .and_then(|x| x.checked_add(d_res(demand.lower()).ok()?))
        .ok_or_else(overflow)
}

/// Wrap-around packing of per-user slot counts into `s` columns of at most
/// `n_max` users each. Returns the member mask of every column.
pub fn wrap_columns(s: u64, counts: &[u64], n_max: usize) -> Result<Vec<u32>> {
    if counts.iter().any(|&c| c > s) {
        return Err(Error::InfeasibleShares(format!("a count exceeds the window {s}")));
    }
    if counts.iter().sum::<u64>() > s * n_max as u64 {
        return Err(Error::InfeasibleShares(format!(
            "counts need more than {n_max} users per slot"
        )));
    }
    let mut columns = vec![0u32; s as usize];
    let mut position = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        for p in position..position + c {
            columns[(p % s) as usize] |= 1 << i;
        }
        position += c;
    }
    Ok(columns)
}

/// Maps per-user shares with integral `s * w_i` to virtual-user shares
/// `a^m` with `sum a_j = 1`, `a_j >= 0`, and `sum_{j: i in V_j} a_j = w_i`.
pub fn theta_map(
    s: u64,
    shares: &[Rational],
    catalog: &VirtualUserCatalog,
) -> Result<VirtualShareVector> {
    if s == 0 {
        return Err(Error::InvalidInput("window length must be positive".into()));
    }
    if shares.len() != catalog.n() {
        return Err(Error::InvalidInput(format!(
            "{} shares for {} users",
            shares.len(),
            catalog.n()
        )));
    }
    check_share_vector(shares, catalog.n_max()).map_err(|e| Error::InfeasibleShares(e.to_string()))?;
    let window = Rational::from(s);
    let counts = shares
        .iter()
        .map(|w| {
            let c = w * &window;
            if c.is_integer() {
                c.floor_mul(1)
            } else {
                Err(Error::InfeasibleShares(format!("{s} * {w} is not an integer")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let columns = wrap_columns(s, &counts, catalog.n_max())?;
    let mut slots = vec![0u64; catalog.len()];
    for mask in columns {
        let j = catalog
            .index_of_mask(mask)
            .ok_or_else(|| Error::InfeasibleShares(format!("slot set {mask:#b} not in catalog")))?;
        slots[j] += 1;
    }
    let shares = slots.iter().map(|&l| Rational::from(l) / window.clone()).collect();
    Ok(VirtualShareVector { s, slots, shares })
}

/// Ordered round robin over the minimal-count witness: virtual user `j`
/// occupies the `l_j` consecutive slots following all lower-indexed ones.
pub fn build_orr(
    s: u64,
    demand: &TemporalDemand,
    catalog: &VirtualUserCatalog,
) -> Result<Vec<usize>> {
    if demand.n() != catalog.n() {
        return Err(Error::InvalidInput(format!(
            "demand has {} users, catalog {}",
            demand.n(),
            catalog.n()
        )));
    }
    let result = inequality_feasible(s, demand, catalog.n_max())?;
    let shares = result.witness_shares.ok_or_else(|| Error::InfeasibleWindow {
        s,
        reason: "no integer share witness".into(),
    })?;
    let theta = theta_map(s, &shares, catalog)?;
    Ok(theta
        .slots
        .iter()
        .enumerate()
        .flat_map(|(j, &l)| std::iter::repeat_n(j, l as usize))
        .collect())
}
