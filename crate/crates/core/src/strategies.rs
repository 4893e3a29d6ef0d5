//! Scheduling strategies: ordered round robin, threshold-based (TBS), and
//! augmented threshold-based (ATBS).
//!
//! ATBS keeps a live set of virtual users whose activation now still lets
//! the remaining slots meet every demand. The set is refined each slot by
//! re-testing only its current members, and the slot goes to the live
//! member maximizing rate plus the thresholds of its users.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::VirtualUserCatalog;
use crate::channel::{PerformanceSampler, SimRng};
use crate::demand::{CountBounds, TemporalDemand};
use crate::error::{Error, Result};
use crate::feasibility::{build_orr, inequality_feasible};
use crate::trace::{ScheduleTrace, ShareVector};

/// Per-user threshold offsets, in utility units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("thresholds must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl TryFrom<Vec<f64>> for ThresholdVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThresholdVector> for Vec<f64> {
    fn from(t: ThresholdVector) -> Self {
        t.0
    }
}

/// Rate plus the thresholds of the virtual user's members.
#[inline]
pub fn scheduling_measure(
    catalog: &VirtualUserCatalog,
    j: usize,
    rate: f64,
    thresholds: &ThresholdVector,
) -> f64 {
    rate + catalog.get(j).members().iter().map(|&i| thresholds.0[i]).sum::<f64>()
}

/// Mutable state of one ATBS window.
#[derive(Clone, Debug)]
pub struct StrategyState {
    s: u64,
    /// Next slot, 1-based.
    t: u64,
    n_max: usize,
    counts: ShareVector,
    bounds: CountBounds,
    live: Vec<usize>,
    initial_live: Option<Vec<usize>>,
    first_shrink: Option<u64>,
    thresholds: ThresholdVector,
    audit: bool,
}

impl StrategyState {
    /// Fails when `s` is infeasible for the demand.
    pub fn new(
        s: u64,
        demand: &TemporalDemand,
        catalog: &VirtualUserCatalog,
        thresholds: ThresholdVector,
    ) -> Result<Self> {
        if demand.n() != catalog.n() || thresholds.len() != catalog.n() {
            return Err(Error::InvalidInput(format!(
                "demand ({}), thresholds ({}) and catalog ({}) disagree on user count",
                demand.n(),
                thresholds.len(),
                catalog.n()
            )));
        }
        if !inequality_feasible(s, demand, catalog.n_max())?.feasible {
            return Err(Error::InfeasibleWindow {
                s,
                reason: "no integer share witness".into(),
            });
        }
        Ok(Self {
            s,
            t: 1,
            n_max: catalog.n_max(),
            counts: ShareVector::new(catalog.n()),
            bounds: demand.count_bounds(s)?,
            live: (0..catalog.len()).collect(),
            initial_live: None,
            first_shrink: None,
            thresholds,
            audit: false,
        })
    }

    /// Re-test every excluded virtual user each slot and fail if one has
    /// become admissible again.
    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &ShareVector {
        &self.counts
    }

    pub fn live_set(&self) -> &[usize] {
        &self.live
    }

    /// Admissible set at slot 1, once the first step has run.
    pub fn initial_live_set(&self) -> Option<&[usize]> {
        self.initial_live.as_deref()
    }

    /// First slot whose live set differs from the slot-1 live set.
    pub fn first_shrink(&self) -> Option<u64> {
        self.first_shrink
    }

    pub fn thresholds(&self) -> &ThresholdVector {
        &self.thresholds
    }

    /// Overrides the activation history, for probing admissibility at an
    /// arbitrary point of the window.
    pub fn set_position(&mut self, t: u64, counts: &[u64]) -> Result<()> {
        if t == 0 || t > self.s || counts.len() != self.bounds.lower.len() {
            return Err(Error::InvalidInput(format!("bad position t = {t}")));
        }
        if counts.iter().any(|&c| c > t - 1) {
            return Err(Error::InvalidInput("count exceeds elapsed slots".into()));
        }
        let mut shares = ShareVector::new(counts.len());
        shares.set_raw(counts, t - 1);
        self.counts = shares;
        self.t = t;
        Ok(())
    }
}

/// Whether activating virtual user `j` at the state's next slot keeps the
/// remaining demands satisfiable, in exact integer arithmetic:
///
/// * `s - t >= max_i (ceil(s*lower_i) - c_i - [i in V_j])`
/// * `floor(s*upper_i) >= c_i + [i in V_j]` for every `i`
/// * `(s - t) * n_max >= sum_i (ceil(s*lower_i) - c_i - [i in V_j])^+`
pub fn admissible(catalog: &VirtualUserCatalog, j: usize, state: &StrategyState) -> bool {
    let v = catalog.get(j);
    let remaining = state.s as i64 - state.t as i64;
    let mut worst = i64::MIN;
    let mut owed = 0i64;
    for (i, ((&lo, &hi), &c)) in state
        .bounds
        .lower
        .iter()
        .zip(&state.bounds.upper)
        .zip(state.counts.counts())
        .enumerate()
    {
        let after = c as i64 + v.contains(i) as i64;
        if after > hi as i64 {
            return false;
        }
        let deficit = lo as i64 - after;
        worst = worst.max(deficit);
        owed += deficit.max(0);
    }
    remaining >= worst && remaining * state.n_max as i64 >= owed
}

/// One ATBS slot: refine the live set, then pick the live virtual user with
/// the largest scheduling measure (lowest index on ties).
pub fn atbs_step(
    state: &mut StrategyState,
    catalog: &VirtualUserCatalog,
    performance: &[f64],
) -> Result<usize> {
    if state.t > state.s {
        return Err(Error::Exhausted { t: state.t, s: state.s });
    }
    let before = state.live.len();
    let mut live = std::mem::take(&mut state.live);
    live.retain(|&j| admissible(catalog, j, state));
    state.live = live;

    if state.audit {
        let mut in_live = vec![false; catalog.len()];
        for &j in &state.live {
            in_live[j] = true;
        }
        if let Some(j) = (0..catalog.len()).find(|&j| !in_live[j] && admissible(catalog, j, state)) {
            return Err(Error::LiveSetGrew { index: j, t: state.t });
        }
    }

    match &state.initial_live {
        None => state.initial_live = Some(state.live.clone()),
        Some(_) if state.first_shrink.is_none() && state.live.len() != before => {
            state.first_shrink = Some(state.t);
        }
        Some(_) => {}
    }

    let mut best: Option<(usize, f64)> = None;
    for &j in &state.live {
        let m = scheduling_measure(catalog, j, performance[j], &state.thresholds);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((j, m));
        }
    }
    let (choice, _) = best.ok_or(Error::EmptyLiveSet { t: state.t, s: state.s })?;
    state.counts.record(catalog, choice);
    state.t += 1;
    Ok(choice)
}

/// Unconstrained argmax of the scheduling measure over the whole catalog.
pub fn tbs_step(thresholds: &ThresholdVector, performance: &[f64], catalog: &VirtualUserCatalog) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &r) in performance.iter().enumerate().take(catalog.len()) {
        let m = scheduling_measure(catalog, j, r, thresholds);
        if m > best.1 {
            best = (j, m);
        }
    }
    best.0
}

/// Emits the `t`-th (1-based) entry of a precomputed round robin sequence.
pub fn orr_step(sequence: &[usize], t: u64) -> Result<usize> {
    if t == 0 {
        return Err(Error::InvalidInput("slots are 1-based".into()));
    }
    sequence.get(t as usize - 1).copied().ok_or(Error::Exhausted {
        t,
        s: sequence.len() as u64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Orr,
    Tbs,
    Atbs,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Orr => "orr",
            StrategyKind::Tbs => "tbs",
            StrategyKind::Atbs => "atbs",
        }
    }

    /// Whether the strategy guarantees the short-term demands.
    pub fn is_fair(self) -> bool {
        !matches!(self, StrategyKind::Tbs)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orr" => Ok(StrategyKind::Orr),
            "tbs" => Ok(StrategyKind::Tbs),
            "atbs" => Ok(StrategyKind::Atbs),
            other => Err(Error::Parse(format!("unknown strategy {other:?}"))),
        }
    }
}

/// A strategy ready to run windows.
#[derive(Clone, Debug)]
pub enum Strategy {
    Orr(Vec<usize>),
    Tbs(ThresholdVector),
    Atbs { thresholds: ThresholdVector, audit: bool },
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Orr(_) => StrategyKind::Orr,
            Strategy::Tbs(_) => StrategyKind::Tbs,
            Strategy::Atbs { .. } => StrategyKind::Atbs,
        }
    }

    pub fn orr(s: u64, demand: &TemporalDemand, catalog: &VirtualUserCatalog) -> Result<Self> {
        build_orr(s, demand, catalog).map(Strategy::Orr)
    }
}

/// Outcome of one window.
#[derive(Clone, Debug)]
pub struct WindowRun {
    pub trace: ScheduleTrace,
    /// ATBS only: first slot whose live set left the slot-1 set.
    pub first_shrink: Option<u64>,
}

impl WindowRun {
    /// Stopping time `A`: the first shrink slot, or `s` when none occurred.
    pub fn stopping_time(&self) -> u64 {
        self.first_shrink.unwrap_or(self.trace.len() as u64)
    }
}

/// Draws `s` performance vectors and applies the strategy slot by slot.
pub fn run_window<S: PerformanceSampler + ?Sized>(
    strategy: &Strategy,
    s: u64,
    demand: &TemporalDemand,
    catalog: &VirtualUserCatalog,
    sampler: &S,
    rng: &mut SimRng,
) -> Result<WindowRun> {
    if sampler.len() != catalog.len() {
        return Err(Error::InvalidInput(format!(
            "sampler emits {} values for a catalog of {}",
            sampler.len(),
            catalog.len()
        )));
    }
    let mut perf = vec![0.0; catalog.len()];
    let mut trace = ScheduleTrace::with_capacity(s as usize);
    let mut state = match strategy {
        Strategy::Atbs { thresholds, audit } => {
            Some(StrategyState::new(s, demand, catalog, thresholds.clone())?.with_audit(*audit))
        }
        Strategy::Orr(seq) if seq.len() as u64 != s => {
            return Err(Error::InvalidInput(format!(
                "round robin sequence has {} slots, window {s}",
                seq.len()
            )))
        }
        _ => None,
    };
    for t in 1..=s {
        sampler.sample(rng, &mut perf);
        let j = match strategy {
            Strategy::Orr(seq) => orr_step(seq, t)?,
            Strategy::Tbs(th) => tbs_step(th, &perf, catalog),
            Strategy::Atbs { .. } => atbs_step(state.as_mut().expect("set above"), catalog, &perf)?,
        };
        trace.push(j, perf[j]);
    }
    Ok(WindowRun { trace, first_shrink: state.and_then(|st| st.first_shrink) })
}
