//! Threshold calibration for the long-term TBS.
//!
//! Projected stochastic approximation on one signed multiplier per user.
//! A positive multiplier prices the lower band edge, a negative one the
//! upper edge; each moves toward its edge's share error and is projected
//! back to zero when it would cross sign without the opposite edge being
//! violated.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::VirtualUserCatalog;
use crate::channel::{stream_rng, PerformanceSampler, SimRng};
use crate::demand::TemporalDemand;
use crate::error::{Error, Result};
use crate::strategies::{tbs_step, ThresholdVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Initial step size `mu_0`.
    pub step0: f64,
    /// Step decay scale `kappa`: `mu_k = mu_0 / (1 + k / kappa)`.
    pub step_decay: f64,
    pub batch_slots: usize,
    pub max_iterations: usize,
    /// Iterations to run before the stopping test is consulted.
    pub min_iterations: usize,
    /// Allowed share excursion outside the demand band.
    pub tolerance: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            step0: 1.0,
            step_decay: 100.0,
            batch_slots: 2_000,
            max_iterations: 5_000,
            min_iterations: 0,
            tolerance: 0.01,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step0 > 0.0 && self.step_decay > 0.0 && self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig(
                "calibration: step0 and step_decay must be positive, tolerance non-negative".into(),
            ));
        }
        if self.batch_slots == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "calibration: batch_slots and max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub thresholds: ThresholdVector,
    /// Shares of the confirmation batch when converged; otherwise the
    /// average over the second half of the iterations. Thresholds are
    /// averaged over the same half when not converged.
    pub realized_shares: Vec<f64>,
    pub u_tbs_estimate: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when most consecutive batches in the second half jump, as
    /// happens with atomic rate distributions where no single threshold
    /// vector realizes the optimal mix.
    pub oscillating: bool,
}

/// `min(eps1, eps2)` with `eps1 = min_i min(w_i - lower_i, upper_i - w_i)`
/// and `eps2 = n_max - sum_i w_i`.
pub fn epsilon_from_shares(shares: &[f64], demand: &TemporalDemand, n_max: usize) -> f64 {
    let eps1 = shares
        .iter()
        .zip(demand.lower().iter().zip(demand.upper()))
        .map(|(&w, (lo, hi))| (w - lo.to_f64()).min(hi.to_f64() - w))
        .fold(f64::INFINITY, f64::min);
    let eps2 = n_max as f64 - shares.iter().sum::<f64>();
    eps1.min(eps2)
}

struct Batch {
    shares: Vec<f64>,
    utility: f64,
}

const BATCH_CHUNK: usize = 4_096;

/// Runs one TBS batch. The batch is cut into fixed chunks on independent
/// streams keyed by one draw from `rng`, so the result does not depend on
/// the thread count.
fn tbs_batch<S: PerformanceSampler + ?Sized>(
    thresholds: &ThresholdVector,
    catalog: &VirtualUserCatalog,
    sampler: &S,
    slots: usize,
    rng: &mut SimRng,
) -> Batch {
    let key: u64 = rng.random();
    let chunks = slots.div_ceil(BATCH_CHUNK);
    let partial: Vec<(Vec<u64>, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = BATCH_CHUNK.min(slots - c * BATCH_CHUNK);
            let mut rng = stream_rng(key, c as u64);
            let mut perf = vec![0.0; catalog.len()];
            let mut counts = vec![0u64; catalog.n()];
            let mut total = 0.0;
            for _ in 0..len {
                sampler.sample(&mut rng, &mut perf);
                let j = tbs_step(thresholds, &perf, catalog);
                total += perf[j];
                for &i in catalog.get(j).members() {
                    counts[i] += 1;
                }
            }
            (counts, total)
        })
        .collect();
    let mut counts = vec![0u64; catalog.n()];
    let mut total = 0.0;
    for (c, t) in &partial {
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        total += t;
    }
    Batch {
        shares: counts.iter().map(|&c| c as f64 / slots as f64).collect(),
        utility: total / slots as f64,
    }
}

fn within_band(shares: &[f64], lower: &[f64], upper: &[f64], tol: f64) -> bool {
    shares
        .iter()
        .zip(lower.iter().zip(upper))
        .all(|(&a, (&lo, &hi))| a >= lo - tol && a <= hi + tol)
}

/// Searches for thresholds under which TBS meets the demands in the long run.
pub fn calibrate_thresholds<S: PerformanceSampler + ?Sized>(
    demand: &TemporalDemand,
    catalog: &VirtualUserCatalog,
    sampler: &S,
    config: &CalibrationConfig,
    rng: &mut SimRng,
) -> Result<CalibrationReport> {
    config.validate()?;
    if demand.n() != catalog.n() || sampler.len() != catalog.len() {
        return Err(Error::InvalidInput("demand, sampler and catalog disagree".into()));
    }
    let lower: Vec<f64> = demand.lower().iter().map(|w| w.to_f64()).collect();
    let upper: Vec<f64> = demand.upper().iter().map(|w| w.to_f64()).collect();
    if lower.iter().sum::<f64>() > catalog.n_max() as f64 {
        return Err(Error::InvalidInput("lower demands exceed n_max".into()));
    }
    // Every slot of a deterministic sampler is identical.
    let slots = if sampler.is_deterministic() { 1 } else { config.batch_slots };
    let n = catalog.n();

    let mut lambda = ThresholdVector::zeros(n);
    let mut history: Vec<Step> = Vec::new();

    for k in 0..config.max_iterations {
        let batch = tbs_batch(&lambda, catalog, sampler, slots, rng);

        if k + 1 >= config.min_iterations && within_band(&batch.shares, &lower, &upper, config.tolerance) {
            let confirm = tbs_batch(&lambda, catalog, sampler, slots, rng);
            if within_band(&confirm.shares, &lower, &upper, config.tolerance) {
                let epsilon = epsilon_from_shares(&confirm.shares, demand, catalog.n_max());
                return Ok(CalibrationReport {
                    thresholds: lambda,
                    realized_shares: confirm.shares,
                    u_tbs_estimate: confirm.utility,
                    epsilon,
                    iterations: k + 1,
                    converged: true,
                    oscillating: false,
                });
            }
        }

        let step = config.step0 / (1.0 + k as f64 / config.step_decay);
        let current = lambda.clone();
        for (i, l) in lambda.as_mut_slice().iter_mut().enumerate() {
            let share = batch.shares[i];
            let below = (lower[i] - share).max(0.0);
            let above = (share - upper[i]).max(0.0);
            *l = if *l > 0.0 {
                let next = *l + step * (lower[i] - share);
                if next >= 0.0 { next } else { -step * above }
            } else if *l < 0.0 {
                let next = *l + step * (upper[i] - share);
                if next <= 0.0 { next } else { step * below }
            } else {
                step * (below - above)
            };
        }
        history.push(Step { thresholds: current, batch });

        let done = k + 1 == config.max_iterations;
        let settled = k + 1 >= config.min_iterations.max(OSCILLATION_MIN_ITERATIONS);
        if done || settled {
            let tail = Tail::of(&history);
            if done || (tail.oscillating && within_band(&tail.shares, &lower, &upper, config.tolerance)) {
                let epsilon = epsilon_from_shares(&tail.shares, demand, catalog.n_max());
                return Ok(CalibrationReport {
                    thresholds: ThresholdVector::new(tail.thresholds)?,
                    realized_shares: tail.shares,
                    u_tbs_estimate: tail.utility,
                    epsilon,
                    iterations: k + 1,
                    converged: false,
                    oscillating: tail.oscillating,
                });
            }
        }
    }
    unreachable!("the last iteration always returns")
}

/// Iterations before an oscillating run may stop early.
const OSCILLATION_MIN_ITERATIONS: usize = 400;
/// Batch-to-batch share jump that counts as a swing. Far above sampling
/// noise at any sensible batch size; typical of bang-bang switching
/// between tied virtual users.
const SWING_SHARE: f64 = 0.1;

struct Step {
    thresholds: ThresholdVector,
    batch: Batch,
}

/// Ergodic averages over the second half of the iterations so far.
struct Tail {
    thresholds: Vec<f64>,
    shares: Vec<f64>,
    utility: f64,
    oscillating: bool,
}

impl Tail {
    fn of(history: &[Step]) -> Self {
        let tail = &history[history.len() / 2..];
        let len = tail.len() as f64;
        let n = tail[0].batch.shares.len();
        let mean = |f: &dyn Fn(&Step) -> &[f64]| -> Vec<f64> {
            (0..n).map(|i| tail.iter().map(|st| f(st)[i]).sum::<f64>() / len).collect()
        };
        let swings = tail
            .windows(2)
            .filter(|w| {
                w[0].batch.shares.iter().zip(&w[1].batch.shares).any(|(a, b)| (a - b).abs() > SWING_SHARE)
            })
            .count();
        Self {
            thresholds: mean(&|st| st.thresholds.as_slice()),
            shares: mean(&|st| &st.batch.shares),
            utility: tail.iter().map(|st| st.batch.utility).sum::<f64>() / len,
            oscillating: tail.len() >= 2 && swings * 2 >= tail.len() - 1,
        }
    }
}

/// Long-run TBS utility estimate with a 95% normal-approximation half-width.
///
/// The horizon is split into fixed chunks on independent streams of
/// `seed`, so the result does not depend on the thread count.
pub fn estimate_long_term_utility<S: PerformanceSampler + ?Sized>(
    thresholds: &ThresholdVector,
    catalog: &VirtualUserCatalog,
    sampler: &S,
    horizon: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    if sampler.is_deterministic() {
        let mut perf = vec![0.0; catalog.len()];
        sampler.sample(&mut stream_rng(seed, 0), &mut perf);
        return Ok((perf[tbs_step(thresholds, &perf, catalog)], 0.0));
    }
    const CHUNK: u64 = 50_000;
    let chunks = horizon.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(horizon - c * CHUNK);
            let mut rng = stream_rng(seed, c);
            let mut perf = vec![0.0; catalog.len()];
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..len {
                sampler.sample(&mut rng, &mut perf);
                let r = perf[tbs_step(thresholds, &perf, catalog)];
                sum += r;
                sq += r * r;
            }
            (sum, sq)
        })
        .collect();
    let (sum, sq) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = horizon as f64;
    let mean = sum / n;
    let var = if horizon > 1 { ((sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, 1.96 * (var / n).sqrt()))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl CalibrationReport {
    /// Flat `key = value` block; vectors are comma-separated.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "thresholds = {}", join(self.thresholds.as_slice()));
        let _ = writeln!(out, "realized_shares = {}", join(&self.realized_shares));
        let _ = writeln!(out, "u_tbs_estimate = {}", self.u_tbs_estimate);
        let _ = writeln!(out, "epsilon = {}", self.epsilon);
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "converged = {}", self.converged);
        let _ = writeln!(out, "oscillating = {}", self.oscillating);
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got {line:?}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| Error::Parse(format!("missing key {k}")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| Error::Parse(format!("bad number for {k}")))
        };
        let vec = |k: &str| -> Result<Vec<f64>> {
            let v = get(k)?;
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::Parse(format!("bad number in {k}"))))
                .collect()
        };
        let flag = |k: &str| -> Result<bool> {
            get(k)?.parse().map_err(|_| Error::Parse(format!("bad flag for {k}")))
        };
        let known = [
            "thresholds",
            "realized_shares",
            "u_tbs_estimate",
            "epsilon",
            "iterations",
            "converged",
            "oscillating",
        ];
        if let Some(k) = fields.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Parse(format!("unknown key {k}")));
        }
        Ok(Self {
            thresholds: ThresholdVector::new(vec("thresholds")?)?,
            realized_shares: vec("realized_shares")?,
            u_tbs_estimate: num("u_tbs_estimate")?,
            epsilon: num("epsilon")?,
            iterations: get("iterations")?
                .parse()
                .map_err(|_| Error::Parse("bad iterations".into()))?,
            converged: flag("converged")?,
            oscillating: flag("oscillating")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{SyntheticKind, SyntheticSampler};
    use crate::rational::Rational;

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p, q).unwrap()
    }

    #[test]
    fn unconstrained_demand_needs_no_thresholds() {
        let cat = VirtualUserCatalog::homogeneous(3, 1).unwrap();
        let d = TemporalDemand::uniform(3, r(0, 1), r(1, 1)).unwrap();
        let sampler = SyntheticSampler::new(SyntheticKind::Exponential, vec![0.0, 1.0, 1.0, 1.0], 0.0, &cat).unwrap();
        let rep = calibrate_thresholds(&d, &cat, &sampler, &CalibrationConfig::default(), &mut stream_rng(1, 0)).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.thresholds, ThresholdVector::zeros(3));
    }

    #[test]
    fn atomic_rates_are_flagged_and_time_average_the_optimum() {
        let cat = VirtualUserCatalog::homogeneous(2, 1).unwrap();
        let d = TemporalDemand::uniform(2, r(1, 4), r(3, 4)).unwrap();
        let sampler = SyntheticSampler::new(SyntheticKind::Fixed, vec![0.0, 1.0, 2.0], 0.0, &cat).unwrap();
        let cfg = CalibrationConfig { max_iterations: 20_000, ..CalibrationConfig::default() };
        let rep = calibrate_thresholds(&d, &cat, &sampler, &cfg, &mut stream_rng(1, 0)).unwrap();
        assert!(!rep.converged);
        assert!(rep.oscillating);
        assert!((rep.realized_shares[0] - 0.25).abs() < 0.02, "{:?}", rep.realized_shares);
        assert!((rep.realized_shares[1] - 0.75).abs() < 0.02, "{:?}", rep.realized_shares);
        assert!((rep.u_tbs_estimate - 1.75).abs() < 0.02, "{}", rep.u_tbs_estimate);
    }

    #[test]
    fn continuous_rates_meet_the_lower_band() {
        // user 1 is much weaker and needs a positive threshold
        let cat = VirtualUserCatalog::homogeneous(3, 1).unwrap();
        let d = TemporalDemand::uniform(3, r(1, 4), r(1, 1)).unwrap();
        let sampler =
            SyntheticSampler::new(SyntheticKind::Exponential, vec![0.0, 0.5, 2.0, 2.0], 0.0, &cat).unwrap();
        let rep = calibrate_thresholds(&d, &cat, &sampler, &CalibrationConfig::default(), &mut stream_rng(2, 0)).unwrap();
        assert!(rep.converged);
        assert!(rep.thresholds.as_slice()[0] > 0.0);
        for &share in &rep.realized_shares {
            assert!(share >= 0.25 - 0.01);
        }
        let eps = epsilon_from_shares(&rep.realized_shares, &d, 1);
        assert_eq!(rep.epsilon, eps);
    }

    #[test]
    fn long_term_estimates() {
        let cat = VirtualUserCatalog::homogeneous(2, 1).unwrap();
        let fixed = SyntheticSampler::new(SyntheticKind::Fixed, vec![0.0, 1.0, 2.0], 0.0, &cat).unwrap();
        assert_eq!(estimate_long_term_utility(&ThresholdVector::zeros(2), &cat, &fixed, 10_000, 0).unwrap(), (2.0, 0.0));

        let exp = SyntheticSampler::new(SyntheticKind::Exponential, vec![0.0, 1.0, 1.0], 0.0, &cat).unwrap();
        let (mean, hw) = estimate_long_term_utility(&ThresholdVector::zeros(2), &cat, &exp, 200_000, 3).unwrap();
        // E[max of two unit exponentials] = 1.5
        assert!((mean - 1.5).abs() < 3.0 * hw, "{mean} +- {hw}");
        assert!(hw > 0.0);
    }

    #[test]
    fn raising_a_threshold_raises_that_share() {
        let cat = VirtualUserCatalog::homogeneous(3, 1).unwrap();
        let exp = SyntheticSampler::new(SyntheticKind::Exponential, vec![0.0, 1.0, 1.5, 2.0], 0.0, &cat).unwrap();
        let mut prev = -1.0;
        for l in [-0.5, 0.0, 0.5, 1.0, 2.0] {
            let th = ThresholdVector::new(vec![l, 0.0, 0.0]).unwrap();
            let b = tbs_batch(&th, &cat, &exp, 50_000, &mut stream_rng(4, 0));
            assert!(b.shares[0] >= prev - 0.01, "lambda {l}: {} < {prev}", b.shares[0]);
            prev = b.shares[0];
        }
    }

    #[test]
    fn kv_roundtrip() {
        let rep = CalibrationReport {
            thresholds: ThresholdVector::new(vec![0.5, -0.125]).unwrap(),
            realized_shares: vec![0.25, 0.75],
            u_tbs_estimate: 1.75,
            epsilon: 0.1 + 0.2,
            iterations: 42,
            converged: true,
            oscillating: false,
        };
        assert_eq!(CalibrationReport::from_kv(&rep.to_kv()).unwrap(), rep);
        assert!(CalibrationReport::from_kv("thresholds = 1\nbogus = 2\n").is_err());
    }
}
