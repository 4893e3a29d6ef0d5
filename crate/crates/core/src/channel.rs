//! Performance-vector samplers.
//!
//! [`CellSampler`] models a single-cell downlink: users dropped in a ring
//! with log-distance path loss and log-normal shadowing fixed per drop,
//! Rayleigh fading redrawn each slot, and a truncated Shannon rate. Pairs
//! are served by superposition coding with SIC at the stronger user, at the
//! largest common rate. [`SyntheticSampler`] provides simple i.i.d. models
//! for tests.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::catalog::VirtualUserCatalog;
use crate::error::{Error, Result};

/// The random stream type used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Draws one performance vector (one value per catalog entry) per call.
pub trait PerformanceSampler: Send + Sync {
    /// Catalog size the sampler writes.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sample(&self, rng: &mut SimRng, out: &mut [f64]);

    /// True when every draw is the same vector.
    fn is_deterministic(&self) -> bool {
        false
    }
}

impl<T: PerformanceSampler + ?Sized> PerformanceSampler for Box<T> {
    fn len(&self) -> usize {
        (**self).len()
    }
    fn sample(&self, rng: &mut SimRng, out: &mut [f64]) {
        (**self).sample(rng, out)
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
    pub n_users: usize,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub pathloss_exponent: f64,
    /// Path loss at 1 m.
    pub pathloss_ref_db: f64,
    pub shadowing_sigma_db: f64,
    pub shannon_min_snr_db: f64,
    /// Rate cap in bits/s/Hz.
    pub shannon_max_rate: f64,
    pub bandwidth_efficiency: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            inner_radius_m: 20.0,
            outer_radius_m: 100.0,
            n_users: 5,
            tx_power_dbm: 30.0,
            noise_power_dbm: -94.0,
            pathloss_exponent: 3.0,
            pathloss_ref_db: 38.0,
            shadowing_sigma_db: 8.0,
            shannon_min_snr_db: -6.5,
            shannon_max_rate: 4.8,
            bandwidth_efficiency: 0.75,
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("cell: {msg}")));
        let finite = [
            self.inner_radius_m,
            self.outer_radius_m,
            self.tx_power_dbm,
            self.noise_power_dbm,
            self.pathloss_exponent,
            self.pathloss_ref_db,
            self.shadowing_sigma_db,
            self.shannon_min_snr_db,
            self.shannon_max_rate,
            self.bandwidth_efficiency,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(0.0 < self.inner_radius_m && self.inner_radius_m < self.outer_radius_m) {
            return bad("need 0 < inner_radius_m < outer_radius_m");
        }
        if self.shannon_max_rate <= 0.0 || self.bandwidth_efficiency <= 0.0 {
            return bad("shannon_max_rate and bandwidth_efficiency must be positive");
        }
        if self.shadowing_sigma_db < 0.0 {
            return bad("shadowing_sigma_db must be non-negative");
        }
        if self.n_users == 0 {
            return bad("n_users must be positive");
        }
        Ok(())
    }

    /// Mean SNR in dB at distance `d` with shadowing `shadow_db`.
    pub fn mean_snr_db(&self, distance_m: f64, shadow_db: f64) -> f64 {
        let pathloss = self.pathloss_ref_db + 10.0 * self.pathloss_exponent * distance_m.log10();
        self.tx_power_dbm - pathloss + shadow_db - self.noise_power_dbm
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserChannelState {
    pub distance_m: f64,
    pub shadowing_db: f64,
    pub mean_snr_db: f64,
}

/// Places users uniformly over the annulus and draws their shadowing.
pub fn drop_users(config: &CellConfig, seed: u64) -> Result<Vec<UserChannelState>> {
    config.validate()?;
    let mut rng = SimRng::seed_from_u64(seed);
    let (r_in2, r_out2) = (config.inner_radius_m.powi(2), config.outer_radius_m.powi(2));
    let shadow = Normal::new(0.0, config.shadowing_sigma_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok((0..config.n_users)
        .map(|_| {
            // density proportional to r on [r_in, r_out]
            let u: f64 = rng.random();
            let distance_m = (r_in2 + u * (r_out2 - r_in2)).sqrt().clamp(config.inner_radius_m, config.outer_radius_m);
            let shadowing_db = shadow.sample(&mut rng);
            UserChannelState {
                distance_m,
                shadowing_db,
                mean_snr_db: config.mean_snr_db(distance_m, shadowing_db),
            }
        })
        .collect())
}

/// `user,distance_m,shadowing_db,mean_snr_db` rows, 1-based users.
pub fn write_channel_csv<W: Write>(users: &[UserChannelState], mut out: W) -> Result<()> {
    writeln!(out, "user,distance_m,shadowing_db,mean_snr_db")?;
    for (i, u) in users.iter().enumerate() {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6}",
            i + 1,
            u.distance_m,
            u.shadowing_db,
            u.mean_snr_db
        )?;
    }
    Ok(())
}

/// `min(eta * log2(1 + snr), max_rate)`, or 0 below the SNR threshold.
pub fn truncated_shannon_rate(snr_linear: f64, config: &CellConfig) -> f64 {
    if snr_linear.is_nan() || snr_linear <= 0.0 || 10.0 * snr_linear.log10() < config.shannon_min_snr_db {
        return 0.0;
    }
    (config.bandwidth_efficiency / std::f64::consts::LN_2 * snr_linear.ln_1p())
        .min(config.shannon_max_rate)
}

pub const PAIR_BISECTION_ITERS: usize = 30;
pub const PAIR_RATE_TOL: f64 = 1e-9;

/// Largest equal per-user SINR on a two-user degraded broadcast channel.
///
/// The weaker user decodes its layer treating the stronger user's layer as
/// noise; the stronger user cancels the weak layer first. `beta` is the
/// power fraction given to the weak user.
pub fn pair_common_sinr(snr_a: f64, snr_b: f64, config: &CellConfig) -> f64 {
    let (weak, strong) = if snr_a <= snr_b { (snr_a, snr_b) } else { (snr_b, snr_a) };
    let weak_sinr = |beta: f64| beta * weak / ((1.0 - beta) * weak + 1.0);
    let strong_sinr = |beta: f64| (1.0 - beta) * strong;
    // Rate is monotone in SINR, so the search compares SINRs directly.
    // Since ln(1+x) - ln(1+y) <= (x-y)/(1+y) for x >= y, this bound on the
    // SINR gap keeps the rate gap within the tolerance without any logs.
    let sinr_tol = PAIR_RATE_TOL * std::f64::consts::LN_2 / config.bandwidth_efficiency;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..PAIR_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let (w, s) = (weak_sinr(mid), strong_sinr(mid));
        if (w - s).abs() <= sinr_tol * (1.0 + w.min(s)) {
            return w.min(s);
        }
        if w < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // both bracket ends are achievable splits; keep the better one
    weak_sinr(lo).min(strong_sinr(lo)).max(weak_sinr(hi).min(strong_sinr(hi)))
}

/// Equal per-user SINR in closed form: the positive root of
/// `w s x^2 + (w + s) x - w = 0` in the strong user's power fraction `x`,
/// which is the point [`pair_common_sinr`] bisects toward.
pub fn pair_common_sinr_exact(snr_a: f64, snr_b: f64) -> f64 {
    let (weak, strong) = if snr_a <= snr_b { (snr_a, snr_b) } else { (snr_b, snr_a) };
    if weak.is_nan() || weak <= 0.0 {
        return 0.0;
    }
    let b = weak + strong;
    // rationalized root, stable when the discriminant is dominated by b^2
    let x = 2.0 * weak / (b + (b * b + 4.0 * weak * weak * strong).sqrt());
    x * strong
}

/// Sum-rate of serving two users at their largest common truncated rate.
pub fn pair_sum_rate(snr_a: f64, snr_b: f64, config: &CellConfig) -> f64 {
    2.0 * truncated_shannon_rate(pair_common_sinr_exact(snr_a, snr_b), config)
}

/// [`truncated_shannon_rate`] with the dB threshold converted once.
#[derive(Clone, Debug)]
struct RateModel {
    min_snr: f64,
    scale: f64,
    max_rate: f64,
}

impl RateModel {
    fn new(config: &CellConfig) -> Self {
        Self {
            min_snr: 10f64.powf(config.shannon_min_snr_db / 10.0),
            scale: config.bandwidth_efficiency / std::f64::consts::LN_2,
            max_rate: config.shannon_max_rate,
        }
    }

    fn rate(&self, snr: f64) -> f64 {
        if snr.is_nan() || snr < self.min_snr {
            return 0.0;
        }
        (self.scale * snr.ln_1p()).min(self.max_rate)
    }
}

/// Downlink sampler for a fixed user drop.
#[derive(Clone, Debug)]
pub struct CellSampler {
    config: CellConfig,
    model: RateModel,
    mean_snr: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl CellSampler {
    pub fn new(
        users: &[UserChannelState],
        catalog: &VirtualUserCatalog,
        config: &CellConfig,
    ) -> Result<Self> {
        config.validate()?;
        if users.len() != catalog.n() {
            return Err(Error::InvalidConfig(format!(
                "{} users dropped for a catalog of {}",
                users.len(),
                catalog.n()
            )));
        }
        if catalog.n_max() > 2 {
            return Err(Error::InvalidConfig(
                "cell sampler supports at most two users per slot".into(),
            ));
        }
        Ok(Self {
            config: config.clone(),
            model: RateModel::new(config),
            mean_snr: users.iter().map(|u| 10f64.powf(u.mean_snr_db / 10.0)).collect(),
            members: catalog.iter().map(|v| v.members().to_vec()).collect(),
        })
    }

    pub fn config(&self) -> &CellConfig {
        &self.config
    }

    /// Performance vector for given per-user instantaneous SNRs.
    pub fn rates_for(&self, snr: &[f64], out: &mut [f64]) {
        for (slot, members) in out.iter_mut().zip(&self.members) {
            *slot = match members.as_slice() {
                [] => 0.0,
                [i] => self.model.rate(snr[*i]),
                [i, k] => 2.0 * self.model.rate(pair_common_sinr_exact(snr[*i], snr[*k])),
                _ => unreachable!("catalog checked at construction"),
            };
        }
    }
}

impl PerformanceSampler for CellSampler {
    fn len(&self) -> usize {
        self.members.len()
    }

    fn sample(&self, rng: &mut SimRng, out: &mut [f64]) {
        let mut snr = [0.0f64; crate::catalog::MAX_USERS];
        for (s, &mean) in snr.iter_mut().zip(&self.mean_snr) {
            let fade: f64 = rng.sample(Exp1);
            *s = mean * fade;
        }
        self.rates_for(&snr[..self.mean_snr.len()], out);
    }
}

/// i.i.d. test samplers; index 0 (the idle set) is pinned to 0 for the
/// random kinds.
#[derive(Clone, Debug)]
pub enum SyntheticSampler {
    Fixed(Vec<f64>),
    Exponential(Vec<Option<Exp<f64>>>),
    LogNormal(Vec<Option<LogNormal<f64>>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Fixed,
    Exponential,
    Lognormal,
}

impl SyntheticSampler {
    /// `means` has one entry per catalog index; `sigma` is the log-scale
    /// spread for the log-normal kind (means are preserved).
    pub fn new(kind: SyntheticKind, means: Vec<f64>, sigma: f64, catalog: &VirtualUserCatalog) -> Result<Self> {
        if means.len() != catalog.len() {
            return Err(Error::InvalidConfig(format!(
                "{} means for a catalog of {}",
                means.len(),
                catalog.len()
            )));
        }
        if means.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidConfig("means must be finite and non-negative".into()));
        }
        let config_err = |e: &dyn std::fmt::Display| Error::InvalidConfig(e.to_string());
        Ok(match kind {
            SyntheticKind::Fixed => SyntheticSampler::Fixed(means),
            SyntheticKind::Exponential => SyntheticSampler::Exponential(
                means
                    .iter()
                    .enumerate()
                    .map(|(j, &m)| {
                        if j == 0 || m == 0.0 {
                            Ok(None)
                        } else {
                            Exp::new(1.0 / m).map(Some).map_err(|e| config_err(&e))
                        }
                    })
                    .collect::<Result<_>>()?,
            ),
            SyntheticKind::Lognormal => {
                if !sigma.is_finite() || sigma < 0.0 {
                    return Err(Error::InvalidConfig(format!("lognormal sigma {sigma} must be >= 0")));
                }
                SyntheticSampler::LogNormal(
                    means
                        .iter()
                        .enumerate()
                        .map(|(j, &m)| {
                            if j == 0 || m == 0.0 {
                                Ok(None)
                            } else {
                                LogNormal::new(m.ln() - 0.5 * sigma * sigma, sigma)
                                    .map(Some)
                                    .map_err(|e| config_err(&e))
                            }
                        })
                        .collect::<Result<_>>()?,
                )
            }
        })
    }
}

impl PerformanceSampler for SyntheticSampler {
    fn len(&self) -> usize {
        match self {
            SyntheticSampler::Fixed(v) => v.len(),
            SyntheticSampler::Exponential(v) => v.len(),
            SyntheticSampler::LogNormal(v) => v.len(),
        }
    }

    fn sample(&self, rng: &mut SimRng, out: &mut [f64]) {
        match self {
            SyntheticSampler::Fixed(v) => out.copy_from_slice(v),
            SyntheticSampler::Exponential(d) => {
                for (o, d) in out.iter_mut().zip(d) {
                    *o = d.as_ref().map_or(0.0, |d| d.sample(rng));
                }
            }
            SyntheticSampler::LogNormal(d) => {
                for (o, d) in out.iter_mut().zip(d) {
                    *o = d.as_ref().map_or(0.0, |d| d.sample(rng));
                }
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        matches!(self, SyntheticSampler::Fixed(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> VirtualUserCatalog {
        VirtualUserCatalog::homogeneous(5, 2).unwrap()
    }

    #[test]
    fn drop_respects_ring_and_seed() {
        let cfg = CellConfig::default();
        let a = drop_users(&cfg, 7).unwrap();
        let b = drop_users(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for seed in 0..200 {
            for u in drop_users(&cfg, seed).unwrap() {
                assert!((20.0..=100.0).contains(&u.distance_m));
            }
        }
    }

    #[test]
    fn drop_density_is_area_uniform() {
        // P(r <= 60) = (60^2 - 20^2) / (100^2 - 20^2) = 1/3
        let cfg = CellConfig { n_users: 20, ..CellConfig::default() };
        let users: Vec<_> = (0..500).flat_map(|seed| drop_users(&cfg, seed).unwrap()).collect();
        let frac = users.iter().filter(|u| u.distance_m <= 60.0).count() as f64 / users.len() as f64;
        assert!((frac - 1.0 / 3.0).abs() < 0.02, "fraction {frac}");
    }

    #[test]
    fn snr_decreases_with_distance_without_shadowing() {
        let cfg = CellConfig { shadowing_sigma_db: 0.0, n_users: 20, ..CellConfig::default() };
        let mut users = drop_users(&cfg, 3).unwrap();
        users.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m));
        assert!(users.windows(2).all(|p| p[0].distance_m == p[1].distance_m || p[0].mean_snr_db > p[1].mean_snr_db));
    }

    #[test]
    fn truncated_rate_regions() {
        let mut cfg = CellConfig { bandwidth_efficiency: 1.0, ..CellConfig::default() };
        assert_eq!(truncated_shannon_rate(1.0, &cfg), 1.0);
        assert_eq!(truncated_shannon_rate(0.1, &cfg), 0.0);
        assert_eq!(truncated_shannon_rate(0.0, &cfg), 0.0);
        assert_eq!(truncated_shannon_rate(1e12, &cfg), 4.8);
        cfg.shannon_min_snr_db = 3.0;
        assert_eq!(truncated_shannon_rate(1.0, &cfg), 0.0);
    }

    fn grid_best_common_rate(a: f64, b: f64, cfg: &CellConfig) -> f64 {
        let (weak, strong) = (a.min(b), a.max(b));
        (0..=100_000)
            .map(|k| {
                let beta = k as f64 / 100_000.0;
                let w = beta * weak / ((1.0 - beta) * weak + 1.0);
                let s = (1.0 - beta) * strong;
                truncated_shannon_rate(w, cfg).min(truncated_shannon_rate(s, cfg))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn pair_rate_matches_grid_search_and_brackets() {
        let cfg = CellConfig::default();
        let mut rng = stream_rng(11, 0);
        for _ in 0..200 {
            let a = 10f64.powf(rng.random_range(-0.5..2.5));
            let b = 10f64.powf(rng.random_range(-0.5..2.5));
            let sum = pair_sum_rate(a, b, &cfg);
            let grid = 2.0 * grid_best_common_rate(a, b, &cfg);
            assert!(sum >= grid - 1e-6, "bisection {sum} below grid {grid}");
            assert!(sum <= grid + 1e-3, "bisection {sum} above grid {grid}");
            let (ra, rb) = (truncated_shannon_rate(a, &cfg), truncated_shannon_rate(b, &cfg));
            assert!(sum <= ra + rb + 1e-9);
        }
    }

    #[test]
    fn closed_form_pair_rate_agrees_with_bisection() {
        let cfg = CellConfig::default();
        let model = RateModel::new(&cfg);
        let mut rng = stream_rng(13, 0);
        for _ in 0..5000 {
            let a = 10f64.powf(rng.random_range(-1.5..5.0));
            let b = 10f64.powf(rng.random_range(-1.5..5.0));
            let bisected = truncated_shannon_rate(pair_common_sinr(a, b, &cfg), &cfg);
            let exact = truncated_shannon_rate(pair_common_sinr_exact(a, b), &cfg);
            // 30 halvings resolve the power split to about 1e-9
            assert!((exact - bisected).abs() <= 1e-7, "a={a} b={b}: {exact} vs {bisected}");
            assert_eq!(model.rate(a), truncated_shannon_rate(a, &cfg));
            assert_eq!(2.0 * exact, pair_sum_rate(a, b, &cfg));
        }
        // equal SINRs at the root
        let (w, s) = (3.0, 50.0);
        let x = pair_common_sinr_exact(w, s) / s;
        assert!(((1.0 - x) * w / (x * w + 1.0) - x * s).abs() < 1e-12);
    }

    #[test]
    fn pair_rate_beats_symmetric_time_sharing() {
        // away from the truncation edges, superposition dominates TDMA
        let cfg = CellConfig::default();
        let mut rng = stream_rng(12, 0);
        for _ in 0..200 {
            let a = 10f64.powf(rng.random_range(0.0..1.2));
            let b = 10f64.powf(rng.random_range(0.0..1.2));
            let (ra, rb) = (truncated_shannon_rate(a, &cfg), truncated_shannon_rate(b, &cfg));
            let tdma = 2.0 * ra * rb / (ra + rb);
            assert!(pair_sum_rate(a, b, &cfg) >= tdma - 1e-9);
        }
    }

    #[test]
    fn cell_sampler_shapes_and_bounds() {
        let cfg = CellConfig::default();
        let cat = catalog();
        let users = drop_users(&cfg, 5).unwrap();
        let sampler = CellSampler::new(&users, &cat, &cfg).unwrap();
        let mut rng = stream_rng(1, 0);
        let mut out = vec![0.0; cat.len()];
        let singles = [1usize, 2, 3, 4, 5];
        for _ in 0..2_000 {
            sampler.sample(&mut rng, &mut out);
            assert_eq!(out[0], 0.0);
            for &r in &out {
                assert!(r.is_finite() && r >= 0.0 && r <= cat.len() as f64 * cfg.shannon_max_rate);
            }
            for (j, v) in cat.iter().enumerate() {
                if v.len() == 2 {
                    let (a, b) = (v.members()[0], v.members()[1]);
                    assert!(out[j] <= out[singles[a]] + out[singles[b]] + 1e-9);
                }
            }
        }
        let users_det = vec![UserChannelState { distance_m: 50.0, shadowing_db: 0.0, mean_snr_db: 0.0 }; 5];
        let s = CellSampler::new(&users_det, &cat, &cfg).unwrap();
        let mut out = vec![0.0; cat.len()];
        s.rates_for(&[1.0, 2.0, 3.0, 4.0, 5.0], &mut out);
        assert_eq!(out[1], truncated_shannon_rate(1.0, &cfg));
        assert_eq!(out[5], truncated_shannon_rate(5.0, &cfg));
    }

    #[test]
    fn cell_sampler_is_seed_deterministic_and_stationary() {
        let cfg = CellConfig::default();
        let cat = catalog();
        let sampler = CellSampler::new(&drop_users(&cfg, 9).unwrap(), &cat, &cfg).unwrap();
        let draw = |seed| {
            let mut rng = stream_rng(seed, 3);
            let mut out = vec![0.0; cat.len()];
            (0..100).flat_map(|_| { sampler.sample(&mut rng, &mut out); out.clone() }).collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
        assert_ne!(draw(4), draw(5));

        // moments of two disjoint blocks agree
        let mut rng = stream_rng(21, 0);
        let mut out = vec![0.0; cat.len()];
        let mut block = |n: usize| {
            let (mut m1, mut m2) = (vec![0.0; cat.len()], vec![0.0; cat.len()]);
            for _ in 0..n {
                sampler.sample(&mut rng, &mut out);
                for j in 0..cat.len() {
                    m1[j] += out[j] / n as f64;
                    m2[j] += out[j] * out[j] / n as f64;
                }
            }
            (m1, m2)
        };
        let (a1, a2) = block(20_000);
        let (b1, b2) = block(20_000);
        for j in 1..cat.len() {
            let var = (a2[j] - a1[j] * a1[j]).max(1e-12);
            let se = (2.0 * var / 20_000.0).sqrt();
            assert!((a1[j] - b1[j]).abs() <= 5.0 * se + 1e-9, "mean j={j}");
            assert!((a2[j] - b2[j]).abs() <= 0.05 * a2[j].max(1e-9) + 1e-9, "second moment j={j}");
        }
    }

    #[test]
    fn synthetic_samplers() {
        let cat = VirtualUserCatalog::homogeneous(2, 1).unwrap();
        let fixed = SyntheticSampler::new(SyntheticKind::Fixed, vec![0.0, 1.0, 2.0], 0.0, &cat).unwrap();
        let mut rng = stream_rng(0, 0);
        let mut out = vec![9.0; 3];
        fixed.sample(&mut rng, &mut out);
        assert_eq!(out, [0.0, 1.0, 2.0]);
        assert!(fixed.is_deterministic());

        let means = vec![5.0, 1.0, 3.0];
        let exp = SyntheticSampler::new(SyntheticKind::Exponential, means.clone(), 0.0, &cat).unwrap();
        let mut acc = [0.0; 3];
        let n = 100_000;
        for _ in 0..n {
            exp.sample(&mut rng, &mut out);
            for j in 0..3 {
                acc[j] += out[j] / n as f64;
            }
        }
        assert_eq!(acc[0], 0.0);
        for j in 1..3 {
            assert!((acc[j] - means[j]).abs() <= 0.02 * means[j], "j={j}: {}", acc[j]);
        }

        let ln = SyntheticSampler::new(SyntheticKind::Lognormal, vec![0.0, 1.0, 2.0], 0.0, &cat).unwrap();
        ln.sample(&mut rng, &mut out);
        assert!((out[1] - 1.0).abs() < 1e-12 && (out[2] - 2.0).abs() < 1e-12);

        assert!(SyntheticSampler::new(SyntheticKind::Fixed, vec![1.0], 0.0, &cat).is_err());
        assert!(SyntheticSampler::new(SyntheticKind::Exponential, vec![0.0, -1.0, 1.0], 0.0, &cat).is_err());
        assert!(SyntheticSampler::new(SyntheticKind::Lognormal, vec![0.0, 1.0, 1.0], -1.0, &cat).is_err());
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_radii() {
        assert!(toml::from_str::<CellConfig>("inner_radius_m = 10.0\n").is_ok());
        assert!(toml::from_str::<CellConfig>("inner_radius = 10.0\n").is_err());
        let cfg = CellConfig { inner_radius_m: 100.0, ..CellConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
