//! Monte Carlo experiment: utility versus window length.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::calibration::{calibrate_thresholds, estimate_long_term_utility, CalibrationReport};
use crate::channel::{stream_rng, PerformanceSampler};
use crate::error::{Error, Result};
use crate::feasibility::build_orr;
use crate::harness::bounds::{theorem4_bound, wald_lower_bound};
use crate::harness::config::ExperimentConfig;
use crate::strategies::{run_window, Strategy, StrategyKind};
use crate::trace::{average_utility, check_fairness};

pub const CSV_HEADER: &str = "s,strategy,mean_utility,ci_half,violations,stop_frac,wald_lb,thm4_lb";

/// 95% normal quantile.
const Z95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    /// `None` marks the long-term reference row.
    pub s: Option<u64>,
    pub strategy: StrategyKind,
    pub mean_utility: f64,
    pub ci_half: f64,
    pub violations: Option<u64>,
    /// Mean stopping time over `s` (ATBS rows).
    pub stop_frac: Option<f64>,
    pub wald_lb: Option<f64>,
    /// Clamped typical-set bound; `None` when epsilon is not positive.
    pub thm4_lb: Option<f64>,
}

impl ExperimentRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{:.6},{:.6},{},{},{},{}",
            self.s.map_or("inf".to_string(), |s| s.to_string()),
            self.strategy,
            self.mean_utility,
            self.ci_half,
            self.violations.map(|v| v.to_string()).unwrap_or_default(),
            opt(self.stop_frac),
            opt(self.wald_lb),
            opt(self.thm4_lb),
        )
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub calibration: Option<CalibrationReport>,
    pub u_tbs: f64,
    pub u_tbs_half: f64,
    pub epsilon: f64,
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(out, "{}", row.csv_line())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Fairness violations reported by ATBS or ORR rows.
    pub fn fair_strategy_violations(&self) -> u64 {
        self.rows
            .iter()
            .filter(|r| r.strategy.is_fair())
            .filter_map(|r| r.violations)
            .sum()
    }
}

/// splitmix64 finalizer, for deriving independent sub-seeds.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_CALIBRATION: u64 = 1;
const TAG_REFERENCE: u64 = 2;
const TAG_TRIALS: u64 = 3;

/// Calibration exactly as [`run_experiment`] performs it for `config`.
pub fn calibrate_for_config(config: &ExperimentConfig) -> Result<CalibrationReport> {
    let demand = config.demand.demand()?;
    let catalog = config.demand.catalog()?;
    let sampler = config.sampler.build(&catalog)?;
    let mut rng = stream_rng(derive_seed(config.seed, TAG_CALIBRATION), 0);
    calibrate_thresholds(&demand, &catalog, &sampler, &config.calibration, &mut rng)
}

struct TrialOutcome {
    utility: f64,
    violated: bool,
    stopping_time: u64,
}

fn mean_and_half_width(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

/// Runs every (window, strategy) cell of the study and the long-term
/// reference. Output depends only on the config, never on worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let demand = config.demand.demand()?;
    let catalog = config.demand.catalog()?;
    let sampler = config.sampler.build(&catalog)?;

    let (thresholds, calibration) = match &config.thresholds {
        Some(th) => (th.clone(), None),
        None => {
            let report = calibrate_for_config(config)?;
            (report.thresholds.clone(), Some(report))
        }
    };
    let (u_tbs, u_tbs_half) = estimate_long_term_utility(
        &thresholds,
        &catalog,
        &sampler,
        config.reference_horizon_slots,
        derive_seed(config.seed, TAG_REFERENCE),
    )?;
    let epsilon = match &calibration {
        Some(rep) => rep.epsilon,
        None => {
            // shares of the reference policy, from a fresh stream
            let mut rng = stream_rng(derive_seed(config.seed, TAG_CALIBRATION), 1);
            let mut perf = vec![0.0; catalog.len()];
            let mut counts = vec![0u64; catalog.n()];
            let slots = if sampler.is_deterministic() { 1 } else { 100_000 };
            for _ in 0..slots {
                sampler.sample(&mut rng, &mut perf);
                let j = crate::strategies::tbs_step(&thresholds, &perf, &catalog);
                for &i in catalog.get(j).members() {
                    counts[i] += 1;
                }
            }
            let shares: Vec<f64> = counts.iter().map(|&c| c as f64 / slots as f64).collect();
            crate::calibration::epsilon_from_shares(&shares, &demand, catalog.n_max())
        }
    };

    let trial_seed = derive_seed(config.seed, TAG_TRIALS);
    let mut rows = Vec::new();
    for (si, &s) in config.window_lengths.iter().enumerate() {
        for &kind in &config.strategies {
            let strategy = match kind {
                StrategyKind::Orr => Strategy::Orr(build_orr(s, &demand, &catalog)?),
                StrategyKind::Tbs => Strategy::Tbs(thresholds.clone()),
                StrategyKind::Atbs => Strategy::Atbs { thresholds: thresholds.clone(), audit: config.audit },
            };
            let outcomes: Vec<TrialOutcome> = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    // same stream for every strategy: common random numbers
                    let mut rng = stream_rng(trial_seed, ((si as u64) << 32) | trial as u64);
                    let run = run_window(&strategy, s, &demand, &catalog, &sampler, &mut rng)?;
                    if trial == 0 {
                        if let Some(dir) = &config.trace_dir {
                            dump_trace(dir, s, kind, &run.trace, &catalog)?;
                        }
                    }
                    Ok(TrialOutcome {
                        utility: average_utility(&run.trace, s as usize)?,
                        violated: !check_fairness(&run.trace, &catalog, &demand).satisfied,
                        stopping_time: run.stopping_time(),
                    })
                })
                .collect::<Result<_>>()?;

            let (mean, half) = mean_and_half_width(outcomes.iter().map(|o| o.utility));
            let violations = outcomes.iter().filter(|o| o.violated).count() as u64;
            let (stop_frac, wald_lb, thm4_lb) = if kind == StrategyKind::Atbs {
                let times: Vec<u64> = outcomes.iter().map(|o| o.stopping_time).collect();
                let frac = times.iter().sum::<u64>() as f64 / times.len() as f64 / s as f64;
                (
                    Some(frac),
                    Some(wald_lower_bound(&times, s, u_tbs)?),
                    theorem4_bound(catalog.len(), s, epsilon).ok(),
                )
            } else {
                (None, None, None)
            };
            rows.push(ExperimentRow {
                s: Some(s),
                strategy: kind,
                mean_utility: mean,
                ci_half: half,
                violations: Some(violations),
                stop_frac,
                wald_lb,
                thm4_lb,
            });
        }
    }
    rows.push(ExperimentRow {
        s: None,
        strategy: StrategyKind::Tbs,
        mean_utility: u_tbs,
        ci_half: u_tbs_half,
        violations: None,
        stop_frac: None,
        wald_lb: None,
        thm4_lb: None,
    });

    if let Some(path) = &config.output {
        let out = ExperimentOutput { rows: rows.clone(), calibration: calibration.clone(), u_tbs, u_tbs_half, epsilon };
        write_atomically(path, out.to_csv_string().as_bytes())?;
    }
    Ok(ExperimentOutput { rows, calibration, u_tbs, u_tbs_half, epsilon })
}

fn dump_trace(
    dir: &Path,
    s: u64,
    kind: StrategyKind,
    trace: &crate::trace::ScheduleTrace,
    catalog: &crate::catalog::VirtualUserCatalog,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(dir.join(format!("trace_s{s}_{kind}.csv")))?;
    trace.write_csv(catalog, std::io::BufWriter::new(file))
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
