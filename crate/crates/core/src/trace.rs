//! Schedule traces and the share/utility accounting computed from them.

use std::io::Write;

use crate::catalog::VirtualUserCatalog;
use crate::demand::TemporalDemand;
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Per-slot activated virtual user and the performance it realized.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScheduleTrace {
    choices: Vec<usize>,
    realized: Vec<f64>,
}

impl ScheduleTrace {
    pub fn with_capacity(s: usize) -> Self {
        Self { choices: Vec::with_capacity(s), realized: Vec::with_capacity(s) }
    }

    pub fn from_parts(choices: Vec<usize>, realized: Vec<f64>) -> Result<Self> {
        if choices.len() != realized.len() {
            return Err(Error::InvalidInput(format!(
                "{} choices but {} realized values",
                choices.len(),
                realized.len()
            )));
        }
        Ok(Self { choices, realized })
    }

    pub fn push(&mut self, choice: usize, realized: f64) {
        self.choices.push(choice);
        self.realized.push(realized);
    }

    /// Slots recorded so far.
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn realized(&self) -> &[f64] {
        &self.realized
    }

    /// Activation counts per user over the first `t` slots.
    pub fn counts(&self, catalog: &VirtualUserCatalog, t: usize) -> Result<ShareVector> {
        let mut shares = ShareVector::new(catalog.n());
        for &j in self.choices.get(..t).ok_or(Error::Exhausted {
            t: t as u64,
            s: self.len() as u64,
        })? {
            if j >= catalog.len() {
                return Err(Error::InvalidInput(format!("choice {j} outside catalog")));
            }
            shares.record(catalog, j);
        }
        Ok(shares)
    }

    /// Writes `slot,subset,realized,count_1,...,count_n` rows.
    pub fn write_csv<W: Write>(&self, catalog: &VirtualUserCatalog, mut out: W) -> Result<()> {
        write!(out, "slot,subset,realized")?;
        for i in 1..=catalog.n() {
            write!(out, ",count_{i}")?;
        }
        writeln!(out)?;
        let mut shares = ShareVector::new(catalog.n());
        for (k, (&j, &r)) in self.choices.iter().zip(&self.realized).enumerate() {
            shares.record(catalog, j);
            write!(out, "{},{},{}", k + 1, catalog.get(j), r)?;
            for c in shares.counts() {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Per-user activation counts after `t` slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVector {
    counts: Vec<u64>,
    t: u64,
}

impl ShareVector {
    pub fn new(n: usize) -> Self {
        Self { counts: vec![0; n], t: 0 }
    }

    #[inline]
    pub fn record(&mut self, catalog: &VirtualUserCatalog, j: usize) {
        for &i in catalog.get(j).members() {
            self.counts[i] += 1;
        }
        self.t += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub(crate) fn set_raw(&mut self, counts: &[u64], t: u64) {
        self.counts.copy_from_slice(counts);
        self.t = t;
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn share(&self, i: usize) -> Result<Rational> {
        if self.t == 0 {
            return Err(Error::UndefinedShare);
        }
        Ok(Rational::from(self.counts[i]) / Rational::from(self.t))
    }
}

/// Share of user `i` (0-based) over the first `t` slots of the trace.
pub fn temporal_share(
    trace: &ScheduleTrace,
    catalog: &VirtualUserCatalog,
    i: usize,
    t: usize,
) -> Result<Rational> {
    if t == 0 {
        return Err(Error::UndefinedShare);
    }
    if i >= catalog.n() {
        return Err(Error::InvalidInput(format!("user {i} outside 0..{}", catalog.n())));
    }
    trace.counts(catalog, t)?.share(i)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub user: usize,
    pub share: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairnessReport {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
}

/// Exact check of `lower_i <= A_{i,s} <= upper_i` on a complete trace.
pub fn check_fairness(
    trace: &ScheduleTrace,
    catalog: &VirtualUserCatalog,
    demand: &TemporalDemand,
) -> FairnessReport {
    let s = trace.len();
    let shares = match trace.counts(catalog, s) {
        Ok(c) if s > 0 => c,
        // An empty window meets nothing but the all-zero demand.
        _ => ShareVector::new(catalog.n()),
    };
    let violations: Vec<Violation> = (0..demand.n())
        .filter_map(|i| {
            let share = shares.share(i).unwrap_or_else(|_| Rational::zero());
            let ok = s > 0 && demand.lower()[i] <= share && share <= demand.upper()[i];
            (!ok).then_some(Violation { user: i, share })
        })
        .collect();
    FairnessReport { satisfied: violations.is_empty(), violations }
}

/// Mean realized performance over the first `t` slots.
pub fn average_utility(trace: &ScheduleTrace, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::UndefinedShare);
    }
    let slice = trace.realized.get(..t).ok_or(Error::Exhausted {
        t: t as u64,
        s: trace.len() as u64,
    })?;
    Ok(slice.iter().sum::<f64>() / t as f64)
}
