use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Per-user lower and upper bounds on the temporal share.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDemand", into = "RawDemand")]
pub struct TemporalDemand {
    lower: Vec<Rational>,
    upper: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    lower: Vec<Rational>,
    upper: Vec<Rational>,
}

impl TryFrom<RawDemand> for TemporalDemand {
    type Error = Error;
    fn try_from(raw: RawDemand) -> Result<Self> {
        TemporalDemand::new(raw.lower, raw.upper)
    }
}

impl From<TemporalDemand> for RawDemand {
    fn from(d: TemporalDemand) -> Self {
        RawDemand { lower: d.lower, upper: d.upper }
    }
}

impl TemporalDemand {
    pub fn new(lower: Vec<Rational>, upper: Vec<Rational>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidConfig(format!(
                "demand vectors must be non-empty and equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        let one = Rational::one();
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_negative() || lo > hi || hi > &one {
                return Err(Error::InvalidConfig(format!(
                    "user {}: need 0 <= {lo} <= {hi} <= 1",
                    i + 1
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Equality constraints: lower = upper = `shares`.
    pub fn equality(shares: Vec<Rational>) -> Result<Self> {
        Self::new(shares.clone(), shares)
    }

    /// Same bounds for each of `n` users.
    pub fn uniform(n: usize, lower: Rational, upper: Rational) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[Rational] {
        &self.lower
    }

    pub fn upper(&self) -> &[Rational] {
        &self.upper
    }

    pub fn is_equality(&self) -> bool {
        self.lower == self.upper
    }

    /// Integer slot-count bounds over a window of `s` slots:
    /// `(ceil(s * lower_i), floor(s * upper_i))`.
    pub fn count_bounds(&self, s: u64) -> Result<CountBounds> {
        let lower = self.lower.iter().map(|w| w.ceil_mul(s)).collect::<Result<_>>()?;
        let upper = self.upper.iter().map(|w| w.floor_mul(s)).collect::<Result<_>>()?;
        Ok(CountBounds { s, lower, upper })
    }
}

/// Slot-count bounds for a fixed window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountBounds {
    pub s: u64,
    pub lower: Vec<u64>,
    pub upper: Vec<u64>,
}
