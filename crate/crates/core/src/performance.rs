//! Exam score: correct answers over questions, as a percentage.

use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// An exact percentage in `[0, 100]`.
///
/// The value is kept as a reduced rational so that
/// `performance × total == 100 × correct` holds exactly; rounding only
/// happens when it is displayed or serialized (one decimal, half up).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Performance(Ratio<u64>);

pub fn compute_performance(correct: u64, total: u64) -> Result<Performance> {
    if total == 0 || correct > total {
        return Err(Error::InvalidCounts { correct, total });
    }
    Ok(Performance(Ratio::new(100 * correct, total)))
}

impl Performance {
    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    /// Value in tenths of a percent, rounded half up.
    pub fn tenths(&self) -> u64 {
        let (n, d) = (*self.0.numer(), *self.0.denom());
        (20 * n + d) / (2 * d)
    }

    /// The one-decimal value as a float, e.g. `75.0` or `33.3`.
    pub fn rounded(&self) -> f64 {
        self.tenths() as f64 / 10.0
    }
}

impl fmt::Display for Performance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.tenths();
        write!(f, "{}.{}", t / 10, t % 10)
    }
}

impl Serialize for Performance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.rounded())
    }
}
