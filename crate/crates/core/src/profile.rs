//! Constant profiles shared by the planners.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which constants a planner uses.
///
/// `PaperFaithful` keeps the analysis constants verbatim (4·64² for the
/// dense family, 28·64² for the sparse one). They produce dimensions in the
/// millions and are meant for auditing. `Practical` uses small constants
/// calibrated by the desk-scale experiments. `Variant` is the practical
/// sparse plan with both hash functions at O(log(1/δ))-wise independence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Practical,
    PaperFaithful,
    Variant,
    /// Parameters supplied directly rather than planned.
    Custom,
}

impl Profile {
    pub fn as_str(&self) -> &'static str {
        match self {
            Profile::Practical => "practical",
            Profile::PaperFaithful => "paper-faithful",
            Profile::Variant => "variant",
            Profile::Custom => "custom",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "practical" => Ok(Profile::Practical),
            "paper-faithful" | "paper" => Ok(Profile::PaperFaithful),
            "variant" => Ok(Profile::Variant),
            "custom" => Ok(Profile::Custom),
            other => Err(Error::InvalidParameter(format!(
                "unknown profile '{other}' (expected practical, paper-faithful, variant or custom)"
            ))),
        }
    }
}

/// ε must lie in (0, 1/2] and δ in (0, 1/2).
pub(crate) fn check_eps_delta(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be in (0, 1/2], got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0, 1/2), got {delta}"
        )));
    }
    Ok(())
}

/// Smallest power of two that is >= v (and >= 1).
pub(crate) fn next_pow2_at_least(v: f64) -> u64 {
    if v <= 1.0 {
        return 1;
    }
    let mut a = 1u64;
    while (a as f64) < v {
        a <<= 1;
    }
    a
}

/// 2·ceil(v), clamped to at least 2.
pub(crate) fn even_order(v: f64) -> usize {
    (2 * v.ceil().max(1.0) as usize).max(2)
}
