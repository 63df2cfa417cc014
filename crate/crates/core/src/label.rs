use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Pruning-quality class. `Good` is `+1`, `NotGood` is `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NotGood,
    Good,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid label {0:?}; expected one of 1, +1, 0, -1")]
pub struct InvalidLabel(pub String);

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Good => 1.0,
            Label::NotGood => -1.0,
        }
    }

    /// Sign of a decision value, with `sign(0) = +1`.
    pub fn from_decision(value: f64) -> Self {
        if value >= 0.0 {
            Label::Good
        } else {
            Label::NotGood
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Good => Label::NotGood,
            Label::NotGood => Label::Good,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Good => "1",
            Label::NotGood => "-1",
        })
    }
}

/// Accepts `1`/`+1` for good and `0`/`-1` for not good.
impl FromStr for Label {
    type Err = InvalidLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" | "+1" => Ok(Label::Good),
            "0" | "-1" => Ok(Label::NotGood),
            other => Err(InvalidLabel(other.to_string())),
        }
    }
}
