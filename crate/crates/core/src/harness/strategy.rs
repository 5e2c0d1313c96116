use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Query strategy for one simulation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String", into = "String")]
pub enum Strategy {
    /// Class estimation, evidential training, purity pool, informativeness.
    E2oal,
    /// Uniform sample of the unlabeled pool.
    Random,
    /// Lowest primary-head max-probability.
    Uncertainty,
    /// Top purity scores, no candidate pool.
    PurityOnly,
    /// Top informativeness over the whole unlabeled pool.
    InfoOnly,
    /// Full pipeline with every labeled unknown in one auxiliary class.
    NoClassExpansion,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::E2oal,
        Strategy::Random,
        Strategy::Uncertainty,
        Strategy::PurityOnly,
        Strategy::InfoOnly,
        Strategy::NoClassExpansion,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::E2oal => "e2oal",
            Strategy::Random => "random",
            Strategy::Uncertainty => "uncertainty",
            Strategy::PurityOnly => "purity_only",
            Strategy::InfoOnly => "info_only",
            Strategy::NoClassExpansion => "no_class_expansion",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> Self {
        s.name().to_string()
    }
}
