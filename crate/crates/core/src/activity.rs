use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Activity assigned to one observation interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Fishing,
    Steaming,
    /// Inference failed for the step (e.g. the fit for its trip did not run).
    Unestimated,
}

pub type ActivitySequence = Vec<Activity>;

impl Activity {
    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Fishing => "fishing",
            Activity::Steaming => "steaming",
            Activity::Unestimated => "unestimated",
        }
    }

    pub fn is_estimated(self) -> bool {
        self != Activity::Unestimated
    }

    /// Fishing ↔ Steaming; Unestimated is fixed.
    pub fn swapped(self) -> Self {
        match self {
            Activity::Fishing => Activity::Steaming,
            Activity::Steaming => Activity::Fishing,
            Activity::Unestimated => Activity::Unestimated,
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fishing" | "f" => Ok(Activity::Fishing),
            "steaming" | "s" => Ok(Activity::Steaming),
            "unestimated" | "u" | "" => Ok(Activity::Unestimated),
            other => Err(Error::Config(format!("unknown activity `{other}`"))),
        }
    }
}
