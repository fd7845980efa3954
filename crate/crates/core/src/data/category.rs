use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Top-level PHI families. HIPAA's identifier list collapses onto these
/// seven; finer distinctions travel as a free-form subtype.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PhiCategory {
    Name,
    Profession,
    Location,
    Age,
    Date,
    Contact,
    Id,
}

impl PhiCategory {
    pub const ALL: [PhiCategory; 7] = [
        PhiCategory::Name,
        PhiCategory::Profession,
        PhiCategory::Location,
        PhiCategory::Age,
        PhiCategory::Date,
        PhiCategory::Contact,
        PhiCategory::Id,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhiCategory::Name => "NAME",
            PhiCategory::Profession => "PROFESSION",
            PhiCategory::Location => "LOCATION",
            PhiCategory::Age => "AGE",
            PhiCategory::Date => "DATE",
            PhiCategory::Contact => "CONTACT",
            PhiCategory::Id => "ID",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PhiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown PHI category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for PhiCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhiCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}
