//! Basic COCOMO: effort `E = a·KLOC^b` (man-months), duration `D = c·E^d`
//! (months) and team size `P = E/D`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CocomoError {
    #[error("KLOC must be positive and finite, got {0}")]
    Domain(f64),
    #[error("coefficient table: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ProjectClass {
    #[default]
    Organic,
    SemiDetached,
    Embedded,
}

impl ProjectClass {
    pub const ALL: [ProjectClass; 3] = [
        ProjectClass::Organic,
        ProjectClass::SemiDetached,
        ProjectClass::Embedded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProjectClass::Organic => "organic",
            ProjectClass::SemiDetached => "semi_detached",
            ProjectClass::Embedded => "embedded",
        }
    }
}

impl fmt::Display for ProjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "organic" => Ok(ProjectClass::Organic),
            "semi_detached" | "semidetached" => Ok(ProjectClass::SemiDetached),
            "embedded" => Ok(ProjectClass::Embedded),
            other => Err(format!("unknown project class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocomoCoefficients {
    pub a_b: f64,
    pub b_b: f64,
    pub c_b: f64,
    pub d_b: f64,
    pub project_class: ProjectClass,
}

impl CocomoCoefficients {
    pub fn basic(class: ProjectClass) -> Self {
        let (a_b, b_b, c_b, d_b) = match class {
            ProjectClass::Organic => (2.4, 1.05, 2.5, 0.38),
            ProjectClass::SemiDetached => (3.0, 1.12, 2.5, 0.35),
            ProjectClass::Embedded => (3.6, 1.20, 2.5, 0.32),
        };
        CocomoCoefficients {
            a_b,
            b_b,
            c_b,
            d_b,
            project_class: class,
        }
    }
}

impl Default for CocomoCoefficients {
    fn default() -> Self {
        Self::basic(ProjectClass::Organic)
    }
}

/// The three coefficient rows, overridable from `{"organic": {"a_b":..,"b_b":..,"c_b":..,"d_b":..}, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    rows: [CocomoCoefficients; 3],
}

impl Default for CoefficientTable {
    fn default() -> Self {
        CoefficientTable {
            rows: ProjectClass::ALL.map(CocomoCoefficients::basic),
        }
    }
}

#[derive(Deserialize)]
struct RowOverride {
    a_b: f64,
    b_b: f64,
    c_b: f64,
    d_b: f64,
}

impl CoefficientTable {
    pub fn get(&self, class: ProjectClass) -> CocomoCoefficients {
        self.rows[class as usize]
    }

    pub fn from_json(text: &str) -> Result<Self, CocomoError> {
        let raw: std::collections::BTreeMap<String, RowOverride> =
            serde_json::from_str(text).map_err(|e| CocomoError::Parse(e.to_string()))?;
        let mut table = CoefficientTable::default();
        for (name, row) in raw {
            let class: ProjectClass = name.parse().map_err(CocomoError::Parse)?;
            table.rows[class as usize] = CocomoCoefficients {
                a_b: row.a_b,
                b_b: row.b_b,
                c_b: row.c_b,
                d_b: row.d_b,
                project_class: class,
            };
        }
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<Self, CocomoError> {
        let text = std::fs::read_to_string(path).map_err(|source| CocomoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub effort_man_months: f64,
    pub duration_months: f64,
    pub people: f64,
    pub kloc: f64,
}

pub fn estimate(kloc: f64, coeffs: &CocomoCoefficients) -> Result<CostEstimate, CocomoError> {
    if !(kloc > 0.0 && kloc.is_finite()) {
        return Err(CocomoError::Domain(kloc));
    }
    let effort = coeffs.a_b * kloc.powf(coeffs.b_b);
    let duration = coeffs.c_b * effort.powf(coeffs.d_b);
    Ok(CostEstimate {
        effort_man_months: effort,
        duration_months: duration,
        people: effort / duration,
        kloc,
    })
}

/// Convenience for a sample's total SLOC. `None` for an empty sample.
pub fn estimate_sloc(sloc: u64, coeffs: &CocomoCoefficients) -> Option<CostEstimate> {
    estimate(sloc as f64 / 1000.0, coeffs).ok()
}
