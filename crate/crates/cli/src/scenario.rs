//! Scenario files (TOML). Every table rejects unknown keys.

use std::path::Path;

use jcone::flow::{Section, Tolerances, VectorFieldModel};
use jcone::linalg;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelSpec,
    /// Default form for analyses that need one.
    #[serde(default)]
    pub form: Option<FormSpec>,
    #[serde(default)]
    pub tolerances: Option<TolSpec>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(rename = "analysis", default)]
    pub analyses: Vec<AnalysisSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolSpec {
    pub rtol: f64,
    pub atol: f64,
}

impl TolSpec {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances::new(self.rtol, self.atol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub series: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Lorenz {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    PlanarLimitCycle {
        #[serde(default = "default_z_rate")]
        z_rate: f64,
    },
}

fn default_sigma() -> f64 {
    10.0
}
fn default_rho() -> f64 {
    28.0
}
fn default_beta() -> f64 {
    8.0 / 3.0
}
fn default_z_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FormSpec {
    Constant { matrix: Vec<Vec<f64>> },
    Diagonal { entries: Vec<f64> },
    /// Adapted search at equilibria, Floquet-adapted field on orbits.
    Adapted,
    /// `s_r dr² + s_φ r² dφ² + s_z dz²` around the z axis.
    Cylindrical { s_r: f64, s_phi: f64, s_z: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub axis: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub guess: Vec<f64>,
    pub period: f64,
    pub section: SectionSpec,
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AnalysisSpec {
    OperatorCheck {
        id: String,
        form: Vec<Vec<f64>>,
        operator: Vec<Vec<f64>>,
    },
    Equilibria {
        id: String,
        seeds: Vec<Vec<f64>>,
    },
    OrbitCheck {
        id: String,
        orbit: OrbitSpec,
    },
    StarCheck {
        id: String,
        #[serde(default)]
        equilibrium_seeds: Vec<Vec<f64>>,
        #[serde(default)]
        orbits: Vec<OrbitSpec>,
        #[serde(default)]
        declared_index: Option<usize>,
    },
    Lyapunov {
        id: String,
        x0: Vec<f64>,
        horizon: f64,
        #[serde(default)]
        k: Option<usize>,
    },
    BoundsCheck {
        id: String,
        /// Start point; ignored when `orbit` is given.
        #[serde(default)]
        x0: Option<Vec<f64>>,
        /// Orbit length; not used with `orbit`, where both sides are
        /// period averages.
        #[serde(default)]
        length: Option<f64>,
        k1: usize,
        k2: usize,
        #[serde(default)]
        orbit: Option<OrbitSpec>,
    },
    Domination {
        id: String,
        x0: Vec<f64>,
        length: f64,
        e: Vec<Vec<f64>>,
        f: Vec<Vec<f64>>,
    },
    VolumeExpansion {
        id: String,
        x0: Vec<f64>,
        length: f64,
        f: Vec<Vec<f64>>,
        p: usize,
        /// Integrate this long before the segment starts.
        #[serde(default)]
        burn_in: f64,
    },
}

impl AnalysisSpec {
    pub fn id(&self) -> &str {
        match self {
            Self::OperatorCheck { id, .. }
            | Self::Equilibria { id, .. }
            | Self::OrbitCheck { id, .. }
            | Self::StarCheck { id, .. }
            | Self::Lyapunov { id, .. }
            | Self::BoundsCheck { id, .. }
            | Self::Domination { id, .. }
            | Self::VolumeExpansion { id, .. } => id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::OperatorCheck { .. } => "operator-check",
            Self::Equilibria { .. } => "equilibria",
            Self::OrbitCheck { .. } => "orbit-check",
            Self::StarCheck { .. } => "star-check",
            Self::Lyapunov { .. } => "lyapunov",
            Self::BoundsCheck { .. } => "bounds-check",
            Self::Domination { .. } => "domination",
            Self::VolumeExpansion { .. } => "volume-expansion",
        }
    }

    fn stochastic(&self) -> bool {
        matches!(self, Self::OperatorCheck { .. } | Self::Lyapunov { .. } | Self::BoundsCheck { .. })
    }
}

pub fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    linalg::from_rows(rows).ok_or_else(|| CliError::ConfigInvalid(format!("{what}: rows must be non-empty and of equal length")))
}

/// Columns given as a list of vectors.
pub fn columns(vectors: &[Vec<f64>], dim: usize, what: &str) -> Result<DMatrix<f64>, CliError> {
    if vectors.is_empty() || vectors.iter().any(|v| v.len() != dim) {
        return Err(CliError::ConfigInvalid(format!("{what}: expected a non-empty list of {dim}-vectors")));
    }
    Ok(DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]))
}

pub fn vector(v: &[f64], dim: usize, what: &str) -> Result<DVector<f64>, CliError> {
    if v.len() != dim {
        return Err(CliError::ConfigInvalid(format!("{what}: expected {dim} entries, got {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

impl ModelSpec {
    pub fn build(&self) -> Result<VectorFieldModel, CliError> {
        match self {
            Self::Lorenz { sigma, rho, beta } => Ok(VectorFieldModel::lorenz(*sigma, *rho, *beta)),
            Self::Linear { matrix: m } => {
                VectorFieldModel::linear(matrix(m, "model.matrix")?).map_err(|e| CliError::ConfigInvalid(format!("model.matrix: {e}")))
            }
            Self::PlanarLimitCycle { z_rate } => Ok(VectorFieldModel::planar_limit_cycle(*z_rate)),
        }
    }
}

impl SectionSpec {
    pub fn build(&self, dim: usize) -> Result<Section, CliError> {
        Section::coordinate(dim, self.axis, self.value).map_err(|e| CliError::ConfigInvalid(format!("section: {e}")))
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::ConfigInvalid(msg) => CliError::ConfigInvalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks that do not need any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.id.is_empty() {
            return Err(CliError::ConfigInvalid("id: must not be empty".into()));
        }
        let model = self.model.build()?;
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.analyses {
            if !seen.insert(a.id()) {
                return Err(CliError::ConfigInvalid(format!("analysis id `{}` is used twice", a.id())));
            }
            if let AnalysisSpec::BoundsCheck { id, x0, length, orbit, .. } = a {
                match (x0, length, orbit) {
                    (_, Some(_), Some(_)) => return Err(CliError::ConfigInvalid(format!("analysis `{id}`: length does not apply to orbit runs"))),
                    (Some(_), None, None) => return Err(CliError::ConfigInvalid(format!("analysis `{id}`: x0 runs need a length"))),
                    (None, _, None) => return Err(CliError::ConfigInvalid(format!("analysis `{id}`: needs x0 or orbit"))),
                    _ => {}
                }
            }
            if a.stochastic() && self.seed.is_none() {
                return Err(CliError::ConfigInvalid(format!("seed: required by {} analysis `{}`", a.kind(), a.id())));
            }
        }
        if let Some(FormSpec::Constant { matrix: m }) = &self.form {
            let m = matrix(m, "form.matrix")?;
            if m.nrows() != model.dim() {
                return Err(CliError::ConfigInvalid(format!("form.matrix: expected dimension {}, got {}", model.dim(), m.nrows())));
            }
        }
        if let Some(t) = &self.tolerances {
            if !(t.rtol > 0.0 && t.atol > 0.0) {
                return Err(CliError::ConfigInvalid("tolerances: rtol and atol must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = Scenario::parse("id = \"x\"\nmodle = 1\n[model]\nfamily = \"lorenz\"\n").unwrap_err();
        let CliError::ConfigInvalid(msg) = err else { panic!() };
        assert!(msg.contains("modle"), "{msg}");
    }

    #[test]
    fn unknown_key_inside_an_analysis() {
        let text = "id = \"x\"\nseed = 1\n[model]\nfamily = \"lorenz\"\n[[analysis]]\nkind = \"lyapunov\"\nid = \"l\"\nx0 = [1.0, 1.0, 1.0]\nhorizon = 10.0\nhorizn = 3\n";
        let CliError::ConfigInvalid(msg) = Scenario::parse(text).unwrap_err() else { panic!() };
        assert!(msg.contains("horizn"), "{msg}");
    }

    #[test]
    fn seed_is_required_for_sampling() {
        let text = "id = \"x\"\n[model]\nfamily = \"lorenz\"\n[[analysis]]\nkind = \"lyapunov\"\nid = \"l\"\nx0 = [1.0, 1.0, 1.0]\nhorizon = 10.0\n";
        let CliError::ConfigInvalid(msg) = Scenario::parse(text).unwrap_err() else { panic!() };
        assert!(msg.contains("seed"));
    }

    #[test]
    fn defaults() {
        let s = Scenario::parse("id = \"x\"\n[model]\nfamily = \"lorenz\"\n").unwrap();
        assert_eq!(s.model, ModelSpec::Lorenz { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0 });
        assert!(s.analyses.is_empty());
    }
}
