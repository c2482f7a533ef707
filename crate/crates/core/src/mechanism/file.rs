//! Mechanism specification files.
//!
//! Structured key-value text (TOML) with fields `alpha_tilde` (optional:
//! omitted means "critical member of the family"), `beta`, `pi.kind` and
//! `pi.params`:
//!
//! ```toml
//! beta = 0.5
//! [pi]
//! kind = "zero"
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mechanism::{BranchingMechanism, LevyMeasure};

#[derive(Debug, Deserialize)]
pub struct MechanismFile {
    pub alpha_tilde: Option<f64>,
    pub beta: f64,
    pub pi: PiSection,
}

#[derive(Debug, Deserialize)]
pub struct PiSection {
    pub kind: String,
    #[serde(default)]
    pub params: PiParams,
}

#[derive(Debug, Default, Deserialize)]
pub struct PiParams {
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub rate: Option<f64>,
    pub atoms: Option<Vec<(f64, f64)>>,
    pub points: Option<Vec<(f64, f64)>>,
}

impl MechanismFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("mechanism file: {e}")))
    }

    pub fn to_mechanism(&self) -> Result<BranchingMechanism<f64>> {
        let p = &self.pi.params;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("pi.params.{name} required for {}", self.pi.kind)))
        };
        let pi = match self.pi.kind.as_str() {
            "zero" => LevyMeasure::Zero,
            "stable" => LevyMeasure::Stable {
                c: need(p.c, "c")?,
                alpha: need(p.alpha, "alpha")?,
            },
            "exp-density" => LevyMeasure::ExpDensity,
            "inverse-square-exp" => LevyMeasure::InverseSquareExp {
                rate: need(p.rate, "rate")?,
            },
            "atoms" => LevyMeasure::Atoms(
                p.atoms
                    .clone()
                    .ok_or_else(|| Error::Config("pi.params.atoms required".into()))?,
            ),
            "tabulated" => LevyMeasure::Tabulated(
                p.points
                    .clone()
                    .ok_or_else(|| Error::Config("pi.params.points required".into()))?,
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown pi.kind '{other}' (expected zero | stable | exp-density | \
                     inverse-square-exp | atoms | tabulated)"
                )))
            }
        };
        match self.alpha_tilde {
            Some(a) => BranchingMechanism::new(a, self.beta, pi),
            None => BranchingMechanism::critical(self.beta, pi),
        }
    }
}

/// Load a mechanism from a file path.
pub fn load_mechanism(path: &std::path::Path) -> Result<BranchingMechanism<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("read {}: {e}", path.display())))?;
    MechanismFile::parse(&text)?.to_mechanism()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_quadratic() {
        let m = MechanismFile::parse("beta = 0.5\n[pi]\nkind = \"zero\"\n")
            .unwrap()
            .to_mechanism()
            .unwrap();
        assert_eq!(m.eval_psi(2.0).unwrap(), 2.0);
    }

    #[test]
    fn parse_exp_density_defaults_to_critical() {
        let m = MechanismFile::parse("beta = 0.0\n[pi]\nkind = \"exp-density\"\n")
            .unwrap()
            .to_mechanism()
            .unwrap();
        assert!((m.eval_psi(1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_kind_is_config_error() {
        let err = MechanismFile::parse("beta = 1.0\n[pi]\nkind = \"weird\"\n")
            .unwrap()
            .to_mechanism()
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
