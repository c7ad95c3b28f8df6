//! The JSON run configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::construct::{ConstructionConfig, PhiFunction};
use crate::error::{Error, Result};
use crate::grid::EnergyGrid;
use crate::thouless::QuadratureOptions;
use crate::transfer::PeriodicPotential;

/// Inline values, or a file holding a JSON array of them. Relative paths
/// resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PotentialSpec {
    Inline { values: Vec<f64> },
    File { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSettings {
    /// Construction report written by `construct`.
    pub stages_file: PathBuf,
    #[serde(default = "default_probes")]
    pub probes_per_stage: usize,
    #[serde(default = "default_base_points")]
    pub base_points: usize,
    #[serde(default = "default_offset_ratio")]
    pub offset_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_probes() -> usize {
    10
}

fn default_base_points() -> usize {
    2001
}

fn default_offset_ratio() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSettings {
    #[serde(default = "default_quad_tol")]
    pub tolerance: f64,
    #[serde(default = "default_quad_intervals")]
    pub max_intervals: usize,
    /// Largest acceptable |Thouless - transfer| before `thouless-check`
    /// reports an invariant violation.
    #[serde(default = "default_check_tol")]
    pub check_tolerance: f64,
}

fn default_quad_tol() -> f64 {
    QuadratureOptions::default().tolerance
}

fn default_quad_intervals() -> usize {
    QuadratureOptions::default().max_intervals
}

fn default_check_tol() -> f64 {
    1e-4
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            tolerance: default_quad_tol(),
            max_intervals: default_quad_intervals(),
            check_tolerance: default_check_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub grid: Option<EnergyGrid>,
    /// Window length for the finite-volume IDS column of `ids`.
    #[serde(default)]
    pub finite_n: Option<usize>,
    /// Extra potentials for the averaged Lyapunov column of `lyapunov`.
    #[serde(default)]
    pub family: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub phi: Option<PhiFunction>,
    #[serde(default)]
    pub construction: Option<ConstructionConfig>,
    #[serde(default)]
    pub modulus: Option<ModulusSettings>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSettings>,
}

fn field(path: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{path}: {m}")),
        other => other,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            Error::InvalidInput(format!("config {}: {at}: {}", path.display(), e.inner()))
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn potential(&self, base: &Path) -> Result<PeriodicPotential> {
        let values = match &self.potential {
            None => return Err(Error::InvalidInput("potential: missing".into())),
            Some(PotentialSpec::Inline { values }) => values.clone(),
            Some(PotentialSpec::File { file }) => {
                let p = base.join(file);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| Error::InvalidInput(format!("potential.file: cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidInput(format!("potential.file: {}: {e}", p.display())))?
            }
        };
        PeriodicPotential::new(values).map_err(|e| field("potential.values", e))
    }

    pub fn family(&self) -> Result<Option<crate::transfer::FiniteFamily>> {
        let Some(members) = &self.family else { return Ok(None) };
        let pots = members
            .iter()
            .enumerate()
            .map(|(i, v)| PeriodicPotential::new(v.clone()).map_err(|e| field(&format!("family[{i}]"), e)))
            .collect::<Result<Vec<_>>>()?;
        crate::transfer::FiniteFamily::new(pots).map(Some).map_err(|e| field("family", e))
    }

    pub fn grid(&self) -> Result<EnergyGrid> {
        let g = self.grid.clone().ok_or_else(|| Error::InvalidInput("grid: missing".into()))?;
        g.validate().map_err(|e| field("grid", e))?;
        Ok(g)
    }

    pub fn phi(&self) -> Result<PhiFunction> {
        let phi = self.phi.ok_or_else(|| Error::InvalidInput("phi: missing".into()))?;
        phi.validate().map_err(|e| field("phi", e))?;
        Ok(phi)
    }

    pub fn construction(&self, v0: &PeriodicPotential) -> Result<ConstructionConfig> {
        let c = self.construction.clone().ok_or_else(|| Error::InvalidInput("construction: missing".into()))?;
        c.validate(v0).map_err(|e| field("construction", e))?;
        Ok(c)
    }

    pub fn modulus(&self) -> Result<ModulusSettings> {
        let m = self.modulus.clone().ok_or_else(|| Error::InvalidInput("modulus: missing".into()))?;
        if m.probes_per_stage == 0 {
            return Err(Error::InvalidInput("modulus.probes_per_stage: must be positive".into()));
        }
        if m.base_points < 2 {
            return Err(Error::InvalidInput("modulus.base_points: must be at least 2".into()));
        }
        if !(m.offset_ratio > 1.0 && m.offset_ratio.is_finite()) {
            return Err(Error::InvalidInput("modulus.offset_ratio: must exceed 1".into()));
        }
        Ok(m)
    }

    pub fn quadrature(&self) -> Result<QuadratureSettings> {
        let q = self.quadrature.unwrap_or_default();
        if !(q.tolerance > 0.0) || q.max_intervals == 0 || !(q.check_tolerance > 0.0) {
            return Err(Error::InvalidInput(
                "quadrature: tolerance, max_intervals and check_tolerance must be positive".into(),
            ));
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, text).unwrap();
        RunConfig::load(&p).map(|x| x.0)
    }

    #[test]
    fn type_errors_carry_the_field_path() {
        let e = load(r#"{"construction": {"c0": "three"}}"#).unwrap_err().to_string();
        assert!(e.contains("construction.c0"), "{e}");
        let e = load(r#"{"potentail": {"values": [0]}}"#).unwrap_err().to_string();
        assert!(e.contains("potentail"), "{e}");
    }

    #[test]
    fn semantic_errors_carry_the_field_path() {
        let c = load(r#"{"potential": {"values": []}}"#).unwrap();
        let e = c.potential(Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("potential.values"), "{e}");
        let c = load(r#"{"grid": {"start": 1, "end": 0, "points": 3}}"#).unwrap();
        assert!(c.grid().unwrap_err().to_string().contains("grid"));
    }

    #[test]
    fn potential_from_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("v.json"), "[1.5, -1.5]").unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"potential": {"file": "v.json"}}"#).unwrap();
        let (c, base) = RunConfig::load(&p).unwrap();
        assert_eq!(c.potential(&base).unwrap().values(), &[1.5, -1.5]);
    }
}
