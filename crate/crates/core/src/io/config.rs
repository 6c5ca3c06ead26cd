//! Run configuration: TOML file with shipped presets and exhaustive
//! validation before any solve.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientOptions;
use crate::constitutive::{Mat2, MaterialParams, PermeabilityUpdate};
use crate::error::{Error, Result};
use crate::geometry::{build_unit_cell, CellParams, Sampling, TAG_BOTTOM, TAG_LEFT, TAG_RIGHT, TAG_TOP};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Validation,
    Shear,
    Inflation,
    Custom,
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Option<ScenarioKind> {
        match s {
            "validation" => Some(ScenarioKind::Validation),
            "shear" => Some(ScenarioKind::Shear),
            "inflation" => Some(ScenarioKind::Inflation),
            "custom" => Some(ScenarioKind::Custom),
            _ => None,
        }
    }
}

/// Rectangular macroscopic sample and its mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Shear moduli of channel 1, channel 2 and matrix [Pa].
    pub mu: [f64; 3],
    /// Permeability tensors (row-major) of channel 1, channel 2 and matrix.
    pub permeability: [[[f64; 2]; 2]; 3],
    /// Scale ratio between cell and sample.
    pub eps: f64,
    #[serde(default)]
    pub permeability_update: PermeabilityUpdate,
}

impl MaterialConfig {
    pub fn params(&self) -> MaterialParams {
        MaterialParams {
            mu: self.mu,
            permeability: self.permeability.map(|k| Mat2::new(k[0][0], k[0][1], k[1][0], k[1][1])),
            eps: self.eps,
            permeability_update: self.permeability_update,
        }
    }
}

/// Direct solver on the periodic tiling of the cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub enabled: bool,
    /// Cells along x and y; their size is `eps`.
    pub tiling: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write VTK snapshots every this many steps (0 disables).
    #[serde(default)]
    pub vtk_every: usize,
    /// Sample points whose cells are written with the snapshots.
    #[serde(default)]
    pub micro_cells: Vec<usize>,
    /// Named probe points in the initial configuration.
    #[serde(default)]
    pub probes: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub checkpoint: bool,
}

/// Tolerances of the reference comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub linf: f64,
    pub l2: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { linf: 0.10, l2: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: ScenarioKind,
    pub domain: DomainConfig,
    pub cell: CellParams,
    pub material: MaterialConfig,
    #[serde(default)]
    pub coefficients: CoefficientOptions,
    pub scenario: Scenario,
    pub reference: ReferenceConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn table_material(eps: f64) -> MaterialConfig {
    let iso = |k: f64| [[k, 0.0], [0.0, k]];
    MaterialConfig {
        mu: [0.6e6, 0.6e6, 1.0e6],
        permeability: [iso(1e-6), iso(2e-6), iso(1e-4)],
        eps,
        permeability_update: PermeabilityUpdate::Constant,
    }
}

impl RunConfig {
    pub fn preset(kind: ScenarioKind) -> RunConfig {
        let probes = BTreeMap::from([("A".to_string(), [0.05, 0.05]), ("B".to_string(), [0.15, 0.05])]);
        let domain = |nx, ny| DomainConfig {
            lx: 0.2,
            ly: 0.1,
            nx,
            ny,
            sampling: Sampling::PerElement,
        };
        let output = |dir: &str| OutputConfig {
            directory: PathBuf::from(dir),
            vtk_every: 10,
            micro_cells: vec![],
            probes: probes.clone(),
            checkpoint: false,
        };
        match kind {
            ScenarioKind::Validation | ScenarioKind::Custom => RunConfig {
                name: kind,
                domain: domain(8, 4),
                cell: CellParams::straight([0.2, 0.2], 16),
                material: table_material(0.025),
                coefficients: CoefficientOptions::default(),
                scenario: Scenario::validation(0.04),
                reference: ReferenceConfig {
                    enabled: true,
                    tiling: [8, 4],
                },
                output: output("out/validation"),
                compare: CompareConfig::default(),
            },
            ScenarioKind::Shear => RunConfig {
                name: kind,
                domain: domain(16, 8),
                cell: CellParams::curved(0.15, 0.1, 16),
                material: table_material(1e-3),
                coefficients: CoefficientOptions::default(),
                scenario: Scenario::shear(-0.08),
                reference: ReferenceConfig {
                    enabled: false,
                    tiling: [200, 100],
                },
                output: OutputConfig {
                    micro_cells: vec![],
                    ..output("out/shear")
                },
                compare: CompareConfig::default(),
            },
            ScenarioKind::Inflation => RunConfig {
                name: kind,
                domain: domain(16, 8),
                cell: CellParams::curved(0.15, 0.1, 16),
                material: table_material(1e-3),
                coefficients: CoefficientOptions::default(),
                scenario: Scenario::inflation(3e5, 1.5e5),
                reference: ReferenceConfig {
                    enabled: false,
                    tiling: [200, 100],
                },
                output: output("out/inflation"),
                compare: CompareConfig::default(),
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// Every problem found, one per line.
    pub fn problems(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let d = &self.domain;
        if !(d.lx > 0.0 && d.ly > 0.0 && d.lx.is_finite() && d.ly.is_finite()) {
            errors.push(format!("domain size must be positive (got {} x {})", d.lx, d.ly));
        }
        if d.nx == 0 || d.ny == 0 {
            errors.push("domain mesh needs at least one element per direction".into());
        }
        let m = &self.material;
        for (i, mu) in m.mu.iter().enumerate() {
            if !(*mu > 0.0 && mu.is_finite()) {
                errors.push(format!("shear modulus of region {} must be positive (got {mu})", i + 1));
            }
        }
        for (i, k) in m.permeability.iter().enumerate() {
            let ok = k.iter().flatten().all(|v| v.is_finite());
            let sym = (k[0][1] - k[1][0]).abs() <= 1e-12 * (k[0][0].abs() + k[1][1].abs());
            let psd = k[0][0] >= 0.0 && k[1][1] >= 0.0 && k[0][0] * k[1][1] - k[0][1] * k[1][0] >= 0.0;
            let pos = k[0][0] + k[1][1] > 0.0;
            if !(ok && sym && psd && pos) {
                errors.push(format!("permeability of region {} must be symmetric positive semidefinite and nonzero", i + 1));
            }
        }
        if !(m.eps > 0.0 && m.eps.is_finite()) {
            errors.push(format!("scale ratio eps must be positive (got {})", m.eps));
        }
        if let Err(e) = build_unit_cell(&self.cell) {
            errors.push(format!("cell geometry: {e}"));
        }
        if !(self.coefficients.identity_tol > 0.0) {
            errors.push("identity tolerance must be positive".into());
        }
        let st = self.coefficients.pressure_stabilization;
        if !(st >= 0.0 && st.is_finite()) {
            errors.push(format!("pressure stabilization must be non-negative (got {st})"));
        }
        self.scenario.validate(&[TAG_LEFT, TAG_RIGHT, TAG_BOTTOM, TAG_TOP], &mut errors);
        if self.reference.enabled {
            let [tx, ty] = self.reference.tiling;
            if tx == 0 || ty == 0 {
                errors.push("reference tiling needs at least one cell per direction".into());
            } else {
                let (ex, ey) = (tx as f64 * m.eps, ty as f64 * m.eps);
                if (ex - d.lx).abs() > 1e-9 * d.lx || (ey - d.ly).abs() > 1e-9 * d.ly {
                    errors.push(format!(
                        "reference tiling {tx} x {ty} of cells of size {} covers {ex} x {ey}, not the domain {} x {}",
                        m.eps, d.lx, d.ly
                    ));
                }
            }
        }
        let n_samples = match d.sampling {
            Sampling::PerElement => d.nx * d.ny,
            Sampling::PerQuadrature => 4 * d.nx * d.ny,
        };
        for &s in &self.output.micro_cells {
            if s >= n_samples {
                errors.push(format!("micro cell output {s} exceeds the {n_samples} sample points"));
            }
        }
        for (name, p) in &self.output.probes {
            if !(p[0] >= 0.0 && p[0] <= d.lx && p[1] >= 0.0 && p[1] <= d.ly) {
                errors.push(format!("probe '{name}' at ({}, {}) lies outside the domain", p[0], p[1]));
            }
        }
        if !(self.compare.linf > 0.0 && self.compare.l2 > 0.0) {
            errors.push("comparison tolerances must be positive".into());
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("\n")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for k in [ScenarioKind::Validation, ScenarioKind::Shear, ScenarioKind::Inflation] {
            let c = RunConfig::preset(k);
            c.validate().unwrap();
            let back = RunConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn table_values_in_presets() {
        let v = RunConfig::preset(ScenarioKind::Validation);
        assert_eq!(v.material.mu, [0.6e6, 0.6e6, 1e6]);
        assert_eq!(v.material.permeability[0][0][0], 1e-6);
        assert_eq!(v.material.permeability[1][1][1], 2e-6);
        assert_eq!(v.material.permeability[2][0][0], 1e-4);
        assert_eq!(v.material.eps, 0.025);
        assert_eq!(v.scenario.displacement[1].value, 0.04);
        let s = RunConfig::preset(ScenarioKind::Shear);
        assert_eq!(s.material.eps, 1e-3);
        assert_eq!(s.scenario.displacement[3].value, -0.08);
        let i = RunConfig::preset(ScenarioKind::Inflation);
        assert_eq!(i.scenario.pressure[0].value, 3e5);
        assert_eq!(i.scenario.pressure[1].value, 1.5e5);
    }

    #[test]
    fn negative_modulus_is_rejected_with_all_problems() {
        let mut c = RunConfig::preset(ScenarioKind::Validation);
        c.material.mu[2] = -1.0;
        c.material.eps = 0.0;
        let p = c.problems();
        assert!(p.iter().any(|s| s.contains("shear modulus of region 3")));
        assert!(p.iter().any(|s| s.contains("eps")));
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = RunConfig::preset(ScenarioKind::Validation).to_toml().replace("[domain]", "[domain]\nbogus = 1");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }
}
