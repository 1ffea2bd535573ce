//! JSON problem configuration with a strict schema.
//!
//! Unknown keys are rejected everywhere: a typo in a scientific config must
//! fail loudly, not silently run a different experiment. Field expressions
//! are limited to a few built-in kinds (constants, coordinates, polynomials
//! with listed coefficients, affine functions of `|x_j|`, box indicators);
//! there is no general expression parser.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::{AffineAbs, Constant, FieldRef, IndicatorBox, Polynomial};
use crate::problem::{
    Atom, BoundaryData, Domain, DriftField, EllipticField, JumpKernel, ProblemSpec,
    RedistributionLaw, UniformComponent,
};
use crate::sim::{ExitRule, HazardRule, SimConfig};

/// Polynomial terms as listed in configs: `[[coeff, [p_1, ..., p_d]], ...]`.
pub type PolyTerms = Vec<(f64, Vec<u32>)>;

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum FieldConfig {
    Constant { value: f64 },
    Coordinate { index: usize },
    Expr { terms: PolyTerms },
    AffineAbs { constant: f64, coeffs: Vec<f64> },
    IndicatorBox { lo: Vec<f64>, hi: Vec<f64> },
}

impl FieldConfig {
    pub fn build(&self, dim: usize) -> Result<FieldRef> {
        match self {
            FieldConfig::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config("constant field value must be finite".into()));
                }
                Ok(Arc::new(Constant(*value)))
            }
            FieldConfig::Coordinate { index } => {
                if *index >= dim {
                    return Err(Error::Config(format!(
                        "coordinate index {index} out of range for dim {dim}"
                    )));
                }
                Ok(Arc::new(Polynomial::coordinate(dim, *index)))
            }
            FieldConfig::Expr { terms } => {
                let poly = Polynomial::new(dim, terms.clone()).map_err(Error::Config)?;
                Ok(Arc::new(poly))
            }
            FieldConfig::AffineAbs { constant, coeffs } => {
                if coeffs.len() != dim {
                    return Err(Error::Config(format!(
                        "affine_abs needs {dim} coefficients, got {}",
                        coeffs.len()
                    )));
                }
                Ok(Arc::new(AffineAbs {
                    c0: *constant,
                    coeffs: coeffs.clone(),
                }))
            }
            FieldConfig::IndicatorBox { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::Config(format!(
                        "indicator_box bounds must have length {dim}"
                    )));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::Config("indicator_box needs lo <= hi".into()));
                }
                Ok(Arc::new(IndicatorBox {
                    lo: lo.clone(),
                    hi: hi.clone(),
                }))
            }
        }
    }

    /// Crude sup bound of |field| over `|x_j| <= radius`, when one is
    /// available from the shape of the expression alone.
    pub fn sup_hint(&self, radius: f64) -> Option<f64> {
        match self {
            FieldConfig::Constant { value } => Some(value.abs()),
            FieldConfig::Coordinate { .. } => Some(radius),
            FieldConfig::Expr { terms } => {
                let mut acc = 0.0;
                for (c, powers) in terms {
                    let total: u32 = powers.iter().sum();
                    acc += c.abs() * radius.max(1.0).powi(total as i32);
                }
                Some(acc)
            }
            FieldConfig::AffineAbs { constant, coeffs } => {
                Some(constant.abs() + coeffs.iter().map(|c| c.abs() * radius).sum::<f64>())
            }
            FieldConfig::IndicatorBox { .. } => Some(1.0),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum EllipticConfig {
    Identity {
        #[serde(default)]
        lambda: Option<f64>,
    },
    ConstantMatrix {
        matrix: Vec<Vec<f64>>,
        lambda: f64,
    },
    /// Diagonal matrix of polynomials `a_jj(x)`.
    Expr {
        diag: Vec<PolyTerms>,
        lambda: f64,
    },
}

impl EllipticConfig {
    pub fn build(&self, dim: usize) -> Result<EllipticField> {
        match self {
            EllipticConfig::Identity { lambda } => {
                EllipticField::identity(dim, lambda.unwrap_or(1.0))
            }
            EllipticConfig::ConstantMatrix { matrix, lambda } => {
                if matrix.len() != dim || matrix.iter().any(|row| row.len() != dim) {
                    return Err(Error::Config(format!(
                        "constant_matrix must be {dim}x{dim}"
                    )));
                }
                let a = DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]);
                EllipticField::constant(a, *lambda)
            }
            EllipticConfig::Expr { diag, lambda } => {
                if diag.len() != dim {
                    return Err(Error::Config(format!(
                        "expr elliptic needs {dim} diagonal entries, got {}",
                        diag.len()
                    )));
                }
                let entries = diag
                    .iter()
                    .map(|t| Polynomial::new(dim, t.clone()).map_err(Error::Config))
                    .collect::<Result<Vec<_>>>()?;
                EllipticField::variable_diag(entries, *lambda)
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum DriftConfig {
    Zero,
    Constant {
        vector: Vec<f64>,
    },
    Expr {
        components: Vec<PolyTerms>,
        #[serde(default)]
        bound: Option<f64>,
    },
}

impl DriftConfig {
    pub fn build(&self, dim: usize) -> Result<DriftField> {
        match self {
            DriftConfig::Zero => Ok(DriftField::zero(dim)),
            DriftConfig::Constant { vector } => {
                if vector.len() != dim {
                    return Err(Error::Config(format!(
                        "drift vector must have length {dim}"
                    )));
                }
                DriftField::constant(vector.clone())
            }
            DriftConfig::Expr { components, bound } => {
                if components.len() != dim {
                    return Err(Error::Config(format!(
                        "drift needs {dim} components, got {}",
                        components.len()
                    )));
                }
                let fields = components
                    .iter()
                    .map(|t| -> Result<FieldRef> {
                        let p = Polynomial::new(dim, t.clone()).map_err(Error::Config)?;
                        Ok(Arc::new(p) as FieldRef)
                    })
                    .collect::<Result<Vec<_>>>()?;
                DriftField::variable(fields, *bound)
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub weight: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuConfig {
    /// Atoms as `[[weight, [y_1, ..., y_d]], ...]`.
    pub atoms: Vec<(f64, Vec<f64>)>,
    #[serde(default)]
    pub density: Option<DensityConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpsConfig {
    pub kappa: FieldConfig,
    #[serde(default)]
    pub kappa_bound: Option<f64>,
    pub nu: NuConfig,
}

impl JumpsConfig {
    pub fn build(&self, dim: usize) -> Result<JumpKernel> {
        let atoms = self
            .atoms_as_structs(dim)?;
        let density = match &self.nu.density {
            None => None,
            Some(d) => {
                if d.lo.len() != dim || d.hi.len() != dim {
                    return Err(Error::Config(format!(
                        "density bounds must have length {dim}"
                    )));
                }
                Some(UniformComponent {
                    weight: d.weight,
                    lo: d.lo.clone(),
                    hi: d.hi.clone(),
                })
            }
        };
        Ok(JumpKernel {
            kappa: self.kappa.build(dim)?,
            kappa_bound: self.kappa_bound,
            nu: RedistributionLaw::new(dim, atoms, density)?,
        })
    }

    fn atoms_as_structs(&self, dim: usize) -> Result<Vec<Atom>> {
        self.nu
            .atoms
            .iter()
            .map(|(w, y)| {
                if y.len() != dim {
                    return Err(Error::Config(format!(
                        "atom location must have length {dim}, got {}",
                        y.len()
                    )));
                }
                Ok(Atom {
                    weight: *w,
                    point: y.clone(),
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum DomainConfig {
    Interval { lo: f64, hi: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl DomainConfig {
    pub fn build(&self, dim: usize) -> Result<Domain> {
        let domain = match self {
            DomainConfig::Interval { lo, hi } => {
                if dim != 1 {
                    return Err(Error::Config("interval domain needs dim = 1".into()));
                }
                Domain::interval(*lo, *hi)?
            }
            DomainConfig::Ball { center, radius } => Domain::ball(center.clone(), *radius)?,
            DomainConfig::Box { lo, hi } => Domain::hyper_box(lo.clone(), hi.clone())?,
        };
        if domain.dim() != dim {
            return Err(Error::Config(format!(
                "domain dimension {} does not match dim {dim}",
                domain.dim()
            )));
        }
        Ok(domain)
    }
}

fn default_dt_base() -> f64 {
    SimConfig::default().dt_base
}
fn default_dt_boundary_factor() -> f64 {
    SimConfig::default().dt_boundary_factor
}
fn default_max_steps() -> u64 {
    SimConfig::default().max_steps
}
fn default_max_jumps() -> u64 {
    SimConfig::default().max_jumps
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt_base")]
    pub dt_base: f64,
    #[serde(default = "default_dt_boundary_factor")]
    pub dt_boundary_factor: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_max_jumps")]
    pub max_jumps: u64,
    #[serde(default)]
    pub hazard_rule: HazardRuleConfig,
    #[serde(default)]
    pub exit_rule: ExitRuleConfig,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardRuleConfig {
    #[default]
    Trapezoid,
    LeftPoint,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitRuleConfig {
    #[default]
    FirstExteriorSample,
    BridgeCorrected,
}

impl SimSection {
    pub fn build(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            dt_base: self.dt_base,
            dt_boundary_factor: self.dt_boundary_factor,
            max_steps: self.max_steps,
            max_jumps: self.max_jumps,
            hazard_rule: match self.hazard_rule {
                HazardRuleConfig::Trapezoid => HazardRule::Trapezoid,
                HazardRuleConfig::LeftPoint => HazardRule::LeftPoint,
            },
            exit_rule: match self.exit_rule {
                ExitRuleConfig::FirstExteriorSample => ExitRule::FirstExteriorSample,
                ExitRuleConfig::BridgeCorrected => ExitRule::BridgeCorrected,
            },
        };
        cfg.check()?;
        Ok(cfg)
    }
}

fn default_alpha() -> f64 {
    1.0
}
fn default_alphas() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
}
fn default_target_stderr() -> f64 {
    1e-2
}
fn default_z_threshold() -> f64 {
    crate::stats::DEFAULT_Z_THRESHOLD
}
fn default_radii() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

/// Parameters for the statistical identity and asymptotics checks.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_target_stderr")]
    pub target_stderr: f64,
    #[serde(default = "default_z_threshold")]
    pub z_threshold: f64,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub probes: Option<Vec<Vec<f64>>>,
    /// Declared sup bound for the resolvent integrand `f`.
    #[serde(default)]
    pub sup_f: Option<f64>,
    /// Declared sup bound for the boundary data in identity checks.
    #[serde(default)]
    pub phi_sup: Option<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            alphas: default_alphas(),
            target_stderr: default_target_stderr(),
            z_threshold: default_z_threshold(),
            radii: default_radii(),
            probes: None,
            sup_f: None,
            phi_sup: None,
        }
    }
}

/// Top-level problem configuration. `parse` + `build_problem` turn a JSON
/// document into a validated [`ProblemSpec`]; the optional sections carry
/// run parameters for the command-line driver.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    pub elliptic: EllipticConfig,
    #[serde(default)]
    pub drift: Option<DriftConfig>,
    #[serde(default)]
    pub jumps: Option<JumpsConfig>,
    pub domain: DomainConfig,
    pub phi: FieldConfig,
    /// Declared sup bound for |phi|; derived from the expression if absent.
    #[serde(default)]
    pub phi_bound: Option<f64>,
    /// Evaluation points for solves and identity checks.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Integrand for resolvent operations.
    #[serde(default)]
    pub f: Option<FieldConfig>,
    #[serde(default)]
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub n_paths: Option<u64>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn build_problem(&self) -> Result<ProblemSpec> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        let domain = self.domain.build(self.dim)?;
        let (bb_lo, bb_hi) = domain.bounding_box();
        let radius = bb_lo
            .iter()
            .chain(&bb_hi)
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        let sup_bound = self.phi_bound.or_else(|| self.phi.sup_hint(radius));
        let spec = ProblemSpec {
            elliptic: self.elliptic.build(self.dim)?,
            drift: match &self.drift {
                Some(d) => d.build(self.dim)?,
                None => DriftField::zero(self.dim),
            },
            jumps: match &self.jumps {
                Some(j) => Some(j.build(self.dim)?),
                None => None,
            },
            domain,
            boundary: BoundaryData {
                phi: self.phi.build(self.dim)?,
                sup_bound,
            },
        };
        spec.check_dims()?;
        Ok(spec)
    }

    pub fn build_sim(&self) -> Result<SimConfig> {
        match &self.sim {
            Some(s) => s.build(),
            None => Ok(SimConfig::default()),
        }
    }

    pub fn verify_section(&self) -> VerifySection {
        self.verify.clone().unwrap_or_default()
    }

    /// Points for solves/checks; errors when the config does not list any.
    pub fn require_points(&self) -> Result<&[Vec<f64>]> {
        match &self.points {
            Some(p) if !p.is_empty() => Ok(p),
            _ => Err(Error::Config(
                "this operation needs a non-empty \"points\" list in the config".into(),
            )),
        }
    }
}
