//! JSON run configuration. See `docs/config.md` for the schema.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use rm_dpg::linalg::{SolverKind, SolverOptions};
use rm_dpg::mesh::{build_lshape, build_structured_square, SquareBc};
use rm_dpg::model::{example1_polynomial, example2_kirchhoff, example3_lshape, ExactSolution, Load};
use rm_dpg::quadrature::MAX_DEGREE;
use rm_dpg::stages::{PipelineOptions, Problem, QuadDegrees};
use rm_dpg::{BcKind, MaterialTensor};

use crate::{meshio, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    Poly,
    Kirchhoff,
    Lshape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default = "dpg_degree")]
    pub dpg: usize,
    #[serde(default = "fine_degree")]
    pub load: usize,
    #[serde(default = "fine_degree")]
    pub error: usize,
}

fn dpg_degree() -> usize {
    6
}

fn fine_degree() -> usize {
    14
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { dpg: dpg_degree(), load: fine_degree(), error: fine_degree() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Direct,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "direct")]
    pub kind: SolverChoice,
    #[serde(default = "cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "cg_max_iter")]
    pub cg_max_iter: usize,
    /// Write wall-clock solve times into the CSV instead of zeros.
    #[serde(default)]
    pub record_timings: bool,
}

fn direct() -> SolverChoice {
    SolverChoice::Direct
}

fn cg_tol() -> f64 {
    1e-10
}

fn cg_max_iter() -> usize {
    50_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { kind: direct(), cg_tol: cg_tol(), cg_max_iter: cg_max_iter(), record_timings: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialConfig {
    Identity,
    PlaneStress { modulus: f64, poisson: f64 },
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig::Identity
    }
}

impl MaterialConfig {
    pub fn tensor(self) -> MaterialTensor {
        match self {
            MaterialConfig::Identity => MaterialTensor::Identity,
            MaterialConfig::PlaneStress { modulus, poisson } => MaterialTensor::PlaneStress { modulus, poisson },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "csv_name")]
    pub csv: String,
    /// Mesh file per level.
    #[serde(default)]
    pub meshes: bool,
    /// Nodal and elementwise solution values per level.
    #[serde(default)]
    pub solutions: bool,
    /// Element indicators per level.
    #[serde(default)]
    pub estimators: bool,
    /// Element kernels of the first level.
    #[serde(default)]
    pub kernels: bool,
}

fn csv_name() -> String {
    "convergence.csv".to_string()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { csv: csv_name(), meshes: false, solutions: false, estimators: false, kernels: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub t: f64,
    #[serde(default)]
    pub n_refinements: usize,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default = "theta")]
    pub theta: f64,
    /// Series terms per direction for the Kirchhoff solution.
    #[serde(default = "n_terms")]
    pub n_terms: usize,
    #[serde(default)]
    pub quadrature_degrees: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    /// Subdivisions of the built-in initial mesh (4 for the square, 1 for
    /// the L-shape).
    #[serde(default)]
    pub initial_divisions: Option<usize>,
    /// Initial mesh file replacing the built-in one.
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Reserved for scaled test norms on large domains; only 1 is accepted.
    #[serde(default = "one")]
    pub domain_scale: f64,
}

fn theta() -> f64 {
    0.5
}

fn n_terms() -> usize {
    100
}

fn one() -> f64 {
    1.0
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(m) = &cfg.mesh {
            if m.is_relative() {
                cfg.mesh = Some(path.parent().unwrap_or(Path::new(".")).join(m));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.t > 0.0 && self.t <= 1.0) {
            return bad(format!("t = {} must lie in (0, 1]", self.t));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta = {} must lie in (0, 1]", self.theta));
        }
        if self.n_terms == 0 {
            return bad("n_terms must be positive".into());
        }
        let q = self.quadrature_degrees;
        for (name, d) in [("dpg", q.dpg), ("load", q.load), ("error", q.error)] {
            if d == 0 || d > MAX_DEGREE {
                return bad(format!("quadrature_degrees.{name} = {d} outside 1..={MAX_DEGREE}"));
            }
        }
        if !(self.solver.cg_tol > 0.0) || self.solver.cg_max_iter == 0 {
            return bad("solver.cg_tol and solver.cg_max_iter must be positive".into());
        }
        if self.initial_divisions == Some(0) {
            return bad("initial_divisions must be positive".into());
        }
        if self.domain_scale != 1.0 {
            return bad(format!("domain_scale = {} is not supported (only 1)", self.domain_scale));
        }
        if self.output.csv.is_empty() {
            return bad("output.csv must not be empty".into());
        }
        self.material.tensor().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        let q = self.quadrature_degrees;
        PipelineOptions {
            n_refinements: self.n_refinements,
            adaptive: self.adaptive,
            theta: self.theta,
            test_degree: 3,
            quad: QuadDegrees { dpg: q.dpg, load: q.load, error: q.error },
            solver: SolverOptions {
                kind: match self.solver.kind {
                    SolverChoice::Direct => SolverKind::Direct,
                    SolverChoice::Cg => SolverKind::Cg,
                },
                cg_tol: self.solver.cg_tol,
                cg_max_iter: self.solver.cg_max_iter,
                ..SolverOptions::default()
            },
        }
    }

    /// Initial mesh, load and (for identity material) exact solution.
    pub fn problem(&self) -> Result<Problem, CliError> {
        let material = self.material.tensor();
        let (mut mesh, load, exact): (_, Load, Option<Arc<dyn ExactSolution>>) = match self.problem {
            ProblemId::Poly => {
                let ex = example1_polynomial(self.t);
                let n = self.initial_divisions.unwrap_or(4);
                let mesh = build_structured_square(n, SquareBc::uniform(BcKind::HardClamped))?;
                (mesh, Load::Field(Arc::new(move |x| ex.load(x))), Some(Arc::new(ex)))
            }
            ProblemId::Kirchhoff => {
                let ex = example2_kirchhoff(self.t, self.n_terms);
                let n = self.initial_divisions.unwrap_or(4);
                let mesh = build_structured_square(n, SquareBc::uniform(BcKind::HardSimpleSupport))?;
                (mesh, Load::Constant(1.0), Some(Arc::new(ex)))
            }
            ProblemId::Lshape => {
                let p = example3_lshape();
                let n = self.initial_divisions.unwrap_or(1);
                let mesh = build_lshape(n, p.bc)?;
                (mesh, Load::Constant(p.load), None)
            }
        };
        if let Some(path) = &self.mesh {
            mesh = meshio::read_mesh(path)?;
        }
        let exact = if material == MaterialTensor::Identity { exact } else { None };
        Ok(Problem { mesh, t: self.t, material, load, exact })
    }
}
