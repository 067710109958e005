//! Run configuration: JSON parsing and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use qot_core::generate::{CostKind, GeneratorSpec, ProblemData};
use qot_core::herm::MatrixFile;
use qot_core::{Balanced, Hermitian, ProductSpace, Reg};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_PRIMAL_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20_000;
pub const DEFAULT_TAU_GRID: [f64; 5] = [1.0, 10.0, 1e2, 1e3, 1e4];
pub const DEFAULT_N_GRID: [u32; 3] = [4, 16, 64];
pub const DEFAULT_OUTPUT_DIR: &str = "qot-out";

const KNOWN_FIELDS: [&str; 12] = [
    "mode",
    "instance",
    "regularizer",
    "epsilon",
    "tau",
    "tau2_factor",
    "n_grid",
    "solver",
    "tolerance",
    "primal_tolerance",
    "max_iter",
    "output_dir",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Balanced,
    Unbalanced,
    TauSweep,
    MollifySweep,
    TransformCheck,
    Selftest,
}

/// Dual solver used by balanced runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualSolver {
    #[default]
    Ascent,
    Sinkhorn,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSpec {
    Generator(GeneratorSpec),
    Explicit {
        cost: Hermitian,
        rho: Hermitian,
        sigma: Hermitian,
    },
}

impl InstanceSpec {
    pub fn data(&self) -> qot_core::Result<ProblemData<f64>> {
        match self {
            InstanceSpec::Generator(g) => g.generate(),
            InstanceSpec::Explicit { cost, rho, sigma } => Ok(ProblemData {
                space: ProductSpace::new(rho.dim(), sigma.dim())?,
                cost: cost.clone(),
                rho: rho.clone(),
                sigma: sigma.clone(),
            }),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InstanceSpec::Generator(g) => Some(g.seed),
            InstanceSpec::Explicit { .. } => None,
        }
    }
}

/// A validated run configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub instance: Option<InstanceSpec>,
    pub regularizer: String,
    pub epsilon: f64,
    /// `[τ]` or `[τ1, τ2]` for unbalanced runs, the grid for sweeps.
    pub tau: Vec<f64>,
    pub tau2_factor: f64,
    pub n_grid: Vec<u32>,
    pub solver: DualSolver,
    pub tolerance: f64,
    pub primal_tolerance: f64,
    pub max_iter: usize,
    /// Left out of the echo so reports do not depend on where they are written.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn reg(&self) -> Reg {
        Reg::parse(&self.regularizer).expect("validated at parse time")
    }

    /// Replaces the generator seed. Explicit instances are left alone.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(InstanceSpec::Generator(g)) = &mut self.instance {
            g.seed = seed;
        }
    }

    pub fn balanced_instance(&self) -> qot_core::Result<Balanced> {
        let spec = self.instance.as_ref().expect("validated at parse time");
        Balanced::from_data(spec.data()?, self.epsilon, self.reg())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every problem found in a config, in field order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl ConfigError {
    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field || v.field.starts_with(&format!("{field}[")))
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config ({} problem", self.violations.len())?;
        if self.violations.len() != 1 {
            write!(f, "s")?;
        }
        write!(f, ")")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    prefix: &'static str,
    errors: Vec<Violation>,
}

impl<'a> Fields<'a> {
    fn new(obj: &'a Map<String, Value>, prefix: &'static str) -> Self {
        Self {
            obj,
            prefix,
            errors: Vec::new(),
        }
    }

    fn name(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn fail(&mut self, key: &str, message: impl Into<String>) {
        let field = self.name(key);
        self.errors.push(Violation::new(field, message));
    }

    fn get<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        let value = self.obj.get(key)?;
        match T::deserialize(value) {
            Ok(t) => Some(t),
            Err(e) => {
                self.fail(key, e.to_string());
                None
            }
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let x = self.get::<f64>(key).unwrap_or(default);
        if !(x > 0.0 && x.is_finite()) {
            self.fail(key, format!("must be positive and finite, got {x}"));
        }
        x
    }
}

/// Parses a config whose relative file paths are taken from the working directory.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_in(text, Path::new("."))
}

/// Parses a config, resolving relative matrix paths against `base`.
pub fn parse_config_in(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError {
        violations: vec![Violation::new("<document>", e.to_string())],
    })?;
    let Value::Object(obj) = &root else {
        return Err(ConfigError {
            violations: vec![Violation::new("<document>", "expected a JSON object")],
        });
    };
    let mut f = Fields::new(obj, "");
    for key in obj.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            f.fail(key, "unknown field");
        }
    }

    let mode = match obj.get("mode") {
        None => {
            f.fail("mode", "missing");
            None
        }
        Some(_) => f.get::<Mode>("mode"),
    };

    let regularizer = f.get::<String>("regularizer").unwrap_or_else(|| "von_neumann".into());
    let reg = match Reg::parse(&regularizer) {
        Ok(r) => Some(r),
        Err(e) => {
            f.fail("regularizer", e.to_string());
            None
        }
    };
    if let (Some(reg), Some(mode)) = (&reg, mode) {
        let needs = match mode {
            Mode::Balanced | Mode::Unbalanced => reg.require_c1().err(),
            Mode::TauSweep | Mode::TransformCheck => {
                reg.require_c1().and_then(|_| reg.require_strictly_convex()).err()
            }
            Mode::MollifySweep | Mode::Selftest => None,
        };
        if let Some(e) = needs {
            f.fail("regularizer", format!("{mode:?} mode: {e}"));
        }
    }

    let epsilon = f.positive("epsilon", DEFAULT_EPSILON);
    let tau2_factor = f.positive("tau2_factor", 1.0);
    let tolerance = f.positive("tolerance", DEFAULT_TOLERANCE);
    let primal_tolerance = f.positive("primal_tolerance", DEFAULT_PRIMAL_TOLERANCE);
    let max_iter = f.get::<usize>("max_iter").unwrap_or(DEFAULT_MAX_ITER);
    if max_iter == 0 {
        f.fail("max_iter", "must be at least 1");
    }
    let solver = f.get::<DualSolver>("solver").unwrap_or_default();
    let output_dir = f
        .get::<PathBuf>("output_dir")
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    let tau = match f.get::<Vec<f64>>("tau") {
        Some(t) => t,
        None if mode == Some(Mode::Unbalanced) && !obj.contains_key("tau") => {
            f.fail("tau", "required for unbalanced mode");
            Vec::new()
        }
        None => DEFAULT_TAU_GRID.to_vec(),
    };
    for (i, &t) in tau.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            f.fail(&format!("tau[{i}]"), format!("must be positive and finite, got {t}"));
        }
    }
    match mode {
        Some(Mode::Unbalanced) if !tau.is_empty() && tau.len() > 2 => {
            f.fail("tau", format!("unbalanced mode takes [tau] or [tau1, tau2], got {} values", tau.len()));
        }
        Some(Mode::TauSweep | Mode::TransformCheck) => {
            if tau.is_empty() {
                f.fail("tau", "grid must not be empty");
            } else if tau.windows(2).any(|w| w[1] <= w[0]) {
                f.fail("tau", "grid must be strictly ascending");
            }
        }
        _ => {}
    }

    let n_grid = f.get::<Vec<u32>>("n_grid").unwrap_or_else(|| DEFAULT_N_GRID.to_vec());
    if n_grid.is_empty() || n_grid.contains(&0) || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        f.fail("n_grid", "must be non-empty, positive and strictly ascending");
    }

    let instance = match obj.get("instance") {
        None if mode == Some(Mode::Selftest) => None,
        None => {
            f.fail("instance", "missing");
            None
        }
        Some(Value::Object(inst)) => parse_instance(inst, base, &mut f.errors),
        Some(_) => {
            f.fail("instance", "expected an object");
            None
        }
    };

    if !f.errors.is_empty() {
        return Err(ConfigError { violations: f.errors });
    }
    Ok(RunConfig {
        mode: mode.expect("no violations"),
        instance,
        regularizer,
        epsilon,
        tau,
        tau2_factor,
        n_grid,
        solver,
        tolerance,
        primal_tolerance,
        max_iter,
        output_dir,
    })
}

fn parse_instance(obj: &Map<String, Value>, base: &Path, errors: &mut Vec<Violation>) -> Option<InstanceSpec> {
    let mut f = Fields::new(obj, "instance.");
    for key in obj.keys() {
        if !["generator", "cost", "rho", "sigma"].contains(&key.as_str()) {
            f.fail(key, "unknown field");
        }
    }
    let explicit = ["cost", "rho", "sigma"].iter().any(|k| obj.contains_key(*k));
    let spec = match (obj.get("generator"), explicit) {
        (Some(_), true) => {
            f.fail("generator", "give either a generator or explicit matrices, not both");
            None
        }
        (Some(_), false) => f.get::<GeneratorSpec>("generator").and_then(|g| {
            let before = f.errors.len();
            if g.dims.contains(&0) {
                f.fail("generator.dims", "dimensions must be at least 1");
            }
            if g.cost == CostKind::QuadratureLike && g.dims[0] != g.dims[1] {
                f.fail("generator.cost", "quadrature-like cost needs equal dimensions");
            }
            (f.errors.len() == before).then_some(InstanceSpec::Generator(g))
        }),
        (None, true) => {
            let mut load = |key: &str| -> Option<Hermitian> {
                let Some(value) = obj.get(key) else {
                    f.fail(key, "missing");
                    return None;
                };
                load_matrix(value, base).map_err(|m| f.fail(key, m)).ok()
            };
            let (cost, rho, sigma) = (load("cost"), load("rho"), load("sigma"));
            match (cost, rho, sigma) {
                (Some(cost), Some(rho), Some(sigma)) => {
                    match Balanced::new(cost.clone(), rho.clone(), sigma.clone(), 1.0, Reg::von_neumann()) {
                        Ok(_) => Some(InstanceSpec::Explicit { cost, rho, sigma }),
                        Err(e) => {
                            errors.push(Violation::new("instance", e.to_string()));
                            None
                        }
                    }
                }
                _ => None,
            }
        }
        (None, false) => {
            errors.push(Violation::new("instance", "needs a generator or cost, rho and sigma"));
            None
        }
    };
    errors.extend(f.errors);
    spec
}

/// Reads an inline matrix object or a path to a matrix file.
fn load_matrix(value: &Value, base: &Path) -> Result<Hermitian, String> {
    let file: MatrixFile = match value {
        Value::String(path) => {
            let path = base.join(path);
            let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        Value::Object(_) => MatrixFile::deserialize(value).map_err(|e| e.to_string())?,
        _ => return Err("expected a matrix object or a file path".into()),
    };
    Hermitian::from_file(&file).map_err(|e| e.to_string())
}
