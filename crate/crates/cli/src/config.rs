//! Flat `key = value` experiment files.
//!
//! Keys carry a dotted section prefix (`model.epsilon`, `time.tau`,
//! `init.seed`). `#` starts a comment. Reals accept a trailing `pi`
//! factor, so `2pi`, `2*pi` and `pi` are valid lengths. Unknown keys are
//! rejected so that typos cannot silently fall back to defaults.
//!
//! ```text
//! scheme = savgl5
//! model.kind = cahn_hilliard
//! model.epsilon = 0.1
//! grid.n = 64
//! grid.length = 2pi
//! time.tau = 0.01
//! time.t_end = 20
//! init.kind = two_circles
//! output.snapshots = 0, 5, 20
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use savgl::models::{AllenCahn, CahnHilliard, GradientFlowModel, ModelKind, PhaseFieldCrystal};
use savgl::spectral::SpectralGrid;
use savgl::stepper::{SolverOptions, StageMethod};
use savgl::tableau::{parse_tableau, BuiltinScheme, GltdTableau};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec {
    Builtin(BuiltinScheme),
    File(PathBuf),
}

impl SchemeSpec {
    /// A built-in name, otherwise a tableau file path.
    pub fn parse(value: &str) -> Self {
        match BuiltinScheme::from_name(value) {
            Some(s) => SchemeSpec::Builtin(s),
            None => SchemeSpec::File(PathBuf::from(value)),
        }
    }

    pub fn load(&self) -> CliResult<GltdTableau> {
        match self {
            SchemeSpec::Builtin(s) => Ok(s.tableau()),
            SchemeSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(CliError::io(format!("reading tableau {}", path.display())))?;
                parse_tableau(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    fn resolve(self, base: &Path) -> Self {
        match self {
            SchemeSpec::File(p) if p.is_relative() => SchemeSpec::File(base.join(p)),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitRecipe {
    /// `amplitude · sin x · (sin y | cos y)` in units of the box.
    SineProduct { amplitude: f64, cos_y: bool },
    /// `scale · r + offset` with `r` uniform on `[-1, 1]` per grid point.
    Random { scale: f64, offset: f64, seed: u64 },
    /// Two tanh-profiled circles; `width` is the model `ε` unless overridden.
    TwoCircles { width: f64 },
    /// Three rotated hexagonal crystallites in a liquid of density `phi0`.
    Polycrystal { phi0: f64, amplitude: f64, wavenumber: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub energy_csv: String,
    pub mass_csv: String,
    pub extrema_csv: String,
    pub snapshots: Vec<f64>,
    /// Also write the raw little-endian sidecar of every snapshot.
    pub raw_snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            energy_csv: "energy.csv".into(),
            mass_csv: "mass.csv".into(),
            extrema_csv: "extrema.csv".into(),
            snapshots: Vec::new(),
            raw_snapshots: false,
        }
    }
}

/// Fine-step run that refinement studies compare against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub scheme: SchemeSpec,
    pub tau: Option<f64>,
    /// Previously written snapshot used instead of a fresh reference run.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: SchemeSpec,
    pub model: ModelKind,
    pub c0: Option<f64>,
    pub n: usize,
    pub length: f64,
    pub tau: f64,
    pub t_end: f64,
    pub steps: usize,
    pub init: InitRecipe,
    pub outputs: OutputConfig,
    pub solver: SolverOptions,
    pub reference: ReferenceConfig,
    /// Step counts of a refinement study.
    pub converge_steps: Vec<usize>,
}

/// Parses a real with an optional trailing `pi` factor.
pub fn parse_real(value: &str) -> Option<f64> {
    let v = value.trim();
    if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        return Some(factor * PI);
    }
    v.parse().ok()
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(_, v)| v)
    }

    fn real(&mut self, key: &str) -> CliResult<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse_real(&v)
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| CliError::Config(format!("line {line}: `{key}` expects a number, got `{v}`"))),
        }
    }

    fn real_or(&mut self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    fn required_real(&mut self, key: &str) -> CliResult<f64> {
        self.real(key)?.ok_or_else(|| CliError::Config(format!("missing `{key}`")))
    }

    fn integer<T: std::str::FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("line {line}: `{key}` expects an integer, got `{v}`"))),
        }
    }

    fn boolean(&mut self, key: &str) -> CliResult<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => match v.trim() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => Err(CliError::Config(format!("line {line}: `{key}` expects true/false, got `{other}`"))),
            },
        }
    }

    fn list<T>(&mut self, key: &str, item: impl Fn(&str) -> Option<T>) -> CliResult<Option<Vec<T>>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| item(s).ok_or_else(|| CliError::Config(format!("line {line}: bad entry `{s}` in `{key}`"))))
                .collect::<CliResult<Vec<T>>>()
                .map(Some),
        }
    }
}

fn parse_entries(text: &str) -> CliResult<Entries> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {line}: expected `key = value`")))?;
        let key = key.trim().to_ascii_lowercase();
        if map.insert(key.clone(), (line, value.trim().to_string())).is_some() {
            return Err(CliError::Config(format!("line {line}: duplicate key `{key}`")));
        }
    }
    Ok(Entries { map })
}

fn model_kind(e: &mut Entries) -> CliResult<ModelKind> {
    let kind = e.string("model.kind").ok_or_else(|| CliError::Config("missing `model.kind`".into()))?;
    let kind = match kind.to_ascii_lowercase().replace('-', "_").as_str() {
        "allen_cahn" | "ac" => ModelKind::AllenCahn(AllenCahn {
            epsilon: e.required_real("model.epsilon")?,
            beta: e.real_or("model.beta", 2.0)?,
        }),
        "cahn_hilliard" | "ch" => ModelKind::CahnHilliard(CahnHilliard {
            epsilon: e.required_real("model.epsilon")?,
            beta: e.real_or("model.beta", 2.0)?,
        }),
        "phase_field_crystal" | "pfc" => ModelKind::PhaseFieldCrystal(PhaseFieldCrystal {
            epsilon1: e.real_or("model.epsilon1", 0.0)?,
            epsilon2: e.required_real("model.epsilon2")?,
            alpha: e.required_real("model.alpha")?,
            beta: e.required_real("model.beta")?,
        }),
        other => return Err(CliError::Config(format!("unknown model kind `{other}`"))),
    };
    Ok(kind)
}

fn model_epsilon(kind: &ModelKind) -> Option<f64> {
    match kind {
        ModelKind::AllenCahn(p) => Some(p.epsilon),
        ModelKind::CahnHilliard(p) => Some(p.epsilon),
        ModelKind::PhaseFieldCrystal(_) => None,
    }
}

fn init_recipe(e: &mut Entries, model: &ModelKind) -> CliResult<InitRecipe> {
    let kind = e.string("init.kind").unwrap_or_else(|| "sine_product".into());
    let recipe = match kind.to_ascii_lowercase().replace('-', "_").as_str() {
        "sine_product" | "sine" => {
            let y = e.string("init.y").unwrap_or_else(|| "sin".into());
            let cos_y = match y.as_str() {
                "sin" => false,
                "cos" => true,
                other => return Err(CliError::Config(format!("`init.y` must be sin or cos, got `{other}`"))),
            };
            InitRecipe::SineProduct { amplitude: e.real_or("init.amplitude", 1.0)?, cos_y }
        }
        "random" => InitRecipe::Random {
            scale: e.real_or("init.scale", 0.1)?,
            offset: e.real_or("init.offset", -0.05)?,
            seed: e.integer("init.seed")?.unwrap_or(0),
        },
        "two_circles" => {
            let width = match e.real("init.width")? {
                Some(w) => w,
                None => model_epsilon(model)
                    .ok_or_else(|| CliError::Config("two_circles needs `init.width` for this model".into()))?,
            };
            InitRecipe::TwoCircles { width }
        }
        "polycrystal" => InitRecipe::Polycrystal {
            phi0: e.real_or("init.phi0", 0.285)?,
            amplitude: e.real_or("init.amplitude", 0.446)?,
            wavenumber: e.real_or("init.wavenumber", 0.66)?,
        },
        other => return Err(CliError::Config(format!("unknown init kind `{other}`"))),
    };
    Ok(recipe)
}

fn solver_options(e: &mut Entries) -> CliResult<SolverOptions> {
    let mut opts = SolverOptions::default();
    if let Some(m) = e.string("solver.method") {
        opts.method = match m.as_str() {
            "iteration" | "incomplete_iteration" => StageMethod::IncompleteIteration,
            "elimination" => StageMethod::Elimination,
            other => return Err(CliError::Config(format!("unknown solver method `{other}`"))),
        };
    }
    if let Some(tol) = e.real("solver.tol")? {
        opts.tol = tol;
    }
    if let Some(tol) = e.real("solver.rel_tol")? {
        opts.rel_tol = tol;
    }
    if let Some(it) = e.integer("solver.max_iters")? {
        opts.max_iters = it;
    }
    if let Some(fb) = e.boolean("solver.fallback")? {
        opts.fallback_to_elimination = fb;
    }
    if !(opts.tol > 0.0) || opts.rel_tol < 0.0 || opts.max_iters == 0 {
        return Err(CliError::Config("solver tolerances must be positive and max_iters ≥ 1".into()));
    }
    Ok(opts)
}

/// Step count for `t_end` at `tau`; the ratio has to be an integer.
pub fn step_count(t_end: f64, tau: f64) -> CliResult<usize> {
    let k = (t_end / tau).round();
    if (k * tau - t_end).abs() > 1e-9 * t_end.max(tau) {
        return Err(CliError::Config(format!("t_end = {t_end} is not a whole number of steps of τ = {tau}")));
    }
    Ok(k as usize)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.scheme = cfg.scheme.resolve(base);
        cfg.reference.scheme = cfg.reference.scheme.resolve(base);
        cfg.reference.path = cfg.reference.path.map(|p| if p.is_relative() { base.join(p) } else { p });
        Ok(cfg)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut e = parse_entries(text)?;
        let scheme = SchemeSpec::parse(&e.string("scheme").ok_or_else(|| CliError::Config("missing `scheme`".into()))?);
        let model = model_kind(&mut e)?;
        let c0 = e.real("model.c0")?;
        let n: usize = e.integer("grid.n")?.unwrap_or(64);
        let length = e.real_or("grid.length", 2.0 * PI)?;
        if n == 0 || n % 2 != 0 {
            return Err(CliError::Config(format!("grid.n = {n} must be even and positive")));
        }
        if !(length > 0.0) {
            return Err(CliError::Config("grid.length must be positive".into()));
        }

        let t_end = e.required_real("time.t_end")?;
        if !(t_end >= 0.0) {
            return Err(CliError::Config("time.t_end must be non-negative".into()));
        }
        let given_tau = e.real("time.tau")?;
        let given_steps: Option<usize> = e.integer("time.steps")?;
        let (tau, steps) = match (given_tau, given_steps) {
            (Some(tau), None) if tau > 0.0 => (tau, step_count(t_end, tau)?),
            (None, Some(k)) if k > 0 && t_end > 0.0 => (t_end / k as f64, k),
            (Some(tau), Some(k)) if tau > 0.0 && step_count(t_end, tau)? == k => (tau, k),
            (None, None) => return Err(CliError::Config("give `time.tau` or `time.steps`".into())),
            _ => return Err(CliError::Config("time.tau must be positive and consistent with time.steps".into())),
        };

        let init = init_recipe(&mut e, &model)?;
        let outputs = OutputConfig {
            energy_csv: e.string("output.energy_csv").unwrap_or_else(|| "energy.csv".into()),
            mass_csv: e.string("output.mass_csv").unwrap_or_else(|| "mass.csv".into()),
            extrema_csv: e.string("output.extrema_csv").unwrap_or_else(|| "extrema.csv".into()),
            snapshots: e.list("output.snapshots", parse_real)?.unwrap_or_default(),
            raw_snapshots: e.boolean("output.raw")?.unwrap_or(false),
        };
        let solver = solver_options(&mut e)?;
        let reference = ReferenceConfig {
            scheme: e.string("reference.scheme").map(|s| SchemeSpec::parse(&s)).unwrap_or(SchemeSpec::Builtin(BuiltinScheme::SavGl6)),
            tau: e.real("reference.tau")?,
            path: e.string("reference.path").map(PathBuf::from),
        };
        if reference.tau.is_some_and(|t| !(t > 0.0)) {
            return Err(CliError::Config("reference.tau must be positive".into()));
        }
        let converge_steps = e.list("converge.steps", |s| s.parse().ok())?.unwrap_or_default();

        if let Some((key, (line, _))) = e.map.iter().next() {
            return Err(CliError::Config(format!("line {line}: unknown key `{key}`")));
        }
        let cfg = Self { scheme, model, c0, n, length, tau, t_end, steps, init, outputs, solver, reference, converge_steps };
        cfg.gradient_flow()?;
        Ok(cfg)
    }

    pub fn gradient_flow(&self) -> CliResult<GradientFlowModel> {
        let model = match self.model {
            ModelKind::AllenCahn(p) => GradientFlowModel::allen_cahn(p),
            ModelKind::CahnHilliard(p) => GradientFlowModel::cahn_hilliard(p),
            ModelKind::PhaseFieldCrystal(p) => GradientFlowModel::phase_field_crystal(p),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        match self.c0 {
            Some(c0) => model.with_c0(c0).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(model),
        }
    }

    pub fn grid(&self) -> CliResult<SpectralGrid> {
        SpectralGrid::new(self.n, self.length).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Same experiment with `steps` uniform steps over `[0, t_end]`.
    pub fn with_steps(&self, steps: usize) -> CliResult<Self> {
        if steps == 0 || !(self.t_end > 0.0) {
            return Err(CliError::Config("refinement needs t_end > 0 and at least one step".into()));
        }
        Ok(Self { tau: self.t_end / steps as f64, steps, ..self.clone() })
    }

    /// The study's fine reference run, as a config of its own.
    pub fn reference_run(&self) -> CliResult<Self> {
        let tau = self
            .reference
            .tau
            .ok_or_else(|| CliError::Config("refinement needs `reference.tau` or `reference.path`".into()))?;
        let steps = step_count(self.t_end, tau)?;
        Ok(Self { scheme: self.reference.scheme.clone(), tau, steps, ..self.clone() })
    }
}
