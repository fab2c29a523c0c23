//! Run configuration: TOML file, environment and flag overrides, validation
//! and the resolved manifest.

use std::fmt;
use std::path::{Path, PathBuf};

use msflow_core::{symbol_strip, ContainerGeometry, EllipticGrid, HeightField, Scheme};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "MSFLOW_OUTPUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub grid: GridSection,
    pub initial: InitialCondition,
    pub stepper: StepperSection,
    pub spectrum: SpectrumSection,
    pub symbol: SymbolSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub width: f64,
    pub depth_plus: f64,
    pub depth_minus: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            width: 2.0,
            depth_plus: 1.0,
            depth_minus: 0.75,
        }
    }
}

/// Interface nodes and the elliptic resolution used by the stepper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nodes: usize,
    pub nx: usize,
    pub m_plus: usize,
    pub m_minus: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nodes: 32,
            nx: 32,
            m_plus: 32,
            m_minus: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    pub mode: usize,
    /// In units of the tube half-width `a`.
    pub amplitude: f64,
}

/// Initial height profile. Amplitudes are fractions of the tube half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    SingleMode { mode: usize, amplitude: f64 },
    MultiMode { modes: Vec<ModeAmplitude> },
    SeededRandom { seed: u64, amplitude: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::SingleMode {
            mode: 1,
            amplitude: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    ImexEuler,
    ImexBdf2,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::ImexEuler => Scheme::ImexEuler,
            SchemeName::ImexBdf2 => Scheme::ImexBdf2,
        }
    }
}

/// `t_final` defaults to `5/a₁` and `dt` to a thousandth of `t_final`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    pub scheme: SchemeName,
    pub output_every: usize,
    pub safety: f64,
}

impl Default for StepperSection {
    fn default() -> Self {
        Self {
            dt: None,
            t_final: None,
            scheme: SchemeName::ImexEuler,
            output_every: 1,
            safety: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub nodes: usize,
    /// Square elliptic resolution used to assemble `A₀`.
    pub resolution: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            nodes: 64,
            resolution: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolSection {
    /// Rows are emitted for `m = 0..=modes`.
    pub modes: usize,
    pub omegas: Vec<f64>,
}

impl Default for SymbolSection {
    fn default() -> Self {
        Self {
            modes: 32,
            omegas: vec![0.0, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Multiplies every verify tolerance; values below 1 tighten them.
    pub tolerance_factor: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { tolerance_factor: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("msflow-out"),
        }
    }
}

/// Every violation found while validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<(String, String)>,
}

impl ConfigError {
    fn single(field: &str, reason: impl Into<String>) -> Self {
        Self {
            problems: vec![(field.to_string(), reason.into())],
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} problem", self.problems.len())?;
        if self.problems.len() != 1 {
            write!(f, "s")?;
        }
        write!(f, "):")?;
        for (field, reason) in &self.problems {
            write!(f, "\n  {field}: {reason}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Ordered overrides layered on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    entries: Vec<(String, Value)>,
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: Value) {
        self.entries.push((key.to_string(), value));
    }

    /// Parses `key=value`, reading the value as TOML and falling back to a
    /// bare string.
    pub fn set_raw(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::single(assignment, "expected key=value"))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(ConfigError::single(assignment, "malformed key"));
        }
        let raw = raw.trim();
        let value = toml::from_str::<Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.set(key, value);
        Ok(())
    }
}

fn apply(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::single(key, format!("`{part}` is not a table")))?;
    }
    // a new preset starts a fresh initial-condition table
    if key == "initial.preset" && cursor.get("preset") != Some(&value) {
        cursor.clear();
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Builds the configuration from an optional file, the environment and
    /// flag overrides, in increasing order of precedence, then validates it.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from), overrides)
    }

    pub fn load_with_env(
        path: Option<&Path>,
        env_output: Option<PathBuf>,
        overrides: &Overrides,
    ) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::single("config", format!("cannot read {}: {e}", p.display())))?;
                toml::from_str::<Table>(&text).map_err(|e| ConfigError::single("config", e.message().to_string()))?
            }
            None => Table::new(),
        };
        if let Some(dir) = env_output {
            apply(&mut table, "output.dir", Value::String(dir.to_string_lossy().into_owned()))?;
        }
        for (key, value) in &overrides.entries {
            apply(&mut table, key, value.clone())?;
        }
        let config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::single("config", e.message().trim().to_string()))?;
        config.resolve()
    }

    pub fn geometry(&self) -> ContainerGeometry {
        ContainerGeometry::new(self.geometry.width, self.geometry.depth_plus, self.geometry.depth_minus)
            .expect("validated geometry")
    }

    pub fn elliptic_grid(&self) -> EllipticGrid {
        EllipticGrid::new(self.grid.nx, self.grid.m_plus, self.grid.m_minus).expect("validated grid")
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt.expect("resolved config")
    }

    pub fn t_final(&self) -> f64 {
        self.stepper.t_final.expect("resolved config")
    }

    /// Samples the initial condition on the interface nodes.
    pub fn initial_height(&self) -> msflow_core::Result<HeightField> {
        let g = self.geometry();
        let a = g.tube_half_width();
        let n = self.grid.nodes;
        match &self.initial {
            InitialCondition::Zero => HeightField::zeros(g, n),
            InitialCondition::SingleMode { mode, amplitude } => HeightField::cosine_mode(g, n, *mode, amplitude * a),
            InitialCondition::MultiMode { modes } => HeightField::from_fn(g, n, |x| {
                modes
                    .iter()
                    .map(|m| m.amplitude * a * (g.wavenumber(m.mode) * x).cos())
                    .sum()
            }),
            InitialCondition::SeededRandom { seed, amplitude } => HeightField::seeded_random(g, n, *seed, amplitude * a),
        }
    }

    fn resolve(mut self) -> Result<Self, ConfigError> {
        self.validate()?;
        let g = self.geometry();
        let t_final = self
            .stepper
            .t_final
            .unwrap_or_else(|| 5.0 / symbol_strip(g.wavenumber(1), &g));
        self.stepper.t_final = Some(t_final);
        self.stepper.dt.get_or_insert(t_final / 1000.0);
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let mut bad = |field: &str, reason: String| problems.push((field.to_string(), reason));
        let positive = |v: f64| v.is_finite() && v > 0.0;

        let geo = &self.geometry;
        for (name, v) in [
            ("geometry.width", geo.width),
            ("geometry.depth_plus", geo.depth_plus),
            ("geometry.depth_minus", geo.depth_minus),
        ] {
            if !positive(v) {
                bad(name, format!("must be finite and > 0, got {v}"));
            }
        }

        let grid = &self.grid;
        if grid.nodes < 2 {
            bad("grid.nodes", format!("must be >= 2, got {}", grid.nodes));
        }
        if grid.nx < grid.nodes {
            bad("grid.nx", format!("must be >= grid.nodes = {}, got {}", grid.nodes, grid.nx));
        }
        for (name, v) in [("grid.m_plus", grid.m_plus), ("grid.m_minus", grid.m_minus)] {
            if v < 2 {
                bad(name, format!("must be >= 2, got {v}"));
            }
        }

        let st = &self.stepper;
        if let Some(dt) = st.dt {
            if !positive(dt) {
                bad("stepper.dt", format!("must be finite and > 0, got {dt}"));
            }
        }
        if let Some(t) = st.t_final {
            if !positive(t) {
                bad("stepper.t_final", format!("must be finite and > 0, got {t}"));
            }
        }
        if let (Some(dt), Some(t)) = (st.dt, st.t_final) {
            if positive(dt) && positive(t) && dt > t {
                bad("stepper.dt", format!("must not exceed stepper.t_final = {t}, got {dt}"));
            }
        }
        if st.output_every == 0 {
            bad("stepper.output_every", "must be >= 1".into());
        }
        let safety_ok = st.safety > 0.0 && st.safety < 1.0;
        if !safety_ok {
            bad("stepper.safety", format!("must lie in (0, 1), got {}", st.safety));
        }

        // amplitudes are fractions of a; the gate sits at safety/5
        let limit = if safety_ok { st.safety / 5.0 } else { 0.2 };
        let amplitude_problem = |v: f64| {
            (!(v.is_finite() && v.abs() < limit))
                .then(|| format!("must satisfy |amplitude| < {limit} (in units of a), got {v}"))
        };
        match &self.initial {
            InitialCondition::Zero => {}
            InitialCondition::SingleMode { mode, amplitude: amp } => {
                if let Some(r) = amplitude_problem(*amp) {
                    bad("initial.amplitude", r);
                }
                if *mode >= grid.nodes.max(1) {
                    bad("initial.mode", format!("must be < grid.nodes = {}, got {mode}", grid.nodes));
                }
            }
            InitialCondition::MultiMode { modes } => {
                if modes.is_empty() {
                    bad("initial.modes", "must list at least one mode".into());
                }
                if let Some(r) = amplitude_problem(modes.iter().map(|m| m.amplitude.abs()).sum()) {
                    bad("initial.modes", format!("summed {r}"));
                }
                for (i, m) in modes.iter().enumerate() {
                    if m.mode >= grid.nodes.max(1) {
                        bad(
                            &format!("initial.modes[{i}].mode"),
                            format!("must be < grid.nodes = {}, got {}", grid.nodes, m.mode),
                        );
                    }
                }
            }
            InitialCondition::SeededRandom { amplitude: amp, .. } => {
                if let Some(r) = amplitude_problem(*amp) {
                    bad("initial.amplitude", r);
                }
                if *amp < 0.0 {
                    bad("initial.amplitude", format!("must be >= 0, got {amp}"));
                }
            }
        }

        let sp = &self.spectrum;
        if sp.nodes < 2 {
            bad("spectrum.nodes", format!("must be >= 2, got {}", sp.nodes));
        }
        if sp.resolution < msflow_core::diagnostics::MIN_ASSEMBLY_RESOLUTION || sp.resolution < sp.nodes {
            bad(
                "spectrum.resolution",
                format!(
                    "must be >= max({}, spectrum.nodes), got {}",
                    msflow_core::diagnostics::MIN_ASSEMBLY_RESOLUTION,
                    sp.resolution
                ),
            );
        }

        if self.symbol.modes == 0 {
            bad("symbol.modes", "must be >= 1".into());
        }
        for (i, w) in self.symbol.omegas.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                bad(&format!("symbol.omegas[{i}]"), format!("must be finite and >= 0, got {w}"));
            }
        }

        let tf = self.verify.tolerance_factor;
        if !(tf > 0.0 && tf <= 1.0) {
            bad("verify.tolerance_factor", format!("must lie in (0, 1], got {tf}"));
        }

        if self.output.dir.as_os_str().is_empty() {
            bad("output.dir", "must not be empty".into());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems })
        }
    }

    /// `key=value` lines echoing every resolved field, floats in full precision.
    pub fn manifest(&self, command: &str) -> String {
        let mut lines = vec![
            format!("command={command}"),
            format!("version={}", env!("CARGO_PKG_VERSION")),
        ];
        let value = Value::try_from(self).expect("config serializes");
        flatten("", &value, &mut lines);
        lines.join("\n") + "\n"
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<String>) {
    let join = |key: &str| {
        if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        }
    };
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                flatten(&join(k), v, out);
            }
        }
        Value::Array(items) => {
            out.push(format!("{prefix}.len={}", items.len()));
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, out);
            }
        }
        Value::Float(f) => out.push(format!("{prefix}={f:.17e}")),
        Value::Integer(i) => out.push(format!("{prefix}={i}")),
        Value::String(s) => out.push(format!("{prefix}={s}")),
        Value::Boolean(b) => out.push(format!("{prefix}={b}")),
        Value::Datetime(d) => out.push(format!("{prefix}={d}")),
    }
}
