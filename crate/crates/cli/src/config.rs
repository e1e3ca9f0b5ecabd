//! Experiment configuration: a flat TOML document with the sections
//! `[physical] [spectral] [noise] [initial] [scheme] [sweep] [constants] [output]`.
//!
//! Parsing never stops at the first problem: every unknown key, type error
//! and invariant violation is collected and reported together.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use snse_core::harness::InitialCondition;
use snse_core::{DecayCheck, QSpec, SchemeKind, SpectralGrid};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Physical {
    /// Side `L` of the periodic square.
    pub length: f64,
    pub viscosity: f64,
    /// Final time `T`.
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectral {
    /// Mode cutoff `M`.
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Noise {
    /// `q_k = scale * lambda_k^{-decay}` before any trace rescaling.
    pub scale: f64,
    pub decay: f64,
    /// Rescale the covariance to this `Tr Q`.
    pub trace: Option<f64>,
    /// Master seed of the experiment.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Initial {
    pub condition: InitialCondition,
    /// Exponential-moment parameter of a Gaussian initial value; defaults to
    /// the largest admissible value.
    pub gamma0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub tolerance: f64,
    pub max_iter: usize,
    pub convection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVariable {
    /// Time step count.
    #[serde(rename = "N")]
    Steps,
    /// Mesh subdivisions.
    #[serde(rename = "n")]
    Mesh,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::Steps => "N",
            Self::Mesh => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub levels: Vec<usize>,
    /// Reference step count `N_ref` of time sweeps and the fine grid of
    /// regularity runs.
    pub reference_steps: usize,
    /// Time steps of single runs and mesh sweeps.
    pub steps: usize,
    pub replicates: usize,
    /// Moment exponent `q`.
    pub exponent: f64,
    /// Finite-element meshes and step counts of the moment command.
    pub fem_meshes: Vec<usize>,
    pub fem_steps: Vec<usize>,
    /// Exponential-moment parameters.
    pub alphas: Vec<f64>,
    /// Replicates of the scalar oracle in `ou-validate`.
    pub oracle_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    /// Fixed values; estimated when absent.
    pub c_bar: Option<f64>,
    pub sigma: Option<f64>,
    pub samples: usize,
    pub refinements: usize,
    /// Noise/initial-data split of the random-initial-value conditions.
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Output {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub physical: Physical,
    pub spectral: Spectral,
    pub noise: Noise,
    pub initial: Initial,
    pub scheme: Scheme,
    pub sweep: Sweep,
    pub constants: Constants,
    pub output: Output,
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const SECTIONS: [(&str, &[&str]); 8] = [
    ("physical", &["length", "viscosity", "horizon"]),
    ("spectral", &["cutoff"]),
    ("noise", &["scale", "decay", "trace", "seed"]),
    (
        "initial",
        &["kind", "amplitude", "wavenumber", "decay", "seed", "scale", "gamma0"],
    ),
    ("scheme", &["kind", "tolerance", "max_iter", "convection"]),
    (
        "sweep",
        &[
            "variable",
            "levels",
            "reference_steps",
            "steps",
            "replicates",
            "exponent",
            "fem_meshes",
            "fem_steps",
            "alphas",
            "oracle_replicates",
        ],
    ),
    ("constants", &["c_bar", "sigma", "samples", "refinements", "mu"]),
    ("output", &["dir", "format"]),
];

fn suggestion(word: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), *c))
        .filter(|(d, c)| *d <= 3.max(c.len() / 3))
        .min()
        .map_or(String::new(), |(_, c)| format!(" (did you mean `{c}`?)"))
}

/// Typed access to one section, recording errors instead of returning them.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    errors: &'a mut Vec<String>,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        self.errors.push(format!("[{}] {key}: {msg}", self.name));
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                let t = other.type_str();
                self.fail(key, format!("expected a number, found {t}"));
                None
            }
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                let i = *i;
                self.fail(key, format!("must be nonnegative, got {i}"));
                None
            }
            other => {
                let t = other.type_str();
                self.fail(key, format!("expected an integer, found {t}"));
                None
            }
        }
    }

    fn int(&mut self, key: &str) -> Option<i64> {
        match self.raw(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                let t = other.type_str();
                self.fail(key, format!("expected an integer, found {t}"));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                let t = other.type_str();
                self.fail(key, format!("expected a boolean, found {t}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                let t = other.type_str();
                self.fail(key, format!("expected a string, found {t}"));
                None
            }
        }
    }

    fn uint_list(&mut self, key: &str) -> Option<Vec<usize>> {
        match self.raw(key)? {
            Value::Array(items) => {
                let out: Option<Vec<usize>> = items
                    .iter()
                    .map(|v| v.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
                    .collect();
                if out.is_none() {
                    self.fail(key, "expected an array of nonnegative integers");
                }
                out
            }
            other => {
                let t = other.type_str();
                self.fail(key, format!("expected an array, found {t}"));
                None
            }
        }
    }

    fn float_list(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(items) => {
                let out: Option<Vec<f64>> = items
                    .iter()
                    .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
                    .collect();
                if out.is_none() {
                    self.fail(key, "expected an array of numbers");
                }
                out
            }
            other => {
                let t = other.type_str();
                self.fail(key, format!("expected an array, found {t}"));
                None
            }
        }
    }
}

/// Coupled step counts: every level refines the previous one.
fn is_nested_chain(levels: &[usize]) -> bool {
    levels.windows(2).all(|w| w[1] % w[0] == 0)
}

impl ExperimentConfig {
    /// Parses and validates a configuration; missing keys take defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {e}")]))?;
        let mut errors = Vec::new();
        let names: Vec<&str> = SECTIONS.iter().map(|(n, _)| *n).collect();
        for (key, value) in &doc {
            match SECTIONS.iter().find(|(n, _)| n == key) {
                None => errors.push(format!("unknown section `{key}`{}", suggestion(key, &names))),
                Some((name, keys)) => match value {
                    Value::Table(t) => {
                        for k in t.keys() {
                            if !keys.contains(&k.as_str()) {
                                errors.push(format!("[{name}] unknown key `{k}`{}", suggestion(k, keys)));
                            }
                        }
                    }
                    _ => errors.push(format!("`{key}` must be a section")),
                },
            }
        }
        let cfg = Self::read(&doc, &mut errors);
        if errors.is_empty() {
            cfg.validate()?;
            Ok(cfg)
        } else {
            if let Err(ConfigErrors(more)) = cfg.validate() {
                errors.extend(more);
            }
            Err(ConfigErrors(errors))
        }
    }

    /// [`ExperimentConfig::parse`] on the contents of `path`.
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::parse(&text)
    }

    fn read(doc: &Table, errors: &mut Vec<String>) -> Self {
        let d = Self::default();
        macro_rules! section {
            ($name:literal) => {
                Section {
                    name: $name,
                    table: doc.get($name).and_then(Value::as_table),
                    errors,
                }
            };
        }
        let physical = {
            let mut s = section!("physical");
            Physical {
                length: s.float("length").unwrap_or(d.physical.length),
                viscosity: s.float("viscosity").unwrap_or(d.physical.viscosity),
                horizon: s.float("horizon").unwrap_or(d.physical.horizon),
            }
        };
        let spectral = Spectral {
            cutoff: section!("spectral").uint("cutoff").map_or(d.spectral.cutoff, |v| v as usize),
        };
        let noise = {
            let mut s = section!("noise");
            Noise {
                scale: s.float("scale").unwrap_or(d.noise.scale),
                decay: s.float("decay").unwrap_or(d.noise.decay),
                trace: s.float("trace").or(d.noise.trace),
                seed: s.uint("seed").unwrap_or(d.noise.seed),
            }
        };
        let initial = {
            let mut s = section!("initial");
            let kind = s.string("kind").unwrap_or_else(|| "zero".into());
            let amplitude = s.float("amplitude").unwrap_or(1.0);
            let wavenumber = s.int("wavenumber").unwrap_or(1);
            let decay = s.float("decay").unwrap_or(3.0);
            let seed = s.uint("seed").unwrap_or(0);
            let scale = s.float("scale").unwrap_or(1.0);
            let gamma0 = s.float("gamma0");
            let condition = match kind.as_str() {
                "zero" => InitialCondition::Zero,
                "shear" => InitialCondition::Shear { amplitude, wavenumber },
                "random-smooth" => InitialCondition::RandomSmooth { amplitude, decay, seed },
                "gaussian" => InitialCondition::Gaussian { scale, decay },
                other => {
                    let kinds = ["zero", "shear", "random-smooth", "gaussian"];
                    s.fail("kind", format!("unknown initial condition `{other}`{}", suggestion(other, &kinds)));
                    InitialCondition::Zero
                }
            };
            Initial { condition, gamma0 }
        };
        let scheme = {
            let mut s = section!("scheme");
            let kind = match s.string("kind") {
                Some(k) => k.parse().unwrap_or_else(|e| {
                    s.fail("kind", e);
                    d.scheme.kind
                }),
                None => d.scheme.kind,
            };
            Scheme {
                kind,
                tolerance: s.float("tolerance").unwrap_or(d.scheme.tolerance),
                max_iter: s.uint("max_iter").map_or(d.scheme.max_iter, |v| v as usize),
                convection: s.boolean("convection").unwrap_or(d.scheme.convection),
            }
        };
        let sweep = {
            let mut s = section!("sweep");
            let variable = match s.string("variable").as_deref() {
                None => d.sweep.variable,
                Some("N") => SweepVariable::Steps,
                Some("n") => SweepVariable::Mesh,
                Some(other) => {
                    s.fail("variable", format!("expected `N` or `n`, got `{other}`"));
                    d.sweep.variable
                }
            };
            let default_levels = match variable {
                SweepVariable::Steps => d.sweep.levels.clone(),
                SweepVariable::Mesh => vec![4, 8, 16, 32],
            };
            Sweep {
                variable,
                levels: s.uint_list("levels").unwrap_or(default_levels),
                reference_steps: s.uint("reference_steps").map_or(d.sweep.reference_steps, |v| v as usize),
                steps: s.uint("steps").map_or(d.sweep.steps, |v| v as usize),
                replicates: s.uint("replicates").map_or(d.sweep.replicates, |v| v as usize),
                exponent: s.float("exponent").unwrap_or(d.sweep.exponent),
                fem_meshes: s.uint_list("fem_meshes").unwrap_or(d.sweep.fem_meshes),
                fem_steps: s.uint_list("fem_steps").unwrap_or(d.sweep.fem_steps),
                alphas: s.float_list("alphas").unwrap_or(d.sweep.alphas),
                oracle_replicates: s.uint("oracle_replicates").map_or(d.sweep.oracle_replicates, |v| v as usize),
            }
        };
        let constants = {
            let mut s = section!("constants");
            Constants {
                c_bar: s.float("c_bar"),
                sigma: s.float("sigma"),
                samples: s.uint("samples").map_or(d.constants.samples, |v| v as usize),
                refinements: s.uint("refinements").map_or(d.constants.refinements, |v| v as usize),
                mu: s.float("mu").unwrap_or(d.constants.mu),
            }
        };
        let output = {
            let mut s = section!("output");
            let format = match s.string("format") {
                Some(f) => f.parse().unwrap_or_else(|e| {
                    s.fail("format", e);
                    d.output.format
                }),
                None => d.output.format,
            };
            Output {
                dir: s.string("dir").map_or(d.output.dir, PathBuf::from),
                format,
            }
        };
        Self {
            physical,
            spectral,
            noise,
            initial,
            scheme,
            sweep,
            constants,
            output,
        }
    }

    /// Invariant checks across sections.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut e = Vec::new();
        let positive = [
            ("[physical] length", self.physical.length),
            ("[physical] viscosity", self.physical.viscosity),
            ("[physical] horizon", self.physical.horizon),
            ("[scheme] tolerance", self.scheme.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                e.push(format!("{name}: must be positive and finite, got {v}"));
            }
        }
        if self.spectral.cutoff == 0 {
            e.push("[spectral] cutoff: must be at least 1".into());
        }
        if !(self.noise.scale >= 0.0 && self.noise.scale.is_finite()) {
            e.push(format!("[noise] scale: must be nonnegative, got {}", self.noise.scale));
        }
        if !self.noise.decay.is_finite() {
            e.push("[noise] decay: must be finite".into());
        }
        if let Some(t) = self.noise.trace {
            if !(t >= 0.0 && t.is_finite()) {
                e.push(format!("[noise] trace: must be nonnegative, got {t}"));
            }
        }
        if self.scheme.max_iter == 0 {
            e.push("[scheme] max_iter: must be at least 1".into());
        }
        if self.scheme.kind == SchemeKind::OuExact && self.scheme.convection {
            e.push("[scheme] kind: ou-exact solves the linear problem and needs convection = false".into());
        }
        if let Some(g) = self.initial.gamma0 {
            if !(g > 0.0) {
                e.push(format!("[initial] gamma0: must be positive, got {g}"));
            }
        }
        let sw = &self.sweep;
        if sw.levels.is_empty() {
            e.push("[sweep] levels: at least one level is required".into());
        } else if sw.levels.windows(2).any(|w| w[1] <= w[0]) {
            e.push("[sweep] levels: must be strictly increasing".into());
        } else if sw.variable == SweepVariable::Steps && !is_nested_chain(&sw.levels) {
            e.push("[sweep] levels: each step count must divide the next".into());
        }
        match sw.variable {
            SweepVariable::Steps => {
                if !sw.reference_steps.is_power_of_two() {
                    e.push(format!("[sweep] reference_steps: {} is not a power of two", sw.reference_steps));
                }
                for &n in &sw.levels {
                    if n == 0 || sw.reference_steps % n != 0 {
                        e.push(format!(
                            "[sweep] levels: reference_steps {} is not a multiple of level {n}",
                            sw.reference_steps
                        ));
                    }
                }
            }
            SweepVariable::Mesh => {
                if let Some(&n) = sw.levels.iter().find(|&&n| n < 2) {
                    e.push(format!("[sweep] levels: mesh level {n} is below 2"));
                }
            }
        }
        if !sw.steps.is_power_of_two() {
            e.push(format!("[sweep] steps: {} is not a power of two", sw.steps));
        }
        if sw.replicates < 2 {
            e.push("[sweep] replicates: at least 2 are required".into());
        }
        if !(sw.exponent >= 2.0 && sw.exponent.is_finite()) {
            e.push(format!("[sweep] exponent: must be at least 2, got {}", sw.exponent));
        }
        if sw.fem_meshes.is_empty() != sw.fem_steps.is_empty() {
            e.push("[sweep] fem_meshes and fem_steps must both be set or both be empty".into());
        }
        if let Some(a) = sw.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            e.push(format!("[sweep] alphas: must be nonnegative, got {a}"));
        }
        if sw.oracle_replicates < 2 {
            e.push("[sweep] oracle_replicates: at least 2 are required".into());
        }
        let c = &self.constants;
        for (name, v) in [("c_bar", c.c_bar), ("sigma", c.sigma)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    e.push(format!("[constants] {name}: must be positive, got {v}"));
                }
            }
        }
        if c.samples == 0 {
            e.push("[constants] samples: at least 1 is required".into());
        }
        if !(c.mu > 0.0 && c.mu < 1.0) {
            e.push(format!("[constants] mu: must lie in (0, 1), got {}", c.mu));
        }
        if let Ok(grid) = self.grid() {
            if let Err(err) = self.initial.condition.validate(&grid) {
                e.push(format!("[initial] {err}"));
            }
        } else if self.spectral.cutoff > 0 && self.physical.length > 0.0 {
            e.push("[spectral] cutoff: lattice could not be built".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(e))
        }
    }

    pub fn grid(&self) -> snse_core::Result<SpectralGrid> {
        SpectralGrid::new(self.physical.length, self.spectral.cutoff)
    }

    /// Noise covariance, rescaled to `[noise] trace` when given.
    pub fn qspec(&self) -> snse_core::Result<QSpec> {
        let q = QSpec::power_law(self.grid()?, self.noise.scale, self.noise.decay, DecayCheck::Warn)?;
        Ok(match self.noise.trace {
            Some(t) => q.with_trace(t),
            None => q,
        })
    }

    /// Canonical TOML text; parsing it yields the same configuration.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let p = &self.physical;
        out += &format!(
            "[physical]\nlength = {:?}\nviscosity = {:?}\nhorizon = {:?}\n\n",
            p.length, p.viscosity, p.horizon
        );
        out += &format!("[spectral]\ncutoff = {}\n\n", self.spectral.cutoff);
        let n = &self.noise;
        out += &format!("[noise]\nscale = {:?}\ndecay = {:?}\n", n.scale, n.decay);
        if let Some(t) = n.trace {
            out += &format!("trace = {t:?}\n");
        }
        out += &format!("seed = {}\n\n[initial]\n", n.seed);
        match self.initial.condition {
            InitialCondition::Zero => out += "kind = \"zero\"\n",
            InitialCondition::Shear { amplitude, wavenumber } => {
                out += &format!("kind = \"shear\"\namplitude = {amplitude:?}\nwavenumber = {wavenumber}\n")
            }
            InitialCondition::RandomSmooth { amplitude, decay, seed } => {
                out += &format!("kind = \"random-smooth\"\namplitude = {amplitude:?}\ndecay = {decay:?}\nseed = {seed}\n")
            }
            InitialCondition::Gaussian { scale, decay } => {
                out += &format!("kind = \"gaussian\"\nscale = {scale:?}\ndecay = {decay:?}\n")
            }
        }
        if let Some(g) = self.initial.gamma0 {
            out += &format!("gamma0 = {g:?}\n");
        }
        let s = &self.scheme;
        out += &format!(
            "\n[scheme]\nkind = \"{}\"\ntolerance = {:?}\nmax_iter = {}\nconvection = {}\n\n",
            s.kind.name(),
            s.tolerance,
            s.max_iter,
            s.convection
        );
        let w = &self.sweep;
        out += &format!(
            "[sweep]\nvariable = \"{}\"\nlevels = {:?}\nreference_steps = {}\nsteps = {}\nreplicates = {}\n\
             exponent = {:?}\nfem_meshes = {:?}\nfem_steps = {:?}\nalphas = {:?}\noracle_replicates = {}\n\n",
            w.variable.name(),
            w.levels,
            w.reference_steps,
            w.steps,
            w.replicates,
            w.exponent,
            w.fem_meshes,
            w.fem_steps,
            w.alphas,
            w.oracle_replicates
        );
        let c = &self.constants;
        out += "[constants]\n";
        if let Some(v) = c.c_bar {
            out += &format!("c_bar = {v:?}\n");
        }
        if let Some(v) = c.sigma {
            out += &format!("sigma = {v:?}\n");
        }
        out += &format!(
            "samples = {}\nrefinements = {}\nmu = {:?}\n\n",
            c.samples, c.refinements, c.mu
        );
        let fmt = match self.output.format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        };
        out += &format!(
            "[output]\ndir = {}\nformat = \"{fmt}\"\n",
            Value::String(self.output.dir.to_string_lossy().into_owned())
        );
        out
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            physical: Physical {
                length: 2.0 * PI,
                viscosity: 1.0,
                horizon: 1.0,
            },
            spectral: Spectral { cutoff: 16 },
            noise: Noise {
                scale: 1.0,
                decay: 2.5,
                trace: None,
                seed: 0,
            },
            initial: Initial {
                condition: InitialCondition::Zero,
                gamma0: None,
            },
            scheme: Scheme {
                kind: SchemeKind::Implicit,
                tolerance: 1e-12,
                max_iter: 200,
                convection: true,
            },
            sweep: Sweep {
                variable: SweepVariable::Steps,
                levels: vec![8, 16, 32, 64],
                reference_steps: 512,
                steps: 256,
                replicates: 128,
                exponent: 2.0,
                fem_meshes: Vec::new(),
                fem_steps: Vec::new(),
                alphas: vec![0.0],
                oracle_replicates: 512,
            },
            constants: Constants {
                c_bar: None,
                sigma: None,
                samples: 1000,
                refinements: 400,
                mu: 0.5,
            },
            output: Output {
                dir: PathBuf::from("out"),
                format: OutputFormat::Csv,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults_and_echo_roundtrips() {
        let cfg = ExperimentConfig::parse("[physical]\nviscosity = 0.5\n").unwrap();
        assert_eq!(cfg.physical.viscosity, 0.5);
        assert_eq!(cfg.spectral.cutoff, 16);
        assert_eq!(cfg.sweep.levels, vec![8, 16, 32, 64]);
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        let empty = ExperimentConfig::parse("").unwrap();
        assert_eq!(empty, ExperimentConfig::default());
    }

    #[test]
    fn echo_roundtrips_every_variant() {
        let text = r#"
            [noise]
            trace = 2.5
            [initial]
            kind = "random-smooth"
            amplitude = 0.3
            decay = 2.0
            seed = 9
            gamma0 = 0.7
            [scheme]
            kind = "semi-implicit"
            [sweep]
            variable = "n"
            levels = [4, 8]
            fem_meshes = [4]
            fem_steps = [16]
            alphas = [0.0, 0.1]
            [constants]
            c_bar = 0.2
            sigma = 0.3
            [output]
            dir = "some dir/with \"quotes\""
            format = "json"
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.sweep.variable, SweepVariable::Mesh);
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn reference_not_multiple_names_the_level() {
        let err = ExperimentConfig::parse("[sweep]\nlevels = [12, 24]\nreference_steps = 512\n").unwrap_err();
        assert!(err.0.iter().any(|m| m.contains("level 12")), "{err}");
        assert!(err.0.iter().any(|m| m.contains("level 24")), "{err}");
    }

    #[test]
    fn unknown_key_gets_suggestion() {
        let err = ExperimentConfig::parse("[physical]\nviscocity = 1.0\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].contains("`viscocity`") && err.0[0].contains("did you mean `viscosity`"), "{err}");
        let err = ExperimentConfig::parse("[sweeps]\n").unwrap_err();
        assert!(err.0[0].contains("did you mean `sweep`"), "{err}");
    }

    #[test]
    fn all_violations_are_reported() {
        let text = "[physical]\nviscosity = -1.0\nhorizon = \"long\"\n[sweep]\nlevels = [8, 4]\nreplicates = 1\n[scheme]\nkind = \"explicit\"\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        let all = err.to_string();
        for needle in ["viscosity", "horizon", "levels", "replicates", "explicit"] {
            assert!(all.contains(needle), "{needle} missing from {all}");
        }
        assert!(err.0.len() >= 5);
    }

    #[test]
    fn qspec_honors_trace() {
        let cfg = ExperimentConfig::parse("[spectral]\ncutoff = 4\n[noise]\ntrace = 3.0\n").unwrap();
        assert!((cfg.qspec().unwrap().trace() - 3.0).abs() < 1e-12);
    }
}
