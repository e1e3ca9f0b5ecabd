use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Backward Euler with the convective term at the new time level.
    Implicit,
    /// Backward Euler with the convecting velocity lagged one step.
    SemiImplicit,
    /// Exact solution of the linear (Stokes) problem, mode by mode.
    OuExact,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Implicit => "implicit",
            SchemeKind::SemiImplicit => "semi-implicit",
            SchemeKind::OuExact => "ou-exact",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            SchemeKind::Implicit => 0,
            SchemeKind::SemiImplicit => 1,
            SchemeKind::OuExact => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SchemeKind::Implicit),
            1 => Some(SchemeKind::SemiImplicit),
            2 => Some(SchemeKind::OuExact),
            _ => None,
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit" | "fully-implicit" => Ok(SchemeKind::Implicit),
            "semi-implicit" => Ok(SchemeKind::SemiImplicit),
            "ou-exact" => Ok(SchemeKind::OuExact),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme `{other}` (expected implicit, semi-implicit or ou-exact)"
            ))),
        }
    }
}

/// Time discretization parameters. `convection = false` drops the
/// nonlinear term, leaving the linear stochastic Stokes problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub viscosity: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Stop once successive fixed-point iterates differ by less than this in
    /// the V norm.
    pub tol: f64,
    pub max_iter: usize,
    pub kind: SchemeKind,
    pub convection: bool,
}

impl SchemeParams {
    pub fn new(viscosity: f64, horizon: f64, steps: usize, kind: SchemeKind) -> Result<Self> {
        let p = Self {
            viscosity,
            horizon,
            steps,
            tol: 1e-10,
            max_iter: 100,
            kind,
            convection: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        self.tol = tol;
        self.max_iter = max_iter;
        self.validate()?;
        Ok(self)
    }

    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Result<Self> {
        self.steps = steps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_kind(mut self, kind: SchemeKind) -> Self {
        self.kind = kind;
        self
    }

    /// `k = T / N`.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.viscosity.is_finite() && self.viscosity > 0.0) {
            problems.push(format!("viscosity must be positive, got {}", self.viscosity));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            problems.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.steps == 0 {
            problems.push("step count must be at least 1".to_string());
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            problems.push(format!("fixed-point tolerance must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            problems.push("iteration limit must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}
