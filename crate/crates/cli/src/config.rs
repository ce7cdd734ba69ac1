//! Run configuration: one TOML file per experiment, validated before any solve.

use std::fmt;
use std::path::{Path, PathBuf};

use ratecert::poly::{parse_system, Rational, SemialgebraicSet};
use ratecert::programs::{
    AnalysisKind, AnalysisSpec, BisectionOptions, FieldSpec, GainMode,
};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Exponential,
    RationalI,
    RationalIi,
    FiniteTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// System file, relative to the config file.
    pub system: PathBuf,
    pub analysis: Analysis,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub region: RegionConfig,
}

/// Ball `||x|| <= radius`; the system's `g` constraints when absent, and
/// the whole space when the system has none.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    pub d: u32,
    /// Rational templates; `2d` when absent.
    pub r: Option<u32>,
    pub p: u32,
    /// Fixed gain `M`. Required by `rational_i`.
    pub gain: Option<f64>,
    /// Finite-time exponent as `"a/b"`.
    pub eta: Option<String>,
    pub r_subst: Option<u32>,
    pub h_exponents: Option<Vec<u32>>,
    pub k_lo: f64,
    pub k_hi: Option<f64>,
    pub rel_tol: f64,
    pub trouble_as_infeasible: bool,
}

impl Default for Parameters {
    fn default() -> Self {
        let b = BisectionOptions::default();
        Parameters {
            d: 1,
            r: None,
            p: 2,
            gain: None,
            eta: None,
            r_subst: None,
            h_exponents: None,
            k_lo: b.k_lo,
            k_hi: b.k_hi,
            rel_tol: b.rel_tol,
            trouble_as_infeasible: false,
        }
    }
}

/// Absent lists fall back to the single value in `parameters`/`domain`;
/// present lists must be nonempty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub d: Option<Vec<u32>>,
    pub radius: Option<Vec<f64>>,
    pub k: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcRule {
    Sphere,
    Ball,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaChoice {
    /// The measure of the analyzed family.
    Family,
    /// `||x||_2` raised to the family's exponent.
    TwoNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub ics: IcRule,
    pub count: usize,
    pub radius: f64,
    pub horizon: f64,
    /// Gain of the bound; `parameters.gain` or 1 when absent.
    pub gain: Option<f64>,
    pub alpha: AlphaChoice,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            ics: IcRule::Sphere,
            count: 500,
            radius: 1.0,
            horizon: 100.0,
            gain: None,
            alpha: AlphaChoice::Family,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    /// Rays per boundary polyline.
    pub resolution: usize,
    /// When set, each rate uses the largest feasible ball up to this radius.
    pub max_radius: Option<f64>,
    pub nesting_samples: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            resolution: 360,
            max_radius: None,
            nesting_samples: 500,
        }
    }
}

/// One analysis of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    /// `d=2` or `d=2;R=0.5`.
    pub key: String,
    pub d: u32,
    pub radius: Option<f64>,
    pub spec: AnalysisSpec,
}

impl SweepPoint {
    /// `key` made safe for a file name.
    pub fn file_stem(&self) -> String {
        self.key.replace(';', "_").replace('=', "")
    }
}

/// A parsed, validated configuration with its system loaded.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub field: FieldSpec,
    pub system_domain: SemialgebraicSet,
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path)
        .or_else(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let mut config: RunConfig =
        toml::from_str(&text).or_else(|e| bad(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    config.system = base.join(&config.system);
    if let Some(out) = &config.output {
        config.output = Some(base.join(out));
    }
    let src = std::fs::read_to_string(&config.system)
        .or_else(|e| bad(format!("cannot read system {}: {e}", config.system.display())))?;
    let sys = parse_system(&src).or_else(|e| bad(format!("{}: {e}", config.system.display())))?;
    let system_domain = sys.domain().or_else(|e| bad(format!("domain: {e}")))?;
    let field = match sys.poly_field() {
        Ok(f) => FieldSpec::Polynomial(f),
        Err(_) => FieldSpec::SignedPower(sys.field.clone()),
    };
    let loaded = Loaded {
        config,
        field,
        system_domain,
    };
    loaded.validate()?;
    Ok(loaded)
}

fn nonempty<T: Clone>(name: &str, list: &Option<Vec<T>>, fallback: T) -> Result<Vec<T>, ConfigError> {
    match list {
        Some(v) if v.is_empty() => bad(format!("sweep list `{name}` is empty")),
        Some(v) => Ok(v.clone()),
        None => Ok(vec![fallback]),
    }
}

impl Loaded {
    pub fn nvars(&self) -> usize {
        self.field.dim()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        if let Some(k) = &c.sweep.k {
            if k.is_empty() {
                return bad("sweep list `k` is empty");
            }
            if k.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("sweep rates must be finite and nonnegative");
            }
        }
        if let Some(r) = &c.sweep.radius {
            if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("sweep radii must be positive");
            }
        }
        if c.jobs == Some(0) {
            return bad("jobs must be at least 1");
        }
        let s = &c.simulate;
        if s.count == 0 || !(s.radius > 0.0) || !(s.horizon > 0.0) {
            return bad("simulate needs count >= 1, radius > 0 and horizon > 0");
        }
        if c.region.resolution < 4 {
            return bad("region resolution must be at least 4");
        }
        for p in self.points()? {
            p.spec
                .validate()
                .or_else(|e| bad(format!("{}: {e}", p.key)))?;
        }
        Ok(())
    }

    fn kind(&self, d: u32) -> Result<AnalysisKind, ConfigError> {
        let p = &self.config.parameters;
        let r = p.r.unwrap_or(2 * d);
        Ok(match self.config.analysis {
            Analysis::Exponential => AnalysisKind::Exponential { d },
            Analysis::RationalIi => AnalysisKind::RationalII { d, r, p: p.p },
            Analysis::RationalI => AnalysisKind::RationalI { d, r, p: p.p },
            Analysis::FiniteTime => {
                let Some(eta) = &p.eta else {
                    return bad("finite_time needs parameters.eta");
                };
                let eta: Rational = eta
                    .trim()
                    .parse()
                    .or_else(|_| bad(format!("eta `{eta}` is not a fraction a/b")))?;
                let Some(r_subst) = p.r_subst else {
                    return bad("finite_time needs parameters.r_subst");
                };
                AnalysisKind::FiniteTime {
                    d,
                    eta,
                    r_subst,
                    h_exponents: p
                        .h_exponents
                        .clone()
                        .unwrap_or_else(|| vec![0; self.nvars()]),
                }
            }
        })
    }

    pub fn domain(&self, radius: Option<f64>) -> SemialgebraicSet {
        match radius.or(self.config.domain.radius) {
            Some(r) => SemialgebraicSet::ball(self.nvars(), r),
            None => self.system_domain.clone(),
        }
    }

    /// Spec for degree `d` on `domain` with the configured gain and bracket.
    pub fn spec(&self, d: u32, domain: SemialgebraicSet, kind: Analysis) -> Result<AnalysisSpec, ConfigError> {
        let p = &self.config.parameters;
        let mut shadow = self.clone();
        shadow.config.analysis = kind;
        let kind = shadow.kind(d)?;
        let gain = match (kind.clone(), p.gain) {
            (AnalysisKind::RationalI { .. }, Some(m)) => GainMode::Fixed(m),
            (AnalysisKind::RationalI { .. }, None) => return bad("rational_i needs parameters.gain"),
            _ => GainMode::Minimize,
        };
        Ok(AnalysisSpec::new(self.field.clone(), domain, kind)
            .with_gain(gain)
            .with_bisection(BisectionOptions {
                k_lo: p.k_lo,
                k_hi: p.k_hi,
                rel_tol: p.rel_tol,
                trouble_as_infeasible: p.trouble_as_infeasible,
                ..BisectionOptions::default()
            }))
    }

    /// The `d` by `R` grid in row-major order.
    pub fn points(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        let c = &self.config;
        let ds = nonempty("d", &c.sweep.d, c.parameters.d)?;
        let rs: Vec<Option<f64>> = match &c.sweep.radius {
            Some(v) if v.is_empty() => return bad("sweep list `radius` is empty"),
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for &d in &ds {
            for &r in &rs {
                let key = match r {
                    Some(r) => format!("d={d};R={r}"),
                    None => format!("d={d}"),
                };
                out.push(SweepPoint {
                    key,
                    d,
                    radius: r,
                    spec: self.spec(d, self.domain(r), c.analysis)?,
                });
            }
        }
        Ok(out)
    }

    pub fn rates(&self) -> Result<Vec<f64>, ConfigError> {
        match &self.config.sweep.k {
            Some(k) => Ok(k.clone()),
            None => bad("region needs a sweep list `k`"),
        }
    }

    pub fn sim_gain(&self) -> f64 {
        self.config
            .simulate
            .gain
            .or(self.config.parameters.gain)
            .unwrap_or(1.0)
    }
}
