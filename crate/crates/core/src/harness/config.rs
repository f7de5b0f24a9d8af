//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::basis::PolynomialFamily;
use crate::error::{Error, Result};
use crate::indexing::{CRule, Rho, RhoRule, WeightSpec};
use crate::pde::{CoefficientField, FemMesh, MeanField, PsiFamily, Rhs};
use crate::sampling::{SubsampleOptions, DEFAULT_MAX_TAIL, DEFAULT_TAIL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    SyntheticScalar,
    SyntheticBochner { d: usize },
    PdeLognormal,
    PdeAffine,
}

impl TargetKind {
    pub fn is_pde(&self) -> bool {
        matches!(self, TargetKind::PdeLognormal | TargetKind::PdeAffine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SchemeChoice {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
}

impl SchemeChoice {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "i" | "I" | "1" => Ok(SchemeChoice::I),
            "ii" | "II" | "2" => Ok(SchemeChoice::II),
            other => Err(Error::Config(format!("unknown scheme '{other}' (expected i or ii)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingConfig {
    /// `c` in `m = floor(n / (c ln n))` for scheme (i).
    pub scheme_i_factor: f64,
    /// `c` in `N = ceil(c n ln n)` initial draws for scheme (ii).
    pub oversampling: f64,
    /// Subsampling target `ceil(c2 m)`.
    pub c2: f64,
    pub tail_tol: f64,
    pub max_tail: usize,
    pub subsample: SubsampleOptions,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            scheme_i_factor: 20.0,
            oversampling: 20.0,
            c2: 1.2,
            tail_tol: DEFAULT_TAIL_TOL,
            max_tail: DEFAULT_MAX_TAIL,
            subsample: SubsampleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldConfig {
    pub psi: PsiFamily,
    pub kappa: f64,
    pub theta: f64,
    pub dims: usize,
    pub abar: f64,
    pub nh: usize,
    pub rhs: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            psi: PsiFamily::Sine,
            kappa: 1.0,
            theta: 3.0,
            dims: 8,
            abar: 2.0,
            nh: 256,
            rhs: 1.0,
        }
    }
}

impl FieldConfig {
    pub fn build(&self, target: TargetKind) -> Result<CoefficientField> {
        let psi = CoefficientField::standard_psi(self.psi, self.kappa, self.theta, self.dims);
        match target {
            TargetKind::PdeAffine => {
                CoefficientField::affine(MeanField::Constant { value: self.abar }, psi)
            }
            _ => Ok(CoefficientField::lognormal(psi)),
        }
    }

    pub fn mesh(&self) -> Result<FemMesh> {
        FemMesh::new(self.nh)
    }

    pub fn rhs(&self) -> Rhs {
        Rhs::constant(self.rhs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub target: TargetKind,
    pub family: PolynomialFamily,
    pub weights: WeightSpec,
    pub scheme: SchemeChoice,
    pub n_grid: Vec<usize>,
    /// Single `n` for one-shot runs.
    pub n: usize,
    pub seed: u64,
    pub test_count: usize,
    /// Size of the synthetic target's support; 0 picks a default from the grid.
    pub active_size: usize,
    pub sampling: SamplingConfig,
    pub field: FieldConfig,
    /// `widths` subcommand: number of sigmas and widths to list.
    pub widths_count: usize,
    /// `widths` subcommand: threshold for `Lambda(xi)`.
    pub widths_xi: f64,
    /// `sample` subcommand: basis size and number of draws.
    pub sample_m: usize,
    pub sample_count: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            target: TargetKind::SyntheticScalar,
            family: PolynomialFamily::legendre(),
            weights: WeightSpec::affine(Rho::geometric(2.0), CRule::Legendre, 1.0)
                .expect("valid default"),
            scheme: SchemeChoice::I,
            n_grid: vec![64, 128, 256, 512, 1024],
            n: 256,
            seed: 0,
            test_count: 2000,
            active_size: 0,
            sampling: SamplingConfig::default(),
            field: FieldConfig::default(),
            widths_count: 20,
            widths_xi: 10.0,
            sample_m: 8,
            sample_count: 100,
        }
    }
}

const KEYS: &[&str] = &[
    "experiment.target",
    "experiment.d",
    "experiment.scheme",
    "experiment.n_grid",
    "experiment.n",
    "experiment.seed",
    "experiment.test_count",
    "experiment.active_size",
    "experiment.widths_count",
    "experiment.widths_xi",
    "experiment.sample_m",
    "experiment.sample_count",
    "weights.kind",
    "weights.family",
    "weights.eta",
    "weights.rho",
    "weights.c",
    "weights.q",
    "weights.dims",
    "weights.scale",
    "sampling.scheme_i_factor",
    "sampling.oversampling",
    "sampling.c2",
    "sampling.tail_tol",
    "sampling.max_tail",
    "sampling.gamma_low",
    "sampling.gamma_high",
    "sampling.full_gram_min",
    "sampling.regularization",
    "sampling.block",
    "field.kind",
    "field.psi",
    "field.kappa",
    "field.theta",
    "field.J",
    "field.abar",
    "mesh.nh",
    "rhs.constant",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| num(key, x.trim())).collect()
}

fn parse_rho(v: &str) -> Result<Rho> {
    let (kind, args) = v.split_once(':').unwrap_or((v, ""));
    let vals = if args.is_empty() { Vec::new() } else { list("weights.rho", args)? };
    let need = |n: usize| {
        if vals.len() == n {
            Ok(())
        } else {
            Err(Error::Config(format!("weights.rho: '{kind}' takes {n} argument(s)")))
        }
    };
    let rule = match kind.trim() {
        "constant" => {
            need(1)?;
            RhoRule::Constant { value: vals[0] }
        }
        "geometric" => {
            need(1)?;
            RhoRule::Geometric { base: vals[0] }
        }
        "power" => {
            need(2)?;
            RhoRule::Power {
                scale: vals[0],
                exponent: vals[1],
            }
        }
        "table" => RhoRule::Table { values: vals },
        other => return Err(Error::Config(format!("weights.rho: unknown rule '{other}'"))),
    };
    Ok(Rho::new(rule))
}

fn parse_c(v: &str) -> Result<CRule> {
    match v.split_once(':') {
        None if v == "legendre" => Ok(CRule::Legendre),
        None if v == "unit" => Ok(CRule::Unit),
        Some(("table", args)) => Ok(CRule::Table {
            values: list("weights.c", args)?,
        }),
        _ => Err(Error::Config(format!("weights.c: unknown rule '{v}'"))),
    }
}

fn parse_family(v: &str) -> Result<PolynomialFamily> {
    match v.split_once(':') {
        None if v == "hermite" => Ok(PolynomialFamily::hermite()),
        None if v == "legendre" => Ok(PolynomialFamily::legendre()),
        Some(("jacobi", args)) => {
            let ab = list("weights.family", args)?;
            if ab.len() != 2 {
                return Err(Error::Config("weights.family: jacobi:a,b".into()));
            }
            PolynomialFamily::jacobi(ab[0], ab[1]).map_err(|e| Error::Config(e.to_string()))
        }
        _ => Err(Error::Config(format!("weights.family: unknown family '{v}'"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(p: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let get = |k: &str| p.get(k).map(String::as_str);

        let d: usize = get("experiment.d").map(|v| num("experiment.d", v)).transpose()?.unwrap_or(1);
        if let Some(v) = get("experiment.target") {
            c.target = match v {
                "synthetic_scalar" => TargetKind::SyntheticScalar,
                "synthetic_bochner" => TargetKind::SyntheticBochner { d },
                "pde_lognormal" => TargetKind::PdeLognormal,
                "pde_affine" => TargetKind::PdeAffine,
                other => return Err(Error::Config(format!("experiment.target: unknown '{other}'"))),
            };
        }
        if let Some(v) = get("field.kind") {
            let t = match v {
                "lognormal" => TargetKind::PdeLognormal,
                "affine" => TargetKind::PdeAffine,
                other => return Err(Error::Config(format!("field.kind: unknown '{other}'"))),
            };
            if c.target.is_pde() && c.target != t {
                return Err(Error::Config(format!("field.kind '{v}' conflicts with the target")));
            }
            if get("experiment.target").is_none() || c.target.is_pde() {
                c.target = t;
            }
        }
        if let Some(v) = get("experiment.scheme") {
            c.scheme = SchemeChoice::parse(v)?;
        }
        if let Some(v) = get("experiment.n_grid") {
            c.n_grid = v
                .split(',')
                .map(|x| num("experiment.n_grid", x.trim()))
                .collect::<Result<_>>()?;
        }
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = get($key) {
                    $field = num($key, v)?;
                }
            };
        }
        set!("experiment.n", c.n);
        set!("experiment.seed", c.seed);
        set!("experiment.test_count", c.test_count);
        set!("experiment.active_size", c.active_size);
        set!("experiment.widths_count", c.widths_count);
        set!("experiment.widths_xi", c.widths_xi);
        set!("experiment.sample_m", c.sample_m);
        set!("experiment.sample_count", c.sample_count);
        set!("sampling.scheme_i_factor", c.sampling.scheme_i_factor);
        set!("sampling.oversampling", c.sampling.oversampling);
        set!("sampling.c2", c.sampling.c2);
        set!("sampling.tail_tol", c.sampling.tail_tol);
        set!("sampling.max_tail", c.sampling.max_tail);
        set!("sampling.gamma_low", c.sampling.subsample.gamma_low);
        set!("sampling.gamma_high", c.sampling.subsample.gamma_high);
        set!("sampling.full_gram_min", c.sampling.subsample.full_gram_min);
        set!("sampling.regularization", c.sampling.subsample.regularization);
        set!("sampling.block", c.sampling.subsample.block);
        set!("field.kappa", c.field.kappa);
        set!("field.theta", c.field.theta);
        set!("field.J", c.field.dims);
        set!("field.abar", c.field.abar);
        set!("mesh.nh", c.field.nh);
        set!("rhs.constant", c.field.rhs);
        if let Some(v) = get("field.psi") {
            c.field.psi = match v {
                "sine" => PsiFamily::Sine,
                "hats" => PsiFamily::Hats,
                other => return Err(Error::Config(format!("field.psi: unknown '{other}'"))),
            };
        }

        let kind = get("weights.kind").unwrap_or(match c.target {
            TargetKind::PdeLognormal => "lognormal",
            _ => "affine",
        });
        let mut rho = match get("weights.rho") {
            Some(v) => parse_rho(v)?,
            None => Rho::geometric(2.0),
        };
        let dims = match get("weights.dims") {
            Some(v) => Some(num::<u32>("weights.dims", v)?),
            None if c.target.is_pde() => Some(c.field.dims as u32),
            None => None,
        };
        if let Some(dims) = dims {
            rho = rho.truncated(dims);
        }
        let q: f64 = get("weights.q").map(|v| num("weights.q", v)).transpose()?.unwrap_or(1.0);
        if !(q > 0.0 && q < 2.0) {
            return Err(Error::Config(format!("weights.q must lie in (0, 2), got {q}")));
        }
        let spec = match kind {
            "lognormal" => {
                let eta = get("weights.eta").map(|v| num("weights.eta", v)).transpose()?.unwrap_or(2);
                WeightSpec::lognormal(eta, rho, q)
            }
            "affine" => {
                let cr = get("weights.c").map(parse_c).transpose()?.unwrap_or_default();
                WeightSpec::affine(rho, cr, q)
            }
            other => return Err(Error::Config(format!("weights.kind: unknown '{other}'"))),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        let scale: f64 = get("weights.scale").map(|v| num("weights.scale", v)).transpose()?.unwrap_or(1.0);
        c.weights = spec.with_scale(scale);

        c.family = match get("weights.family") {
            Some(v) => parse_family(v)?,
            None => match c.target {
                TargetKind::PdeLognormal => PolynomialFamily::hermite(),
                TargetKind::PdeAffine => PolynomialFamily::legendre(),
                _ if kind == "lognormal" => PolynomialFamily::hermite(),
                _ => PolynomialFamily::legendre(),
            },
        };
        if c.target.is_pde() {
            let expected = match c.target {
                TargetKind::PdeLognormal => PolynomialFamily::hermite(),
                _ => PolynomialFamily::legendre(),
            };
            if c.family != expected {
                return Err(Error::Config("weights.family does not match the field's parameter measure".into()));
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("experiment.n_grid must be non-empty and strictly increasing".into()));
        }
        if self.n_grid[0] < 2 || self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if self.test_count == 0 || self.sample_count == 0 || self.sample_m == 0 {
            return Err(Error::Config("counts must be positive".into()));
        }
        if let TargetKind::SyntheticBochner { d: 0 } = self.target {
            return Err(Error::Config("experiment.d must be positive".into()));
        }
        let s = &self.sampling;
        if !(s.scheme_i_factor > 0.0 && s.oversampling > 0.0 && s.c2 >= 1.0) {
            return Err(Error::Config("sampling factors must be positive and c2 >= 1".into()));
        }
        if self.field.nh < 2 || self.field.dims == 0 {
            return Err(Error::Config("mesh.nh >= 2 and field.J >= 1 required".into()));
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, scheme: Option<SchemeChoice>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(s) = scheme {
            self.scheme = s;
        }
        self
    }
}
