//! Experiment descriptions shared by the command line, JSON config files and
//! the acceptance suite, and the tables they produce.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::coalescent::{
    merger_rate, rate_table, simulate_typed_coalescent, small_time_verify, CsbpRates, LambdaCoalescent,
    RateProvider, EVENT_CSV_HEADER,
};
use crate::discrete::{bernoulli_identity_check, DiscreteEvent, GwModel, DEFAULT_OUTCOME_CAP};
use crate::error::{Error, Result};
use crate::forests::{
    self, conditional_law, count_forests, forest_energy, forest_law_q, MeshJets,
    DEFAULT_FOREST_CAP,
};
use crate::laplace::solve_u;
use crate::mechanism::{BranchingMechanism, MechanismSpec};
use crate::multi_index::MultiIndex;
use crate::particle::estimate_mrca;
use crate::poissonize::{
    gamma_factorial_check, gamma_identity_check, mixture_identity_mc, mrca_probability, tight_tolerance, ForestLawP,
    MixtureEvent, PopulationFixture,
};
use crate::quadrature::Tolerance;

pub const TOOL_NAME: &str = "coalescent";

/// A value given inline or by name: a preset or a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Inline(T),
    Named(String),
}

pub trait Named: Sized {
    fn preset(name: &str) -> Option<Result<Self>>;
    fn from_json_text(text: &str) -> Result<Self>;
}

impl<T: Named + Clone> Source<T> {
    pub fn load(&self) -> Result<T> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::Named(name) => {
                if let Some(v) = T::preset(name) {
                    return v;
                }
                let text = std::fs::read_to_string(name)
                    .map_err(|e| Error::Config(format!("cannot read {name:?}: {e}")))?;
                T::from_json_text(&text).map_err(|e| Error::Config(format!("{name}: {e}")))
            }
        }
    }

    fn resolved(&self) -> Result<Source<T>> {
        Ok(Source::Inline(self.load()?))
    }
}

fn preset_args(name: &str) -> (&str, Vec<f64>, bool) {
    let mut parts = name.split(':');
    let head = parts.next().unwrap_or("");
    let mut ok = true;
    let args = parts
        .filter_map(|p| {
            let v = p.parse::<f64>();
            ok &= v.is_ok();
            v.ok()
        })
        .collect();
    (head, args, ok)
}

impl Named for MechanismSpec {
    /// `feller:β`, `neveu`, `stable:α[:scale]`.
    fn preset(name: &str) -> Option<Result<Self>> {
        let (head, args, ok) = preset_args(name);
        if !ok {
            return None;
        }
        let mech = match (head, args.as_slice()) {
            ("feller", [b]) => BranchingMechanism::feller(*b),
            ("neveu", []) => Ok(BranchingMechanism::neveu()),
            ("stable", [a]) => BranchingMechanism::stable(*a, 1.0),
            ("stable", [a, s]) => BranchingMechanism::stable(*a, *s),
            _ => return None,
        };
        Some(mech.map(|m| m.to_spec()))
    }

    fn from_json_text(text: &str) -> Result<Self> {
        Ok(BranchingMechanism::from_json(text)?.to_spec())
    }
}

impl Named for PopulationFixture {
    /// `deterministic:z1[:z2…]`, `exponential:rate`, `feller:β:T:x`.
    fn preset(name: &str) -> Option<Result<Self>> {
        let (head, args, ok) = preset_args(name);
        if !ok || args.is_empty() {
            return None;
        }
        let f = match (head, args.as_slice()) {
            ("deterministic", _) => PopulationFixture::Deterministic { z: args },
            ("exponential", [rate]) => PopulationFixture::Exponential { rate: *rate },
            ("feller", [beta, horizon, x]) => PopulationFixture::Feller { beta: *beta, horizon: *horizon, x: *x },
            _ => return None,
        };
        Some(f.validate().map(|_| f))
    }

    fn from_json_text(text: &str) -> Result<Self> {
        let f: PopulationFixture = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }
}

impl Named for GwModel {
    /// `fixed:n1[:n2…]`.
    fn preset(name: &str) -> Option<Result<Self>> {
        let (head, args, ok) = preset_args(name);
        if !ok || head != "fixed" || args.is_empty() {
            return None;
        }
        if args.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return Some(Err(Error::Config(format!("bad census in {name:?}"))));
        }
        Some(Ok(GwModel::fixed(&args.iter().map(|&v| v as u32).collect::<Vec<_>>())))
    }

    fn from_json_text(text: &str) -> Result<Self> {
        GwModel::from_json(text)
    }
}

/// Named Λ-coalescents: `kingman:β`, `bolthausen-sznitman`, `beta:a`.
pub fn coalescent_fixture(name: &str) -> Result<LambdaCoalescent> {
    let (head, args, _) = preset_args(name);
    match (head, args.as_slice()) {
        ("kingman", [b]) => LambdaCoalescent::kingman(*b),
        ("bolthausen-sznitman" | "bs", []) => Ok(LambdaCoalescent::bolthausen_sznitman()),
        ("beta", [a]) => LambdaCoalescent::beta_coalescent(*a),
        _ => Err(Error::Config(format!("unknown coalescent fixture {name:?}"))),
    }
}

fn default_degree() -> u32 {
    2
}
pub fn default_js() -> Vec<u32> {
    (0..=6).collect()
}
pub fn default_zs() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}
pub fn default_factorial() -> Vec<FactorialCase> {
    let mut out = Vec::new();
    for d in 1..=3usize {
        for k in MultiIndex::all_up_to(d, 5) {
            let y: Vec<f64> = (0..d).map(|i| [0.7, 1.3, 2.5][i]).collect();
            out.push(FactorialCase { k: k.entries().to_vec(), y });
        }
    }
    out
}
fn default_replicas() -> u64 {
    100_000
}
pub fn default_t_grid() -> Vec<f64> {
    vec![8e-3, 4e-3, 2e-3, 1e-3]
}
pub fn default_times() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}
fn default_max_total() -> u32 {
    4
}
pub fn default_n_grid() -> Vec<u32> {
    vec![50, 100, 200]
}
fn default_runs() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorialCase {
    pub k: Vec<u32>,
    pub y: Vec<f64>,
}

/// One experiment; `c` and event types are 1-based as in the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    MechanismValidate {
        mech: Source<MechanismSpec>,
    },
    LaplaceEval {
        mech: Source<MechanismSpec>,
        t: f64,
        lambda: Vec<f64>,
        #[serde(default = "default_degree")]
        degree: u32,
    },
    ForestEnumerate {
        d: usize,
        k: Vec<u32>,
        m: usize,
        #[serde(default)]
        count_only: bool,
        #[serde(default)]
        cap: Option<u64>,
    },
    ForestLaw {
        mech: Source<MechanismSpec>,
        k: Vec<u32>,
        mesh: Vec<f64>,
        x: Vec<f64>,
        lambda: Vec<f64>,
        #[serde(default)]
        cap: Option<u64>,
    },
    ForestLawP {
        mech: Source<MechanismSpec>,
        k: Vec<u32>,
        mesh: Vec<f64>,
        x: Vec<f64>,
        #[serde(default)]
        cap: Option<u64>,
    },
    Mrca {
        mech: Source<MechanismSpec>,
        k: u32,
        horizon: f64,
        x: f64,
    },
    Rates {
        mech: Source<MechanismSpec>,
        x: Vec<f64>,
        k: Vec<u32>,
        #[serde(default)]
        alpha: Option<Vec<u32>>,
        #[serde(default)]
        c: Option<usize>,
    },
    CoalescentSimulate {
        #[serde(default)]
        fixture: Option<String>,
        #[serde(default)]
        mech: Option<Source<MechanismSpec>>,
        #[serde(default)]
        x: Option<Vec<f64>>,
        k: Vec<u32>,
        #[serde(default = "default_runs")]
        runs: u64,
        #[serde(default)]
        horizon: Option<f64>,
    },
    VerifyGamma {
        #[serde(default = "default_js")]
        js: Vec<u32>,
        #[serde(default = "default_zs")]
        zs: Vec<f64>,
        #[serde(default = "default_factorial")]
        factorial: Vec<FactorialCase>,
    },
    VerifyMixture {
        fixture: Source<PopulationFixture>,
        k: Vec<u32>,
        #[serde(default)]
        events: Vec<String>,
        #[serde(default = "default_replicas")]
        replicas: u64,
    },
    VerifyDiscrete {
        model: Source<GwModel>,
        k: Vec<u32>,
        #[serde(default)]
        events: Vec<String>,
        #[serde(default)]
        cap: Option<usize>,
    },
    VerifyPartition {
        mech: Source<MechanismSpec>,
        x: Vec<f64>,
        lambda: Vec<f64>,
        horizon: f64,
        m: usize,
        #[serde(default)]
        ks: Option<Vec<Vec<u32>>>,
        #[serde(default = "default_max_total")]
        max_total: u32,
        #[serde(default)]
        cap: Option<u64>,
    },
    VerifySmallTime {
        mech: Source<MechanismSpec>,
        x: Vec<f64>,
        k: Vec<u32>,
        alpha: Vec<u32>,
        c: usize,
        #[serde(default = "default_t_grid")]
        t_grid: Vec<f64>,
    },
    VerifySemigroup {
        mech: Source<MechanismSpec>,
        #[serde(default = "default_times")]
        s: Vec<f64>,
        #[serde(default = "default_times")]
        t: Vec<f64>,
        #[serde(default)]
        theta: Option<Vec<Vec<f64>>>,
    },
    ParticleMrca {
        mech: Source<MechanismSpec>,
        x: Vec<f64>,
        horizon: f64,
        k: Vec<u32>,
        #[serde(default = "default_n_grid")]
        n: Vec<u32>,
        #[serde(default = "default_replicas")]
        replicas: u64,
        #[serde(default)]
        reference: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    pub abs: f64,
    pub rel: f64,
    #[serde(default)]
    pub max_intervals: Option<usize>,
}

impl ToleranceOverride {
    pub fn tolerance(&self) -> Tolerance {
        let t = Tolerance::new(self.abs, self.rel);
        match self.max_intervals {
            Some(n) => t.with_max_intervals(n),
            None => t,
        }
    }
}

/// A complete run: the experiment plus global settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub tolerance: Option<ToleranceOverride>,
    pub experiment: Experiment,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            seed: 0,
            threads: None,
            output: None,
            format: Format::Csv,
            tolerance: None,
            experiment,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// SHA-256 of the experiment with every named input loaded, together with
    /// the seed and tolerance; output settings do not enter.
    pub fn hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            seed: u64,
            tolerance: &'a Option<ToleranceOverride>,
            experiment: &'a Experiment,
        }
        let resolved = self.experiment.resolved()?;
        let text = serde_json::to_string(&Hashed {
            seed: self.seed,
            tolerance: &self.tolerance,
            experiment: &resolved,
        })?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }
}

/// Tabular result of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Extra `key: value` lines for the header.
    pub notes: Vec<(String, String)>,
    /// `None` for computations without an acceptance band.
    pub passed: Option<bool>,
    /// Line-oriented output used instead of CSV rows when present.
    pub lines: Option<Vec<String>>,
}

impl Report {
    fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
            passed: None,
            lines: None,
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    fn require(&mut self, ok: bool) {
        self.passed = Some(self.passed.unwrap_or(true) && ok);
    }
}

/// Header fields written before every table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Metadata {
    pub fn new(config: &ExperimentConfig, report: &Report) -> Result<Self> {
        Ok(Self {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: report.command.clone(),
            seed: config.seed,
            config_sha256: config.hash()?,
        })
    }
}

pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or_else(|| Value::String(format!("{v}")), Value::Number)
}

fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

fn csv_cell(v: &Value) -> String {
    let raw = match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

pub fn render(report: &Report, meta: &Metadata, format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# tool: {} {}", meta.tool, meta.version);
            let _ = writeln!(out, "# command: {}", meta.command);
            let _ = writeln!(out, "# seed: {}", meta.seed);
            let _ = writeln!(out, "# config-sha256: {}", meta.config_sha256);
            for (k, v) in &report.notes {
                let _ = writeln!(out, "# {k}: {v}");
            }
            if let Some(p) = report.passed {
                let _ = writeln!(out, "# status: {}", if p { "pass" } else { "fail" });
            }
            if let Some(lines) = &report.lines {
                for l in lines {
                    let _ = writeln!(out, "{l}");
                }
            } else {
                let _ = writeln!(out, "{}", report.columns.join(","));
                for row in &report.rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
            }
            Ok(out)
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                metadata: &'a Metadata,
                #[serde(flatten)]
                report: &'a Report,
            }
            let mut s = serde_json::to_string_pretty(&Doc { metadata: meta, report })?;
            s.push('\n');
            Ok(s)
        }
    }
}

fn mech_of(src: &Source<MechanismSpec>, tol: Option<Tolerance>) -> Result<BranchingMechanism> {
    let m = BranchingMechanism::from_spec(src.load()?)?;
    Ok(match tol {
        Some(t) => m.with_tolerance(t),
        None => m,
    })
}

fn multi(v: &[u32]) -> Result<MultiIndex> {
    MultiIndex::new(v.to_vec())
}

fn type_index(c: usize, d: usize) -> Result<usize> {
    if c == 0 || c > d {
        return Err(Error::Config(format!("type c = {c} must lie in 1..={d}")));
    }
    Ok(c - 1)
}

fn forest_cap(cap: Option<u64>) -> u128 {
    cap.map_or(DEFAULT_FOREST_CAP, u128::from)
}

fn dims(expected: usize, pairs: &[(&str, usize)]) -> Result<()> {
    for (name, len) in pairs {
        if *len != expected {
            return Err(Error::Config(format!("{name} has {len} entries, expected {expected}")));
        }
    }
    Ok(())
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MechanismValidate { .. } => "mechanism validate",
            Self::LaplaceEval { .. } => "laplace eval",
            Self::ForestEnumerate { .. } => "forest enumerate",
            Self::ForestLaw { .. } => "forest law",
            Self::ForestLawP { .. } => "forest-law-p",
            Self::Mrca { .. } => "mrca",
            Self::Rates { .. } => "rates",
            Self::CoalescentSimulate { .. } => "coalescent simulate",
            Self::VerifyGamma { .. } => "verify gamma",
            Self::VerifyMixture { .. } => "verify mixture",
            Self::VerifyDiscrete { .. } => "verify discrete",
            Self::VerifyPartition { .. } => "verify partition",
            Self::VerifySmallTime { .. } => "verify small-time",
            Self::VerifySemigroup { .. } => "verify semigroup",
            Self::ParticleMrca { .. } => "particle mrca",
        }
    }

    /// Copy with every named mechanism, fixture and model loaded inline.
    pub fn resolved(&self) -> Result<Experiment> {
        let mut e = self.clone();
        match &mut e {
            Self::MechanismValidate { mech }
            | Self::LaplaceEval { mech, .. }
            | Self::ForestLaw { mech, .. }
            | Self::ForestLawP { mech, .. }
            | Self::Mrca { mech, .. }
            | Self::Rates { mech, .. }
            | Self::VerifyPartition { mech, .. }
            | Self::VerifySmallTime { mech, .. }
            | Self::VerifySemigroup { mech, .. }
            | Self::ParticleMrca { mech, .. } => *mech = mech.resolved()?,
            Self::CoalescentSimulate { mech: Some(mech), .. } => *mech = mech.resolved()?,
            Self::VerifyMixture { fixture, .. } => *fixture = fixture.resolved()?,
            Self::VerifyDiscrete { model, .. } => *model = model.resolved()?,
            _ => {}
        }
        Ok(e)
    }

    pub fn run(&self, seed: u64, tol: Option<Tolerance>) -> Result<Report> {
        match self {
            Self::MechanismValidate { mech } => {
                let mut r = Report::new(self.name(), &["check", "ok", "detail"]);
                // structural problems surface as a failed row, not an error
                match BranchingMechanism::from_spec(mech.load()?) {
                    Ok(m) => {
                        for (name, ok, detail) in m.validate() {
                            r.rows.push(vec![text(name), Value::Bool(ok), text(detail)]);
                            r.require(ok);
                        }
                    }
                    Err(e) => {
                        r.rows.push(vec![text("construction"), Value::Bool(false), text(e.to_string())]);
                        r.require(false);
                    }
                }
                Ok(r)
            }
            Self::LaplaceEval { mech, t, lambda, degree } => {
                let m = mech_of(mech, tol)?;
                dims(m.dim(), &[("lambda", lambda.len())])?;
                let sol = solve_u(&m, *t, lambda, *degree)?;
                let mut r = Report::new(self.name(), &["i", "alpha", "value"]);
                for i in 0..m.dim() {
                    for a in MultiIndex::all_up_to(m.dim(), *degree) {
                        r.rows.push(vec![Value::from(i + 1), text(a.to_string()), num(sol.derivative(i, &a)?)]);
                    }
                }
                r.note("ode-steps", sol.stats().steps);
                Ok(r)
            }
            Self::ForestEnumerate { d, k, m, count_only, cap } => {
                let k = multi(k)?;
                dims(*d, &[("k", k.dim())])?;
                let mut r = Report::new(self.name(), &["k", "m", "d", "count"]);
                let count = count_forests(&k, *m, *d)?;
                if *count_only {
                    r.rows.push(vec![text(k.to_string()), Value::from(*m), Value::from(*d), text(count.to_string())]);
                    return Ok(r);
                }
                let lines: Vec<String> = forests::ForestEnumerator::new(&k, *m, *d, forest_cap(*cap))?
                    .map(|h| h.to_line())
                    .collect();
                r.note("count", count);
                r.lines = Some(lines);
                Ok(r)
            }
            Self::ForestLaw { mech, k, mesh, x, lambda, cap } => {
                let m = mech_of(mech, tol)?;
                let k = multi(k)?;
                dims(m.dim(), &[("k", k.dim()), ("x", x.len()), ("lambda", lambda.len())])?;
                let jets = MeshJets::new(&m, mesh, lambda, k.total())?;
                let cond = conditional_law(&k, x, &jets, forest_cap(*cap))?;
                let mut r = Report::new(self.name(), &["forest_id", "forest", "energy", "q_probability", "conditional"]);
                for (id, (h, p)) in cond.iter().enumerate() {
                    r.rows.push(vec![
                        Value::from(id),
                        text(h.to_line()),
                        num(forest_energy(h, x, &jets)?),
                        num(forest_law_q(h, x, &jets)?),
                        num(*p),
                    ]);
                }
                let total: f64 = cond.iter().map(|(_, p)| p).sum();
                r.note("conditional-total", total);
                Ok(r)
            }
            Self::ForestLawP { mech, k, mesh, x, cap } => {
                let m = mech_of(mech, tol)?;
                let k = multi(k)?;
                dims(m.dim(), &[("k", k.dim()), ("x", x.len())])?;
                let qtol = tol.unwrap_or_else(|| Tolerance::new(1e-12, 1e-10));
                let mut law = ForestLawP::new(&m, mesh, x, &k, qtol)?;
                let mut r = Report::new(self.name(), &["quantity", "value", "error_estimate", "method"]);
                let mut sum = 0.0;
                let mut sum_err = 0.0;
                let depth = mesh.len().saturating_sub(1);
                for h in forests::ForestEnumerator::new(&k, depth, m.dim(), forest_cap(*cap))? {
                    let p = law.probability(&h)?;
                    sum += p.value;
                    sum_err += p.error;
                    r.rows.push(vec![text(h.to_line()), num(p.value), num(p.error), text("quadrature")]);
                }
                let total = law.total()?;
                r.rows.push(vec![text("sum"), num(sum), num(sum_err), text("quadrature")]);
                r.rows.push(vec![text("total"), num(total.value), num(total.error), text("jet partition function")]);
                r.require((sum - total.value).abs() <= 1e-8 + 10.0 * (sum_err + total.error));
                Ok(r)
            }
            Self::Mrca { mech, k, horizon, x } => {
                let m = mech_of(mech, tol)?;
                let est = mrca_probability(&m, *k, *horizon, *x, &tol.unwrap_or_else(tight_tolerance))?;
                let mut r = Report::new(self.name(), &["quantity", "value", "error_estimate", "method"]);
                r.rows.push(vec![text("mrca"), num(est.value), num(est.error), text("quadrature")]);
                Ok(r)
            }
            Self::Rates { mech, x, k, alpha, c } => {
                let m = mech_of(mech, tol)?;
                let k = multi(k)?;
                dims(m.dim(), &[("k", k.dim()), ("x", x.len())])?;
                let mut r = Report::new(self.name(), &["k", "alpha", "c", "rate", "rate_times_choices"]);
                match (alpha, c) {
                    (Some(a), Some(c)) => {
                        let a = multi(a)?;
                        let c = type_index(*c, m.dim())?;
                        let rate = merger_rate(&m, x, &k, &a, c)?;
                        r.rows.push(vec![
                            text(k.to_string()),
                            text(a.to_string()),
                            Value::from(c + 1),
                            num(rate),
                            num(rate * k.binomial(&a)),
                        ]);
                    }
                    (None, None) => {
                        let provider = CsbpRates { mech: &m, x: x.clone() };
                        for row in rate_table(&provider, &k)? {
                            r.rows.push(vec![
                                text(k.to_string()),
                                text(row.alpha.to_string()),
                                Value::from(row.c + 1),
                                num(row.per_group),
                                num(row.total),
                            ]);
                        }
                    }
                    _ => return Err(Error::Config("give both alpha and c, or neither".into())),
                }
                Ok(r)
            }
            Self::CoalescentSimulate { fixture, mech, x, k, runs, horizon } => {
                let k = multi(k)?;
                let cols: Vec<&str> = EVENT_CSV_HEADER.split(',').collect();
                let mut r = Report::new(self.name(), &cols);
                let held: BranchingMechanism;
                let provider: Box<dyn RateProvider + '_> = match (fixture, mech, x) {
                    (Some(name), None, None) => Box::new(coalescent_fixture(name)?),
                    (None, Some(mech), Some(x)) => {
                        held = mech_of(mech, tol)?;
                        dims(held.dim(), &[("x", x.len())])?;
                        Box::new(CsbpRates { mech: &held, x: x.clone() })
                    }
                    _ => return Err(Error::Config("give either a fixture, or a mechanism with x".into())),
                };
                let log = simulate_typed_coalescent(&*provider, &k, *horizon, *runs, seed)?;
                for ev in log.iter().flatten() {
                    r.rows.push(vec![
                        Value::from(ev.run),
                        num(ev.time),
                        text(ev.kind()),
                        Value::from(ev.c + 1),
                        text(serde_json::to_string(ev.alpha.entries())?),
                        Value::from(ev.blocks_before),
                        Value::from(ev.blocks_after),
                    ]);
                }
                Ok(r)
            }
            Self::VerifyGamma { js, zs, factorial } => {
                let qtol = tol.unwrap_or_else(tight_tolerance);
                let mut r = Report::new(self.name(), &["identity", "parameters", "value", "reference", "deviation"]);
                for &j in js {
                    for &z in zs {
                        let est = gamma_identity_check(j, z, &qtol)?;
                        let dev = (est.value - 1.0).abs();
                        r.require(dev < 1e-9);
                        r.rows.push(vec![text("gamma"), text(format!("j={j} z={z}")), num(est.value), num(1.0), num(dev)]);
                    }
                }
                for case in factorial {
                    let k = multi(&case.k)?;
                    let est = gamma_factorial_check(&k, &case.y, &qtol)?;
                    let reference = k.factorial() / k.pow(&case.y);
                    let dev = ((est.value - reference) / reference).abs();
                    r.require(dev < 1e-8);
                    r.rows.push(vec![
                        text("gamma-factorial"),
                        text(format!("k={k} y={:?}", case.y)),
                        num(est.value),
                        num(reference),
                        num(dev),
                    ]);
                }
                Ok(r)
            }
            Self::VerifyMixture { fixture, k, events, replicas } => {
                let f = fixture.load()?;
                let k = multi(k)?;
                let evs: Vec<MixtureEvent> = if events.is_empty() {
                    MixtureEvent::ALL.iter().copied().filter(|e| e.applies_to(&k)).collect()
                } else {
                    events.iter().map(|e| MixtureEvent::parse(e)).collect::<Result<_>>()?
                };
                let rows = mixture_identity_mc(&k, &f, &evs, *replicas, seed)?;
                let mut r = Report::new(self.name(), &["event", "lhs", "lhs_se", "rhs", "rhs_se", "z"]);
                for row in rows {
                    r.require(row.z.abs() <= 3.0);
                    r.rows.push(vec![
                        text(row.event),
                        num(row.lhs),
                        num(row.lhs_se),
                        num(row.rhs),
                        num(row.rhs_se),
                        num(row.z),
                    ]);
                }
                r.note("replicas", replicas);
                r.note("band", "|z| <= 3");
                Ok(r)
            }
            Self::VerifyDiscrete { model, k, events, cap } => {
                let model = model.load()?;
                let k = multi(k)?;
                let evs: Vec<DiscreteEvent> = if events.is_empty() {
                    vec![
                        DiscreteEvent::Full,
                        DiscreteEvent::FirstSampleIs { ty: 0, member: 0 },
                        DiscreteEvent::Contains { ty: 0, member: 0 },
                        DiscreteEvent::SameAncestor { generation: 0 },
                    ]
                } else {
                    events.iter().map(|e| DiscreteEvent::parse(e)).collect::<Result<_>>()?
                };
                let rows = bernoulli_identity_check(&model, &k, &evs, cap.unwrap_or(DEFAULT_OUTCOME_CAP))?;
                let mut r = Report::new(self.name(), &["event", "lhs", "rhs", "gap", "arithmetic_mode", "lhs_exact", "rhs_exact"]);
                for row in rows {
                    r.require(row.holds());
                    r.rows.push(vec![
                        text(row.event.clone()),
                        num(row.lhs),
                        num(row.rhs),
                        num(row.gap),
                        text(row.mode.to_string()),
                        row.lhs_exact.clone().map_or(Value::Null, text),
                        row.rhs_exact.clone().map_or(Value::Null, text),
                    ]);
                }
                Ok(r)
            }
            Self::VerifyPartition { mech, x, lambda, horizon, m, ks, max_total, cap } => {
                let mc = mech_of(mech, tol)?;
                let d = mc.dim();
                dims(d, &[("x", x.len()), ("lambda", lambda.len())])?;
                if *m == 0 {
                    return Err(Error::Config("m must be at least 1".into()));
                }
                let ks: Vec<MultiIndex> = match ks {
                    Some(list) => list.iter().map(|k| multi(k)).collect::<Result<_>>()?,
                    None => MultiIndex::all_up_to(d, *max_total).into_iter().filter(|k| !k.is_zero()).collect(),
                };
                let degree = ks.iter().map(MultiIndex::total).max().unwrap_or(0);
                let mesh: Vec<f64> = (0..=*m).map(|i| horizon * i as f64 / *m as f64).collect();
                let jets = MeshJets::new(&mc, &mesh, lambda, degree)?;
                let sol = solve_u(&mc, *horizon, lambda, degree)?;
                let mut r = Report::new(self.name(), &["k", "m", "forests", "enumerated", "jet", "relative_deviation"]);
                for k in &ks {
                    dims(d, &[("k", k.dim())])?;
                    let enumerated = forests::partition_function_enumerated(k, x, &jets, forest_cap(*cap))?;
                    let jet = forests::partition_function_from_jet(k, x, &sol)?;
                    let dev = (enumerated - jet).abs() / jet.abs().max(f64::MIN_POSITIVE);
                    r.require(dev <= 1e-8);
                    r.rows.push(vec![
                        text(k.to_string()),
                        Value::from(*m),
                        text(count_forests(k, *m, d)?.to_string()),
                        num(enumerated),
                        num(jet),
                        num(dev),
                    ]);
                }
                Ok(r)
            }
            Self::VerifySmallTime { mech, x, k, alpha, c, t_grid } => {
                let m = mech_of(mech, tol)?;
                let k = multi(k)?;
                let a = multi(alpha)?;
                dims(m.dim(), &[("x", x.len()), ("k", k.dim()), ("alpha", a.dim())])?;
                let c = type_index(*c, m.dim())?;
                let qtol = tol.unwrap_or_else(|| Tolerance::new(1e-12, 1e-10));
                let mut grid = t_grid.clone();
                grid.sort_by(|a, b| b.total_cmp(a));
                let rep = small_time_verify(&m, x, &k, &a, c, &grid, &qtol)?;
                let mut r = Report::new(self.name(), &["t", "ratio", "ratio_error", "limit", "gap"]);
                for row in &rep.rows {
                    r.rows.push(vec![num(row.t), num(row.ratio), num(row.ratio_error), num(rep.limit_closed), num(row.gap)]);
                }
                let agree = (rep.limit_integral - rep.limit_closed).abs() / rep.limit_closed.abs().max(f64::MIN_POSITIVE);
                r.note("limit-closed-form", rep.limit_closed);
                r.note("limit-integral", rep.limit_integral);
                r.note("limit-agreement", agree);
                r.note("order", rep.order);
                let finest = rep.rows.last().map_or(f64::INFINITY, |row| row.gap);
                r.require(agree <= 1e-6);
                r.require(finest <= 0.05);
                r.require(rep.gap_halves(0.05));
                Ok(r)
            }
            Self::VerifySemigroup { mech, s, t, theta } => {
                let m = mech_of(mech, tol)?;
                let d = m.dim();
                let thetas = theta
                    .clone()
                    .unwrap_or_else(|| [0.5, 2.0, 10.0].iter().map(|&v| vec![v; d]).collect());
                let mut r = Report::new(self.name(), &["s", "t", "theta", "deviation"]);
                let mut worst = 0.0f64;
                for th in &thetas {
                    dims(d, &[("theta", th.len())])?;
                    for &si in s {
                        let us = solve_u(&m, si, th, 0)?.value();
                        for &ti in t {
                            let composed = solve_u(&m, ti, &us, 0)?.value();
                            let direct = solve_u(&m, si + ti, th, 0)?.value();
                            let dev = composed.iter().zip(&direct).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
                            worst = worst.max(dev);
                            r.rows.push(vec![num(si), num(ti), text(format!("{th:?}")), num(dev)]);
                        }
                    }
                }
                r.note("max-deviation", worst);
                r.require(worst <= 1e-8);
                Ok(r)
            }
            Self::ParticleMrca { mech, x, horizon, k, n, replicas, reference } => {
                let m = mech_of(mech, tol)?;
                let k = multi(k)?;
                let est = estimate_mrca(&m, x, *horizon, &k, n, *replicas, seed)?;
                let mut r = Report::new(self.name(), &["n", "estimate", "stderr", "reference"]);
                let reference_cell = reference.map_or(Value::Null, num);
                for row in &est.rows {
                    r.rows.push(vec![Value::from(row.n), num(row.estimate), num(row.stderr), reference_cell.clone()]);
                }
                if let Some(fit) = est.fit {
                    r.note("extrapolated", fit.limit);
                    r.note("extrapolated-stderr", fit.limit_stderr);
                    r.note("bias-slope", fit.slope);
                }
                if let Some(reference) = reference {
                    r.note("band", "|estimate - reference| <= 3 SE + |slope|/n at the largest n");
                    r.require(est.consistent_with(*reference));
                }
                Ok(r)
            }
        }
    }
}

/// Runs a config and renders it. Returns the text and the pass flag.
pub fn execute(config: &ExperimentConfig) -> Result<(String, Option<bool>)> {
    let tol = config.tolerance.map(|t| t.tolerance());
    let report = config.experiment.run(config.seed, tol)?;
    let meta = Metadata::new(config, &report)?;
    Ok((render(&report, &meta, config.format)?, report.passed))
}
