//! Subcommand configs and runners.
//!
//! Each runner takes the JSON config plus flag overrides and returns the
//! rendered output together with any tolerance failures. Validation problems
//! are errors; tolerance failures still produce the full output.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tensorlevy_core::coalg::{generated_subcoalgebra_of_set, subcoalgebra_defect};
use tensorlevy_core::fock::{generator_functional, word_vacuum_moment, Triplet};
use tensorlevy_core::functional::{
    bernoulli_moments, clt_functional, conv_exp, cumulant_functional, gaussian_moments, CovarianceMatrix, Functional,
};
use tensorlevy_core::linalg::{CMatrix, CVector};
use tensorlevy_core::positivity::{schoenberg_verify, DEFAULT_TOL};
use tensorlevy_core::qsde::{Drift, UnitaryProcess};
use tensorlevy_core::scalar::{c, real};
use tensorlevy_core::{Alphabet, Word};

use crate::formats::{matrix, FunctionalJson, GridJson, MatrixJson, ModelJson, PolynomialJson, TripletJson};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Moments,
    Clt,
    Positivity,
    FockMoments,
    Qsde,
    Subcoalgebra,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftChoice {
    #[default]
    Consistent,
    PaperLiteral,
}

impl From<DriftChoice> for Drift {
    fn from(d: DriftChoice) -> Self {
        match d {
            DriftChoice::Consistent => Drift::Consistent,
            DriftChoice::PaperLiteral => Drift::Literal,
        }
    }
}

/// Flag values that override the config file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub degree: Option<usize>,
    pub drift: Option<DriftChoice>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub body: String,
    pub failures: Vec<String>,
}

pub fn run(command: Command, config: &str, overrides: Overrides) -> Result<Output, CliError> {
    let value: serde_json::Value = serde_json::from_str(config).map_err(|e| CliError::Config(e.to_string()))?;
    match command {
        Command::Moments => moments(parse(value)?, overrides),
        Command::Clt => clt(parse(value)?, overrides),
        Command::Positivity => positivity(parse(value)?, overrides),
        Command::FockMoments => fock_moments(parse(value)?, overrides),
        Command::Qsde => qsde(parse(value)?, overrides),
        Command::Subcoalgebra => subcoalgebra(parse(value)?, overrides),
    }
}

fn parse<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

fn covariance(q: &MatrixJson) -> Result<CovarianceMatrix, CliError> {
    Ok(CovarianceMatrix::new(matrix(q, "Q")?)?)
}

fn words(alphabet: Alphabet, listed: &Option<Vec<String>>, degree: usize) -> Result<Vec<Word>, CliError> {
    match listed {
        Some(list) => list.iter().map(|w| Ok(alphabet.parse_word(w)?)).collect(),
        None => Ok(alphabet.words_up_to(degree)),
    }
}

fn max_degree(words: &[Word]) -> usize {
    words.iter().map(Word::degree).max().unwrap_or(0)
}

fn report(config: &impl Serialize, body: serde_json::Value) -> Result<String, CliError> {
    let mut out = json!({ "config": config });
    if let (Some(map), serde_json::Value::Object(extra)) = (out.as_object_mut(), body) {
        map.extend(extra);
    }
    let mut text = serde_json::to_string_pretty(&out).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn default_degree() -> usize {
    4
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub Q: MatrixJson,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<String>>,
}

/// `γ_Q(w)` and `g_Q(w)` for each word.
fn moments(mut cfg: MomentsConfig, o: Overrides) -> Result<Output, CliError> {
    cfg.degree = o.degree.unwrap_or(cfg.degree);
    let q = covariance(&cfg.Q)?;
    let list = words(q.alphabet(), &cfg.words, cfg.degree)?;
    let n = max_degree(&list);
    let (gamma, g) = (gaussian_moments(&q, n), cumulant_functional(&q, n));
    let mut body = String::from("word,re,im,generator_re,generator_im\n");
    for w in &list {
        let (a, b) = (gamma.value(w)?, g.value(w)?);
        writeln!(body, "{w},{:?},{:?},{:?},{:?}", a.re, a.im, b.re, b.im).unwrap();
    }
    Ok(Output { body, failures: Vec::new() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[allow(non_snake_case)]
pub enum StateSource {
    /// Fair ±1 coin in one variable.
    Bernoulli,
    /// `δ + g_Q`.
    GaussianPerturbation { Q: MatrixJson },
    Functional { functional: FunctionalJson },
}

fn default_schedule() -> Vec<usize> {
    (0..=10).map(|k| 1 << k).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    pub source: StateSource,
    #[serde(default = "default_schedule")]
    pub n: Vec<usize>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<String>>,
    /// Largest error allowed at the last `n` of the schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Values of `φ^{⋆n}(w(x/√n))` against `γ_Q`, `Q_ij = φ(x_i x_j)`.
fn clt(mut cfg: CltConfig, o: Overrides) -> Result<Output, CliError> {
    cfg.degree = o.degree.unwrap_or(cfg.degree);
    let phi = match &cfg.source {
        StateSource::Bernoulli => bernoulli_moments(cfg.degree),
        StateSource::GaussianPerturbation { Q } => {
            let q = covariance(Q)?;
            Functional::counit(q.alphabet(), cfg.degree).checked_add(&cumulant_functional(&q, cfg.degree))?
        }
        StateSource::Functional { functional } => functional.functional()?,
    };
    let alphabet = phi.alphabet();
    if !alphabet.is_self_adjoint() {
        return Err(CliError::Config("clt needs a self-adjoint alphabet".into()));
    }
    let list = words(alphabet, &cfg.words, cfg.degree.min(phi.max_degree()))?;
    let n_max = max_degree(&list);
    let d = alphabet.d();
    let x = |i: usize| tensorlevy_core::Letter::X(i as u16);
    let q = if phi.max_degree() >= 2 {
        CMatrix::from_fn(d, d, |i, j| phi.value(&Word::new(vec![x(i), x(j)])).unwrap())
    } else {
        CMatrix::zeros(d, d)
    };
    let target = gaussian_moments(&CovarianceMatrix::new(q)?, n_max);
    let phi = phi.truncate(n_max);
    let mut body = String::from("n,word,re,im,abs_error\n");
    let mut last_error = 0.0;
    for &n in &cfg.n {
        let f = clt_functional(&phi, n)?;
        last_error = 0.0_f64;
        for w in &list {
            let (v, t) = (f.value(w)?, target.value(w)?);
            let err = (v - t).norm();
            last_error = last_error.max(err);
            writeln!(body, "{n},{w},{:?},{:?},{err:?}", v.re, v.im).unwrap();
        }
    }
    let mut failures = Vec::new();
    if let Some(tol) = cfg.tolerance {
        if last_error > tol {
            failures.push(format!("clt error {last_error:e} at the last n exceeds {tol:e}"));
        }
    }
    Ok(Output { body, failures })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[allow(non_snake_case)]
pub enum GeneratorSource {
    /// `g_Q`; positivity accepts any hermitian `Q`, the Fock realization only PSD ones.
    Gaussian { Q: MatrixJson },
    QuantumWiener { d: usize },
    Triplet { triplet: TripletJson },
    /// Drawn from `--seed`.
    RandomTriplet { d: usize, h: usize },
    /// Positivity only.
    Functional { functional: FunctionalJson },
}

fn random_triplet(d: usize, h: usize, seed: u64) -> Result<Triplet, CliError> {
    if d == 0 || h == 0 {
        return Err(CliError::Config("random triplet needs positive d and h".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = |s: f64| c(rng.gen_range(-s..s), rng.gen_range(-s..s));
    let rho0 = (0..d)
        .map(|_| {
            let a = CMatrix::from_fn(h, h, |_, _| z(0.5));
            (&a + a.adjoint()).scale(0.5)
        })
        .collect();
    let eta0 = (0..d).map(|_| CVector::from_fn(h, |_, _| z(0.7))).collect();
    let psi0 = (0..d).map(|_| real(z(0.5).re)).collect();
    Ok(Triplet::new(h, rho0, eta0, psi0)?)
}

impl GeneratorSource {
    fn triplet(&self, seed: u64) -> Result<Option<Triplet>, CliError> {
        Ok(match self {
            GeneratorSource::Gaussian { Q } => Some(Triplet::gaussian(&covariance(Q)?)?),
            GeneratorSource::QuantumWiener { d } => Some(Triplet::quantum_wiener(*d)),
            GeneratorSource::Triplet { triplet } => Some(triplet.triplet()?),
            GeneratorSource::RandomTriplet { d, h } => Some(random_triplet(*d, *h, seed)?),
            GeneratorSource::Functional { .. } => None,
        })
    }
}

fn default_times() -> Vec<f64> {
    vec![0.25, 1.0, 4.0]
}

fn default_k() -> usize {
    2
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
#[serde(deny_unknown_fields)]
pub struct PositivityConfig {
    pub generator: GeneratorSource,
    #[serde(default = "default_times")]
    pub t: Vec<f64>,
    #[serde(default = "default_k")]
    pub K: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Filled in for random sources so the report is self-contained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_triplet: Option<TripletJson>,
}

/// Positivity of `exp_⋆(tψ)` on words of degree `≤ K`, one report per `t`.
fn positivity(mut cfg: PositivityConfig, o: Overrides) -> Result<Output, CliError> {
    cfg.K = o.degree.unwrap_or(cfg.K);
    cfg.seed = o.seed.unwrap_or(cfg.seed);
    let n = 2 * cfg.K;
    let psi = match &cfg.generator {
        GeneratorSource::Gaussian { Q } => cumulant_functional(&covariance(Q)?, n),
        GeneratorSource::Functional { functional } => functional.functional()?,
        other => {
            let triplet = other.triplet(cfg.seed)?.expect("triplet sources");
            if matches!(other, GeneratorSource::RandomTriplet { .. }) {
                cfg.resolved_triplet = Some((&triplet).into());
            }
            generator_functional(&triplet, n)
        }
    };
    if !psi.is_hermitian() {
        return Err(CliError::Config("the generator is not hermitian".into()));
    }
    let reports = schoenberg_verify(&psi, &cfg.t, cfg.K, cfg.tol)?;
    let failures = reports
        .iter()
        .zip(&cfg.t)
        .filter(|(r, _)| !r.is_psd)
        .map(|(r, t)| format!("not positive at t = {t}: min eigenvalue {:e}", r.min_eigenvalue))
        .collect::<Vec<_>>();
    let rows: Vec<_> = reports
        .iter()
        .zip(&cfg.t)
        .map(|(r, &t)| json!({ "t": t, "K": cfg.K, "min_eigenvalue": r.min_eigenvalue, "is_psd": r.is_psd }))
        .collect();
    let body = report(&cfg, json!({ "reports": rows, "all_psd": failures.is_empty() }))?;
    Ok(Output { body, failures })
}

fn default_fock_times() -> Vec<f64> {
    vec![1.0]
}

fn default_fock_tol() -> f64 {
    1e-9
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    pub generator: GeneratorSource,
    #[serde(default = "default_fock_times")]
    pub t: Vec<f64>,
    /// Defaults to one bin per unit of time up to the largest `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridJson>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Defaults to the largest word length, which makes the moments exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<String>>,
    #[serde(default = "default_fock_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Vacuum moments of the additive Fock realization against `exp_⋆(tψ)`.
fn fock_moments(mut cfg: FockConfig, o: Overrides) -> Result<Output, CliError> {
    cfg.degree = o.degree.unwrap_or(cfg.degree);
    cfg.seed = o.seed.unwrap_or(cfg.seed);
    let triplet = cfg
        .generator
        .triplet(cfg.seed)?
        .ok_or_else(|| CliError::Config("fock-moments needs a triplet source".into()))?;
    let list = words(triplet.alphabet(), &cfg.words, cfg.degree)?;
    let n = max_degree(&list);
    let t_max = cfg.t.iter().copied().fold(0.0, f64::max);
    let grid = cfg.grid.unwrap_or(GridJson { t_max: t_max.max(1.0), n_bins: t_max.ceil().max(1.0) as usize }).grid()?;
    let cutoff = cfg.cutoff.unwrap_or(n);
    let psi = generator_functional(&triplet, n);
    let mut body = String::from("word,t,re,im,oracle_re,oracle_im,abs_err\n");
    let mut worst = 0.0_f64;
    for &t in &cfg.t {
        let oracle = conv_exp(&psi.scale(real(t)))?;
        for w in &list {
            let v = word_vacuum_moment(&triplet, &grid, t, w, cutoff)?;
            let e = oracle.value(w)?;
            let err = (v - e).norm();
            worst = worst.max(err);
            writeln!(body, "{w},{t:?},{:?},{:?},{:?},{:?},{err:?}", v.re, v.im, e.re, e.im).unwrap();
        }
    }
    let failures = if worst > cfg.tolerance {
        vec![format!("vacuum moments differ from the convolution exponential by {worst:e}")]
    } else {
        Vec::new()
    };
    Ok(Output { body, failures })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepperChoice {
    #[default]
    Euler,
    Exponential,
}

fn default_checkpoints() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QsdeConfig {
    #[serde(flatten)]
    pub model: ModelJson,
    #[serde(default)]
    pub drift: DriftChoice,
    #[serde(default)]
    pub stepper: StepperChoice,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Extra runs with `n_bins` doubled this many times.
    #[serde(default)]
    pub halvings: usize,
    /// Largest vacuum error allowed on the finest grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vacuum_tolerance: Option<f64>,
}

/// Defects and vacuum errors at evenly spaced checkpoints, for the configured
/// grid and each requested refinement.
fn qsde(mut cfg: QsdeConfig, o: Overrides) -> Result<Output, CliError> {
    cfg.drift = o.drift.unwrap_or(cfg.drift);
    if cfg.checkpoints == 0 {
        return Err(CliError::Config("checkpoints must be positive".into()));
    }
    let model = cfg.model.model()?;
    let mut body = String::from("n_bins,t,unitarity_defect,bgw_defect,max_vacuum_error\n");
    let mut last_error = 0.0;
    for r in 0..=cfg.halvings {
        let n_bins = cfg.model.grid.n_bins << r;
        let grid = GridJson { t_max: cfg.model.grid.t_max, n_bins }.grid()?;
        let mut p = UnitaryProcess::new(model.clone(), grid, cfg.drift.into(), cfg.model.cutoff)?;
        let mut done = 0;
        writeln!(body, "{n_bins},0.0,0.0,0.0,0.0").unwrap();
        for k in 1..=cfg.checkpoints.min(n_bins) {
            let target = k * n_bins / cfg.checkpoints.min(n_bins);
            p = match cfg.stepper {
                StepperChoice::Euler => p.euler_steps(target - done)?,
                StepperChoice::Exponential => p.exponential_steps(target - done)?,
            };
            done = target;
            last_error = p.vacuum_error();
            writeln!(body, "{n_bins},{:?},{:?},{:?},{last_error:?}", p.time(), p.unitarity_defect(), p.bgw_relation_defect()).unwrap();
        }
    }
    let mut failures = Vec::new();
    if let Some(tol) = cfg.vacuum_tolerance {
        if last_error > tol {
            failures.push(format!("vacuum error {last_error:e} exceeds {tol:e}"));
        }
    }
    Ok(Output { body, failures })
}

fn default_degree_cap() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcoalgebraConfig {
    pub elements: Vec<PolynomialJson>,
    /// Elements above this degree are rejected; matrix-unitary coproducts
    /// cost `d^m` terms per word of degree `m`.
    #[serde(default = "default_degree_cap")]
    pub max_degree: usize,
}

const INVARIANCE_TOL: f64 = 1e-10;

/// Orthonormal basis of the smallest subcoalgebra containing the elements.
fn subcoalgebra(mut cfg: SubcoalgebraConfig, o: Overrides) -> Result<Output, CliError> {
    cfg.max_degree = o.degree.unwrap_or(cfg.max_degree);
    let elements = cfg.elements.iter().map(PolynomialJson::polynomial).collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = elements.iter().find(|p| p.degree().unwrap_or(0) > cfg.max_degree) {
        return Err(CliError::Config(format!("element {p} exceeds the degree cap {}", cfg.max_degree)));
    }
    let basis = generated_subcoalgebra_of_set(&elements)?;
    let defect = subcoalgebra_defect(&basis)?;
    let failures =
        if defect > INVARIANCE_TOL { vec![format!("invariance defect {defect:e}")] } else { Vec::new() };
    let basis_json: Vec<PolynomialJson> = basis.iter().map(PolynomialJson::from).collect();
    let body = report(&cfg, json!({ "dimension": basis.len(), "basis": basis_json, "invariance_defect": defect }))?;
    Ok(Output { body, failures })
}
