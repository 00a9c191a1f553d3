//! Scenario runner behind the `mbop` binary.
//!
//! A scenario names a kernel, a truncation and a list of steps. Every step
//! appends residuals with their declared bounds to the report; the run passes
//! iff every residual is inside its bound.

use crate::factor::{factorize, factorize_gram, theta_star_h};
use crate::gen;
use crate::kernels::{Kernel, UvarovTerm, XFunctional};
use crate::linalg::{random_mat, Mat, C};
use crate::matpoly::{rows_to_mat, MatPoly, MatPolyJson, SpectralData};
use crate::toda::{self, GuData, Quadrature, Times, TodaState};
use crate::transforms::{self, GuSpec, Perturbed};
use crate::Tolerances;
use clap::{Parser, Subcommand};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "mbop", about = "Biorthogonal matrix polynomial verification runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Execute a scenario and write its report
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// overrides the scenario seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a report series as CSV
    Plot {
        report: PathBuf,
        #[arg(long)]
        series: Vec<String>,
    },
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("unknown series {0}")]
    UnknownSeries(String),
    #[error("no series requested")]
    NoSeries,
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

// ---------------------------------------------------------------- scenario

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub kernel: KernelSpec,
    pub n: usize,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub tolerances: Option<serde_json::Value>,
}

type JsonMat = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// moments `1/(k+1)` times the identity
    Hilbert {
        #[serde(default = "one")]
        p: usize,
    },
    Hankel { p: usize, moments: Vec<JsonMat> },
    Discrete { p: usize, xs: Vec<[f64; 2]>, ys: Vec<[f64; 2]>, entries: Vec<(usize, usize, JsonMat)> },
    Diagonal { p: usize, xs: Vec<[f64; 2]>, weights: Vec<JsonMat> },
    RandomDiscrete { p: usize, nodes: usize },
    RandomDiagonal { p: usize, nodes: usize },
    PositiveDiagonal { p: usize, nodes: usize },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PolySpec {
    Random { random: RandomPoly },
    Explicit(MatPolyJson),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPoly {
    pub degree: usize,
    #[serde(default = "half")]
    pub scale: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalTerm {
    pub t: [f64; 2],
    #[serde(default)]
    pub d: usize,
    pub c: JsonMat,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MassSpec {
    /// `"none"` or `"random"`
    Named(String),
    /// one functional per root-jet column
    Explicit(Vec<Vec<FunctionalTerm>>),
}

impl Default for MassSpec {
    fn default() -> Self {
        MassSpec::Named("none".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UvarovSpec {
    pub point: [f64; 2],
    #[serde(default)]
    pub order: usize,
    pub beta: Vec<FunctionalTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Christoffel,
    Geronimus,
    GeronimusUvarov,
    Uvarov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Direct,
    Spectral,
    Nonspectral,
    Mixed,
    Closed,
    Additive,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformStep {
    pub kind: TransformKind,
    #[serde(default)]
    pub wc: Option<PolySpec>,
    #[serde(default)]
    pub wg: Option<PolySpec>,
    #[serde(default)]
    pub masses: MassSpec,
    #[serde(default)]
    pub uvarov: Vec<UvarovSpec>,
    pub routes: Vec<Route>,
    /// largest index checked; defaults to the scenario truncation minus one
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub resolvent: bool,
    /// bound on route agreement
    #[serde(default = "route_tol")]
    pub tol: f64,
}

fn route_tol() -> f64 {
    1e-7
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TodaCheck {
    Toda,
    SatoWilson,
    Sato,
    Baker,
    KpWave,
    Nckp,
    Bilinear,
    BilinearTau,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TodaStep {
    #[serde(default)]
    pub times: TimesSpec,
    pub checks: Vec<TodaCheck>,
    /// finite difference steps; the first is the reported one
    #[serde(default)]
    pub fd_steps: Option<Vec<f64>>,
    /// spectral parameter for Sato, Baker and wave checks
    #[serde(default = "default_z")]
    pub z: [f64; 2],
    /// lattice site for the KP checks
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default)]
    pub quadrature: Option<Quadrature>,
    /// transformation for the bilinear identity; random degree one by default
    #[serde(default)]
    pub bilinear: Option<BilinearSpec>,
    #[serde(default = "fd_tol")]
    pub fd_tol: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesSpec {
    #[serde(default)]
    pub t1: Vec<[f64; 2]>,
    #[serde(default)]
    pub t2: Vec<[f64; 2]>,
    /// times of the transformed family; `t` when absent
    #[serde(default)]
    pub t1_prime: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub t2_prime: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilinearSpec {
    pub wc: PolySpec,
    pub wg: PolySpec,
    #[serde(default)]
    pub masses: MassSpec,
    pub k: usize,
    pub l: usize,
}

fn default_z() -> [f64; 2] {
    [2.5, 0.7]
}

fn two() -> usize {
    2
}

fn fd_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Factorize {},
    Transform(TransformStep),
    Toda(TodaStep),
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Residual {
    pub name: String,
    /// `null` when not finite
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min: Option<f64>,
    pub max: f64,
    pub pass: bool,
}

impl Residual {
    fn below(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self::within(name, value, None, max)
    }

    fn within(name: impl Into<String>, value: f64, min: Option<f64>, max: f64) -> Self {
        let pass = value.is_finite() && value <= max && min.is_none_or(|m| value >= m);
        Residual { name: name.into(), value: value.is_finite().then_some(value), min, max, pass }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepReport {
    pub step: String,
    pub residuals: Vec<Residual>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Cell {
    Real(f64),
    Complex([f64; 2]),
    Text(String),
}

impl From<C> for Cell {
    fn from(z: C) -> Self {
        Cell::Complex([z.re, z.im])
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub n: usize,
    pub tolerances: Tolerances,
    pub steps: Vec<StepReport>,
    pub series: BTreeMap<String, Series>,
    pub pass: bool,
}

// ---------------------------------------------------------------- parsing

fn cx(v: [f64; 2]) -> C {
    C::new(v[0], v[1])
}

fn mat(rows: &JsonMat, r: usize, c: usize) -> Result<Mat, CliError> {
    rows_to_mat(rows, r, c).map_err(|e| schema(e.to_string()))
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    if s.n == 0 {
        return Err(schema("n must be positive"));
    }
    Ok(s)
}

fn tolerances(s: &Scenario) -> Result<Tolerances, CliError> {
    let base = Tolerances::from_env().map_err(schema)?;
    match &s.tolerances {
        None => Ok(base),
        Some(v) => {
            let mut merged = serde_json::to_value(base).expect("plain struct");
            let (Some(m), Some(o)) = (merged.as_object_mut(), v.as_object()) else {
                return Err(schema("tolerances must be an object"));
            };
            for (k, x) in o {
                if !m.contains_key(k) {
                    return Err(schema(format!("unknown tolerance {k}")));
                }
                m.insert(k.clone(), x.clone());
            }
            serde_json::from_value(merged).map_err(|e| schema(e.to_string()))
        }
    }
}

fn build_kernel(spec: &KernelSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Kernel, CliError> {
    Ok(match spec {
        KernelSpec::Hilbert { p } => Kernel::hankel(
            *p,
            (0..2 * n + 2).map(|k| Mat::identity(*p, *p) * C::from(1.0 / (k as f64 + 1.0))).collect(),
        ),
        KernelSpec::Hankel { p, moments } => {
            Kernel::hankel(*p, moments.iter().map(|m| mat(m, *p, *p)).collect::<Result<_, _>>()?)
        }
        KernelSpec::Discrete { p, xs, ys, entries } => {
            let mut es = vec![];
            for (i, j, m) in entries {
                if *i >= xs.len() || *j >= ys.len() {
                    return Err(schema("discrete entry refers to a missing node"));
                }
                es.push((*i, *j, mat(m, *p, *p)?));
            }
            Kernel::discrete(*p, xs.iter().map(|&v| cx(v)).collect(), ys.iter().map(|&v| cx(v)).collect(), es)
        }
        KernelSpec::Diagonal { p, xs, weights } => {
            if xs.len() != weights.len() {
                return Err(schema("diagonal kernel needs one weight per node"));
            }
            let ws = weights.iter().map(|m| mat(m, *p, *p)).collect::<Result<_, _>>()?;
            Kernel::diagonal(*p, xs.iter().map(|&v| cx(v)).collect(), ws)
        }
        KernelSpec::RandomDiscrete { p, nodes } => gen::random_discrete(rng, *p, *nodes),
        KernelSpec::RandomDiagonal { p, nodes } => gen::random_diagonal(rng, *p, *nodes),
        KernelSpec::PositiveDiagonal { p, nodes } => gen::positive_diagonal(rng, *p, *nodes),
    })
}

fn build_poly(spec: &PolySpec, p: usize, rng: &mut ChaCha8Rng) -> Result<MatPoly, CliError> {
    match spec {
        PolySpec::Random { random } => Ok(gen::random_monic(rng, p, random.degree, random.scale)),
        PolySpec::Explicit(j) => {
            if j.p != p {
                return Err(schema(format!("polynomial size {} does not match the kernel ({p})", j.p)));
            }
            MatPoly::from_json(j).map_err(|e| schema(e.to_string()))
        }
    }
}

fn functional(terms: &[FunctionalTerm], p: usize, cols: usize) -> Result<XFunctional, CliError> {
    let mut out = XFunctional { terms: vec![] };
    for t in terms {
        out.terms.push((cx(t.t), t.d, mat(&t.c, p, cols)?));
    }
    Ok(out)
}

fn build_xis(spec: &MassSpec, p: usize, np: usize, rng: &mut ChaCha8Rng) -> Result<Vec<XFunctional>, CliError> {
    match spec {
        MassSpec::Named(s) if s == "none" => Ok(vec![]),
        MassSpec::Named(s) if s == "random" => Ok((0..np)
            .map(|_| XFunctional::dirac(gen::random_c(rng) * C::from(0.5), 0, random_mat(rng, p, 1) * C::from(0.5)))
            .collect()),
        MassSpec::Named(s) => Err(schema(format!("masses must be \"none\", \"random\" or a list, got {s:?}"))),
        MassSpec::Explicit(list) => {
            if list.len() != np {
                return Err(schema(format!("need {np} mass functionals, got {}", list.len())));
            }
            list.iter().map(|t| functional(t, p, 1)).collect()
        }
    }
}

fn times(v: &[[f64; 2]]) -> Vec<C> {
    v.iter().map(|&z| cx(z)).collect()
}

/// Checks that need nothing but the scenario itself.
fn validate(s: &Scenario, kernel: &Kernel) -> Result<(), CliError> {
    let discrete = matches!(kernel.base, crate::kernels::Base::Discrete { .. });
    for step in &s.steps {
        match step {
            Step::Factorize {} => {}
            Step::Transform(t) => {
                if t.routes.is_empty() {
                    return Err(schema("transform needs at least one route"));
                }
                let need_wc = matches!(t.kind, TransformKind::Christoffel | TransformKind::GeronimusUvarov);
                let need_wg = matches!(t.kind, TransformKind::Geronimus | TransformKind::GeronimusUvarov);
                if need_wc && t.wc.is_none() {
                    return Err(schema("transform needs wc"));
                }
                if need_wg && t.wg.is_none() {
                    return Err(schema("transform needs wg"));
                }
                if t.kind == TransformKind::Uvarov && t.uvarov.is_empty() {
                    return Err(schema("uvarov transform needs terms"));
                }
                if t.kind == TransformKind::Geronimus && !discrete {
                    return Err(schema("Geronimus steps need a discrete kernel"));
                }
                let allowed: &[Route] = match t.kind {
                    TransformKind::Christoffel | TransformKind::GeronimusUvarov => &[Route::Direct, Route::Spectral, Route::Mixed],
                    TransformKind::Geronimus => &[Route::Direct, Route::Spectral, Route::Nonspectral, Route::Closed],
                    TransformKind::Uvarov => &[Route::Direct, Route::Additive],
                };
                if let Some(r) = t.routes.iter().find(|r| !allowed.contains(r)) {
                    return Err(schema(format!("route {r:?} is not available for {:?}", t.kind)));
                }
            }
            Step::Toda(t) => {
                if !discrete {
                    return Err(schema("time flows need a discrete kernel"));
                }
                let longest = [t.times.t1.len(), t.times.t2.len()]
                    .into_iter()
                    .chain(t.times.t1_prime.as_ref().map(|v| v.len()))
                    .chain(t.times.t2_prime.as_ref().map(|v| v.len()))
                    .max()
                    .unwrap_or(0);
                if longest > toda::MAX_TIMES {
                    return Err(schema(format!("at most {} times per family", toda::MAX_TIMES)));
                }
                let kp = t.checks.iter().any(|c| matches!(c, TodaCheck::KpWave | TodaCheck::Nckp));
                if kp && t.times.t2.iter().any(|z| z[0] != 0.0 || z[1] != 0.0) {
                    return Err(schema("KP checks need t2 = 0"));
                }
                if t.fd_steps.as_ref().is_some_and(|v| v.is_empty() || v.iter().any(|h| h.is_nan() || *h <= 0.0)) {
                    return Err(schema("fd_steps must be positive"));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- execution

struct Ctx<'a> {
    kernel: &'a Kernel,
    n: usize,
    tol: Tolerances,
    rng: ChaCha8Rng,
    series: BTreeMap<String, Series>,
}

type StepResult = Result<Vec<Residual>, String>;

fn run_factorize(ctx: &mut Ctx) -> StepResult {
    let g = ctx.kernel.gram(ctx.n).map_err(|e| e.to_string())?;
    let f = factorize_gram(&g, ctx.kernel.p, ctx.tol.sing).map_err(|e| e.to_string())?;
    let mut qd = 0.0f64;
    for k in 0..ctx.n {
        let h = theta_star_h(&g, ctx.kernel.p, k, ctx.tol.sing).map_err(|e| e.to_string())?;
        qd = qd.max(crate::linalg::rel_err(&h, &f.h[k]));
    }
    let p = ctx.kernel.p;
    let mut norms = Series { columns: vec!["k".into(), "norm".into()], rows: vec![] };
    let mut cols = vec!["k".to_string()];
    for i in 0..p {
        for j in 0..p {
            cols.push(format!("h{i}{j}"));
        }
    }
    let mut blocks = Series { columns: cols, rows: vec![] };
    for (k, h) in f.h.iter().enumerate() {
        norms.rows.push(vec![Cell::Real(k as f64), Cell::Real(h.norm())]);
        let mut row = vec![Cell::Real(k as f64)];
        for i in 0..p {
            for j in 0..p {
                row.push(h[(i, j)].into());
            }
        }
        blocks.rows.push(row);
    }
    ctx.series.insert("h_norm".into(), norms);
    ctx.series.insert("h".into(), blocks);
    Ok(vec![
        Residual::below("reconstruction", f.reconstruction_residual(&g), ctx.tol.fac),
        Residual::below("biorthogonality", f.biorthogonality_residual(&g), ctx.tol.fac),
        Residual::below("theta_star", qd, ctx.tol.fac),
    ])
}

fn run_transform(ctx: &mut Ctx, t: &TransformStep, index: usize) -> StepResult {
    let p = ctx.kernel.p;
    let u = ctx.kernel;
    let tol = ctx.tol;
    let wc = match &t.wc {
        Some(s) => Some(build_poly(s, p, &mut ctx.rng).map_err(|e| e.to_string())?),
        None => None,
    };
    let wg = match (&t.wg, t.kind) {
        (Some(s), _) => build_poly(s, p, &mut ctx.rng).map_err(|e| e.to_string())?,
        (None, _) => MatPoly::monomial(p, 0),
    };
    let sd = |w: &MatPoly| SpectralData::from_semisimple(w, &tol).map_err(|e| e.to_string());
    let nmax = t.n.unwrap_or(ctx.n.saturating_sub(1));
    let ns = |need_extra: usize| nmax + need_extra + 1;
    let mut agreement: BTreeMap<Route, Vec<(usize, f64)>> = BTreeMap::new();
    let mut residuals = vec![];
    let push = |agreement: &mut BTreeMap<Route, Vec<(usize, f64)>>, r: Route, n: usize, got: Result<Perturbed, String>, want: &Perturbed| {
        let d = match got {
            Ok(g) => g.distance(want),
            Err(_) => f64::NAN,
        };
        agreement.entry(r).or_default().push((n, d));
    };
    let err = |e: transforms::TransformError| e.to_string();
    match t.kind {
        TransformKind::Geronimus => {
            let sdg = sd(&wg)?;
            let xis = build_xis(&t.masses, p, sdg.np(), &mut ctx.rng).map_err(|e| e.to_string())?;
            let check = u.geronimus(&wg, transforms::spectral_masses(&sdg, &xis), tol.sing).map_err(|e| e.to_string())?;
            let fac = factorize(u, ns(0), tol.sing).map_err(|e| e.to_string())?;
            for n in 0..=nmax {
                let want = transforms::direct(&check, n, tol.sing).map_err(err)?;
                for &r in &t.routes {
                    let got = match r {
                        Route::Direct => continue,
                        Route::Spectral => transforms::geronimus_spectral(u, &fac, &sdg, &xis, n, &tol).map_err(err),
                        Route::Nonspectral => transforms::geronimus_nonspectral(&check, &fac, &wg, n, &tol).map_err(err),
                        Route::Closed => {
                            if wg.len() != 2 || !xis.is_empty() || n == 0 {
                                continue;
                            }
                            // only the first family and the norm have a closed form
                            let a = -wg.coeff(0);
                            transforms::geronimus_degree_one(u, &fac, &a, n, &tol)
                                .map(|mut g| {
                                    g.p2 = want.p2.clone();
                                    g
                                })
                                .map_err(err)
                        }
                        _ => unreachable!("validated"),
                    };
                    push(&mut agreement, r, n, got, &want);
                }
            }
        }
        TransformKind::Christoffel | TransformKind::GeronimusUvarov => {
            let wc = wc.expect("validated");
            let sdg = sd(&wg)?;
            let xis = build_xis(&t.masses, p, sdg.np(), &mut ctx.rng).map_err(|e| e.to_string())?;
            let ger = if t.kind == TransformKind::Christoffel {
                u.clone()
            } else {
                u.geronimus(&wg, transforms::spectral_masses(&sdg, &xis), tol.sing).map_err(|e| e.to_string())?
            };
            let hat = ger.christoffel(&wc).map_err(|e| e.to_string())?;
            let spec = GuSpec { sd_c: sd(&wc)?, sd_g: Some(sdg), wc: wc.clone(), wg: wg.clone(), xis };
            let nc = wc.len() - 1;
            let ng = wg.len() - 1;
            let fac = factorize(u, ns(nc), tol.sing).map_err(|e| e.to_string())?;
            for n in 0..=nmax {
                let want = transforms::direct(&hat, n, tol.sing).map_err(err)?;
                for &r in &t.routes {
                    let got = match r {
                        Route::Direct => continue,
                        Route::Spectral => transforms::gu_spectral(u, &fac, &spec, n, &tol).map_err(err),
                        Route::Mixed => {
                            if n < ng {
                                continue;
                            }
                            transforms::gu_mixed(&ger, &fac, &spec, n, &tol).map_err(err)
                        }
                        _ => unreachable!("validated"),
                    };
                    push(&mut agreement, r, n, got, &want);
                }
            }
            if t.resolvent {
                let rows = nmax.max(nc.max(ng) + ng).max(1);
                let r = transforms::resolvent(u, &hat, &wc, &wg, rows, tol.sing).map_err(err)?;
                let pts: Vec<C> = (0..4).map(|_| gen::random_c(&mut ctx.rng)).collect();
                let far = 1.0 + u.radius_x().max(hat.radius_x()).max(u.radius_y()).max(hat.radius_y());
                let far_pts: Vec<C> = (0..3).map(|k| gen::circle_point(&mut ctx.rng, k, 3, 2.0 * far)).collect();
                let pairs: Vec<(C, C)> = (0..4).map(|i| (pts[i], pts[(i + 1) % 4])).collect();
                residuals.push(Residual::below("band", r.band_residual(), 1e-9));
                residuals.push(Residual::below("omegaA", r.omega_a_residual(), 1e-9));
                residuals.push(Residual::below("connection_P", r.connection_p_residual(&pts), 1e-8));
                let cc = r.connection_c_residual(u, &hat, &far_pts).map_err(err)?;
                residuals.push(Residual::below("connection_C", cc, 1e-8));
                let cd = transforms::cd_connection_residual(&r, nc.max(ng), &pairs).map_err(err)?;
                residuals.push(Residual::below("cd_connection", cd, 1e-8));
            }
        }
        TransformKind::Uvarov => {
            let mut terms = vec![];
            for s in &t.uvarov {
                terms.push(UvarovTerm { point: cx(s.point), order: s.order, beta: functional(&s.beta, p, p).map_err(|e| e.to_string())? });
            }
            let hat = u.with_uvarov(terms.clone());
            let fac = factorize(u, ns(0), tol.sing).map_err(|e| e.to_string())?;
            for n in 0..=nmax {
                let want = transforms::direct(&hat, n, tol.sing).map_err(err)?;
                for &r in &t.routes {
                    if r == Route::Additive {
                        push(&mut agreement, r, n, transforms::uvarov(&fac, &terms, n, &tol).map_err(err), &want);
                    }
                }
            }
        }
    }
    for (r, rows) in agreement {
        let name = serde_json::to_value(r).expect("enum").as_str().unwrap_or("route").to_string();
        let worst = rows.iter().map(|x| x.1).fold(0.0, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) });
        residuals.push(Residual::below(format!("{name}_vs_direct"), worst, t.tol));
        let s = Series {
            columns: vec!["n".into(), "distance".into()],
            rows: rows.iter().map(|&(n, d)| vec![Cell::Real(n as f64), if d.is_finite() { Cell::Real(d) } else { Cell::Text("failed".into()) }]).collect(),
        };
        ctx.series.insert(format!("step{index}_{name}"), s);
    }
    Ok(residuals)
}

fn fd_series(ctx: &mut Ctx, key: String, rows: Vec<(f64, f64)>) {
    ctx.series.insert(
        key,
        Series {
            columns: vec!["h".into(), "residual".into()],
            rows: rows.into_iter().map(|(h, r)| vec![Cell::Real(h), Cell::Real(r)]).collect(),
        },
    );
}

fn fd_residuals(name: &str, r: &toda::FdResidual, max: f64) -> Vec<Residual> {
    vec![
        Residual::below(name.to_string(), r.residual, max),
        Residual::within(format!("{name}_ratio"), r.ratio, Some(3.5), 4.5),
    ]
}

fn run_toda(ctx: &mut Ctx, t: &TodaStep, index: usize) -> StepResult {
    let tol = ctx.tol;
    let e = |x: toda::TodaError| x.to_string();
    let tt = Times::new(times(&t.times.t1), times(&t.times.t2)).map_err(e)?;
    let state = TodaState::evolve(ctx.kernel, &tt, ctx.n, tol.sing).map_err(e)?;
    let z = cx(t.z);
    let mut out = vec![];
    for check in &t.checks {
        match check {
            TodaCheck::Toda => {
                let hs = t.fd_steps.clone().unwrap_or(vec![1e-3, 5e-4, 2.5e-4]);
                let mut zb = vec![];
                let mut ea = vec![];
                let first = toda::toda_residual(&state, hs[0]).map_err(e)?;
                for &h in &hs {
                    let r = toda::toda_residual(&state, h).map_err(e)?;
                    zb.push((h, r.zeta_b.residual));
                    ea.push((h, r.eta_a.residual));
                }
                out.extend(fd_residuals("toda_zeta_b", &first.zeta_b, t.fd_tol));
                out.extend(fd_residuals("toda_eta_a", &first.eta_a, t.fd_tol));
                fd_series(ctx, format!("step{index}_richardson_toda_zeta_b"), zb);
                fd_series(ctx, format!("step{index}_richardson_toda_eta_a"), ea);
            }
            TodaCheck::SatoWilson => {
                let hs = t.fd_steps.clone().unwrap_or(vec![1e-3, 5e-4, 2.5e-4]);
                let first = toda::sato_wilson_residual(&state, 1, hs[0]).map_err(e)?;
                let mut rows = vec![];
                for &h in &hs {
                    rows.push((h, toda::sato_wilson_residual(&state, 1, h).map_err(e)?.residual));
                }
                out.extend(fd_residuals("sato_wilson", &first, t.fd_tol));
                fd_series(ctx, format!("step{index}_richardson_sato_wilson"), rows);
            }
            TodaCheck::Sato => {
                let r = toda::sato_check(&state, z).map_err(e)?;
                for (name, v) in [("sato_p1", r.p1), ("sato_c2", r.c2), ("sato_c1", r.c1), ("sato_p2", r.p2)] {
                    out.push(Residual::below(name, v, 1e-9));
                }
                out.push(Residual::below("tau_identity", r.tau_identity, tol.id));
            }
            TodaCheck::Baker => {
                let mut worst = 0.0f64;
                for k in 0..state.n() {
                    worst = worst.max(crate::linalg::rel_err(&state.baker1(k, z), &state.baker1_series(k, z, 120)));
                }
                out.push(Residual::below("baker_series", worst, tol.id));
            }
            TodaCheck::KpWave => {
                let hs = t.fd_steps.clone().unwrap_or(vec![1e-2, 5e-3, 2.5e-3]);
                let k = state_for_kp(&state, t.k)?;
                let first = toda::kp_linear_residual(&k, t.k, C::new(0.4, 0.2), hs[0]).map_err(e)?;
                let (mut a, mut b) = (vec![], vec![]);
                for &h in &hs {
                    let r = toda::kp_linear_residual(&k, t.k, C::new(0.4, 0.2), h).map_err(e)?;
                    a.push((h, r.second.residual));
                    b.push((h, r.third.residual));
                }
                out.extend(fd_residuals("wave_second", &first.second, 1e-3));
                out.extend(fd_residuals("wave_third", &first.third, 1e-3));
                fd_series(ctx, format!("step{index}_richardson_wave_second"), a);
                fd_series(ctx, format!("step{index}_richardson_wave_third"), b);
            }
            TodaCheck::Nckp => {
                let hs = t.fd_steps.clone().unwrap_or(vec![1e-2, 5e-3, 2.5e-3]);
                let k = state_for_kp(&state, t.k)?;
                let mut rows = vec![];
                let mut first = None;
                for &h in &hs {
                    let r = toda::nckp_residual(&k, t.k, h).map_err(e)?;
                    first.get_or_insert(r.clone());
                    rows.push((h, r.residual));
                }
                let first = first.expect("nonempty steps");
                out.push(Residual::below("nckp", first.residual, 1e-3));
                if k.p() == 1 {
                    out.push(Residual::below("nckp_commutator", first.commutator, tol.id));
                }
                fd_series(ctx, format!("step{index}_richardson_nckp"), rows);
            }
            TodaCheck::Bilinear | TodaCheck::BilinearTau => {
                let p = ctx.kernel.p;
                let (wc, wg, masses, k, l) = match &t.bilinear {
                    Some(b) => (
                        build_poly(&b.wc, p, &mut ctx.rng).map_err(|e| e.to_string())?,
                        build_poly(&b.wg, p, &mut ctx.rng).map_err(|e| e.to_string())?,
                        b.masses.clone(),
                        b.k,
                        b.l,
                    ),
                    None => (
                        gen::random_monic(&mut ctx.rng, p, 1, 0.5),
                        gen::random_monic(&mut ctx.rng, p, 1, 0.4),
                        MassSpec::default(),
                        1,
                        2,
                    ),
                };
                let sdg = SpectralData::from_semisimple(&wg, &tol).map_err(|e| e.to_string())?;
                let xis = build_xis(&masses, p, sdg.np(), &mut ctx.rng).map_err(|e| e.to_string())?;
                let gu = GuData { wc, wg, masses: transforms::spectral_masses(&sdg, &xis) };
                let prime = Times::new(
                    t.times.t1_prime.as_deref().map(times).unwrap_or(tt.t1.clone()),
                    t.times.t2_prime.as_deref().map(times).unwrap_or(tt.t2.clone()),
                )
                .map_err(e)?;
                let r = 1.0 + ctx.kernel.radius_x().max(ctx.kernel.radius_y());
                let q = t.quadrature.unwrap_or(Quadrature::new(r, r));
                let (name, v) = if *check == TodaCheck::Bilinear {
                    ("bilinear", toda::bilinear_residual(ctx.kernel, &gu, &tt, &prime, k, l, &q, tol.sing).map_err(e)?)
                } else {
                    ("bilinear_tau", toda::bilinear_tau_residual(ctx.kernel, &gu, &tt, &prime, k, l, &q, tol.sing).map_err(e)?)
                };
                out.push(Residual::below(name, v.residual, 1e-8));
                out.push(Residual::below(format!("{name}_change"), v.change, 1e-10));
                out.push(Residual::below(format!("{name}_points"), v.m as f64, q.m_max as f64));
            }
        }
    }
    Ok(out)
}

/// KP checks evolve the site `k` only, so the window must reach it.
fn state_for_kp(state: &TodaState, k: usize) -> Result<TodaState, String> {
    if k == 0 || k >= state.n() {
        return Err(format!("KP site {k} outside the truncation 1..{}", state.n()));
    }
    Ok(state.clone())
}

/// Runs a parsed scenario. Schema problems surface as `Err`; numerical
/// failures are recorded in the report.
pub fn run_scenario(s: &Scenario, seed: u64) -> Result<Report, CliError> {
    let tol = tolerances(s)?;
    let mut rng = gen::rng(seed);
    let kernel = build_kernel(&s.kernel, s.n, &mut rng)?;
    validate(s, &kernel)?;
    let mut ctx = Ctx { kernel: &kernel, n: s.n, tol, rng, series: BTreeMap::new() };
    let mut steps = vec![];
    for (i, step) in s.steps.iter().enumerate() {
        let (label, res) = match step {
            Step::Factorize {} => ("factorize", run_factorize(&mut ctx)),
            Step::Transform(t) => ("transform", run_transform(&mut ctx, t, i)),
            Step::Toda(t) => ("toda", run_toda(&mut ctx, t, i)),
        };
        steps.push(match res {
            Ok(residuals) => {
                let pass = residuals.iter().all(|r| r.pass);
                StepReport { step: label.into(), residuals, error: None, pass }
            }
            Err(msg) => StepReport { step: label.into(), residuals: vec![], error: Some(msg), pass: false },
        });
    }
    let pass = steps.iter().all(|s| s.pass);
    Ok(Report { name: s.name.clone(), seed, n: s.n, tolerances: tol, steps, series: ctx.series, pass })
}

pub fn report_path(out: &Path, name: &str) -> PathBuf {
    let safe: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    out.join(format!("{safe}.report.json"))
}

/// `run` subcommand: returns the exit code, writing the report only once the
/// scenario has parsed.
pub fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(scenario).map_err(|e| CliError::Io(format!("{}: {e}", scenario.display())))?;
    let s = parse_scenario(&text)?;
    let report = run_scenario(&s, seed.unwrap_or(s.seed))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;
    let path = report_path(out, &s.name);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::Io(e.to_string()))?;
    for st in &report.steps {
        if let Some(e) = &st.error {
            eprintln!("{}: {e}", st.step);
        }
        for r in st.residuals.iter().filter(|r| !r.pass) {
            eprintln!("{}: {} = {:?} outside bound {:e}", st.step, r.name, r.value, r.max);
        }
    }
    println!("{}", path.display());
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

/// CSV for one series, complex columns split into `_re` and `_im`.
pub fn series_csv(s: &Series) -> String {
    let complex: Vec<bool> = (0..s.columns.len())
        .map(|j| s.rows.iter().any(|r| matches!(r.get(j), Some(Cell::Complex(_)))))
        .collect();
    let mut head = vec![];
    for (c, &cplx) in s.columns.iter().zip(&complex) {
        if cplx {
            head.push(format!("{c}_re"));
            head.push(format!("{c}_im"));
        } else {
            head.push(c.clone());
        }
    }
    let mut out = head.join(",") + "\n";
    for row in &s.rows {
        let mut cells = vec![];
        for (cell, &cplx) in row.iter().zip(&complex) {
            match cell {
                Cell::Complex([a, b]) => {
                    cells.push(a.to_string());
                    cells.push(b.to_string());
                }
                Cell::Real(x) => {
                    cells.push(x.to_string());
                    if cplx {
                        cells.push("0".into());
                    }
                }
                Cell::Text(t) => {
                    cells.push(t.clone());
                    if cplx {
                        cells.push(String::new());
                    }
                }
            }
        }
        out += &(cells.join(",") + "\n");
    }
    out
}

pub fn emit_plot_data(report: &Report, series: &[String]) -> Result<String, CliError> {
    if series.is_empty() {
        return Err(CliError::NoSeries);
    }
    let mut out = String::new();
    for (i, name) in series.iter().enumerate() {
        let s = report.series.get(name).ok_or_else(|| CliError::UnknownSeries(name.clone()))?;
        if series.len() > 1 {
            if i > 0 {
                out.push('\n');
            }
            out += &format!("# {name}\n");
        }
        out += &series_csv(s);
    }
    Ok(out)
}

pub fn cmd_plot(report: &Path, series: &[String]) -> Result<String, CliError> {
    let text = std::fs::read_to_string(report).map_err(|e| CliError::Io(format!("{}: {e}", report.display())))?;
    let r: Report = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
    emit_plot_data(&r, series)
}

/// Entry point shared by the binary and tests.
pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let res = match cli.command {
        Command::Run { scenario, out, seed } => cmd_run(&scenario, &out, seed),
        Command::Plot { report, series } => cmd_plot(&report, &series).map(|csv| {
            print!("{csv}");
            EXIT_PASS
        }),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
