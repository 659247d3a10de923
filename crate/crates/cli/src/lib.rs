//! Command implementations behind the `detmmot` binary.
//!
//! Every command validates its inputs and finishes all computation before any
//! output file is created; files are then written to temporary siblings and
//! renamed into place.

pub mod files;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use detmmot_core::io::{self, InstanceFile, PotentialsFile, RadialSummary, ReportJson};
use detmmot_core::lp::{self, Instance, Objective, SolveOptions, DEFAULT_MAX_ENTRIES};
use detmmot_core::optcheck::{self, CertificateReport, FubiniFn, FubiniResult, MarginalReport, Tolerances};
use detmmot_core::radial::{self, CouplingSampler, RadialSolution};
use detmmot_core::{linalg, Error, Point, RadialMeasure, RngState, Tuple};

use files::Pending;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_CERTIFICATION: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn bad_input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_BAD_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl ToString) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        let code = if e.kind() == std::io::ErrorKind::NotFound {
            EXIT_BAD_INPUT
        } else {
            EXIT_FAILURE
        };
        Self {
            code,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch { .. } | Error::Contract(_) | Error::Degenerate(_) | Error::Format(_) => {
                EXIT_BAD_INPUT
            }
            Error::AtomicMarginal { .. } | Error::NonConvexPotential { .. } => EXIT_CERTIFICATION,
            Error::Resource { .. } => EXIT_RESOURCE,
            Error::Internal(_) => EXIT_FAILURE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "detmmot", version, about = "Multi-marginal optimal transport with the determinant objective")]
pub struct Cli {
    /// Random seed (decimal or 0x-prefixed hex).
    #[arg(long, global = true, default_value = "0xC0FFEE", value_parser = parse_seed)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a discrete instance exactly and certify the duality gap.
    Solve(SolveArgs),
    /// Closed-form radial solution and samples of the optimal coupling.
    Radial(RadialArgs),
    /// Check optimality conditions for samples or an LP plan.
    Certify(CertifyArgs),
    /// Compare the LP on a discretized radial instance with the closed form.
    Compare(CompareArgs),
    /// Monte-Carlo check of the sphere-Fubini identity.
    #[command(name = "fubini-test")]
    FubiniTest(FubiniArgs),
    /// Invariants and push-forward tests of the explicit 4D maps.
    #[command(name = "monge4d")]
    Monge4d(MongeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Instance JSON: {"objective": "det"|"absdet", "marginals": [...]}.
    #[arg(long)]
    pub instance: PathBuf,
    /// Overrides the objective in the instance file (default det).
    #[arg(long)]
    pub objective: Option<Objective>,
    #[arg(long, default_value_t = DEFAULT_MAX_ENTRIES)]
    pub max_entries: u128,
    /// Report JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RadialSource {
    /// JSON file with radial marginals ({"marginals": [...]}).
    #[arg(long, conflicts_with = "ball_dim")]
    pub marginals: Option<PathBuf>,
    /// Use uniform-ball marginals in this dimension instead of a file.
    #[arg(long)]
    pub ball_dim: Option<usize>,
    /// Number of marginals (a single marginal in the file is replicated).
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RadialArgs {
    #[command(flatten)]
    pub source: RadialSource,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Output directory for samples.csv, summary.json and potentials.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ToleranceArgs {
    #[arg(long)]
    pub tol_feasibility: Option<f64>,
    #[arg(long)]
    pub tol_tightness: Option<f64>,
    #[arg(long)]
    pub tol_subgradient: Option<f64>,
    #[arg(long)]
    pub tol_gradient: Option<f64>,
}

impl ToleranceArgs {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            feasibility: self.tol_feasibility.unwrap_or(d.feasibility),
            tightness: self.tol_tightness.unwrap_or(d.tightness),
            subgradient: self.tol_subgradient.unwrap_or(d.subgradient),
            gradient: self.tol_gradient.unwrap_or(d.gradient),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    /// Sample CSV from `radial`.
    #[arg(long, conflicts_with_all = ["report", "instance"])]
    pub samples: Option<PathBuf>,
    /// Report JSON from `solve` (requires --instance).
    #[arg(long, requires = "instance")]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Potentials JSON; optional with --report (its own potentials are used).
    #[arg(long)]
    pub potentials: Option<PathBuf>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: RadialSource,
    #[arg(long, default_value_t = 6)]
    pub n_radii: usize,
    #[arg(long, default_value_t = 12)]
    pub n_dirs: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ENTRIES)]
    pub max_entries: u128,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FubiniArgs {
    /// Sphere dimension (S^k in R^{k+1}).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Test function; the whole catalog when omitted.
    #[arg(long)]
    pub f: Option<FubiniFn>,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MongeArgs {
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Output directory for maps.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Solve(a) => {
            let r = cmd_solve(a)?;
            say(stdout, format!("value {} gap {:e} certified {}", fmt(r.primal_value), r.gap, r.certified));
            Ok(EXIT_OK)
        }
        Command::Radial(a) => {
            let s = cmd_radial(a, seed)?;
            let emp = s.value_empirical.map_or("-".into(), fmt);
            let se = s.stderr.map_or("-".into(), fmt);
            say(stdout, format!("closed-form {} empirical {emp} stderr {se}", fmt(s.value_closed_form)));
            Ok(EXIT_OK)
        }
        Command::Certify(a) => {
            let c = cmd_certify(a)?;
            for r in &c.details {
                say(
                    stdout,
                    format!("{:<20} {:>12.3e} tol {:.1e} {}", r.name, r.residual, r.tolerance, pass(r.passed)),
                );
            }
            say(stdout, format!("certificate {}", pass(c.passed)));
            Ok(if c.passed { EXIT_OK } else { EXIT_CERTIFICATION })
        }
        Command::Compare(a) => {
            let c = cmd_compare(a, seed)?;
            say(
                stdout,
                format!(
                    "lp {} closed-form {} relative deviation {:.4}",
                    fmt(c.lp_value),
                    fmt(c.closed_form_value),
                    c.relative_deviation
                ),
            );
            Ok(EXIT_OK)
        }
        Command::FubiniTest(a) => {
            let rows = cmd_fubini(a, seed)?;
            for r in &rows {
                say(
                    stdout,
                    format!(
                        "k={} {:<16} lhs {:.6} rhs {:.6} stderr {:.2e} {}",
                        r.k,
                        r.f.name(),
                        r.result.lhs,
                        r.result.rhs,
                        r.result.stderr,
                        pass(r.result.passed)
                    ),
                );
            }
            Ok(if rows.iter().all(|r| r.result.passed) {
                EXIT_OK
            } else {
                EXIT_CERTIFICATION
            })
        }
        Command::Monge4d(a) => {
            let m = cmd_monge4d(a, seed)?;
            say(
                stdout,
                format!(
                    "det rel err {:.2e} orthogonality {:.2e} norm err {:.2e} marginals {}",
                    m.max_det_rel_error,
                    m.max_orthogonality,
                    m.max_norm_error,
                    m.marginals_passed.map_or("skipped", pass)
                ),
            );
            Ok(if m.passed { EXIT_OK } else { EXIT_CERTIFICATION })
        }
    }
}

fn say(out: &mut dyn Write, line: String) {
    let _ = writeln!(out, "{line}");
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn fmt(v: f64) -> String {
    files::fmt_f64(v)
}

fn json_file<T: Serialize>(path: &Path, value: &T) -> Pending {
    Pending::new(path, io::to_json(value))
}

pub fn cmd_solve(a: &SolveArgs) -> Result<ReportJson, CliError> {
    let inst = io::instance_from_json(&files::read_text(&a.instance)?)?;
    let objective = a.objective.or(inst.objective).unwrap_or(Objective::Det);
    let opts = SolveOptions {
        max_entries: a.max_entries,
    };
    let rep = lp::solve_primal(&inst.discrete()?, objective, &opts)?;
    lp::duality_gap(&rep)?;
    let json = ReportJson::new(&rep, objective);
    if let Some(out) = &a.out {
        files::commit(vec![Pending::new(out, io::report_to_json(&json))])?;
    }
    Ok(json)
}

pub fn load_radial(src: &RadialSource) -> Result<Vec<RadialMeasure>, CliError> {
    match (&src.marginals, src.ball_dim) {
        (Some(path), _) => {
            let mut ms = io::instance_from_json(&files::read_text(path)?)?.radial()?;
            match src.d {
                Some(d) if ms.len() == 1 => ms = vec![ms[0].clone(); d],
                Some(d) if ms.len() != d => {
                    return Err(CliError::bad_input(format!("--d {d} but the file has {} marginals", ms.len())))
                }
                _ => {}
            }
            Ok(ms)
        }
        (None, Some(k)) => {
            let d = src.d.unwrap_or(k);
            if d != k {
                return Err(CliError::bad_input(format!("--d {d} differs from --ball-dim {k}")));
            }
            if !(2..=linalg::MAX_DIM).contains(&k) {
                return Err(CliError::bad_input(format!("--ball-dim must be in 2..={}", linalg::MAX_DIM)));
            }
            Ok(vec![RadialMeasure::uniform_ball(k); d])
        }
        (None, None) => Err(CliError::bad_input("give --marginals or --ball-dim")),
    }
}

/// Solves the radial problem and samples `n` tuples of the optimal coupling.
pub fn radial_run(a: &RadialArgs, seed: u64) -> Result<(RadialSolution, Vec<Tuple>), CliError> {
    let ms = load_radial(&a.source)?;
    let sol = radial::solve_radial(&ms)?;
    let sampler = CouplingSampler::new(sol.clone());
    let tuples = sampler.sample(a.n, &mut RngState::from_seed(seed));
    Ok((sol, tuples))
}

pub fn cmd_radial(a: &RadialArgs, seed: u64) -> Result<RadialSummary, CliError> {
    let (sol, tuples) = radial_run(a, seed)?;
    let d = sol.dim();
    let dets: Vec<f64> = tuples.iter().map(|t| linalg::det_unchecked(t, d)).collect();
    let summary = RadialSummary::new(&sol, a.n, seed, &dets);
    if let Some(dir) = &a.out {
        let csv = files::samples_csv(d, &tuples)?;
        drop(tuples);
        files::commit(vec![
            Pending::new(dir.join("samples.csv"), csv),
            json_file(&dir.join("summary.json"), &summary),
            Pending::new(
                dir.join("potentials.json"),
                io::potentials_to_json(&PotentialsFile::Radial(sol.potentials().to_vec())),
            ),
        ])?;
    }
    Ok(summary)
}

pub fn cmd_certify(a: &CertifyArgs) -> Result<CertificateReport, CliError> {
    let tol = a.tol.resolve();
    let potentials = match &a.potentials {
        Some(p) => Some(io::potentials_from_json(&files::read_text(p)?)?),
        None => None,
    };
    let report = if let Some(samples) = &a.samples {
        let (d, tuples) = files::read_samples_csv(samples)?;
        let Some(PotentialsFile::Radial(pots)) = potentials else {
            return Err(CliError::bad_input("sample certification needs radial --potentials"));
        };
        if pots.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: pots.len(),
            }
            .into());
        }
        let mut parts = vec![
            optcheck::check_tightness(&tuples, &pots, &tol)?,
            optcheck::check_subgradient(&tuples, &pots, &tol)?,
        ];
        if d == 3 {
            parts.push(optcheck::check_gradient_system_3d(&tuples, &pots, &tol)?);
        }
        CertificateReport::combine(parts)
    } else if let (Some(rep_path), Some(inst_path)) = (&a.report, &a.instance) {
        let rep = io::report_from_json(&files::read_text(rep_path)?)?;
        let inst_file: InstanceFile = io::instance_from_json(&files::read_text(inst_path)?)?;
        let pset = match potentials {
            Some(PotentialsFile::Discrete(p)) => p,
            Some(PotentialsFile::Radial(_)) => {
                return Err(CliError::bad_input("plan certification needs discrete potentials"))
            }
            None => rep.potential_set(),
        };
        let inst = Instance::new(inst_file.discrete()?, rep.objective, &SolveOptions {
            max_entries: u128::MAX,
        })?;
        let plan = rep.coupling();
        let mut parts = vec![optcheck::check_tightness_discrete(&plan, &pset, &inst, &tol)?];
        if rep.objective == Objective::Det {
            parts.push(optcheck::check_subgradient_discrete(&plan, &pset, &inst, rep.objective, &tol)?);
        }
        CertificateReport::combine(parts)
    } else {
        return Err(CliError::bad_input("give --samples or --report with --instance"));
    };
    if let Some(out) = &a.out {
        files::commit(vec![json_file(out, &report)])?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub d: usize,
    pub n_radii: usize,
    pub n_dirs: usize,
    pub seed: u64,
    pub lp_value: f64,
    pub lp_gap: f64,
    pub pivots: usize,
    pub closed_form_value: f64,
    pub relative_deviation: f64,
}

pub fn cmd_compare(a: &CompareArgs, seed: u64) -> Result<Comparison, CliError> {
    let ms = load_radial(&a.source)?;
    let opts = SolveOptions {
        max_entries: a.max_entries,
    };
    let sol = radial::solve_radial(&ms)?;
    let mut rng = RngState::from_seed(seed);
    let discrete = lp::discretize_radial_instance(&ms, a.n_radii, a.n_dirs, &mut rng, &opts)?;
    let rep = lp::solve_primal(&discrete, Objective::Det, &opts)?;
    let cf = sol.value();
    let diff = (rep.primal_value - cf).abs();
    let c = Comparison {
        d: ms.len(),
        n_radii: a.n_radii,
        n_dirs: a.n_dirs,
        seed,
        lp_value: rep.primal_value,
        lp_gap: rep.gap,
        pivots: rep.pivots,
        closed_form_value: cf,
        relative_deviation: if cf != 0.0 { diff / cf.abs() } else { diff },
    };
    if let Some(out) = &a.out {
        files::commit(vec![json_file(out, &c)])?;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FubiniRow {
    pub k: usize,
    pub f: FubiniFn,
    #[serde(flatten)]
    pub result: FubiniResult,
}

pub fn cmd_fubini(a: &FubiniArgs, seed: u64) -> Result<Vec<FubiniRow>, CliError> {
    let fs: Vec<FubiniFn> = match a.f {
        Some(f) => vec![f],
        None => FubiniFn::CATALOG.to_vec(),
    };
    let mut rng = RngState::from_seed(seed);
    let rows = fs
        .into_iter()
        .map(|f| {
            optcheck::fubini_sphere_test(a.k, f, a.n, &mut rng).map(|result| FubiniRow { k: a.k, f, result })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(out) = &a.out {
        files::commit(vec![json_file(out, &rows)])?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MongeSummary {
    pub n: usize,
    pub seed: u64,
    pub max_det_rel_error: f64,
    pub max_orthogonality: f64,
    pub max_norm_error: f64,
    /// Law checks of the push-forwards of the uniform ball by `T_2, T_3,
    /// T_4`; absent below 10^4 samples.
    pub marginals: Option<Vec<MarginalReport>>,
    pub marginals_passed: Option<bool>,
    pub passed: bool,
}

pub const MONGE_DET_TOL: f64 = 1e-10;
pub const MONGE_INVARIANT_TOL: f64 = 1e-12;

pub fn monge_run(n: usize, seed: u64) -> Result<(MongeSummary, Vec<Tuple>), CliError> {
    let mut rng = RngState::from_seed(seed);
    let mut tuples = Vec::with_capacity(n);
    let (mut det_err, mut ortho, mut norm_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let x = optcheck::uniform_ball_point(4, &mut rng);
        let (t2, t3, t4) = radial::monge_maps_4d(&x)?;
        let t: Tuple = vec![x, t2, t3, t4];
        let r = t[0].norm();
        let det = linalg::det(&t)?;
        let r4 = r.powi(4);
        if r4 > 0.0 {
            det_err = det_err.max((det - r4).abs() / r4);
        }
        for i in 0..4 {
            norm_err = norm_err.max((t[i].norm() - r).abs());
            for j in i + 1..4 {
                ortho = ortho.max(linalg::dot(&t[i], &t[j]).abs());
            }
        }
        tuples.push(t);
    }
    let marginals = if n >= 10_000 {
        let ball = RadialMeasure::uniform_ball(4);
        Some(
            (1..4)
                .map(|i| {
                    let pts: Vec<Point> = tuples.iter().map(|t| t[i].clone()).collect();
                    optcheck::marginal_stat_test(&pts, &ball, true)
                })
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    let marginals_passed = marginals.as_ref().map(|m| m.iter().all(|r| r.passed));
    let passed = det_err <= MONGE_DET_TOL
        && ortho <= MONGE_INVARIANT_TOL
        && norm_err <= MONGE_INVARIANT_TOL
        && marginals_passed != Some(false);
    Ok((
        MongeSummary {
            n,
            seed,
            max_det_rel_error: det_err,
            max_orthogonality: ortho,
            max_norm_error: norm_err,
            marginals,
            marginals_passed,
            passed,
        },
        tuples,
    ))
}

pub fn cmd_monge4d(a: &MongeArgs, seed: u64) -> Result<MongeSummary, CliError> {
    let (summary, tuples) = monge_run(a.n, seed)?;
    if let Some(dir) = &a.out {
        files::commit(vec![
            Pending::new(dir.join("maps.csv"), files::samples_csv(4, &tuples)?),
            json_file(&dir.join("summary.json"), &summary),
        ])?;
    }
    Ok(summary)
}
