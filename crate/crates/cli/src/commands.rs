//! Subcommand implementations. Each returns the process exit code on
//! success paths (0, or 3 for certification violations).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ahb_core::certify::{
    certify_growth_direct, certify_growth_via_ppa, check_kl, check_moreau_exponent, fit_rate_window,
    verify_recursive_rate, CertReport, HolderFunction, RateModel,
};
use ahb_core::solvers::run_solver;
use ahb_core::trace::{read_csv, summarize, write_atomic, write_csv, StopReason, Summary};
use ahb_core::{Objective, ProblemSpec, SolverConfig, Trace, Vector};
use serde::Serialize;

use crate::config::{default_runs, parse_json, parse_kind, parse_list, parse_method, ExperimentConfig, RunSpec, StartPoint};
use crate::{CertifyCommand, Cli, Command, Failure, ModelArg, PhiArgs, ProblemArgs, RunArgs, SliceArgs, StartArg};

const DEFAULT_OUT: &str = "out";

pub fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::empty(),
    };
    match cli.command {
        Command::Solve { ref problem, ref run, ref method } => solve(&cli, cfg, problem, run, method.as_deref()),
        Command::Compare { ref problem, ref run, ref methods } => compare(&cli, cfg, problem, run, methods),
        Command::Certify(ref sub) => certify(&cli, &cfg, sub),
        Command::FitRate { ref trace, model, k_min, k_max } => fit_rate(trace, model, k_min, k_max),
    }
}

#[derive(Serialize)]
struct RunSummary {
    label: String,
    method: &'static str,
    stop_reason: StopReason,
    #[serde(flatten)]
    summary: Summary,
}

fn resolve_problem(base: Option<&ProblemSpec>, args: &ProblemArgs, seed: Option<u64>) -> Result<ProblemSpec, Failure> {
    let params = args.params.as_deref().map(|p| parse_json("--params", p)).transpose()?;
    let mut spec = match (&args.problem, base) {
        (Some(kind), base) => ProblemSpec::new(
            parse_kind(kind)?,
            params.unwrap_or_else(|| serde_json::json!({})),
            base.map_or(0, |b| b.seed),
        ),
        (None, Some(base)) => {
            let mut spec = base.clone();
            if let Some(p) = params {
                spec.params = p;
            }
            spec
        }
        (None, None) => {
            return Err(Failure::Config("problem: none given (use --problem or a config file)".into()));
        }
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn apply_run_args(cfg: &mut SolverConfig, a: &RunArgs) {
    macro_rules! set {
        ($($f:ident),*) => {$(if let Some(v) = a.$f { cfg.$f = v; })*};
    }
    set!(mu0, beta_cap, gd_mu, nesterov_nu, alrhb_beta, max_iters, gap_tol, record_every);
}

fn resolve_start(base: &StartPoint, a: &RunArgs) -> StartPoint {
    let (seed0, norm0) = match base {
        StartPoint::SeededRandom { seed, norm } => (*seed, *norm),
        StartPoint::Zeros => (0, 1.0),
    };
    let seeded = match a.x0 {
        Some(StartArg::Zeros) => false,
        Some(StartArg::SeededRandom) => true,
        None => matches!(base, StartPoint::SeededRandom { .. }) || a.x0_seed.is_some() || a.x0_norm.is_some(),
    };
    if seeded {
        StartPoint::SeededRandom {
            seed: a.x0_seed.unwrap_or(seed0),
            norm: a.x0_norm.unwrap_or(norm0),
        }
    } else {
        StartPoint::Zeros
    }
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Config(format!("out_dir {}: cannot create: {e}", dir.display())))?;
    Ok(dir)
}

fn check_run_problem(run: &RunSpec, problem: &ProblemSpec, index: usize) -> Result<(), Failure> {
    match &run.problem {
        Some(p) if p != problem => Err(Failure::Config(format!(
            "runs[{index}].problem differs from the experiment problem; all runs must share one problem"
        ))),
        _ => Ok(()),
    }
}

fn execute(obj: &Objective, spec: &ProblemSpec, start: &StartPoint, run: &SolverConfig) -> Result<Trace, Failure> {
    let x0 = start.realize(obj.dim())?;
    let mut trace = run_solver(obj, run, &x0)?;
    trace.meta.problem = Some(spec.clone());
    trace.meta.x0_seed = start.seed();
    Ok(trace)
}

fn run_summary(label: String, trace: &Trace) -> RunSummary {
    RunSummary {
        label,
        method: trace.meta.config.as_ref().map_or("unknown", |c| c.method.name()),
        stop_reason: trace.meta.stop_reason,
        summary: summarize(trace),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Config(e.to_string()))
}

fn solve(cli: &Cli, cfg: ExperimentConfig, pa: &ProblemArgs, ra: &RunArgs, method: Option<&str>) -> Result<u8, Failure> {
    let problem = resolve_problem(cfg.problem.as_ref(), pa, cli.seed)?;
    let mut run = match cfg.runs.len() {
        0 => RunSpec::new(SolverConfig::default()),
        1 => cfg.runs[0].clone(),
        n => {
            return Err(Failure::Config(format!(
                "runs: solve expects exactly one run, config has {n} (use compare)"
            )))
        }
    };
    check_run_problem(&run, &problem, 0)?;
    if let Some(m) = method {
        run.config.method = parse_method(m)?;
    }
    apply_run_args(&mut run.config, ra);
    let start = resolve_start(&cfg.x0, ra);

    let obj = problem.build()?;
    let trace = execute(&obj, &problem, &start, &run.config)?;
    let dir = out_dir(cli, &cfg)?;
    write_csv(&trace, &dir.join("trace.csv"))?;
    let label = run.label.unwrap_or_else(|| run.config.method.name().to_string());
    let summary = to_json(&run_summary(label, &trace))?;
    write_atomic(&dir.join("summary.json"), summary.as_bytes())?;
    print!("{summary}");
    Ok(0)
}

fn compare(cli: &Cli, cfg: ExperimentConfig, pa: &ProblemArgs, ra: &RunArgs, methods: &[String]) -> Result<u8, Failure> {
    let problem = resolve_problem(cfg.problem.as_ref(), pa, cli.seed)?;
    let mut runs = if cfg.runs.is_empty() { default_runs() } else { cfg.runs.clone() };
    if !methods.is_empty() {
        let wanted = methods.iter().map(|m| parse_method(m)).collect::<Result<Vec<_>, _>>()?;
        runs.retain(|r| wanted.contains(&r.config.method));
        if runs.is_empty() {
            return Err(Failure::Config("methods: no run matches the requested methods".into()));
        }
    }
    let mut labels = BTreeSet::new();
    let mut jobs = Vec::with_capacity(runs.len());
    for (i, mut run) in runs.into_iter().enumerate() {
        check_run_problem(&run, &problem, i)?;
        apply_run_args(&mut run.config, ra);
        let label = run.label.clone().unwrap_or_else(|| run.config.method.name().to_string());
        if !labels.insert(label.clone()) {
            return Err(Failure::Config(format!(
                "runs[{i}]: duplicate label '{label}' (set a distinct \"label\")"
            )));
        }
        run.config.validate().map_err(|e| Failure::Config(format!("runs[{i}]: {e}")))?;
        jobs.push((label, run.config));
    }
    let start = resolve_start(&cfg.x0, ra);
    let obj = problem.build()?;

    // independent runs over a shared immutable objective
    let results: Vec<Result<Trace, Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(_, run)| s.spawn(|| execute(&obj, &problem, &start, run)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });

    let dir = out_dir(cli, &cfg)?;
    let mut table = BTreeMap::new();
    for ((label, _), result) in jobs.into_iter().zip(results) {
        let trace = result?;
        write_csv(&trace, &dir.join(format!("{label}.csv")))?;
        table.insert(label.clone(), run_summary(label, &trace));
    }
    let json = to_json(&table)?;
    write_atomic(&dir.join("compare.json"), json.as_bytes())?;
    print!("{json}");
    Ok(0)
}

fn point(flag: &str, s: &str, dim: usize) -> Result<Vector, Failure> {
    let v = parse_list(flag, s)?;
    if v.len() != dim {
        return Err(Failure::Config(format!("{flag}: has {} entries, problem dimension is {dim}", v.len())));
    }
    Ok(Vector::from_vec(v))
}

fn reference_point(obj: &Objective, xbar: Option<&str>) -> Result<Vector, Failure> {
    match xbar {
        Some(s) => point("--xbar", s, obj.dim()),
        None => Ok(obj.minimizer().cloned().unwrap_or_else(|| Vector::zeros(obj.dim()))),
    }
}

fn phi(a: &PhiArgs) -> Result<HolderFunction, Failure> {
    HolderFunction::new(a.phi_c, a.phi_alpha).map_err(|e| Failure::Config(format!("--phi-c/--phi-alpha: {e}")))
}

fn certify(cli: &Cli, cfg: &ExperimentConfig, sub: &CertifyCommand) -> Result<u8, Failure> {
    let seed = cli.seed.unwrap_or(0);
    let build = |pa: &ProblemArgs| -> Result<Objective, Failure> {
        Ok(resolve_problem(cfg.problem.as_ref(), pa, cli.seed)?.build()?)
    };
    let eta = |s: &SliceArgs| s.eta.unwrap_or(f64::INFINITY);
    let report: CertReport = match sub {
        CertifyCommand::Kl { problem, phi: p, slice } => {
            let obj = build(problem)?;
            let xbar = reference_point(&obj, slice.xbar.as_deref())?;
            check_kl(&obj, &xbar, slice.r, eta(slice), &phi(p)?, slice.samples, seed)?
        }
        CertifyCommand::Growth { problem, phi: p, slice, factor } => {
            let obj = build(problem)?;
            let xbar = reference_point(&obj, slice.xbar.as_deref())?;
            certify_growth_direct(&obj, &xbar, slice.r, eta(slice), &phi(p)?, *factor, slice.samples, seed)?
        }
        CertifyCommand::GrowthPpa { problem, phi: p, x, tau, k } => {
            let obj = build(problem)?;
            let x = point("--x", x, obj.dim())?;
            let taus = parse_list("--tau", tau)?;
            certify_growth_via_ppa(&obj, &x, &phi(p)?, &taus, *k)?
        }
        CertifyCommand::Moreau { problem, lambda, xbar, r, samples } => {
            let obj = build(problem)?;
            let xbar = reference_point(&obj, xbar.as_deref())?;
            check_moreau_exponent(&obj, *lambda, &xbar, *r, *samples, seed)?
        }
        CertifyCommand::Rate { delta0, c, theta, k } => verify_recursive_rate(*delta0, *c, *theta, *k)?,
    };
    print!("{}", to_json(&report)?);
    Ok(if report.violations > 0 { 3 } else { 0 })
}

fn fit_rate(path: &Path, model: ModelArg, k_min: Option<usize>, k_max: Option<usize>) -> Result<u8, Failure> {
    let trace = read_csv(path)?;
    let model = match model {
        ModelArg::Linear => RateModel::Linear,
        ModelArg::Power => RateModel::Power,
    };
    let fit = fit_rate_window(&trace, model, k_min.unwrap_or(0), k_max.unwrap_or(usize::MAX))?;
    print!("{}", to_json(&fit)?);
    Ok(0)
}
