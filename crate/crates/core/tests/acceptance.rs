//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any fails.

use std::time::{Duration, Instant};

use ahb_core::certify::{
    certify_growth_via_ppa, check_moreau_exponent, fit_growth_exponent, fit_rate_window, verify_recursive_rate,
    HolderFunction, RateModel,
};
use ahb_core::objective::{decaying_spectrum, make_abs_value, make_least_squares, make_power, make_quadratic};
use ahb_core::prox::{moreau_gradient, moreau_value, ppa_run};
use ahb_core::solvers::{run_solver, step, Method, SolverConfig, SolverState};
use ahb_core::trace::render_csv;
use ahb_core::{Objective, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Trace CSVs produced while checking, for the determinism criterion.
#[derive(Default)]
struct Artifacts(Vec<String>);

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.2}s exceeds {limit_s}s", elapsed.as_secs_f64())
    })
}

fn ahb(mu0: f64, iters: usize) -> SolverConfig {
    SolverConfig {
        method: Method::Ahb,
        mu0,
        beta_cap: 1.0,
        max_iters: iters,
        ..Default::default()
    }
}

fn invariant_problems() -> Vec<(&'static str, Objective, Vector)> {
    vec![
        ("quadratic[1,10]", make_quadratic(&[1.0, 10.0]).unwrap(), v(&[3.0, -2.0])),
        (
            "least_squares(200,200,1/i)",
            make_least_squares(200, 200, &decaying_spectrum(200, 1.0), 1).unwrap(),
            Vector::zeros(200),
        ),
        ("power(4,d=2,R=4)", make_power(4.0, 2, 4.0).unwrap(), v(&[1.2, -1.6])),
    ]
}

/// Walks AHB for `iters` steps and hands each transition to `check`.
fn walk_ahb(
    obj: &Objective,
    x0: &Vector,
    mu0: f64,
    iters: usize,
    mut check: impl FnMut(&SolverState, &ahb_core::solvers::StepReport, &SolverState) -> Result<(), String>,
) -> Result<(), String> {
    let cfg = ahb(mu0, iters);
    let mut s = SolverState::initial(x0.clone());
    for _ in 0..iters {
        let out = step(&s, obj, &cfg).map_err(|e| e.to_string())?;
        let next = out.next.ok_or("unexpected stop")?;
        check(&s, &out.report, &next)?;
        s = next;
    }
    Ok(())
}

fn criterion_1(art: &mut Artifacts) -> Outcome {
    let start = Instant::now();
    let mut steps = 0usize;
    for (name, obj, x0) in invariant_problems() {
        let xhat = obj.minimizer().unwrap().clone();
        let l = obj.lipschitz().unwrap();
        let slack = 1e-9 * (1.0 + (&x0 - &xhat).norm_squared());
        for mu0 in [0.0, 0.5, 0.96] {
            let c0 = 2.0 * (1.0 - mu0 * mu0) / l;
            walk_ahb(&obj, &x0, mu0, 2000, |s, r, next| {
                steps += 1;
                let lhs = (&next.x - &xhat).norm_squared();
                let rhs = (&s.x - &xhat).norm_squared() - c0 * r.gap + slack;
                ensure(lhs <= rhs, || format!("{name} mu0={mu0} k={}: {lhs:e} > {rhs:e}", s.k))
            })?;
            art.0.push(render_csv(&run_solver(&obj, &ahb(mu0, 2000), &x0).map_err(|e| e.to_string())?));
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 10.0)?;
    Ok(format!("{steps} steps checked in {:.2}s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let mut steps = 0usize;
    let mut tightest = f64::NEG_INFINITY;
    for (name, obj, x0) in invariant_problems() {
        let xhat = obj.minimizer().unwrap().clone();
        let slack = 1e-9 * (1.0 + (&x0 - &xhat).norm_squared());
        for mu0 in [0.0, 0.5, 0.96] {
            walk_ahb(&obj, &x0, mu0, 2000, |s, r, _| {
                steps += 1;
                let gamma = s.momentum().dot(&(&s.x - &xhat));
                tightest = tightest.max(gamma - r.gamma_tilde);
                ensure(gamma <= r.gamma_tilde + slack, || {
                    format!("{name} mu0={mu0} k={}: gamma {gamma:e} > gamma~ {:e}", s.k, r.gamma_tilde)
                })
            })?;
        }
    }
    Ok(format!("{steps} steps, max(gamma - gamma~) = {tightest:.3e}"))
}

fn criterion_3(art: &mut Artifacts) -> Outcome {
    let start = Instant::now();
    let obj = make_quadratic(&[1.0, 10.0]).unwrap();
    let bound = 1.0 - (1.0 - 0.96f64.powi(2)) * 1.0 / (4.0 * 10.0);
    let x0 = v(&[3.0, -2.0]);
    let mut worst = 0.0f64;
    let mut ratios = 0usize;
    walk_ahb(&obj, &x0, 0.96, 2000, |s, _, next| {
        let (a, b) = (s.x.norm_squared(), next.x.norm_squared());
        // below ~1e-280 the squared norms are subnormal and the ratio is noise
        if a < 1e-280 {
            return Ok(());
        }
        let ratio = b / a;
        worst = worst.max(ratio);
        ratios += 1;
        ensure(ratio <= bound + 1e-12, || format!("k={}: ratio {ratio} > {bound}", s.k))
    })?;
    art.0.push(render_csv(&run_solver(&obj, &ahb(0.96, 2000), &x0).map_err(|e| e.to_string())?));
    within(start.elapsed(), 1.0)?;
    Ok(format!("{ratios} ratios, worst {worst:.6} <= {bound:.5}"))
}

fn criterion_4(art: &mut Artifacts) -> Outcome {
    let start = Instant::now();
    let obj = make_power(4.0, 1, 4.0).unwrap();
    let trace = run_solver(&obj, &ahb(0.96, 10_000), &v(&[2.0])).map_err(|e| e.to_string())?;
    let (argmax, sup) = trace
        .records()
        .iter()
        .map(|r| (r.k, (r.k as f64 + 1.0).sqrt() * r.dist.unwrap()))
        .fold((0, f64::NEG_INFINITY), |b, (k, s)| if s > b.1 { (k, s) } else { b });
    ensure(sup.is_finite(), || "supremum not finite".into())?;
    ensure(argmax < 100, || format!("sup {sup:.4} attained at k = {argmax}"))?;
    let fit = fit_rate_window(&trace, RateModel::Power, 100, 10_000).map_err(|e| e.to_string())?;
    ensure((-0.6..=-0.4).contains(&fit.rate), || format!("tail exponent {:.4}", fit.rate))?;
    art.0.push(render_csv(&trace));
    within(start.elapsed(), 5.0)?;
    Ok(format!("sup {sup:.4} at k={argmax}, tail exponent {:.4}", fit.rate))
}

fn criterion_5(art: &mut Artifacts) -> Outcome {
    let mut checked = 0;
    for tau in [1.0, 0.1, 0.01] {
        let q = make_quadratic(&[1.0]).unwrap();
        let run = ppa_run(&q, tau, &v(&[4.0]), 200).map_err(|e| e.to_string())?;
        for (k, p) in run.points.iter().enumerate() {
            let closed = 4.0 * (1.0 + tau).powi(-(k as i32));
            ensure((p[0] - closed).abs() <= 1e-10, || format!("quadratic tau={tau} k={k}: {} vs {closed}", p[0]))?;
        }
        let abs = make_abs_value();
        let run_abs = ppa_run(&abs, tau, &v(&[2.5]), 200).map_err(|e| e.to_string())?;
        for (k, p) in run_abs.points.iter().enumerate() {
            let closed = (2.5 - tau * k as f64).max(0.0);
            ensure((p[0] - closed).abs() <= 1e-10, || format!("abs tau={tau} k={k}: {} vs {closed}", p[0]))?;
        }
        for run in [&run, &run_abs] {
            for k in 0..run.points.len() - 1 {
                checked += 1;
                ensure(run.values[k + 1] <= run.values[k] + 1e-12, || format!("value rose at k={k}"))?;
                ensure(run.points[k + 1].norm() <= run.points[k].norm() + 1e-12, || format!("distance rose at k={k}"))?;
            }
            art.0.push(run.to_csv());
        }
    }
    Ok(format!("{checked} steps monotone, trajectories match closed forms"))
}

fn criterion_6() -> Outcome {
    let q = make_quadratic(&[1.0]).unwrap();
    let phi = HolderFunction::new(2f64.sqrt(), 0.5).unwrap();
    let taus = [1.0, 0.1, 0.01, 0.001];
    let rep = certify_growth_via_ppa(&q, &v(&[2.0]), &phi, &taus, 100_000).map_err(|e| e.to_string())?;
    ensure(rep.violations == 0, || format!("{} violations: {:?}", rep.violations, rep.per_tau))?;
    let slacks: Vec<String> = rep.per_tau.iter().map(|s| format!("{:.4}", s.slack)).collect();
    Ok(format!("slack by tau {taus:?}: [{}]", slacks.join(", ")))
}

fn criterion_7() -> Outcome {
    let problems = [
        ("half_square", make_quadratic(&[1.0]).unwrap()),
        ("abs", make_abs_value()),
        ("quadratic[1,10]", make_quadratic(&[1.0, 10.0]).unwrap()),
    ];
    let lambda = 0.5;
    let mut worst = 0.0f64;
    for (name, obj) in &problems {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let center = Vector::zeros(obj.dim());
        for _ in 0..100 {
            let x = ahb_core::certify::uniform_in_ball(&center, 3.0, &mut rng);
            let g = moreau_gradient(obj, lambda, &x).map_err(|e| e.to_string())?;
            let h = 1e-6 * (1.0 + x.norm());
            let fd = Vector::from_fn(x.len(), |i, _| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                (moreau_value(obj, lambda, &xp).unwrap() - moreau_value(obj, lambda, &xm).unwrap()) / (2.0 * h)
            });
            let err = (&fd - &g).norm() / g.norm().max(1e-12);
            worst = worst.max(err);
            ensure(err <= 1e-4, || format!("{name}: relative FD error {err:e} at {x:?}"))?;
        }
    }
    let mut fitted = Vec::new();
    for (name, obj) in [
        ("abs(alpha=1)", make_abs_value()),
        ("half_square(alpha=1/2)", make_quadratic(&[1.0]).unwrap()),
        ("quartic(alpha=1/4)", make_power(4.0, 1, 1.0).unwrap()),
    ] {
        let rep = check_moreau_exponent(&obj, 1.0, &Vector::zeros(1), 0.1, 200, 11).map_err(|e| e.to_string())?;
        let f = rep.fitted.unwrap();
        ensure(rep.violations == 0, || format!("{name}: fitted {:.4}, expected {:.4}", f.alpha, rep.witness[1]))?;
        fitted.push(format!("{name} {:.4}", f.alpha));
    }
    Ok(format!("FD worst {worst:.2e}; envelope exponents {}", fitted.join(", ")))
}

fn criterion_8() -> Outcome {
    let xs: Vec<f64> = (1..=64).map(|i| i as f64 / 32.0).collect();
    let quartic: Vec<(f64, f64)> = xs.iter().map(|&x| (x.powi(4) / 4.0, x)).collect();
    let quad: Vec<(f64, f64)> = xs.iter().map(|&x| (x * x / 2.0, x)).collect();
    let a4 = fit_growth_exponent(&quartic).map_err(|e| e.to_string())?.alpha;
    let a2 = fit_growth_exponent(&quad).map_err(|e| e.to_string())?.alpha;
    ensure((a4 - 0.25).abs() <= 1e-6, || format!("quartic alpha {a4}"))?;
    ensure((a2 - 0.5).abs() <= 1e-6, || format!("quadratic alpha {a2}"))?;
    Ok(format!("alpha quartic {a4:.9}, quadratic {a2:.9}"))
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    for (theta, c, d0) in [(2.0, 0.1, 1.0), (3.0, 0.01, 1.0)] {
        let rep = verify_recursive_rate(d0, c, theta, 10_000).map_err(|e| e.to_string())?;
        ensure(rep.violations == 0, || format!("theta={theta}: {} violations", rep.violations))?;
        let (argmax, c_tilde) = (rep.witness[0], rep.witness[1]);
        ensure(c_tilde.is_finite(), || "C~ not finite".into())?;
        let slope = rep.fitted.unwrap().alpha;
        let target = -1.0 / (theta - 1.0);
        ensure((slope - target).abs() <= 0.05, || format!("theta={theta}: slope {slope:.4} vs {target}"))?;
        parts.push(format!("theta={theta}: C~={c_tilde:.4} at k={argmax}, slope {slope:.4}"));
    }
    Ok(parts.join("; "))
}

fn criterion_10(art: &mut Artifacts) -> Outcome {
    let start = Instant::now();
    let obj = make_least_squares(200, 200, &decaying_spectrum(200, 1.0), 1).unwrap();
    let x0 = Vector::zeros(200);
    let mut finals = Vec::new();
    let mut ahb_trace = None;
    for method in [Method::Ahb, Method::Alrhb, Method::Nesterov, Method::Gd] {
        let cfg = SolverConfig {
            max_iters: 2000,
            ..SolverConfig::new(method)
        };
        let trace = run_solver(&obj, &cfg, &x0).map_err(|e| e.to_string())?;
        finals.push((method, trace.last().gap));
        art.0.push(render_csv(&trace));
        if method == Method::Ahb {
            ahb_trace = Some(trace);
        }
    }
    let gap = |m: Method| finals.iter().find(|f| f.0 == m).unwrap().1;
    ensure(gap(Method::Ahb) <= gap(Method::Gd), || {
        format!("ahb gap {:e} > gd gap {:e}", gap(Method::Ahb), gap(Method::Gd))
    })?;
    let t = ahb_trace.unwrap();
    let betas: Vec<f64> = t.records().iter().map(|r| r.beta).collect();
    ensure(betas.iter().all(|&b| b >= 0.0), || "negative beta".into())?;
    let max_beta = betas.iter().cloned().fold(0.0, f64::max);
    ensure(max_beta > 0.0, || "momentum never engaged".into())?;
    within(start.elapsed(), 30.0)?;
    let listing: Vec<String> = finals.iter().map(|(m, g)| format!("{} {g:.3e}", m.name())).collect();
    Ok(format!("final gaps: {}; max beta {max_beta:.4}", listing.join(", ")))
}

fn run_all(art: &mut Artifacts) -> Vec<(&'static str, Outcome)> {
    vec![
        ("1  per-step distance decrease", criterion_1(art)),
        ("2  momentum inner-product bound", criterion_2()),
        ("3  linear rate on quadratic", criterion_3(art)),
        ("4  sublinear rate on quartic", criterion_4(art)),
        ("5  PPA monotonicity and closed forms", criterion_5(art)),
        ("6  growth bound via PPA", criterion_6()),
        ("7  Moreau gradient and exponent", criterion_7()),
        ("8  growth exponent fitter", criterion_8()),
        ("9  recursive sequence rate", criterion_9()),
        ("10 comparative least-squares run", criterion_10(art)),
    ]
}

fn main() {
    let mut first = Artifacts::default();
    let mut results = run_all(&mut first);

    let mut second = Artifacts::default();
    let _ = run_all(&mut second);
    let determinism = if first.0.is_empty() {
        Err("no traces recorded".to_string())
    } else if first.0 == second.0 {
        Ok(format!("{} trace CSVs identical across reruns", first.0.len()))
    } else {
        Err("trace CSVs differ between reruns".to_string())
    };
    results.push(("11 determinism", determinism));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
