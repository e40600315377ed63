//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on
//! any failure. Run with `cargo test -p ccsolve --test acceptance`.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ccsolve::functional::{energy, energy_gradient, nonlinearity, phi, residual_inf, ProblemParams};
use ccsolve::grid::{eigenpairs, poisson_solve, w2n_norm, GridDomain, GridFunction};
use ccsolve::solver::{
    fixed_point_solve, minimize_positive, multiplicity_search, positive_witness,
    sphere_level_estimate, ConstraintSet, DescentOptions, MultiplicityOptions, SolveReport,
};
use ccsolve::threshold::{mu_star, radius_interval, EmbeddingConstants};
use common::{bisect, mu_star_oracle, random_function, rng};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Setting {
    domain: GridDomain,
    params: ProblemParams,
    mu_star: f64,
    r1: f64,
    r2: f64,
}

fn setting(domain: GridDomain, p: f64, q: f64) -> Result<Setting, String> {
    let base = ProblemParams::new(p, q, 0.0).map_err(|e| e.to_string())?;
    let ec = EmbeddingConstants::estimate(&domain, &base).map_err(|e| e.to_string())?;
    let ms = mu_star(&ec, &base).map_err(|e| e.to_string())?.mu_star;
    let params = base.with_mu(0.5 * ms).map_err(|e| e.to_string())?;
    let iv = radius_interval(&ec, &params);
    Ok(Setting {
        domain,
        params,
        mu_star: ms,
        r1: iv.r1().ok_or("empty interval")?,
        r2: iv.r2().ok_or("empty interval")?,
    })
}

fn criterion_1() -> Outcome {
    let prm = ProblemParams::new(3.0, 1.5, 0.0).unwrap();
    let ec = EmbeddingConstants::from_c(1.0, 1.0, &prm).unwrap();
    let t = mu_star(&ec, &prm).map_err(|e| e.to_string())?;
    check((t.mu_star - 0.38490018).abs() <= 1e-8, || format!("mu* = {}", t.mu_star))?;
    check((t.r_star - 1.0 / 3.0).abs() <= 1e-10, || format!("r* = {}", t.r_star))?;
    let mut g = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (p, q) = (g.random_range(2.2..8.0), g.random_range(1.05..1.95));
        let (c1, c2) = (g.random_range(0.1..10.0), g.random_range(0.1..10.0));
        let prm = ProblemParams::new(p, q, 0.0).unwrap();
        let ec = EmbeddingConstants::from_c(c1, c2, &prm).unwrap();
        let closed = mu_star(&ec, &prm).map_err(|e| e.to_string())?.mu_star;
        let oracle = mu_star_oracle(c1, c2, p, q);
        worst = worst.max((closed - oracle).abs() / oracle.max(1.0));
    }
    check(worst <= 1e-10, || format!("worst oracle gap {worst:e}"))?;
    Ok(format!("mu* = {:.10}, r* = {:.12}, worst oracle gap {worst:.1e}", t.mu_star, t.r_star))
}

fn criterion_2() -> Outcome {
    let prm = ProblemParams::new(3.0, 1.5, 0.2).unwrap();
    let ec = EmbeddingConstants::from_c(1.0, 1.0, &prm).unwrap();
    let h = |r: f64| r * r + 0.2 * r.sqrt() - r;
    let (o1, o2) = (bisect(h, 0.04, 0.05), bisect(h, 0.75, 0.78));
    let iv = radius_interval(&ec, &prm);
    let (r1, r2) = (iv.r1().ok_or("empty")?, iv.r2().ok_or("empty")?);
    check((r1 - o1).abs() <= 1e-10 && (r2 - o2).abs() <= 1e-10, || {
        format!("r1 {r1} vs {o1}, r2 {r2} vs {o2}")
    })?;
    Ok(format!("r1 = {r1:.12}, r2 = {r2:.12}"))
}

fn criterion_3() -> Outcome {
    let d = GridDomain::new(1, &[1.0], &[3]).unwrap();
    let pairs = eigenpairs(&d, 2).map_err(|e| e.to_string())?;
    let l1 = 32.0 * (1.0 - std::f64::consts::FRAC_PI_4.cos());
    check((pairs[0].eigenvalue - l1).abs() <= 1e-10 * l1, || format!("lambda1 {}", pairs[0].eigenvalue))?;
    check((pairs[1].eigenvalue - 32.0).abs() <= 1e-10 * 32.0, || format!("lambda2 {}", pairs[1].eigenvalue))?;
    let v = poisson_solve(&GridFunction::constant(d, 1.0)).map_err(|e| e.to_string())?;
    let exact = GridFunction::from_fn(d, |x| x[0] * (1.0 - x[0]) / 2.0).unwrap();
    let err = v.sub(&exact).max_abs();
    check(err <= 1e-12, || format!("Poisson error {err:e}"))?;
    Ok(format!("lambda1 = {:.9}, lambda2 = {}, Poisson error {err:.1e}", pairs[0].eigenvalue, pairs[1].eigenvalue))
}

fn ball_invariance(s: &Setting, seed: u64) -> Outcome {
    let mut g = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for r in [s.r1, 0.5 * (s.r1 + s.r2), s.r2] {
        for _ in 0..100 {
            let u = random_function(&s.domain, &mut g, 1.0);
            let u = u.scaled(r * g.random_range(0.0..1.0f64).max(1e-6) / w2n_norm(&u));
            let tu = poisson_solve(&nonlinearity(&u, &s.params)).map_err(|e| e.to_string())?;
            let excess = w2n_norm(&tu) - r;
            worst = worst.max(excess / r);
            check(excess <= 1e-10, || format!("||T(u)|| exceeds r = {r} by {excess:e}"))?;
        }
    }
    Ok(format!(
        "mu* = {:.6}, [r1, r2] = [{:.4}, {:.4}], max (||T(u)|| - r)/r = {worst:.3}",
        s.mu_star, s.r1, s.r2
    ))
}

fn positive_solution(s: &Setting) -> Outcome {
    let k = ConstraintSet::new(s.r2, true);
    let check_report = |rep: &SolveReport| -> Result<(), String> {
        check(
            rep.residual_inf <= 1e-8
                && rep.min_value > 0.0
                && rep.energy < 0.0
                && rep.in_ball
                && rep.certificate_slack >= -1e-8,
            || {
                format!(
                    "{}: residual {:e}, min {:e}, energy {:e}, in_ball {}, slack {:e}",
                    rep.method, rep.residual_inf, rep.min_value, rep.energy, rep.in_ball, rep.certificate_slack
                )
            },
        )
    };
    let minimized = minimize_positive(&s.params, &k, &s.domain, None, &DescentOptions::default())
        .map_err(|e| e.to_string())?;
    check_report(&minimized)?;
    let (u0, _) = positive_witness(&s.domain, &s.params, &k).map_err(|e| e.to_string())?;
    let fixed = fixed_point_solve(&u0, &s.params, s.r2, 1e-10, 20000).map_err(|e| e.to_string())?;
    check_report(&fixed)?;
    Ok(format!(
        "energies {:.6e} / {:.6e}, residuals {:.1e} / {:.1e}, slack {:.1e} / {:.1e}",
        minimized.energy,
        fixed.energy,
        minimized.residual_inf,
        fixed.residual_inf,
        minimized.certificate_slack,
        fixed.certificate_slack
    ))
}

fn criterion_6() -> Outcome {
    let d = GridDomain::unit(1, 63).unwrap();
    let prm = ProblemParams::new(3.0, 1.5, 1.0).unwrap();
    let mut g = rng(106);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let u = random_function(&d, &mut g, 1.0);
        let w = random_function(&d, &mut g, 1.0);
        let eps = 1e-5;
        let fd = (energy(&u.combine(1.0, &w, eps), &prm) - energy(&u.combine(1.0, &w, -eps), &prm)) / (2.0 * eps);
        let exact = energy_gradient(&u, &prm).dot(&w);
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    check(worst <= 1e-6, || format!("worst relative gap {worst:e}"))?;
    Ok(format!("worst relative gap {worst:.2e}"))
}

fn criteria_7_and_9(s: &Setting) -> (Outcome, Vec<SolveReport>) {
    let k = ConstraintSet::new(s.r2, false);
    let out = match multiplicity_search(&s.domain, &s.params, &k, 3, &MultiplicityOptions::default()) {
        Ok(o) => o,
        Err(e) => return (Err(e.to_string()), Vec::new()),
    };
    let sols = out.solutions.clone();
    let result = (|| {
        check(sols.len() >= 3, || format!("only {} pairs", sols.len()))?;
        let mut min_dist = f64::INFINITY;
        for (i, r) in sols.iter().enumerate() {
            check(r.energy < 0.0 && r.residual_inf <= 1e-8, || {
                format!("solution {i}: energy {:e}, residual {:e}", r.energy, r.residual_inf)
            })?;
            // recomputed independently of the search
            let res = residual_inf(&r.solution, &s.params);
            check(res <= 1e-8, || format!("solution {i}: recomputed residual {res:e}"))?;
            for o in &sols[..i] {
                let dist = r.solution.distance(&o.solution).min(r.solution.distance(&o.solution.scaled(-1.0)));
                min_dist = min_dist.min(dist);
            }
        }
        check(min_dist > 1e-3, || format!("pairs too close: {min_dist:e}"))?;
        let mut levels = Vec::new();
        for j in 1..=3 {
            let l = sphere_level_estimate(&s.domain, &s.params, j, out.rho, &k, 0).map_err(|e| e.to_string())?;
            check(l.sup_energy < 0.0, || format!("level {j} = {:e} at rho {}", l.sup_energy, out.rho))?;
            levels.push(l.sup_energy);
        }
        let energies: Vec<String> = sols.iter().map(|r| format!("{:.4e}", r.energy)).collect();
        Ok(format!(
            "{} pairs, energies [{}], min distance {min_dist:.3e}, rho = {:.4}, levels [{:.3e}, {:.3e}, {:.3e}]",
            sols.len(),
            energies.join(", "),
            out.rho,
            levels[0],
            levels[1],
            levels[2]
        ))
    })();
    (result, sols)
}

fn criterion_9(params: &ProblemParams, sols: &[SolveReport]) -> Outcome {
    let d = GridDomain::new(2, &[1.0, 1.3], &[10, 13]).unwrap();
    let mut g = rng(109);
    for _ in 0..100 {
        let prm = ProblemParams::new(g.random_range(2.2..8.0), g.random_range(1.05..1.95), g.random_range(0.0..5.0)).unwrap();
        let u = random_function(&d, &mut g, 3.0);
        let neg = u.scaled(-1.0);
        let (a, b) = (nonlinearity(&neg, &prm), nonlinearity(&u, &prm).scaled(-1.0));
        let gap = a.sub(&b).max_abs();
        check(gap <= 1e-12 * b.max_abs(), || format!("oddness gap {gap:e}"))?;
        let (pa, pb) = (phi(&u, &prm), phi(&neg, &prm));
        check((pa - pb).abs() <= 1e-12 * pa.abs(), || format!("Phi evenness gap {:e}", pa - pb))?;
    }
    check(!sols.is_empty(), || "no multiplicity outputs to check".into())?;
    for r in sols {
        let e_neg = energy(&r.solution.scaled(-1.0), params);
        check((e_neg - r.energy).abs() <= 1e-12 * r.energy.abs(), || {
            format!("energy(-u) {e_neg:e} vs {:e}", r.energy)
        })?;
    }
    Ok(format!("100 random draws exact, {} multiplicity outputs even", sols.len()))
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "[domain]\ndimension = 2\nlengths = [1.0, 1.0]\nnodes = [12, 12]\n\n[problem]\np = 4.0\nq = 1.5\n\n\
         [sweep]\nstart = 0.05\nstop = 0.95\ncount = 8\nrelative = true\nsolutions = true\n\n\
         [multiplicity]\nwant = 2\n",
    )
    .map_err(|e| e.to_string())?;
    let mut csvs = Vec::new();
    for (jobs, sub) in [("1", "serial"), ("4", "parallel")] {
        let out_root = tmp.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_ccsolve"))
            .args(["sweep", "--seed", "5", "--jobs", jobs, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_root)
            .output()
            .map_err(|e| e.to_string())?;
        check(o.status.success(), || format!("sweep --jobs {jobs} exited {:?}", o.status.code()))?;
        let dir = std::fs::read_dir(&out_root).map_err(|e| e.to_string())?.next().ok_or("no run dir")?;
        let path = dir.map_err(|e| e.to_string())?.path().join("sweep.csv");
        csvs.push(std::fs::read(path).map_err(|e| e.to_string())?);
    }
    let rows = String::from_utf8_lossy(&csvs[0]).lines().count() - 1;
    check(rows == 8, || format!("{rows} rows"))?;
    check(csvs[0] == csvs[1], || "CSV differs between --jobs 1 and --jobs 4".into())?;
    Ok(format!("{rows} rows, {} bytes identical", csvs[0].len()))
}

fn report(id: &str, limit: Option<Duration>, start: Instant, outcome: Outcome) -> bool {
    let elapsed = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(m), Some(l)) if elapsed > l => Err(format!("{m}; runtime {elapsed:.1?} over {l:?}")),
        (o, _) => o,
    };
    match &outcome {
        Ok(m) => println!("criterion {id}: PASS ({m}; {:.2} s)", elapsed.as_secs_f64()),
        Err(m) => println!("criterion {id}: FAIL ({m}; {:.2} s)", elapsed.as_secs_f64()),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;

    let t = Instant::now();
    ok &= report("1", Some(secs(1)), t, criterion_1());
    let t = Instant::now();
    ok &= report("2", Some(secs(1)), t, criterion_2());
    let t = Instant::now();
    ok &= report("3", Some(secs(1)), t, criterion_3());

    let t = Instant::now();
    let square = setting(GridDomain::unit(2, 32).unwrap(), 4.0, 1.5);
    let setup_time = t.elapsed();
    match &square {
        Ok(s) => {
            ok &= report("4", Some(secs(30)), t, ball_invariance(s, 104));
            let t = Instant::now() - setup_time;
            ok &= report("5", Some(secs(60)), t, positive_solution(s));
        }
        Err(e) => {
            ok &= report("4", None, t, Err(e.clone()));
            ok &= report("5", None, t, Err(e.clone()));
        }
    }

    let t = Instant::now();
    ok &= report("6", None, t, criterion_6());

    let t = Instant::now() - setup_time;
    let (c7, sols) = match &square {
        Ok(s) => criteria_7_and_9(s),
        Err(e) => (Err(e.clone()), Vec::new()),
    };
    ok &= report("7", Some(secs(600)), t, c7);

    let t = Instant::now();
    let c8 = setting(GridDomain::unit(3, 9).unwrap(), 8.0, 1.5).and_then(|s| {
        let a = ball_invariance(&s, 108)?;
        let b = positive_solution(&s)?;
        Ok(format!("{a}; {b}"))
    });
    ok &= report("8", Some(secs(300)), t, c8);

    let t = Instant::now();
    let c9 = match &square {
        Ok(s) => criterion_9(&s.params, &sols),
        Err(e) => Err(e.clone()),
    };
    ok &= report("9", None, t, c9);

    let t = Instant::now();
    ok &= report("10", None, t, criterion_10());

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
