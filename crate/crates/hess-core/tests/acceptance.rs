//! The acceptance gate: every quantitative requirement of the solver in one
//! place, one printed pass/fail line per criterion (visible with
//! `cargo test -p hess-core --test acceptance -- --nocapture`).

use hess_core::geometry::{AxisTerm, MetricPreset};
use hess_core::problem::{
    BoundaryPreset, ChiPreset, ConeConfig, GridConfig, ProblemConfig, RhsConfig, SolutionPreset,
    SubsolutionPreset,
};
use hess_core::report::{convergence_study, write_solution_csv};
use hess_core::solver::{continuity_solve, SolveReport, SolverConfig};
use hess_core::symfun::ConeSpec;
use hess_core::verify::run_all;
use std::time::Instant;

struct Line {
    label: &'static str,
    pass: bool,
    detail: String,
}

fn record(
    lines: &mut Vec<Line>,
    idx: usize,
    label: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {idx} {label:<34} {verdict} ({secs:7.1}s) {detail}");
    lines.push(Line { label, pass, detail });
}

/// Planar determinant case with the exact quadratic: f = 1, u = |x|^2 / 2.
fn flat_quadratic(m: usize) -> ProblemConfig {
    ProblemConfig {
        grid: GridConfig { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0], m: vec![m, m] },
        cone: ConeConfig { n: 2, k: 2 },
        metric: MetricPreset::Flat,
        chi: ChiPreset::Zero,
        rhs: RhsConfig::Constant { value: 1.0 },
        boundary: BoundaryPreset::FromSolution,
        solution: Some(SolutionPreset::Quadratic { scale: 1.0 }),
        subsolution: SubsolutionPreset::SolutionMinusBump { beta: 0.02 },
        exact_solution: true,
    }
}

/// Planar determinant case with the manufactured exponential solution,
/// f(x) = e^{|x|^2} (1 + |x|^2).
fn planar_exp(m: usize) -> ProblemConfig {
    ProblemConfig {
        grid: GridConfig { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0], m: vec![m, m] },
        cone: ConeConfig { n: 2, k: 2 },
        metric: MetricPreset::Flat,
        chi: ChiPreset::Zero,
        rhs: RhsConfig::FromSolution,
        boundary: BoundaryPreset::FromSolution,
        solution: Some(SolutionPreset::ExpRadial { scale: 1.0 }),
        subsolution: SubsolutionPreset::SolutionMinusBump { beta: 0.02 },
        exact_solution: false,
    }
}

/// One three-dimensional manufactured run of the curved family.
fn cubic_config(
    metric: MetricPreset,
    solution: SolutionPreset,
    k: usize,
    alpha: f64,
) -> ProblemConfig {
    ProblemConfig {
        grid: GridConfig { lo: vec![0.0; 3], hi: vec![1.0; 3], m: vec![33; 3] },
        cone: ConeConfig { n: 3, k },
        metric,
        chi: if alpha == 0.0 { ChiPreset::Zero } else { ChiPreset::MetricMultiple { alpha } },
        rhs: RhsConfig::FromSolution,
        boundary: BoundaryPreset::FromSolution,
        solution: Some(solution),
        subsolution: SubsolutionPreset::SolutionMinusBump { beta: 0.02 },
        exact_solution: false,
    }
}

#[test]
fn acceptance_criteria() {
    let cfg = SolverConfig::default();
    let mut lines: Vec<Line> = Vec::new();
    // Every solved report from criteria 2 and 3, for the sandwich criterion.
    let mut solved: Vec<(String, SolveReport)> = Vec::new();

    // ---- 1: sampled cone-calculus battery over the reference cones. ------
    let start = Instant::now();
    let mut ok = true;
    let mut checks = 0usize;
    let mut worst = String::new();
    for (n, k) in [(2usize, 2usize), (3, 2), (3, 3), (4, 2), (4, 3)] {
        let cone = ConeSpec::new(n, k).expect("reference cone");
        match run_all(&cone, 100_000, 42) {
            Ok(reports) => {
                for r in &reports {
                    checks += 1;
                    if !r.pass || r.inconclusive {
                        ok = false;
                        worst = format!("({n},{k}) {} failed", r.name);
                    }
                }
            }
            Err(e) => {
                ok = false;
                worst = format!("({n},{k}) battery error: {e}");
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = ok && secs < 60.0;
    let detail =
        if ok { format!("{checks} checks across 5 cones at 100000 samples") } else { worst };
    record(&mut lines, 1, "cone calculus battery", pass, detail, secs);

    // ---- 2: planar determinant convergence. ------------------------------
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();

    let prob_a = flat_quadratic(33).build().expect("valid configuration");
    let ha = prob_a.grid.h_max();
    let (_, rep_a) = continuity_solve(&prob_a, &cfg).expect("exact quadratic run");
    let err_a = rep_a.l_inf_error.expect("exact solution declared");
    if !(rep_a.converged && err_a <= 5.0 * ha * ha) {
        ok = false;
        detail = format!("exact quadratic: converged = {}, error = {err_a:.2e}", rep_a.converged);
    }
    solved.push(("planar quadratic".to_string(), rep_a));

    let rows = convergence_study(&planar_exp(33), 3, &cfg).expect("refinement study");
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    if !(rows.iter().all(|r| r.report.converged) && orders.iter().all(|o| (1.7..2.3).contains(o))) {
        ok = false;
        detail = format!("manufactured orders {orders:?}");
    }
    if ok {
        detail = format!(
            "exact-case error {err_a:.1e}, manufactured orders [{:.2}, {:.2}]",
            orders[0], orders[1]
        );
    }
    let exp_reports: Vec<SolveReport> = rows.into_iter().map(|r| r.report).collect();
    for (i, r) in exp_reports.iter().enumerate() {
        solved.push((format!("planar manufactured level {i}"), r.clone()));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = ok && secs < 120.0;
    record(&mut lines, 2, "planar determinant convergence", pass, detail, secs);

    // ---- 3: three-dimensional runs, flat and curved, with and without chi.
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    let mut worst_err = 0.0f64;
    let diag = MetricPreset::DiagPoly {
        entries: vec![
            AxisTerm::constant(1.0),
            AxisTerm { constant: 1.0, coeff: 0.25, var: 0, power: 2 },
            AxisTerm::constant(1.0),
        ],
    };
    for k in [2usize, 3] {
        for alpha in [0.0, 1.0] {
            for (tag, metric, solution) in [
                ("flat", MetricPreset::Flat, SolutionPreset::ExpRadial { scale: 0.5 }),
                ("diag", diag.clone(), SolutionPreset::Quadratic { scale: 1.0 }),
            ] {
                let label = format!("n=3 k={k} alpha={alpha} {tag}");
                let prob =
                    cubic_config(metric, solution, k, alpha).build().expect("valid configuration");
                let h = prob.grid.h_max();
                match continuity_solve(&prob, &cfg) {
                    Ok((_, rep)) => {
                        let err = rep.l_inf_error.expect("manufactured runs carry the solution");
                        worst_err = worst_err.max(err);
                        let good = rep.converged
                            && rep.subsolution.ok
                            && rep.min_cone_margin > 0.0
                            && err <= 10.0 * h * h;
                        if !good && ok {
                            ok = false;
                            detail = format!(
                                "{label}: converged = {}, error = {err:.2e}, margin = {:.2e}",
                                rep.converged, rep.min_cone_margin
                            );
                        }
                        solved.push((label, rep));
                    }
                    Err(e) => {
                        if ok {
                            ok = false;
                            detail = format!("{label}: {e}");
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if ok {
        detail = format!("8 runs at 33^3, worst error {worst_err:.1e}");
    }
    let pass = ok && secs < 600.0;
    record(&mut lines, 3, "three-dimensional curved runs", pass, detail, secs);

    // ---- 4: the barrier sandwich on every converged run above. -----------
    let start = Instant::now();
    let bad: Vec<&str> = solved
        .iter()
        .filter(|(_, r)| r.converged && !r.sandwich_ok)
        .map(|(l, _)| l.as_str())
        .collect();
    let converged = solved.iter().filter(|(_, r)| r.converged).count();
    let pass = bad.is_empty() && converged == solved.len() && !solved.is_empty();
    let detail = if pass {
        format!("{converged} converged runs all inside the barrier pair")
    } else {
        format!("violations: {bad:?}, converged {converged}/{}", solved.len())
    };
    record(&mut lines, 4, "barrier sandwich", pass, detail, start.elapsed().as_secs_f64());

    // ---- 5: boundary-regularity ratios stay put under refinement. --------
    let start = Instant::now();
    let mut ok = exp_reports.len() == 3;
    let mut drifts = Vec::new();
    for pair in exp_reports.windows(2) {
        let c2 = (pair[1].c2_ratio / pair[0].c2_ratio - 1.0).abs();
        let c1 = (pair[1].c1_ratio / pair[0].c1_ratio - 1.0).abs();
        drifts.push(c2.max(c1));
        if c2 >= 0.05 || c1 >= 0.05 {
            ok = false;
        }
    }
    let detail = format!(
        "worst relative drift per halving {:.3}",
        drifts.iter().cloned().fold(0.0f64, f64::max)
    );
    record(&mut lines, 5, "boundary-ratio drift", ok, detail, start.elapsed().as_secs_f64());

    // ---- 6: the homotopy base stage is an exact root. ---------------------
    let start = Instant::now();
    let prob = flat_quadratic(17).build().expect("valid configuration");
    let (_, rep) = continuity_solve(&prob, &cfg).expect("base-stage run");
    let stage0 = &rep.stages[0];
    let pass = stage0.t == 0.0 && stage0.newton_iters == 0 && stage0.residual_inf == 0.0;
    let detail = format!(
        "t = {}, iterations = {}, residual = {:e}",
        stage0.t, stage0.newton_iters, stage0.residual_inf
    );
    record(
        &mut lines,
        6,
        "frozen-base homotopy start",
        pass,
        detail,
        start.elapsed().as_secs_f64(),
    );

    // ---- 7: artifacts are byte-identical across repeated runs. -----------
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let mut csv_bytes = Vec::new();
    let mut values_equal = true;
    let mut prev: Option<Vec<f64>> = None;
    for run in 0..2 {
        let prob = flat_quadratic(33).build().expect("valid configuration");
        let (u, rep) = continuity_solve(&prob, &cfg).expect("deterministic run");
        assert!(rep.converged);
        let path = dir.path().join(format!("solution_{run}.csv"));
        write_solution_csv(&path, &prob.grid, &u).expect("write CSV");
        csv_bytes.push(std::fs::read(&path).expect("read CSV back"));
        if let Some(p) = &prev {
            values_equal &= p == &u.values;
        }
        prev = Some(u.values);
    }
    let pass = csv_bytes[0] == csv_bytes[1] && values_equal;
    let detail =
        format!("{} bytes, identical = {}", csv_bytes[0].len(), csv_bytes[0] == csv_bytes[1]);
    record(&mut lines, 7, "byte-identical artifacts", pass, detail, start.elapsed().as_secs_f64());

    let failed: Vec<String> =
        lines.iter().filter(|l| !l.pass).map(|l| format!("{}: {}", l.label, l.detail)).collect();
    assert!(failed.is_empty(), "acceptance failures: {failed:#?}");
}
