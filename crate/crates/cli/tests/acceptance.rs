//! One pass/fail line per acceptance criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reproduced as failures on the default
//! configuration and analysed in the README; every other criterion must pass.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use wolfebfgs::analysis::deltas::TABLE_QUARTER;
use wolfebfgs::analysis::potential::{omega, psi};
use wolfebfgs::analysis::{
    analyze, verify_run, BoundReport, CheckStatus, DeltaConstants, TraceRow,
};
use wolfebfgs::objective::sample_point;
use wolfebfgs::*;
use wolfebfgs_cli::commands::run_sweep;
use wolfebfgs_cli::{unit_onset, ExperimentConfig};

const KNOWN_FAILURES: [&str; 2] = ["superlinear_phase", "figure1_orderings"];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Bench {
    label: String,
    quadratic: bool,
    snapshots: bool,
    cubic_d100: bool,
    trace: RunTrace,
    rows: Vec<TraceRow>,
    report: BoundReport,
}

fn inits() -> Vec<InitScheme> {
    vec![
        InitScheme::LIdentity,
        InitScheme::MuIdentity,
        InitScheme::Identity,
        InitScheme::CIdentity(Probe::Seeded),
    ]
}

fn bench_problems() -> Vec<(String, Problem, bool)> {
    let geometric: Vec<f64> = (0..50).map(|i| 100f64.powf(i as f64 / 49.0)).collect();
    let mut v = vec![
        (
            "quadratic_d2".to_string(),
            Problem::quadratic(vec![1.0, 4.0]).unwrap(),
            true,
        ),
        (
            "quadratic_d50".to_string(),
            Problem::quadratic(geometric).unwrap(),
            true,
        ),
    ];
    for d in [100, 300] {
        for kappa in [100.0, 1000.0] {
            v.push((
                format!("cubic_d{d}_k{kappa}"),
                Problem::make_cubic(d, kappa, 1.0, 1.0).unwrap(),
                false,
            ));
        }
    }
    v
}

fn run_benchmarks() -> (Vec<Bench>, Duration) {
    let start = Instant::now();
    let mut out = Vec::new();
    for (name, problem, quadratic) in bench_problems() {
        let snapshots = name == "quadratic_d50" || name.starts_with("cubic_d100_");
        for init in inits() {
            let cfg = SolverConfig {
                init: init.clone(),
                snapshot_stride: usize::from(snapshots),
                ..Default::default()
            };
            let label = format!("{name}_{}", init.label());
            let trace = run(&problem, &cfg).unwrap_or_else(|e| panic!("{label}: {e}"));
            let analysis = analyze(&trace, &problem, &label).unwrap();
            let rows = analysis.table(&trace).rows;
            let report = verify_run(&trace, &problem, &analysis).unwrap();
            out.push(Bench {
                label,
                quadratic,
                snapshots,
                cubic_d100: name.starts_with("cubic_d100_"),
                trace,
                rows,
                report,
            });
        }
    }
    (out, start.elapsed())
}

/// Every named check passes (or is not applicable) on every selected run.
fn checks_hold<'a>(runs: impl Iterator<Item = &'a Bench>, names: &[&str]) -> (bool, String) {
    let mut n = 0;
    let mut worst: Option<(String, String, f64)> = None;
    let mut bad = Vec::new();
    for b in runs {
        n += 1;
        for name in names {
            let c = b
                .report
                .get(name)
                .unwrap_or_else(|| panic!("missing check {name}"));
            if c.status == CheckStatus::Fail || c.status == CheckStatus::NotEvaluated {
                bad.push(format!("{}:{name}", b.label));
            }
            if let Some(m) = c.margin {
                if worst.as_ref().is_none_or(|w| m < w.2) {
                    worst = Some((b.label.clone(), name.to_string(), m));
                }
            }
        }
    }
    let margin = worst
        .map(|(l, c, m)| format!("smallest margin {m:.2e} ({c} on {l})"))
        .unwrap_or_default();
    if bad.is_empty() {
        (true, format!("{n} runs, {margin}"))
    } else {
        (false, format!("{n} runs, failing: {}", bad.join(", ")))
    }
}

fn lemma1(runs: &[Bench], elapsed: Duration) -> Outcome {
    let (ok, detail) = checks_hold(
        runs.iter(),
        &["monotonicity", "lemma1_armijo", "lemma1_curvature"],
    );
    let fast = elapsed < Duration::from_secs(60);
    Outcome {
        name: "lemma1_suite",
        pass: ok && fast,
        detail: format!(
            "{detail}; wall time {:.1}s (limit 60s)",
            elapsed.as_secs_f64()
        ),
    }
}

fn one_step(runs: &[Bench]) -> Outcome {
    let (pass, detail) = checks_hold(runs.iter(), &["one_step_identity", "one_step_identity_l"]);
    Outcome {
        name: "one_step_identity",
        pass,
        detail,
    }
}

fn theorem1(runs: &[Bench]) -> Outcome {
    let (pass, detail) = checks_hold(runs.iter(), &["theorem1"]);
    Outcome {
        name: "theorem1_envelope",
        pass,
        detail,
    }
}

fn potential(runs: &[Bench]) -> Outcome {
    let (pass, detail) = checks_hold(
        runs.iter().filter(|b| b.snapshots),
        &[
            "potential_recursion_star",
            "potential_recursion_l",
            "potential_recursion_capped",
            "y_ratio_cap_l",
            "y_ratio_cap_star",
        ],
    );
    Outcome {
        name: "potential_recursion",
        pass,
        detail,
    }
}

fn omega_sum(runs: &[Bench]) -> Outcome {
    let (pass, detail) = checks_hold(runs.iter().filter(|b| b.cubic_d100), &["omega_sum"]);
    Outcome {
        name: "omega_sum",
        pass,
        detail,
    }
}

fn unit_steps(runs: &[Bench]) -> Outcome {
    let (pass, detail) = checks_hold(runs.iter(), &["unit_step_sufficiency", "unit_step_ratios"]);
    Outcome {
        name: "unit_step_implications",
        pass,
        detail,
    }
}

/// Tail of unit steps, fast ratio decay and the superlinear envelope.
fn superlinear_one(trace: &RunTrace, rows: &[TraceRow]) -> std::result::Result<f64, String> {
    let steps: Vec<&TraceRow> = rows.iter().filter(|r| r.unit_step.is_some()).collect();
    let tail = steps.len().div_ceil(4);
    let tail_ok = steps[steps.len() - tail..]
        .iter()
        .all(|r| r.unit_step == Some(true));
    let ratios: Vec<f64> = trace
        .records
        .windows(2)
        .filter(|w| w[0].f_gap > 0.0)
        .map(|w| w[1].f_gap / w[0].f_gap)
        .collect();
    let min_last = ratios[ratios.len().saturating_sub(10)..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut why = Vec::new();
    if !tail_ok {
        why.push("non-unit step in last 25%".to_string());
    }
    if !(min_last < 0.01) {
        why.push(format!("min ratio in last 10 is {min_last:.2e}"));
    }
    if why.is_empty() {
        Ok(min_last)
    } else {
        Err(why.join(", "))
    }
}

fn superlinear(runs: &[Bench], sweep: &[(String, RunTrace, Vec<TraceRow>)]) -> Outcome {
    let mut total = 0;
    let mut bad = Vec::new();
    let all = runs
        .iter()
        .map(|b| (&b.label, &b.trace, &b.rows))
        .chain(sweep.iter().map(|(l, t, r)| (l, t, r)));
    for (label, trace, rows) in all {
        if trace.config.method != Method::Bfgs || !trace.status.converged() {
            continue;
        }
        total += 1;
        if let Err(why) = superlinear_one(trace, rows) {
            bad.push(format!("{label} ({why})"));
        }
    }
    let (env_ok, mut env) = checks_hold(runs.iter(), &["theorem3"]);
    let vacuous = runs
        .iter()
        .filter(|b| {
            b.report
                .get("theorem3")
                .is_some_and(|c| c.status == CheckStatus::NotApplicable)
        })
        .count();
    if vacuous > 0 {
        env.push_str(&format!("bound >= 1 throughout on {vacuous} of them"));
    }
    let shown: Vec<&String> = bad.iter().take(6).collect();
    Outcome {
        name: "superlinear_phase",
        pass: bad.is_empty() && env_ok,
        detail: format!(
            "{} of {total} converging runs lack the signature; theorem3 envelope: {env}; e.g. {shown:?}",
            bad.len()
        ),
    }
}

fn loop_bounds(runs: &[Bench]) -> Outcome {
    let (pass, detail) = checks_hold(
        runs.iter().filter(|b| b.quadratic),
        &["loop_bound", "theorem4_average_loops"],
    );
    Outcome {
        name: "linesearch_loop_bound",
        pass,
        detail,
    }
}

fn delta_table() -> Outcome {
    let d = DeltaConstants::new(0.25, 0.75).unwrap().as_array();
    let exact = [0usize, 1, 2, 5];
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for i in 0..8 {
        let dev = if exact.contains(&i) {
            let e = (d[i] - TABLE_QUARTER[i]).abs() / TABLE_QUARTER[i];
            pass &= e < 1e-12;
            e
        } else {
            let raw = (d[i] - TABLE_QUARTER[i]).abs() / TABLE_QUARTER[i];
            let ceil = (d[i].ceil() - TABLE_QUARTER[i]).abs() / TABLE_QUARTER[i];
            raw.min(ceil)
        };
        worst = worst.max(dev);
    }
    pass &= worst <= 0.02;
    Outcome {
        name: "delta_table",
        pass,
        detail: format!(
            "computed [{}], worst relative deviation {worst:.4}",
            d.iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn first_below(rows: &[TraceRow], level: f64) -> Option<usize> {
    rows.iter().find(|r| r.f_gap_ratio <= level).map(|r| r.t)
}

fn ratio_at(rows: &[TraceRow], t: usize) -> f64 {
    rows.get(t)
        .or(rows.last())
        .map(|r| r.f_gap_ratio)
        .unwrap_or(f64::NAN)
}

fn figure1(sweep: &[(String, RunTrace, Vec<TraceRow>)]) -> Outcome {
    let find = |id: String| -> &Vec<TraceRow> {
        &sweep
            .iter()
            .find(|(l, _, _)| *l == id)
            .unwrap_or_else(|| panic!("missing {id}"))
            .2
    };
    let panels: Vec<(usize, u32)> = [100, 300, 600]
        .iter()
        .flat_map(|&d| [100u32, 1000].map(|k| (d, k)))
        .collect();
    // (i) sum of log gap ratios over t = 1..20
    let mut wins = 0;
    for &(d, k) in &panels {
        let sum = |rows: &Vec<TraceRow>| {
            (1..=20)
                .map(|t| ratio_at(rows, t).max(1e-300).ln())
                .sum::<f64>()
        };
        let li = sum(find(format!("cubic_d{d}_k{k}_LI_bfgs")));
        let mu = sum(find(format!("cubic_d{d}_k{k}_muI_bfgs")));
        if li < mu {
            wins += 1;
        }
    }
    let i_ok = wins >= 5;
    // (ii) muI onset <= 2d
    let mut onsets = Vec::new();
    let mut ii_ok = true;
    for &(d, k) in &panels {
        let o = unit_onset(find(format!("cubic_d{d}_k{k}_muI_bfgs")));
        ii_ok &= o.is_some_and(|t| t <= 2 * d);
        onsets.push(o);
    }
    // (iii) d = 600 onsets
    let on = |init: &str, k: u32| unit_onset(find(format!("cubic_d600_k{k}_{init}_bfgs")));
    let (li100, li1000, mu100, mu1000) = (
        on("LI", 100),
        on("LI", 1000),
        on("muI", 100),
        on("muI", 1000),
    );
    let iii_ok = match (li100, li1000, mu100, mu1000) {
        (Some(a), Some(b), Some(c), Some(e)) => {
            b > a && (c as f64 - e as f64).abs() < 0.5 * (c.min(e) as f64).max(1.0)
        }
        _ => false,
    };
    // (iv) every BFGS variant reaches 1e-10 before gradient descent
    let mut iv_ok = true;
    for &(d, k) in &panels {
        let gd = first_below(find(format!("cubic_d{d}_k{k}_gd")), 1e-10);
        for init in ["LI", "muI", "I", "cI"] {
            let b = first_below(find(format!("cubic_d{d}_k{k}_{init}_bfgs")), 1e-10);
            iv_ok &= match (b, gd) {
                (Some(b), Some(g)) => b < g,
                (Some(_), None) => true,
                _ => false,
            };
        }
    }
    Outcome {
        name: "figure1_orderings",
        pass: i_ok && ii_ok && iii_ok && iv_ok,
        detail: format!(
            "(i) LI ahead of muI on {wins}/6 panels [{}]; (ii) muI onsets {onsets:?} [{}]; \
             (iii) d=600 LI onsets {li100:?}->{li1000:?}, muI {mu100:?}->{mu1000:?} [{}]; (iv) [{}]",
            ok(i_ok),
            ok(ii_ok),
            ok(iii_ok),
            ok(iv_ok)
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn core_numerics(runs: &[Bench]) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // secant residual of every update, from direct-form snapshots
    let p = Problem::make_cubic(100, 100.0, 1.0, 1.0).unwrap();
    let mut worst_secant: f64 = 0.0;
    for init in inits() {
        let cfg = SolverConfig {
            init,
            form: Form::Direct,
            snapshot_stride: 1,
            ..Default::default()
        };
        let tr = run(&p, &cfg).unwrap();
        for (rec, (t, b)) in tr.records.iter().zip(tr.snapshots.iter().skip(1)) {
            assert_eq!(*t, rec.t + 1);
            let v = rec.step.as_ref().and_then(|s| s.vectors.as_ref()).unwrap();
            let r = (b * &v.s - &v.y).norm() / (1.0 + v.y.norm());
            worst_secant = worst_secant.max(r);
        }
    }
    pass &= worst_secant <= 1e-10;
    notes.push(format!("secant {worst_secant:.1e}"));

    // direct and inverse forms
    let mut worst_form: f64 = 0.0;
    for b in runs.iter().filter(|b| b.cubic_d100) {
        let problem = Problem::make_cubic(
            100,
            if b.label.contains("k1000") {
                1000.0
            } else {
                100.0
            },
            1.0,
            1.0,
        )
        .unwrap();
        let cfg = SolverConfig {
            form: Form::Direct,
            snapshot_stride: 0,
            ..b.trace.config.clone()
        };
        let direct = run(&problem, &cfg).unwrap();
        for (x, y) in direct.records.iter().zip(&b.trace.records) {
            let (Some(sx), Some(sy)) = (&x.step, &y.step) else {
                continue;
            };
            let (vx, vy) = (sx.vectors.as_ref().unwrap(), sy.vectors.as_ref().unwrap());
            worst_form = worst_form.max((&vx.x - &vy.x).norm() / (1.0 + vy.x.norm()));
        }
    }
    pass &= worst_form <= 1e-8;
    notes.push(format!("direct/inverse {worst_form:.1e}"));

    // finite differences
    let mut worst_fd: f64 = 0.0;
    for (i, (d, k)) in [(10, 100.0), (100, 1000.0), (300, 100.0)]
        .into_iter()
        .enumerate()
    {
        let p = Problem::make_cubic(d, k, 1.0, 1.0).unwrap();
        for s in 0..20 {
            let x = sample_point(d, 2.0, 1000 * i as u64 + s);
            worst_fd = worst_fd.max(p.finite_diff_grad_check(&x, 1e-6).unwrap());
        }
    }
    pass &= worst_fd <= 1e-5;
    notes.push(format!("finite differences {worst_fd:.1e}"));

    // omega and psi property suites
    let mut omega_bad = 0;
    for s in 0..1000u64 {
        let u = sample_point(1, 1.0, s)[0];
        let x = if u < 0.0 { 0.999 * u } else { 1e3 * u };
        if !(omega(x).unwrap() >= 0.0) {
            omega_bad += 1;
        }
    }
    let mut psi_bad = 0;
    for s in 0..1000u64 {
        let d = 1 + (s % 6) as usize;
        let e = sample_point(d * d, 2.0, 7_000 + s);
        let a = DMatrix::from_column_slice(d, d, e.as_slice());
        let spd = &a * a.transpose() + DMatrix::identity(d, d) * 1e-3;
        if !(psi(&spd).unwrap() >= -1e-10) {
            psi_bad += 1;
        }
    }
    pass &= omega_bad == 0 && psi_bad == 0;
    notes.push(format!(
        "omega {omega_bad}/1000 and psi {psi_bad}/1000 violations"
    ));

    Outcome {
        name: "core_numerics",
        pass,
        detail: notes.join(", "),
    }
}

fn figure1_sweep() -> Vec<(String, RunTrace, Vec<TraceRow>)> {
    let text = "problem.d = 100, 300, 600\nproblem.kappa = 100, 1000\n\
                solver.method = bfgs, gd\nsolver.init = LI, muI, I, cI\n\
                output.csv = false\noutput.report = none\n";
    let cfg = ExperimentConfig::from_text(text).unwrap();
    cfg.validate().unwrap();
    let results = run_sweep(&cfg, None).unwrap();
    assert_eq!(results.len(), 30);
    results
        .into_iter()
        .map(|(job, r)| {
            let out = r.unwrap_or_else(|e| panic!("{}: {e}", job.runid));
            assert!(out.abort.is_none(), "{} aborted", job.runid);
            (job.runid, out.trace, out.table.rows)
        })
        .collect()
}

#[test]
fn acceptance_criteria() {
    let (runs, elapsed) = run_benchmarks();
    let sweep = figure1_sweep();
    let outcomes = vec![
        lemma1(&runs, elapsed),
        one_step(&runs),
        theorem1(&runs),
        potential(&runs),
        omega_sum(&runs),
        unit_steps(&runs),
        superlinear(&runs, &sweep),
        loop_bounds(&runs),
        delta_table(),
        figure1(&sweep),
        core_numerics(&runs),
    ];
    // bypass libtest capture so the lines show in a plain `cargo test` log
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err);
    for o in &outcomes {
        let _ = writeln!(
            err,
            "{} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    let unexpected: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.name))
        .map(|o| o.name)
        .collect();
    for o in outcomes
        .iter()
        .filter(|o| o.pass && KNOWN_FAILURES.contains(&o.name))
    {
        let _ = writeln!(
            err,
            "note: {} now passes; drop it from KNOWN_FAILURES",
            o.name
        );
    }
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
}
