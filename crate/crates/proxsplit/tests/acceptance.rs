//! Acceptance suite: one test per acceptance criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see the lines on
//! success; they are always shown on failure).

use std::time::Instant;

use proxsplit::certificates::{
    check_best_value_bound, check_constant_rate, check_ergodic_bound, check_exogenous_best_bound,
    check_exogenous_quasifejer, check_inconsistent_target, check_key_inequality,
    check_polyak_complexity, check_polyak_fejer, check_summary_corollary, corrupt_alphas,
    corrupt_best_values, sample_probes, GroundTruth,
};
use proxsplit::gallery::{self, ProblemInstance};
use proxsplit::oracles::{ConvexSetSpec, IndicatorSet, NonnegL1, ProxOracle, ScaledL1, ZeroFn};
use proxsplit::solver::{constant_two_pass, run, RunConfig, RunTrace, StepsizeRule, TargetSchedule};
use proxsplit::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: usize, desc: &str, ok: bool) {
    println!("criterion {n} [{desc}]: {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} [{desc}] failed");
}

fn run_rule(p: &ProblemInstance, x0: &Point, rule: StepsizeRule, iters: usize) -> RunTrace {
    run(
        p.f.as_ref(),
        p.g.as_ref(),
        &RunConfig {
            x0: x0.clone(),
            rule,
            max_iters: iters,
            stop_tol: 0.0,
            record_every: 1,
        },
    )
    .unwrap()
}

fn feasible_x0(p: &ProblemInstance, scale: f64) -> Point {
    p.g.prox(1.0, &Point::from(vec![scale; p.dim])).unwrap()
}

fn truth_of(p: &ProblemInstance, x0: &Point) -> GroundTruth {
    let info = p.truth.known().unwrap();
    GroundTruth::from_witness(info.s_star, info.witness.clone(), x0).unwrap()
}

fn gallery_problems() -> Vec<ProblemInstance> {
    vec![
        gallery::lad_l1_desk(20, 10, 0.3, 42).unwrap(),
        gallery::make_constrained_max_affine(
            vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, -1.0]],
            vec![0.0, 1.0, 0.5],
            ConvexSetSpec::Box { lower: vec![-1.0, -1.0], upper: vec![2.0, 2.0] },
        )
        .unwrap(),
        gallery::make_sum_of_distances(
            vec![
                ConvexSetSpec::Ball { center: vec![2.0, 0.0], radius: 0.5 },
                ConvexSetSpec::Ball { center: vec![-2.0, 0.0], radius: 0.5 },
            ],
            Some(ConvexSetSpec::Box { lower: vec![-3.0, -3.0], upper: vec![3.0, 3.0] }),
        )
        .unwrap(),
        gallery::make_dual_finite(
            vec![-1.0, -1.0, 2.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
            0.1,
            gallery::DualRegularizer::L1,
        )
        .unwrap(),
        gallery::make_unattained_inf(),
    ]
}

/// 1. Key inequality on every gallery problem x every stepsize rule,
///    200 iterations, 50 random feasible probes, within 30 seconds.
#[test]
fn criterion_1_key_inequality_suite() {
    let start = Instant::now();
    let mut combos = 0;
    let mut all_hold = true;
    for p in gallery_problems() {
        let x0 = feasible_x0(&p, 1.5);
        let target = match p.truth.known() {
            Some(info) => info.s_star,
            // the unattained instance has infimum 0; target it directly
            None => 0.0,
        };
        let rules = [
            StepsizeRule::Constant { alpha: 0.1 },
            StepsizeRule::Exogenous { scale: 1.0, rate: 0.75 },
            StepsizeRule::Polyak {
                gamma: 1.0,
                gamma_floor: 1.0,
                target: TargetSchedule::Constant { value: target },
            },
        ];
        for rule in rules {
            let trace = run_rule(&p, &x0, rule, 200);
            let probes = sample_probes(p.g.as_ref(), p.dim, 50, 13).unwrap();
            let rep = check_key_inequality(p.f.as_ref(), p.g.as_ref(), &trace, &probes).unwrap();
            if !(rep.applicable && rep.holds) {
                eprintln!("key inequality failed on {} / {}: {rep:?}", p.name, trace.rule.name());
                all_hold = false;
            }
            combos += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = all_hold && combos >= 9 && elapsed.as_secs_f64() < 30.0;
    report(
        1,
        &format!(
            "key inequality, {combos} problem x rule combos, 50 probes each, {:.1}s",
            elapsed.as_secs_f64()
        ),
        ok,
    );
}

/// 2. Optimal constant stepsize at horizon K = 999 on LAD + l1 (n=10, m=20):
///    both rate inequalities hold, gap <= dist * sqrt(C_K) / sqrt(1000) with
///    only 1e-9 relative slack.
#[test]
fn criterion_2_constant_step_rate() {
    let p = gallery::lad_l1_desk(20, 10, 0.3, 42).unwrap();
    let x0 = feasible_x0(&p, 1.0);
    let truth = truth_of(&p, &x0);
    let (_, trace) =
        constant_two_pass(p.f.as_ref(), p.g.as_ref(), &x0, truth.dist0, 999, 30).unwrap();
    let rep = check_constant_rate(&trace, &truth);
    let ck = *trace.running_c().last().unwrap();
    let gap = trace.best_value - truth.s_star;
    let bound = truth.dist0 * ck.sqrt() / 1000.0_f64.sqrt();
    let direct = gap <= bound * (1.0 + 1e-9);
    report(
        2,
        &format!("constant-step rate at K=999, gap={gap:.3e} <= bound={bound:.3e}"),
        rep.applicable && rep.holds && direct,
    );
}

/// 3. Exogenous stepsizes beta_k = (k+1)^(-0.51), K = 1e5: quasi-Fejer
///    inequality at every k and final best gap <= 1e-2 on 1-D LAD; on the
///    unattained-infimum instance the iterates must diverge,
///    |x^K| >= 10 |x^0|.
#[test]
fn criterion_3_exogenous_convergence_and_divergence() {
    let p = gallery::make_lad_l1(vec![vec![1.0]], vec![1.0], 0.0).unwrap();
    let x0 = Point::from(vec![3.0]);
    let truth = truth_of(&p, &x0);
    let trace = run_rule(&p, &x0, StepsizeRule::Exogenous { scale: 1.0, rate: 0.51 }, 100_000);
    let qf = check_exogenous_quasifejer(&trace, &truth, p.constants.rho);
    let gap = trace.best_value - truth.s_star;

    let u = gallery::make_unattained_inf();
    let ux0 = Point::from(vec![0.5]);
    let utrace = run(
        u.f.as_ref(),
        u.g.as_ref(),
        &RunConfig {
            x0: ux0.clone(),
            rule: StepsizeRule::Exogenous { scale: 1.0, rate: 0.51 },
            max_iters: 100_000,
            stop_tol: 0.0,
            record_every: 1000,
        },
    )
    .unwrap();
    let diverged = utrace.final_x.norm() >= 10.0 * ux0.norm();
    report(
        3,
        &format!(
            "exogenous K=1e5: quasi-Fejer at every k, best gap={gap:.3e} <= 1e-2, \
             unattained |x^K|={:.2} >= {:.2}",
            utrace.final_x.norm(),
            10.0 * ux0.norm()
        ),
        qf.applicable && qf.holds && gap <= 1e-2 && diverged,
    );
}

/// 4. Exogenous best-value bound with the declared constants (zeta, rho)
///    holds at every k on the LAD instance.
#[test]
fn criterion_4_exogenous_best_bound() {
    let p = gallery::lad_l1_desk(20, 10, 0.3, 42).unwrap();
    let x0 = feasible_x0(&p, 1.0);
    let truth = truth_of(&p, &x0);
    let trace = run_rule(&p, &x0, StepsizeRule::Exogenous { scale: 1.0, rate: 0.75 }, 2000);
    let rep = check_exogenous_best_bound(&trace, &truth, p.constants.zeta, p.constants.rho);
    report(
        4,
        &format!(
            "exogenous best/ergodic bound with zeta={:.3}, rho={:.3} at every k",
            p.constants.zeta, p.constants.rho
        ),
        rep.applicable && rep.holds,
    );
}

/// 5. Polyak rule aimed at the known optimum: distances to the LP witness
///    nonincreasing at every k (1e-12 absolute slack), the complexity bound
///    holds at every k, and the running min of sqrt(k+1) * gap is
///    nonincreasing over the final 50% of iterations.
#[test]
fn criterion_5_polyak_known_optimum() {
    let p = gallery::lad_l1_desk(20, 10, 0.3, 42).unwrap();
    let x0 = feasible_x0(&p, 1.0);
    let truth = truth_of(&p, &x0);
    let trace = run_rule(
        &p,
        &x0,
        StepsizeRule::Polyak {
            gamma: 1.0,
            gamma_floor: 1.0,
            target: TargetSchedule::Constant { value: truth.s_star },
        },
        2000,
    );
    let fejer = check_polyak_fejer(&trace, &truth);
    let complexity = check_polyak_complexity(&trace, truth.s_star, truth.dist0);

    // running min of sqrt(k+1) * best-gap, nonincreasing over the final half
    let stats: Vec<f64> = trace
        .records
        .iter()
        .map(|r| ((r.k + 1) as f64).sqrt() * (r.best_value - truth.s_star))
        .collect();
    let mut running_min = f64::INFINITY;
    let mut mins = Vec::with_capacity(stats.len());
    for s in stats {
        running_min = running_min.min(s);
        mins.push(running_min);
    }
    let half = mins.len() / 2;
    let monotone_tail = mins[half..].windows(2).all(|w| w[1] <= w[0] + 1e-15);

    report(
        5,
        "Polyak at known optimum: Fejer monotone distances, complexity bound, tail statistic",
        fejer.applicable && fejer.holds && complexity.applicable && complexity.holds
            && monotone_tail,
    );
}

/// 6. Inconsistent target s~ = s* - 1 with gamma in {0.5, 1.0}: the final
///    best value stays below s* + ((2-gamma)/gamma) * 1 + 1e-6 within 1e4
///    iterations.
#[test]
fn criterion_6_inconsistent_target_ceiling() {
    let p = gallery::lad_l1_desk(20, 10, 0.3, 42).unwrap();
    let x0 = feasible_x0(&p, 1.0);
    let truth = truth_of(&p, &x0);
    let mut ok = true;
    let mut notes = Vec::new();
    for gamma in [0.5, 1.0] {
        let s_tilde = truth.s_star - 1.0;
        let trace = run_rule(
            &p,
            &x0,
            StepsizeRule::Polyak {
                gamma,
                gamma_floor: gamma,
                target: TargetSchedule::Constant { value: s_tilde },
            },
            10_000,
        );
        let ceiling = truth.s_star + (2.0 - gamma) / gamma + 1e-6;
        let rep = check_inconsistent_target(&trace, &truth, s_tilde, 1e-6);
        ok &= trace.best_value <= ceiling && rep.applicable && rep.holds;
        notes.push(format!(
            "gamma={gamma}: best={:.6} <= ceiling={ceiling:.6}",
            trace.best_value
        ));
    }
    report(6, &format!("inconsistent target, {}", notes.join("; ")), ok);
}

/// 7. Prox property suite: firm nonexpansiveness and the optimality
///    inclusion on 1000 random cases per operator; grid-minimizer agreement
///    within 1e-6 on 1-D/2-D prox checks.
#[test]
fn criterion_7_prox_property_suite() {
    let ops: Vec<(Box<dyn ProxOracle>, usize)> = vec![
        (Box::new(ScaledL1::new(0.7, 3).unwrap()), 3),
        (Box::new(ZeroFn { dim: 3 }), 3),
        (Box::new(NonnegL1::new(0.5, 3).unwrap()), 3),
        (
            Box::new(
                IndicatorSet::new(ConvexSetSpec::Box {
                    lower: vec![-1.0, 0.0, -2.0],
                    upper: vec![1.0, 2.0, 0.5],
                })
                .unwrap(),
            ),
            3,
        ),
        (
            Box::new(
                IndicatorSet::new(ConvexSetSpec::Ball {
                    center: vec![0.5, -0.5, 0.0],
                    radius: 1.5,
                })
                .unwrap(),
            ),
            3,
        ),
        (Box::new(IndicatorSet::new(ConvexSetSpec::Simplex { dim: 3 }).unwrap()), 3),
        (Box::new(IndicatorSet::new(ConvexSetSpec::NonnegOrthant { dim: 3 }).unwrap()), 3),
    ];
    let mut ok = true;
    for (g, dim) in &ops {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let alpha = r.gen_range(0.01..5.0_f64);
            let z1 = Point::new((0..*dim).map(|_| r.gen_range(-4.0..4.0)).collect()).unwrap();
            let z2 = Point::new((0..*dim).map(|_| r.gen_range(-4.0..4.0)).collect()).unwrap();
            let p1 = g.prox(alpha, &z1).unwrap();
            let p2 = g.prox(alpha, &z2).unwrap();
            let d = p1.sub(&p2);
            ok &= d.dot(&d) <= d.dot(&z1.sub(&z2)) + 1e-10;
            ok &= proxsplit::oracles::check_optimality_inclusion(g.as_ref(), alpha, &z1, 1e-8)
                .unwrap();
        }
    }
    // grid agreement on low-dimensional proxes
    let low: Vec<(Box<dyn ProxOracle>, usize)> = vec![
        (Box::new(ScaledL1::new(0.9, 1).unwrap()), 1),
        (Box::new(NonnegL1::new(0.4, 2).unwrap()), 2),
        (
            Box::new(
                IndicatorSet::new(ConvexSetSpec::Ball { center: vec![0.5, 0.0], radius: 1.0 })
                    .unwrap(),
            ),
            2,
        ),
    ];
    for (g, dim) in &low {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let alpha = r.gen_range(0.1..3.0_f64);
            let z = Point::new((0..*dim).map(|_| r.gen_range(-3.0..3.0)).collect()).unwrap();
            let p = g.prox(alpha, &z).unwrap();
            let objective = |y: &Point| -> proxsplit::Result<f64> {
                let d = y.sub(&z);
                Ok(alpha * g.eval(y)? + 0.5 * d.dot(&d))
            };
            let (grid_val, _) = proxsplit::lp::grid_minimize(
                &|y| objective(y),
                &|y| g.domain_test(y),
                &vec![-4.0; *dim],
                &vec![4.0; *dim],
                41,
                12,
            )
            .unwrap();
            ok &= objective(&p).unwrap() <= grid_val + 1e-6;
        }
    }
    report(7, "prox properties: 1000 cases per operator + grid agreement", ok);
}

/// 8. Determinism: running every bundled config twice produces
///    byte-identical trace CSVs.
#[test]
fn criterion_8_bundled_configs_are_deterministic() {
    let config_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut configs: Vec<_> = std::fs::read_dir(&config_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    assert!(!configs.is_empty(), "no bundled configs found in {config_dir:?}");
    let mut ok = true;
    for cfg in &configs {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = proxsplit::harness::run_experiment(cfg, dir_a.path()).unwrap();
        let b = proxsplit::harness::run_experiment(cfg, dir_b.path()).unwrap();
        let same = std::fs::read(&a.trace_path).unwrap() == std::fs::read(&b.trace_path).unwrap();
        if !same {
            eprintln!("non-deterministic trace for {}", cfg.display());
            ok = false;
        }
    }
    report(8, &format!("determinism across {} bundled configs", configs.len()), ok);
}

/// 9. Negative controls: every certificate fails on its designated
///    corrupted trace.
#[test]
fn criterion_9_negative_controls() {
    let p = gallery::lad_l1_desk(6, 3, 0.3, 7).unwrap();
    let x0 = feasible_x0(&p, 1.0);
    let truth = truth_of(&p, &x0);
    let mut failures: Vec<&str> = Vec::new();
    let mut control = |name: &'static str, failed: bool| {
        if !failed {
            failures.push(name);
        }
    };

    // key inequality: probes that include the early iterates make the bound
    // near-tight, so shrinking the recorded stepsizes must break it
    let exo = run_rule(&p, &x0, StepsizeRule::Exogenous { scale: 0.5, rate: 0.75 }, 300);
    let mut probes = sample_probes(p.g.as_ref(), p.dim, 30, 11).unwrap();
    probes.extend((0..20).map(|k| exo.records[k].x.clone().unwrap()));
    let bad = corrupt_alphas(&exo, 0.9);
    control(
        "key_inequality",
        !check_key_inequality(p.f.as_ref(), p.g.as_ref(), &bad, &probes).unwrap().holds,
    );

    // value-gap bounds: shifting every recorded value upward must break them
    let shifted = corrupt_best_values(&exo, 10.0);
    control("best_value_bound", !check_best_value_bound(&shifted, &truth).holds);
    control("ergodic_bound", !check_ergodic_bound(&shifted, &truth).holds);
    control(
        "exogenous_best_bound",
        !check_exogenous_best_bound(&shifted, &truth, p.constants.zeta, p.constants.rho).holds,
    );

    // quasi-Fejer: understating the g-side bound rho on an instance whose
    // first step overshoots the minimizer must fail
    let over = gallery::make_lad_l1(vec![vec![4.0]], vec![40.0], 1.0).unwrap();
    let ox0 = Point::from(vec![10.01]);
    let otruth = truth_of(&over, &ox0);
    let otrace = run_rule(&over, &ox0, StepsizeRule::Exogenous { scale: 1.0, rate: 0.6 }, 50);
    control(
        "exogenous_quasifejer",
        !check_exogenous_quasifejer(&otrace, &otruth, 0.0).holds,
    );

    // constant rate: an upward value shift on the two-pass optimal trace
    // must break the displayed inequalities at the horizon
    let (_, copt) =
        constant_two_pass(p.f.as_ref(), p.g.as_ref(), &x0, truth.dist0, 199, 30).unwrap();
    control("constant_rate", !check_constant_rate(&corrupt_best_values(&copt, 10.0), &truth).holds);

    // Polyak controls
    let polyak = run_rule(
        &p,
        &x0,
        StepsizeRule::Polyak {
            gamma: 1.0,
            gamma_floor: 1.0,
            target: TargetSchedule::Constant { value: truth.s_star },
        },
        300,
    );
    let mut fake = truth.clone();
    fake.minimizer_witness = Point::from(vec![50.0; p.dim]);
    control("polyak_fejer", !check_polyak_fejer(&polyak, &fake).holds);

    let mut understated = polyak.clone();
    for r in &mut understated.records {
        r.u_norm *= 1e-3;
        r.w_norm = 0.0;
    }
    control(
        "polyak_complexity",
        !check_polyak_complexity(&understated, truth.s_star, truth.dist0).holds,
    );
    control(
        "summary_corollary",
        !check_summary_corollary(&corrupt_best_values(&polyak, 10.0), &truth, truth.dist0, 1e-6)
            .holds,
    );

    // inconsistent target: claiming a far better optimum than true makes
    // the ceiling impossible to satisfy
    let s_tilde = truth.s_star - 1.0;
    let inco = run_rule(
        &p,
        &x0,
        StepsizeRule::Polyak {
            gamma: 1.0,
            gamma_floor: 1.0,
            target: TargetSchedule::Constant { value: s_tilde },
        },
        500,
    );
    let mut lower = truth.clone();
    lower.s_star -= 5.0;
    control(
        "inconsistent_target",
        !check_inconsistent_target(&inco, &lower, lower.s_star - 1.0, 1e-6).holds,
    );

    report(
        9,
        &format!(
            "negative controls for all 10 certificates{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!(" (not failing: {failures:?})")
            }
        ),
        failures.is_empty(),
    );
}
