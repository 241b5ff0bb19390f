use adastep::harness::config::{
    AlgorithmConfig, Budget, ExperimentConfig, InitialPoint, ProbabilityConfig, ProblemConfig, ProjectionConfig,
};
use adastep::harness::runner::{execute, run_experiment, run_to_file};
use adastep::harness::trace::RunStatus;
use adastep::harness::LoadedProblem;
use adastep::problems::Regime;
use adastep::varred::ProxyBound;
use adastep::Error;
use proptest::prelude::*;

fn small(regime: Regime, interpolated: bool, seed: u64) -> ProblemConfig {
    ProblemConfig::SyntheticQuadratic {
        regime,
        interpolated,
        n: 12,
        d: 25,
        seed,
        mask_prob: None,
    }
}

fn algorithms() -> Vec<AlgorithmConfig> {
    let mut out: Vec<AlgorithmConfig> = [
        "name = \"adasps\"",
        "name = \"adasls\"",
        "name = \"sps\"",
        "name = \"sps\"\ngamma_b = 1.0",
        "name = \"decsps\"",
        "name = \"sls\"",
        "name = \"adagrad_norm\"",
        "name = \"adasps_dl\"",
        "name = \"adasvrls\"",
        "name = \"svrg\"\neta = 0.01",
        "name = \"sgd\"\neta0 = 0.01\nschedule = \"inv_sqrt\"",
    ]
    .iter()
    .map(|s| toml::from_str(s).unwrap())
    .collect();
    out.push(AlgorithmConfig::AdaSvrps {
        c_p: None,
        c_p_scale: None,
        mu_f: 10.0,
        probability: ProbabilityConfig::Decreasing { a: 0.1 },
        proxy_bound: ProxyBound::Shifted,
    });
    out
}

#[test]
fn every_algorithm_runs_within_budget() {
    let e = 6.0;
    for alg in algorithms() {
        for b in [1usize, 4] {
            let mut cfg = ExperimentConfig::new(small(Regime::StronglyConvex, false, 3), alg.clone(), e, 1);
            cfg.batch_size = b;
            let tr = run_experiment(&cfg).unwrap_or_else(|err| panic!("{}: {err}", alg.name()));
            let n = tr.header.n as u64;
            let cost = tr.summary.gradient_cost;
            let lo = (e * n as f64) as u64;
            assert!(
                cost >= lo && cost <= lo + n + b as u64,
                "{} B={b}: cost {cost}",
                alg.name()
            );
            assert_eq!(tr.summary.status, RunStatus::Completed);
            assert_eq!(tr.summary.checks.violations, 0, "{}", alg.name());
            for w in tr.records.windows(2) {
                assert!(w[1].epoch >= w[0].epoch);
                assert!(w[1].t > w[0].t);
            }
            assert!(tr.records.iter().all(|r| r.suboptimality >= -1e-9));
        }
    }
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    for alg in algorithms() {
        let cfg = ExperimentConfig::new(small(Regime::GeneralConvex, false, 0), alg.clone(), 3.0, 7);
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        run_to_file(&cfg, &a).unwrap();
        run_to_file(&cfg, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{}", alg.name());
        let mut other = cfg.clone();
        other.seed = 8;
        run_to_file(&other, &b).unwrap();
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{}", alg.name());
    }
}

#[test]
fn header_echoes_the_config() {
    let cfg = ExperimentConfig::new(
        small(Regime::StronglyConvex, true, 2),
        AlgorithmConfig::AdaSps {
            c_p: None,
            c_p_scale: Some(2.0),
        },
        2.0,
        5,
    );
    let tr = run_experiment(&cfg).unwrap();
    assert_eq!(tr.header.config, cfg);
    assert_eq!(tr.header.rng, "chacha8");
    assert!(tr.header.resolved.c_p.unwrap() > 0.0);
    assert_eq!(tr.header.problem_hash.len(), 64);
}

#[test]
fn adasps_beats_decsps_on_interpolated_strongly_convex() {
    let problem = ProblemConfig::synthetic(Regime::StronglyConvex, true, 0);
    let ada = ExperimentConfig::new(
        problem.clone(),
        AlgorithmConfig::AdaSps {
            c_p: None,
            c_p_scale: None,
        },
        50.0,
        0,
    );
    let dec = ExperimentConfig::new(problem, AlgorithmConfig::DecSps { c0: 1.0, gamma_b: 10.0 }, 50.0, 0);
    let a = run_experiment(&ada).unwrap().summary.final_suboptimality;
    let d = run_experiment(&dec).unwrap().summary.final_suboptimality;
    assert!(a <= 1e-6, "adasps {a}");
    assert!(d >= 100.0 * a, "decsps {d} vs adasps {a}");
}

#[test]
fn aborted_run_still_writes_a_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let mut cfg = ExperimentConfig::new(
        small(Regime::StronglyConvex, true, 0),
        AlgorithmConfig::Sgd {
            schedule: adastep::steppers::ScheduleKind::Constant,
            eta0: 1e200,
        },
        5.0,
        0,
    );
    cfg.projection = Some(ProjectionConfig::Unconstrained);
    let err = run_to_file(&cfg, &path).unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    let tr = adastep::harness::Trace::load(&path).unwrap();
    assert_eq!(tr.summary.status, RunStatus::Aborted);
    assert!(tr.summary.abort_reason.is_some());
}

#[test]
fn setup_errors_are_reported() {
    let base = ExperimentConfig::new(
        small(Regime::StronglyConvex, false, 0),
        AlgorithmConfig::AdaSps {
            c_p: None,
            c_p_scale: None,
        },
        1.0,
        0,
    );
    let mut bad = base.clone();
    bad.initial_point = InitialPoint::Explicit { x: vec![0.0; 3] };
    assert!(matches!(run_experiment(&bad), Err(Error::DimensionMismatch { .. })));
    let mut bad = base.clone();
    bad.budget = Budget {
        epochs: None,
        gradient_evals: None,
    };
    assert!(run_experiment(&bad).is_err());
    let mut bad = base;
    bad.projection = Some(ProjectionConfig::EuclideanBall {
        radius: 1e-3,
        center: None,
    });
    assert!(matches!(run_experiment(&bad), Err(Error::InvalidConfig(_))));
}

#[test]
fn gradient_budget_is_honoured() {
    let mut cfg = ExperimentConfig::new(
        small(Regime::StronglyConvex, false, 1),
        AlgorithmConfig::Svrg { eta: 0.01 },
        1.0,
        0,
    );
    cfg.budget = Budget {
        epochs: None,
        gradient_evals: Some(100),
    };
    let loaded = LoadedProblem::load(&cfg.problem).unwrap();
    let opt = loaded.reference_optimum().unwrap();
    let out = execute(&cfg, &loaded, &opt).unwrap();
    let cost = out.trace.summary.gradient_cost;
    assert!((100..=100 + 12 + 1).contains(&cost), "{cost}");
    assert_eq!(out.final_x.len(), 25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traces_respect_their_invariants(
        seed in 0u64..1000,
        alg in 0usize..12,
        sc in any::<bool>(),
        interpolated in any::<bool>(),
        b in 1usize..4,
    ) {
        let regime = if sc { Regime::StronglyConvex } else { Regime::GeneralConvex };
        let mut cfg = ExperimentConfig::new(small(regime, interpolated, seed), algorithms()[alg].clone(), 3.0, seed);
        cfg.batch_size = b;
        cfg.trace.every = Some(1);
        cfg.trace.strict_checks = false;
        let tr = run_experiment(&cfg).unwrap();
        prop_assert_eq!(tr.summary.checks.violations, 0);
        for w in tr.records.windows(2) {
            prop_assert!(w[1].epoch >= w[0].epoch);
        }
        for r in &tr.records {
            prop_assert!(r.suboptimality >= -1e-9 && r.avg_suboptimality >= -1e-9);
        }
        if matches!(cfg.algorithm, AlgorithmConfig::AdaSps { .. } | AlgorithmConfig::AdaSls { .. }) {
            for w in tr.records[1..].windows(2) {
                prop_assert!(w[1].eta <= w[0].eta);
            }
        }
    }
}
