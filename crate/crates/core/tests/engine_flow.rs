use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use moboga::engine::{exploit, explore, run, EngineConfig, NextPick, StopReason};
use moboga::objectives::hard_violations;
use moboga::pareto::dominates;
use moboga::problems::BenchmarkProblem;
use moboga::{Candidate, ConstraintSpec, Error, FnEvaluator, ParamSpec, Problem, SearchSpace};

fn small(seed: u64) -> EngineConfig {
    EngineConfig {
        n_initial: 6,
        max_iterations: 20,
        seed,
        ..EngineConfig::default()
    }
}

#[test]
fn same_seed_same_result() {
    let p = BenchmarkProblem::by_name("constr-ex").unwrap();
    let a = run(&p.problem, &small(5), None, |_| Ok(())).unwrap();
    let b = run(&p.problem, &small(5), None, |_| Ok(())).unwrap();
    assert_eq!(a.archive, b.archive);
    assert_eq!(
        (a.pof, a.best_index, a.closeness),
        (b.pof, b.best_index, b.closeness)
    );
    let c = run(&p.problem, &small(6), None, |_| Ok(())).unwrap();
    assert_ne!(a.archive, c.archive);
}

#[test]
fn observer_sees_every_observation_in_order() {
    let p = BenchmarkProblem::by_name("binh-korn").unwrap();
    let mut seen = Vec::new();
    let ex = explore(&p.problem, &small(2), |o| {
        seen.push(o.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(seen.as_slice(), ex.archive.observations());
    // iterations never decrease and exploration adds one point per step
    let mut last = 0;
    for o in &seen[6..] {
        assert_eq!(o.iteration, last + 1);
        last = o.iteration;
    }
}

#[test]
fn observer_error_aborts_the_run() {
    let p = BenchmarkProblem::by_name("binh-korn").unwrap();
    let mut n = 0;
    let err = explore(&p.problem, &small(2), |_| {
        n += 1;
        if n == 3 {
            Err(Error::Contract("disk full".into()))
        } else {
            Ok(())
        }
    })
    .unwrap_err();
    assert!(err.to_string().contains("disk full"));
    assert_eq!(n, 3);
}

#[test]
fn hard_constraints_hold_after_initialization() {
    for name in ["binh-korn", "constr-ex", "sinusoid-1d"] {
        let p = BenchmarkProblem::by_name(name).unwrap();
        let res = run(&p.problem, &small(9), None, |_| Ok(())).unwrap();
        for o in res.archive.observations() {
            assert_eq!(
                hard_violations(&p.problem.constraints, &o.candidate).unwrap(),
                0,
                "{name}: {o:?}"
            );
        }
        for &i in &res.pof {
            assert!(res.archive.observations()[i].feasible);
            for &j in &res.pof {
                let (a, b) = (
                    &res.archive.observations()[i],
                    &res.archive.observations()[j],
                );
                assert!(!dominates(&a.objectives.0, &b.objectives.0).unwrap());
            }
        }
        assert!(res.pof.contains(&res.best_index));
    }
}

#[test]
fn huge_delta_stops_after_first_proposal() {
    let p = BenchmarkProblem::by_name("binh-korn").unwrap();
    let cfg = EngineConfig {
        delta: 10.0,
        ..small(1)
    };
    let res = explore(&p.problem, &cfg, |_| Ok(())).unwrap();
    assert_eq!(res.stop_reason, StopReason::StopThreshold);
    assert_eq!(res.archive.len(), cfg.n_initial);
}

#[test]
fn batch_mode_matches_in_parallel() {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&calls);
    let space = SearchSpace::new(vec![
        ParamSpec::continuous("a", 0.0, 1.0).unwrap(),
        ParamSpec::continuous("b", 0.0, 1.0).unwrap(),
    ])
    .unwrap();
    let problem = Problem::new(
        space,
        &["f", "g"],
        vec![],
        Arc::new(FnEvaluator(move |c: &Candidate| {
            counter.fetch_add(1, Ordering::SeqCst);
            let (a, b) = (c.real(0), c.real(1));
            vec![a * a + b, (1.0 - a).powi(2) + b]
        })),
    )
    .unwrap();
    let cfg = EngineConfig {
        next_pick: NextPick::All,
        max_iterations: 30,
        ..small(4)
    };
    let serial = run(&problem, &cfg, None, |_| Ok(())).unwrap();
    let parallel = run(
        &problem,
        &EngineConfig {
            parallel_evaluation: true,
            ..cfg
        },
        None,
        |_| Ok(()),
    )
    .unwrap();
    assert_eq!(serial.archive, parallel.archive);
    assert!(serial.iterations_used <= 30);
    assert_eq!(
        calls.load(Ordering::SeqCst),
        serial.iterations_used + parallel.iterations_used
    );
}

#[test]
fn custom_pick_rule_is_used() {
    let p = BenchmarkProblem::by_name("constr-ex").unwrap();
    // always take the member with the largest first acquisition value
    let rule = NextPick::Custom(Arc::new(|pm: &[moboga::engine::ProposalPoint]| {
        let mut idx: Vec<usize> = (0..pm.len()).collect();
        idx.sort_by(|&a, &b| pm[b].acquisition[0].total_cmp(&pm[a].acquisition[0]));
        idx
    }));
    let res = run(
        &p.problem,
        &EngineConfig {
            next_pick: rule,
            ..small(3)
        },
        None,
        |_| Ok(()),
    )
    .unwrap();
    assert!(!res.pof.is_empty());
}

#[test]
fn mixed_space_single_objective() {
    let space = SearchSpace::new(vec![
        ParamSpec::continuous("lr", -4.0, 0.0).unwrap(),
        ParamSpec::discrete("width", vec![16.0, 32.0, 64.0, 128.0]).unwrap(),
        ParamSpec::categorical("opt", vec!["sgd", "adam"]).unwrap(),
    ])
    .unwrap();
    let problem = Problem::new(
        space,
        &["loss"],
        vec![ConstraintSpec::hard("budget", |c: &Candidate| {
            c.real(1) <= 64.0
        })],
        Arc::new(FnEvaluator(|c: &Candidate| {
            let lr = c.real(0);
            let width = c.real(1);
            let bonus = if c.values()[2].as_label() == Some("adam") {
                0.0
            } else {
                0.3
            };
            vec![(lr + 2.5).powi(2) + 10.0 / width + bonus]
        })),
    )
    .unwrap();
    let res = run(
        &problem,
        &EngineConfig {
            max_iterations: 25,
            ..small(8)
        },
        None,
        |_| Ok(()),
    )
    .unwrap();
    let best = &res.archive.observations()[res.best_index];
    assert!(best.candidate.real(1) <= 64.0);
    assert_eq!(res.pof.len(), 1);
    for o in res.archive.observations() {
        assert!(o.candidate.real(1) <= 64.0);
    }
}

#[test]
fn all_soft_violations_give_no_feasible() {
    let space = SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0).unwrap()]).unwrap();
    let problem = Problem::new(
        space,
        &["q"],
        vec![ConstraintSpec::soft(
            "never",
            |_: &Candidate| false,
            |_: &Candidate| 0.5,
        )],
        Arc::new(FnEvaluator(|c: &Candidate| vec![c.real(0)])),
    )
    .unwrap();
    let ex = explore(
        &problem,
        &EngineConfig {
            max_iterations: 10,
            ..small(1)
        },
        |_| Ok(()),
    )
    .unwrap();
    assert!(!ex.archive.is_empty());
    assert!(matches!(exploit(&ex.archive, None), Err(Error::NoFeasible)));
}

#[test]
fn unreachable_hard_region_is_a_config_error() {
    let space = SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0).unwrap()]).unwrap();
    let problem = Problem::new(
        space,
        &["q"],
        vec![ConstraintSpec::hard("never", |_: &Candidate| false)],
        Arc::new(FnEvaluator(|c: &Candidate| vec![c.real(0)])),
    )
    .unwrap();
    assert!(matches!(
        explore(&problem, &small(1), |_| Ok(())),
        Err(Error::Config(_))
    ));
}

#[test]
fn weights_shift_the_recommendation() {
    let p = BenchmarkProblem::by_name("binh-korn").unwrap();
    let ex = explore(
        &p.problem,
        &EngineConfig {
            max_iterations: 30,
            ..small(11)
        },
        |_| Ok(()),
    )
    .unwrap();
    let lean_q1 = exploit(&ex.archive, Some(&[50.0, 1.0])).unwrap();
    let lean_q2 = exploit(&ex.archive, Some(&[1.0, 50.0])).unwrap();
    let obs = ex.archive.observations();
    assert!(obs[lean_q1.best_index].objectives.0[0] <= obs[lean_q2.best_index].objectives.0[0]);
    assert!(exploit(&ex.archive, Some(&[1.0])).is_err());
}
