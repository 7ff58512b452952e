use std::sync::Arc;

use dualguide_core::backends::{Recorder, ReplayBackend};
use dualguide_core::{
    run_reverse, BackendSpec, ChainRng, Constraint, MultiplierScope, RunConfig, ScoreTable,
    SlackMode,
};
use proptest::prelude::*;

fn constraint_strategy(v: usize) -> impl Strategy<Value = Constraint> {
    (
        prop::collection::vec(0.0..2.0f64, v),
        0.0..6.0f64,
        0usize..4,
        any::<bool>(),
    )
        .prop_map(|(values, target, mode, per_pos)| {
            Constraint::new("c", ScoreTable::per_token(values, "r").unwrap(), target)
                .with_eta(0.0)
                .with_lambda0(0.0)
                .with_slack(SlackMode::ALL[mode])
                .with_scope(if per_pos {
                    MultiplierScope::PerPosition
                } else {
                    MultiplierScope::Scalar
                })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_guidance_is_unconstrained(
        probs in prop::collection::vec(0.05..1.0f64, 4),
        len in 1usize..10,
        steps in 1usize..10,
        seed in any::<u64>(),
        cons in prop::collection::vec(constraint_strategy(4), 1..3),
    ) {
        let spec = BackendSpec::Drifting { probs, mu_bar: 0.05, sigma: 0.2, rho: 0.01 };
        let cfg = RunConfig::new(len, steps).unwrap();
        let guided = run_reverse(&mut spec.build(len).unwrap(), &cons, &cfg, &mut ChainRng::new(seed)).unwrap();
        let plain = run_reverse(&mut spec.build(len).unwrap(), &[], &cfg, &mut ChainRng::new(seed)).unwrap();
        prop_assert_eq!(guided.tokens, plain.tokens);
        for (a, b) in guided.records.iter().zip(&plain.records) {
            prop_assert_eq!(&a.commits, &b.commits);
        }
    }
}

#[test]
fn replaying_recorded_rows_reproduces_the_run() {
    let (len, steps) = (10, 6);
    let spec = BackendSpec::Drifting {
        probs: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        mu_bar: 0.1,
        sigma: 0.4,
        rho: 0.05,
    };
    let c = Constraint::new("c", ScoreTable::per_token(vec![0.0, 0.0, 1.0, 0.0, 1.0], "r").unwrap(), 5.0)
        .with_eta(2.0)
        .with_slack(SlackMode::Optimistic);
    let cfg = RunConfig::new(len, steps).unwrap().with_bound_tracking(true);
    for seed in 0..5 {
        let mut rec = Recorder::new(spec.build(len).unwrap());
        let original = run_reverse(&mut rec, std::slice::from_ref(&c), &cfg, &mut ChainRng::new(seed)).unwrap();
        let trace = Arc::new(rec.into_trace());
        assert_eq!(trace.frames().len(), steps);
        let mut replay = ReplayBackend::new(trace.clone());
        let again = run_reverse(&mut replay, std::slice::from_ref(&c), &cfg, &mut ChainRng::new(seed)).unwrap();
        assert_eq!(original, again);
        let via_spec = run_reverse(
            &mut BackendSpec::Trace(trace).build(len).unwrap(),
            std::slice::from_ref(&c),
            &cfg,
            &mut ChainRng::new(seed),
        )
        .unwrap();
        assert_eq!(original, via_spec);
    }
}
