use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ratelessnc::channel::{AdversaryStrategy, Channel, MatrixChannel, StageParams};
use ratelessnc::field::{Fp251, Gf65536};
use ratelessnc::harness::{run_experiment, ExperimentConfig, Overrides};
use ratelessnc::linalg::{rref_with_transform, solve_linear, IncrementalReducer, Matrix};
use ratelessnc::scheme_rs::{self, make_suffix, parity_staircase_holds, RsParams, SharedSecret};
use ratelessnc::scheme_sc::{self, ScOptions, SourceMessage};
use ratelessnc::session::Outcome;

fn strategy(k: u8) -> AdversaryStrategy {
    match k % 3 {
        0 => AdversaryStrategy::None,
        1 => AdversaryStrategy::UniformRandom,
        _ => AdversaryStrategy::AdditiveTargeted,
    }
}

fn schedule(stages: &[(usize, usize)]) -> Vec<StageParams> {
    stages.iter().map(|&(m, z)| StageParams::new(m, z, m)).collect()
}

fn stage_list(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((2usize..7).prop_flat_map(|m| (Just(m), 0..m)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_output_decomposes(
        m in 1usize..7, z_raw in 0usize..6, c_extra in 0usize..4, width in 1usize..10,
        header in 0usize..4, k in 0u8..3, seed in any::<u64>(),
    ) {
        let z = z_raw % m;
        let c = m + c_extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::<Gf65536>::random(c, width + header, &mut rng);
        let out = MatrixChannel::new(strategy(k))
            .transmit(&StageParams::new(m, z, c), &x, header, &mut rng)
            .unwrap();
        prop_assert!(out.decomposes(&x));
        prop_assert_eq!(out.y.rows(), m);
        prop_assert_eq!(out.t.shape(), (m, c));
        prop_assert!(out.t.rank() <= m);
    }

    #[test]
    fn sc_never_decodes_wrong(
        b in 1usize..5, n in 1usize..8, stages in stage_list(1..6),
        k in 0u8..3, extra in any::<bool>(), seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let msg = SourceMessage::<Gf65536>::random(b, n, &mut rng).unwrap();
        let opts = ScOptions { extra_point_every_stage: extra };
        let report = scheme_sc::run_session(
            &msg, &schedule(&stages), &MatrixChannel::new(strategy(k)), opts, 0, &mut rng,
        ).unwrap();
        prop_assert!(report.audit.is_clean(), "{:?}", report.audit.violations);
        prop_assert!(!report.record.silent_corruption());
        prop_assert_eq!(report.record.statuses.len(), report.record.stage_trace.len());
        if report.record.outcome == Outcome::Decoded {
            prop_assert_eq!(report.record.rate, b as f64 / report.record.stages as f64);
        }
    }

    #[test]
    fn rs_parity_staircase_holds(
        b in 1usize..4, n in 1usize..6, sigma in 1usize..3, c_bar in 1usize..3,
        stages in 1usize..4, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = RsParams::new::<Gf65536>(b, n, sigma, None, c_bar).unwrap();
        let mut secret = SharedSecret::<Gf65536>::new();
        secret.extend_to(&params, stages, &mut rng);
        let msg = SourceMessage::<Gf65536>::random(b, n, &mut rng).unwrap();
        let w = msg.w().vectorize().into_data();
        let blocks: Vec<_> = (1..=stages).map(|k| make_suffix(&w, &secret, &params, k).unwrap()).collect();
        prop_assert!(parity_staircase_holds(&w, &blocks, &secret, &params));
        prop_assert_eq!(secret.symbols_through(stages), stages * (stages + 1) * sigma * params.m);
    }

    #[test]
    fn incremental_matches_batch(
        sizes in prop::collection::vec((1usize..6, 1usize..6), 2..5),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: usize = sizes.iter().map(|s| s.0).sum();
        let cols: usize = sizes.iter().map(|s| s.1).sum();
        let full = Matrix::<Fp251>::random(rows, cols, &mut rng);
        let mut red = IncrementalReducer::new(full.block(0, 0, sizes[0].0, sizes[0].1));
        let (mut r0, mut c0) = sizes[0];
        for &(rn, cn) in &sizes[1..] {
            red.update(&full.block(r0, 0, rn, c0), &full.block(0, c0, r0, cn), &full.block(r0, c0, rn, cn)).unwrap();
            r0 += rn;
            c0 += cn;
        }
        let batch = rref_with_transform(&full);
        prop_assert_eq!(&red.result().reduced, &batch.reduced);
        let rhs = Matrix::random(rows, 1, &mut rng);
        prop_assert_eq!(red.solve(&rhs).unwrap(), solve_linear(&full, &rhs).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rs_never_decodes_wrong(
        b in 1usize..4, n in 1usize..5, long in stage_list(2..4), k in 1u8..3, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c_bar = long.iter().map(|s| s.0).max().unwrap();
        let params = RsParams::new::<Gf65536>(b, n, 1, None, c_bar).unwrap();
        let short = vec![StageParams::new(2, 1, 2); long.len()];
        let msg = SourceMessage::<Gf65536>::random(b, n, &mut rng).unwrap();
        let ch = MatrixChannel::new(strategy(k));
        let report = scheme_rs::run_session(&msg, &params, &schedule(&long), &short, &ch, &ch, 0, &mut rng).unwrap();
        prop_assert!(report.audit.is_clean(), "{:?}", report.audit.violations);
        prop_assert!(!report.record.silent_corruption());
    }
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text, None, &Overrides::default()).unwrap()
}

const MIXING: &str = r#"
SRC -> A
SRC -> B
SRC -> C
A -> D, E
B -> D
C -> E
D -> SINK
E -> SINK
D -> F
E -> F
F -> SINK
ADV1 -> F
"#;

#[test]
fn hypergraph_and_matrix_modes_agree() {
    let graph_cfg = config(&format!(
        "scheme = \"sc\"\nb = 5\nn = 8\ntrials = 500\nseed = 21\n[channel]\nmode = \"hypergraph\"\nedges = \"\"\"{MIXING}\"\"\"\n"
    ));
    let matrix_cfg = config(
        "scheme = \"sc\"\nb = 5\nn = 8\ntrials = 500\nseed = 22\n[long]\nmodel = \"fixed\"\nM = [3]\nz = [1]\nc = [3]\n",
    );
    let g = run_experiment(&graph_cfg).unwrap().summary;
    let m = run_experiment(&matrix_cfg).unwrap().summary;
    assert_eq!((g.expected_capacity, g.expected_adversary), (3.0, 1.0));
    let rate = |s: &ratelessnc::harness::Summary| s.correct as f64 / s.trials as f64;
    assert!((rate(&g) - rate(&m)).abs() < 0.02, "{} vs {}", rate(&g), rate(&m));
    assert!((g.decode_at_cutset_frequency - m.decode_at_cutset_frequency).abs() < 0.02);
    assert_eq!(g.silent_corruptions + m.silent_corruptions, 0);
}

#[test]
fn decoded_trials_respect_cutset() {
    let res = run_experiment(&config(
        "scheme = \"sc\"\nb = 8\nn = 16\ntrials = 300\nseed = 5\n[long]\nmodel = \"iid\"\nM = [3, 4, 5]\nz = [0, 1, 2]\nc_bar = 5\n",
    ))
    .unwrap();
    let s = &res.summary;
    assert_eq!(s.decoded + s.failures + s.exhausted, s.trials);
    assert_eq!(res.records.len() as u64, s.trials);
    for (k, r) in res.records.iter().enumerate() {
        assert_eq!(r.trial, k as u64);
    }
    assert!(s.decoded_before_cutset * 100 <= s.decoded);
    let mean = res.records.iter().map(|r| r.rate).sum::<f64>() / res.records.len() as f64;
    assert_eq!(mean, s.mean_rate);
}

/// Below the `sigma m` rule at q = 251 forged messages get through; at the
/// rule they do not.
#[test]
fn rs_sizing_rule_matters_at_small_q() {
    let run = |m: usize| {
        let params = RsParams { b: 2, n: 3, sigma: 1, m, c_bar: 2, relaxed: true };
        let sched = vec![StageParams::new(2, 1, 2); 5];
        let ch = MatrixChannel::new(AdversaryStrategy::UniformRandom);
        let mut wrong = 0;
        for t in 0..300u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(t);
            let msg = SourceMessage::<Fp251>::random(2, 3, &mut rng).unwrap();
            let r = scheme_rs::run_session(&msg, &params, &sched, &sched, &ch, &ch, t, &mut rng).unwrap();
            wrong += r.record.silent_corruption() as usize;
        }
        wrong
    };
    assert!(run(1) > 0);
    assert_eq!(run(RsParams::auto_m(2, 1, 2)), 0);
}
