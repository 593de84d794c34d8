//! Distributional and totality checks of the samplers against the exact
//! enumeration oracles.

use drawlab::constraints::check_full;
use drawlab::draw::rng::{self, substream};
use drawlab::draw::{
    propose_unconstrained, proposal_valid, rejection_sample, run_skip_draw, sample_unconstrained,
    Procedure, ProposalBuf,
};
use drawlab::exact::{enumerate_uniform, EnumerateOptions, MatrixProvenance, PairAccumulator};
use drawlab::experiments::{run_sweep, SimulationJob};
use drawlab::model::{fixtures, Instance, Labelling};

/// Accepted rejection samples distribute like the exact uniform matrix. A
/// million accepted samples, three standard errors.
#[test]
fn rejection_sampler_is_uniform_on_fixtures() {
    for inst in [fixtures::example3_random(), fixtures::wc1990()] {
        let exact = enumerate_uniform(&inst, Labelling::ExAnte, &EnumerateOptions::default()).unwrap();
        let mut acc = PairAccumulator::new(&inst);
        let mut buf = ProposalBuf::new(&inst, Labelling::ExAnte);
        let mut rng = substream(2030, rng::DOMAIN_UNIFORM, 9, 0);
        let target = 1_000_000u64;
        while acc.samples() < target {
            propose_unconstrained(&inst, &mut rng, &mut buf);
            if proposal_valid(&inst, &buf) {
                acc.add(&inst, &buf.materialize(&inst));
            }
        }
        let mc = acc
            .into_matrix(
                &inst,
                MatrixProvenance::MonteCarlo {
                    samples: target,
                    seed: 2030,
                    procedure: "uniform".into(),
                },
            )
            .unwrap();
        let mut worst = 0.0f64;
        let mut z_sum = 0.0f64;
        let mut z_count = 0u32;
        for i in 0..exact.n() {
            for j in (i + 1)..exact.n() {
                let p = exact.prob(i, j);
                let se = (p * (1.0 - p) / target as f64).sqrt();
                let diff = (mc.prob(i, j) - p).abs();
                if se > 0.0 {
                    worst = worst.max(diff / se);
                    z_sum += diff / se;
                    z_count += 1;
                } else {
                    assert_eq!(diff, 0.0);
                }
            }
        }
        assert!(worst < 3.0, "{}: worst {worst:.2} se", inst.name());
        // Mean |z| of a well-calibrated sampler is sqrt(2/pi) ~ 0.8.
        let mean_z = z_sum / f64::from(z_count);
        assert!(mean_z < 1.2, "{}: mean |z| {mean_z:.2}", inst.name());
    }
}

/// The skip engine terminates with a valid assignment for every seed,
/// policy and pot order tried.
#[test]
fn skip_draw_total_on_fixtures_and_orders() {
    // Small fixtures: every order, both policies, many seeds.
    for inst in [
        fixtures::example3_random(),
        fixtures::example3_preassigned(),
        fixtures::wc1990(),
    ] {
        for labelling in [Labelling::ExAnte, Labelling::ExPost] {
            for proc in Procedure::all_orders(inst.pot_count(), labelling) {
                for seed in 0..200u64 {
                    let (state, _) = run_skip_draw(&inst, &proc, seed, 0).unwrap();
                    assert!(
                        check_full(&inst, &state, labelling).is_empty(),
                        "{} {proc} seed {seed}",
                        inst.name()
                    );
                }
            }
        }
    }
    // Full instance: a spread of orders including the most skip-heavy one.
    let inst = fixtures::wc2026();
    for order in [
        vec![0, 1, 2, 3],
        vec![3, 2, 1, 0],
        vec![3, 1, 0, 2],
        vec![1, 2, 3, 0],
        vec![2, 0, 3, 1],
    ] {
        for labelling in [Labelling::ExAnte, Labelling::ExPost] {
            let proc = Procedure::new(order.clone(), labelling).unwrap();
            for seed in 0..8u64 {
                let (state, transcript) = run_skip_draw(&inst, &proc, seed, 0).unwrap();
                assert!(check_full(&inst, &state, labelling).is_empty(), "{proc} seed {seed}");
                assert!(transcript.replays_identically(&inst));
            }
        }
    }
}

/// Label-bound constraints relabel groups, they do not change which teams
/// meet: the exact uniform pair matrices under the two policies coincide.
#[test]
fn uniform_pair_probabilities_ignore_labelling_policy() {
    for inst in [
        fixtures::example3_preassigned(),
        fixtures::wc1990(),
    ] {
        let ante = enumerate_uniform(&inst, Labelling::ExAnte, &EnumerateOptions::default()).unwrap();
        let post = enumerate_uniform(&inst, Labelling::ExPost, &EnumerateOptions::default()).unwrap();
        for i in 0..inst.team_count() {
            for j in (i + 1)..inst.team_count() {
                assert_eq!(
                    ante.exact_prob(i, j),
                    post.exact_prob(i, j),
                    "{} pair ({i},{j})",
                    inst.name()
                );
            }
        }
    }
}

/// The unconstrained proposal space has the advertised size: fixed hosts
/// leave 9! arrangements of pot 1 and 12! of each other pot; without fixed
/// hosts every pot contributes 12!.
#[test]
fn unconstrained_sample_space_sizes() {
    let inst = fixtures::wc2026();
    let factorial = |n: u64| -> f64 { (1..=n).map(|x| x as f64).product() };
    let space = |labelling: Labelling| -> f64 {
        (0..inst.pot_count())
            .map(|pot| {
                let drawn = inst
                    .pot_teams(pot)
                    .iter()
                    .filter(|&&t| {
                        labelling == Labelling::ExPost
                            || inst.team(t).pre_assigned_group().is_none()
                    })
                    .count() as u64;
                factorial(drawn)
            })
            .product()
    };
    let ex_ante = space(Labelling::ExAnte);
    let ex_post = space(Labelling::ExPost);
    assert!((ex_ante / 3.99e31 - 1.0).abs() < 0.01, "{ex_ante:e}");
    assert!((ex_post / 5.26e34 - 1.0).abs() < 0.01, "{ex_post:e}");
}

/// One group per pot leaves a single possible assignment.
#[test]
fn single_group_instance_is_deterministic() {
    let doc = r#"{"name":"solo","groups":["A"],"uefa_min":0,"uefa_max":2,
        "teams":[{"id":"x","name":"X","pot":1,"confeds":["UEFA"]},
                 {"id":"y","name":"Y","pot":2,"confeds":["CAF"]}]}"#;
    let inst: Instance = drawlab::model::load_instance(doc).unwrap();
    let mut rng = substream(1, 2, 3, 4);
    let state = sample_unconstrained(&inst, Labelling::ExAnte, &mut rng);
    assert_eq!(state.group_of(0), Some(0));
    assert_eq!(state.group_of(1), Some(0));
    let mut rng = substream(9, 9, 9, 9);
    let (accepted, used) = rejection_sample(&inst, Labelling::ExAnte, &mut rng, 10);
    assert_eq!(used, 1, "unconstrained instance accepts the first proposal");
    assert!(accepted.is_some());
}

/// Two sweeps with different seeds agree on the average measure within four
/// combined standard errors.
#[test]
fn sweeps_are_seed_independent_within_error() {
    let inst = fixtures::example3_preassigned();
    let job = |seed| SimulationJob {
        procedures: vec![Procedure::official(2)],
        draws_per_procedure: 50_000,
        uniform_target: 50_000,
        uniform_max_proposals: u64::MAX,
        master_seed: seed,
    };
    let a = run_sweep(&inst, &job(101)).unwrap();
    let b = run_sweep(&inst, &job(202)).unwrap();
    let (ra, rb) = (&a.rows[0], &b.rows[0]);
    for k in 0..5 {
        let se = (ra.se[k].powi(2) + rb.se[k].powi(2)).sqrt().max(1e-6);
        let diff = (ra.report.m[k] - rb.report.m[k]).abs();
        assert!(diff < 4.0 * se, "m{}: {diff} vs 4se {}", k + 1, 4.0 * se);
    }
}

/// Every row of a sweep compares against the same baseline matrix per
/// policy.
#[test]
fn sweep_rows_share_the_baseline() {
    let inst = fixtures::example3_random();
    let job = SimulationJob {
        procedures: Procedure::all_orders(2, Labelling::ExAnte),
        draws_per_procedure: 5_000,
        uniform_target: 5_000,
        uniform_max_proposals: u64::MAX,
        master_seed: 3,
    };
    let result = run_sweep(&inst, &job).unwrap();
    assert_eq!(result.baselines.len(), 1);
    let provenance = &result.rows[0].report.baseline_provenance;
    for row in &result.rows {
        assert_eq!(&row.report.baseline_provenance, provenance);
    }
}
