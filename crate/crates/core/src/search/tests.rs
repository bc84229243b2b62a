use proptest::prelude::*;

use super::*;
use crate::envs::{ControllerConfig, EnvId, EnvSpec, PseudoRealEnv, Trajectory};
use crate::param::{percent_error, ParamDistribution, ParamVector, PARAM_FLOOR};
use crate::seed::rng_for;
use crate::spm::SpmModel;

fn pv(v: &[f64]) -> ParamVector {
    ParamVector::new(v.to_vec()).unwrap()
}

#[test]
fn update_rule_examples() {
    let rule = UpdateRule::default();
    let (m, d) = update_mean(&rule, &[0.9], &pv(&[1.0])).unwrap();
    assert!((m[0] - 1.05).abs() < 1e-15);
    assert_eq!(d, vec![Decision::Up]);
    let (m, d) = update_mean(&rule, &[0.5], &pv(&[1.0])).unwrap();
    assert_eq!((m[0], d[0]), (1.0, Decision::Hold));
    let (m, d) = update_mean(&rule, &[0.1], &pv(&[1.0])).unwrap();
    assert!((m[0] - 0.95).abs() < 1e-15);
    assert_eq!(d, vec![Decision::Down]);
    // Thresholds themselves are inside the dead zone.
    assert_eq!(
        update_mean(&rule, &[0.7, 0.3], &pv(&[1.0, 1.0])).unwrap().1,
        vec![Decision::Hold; 2]
    );
}

#[test]
fn update_rule_rejects_bad_input() {
    let rule = UpdateRule::default();
    assert!(update_mean(&rule, &[1.2], &pv(&[1.0])).is_err());
    assert!(update_mean(&rule, &[-0.1], &pv(&[1.0])).is_err());
    assert!(update_mean(&rule, &[f64::NAN], &pv(&[1.0])).is_err());
    assert!(update_mean(&rule, &[0.5, 0.5], &pv(&[1.0])).is_err());
    assert!(UpdateRule::new(0.05, 0.4, 0.3).is_err());
    assert!(UpdateRule::new(0.0, 0.7, 0.3).is_err());
    assert!(UpdateRule::new(0.05, 0.7, 0.6).is_err());
}

#[test]
fn update_is_floor_clamped() {
    let (m, _) = update_mean(&UpdateRule::default(), &[0.0], &pv(&[PARAM_FLOOR])).unwrap();
    assert_eq!(m[0], PARAM_FLOOR);
}

#[test]
fn oracle_examples() {
    assert_eq!(oracle_comparator(&pv(&[2.0]), &pv(&[1.0]), 0.05), vec![1.0]);
    assert_eq!(oracle_comparator(&pv(&[1.0]), &pv(&[1.0]), 0.05), vec![0.5]);
    assert_eq!(oracle_comparator(&pv(&[0.5]), &pv(&[1.0]), 0.05), vec![0.0]);
}

/// Replays the search with the oracle on one scalar.
fn oracle_trace(start: f64, truth: f64, alpha: f64, eta: f64, rounds: usize) -> Vec<f64> {
    let rule = UpdateRule::new(alpha, 0.7, 0.3).unwrap();
    let real = pv(&[truth]);
    let mut mean = pv(&[start]);
    let mut out = vec![start];
    for _ in 0..rounds {
        let probs = oracle_comparator(&real, &mean, eta);
        mean = update_mean(&rule, &probs, &mean).unwrap().0;
        out.push(mean[0]);
    }
    out
}

#[test]
fn oracle_from_double_follows_geometric_recurrence() {
    let trace = oracle_trace(2.0, 1.0, 0.05, 0.05, 40);
    for (k, &m) in trace.iter().enumerate().take(13) {
        let closed = 2.0 * 0.95f64.powi(k as i32);
        assert!((m - closed).abs() < 1e-12, "round {k}: {m} vs {closed}");
    }
    let first = trace.iter().position(|m| (m - 1.0).abs() < 0.1).unwrap();
    assert_eq!(first, 12);
    assert!(trace[12..].iter().all(|m| (m - 1.0).abs() <= 0.10));
}

fn bound(start: f64, truth: f64, alpha: f64) -> usize {
    let step = if truth > start {
        (1.0 + alpha).ln()
    } else {
        (1.0 - alpha).ln().abs()
    };
    ((truth / start).ln().abs() / step).ceil() as usize + 1
}

proptest! {
    #[test]
    fn oracle_converges_within_bound(log_start in -3.0f64..3.0, log_truth in -3.0f64..3.0) {
        let (start, truth) = (log_start.exp(), log_truth.exp());
        let (alpha, eta) = (0.05, 0.05);
        let n = bound(start, truth, alpha);
        let trace = oracle_trace(start, truth, alpha, eta, n + 20);
        let err: Vec<f64> = trace.iter().map(|m| (m - truth).abs() / truth).collect();
        for w in err.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "error increased: {:?}", w);
        }
        let band = alpha + eta;
        let entered = err.iter().position(|&e| e <= band).unwrap();
        prop_assert!(entered <= n, "entered at {entered}, bound {n}");
        prop_assert!(err[entered..].iter().all(|&e| e <= band));
    }

    #[test]
    fn dead_zone_and_bounded_motion(probs in prop::collection::vec(0.0f64..=1.0, 1..8), seed in 0u64..1000) {
        let rule = UpdateRule::default();
        let mean = ParamVector::new(probs.iter().enumerate().map(|(i, _)| 0.1 + (seed + i as u64) as f64 * 0.01).collect()).unwrap();
        let (next, decisions) = update_mean(&rule, &probs, &mean).unwrap();
        for i in 0..probs.len() {
            let ratio = next[i] / mean[i];
            prop_assert!(ratio >= 1.0 - rule.alpha - 1e-12 && ratio <= 1.0 + rule.alpha + 1e-12);
            if (rule.lo_threshold..=rule.hi_threshold).contains(&probs[i]) {
                prop_assert_eq!(next[i], mean[i]);
                prop_assert_eq!(decisions[i], Decision::Hold);
            }
        }
    }
}

#[test]
fn regression_step_converges_geometrically_to_a_perfect_target() {
    let truth = [1.0, 3.0];
    let mut mean = pv(&[2.0, 1.0]);
    for k in 1..=30 {
        mean = step_toward(0.05, &truth, &mean).unwrap().0;
        let want0 = 1.0 + 0.95f64.powi(k);
        let want1 = 3.0 - 2.0 * 0.95f64.powi(k);
        assert!((mean[0] - want0).abs() < 1e-12 && (mean[1] - want1).abs() < 1e-12);
    }
    let fixed = pv(&[0.7, 4.0]);
    let (same, d) = step_toward(0.05, fixed.values(), &fixed).unwrap();
    assert_eq!((same, d), (fixed, vec![Decision::Hold; 2]));
    let (floored, _) = step_toward(0.05, &[0.0], &pv(&[PARAM_FLOOR])).unwrap();
    assert_eq!(floored[0], PARAM_FLOOR);
}

#[test]
fn buffers_are_bounded_fifos() {
    let spec = EnvSpec::new(EnvId::SlidingBlock, 16, 10).unwrap();
    let dist = ParamDistribution::new(EnvId::SlidingBlock.preset_real_params(), 1.0).unwrap();
    let trajs = crate::envs::collect_rollouts(&spec, &dist, &ControllerConfig::default(), 4, 0, &[]).unwrap();
    let mut b = BufferPair::new(3, 2).unwrap();
    for t in &trajs {
        b.push_sp(t.clone()).unwrap();
        b.push_policy(t.clone());
    }
    assert_eq!(b.sp().len(), 3);
    assert_eq!(b.policy().len(), 2);
    assert_eq!(b.sp()[0], trajs[1]);
    assert_eq!(b.policy()[1], trajs[3]);
    let mut hidden = trajs[0].clone();
    hidden.gen_params = None;
    assert!(b.push_sp(hidden).is_err());
    assert!(BufferPair::new(0, 1).is_err());
}

fn tiny_config(method: Method) -> SearchConfig {
    SearchConfig {
        method,
        rounds: 3,
        pretrain_trajs: 12,
        pretrain_steps: 3,
        sim_param_itrs: 2,
        batch_size: 8,
        policy_rollouts: 2,
        sp_rollouts: 3,
        real_rollouts_per_update: 2,
        spm: crate::spm::SpmConfig {
            hidden: 8,
            conv_channels: [2, 2],
            encoder_dim: 4,
            eval_pairs_per_traj: 4,
            ..Default::default()
        },
        ..SearchConfig::default()
    }
}

fn setup(env: EnvId, factor: f64) -> (EnvSpec, ParamVector, PseudoRealEnv) {
    let spec = EnvSpec::new(env, 16, 20).unwrap();
    let truth = env.preset_real_params();
    let initial = truth.scaled(factor).unwrap();
    let real = PseudoRealEnv::new(spec.clone(), truth, ControllerConfig::default()).unwrap();
    (spec, initial, real)
}

#[test]
fn aggregation_is_a_mean_over_trajectories() {
    let (spec, mean, real) = setup(EnvId::BouncingBall, 1.0);
    let cfg = tiny_config(Method::Autotune);
    let mut model: SpmModel = SpmModel::new(cfg.spm, &spec, &mean, &mut rng_for(0, &[])).unwrap();
    // Non-zero output layers so predictions differ between trajectories.
    crate::nn::Parameterized::visit_params(&mut model, &mut |s| {
        for (i, v) in s.value.iter_mut().enumerate() {
            if *v == 0.0 {
                *v = ((i * 7919 % 13) as f32 - 6.0) * 0.05;
            }
        }
    });
    let trajs: Vec<Trajectory> = (0..3).map(|i| real.rollout(&mut rng_for(i, &[])).unwrap()).collect();
    let single = aggregate_real_predictions(&mut model, &trajs[..1], &mean).unwrap();
    assert_eq!(single, model.predict(&trajs[0], mean.values()).unwrap());
    let base = aggregate_real_predictions(&mut model, &trajs, &mean).unwrap();
    let doubled: Vec<Trajectory> = trajs.iter().chain(&trajs).cloned().collect();
    let reversed: Vec<Trajectory> = trajs.iter().rev().cloned().collect();
    for other in [&doubled, &reversed] {
        let agg = aggregate_real_predictions(&mut model, other, &mean).unwrap();
        for (a, b) in agg.iter().zip(&base) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(aggregate_real_predictions(&mut model, &[], &mean).is_err());
}

#[test]
fn config_validation() {
    let mut cfg = SearchConfig::default();
    assert!(cfg.validate().is_ok());
    cfg.r_policy = 2.0;
    assert!(cfg.validate().is_err());
    let cfg = SearchConfig {
        r_dr: 0.0,
        ..SearchConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn truth_is_only_available_to_the_oracle() {
    let (spec, initial, real) = setup(EnvId::SlidingBlock, 2.0);
    let truth = real.hidden_truth().clone();
    assert!(AutotuneState::new(spec.clone(), tiny_config(Method::OracleTest), initial.clone(), 0, None).is_err());
    assert!(AutotuneState::new(
        spec.clone(),
        tiny_config(Method::Autotune),
        initial.clone(),
        0,
        Some(truth)
    )
    .is_err());
    let mut state = AutotuneState::new(spec, tiny_config(Method::Autotune), initial, 0, None).unwrap();
    assert!(state.run_round(&real).is_err(), "rounds require pretraining");
}

#[test]
fn oracle_run_converges_on_every_parameter() {
    let (spec, initial, real) = setup(EnvId::BouncingBall, 2.0);
    let cfg = SearchConfig {
        rounds: 40,
        ..tiny_config(Method::OracleTest)
    };
    let truth = real.hidden_truth().clone();
    let mut state = AutotuneState::new(spec, cfg, initial, 0, Some(truth.clone())).unwrap();
    let mut rows = 0;
    state
        .run(&real, |_| {
            rows += 1;
            Ok(())
        })
        .unwrap();
    assert_eq!(rows, 41);
    for rec in state.history() {
        let err = percent_error(&rec.mean, &truth).unwrap();
        let closed = 100.0 * (2.0 * 0.95f64.powi(rec.round.min(13) as i32) - 1.0).abs();
        if rec.round <= 12 {
            assert!(err.iter().all(|e| (e - closed).abs() < 1e-9), "round {}", rec.round);
        } else {
            assert!(err.iter().all(|&e| e <= 10.0));
        }
    }
}

#[test]
fn oracle_recovers_truth_outside_initial_support() {
    let (spec, initial, real) = setup(EnvId::DampedPendulum, 0.4);
    let truth = real.hidden_truth().clone();
    let dist = ParamDistribution::new(initial.clone(), 1.0).unwrap();
    assert!(!dist.contains(&truth));
    let n = bound(0.4, 1.0, 0.05);
    let cfg = SearchConfig {
        rounds: n + 10,
        ..tiny_config(Method::OracleTest)
    };
    let mut state = AutotuneState::new(spec, cfg, initial, 0, Some(truth.clone())).unwrap();
    state.run(&real, |_| Ok(())).unwrap();
    for rec in &state.history()[n..] {
        assert!(percent_error(&rec.mean, &truth).unwrap().iter().all(|&e| e <= 10.0));
    }
}

#[test]
fn dr_baseline_never_moves() {
    let (spec, initial, real) = setup(EnvId::SlidingBlock, 2.0);
    let mut state = AutotuneState::new(spec, tiny_config(Method::DrBaseline), initial.clone(), 0, None).unwrap();
    state.run(&real, |_| Ok(())).unwrap();
    assert_eq!(state.history().len(), 4);
    assert!(state.history().iter().all(|r| r.mean == initial));
    assert_eq!(state.buffers().sp().len(), 12);
}

#[test]
fn pretraining_fills_buffer_from_initial_support() {
    let (spec, initial, real) = setup(EnvId::SlidingBlock, 0.5);
    let cfg = tiny_config(Method::Autotune);
    let mut state = AutotuneState::new(spec, cfg, initial.clone(), 0, None).unwrap();
    let rec = state.pretrain_phase().unwrap();
    assert_eq!(state.buffers().sp().len(), 12);
    let dist = ParamDistribution::new(initial, 1.0).unwrap();
    assert!(state
        .buffers()
        .sp()
        .iter()
        .all(|t| dist.contains(t.gen_params.as_ref().unwrap())));
    assert_eq!(rec.spm_accuracy.as_ref().map(Vec::len), Some(6));
    let next = state.run_round(&real).unwrap();
    assert_eq!(next.round, 1);
    assert!(next.aggregate.unwrap().iter().all(|p| *p > 0.0 && *p < 1.0));
    assert_eq!(state.buffers().sp().len(), 15);
    assert_eq!(state.buffers().policy().len(), 2);
}

fn trajectory_of(method: Method, seed: u64) -> Vec<RoundRecord> {
    let (spec, initial, real) = setup(EnvId::BouncingBall, 2.0);
    let mut state = AutotuneState::new(spec, tiny_config(method), initial, seed, None).unwrap();
    state.run(&real, |_| Ok(())).unwrap();
    state.history().to_vec()
}

#[test]
fn learned_runs_are_reproducible() {
    for method in [Method::Autotune, Method::RegressionBaseline] {
        let a = trajectory_of(method, 3);
        assert_eq!(a.len(), 4);
        assert_eq!(a, trajectory_of(method, 3));
        assert!(a.last().unwrap().spm_accuracy.is_some() || a.last().unwrap().regression_error.is_some());
    }
}

#[test]
fn classifier_search_never_passes_the_encoding_scale() {
    use crate::nn::Parameterized;
    let (spec, initial, real) = setup(EnvId::SlidingBlock, 0.5);
    let config = SearchConfig {
        rounds: 20,
        ..tiny_config(Method::Autotune)
    };
    let mut state = AutotuneState::new(spec, config, initial.clone(), 0, None).unwrap();
    state.pretrain_phase().unwrap();
    let mut p_max = Vec::new();
    for _ in 0..20 {
        // Pin every head to "higher" so the mean is pushed up every round.
        if let Estimator::Spm { model, .. } = state.estimator_mut() {
            p_max = model.p_max().to_vec();
            model.visit_params(&mut |s| {
                if s.value.len() == 1 {
                    s.value[0] = 50.0;
                }
            });
        }
        let r = state.run_round(&real).unwrap();
        assert!(r.aggregate.unwrap().iter().all(|&p| p > 0.99));
    }
    let last = state.history().last().unwrap();
    for (i, (&m, &cap)) in last.mean.iter().zip(&p_max).enumerate() {
        assert_eq!(m, cap, "parameter {i}");
        assert_eq!(cap, 2.0 * initial.values()[i]);
    }
    assert!(last.decisions.iter().all(|d| *d == Decision::Hold));
}
