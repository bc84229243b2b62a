use proptest::prelude::*;

use super::*;
use crate::param::ParamKind;
use crate::seed::rng_for;

fn with(params: &ParamVector, i: usize, v: f64) -> ParamVector {
    let mut x = params.values().to_vec();
    x[i] = v;
    ParamVector::new(x).unwrap()
}

fn random_ctrl() -> ControllerConfig {
    ControllerConfig::new(ControllerKind::Random)
}

#[test]
fn schemas_match_env_roster() {
    let n: Vec<usize> = EnvId::ALL.iter().map(|e| e.schema().len()).collect();
    assert_eq!(n, vec![8, 8, 6]);
    for env in EnvId::ALL {
        let s = env.schema();
        assert!(!s.dynamics_indices().is_empty());
        assert!((0..s.len()).filter(|&i| s.kind(i) == ParamKind::Visual).count() >= 2);
        assert_eq!(env.preset_real_params().len(), s.len());
        assert_eq!(env.as_str().parse::<EnvId>().unwrap(), env);
    }
}

#[test]
fn spec_validation() {
    assert!(EnvSpec::new(EnvId::BouncingBall, 24, 60).is_err());
    assert!(EnvSpec::new(EnvId::BouncingBall, 32, 9).is_err());
    assert!(EnvSpec::with_dt(EnvId::BouncingBall, 32, 60, 0.0).is_err());
    assert!(EnvSpec::new(EnvId::BouncingBall, 64, 10).is_ok());
}

#[test]
fn ball_reset_distribution() {
    let spec = EnvSpec::default_for(EnvId::BouncingBall);
    let p = EnvId::BouncingBall.preset_real_params();
    let mut rng = rng_for(0, &[]);
    for _ in 0..200 {
        let s = env_reset(&spec, &p, &mut rng).unwrap();
        assert_eq!(s.vars[1], 0.9);
        assert_eq!((s.vars[2], s.vars[3]), (0.0, 0.0));
        assert!((0.3..=0.7).contains(&s.vars[0]));
        assert_eq!(s.step, 0);
    }
    let a = env_reset(&spec, &p, &mut rng_for(5, &[])).unwrap();
    let b = env_reset(&spec, &p, &mut rng_for(5, &[])).unwrap();
    assert_eq!(a, b);
    let short = ParamVector::new(vec![1.0; 7]).unwrap();
    assert!(env_reset(&spec, &short, &mut rng).is_err());
}

fn pendulum_energy(mass: f64, s: &EnvState) -> f64 {
    let (theta, omega) = (s.vars[0], s.vars[1]);
    let l = PENDULUM_LENGTH;
    0.5 * mass * l * l * omega * omega + mass * STANDARD_GRAVITY * l * (1.0 - theta.cos())
}

#[test]
fn undamped_pendulum_conserves_energy() {
    for len in [60, 200] {
        let spec = EnvSpec::new(EnvId::DampedPendulum, 32, len).unwrap();
        let p = with(&EnvId::DampedPendulum.preset_real_params(), 1, 1e-12);
        let mass = p[0];
        for seed in 0..5 {
            let mut s = env_reset(&spec, &p, &mut rng_for(seed, &[])).unwrap();
            let e0 = pendulum_energy(mass, &s);
            for _ in 0..len {
                s = env_step(&spec, &s, &[0.0], &p).unwrap();
                let e = pendulum_energy(mass, &s);
                assert!(
                    (e - e0).abs() / e0 < 0.01,
                    "drift {} at seed {seed}",
                    (e - e0).abs() / e0
                );
            }
        }
    }
}

#[test]
fn damping_dissipates_energy() {
    let spec = EnvSpec::default_for(EnvId::DampedPendulum);
    let p = EnvId::DampedPendulum.preset_real_params();
    let mut s = env_reset(&spec, &p, &mut rng_for(1, &[])).unwrap();
    let e0 = pendulum_energy(p[0], &s);
    for _ in 0..60 {
        s = env_step(&spec, &s, &[0.0], &p).unwrap();
    }
    assert!(pendulum_energy(p[0], &s) < 0.9 * e0);
}

#[test]
fn restitution_scales_bounce_speed() {
    // A short control step keeps gravity's contribution across the bounce small.
    let spec = EnvSpec::with_dt(EnvId::BouncingBall, 32, 400, 0.005).unwrap();
    let p = with(&EnvId::BouncingBall.preset_real_params(), 1, 0.5);
    let g = p[0];
    let mut s = env_reset(&spec, &p, &mut rng_for(2, &[])).unwrap();
    let mut checked = 0;
    for _ in 0..400 {
        let next = env_step(&spec, &s, &[0.0], &p).unwrap();
        if s.vars[3] < 0.0 && next.vars[3] > 0.0 {
            let pre = s.vars[3].abs();
            let post = next.vars[3];
            assert!((post - 0.5 * pre).abs() <= 2.0 * g * spec.dt, "pre {pre} post {post}");
            checked += 1;
        }
        s = next;
    }
    assert!(checked >= 2, "expected several bounces, saw {checked}");
}

#[test]
fn static_friction_holds_block() {
    let spec = EnvSpec::new(EnvId::SlidingBlock, 32, 200).unwrap();
    let base = EnvId::SlidingBlock.preset_real_params();
    let mass = base[1];
    // Threshold: mu * m * g = F_max.
    let mu_stuck = 1.01 * BLOCK_FORCE_MAX / (mass * STANDARD_GRAVITY);
    let stuck = with(&base, 0, mu_stuck);
    for kind in [
        ControllerKind::Random,
        ControllerKind::Sinusoid,
        ControllerKind::ScriptedReach,
    ] {
        let mut rng = rng_for(3, &[]);
        let mut s = env_reset(&spec, &stuck, &mut rng).unwrap();
        let x0 = s.vars[0];
        let mut ctrl = ControllerConfig::new(kind).instantiate(&spec, 11);
        for t in 0..200 {
            let a = ctrl.act(&s, t);
            s = env_step(&spec, &s, &a, &stuck).unwrap();
            assert_eq!(s.vars[0], x0);
        }
        assert_eq!(env_step(&spec, &s, &[1.0], &stuck).unwrap().vars[0], x0);
    }
    let slippery = with(&base, 0, 0.99 * BLOCK_FORCE_MAX / (mass * STANDARD_GRAVITY));
    let s = env_reset(&spec, &slippery, &mut rng_for(3, &[])).unwrap();
    assert!(env_step(&spec, &s, &[1.0], &slippery).unwrap().vars[0] > s.vars[0]);
}

#[test]
fn extreme_parameters_saturate() {
    for env in EnvId::ALL {
        let spec = EnvSpec::default_for(env);
        let base = env.preset_real_params();
        for extreme in [crate::param::PARAM_FLOOR, 1e4] {
            let p = ParamVector::new(base.iter().map(|_| extreme).collect()).unwrap();
            let mut s = env_reset(&spec, &p, &mut rng_for(4, &[])).unwrap();
            for _ in 0..spec.episode_len {
                s = env_step(&spec, &s, &[1.0], &p).unwrap();
                assert!(s.vars.iter().all(|v| v.is_finite()));
            }
            let _ = render(&spec, &s, &p);
        }
    }
}

#[test]
fn render_is_pure_and_monotone_in_background() {
    let spec = EnvSpec::default_for(EnvId::BouncingBall);
    let p = EnvId::BouncingBall.preset_real_params();
    let s = env_reset(&spec, &p, &mut rng_for(6, &[])).unwrap();
    assert_eq!(render(&spec, &s, &p), render(&spec, &s, &p));

    let mut dark = p.values().to_vec();
    let mut light = p.values().to_vec();
    for i in 5..8 {
        dark[i] = crate::param::PARAM_FLOOR;
        light[i] = 1.0;
    }
    let dark = render(&spec, &s, &ParamVector::new(dark).unwrap());
    let light = render(&spec, &s, &ParamVector::new(light).unwrap());
    assert!(light.mean_brightness() > dark.mean_brightness());
}

#[test]
fn ball_color_is_local() {
    let spec = EnvSpec::default_for(EnvId::BouncingBall);
    let p = EnvId::BouncingBall.preset_real_params();
    let s = env_reset(&spec, &p, &mut rng_for(7, &[])).unwrap();
    let a = render(&spec, &s, &p);
    let b = render(&spec, &s, &with(&p, 2, 0.9));
    let size = spec.frame_size as f64;
    let mut changed = 0;
    for row in 0..spec.frame_size {
        for col in 0..spec.frame_size {
            let (x, y) = ((col as f64 + 0.5) / size, 1.0 - (row as f64 + 0.5) / size);
            let dist = ((x - s.vars[0]).powi(2) + (y - s.vars[1]).powi(2)).sqrt();
            // Pixel fully outside the disc, including its half-diagonal.
            if dist > BALL_RADIUS + 0.75 / size {
                assert_eq!(a.pixel(row, col), b.pixel(row, col));
            } else if a.pixel(row, col) != b.pixel(row, col) {
                changed += 1;
            }
        }
    }
    assert!(changed > 0);
}

#[test]
fn brightness_scales_every_pixel() {
    let spec = EnvSpec::default_for(EnvId::SlidingBlock);
    let p = EnvId::SlidingBlock.preset_real_params();
    let s = env_reset(&spec, &p, &mut rng_for(8, &[])).unwrap();
    let dim = render(&spec, &s, &with(&p, 2, 0.4));
    let bright = render(&spec, &s, &with(&p, 2, 0.8));
    assert!(dim.data.iter().zip(&bright.data).all(|(d, b)| d <= b));
    assert!(bright.mean_brightness() > dim.mean_brightness());
}

#[test]
fn visual_params_do_not_affect_dynamics() {
    for env in EnvId::ALL {
        let spec = EnvSpec::default_for(env);
        let p = env.preset_real_params();
        let mut q = p.values().to_vec();
        for (i, v) in q.iter_mut().enumerate() {
            if spec.schema.kind(i) == ParamKind::Visual {
                *v *= 1.7;
            }
        }
        let q = ParamVector::new(q).unwrap();
        let mut a = env_reset(&spec, &p, &mut rng_for(9, &[])).unwrap();
        let mut b = env_reset(&spec, &q, &mut rng_for(9, &[])).unwrap();
        for t in 0..spec.episode_len {
            let act = [((t as f64) * 0.3).sin()];
            a = env_step(&spec, &a, &act, &p).unwrap();
            b = env_step(&spec, &b, &act, &q).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn dynamics_params_do_not_affect_rendering() {
    for env in EnvId::ALL {
        let spec = EnvSpec::default_for(env);
        let p = env.preset_real_params();
        let s = env_reset(&spec, &p, &mut rng_for(10, &[])).unwrap();
        for i in spec.schema.dynamics_indices() {
            assert_eq!(render(&spec, &s, &p), render(&spec, &s, &with(&p, i, 2.0 * p[i])));
        }
    }
}

#[test]
fn every_dynamics_parameter_is_visible() {
    for env in EnvId::ALL {
        let spec = EnvSpec::default_for(env);
        let p = env.preset_real_params();
        let base = rollout(&spec, &p, &random_ctrl(), &mut rng_for(12, &[])).unwrap();
        for i in spec.schema.dynamics_indices() {
            let doubled = rollout(&spec, &with(&p, i, 2.0 * p[i]), &random_ctrl(), &mut rng_for(12, &[])).unwrap();
            let differs = base.frames.iter().zip(&doubled.frames).any(|(a, b)| a != b);
            assert!(differs, "{env}: doubling {} changed no pixel", spec.schema.name(i));
        }
    }
}

#[test]
fn rollout_lengths_and_determinism() {
    for len in [60, 200] {
        let spec = EnvSpec::new(EnvId::DampedPendulum, 32, len).unwrap();
        let p = EnvId::DampedPendulum.preset_real_params();
        let ctrl = ControllerConfig::new(ControllerKind::Sinusoid);
        let a = rollout(&spec, &p, &ctrl, &mut rng_for(13, &[])).unwrap();
        assert_eq!(a.frames.len(), len);
        assert_eq!(a.actions.len(), len);
        assert_eq!(a.gen_params.as_ref(), Some(&p));
        let b = rollout(&spec, &p, &ctrl, &mut rng_for(13, &[])).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn pseudo_real_hides_parameters() {
    let spec = EnvSpec::default_for(EnvId::SlidingBlock);
    let real = EnvId::SlidingBlock.preset_real_params();
    let env = PseudoRealEnv::new(spec.clone(), real.clone(), random_ctrl()).unwrap();
    let t = env.rollout(&mut rng_for(14, &[])).unwrap();
    assert!(t.gen_params.is_none());
    assert_eq!(env.hidden_truth(), &real);
    let direct = rollout(&spec, &real, &random_ctrl(), &mut rng_for(14, &[])).unwrap();
    assert_eq!(t.frames, direct.frames);
    assert_eq!(t.actions, direct.actions);
}

#[test]
fn collected_rollouts_are_reproducible() {
    let spec = EnvSpec::new(EnvId::BouncingBall, 16, 20).unwrap();
    let dist = ParamDistribution::new(EnvId::BouncingBall.preset_real_params(), 1.0).unwrap();
    let a = collect_rollouts(&spec, &dist, &random_ctrl(), 6, 42, &[1, 2]).unwrap();
    let b = collect_rollouts(&spec, &dist, &random_ctrl(), 6, 42, &[1, 2]).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|t| dist.contains(t.gen_params.as_ref().unwrap())));
    assert_ne!(a[0].gen_params, a[1].gen_params);
    // Episode i does not depend on how many episodes were requested.
    let c = collect_rollouts(&spec, &dist, &random_ctrl(), 3, 42, &[1, 2]).unwrap();
    assert_eq!(&a[..3], &c[..]);
}

#[test]
fn ppm_dump_has_header_and_payload() {
    let dir = tempfile::tempdir().unwrap();
    let spec = EnvSpec::new(EnvId::BouncingBall, 16, 10).unwrap();
    let p = EnvId::BouncingBall.preset_real_params();
    let s = env_reset(&spec, &p, &mut rng_for(15, &[])).unwrap();
    let f = render(&spec, &s, &p);
    let path = dir.path().join("f.ppm");
    write_ppm(&f, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P6\n16 16\n255\n"));
    assert_eq!(bytes.len(), 13 + 16 * 16 * 3);
}

proptest! {
    #[test]
    fn controllers_emit_bounded_actions(seed in any::<u64>(), kind in 0usize..3, env in 0usize..3) {
        let kind = [ControllerKind::Random, ControllerKind::Sinusoid, ControllerKind::ScriptedReach][kind];
        let env = EnvId::ALL[env];
        let spec = EnvSpec::default_for(env);
        let p = env.preset_real_params();
        let mut rng = rng_for(seed, &[]);
        let mut s = env_reset(&spec, &p, &mut rng).unwrap();
        let mut c = ControllerConfig::new(kind).instantiate(&spec, seed);
        for t in 0..spec.episode_len {
            let a = c.act(&s, t);
            prop_assert_eq!(a.len(), spec.action_dim);
            prop_assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
            s = env_step(&spec, &s, &a, &p).unwrap();
        }
    }
}
