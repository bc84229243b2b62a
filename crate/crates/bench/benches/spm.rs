use criterion::{criterion_group, criterion_main, Criterion};
use simtune_core::envs::{collect_rollouts, ControllerConfig};
use simtune_core::nn::AdamState;
use simtune_core::seed::rng_for;
use simtune_core::spm::{train_spm, TrainOptions};
use simtune_core::{EnvId, EnvSpec, ParamDistribution, SpmConfig, SpmModel, Trajectory};

fn setup(env: EnvId) -> (SpmModel, Vec<Trajectory>, simtune_core::ParamVector) {
    let spec = EnvSpec::default_for(env);
    let mean = env.preset_real_params();
    let dist = ParamDistribution::new(mean.clone(), 1.0).unwrap();
    let trajs = collect_rollouts(&spec, &dist, &ControllerConfig::default(), 64, 0, &[1]).unwrap();
    let model = SpmModel::new(SpmConfig::default(), &spec, &mean, &mut rng_for(0, &[2])).unwrap();
    (model, trajs, mean)
}

fn train_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("spm_train_step_b128");
    group.sample_size(20);
    for env in [EnvId::BouncingBall, EnvId::SlidingBlock] {
        let (mut model, trajs, mean) = setup(env);
        let buffer: Vec<&Trajectory> = trajs.iter().collect();
        let mut adam = AdamState::new(model.config().adam);
        let opts = TrainOptions {
            steps: 1,
            ..TrainOptions::default()
        };
        let mut rng = rng_for(0, &[3]);
        group.bench_function(env.as_str(), |b| {
            b.iter(|| train_spm(&mut model, &mut adam, &buffer, &mean, &opts, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn predict(c: &mut Criterion) {
    let (mut model, trajs, mean) = setup(EnvId::BouncingBall);
    c.bench_function("spm_predict_trajectory", |b| {
        b.iter(|| model.predict(&trajs[0], mean.values()).unwrap())
    });
}

criterion_group!(benches, train_step, predict);
criterion_main!(benches);
