use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fqra_core::factor::{extract_factors_via, FactorRoute};
use fqra_core::point::{rolling_forecast, Market, ModelSpec};
use fqra_core::prob::{fqr_forecast, FqrMode, FqrSpec};
use fqra_core::quantile::qr_fit;
use fqra_core::synthetic::{generate_synthetic, SyntheticSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noise(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn quantile_regression(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("qr_fit");
    for (n, k) in [(182, 6), (4368, 1), (4368, 6)] {
        let x = DMatrix::from_fn(n, k, |_, _| noise(&mut rng));
        let y: Vec<f64> = (0..n).map(|i| x.row(i).sum() + noise(&mut rng)).collect();
        group.bench_function(format!("n{n}_k{k}_median"), |b| b.iter(|| qr_fit(&x, &y, 0.5).unwrap()));
    }
    group.finish();
}

fn factors(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("extract_factors");
    for n in [19, 673] {
        let m = DMatrix::from_fn(4392, n, |_, _| noise(&mut rng));
        group.bench_function(format!("t4392_n{n}_cross"), |b| {
            b.iter(|| extract_factors_via(&m, 6, FactorRoute::Cross).unwrap())
        });
    }
    group.sample_size(10);
    let m = DMatrix::from_fn(400, 300, |_, _| noise(&mut rng));
    group.bench_function("t400_n300_time", |b| b.iter(|| extract_factors_via(&m, 6, FactorRoute::Time).unwrap()));
    group.finish();
}

fn fqr(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t_len = 24 * 183;
    let common: Vec<f64> = (0..t_len).map(|_| noise(&mut rng)).collect();
    let window = DMatrix::from_fn(t_len, 19, |t, _| common[t] + 0.2 * noise(&mut rng));
    let y: Vec<f64> = (0..24 * 182).map(|t| common[t] + 0.5 * noise(&mut rng)).collect();
    let mut group = c.benchmark_group("fqr_forecast");
    group.sample_size(10);
    for (name, mode, std) in [("sFQRA", FqrMode::Fqra, true), ("sFQRM", FqrMode::Fqrm, true)] {
        let spec = FqrSpec::new(mode, std);
        group.bench_function(name, |b| b.iter(|| fqr_forecast(&window, &y, &spec).unwrap()));
    }
    group.finish();
}

fn point(c: &mut Criterion) {
    let spec = SyntheticSpec {
        n_days: 260,
        ..Default::default()
    };
    let panel = generate_synthetic(&spec, 4).unwrap();
    let model = ModelSpec::new(Market::Da, true);
    let taus: Vec<usize> = (56..=200).step_by(8).collect();
    let mut group = c.benchmark_group("rolling_forecast");
    group.sample_size(10);
    group.bench_function("desk_windows_one_day", |b| {
        b.iter_batched(|| (), |_| rolling_forecast(&panel, &model, &taus, 207..208).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, quantile_regression, factors, fqr, point);
criterion_main!(benches);
