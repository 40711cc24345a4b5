//! temporary scratch: sarima selection sanity + timing
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sqvcast::benchmarks::{sarima_fit, ModelMeta, SarimaGrid};
use sqvcast::month::MonthStamp;
use sqvcast::series::MonthlySeries;

fn simulate_sar(seed: u64, n: usize, ar: f64) -> Vec<f64> {
    // (1,0,0)(0,1,0)_12: w_t = y_t - y_{t-12}; w_t = ar*w_{t-1} + e_t
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let burn = 120;
    let total = n + burn;
    let mut w = vec![0.0; total];
    for t in 1..total {
        w[t] = ar * w[t - 1] + normal.sample(&mut rng);
    }
    let mut y = vec![0.0; total];
    for t in 0..total {
        y[t] = w[t] + if t >= 12 { y[t - 12] } else { 0.0 };
    }
    y[burn..].to_vec()
}

fn white_noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

fn main() {
    let grid = SarimaGrid::default();
    let t0 = std::time::Instant::now();
    let mut hits = 0;
    for seed in 0..10u64 {
        let data = simulate_sar(seed, 300, 0.8);
        let train = MonthlySeries::from_values(MonthStamp::new(2000, 1).unwrap(), data).unwrap();
        let out = sarima_fit(&train, &grid, 6, 0.95).unwrap();
        let ModelMeta::Sarima { order, .. } = &out.model_meta else { panic!() };
        let ok = order.p >= 1 && order.sd == 1;
        if ok { hits += 1; }
        println!("seed {seed}: selected {order} ok={ok}");
    }
    println!("AR+D selection: {hits}/10 in {:.1?}", t0.elapsed());

    let t1 = std::time::Instant::now();
    let mut null_hits = 0;
    for seed in 100..110u64 {
        let data = white_noise(seed, 200);
        let train = MonthlySeries::from_values(MonthStamp::new(2000, 1).unwrap(), data).unwrap();
        let out = sarima_fit(&train, &grid, 6, 0.95).unwrap();
        let ModelMeta::Sarima { order, .. } = &out.model_meta else { panic!() };
        let ok = order.p == 0 && order.d == 0 && order.q == 0 && order.sp == 0 && order.sd == 0 && order.sq == 0;
        if ok { null_hits += 1; }
        println!("seed {seed}: selected {order} ok={ok}");
    }
    println!("null selection: {null_hits}/10 in {:.1?}", t1.elapsed());
}
