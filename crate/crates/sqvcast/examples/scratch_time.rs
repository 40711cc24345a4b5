//! temporary: time one sarima candidate + one EM fit
use sqvcast::benchmarks::{sarima_fit, SarimaGrid};
use sqvcast::em::{fit, EmConfig};
use sqvcast::month::MonthStamp;
use sqvcast::series::{demean, MonthlySeries};
use sqvcast::synthetic::{paper_like_config, simulate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    // time sarima single heavy candidate grid
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut y = vec![0.0; 312];
    for t in 1..312 { y[t] = 0.8 * y[t-1] + normal.sample(&mut rng); }
    for t in 12..312 { y[t] += y[t-12] * 0.0 + (t % 12) as f64; }
    let train = MonthlySeries::from_values(MonthStamp::new(2000,1).unwrap(), y[12..].to_vec()).unwrap();
    let heavy = SarimaGrid { p_max: 2, d_max: 1, q_max: 2, sp_max: 1, sd_max: 1, sq_max: 1 };
    let t0 = std::time::Instant::now();
    let out = sarima_fit(&train, &heavy, 6, 0.95).unwrap();
    println!("full 144-grid sarima fit: {:.2?} ({:?})", t0.elapsed(), match &out.model_meta { sqvcast::benchmarks::ModelMeta::Sarima{order,..} => order.to_string(), _ => unreachable!() });

    // time EM fit at T=500 a=11
    let cfg = paper_like_config(11, 500, 3);
    let sim = simulate(&cfg).unwrap();
    let panel = demean(&sim.panel, sim.panel.end()).unwrap();
    let em = EmConfig { seed: 3, ..EmConfig::default() };
    let t1 = std::time::Instant::now();
    let report = fit(&panel, 11, &em).unwrap();
    println!("EM fit T=500 a=11: {:.2?}, ll={:.2}, iters={}, beta_hat={:.2}", t1.elapsed(), report.loglik, report.iterations_used,
        report.ci_for("beta").unwrap().estimate);
}
