//! Simulate a panel from the bundled scenario, fit the coupled model by EM,
//! and print estimates with confidence intervals.

use sqvcast::em::{fit, EmConfig, FittedParams};
use sqvcast::series::demean;
use sqvcast::synthetic::{paper_like_config, simulate};

fn main() -> sqvcast::Result<()> {
    let config = paper_like_config(11, 117, 1);
    let sim = simulate(&config)?;
    let cutoff = sim.panel.end();
    let panel = demean(&sim.panel, cutoff)?;

    let em = EmConfig {
        seed: 1,
        ..EmConfig::default()
    };
    let t0 = std::time::Instant::now();
    let report = fit(&panel, 11, &em)?;
    let elapsed = t0.elapsed();

    println!(
        "log-likelihood {:.3} after {} iterations (converged: {}) in {:.1?}",
        report.loglik, report.iterations_used, report.converged, elapsed
    );
    let FittedParams::Coupled { params, .. } = &report.params else {
        unreachable!("coupled fit");
    };
    println!("\n{:<12}{:>14}{:>14}{:>14}{:>14}", "param", "true", "estimate", "lower", "upper");
    let truth = [
        ("beta", config.params.beta),
        ("sigma2_y1", config.params.sigma2_y1),
        ("sigma2_y2", config.params.sigma2_y2),
        ("sigma2_x1", config.params.sigma2_x1),
        ("sigma2_x2", config.params.sigma2_x2),
    ];
    for (name, true_value) in truth {
        let ci = report.ci_for(name).expect("ci present");
        println!(
            "{:<12}{:>14.4}{:>14.4}{:>14.4}{:>14.4}",
            name, true_value, ci.estimate, ci.lower, ci.upper
        );
    }
    let _ = params;

    let decreases = report
        .loglik_trace
        .windows(2)
        .filter(|w| w[1] < w[0] - 1e-8 * (1.0 + w[0].abs()))
        .count();
    println!("\ntrace length {} with {} decreases", report.loglik_trace.len(), decreases);
    Ok(())
}
