//! Annealed variational sweeps on random labels.

use taskinfo::models::Architecture;
use taskinfo::tasks::{generate_random_label_task, Encoding, InputDomain};
use taskinfo::variational::{structure_sweep, IsotropicPrior, VariationalConfig};

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// The fit is restricted to the memorization regime, where the expected loss
// is between 10% and 90% of the trivial N ln K. The slope of the mean-field
// trade-off depends on the prior scale; lambda = 30 is the configured value.
#[test]
fn random_label_tradeoff_has_unit_slope() {
    let n = 100;
    let d = generate_random_label_task(n, InputDomain::Discrete(1024), 2, 5)
        .unwrap()
        .encode(Encoding::OneHotBits);
    let arch = Architecture::linear(d.domain().feature_dim(), 2).unwrap();
    let prior = IsotropicPrior::new(30.0).unwrap();
    let cfg = VariationalConfig {
        learning_rate: 0.05,
        steps: 300,
        report_mc_samples: 256,
        seed: 1,
        ..VariationalConfig::default()
    };
    let betas: Vec<f64> = (0..25).map(|i| 10f64.powf(1.5 - 0.125 * i as f64)).collect();
    let sweep = structure_sweep(&d, &arch, &betas, &prior, &cfg).unwrap();
    let top = n as f64 * 2f64.ln();
    let pts: Vec<(f64, f64)> = sweep
        .tradeoff()
        .into_iter()
        .filter(|&(_, loss)| loss > 0.1 * top && loss < 0.9 * top)
        .collect();
    assert!(pts.len() >= 5, "only {} points in the memorization regime", pts.len());
    let slope = least_squares_slope(&pts);
    assert!((slope + 1.0).abs() <= 0.2, "slope {slope:.3} over {} points", pts.len());
}
