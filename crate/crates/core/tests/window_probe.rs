// Temporary probe: quantifies interference truncation bias vs window size.

use hetcov_core::montecarlo::{SimOptions, Simulator};
use hetcov_core::{Analysis, Direction, SystemParams};

fn dl_coverage_at(window: f64, n: usize, lambda_u: f64) -> (f64, f64) {
    let mut p = SystemParams::table_i().with_coupled_ul_bias();
    p.lambda_u = lambda_u;
    let sim = Simulator::new(
        p,
        SimOptions {
            n_drops: n,
            seed: 77,
            window_radius: window,
            ..SimOptions::default()
        },
    )
    .unwrap();
    let t0 = std::time::Instant::now();
    let samples = sim.link_samples();
    let cov = samples
        .iter()
        .filter(|s| s.dl.sinr.unwrap_or(s.dl.snr) > 1.0)
        .count() as f64
        / n as f64;
    (cov, t0.elapsed().as_secs_f64())
}

#[test]
#[ignore]
fn probe_window_sensitivity() {
    let p = SystemParams::table_i().with_coupled_ul_bias();
    let analysis = Analysis::new(p).unwrap();
    let analytic = analysis.sinr_coverage(Direction::Dl, 1.0).unwrap().total();
    println!("analytic dl cov @0dB = {analytic:.4}");
    for window in [3_000.0, 6_000.0, 12_000.0] {
        let (cov, secs) = dl_coverage_at(window, 20_000, 1e-12);
        println!(
            "window {:>5} m: mc cov = {cov:.4} (gap {:+.4}) in {secs:.1}s",
            window,
            cov - analytic
        );
    }
}
