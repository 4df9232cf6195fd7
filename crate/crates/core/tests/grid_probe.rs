// Temporary probe: full tau-grid SINR CCDF agreement at acceptance scale.

use hetcov_core::montecarlo::{SimOptions, Simulator};
use hetcov_core::{Analysis, Direction, SystemParams};

#[test]
#[ignore]
fn probe_sinr_grid() {
    let p = SystemParams::table_i().with_coupled_ul_bias();
    let analysis = Analysis::new(p.clone()).unwrap();
    let sim = Simulator::new(
        p,
        SimOptions {
            n_drops: 20_000,
            seed: 2024,
            ..SimOptions::default()
        },
    )
    .unwrap();
    let t0 = std::time::Instant::now();
    let samples = sim.link_samples();
    println!("20k drops in {:.1?}", t0.elapsed());
    let n = samples.len() as f64;
    for dir in Direction::BOTH {
        let mut worst = (0.0f64, 0.0f64);
        for tau_db_i in (-10..=30).step_by(2) {
            let tau = 10f64.powf(tau_db_i as f64 / 10.0);
            let analytic = analysis.sinr_coverage(dir, tau).unwrap().total();
            let mc = samples
                .iter()
                .filter(|s| {
                    let l = match dir {
                        Direction::Dl => &s.dl,
                        Direction::Ul => &s.ul,
                    };
                    l.sinr.unwrap_or(l.snr) > tau
                })
                .count() as f64
                / n;
            let gap = mc - analytic;
            if gap.abs() > worst.1.abs() {
                worst = (tau_db_i as f64, gap);
            }
            if tau_db_i % 10 == 0 {
                println!("{dir} {tau_db_i:>4} dB: analytic {analytic:.4} mc {mc:.4} gap {gap:+.4}");
            }
        }
        println!("{dir}: worst gap {:+.4} at {} dB", worst.1, worst.0);
    }
}
