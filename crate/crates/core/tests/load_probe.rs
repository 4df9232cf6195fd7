// Temporary probe: decomposes the rate-coverage gap into load-mixture vs
// SINR effects.

use hetcov_core::montecarlo::{SimOptions, Simulator};
use hetcov_core::{Analysis, Direction, SystemParams, Tier};

#[test]
#[ignore]
fn probe_load_and_rate_gap() {
    let p = SystemParams::table_i().with_coupled_ul_bias();
    let analysis = Analysis::new(p.clone()).unwrap();
    let assoc = analysis.assoc_brp(Direction::Dl).unwrap();
    let loads = analysis.loads(Direction::Dl).unwrap();
    println!("analytic: A_m={:.4} N_m={:.2} N_s={:.3}", assoc.p_mcell, loads.n_mcell, loads.n_scell);

    let sim = Simulator::new(
        p.clone(),
        SimOptions { n_drops: 10_000, seed: 3, ..SimOptions::default() },
    )
    .unwrap();
    let samples = sim.link_samples();
    let n = samples.len() as f64;

    let m_served: Vec<_> = samples.iter().filter(|s| s.dl.serving == Tier::Mcell).collect();
    let s_served: Vec<_> = samples.iter().filter(|s| s.dl.serving == Tier::Scell).collect();
    let mean_load_m = m_served.iter().map(|s| s.dl.load as f64).sum::<f64>() / m_served.len() as f64;
    let mean_load_s = s_served.iter().map(|s| s.dl.load as f64).sum::<f64>() / s_served.len() as f64;
    println!(
        "mc: p_m={:.4} mean serving load m={mean_load_m:.2} s={mean_load_s:.3}",
        m_served.len() as f64 / n
    );

    for rho in [1e5, 3e5, 1e6, 3e6, 1e7, 1e8, 1e9] {
        let analytic = analysis.rate_coverage(Direction::Dl, rho).unwrap().total();
        let mc = samples.iter().filter(|s| s.dl.rate_bps > rho).count() as f64 / n;
        // hybrid: realized SINR, mean loads
        let hybrid = samples
            .iter()
            .filter(|s| {
                let (w, nn, sinr) = match s.dl.serving {
                    Tier::Mcell => (p.w_m, loads.n_mcell, s.dl.sinr.unwrap()),
                    Tier::Scell => (p.w_s, loads.n_scell, s.dl.snr),
                };
                w / nn * (1.0 + sinr).log2() > rho
            })
            .count() as f64
            / n;
        println!(
            "rho {rho:>9.0e}: analytic {analytic:.4}  mc {mc:.4} (gap {:+.4})  hybrid {hybrid:.4} (gap {:+.4})",
            mc - analytic,
            hybrid - analytic
        );
    }
}
