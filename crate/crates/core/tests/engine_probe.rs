// Temporary probe: cross-checks MC vs analytic and times the hot paths.

use std::time::Instant;

use hetcov_core::association::AssocCriterion;
use hetcov_core::montecarlo::{quantile, SimOptions, Simulator};
use hetcov_core::params::db_to_linear;
use hetcov_core::{Analysis, Direction, SystemParams};

#[test]
#[ignore]
fn probe_assoc_and_coverage() {
    let mut p = SystemParams::table_i();
    p.g_s_max = db_to_linear(23.0);
    p.lambda_s = 10.0 * p.lambda_m;
    let analysis = Analysis::new(p.clone()).unwrap();
    let a_dl = analysis.assoc_brp(Direction::Dl).unwrap();
    let a_ul = analysis.assoc_brp(Direction::Ul).unwrap();
    println!("analytic assoc dl_scell={:.4} ul_scell={:.4}", a_dl.p_scell, a_ul.p_scell);

    let t0 = Instant::now();
    let sim = Simulator::new(
        p.clone(),
        SimOptions {
            n_drops: 20_000,
            seed: 42,
            ..SimOptions::default()
        },
    )
    .unwrap();
    let e = sim.empirical_assoc(AssocCriterion::MaxBrp);
    println!(
        "mc assoc dl_scell={:.4} [{:.4},{:.4}] ul_scell={:.4} gain={:.4}  ({:.2?})",
        e.dl_scell.p, e.dl_scell.ci_low, e.dl_scell.ci_high, e.ul_scell.p, e.decoupling_gain.p,
        t0.elapsed()
    );

    // Max-Rate DL analytic vs MC
    let b_dl = analysis.assoc_rate(Direction::Dl).unwrap();
    let t1 = Instant::now();
    let sim_small = Simulator::new(
        p.clone(),
        SimOptions {
            n_drops: 4_000,
            seed: 7,
            ..SimOptions::default()
        },
    )
    .unwrap();
    let er = sim_small.empirical_assoc(AssocCriterion::MaxRate);
    println!(
        "max-rate dl: analytic p_scell={:.4}, mc={:.4} [{:.4},{:.4}] ul mc={:.4} ({:.2?})",
        b_dl.p_scell, er.dl_scell.p, er.dl_scell.ci_low, er.dl_scell.ci_high, er.ul_scell.p,
        t1.elapsed()
    );
}

#[test]
#[ignore]
fn probe_coverage_and_timing() {
    let p = SystemParams::table_i().with_coupled_ul_bias();
    let analysis = Analysis::new(p.clone()).unwrap();

    let t0 = Instant::now();
    let cov_dl = analysis.sinr_coverage(Direction::Dl, 1.0).unwrap();
    println!("analytic cov dl @0dB: m={:.4} s={:.4} tot={:.4} ({:.2?})", cov_dl.mcell, cov_dl.scell, cov_dl.total(), t0.elapsed());
    let t0 = Instant::now();
    let cov_ul = analysis.sinr_coverage(Direction::Ul, 1.0).unwrap();
    println!("analytic cov ul @0dB: tot={:.4} ({:.2?})", cov_ul.total(), t0.elapsed());

    let t0 = Instant::now();
    let rate = analysis.rate_coverage(Direction::Dl, 1e6).unwrap();
    println!("analytic rate cov dl @1e6: {:.4} ({:.2?})", rate.total(), t0.elapsed());

    let n = 2_000;
    let t0 = Instant::now();
    let sim = Simulator::new(p.clone(), SimOptions { n_drops: n, seed: 11, ..SimOptions::default() }).unwrap();
    let samples = sim.link_samples();
    let dt = t0.elapsed();
    println!("{} full drops in {:.2?} -> {:.2} ms/drop (wall, 2 threads)", n, dt, dt.as_secs_f64() * 1e3 / n as f64);

    let covered_dl = samples.iter().filter(|s| s.dl.sinr.unwrap_or(s.dl.snr) > 1.0).count() as f64 / n as f64;
    let covered_ul = samples.iter().filter(|s| s.ul.sinr.unwrap_or(s.ul.snr) > 1.0).count() as f64 / n as f64;
    println!("mc cov @0dB: dl={covered_dl:.4} ul={covered_ul:.4}");

    let mut rates_dl: Vec<f64> = samples.iter().map(|s| s.dl.rate_bps).collect();
    rates_dl.sort_by(f64::total_cmp);
    let mc_rate_cov = rates_dl.iter().filter(|&&r| r > 1e6).count() as f64 / n as f64;
    println!("mc rate cov dl @1e6: {mc_rate_cov:.4}; p5 rate = {:.3e}", quantile(&rates_dl, 0.05));

    let t0 = Instant::now();
    let p5 = analysis.percentile_rate(Direction::Dl, 0.95).unwrap();
    println!("analytic p5 rate dl = {:.3e} ({:.2?})", p5, t0.elapsed());
}
