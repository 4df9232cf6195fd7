//! SINR/SNR coverage (Max-BRP association), the fractional-power-control
//! uplink variant, the mean-load approximation and rate coverage with
//! percentile extraction.

use serde::Serialize;

use crate::association::Analysis;
use crate::numerics::{self, NumericsError, QuadratureSpec};
use crate::{Direction, Tier};

/// Per-tier coverage probabilities; the headline number is their sum.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoverageComponents {
    pub mcell: f64,
    pub scell: f64,
}

impl CoverageComponents {
    pub fn total(&self) -> f64 {
        self.mcell + self.scell
    }
}

/// Mean UEs per serving cell for one direction.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LoadModel {
    pub n_mcell: f64,
    pub n_scell: f64,
}

impl Analysis {
    /// `Int_1^inf s^{2/alpha - 1} / (1 + s/tau) ds`, the l-independent part
    /// of the interference Laplace exponent. Evaluated as
    /// `tau^{2/alpha} Int_{1/tau}^inf x^{2/alpha-1}/(1+x) dx` so the knee
    /// stays at x = 1 for every threshold.
    fn laplace_tail(&self, tau: f64) -> Result<f64, NumericsError> {
        if tau == 0.0 {
            return Ok(0.0);
        }
        let alpha = self.params().alpha_m;
        let expo = 2.0 / alpha - 1.0;
        let lo = (1.0 / tau).min(1e300);
        let integral = numerics::integrate_with_breaks(
            |x| x.powf(expo) / (1.0 + x),
            lo,
            f64::INFINITY,
            &[1.0],
            &QuadratureSpec::inner(),
        )?;
        Ok(tau.powf(2.0 / alpha) * integral)
    }

    fn sinr_coverage_mcell(&self, direction: Direction, tau: f64) -> Result<f64, NumericsError> {
        let p = self.params();
        let d = self.derived();
        let a = self.weight(direction);
        let noise_coef = tau * d.sigma2_m / (self.tx_power(direction, Tier::Mcell) * d.psi_m);
        let alpha = p.alpha_m;
        let lap_coef = 2.0 * std::f64::consts::PI * p.lambda_m / alpha * self.laplace_tail(tau)?;
        let scell = *self.pathloss(Tier::Scell);
        let (b_l, b_n) = scell.breakpoints();
        let g = move |l: f64| {
            (-noise_coef * l - lap_coef * l.powf(2.0 / alpha)).exp() * scell.ccdf_unchecked(a * l)
        };
        self.pathloss(Tier::Mcell).integrate_pdf_weighted(
            g,
            &[b_l / a, b_n / a],
            &QuadratureSpec::outer(),
        )
    }

    fn sinr_coverage_scell(&self, direction: Direction, tau: f64) -> Result<f64, NumericsError> {
        let d = self.derived();
        let a = self.weight(direction);
        let noise_coef = tau * d.sigma2_s / (self.tx_power(direction, Tier::Scell) * d.psi_s);
        let mcell = *self.pathloss(Tier::Mcell);
        let g = move |l: f64| (-noise_coef * l).exp() * mcell.ccdf_unchecked(l / a);
        self.pathloss(Tier::Scell)
            .integrate_pdf_weighted(g, &[], &QuadratureSpec::outer())
    }

    /// SINR (sub-6GHz) / SNR (mmWave) coverage at linear threshold `tau`
    /// under Max-BRP association: the sub-6GHz term couples the noise
    /// exponential, the interference Laplace transform and the stay-on-tier
    /// factor; the mmWave term is noise-limited.
    pub fn sinr_coverage(
        &self,
        direction: Direction,
        tau: f64,
    ) -> Result<CoverageComponents, NumericsError> {
        if tau < 0.0 || tau.is_nan() {
            return Err(NumericsError::Domain(format!(
                "threshold must be >= 0, got {tau}"
            )));
        }
        if !tau.is_finite() {
            return Ok(CoverageComponents {
                mcell: 0.0,
                scell: 0.0,
            });
        }
        Ok(CoverageComponents {
            mcell: self.sinr_coverage_mcell(direction, tau)?,
            scell: self.sinr_coverage_scell(direction, tau)?,
        })
    }

    /// UL coverage with fractional pathloss-compensation power control: UEs
    /// transmit at `P * L^epsilon`, so the noise exponents carry `l^{1-eps}`
    /// and the interference term averages over each interferer's own
    /// serving-link pathloss.
    pub fn sinr_coverage_pc(
        &self,
        tau: f64,
        epsilon: f64,
    ) -> Result<CoverageComponents, NumericsError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(NumericsError::Domain(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        if tau < 0.0 || tau.is_nan() {
            return Err(NumericsError::Domain(format!(
                "threshold must be >= 0, got {tau}"
            )));
        }
        let p = self.params();
        let d = self.derived();
        let a = self.weight(Direction::Ul);
        let alpha = p.alpha_m;
        let pi_lambda = std::f64::consts::PI * p.lambda_m;
        let half_alpha = alpha / 2.0;

        // Scell term: only the noise exponent changes.
        let scell_noise = tau * d.sigma2_s / (p.p_us * d.psi_s);
        let mcell_tier = *self.pathloss(Tier::Mcell);
        let scell_term = self.pathloss(Tier::Scell).integrate_pdf_weighted(
            move |l| (-scell_noise * l.powf(1.0 - epsilon)).exp() * mcell_tier.ccdf_unchecked(l / a),
            &[],
            &QuadratureSpec::outer(),
        )?;

        // Mcell term: expectation over the interferer's serving pathloss u,
        // then the radial interference integral, then the serving pathloss.
        let inner_spec = QuadratureSpec {
            rel_tol: 1e-7,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
        };
        let middle_spec = QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
        };
        let mcell_noise = tau * d.sigma2_m / (p.p_um * d.psi_m);
        let scell_tier = *self.pathloss(Tier::Scell);
        let (b_l, b_n) = scell_tier.breakpoints();

        let interferer_mean = move |s: f64, l: f64| -> f64 {
            // E_u[1 / (1 + tau (u/l)^eps / s)] with u ~ Mcell pathloss density
            numerics::integrate(
                |v: f64| {
                    let u = (v / pi_lambda).powf(half_alpha);
                    (-v).exp() / (1.0 + tau * (u / l).powf(epsilon) / s)
                },
                0.0,
                40.0,
                &inner_spec,
            )
            .unwrap_or(f64::NAN)
        };
        let radial_exponent = move |l: f64| -> f64 {
            let tail = numerics::integrate(
                |s: f64| (1.0 - interferer_mean(s, l)) * s.powf(2.0 / alpha - 1.0),
                1.0,
                f64::INFINITY,
                &middle_spec,
            )
            .unwrap_or(f64::NAN);
            l.powf(2.0 / alpha) * tail
        };
        let g = move |l: f64| {
            (-mcell_noise * l.powf(1.0 - epsilon)
                - 2.0 * pi_lambda / alpha * radial_exponent(l))
            .exp()
                * scell_tier.ccdf_unchecked(a * l)
        };
        let mcell_term = self.pathloss(Tier::Mcell).integrate_pdf_weighted(
            g,
            &[b_l / a, b_n / a],
            &QuadratureSpec {
                rel_tol: 1e-5,
                abs_tol: 1e-10,
                max_subdivisions: 2000,
            },
        )?;

        Ok(CoverageComponents {
            mcell: mcell_term,
            scell: scell_term,
        })
    }

    /// Mean UEs on a serving cell of `tier` given its association
    /// probability: `1 + 1.28 lambda_u prob / lambda_tier`.
    pub fn mean_load(&self, tier: Tier, assoc_prob: f64) -> Result<f64, NumericsError> {
        if !(0.0..=1.0).contains(&assoc_prob) {
            return Err(NumericsError::Domain(format!(
                "association probability must lie in [0, 1], got {assoc_prob}"
            )));
        }
        let p = self.params();
        let lambda = match tier {
            Tier::Mcell => p.lambda_m,
            Tier::Scell => p.lambda_s,
        };
        Ok(1.0 + 1.28 * p.lambda_u * assoc_prob / lambda)
    }

    /// Mean loads for both tiers in `direction`, using Max-BRP association
    /// probabilities.
    pub fn loads(&self, direction: Direction) -> Result<LoadModel, NumericsError> {
        let assoc = self.assoc_brp(direction)?;
        Ok(LoadModel {
            n_mcell: self.mean_load(Tier::Mcell, assoc.p_mcell)?,
            n_scell: self.mean_load(Tier::Scell, assoc.p_scell)?,
        })
    }

    /// Rate coverage `P(R > rho)`: per-tier SINR coverage at the
    /// load-and-bandwidth-mapped thresholds `2^{rho N / W} - 1`.
    pub fn rate_coverage(
        &self,
        direction: Direction,
        rate_bps: f64,
    ) -> Result<CoverageComponents, NumericsError> {
        let loads = self.loads(direction)?;
        self.rate_coverage_with_loads(direction, rate_bps, &loads)
    }

    /// [`Self::rate_coverage`] with externally supplied loads.
    pub fn rate_coverage_with_loads(
        &self,
        direction: Direction,
        rate_bps: f64,
        loads: &LoadModel,
    ) -> Result<CoverageComponents, NumericsError> {
        if !(rate_bps > 0.0) {
            return Err(NumericsError::Domain(format!(
                "rate threshold must be > 0, got {rate_bps}"
            )));
        }
        let p = self.params();
        let tau_m = (rate_bps * loads.n_mcell / p.w_m * std::f64::consts::LN_2).exp_m1();
        let tau_s = (rate_bps * loads.n_scell / p.w_s * std::f64::consts::LN_2).exp_m1();
        let mcell = if tau_m.is_finite() {
            self.sinr_coverage_mcell(direction, tau_m)?
        } else {
            0.0
        };
        let scell = if tau_s.is_finite() {
            self.sinr_coverage_scell(direction, tau_s)?
        } else {
            0.0
        };
        Ok(CoverageComponents { mcell, scell })
    }

    /// Rate at which the rate-coverage CCDF crosses `p` (e.g. `p = 0.95`
    /// gives the 5th-percentile rate), bisected on a log grid to a 1%
    /// bracket.
    pub fn percentile_rate(&self, direction: Direction, p: f64) -> Result<f64, NumericsError> {
        if !(0.0 < p && p < 1.0) {
            return Err(NumericsError::Domain(format!(
                "percentile level must lie in (0, 1), got {p}"
            )));
        }
        let loads = self.loads(direction)?;
        invert_monotone_ccdf(
            |rate| Ok(self.rate_coverage_with_loads(direction, rate, &loads)?.total()),
            1e3,
            1e11,
            p,
            0.01,
        )
    }

    /// SINR threshold (linear) at which the SINR-coverage CCDF crosses `p`.
    pub fn percentile_sinr(&self, direction: Direction, p: f64) -> Result<f64, NumericsError> {
        if !(0.0 < p && p < 1.0) {
            return Err(NumericsError::Domain(format!(
                "percentile level must lie in (0, 1), got {p}"
            )));
        }
        invert_monotone_ccdf(
            |tau| Ok(self.sinr_coverage(direction, tau)?.total()),
            1e-9,
            1e9,
            p,
            0.01,
        )
    }
}

/// Log-domain bisection of a nonincreasing CCDF-like function: finds `x`
/// with `f(x) = target` to within a `rel_bracket`-wide bracket.
pub(crate) fn invert_monotone_ccdf<F>(
    f: F,
    lo: f64,
    hi: f64,
    target: f64,
    rel_bracket: f64,
) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> Result<f64, NumericsError>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo < target || f_hi > target {
        return Err(NumericsError::Domain(format!(
            "target {target} outside achievable range [{f_hi:.6}, {f_lo:.6}] on [{lo:.3e}, {hi:.3e}]"
        )));
    }
    let mut lo = lo;
    let mut hi = hi;
    while hi / lo > 1.0 + rel_bracket {
        let mid = (lo * hi).sqrt();
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
