//! Propagation (pathloss) point processes for both tiers: intensity
//! measures, CCDFs and PDFs of the pathloss from the typical UE to each
//! tier's base stations.
//!
//! The mmWave tier has three branches separated by the LOS-ball
//! breakpoints `mu^alpha_l` and `mu^alpha_n`; the sub-6GHz tier is
//! single-slope. The Mcell density is implemented with the decaying
//! exponent `exp(-pi lambda t^{2/alpha})` so that it integrates to one and
//! equals `-d/dt ccdf`.

use crate::numerics::{integrate_with_breaks, NumericsError, QuadratureSpec};
use crate::params::SystemParams;
use crate::Tier;

/// Evaluators for one tier's pathloss process.
///
/// Copies the handful of parameters it needs so it stays `Copy` and
/// thread-safe.
#[derive(Clone, Copy, Debug)]
pub struct PathlossTier {
    tier: Tier,
    lambda: f64,
    /// LOS exponent (Scell); for Mcell both exponents equal `alpha_m`.
    alpha_l: f64,
    /// NLOS exponent (Scell) or `alpha_m` (Mcell).
    alpha_n: f64,
    omega: f64,
    mu: f64,
}

impl PathlossTier {
    pub fn new(tier: Tier, params: &SystemParams) -> Self {
        match tier {
            Tier::Mcell => Self {
                tier,
                lambda: params.lambda_m,
                alpha_l: params.alpha_m,
                alpha_n: params.alpha_m,
                omega: 0.0,
                mu: params.mu,
            },
            Tier::Scell => Self {
                tier,
                lambda: params.lambda_s,
                alpha_l: params.alpha_l,
                alpha_n: params.alpha_n,
                omega: params.omega,
                mu: params.mu,
            },
        }
    }

    pub fn mcell(params: &SystemParams) -> Self {
        Self::new(Tier::Mcell, params)
    }

    pub fn scell(params: &SystemParams) -> Self {
        Self::new(Tier::Scell, params)
    }

    pub fn tier(&self) -> Tier {
        self.tier
    }

    /// Branch boundaries `(mu^alpha_l, mu^alpha_n)`; quadrature over any of
    /// the evaluators should split there. Collapses when `alpha_l == alpha_n`.
    pub fn breakpoints(&self) -> (f64, f64) {
        (self.mu.powf(self.alpha_l), self.mu.powf(self.alpha_n))
    }

    fn check_nonnegative(t: f64) -> Result<(), NumericsError> {
        if t.is_nan() || t < 0.0 {
            Err(NumericsError::Domain(format!(
                "pathloss value must be >= 0, got {t}"
            )))
        } else {
            Ok(())
        }
    }

    /// Mean number of BSs with pathloss below `t`.
    pub fn intensity(&self, t: f64) -> Result<f64, NumericsError> {
        Self::check_nonnegative(t)?;
        Ok(self.intensity_unchecked(t))
    }

    pub(crate) fn intensity_unchecked(&self, t: f64) -> f64 {
        let pi_lambda = std::f64::consts::PI * self.lambda;
        match self.tier {
            Tier::Mcell => pi_lambda * t.powf(2.0 / self.alpha_n),
            Tier::Scell => {
                let (b_l, b_n) = self.breakpoints();
                let nlos = t.powf(2.0 / self.alpha_n);
                if t < b_l {
                    pi_lambda * (self.omega * t.powf(2.0 / self.alpha_l) + (1.0 - self.omega) * nlos)
                } else if t <= b_n {
                    pi_lambda * (self.omega * self.mu * self.mu + (1.0 - self.omega) * nlos)
                } else {
                    pi_lambda * nlos
                }
            }
        }
    }

    /// Derivative of the intensity measure in `t`.
    fn intensity_deriv(&self, t: f64) -> f64 {
        let pi_lambda = std::f64::consts::PI * self.lambda;
        let d_nlos = (2.0 / self.alpha_n) * t.powf(2.0 / self.alpha_n - 1.0);
        match self.tier {
            Tier::Mcell => pi_lambda * d_nlos,
            Tier::Scell => {
                let (b_l, b_n) = self.breakpoints();
                if t < b_l {
                    let d_los = (2.0 / self.alpha_l) * t.powf(2.0 / self.alpha_l - 1.0);
                    pi_lambda * (self.omega * d_los + (1.0 - self.omega) * d_nlos)
                } else if t <= b_n {
                    pi_lambda * (1.0 - self.omega) * d_nlos
                } else {
                    pi_lambda * d_nlos
                }
            }
        }
    }

    /// `P(min tier pathloss > t) = exp(-intensity(t))`.
    pub fn ccdf(&self, t: f64) -> Result<f64, NumericsError> {
        Self::check_nonnegative(t)?;
        Ok(self.ccdf_unchecked(t))
    }

    #[inline]
    pub(crate) fn ccdf_unchecked(&self, t: f64) -> f64 {
        (-self.intensity_unchecked(t)).exp()
    }

    /// Density of the minimum tier pathloss: branchwise
    /// `intensity'(t) * exp(-intensity(t))`.
    pub fn pdf(&self, t: f64) -> Result<f64, NumericsError> {
        if t.is_nan() || t <= 0.0 {
            return Err(NumericsError::Domain(format!(
                "pathloss density needs t > 0, got {t}"
            )));
        }
        Ok(self.intensity_deriv(t) * self.ccdf_unchecked(t))
    }

    /// `Int_0^inf g(l) f(l) dl` for this tier's pathloss density `f`.
    ///
    /// Mcell: substitutes `v = intensity(l)` so the integrand becomes
    /// `g(l(v)) e^{-v}`, truncated where the exponential envelope falls
    /// below `abs_tol * 1e-3`. Scell: substitutes `l = y^{alpha_n/2}` to
    /// remove the endpoint singularity of the density and integrates the
    /// semi-infinite range directly. `extra_breaks` are additional split
    /// points in `l`-space.
    pub fn integrate_pdf_weighted<F: Fn(f64) -> f64>(
        &self,
        g: F,
        extra_breaks: &[f64],
        spec: &QuadratureSpec,
    ) -> Result<f64, NumericsError> {
        match self.tier {
            Tier::Mcell => {
                let pi_lambda = std::f64::consts::PI * self.lambda;
                let half_alpha = self.alpha_n / 2.0;
                let l_of_v = move |v: f64| (v / pi_lambda).powf(half_alpha);
                let v_of_l = move |l: f64| pi_lambda * l.powf(1.0 / half_alpha);
                let v_max = -(spec.abs_tol * 1e-3).max(1e-306).ln();
                let breaks: Vec<f64> = extra_breaks
                    .iter()
                    .filter(|&&b| b.is_finite() && b > 0.0)
                    .map(|&b| v_of_l(b))
                    .collect();
                integrate_with_breaks(|v| g(l_of_v(v)) * (-v).exp(), 0.0, v_max, &breaks, spec)
            }
            Tier::Scell => {
                let kappa = self.alpha_n / 2.0;
                let this = *self;
                let integrand = move |y: f64| {
                    let l = y.powf(kappa);
                    let f = this.intensity_deriv(l) * this.ccdf_unchecked(l);
                    g(l) * f * kappa * y.powf(kappa - 1.0)
                };
                let (b_l, b_n) = self.breakpoints();
                let mut breaks: Vec<f64> = vec![b_l.powf(1.0 / kappa), b_n.powf(1.0 / kappa)];
                breaks.extend(
                    extra_breaks
                        .iter()
                        .filter(|&&b| b.is_finite() && b > 0.0)
                        .map(|&b| b.powf(1.0 / kappa)),
                );
                integrate_with_breaks(integrand, 0.0, f64::INFINITY, &breaks, spec)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params() -> SystemParams {
        SystemParams::table_i()
    }

    #[test]
    fn mcell_intensity_matches_radial_oracle() {
        // radial oracle: 2 pi lambda Int_0^inf r 1(r^alpha < t) dr, evaluated
        // numerically over the truncated radius range
        let p = params();
        let m = PathlossTier::mcell(&p);
        let t = 1e9f64;
        let rmax = t.powf(1.0 / p.alpha_m);
        let oracle = integrate(
            |r| 2.0 * std::f64::consts::PI * p.lambda_m * r,
            0.0,
            rmax,
            &QuadratureSpec::inner(),
        )
        .unwrap();
        let got = m.intensity(t).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-10);
        assert_relative_eq!(got, 5.0 * std::f64::consts::PI, max_relative = 1e-12);
    }

    #[test]
    fn intensity_edge_values() {
        let p = params();
        let s = PathlossTier::scell(&p);
        assert_eq!(s.intensity(0.0).unwrap(), 0.0);
        assert!(s.intensity(-1.0).is_err());

        // omega = 1 inside the LOS ball: single LOS slope
        let mut p1 = params();
        p1.omega = 1.0;
        let s1 = PathlossTier::scell(&p1);
        let t = 0.5 * p1.mu.powf(p1.alpha_l);
        assert_relative_eq!(
            s1.intensity(t).unwrap(),
            std::f64::consts::PI * p1.lambda_s * t.powf(2.0 / p1.alpha_l),
            max_relative = 1e-12
        );
    }

    #[test]
    fn intensity_continuous_at_breakpoints() {
        let p = params();
        let s = PathlossTier::scell(&p);
        let (b_l, b_n) = s.breakpoints();
        let pi_lambda = std::f64::consts::PI * p.lambda_s;
        // evaluate each adjacent branch expression exactly at the breakpoint
        let branch1_at_bl = pi_lambda
            * (p.omega * b_l.powf(2.0 / p.alpha_l) + (1.0 - p.omega) * b_l.powf(2.0 / p.alpha_n));
        let branch2_at_bl =
            pi_lambda * (p.omega * p.mu * p.mu + (1.0 - p.omega) * b_l.powf(2.0 / p.alpha_n));
        assert_relative_eq!(branch1_at_bl, branch2_at_bl, max_relative = 1e-12);

        let branch2_at_bn =
            pi_lambda * (p.omega * p.mu * p.mu + (1.0 - p.omega) * b_n.powf(2.0 / p.alpha_n));
        let branch3_at_bn = pi_lambda * b_n.powf(2.0 / p.alpha_n);
        assert_relative_eq!(branch2_at_bn, branch3_at_bn, max_relative = 1e-12);
    }

    #[test]
    fn intensity_nondecreasing() {
        let s = PathlossTier::scell(&params());
        let mut prev = 0.0;
        let mut t = 1e-3;
        while t < 1e14 {
            let v = s.intensity(t).unwrap();
            assert!(v >= prev);
            prev = v;
            t *= 2.7;
        }
    }

    #[test]
    fn ccdf_anchors() {
        let p = params();
        let m = PathlossTier::mcell(&p);
        let s = PathlossTier::scell(&p);
        assert_eq!(m.ccdf(0.0).unwrap(), 1.0);
        assert_eq!(s.ccdf(0.0).unwrap(), 1.0);
        // exp of the 5 pi intensity
        let t = 1e9;
        assert_relative_eq!(
            m.ccdf(t).unwrap(),
            (-5.0 * std::f64::consts::PI).exp(),
            max_relative = 1e-12
        );
        assert!(m.ccdf(-0.1).is_err());
    }

    #[test]
    fn pdf_normalizes_both_tiers() {
        let p = params();
        for tier in [PathlossTier::mcell(&p), PathlossTier::scell(&p)] {
            let total = tier
                .integrate_pdf_weighted(|_| 1.0, &[], &QuadratureSpec::inner())
                .unwrap();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);

            // direct l-space integration of the closed-form density
            let (b_l, b_n) = tier.breakpoints();
            let direct = integrate_with_breaks(
                |l| tier.pdf(l).unwrap(),
                1e-12,
                f64::INFINITY,
                &[b_l, b_n],
                &QuadratureSpec {
                    rel_tol: 1e-6,
                    abs_tol: 1e-10,
                    max_subdivisions: 4000,
                },
            )
            .unwrap();
            assert_abs_diff_eq!(direct, 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn pdf_matches_ccdf_finite_difference() {
        let p = params();
        let m = PathlossTier::mcell(&p);
        let s = PathlossTier::scell(&p);
        for tier in [m, s] {
            for &t in &[1e3, 1e5, 5e7, 2e9] {
                let h = t * 1e-5;
                let fd = (tier.ccdf(t - h).unwrap() - tier.ccdf(t + h).unwrap()) / (2.0 * h);
                let got = tier.pdf(t).unwrap();
                assert_relative_eq!(got, fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn blockage_free_scell_collapses_to_mcell_form() {
        let mut p = params();
        p.omega = 0.0;
        let s = PathlossTier::scell(&p);
        // Mcell formula with (lambda_s, alpha_n)
        let mut q = params();
        q.lambda_m = p.lambda_s;
        q.alpha_m = p.alpha_n;
        let m = PathlossTier::mcell(&q);
        for &t in &[1e2, 1e5, 1e8, 1e11] {
            assert_relative_eq!(s.pdf(t).unwrap(), m.pdf(t).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(s.ccdf(t).unwrap(), m.ccdf(t).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_equal_slopes_stay_continuous() {
        let mut p = params();
        p.alpha_l = 4.0;
        p.alpha_n = 4.0;
        let s = PathlossTier::scell(&p);
        let (b_l, b_n) = s.breakpoints();
        assert_eq!(b_l, b_n);
        let eps = b_l * 1e-9;
        let below = s.intensity(b_l - eps).unwrap();
        let at = s.intensity(b_l).unwrap();
        let above = s.intensity(b_l + eps).unwrap();
        assert_relative_eq!(below, at, max_relative = 1e-6);
        assert_relative_eq!(at, above, max_relative = 1e-6);
    }

    #[test]
    fn pdf_nonnegative_and_rejects_nonpositive_input() {
        let p = params();
        let s = PathlossTier::scell(&p);
        assert!(s.pdf(0.0).is_err());
        assert!(s.pdf(-3.0).is_err());
        let mut t = 1e-6;
        while t < 1e13 {
            assert!(s.pdf(t).unwrap() >= 0.0);
            t *= 3.3;
        }
    }

    #[test]
    fn weighted_integration_agrees_with_direct_quadrature() {
        // E[exp(-s L)] two ways: substituted machinery vs plain l-space
        let p = params();
        let s_tier = PathlossTier::scell(&p);
        let scale = 1e-8;
        let weighted = s_tier
            .integrate_pdf_weighted(|l| (-scale * l).exp(), &[], &QuadratureSpec::inner())
            .unwrap();
        let (b_l, b_n) = s_tier.breakpoints();
        let direct = integrate_with_breaks(
            |l| (-scale * l).exp() * s_tier.pdf(l).unwrap(),
            1e-12,
            f64::INFINITY,
            &[b_l, b_n],
            &QuadratureSpec {
                rel_tol: 1e-7,
                abs_tol: 1e-12,
                max_subdivisions: 4000,
            },
        )
        .unwrap();
        assert_relative_eq!(weighted, direct, max_relative = 1e-5);
    }
}
