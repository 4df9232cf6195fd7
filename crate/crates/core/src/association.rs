//! UL/DL cell association probabilities under the two criteria:
//! maximum biased received power (Max-BRP) and maximum unit-load
//! achievable rate (Max-Rate).

use serde::{Deserialize, Serialize};

use crate::numerics::{self, NumericsError, QuadratureSpec};
use crate::params::{DerivedConstants, ParamError, SystemParams};
use crate::pathloss::PathlossTier;
use crate::{Direction, Tier};

/// Association criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocCriterion {
    MaxBrp,
    MaxRate,
}

impl std::str::FromStr for AssocCriterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "brp" | "max-brp" | "max_brp" => Ok(AssocCriterion::MaxBrp),
            "rate" | "max-rate" | "max_rate" => Ok(AssocCriterion::MaxRate),
            other => Err(format!("unknown criterion `{other}` (expected brp or rate)")),
        }
    }
}

/// A direction/criterion pair naming one of the four association cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssocQuery {
    pub direction: Direction,
    pub criterion: AssocCriterion,
}

/// How an [`AssocResult`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocSource {
    Quadrature,
    ClosedForm,
    MonteCarlo,
}

/// Tier association probabilities for one direction.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AssocResult {
    pub p_mcell: f64,
    pub p_scell: f64,
    pub source: AssocSource,
}

impl AssocResult {
    fn from_mcell(p_mcell: f64, source: AssocSource) -> Self {
        Self {
            p_mcell,
            p_scell: 1.0 - p_mcell,
            source,
        }
    }

    pub fn prob(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Mcell => self.p_mcell,
            Tier::Scell => self.p_scell,
        }
    }
}

/// The analytic engine: validated parameters, derived constants and the two
/// pathloss processes, with every Lemma/Theorem evaluator as a method.
#[derive(Clone, Debug)]
pub struct Analysis {
    params: SystemParams,
    derived: DerivedConstants,
    mcell: PathlossTier,
    scell: PathlossTier,
}

impl Analysis {
    pub fn new(params: SystemParams) -> Result<Self, ParamError> {
        params.validate()?;
        let derived = params.derive();
        let mcell = PathlossTier::mcell(&params);
        let scell = PathlossTier::scell(&params);
        Ok(Self {
            params,
            derived,
            mcell,
            scell,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn pathloss(&self, tier: Tier) -> &PathlossTier {
        match tier {
            Tier::Mcell => &self.mcell,
            Tier::Scell => &self.scell,
        }
    }

    /// Association weight ratio for the given direction (`a_DL` or `a_UL`).
    pub fn weight(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Dl => self.derived.a_dl,
            Direction::Ul => self.derived.a_ul,
        }
    }

    /// Transmit power feeding a link of `tier` in `direction`.
    pub fn tx_power(&self, direction: Direction, tier: Tier) -> f64 {
        match (direction, tier) {
            (Direction::Dl, Tier::Mcell) => self.params.p_m,
            (Direction::Dl, Tier::Scell) => self.params.p_s,
            (Direction::Ul, Tier::Mcell) => self.params.p_um,
            (Direction::Ul, Tier::Scell) => self.params.p_us,
        }
    }

    /// Dispatches on the query's criterion.
    pub fn assoc(&self, query: AssocQuery) -> Result<AssocResult, NumericsError> {
        match query.criterion {
            AssocCriterion::MaxBrp => self.assoc_brp(query.direction),
            AssocCriterion::MaxRate => self.assoc_rate(query.direction),
        }
    }

    /// Max-BRP association probabilities:
    /// `A_{c,m} = Int_0^inf Fbar_s(a_c l) f_m(l) dl`, Scell by complement.
    pub fn assoc_brp(&self, direction: Direction) -> Result<AssocResult, NumericsError> {
        let a = self.weight(direction);
        let scell = self.scell;
        let (b_l, b_n) = scell.breakpoints();
        let p_mcell = self.mcell.integrate_pdf_weighted(
            move |l| scell.ccdf_unchecked(a * l),
            &[b_l / a, b_n / a],
            &QuadratureSpec::inner(),
        )?;
        Ok(AssocResult::from_mcell(p_mcell, AssocSource::Quadrature))
    }

    /// The same probability integrated against the Scell pathloss density
    /// instead: `A_{c,s} = Int_0^inf Fbar_m(l / a_c) f_s(l) dl`. Used as the
    /// second algebraic route in the complementarity checks.
    pub fn assoc_brp_scell_route(&self, direction: Direction) -> Result<f64, NumericsError> {
        let a = self.weight(direction);
        let mcell = self.mcell;
        self.scell.integrate_pdf_weighted(
            move |l| mcell.ccdf_unchecked(l / a),
            &[],
            &QuadratureSpec::inner(),
        )
    }

    /// Closed-form Max-BRP association for the `alpha_l = 2`,
    /// `alpha_n = alpha_m = 4` exponent family.
    ///
    /// With `k = pi lambda_m / sqrt(a)`, `c1 = pi lambda_s omega` and
    /// `c2 = pi lambda_s (1 - omega) + k`:
    ///
    /// `A_m = k [ e^{c2^2/4c1} (sqrt(pi)/sqrt(c1)) (Q(c2/sqrt(2 c1)) - Q((2 mu c1 + c2)/sqrt(2 c1)))`
    /// `      + e^{-c1 mu^2} (e^{-c2 mu} - e^{-c2 mu^2}) / c2 + e^{-(c1+c2) mu^2} / (c1 + c2) ]`
    pub fn assoc_brp_closed(&self, direction: Direction) -> Result<AssocResult, NumericsError> {
        let p = &self.params;
        let ok = (p.alpha_l - 2.0).abs() < 1e-12
            && (p.alpha_n - 4.0).abs() < 1e-12
            && (p.alpha_m - 4.0).abs() < 1e-12;
        if !ok {
            return Err(NumericsError::Domain(format!(
                "closed form requires alpha_l = 2, alpha_n = alpha_m = 4 (got {}, {}, {})",
                p.alpha_l, p.alpha_n, p.alpha_m
            )));
        }
        let a = self.weight(direction);
        let mu = p.mu;
        let k = std::f64::consts::PI * p.lambda_m / a.sqrt();
        let c1 = std::f64::consts::PI * p.lambda_s * p.omega;
        let c2 = std::f64::consts::PI * p.lambda_s * (1.0 - p.omega) + k;

        let gauss_part = if c1 < 1e-300 {
            // omega -> 0 degenerate: the quadratic term vanishes
            (1.0 - (-c2 * mu).exp()) / c2
        } else {
            let sqrt_c1 = c1.sqrt();
            let expo = c2 * c2 / (4.0 * c1);
            if expo < 500.0 {
                let q1 = numerics::q_function(c2 / (2.0 * c1).sqrt());
                let q2 = numerics::q_function((2.0 * mu * c1 + c2) / (2.0 * c1).sqrt());
                expo.exp() * std::f64::consts::PI.sqrt() / sqrt_c1 * (q1 - q2)
            } else {
                // e^{expo} overflows; fold it into the scaled erfc
                let w1 = c2 / (2.0 * sqrt_c1);
                let w2 = (2.0 * mu * c1 + c2) / (2.0 * sqrt_c1);
                let damp = (-mu * mu * c1 - mu * c2).exp();
                0.5 * std::f64::consts::PI.sqrt() / sqrt_c1
                    * (numerics::erfcx(w1) - damp * numerics::erfcx(w2))
            }
        };
        let mid = (-c1 * mu * mu).exp() * ((-c2 * mu).exp() - (-c2 * mu * mu).exp()) / c2;
        let tail = (-(c1 + c2) * mu * mu).exp() / (c1 + c2);
        let p_mcell = k * (gauss_part + mid + tail);
        Ok(AssocResult::from_mcell(p_mcell, AssocSource::ClosedForm))
    }

    fn snr_noise_coef(&self, direction: Direction) -> f64 {
        self.derived.sigma2_s / (self.tx_power(direction, Tier::Scell) * self.derived.psi_s)
    }

    /// CCDF of the mmWave SNR at the typical UE:
    /// `Fbar(z) = Int_0^inf exp(-z sigma_s^2 l / (P psi_s)) f_s(l) dl`.
    pub fn snr_ccdf_mmwave(&self, direction: Direction, z: f64) -> Result<f64, NumericsError> {
        if z < 0.0 {
            return Err(NumericsError::Domain(format!("SNR must be >= 0, got {z}")));
        }
        let c = self.snr_noise_coef(direction);
        self.scell
            .integrate_pdf_weighted(move |l| (-z * c * l).exp(), &[], &QuadratureSpec::inner())
    }

    /// Density of the mmWave SNR at the typical UE:
    /// `f(z) = (sigma_s^2 / P psi_s) Int_0^inf l exp(-z sigma_s^2 l / (P psi_s)) f_s(l) dl`.
    pub fn snr_pdf_mmwave(&self, direction: Direction, z: f64) -> Result<f64, NumericsError> {
        if z < 0.0 {
            return Err(NumericsError::Domain(format!("SNR must be >= 0, got {z}")));
        }
        let c = self.snr_noise_coef(direction);
        let v = self.scell.integrate_pdf_weighted(
            move |l| l * (-z * c * l).exp(),
            &[],
            &QuadratureSpec::inner(),
        )?;
        Ok(c * v)
    }

    /// SNR value of a LOS link at the ball edge; anchors the z-axis scale
    /// for quadrature over SNR.
    fn snr_edge_scale(&self, direction: Direction) -> f64 {
        1.0 / (self.snr_noise_coef(direction) * self.params.mu.powf(self.params.alpha_l))
    }

    /// Decade ladder of split points covering the full support of the SNR
    /// distribution, from well below the LOS-edge scale up to the
    /// near-field tail (`P psi / sigma^2` at unit pathloss times 1e15).
    /// Without these the slowly decaying `z^{-1/2}` tail can fall between
    /// quadrature nodes entirely.
    fn snr_quadrature_breaks(&self, direction: Direction) -> Vec<f64> {
        let unit_pathloss_snr = 1.0 / self.snr_noise_coef(direction);
        let lo = self.snr_edge_scale(direction).min(unit_pathloss_snr) * 1e-8;
        let hi = unit_pathloss_snr * 1e15;
        let mut breaks = Vec::new();
        let mut z = lo;
        while z < hi {
            breaks.push(z);
            z *= 10.0;
        }
        breaks.push(hi);
        breaks
    }

    /// Max-Rate association probabilities (unit-load rates):
    /// `B_{c,m} = Int_0^inf f_SNR(z) / (1 + rho((1+z)^{Ws/Wm} - 1, alpha_m)) dz`.
    pub fn assoc_rate(&self, direction: Direction) -> Result<AssocResult, NumericsError> {
        let ratio = self.params.w_s / self.params.w_m;
        let alpha_m = self.params.alpha_m;
        let c = self.snr_noise_coef(direction);
        let scell = self.scell;

        let sir_weight = move |z: f64| -> Result<f64, NumericsError> {
            let u = ratio * z.ln_1p();
            if u == 0.0 {
                return Ok(1.0);
            }
            let r = if u > 700.0 {
                // ln(e^u - 1) ~ u to well below f64 precision here
                numerics::rho_ln(u, alpha_m)?
            } else {
                numerics::rho(u.exp_m1(), alpha_m)?
            };
            Ok(1.0 / (1.0 + r))
        };

        let inner_spec = QuadratureSpec::inner();
        let integrand = move |z: f64| -> f64 {
            let w = match sir_weight(z) {
                Ok(w) => w,
                Err(_) => return f64::NAN,
            };
            if w == 0.0 {
                return 0.0;
            }
            let pdf = scell
                .integrate_pdf_weighted(move |l| l * (-z * c * l).exp(), &[], &inner_spec)
                .map_or(f64::NAN, |v| c * v);
            pdf * w
        };

        let breaks = self.snr_quadrature_breaks(direction);
        let outer = QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_subdivisions: 4000,
        };
        let p_mcell = numerics::integrate_with_breaks(integrand, 0.0, f64::INFINITY, &breaks, &outer)?;
        Ok(AssocResult::from_mcell(p_mcell, AssocSource::Quadrature))
    }
}
