//! Deterministic numerical kernels: adaptive quadrature on finite and
//! semi-infinite intervals, the Gaussian Q-function, and the interference
//! functional `rho`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    /// The adaptive subdivision budget ran out before the error bound met
    /// the requested tolerance. Carries the best estimate so far.
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:.6e}, error bound {error_bound:.3e})")]
    NonConvergence {
        estimate: f64,
        error_bound: f64,
        subdivisions: usize,
    },
    /// The integrand returned NaN.
    #[error("integrand evaluated to NaN near x = {at:.6e}")]
    NanEncountered { at: f64 },
    /// Invalid argument for the requested operation.
    #[error("domain error: {0}")]
    Domain(String),
}

/// Tolerances and subdivision budget for adaptive quadrature.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self, NumericsError> {
        if !(rel_tol > 0.0) {
            return Err(NumericsError::Domain("rel_tol must be > 0".into()));
        }
        if !(abs_tol >= 0.0) {
            return Err(NumericsError::Domain("abs_tol must be >= 0".into()));
        }
        if max_subdivisions < 1 {
            return Err(NumericsError::Domain("max_subdivisions must be >= 1".into()));
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        })
    }

    /// Tolerances for inner (single) integrals.
    pub fn inner() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 4000,
        }
    }

    /// Relaxed tolerances for the outer layer of composed double integrals.
    pub fn outer() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_subdivisions: 4000,
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::inner()
    }
}

// 15-point Kronrod abscissae on [-1, 1] (positive half) and the matching
// Kronrod / 7-point Gauss weights, from QUADPACK's QK15.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_17,
    0.207_784_955_007_898_47,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_69,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 15/7 evaluation over `[lo, hi]`: returns the Kronrod
/// estimate and an error bound from the Gauss/Kronrod discrepancy.
fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64), NumericsError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let fc = f(center);
    if fc.is_nan() {
        return Err(NumericsError::NanEncountered { at: center });
    }
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut res_abs = WGK[7] * fc.abs();

    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if f1.is_nan() {
            return Err(NumericsError::NanEncountered { at: center - dx });
        }
        if f2.is_nan() {
            return Err(NumericsError::NanEncountered { at: center + dx });
        }
        fv[j] = f1;
        fv[j + 7] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            // odd Kronrod indices are the embedded Gauss nodes
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[j + 7] - mean).abs());
    }

    let value = kronrod * half;
    let raw_err = ((kronrod - gauss) * half).abs();
    res_abs *= half.abs();
    res_asc *= half.abs();

    // QUADPACK-style rescaling of the raw discrepancy.
    let mut err = raw_err;
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration of `f` over `(lo, hi)`; `hi` may be `f64::INFINITY`,
/// in which case the tail is folded onto `(0, 1)` with `t = lo + u/(1-u)`.
///
/// Converges when the accumulated error bound drops below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<f64, NumericsError> {
    integrate_with_breaks(f, lo, hi, &[], spec)
}

/// As [`integrate`], with interior breakpoints that seed the initial
/// subdivision (kinks, branch boundaries). Breakpoints outside `(lo, hi)`
/// are ignored.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64, NumericsError> {
    if !lo.is_finite() {
        return Err(NumericsError::Domain("lower limit must be finite".into()));
    }
    if hi.is_nan() || hi <= lo {
        return Err(NumericsError::Domain(
            "upper limit must exceed lower limit".into(),
        ));
    }

    if hi.is_finite() {
        adaptive(&f, lo, hi, breaks, spec)
    } else {
        // Rational map of (lo, inf) onto (0, 1). Nodes that round onto the
        // endpoint evaluate to the decaying-integrand limit of zero.
        let g = |u: f64| {
            let s = 1.0 - u;
            if s <= 0.0 {
                return 0.0;
            }
            let t = lo + u / s;
            if !t.is_finite() {
                return 0.0;
            }
            let v = f(t);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        };
        let mapped: Vec<f64> = breaks
            .iter()
            .filter(|&&b| b.is_finite() && b > lo)
            .map(|&b| {
                let d = b - lo;
                d / (1.0 + d)
            })
            .collect();
        adaptive(&g, 0.0, 1.0, &mapped, spec)
    }
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64, NumericsError> {
    let mut edges: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    edges.push(lo);
    edges.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap: BinaryHeap<Segment> = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let (value, err) = gk15(f, w[0], w[1])?;
        total += value;
        total_err += err;
        heap.push(Segment {
            lo: w[0],
            hi: w[1],
            value,
            err,
        });
    }

    let mut subdivisions = 0usize;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(NumericsError::NonConvergence {
                estimate: total,
                error_bound: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval no longer splittable in f64; accept its estimate
            total_err -= worst.err;
            if heap.is_empty() {
                return Ok(total);
            }
            continue;
        }
        let (lv, le) = gk15(f, worst.lo, mid)?;
        let (rv, re) = gk15(f, mid, worst.hi)?;
        total += lv + rv - worst.value;
        total_err += le + re - worst.err;
        heap.push(Segment {
            lo: worst.lo,
            hi: mid,
            value: lv,
            err: le,
        });
        heap.push(Segment {
            lo: mid,
            hi: worst.hi,
            value: rv,
            err: re,
        });
        subdivisions += 1;
    }
}

/// Standard normal upper-tail probability `Q(x) = P(N(0,1) > x)`.
///
/// Computed through the complementary error function, so it stays accurate
/// deep into the tail and underflows to 0 rather than erroring.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Scaled complementary error function `exp(x^2) * erfc(x)` for `x >= 0`.
///
/// Switches to the asymptotic series once `exp(x^2)` would overflow.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 25.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        // erfc(x) e^{x^2} ~ (1/(x sqrt(pi))) * sum_k (-1)^k (2k-1)!!/(2x^2)^k
        let inv2x2 = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=6u32 {
            term *= -((2 * k - 1) as f64) * inv2x2;
            sum += term;
        }
        sum / (x * PI.sqrt())
    }
}

/// Interference functional
/// `rho(t, alpha) = t^{2/alpha} * Int_{t^{-2/alpha}}^inf du / (1 + u^{alpha/2})`.
///
/// Nonnegative and nondecreasing in `t`; requires `alpha > 2` for the tail
/// to converge.
pub fn rho(t: f64, alpha: f64) -> Result<f64, NumericsError> {
    if alpha <= 2.0 {
        return Err(NumericsError::Domain(format!(
            "rho requires alpha > 2 (got {alpha})"
        )));
    }
    if t < 0.0 {
        return Err(NumericsError::Domain(format!(
            "rho requires t >= 0 (got {t})"
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    rho_ln(t.ln(), alpha)
}

/// [`rho`] with the threshold supplied as `ln(t)`, for thresholds that
/// overflow `f64` (e.g. `(1+z)^{W_s/W_m} - 1` with huge bandwidth ratios).
pub fn rho_ln(ln_t: f64, alpha: f64) -> Result<f64, NumericsError> {
    if alpha <= 2.0 {
        return Err(NumericsError::Domain(format!(
            "rho requires alpha > 2 (got {alpha})"
        )));
    }
    let two_over_alpha = 2.0 / alpha;
    // lower integration limit a = t^{-2/alpha}
    let ln_a = -two_over_alpha * ln_t;
    if ln_a > 700.0 {
        // t ~ 0: empty integration range scaled by 0
        return Ok(0.0);
    }
    let a = ln_a.exp();
    let half_alpha = alpha / 2.0;
    if a < 1e-6 {
        // Full-line integral  C(alpha) = (2pi/alpha)/sin(2pi/alpha)  minus a
        // head expansion: rho = t^{2/alpha} C - 1 + a^{alpha/2}/(1 + alpha/2) + O(a^alpha).
        let c = (2.0 * PI / alpha) / (2.0 * PI / alpha).sin();
        let scale = (two_over_alpha * ln_t).exp();
        return Ok(scale * c - 1.0 + a.powf(half_alpha) / (1.0 + half_alpha));
    }
    let tail = integrate(
        |u: f64| 1.0 / (1.0 + u.powf(half_alpha)),
        a,
        f64::INFINITY,
        &QuadratureSpec::inner(),
    )?;
    Ok((two_over_alpha * ln_t).exp() * tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::inner()
    }

    #[test]
    fn cubic_polynomial() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 1.0, &spec()).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, &spec()).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_tail_matches_erf_oracle() {
        // oracle: erf gives Int_0^inf exp(-x^2) dx = sqrt(pi)/2 exactly
        let oracle = PI.sqrt() / 2.0;
        let v = integrate(|x| (-x * x).exp(), 0.0, f64::INFINITY, &spec()).unwrap();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(oracle, 0.886_226_925_452_758, epsilon = 1e-12);
    }

    #[test]
    fn breakpoints_are_honored_on_kinked_integrand() {
        let f = |x: f64| if x < 1.0 { x } else { 2.0 - x };
        let v = integrate_with_breaks(f, 0.0, 2.0, &[1.0], &spec()).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nan_is_propagated() {
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, &spec());
        assert!(matches!(err, Err(NumericsError::NanEncountered { .. })));
    }

    #[test]
    fn subdivision_budget_reports_best_estimate() {
        let tight = QuadratureSpec::new(1e-14, 0.0, 1).unwrap();
        let err = integrate(|x: f64| x.abs().sqrt().recip().min(1e8), 1e-30, 1.0, &tight);
        match err {
            Err(NumericsError::NonConvergence {
                estimate,
                error_bound,
                ..
            }) => {
                assert!(estimate.is_finite());
                assert!(error_bound > 0.0);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn q_function_symmetry_and_anchors() {
        assert_abs_diff_eq!(q_function(0.0), 0.5, epsilon = 1e-15);
        // tail limit: no error, just underflow
        let tail = q_function(40.0);
        assert!(tail >= 0.0 && tail < 1e-300);
        for i in 0..=160 {
            let x = -8.0 + 0.1 * i as f64;
            assert_abs_diff_eq!(q_function(x) + q_function(-x), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn q_function_matches_normal_tail_quadrature() {
        // independent oracle: integrate the standard normal density over (1, inf)
        let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let oracle = integrate(density, 1.0, f64::INFINITY, &spec()).unwrap();
        assert_abs_diff_eq!(q_function(1.0), oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(q_function(1.0), 0.158_655_253_931_457_07, epsilon = 1e-12);
    }

    #[test]
    fn erfcx_series_agrees_with_direct_product() {
        // both routes are valid for 25 < x < 26.5; compare them there
        for &x in &[25.2f64, 25.8, 26.2] {
            let series = erfcx(x);
            let direct = (x * x).exp() * libm::erfc(x);
            assert!((series - direct).abs() / direct < 1e-12);
        }
        // spot value: erfcx(1) = e * erfc(1)
        assert_abs_diff_eq!(erfcx(1.0), 1.0f64.exp() * libm::erfc(1.0), epsilon = 1e-15);
    }

    /// Closed form for alpha = 4: rho(t, 4) = sqrt(t) * (pi/2 - atan(1/sqrt(t))).
    fn rho_arctan_oracle(t: f64) -> f64 {
        t.sqrt() * (PI / 2.0 - (1.0 / t.sqrt()).atan())
    }

    #[test]
    fn rho_anchors() {
        assert_eq!(rho(0.0, 4.0).unwrap(), 0.0);
        assert_abs_diff_eq!(rho(1.0, 4.0).unwrap(), PI / 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            rho(10.0, 4.0).unwrap(),
            rho_arctan_oracle(10.0),
            epsilon = 1e-10
        );
    }

    #[test]
    fn rho_matches_arctan_oracle_on_log_grid() {
        let mut t = 1e-3;
        while t <= 1e3 * 1.0001 {
            let got = rho(t, 4.0).unwrap();
            let want = rho_arctan_oracle(t);
            assert!(
                (got - want).abs() <= 1e-10,
                "rho({t}, 4) = {got}, oracle {want}"
            );
            t *= 10.0f64.powf(0.25);
        }
    }

    #[test]
    fn rho_monotone_in_threshold() {
        for &alpha in &[2.5, 3.0, 4.0, 5.5] {
            let mut prev = 0.0;
            let mut t = 1e-4;
            while t <= 1e6 {
                let v = rho(t, alpha).unwrap();
                assert!(v >= prev, "rho not monotone at t={t}, alpha={alpha}");
                prev = v;
                t *= 3.7;
            }
        }
    }

    #[test]
    fn rho_rejects_divergent_exponent() {
        assert!(matches!(rho(1.0, 2.0), Err(NumericsError::Domain(_))));
        assert!(matches!(rho(-1.0, 4.0), Err(NumericsError::Domain(_))));
    }

    #[test]
    fn rho_ln_agrees_with_direct_and_asymptotic() {
        for &t in &[0.5f64, 3.0, 80.0, 1e4] {
            assert_abs_diff_eq!(
                rho_ln(t.ln(), 3.0).unwrap(),
                rho(t, 3.0).unwrap(),
                epsilon = 1e-9
            );
        }
        // continuity across the a < 1e-6 switch (alpha = 3 -> t = 1e9)
        let below = rho_ln(1e9f64.ln() * 0.999, 3.0).unwrap();
        let above = rho_ln(1e9f64.ln() * 1.001, 3.0).unwrap();
        assert!(above > below);
        let mid_direct = rho(1e9, 3.0).unwrap();
        let mid_ln = rho_ln(1e9f64.ln(), 3.0).unwrap();
        assert!((mid_direct - mid_ln).abs() / mid_direct < 1e-7);
    }

    proptest! {
        /// Linearity of the integral operator on random cubics over [0, 2].
        #[test]
        fn integrate_is_linear(
            c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0,
            d0 in -3.0f64..3.0, d1 in -3.0f64..3.0, d3 in -3.0f64..3.0,
            a in -5.0f64..5.0, b in -5.0f64..5.0,
        ) {
            let f = move |x: f64| c0 + c1 * x + c2 * x * x;
            let g = move |x: f64| d0 + d1 * x + d3 * x * x * x;
            let s = spec();
            let lhs = integrate(move |x| a * f(x) + b * g(x), 0.0, 2.0, &s).unwrap();
            let rhs = a * integrate(f, 0.0, 2.0, &s).unwrap() + b * integrate(g, 0.0, 2.0, &s).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
