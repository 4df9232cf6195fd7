//! Named, reproducible experiment sweeps: regenerate the curve data behind
//! the evaluation figures, running the analytic and Monte Carlo engines
//! side by side and reporting their discrepancies.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{Analysis, AssocCriterion};
use crate::montecarlo::{quantile, rng, DropSample, EmpiricalAssoc, LinkSample, ProbEstimate, SimOptions, Simulator};
use crate::numerics::NumericsError;
use crate::params::{db_to_linear, linear_to_db, ParamError, SystemParams};
use crate::{Direction, Tier};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error("no crossing: {0}")]
    NoCrossing(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed spec document: {0}")]
    Json(#[from] serde_json::Error),
}

/// Engines an experiment can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    #[serde(alias = "monte_carlo")]
    Mc,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Analytic => "analytic",
            Engine::Mc => "mc",
        })
    }
}

impl FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(Engine::Analytic),
            "mc" | "monte_carlo" | "montecarlo" => Ok(Engine::Mc),
            other => Err(format!("unknown engine `{other}` (expected analytic or mc)")),
        }
    }
}

/// A sweepable parameter, named in the wire units of the config schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamPath {
    LambdaMPerKm2,
    LambdaSPerKm2,
    LambdaUPerKm2,
    /// Ratio lambda_s / lambda_m (Mcell density held fixed).
    LambdaRatio,
    #[serde(rename = "t_m_db")]
    TMDb,
    #[serde(rename = "t_s_db")]
    TSDb,
    #[serde(rename = "t_m_ul_db")]
    TMUlDb,
    #[serde(rename = "t_s_ul_db")]
    TSUlDb,
    #[serde(rename = "g_s_max_dbi")]
    GSMaxDbi,
    #[serde(rename = "g_s_min_dbi")]
    GSMinDbi,
    AlphaM,
    AlphaL,
    AlphaN,
    MuM,
    Omega,
    Epsilon,
    /// Threshold axis: SINR threshold in dB (parameters untouched).
    TauDb,
    /// Threshold axis: rate threshold in b/s (parameters untouched).
    RateBps,
}

impl ParamPath {
    pub fn apply(&self, p: &mut SystemParams, value: f64) {
        match self {
            ParamPath::LambdaMPerKm2 => p.lambda_m = value * 1e-6,
            ParamPath::LambdaSPerKm2 => p.lambda_s = value * 1e-6,
            ParamPath::LambdaUPerKm2 => p.lambda_u = value * 1e-6,
            ParamPath::LambdaRatio => p.lambda_s = value * p.lambda_m,
            ParamPath::TMDb => p.t_m = db_to_linear(value),
            ParamPath::TSDb => p.t_s = db_to_linear(value),
            ParamPath::TMUlDb => p.t_m_ul = db_to_linear(value),
            ParamPath::TSUlDb => p.t_s_ul = db_to_linear(value),
            ParamPath::GSMaxDbi => p.g_s_max = db_to_linear(value),
            ParamPath::GSMinDbi => p.g_s_min = db_to_linear(value),
            ParamPath::AlphaM => p.alpha_m = value,
            ParamPath::AlphaL => p.alpha_l = value,
            ParamPath::AlphaN => p.alpha_n = value,
            ParamPath::MuM => p.mu = value,
            ParamPath::Omega => p.omega = value,
            ParamPath::Epsilon => p.epsilon = value,
            ParamPath::TauDb | ParamPath::RateBps => {}
        }
    }

    /// Threshold axes evaluate one simulation against many grid values.
    pub fn is_threshold_axis(&self) -> bool {
        matches!(self, ParamPath::TauDb | ParamPath::RateBps)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamPath::LambdaMPerKm2 => "lambda_m_per_km2",
            ParamPath::LambdaSPerKm2 => "lambda_s_per_km2",
            ParamPath::LambdaUPerKm2 => "lambda_u_per_km2",
            ParamPath::LambdaRatio => "lambda_ratio",
            ParamPath::TMDb => "t_m_db",
            ParamPath::TSDb => "t_s_db",
            ParamPath::TMUlDb => "t_m_ul_db",
            ParamPath::TSUlDb => "t_s_ul_db",
            ParamPath::GSMaxDbi => "g_s_max_dbi",
            ParamPath::GSMinDbi => "g_s_min_dbi",
            ParamPath::AlphaM => "alpha_m",
            ParamPath::AlphaL => "alpha_l",
            ParamPath::AlphaN => "alpha_n",
            ParamPath::MuM => "mu_m",
            ParamPath::Omega => "omega",
            ParamPath::Epsilon => "epsilon",
            ParamPath::TauDb => "tau_db",
            ParamPath::RateBps => "rate_bps",
        }
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One observable a sweep can record at each grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AssocScellDlBrp,
    AssocScellUlBrp,
    AssocMcellDlBrp,
    AssocMcellUlBrp,
    AssocScellDlRate,
    AssocScellUlRate,
    AssocMcellDlRate,
    AssocMcellUlRate,
    DecouplingGainBrp,
    DecouplingGainRate,
    SinrCoverageDl,
    SinrCoverageUl,
    RateCoverageDl,
    RateCoverageUl,
    P5RateDl,
    P5RateUl,
    P50RateDl,
    P50RateUl,
    P5SinrDbDl,
    P5SinrDbUl,
    P50SinrDbDl,
    P50SinrDbUl,
    MedianSinrSnrGapDbDl,
    MedianSinrSnrGapDbUl,
    CrossingRatioDl,
    CrossingRatioUl,
}

impl Metric {
    pub const ALL: [Metric; 26] = [
        Metric::AssocScellDlBrp,
        Metric::AssocScellUlBrp,
        Metric::AssocMcellDlBrp,
        Metric::AssocMcellUlBrp,
        Metric::AssocScellDlRate,
        Metric::AssocScellUlRate,
        Metric::AssocMcellDlRate,
        Metric::AssocMcellUlRate,
        Metric::DecouplingGainBrp,
        Metric::DecouplingGainRate,
        Metric::SinrCoverageDl,
        Metric::SinrCoverageUl,
        Metric::RateCoverageDl,
        Metric::RateCoverageUl,
        Metric::P5RateDl,
        Metric::P5RateUl,
        Metric::P50RateDl,
        Metric::P50RateUl,
        Metric::P5SinrDbDl,
        Metric::P5SinrDbUl,
        Metric::P50SinrDbDl,
        Metric::P50SinrDbUl,
        Metric::MedianSinrSnrGapDbDl,
        Metric::MedianSinrSnrGapDbUl,
        Metric::CrossingRatioDl,
        Metric::CrossingRatioUl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::AssocScellDlBrp => "assoc_scell_dl_brp",
            Metric::AssocScellUlBrp => "assoc_scell_ul_brp",
            Metric::AssocMcellDlBrp => "assoc_mcell_dl_brp",
            Metric::AssocMcellUlBrp => "assoc_mcell_ul_brp",
            Metric::AssocScellDlRate => "assoc_scell_dl_rate",
            Metric::AssocScellUlRate => "assoc_scell_ul_rate",
            Metric::AssocMcellDlRate => "assoc_mcell_dl_rate",
            Metric::AssocMcellUlRate => "assoc_mcell_ul_rate",
            Metric::DecouplingGainBrp => "decoupling_gain_brp",
            Metric::DecouplingGainRate => "decoupling_gain_rate",
            Metric::SinrCoverageDl => "sinr_coverage_dl",
            Metric::SinrCoverageUl => "sinr_coverage_ul",
            Metric::RateCoverageDl => "rate_coverage_dl",
            Metric::RateCoverageUl => "rate_coverage_ul",
            Metric::P5RateDl => "p5_rate_dl",
            Metric::P5RateUl => "p5_rate_ul",
            Metric::P50RateDl => "p50_rate_dl",
            Metric::P50RateUl => "p50_rate_ul",
            Metric::P5SinrDbDl => "p5_sinr_db_dl",
            Metric::P5SinrDbUl => "p5_sinr_db_ul",
            Metric::P50SinrDbDl => "p50_sinr_db_dl",
            Metric::P50SinrDbUl => "p50_sinr_db_ul",
            Metric::MedianSinrSnrGapDbDl => "median_sinr_snr_gap_db_dl",
            Metric::MedianSinrSnrGapDbUl => "median_sinr_snr_gap_db_ul",
            Metric::CrossingRatioDl => "crossing_ratio_dl",
            Metric::CrossingRatioUl => "crossing_ratio_ul",
        }
    }

    fn direction(&self) -> Direction {
        match self {
            Metric::AssocScellUlBrp
            | Metric::AssocMcellUlBrp
            | Metric::AssocScellUlRate
            | Metric::AssocMcellUlRate
            | Metric::SinrCoverageUl
            | Metric::RateCoverageUl
            | Metric::P5RateUl
            | Metric::P50RateUl
            | Metric::P5SinrDbUl
            | Metric::P50SinrDbUl
            | Metric::MedianSinrSnrGapDbUl
            | Metric::CrossingRatioUl => Direction::Ul,
            _ => Direction::Dl,
        }
    }

    pub fn supports(&self, engine: Engine) -> bool {
        match self {
            Metric::CrossingRatioDl | Metric::CrossingRatioUl => engine == Engine::Analytic,
            Metric::MedianSinrSnrGapDbDl | Metric::MedianSinrSnrGapDbUl => engine == Engine::Mc,
            _ => true,
        }
    }

    /// The threshold axis this metric is defined over, if any.
    fn required_axis(&self) -> Option<ParamPath> {
        match self {
            Metric::SinrCoverageDl | Metric::SinrCoverageUl => Some(ParamPath::TauDb),
            Metric::RateCoverageDl | Metric::RateCoverageUl => Some(ParamPath::RateBps),
            _ => None,
        }
    }

    fn needs_link_samples(&self) -> bool {
        matches!(
            self,
            Metric::SinrCoverageDl
                | Metric::SinrCoverageUl
                | Metric::RateCoverageDl
                | Metric::RateCoverageUl
                | Metric::P5RateDl
                | Metric::P5RateUl
                | Metric::P50RateDl
                | Metric::P50RateUl
                | Metric::P5SinrDbDl
                | Metric::P5SinrDbUl
                | Metric::P50SinrDbDl
                | Metric::P50SinrDbUl
                | Metric::MedianSinrSnrGapDbDl
                | Metric::MedianSinrSnrGapDbUl
        )
    }

    fn needs_mmwave_interference(&self) -> bool {
        matches!(
            self,
            Metric::MedianSinrSnrGapDbDl | Metric::MedianSinrSnrGapDbUl
        )
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = Metric::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown metric `{s}`; expected one of {}", names.join(", "))
            })
    }
}

/// A named sweep: one swept parameter over a sorted grid, fixed overrides,
/// metrics to record and the engines to run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub swept: ParamPath,
    pub grid: Vec<f64>,
    pub metrics: Vec<Metric>,
    #[serde(default = "default_drops")]
    pub n_drops: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_engines")]
    pub engines: Vec<Engine>,
    /// Overrides applied before the sweep, `{param path: value}`.
    #[serde(default)]
    pub fixed: BTreeMap<ParamPath, f64>,
    /// Re-derive the UL biases from the DL ones at every grid point
    /// (`T'_s = P_s T_s / P_us`, `T'_m = P_m T_m / P_um`).
    #[serde(default)]
    pub coupled_ul_bias: bool,
    /// Cross-engine discrepancy above which a grid point is flagged.
    #[serde(default = "default_tolerance")]
    pub compare_tolerance: f64,
}

fn default_drops() -> usize {
    20_000
}
fn default_seed() -> u64 {
    1
}
fn default_engines() -> Vec<Engine> {
    vec![Engine::Analytic, Engine::Mc]
}
fn default_tolerance() -> f64 {
    0.05
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.grid.is_empty() {
            return Err(ExperimentError::Spec("grid must not be empty".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExperimentError::Spec(
                "grid must be strictly increasing".into(),
            ));
        }
        if self.metrics.is_empty() {
            return Err(ExperimentError::Spec("metrics must not be empty".into()));
        }
        if self.engines.is_empty() {
            return Err(ExperimentError::Spec("engines must not be empty".into()));
        }
        if self.n_drops == 0 && self.engines.contains(&Engine::Mc) {
            return Err(ExperimentError::Spec(
                "n_drops must be positive for the Monte Carlo engine".into(),
            ));
        }
        for m in &self.metrics {
            if let Some(axis) = m.required_axis() {
                if self.swept != axis {
                    return Err(ExperimentError::Spec(format!(
                        "metric `{m}` needs swept = {axis}, spec sweeps {}",
                        self.swept
                    )));
                }
            }
            if !self.engines.iter().any(|e| m.supports(*e)) {
                return Err(ExperimentError::Spec(format!(
                    "metric `{m}` is not supported by any requested engine"
                )));
            }
        }
        Ok(())
    }

    /// Parameters in effect at one grid point.
    fn params_at(&self, base: &SystemParams, value: f64) -> SystemParams {
        let mut p = base.clone();
        for (path, v) in &self.fixed {
            path.apply(&mut p, *v);
        }
        self.swept.apply(&mut p, value);
        if self.coupled_ul_bias {
            p = p.with_coupled_ul_bias();
        }
        p
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// One row of a curve file.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub swept: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A sampled curve for one (metric, engine).
#[derive(Clone, Debug, Serialize)]
pub struct Curve {
    pub metric: Metric,
    pub engine: Engine,
    pub points: Vec<CurvePoint>,
}

/// Cross-engine comparison for one metric.
#[derive(Clone, Debug, Serialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub max_abs_gap: f64,
    pub gap_at: f64,
    /// Swept values whose gap exceeded the spec tolerance.
    pub flagged: Vec<f64>,
}

/// A per-point engine failure (the run continues).
#[derive(Clone, Debug, Serialize)]
pub struct PointError {
    pub metric: Metric,
    pub engine: Engine,
    pub swept: f64,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub spec: ExperimentSpec,
    pub curves: Vec<Curve>,
    pub comparisons: Vec<MetricComparison>,
    pub point_errors: Vec<PointError>,
    pub elapsed_seconds: f64,
    pub files: Vec<PathBuf>,
}

/// Everything the Monte Carlo engine produced at one grid point.
struct McPoint {
    samples: Option<Vec<DropSample>>,
    assoc_brp: Option<EmpiricalAssoc>,
    assoc_rate: Option<EmpiricalAssoc>,
}

fn link(s: &DropSample, dir: Direction) -> &LinkSample {
    match dir {
        Direction::Dl => &s.dl,
        Direction::Ul => &s.ul,
    }
}

/// Rank-based 95% CI for the `q`-quantile of sorted samples.
fn quantile_ci(sorted: &[f64], q: f64) -> (f64, f64) {
    let n = sorted.len() as f64;
    let half = 1.96 * (n * q * (1.0 - q)).sqrt();
    let lo = (q * n - half).floor().max(0.0) as usize;
    let hi = ((q * n + half).ceil() as usize).min(sorted.len() - 1);
    (sorted[lo.min(sorted.len() - 1)], sorted[hi])
}

fn analytic_metric(
    analysis: &Analysis,
    metric: Metric,
    value: f64,
) -> Result<f64, ExperimentError> {
    let dir = metric.direction();
    let v = match metric {
        Metric::AssocScellDlBrp | Metric::AssocScellUlBrp => analysis.assoc_brp(dir)?.p_scell,
        Metric::AssocMcellDlBrp | Metric::AssocMcellUlBrp => analysis.assoc_brp(dir)?.p_mcell,
        Metric::AssocScellDlRate | Metric::AssocScellUlRate => analysis.assoc_rate(dir)?.p_scell,
        Metric::AssocMcellDlRate | Metric::AssocMcellUlRate => analysis.assoc_rate(dir)?.p_mcell,
        Metric::DecouplingGainBrp => (analysis.assoc_brp(Direction::Ul)?.p_scell
            - analysis.assoc_brp(Direction::Dl)?.p_scell)
            .abs(),
        Metric::DecouplingGainRate => (analysis.assoc_rate(Direction::Ul)?.p_scell
            - analysis.assoc_rate(Direction::Dl)?.p_scell)
            .abs(),
        Metric::SinrCoverageDl | Metric::SinrCoverageUl => {
            analysis.sinr_coverage(dir, db_to_linear(value))?.total()
        }
        Metric::RateCoverageDl | Metric::RateCoverageUl => {
            analysis.rate_coverage(dir, value)?.total()
        }
        Metric::P5RateDl | Metric::P5RateUl => analysis.percentile_rate(dir, 0.95)?,
        Metric::P50RateDl | Metric::P50RateUl => analysis.percentile_rate(dir, 0.50)?,
        Metric::P5SinrDbDl | Metric::P5SinrDbUl => {
            linear_to_db(analysis.percentile_sinr(dir, 0.95)?)
        }
        Metric::P50SinrDbDl | Metric::P50SinrDbUl => {
            linear_to_db(analysis.percentile_sinr(dir, 0.50)?)
        }
        Metric::CrossingRatioDl | Metric::CrossingRatioUl => {
            crossing_ratio(analysis.params(), dir)?
        }
        Metric::MedianSinrSnrGapDbDl | Metric::MedianSinrSnrGapDbUl => {
            return Err(ExperimentError::Spec(format!(
                "metric `{metric}` has no analytic engine"
            )))
        }
    };
    Ok(v)
}

fn mc_assoc_point(
    e: Option<&EmpiricalAssoc>,
    metric: Metric,
    value: f64,
) -> Result<CurvePoint, ExperimentError> {
    let e = e.ok_or_else(|| ExperimentError::Spec(format!("metric `{metric}` lacks MC data")))?;
    let (est, flip) = match metric {
        Metric::AssocScellDlBrp | Metric::AssocScellDlRate => (e.dl_scell, false),
        Metric::AssocScellUlBrp | Metric::AssocScellUlRate => (e.ul_scell, false),
        Metric::AssocMcellDlBrp | Metric::AssocMcellDlRate => (e.dl_scell, true),
        Metric::AssocMcellUlBrp | Metric::AssocMcellUlRate => (e.ul_scell, true),
        Metric::DecouplingGainBrp | Metric::DecouplingGainRate => (e.decoupling_gain, false),
        _ => unreachable!("not an association metric"),
    };
    Ok(if flip {
        CurvePoint {
            swept: value,
            estimate: 1.0 - est.p,
            ci_low: 1.0 - est.ci_high,
            ci_high: 1.0 - est.ci_low,
        }
    } else {
        CurvePoint {
            swept: value,
            estimate: est.p,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
        }
    })
}

fn mc_metric(point: &McPoint, metric: Metric, value: f64) -> Result<CurvePoint, ExperimentError> {
    let dir = metric.direction();
    match metric {
        Metric::AssocScellDlBrp
        | Metric::AssocScellUlBrp
        | Metric::AssocMcellDlBrp
        | Metric::AssocMcellUlBrp
        | Metric::DecouplingGainBrp => {
            return mc_assoc_point(point.assoc_brp.as_ref(), metric, value)
        }
        Metric::AssocScellDlRate
        | Metric::AssocScellUlRate
        | Metric::AssocMcellDlRate
        | Metric::AssocMcellUlRate
        | Metric::DecouplingGainRate => {
            return mc_assoc_point(point.assoc_rate.as_ref(), metric, value)
        }
        _ => {}
    }
    let samples = point
        .samples
        .as_ref()
        .ok_or_else(|| ExperimentError::Spec(format!("metric `{metric}` lacks MC data")))?;
    let n = samples.len();
    let prob_point = |k: u64| {
        let p = ProbEstimate::from_fraction(k, n as u64);
        CurvePoint {
            swept: value,
            estimate: p.p,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
        }
    };
    let quantile_point = |values: &mut Vec<f64>, q: f64| {
        values.sort_by(f64::total_cmp);
        let (lo, hi) = quantile_ci(values, q);
        CurvePoint {
            swept: value,
            estimate: quantile(values, q),
            ci_low: lo,
            ci_high: hi,
        }
    };
    let cp = match metric {
        Metric::SinrCoverageDl | Metric::SinrCoverageUl => {
            let tau = db_to_linear(value);
            prob_point(
                samples
                    .iter()
                    .filter(|s| {
                        let l = link(s, dir);
                        l.sinr.unwrap_or(l.snr) > tau
                    })
                    .count() as u64,
            )
        }
        Metric::RateCoverageDl | Metric::RateCoverageUl => prob_point(
            samples
                .iter()
                .filter(|s| link(s, dir).rate_bps > value)
                .count() as u64,
        ),
        Metric::P5RateDl | Metric::P5RateUl | Metric::P50RateDl | Metric::P50RateUl => {
            let q = match metric {
                Metric::P5RateDl | Metric::P5RateUl => 0.05,
                _ => 0.50,
            };
            let mut rates: Vec<f64> = samples.iter().map(|s| link(s, dir).rate_bps).collect();
            quantile_point(&mut rates, q)
        }
        Metric::P5SinrDbDl | Metric::P5SinrDbUl | Metric::P50SinrDbDl | Metric::P50SinrDbUl => {
            let q = match metric {
                Metric::P5SinrDbDl | Metric::P5SinrDbUl => 0.05,
                _ => 0.50,
            };
            let mut sinrs: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let l = link(s, dir);
                    linear_to_db(l.sinr.unwrap_or(l.snr))
                })
                .collect();
            quantile_point(&mut sinrs, q)
        }
        Metric::MedianSinrSnrGapDbDl | Metric::MedianSinrSnrGapDbUl => {
            let mut gaps: Vec<f64> = samples
                .iter()
                .filter_map(|s| {
                    let l = link(s, dir);
                    if l.serving == Tier::Scell {
                        let sinr = l.sinr.expect("gap metric runs with interference on");
                        Some(linear_to_db(l.snr) - linear_to_db(sinr))
                    } else {
                        None
                    }
                })
                .collect();
            if gaps.is_empty() {
                return Err(ExperimentError::Spec(
                    "no mmWave-served drops for the SINR/SNR gap".into(),
                ));
            }
            quantile_point(&mut gaps, 0.5)
        }
        _ => unreachable!("association metrics handled above"),
    };
    Ok(cp)
}

/// Result of a crossing search.
#[derive(Debug)]
pub struct Crossing {
    pub at: f64,
    /// More than one sign change was present; the first one is reported.
    pub multiple: bool,
}

/// Finds the swept value where `p_scell - p_mcell` changes sign, by linear
/// interpolation on a shared grid.
pub fn crossing_point(
    grid: &[f64],
    p_mcell: &[f64],
    p_scell: &[f64],
) -> Result<Crossing, ExperimentError> {
    if grid.len() != p_mcell.len() || grid.len() != p_scell.len() || grid.len() < 2 {
        return Err(ExperimentError::Spec(
            "crossing_point needs equally sized curves with >= 2 points".into(),
        ));
    }
    let diff: Vec<f64> = p_scell.iter().zip(p_mcell).map(|(s, m)| s - m).collect();
    let mut first: Option<f64> = None;
    let mut count = 0;
    for i in 1..diff.len() {
        if diff[i - 1] == 0.0 {
            if first.is_none() {
                first = Some(grid[i - 1]);
            }
            count += 1;
        } else if diff[i - 1] * diff[i] < 0.0 {
            let t = diff[i - 1] / (diff[i - 1] - diff[i]);
            if first.is_none() {
                first = Some(grid[i - 1] + t * (grid[i] - grid[i - 1]));
            }
            count += 1;
        }
    }
    match first {
        Some(at) => Ok(Crossing {
            at,
            multiple: count > 1,
        }),
        None => Err(ExperimentError::NoCrossing(format!(
            "p_scell - p_mcell keeps its sign over the grid (ends {:+.4} .. {:+.4})",
            diff.first().unwrap(),
            diff.last().unwrap()
        ))),
    }
}

/// Internal density-ratio grid used when locating association crossings.
const CROSSING_RATIO_GRID: [f64; 16] = [
    1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 14.0, 20.0, 28.0, 40.0, 55.0, 75.0, 100.0, 140.0,
];

fn crossing_ratio(params: &SystemParams, direction: Direction) -> Result<f64, ExperimentError> {
    let mut p_m = Vec::with_capacity(CROSSING_RATIO_GRID.len());
    let mut p_s = Vec::with_capacity(CROSSING_RATIO_GRID.len());
    for &ratio in &CROSSING_RATIO_GRID {
        let mut p = params.clone();
        p.lambda_s = ratio * p.lambda_m;
        let a = Analysis::new(p)?;
        let r = a.assoc_brp(direction)?;
        p_m.push(r.p_mcell);
        p_s.push(r.p_scell);
    }
    Ok(crossing_point(&CROSSING_RATIO_GRID, &p_m, &p_s)?.at)
}

/// Runs one experiment: writes one CSV per (metric, engine) and a JSON
/// report comparing engines wherever both ran.
pub fn run_experiment(
    spec: &ExperimentSpec,
    base: &SystemParams,
    out_dir: &Path,
) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let started = std::time::Instant::now();
    fs::create_dir_all(out_dir)?;

    let needs_samples = spec.metrics.iter().any(|m| m.needs_link_samples());
    let needs_brp = spec.metrics.iter().any(|m| {
        matches!(
            m,
            Metric::AssocScellDlBrp
                | Metric::AssocScellUlBrp
                | Metric::AssocMcellDlBrp
                | Metric::AssocMcellUlBrp
                | Metric::DecouplingGainBrp
        )
    });
    let needs_rate = spec.metrics.iter().any(|m| {
        matches!(
            m,
            Metric::AssocScellDlRate
                | Metric::AssocScellUlRate
                | Metric::AssocMcellDlRate
                | Metric::AssocMcellUlRate
                | Metric::DecouplingGainRate
        )
    });
    let needs_interference = spec.metrics.iter().any(|m| m.needs_mmwave_interference());
    let run_mc = spec.engines.contains(&Engine::Mc);
    let threshold_axis = spec.swept.is_threshold_axis();

    let mut point_errors: Vec<PointError> = Vec::new();
    let mut curves: Vec<Curve> = Vec::new();
    for &engine in &spec.engines {
        for &metric in &spec.metrics {
            if metric.supports(engine) {
                curves.push(Curve {
                    metric,
                    engine,
                    points: Vec::new(),
                });
            }
        }
    }

    let mc_point_for = |index: usize, value: f64| -> Result<McPoint, ExperimentError> {
        let params = spec.params_at(base, value);
        let opts = SimOptions {
            n_drops: spec.n_drops,
            seed: rng::derive_seed(spec.seed, index as u64),
            include_mmwave_interference: needs_interference,
            ..SimOptions::default()
        };
        let sim = Simulator::new(params, opts)?;
        Ok(McPoint {
            samples: needs_samples.then(|| sim.link_samples()),
            assoc_brp: needs_brp.then(|| sim.empirical_assoc(AssocCriterion::MaxBrp)),
            assoc_rate: needs_rate.then(|| sim.empirical_assoc(AssocCriterion::MaxRate)),
        })
    };

    // Threshold axes reuse a single Monte Carlo run for every grid value.
    let shared_mc: Option<McPoint> = if run_mc && threshold_axis {
        Some(mc_point_for(0, spec.grid[0])?)
    } else {
        None
    };

    for (i, &value) in spec.grid.iter().enumerate() {
        let params = spec.params_at(base, value);
        let analysis = if spec.engines.contains(&Engine::Analytic) {
            Some(Analysis::new(params.clone())?)
        } else {
            None
        };
        let mc_point: Option<McPoint> = if run_mc && !threshold_axis {
            match mc_point_for(i, value) {
                Ok(p) => Some(p),
                Err(e) => {
                    for &metric in &spec.metrics {
                        if metric.supports(Engine::Mc) {
                            point_errors.push(PointError {
                                metric,
                                engine: Engine::Mc,
                                swept: value,
                                message: e.to_string(),
                            });
                        }
                    }
                    None
                }
            }
        } else {
            None
        };

        for curve in &mut curves {
            match curve.engine {
                Engine::Analytic => {
                    let analysis = analysis.as_ref().expect("analytic engine requested");
                    match analytic_metric(analysis, curve.metric, value) {
                        Ok(est) => curve.points.push(CurvePoint {
                            swept: value,
                            estimate: est,
                            ci_low: est,
                            ci_high: est,
                        }),
                        Err(e) => point_errors.push(PointError {
                            metric: curve.metric,
                            engine: Engine::Analytic,
                            swept: value,
                            message: e.to_string(),
                        }),
                    }
                }
                Engine::Mc => {
                    let point = if threshold_axis {
                        shared_mc.as_ref()
                    } else {
                        mc_point.as_ref()
                    };
                    if let Some(point) = point {
                        match mc_metric(point, curve.metric, value) {
                            Ok(cp) => curve.points.push(cp),
                            Err(e) => point_errors.push(PointError {
                                metric: curve.metric,
                                engine: Engine::Mc,
                                swept: value,
                                message: e.to_string(),
                            }),
                        }
                    }
                }
            }
        }
    }

    // cross-engine comparison where both engines produced a point
    let mut comparisons = Vec::new();
    for &metric in &spec.metrics {
        let find = |engine: Engine| {
            curves
                .iter()
                .find(|c| c.metric == metric && c.engine == engine)
        };
        if let (Some(a), Some(m)) = (find(Engine::Analytic), find(Engine::Mc)) {
            let mut max_abs_gap = 0.0f64;
            let mut gap_at = f64::NAN;
            let mut flagged = Vec::new();
            for pa in &a.points {
                if let Some(pm) = m.points.iter().find(|pm| pm.swept == pa.swept) {
                    let gap = (pa.estimate - pm.estimate).abs();
                    if gap > max_abs_gap {
                        max_abs_gap = gap;
                        gap_at = pa.swept;
                    }
                    if gap > spec.compare_tolerance {
                        flagged.push(pa.swept);
                    }
                }
            }
            comparisons.push(MetricComparison {
                metric,
                max_abs_gap,
                gap_at,
                flagged,
            });
        }
    }

    let mut files = Vec::new();
    for curve in &curves {
        let path = out_dir.join(format!(
            "{}__{}__{}.csv",
            spec.name, curve.metric, curve.engine
        ));
        let mut w = fs::File::create(&path)?;
        writeln!(w, "swept_value,estimate,ci_low,ci_high")?;
        for p in &curve.points {
            writeln!(w, "{},{},{},{}", p.swept, p.estimate, p.ci_low, p.ci_high)?;
        }
        files.push(path);
    }

    let report = ExperimentReport {
        name: spec.name.clone(),
        spec: spec.clone(),
        curves,
        comparisons,
        point_errors,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        files,
    };
    let report_path = out_dir.join(format!("{}__report.json", spec.name));
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Grid for the decoupling-gain table over blockage and PLE parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecouplingGrid {
    pub alpha_n: Vec<f64>,
    pub alpha_m: Vec<f64>,
    pub mu_m: Vec<f64>,
    /// Density ratios searched for the maximum gain.
    pub ratio_grid: Vec<f64>,
}

impl Default for DecouplingGrid {
    fn default() -> Self {
        Self {
            alpha_n: vec![3.0, 3.5, 4.0, 4.5],
            alpha_m: vec![3.0, 4.0],
            mu_m: vec![100.0, 200.0, 300.0],
            ratio_grid: vec![1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0],
        }
    }
}

/// One cell of the decoupling-gain table: the maximum analytic Max-BRP
/// decoupling gain over the density-ratio grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecouplingCell {
    pub alpha_n: f64,
    pub alpha_m: f64,
    pub mu_m: f64,
    pub max_gain: f64,
    pub argmax_ratio: f64,
}

pub fn decoupling_gain_sweep(
    base: &SystemParams,
    grid: &DecouplingGrid,
) -> Result<Vec<DecouplingCell>, ExperimentError> {
    let mut cells = Vec::new();
    for &alpha_n in &grid.alpha_n {
        for &alpha_m in &grid.alpha_m {
            for &mu in &grid.mu_m {
                let mut best = (0.0f64, f64::NAN);
                for &ratio in &grid.ratio_grid {
                    let mut p = base.clone();
                    p.alpha_n = alpha_n;
                    p.alpha_m = alpha_m;
                    p.mu = mu;
                    p.lambda_s = ratio * p.lambda_m;
                    let a = Analysis::new(p)?;
                    let gain = (a.assoc_brp(Direction::Ul)?.p_scell
                        - a.assoc_brp(Direction::Dl)?.p_scell)
                        .abs();
                    if gain > best.0 {
                        best = (gain, ratio);
                    }
                }
                cells.push(DecouplingCell {
                    alpha_n,
                    alpha_m,
                    mu_m: mu,
                    max_gain: best.0,
                    argmax_ratio: best.1,
                });
            }
        }
    }
    Ok(cells)
}

/// Writes the decoupling table as CSV plus a JSON echo; returns the paths.
pub fn run_decoupling_experiment(
    base: &SystemParams,
    grid: &DecouplingGrid,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(out_dir)?;
    let cells = decoupling_gain_sweep(base, grid)?;
    let csv_path = out_dir.join("fig4__decoupling_gain__analytic.csv");
    let mut w = fs::File::create(&csv_path)?;
    writeln!(w, "alpha_n,alpha_m,mu_m,max_gain,argmax_ratio")?;
    for c in &cells {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.alpha_n, c.alpha_m, c.mu_m, c.max_gain, c.argmax_ratio
        )?;
    }
    let json_path = out_dir.join("fig4__report.json");
    fs::write(&json_path, serde_json::to_string_pretty(&cells)?)?;
    Ok(vec![csv_path, json_path])
}

/// A built-in experiment: either a list of sweeps or the decoupling table.
pub enum Builtin {
    Sweeps(Vec<ExperimentSpec>),
    Decoupling(DecouplingGrid),
}

pub const BUILTIN_NAMES: [&str; 9] = [
    "fig2a", "fig2b", "fig3", "fig4", "fig5", "fig7", "fig8", "fig9", "fig10",
];

/// The experiment library mirroring the evaluation figures.
pub fn builtin(name: &str) -> Option<Builtin> {
    let ratio_grid = vec![1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 70.0, 100.0];
    let assoc_metrics = vec![
        Metric::AssocScellDlBrp,
        Metric::AssocScellUlBrp,
        Metric::AssocMcellDlBrp,
        Metric::AssocMcellUlBrp,
        Metric::DecouplingGainBrp,
    ];
    let bias_grid: Vec<f64> = (0..=12).map(|i| 5.0 * i as f64).collect();
    let spec = |name: &str,
                swept: ParamPath,
                grid: Vec<f64>,
                metrics: Vec<Metric>,
                engines: Vec<Engine>,
                fixed: &[(ParamPath, f64)],
                coupled: bool| {
        ExperimentSpec {
            name: name.into(),
            swept,
            grid,
            metrics,
            n_drops: default_drops(),
            seed: default_seed(),
            engines,
            fixed: fixed.iter().copied().collect(),
            coupled_ul_bias: coupled,
            compare_tolerance: default_tolerance(),
        }
    };
    let both = || vec![Engine::Analytic, Engine::Mc];
    match name {
        "fig2a" => Some(Builtin::Sweeps(vec![spec(
            "fig2a",
            ParamPath::LambdaRatio,
            ratio_grid,
            assoc_metrics,
            both(),
            &[(ParamPath::GSMaxDbi, 23.0)],
            false,
        )])),
        "fig2b" => Some(Builtin::Sweeps(vec![spec(
            "fig2b",
            ParamPath::LambdaRatio,
            ratio_grid,
            assoc_metrics,
            both(),
            &[(ParamPath::GSMaxDbi, 0.0)],
            false,
        )])),
        "fig3" => Some(Builtin::Sweeps(vec![spec(
            "fig3",
            ParamPath::GSMaxDbi,
            (0..=10).map(|i| 3.0 * i as f64).collect(),
            vec![Metric::CrossingRatioDl, Metric::CrossingRatioUl],
            vec![Engine::Analytic],
            &[],
            false,
        )])),
        "fig4" => Some(Builtin::Decoupling(DecouplingGrid::default())),
        "fig5" => Some(Builtin::Sweeps(vec![
            spec(
                "fig5a",
                ParamPath::TauDb,
                (-10..=30).map(f64::from).collect(),
                vec![Metric::SinrCoverageDl, Metric::SinrCoverageUl],
                both(),
                &[],
                true,
            ),
            spec(
                "fig5b",
                ParamPath::RateBps,
                (0..=25).map(|i| 1e5 * 10f64.powf(i as f64 / 5.0)).collect(),
                vec![Metric::RateCoverageDl, Metric::RateCoverageUl],
                both(),
                &[],
                true,
            ),
        ])),
        "fig7" => Some(Builtin::Sweeps(vec![spec(
            "fig7",
            ParamPath::LambdaSPerKm2,
            vec![30.0, 200.0],
            vec![Metric::MedianSinrSnrGapDbDl, Metric::MedianSinrSnrGapDbUl],
            vec![Engine::Mc],
            &[],
            true,
        )])),
        "fig8" => Some(Builtin::Sweeps(vec![spec(
            "fig8",
            ParamPath::TSDb,
            bias_grid,
            vec![
                Metric::P5RateDl,
                Metric::P5RateUl,
                Metric::P5SinrDbDl,
                Metric::P5SinrDbUl,
            ],
            both(),
            &[],
            true,
        )])),
        "fig9" => Some(Builtin::Sweeps(vec![spec(
            "fig9",
            ParamPath::TSDb,
            bias_grid,
            vec![
                Metric::P50RateDl,
                Metric::P50RateUl,
                Metric::P50SinrDbDl,
                Metric::P50SinrDbUl,
            ],
            both(),
            &[],
            true,
        )])),
        "fig10" => {
            let sweeps = [30.0, 50.0, 100.0]
                .iter()
                .map(|&ls| {
                    spec(
                        &format!("fig10_s{ls:.0}"),
                        ParamPath::TSDb,
                        bias_grid.clone(),
                        vec![Metric::P5RateDl, Metric::P5RateUl],
                        vec![Engine::Analytic],
                        &[(ParamPath::LambdaSPerKm2, ls)],
                        true,
                    )
                })
                .collect();
            Some(Builtin::Sweeps(sweeps))
        }
        _ => None,
    }
}

/// Writes per-drop link samples as CSV: one row per (drop, direction).
pub fn write_samples_csv(path: &Path, samples: &[DropSample]) -> Result<(), ExperimentError> {
    let mut w = fs::File::create(path)?;
    writeln!(w, "drop,direction,serving_tier,sinr_db,snr_db,rate_bps,load")?;
    for (i, s) in samples.iter().enumerate() {
        for dir in Direction::BOTH {
            let l = link(s, dir);
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i,
                dir,
                l.serving,
                linear_to_db(l.sinr.unwrap_or(l.snr)),
                linear_to_db(l.snr),
                l.rate_bps,
                l.load
            )?;
        }
    }
    Ok(())
}

/// Point-estimate summary of a Monte Carlo run, for the JSON interface.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary {
    pub n_drops: usize,
    pub seed: u64,
    pub dl: DirectionSummary,
    pub ul: DirectionSummary,
    /// Fraction of non-serving Mcells with no UL UE to schedule.
    pub silent_mcell_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionSummary {
    pub p_scell: ProbEstimate,
    pub sinr_coverage_0db: ProbEstimate,
    pub p5_rate_bps: f64,
    pub p50_rate_bps: f64,
    pub mean_load: f64,
}

pub fn summarize(samples: &[DropSample], n_drops: usize, seed: u64) -> SimulationSummary {
    let n = samples.len() as u64;
    let dir_summary = |dir: Direction| {
        let scell = samples
            .iter()
            .filter(|s| link(s, dir).serving == Tier::Scell)
            .count() as u64;
        let covered = samples
            .iter()
            .filter(|s| {
                let l = link(s, dir);
                l.sinr.unwrap_or(l.snr) > 1.0
            })
            .count() as u64;
        let mut rates: Vec<f64> = samples.iter().map(|s| link(s, dir).rate_bps).collect();
        rates.sort_by(f64::total_cmp);
        let mean_load = samples.iter().map(|s| link(s, dir).load as f64).sum::<f64>() / n as f64;
        DirectionSummary {
            p_scell: ProbEstimate::from_fraction(scell, n),
            sinr_coverage_0db: ProbEstimate::from_fraction(covered, n),
            p5_rate_bps: quantile(&rates, 0.05),
            p50_rate_bps: quantile(&rates, 0.50),
            mean_load,
        }
    };
    let silent: u64 = samples.iter().map(|s| s.silent_mcells as u64).sum();
    let others: u64 = samples.iter().map(|s| s.other_mcells as u64).sum();
    SimulationSummary {
        n_drops,
        seed,
        dl: dir_summary(Direction::Dl),
        ul: dir_summary(Direction::Ul),
        silent_mcell_fraction: silent as f64 / others.max(1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn crossing_interpolates_linearly() {
        let grid = [10.0, 20.0];
        let p_m = [0.8, 0.4];
        let p_s = [0.2, 0.6];
        let c = crossing_point(&grid, &p_m, &p_s).unwrap();
        assert_abs_diff_eq!(c.at, 15.0, epsilon = 1e-12);
        assert!(!c.multiple);
    }

    #[test]
    fn identical_sign_curves_yield_no_crossing() {
        let grid = [1.0, 2.0, 3.0];
        let p_m = [0.5, 0.6, 0.7];
        let p_s = [0.3, 0.4, 0.5];
        let err = crossing_point(&grid, &p_m, &p_s).unwrap_err();
        assert!(matches!(err, ExperimentError::NoCrossing(_)));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let spec = ExperimentSpec {
            name: "bad".into(),
            swept: ParamPath::TSDb,
            grid: vec![],
            metrics: vec![Metric::P5RateDl],
            n_drops: 10,
            seed: 1,
            engines: vec![Engine::Analytic],
            fixed: BTreeMap::new(),
            coupled_ul_bias: false,
            compare_tolerance: 0.05,
        };
        assert!(matches!(spec.validate(), Err(ExperimentError::Spec(_))));
    }

    #[test]
    fn threshold_metrics_demand_their_axis() {
        let spec = ExperimentSpec {
            name: "bad".into(),
            swept: ParamPath::TSDb,
            grid: vec![0.0, 5.0],
            metrics: vec![Metric::SinrCoverageDl],
            n_drops: 10,
            seed: 1,
            engines: vec![Engine::Analytic],
            fixed: BTreeMap::new(),
            coupled_ul_bias: false,
            compare_tolerance: 0.05,
        };
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("tau_db"));
    }

    #[test]
    fn unknown_metric_name_lists_valid_ones() {
        let err = Metric::from_str("coverage_of_dreams").unwrap_err();
        assert!(err.contains("assoc_scell_dl_brp"));
    }

    #[test]
    fn builtin_names_resolve() {
        for name in BUILTIN_NAMES {
            assert!(builtin(name).is_some(), "missing builtin {name}");
        }
        assert!(builtin("fig99").is_none());
        if let Some(Builtin::Sweeps(sweeps)) = builtin("fig5") {
            for s in sweeps {
                s.validate().unwrap();
            }
        } else {
            panic!("fig5 should be sweeps");
        }
        if let Some(Builtin::Sweeps(sweeps)) = builtin("fig10") {
            assert_eq!(sweeps.len(), 3);
        } else {
            panic!("fig10 should be sweeps");
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let Some(Builtin::Sweeps(sweeps)) = builtin("fig8") else {
            panic!()
        };
        let text = serde_json::to_string(&sweeps[0]).unwrap();
        let back = ExperimentSpec::from_json(&text).unwrap();
        assert_eq!(back.name, "fig8");
        assert_eq!(back.swept, ParamPath::TSDb);
        assert!(back.coupled_ul_bias);
    }

    #[test]
    fn experiment_runs_and_reproduces_byte_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            name: "mini".into(),
            swept: ParamPath::LambdaRatio,
            grid: vec![5.0, 20.0],
            metrics: vec![Metric::AssocScellDlBrp, Metric::AssocScellUlBrp],
            n_drops: 300,
            seed: 9,
            engines: vec![Engine::Analytic, Engine::Mc],
            fixed: BTreeMap::new(),
            coupled_ul_bias: false,
            compare_tolerance: 0.08,
        };
        let base = SystemParams::table_i();
        let report = run_experiment(&spec, &base, dir.path()).unwrap();
        assert_eq!(report.curves.len(), 4);
        assert!(report.point_errors.is_empty(), "{:?}", report.point_errors);
        assert_eq!(report.comparisons.len(), 2);
        for c in &report.comparisons {
            assert!(c.max_abs_gap < 0.08, "{c:?}");
        }
        let csv = dir.path().join("mini__assoc_scell_dl_brp__mc.csv");
        let first = fs::read(&csv).unwrap();
        run_experiment(&spec, &base, dir.path()).unwrap();
        let second = fs::read(&csv).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("swept_value,estimate,ci_low,ci_high\n"));
        let rows: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(rows, vec![5.0, 20.0]);
    }

    #[test]
    fn decoupling_sweep_prefers_larger_los_ball() {
        let mut base = SystemParams::table_i();
        base.g_s_max = db_to_linear(23.0);
        let grid = DecouplingGrid {
            alpha_n: vec![4.0],
            alpha_m: vec![3.0],
            mu_m: vec![100.0, 200.0],
            ratio_grid: vec![10.0, 40.0, 80.0],
        };
        let cells = decoupling_gain_sweep(&base, &grid).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(
            cells[1].max_gain >= cells[0].max_gain,
            "mu=200 gain {} should beat mu=100 gain {}",
            cells[1].max_gain,
            cells[0].max_gain
        );
    }

    #[test]
    fn equal_slopes_collapse_the_decoupling_gain() {
        let mut base = SystemParams::table_i();
        base.g_s_max = db_to_linear(23.0);
        base.alpha_l = 3.0; // grid sets alpha_n = 3 too: single-slope Scells
        let grid = DecouplingGrid {
            alpha_n: vec![3.0],
            alpha_m: vec![3.0],
            mu_m: vec![200.0],
            ratio_grid: vec![10.0, 40.0],
        };
        let collapsed = decoupling_gain_sweep(&base, &grid).unwrap()[0].max_gain;
        let mut two_slope = SystemParams::table_i();
        two_slope.g_s_max = db_to_linear(23.0);
        let grid2 = DecouplingGrid {
            alpha_n: vec![4.0],
            alpha_m: vec![3.0],
            mu_m: vec![200.0],
            ratio_grid: vec![10.0, 40.0],
        };
        let blocked = decoupling_gain_sweep(&two_slope, &grid2).unwrap()[0].max_gain;
        assert!(
            collapsed < blocked,
            "single-slope gain {collapsed} should fall below blocked gain {blocked}"
        );
    }
}
