//! System parameters and derived constants.
//!
//! Configuration is a flat JSON document in the units radio engineers use
//! on the wire (dBm, dBi, dB, per-km², degrees); everything is converted to
//! SI-linear form on load and all internal math stays linear. dB conversion
//! happens only at this boundary and in the CLI.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise floor in dBm/Hz.
pub const NOISE_FLOOR_DBM_HZ: f64 = -174.0;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("configuration is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Full system parameterization in SI-linear units.
///
/// Densities are per m², powers in W, frequencies and bandwidths in Hz,
/// biases and gains linear, angles in radians, distances in m.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Mcell, Scell and UE densities (points per m²).
    pub lambda_m: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    /// Mcell / Scell transmit powers and UE transmit powers toward each tier (W).
    pub p_m: f64,
    pub p_s: f64,
    pub p_um: f64,
    pub p_us: f64,
    /// Carrier frequencies (Hz).
    pub f_m: f64,
    pub f_s: f64,
    /// Bandwidths (Hz).
    pub w_m: f64,
    pub w_s: f64,
    /// DL association biases (linear).
    pub t_m: f64,
    pub t_s: f64,
    /// UL association biases (linear).
    pub t_m_ul: f64,
    pub t_s_ul: f64,
    /// Pathloss exponents: Mcell, Scell LOS, Scell NLOS.
    pub alpha_m: f64,
    pub alpha_l: f64,
    pub alpha_n: f64,
    /// mmWave main-lobe gain, side-lobe gain, Mcell gain (linear).
    pub g_s_max: f64,
    pub g_s_min: f64,
    pub g_m: f64,
    /// mmWave beamwidth (radians).
    pub theta_s: f64,
    /// LOS probability inside the LOS ball and ball radius (m).
    pub omega: f64,
    pub mu: f64,
    /// Receiver noise figure (linear).
    pub noise_figure: f64,
    /// UL fractional pathloss-compensation factor.
    pub epsilon: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::table_i()
    }
}

impl SystemParams {
    /// The baseline configuration: 5 Mcells, 50 Scells and 200 UEs per km²,
    /// 2 GHz / 70 GHz carriers, 20 MHz / 1 GHz bandwidths, 46 / 30 / 23 dBm
    /// powers, unit biases, PLEs 3 / 2 / 4, 18 / −2 / 0 dBi gains, 10°
    /// beamwidth, LOS ball (0.11, 200 m), 10 dB noise figure.
    pub fn table_i() -> Self {
        Self {
            lambda_m: 5e-6,
            lambda_s: 50e-6,
            lambda_u: 200e-6,
            p_m: dbm_to_watts(46.0),
            p_s: dbm_to_watts(30.0),
            p_um: dbm_to_watts(23.0),
            p_us: dbm_to_watts(23.0),
            f_m: 2e9,
            f_s: 70e9,
            w_m: 20e6,
            w_s: 1e9,
            t_m: 1.0,
            t_s: 1.0,
            t_m_ul: 1.0,
            t_s_ul: 1.0,
            alpha_m: 3.0,
            alpha_l: 2.0,
            alpha_n: 4.0,
            g_s_max: db_to_linear(18.0),
            g_s_min: db_to_linear(-2.0),
            g_m: db_to_linear(0.0),
            theta_s: 10f64.to_radians(),
            omega: 0.11,
            mu: 200.0,
            noise_figure: db_to_linear(10.0),
            epsilon: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ParamError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ParamError::Invalid {
                    field,
                    reason: format!("must be > 0, got {v}"),
                })
            }
        }
        positive("lambda_m", self.lambda_m)?;
        positive("lambda_s", self.lambda_s)?;
        positive("lambda_u", self.lambda_u)?;
        positive("p_m", self.p_m)?;
        positive("p_s", self.p_s)?;
        positive("p_um", self.p_um)?;
        positive("p_us", self.p_us)?;
        positive("f_m", self.f_m)?;
        positive("f_s", self.f_s)?;
        positive("w_m", self.w_m)?;
        positive("w_s", self.w_s)?;
        positive("t_m", self.t_m)?;
        positive("t_s", self.t_s)?;
        positive("t_m_ul", self.t_m_ul)?;
        positive("t_s_ul", self.t_s_ul)?;
        positive("g_s_max", self.g_s_max)?;
        positive("g_s_min", self.g_s_min)?;
        positive("g_m", self.g_m)?;
        positive("noise_figure", self.noise_figure)?;
        positive("mu", self.mu)?;
        if !(self.alpha_m > 2.0) {
            return Err(ParamError::Invalid {
                field: "alpha_m",
                reason: format!("must be > 2 for integrability, got {}", self.alpha_m),
            });
        }
        if !(self.alpha_n > 2.0) {
            return Err(ParamError::Invalid {
                field: "alpha_n",
                reason: format!("must be > 2 for integrability, got {}", self.alpha_n),
            });
        }
        if !(self.alpha_l > 0.0) || self.alpha_l > self.alpha_n {
            return Err(ParamError::Invalid {
                field: "alpha_l",
                reason: format!(
                    "must satisfy 0 < alpha_l <= alpha_n, got {} vs {}",
                    self.alpha_l, self.alpha_n
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(ParamError::Invalid {
                field: "omega",
                reason: format!("must lie in [0, 1], got {}", self.omega),
            });
        }
        if !(self.theta_s > 0.0 && self.theta_s < 2.0 * std::f64::consts::PI) {
            return Err(ParamError::Invalid {
                field: "theta_s",
                reason: format!("must lie in (0, 2*pi) radians, got {}", self.theta_s),
            });
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(ParamError::Invalid {
                field: "epsilon",
                reason: format!("must lie in [0, 1], got {}", self.epsilon),
            });
        }
        Ok(())
    }

    /// Constants derived from the primary parameters.
    pub fn derive(&self) -> DerivedConstants {
        let beta_m = near_field_pathloss(self.f_m);
        let beta_s = near_field_pathloss(self.f_s);
        let psi_m = self.g_m * beta_m;
        let psi_s = self.g_s_max * beta_s;
        DerivedConstants {
            beta_m,
            beta_s,
            sigma2_m: noise_power(self.w_m, self.noise_figure),
            sigma2_s: noise_power(self.w_s, self.noise_figure),
            psi_m,
            psi_s,
            a_dl: (self.p_s * self.t_s * psi_s) / (self.p_m * self.t_m * psi_m),
            a_ul: (self.p_us * self.t_s_ul * psi_s) / (self.p_um * self.t_m_ul * psi_m),
        }
    }

    /// Applies the coupled-biasing rule used for the bias sweeps:
    /// `T'_s = P_s T_s / P_us` and `T'_m = P_m T_m / P_um`, so both link
    /// directions rank cells by the DL biased received power.
    pub fn with_coupled_ul_bias(mut self) -> Self {
        self.t_s_ul = self.p_s * self.t_s / self.p_us;
        self.t_m_ul = self.p_m * self.t_m / self.p_um;
        self
    }

    /// Serializes back to the wire-unit JSON document accepted by
    /// [`load_config`].
    pub fn to_config(&self) -> Config {
        Config {
            lambda_m_per_km2: Some(self.lambda_m * 1e6),
            lambda_s_per_km2: Some(self.lambda_s * 1e6),
            lambda_u_per_km2: Some(self.lambda_u * 1e6),
            p_m_dbm: Some(watts_to_dbm(self.p_m)),
            p_s_dbm: Some(watts_to_dbm(self.p_s)),
            p_um_dbm: Some(watts_to_dbm(self.p_um)),
            p_us_dbm: Some(watts_to_dbm(self.p_us)),
            f_m_hz: Some(self.f_m),
            f_s_hz: Some(self.f_s),
            w_m_hz: Some(self.w_m),
            w_s_hz: Some(self.w_s),
            t_m_db: Some(linear_to_db(self.t_m)),
            t_s_db: Some(linear_to_db(self.t_s)),
            t_m_ul_db: Some(linear_to_db(self.t_m_ul)),
            t_s_ul_db: Some(linear_to_db(self.t_s_ul)),
            alpha_m: Some(self.alpha_m),
            alpha_l: Some(self.alpha_l),
            alpha_n: Some(self.alpha_n),
            g_s_max_dbi: Some(linear_to_db(self.g_s_max)),
            g_s_min_dbi: Some(linear_to_db(self.g_s_min)),
            g_m_dbi: Some(linear_to_db(self.g_m)),
            theta_s_deg: Some(self.theta_s.to_degrees()),
            omega: Some(self.omega),
            mu_m: Some(self.mu),
            noise_figure_db: Some(linear_to_db(self.noise_figure)),
            epsilon: Some(self.epsilon),
            extra: Default::default(),
        }
    }
}

fn near_field_pathloss(freq_hz: f64) -> f64 {
    let x = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * freq_hz);
    x * x
}

fn noise_power(bandwidth_hz: f64, noise_figure: f64) -> f64 {
    let dbm = NOISE_FLOOR_DBM_HZ + 10.0 * bandwidth_hz.log10() + linear_to_db(noise_figure);
    dbm_to_watts(dbm)
}

/// Constants computed from [`SystemParams`]: near-field losses, noise
/// powers, gain-loss products and the UL/DL association weight ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Near-field pathloss at 1 m, `(c / 4 pi f)^2`, per tier.
    pub beta_m: f64,
    pub beta_s: f64,
    /// Noise powers (W): `-174 dBm/Hz + 10 log10(W) + NF`.
    pub sigma2_m: f64,
    pub sigma2_s: f64,
    /// Combined antenna gain and near-field factor, `psi = G * beta`.
    pub psi_m: f64,
    pub psi_s: f64,
    /// Association weight ratios `a_DL = Ps Ts psi_s / (Pm Tm psi_m)` and
    /// `a_UL = Pus T's psi_s / (Pum T'm psi_m)`.
    pub a_dl: f64,
    pub a_ul: f64,
}

/// The on-disk configuration document. Every field is optional and defaults
/// to its Table-I value; suffixes mark the dB-valued fields.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Config {
    pub lambda_m_per_km2: Option<f64>,
    pub lambda_s_per_km2: Option<f64>,
    pub lambda_u_per_km2: Option<f64>,
    pub p_m_dbm: Option<f64>,
    pub p_s_dbm: Option<f64>,
    pub p_um_dbm: Option<f64>,
    pub p_us_dbm: Option<f64>,
    pub f_m_hz: Option<f64>,
    pub f_s_hz: Option<f64>,
    pub w_m_hz: Option<f64>,
    pub w_s_hz: Option<f64>,
    pub t_m_db: Option<f64>,
    pub t_s_db: Option<f64>,
    pub t_m_ul_db: Option<f64>,
    pub t_s_ul_db: Option<f64>,
    pub alpha_m: Option<f64>,
    pub alpha_l: Option<f64>,
    pub alpha_n: Option<f64>,
    pub g_s_max_dbi: Option<f64>,
    pub g_s_min_dbi: Option<f64>,
    pub g_m_dbi: Option<f64>,
    pub theta_s_deg: Option<f64>,
    pub omega: Option<f64>,
    pub mu_m: Option<f64>,
    pub noise_figure_db: Option<f64>,
    pub epsilon: Option<f64>,
    /// Unrecognized keys, reported as warnings rather than rejected.
    #[serde(flatten, skip_serializing)]
    pub extra: serde_json::Map<String, Value>,
}

/// Result of parsing a configuration document.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub params: SystemParams,
    /// One entry per unknown key found in the document.
    pub warnings: Vec<String>,
}

/// Parses a JSON configuration document into validated [`SystemParams`].
///
/// Missing keys take Table-I defaults; unknown keys are collected as
/// warnings; invariant violations fail with the offending field named.
pub fn load_config(text: &str) -> Result<LoadedConfig, ParamError> {
    let cfg: Config = serde_json::from_str(text)?;
    let d = SystemParams::table_i();
    let params = SystemParams {
        lambda_m: cfg.lambda_m_per_km2.map_or(d.lambda_m, |v| v * 1e-6),
        lambda_s: cfg.lambda_s_per_km2.map_or(d.lambda_s, |v| v * 1e-6),
        lambda_u: cfg.lambda_u_per_km2.map_or(d.lambda_u, |v| v * 1e-6),
        p_m: cfg.p_m_dbm.map_or(d.p_m, dbm_to_watts),
        p_s: cfg.p_s_dbm.map_or(d.p_s, dbm_to_watts),
        p_um: cfg.p_um_dbm.map_or(d.p_um, dbm_to_watts),
        p_us: cfg.p_us_dbm.map_or(d.p_us, dbm_to_watts),
        f_m: cfg.f_m_hz.unwrap_or(d.f_m),
        f_s: cfg.f_s_hz.unwrap_or(d.f_s),
        w_m: cfg.w_m_hz.unwrap_or(d.w_m),
        w_s: cfg.w_s_hz.unwrap_or(d.w_s),
        t_m: cfg.t_m_db.map_or(d.t_m, db_to_linear),
        t_s: cfg.t_s_db.map_or(d.t_s, db_to_linear),
        t_m_ul: cfg.t_m_ul_db.map_or(d.t_m_ul, db_to_linear),
        t_s_ul: cfg.t_s_ul_db.map_or(d.t_s_ul, db_to_linear),
        alpha_m: cfg.alpha_m.unwrap_or(d.alpha_m),
        alpha_l: cfg.alpha_l.unwrap_or(d.alpha_l),
        alpha_n: cfg.alpha_n.unwrap_or(d.alpha_n),
        g_s_max: cfg.g_s_max_dbi.map_or(d.g_s_max, db_to_linear),
        g_s_min: cfg.g_s_min_dbi.map_or(d.g_s_min, db_to_linear),
        g_m: cfg.g_m_dbi.map_or(d.g_m, db_to_linear),
        theta_s: cfg.theta_s_deg.map_or(d.theta_s, f64::to_radians),
        omega: cfg.omega.unwrap_or(d.omega),
        mu: cfg.mu_m.unwrap_or(d.mu),
        noise_figure: cfg.noise_figure_db.map_or(d.noise_figure, db_to_linear),
        epsilon: cfg.epsilon.unwrap_or(d.epsilon),
    };
    params.validate()?;
    let warnings = cfg
        .extra
        .keys()
        .map(|k| format!("unknown configuration key `{k}`"))
        .collect();
    Ok(LoadedConfig { params, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn table_i_defaults_load_from_empty_document() {
        let loaded = load_config("{}").unwrap();
        assert!(loaded.warnings.is_empty());
        assert_abs_diff_eq!(loaded.params.lambda_m, 5e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(loaded.params.w_s, 1e9);
        assert_abs_diff_eq!(loaded.params.p_s, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(loaded.params.omega, 0.11);
    }

    #[test]
    fn out_of_range_omega_names_the_field() {
        let err = load_config(r#"{"omega": 1.5}"#).unwrap_err();
        match err {
            ParamError::Invalid { field, .. } => assert_eq!(field, "omega"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dbm_conversion_identity_at_30dbm() {
        let loaded = load_config(r#"{"p_s_dbm": 30.0}"#).unwrap();
        assert_abs_diff_eq!(loaded.params.p_s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_keys_warn_but_load() {
        let loaded = load_config(r#"{"lambda_s_per_km2": 30.0, "windmill": 4}"#).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("windmill"));
        assert_abs_diff_eq!(loaded.params.lambda_s, 30e-6, epsilon = 1e-18);
    }

    #[test]
    fn near_field_pathloss_at_2ghz() {
        // oracle: evaluate (wavelength / 4 pi)^2 with c = 299 792 458 m/s
        let lambda_over_4pi = 299_792_458.0 / 2e9 / (4.0 * std::f64::consts::PI);
        let d = SystemParams::table_i().derive();
        assert_relative_eq!(d.beta_m, lambda_over_4pi * lambda_over_4pi, max_relative = 1e-12);
        assert_relative_eq!(d.beta_m, 1.424e-4, max_relative = 1e-3);
    }

    #[test]
    fn equal_products_give_equal_weights() {
        let mut p = SystemParams::table_i();
        p.p_s = p.p_m;
        p.p_us = p.p_um;
        p.t_s = p.t_m;
        p.t_s_ul = p.t_m_ul;
        p.f_s = p.f_m;
        p.g_s_max = p.g_m;
        let d = p.derive();
        assert_abs_diff_eq!(d.a_dl, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.a_dl, d.a_ul, epsilon = 1e-12);
    }

    #[test]
    fn table_i_dl_weight_cross_checked_in_db() {
        let p = SystemParams::table_i();
        let d = p.derive();
        // direct product / quotient
        let direct = (p.p_s * p.t_s * d.psi_s) / (p.p_m * p.t_m * d.psi_m);
        assert_relative_eq!(d.a_dl, direct, max_relative = 1e-12);
        // recomputed in dB: 30 dBm - 46 dBm + 18 dBi - 0 dBi + 20 log10(f_m/f_s)
        let db = 30.0 - 46.0 + 18.0 - 0.0 + 20.0 * (p.f_m / p.f_s).log10();
        assert_relative_eq!(d.a_dl, db_to_linear(db), max_relative = 1e-10);
    }

    #[test]
    fn noise_power_follows_bandwidth() {
        let d = SystemParams::table_i().derive();
        // -174 + 10 log10(2e7) + 10 dB = -90.9897 dBm
        assert_relative_eq!(d.sigma2_m, dbm_to_watts(-90.98970004336019), max_relative = 1e-12);
        // -174 + 90 + 10 = -74 dBm exactly
        assert_relative_eq!(d.sigma2_s, dbm_to_watts(-74.0), max_relative = 1e-12);
    }

    #[test]
    fn weight_ratio_equality_condition() {
        // a_dl == a_ul exactly when Ps/Pm == Pus/Pum and Ts/Tm == T's/T'm
        let mut p = SystemParams::table_i();
        p.p_us = p.p_um * (p.p_s / p.p_m);
        p.t_s = 4.0;
        p.t_m = 2.0;
        p.t_s_ul = 6.0;
        p.t_m_ul = 3.0;
        let d = p.derive();
        assert_relative_eq!(d.a_dl, d.a_ul, max_relative = 1e-12);
    }

    #[test]
    fn config_round_trip_reproduces_constants() {
        let p = SystemParams::table_i();
        let json = serde_json::to_string(&p.to_config()).unwrap();
        let back = load_config(&json).unwrap().params;
        let d0 = p.derive();
        let d1 = back.derive();
        assert_relative_eq!(d0.a_dl, d1.a_dl, max_relative = 1e-12);
        assert_relative_eq!(d0.a_ul, d1.a_ul, max_relative = 1e-12);
        assert_relative_eq!(d0.sigma2_m, d1.sigma2_m, max_relative = 1e-12);
        assert_relative_eq!(d0.sigma2_s, d1.sigma2_s, max_relative = 1e-12);
        assert_relative_eq!(d0.psi_s, d1.psi_s, max_relative = 1e-12);
    }

    #[test]
    fn coupled_bias_rule_equalizes_weights() {
        let mut p = SystemParams::table_i();
        p.t_s = db_to_linear(25.0);
        let p = p.with_coupled_ul_bias();
        let d = p.derive();
        assert_relative_eq!(d.a_dl, d.a_ul, max_relative = 1e-12);
    }
}
