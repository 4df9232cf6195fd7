//! Ground-truth Monte Carlo engine: samples network realizations around the
//! typical UE at the origin, associates every UE in both directions,
//! and produces empirical association, SINR/SNR and rate samples.

pub mod realization;
pub mod rng;

use rayon::prelude::*;
use serde::Serialize;

use crate::association::{AssocCriterion, AssocResult, AssocSource};
use crate::params::{DerivedConstants, ParamError, SystemParams};
use crate::{Direction, Tier};

pub use realization::Realization;
use realization::{pathloss_from_d2, Grid};
use rng::{entity, pair_exp, pair_unit, stream};

/// Monte Carlo run configuration.
#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub n_drops: usize,
    pub seed: u64,
    /// Disk radius around the typical UE (m) for Scells and UEs.
    pub window_radius: f64,
    /// Mcells are sampled out to `window_radius * mcell_window_factor`; the
    /// sub-6GHz interference tail decays only like `1/R` at `alpha_m = 3`.
    pub mcell_window_factor: f64,
    /// Also accumulate mmWave interference (randomized interferer beams)
    /// and report mmWave SINR next to SNR.
    pub include_mmwave_interference: bool,
    /// UL fractional pathloss-compensation exponent; `None` disables power
    /// control (every UE at maximum power).
    pub ul_power_control: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            n_drops: 20_000,
            seed: 1,
            window_radius: 3_000.0,
            mcell_window_factor: 4.0,
            include_mmwave_interference: false,
            ul_power_control: None,
        }
    }
}

/// Point estimate of a probability with a normal-approximation 95% CI.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProbEstimate {
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ProbEstimate {
    pub fn from_fraction(successes: u64, n: u64) -> Self {
        let p = successes as f64 / n as f64;
        let half = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
        Self {
            p,
            ci_low: (p - half).max(0.0),
            ci_high: (p + half).min(1.0),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.ci_low && x <= self.ci_high
    }
}

/// Empirical association probabilities for both directions plus the
/// decoupling gain (fraction of drops whose UL and DL tiers differ).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EmpiricalAssoc {
    pub n_drops: usize,
    pub dl_scell: ProbEstimate,
    pub ul_scell: ProbEstimate,
    pub decoupling_gain: ProbEstimate,
    pub resampled_realizations: u64,
}

impl EmpiricalAssoc {
    pub fn assoc_result(&self, direction: Direction) -> AssocResult {
        let p_scell = match direction {
            Direction::Dl => self.dl_scell.p,
            Direction::Ul => self.ul_scell.p,
        };
        AssocResult {
            p_mcell: 1.0 - p_scell,
            p_scell,
            source: AssocSource::MonteCarlo,
        }
    }
}

/// The typical UE's link in one direction for one drop.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinkSample {
    pub serving: Tier,
    pub pathloss: f64,
    pub fading: f64,
    /// BS-side antenna gain on the serving link (linear).
    pub gain: f64,
    /// None for mmWave links when interference accumulation is off.
    pub sinr: Option<f64>,
    /// Interference-free ratio (equals SINR when no interferer transmits).
    pub snr: f64,
    /// Realized load of the serving cell, typical UE included.
    pub load: u32,
    pub rate_bps: f64,
}

/// Both directions of one drop.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DropSample {
    pub dl: LinkSample,
    pub ul: LinkSample,
    /// Non-serving Mcells with no UL-associated UE (silent interferers).
    pub silent_mcells: u32,
    /// Non-serving Mcells in the window.
    pub other_mcells: u32,
}

/// Per-cell reservoir: uniformly keeps one of the UEs that associated to
/// the cell, plus that UE's own serving-link pathloss (for power control).
#[derive(Clone, Copy)]
struct CellReservoir {
    count: u32,
    pick: u32,
    pick_serving_pl: f64,
}

impl CellReservoir {
    const EMPTY: Self = Self {
        count: 0,
        pick: 0,
        pick_serving_pl: 0.0,
    };

    #[inline]
    fn offer(&mut self, seed: u64, drop: u64, cell: u64, ue_idx: u32, serving_pl: f64) {
        self.count += 1;
        if self.count == 1
            || pair_unit(seed, drop, stream::PICK, cell, self.count as u64)
                < 1.0 / self.count as f64
        {
            self.pick = ue_idx;
            self.pick_serving_pl = serving_pl;
        }
    }
}

struct FieldData {
    dl_serving_load: u32,
    ul_serving_load: u32,
    mcell_ul: Vec<CellReservoir>,
    scell_ul: Vec<CellReservoir>,
}

/// The Monte Carlo engine for one parameter set.
#[derive(Clone, Debug)]
pub struct Simulator {
    params: SystemParams,
    derived: DerivedConstants,
    opts: SimOptions,
}

impl Simulator {
    pub fn new(params: SystemParams, opts: SimOptions) -> Result<Self, ParamError> {
        params.validate()?;
        if let Some(eps) = opts.ul_power_control {
            if !(0.0..=1.0).contains(&eps) {
                return Err(ParamError::Invalid {
                    field: "epsilon",
                    reason: format!("must lie in [0, 1], got {eps}"),
                });
            }
        }
        let derived = params.derive();
        Ok(Self {
            params,
            derived,
            opts,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    /// Samples the `drop`-th realization (deterministic in seed and drop).
    pub fn sample_realization(&self, drop: u64) -> Realization {
        Realization::sample(
            &self.params,
            self.opts.seed,
            drop,
            self.opts.window_radius,
            self.opts.window_radius * self.opts.mcell_window_factor,
        )
    }

    #[inline]
    fn weight(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Dl => self.derived.a_dl,
            Direction::Ul => self.derived.a_ul,
        }
    }

    /// Minimum pathloss to each tier from a receiver at `q`; `receiver` is
    /// the entity id used for the blockage marks of Scell links.
    fn tier_pathlosses(
        &self,
        r: &Realization,
        m_grid: &Grid,
        s_grid: &Grid,
        q: [f64; 2],
        receiver: u64,
    ) -> (Option<(u32, f64)>, Option<(u32, f64)>) {
        let ham = self.params.alpha_m / 2.0;
        let mcell = m_grid
            .nearest(&r.mcells, q)
            .map(|(i, d2)| (i, pathloss_from_d2(d2, ham)));
        let mu2 = self.params.mu * self.params.mu;
        let omega = self.params.omega;
        let (seed, drop) = (r.seed, r.drop);
        let scell = s_grid.min_scell_pathloss(
            &r.scells,
            q,
            self.params.alpha_l / 2.0,
            self.params.alpha_n / 2.0,
            mu2,
            |idx| pair_unit(seed, drop, stream::LOS, entity::scell(idx), receiver) < omega,
        );
        (mcell, scell)
    }

    /// Same as [`tier_pathlosses`] for the typical UE, using the
    /// realization's precomputed origin LOS marks.
    fn origin_pathlosses(
        &self,
        r: &Realization,
        m_grid: &Grid,
        s_grid: &Grid,
    ) -> (Option<(u32, f64)>, Option<(u32, f64)>) {
        let ham = self.params.alpha_m / 2.0;
        let mcell = m_grid
            .nearest(&r.mcells, [0.0, 0.0])
            .map(|(i, d2)| (i, pathloss_from_d2(d2, ham)));
        let mu2 = self.params.mu * self.params.mu;
        let scell = s_grid.min_scell_pathloss(
            &r.scells,
            [0.0, 0.0],
            self.params.alpha_l / 2.0,
            self.params.alpha_n / 2.0,
            mu2,
            |idx| r.scell_los_origin[idx as usize],
        );
        (mcell, scell)
    }

    #[inline]
    fn choose(&self, direction: Direction, m_pl: f64, s_pl: Option<f64>) -> Tier {
        match s_pl {
            Some(s) if s < self.weight(direction) * m_pl => Tier::Scell,
            _ => Tier::Mcell,
        }
    }

    /// Associates every field UE in both directions, counting the load on
    /// the typical UE's serving cells and reservoir-sampling one UL UE per
    /// cell for the interferer sets.
    fn field_association(
        &self,
        r: &Realization,
        m_grid: &Grid,
        s_grid: &Grid,
        dl_serving: (Tier, u32),
        ul_serving: (Tier, u32),
        with_scell_reservoirs: bool,
    ) -> FieldData {
        let mut field = FieldData {
            dl_serving_load: 0,
            ul_serving_load: 0,
            mcell_ul: vec![CellReservoir::EMPTY; r.mcells.len()],
            scell_ul: if with_scell_reservoirs {
                vec![CellReservoir::EMPTY; r.scells.len()]
            } else {
                Vec::new()
            },
        };
        let (seed, drop) = (r.seed, r.drop);
        for (j, &q) in r.ues.iter().enumerate() {
            let (mcell, scell) = self.tier_pathlosses(r, m_grid, s_grid, q, entity::ue(j as u32));
            let Some((m_idx, m_pl)) = mcell else {
                continue;
            };
            let s = scell.map(|(_, pl)| pl);
            let dl_tier = self.choose(Direction::Dl, m_pl, s);
            let ul_tier = self.choose(Direction::Ul, m_pl, s);
            let dl_cell = match dl_tier {
                Tier::Mcell => m_idx,
                Tier::Scell => scell.unwrap().0,
            };
            let ul_cell = match ul_tier {
                Tier::Mcell => m_idx,
                Tier::Scell => scell.unwrap().0,
            };
            if (dl_tier, dl_cell) == dl_serving {
                field.dl_serving_load += 1;
            }
            if (ul_tier, ul_cell) == ul_serving {
                field.ul_serving_load += 1;
            }
            match ul_tier {
                Tier::Mcell => field.mcell_ul[ul_cell as usize].offer(
                    seed,
                    drop,
                    entity::mcell(ul_cell),
                    j as u32,
                    m_pl,
                ),
                Tier::Scell => {
                    if with_scell_reservoirs {
                        field.scell_ul[ul_cell as usize].offer(
                            seed,
                            drop,
                            entity::scell(ul_cell),
                            j as u32,
                            scell.unwrap().1,
                        );
                    }
                }
            }
        }
        field
    }

    /// UL transmit power toward a serving link of pathloss `serving_pl`.
    #[inline]
    fn ul_tx_power(&self, base: f64, serving_pl: f64) -> f64 {
        match self.opts.ul_power_control {
            Some(eps) => base * serving_pl.powf(eps),
            None => base,
        }
    }

    fn evaluate_dl(
        &self,
        r: &Realization,
        serving: (Tier, u32),
        m_pl: f64,
        s_pl: Option<f64>,
        load: u32,
        ) -> LinkSample {
        let p = &self.params;
        let d = &self.derived;
        let (seed, drop) = (r.seed, r.drop);
        match serving.0 {
            Tier::Mcell => {
                let m_star = serving.1;
                let h = pair_exp(seed, drop, stream::FADE_DL, entity::mcell(m_star), entity::ORIGIN);
                let signal = p.p_m * d.psi_m * h / m_pl;
                let ham = p.alpha_m / 2.0;
                let mut interference = 0.0;
                for (i, x) in r.mcells.iter().enumerate() {
                    if i as u32 == m_star {
                        continue;
                    }
                    let d2 = x[0] * x[0] + x[1] * x[1];
                    let hi =
                        pair_exp(seed, drop, stream::FADE_DL, entity::mcell(i as u32), entity::ORIGIN);
                    interference += p.p_m * d.psi_m * hi / pathloss_from_d2(d2, ham);
                }
                let sinr = signal / (interference + d.sigma2_m);
                LinkSample {
                    serving: Tier::Mcell,
                    pathloss: m_pl,
                    fading: h,
                    gain: p.g_m,
                    sinr: Some(sinr),
                    snr: signal / d.sigma2_m,
                    load,
                    rate_bps: p.w_m / load as f64 * sinr.ln_1p() / std::f64::consts::LN_2,
                }
            }
            Tier::Scell => {
                let s_star = serving.1;
                let s_pl = s_pl.expect("scell serving requires scell pathloss");
                let h = pair_exp(seed, drop, stream::FADE_DL, entity::scell(s_star), entity::ORIGIN);
                let signal = p.p_s * d.psi_s * h / s_pl;
                let snr = signal / d.sigma2_s;
                let sinr = self.opts.include_mmwave_interference.then(|| {
                    let hal = p.alpha_l / 2.0;
                    let han = p.alpha_n / 2.0;
                    let mut interference = 0.0;
                    for (i, y) in r.scells.iter().enumerate() {
                        if i as u32 == s_star {
                            continue;
                        }
                        let d2 = y[0] * y[0] + y[1] * y[1];
                        let pl = if r.scell_los_origin[i] {
                            pathloss_from_d2(d2, hal)
                        } else {
                            pathloss_from_d2(d2, han)
                        };
                        let hi = pair_exp(
                            seed,
                            drop,
                            stream::FADE_DL,
                            entity::scell(i as u32),
                            entity::ORIGIN,
                        );
                        let g = self.random_beam_gain(seed, drop, entity::scell(i as u32), entity::ORIGIN);
                        interference += p.p_s * d.beta_s * g * hi / pl;
                    }
                    signal / (interference + d.sigma2_s)
                });
                LinkSample {
                    serving: Tier::Scell,
                    pathloss: s_pl,
                    fading: h,
                    gain: p.g_s_max,
                    sinr,
                    snr,
                    load,
                    rate_bps: p.w_s / load as f64 * snr.ln_1p() / std::f64::consts::LN_2,
                }
            }
        }
    }

    /// Random interferer beam gain: main lobe with probability
    /// `theta_s / 2 pi`, side lobe otherwise.
    #[inline]
    fn random_beam_gain(&self, seed: u64, drop: u64, a: u64, b: u64) -> f64 {
        let p_main = self.params.theta_s / (2.0 * std::f64::consts::PI);
        if pair_unit(seed, drop, stream::GAIN, a, b) < p_main {
            self.params.g_s_max
        } else {
            self.params.g_s_min
        }
    }

    fn evaluate_ul(
        &self,
        r: &Realization,
        field: &FieldData,
        serving: (Tier, u32),
        m_pl: f64,
        s_pl: Option<f64>,
        load: u32,
    ) -> LinkSample {
        let p = &self.params;
        let d = &self.derived;
        let (seed, drop) = (r.seed, r.drop);
        match serving.0 {
            Tier::Mcell => {
                let m_star = serving.1;
                let bs = r.mcells[m_star as usize];
                let h = pair_exp(seed, drop, stream::FADE_UL, entity::ORIGIN, entity::mcell(m_star));
                let signal = self.ul_tx_power(p.p_um, m_pl) * d.psi_m * h / m_pl;
                let ham = p.alpha_m / 2.0;
                let mut interference = 0.0;
                for (c, res) in field.mcell_ul.iter().enumerate() {
                    if c as u32 == m_star || res.count == 0 {
                        continue;
                    }
                    let y = r.ues[res.pick as usize];
                    let d2 = (y[0] - bs[0]).powi(2) + (y[1] - bs[1]).powi(2);
                    let hi = pair_exp(
                        seed,
                        drop,
                        stream::FADE_UL,
                        entity::ue(res.pick),
                        entity::mcell(m_star),
                    );
                    interference += self.ul_tx_power(p.p_um, res.pick_serving_pl) * d.psi_m * hi
                        / pathloss_from_d2(d2, ham);
                }
                let sinr = signal / (interference + d.sigma2_m);
                LinkSample {
                    serving: Tier::Mcell,
                    pathloss: m_pl,
                    fading: h,
                    gain: p.g_m,
                    sinr: Some(sinr),
                    snr: signal / d.sigma2_m,
                    load,
                    rate_bps: p.w_m / load as f64 * sinr.ln_1p() / std::f64::consts::LN_2,
                }
            }
            Tier::Scell => {
                let s_star = serving.1;
                let s_pl = s_pl.expect("scell serving requires scell pathloss");
                let bs = r.scells[s_star as usize];
                let h = pair_exp(seed, drop, stream::FADE_UL, entity::ORIGIN, entity::scell(s_star));
                let signal = self.ul_tx_power(p.p_us, s_pl) * d.psi_s * h / s_pl;
                let snr = signal / d.sigma2_s;
                let sinr = self.opts.include_mmwave_interference.then(|| {
                    let mu2 = p.mu * p.mu;
                    let hal = p.alpha_l / 2.0;
                    let han = p.alpha_n / 2.0;
                    let mut interference = 0.0;
                    for (c, res) in field.scell_ul.iter().enumerate() {
                        if c as u32 == s_star || res.count == 0 {
                            continue;
                        }
                        let y = r.ues[res.pick as usize];
                        let d2 = (y[0] - bs[0]).powi(2) + (y[1] - bs[1]).powi(2);
                        // blockage of the interferer-to-serving-BS link
                        let los = d2 <= mu2
                            && pair_unit(
                                seed,
                                drop,
                                stream::LOS,
                                entity::scell(s_star),
                                entity::ue(res.pick),
                            ) < p.omega;
                        let pl = pathloss_from_d2(d2, if los { hal } else { han });
                        let hi = pair_exp(
                            seed,
                            drop,
                            stream::FADE_UL,
                            entity::ue(res.pick),
                            entity::scell(s_star),
                        );
                        let g = self.random_beam_gain(
                            seed,
                            drop,
                            entity::scell(s_star),
                            entity::ue(res.pick),
                        );
                        interference += self.ul_tx_power(p.p_us, res.pick_serving_pl)
                            * d.beta_s
                            * g
                            * hi
                            / pl;
                    }
                    signal / (interference + d.sigma2_s)
                });
                LinkSample {
                    serving: Tier::Scell,
                    pathloss: s_pl,
                    fading: h,
                    gain: p.g_s_max,
                    sinr,
                    snr,
                    load,
                    rate_bps: p.w_s / load as f64 * snr.ln_1p() / std::f64::consts::LN_2,
                }
            }
        }
    }

    /// Full evaluation of one realization: Max-BRP association in both
    /// directions, field loads, interference and rates for the typical UE.
    pub fn evaluate_realization(&self, r: &Realization) -> DropSample {
        let m_grid = Grid::build(&r.mcells, r.mcell_window_radius);
        let s_grid = Grid::build(&r.scells, r.window_radius);
        let (mcell, scell) = self.origin_pathlosses(r, &m_grid, &s_grid);
        let (m_idx, m_pl) = mcell.expect("realization holds at least one Mcell");
        let s = scell.map(|(_, pl)| pl);

        let pick = |dir: Direction| -> (Tier, u32) {
            match self.choose(dir, m_pl, s) {
                Tier::Mcell => (Tier::Mcell, m_idx),
                Tier::Scell => (Tier::Scell, scell.unwrap().0),
            }
        };
        let dl_serving = pick(Direction::Dl);
        let ul_serving = pick(Direction::Ul);

        let field = self.field_association(
            r,
            &m_grid,
            &s_grid,
            dl_serving,
            ul_serving,
            self.opts.include_mmwave_interference,
        );
        let dl = self.evaluate_dl(r, dl_serving, m_pl, s, 1 + field.dl_serving_load);
        let ul = self.evaluate_ul(r, &field, ul_serving, m_pl, s, 1 + field.ul_serving_load);
        let serving_mcell = (ul_serving.0 == Tier::Mcell).then_some(ul_serving.1);
        let silent_mcells = field
            .mcell_ul
            .iter()
            .enumerate()
            .filter(|(c, res)| Some(*c as u32) != serving_mcell && res.count == 0)
            .count() as u32;
        DropSample {
            dl,
            ul,
            silent_mcells,
            other_mcells: (r.mcells.len() - usize::from(serving_mcell.is_some())) as u32,
        }
    }

    /// The typical UE's serving tier for one direction under `criterion`.
    pub fn associate(
        &self,
        r: &Realization,
        direction: Direction,
        criterion: AssocCriterion,
    ) -> Tier {
        let m_grid = Grid::build(&r.mcells, r.mcell_window_radius);
        let s_grid = Grid::build(&r.scells, r.window_radius);
        match criterion {
            AssocCriterion::MaxBrp => {
                let (mcell, scell) = self.origin_pathlosses(r, &m_grid, &s_grid);
                let m_pl = mcell.expect("realization holds at least one Mcell").1;
                self.choose(direction, m_pl, scell.map(|(_, pl)| pl))
            }
            AssocCriterion::MaxRate => self.associate_max_rate(r, &m_grid, &s_grid, direction),
        }
    }

    /// Max-Rate choice: compares the instantaneous unit-load rates
    /// `W_m log2(1 + SIR_m)` vs `W_s log2(1 + SNR_s)`, fading included on
    /// both sides as in the rate definitions.
    fn associate_max_rate(
        &self,
        r: &Realization,
        m_grid: &Grid,
        s_grid: &Grid,
        direction: Direction,
    ) -> Tier {
        let p = &self.params;
        let d = &self.derived;
        let (seed, drop) = (r.seed, r.drop);
        let (mcell, scell) = self.origin_pathlosses(r, m_grid, s_grid);
        let (m_idx, m_pl) = mcell.expect("realization holds at least one Mcell");

        let snr_rate = scell.map_or(0.0, |(s_idx, s_pl)| {
            let h = match direction {
                Direction::Dl => {
                    pair_exp(seed, drop, stream::FADE_DL, entity::scell(s_idx), entity::ORIGIN)
                }
                Direction::Ul => {
                    pair_exp(seed, drop, stream::FADE_UL, entity::ORIGIN, entity::scell(s_idx))
                }
            };
            let power = match direction {
                Direction::Dl => p.p_s,
                Direction::Ul => p.p_us,
            };
            let snr = power * d.psi_s * h / (s_pl * d.sigma2_s);
            p.w_s * snr.ln_1p() / std::f64::consts::LN_2
        });

        // transmit powers cancel inside the single-tier SIR
        let ham = p.alpha_m / 2.0;
        let sir = match direction {
            Direction::Dl => {
                let h = pair_exp(seed, drop, stream::FADE_DL, entity::mcell(m_idx), entity::ORIGIN);
                let mut interference = 0.0;
                for (i, x) in r.mcells.iter().enumerate() {
                    if i as u32 == m_idx {
                        continue;
                    }
                    let d2 = x[0] * x[0] + x[1] * x[1];
                    let hi =
                        pair_exp(seed, drop, stream::FADE_DL, entity::mcell(i as u32), entity::ORIGIN);
                    interference += hi / pathloss_from_d2(d2, ham);
                }
                if interference > 0.0 {
                    (h / m_pl) / interference
                } else {
                    f64::INFINITY
                }
            }
            Direction::Ul => {
                let field = self.field_association(
                    r,
                    m_grid,
                    s_grid,
                    (Tier::Mcell, m_idx),
                    (Tier::Mcell, m_idx),
                    false,
                );
                let bs = r.mcells[m_idx as usize];
                let h = pair_exp(seed, drop, stream::FADE_UL, entity::ORIGIN, entity::mcell(m_idx));
                let mut interference = 0.0;
                for (c, res) in field.mcell_ul.iter().enumerate() {
                    if c as u32 == m_idx || res.count == 0 {
                        continue;
                    }
                    let y = r.ues[res.pick as usize];
                    let d2 = (y[0] - bs[0]).powi(2) + (y[1] - bs[1]).powi(2);
                    let hi = pair_exp(
                        seed,
                        drop,
                        stream::FADE_UL,
                        entity::ue(res.pick),
                        entity::mcell(m_idx),
                    );
                    interference += hi / pathloss_from_d2(d2, ham);
                }
                if interference > 0.0 {
                    (h / m_pl) / interference
                } else {
                    f64::INFINITY
                }
            }
        };
        let sir_rate = p.w_m * sir.ln_1p() / std::f64::consts::LN_2;
        if snr_rate > sir_rate {
            Tier::Scell
        } else {
            Tier::Mcell
        }
    }

    /// Empirical association probabilities over `n_drops` realizations,
    /// with the decoupling gain (fraction of drops where the UL and DL
    /// choices differ).
    pub fn empirical_assoc(&self, criterion: AssocCriterion) -> EmpiricalAssoc {
        let n = self.opts.n_drops;
        let outcomes: Vec<(Tier, Tier, u32)> = (0..n as u64)
            .into_par_iter()
            .map(|drop| {
                let r = self.sample_realization(drop);
                let (dl, ul) = match criterion {
                    AssocCriterion::MaxBrp => {
                        let m_grid = Grid::build(&r.mcells, r.mcell_window_radius);
                        let s_grid = Grid::build(&r.scells, r.window_radius);
                        let (mcell, scell) = self.origin_pathlosses(&r, &m_grid, &s_grid);
                        let m_pl = mcell.expect("at least one Mcell").1;
                        let s = scell.map(|(_, pl)| pl);
                        (
                            self.choose(Direction::Dl, m_pl, s),
                            self.choose(Direction::Ul, m_pl, s),
                        )
                    }
                    AssocCriterion::MaxRate => {
                        let m_grid = Grid::build(&r.mcells, r.mcell_window_radius);
                        let s_grid = Grid::build(&r.scells, r.window_radius);
                        (
                            self.associate_max_rate(&r, &m_grid, &s_grid, Direction::Dl),
                            self.associate_max_rate(&r, &m_grid, &s_grid, Direction::Ul),
                        )
                    }
                };
                (dl, ul, r.resample_attempts)
            })
            .collect();
        let dl_scell = outcomes.iter().filter(|(dl, _, _)| *dl == Tier::Scell).count() as u64;
        let ul_scell = outcomes.iter().filter(|(_, ul, _)| *ul == Tier::Scell).count() as u64;
        let differ = outcomes.iter().filter(|(dl, ul, _)| dl != ul).count() as u64;
        let resampled = outcomes.iter().map(|(_, _, a)| *a as u64).sum();
        EmpiricalAssoc {
            n_drops: n,
            dl_scell: ProbEstimate::from_fraction(dl_scell, n as u64),
            ul_scell: ProbEstimate::from_fraction(ul_scell, n as u64),
            decoupling_gain: ProbEstimate::from_fraction(differ, n as u64),
            resampled_realizations: resampled,
        }
    }

    /// Evaluates every drop fully (association, loads, SINR/SNR, rates).
    pub fn link_samples(&self) -> Vec<DropSample> {
        (0..self.opts.n_drops as u64)
            .into_par_iter()
            .map(|drop| {
                let r = self.sample_realization(drop);
                self.evaluate_realization(&r)
            })
            .collect()
    }

    /// Minimum pathloss per tier at the origin for each drop
    /// (`f64::INFINITY` when a tier is absent from the window).
    pub fn min_pathloss_samples(&self) -> Vec<(f64, f64)> {
        (0..self.opts.n_drops as u64)
            .into_par_iter()
            .map(|drop| {
                let r = self.sample_realization(drop);
                let m_grid = Grid::build(&r.mcells, r.mcell_window_radius);
                let s_grid = Grid::build(&r.scells, r.window_radius);
                let (m, s) = self.origin_pathlosses(&r, &m_grid, &s_grid);
                (
                    m.map_or(f64::INFINITY, |(_, pl)| pl),
                    s.map_or(f64::INFINITY, |(_, pl)| pl),
                )
            })
            .collect()
    }
}

/// Linear-interpolation quantile of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::db_to_linear;
    use approx::assert_relative_eq;

    fn small_opts(n: usize, seed: u64) -> SimOptions {
        SimOptions {
            n_drops: n,
            seed,
            window_radius: 2_000.0,
            ..SimOptions::default()
        }
    }

    /// Hand-built drop: one Scell 10 m away (forced LOS via omega = 1),
    /// one Mcell 5 km out.
    fn two_cell_realization() -> Realization {
        Realization {
            window_radius: 6_000.0,
            mcell_window_radius: 6_000.0,
            seed: 99,
            drop: 0,
            mcells: vec![[5_000.0, 0.0]],
            scells: vec![[10.0, 0.0]],
            scell_los_origin: vec![true],
            ues: Vec::new(),
            resample_attempts: 0,
        }
    }

    #[test]
    fn constructed_drop_prefers_the_los_scell_downlink() {
        let p = SystemParams::table_i();
        let sim = Simulator::new(p.clone(), small_opts(1, 99)).unwrap();
        let r = two_cell_realization();
        // direct comparison of the two biased received powers
        let d = p.derive();
        let scell_rx = p.p_s * p.t_s * d.psi_s / 10f64.powf(p.alpha_l);
        let mcell_rx = p.p_m * p.t_m * d.psi_m / 5_000f64.powf(p.alpha_m);
        assert!(scell_rx > mcell_rx);
        assert_eq!(sim.associate(&r, Direction::Dl, AssocCriterion::MaxBrp), Tier::Scell);
    }

    #[test]
    fn huge_bias_always_wins_when_a_scell_exists() {
        let mut p = SystemParams::table_i();
        p.t_s = db_to_linear(80.0);
        p.t_s_ul = db_to_linear(80.0);
        let sim = Simulator::new(p, small_opts(50, 3)).unwrap();
        for drop in 0..50 {
            let r = sim.sample_realization(drop);
            if r.scells.is_empty() {
                continue;
            }
            assert_eq!(sim.associate(&r, Direction::Dl, AssocCriterion::MaxBrp), Tier::Scell);
        }
    }

    #[test]
    fn equal_weights_couple_the_directions_on_every_drop() {
        let p = SystemParams::table_i().with_coupled_ul_bias();
        let sim = Simulator::new(p, small_opts(100, 8)).unwrap();
        for drop in 0..100 {
            let r = sim.sample_realization(drop);
            let dl = sim.associate(&r, Direction::Dl, AssocCriterion::MaxBrp);
            let ul = sim.associate(&r, Direction::Ul, AssocCriterion::MaxBrp);
            assert_eq!(dl, ul);
        }
    }

    #[test]
    fn no_scells_gives_mcell_exactly() {
        let mut p = SystemParams::table_i();
        p.lambda_s = 1e-12;
        let sim = Simulator::new(p, small_opts(200, 17)).unwrap();
        let e = sim.empirical_assoc(AssocCriterion::MaxBrp);
        assert_eq!(e.dl_scell.p, 0.0);
        assert_eq!(e.ul_scell.p, 0.0);
        assert_eq!(e.decoupling_gain.p, 0.0);
    }

    #[test]
    fn single_interferer_free_mcell_gives_sinr_equal_snr() {
        let p = SystemParams::table_i();
        let sim = Simulator::new(p, small_opts(1, 5)).unwrap();
        let r = Realization {
            window_radius: 3_000.0,
            mcell_window_radius: 3_000.0,
            seed: 5,
            drop: 0,
            mcells: vec![[400.0, -250.0]],
            scells: Vec::new(),
            scell_los_origin: Vec::new(),
            ues: Vec::new(),
            resample_attempts: 0,
        };
        let s = sim.evaluate_realization(&r);
        assert_eq!(s.dl.serving, Tier::Mcell);
        assert_eq!(s.dl.sinr.unwrap(), s.dl.snr);
        assert_eq!(s.ul.sinr.unwrap(), s.ul.snr);
        assert_eq!(s.dl.load, 1);
    }

    #[test]
    fn unit_load_rate_is_bandwidth_times_spectral_efficiency() {
        let p = SystemParams::table_i();
        let sim = Simulator::new(p.clone(), small_opts(1, 7)).unwrap();
        let r = two_cell_realization();
        let s = sim.evaluate_realization(&r);
        assert_eq!(s.dl.serving, Tier::Scell);
        assert_eq!(s.dl.load, 1);
        let expect = p.w_s * (1.0 + s.dl.snr).log2();
        assert_relative_eq!(s.dl.rate_bps, expect, max_relative = 1e-12);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let p = SystemParams::table_i();
        let sim = Simulator::new(p, small_opts(40, 23)).unwrap();
        let a = sim.link_samples();
        let b = sim.link_samples();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.dl.rate_bps.to_bits(), y.dl.rate_bps.to_bits());
            assert_eq!(x.ul.rate_bps.to_bits(), y.ul.rate_bps.to_bits());
            assert_eq!(x.dl.snr.to_bits(), y.dl.snr.to_bits());
        }
    }

    #[test]
    fn serial_pool_matches_parallel_pool() {
        let p = SystemParams::table_i();
        let sim = Simulator::new(p, small_opts(20, 31)).unwrap();
        let parallel = sim.link_samples();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool.install(|| sim.link_samples());
        for (x, y) in parallel.iter().zip(&serial) {
            assert_eq!(x.ul.rate_bps.to_bits(), y.ul.rate_bps.to_bits());
        }
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_relative_eq!(quantile(&v, 0.5), 2.5);
    }
}
