//! One sampled network drop and the spatial queries over it.
//!
//! Points are Poisson-distributed in a disk around the typical UE at the
//! origin. Nearest/best-server searches run on a uniform bucket grid with
//! expanding Chebyshev rings and pathloss lower bounds for early exit.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::rng::{self, StreamRng};
use crate::params::SystemParams;

/// One sampled drop: BS and UE positions plus the LOS marks of every Scell
/// toward the origin. The typical UE sits at the origin and is not part of
/// `ues`.
///
/// Mcells are sampled in a larger disk than Scells and UEs: the sub-6GHz
/// interference sum has a `1/R` tail at `alpha_m = 3` that is far from
/// negligible against the noise floor, while the mmWave terms and the UE
/// field only act locally.
#[derive(Clone, Debug)]
pub struct Realization {
    pub window_radius: f64,
    pub mcell_window_radius: f64,
    pub seed: u64,
    pub drop: u64,
    pub mcells: Vec<[f64; 2]>,
    pub scells: Vec<[f64; 2]>,
    /// `true` when the Scell-origin link is LOS (implies distance <= mu).
    pub scell_los_origin: Vec<bool>,
    pub ues: Vec<[f64; 2]>,
    /// How many whole-realization resamples it took to get >= 1 Mcell.
    pub resample_attempts: u32,
}

fn sample_disk_ppp(rng: &mut StreamRng, lambda: f64, radius: f64) -> Vec<[f64; 2]> {
    let mean = lambda * std::f64::consts::PI * radius * radius;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    let mut pts = Vec::with_capacity(count);
    for _ in 0..count {
        let r = radius * rng.gen::<f64>().sqrt();
        let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        pts.push([r * theta.cos(), r * theta.sin()]);
    }
    pts
}

impl Realization {
    /// Samples a drop; rejects and resamples (with a salted stream) until
    /// the window holds at least one Mcell.
    pub fn sample(
        params: &SystemParams,
        seed: u64,
        drop: u64,
        window_radius: f64,
        mcell_window_radius: f64,
    ) -> Self {
        let mut attempt = 0u32;
        loop {
            let mut m_rng = StreamRng::with_attempt(seed, drop, rng::stream::MCELL, attempt);
            let mcells = sample_disk_ppp(&mut m_rng, params.lambda_m, mcell_window_radius);
            if mcells.is_empty() {
                attempt += 1;
                continue;
            }
            let mut s_rng = StreamRng::with_attempt(seed, drop, rng::stream::SCELL, attempt);
            let scells = sample_disk_ppp(&mut s_rng, params.lambda_s, window_radius);
            let mut u_rng = StreamRng::with_attempt(seed, drop, rng::stream::UE, attempt);
            let ues = sample_disk_ppp(&mut u_rng, params.lambda_u, window_radius);

            let mu2 = params.mu * params.mu;
            let scell_los_origin = scells
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d2 = p[0] * p[0] + p[1] * p[1];
                    d2 <= mu2
                        && rng::pair_unit(
                            seed,
                            drop,
                            rng::stream::LOS,
                            rng::entity::scell(i as u32),
                            rng::entity::ORIGIN,
                        ) < params.omega
                })
                .collect();

            return Self {
                window_radius,
                mcell_window_radius,
                seed,
                drop,
                mcells,
                scells,
                scell_los_origin,
                ues,
                resample_attempts: attempt,
            };
        }
    }
}

/// `d^alpha` from a squared distance, with fast paths for the half-integer
/// exponents the default configuration uses.
#[inline]
pub(crate) fn pathloss_from_d2(d2: f64, half_alpha: f64) -> f64 {
    if half_alpha == 1.5 {
        d2 * d2.sqrt()
    } else if half_alpha == 2.0 {
        d2 * d2
    } else if half_alpha == 1.0 {
        d2
    } else {
        d2.powf(half_alpha)
    }
}

/// Uniform bucket grid over the window square, CSR storage.
pub(crate) struct Grid {
    cell: f64,
    inv_cell: f64,
    min: f64,
    n: i32,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl Grid {
    pub fn build(points: &[[f64; 2]], window_radius: f64) -> Self {
        // aim for a couple of points per bucket
        let n = ((points.len() as f64 / 2.0).sqrt().ceil() as i32).clamp(1, 512);
        let cell = 2.0 * window_radius / n as f64;
        let min = -window_radius;
        let ncells = (n * n) as usize;
        let mut counts = vec![0u32; ncells + 1];
        let index_of = |p: &[f64; 2]| -> usize {
            let ix = (((p[0] - min) / cell) as i32).clamp(0, n - 1);
            let iy = (((p[1] - min) / cell) as i32).clamp(0, n - 1);
            (iy * n + ix) as usize
        };
        for p in points {
            counts[index_of(p) + 1] += 1;
        }
        for i in 0..ncells {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = index_of(p);
            items[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }
        Self {
            cell,
            inv_cell: 1.0 / cell,
            min,
            n,
            starts: counts,
            items,
        }
    }

    #[inline]
    fn cell_coords(&self, q: [f64; 2]) -> (i32, i32) {
        let ix = (((q[0] - self.min) * self.inv_cell) as i32).clamp(0, self.n - 1);
        let iy = (((q[1] - self.min) * self.inv_cell) as i32).clamp(0, self.n - 1);
        (ix, iy)
    }

    /// Visits every point whose bucket lies on the Chebyshev ring `k`
    /// around `(cx, cy)`. Ring 0 is the bucket itself.
    #[inline]
    fn visit_ring<F: FnMut(u32)>(&self, cx: i32, cy: i32, k: i32, mut f: F) {
        let n = self.n;
        let mut visit_cell = |x: i32, y: i32| {
            if x < 0 || y < 0 || x >= n || y >= n {
                return;
            }
            let c = (y * n + x) as usize;
            for &idx in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                f(idx);
            }
        };
        if k == 0 {
            visit_cell(cx, cy);
            return;
        }
        for x in (cx - k)..=(cx + k) {
            visit_cell(x, cy - k);
            visit_cell(x, cy + k);
        }
        for y in (cy - k + 1)..=(cy + k - 1) {
            visit_cell(cx - k, y);
            visit_cell(cx + k, y);
        }
    }

    /// A point on ring `k` is at least this far from the query point.
    #[inline]
    fn ring_min_distance(&self, k: i32) -> f64 {
        ((k - 1).max(0)) as f64 * self.cell
    }

    fn max_ring(&self) -> i32 {
        self.n
    }

    /// Index and squared distance of the nearest point, if any.
    pub fn nearest(&self, points: &[[f64; 2]], q: [f64; 2]) -> Option<(u32, f64)> {
        let (cx, cy) = self.cell_coords(q);
        let mut best: Option<(u32, f64)> = None;
        for k in 0..=self.max_ring() {
            if let Some((_, bd2)) = best {
                let lb = self.ring_min_distance(k);
                if lb * lb > bd2 {
                    break;
                }
            }
            self.visit_ring(cx, cy, k, |idx| {
                let p = points[idx as usize];
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let d2 = dx * dx + dy * dy;
                if best.map_or(true, |(_, bd2)| d2 < bd2) {
                    best = Some((idx, d2));
                }
            });
        }
        best
    }

    /// Index and pathloss of the minimum-pathloss Scell for a receiver at
    /// `q`, where a link of squared length `d2 <= mu^2` is LOS iff
    /// `los(idx)`. Searches rings until even a LOS link at the ring's
    /// minimum distance could not improve on the best pathloss found.
    pub fn min_scell_pathloss<F: Fn(u32) -> bool>(
        &self,
        points: &[[f64; 2]],
        q: [f64; 2],
        half_alpha_l: f64,
        half_alpha_n: f64,
        mu2: f64,
        los: F,
    ) -> Option<(u32, f64)> {
        let (cx, cy) = self.cell_coords(q);
        let mut best_los: Option<(u32, f64)> = None; // min d2 among LOS links
        let mut best_nlos: Option<(u32, f64)> = None; // min d2 among NLOS links
        let mut best_pl = f64::INFINITY;
        let refresh = |best_los: &Option<(u32, f64)>, best_nlos: &Option<(u32, f64)>| -> f64 {
            let a = best_los.map_or(f64::INFINITY, |(_, d2)| pathloss_from_d2(d2, half_alpha_l));
            let b = best_nlos.map_or(f64::INFINITY, |(_, d2)| pathloss_from_d2(d2, half_alpha_n));
            a.min(b)
        };
        for k in 0..=self.max_ring() {
            let lb = self.ring_min_distance(k);
            if best_pl.is_finite() {
                let lb2 = lb * lb;
                let lb_los = if lb2 <= mu2 {
                    pathloss_from_d2(lb2, half_alpha_l)
                } else {
                    f64::INFINITY
                };
                let lb_nlos = pathloss_from_d2(lb2, half_alpha_n);
                if lb_los.min(lb_nlos) > best_pl {
                    break;
                }
            }
            let mut dirty = false;
            self.visit_ring(cx, cy, k, |idx| {
                let p = points[idx as usize];
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let d2 = dx * dx + dy * dy;
                if d2 <= mu2 && los(idx) {
                    if best_los.map_or(true, |(_, b)| d2 < b) {
                        best_los = Some((idx, d2));
                        dirty = true;
                    }
                } else if best_nlos.map_or(true, |(_, b)| d2 < b) {
                    best_nlos = Some((idx, d2));
                    dirty = true;
                }
            });
            if dirty {
                best_pl = refresh(&best_los, &best_nlos);
            }
        }
        let los_cand =
            best_los.map(|(i, d2)| (i, pathloss_from_d2(d2, half_alpha_l)));
        let nlos_cand =
            best_nlos.map(|(i, d2)| (i, pathloss_from_d2(d2, half_alpha_n)));
        match (los_cand, nlos_cand) {
            (Some(a), Some(b)) => Some(if a.1 <= b.1 { a } else { b }),
            (a, b) => a.or(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_realization() {
        let p = SystemParams::table_i();
        let a = Realization::sample(&p, 11, 4, 1000.0, 1000.0);
        let b = Realization::sample(&p, 11, 4, 1000.0, 1000.0);
        assert_eq!(a.mcells, b.mcells);
        assert_eq!(a.scells, b.scells);
        assert_eq!(a.ues, b.ues);
        assert_eq!(a.scell_los_origin, b.scell_los_origin);
        let c = Realization::sample(&p, 12, 4, 1000.0, 1000.0);
        assert_ne!(a.mcells.len() + a.scells.len(), 0);
        assert!(a.mcells != c.mcells || a.scells != c.scells);
    }

    #[test]
    fn doubling_density_doubles_mean_count() {
        // z-test at the 1% level over 1000 drops; deterministic given seed
        let p = SystemParams::table_i();
        let radius = 1500.0;
        let drops = 1000u64;
        let total: usize = (0..drops)
            .map(|d| Realization::sample(&p, 5, d, radius, radius).mcells.len())
            .sum();
        let mut p2 = p.clone();
        p2.lambda_m *= 2.0;
        let total2: usize = (0..drops)
            .map(|d| Realization::sample(&p2, 6, d, radius, radius).mcells.len())
            .sum();
        let mean = p.lambda_m * std::f64::consts::PI * radius * radius * drops as f64;
        for (t, m) in [(total, mean), (total2, 2.0 * mean)] {
            let z = (t as f64 - m) / m.sqrt();
            assert!(z.abs() < 2.576, "count z-score {z}");
        }
    }

    #[test]
    fn mean_mcell_count_matches_window() {
        // window 3 km, lambda 5/km^2 -> mean about 141.4 per drop
        let p = SystemParams::table_i();
        let drops = 10_000u64;
        let total: usize = (0..drops)
            .map(|d| Realization::sample(&p, 9, d, 3000.0, 3000.0).mcells.len())
            .sum();
        let mean = total as f64 / drops as f64;
        let expect = p.lambda_m * std::f64::consts::PI * 3000.0 * 3000.0;
        assert!((expect - 141.37).abs() < 0.01);
        // se of the per-drop mean is sqrt(141/1e4) ~ 0.12; allow 4 sigma
        assert!((mean - expect).abs() < 0.48, "mean {mean} vs {expect}");
    }

    #[test]
    fn los_marks_only_inside_ball() {
        let p = SystemParams::table_i();
        let r = Realization::sample(&p, 21, 0, 3000.0, 3000.0);
        let mu2 = p.mu * p.mu;
        for (i, s) in r.scells.iter().enumerate() {
            let d2 = s[0] * s[0] + s[1] * s[1];
            if d2 > mu2 {
                assert!(!r.scell_los_origin[i]);
            }
        }
        assert!(r.scell_los_origin.iter().any(|&b| b));
    }

    #[test]
    fn grid_nearest_matches_linear_scan() {
        let p = SystemParams::table_i();
        let r = Realization::sample(&p, 33, 7, 2000.0, 2000.0);
        let grid = Grid::build(&r.scells, r.window_radius);
        for &q in &[[0.0, 0.0], [1500.0, -900.0], [-1999.0, 1999.0], [3.0, 4.0]] {
            let got = grid.nearest(&r.scells, q).unwrap();
            let want = r
                .scells
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                    (i as u32, d2)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert_eq!(got.0, want.0);
        }
    }

    #[test]
    fn grid_min_pathloss_matches_linear_scan() {
        let p = SystemParams::table_i();
        let r = Realization::sample(&p, 44, 3, 2000.0, 2000.0);
        let grid = Grid::build(&r.scells, r.window_radius);
        let mu2 = p.mu * p.mu;
        let hal = p.alpha_l / 2.0;
        let han = p.alpha_n / 2.0;
        // deterministic pseudo-marks
        let los = |idx: u32| idx % 7 == 0;
        for &q in &[[0.0, 0.0], [800.0, 650.0], [-1800.0, 200.0]] {
            let got = grid
                .min_scell_pathloss(&r.scells, q, hal, han, mu2, los)
                .unwrap();
            let want = r
                .scells
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                    let pl = if d2 <= mu2 && los(i as u32) {
                        pathloss_from_d2(d2, hal)
                    } else {
                        pathloss_from_d2(d2, han)
                    };
                    (i as u32, pl)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() <= 1e-9 * want.1);
        }
    }

    #[test]
    fn empty_scell_field_yields_none() {
        let grid = Grid::build(&[], 1000.0);
        assert!(grid.nearest(&[], [0.0, 0.0]).is_none());
        assert!(grid
            .min_scell_pathloss(&[], [0.0, 0.0], 1.0, 2.0, 1e4, |_| false)
            .is_none());
    }
}
