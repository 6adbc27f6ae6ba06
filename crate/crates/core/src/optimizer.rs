//! Cache-split search for Scheme 2 and the closed-form split rules.

use rayon::prelude::*;
use serde::Serialize;

use crate::combinat::binom;
use crate::error::{Error, Result};
use crate::model::{expected_distinct, DemandProfile, SystemConfig};
use crate::ratecalc::{
    scheme2_common_rate, scheme2_rate, scheme2_unique_rate, AvgMode, DemandAverages, Estimate, Scheme2Peak,
};

/// Resolution of the `x` search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XSearch {
    /// Uniform grid points on `[0, 1]`, seam knots excluded.
    pub grid_points: usize,
    /// Width of the final refinement bracket.
    pub tol: f64,
}

impl Default for XSearch {
    fn default() -> Self {
        Self {
            grid_points: 1025,
            tol: 1e-5,
        }
    }
}

/// Fraction of each cache assigned to common files.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CacheAllocation(f64);

impl CacheAllocation {
    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Self(x))
        } else {
            Err(Error::Domain {
                function: "CacheAllocation::new",
                value: x,
                requirement: "0 <= x <= 1",
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Number of unique requesters in each class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaProfile(pub Vec<usize>);

impl AlphaProfile {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Entries differ by at most one.
    pub fn is_most_uniform(&self) -> bool {
        match (self.0.iter().min(), self.0.iter().max()) {
            (Some(lo), Some(hi)) => hi - lo <= 1,
            _ => true,
        }
    }

    /// All profiles with `classes` entries in `0..=per_class`, odometer order.
    pub fn enumerate(classes: usize, per_class: usize) -> Vec<AlphaProfile> {
        let mut out = Vec::new();
        let mut cur = vec![0usize; classes];
        loop {
            out.push(AlphaProfile(cur.clone()));
            let mut i = 0;
            loop {
                if i == classes {
                    return out;
                }
                if cur[i] < per_class {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }
}

const ALPHA_STEP: f64 = 0.25;
const JUMP_EPS: f64 = 1e-9;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn alpha_candidates(cfg: &SystemConfig, x: f64) -> Vec<f64> {
    let per = cfg.users_per_class() as f64;
    let g = cfg.classes as f64;
    let k = cfg.users as f64;
    let mut pts: Vec<f64> = Vec::new();
    let steps = (per / ALPHA_STEP).ceil() as usize;
    pts.extend((0..=steps).map(|i| (i as f64 * ALPHA_STEP).min(per)));
    let t_c = if cfg.common == 0 {
        0.0
    } else {
        k * cfg.cache * x / cfg.common as f64
    };
    let t_u = if cfg.unique == 0 {
        0.0
    } else {
        per * cfg.cache * (1.0 - x) / cfg.unique as f64
    };
    // Seams of the distinct-count caps and of the subtracted binomials.
    for p in [
        (k - cfg.common as f64) / g,
        cfg.unique as f64,
        (t_c + 1.0) / g,
        per - t_u - 1.0,
    ] {
        for q in [p - JUMP_EPS, p, p + JUMP_EPS] {
            if (0.0..=per).contains(&q) {
                pts.push(q);
            }
        }
    }
    pts
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut best = (a, f(a));
    let fb = f(b);
    if fb > best.1 {
        best = (b, fb);
    }
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
        for (p, v) in [(c, fc), (d, fd)] {
            if v > best.1 {
                best = (p, v);
            }
        }
    }
    best
}

/// Worst-case uniform `α` for Scheme 2 at split `x`: `(alpha_star, rate)`.
///
/// The objective has jumps where a subtracted binomial switches to zero, so the
/// search evaluates a grid with every seam (approached from both sides) and refines
/// around the best grid point.
pub fn worst_alpha(cfg: &SystemConfig, x: f64) -> (f64, f64) {
    let f = |a: f64| scheme2_rate(cfg, x, a).total;
    let mut best = (0.0, f(0.0));
    for a in alpha_candidates(cfg, x) {
        let v = f(a);
        if v > best.1 + 1e-15 {
            best = (a, v);
        }
    }
    let per = cfg.users_per_class() as f64;
    let lo = (best.0 - ALPHA_STEP).max(0.0);
    let hi = (best.0 + ALPHA_STEP).min(per);
    let refined = golden_max(f, lo, hi, 1e-9);
    if refined.1 > best.1 + 1e-15 {
        refined
    } else {
        best
    }
}

/// Worst integer `α` per class (uniform across classes), by enumeration.
pub fn worst_alpha_integer(cfg: &SystemConfig, x: f64) -> (usize, f64) {
    (0..=cfg.users_per_class())
        .map(|a| (a, scheme2_rate(cfg, x, a as f64).total))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc })
}

/// `x` values where `t_c` or `t_u` crosses a regime boundary, plus the full-cache
/// points of each branch.
pub fn seam_knots(cfg: &SystemConfig) -> Vec<f64> {
    let m = cfg.cache;
    if m <= 0.0 {
        return Vec::new();
    }
    let k = cfg.users as f64;
    let per = cfg.users_per_class() as f64;
    let nc = cfg.common as f64;
    let nu = cfg.unique as f64;
    let mut knots = Vec::new();
    for tc in [1.0, k - 1.0, k] {
        knots.push(tc * nc / (k * m));
    }
    for tu in [1.0, per - 1.0, per] {
        knots.push(1.0 - tu * nu / (per * m));
    }
    knots.retain(|x| x.is_finite() && (0.0..=1.0).contains(x));
    knots
}

fn x_grid(cfg: &SystemConfig, search: &XSearch) -> Vec<f64> {
    let n = search.grid_points.max(2);
    let mut xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    xs.extend(seam_knots(cfg));
    xs
}

fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|x| -f(x), a, b, tol);
    (x, -v)
}

// Strictly better, or equal and further toward x = 1.
fn better(cand: (f64, f64), best: (f64, f64)) -> bool {
    cand.1 < best.1 - 1e-12 || ((cand.1 - best.1).abs() <= 1e-12 && cand.0 > best.0)
}

fn minimize_x(cfg: &SystemConfig, search: &XSearch, f: impl Fn(f64) -> f64 + Sync) -> (f64, f64) {
    let xs = x_grid(cfg, search);
    let values: Vec<(f64, f64)> = xs.par_iter().map(|&x| (x, f(x))).collect();
    let mut best = values[0];
    for &v in &values[1..] {
        if better(v, best) {
            best = v;
        }
    }
    let step = 1.0 / (search.grid_points.max(2) - 1) as f64;
    let refined = golden_min(&f, (best.0 - step).max(0.0), (best.0 + step).min(1.0), search.tol);
    if refined.1 < best.1 - 1e-12 {
        refined
    } else {
        best
    }
}

/// `min_x max_α` Scheme 2 rate with the given search settings.
pub fn optimize_x_peak_with(cfg: &SystemConfig, search: &XSearch) -> Scheme2Peak {
    let (x_star, rate) = minimize_x(cfg, search, |x| worst_alpha(cfg, x).1);
    Scheme2Peak {
        rate,
        x_star,
        alpha_star: worst_alpha(cfg, x_star).0,
    }
}

pub fn optimize_x_peak(cfg: &SystemConfig) -> Scheme2Peak {
    optimize_x_peak_with(cfg, &XSearch::default())
}

/// Scheme 2 rate with each branch at its own worst case: all-distinct common
/// requests plus all-distinct unique requests in every class.
///
/// Upper-bounds `max_α` of the uniform-α rate. Its `x`-slopes in the interior
/// regime are exactly the `Y1`, `Y2` of [`slope_bounds`].
pub fn decoupled_peak(cfg: &SystemConfig, x: f64) -> f64 {
    let n_c = cfg.users.min(cfg.common) as f64;
    let n_u = cfg.users_per_class().min(cfg.unique) as f64;
    scheme2_common_rate(cfg, x, n_c) + cfg.classes as f64 * scheme2_unique_rate(cfg, x, n_u)
}

/// Minimizer of [`decoupled_peak`] over `x`: `(x_star, rate)`.
pub fn optimize_x_decoupled(cfg: &SystemConfig, search: &XSearch) -> (f64, f64) {
    minimize_x(cfg, search, |x| decoupled_peak(cfg, x))
}

/// Cache size below which devoting the whole cache to common files minimizes the
/// Scheme 2 peak rate; `(Nc/K)(√(Nu(K+1)/(Nc(K/G+1))) − 1)`, clamped at zero.
pub fn peak_split_threshold(cfg: &SystemConfig) -> f64 {
    if cfg.common == 0 {
        return 0.0;
    }
    let k = cfg.users as f64;
    let nc = cfg.common as f64;
    let ratio = cfg.unique as f64 * (k + 1.0) / (nc * (cfg.users_per_class() as f64 + 1.0));
    ((nc / k) * (ratio.sqrt() - 1.0)).max(0.0)
}

/// Upper end of the small-cache window `min(Nc, G·Nu)/K` where the average rate is
/// affine in `x`.
pub fn small_cache_window(cfg: &SystemConfig) -> f64 {
    cfg.common.min(cfg.classes * cfg.unique) as f64 / cfg.users as f64
}

/// Closed-form average-optimal split inside the small-cache window: `1` when
/// `Nu/Nc > G·(E²[Nu] + E[Nu])/(E²[Nc] + E[Nc])`, else `0`.
pub fn avg_split_pick(cfg: &SystemConfig) -> Result<f64> {
    if cfg.common == 0 {
        return Ok(0.0);
    }
    if cfg.unique == 0 {
        return Ok(1.0);
    }
    let (ec, eu) = expected_distinct(cfg)?;
    let lhs = cfg.unique as f64 / cfg.common as f64;
    let rhs = cfg.classes as f64 * (eu * eu + eu) / (ec * ec + ec);
    Ok(if lhs > rhs { 1.0 } else { 0.0 })
}

/// Result of the average-rate split search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvgSplit {
    pub x_star: f64,
    pub rate: Estimate,
    /// Grid-search minimizer.
    pub x_grid: f64,
    /// Closed-form pick when `M` lies in the small-cache window.
    pub x_closed_form: Option<f64>,
}

/// Grid-search minimizer of the mean Scheme 2 rate: `(x_star, mean)`.
pub fn optimize_x_avg_with(averages: &DemandAverages, cfg: &SystemConfig) -> (f64, f64) {
    minimize_x(cfg, &XSearch::default(), |x| averages.scheme2_mean(x))
}

/// Average-optimal split. Inside the small-cache window the closed-form pick is
/// returned; the grid minimizer is always reported alongside it.
pub fn optimize_x_avg(profile: &DemandProfile, mode: AvgMode) -> Result<AvgSplit> {
    let cfg = profile.config();
    let averages = DemandAverages::new(profile, mode)?;
    let (x_grid, _) = optimize_x_avg_with(&averages, cfg);
    let closed = if cfg.cache <= small_cache_window(cfg) {
        Some(avg_split_pick(cfg)?)
    } else {
        None
    };
    let x_star = closed.unwrap_or(x_grid);
    Ok(AvgSplit {
        x_star,
        rate: averages.scheme2(x_star),
        x_grid,
        x_closed_form: closed,
    })
}

/// Derivative bounds of the two Scheme 2 branches with respect to `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeBounds {
    /// Slope of the all-distinct common rate.
    pub y1: f64,
    /// Slope of `G` times the all-distinct unique rate.
    pub y2: f64,
    /// Central-difference slope of `R_c` at the worst α.
    pub d_common: f64,
    /// Central-difference slope of `G·R_u` at the worst α.
    pub d_unique: f64,
    pub alpha: f64,
}

/// `Y1 = −(KM/Nc)·ρ(K, t_c)·(1/(t_c+1) + 1/(K−t_c))` and the analogous `Y2` for the
/// unique branch, with `ρ(K, t) = C(K, t+1)/C(K, t)`.
pub fn slope_bounds(cfg: &SystemConfig, x: f64) -> Result<SlopeBounds> {
    let k = cfg.users as f64;
    let per = cfg.users_per_class() as f64;
    let m = cfg.cache;
    let nc = cfg.common as f64;
    let nu = cfg.unique as f64;
    if cfg.common == 0 || cfg.unique == 0 {
        return Err(Error::Regime {
            what: "Nc, Nu",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let t_c = k * m * x / nc;
    let t_u = per * m * (1.0 - x) / nu;
    if !(1.0..=k - 1.0).contains(&t_c) {
        return Err(Error::Regime {
            what: "t_c",
            value: t_c,
            lo: 1.0,
            hi: k - 1.0,
        });
    }
    if !(1.0..=per - 1.0).contains(&t_u) {
        return Err(Error::Regime {
            what: "t_u",
            value: t_u,
            lo: 1.0,
            hi: per - 1.0,
        });
    }
    let y1 = -(k * m / nc) * (binom(k, t_c + 1.0) / binom(k, t_c)) * (1.0 / (t_c + 1.0) + 1.0 / (k - t_c));
    let y2 = (k * m / nu) * (binom(per, t_u + 1.0) / binom(per, t_u)) * (1.0 / (t_u + 1.0) + 1.0 / (per - t_u));

    let alpha = worst_alpha(cfg, x).0;
    let g = cfg.classes as f64;
    let n_c = (k - g * alpha).max(0.0).min(nc);
    let n_u = alpha.min(nu);
    let h = 1e-6;
    let (lo, hi) = ((x - h).max(0.0), (x + h).min(1.0));
    let d_common = (scheme2_common_rate(cfg, hi, n_c) - scheme2_common_rate(cfg, lo, n_c)) / (hi - lo);
    let d_unique = g * (scheme2_unique_rate(cfg, hi, n_u) - scheme2_unique_rate(cfg, lo, n_u)) / (hi - lo);
    Ok(SlopeBounds {
        y1,
        y2,
        d_common,
        d_unique,
        alpha,
    })
}
