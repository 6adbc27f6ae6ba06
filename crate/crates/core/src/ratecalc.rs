//! Analytic delivery rates.
//!
//! Every rate is normalized by the file size `F`. A delivery group of `K_eff` users
//! sharing a library of `n_files` with per-user cache `m` runs the MN scheme at
//! `t = K_eff·m/n_files`. Non-integer `t` uses Gamma-relaxed binomials; `t < 1`
//! and `t > K_eff − 1` are handled by sending an uncached fraction uncoded or by
//! caching a fraction at every user, which makes the rate continuous in `t`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::combinat::{binom, ln_binom, ln_binom_continued};
use crate::error::{Error, Result};
use crate::model::{
    binomial_pmf, distinct_stats, occupancy_pmf, sample_demand, DemandProfile, DistinctLaws, DistinctStats,
    SystemConfig,
};
use crate::optimizer::{self, XSearch};

const SEAM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    /// Scheme 1: every file treated as common.
    AllCommon,
    /// Scheme 2: cache split between common and unique files.
    Split,
    /// Scheme 3: every class served independently.
    AllUnique,
}

impl Scheme {
    pub fn number(self) -> u8 {
        match self {
            Scheme::AllCommon => 1,
            Scheme::Split => 2,
            Scheme::AllUnique => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Scheme::AllCommon),
            2 => Some(Scheme::Split),
            3 => Some(Scheme::AllUnique),
            _ => None,
        }
    }
}

/// Derived placement parameters for a scheme (and `x` for Scheme 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeParams {
    /// Generic `KM/N`.
    pub t: f64,
    pub t1: f64,
    pub t_c: f64,
    pub t_u: f64,
    pub t3: f64,
    /// Uncached fraction sent uncoded for the scheme's main group, `max(0, 1 − t)`.
    pub p_uncached: f64,
    /// Fraction cached at every user of the main group, `max(0, t − (K_eff − 1))`.
    pub gamma_full: f64,
}

impl SchemeParams {
    pub fn new(cfg: &SystemConfig, scheme: Scheme, x: f64) -> Self {
        let k = cfg.users as f64;
        let per = cfg.users_per_class() as f64;
        let m = cfg.cache;
        let t1 = k * m / cfg.total_files() as f64;
        let t_c = if cfg.common == 0 {
            0.0
        } else {
            k * m * x / cfg.common as f64
        };
        let t_u = if cfg.unique == 0 {
            0.0
        } else {
            per * m * (1.0 - x) / cfg.unique as f64
        };
        let t3 = per * m / cfg.class_library() as f64;
        let (main_t, main_k) = match scheme {
            Scheme::AllCommon => (t1, k),
            Scheme::Split => (t_c, k),
            Scheme::AllUnique => (t3, per),
        };
        Self {
            t: t1,
            t1,
            t_c,
            t_u,
            t3,
            p_uncached: (1.0 - main_t).clamp(0.0, 1.0),
            gamma_full: (main_t - (main_k - 1.0)).clamp(0.0, 1.0),
        }
    }
}

/// Mean of a rate over the demand measure, with a standard error for sampled estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: Option<f64>,
    pub samples: Option<usize>,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self {
            mean,
            std_err: None,
            samples: None,
        }
    }

    fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: Some((var / n as f64).sqrt()),
            samples: Some(n),
        }
    }
}

/// How averages over the demand distribution are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AvgMode {
    /// Enumerate every demand vector (guarded by the enumeration limit).
    Exact,
    /// Exact distinct-count laws for the uniform profile, no enumeration.
    Occupancy,
    /// Sampled demand vectors; reproducible for a fixed seed.
    MonteCarlo { samples: usize, seed: u64 },
}

impl AvgMode {
    pub fn label(&self) -> String {
        match self {
            AvgMode::Exact => "exact".into(),
            AvgMode::Occupancy => "occupancy".into(),
            AvgMode::MonteCarlo { samples, seed } => format!("montecarlo(n={samples},seed={seed})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ReportKind {
    Scheme(Scheme),
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub kind: ReportKind,
    /// Cache split used (Scheme 2 only).
    pub x: Option<f64>,
    pub peak: Option<f64>,
    pub avg: Option<Estimate>,
    pub params: Option<SchemeParams>,
}

fn check_t(k_eff: f64, t: f64) -> Result<()> {
    if !(t >= 1.0 - SEAM_EPS && t <= k_eff - 1.0 + SEAM_EPS) {
        return Err(Error::Regime {
            what: "t",
            value: t,
            lo: 1.0,
            hi: k_eff - 1.0,
        });
    }
    Ok(())
}

/// MN peak rate `(K − t)/(t + 1)` for `1 <= t <= K − 1`.
pub fn mn_peak(k_eff: f64, t: f64) -> Result<f64> {
    check_t(k_eff, t)?;
    Ok((k_eff - t) / (t + 1.0))
}

/// MN peak rate as the binomial ratio `C(K, t+1)/C(K, t)`.
pub fn mn_peak_binomial(k_eff: f64, t: f64) -> Result<f64> {
    check_t(k_eff, t)?;
    let t = t.clamp(1.0, k_eff - 1.0);
    Ok(binom(k_eff, t + 1.0) / binom(k_eff, t))
}

/// Rate when the requests cover `n_distinct` distinct files,
/// `[C(K, t+1) − C(K − n, t+1)] / C(K, t)`.
pub fn mn_rate_distinct(k_eff: f64, t: f64, n_distinct: f64) -> Result<f64> {
    check_t(k_eff, t)?;
    if !(n_distinct >= 0.0) {
        return Err(Error::Domain {
            function: "mn_rate_distinct",
            value: n_distinct,
            requirement: "n_distinct >= 0",
        });
    }
    if n_distinct > k_eff + SEAM_EPS {
        return Err(Error::Domain {
            function: "mn_rate_distinct",
            value: n_distinct,
            requirement: "n_distinct <= K_eff",
        });
    }
    Ok(interior(k_eff, t.clamp(1.0, k_eff - 1.0), n_distinct.min(k_eff)))
}

fn interior(k: f64, t: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    // C(K, t+1)/C(K, t) = (K − t)/(t + 1); the subtracted ratio in log space, with
    // C(K − n, t + 1) continued to its zero at t + 1 = K − n + 1 so the rate has no
    // jump where t + 1 passes K − n.
    let lead = (k - t) / (t + 1.0);
    let sub = (ln_binom_continued(k - n, t + 1.0) - ln_binom(k, t)).exp();
    (lead - sub).max(0.0)
}

/// Rate of one delivery group at (possibly fractional) `t`, with boundary regimes.
pub(crate) fn rate_at_t(k: f64, t: f64, n: f64) -> f64 {
    if !(k > 0.0) || !(n > 0.0) {
        return 0.0;
    }
    let n = n.min(k);
    let t = t.clamp(0.0, k);
    if k < 2.0 {
        // No interior regime; interpolate between uncoded (t = 0) and fully cached (t = K).
        return n * (1.0 - t / k);
    }
    if t <= 1.0 {
        let p = 1.0 - t;
        n * p + interior(k, 1.0, n) * (1.0 - p)
    } else if t >= k - 1.0 {
        let gamma = t - (k - 1.0);
        interior(k, k - 1.0, n) * (1.0 - gamma)
    } else {
        interior(k, t, n)
    }
}

/// Group rate from a cache size in files rather than `t`.
pub(crate) fn group_rate(k: f64, m_cache: f64, n_files: f64, n: f64) -> f64 {
    if n_files <= 0.0 || n <= 0.0 {
        return 0.0;
    }
    rate_at_t(k, k * m_cache / n_files, n)
}

/// Rate of an MN group of `k_eff` users over `n_files` with per-user cache
/// `m_cache`, for `n_distinct` distinct requests, across all regimes of `t`.
pub fn adjusted_rate(k_eff: f64, m_cache: f64, n_files: f64, n_distinct: f64) -> Result<f64> {
    if !(k_eff >= 1.0) {
        return Err(Error::Domain {
            function: "adjusted_rate",
            value: k_eff,
            requirement: "K_eff >= 1",
        });
    }
    if !(m_cache >= 0.0) || !(n_files > 0.0) || m_cache > n_files {
        return Err(Error::Regime {
            what: "m_cache",
            value: m_cache,
            lo: 0.0,
            hi: n_files,
        });
    }
    if !(n_distinct >= 0.0) {
        return Err(Error::Domain {
            function: "adjusted_rate",
            value: n_distinct,
            requirement: "n_distinct >= 0",
        });
    }
    Ok(group_rate(k_eff, m_cache, n_files, n_distinct))
}

// ---------------------------------------------------------------------------
// Scheme 1

/// Scheme 1 rate for a demand with `n_distinct` distinct files.
pub fn scheme1_rate(cfg: &SystemConfig, n_distinct: f64) -> f64 {
    group_rate(cfg.users as f64, cfg.cache, cfg.total_files() as f64, n_distinct)
}

pub fn scheme1_peak(cfg: &SystemConfig) -> f64 {
    scheme1_rate(cfg, cfg.users.min(cfg.total_files()) as f64)
}

// ---------------------------------------------------------------------------
// Scheme 2

/// Rate split of Scheme 2 at cache fraction `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitRate {
    pub total: f64,
    /// `R_c`.
    pub common: f64,
    /// `G·R_u`.
    pub unique: f64,
    /// `R_u` of one class.
    pub unique_per_class: f64,
}

/// Common-file group: all `K` users, cache `Mx`, `Nc` files.
pub fn scheme2_common_rate(cfg: &SystemConfig, x: f64, n_common: f64) -> f64 {
    group_rate(cfg.users as f64, cfg.cache * x, cfg.common as f64, n_common)
}

/// Unique-file group of one class: `K/G` users, cache `M(1 − x)`, `Nu` files.
pub fn scheme2_unique_rate(cfg: &SystemConfig, x: f64, n_unique: f64) -> f64 {
    group_rate(
        cfg.users_per_class() as f64,
        cfg.cache * (1.0 - x),
        cfg.unique as f64,
        n_unique,
    )
}

/// Worst-case Scheme 2 rate when `alpha` users of every class request unique files.
///
/// The common group then sees at most `K − Gα` distinct requests, capped at `Nc`;
/// each class sees at most `α` distinct unique requests, capped at `Nu`.
pub fn scheme2_rate(cfg: &SystemConfig, x: f64, alpha: f64) -> SplitRate {
    let g = cfg.classes as f64;
    let n_common = (cfg.users as f64 - g * alpha).max(0.0).min(cfg.common as f64);
    let n_unique = alpha.max(0.0).min(cfg.unique as f64);
    let common = scheme2_common_rate(cfg, x, n_common);
    let per_class = scheme2_unique_rate(cfg, x, n_unique);
    SplitRate {
        total: common + g * per_class,
        common,
        unique: g * per_class,
        unique_per_class: per_class,
    }
}

/// Scheme 2 rate for an arbitrary per-class `α` vector (used for uniform-α checks).
pub fn scheme2_rate_alpha_vector(cfg: &SystemConfig, x: f64, alphas: &[f64]) -> f64 {
    let total_alpha: f64 = alphas.iter().sum();
    let n_common = (cfg.users as f64 - total_alpha).max(0.0).min(cfg.common as f64);
    let unique: f64 = alphas
        .iter()
        .map(|&a| scheme2_unique_rate(cfg, x, a.min(cfg.unique as f64)))
        .sum();
    scheme2_common_rate(cfg, x, n_common) + unique
}

/// Scheme 2 rate for one realized demand.
pub fn scheme2_demand_rate(cfg: &SystemConfig, x: f64, stats: &DistinctStats) -> f64 {
    scheme2_common_rate(cfg, x, stats.n_common as f64)
        + stats
            .n_unique_per_class
            .iter()
            .map(|&n| scheme2_unique_rate(cfg, x, n as f64))
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scheme2Peak {
    pub rate: f64,
    pub x_star: f64,
    pub alpha_star: f64,
}

/// `min_x max_α` Scheme 2 rate (uniform α across classes).
pub fn scheme2_peak(cfg: &SystemConfig, search: &XSearch) -> Scheme2Peak {
    optimizer::optimize_x_peak_with(cfg, search)
}

// ---------------------------------------------------------------------------
// Scheme 3

/// Rate of one class under Scheme 3 for `n_distinct` distinct requests in that class.
pub fn scheme3_class_rate(cfg: &SystemConfig, n_distinct: f64) -> f64 {
    group_rate(
        cfg.users_per_class() as f64,
        cfg.cache,
        cfg.class_library() as f64,
        n_distinct,
    )
}

pub fn scheme3_peak(cfg: &SystemConfig) -> f64 {
    let worst = cfg.users_per_class().min(cfg.class_library()) as f64;
    cfg.classes as f64 * scheme3_class_rate(cfg, worst)
}

// ---------------------------------------------------------------------------
// Averages

/// Distinct-count laws (and, for sampled modes, the samples) of one demand measure.
#[derive(Debug, Clone)]
pub struct DemandAverages {
    cfg: SystemConfig,
    laws: DistinctLaws,
    samples: Option<Vec<DistinctStats>>,
}

const MC_CHUNK: usize = 1024;

/// Sample `samples` demand vectors; chunk `i` draws from stream `i` of the root seed.
pub fn sample_stats(profile: &DemandProfile, samples: usize, seed: u64) -> Vec<DistinctStats> {
    let cfg = profile.config();
    let chunks = samples.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let len = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            (0..len)
                .map(|_| distinct_stats(&sample_demand(profile, &mut rng), cfg).expect("sampled demand is valid"))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

impl DemandAverages {
    pub fn new(profile: &DemandProfile, mode: AvgMode) -> Result<Self> {
        let cfg = profile.config().clone();
        match mode {
            AvgMode::Exact => Ok(Self {
                laws: DistinctLaws::enumerated(profile)?,
                cfg,
                samples: None,
            }),
            AvgMode::Occupancy => {
                if !profile.is_uniform() {
                    return Err(Error::InvalidProfile(
                        "occupancy mode needs the uniform profile; use exact or Monte Carlo".into(),
                    ));
                }
                Ok(Self {
                    laws: DistinctLaws::uniform(&cfg),
                    cfg,
                    samples: None,
                })
            }
            AvgMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Domain {
                        function: "DemandAverages::new",
                        value: 0.0,
                        requirement: "at least one Monte Carlo sample",
                    });
                }
                let stats = sample_stats(profile, samples, seed);
                Ok(Self {
                    laws: DistinctLaws::empirical(&cfg, &stats),
                    cfg,
                    samples: Some(stats),
                })
            }
        }
    }

    pub fn laws(&self) -> &DistinctLaws {
        &self.laws
    }

    fn estimate(&self, mean: f64, per_sample: impl Fn(&DistinctStats) -> f64 + Sync) -> Estimate {
        match &self.samples {
            None => Estimate::exact(mean),
            Some(stats) => {
                let values: Vec<f64> = stats.iter().map(&per_sample).collect();
                let mut est = Estimate::from_samples(&values);
                // Same number by linearity; keep the law-based mean so every scheme
                // shares one summation order.
                est.mean = mean;
                est
            }
        }
    }

    pub fn scheme1(&self) -> Estimate {
        let cfg = &self.cfg;
        let mean = dot(&self.laws.total, |n| scheme1_rate(cfg, n));
        self.estimate(mean, |s| scheme1_rate(cfg, s.n_total as f64))
    }

    /// Mean Scheme 2 rate at `x`, without a standard error (cheap inside searches).
    pub fn scheme2_mean(&self, x: f64) -> f64 {
        let cfg = &self.cfg;
        let common = dot(&self.laws.common, |n| scheme2_common_rate(cfg, x, n));
        let unique: f64 = self
            .laws
            .unique
            .iter()
            .map(|law| dot(law, |n| scheme2_unique_rate(cfg, x, n)))
            .sum();
        common + unique
    }

    pub fn scheme2(&self, x: f64) -> Estimate {
        let cfg = &self.cfg;
        self.estimate(self.scheme2_mean(x), |s| scheme2_demand_rate(cfg, x, s))
    }

    pub fn scheme3(&self) -> Estimate {
        let cfg = &self.cfg;
        let mean = self
            .laws
            .within_class
            .iter()
            .map(|law| dot(law, |n| scheme3_class_rate(cfg, n)))
            .sum();
        self.estimate(mean, |s| {
            s.n_within_class
                .iter()
                .map(|&n| scheme3_class_rate(cfg, n as f64))
                .sum()
        })
    }
}

fn dot(law: &[f64], rate: impl Fn(f64) -> f64) -> f64 {
    law.iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(m, p)| p * rate(m as f64))
        .sum()
}

pub fn scheme1_avg(profile: &DemandProfile, mode: AvgMode) -> Result<Estimate> {
    Ok(DemandAverages::new(profile, mode)?.scheme1())
}

pub fn scheme2_avg(profile: &DemandProfile, x: f64, mode: AvgMode) -> Result<Estimate> {
    Ok(DemandAverages::new(profile, mode)?.scheme2(x))
}

pub fn scheme3_avg(profile: &DemandProfile, mode: AvgMode) -> Result<Estimate> {
    Ok(DemandAverages::new(profile, mode)?.scheme3())
}

// ---------------------------------------------------------------------------
// Oracle

/// Expected group rate when `users` (possibly fractional) request uniformly from
/// `files`, with `t = users·M/files`.
///
/// Fractional user counts mix the distinct-count laws of the two neighbouring
/// integers and cap the count at `users`.
fn oracle_group_expectation(users: f64, files: usize, cache: f64) -> f64 {
    if users <= 0.0 || files == 0 {
        return 0.0;
    }
    let t = users * cache / files as f64;
    let lo = users.floor();
    let frac = users - lo;
    let mut acc = 0.0;
    for (draws, w) in [(lo as usize, 1.0 - frac), (lo as usize + 1, frac)] {
        if w <= 0.0 {
            continue;
        }
        for (m, p) in occupancy_pmf(draws, files).into_iter().enumerate() {
            if p > 0.0 {
                acc += w * p * rate_at_t(users, t, (m as f64).min(users));
            }
        }
    }
    acc
}

fn oracle_group_sample(users: f64, files: usize, cache: f64, rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    if users <= 0.0 || files == 0 {
        return 0.0;
    }
    let lo = users.floor();
    let draws = lo as usize + usize::from(rng.gen::<f64>() < users - lo);
    let mut seen = vec![false; files];
    let mut m = 0usize;
    for _ in 0..draws {
        let f = rng.gen_range(0..files);
        if !seen[f] {
            seen[f] = true;
            m += 1;
        }
    }
    rate_at_t(users, users * cache / files as f64, (m as f64).min(users))
}

/// Uniform-average rate of the "MN with oracle" reference: the server knows which
/// users will request common files and runs separate MN groups for them and for the
/// unique requesters of each class, relaxed to `(K − k_c)/G` users per class.
pub fn oracle_avg(cfg: &SystemConfig, mode: AvgMode) -> Result<Estimate> {
    let k = cfg.users;
    let g = cfg.classes as f64;
    let width = cfg.class_library() as f64;
    let q = cfg.common as f64 / width;
    match mode {
        AvgMode::Exact | AvgMode::Occupancy => {
            let pk = binomial_pmf(k, q);
            let mean = pk
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(kc, p)| {
                    let unique_users = (k - kc) as f64 / g;
                    p * (oracle_group_expectation(kc as f64, cfg.common, cfg.cache)
                        + g * oracle_group_expectation(unique_users, cfg.unique, cfg.cache))
                })
                .sum();
            Ok(Estimate::exact(mean))
        }
        AvgMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Domain {
                    function: "oracle_avg",
                    value: 0.0,
                    requirement: "at least one Monte Carlo sample",
                });
            }
            let chunks = samples.div_ceil(MC_CHUNK);
            let values: Vec<f64> = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    use rand::Rng;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f72_6163_6c65);
                    rng.set_stream(chunk as u64);
                    let len = MC_CHUNK.min(samples - chunk * MC_CHUNK);
                    (0..len)
                        .map(|_| {
                            let kc = (0..k).filter(|_| rng.gen::<f64>() < q).count();
                            let common = oracle_group_sample(kc as f64, cfg.common, cfg.cache, &mut rng);
                            let unique = oracle_group_sample((k - kc) as f64 / g, cfg.unique, cfg.cache, &mut rng);
                            common + g * unique
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
                .concat();
            Ok(Estimate::from_samples(&values))
        }
    }
}

/// Oracle average with the actual integer number of unique requesters per class
/// (independent binomials) instead of the relaxed `(K − k_c)/G`.
pub fn oracle_avg_integer_split(cfg: &SystemConfig) -> f64 {
    let q = cfg.common as f64 / cfg.class_library() as f64;
    let common: f64 = binomial_pmf(cfg.users, q)
        .iter()
        .enumerate()
        .map(|(kc, p)| p * oracle_group_expectation(kc as f64, cfg.common, cfg.cache))
        .sum();
    let unique: f64 = binomial_pmf(cfg.users_per_class(), 1.0 - q)
        .iter()
        .enumerate()
        .map(|(a, p)| p * oracle_group_expectation(a as f64, cfg.unique, cfg.cache))
        .sum();
    common + cfg.classes as f64 * unique
}

// ---------------------------------------------------------------------------
// Reports

/// Peak rates of the three schemes; Scheme 2 at its peak-optimal split.
pub fn peak_reports(cfg: &SystemConfig, search: &XSearch) -> Vec<RateReport> {
    let s2 = scheme2_peak(cfg, search);
    vec![
        RateReport {
            kind: ReportKind::Scheme(Scheme::AllCommon),
            x: None,
            peak: Some(scheme1_peak(cfg)),
            avg: None,
            params: Some(SchemeParams::new(cfg, Scheme::AllCommon, 1.0)),
        },
        RateReport {
            kind: ReportKind::Scheme(Scheme::Split),
            x: Some(s2.x_star),
            peak: Some(s2.rate),
            avg: None,
            params: Some(SchemeParams::new(cfg, Scheme::Split, s2.x_star)),
        },
        RateReport {
            kind: ReportKind::Scheme(Scheme::AllUnique),
            x: None,
            peak: Some(scheme3_peak(cfg)),
            avg: None,
            params: Some(SchemeParams::new(cfg, Scheme::AllUnique, 1.0)),
        },
    ]
}

/// Uniform-average rates of the three schemes and the oracle reference.
///
/// Scheme 2 is evaluated at its average-optimal split; its `peak` field is the
/// worst-case rate at that same split so the two are comparable.
pub fn uniform_avg_report(cfg: &SystemConfig, mode: AvgMode) -> Result<Vec<RateReport>> {
    let profile = DemandProfile::uniform(cfg);
    let averages = DemandAverages::new(&profile, mode)?;
    let (x_star, _) = optimizer::optimize_x_avg_with(&averages, cfg);
    let s2_peak_at_x = optimizer::worst_alpha(cfg, x_star).1;
    Ok(vec![
        RateReport {
            kind: ReportKind::Scheme(Scheme::AllCommon),
            x: None,
            peak: Some(scheme1_peak(cfg)),
            avg: Some(averages.scheme1()),
            params: Some(SchemeParams::new(cfg, Scheme::AllCommon, 1.0)),
        },
        RateReport {
            kind: ReportKind::Scheme(Scheme::Split),
            x: Some(x_star),
            peak: Some(s2_peak_at_x),
            avg: Some(averages.scheme2(x_star)),
            params: Some(SchemeParams::new(cfg, Scheme::Split, x_star)),
        },
        RateReport {
            kind: ReportKind::Scheme(Scheme::AllUnique),
            x: None,
            peak: Some(scheme3_peak(cfg)),
            avg: Some(averages.scheme3()),
            params: Some(SchemeParams::new(cfg, Scheme::AllUnique, 1.0)),
        },
        RateReport {
            kind: ReportKind::Oracle,
            x: None,
            peak: None,
            avg: Some(oracle_avg(cfg, mode)?),
            params: None,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_demands;

    fn cfg(k: usize, g: usize, nc: usize, nu: usize, m: f64) -> SystemConfig {
        SystemConfig::new(k, g, nc, nu, m).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn mn_peak_examples() {
        assert!(close(mn_peak(4.0, 2.0).unwrap(), 2.0 / 3.0, 1e-15));
        assert!(close(mn_peak(2.0, 1.0).unwrap(), 0.5, 1e-15));
        assert!(close(mn_peak(5.0, 4.0).unwrap(), 0.2, 1e-15));
        assert!(close(mn_peak_binomial(4.0, 2.0).unwrap(), 2.0 / 3.0, 1e-12));
        assert!(mn_peak(4.0, 0.5).is_err());
        assert!(mn_peak(4.0, 3.5).is_err());
    }

    #[test]
    fn mn_rate_distinct_examples() {
        assert_eq!(mn_rate_distinct(4.0, 2.0, 0.0).unwrap(), 0.0);
        assert!(close(mn_rate_distinct(4.0, 2.0, 1.0).unwrap(), 0.5, 1e-12));
        assert!(close(mn_rate_distinct(4.0, 2.0, 4.0).unwrap(), 2.0 / 3.0, 1e-12));
        assert!(mn_rate_distinct(4.0, 2.0, -1.0).is_err());
        // K − n < t + 1: subtracted term vanishes
        assert!(close(
            mn_rate_distinct(6.0, 3.0, 3.0).unwrap(),
            mn_peak(6.0, 3.0).unwrap(),
            1e-12
        ));
    }

    #[test]
    fn adjusted_rate_examples() {
        assert!(close(adjusted_rate(4.0, 0.0, 8.0, 3.0).unwrap(), 3.0, 1e-15));
        assert_eq!(adjusted_rate(4.0, 8.0, 8.0, 3.0).unwrap(), 0.0);
        assert!(close(adjusted_rate(2.0, 0.5, 2.0, 2.0).unwrap(), 1.25, 1e-12));
        assert!(adjusted_rate(2.0, 3.0, 2.0, 2.0).is_err());
        assert!(adjusted_rate(0.5, 0.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn adjusted_rate_is_continuous_at_seams() {
        for k in [2.0, 3.0, 4.5, 8.0, 16.0] {
            for n in [1.0, 2.0, k] {
                let n: f64 = f64::min(n, k);
                for seam in [1.0, k - 1.0] {
                    let left = rate_at_t(k, seam - 1e-10, n);
                    let right = rate_at_t(k, seam + 1e-10, n);
                    let at = interior(k, seam, n);
                    assert!(
                        (left - at).abs() < 1e-9 && (right - at).abs() < 1e-9,
                        "k={k} n={n} seam={seam}"
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_equals_binomial_ratio() {
        for k in 4..=32 {
            let k = k as f64;
            let steps = ((k - 2.0) * 10.0).round() as usize;
            for i in 0..=steps {
                let t = 1.0 + i as f64 / 10.0;
                let a = mn_peak(k, t).unwrap();
                let b = mn_peak_binomial(k, t).unwrap();
                assert!(((a - b) / a).abs() <= 1e-10, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn scheme1_peak_examples() {
        assert_eq!(scheme1_peak(&cfg(4, 2, 2, 1, 4.0)), 0.0);
        assert!(close(scheme1_peak(&cfg(16, 2, 256, 256, 48.0)), 7.5, 1e-12));
        assert!(close(scheme1_peak(&cfg(4, 2, 2, 1, 0.0)), 4.0, 1e-15));
        assert!(close(scheme1_peak(&cfg(6, 2, 1, 1, 0.0)), 3.0, 1e-15));
    }

    #[test]
    fn scheme2_rate_examples() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let r = scheme2_rate(&c, 0.5, 1.0);
        assert!(close(r.common, 1.25, 1e-12), "{r:?}");
        assert!(close(r.unique_per_class, 0.5, 1e-12));
        assert!(close(r.total, 2.25, 1e-12));
        assert_eq!(scheme2_rate(&c, 0.5, 0.0).unique, 0.0);
        assert_eq!(scheme2_rate(&c, 0.5, 2.0).common, 0.0);
    }

    #[test]
    fn scheme3_peak_examples() {
        assert_eq!(scheme3_peak(&cfg(4, 2, 2, 1, 3.0)), 0.0);
        let c = cfg(16, 2, 256, 256, 64.0);
        assert!(close(scheme3_peak(&c), 7.0, 1e-12));
        let single = cfg(8, 1, 6, 4, 3.0);
        assert!(close(scheme3_peak(&single), scheme1_peak(&single), 1e-15));
    }

    #[test]
    fn scheme_params_values() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let p = SchemeParams::new(&c, Scheme::Split, 0.5);
        assert!(close(p.t_c, 1.0, 1e-15) && close(p.t_u, 1.0, 1e-15));
        assert!(close(p.t1, 1.0, 1e-15));
        assert!(close(p.t3, 2.0 / 3.0, 1e-15));
        let p3 = SchemeParams::new(&c, Scheme::AllUnique, 1.0);
        assert!(close(p3.p_uncached, 1.0 / 3.0, 1e-15));
        let full = SchemeParams::new(&cfg(4, 2, 2, 1, 3.75), Scheme::AllCommon, 1.0);
        assert!(close(full.gamma_full, 0.75, 1e-12));
    }

    #[test]
    fn averages_equal_per_vector_sums() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let profile = DemandProfile::uniform(&c);
        let avg = DemandAverages::new(&profile, AvgMode::Exact).unwrap();
        let total = c.demand_space_size();
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        for d in enumerate_demands(&c).unwrap() {
            let st = distinct_stats(&d, &c).unwrap();
            s1 += scheme1_rate(&c, st.n_total as f64);
            s2 += scheme2_demand_rate(&c, 0.5, &st);
            s3 += st
                .n_within_class
                .iter()
                .map(|&n| scheme3_class_rate(&c, n as f64))
                .sum::<f64>();
        }
        assert!((avg.scheme1().mean - s1 / total).abs() < 1e-12);
        assert!((avg.scheme2(0.5).mean - s2 / total).abs() < 1e-12);
        assert!((avg.scheme3().mean - s3 / total).abs() < 1e-12);
    }

    #[test]
    fn average_examples() {
        let single = cfg(1, 1, 2, 0, 0.0);
        let p = DemandProfile::uniform(&single);
        assert!(close(scheme1_avg(&p, AvgMode::Exact).unwrap().mean, 1.0, 1e-15));

        let c = cfg(4, 2, 2, 1, 1.0);
        let p = DemandProfile::uniform(&c);
        let (ec, eu) = crate::model::expected_distinct(&c).unwrap();
        // x = 1 sends unique files uncoded, x = 0 sends common files uncoded
        let avg = DemandAverages::new(&p, AvgMode::Exact).unwrap();
        let unique_at_1: f64 = avg
            .laws()
            .unique
            .iter()
            .map(|l| dot(l, |n| scheme2_unique_rate(&c, 1.0, n)))
            .sum();
        assert!(close(unique_at_1, 2.0 * eu, 1e-12));
        assert!(close(
            dot(&avg.laws().common, |n| scheme2_common_rate(&c, 0.0, n)),
            ec,
            1e-12
        ));

        let one_per_class = cfg(3, 3, 2, 2, 0.0);
        let p = DemandProfile::uniform(&one_per_class);
        assert!(close(scheme3_avg(&p, AvgMode::Exact).unwrap().mean, 3.0, 1e-15));

        let g1 = cfg(3, 1, 3, 2, 1.5);
        let p = DemandProfile::uniform(&g1);
        let a1 = scheme1_avg(&p, AvgMode::Exact).unwrap().mean;
        let a3 = scheme3_avg(&p, AvgMode::Exact).unwrap().mean;
        assert!(close(a1, a3, 1e-14));
    }

    #[test]
    fn monte_carlo_is_reproducible_and_close() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let p = DemandProfile::uniform(&c);
        let mode = AvgMode::MonteCarlo {
            samples: 100_000,
            seed: 11,
        };
        let a = scheme1_avg(&p, mode).unwrap();
        let b = scheme1_avg(&p, mode).unwrap();
        assert_eq!(a, b);
        let exact = scheme1_avg(&p, AvgMode::Exact).unwrap().mean;
        assert!((a.mean - exact).abs() <= 3.0 * a.std_err.unwrap());
        let occ = scheme1_avg(&p, AvgMode::Occupancy).unwrap().mean;
        assert!((occ - exact).abs() < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        // Nu = 0: every user requests common files, plain MN average over Nc files.
        let c = cfg(4, 2, 3, 0, 1.5);
        let o = oracle_avg(&c, AvgMode::Exact).unwrap().mean;
        let p = DemandProfile::uniform(&c);
        let mn = scheme1_avg(&p, AvgMode::Exact).unwrap().mean;
        assert!(close(o, mn, 1e-12), "{o} {mn}");

        // M = 0: uncoded, equals E[N(d)] with the integer split
        let c = cfg(4, 2, 2, 1, 0.0);
        let laws = DistinctLaws::uniform(&c);
        let expected_n: f64 = laws.total.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        assert!(close(oracle_avg_integer_split(&c), expected_n, 1e-12));
        // with one class the relaxed count is already an integer
        let g1 = cfg(3, 1, 2, 2, 0.0);
        let laws = DistinctLaws::uniform(&g1);
        let expected_n: f64 = laws.total.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        assert!(close(oracle_avg(&g1, AvgMode::Exact).unwrap().mean, expected_n, 1e-12));
        let g1m = cfg(3, 1, 2, 2, 1.0);
        assert!(close(
            oracle_avg(&g1m, AvgMode::Exact).unwrap().mean,
            oracle_avg_integer_split(&g1m),
            1e-12
        ));
    }

    #[test]
    fn oracle_monte_carlo_tracks_exact() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let exact = oracle_avg(&c, AvgMode::Exact).unwrap().mean;
        let mc = oracle_avg(
            &c,
            AvgMode::MonteCarlo {
                samples: 100_000,
                seed: 5,
            },
        )
        .unwrap();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.std_err.unwrap(), "{exact} {mc:?}");
    }

    #[test]
    fn rates_stay_within_zero_and_k() {
        for m in [0.0, 0.3, 1.0, 2.2, 3.0, 4.0] {
            let c = cfg(4, 2, 2, 1, m);
            for r in [scheme1_peak(&c), scheme3_peak(&c)] {
                assert!((0.0..=4.0).contains(&r));
            }
            for x in [0.0, 0.25, 0.5, 1.0] {
                for a in [0.0, 0.5, 1.0, 2.0] {
                    let r = scheme2_rate(&c, x, a).total;
                    assert!((0.0..=4.0 + 1e-12).contains(&r), "m={m} x={x} a={a} r={r}");
                }
            }
        }
    }

    #[test]
    fn unique_rate_is_submodular_in_alpha() {
        for (k, g, nc, nu) in [(8, 2, 8, 8), (12, 3, 6, 6), (16, 2, 20, 10), (6, 1, 6, 6)] {
            for m in [0.5, 1.0, 2.5, 4.0] {
                let c = cfg(k, g, nc, nu, m);
                for x in [0.0, 0.3, 0.7] {
                    let ru = |a: usize| scheme2_unique_rate(&c, x, a as f64);
                    let per = c.users_per_class();
                    for a1 in 1..=per {
                        for a2 in 0..a1 {
                            let lhs = ru(a2 + 1) - ru(a2);
                            let rhs = ru(a1) - ru(a1 - 1);
                            assert!(lhs >= rhs - 1e-12, "{c:?} x={x} a1={a1} a2={a2}");
                        }
                    }
                }
            }
        }
    }
}
