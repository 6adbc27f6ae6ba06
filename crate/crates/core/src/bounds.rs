//! Cut-set lower bound, gap ratios and peak-rate regime classification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::optimizer::{optimize_x_peak_with, XSearch};
use crate::ratecalc::{scheme1_peak, scheme3_peak, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `max(0, max_s R_CB(s))`.
    pub bound_value: f64,
    /// Maximizing `s`, or 0 when no `s` is admissible.
    pub s_star: usize,
    pub per_s_values: Vec<(usize, f64)>,
    /// Set when `M > N/G` or no candidate is positive.
    pub trivial: bool,
    pub gap_ratios: Vec<(Scheme, f64)>,
    pub regime: Option<RegimeReport>,
}

/// `R_CB(s) = G·s − G·s·M / ⌊N/(G·s)⌋`.
pub fn cutset_term(cfg: &SystemConfig, s: usize) -> f64 {
    let g = cfg.classes;
    let n = cfg.total_files();
    let floor = n / (g * s);
    let gs = (g * s) as f64;
    gs - gs * cfg.cache / floor as f64
}

/// Cut-set lower bound on the peak rate, maximized over `s ∈ 1..=⌊min(K, N)/G⌋`.
pub fn cutset_bound(cfg: &SystemConfig) -> BoundReport {
    let s_max = cfg.users.min(cfg.total_files()) / cfg.classes;
    let per_s_values: Vec<(usize, f64)> = (1..=s_max).map(|s| (s, cutset_term(cfg, s))).collect();
    let (s_star, best) = per_s_values
        .iter()
        .copied()
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    let bound_value = best.max(0.0);
    let trivial = cfg.cache > cfg.total_files() as f64 / cfg.classes as f64 || bound_value <= 0.0;
    BoundReport {
        bound_value,
        s_star,
        per_s_values,
        trivial,
        gap_ratios: Vec::new(),
        regime: None,
    }
}

/// `rate / bound`; undefined when the bound is trivial.
pub fn gap_ratio(cfg: &SystemConfig, scheme_peak_rate: f64) -> Result<f64> {
    let b = cutset_bound(cfg);
    if b.bound_value <= 0.0 {
        return Err(Error::TrivialBound { bound: b.bound_value });
    }
    Ok(scheme_peak_rate / b.bound_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeLabel {
    Scheme1Best,
    Scheme2Best,
    Indeterminate,
}

/// One threshold inequality and whether the config satisfies it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub name: &'static str,
    /// `None` when not applicable (e.g. a division by `G − 1` with `G = 1`).
    pub value: Option<f64>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub label: RegimeLabel,
    pub thresholds: Vec<Threshold>,
    /// Peak rates of Schemes 1, 2, 3.
    pub peaks: [f64; 3],
    /// Scheme with the smallest numeric peak rate (ties go to the lower number).
    pub numeric_best: Scheme,
}

/// Largest `M` at which Scheme 1 is guaranteed best:
/// `min(Nc − G·Nu/K, Nc/K, G·Nu/K)`.
pub fn scheme1_threshold(cfg: &SystemConfig) -> f64 {
    let k = cfg.users as f64;
    let g = cfg.classes as f64;
    let nc = cfg.common as f64;
    let nu = cfg.unique as f64;
    (nc - g * nu / k).min(nc / k).min(g * nu / k)
}

/// Smallest `M` at which Scheme 2 is guaranteed best:
/// `max(G/(G−1)·(K+1)/K·Nu, Nc/G + Nu)`; `None` for a single class.
pub fn scheme2_threshold(cfg: &SystemConfig) -> Option<f64> {
    if cfg.classes < 2 {
        return None;
    }
    let k = cfg.users as f64;
    let g = cfg.classes as f64;
    let nu = cfg.unique as f64;
    Some((g / (g - 1.0) * (k + 1.0) / k * nu).max(cfg.common as f64 / g + nu))
}

/// Cache size where Schemes 1 and 3 have equal peak rate, `Nc − G·Nu/K`.
pub fn scheme3_crossover(cfg: &SystemConfig) -> f64 {
    cfg.common as f64 - cfg.classes as f64 * cfg.unique as f64 / cfg.users as f64
}

pub fn classify_regime(cfg: &SystemConfig, search: &XSearch) -> RegimeReport {
    let m = cfg.cache;
    let k = cfg.users as f64;
    let g = cfg.classes as f64;
    let nc = cfg.common as f64;
    let nu = cfg.unique as f64;
    let g_ratio = if cfg.classes > 1 {
        Some(g / (g - 1.0) * (k + 1.0) / k * nu)
    } else {
        None
    };
    let thresholds = vec![
        Threshold {
            name: "M <= Nc - G*Nu/K (Scheme 1 beats Scheme 3)",
            value: Some(scheme3_crossover(cfg)),
            satisfied: m <= scheme3_crossover(cfg),
        },
        Threshold {
            name: "M <= min(Nc, G*Nu)/K (Scheme 1 beats Scheme 2)",
            value: Some(nc.min(g * nu) / k),
            satisfied: m <= nc.min(g * nu) / k,
        },
        Threshold {
            name: "M >= G/(G-1)*(K+1)/K*Nu (Scheme 2 beats Scheme 3)",
            value: g_ratio,
            satisfied: g_ratio.is_some_and(|v| m >= v),
        },
        Threshold {
            name: "M >= Nc/G + Nu (Scheme 2 beats Scheme 1)",
            value: Some(nc / g + nu),
            satisfied: m >= nc / g + nu,
        },
    ];
    let label = if m <= scheme1_threshold(cfg) {
        RegimeLabel::Scheme1Best
    } else if scheme2_threshold(cfg).is_some_and(|t| m >= t) {
        RegimeLabel::Scheme2Best
    } else {
        RegimeLabel::Indeterminate
    };
    let peaks = [
        scheme1_peak(cfg),
        optimize_x_peak_with(cfg, search).rate,
        scheme3_peak(cfg),
    ];
    let mut best = 0;
    for i in 1..3 {
        if peaks[i] < peaks[best] {
            best = i;
        }
    }
    RegimeReport {
        label,
        thresholds,
        peaks,
        numeric_best: Scheme::from_number(best as u8 + 1).expect("index in 1..=3"),
    }
}

/// Bound, gap ratios of the three schemes and regime classification.
pub fn full_report(cfg: &SystemConfig, search: &XSearch) -> BoundReport {
    let mut report = cutset_bound(cfg);
    let regime = classify_regime(cfg, search);
    if report.bound_value > 0.0 {
        report.gap_ratios = [Scheme::AllCommon, Scheme::Split, Scheme::AllUnique]
            .into_iter()
            .zip(regime.peaks)
            .map(|(s, r)| (s, r / report.bound_value))
            .collect();
    }
    report.regime = Some(regime);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, g: usize, nc: usize, nu: usize, m: f64) -> SystemConfig {
        SystemConfig::new(k, g, nc, nu, m).unwrap()
    }

    #[test]
    fn zero_cache_bound() {
        // N = 4 + 2·4 = 12
        let b = cutset_bound(&cfg(8, 2, 4, 4, 0.0));
        assert_eq!(b.bound_value, 8.0);
        assert_eq!(b.s_star, 4);
        assert_eq!(b.per_s_values.len(), 4);
        assert!(!b.trivial);
    }

    #[test]
    fn single_class_formula() {
        let c = cfg(6, 1, 5, 4, 2.0);
        let n = 9usize;
        let b = cutset_bound(&c);
        for (s, v) in &b.per_s_values {
            let want = *s as f64 - *s as f64 * 2.0 / (n / s) as f64;
            assert_eq!(*v, want);
        }
    }

    #[test]
    fn large_cache_is_trivial() {
        let c = cfg(8, 2, 4, 4, 6.5);
        let b = cutset_bound(&c);
        assert!(b.trivial);
        assert!(b.per_s_values.iter().all(|(_, v)| *v <= 0.0));
        assert!(matches!(gap_ratio(&c, 1.0), Err(Error::TrivialBound { .. })));
    }

    #[test]
    fn no_admissible_s() {
        let b = cutset_bound(&cfg(2, 2, 0, 1, 0.0));
        assert_eq!(b.s_star, 1);
        let b = cutset_bound(&cfg(2, 2, 1, 0, 0.0));
        assert!(b.per_s_values.is_empty() && b.trivial && b.bound_value == 0.0);
    }

    #[test]
    fn bound_below_peaks() {
        for m in [0.0, 0.5, 1.0, 2.0, 4.0, 6.0] {
            let c = cfg(8, 2, 6, 3, m);
            let r = full_report(&c, &XSearch::default());
            let regime = r.regime.unwrap();
            for p in regime.peaks {
                assert!(r.bound_value <= p + 1e-12, "m={m}");
            }
            assert!(r.gap_ratios.iter().all(|(_, g)| *g >= 1.0 - 1e-12));
        }
    }

    #[test]
    fn crossover_equalizes_schemes_1_and_3() {
        let base = cfg(16, 2, 64, 32, 0.0);
        let m = scheme3_crossover(&base);
        let c = base.with_cache(m).unwrap();
        assert!((scheme1_peak(&c) - scheme3_peak(&c)).abs() < 1e-9);
    }

    #[test]
    fn single_class_has_no_scheme2_threshold() {
        let c = cfg(8, 1, 8, 8, 10.0);
        assert!(scheme2_threshold(&c).is_none());
        let r = classify_regime(&c, &XSearch::default());
        assert!(r.thresholds[2].value.is_none());
        assert_ne!(r.label, RegimeLabel::Scheme2Best);
    }

    #[test]
    fn labels_agree_with_numeric_rates() {
        let small = cfg(16, 2, 256, 256, 4.0);
        let r = classify_regime(&small, &XSearch::default());
        assert_eq!(r.label, RegimeLabel::Scheme1Best);
        assert_eq!(r.numeric_best, Scheme::AllCommon);

        let large = cfg(16, 4, 64, 64, 150.0);
        let r = classify_regime(&large, &XSearch::default());
        assert_eq!(r.label, RegimeLabel::Scheme2Best);
        assert_eq!(r.numeric_best, Scheme::Split, "{r:?}");
    }
}
