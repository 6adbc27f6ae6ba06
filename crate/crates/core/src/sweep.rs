//! Parameter sweeps over `M` or `G` producing plot-ready rows.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::cutset_bound;
use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::optimizer::{optimize_x_peak_with, XSearch};
use crate::ratecalc::{scheme1_peak, scheme3_peak, uniform_avg_report, AvgMode};

pub const CSV_HEADER: &str = "var,R1_peak,R2_peak,x_star,R3_peak,cutset,R1_avg,R2_avg,R3_avg,oracle_avg";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SweepSpec {
    /// Cache sizes `start, start + step, …` up to `stop` inclusive.
    Cache { start: f64, stop: f64, step: f64 },
    /// Class counts; users per class stay fixed, so `K = G·(K/G)`.
    Classes(Vec<usize>),
}

impl SweepSpec {
    /// Parses `M:start:stop:step` or `G:g1,g2,…`.
    pub fn parse(text: &str) -> Result<Self> {
        let err = |reason: String| Error::Parse { line: 1, reason };
        let text = text.trim();
        let (var, rest) = text
            .split_once(':')
            .ok_or_else(|| err("expected M:start:stop:step or G:list".into()))?;
        match var {
            "M" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(err(format!("M sweep needs start:stop:step, got {rest:?}")));
                }
                let nums: Vec<f64> = parts
                    .iter()
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| err(format!("bad number {p:?}")))
                    })
                    .collect::<Result<_>>()?;
                if nums[2] <= 0.0 {
                    return Err(err("step must be positive".into()));
                }
                if nums[0] < 0.0 {
                    return Err(err("start must be non-negative".into()));
                }
                Ok(SweepSpec::Cache {
                    start: nums[0],
                    stop: nums[1],
                    step: nums[2],
                })
            }
            "G" => {
                if rest.trim().is_empty() {
                    return Ok(SweepSpec::Classes(Vec::new()));
                }
                let list = rest
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<usize>()
                            .ok()
                            .filter(|&g| g > 0)
                            .ok_or_else(|| err(format!("bad class count {p:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SweepSpec::Classes(list))
            }
            other => Err(err(format!("unknown sweep variable {other:?}; use M or G"))),
        }
    }

    /// Sweep values in order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepSpec::Cache { start, stop, step } => {
                if stop < start {
                    return Vec::new();
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
            SweepSpec::Classes(list) => list.iter().map(|&g| g as f64).collect(),
        }
    }

    /// Configuration at one sweep value.
    pub fn config_at(&self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        match self {
            SweepSpec::Cache { .. } => base.with_cache(value),
            SweepSpec::Classes(_) => {
                let g = value as usize;
                let mut c = base.clone();
                c.users = g * base.users_per_class();
                c.classes = g;
                c.validate()?;
                Ok(c)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowValues {
    pub r1_peak: f64,
    pub r2_peak: f64,
    pub x_star: f64,
    pub r3_peak: f64,
    pub cutset: f64,
    /// Schemes 1, 2, 3 and the oracle, when averages were requested.
    pub avg: Option<[f64; 4]>,
    pub avg_std_err: Option<[Option<f64>; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub var: f64,
    /// `Err` carries the reason a point is infeasible.
    pub values: std::result::Result<RowValues, String>,
}

pub fn evaluate_point(cfg: &SystemConfig, avg: Option<AvgMode>, search: &XSearch) -> Result<RowValues> {
    let s2 = optimize_x_peak_with(cfg, search);
    let bound = cutset_bound(cfg);
    let (avg_values, avg_err) = match avg {
        None => (None, None),
        Some(mode) => {
            let reports = uniform_avg_report(cfg, mode)?;
            let est: Vec<_> = reports
                .iter()
                .map(|r| r.avg.expect("every report has an average"))
                .collect();
            (
                Some([est[0].mean, est[1].mean, est[2].mean, est[3].mean]),
                Some([est[0].std_err, est[1].std_err, est[2].std_err, est[3].std_err]),
            )
        }
    };
    Ok(RowValues {
        r1_peak: scheme1_peak(cfg),
        r2_peak: s2.rate,
        x_star: s2.x_star,
        r3_peak: scheme3_peak(cfg),
        cutset: bound.bound_value,
        avg: avg_values,
        avg_std_err: avg_err,
    })
}

/// Evaluates every sweep point; infeasible points are flagged, not fatal.
pub fn run(base: &SystemConfig, spec: &SweepSpec, avg: Option<AvgMode>, search: &XSearch) -> Vec<SweepRow> {
    spec.values()
        .into_par_iter()
        .map(|v| {
            let values = spec
                .config_at(base, v)
                .and_then(|c| {
                    if c.cache > c.total_files() as f64 {
                        return Err(Error::Regime {
                            what: "M",
                            value: c.cache,
                            lo: 0.0,
                            hi: c.total_files() as f64,
                        });
                    }
                    evaluate_point(&c, avg, search)
                })
                .map_err(|e| e.to_string());
            SweepRow { var: v, values }
        })
        .collect()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = match &row.values {
            Ok(v) => {
                let mut f = vec![
                    v.r1_peak.to_string(),
                    v.r2_peak.to_string(),
                    v.x_star.to_string(),
                    v.r3_peak.to_string(),
                    v.cutset.to_string(),
                ];
                match v.avg {
                    Some(a) => f.extend(a.iter().map(|x| x.to_string())),
                    None => f.extend(std::iter::repeat_n(String::new(), 4)),
                }
                f
            }
            Err(_) => {
                let mut f = vec!["infeasible".to_string()];
                f.extend(std::iter::repeat_n(String::new(), 8));
                f
            }
        };
        out.push_str(&row.var.to_string());
        for f in fields {
            out.push(',');
            out.push_str(&f);
        }
        out.push('\n');
    }
    out
}

pub fn to_json(rows: &[SweepRow]) -> String {
    let items: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| match &row.values {
            Ok(v) => serde_json::json!({
                "var": row.var,
                "R1_peak": v.r1_peak,
                "R2_peak": v.r2_peak,
                "x_star": v.x_star,
                "R3_peak": v.r3_peak,
                "cutset": v.cutset,
                "R1_avg": v.avg.map(|a| a[0]),
                "R2_avg": v.avg.map(|a| a[1]),
                "R3_avg": v.avg.map(|a| a[2]),
                "oracle_avg": v.avg.map(|a| a[3]),
                "std_err": v.avg_std_err,
            }),
            Err(reason) => serde_json::json!({ "var": row.var, "infeasible": reason }),
        })
        .collect();
    serde_json::to_string_pretty(&items).expect("rows serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!(
            SweepSpec::parse("M:0:4:0.5").unwrap().values(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
        );
        assert_eq!(SweepSpec::parse("G:1,2,4").unwrap().values(), vec![1.0, 2.0, 4.0]);
        assert!(SweepSpec::parse("M:0:4:0").is_err());
        assert!(SweepSpec::parse("M:0:4").is_err());
        assert!(SweepSpec::parse("K:1,2").is_err());
        assert!(SweepSpec::parse("G:0").is_err());
        assert!(SweepSpec::parse("M:5:1:1").unwrap().values().is_empty());
    }

    #[test]
    fn class_sweep_keeps_users_per_class() {
        let base = SystemConfig::new(16, 2, 8, 8, 4.0).unwrap();
        let spec = SweepSpec::parse("G:4").unwrap();
        let c = spec.config_at(&base, 4.0).unwrap();
        assert_eq!((c.users, c.classes), (32, 4));
    }

    #[test]
    fn empty_range_is_header_only() {
        let base = SystemConfig::new(4, 2, 2, 1, 0.0).unwrap();
        let rows = run(&base, &SweepSpec::parse("M:3:1:1").unwrap(), None, &XSearch::default());
        assert_eq!(to_csv(&rows), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn infeasible_points_are_flagged() {
        let base = SystemConfig::new(4, 2, 2, 1, 0.0).unwrap();
        let rows = run(&base, &SweepSpec::parse("M:3:5:1").unwrap(), None, &XSearch::default());
        let csv = to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("3,") && !lines[1].contains("infeasible"));
        assert!(lines[3].starts_with("5,infeasible"));
        assert_eq!(lines[3].matches(',').count(), 9);
    }

    #[test]
    fn rows_are_deterministic() {
        let base = SystemConfig::new(4, 2, 2, 1, 0.0).unwrap();
        let spec = SweepSpec::parse("M:0:4:1").unwrap();
        let mode = Some(AvgMode::MonteCarlo { samples: 500, seed: 3 });
        let a = to_csv(&run(&base, &spec, mode, &XSearch::default()));
        let b = to_csv(&run(&base, &spec, mode, &XSearch::default()));
        assert_eq!(a, b);
        assert!(to_json(&run(&base, &spec, None, &XSearch::default())).contains("\"R2_peak\""));
    }
}
