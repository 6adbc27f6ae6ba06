//! Self-check suites behind `hetcache verify`.

use std::collections::HashSet;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use hetcache::bounds::{cutset_bound, scheme3_crossover};
use hetcache::model::{distinct_stats, enumerate_demands, expected_distinct};
use hetcache::optimizer::{optimize_x_peak, AlphaProfile};
use hetcache::ratecalc::{
    scheme1_peak, scheme1_rate, scheme2_demand_rate, scheme2_rate_alpha_vector, scheme3_class_rate, scheme3_peak,
};
use hetcache::simcore::{deliver, place, verify_decode, PlacementMap};
use hetcache::{AvgMode, DemandProfile, DemandVector, Scheme, SystemConfig};

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub passed: bool,
    pub first_counterexample: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub trials: usize,
    pub mutate_delivery: bool,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl Summary {
    pub fn first_failure(&self) -> Option<(&str, &str)> {
        self.suites
            .iter()
            .find(|s| !s.passed)
            .map(|s| (s.name, s.first_counterexample.as_deref().unwrap_or("no detail")))
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            first: None,
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(detail());
            }
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            passed: self.failures == 0 && self.cases > 0,
            first_counterexample: self.first,
        }
    }
}

fn cfg(k: usize, g: usize, nc: usize, nu: usize, m: f64) -> SystemConfig {
    SystemConfig::new(k, g, nc, nu, m).expect("suite configs are valid")
}

fn binom(n: i64, k: i64) -> u128 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Placements of all three schemes at every integer caching parameter.
fn integer_placements(base: &SystemConfig) -> Vec<PlacementMap> {
    let (k, per) = (base.users, base.users_per_class());
    let mut out = Vec::new();
    for t in 0..=k {
        let m = (t * base.total_files()) as f64 / k as f64;
        out.extend(place(&base.with_cache(m).unwrap(), Scheme::AllCommon, None));
    }
    for t in 0..=per {
        let m = (t * base.class_library()) as f64 / per as f64;
        out.extend(place(&base.with_cache(m).unwrap(), Scheme::AllUnique, None));
    }
    for tc in 0..=k {
        for tu in 0..=per {
            let num = (tc * base.common * per) as u64;
            let den = num + (tu * base.unique * k) as u64;
            if den == 0 {
                continue;
            }
            let m = den as f64 / (k * per) as f64;
            out.extend(place(
                &base.with_cache(m).unwrap(),
                Scheme::Split,
                Some(Ratio::new(num, den)),
            ));
        }
    }
    out
}

fn simulator_formula() -> SuiteResult {
    let mut t = Tally::new("simulator_formula");
    for (k, g, nc, nu) in [
        (2, 1, 2, 1),
        (2, 2, 1, 2),
        (3, 1, 2, 1),
        (4, 2, 2, 1),
        (4, 1, 2, 2),
        (4, 4, 1, 1),
    ] {
        let base = cfg(k, g, nc, nu, 0.0);
        let demands: Vec<DemandVector> = enumerate_demands(&base).unwrap().collect();
        for p in integer_placements(&base) {
            for d in &demands {
                let msgs = deliver(&p, d, true).unwrap();
                for (gi, grp) in p.groups.iter().enumerate() {
                    let bits: u64 = msgs.iter().filter(|m| m.group == gi).map(|m| m.bits).sum();
                    let n = grp
                        .users
                        .iter()
                        .map(|&u| d.as_slice()[u])
                        .filter(|f| grp.files.contains(f))
                        .collect::<HashSet<_>>()
                        .len() as i64;
                    let (kk, tt) = (grp.users.len() as i64, grp.t as i64);
                    let want = Ratio::new(binom(kk, tt + 1) - binom(kk - n, tt + 1), binom(kk, tt));
                    let got = Ratio::new(bits as u128, p.file_bits as u128);
                    t.check(got == want, || {
                        format!(
                            "{} scheme {} group {gi} demand {:?}: {got} != {want}",
                            base.to_json(),
                            p.scheme.number(),
                            d.as_slice()
                        )
                    });
                }
            }
        }
    }
    t.finish()
}

fn average_enumeration() -> SuiteResult {
    let mut t = Tally::new("average_enumeration");
    for (k, g, nc, nu, m) in [
        (4, 2, 2, 1, 1.0),
        (3, 1, 2, 2, 0.5),
        (4, 4, 1, 2, 2.0),
        (2, 2, 3, 1, 1.5),
    ] {
        let c = cfg(k, g, nc, nu, m);
        let avg = hetcache::ratecalc::DemandAverages::new(&DemandProfile::uniform(&c), AvgMode::Exact).unwrap();
        let demands: Vec<DemandVector> = enumerate_demands(&c).unwrap().collect();
        let count = demands.len() as f64;
        let stats: Vec<_> = demands.iter().map(|d| distinct_stats(d, &c).unwrap()).collect();
        let s1 = stats.iter().map(|s| scheme1_rate(&c, s.n_total as f64)).sum::<f64>() / count;
        let s3 = stats
            .iter()
            .map(|s| {
                s.n_within_class
                    .iter()
                    .map(|&w| scheme3_class_rate(&c, w as f64))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / count;
        t.check((avg.scheme1().mean - s1).abs() <= 1e-12, || {
            format!("{} scheme 1", c.to_json())
        });
        t.check((avg.scheme3().mean - s3).abs() <= 1e-12, || {
            format!("{} scheme 3", c.to_json())
        });
        for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let s2 = stats.iter().map(|s| scheme2_demand_rate(&c, x, s)).sum::<f64>() / count;
            t.check((avg.scheme2(x).mean - s2).abs() <= 1e-12, || {
                format!("{} scheme 2 at x = {x}", c.to_json())
            });
        }
    }
    t.finish()
}

fn expected_distinct_counts() -> SuiteResult {
    let mut t = Tally::new("expected_distinct");
    for (k, g, nc, nu) in [
        (2, 1, 2, 1),
        (3, 1, 2, 2),
        (4, 2, 2, 1),
        (4, 4, 3, 1),
        (6, 3, 3, 1),
        (4, 1, 5, 0),
    ] {
        let c = cfg(k, g, nc, nu, 0.0);
        let (ec, eu) = expected_distinct(&c).unwrap();
        let demands: Vec<DemandVector> = enumerate_demands(&c).unwrap().collect();
        let count = demands.len() as f64;
        let (mut sc, mut su) = (0.0, 0.0);
        for d in &demands {
            let s = distinct_stats(d, &c).unwrap();
            sc += s.n_common as f64;
            su += s.n_unique_per_class[0] as f64;
        }
        t.check((sc / count - ec).abs() <= 1e-12, || format!("{} common", c.to_json()));
        t.check((su / count - eu).abs() <= 1e-12, || format!("{} unique", c.to_json()));
    }
    t.finish()
}

fn random_base(rng: &mut ChaCha8Rng) -> SystemConfig {
    let g = [2usize, 4, 8][rng.gen_range(0..3)];
    let per = rng.gen_range(4usize.div_ceil(g)..=32 / g);
    cfg(g * per, g, rng.gen_range(8..=512), rng.gen_range(8..=512), 0.0)
}

/// Outcome of one randomized bound trial: soundness, then the gap check when a window exists.
type BoundTrial = ((bool, String), Option<(bool, String)>);

fn bound_trial(seed: u64, i: usize) -> BoundTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let base = random_base(&mut rng);
    let n = base.total_files() as f64;
    let (k, g) = (base.users as f64, base.classes as f64);
    let c = base.with_cache(rng.gen_range(0.0..=n)).unwrap();
    let b = cutset_bound(&c).bound_value;
    let best = scheme1_peak(&c).min(scheme3_peak(&c)).min(optimize_x_peak(&c).rate);
    let sound = (
        b <= best + 1e-9,
        format!("{}: bound {b} above peak {best}", c.to_json()),
    );

    let lo = (n / k).max(g / k * (base.common + base.unique) as f64);
    let hi = n / (2.0 * g);
    if lo > hi {
        return (sound, None);
    }
    let c = base.with_cache(rng.gen_range(lo..=hi)).unwrap();
    let b = cutset_bound(&c).bound_value;
    let (r1, r2, r3) = (scheme1_peak(&c), optimize_x_peak(&c).rate, scheme3_peak(&c));
    let ok = r1 / b <= 8.0 && r3 / b <= 8.0 * k / g && r2 / b < 8.0 + 8.0 * k / g;
    (
        sound,
        Some((ok, format!("{}: ratios {} {} {}", c.to_json(), r1 / b, r2 / b, r3 / b))),
    )
}

fn cutset(seed: u64, trials: usize) -> [SuiteResult; 2] {
    let results: Vec<BoundTrial> = (0..trials).into_par_iter().map(|i| bound_trial(seed, i)).collect();
    let mut sound = Tally::new("cutset_soundness");
    let mut gaps = Tally::new("gap_factors");
    for ((ok, detail), gap) in results {
        sound.check(ok, || detail);
        if let Some((ok, detail)) = gap {
            gaps.check(ok, || detail);
        }
    }
    [sound.finish(), gaps.finish()]
}

fn uniform_alpha() -> SuiteResult {
    let mut t = Tally::new("uniform_alpha");
    for g in 1..=3usize {
        for per in 1..=4usize {
            for (nc, nu, m) in [(4usize, 3usize, 1.0), (8, 6, 2.0), (3, 8, 3.5)] {
                let c = cfg(g * per, g, nc, nu, m);
                let profiles = AlphaProfile::enumerate(g, per);
                for xi in 0..=8 {
                    let x = xi as f64 / 8.0;
                    for total in 0..=g * per {
                        let mut all = f64::NEG_INFINITY;
                        let mut uniform = f64::NEG_INFINITY;
                        for a in profiles.iter().filter(|a| a.total() == total) {
                            let alphas: Vec<f64> = a.0.iter().map(|&v| v as f64).collect();
                            let r = scheme2_rate_alpha_vector(&c, x, &alphas);
                            all = all.max(r);
                            if a.is_most_uniform() {
                                uniform = uniform.max(r);
                            }
                        }
                        t.check(uniform >= all - 1e-12, || {
                            format!("{} x = {x} total = {total}", c.to_json())
                        });
                    }
                }
            }
        }
    }
    t.finish()
}

fn crossover() -> SuiteResult {
    let mut t = Tally::new("scheme3_crossover");
    for (k, g, nc, nu) in [(16, 2, 64, 8), (16, 4, 128, 16), (24, 2, 64, 4), (32, 4, 128, 32)] {
        let base = cfg(k, g, nc, nu, 0.0);
        let cross = scheme3_crossover(&base);
        let n = base.total_files() as f64;
        let (kf, per) = (k as f64, base.users_per_class() as f64);
        let lo = (n / kf).max(base.class_library() as f64 / per);
        let hi = ((kf - 1.0) * n / kf).min((per - 1.0) * base.class_library() as f64 / per);
        let mut m = lo.ceil();
        while m <= hi {
            let c = base.with_cache(m).unwrap();
            let diff = scheme3_peak(&c) - scheme1_peak(&c);
            let expect = cross - m;
            let ok = expect.abs() < 1e-9 || diff.abs() < 1e-12 || diff.signum() == expect.signum();
            t.check(ok, || {
                format!("{}: R3 - R1 = {diff}, predicted sign of {expect}", c.to_json())
            });
            m += 0.5;
        }
    }
    t.finish()
}

fn random_trial(rng: &mut ChaCha8Rng) -> Option<(PlacementMap, DemandVector)> {
    let k = rng.gen_range(2..=8usize);
    let divisors: Vec<usize> = (1..=k).filter(|g| k % g == 0).collect();
    let g = divisors[rng.gen_range(0..divisors.len())];
    let (nc, nu) = (rng.gen_range(0..=4usize), rng.gen_range(0..=4usize));
    if nc + nu == 0 {
        return None;
    }
    let base = cfg(k, g, nc, nu, 0.0);
    let per = base.users_per_class();
    let p = match rng.gen_range(0..3) {
        0 => {
            let t = rng.gen_range(0..=k);
            place(
                &base.with_cache((t * base.total_files()) as f64 / k as f64).ok()?,
                Scheme::AllCommon,
                None,
            )
        }
        1 => {
            let t = rng.gen_range(0..=per);
            let m = (t * base.class_library()) as f64 / per as f64;
            place(&base.with_cache(m).ok()?, Scheme::AllUnique, None)
        }
        _ => {
            let (tc, tu) = (rng.gen_range(0..=k), rng.gen_range(0..=per));
            let num = (tc * nc * per) as u64;
            let den = num + (tu * nu * k) as u64;
            if den == 0 {
                return None;
            }
            let m = den as f64 / (k * per) as f64;
            place(&base.with_cache(m).ok()?, Scheme::Split, Some(Ratio::new(num, den)))
        }
    }
    .ok()?;
    let files = (0..k)
        .map(|u| {
            let set = base.demand_set(u);
            set[rng.gen_range(0..set.len())]
        })
        .collect();
    Some((p, DemandVector::new(&base, files).ok()?))
}

fn decodability(seed: u64, trials: usize, mutate: bool) -> [SuiteResult; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdec0de);
    let mut decode = Tally::new("decodability");
    let mut drops = Tally::new("drop_detection");
    while decode.cases < trials {
        let Some((p, d)) = random_trial(&mut rng) else { continue };
        let leader = mutate || rng.gen_bool(0.5);
        let mut msgs = deliver(&p, &d, leader).unwrap();
        if mutate && !msgs.is_empty() {
            msgs.remove(rng.gen_range(0..msgs.len()));
        }
        let report = verify_decode(&p, &msgs, &d);
        decode.check(report.ok, || {
            format!(
                "scheme {} demand {:?}: {:?}",
                p.scheme.number(),
                d.as_slice(),
                report.failures
            )
        });
        if leader && !mutate && !msgs.is_empty() {
            let mut cut = msgs.clone();
            let i = rng.gen_range(0..cut.len());
            cut.remove(i);
            drops.check(!verify_decode(&p, &cut, &d).ok, || {
                format!(
                    "scheme {} demand {:?}: still decodable without message {i}",
                    p.scheme.number(),
                    d.as_slice()
                )
            });
        }
    }
    let mut drops = drops.finish();
    if mutate {
        // nothing to detect when every delivery is already mutated
        drops.passed = true;
    }
    [decode.finish(), drops]
}

pub fn run(seed: u64, trials: usize, mutate: bool) -> Summary {
    let mut suites = vec![simulator_formula(), average_enumeration(), expected_distinct_counts()];
    suites.extend(cutset(seed, trials));
    suites.push(uniform_alpha());
    suites.push(crossover());
    suites.extend(decodability(seed, trials, mutate));
    Summary {
        seed,
        trials,
        mutate_delivery: mutate,
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}
