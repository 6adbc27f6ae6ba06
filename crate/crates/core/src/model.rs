//! System description, demand sets and demand vectors.
//!
//! Files are indexed globally: common files occupy `0..Nc`, followed by one block
//! of `Nu` unique files per class. Users are assigned to classes in contiguous
//! blocks of `K/G`. Within a user's demand set the local order is the same: common
//! files first, then that class's unique files.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::combinat::binom;
use crate::error::{Error, Result};

/// Default cap on `(Nc + Nu)^K` for exact enumeration.
pub const DEFAULT_ENUM_LIMIT: u64 = 10_000_000;

/// Environment variable that overrides [`DEFAULT_ENUM_LIMIT`].
pub const ENUM_LIMIT_ENV: &str = "HETCACHE_MAX_ENUM";

/// Current enumeration limit, honouring `HETCACHE_MAX_ENUM`.
pub fn enumeration_limit() -> u64 {
    std::env::var(ENUM_LIMIT_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_LIMIT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "G")]
    pub classes: usize,
    #[serde(rename = "Nc")]
    pub common: usize,
    #[serde(rename = "Nu")]
    pub unique: usize,
    #[serde(rename = "M")]
    pub cache: f64,
    /// File size in bits; only the simulator reads it.
    #[serde(rename = "F", skip_serializing_if = "Option::is_none")]
    pub file_bits: Option<u64>,
}

/// Which block a global file index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Common,
    Unique { class: usize },
}

impl SystemConfig {
    pub fn new(users: usize, classes: usize, common: usize, unique: usize, cache: f64) -> Result<Self> {
        let cfg = Self {
            users,
            classes,
            common,
            unique,
            cache,
            file_bits: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_file_bits(mut self, bits: u64) -> Self {
        self.file_bits = Some(bits);
        self
    }

    /// Same system with a different cache size.
    pub fn with_cache(&self, cache: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.cache = cache;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(invalid("K", "at least one user is required (K >= 1)"));
        }
        if self.classes == 0 {
            return Err(invalid("G", "at least one class is required (G >= 1)"));
        }
        if !self.users.is_multiple_of(self.classes) {
            return Err(invalid(
                "K",
                format!(
                    "K = {} is not divisible by G = {}; every class must have K/G users",
                    self.users, self.classes
                ),
            ));
        }
        if self.common + self.unique == 0 {
            return Err(invalid("Nc", "Nc + Nu must be positive (every demand set is empty)"));
        }
        if !self.cache.is_finite() || self.cache < 0.0 {
            return Err(invalid("M", format!("M = {} must be a finite value >= 0", self.cache)));
        }
        let n = self.total_files() as f64;
        if self.cache > n {
            return Err(invalid(
                "M",
                format!("M = {} exceeds the library size N = {}", self.cache, n),
            ));
        }
        if self.file_bits == Some(0) {
            return Err(invalid("F", "file size must be positive"));
        }
        Ok(())
    }

    /// Parse and validate a JSON config `{K, G, Nc, Nu, M, F?, pmf?}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| invalid("<document>", e.to_string()))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| invalid("<document>", "expected a JSON object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "K" | "G" | "Nc" | "Nu" | "M" | "F" | "pmf") {
                return Err(invalid("<document>", format!("unknown field `{key}`")));
            }
        }
        let cfg = Self {
            users: json_count(obj.get("K"), "K")?,
            classes: json_count(obj.get("G"), "G")?,
            common: json_count(obj.get("Nc"), "Nc")?,
            unique: json_count(obj.get("Nu"), "Nu")?,
            cache: match obj.get("M") {
                Some(Value::Number(n)) => n.as_f64().ok_or_else(|| invalid("M", "not representable"))?,
                Some(_) => return Err(invalid("M", "expected a number")),
                None => return Err(invalid("M", "missing")),
            },
            file_bits: match obj.get("F") {
                None | Some(Value::Null) => None,
                Some(v) => Some(v.as_u64().ok_or_else(|| invalid("F", "expected a positive integer"))?),
            },
        };
        match obj.get("pmf") {
            None | Some(Value::Null) => {}
            Some(Value::String(s)) if s == "uniform" => {}
            Some(other) => {
                return Err(invalid("pmf", format!("only \"uniform\" is supported, got {other}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// `N = Nc + G·Nu`.
    pub fn total_files(&self) -> usize {
        self.common + self.classes * self.unique
    }

    pub fn users_per_class(&self) -> usize {
        self.users / self.classes
    }

    /// `|S_k| = Nc + Nu`.
    pub fn class_library(&self) -> usize {
        self.common + self.unique
    }

    pub fn class_of(&self, user: usize) -> usize {
        user / self.users_per_class()
    }

    pub fn class_users(&self, class: usize) -> std::ops::Range<usize> {
        let per = self.users_per_class();
        class * per..(class + 1) * per
    }

    pub fn unique_file(&self, class: usize, j: usize) -> usize {
        self.common + class * self.unique + j
    }

    pub fn file_kind(&self, file: usize) -> Option<FileKind> {
        if file < self.common {
            Some(FileKind::Common)
        } else if file < self.total_files() {
            Some(FileKind::Unique {
                class: (file - self.common) / self.unique,
            })
        } else {
            None
        }
    }

    /// Global ids of `S_k` in local order.
    pub fn demand_set(&self, user: usize) -> Vec<usize> {
        let class = self.class_of(user);
        (0..self.common)
            .chain((0..self.unique).map(|j| self.unique_file(class, j)))
            .collect()
    }

    fn local_to_global(&self, class: usize, local: usize) -> usize {
        if local < self.common {
            local
        } else {
            self.unique_file(class, local - self.common)
        }
    }

    /// Size of `S_1 × … × S_K` as a float (it overflows integers quickly).
    pub fn demand_space_size(&self) -> f64 {
        (self.class_library() as f64).powi(self.users as i32)
    }

    /// Assumption checks that do not make the config invalid.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.users > self.common {
            out.push(format!(
                "K = {} exceeds Nc = {}; rate formulas assume more common files than users",
                self.users, self.common
            ));
        }
        if self.users_per_class() > self.unique {
            out.push(format!(
                "K/G = {} exceeds Nu = {}; rate formulas assume more unique files than users per class",
                self.users_per_class(),
                self.unique
            ));
        }
        out
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn json_count(value: Option<&Value>, field: &'static str) -> Result<usize> {
    let v = value.ok_or_else(|| invalid(field, "missing"))?;
    let n = v
        .as_u64()
        .ok_or_else(|| invalid(field, format!("expected a non-negative integer, got {v}")))?;
    usize::try_from(n)
        .ok()
        .filter(|&n| n <= 1 << 32)
        .ok_or_else(|| invalid(field, format!("{n} is too large")))
}

/// Requests made in one delivery phase, indexed by user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    /// Checks `d_k ∈ S_k` for every user.
    pub fn new(cfg: &SystemConfig, files: Vec<usize>) -> Result<Self> {
        if files.len() != cfg.users {
            return Err(Error::InvalidDemand(format!(
                "expected {} requests, got {}",
                cfg.users,
                files.len()
            )));
        }
        for (user, &file) in files.iter().enumerate() {
            match cfg.file_kind(file) {
                None => {
                    return Err(Error::InvalidDemand(format!(
                        "user {user} requests file {file}, but the library has {} files",
                        cfg.total_files()
                    )))
                }
                Some(FileKind::Unique { class }) if class != cfg.class_of(user) => {
                    return Err(Error::InvalidDemand(format!(
                        "user {user} (class {}) requests unique file {file} of class {class}",
                        cfg.class_of(user)
                    )))
                }
                _ => {}
            }
        }
        Ok(Self(files))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-user request distributions over each demand set.
#[derive(Debug, Clone)]
pub struct DemandProfile {
    cfg: SystemConfig,
    /// `pmfs[k][l]` is the probability that user `k` requests local file `l` of `S_k`.
    pmfs: Vec<Vec<f64>>,
    samplers: Option<Vec<WeightedIndex<f64>>>,
}

impl DemandProfile {
    pub fn uniform(cfg: &SystemConfig) -> Self {
        let width = cfg.class_library();
        Self {
            cfg: cfg.clone(),
            pmfs: vec![vec![1.0 / width as f64; width]; cfg.users],
            samplers: None,
        }
    }

    /// Arbitrary per-user pmfs in local demand-set order.
    pub fn from_pmfs(cfg: &SystemConfig, pmfs: Vec<Vec<f64>>) -> Result<Self> {
        let width = cfg.class_library();
        if pmfs.len() != cfg.users {
            return Err(Error::InvalidProfile(format!(
                "expected {} pmfs, got {}",
                cfg.users,
                pmfs.len()
            )));
        }
        let mut samplers = Vec::with_capacity(pmfs.len());
        for (user, pmf) in pmfs.iter().enumerate() {
            if pmf.len() != width {
                return Err(Error::InvalidProfile(format!(
                    "user {user}: pmf has {} entries, demand set has {width}",
                    pmf.len()
                )));
            }
            if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "user {user}: negative or non-finite mass"
                )));
            }
            let total: f64 = pmf.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidProfile(format!(
                    "user {user}: pmf sums to {total}, not 1"
                )));
            }
            samplers.push(WeightedIndex::new(pmf).map_err(|e| Error::InvalidProfile(e.to_string()))?);
        }
        Ok(Self {
            cfg: cfg.clone(),
            pmfs,
            samplers: Some(samplers),
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn is_uniform(&self) -> bool {
        self.samplers.is_none()
    }

    /// Probability that `user` requests global file `file`.
    pub fn mass(&self, user: usize, file: usize) -> f64 {
        let cfg = &self.cfg;
        let local = match cfg.file_kind(file) {
            Some(FileKind::Common) => file,
            Some(FileKind::Unique { class }) if class == cfg.class_of(user) => {
                cfg.common + (file - cfg.unique_file(class, 0))
            }
            _ => return 0.0,
        };
        self.pmfs[user][local]
    }

    /// `p_d = Π_k p^{[k]}_{d_k}` (requests are independent across users).
    pub fn probability(&self, d: &DemandVector) -> f64 {
        d.as_slice()
            .iter()
            .enumerate()
            .map(|(user, &file)| self.mass(user, file))
            .product()
    }
}

/// Draw one demand vector; each user independently from its pmf.
pub fn sample_demand<R: Rng + ?Sized>(profile: &DemandProfile, rng: &mut R) -> DemandVector {
    let cfg = &profile.cfg;
    let width = cfg.class_library();
    let files = (0..cfg.users)
        .map(|user| {
            let local = match &profile.samplers {
                None => rng.gen_range(0..width),
                Some(s) => s[user].sample(rng),
            };
            cfg.local_to_global(cfg.class_of(user), local)
        })
        .collect();
    DemandVector(files)
}

/// Every vector of `S_1 × … × S_K` exactly once, in odometer order (user 0 slowest).
pub fn enumerate_demands(cfg: &SystemConfig) -> Result<DemandIter> {
    enumerate_demands_with_limit(cfg, enumeration_limit())
}

pub fn enumerate_demands_with_limit(cfg: &SystemConfig, limit: u64) -> Result<DemandIter> {
    let size = cfg.demand_space_size();
    if size > limit as f64 {
        return Err(Error::EnumerationTooLarge { size, limit });
    }
    Ok(DemandIter {
        cfg: cfg.clone(),
        digits: vec![0; cfg.users],
        done: false,
    })
}

#[derive(Debug, Clone)]
pub struct DemandIter {
    cfg: SystemConfig,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for DemandIter {
    type Item = DemandVector;

    fn next(&mut self) -> Option<DemandVector> {
        if self.done {
            return None;
        }
        let cfg = &self.cfg;
        let out = DemandVector(
            self.digits
                .iter()
                .enumerate()
                .map(|(user, &l)| cfg.local_to_global(cfg.class_of(user), l))
                .collect(),
        );
        let width = cfg.class_library();
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < width {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistinctStats {
    /// `N(d)`: distinct files over all users.
    pub n_total: usize,
    /// `N_c(d)`: distinct common files.
    pub n_common: usize,
    /// `N_{u_i}(d)`: distinct unique files requested in class `i`.
    pub n_unique_per_class: Vec<usize>,
    /// `α_i`: users of class `i` requesting unique files.
    pub alpha_per_class: Vec<usize>,
    /// `N_{3_i}(d)`: distinct files (common or unique) requested within class `i`.
    pub n_within_class: Vec<usize>,
}

pub fn distinct_stats(d: &DemandVector, cfg: &SystemConfig) -> Result<DistinctStats> {
    if d.len() != cfg.users {
        return Err(Error::InvalidDemand(format!(
            "expected {} requests, got {}",
            cfg.users,
            d.len()
        )));
    }
    let n = cfg.total_files();
    let mut seen = vec![false; n];
    let mut stats = DistinctStats {
        n_total: 0,
        n_common: 0,
        n_unique_per_class: vec![0; cfg.classes],
        alpha_per_class: vec![0; cfg.classes],
        n_within_class: vec![0; cfg.classes],
    };
    let mut seen_in_class = vec![false; n];
    for class in 0..cfg.classes {
        for user in cfg.class_users(class) {
            let file = d.0[user];
            let kind = cfg
                .file_kind(file)
                .ok_or_else(|| Error::InvalidDemand(format!("user {user}: file index {file} out of range")))?;
            if let FileKind::Unique { class: owner } = kind {
                if owner != class {
                    return Err(Error::InvalidDemand(format!(
                        "user {user} (class {class}) requests unique file {file} of class {owner}"
                    )));
                }
                stats.alpha_per_class[class] += 1;
            }
            if !seen_in_class[file] {
                seen_in_class[file] = true;
                stats.n_within_class[class] += 1;
            }
            if !seen[file] {
                seen[file] = true;
                stats.n_total += 1;
                match kind {
                    FileKind::Common => stats.n_common += 1,
                    FileKind::Unique { .. } => stats.n_unique_per_class[class] += 1,
                }
            }
        }
        for user in cfg.class_users(class) {
            seen_in_class[d.0[user]] = false;
        }
    }
    Ok(stats)
}

/// `(E[N_c(d)], E[N_u(d)])` under the uniform profile, by indicators.
pub fn expected_distinct(cfg: &SystemConfig) -> Result<(f64, f64)> {
    let width = cfg.class_library();
    if width == 0 {
        return Err(invalid("Nc", "Nc + Nu must be positive"));
    }
    let miss = (width as f64 - 1.0) / width as f64;
    let common = cfg.common as f64 * (1.0 - miss.powi(cfg.users as i32));
    let unique = cfg.unique as f64 * (1.0 - miss.powf(cfg.users as f64 / cfg.classes as f64));
    Ok((common, unique))
}

/// Laws of the distinct-request counts, indexed by count.
///
/// Every average rate in the crate is linear in these marginals, so an average
/// over the demand measure reduces to a dot product with a per-count rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctLaws {
    pub total: Vec<f64>,
    pub common: Vec<f64>,
    pub unique: Vec<Vec<f64>>,
    pub within_class: Vec<Vec<f64>>,
}

impl DistinctLaws {
    fn zeros(cfg: &SystemConfig) -> Self {
        let per = cfg.users_per_class();
        Self {
            total: vec![0.0; cfg.users + 1],
            common: vec![0.0; cfg.users + 1],
            unique: vec![vec![0.0; per + 1]; cfg.classes],
            within_class: vec![vec![0.0; per + 1]; cfg.classes],
        }
    }

    fn add(&mut self, stats: &DistinctStats, weight: f64) {
        self.total[stats.n_total] += weight;
        self.common[stats.n_common] += weight;
        for class in 0..self.unique.len() {
            self.unique[class][stats.n_unique_per_class[class]] += weight;
            self.within_class[class][stats.n_within_class[class]] += weight;
        }
    }

    /// Exact laws by enumerating the demand space with `profile` weights.
    pub fn enumerated(profile: &DemandProfile) -> Result<Self> {
        let cfg = profile.config();
        let mut laws = Self::zeros(cfg);
        for d in enumerate_demands(cfg)? {
            let p = profile.probability(&d);
            if p > 0.0 {
                laws.add(&distinct_stats(&d, cfg)?, p);
            }
        }
        Ok(laws)
    }

    /// Empirical laws of a sample.
    pub fn empirical(cfg: &SystemConfig, samples: &[DistinctStats]) -> Self {
        let mut laws = Self::zeros(cfg);
        let w = 1.0 / samples.len().max(1) as f64;
        for s in samples {
            laws.add(s, w);
        }
        laws
    }

    /// Exact laws under the uniform profile, without enumeration.
    pub fn uniform(cfg: &SystemConfig) -> Self {
        let per = cfg.users_per_class();
        let width = cfg.class_library();
        let q_common = cfg.common as f64 / width as f64;

        // Unique requesters per class ~ Binomial(K/G, 1 - q).
        let requesters = binomial_pmf(per, 1.0 - q_common);
        let unique_occ: Vec<Vec<f64>> = (0..=per).map(|j| occupancy_pmf(j, cfg.unique)).collect();
        let common_occ: Vec<Vec<f64>> = (0..=cfg.users).map(|j| occupancy_pmf(j, cfg.common)).collect();

        let mut unique = vec![0.0; per + 1];
        for (j, pj) in requesters.iter().enumerate() {
            for (m, pm) in unique_occ[j].iter().enumerate() {
                unique[m] += pj * pm;
            }
        }
        let total_requesters = binomial_pmf(cfg.users, q_common);
        let mut common = vec![0.0; cfg.users + 1];
        for (j, pj) in total_requesters.iter().enumerate() {
            for (m, pm) in common_occ[j].iter().enumerate() {
                common[m] += pj * pm;
            }
        }

        // Joint over classes of (unique requesters so far, distinct unique so far).
        let mut joint = vec![vec![0.0; cfg.users + 1]; cfg.users + 1];
        joint[0][0] = 1.0;
        for _ in 0..cfg.classes {
            let mut next = vec![vec![0.0; cfg.users + 1]; cfg.users + 1];
            for (acc_j, row) in joint.iter().enumerate() {
                for (acc_m, &p) in row.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (j, pj) in requesters.iter().enumerate() {
                        for (m, pm) in unique_occ[j].iter().enumerate() {
                            if *pm > 0.0 {
                                next[acc_j + j][acc_m + m] += p * pj * pm;
                            }
                        }
                    }
                }
            }
            joint = next;
        }
        let mut total = vec![0.0; cfg.users + 1];
        for (j, row) in joint.iter().enumerate() {
            let occ = &common_occ[cfg.users - j];
            for (mu, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (mc, pc) in occ.iter().enumerate() {
                    if mu + mc <= cfg.users {
                        total[mu + mc] += p * pc;
                    }
                }
            }
        }

        let within = occupancy_pmf(per, width);
        let mut within_class = vec![within; cfg.classes];
        for w in &mut within_class {
            w.resize(per + 1, 0.0);
        }
        Self {
            total,
            common,
            unique: vec![unique; cfg.classes],
            within_class,
        }
    }
}

/// Law of the number of distinct values among `draws` uniform picks from `files`.
pub fn occupancy_pmf(draws: usize, files: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; draws + 1];
    pmf[0] = 1.0;
    if files == 0 {
        return pmf;
    }
    let f = files as f64;
    for step in 0..draws {
        let mut next = vec![0.0; draws + 1];
        for m in 0..=step.min(files) {
            let p = pmf[m];
            if p == 0.0 {
                continue;
            }
            let hit = m as f64 / f;
            next[m] += p * hit;
            if m < files {
                next[m + 1] += p * (1.0 - hit);
            }
        }
        pmf = next;
    }
    pmf
}

pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| binom(n as f64, k as f64) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(k: usize, g: usize, nc: usize, nu: usize, m: f64) -> SystemConfig {
        SystemConfig::new(k, g, nc, nu, m).unwrap()
    }

    #[test]
    fn config_validation_names_the_field() {
        let err = SystemConfig::new(5, 2, 4, 4, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "K", .. }), "{err}");
        let err = SystemConfig::new(4, 2, 2, 1, 5.0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "M", .. }));
        let err = SystemConfig::new(4, 0, 2, 1, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "G", .. }));
        assert_eq!(cfg(4, 2, 2, 1, 4.0).total_files(), 4);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let c = SystemConfig::from_json_str(r#"{"K":4,"G":2,"Nc":2,"Nu":1,"M":1.5,"F":12,"pmf":"uniform"}"#).unwrap();
        assert_eq!(c.users, 4);
        assert_eq!(c.file_bits, Some(12));
        assert_eq!(SystemConfig::from_json_str(&c.to_json()).unwrap(), c);

        let e = SystemConfig::from_json_str(r#"{"K":4,"G":2,"Nc":2,"M":1}"#).unwrap_err();
        assert!(e.to_string().contains("`Nu`"), "{e}");
        let e = SystemConfig::from_json_str(r#"{"K":4.5,"G":2,"Nc":2,"Nu":1,"M":1}"#).unwrap_err();
        assert!(e.to_string().contains("`K`"), "{e}");
        let e = SystemConfig::from_json_str(r#"{"K":4,"G":2,"Nc":2,"Nu":1,"M":1,"pmf":"zipf"}"#).unwrap_err();
        assert!(e.to_string().contains("`pmf`"), "{e}");
        let e = SystemConfig::from_json_str(r#"{"K":4,"G":3,"Nc":2,"Nu":1,"M":1}"#).unwrap_err();
        assert!(e.to_string().contains("divisible"), "{e}");
        assert!(SystemConfig::from_json_str("[1,2]").is_err());
        assert!(SystemConfig::from_json_str("{").is_err());
    }

    #[test]
    fn warnings_for_small_libraries() {
        assert!(cfg(4, 2, 8, 8, 1.0).warnings().is_empty());
        assert_eq!(cfg(4, 2, 2, 1, 1.0).warnings().len(), 2);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_demands(&cfg(2, 2, 1, 1, 0.0)).unwrap().count(), 4);
        assert_eq!(enumerate_demands(&cfg(4, 2, 2, 1, 0.0)).unwrap().count(), 81);
        assert_eq!(enumerate_demands(&cfg(1, 1, 3, 0, 0.0)).unwrap().count(), 3);
        let all: std::collections::HashSet<_> = enumerate_demands(&cfg(4, 2, 2, 1, 0.0)).unwrap().collect();
        assert_eq!(all.len(), 81);
        for d in &all {
            assert!(DemandVector::new(&cfg(4, 2, 2, 1, 0.0), d.as_slice().to_vec()).is_ok());
        }
    }

    #[test]
    fn enumeration_guard() {
        let big = cfg(16, 2, 256, 256, 0.0);
        assert!(matches!(
            enumerate_demands(&big),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(enumerate_demands_with_limit(&cfg(4, 2, 2, 1, 0.0), 80).is_err());
        assert!(enumerate_demands_with_limit(&cfg(4, 2, 2, 1, 0.0), 81).is_ok());
    }

    #[test]
    fn demand_vector_rejects_foreign_unique_files() {
        let c = cfg(4, 2, 2, 1, 0.0);
        // file 3 is class 1's unique file; user 0 is class 0
        assert!(DemandVector::new(&c, vec![3, 0, 0, 0]).is_err());
        assert!(DemandVector::new(&c, vec![0, 0, 9, 0]).is_err());
        assert!(DemandVector::new(&c, vec![0, 0, 0]).is_err());
        assert!(DemandVector::new(&c, vec![2, 0, 3, 1]).is_ok());
    }

    #[test]
    fn distinct_stats_examples() {
        let c = cfg(4, 2, 2, 1, 0.0);
        let same = DemandVector::new(&c, vec![0, 0, 0, 0]).unwrap();
        let s = distinct_stats(&same, &c).unwrap();
        assert_eq!((s.n_total, s.n_common), (1, 1));
        assert_eq!(s.alpha_per_class, vec![0, 0]);

        // c0, c0, u_B, c1
        let d = DemandVector::new(&c, vec![0, 0, 3, 1]).unwrap();
        let s = distinct_stats(&d, &c).unwrap();
        assert_eq!((s.n_total, s.n_common), (3, 2));
        assert_eq!(s.alpha_per_class, vec![0, 1]);
        assert_eq!(s.n_unique_per_class, vec![0, 1]);
        assert_eq!(s.n_within_class, vec![1, 2]);

        let wide = cfg(4, 2, 3, 2, 0.0);
        let d = DemandVector::new(&wide, vec![3, 4, 5, 6]).unwrap();
        let s = distinct_stats(&d, &wide).unwrap();
        assert_eq!((s.n_total, s.n_common), (4, 0));
        assert_eq!(s.alpha_per_class, vec![2, 2]);
    }

    #[test]
    fn stats_are_permutation_covariant_within_class() {
        let c = cfg(4, 2, 2, 2, 0.0);
        for d in enumerate_demands(&c).unwrap() {
            let s = distinct_stats(&d, &c).unwrap();
            let mut v = d.as_slice().to_vec();
            v.swap(0, 1);
            v.swap(2, 3);
            let p = distinct_stats(&DemandVector::new(&c, v).unwrap(), &c).unwrap();
            assert_eq!(s, p);
        }
    }

    #[test]
    fn sampling_respects_support_and_degenerate_pmfs() {
        let c = cfg(4, 2, 2, 1, 0.0);
        let uniform = DemandProfile::uniform(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let d = sample_demand(&uniform, &mut rng);
            assert!(DemandVector::new(&c, d.as_slice().to_vec()).is_ok());
        }
        let pmfs = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let point = DemandProfile::from_pmfs(&c, pmfs).unwrap();
        let d = sample_demand(&point, &mut rng);
        assert_eq!(d.as_slice(), &[1, 2, 0, 3]);
        assert_eq!(point.probability(&d), 1.0);
    }

    #[test]
    fn sampling_frequencies_within_three_sigma() {
        let c = cfg(2, 2, 2, 2, 0.0);
        let pmfs = vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.25; 4]];
        let profile = DemandProfile::from_pmfs(&c, pmfs.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = vec![vec![0usize; 4]; 2];
        for _ in 0..n {
            let d = sample_demand(&profile, &mut rng);
            for (user, &file) in d.as_slice().iter().enumerate() {
                let local = c.demand_set(user).iter().position(|&f| f == file).unwrap();
                counts[user][local] += 1;
            }
        }
        for user in 0..2 {
            for l in 0..4 {
                let p = pmfs[user][l];
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                let freq = counts[user][l] as f64 / n as f64;
                assert!((freq - p).abs() <= 3.0 * sigma, "user {user} file {l}: {freq} vs {p}");
            }
        }
    }

    #[test]
    fn profile_validation() {
        let c = cfg(2, 2, 1, 1, 0.0);
        assert!(DemandProfile::from_pmfs(&c, vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(DemandProfile::from_pmfs(&c, vec![vec![1.0], vec![0.5, 0.5]]).is_err());
        assert!(DemandProfile::from_pmfs(&c, vec![vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn expected_distinct_examples() {
        let (ec, eu) = expected_distinct(&cfg(1, 1, 3, 2, 0.0)).unwrap();
        assert!((ec - 3.0 / 5.0).abs() < 1e-15);
        assert!((eu - 2.0 / 5.0).abs() < 1e-15);
        let (ec, _) = expected_distinct(&cfg(4, 2, 2, 1, 0.0)).unwrap();
        assert!((ec - 130.0 / 81.0).abs() < 1e-14);
        let (ec, _) = expected_distinct(&cfg(400, 2, 2, 1, 0.0)).unwrap();
        assert!((ec - 2.0).abs() < 1e-12);
    }

    #[test]
    fn expected_distinct_matches_enumeration() {
        for (k, g, nc, nu) in [(4, 2, 2, 1), (2, 1, 3, 0), (3, 3, 1, 2), (4, 4, 2, 2), (6, 2, 2, 1)] {
            let c = cfg(k, g, nc, nu, 0.0);
            let (ec, eu) = expected_distinct(&c).unwrap();
            let total = c.demand_space_size();
            let (mut sc, mut su) = (0.0, 0.0);
            for d in enumerate_demands(&c).unwrap() {
                let s = distinct_stats(&d, &c).unwrap();
                sc += s.n_common as f64;
                su += s.n_unique_per_class[0] as f64;
            }
            assert!((sc / total - ec).abs() < 1e-12, "{c:?}");
            assert!((su / total - eu).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn uniform_laws_match_enumerated_laws() {
        for (k, g, nc, nu) in [
            (4, 2, 2, 1),
            (3, 1, 2, 2),
            (6, 3, 2, 1),
            (4, 4, 1, 3),
            (4, 2, 0, 3),
            (4, 2, 3, 0),
        ] {
            let c = cfg(k, g, nc, nu, 0.0);
            let exact = DistinctLaws::enumerated(&DemandProfile::uniform(&c)).unwrap();
            let closed = DistinctLaws::uniform(&c);
            let close =
                |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
            assert!(
                close(&exact.total, &closed.total),
                "total {c:?}\n{:?}\n{:?}",
                exact.total,
                closed.total
            );
            assert!(close(&exact.common, &closed.common), "common {c:?}");
            for class in 0..g {
                assert!(close(&exact.unique[class], &closed.unique[class]), "unique {c:?}");
                assert!(
                    close(&exact.within_class[class], &closed.within_class[class]),
                    "within {c:?}"
                );
            }
        }
    }

    #[test]
    fn monte_carlo_mean_distinct_within_three_standard_errors() {
        let c = cfg(4, 2, 2, 1, 0.0);
        let laws = DistinctLaws::uniform(&c);
        let exact: f64 = laws.total.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        let profile = DemandProfile::uniform(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| distinct_stats(&sample_demand(&profile, &mut rng), &c).unwrap().n_total as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - exact).abs() <= 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn occupancy_small_cases() {
        assert_eq!(occupancy_pmf(0, 5), vec![1.0]);
        let p = occupancy_pmf(2, 2);
        assert!((p[1] - 0.5).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15);
        let p = occupancy_pmf(3, 0);
        assert_eq!(p[0], 1.0);
    }
}
