//! Segment-level placement and delivery simulator.
//!
//! Every delivery group runs the MN placement with an integer `t`: each file in the
//! group's scope is split into `C(k, t)` equal segments indexed by `t`-subsets of the
//! group's users. Delivery sends one XOR per `(t+1)`-subset. Decodability is checked
//! symbolically by elimination over GF(2), one unknown per segment, which is exact
//! because every XOR combines segments of the same size.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::Serialize;

use crate::combinat::binom_exact;
use crate::error::{Error, Result};
use crate::model::{DemandVector, SystemConfig};
use crate::ratecalc::Scheme;

pub const MAX_GROUP_USERS: usize = 20;
pub const MAX_SEGMENTS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GroupLabel {
    /// Scheme 1: all users, whole library.
    All,
    /// Scheme 2: all users, common files.
    Common,
    /// Scheme 2: one class, its unique files.
    Unique(usize),
    /// Scheme 3: one class, its whole library.
    Class(usize),
}

/// Users and files served by one MN instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub label: GroupLabel,
    /// Global user ids, ascending.
    pub users: Vec<usize>,
    /// Global file ids, ascending.
    pub files: Vec<usize>,
    pub t: usize,
    /// `C(k, t)`.
    pub segments_per_file: u64,
    pub segment_bits: u64,
}

impl Group {
    fn local(&self, user: usize) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    fn has_file(&self, file: usize) -> bool {
        self.files.binary_search(&file).is_ok()
    }
}

/// A segment: group, file and the group-local `t`-subset caching it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SegmentId {
    pub group: usize,
    pub file: usize,
    pub mask: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementMap {
    pub scheme: Scheme,
    pub x: Option<(u64, u64)>,
    pub groups: Vec<Group>,
    pub file_bits: u64,
    pub cache: f64,
    users: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MulticastMessage {
    pub group: usize,
    /// Global ids of the `(t+1)`-subset, ascending.
    pub subset: Vec<usize>,
    /// One segment per requesting member of the subset, in subset order.
    pub terms: Vec<SegmentId>,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub total_bits: u64,
    pub file_bits: u64,
    pub per_group: Vec<(GroupLabel, u64)>,
    pub decodable: bool,
    pub messages: Vec<MulticastMessage>,
}

/// Per-user decoding failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeReport {
    pub ok: bool,
    pub failures: Vec<(usize, Vec<SegmentId>)>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn integer_t(
    parameter: &'static str,
    users: usize,
    cache: f64,
    files: usize,
    suggest: impl Fn(usize) -> String,
) -> Result<usize> {
    let t = users as f64 * cache / files as f64;
    let r = t.round();
    if (t - r).abs() > 1e-9 || r < 0.0 {
        return Err(Error::NonIntegerParameter {
            parameter,
            value: t,
            suggestion: suggest(r.max(0.0) as usize),
        });
    }
    let r = r as usize;
    if r > users {
        return Err(Error::Regime {
            what: parameter,
            value: t,
            lo: 0.0,
            hi: users as f64,
        });
    }
    Ok(r)
}

fn ratio_f64(x: Ratio<u64>) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Placement for a scheme; Scheme 2 needs the split `x`.
pub fn place(cfg: &SystemConfig, scheme: Scheme, x: Option<Ratio<u64>>) -> Result<PlacementMap> {
    let k = cfg.users;
    let per = cfg.users_per_class();
    let m = cfg.cache;
    let all_users: Vec<usize> = (0..k).collect();
    let common_files: Vec<usize> = (0..cfg.common).collect();
    let unique_files = |c: usize| -> Vec<usize> { (0..cfg.unique).map(|j| cfg.unique_file(c, j)).collect() };
    let mut raw: Vec<(GroupLabel, Vec<usize>, Vec<usize>, usize)> = Vec::new();
    match scheme {
        Scheme::AllCommon => {
            let n = cfg.total_files();
            let t = integer_t("t1", k, m, n, |t| format!("M = {}", t as f64 * n as f64 / k as f64))?;
            raw.push((GroupLabel::All, all_users, (0..n).collect(), t));
        }
        Scheme::Split => {
            let x = x.ok_or(Error::InvalidConfig {
                field: "x",
                reason: "Scheme 2 needs a cache split".into(),
            })?;
            if x > Ratio::from_integer(1) {
                return Err(Error::Domain {
                    function: "place",
                    value: ratio_f64(x),
                    requirement: "0 <= x <= 1",
                });
            }
            let xf = ratio_f64(x);
            if cfg.common > 0 {
                let t = integer_t("t_c", k, m * xf, cfg.common, |t| {
                    format!("x = {}", t as f64 * cfg.common as f64 / (k as f64 * m))
                })?;
                raw.push((GroupLabel::Common, all_users.clone(), common_files.clone(), t));
            }
            if cfg.unique > 0 {
                for c in 0..cfg.classes {
                    let t = integer_t("t_u", per, m * (1.0 - xf), cfg.unique, |t| {
                        format!("x = {}", 1.0 - t as f64 * cfg.unique as f64 / (per as f64 * m))
                    })?;
                    raw.push((GroupLabel::Unique(c), cfg.class_users(c).collect(), unique_files(c), t));
                }
            }
        }
        Scheme::AllUnique => {
            let n = cfg.class_library();
            for c in 0..cfg.classes {
                let t = integer_t("t3", per, m, n, |t| format!("M = {}", t as f64 * n as f64 / per as f64))?;
                let mut files = common_files.clone();
                files.extend(unique_files(c));
                raw.push((GroupLabel::Class(c), cfg.class_users(c).collect(), files, t));
            }
        }
    }
    let mut f_min = 1u64;
    for (_, users, _, t) in &raw {
        if users.len() > MAX_GROUP_USERS {
            return Err(Error::SimulationTooLarge(format!(
                "group of {} users exceeds the limit of {MAX_GROUP_USERS}",
                users.len()
            )));
        }
        let c = binom_exact(users.len() as u64, *t as i64)?;
        if c > MAX_SEGMENTS {
            return Err(Error::SimulationTooLarge(format!(
                "C({}, {t}) = {c} segments per file exceeds {MAX_SEGMENTS}",
                users.len()
            )));
        }
        f_min = lcm(f_min, c as u64);
    }
    let file_bits = match cfg.file_bits {
        None => f_min,
        Some(f) if f > 0 && f % f_min == 0 => f,
        Some(f) => {
            return Err(Error::FileSize {
                given: f,
                minimal: f_min,
            })
        }
    };
    let groups = raw
        .into_iter()
        .map(|(label, users, files, t)| {
            let segments_per_file = binom_exact(users.len() as u64, t as i64).expect("checked above") as u64;
            Group {
                label,
                users,
                files,
                t,
                segments_per_file,
                segment_bits: file_bits / segments_per_file,
            }
        })
        .collect();
    Ok(PlacementMap {
        scheme,
        x: x.map(|r| (*r.numer(), *r.denom())),
        groups,
        file_bits,
        cache: m,
        users: k,
    })
}

/// All `t`-subsets of `0..n` as bitmasks, lexicographic in the sorted elements.
pub fn subsets(n: usize, t: usize) -> Vec<u32> {
    let mut out = Vec::new();
    if t > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        out.push(idx.iter().fold(0u32, |m, &i| m | (1 << i)));
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - t + i {
                idx[i] += 1;
                for j in i + 1..t {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return out;
            }
        }
    }
}

impl PlacementMap {
    pub fn users(&self) -> usize {
        self.users
    }

    /// Whether `user` holds `seg`.
    pub fn caches(&self, user: usize, seg: &SegmentId) -> bool {
        let g = &self.groups[seg.group];
        g.local(user).is_some_and(|l| seg.mask & (1 << l) != 0)
    }

    /// Segments held by `user` in one file of one group.
    pub fn segments_cached_per_file(&self, group: usize, user: usize) -> u64 {
        let g = &self.groups[group];
        if g.local(user).is_none() || g.t == 0 {
            return 0;
        }
        binom_exact(g.users.len() as u64 - 1, g.t as i64 - 1).expect("small") as u64
    }

    /// Cached bits at `user`.
    pub fn cache_bits(&self, user: usize) -> u64 {
        (0..self.groups.len())
            .map(|gi| {
                let g = &self.groups[gi];
                self.segments_cached_per_file(gi, user) * g.segment_bits * g.files.len() as u64
            })
            .sum()
    }

    /// `cache_bits(user) <= M·F` for every user.
    pub fn within_budget(&self) -> bool {
        let budget = self.cache * self.file_bits as f64;
        (0..self.users).all(|u| self.cache_bits(u) as f64 <= budget * (1.0 + 1e-12) + 1e-9)
    }

    /// Every segment of `file` a user needs from group `gi`.
    fn file_segments(&self, gi: usize, file: usize) -> Vec<SegmentId> {
        let g = &self.groups[gi];
        subsets(g.users.len(), g.t)
            .into_iter()
            .map(|mask| SegmentId { group: gi, file, mask })
            .collect()
    }

    /// The group serving `user`'s request for `file`.
    pub fn serving_group(&self, user: usize, file: usize) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.has_file(file) && g.local(user).is_some())
    }
}

/// Delivery messages for demand `d`.
///
/// Full mode sends every `(t+1)`-subset with at least one requester. Leader mode
/// picks the lowest-index requester of each distinct file as leader and sends only
/// the subsets meeting a leader; group members without a request in the group are
/// assigned the first leader's file so the message set stays decodable.
pub fn deliver(placement: &PlacementMap, d: &DemandVector, leader_based: bool) -> Result<Vec<MulticastMessage>> {
    let demand = d.as_slice();
    if demand.len() != placement.users {
        return Err(Error::InvalidDemand(format!(
            "demand has {} entries for {} users",
            demand.len(),
            placement.users
        )));
    }
    for (u, &f) in demand.iter().enumerate() {
        if placement.serving_group(u, f).is_none() {
            return Err(Error::InvalidDemand(format!(
                "user {u} requests file {f} outside its placement scope"
            )));
        }
    }
    let mut out = Vec::new();
    for (gi, g) in placement.groups.iter().enumerate() {
        let k = g.users.len();
        let mut local_demand: Vec<Option<usize>> = g
            .users
            .iter()
            .map(|&u| Some(demand[u]).filter(|f| g.has_file(*f)))
            .collect();
        let mut leaders = 0u32;
        let mut seen: Vec<usize> = Vec::new();
        for (l, f) in local_demand.iter().enumerate() {
            if let Some(f) = f {
                if !seen.contains(f) {
                    seen.push(*f);
                    leaders |= 1 << l;
                }
            }
        }
        if seen.is_empty() {
            continue;
        }
        if leader_based {
            for slot in local_demand.iter_mut() {
                slot.get_or_insert(seen[0]);
            }
        }
        for mask in subsets(k, g.t + 1) {
            if leader_based && mask & leaders == 0 {
                continue;
            }
            let mut subset = Vec::with_capacity(g.t + 1);
            let mut terms = Vec::with_capacity(g.t + 1);
            for (l, &u) in g.users.iter().enumerate() {
                if mask & (1 << l) == 0 {
                    continue;
                }
                subset.push(u);
                if let Some(f) = local_demand[l] {
                    terms.push(SegmentId {
                        group: gi,
                        file: f,
                        mask: mask & !(1 << l),
                    });
                }
            }
            if !terms.is_empty() {
                out.push(MulticastMessage {
                    group: gi,
                    subset,
                    terms,
                    bits: g.segment_bits,
                });
            }
        }
    }
    Ok(out)
}

/// Dense GF(2) row space with pivot lookup.
struct Gf2Basis {
    words: usize,
    rows: Vec<Vec<u64>>,
    pivots: Vec<usize>,
}

impl Gf2Basis {
    fn new(columns: usize) -> Self {
        Self {
            words: columns.div_ceil(64).max(1),
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    fn reduce(&self, v: &mut [u64]) {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if v[p / 64] >> (p % 64) & 1 == 1 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a ^= b;
                }
            }
        }
    }

    fn insert(&mut self, mut v: Vec<u64>) {
        self.reduce(&mut v);
        let Some(w) = v.iter().position(|&x| x != 0) else {
            return;
        };
        let p = w * 64 + v[w].trailing_zeros() as usize;
        // keep rows fully reduced on the new pivot
        for row in &mut self.rows {
            if row[p / 64] >> (p % 64) & 1 == 1 {
                for (a, b) in row.iter_mut().zip(&v) {
                    *a ^= b;
                }
            }
        }
        self.rows.push(v);
        self.pivots.push(p);
    }

    fn contains_unit(&self, col: usize) -> bool {
        let mut v = vec![0u64; self.words];
        v[col / 64] |= 1 << (col % 64);
        self.reduce(&mut v);
        v.iter().all(|&x| x == 0)
    }
}

/// Checks that every user recovers every segment of its requested file from its
/// cache and the messages.
pub fn verify_decode(placement: &PlacementMap, messages: &[MulticastMessage], d: &DemandVector) -> DecodeReport {
    let mut failures = Vec::new();
    for (u, &f) in d.as_slice().iter().enumerate() {
        let Some(gi) = placement.serving_group(u, f) else {
            failures.push((u, Vec::new()));
            continue;
        };
        let needed: Vec<SegmentId> = placement
            .file_segments(gi, f)
            .into_iter()
            .filter(|s| !placement.caches(u, s))
            .collect();
        if needed.is_empty() {
            continue;
        }
        let mut index: HashMap<SegmentId, usize> = HashMap::new();
        let mut equations: Vec<Vec<usize>> = Vec::new();
        for m in messages {
            let unknown: Vec<usize> = m
                .terms
                .iter()
                .filter(|s| !placement.caches(u, s))
                .map(|s| {
                    let next = index.len();
                    *index.entry(*s).or_insert(next)
                })
                .collect();
            if !unknown.is_empty() {
                equations.push(unknown);
            }
        }
        let mut basis = Gf2Basis::new(index.len());
        for eq in equations {
            let mut v = vec![0u64; basis.words];
            for c in eq {
                v[c / 64] ^= 1 << (c % 64);
            }
            basis.insert(v);
        }
        let missing: Vec<SegmentId> = needed
            .into_iter()
            .filter(|s| index.get(s).is_none_or(|&c| !basis.contains_unit(c)))
            .collect();
        if !missing.is_empty() {
            failures.push((u, missing));
        }
    }
    DecodeReport {
        ok: failures.is_empty(),
        failures,
    }
}

/// Place, deliver and verify one demand.
pub fn simulate(placement: &PlacementMap, d: &DemandVector, leader_based: bool) -> Result<SimResult> {
    let messages = deliver(placement, d, leader_based)?;
    Ok(summarize(placement, messages, d))
}

/// Bit totals and decodability of a given message set.
pub fn summarize(placement: &PlacementMap, messages: Vec<MulticastMessage>, d: &DemandVector) -> SimResult {
    let decodable = verify_decode(placement, &messages, d).ok;
    let mut per_group: Vec<(GroupLabel, u64)> = placement.groups.iter().map(|g| (g.label, 0)).collect();
    for m in &messages {
        per_group[m.group].1 += m.bits;
    }
    SimResult {
        total_bits: per_group.iter().map(|(_, b)| b).sum(),
        file_bits: placement.file_bits,
        per_group,
        decodable,
        messages,
    }
}

/// Transmitted bits over `F`, exact.
pub fn measured_rate(sim: &SimResult) -> Ratio<u64> {
    Ratio::new(sim.total_bits, sim.file_bits)
}

/// Exact rate of one group, bits over `F`.
pub fn group_rate(sim: &SimResult, group: usize) -> Ratio<u64> {
    Ratio::new(sim.per_group[group].1, sim.file_bits)
}

/// Transcript, one message per line: `S={users};files;subsets;bits`.
///
/// `files` lists the requested file of each term, `subsets` the caching subset of
/// each term as global user ids, both in term order.
pub fn transcript(placement: &PlacementMap, messages: &[MulticastMessage]) -> String {
    let mut out = String::new();
    for m in messages {
        let g = &placement.groups[m.group];
        let users = join(m.subset.iter());
        let files = join(m.terms.iter().map(|s| s.file));
        let subsets: Vec<String> = m
            .terms
            .iter()
            .map(|s| {
                let members = (0..g.users.len())
                    .filter(|l| s.mask & (1 << l) != 0)
                    .map(|l| g.users[l]);
                format!("{{{}}}", join(members))
            })
            .collect();
        let _ = writeln!(out, "S={{{users}}};{files};{};{}", subsets.join("|"), m.bits);
    }
    out
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// One parsed transcript line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptLine {
    pub users: Vec<usize>,
    pub files: Vec<usize>,
    pub subsets: Vec<Vec<usize>>,
    pub bits: u64,
}

fn parse_list(s: &str, line: usize, what: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            v.trim().parse::<usize>().map_err(|_| Error::Parse {
                line,
                reason: format!("bad {what} entry {v:?}"),
            })
        })
        .collect()
}

fn braced<'a>(s: &'a str, line: usize, what: &str) -> Result<&'a str> {
    s.strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| Error::Parse {
            line,
            reason: format!("{what} must be wrapped in braces"),
        })
}

/// Parses a transcript; blank lines are skipped. Line numbers are 1-based.
pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(';').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 4 ';'-separated fields, found {}", fields.len()),
            });
        }
        let users_field = fields[0].strip_prefix("S=").ok_or_else(|| Error::Parse {
            line,
            reason: "first field must start with S=".into(),
        })?;
        let users = parse_list(braced(users_field, line, "user set")?, line, "user")?;
        let files = parse_list(fields[1], line, "file")?;
        let subsets = if fields[2].is_empty() {
            Vec::new()
        } else {
            fields[2]
                .split('|')
                .map(|s| parse_list(braced(s, line, "subset")?, line, "subset"))
                .collect::<Result<Vec<_>>>()?
        };
        if subsets.len() != files.len() {
            return Err(Error::Parse {
                line,
                reason: format!("{} files but {} subsets", files.len(), subsets.len()),
            });
        }
        let bits = fields[3].trim().parse::<u64>().map_err(|_| Error::Parse {
            line,
            reason: format!("bad bit count {:?}", fields[3]),
        })?;
        out.push(TranscriptLine {
            users,
            files,
            subsets,
            bits,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_demands;
    use crate::ratecalc::{mn_rate_distinct, scheme1_peak, scheme2_rate, scheme3_peak};

    fn cfg(k: usize, g: usize, nc: usize, nu: usize, m: f64) -> SystemConfig {
        SystemConfig::new(k, g, nc, nu, m).unwrap()
    }

    fn demand(c: &SystemConfig, v: Vec<usize>) -> DemandVector {
        DemandVector::new(c, v).unwrap()
    }

    #[test]
    fn lexicographic_subsets() {
        assert_eq!(subsets(4, 2), vec![0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100]);
        assert_eq!(subsets(3, 0), vec![0]);
        assert_eq!(subsets(3, 3), vec![0b111]);
        assert!(subsets(2, 3).is_empty());
    }

    #[test]
    fn scheme1_placement_counts() {
        let c = cfg(4, 1, 4, 0, 1.0);
        let p = place(&c, Scheme::AllCommon, None).unwrap();
        assert_eq!(p.groups[0].segments_per_file, 4);
        assert_eq!(p.segments_cached_per_file(0, 2), 1);
        assert_eq!(p.cache_bits(0), p.file_bits);
        assert!(p.within_budget());
    }

    #[test]
    fn scheme3_placement_counts() {
        let c = cfg(4, 2, 2, 1, 1.5);
        let p = place(&c, Scheme::AllUnique, None).unwrap();
        assert_eq!(p.groups.len(), 2);
        for g in &p.groups {
            assert_eq!(g.files.len(), 3);
            assert_eq!(g.segments_per_file, 2);
        }
        assert_eq!(p.cache_bits(3) as f64, 1.5 * p.file_bits as f64);
    }

    #[test]
    fn scheme2_placement_fills_cache() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let p = place(&c, Scheme::Split, Some(Ratio::new(1, 2))).unwrap();
        for u in 0..4 {
            assert_eq!(p.cache_bits(u), p.file_bits);
        }
    }

    #[test]
    fn non_integer_t_is_rejected() {
        let c = cfg(4, 1, 4, 0, 1.5);
        match place(&c, Scheme::AllCommon, None) {
            Err(Error::NonIntegerParameter {
                parameter, suggestion, ..
            }) => {
                assert_eq!(parameter, "t1");
                assert!(suggestion.contains("M = 2"), "{suggestion}");
            }
            other => panic!("{other:?}"),
        }
        let c = cfg(4, 2, 2, 1, 1.0);
        assert!(matches!(
            place(&c, Scheme::Split, Some(Ratio::new(1, 3))),
            Err(Error::NonIntegerParameter { .. })
        ));
    }

    #[test]
    fn file_size_must_be_divisible() {
        let c = cfg(4, 1, 4, 0, 2.0).with_file_bits(7);
        assert!(matches!(
            place(&c, Scheme::AllCommon, None),
            Err(Error::FileSize { given: 7, minimal: 6 })
        ));
        let c = cfg(4, 1, 4, 0, 2.0).with_file_bits(12);
        assert_eq!(place(&c, Scheme::AllCommon, None).unwrap().file_bits, 12);
    }

    #[test]
    fn two_users_one_message() {
        let c = cfg(2, 1, 2, 0, 1.0);
        let p = place(&c, Scheme::AllCommon, None).unwrap();
        let d = demand(&c, vec![0, 1]);
        let sim = simulate(&p, &d, false).unwrap();
        assert_eq!(sim.messages.len(), 1);
        assert_eq!(measured_rate(&sim), Ratio::new(1, 2));
        assert!(sim.decodable);
    }

    #[test]
    fn leader_based_repeated_demand() {
        let c = cfg(4, 1, 4, 0, 2.0);
        let p = place(&c, Scheme::AllCommon, None).unwrap();
        let d = demand(&c, vec![1, 1, 1, 1]);
        let sim = simulate(&p, &d, true).unwrap();
        assert_eq!(measured_rate(&sim), Ratio::new(1, 2));
        assert!(sim.decodable);
        let full = simulate(&p, &d, false).unwrap();
        assert_eq!(measured_rate(&full), Ratio::new(2, 3));
    }

    #[test]
    fn idle_group_sends_nothing() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let p = place(&c, Scheme::Split, Some(Ratio::new(1, 2))).unwrap();
        let d = demand(&c, vec![0, 1, 0, 1]);
        let sim = simulate(&p, &d, true).unwrap();
        assert!(sim.per_group[1..].iter().all(|(_, b)| *b == 0));
        assert!(sim.decodable);
    }

    #[test]
    fn dropping_a_message_breaks_decoding() {
        let c = cfg(4, 1, 4, 0, 1.0);
        let p = place(&c, Scheme::AllCommon, None).unwrap();
        let d = demand(&c, vec![0, 1, 2, 3]);
        let mut msgs = deliver(&p, &d, true).unwrap();
        assert!(verify_decode(&p, &msgs, &d).ok);
        msgs.remove(2);
        let r = verify_decode(&p, &msgs, &d);
        assert!(!r.ok && !r.failures.is_empty());
    }

    #[test]
    fn leader_rate_matches_formula_exhaustively() {
        for (k, n, m) in [(4usize, 4usize, 1.0), (4, 3, 1.5), (6, 3, 1.0), (5, 5, 3.0)] {
            let c = cfg(k, 1, n, 0, m);
            let p = place(&c, Scheme::AllCommon, None).unwrap();
            let t = p.groups[0].t as f64;
            for d in enumerate_demands(&c).unwrap() {
                let sim = simulate(&p, &d, true).unwrap();
                assert!(sim.decodable, "{d:?}");
                let mut distinct = d.as_slice().to_vec();
                distinct.sort_unstable();
                distinct.dedup();
                let want = mn_rate_distinct(k as f64, t, distinct.len() as f64).unwrap();
                let got = measured_rate(&sim);
                assert!((*got.numer() as f64 / *got.denom() as f64 - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scheme_level_peaks() {
        let c = cfg(4, 2, 4, 2, 2.0);
        // t1 = 4·2/8 = 1
        let p1 = place(&c, Scheme::AllCommon, None).unwrap();
        let d = demand(&c, vec![0, 1, 2, 3]);
        let r1 = measured_rate(&simulate(&p1, &d, true).unwrap());
        assert_eq!(r1, Ratio::new(3, 2));
        assert!((scheme1_peak(&c) - 1.5).abs() < 1e-12);
        // t3 = 2·2/6: not an integer; use M = 3
        let c3 = c.with_cache(3.0).unwrap();
        let p3 = place(&c3, Scheme::AllUnique, None).unwrap();
        let r3 = measured_rate(&simulate(&p3, &d, true).unwrap());
        assert_eq!(r3, Ratio::new(1, 1));
        assert!((scheme3_peak(&c3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scheme2_example_rate() {
        let c = cfg(4, 2, 2, 1, 1.0);
        let p = place(&c, Scheme::Split, Some(Ratio::new(1, 2))).unwrap();
        // one unique requester per class: users 1 and 3
        let d = demand(&c, vec![0, c.unique_file(0, 0), 1, c.unique_file(1, 0)]);
        let sim = simulate(&p, &d, true).unwrap();
        assert!(sim.decodable);
        assert_eq!(measured_rate(&sim), Ratio::new(9, 4));
        assert!((scheme2_rate(&c, 0.5, 1.0).total - 2.25).abs() < 1e-12);
    }

    #[test]
    fn transcript_roundtrip() {
        let c = cfg(3, 1, 3, 0, 1.0);
        let p = place(&c, Scheme::AllCommon, None).unwrap();
        let d = demand(&c, vec![0, 1, 2]);
        let msgs = deliver(&p, &d, false).unwrap();
        let text = transcript(&p, &msgs);
        let first = text.lines().next().unwrap();
        assert_eq!(first, "S={0,1};0,1;{1}|{0};1");
        let parsed = parse_transcript(&text).unwrap();
        assert_eq!(parsed.len(), msgs.len());
        assert_eq!(parsed[0].users, vec![0, 1]);
        assert_eq!(parsed[0].subsets, vec![vec![1], vec![0]]);
    }

    #[test]
    fn transcript_errors_name_the_line() {
        assert!(parse_transcript("").unwrap().is_empty());
        match parse_transcript("S=0,1;0;{1};3") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_transcript("S={0,1};0;{1};3\nS={0};x;{};1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_transcript("S={0,1};0,1;{1}|{0};3\nbad") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
