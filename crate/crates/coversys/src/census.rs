//! Brute-force census oracles: exhaustive enumeration of minimal
//! covering systems of `Z` of a given size, exhaustive minimal
//! hyperplane covers of tiny product spaces, deterministic sharding,
//! and JSON-lines persistence with checksummed manifests.

use crate::arith::{FactoredModulus, Progression};
use crate::cover::CoverSystem;
use crate::error::{Error, Result};
use crate::space::{Constraint, Hyperplane, ProductSpace};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

/// Default cap on the census size `n`.
pub const DEFAULT_CENSUS_CAP: usize = 6;

#[derive(Debug, Clone, Copy)]
pub struct CensusOptions {
    pub cap: usize,
    pub keep_systems: bool,
    /// Restrict to systems with pairwise distinct moduli.
    pub distinct_moduli: bool,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions {
            cap: DEFAULT_CENSUS_CAP,
            keep_systems: false,
            distinct_moduli: false,
        }
    }
}

/// One enumerated system, canonically ordered by `(modulus, shift)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusSystem {
    pub lcm: FactoredModulus,
    pub progressions: Vec<Progression>,
    /// True iff the system contains the whole line `0 (mod 1)`.
    pub contains_z: bool,
}

/// Census of minimal covering systems of one size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusRecord {
    pub n: usize,
    pub by_lcm: BTreeMap<FactoredModulus, u64>,
    pub total: u64,
    pub systems: Option<Vec<CensusSystem>>,
    /// True iff some counted system contains the whole line (only the
    /// n = 1 census does).
    pub contains_z: bool,
}

impl CensusRecord {
    fn empty(n: usize, keep: bool) -> Self {
        CensusRecord {
            n,
            by_lcm: BTreeMap::new(),
            total: 0,
            systems: keep.then(Vec::new),
            contains_z: false,
        }
    }

    fn absorb(&mut self, other: CensusRecord) {
        for (lcm, count) in other.by_lcm {
            *self.by_lcm.entry(lcm).or_insert(0) += count;
        }
        self.total += other.total;
        self.contains_z |= other.contains_z;
        if let (Some(mine), Some(theirs)) = (self.systems.as_mut(), other.systems) {
            mine.extend(theirs);
        }
    }

    fn finalize(&mut self) {
        if let Some(systems) = self.systems.as_mut() {
            systems.sort_by_key(system_sort_key);
        }
        debug_assert_eq!(self.total, self.by_lcm.values().sum::<u64>());
    }

    pub fn count_for(&self, n_value: u64) -> u64 {
        let key = FactoredModulus::from_u64(n_value).unwrap();
        self.by_lcm.get(&key).copied().unwrap_or(0)
    }
}

fn system_sort_key(sys: &CensusSystem) -> (u64, Vec<(u64, u64)>) {
    let pairs: Vec<(u64, u64)> = sys
        .progressions
        .iter()
        .map(|p| (p.modulus.value().unwrap_or(u64::MAX), p.shift))
        .collect();
    (sys.lcm.value().unwrap_or(u64::MAX), pairs)
}

/// All moduli with slot weight at most `budget`, ascending by value.
fn candidate_moduli(budget: u64) -> Vec<FactoredModulus> {
    fn rec(
        primes: &[u64],
        budget: u64,
        current: &mut Vec<(u64, u32)>,
        out: &mut Vec<FactoredModulus>,
    ) {
        match primes.split_first() {
            None => out.push(FactoredModulus::from_factors(current.iter().copied()).unwrap()),
            Some((&p, rest)) => {
                rec(rest, budget, current, out);
                let mut e = 1u32;
                while e as u64 * (p - 1) <= budget {
                    current.push((p, e));
                    rec(rest, budget - e as u64 * (p - 1), current, out);
                    current.pop();
                    e += 1;
                }
            }
        }
    }
    let primes = crate::arith::primes_up_to(budget + 1);
    let mut out = Vec::new();
    rec(&primes, budget, &mut Vec::new(), &mut out);
    out.sort_by_key(|m| m.value().unwrap());
    out
}

/// Residue sieve over `Z_N`: coverage and minimality of a list of
/// `(shift, modulus)` pairs.
fn zn_cover_minimal(n_value: u64, progs: &[(u64, u64)]) -> (bool, bool) {
    if n_value <= 128 {
        let full: u128 = if n_value == 128 {
            u128::MAX
        } else {
            (1u128 << n_value) - 1
        };
        let masks: Vec<u128> = progs
            .iter()
            .map(|&(a, d)| {
                let mut m = 0u128;
                let mut x = a;
                while x < n_value {
                    m |= 1 << x;
                    x += d;
                }
                m
            })
            .collect();
        let mut once = 0u128;
        let mut twice = 0u128;
        for &m in &masks {
            twice |= once & m;
            once |= m;
        }
        let covers = once == full;
        let minimal = covers && masks.iter().all(|&m| m & !twice != 0);
        (covers, minimal)
    } else {
        let mut counts = vec![0u8; n_value as usize];
        for &(a, d) in progs {
            let mut x = a;
            while x < n_value {
                counts[x as usize] = counts[x as usize].saturating_add(1);
                x += d;
            }
        }
        let covers = counts.iter().all(|&c| c > 0);
        let minimal = covers
            && progs.iter().all(|&(a, d)| {
                let mut x = a;
                while x < n_value {
                    if counts[x as usize] == 1 {
                        return true;
                    }
                    x += d;
                }
                false
            });
        (covers, minimal)
    }
}

/// Stable 64-bit FNV-1a over the candidate identity `(N, moduli)`.
fn candidate_hash(n_value: u64, moduli: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(n_value);
    for &d in moduli {
        eat(d);
    }
    h
}

/// Enumerates the minimal covering systems of `Z` of size `n` whose lcm
/// is exactly `modulus`. Moduli multisets are visited in lexicographic
/// order and shift choices in lexicographic order; `shard` filters the
/// `(N, multiset)` candidate stream by stable hash.
fn enumerate_for_lcm(
    modulus: &FactoredModulus,
    n: usize,
    opts: &CensusOptions,
    shard: Option<(u64, u64)>,
    record: &mut CensusRecord,
) -> Result<()> {
    let n_value = modulus.value()?;
    if modulus.is_one() {
        // only the whole line, and only at size one
        if n == 1 && shard.is_none_or(|(s, m)| candidate_hash(1, &[1]) % m == s) {
            *record.by_lcm.entry(modulus.clone()).or_insert(0) += 1;
            record.total += 1;
            record.contains_z = true;
            if let Some(list) = record.systems.as_mut() {
                list.push(CensusSystem {
                    lcm: modulus.clone(),
                    progressions: vec![Progression::whole_line()],
                    contains_z: true,
                });
            }
        }
        return Ok(());
    }
    let divisors: Vec<u64> = modulus
        .divisors()?
        .into_iter()
        .filter(|&d| d > 1)
        .collect();
    let mut multiset: Vec<u64> = Vec::with_capacity(n);
    enumerate_multisets(
        modulus,
        n_value,
        &divisors,
        0,
        Ratio::new(0, 1),
        &mut multiset,
        n,
        opts,
        shard,
        record,
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn enumerate_multisets(
    modulus: &FactoredModulus,
    n_value: u64,
    divisors: &[u64],
    from: usize,
    density: Ratio<u64>,
    multiset: &mut Vec<u64>,
    n: usize,
    opts: &CensusOptions,
    shard: Option<(u64, u64)>,
    record: &mut CensusRecord,
) {
    if multiset.len() == n {
        // exact-lcm attribution
        let lcm = multiset.iter().fold(1u64, |acc, &d| acc / gcd(acc, d) * d);
        if lcm != n_value {
            return;
        }
        if let Some((s, m)) = shard {
            if candidate_hash(n_value, multiset) % m != s {
                return;
            }
        }
        emit_shift_choices(modulus, n_value, multiset, record);
        return;
    }
    let remaining = (n - multiset.len()) as u64;
    for (t, &d) in divisors.iter().enumerate().skip(from) {
        // optimistic density with all remaining slots at 1/d
        if density + Ratio::new(remaining, d) < Ratio::new(1, 1) {
            break;
        }
        let mult = multiset.iter().rev().take_while(|&&x| x == d).count() as u64;
        if mult >= d || (opts.distinct_moduli && mult >= 1) {
            continue;
        }
        multiset.push(d);
        enumerate_multisets(
            modulus,
            n_value,
            divisors,
            t,
            density + Ratio::new(1, d),
            multiset,
            n,
            opts,
            shard,
            record,
        );
        multiset.pop();
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Enumerates shift assignments for a fixed moduli multiset: distinct
/// ascending shifts within each repeated modulus, lexicographic across.
fn emit_shift_choices(
    modulus: &FactoredModulus,
    n_value: u64,
    multiset: &[u64],
    record: &mut CensusRecord,
) {
    fn rec(
        modulus: &FactoredModulus,
        n_value: u64,
        multiset: &[u64],
        pos: usize,
        progs: &mut Vec<(u64, u64)>,
        record: &mut CensusRecord,
    ) {
        if pos == multiset.len() {
            let (covers, minimal) = zn_cover_minimal(n_value, progs);
            if covers && minimal {
                *record.by_lcm.entry(modulus.clone()).or_insert(0) += 1;
                record.total += 1;
                if let Some(list) = record.systems.as_mut() {
                    let progressions: Vec<Progression> = progs
                        .iter()
                        .map(|&(a, d)| Progression::from_pair(a, d).unwrap())
                        .collect();
                    list.push(CensusSystem {
                        lcm: modulus.clone(),
                        progressions,
                        contains_z: false,
                    });
                }
            }
            return;
        }
        let d = multiset[pos];
        // shifts strictly above the previous shift of the same modulus
        let start = if pos > 0 && multiset[pos - 1] == d {
            progs[pos - 1].0 + 1
        } else {
            0
        };
        for a in start..d {
            progs.push((a, d));
            rec(modulus, n_value, multiset, pos + 1, progs, record);
            progs.pop();
        }
    }
    let mut progs: Vec<(u64, u64)> = Vec::with_capacity(multiset.len());
    rec(modulus, n_value, multiset, 0, &mut progs, record);
}

/// Full census of minimal covering systems of `Z` of size `n`.
pub fn enumerate_minimal_covers(n: usize, opts: &CensusOptions) -> Result<CensusRecord> {
    enumerate_shard(n, opts, None)
}

fn enumerate_shard(
    n: usize,
    opts: &CensusOptions,
    shard: Option<(u64, u64)>,
) -> Result<CensusRecord> {
    if n == 0 || n > opts.cap {
        return Err(Error::CensusCapExceeded { n, cap: opts.cap });
    }
    let mut record = CensusRecord::empty(n, opts.keep_systems);
    for modulus in candidate_moduli(n as u64 - 1) {
        enumerate_for_lcm(&modulus, n, opts, shard, &mut record)?;
    }
    record.finalize();
    Ok(record)
}

/// Shards the candidate stream by stable hash, runs the shards in
/// parallel, and merges; the result is independent of the shard count.
pub fn shard_and_merge(n: usize, shards: u64, opts: &CensusOptions) -> Result<CensusRecord> {
    if shards == 0 {
        return Err(Error::InvalidInput("shard count must be positive".into()));
    }
    let parts: Vec<Result<CensusRecord>> = (0..shards)
        .into_par_iter()
        .map(|s| enumerate_shard(n, opts, Some((s, shards))))
        .collect();
    let mut merged = CensusRecord::empty(n, opts.keep_systems);
    for part in parts {
        merged.absorb(part?);
    }
    merged.finalize();
    Ok(merged)
}

/// Filter for the hyperplane-cover enumeration.
#[derive(Debug, Clone, Copy, Default)]
pub struct HyperplaneFilter {
    /// Keep only covers whose fixed sets exhaust every coordinate.
    pub require_full_fixed: bool,
    pub max_size: Option<usize>,
}

/// Exhaustively enumerates the minimal hyperplane covers of a tiny
/// product space (at most 12 points, 3 coordinates), in deterministic
/// canonical order.
pub fn enumerate_minimal_hyperplane_covers(
    space: &ProductSpace,
    filter: HyperplaneFilter,
) -> Result<Vec<CoverSystem>> {
    if space.points() > 12 || space.dim() > 3 || space.dim() == 0 {
        return Err(Error::SpaceTooLarge {
            points: space.points(),
            cap: 12,
        });
    }
    let universe = all_hyperplanes(space);
    let points: Vec<Vec<u64>> = (0..space.points()).map(|i| space.point_at(i)).collect();
    let covers_point: Vec<Vec<bool>> = universe
        .iter()
        .map(|h| points.iter().map(|p| h.contains(p)).collect())
        .collect();
    let n_points = points.len();
    let size_bound = filter.max_size.unwrap_or(n_points).min(n_points);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut covered = vec![0u8; n_points];

    // branch on the least uncovered point; every minimal cover is
    // reachable because its proper subsets never cover
    fn rec(
        covers_point: &[Vec<bool>],
        chosen: &mut Vec<usize>,
        covered: &mut Vec<u8>,
        size_bound: usize,
        seen: &mut HashSet<Vec<usize>>,
        found: &mut Vec<Vec<usize>>,
    ) {
        match covered.iter().position(|&c| c == 0) {
            None => {
                let minimal = chosen.iter().all(|&j| {
                    covers_point[j]
                        .iter()
                        .zip(covered.iter())
                        .any(|(&m, &c)| m && c == 1)
                });
                if minimal {
                    let mut key = chosen.clone();
                    key.sort_unstable();
                    if seen.insert(key.clone()) {
                        found.push(key);
                    }
                }
            }
            Some(x) => {
                if chosen.len() == size_bound {
                    return;
                }
                for j in 0..covers_point.len() {
                    if covers_point[j][x] && !chosen.contains(&j) {
                        chosen.push(j);
                        for (c, &m) in covered.iter_mut().zip(&covers_point[j]) {
                            *c += m as u8;
                        }
                        rec(covers_point, chosen, covered, size_bound, seen, found);
                        chosen.pop();
                        for (c, &m) in covered.iter_mut().zip(&covers_point[j]) {
                            *c -= m as u8;
                        }
                    }
                }
            }
        }
    }
    rec(
        &covers_point,
        &mut chosen,
        &mut covered,
        size_bound,
        &mut seen,
        &mut found,
    );
    found.sort();
    let mut out = Vec::new();
    for key in found {
        let planes: Vec<Hyperplane> = key.iter().map(|&j| universe[j].clone()).collect();
        let sys = CoverSystem::from_planes(space.clone(), planes)?;
        if filter.require_full_fixed && sys.fixed_coords() != space.all_coords() {
            continue;
        }
        out.push(sys);
    }
    Ok(out)
}

/// Every hyperplane of the space, in canonical order.
pub fn all_hyperplanes(space: &ProductSpace) -> Vec<Hyperplane> {
    let mut out = vec![Hyperplane::free(space.dim())];
    for i in 0..space.dim() {
        let mut next = Vec::new();
        for h in &out {
            for choice in 0..=space.size(i) {
                let mut c = h.constraints().to_vec();
                c[i] = if choice == space.size(i) {
                    Constraint::Free
                } else {
                    Constraint::Fixed(choice)
                };
                next.push(Hyperplane::new(c));
            }
        }
        out = next;
    }
    out.sort();
    out.dedup();
    out
}

/// Shard file manifest entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShardEntry {
    pub shard: u64,
    pub file: String,
    pub checksum: String,
    pub total: u64,
}

/// Census manifest, written as `census.json` next to the shard files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusManifest {
    pub n: usize,
    pub cap: usize,
    pub shards: Vec<ShardEntry>,
    pub by_lcm: BTreeMap<String, u64>,
    pub total: u64,
    pub contains_z: bool,
}

/// One line of a shard file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ShardLine {
    lcm: FactoredModulus,
    count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    systems: Option<Vec<Vec<Progression>>>,
}

/// Runs a sharded census and persists it: one JSON-lines file per shard
/// plus a checksummed manifest.
pub fn write_census(
    dir: &Path,
    n: usize,
    shards: u64,
    opts: &CensusOptions,
) -> Result<CensusRecord> {
    if shards == 0 {
        return Err(Error::InvalidInput("shard count must be positive".into()));
    }
    std::fs::create_dir_all(dir)?;
    let parts: Vec<Result<CensusRecord>> = (0..shards)
        .into_par_iter()
        .map(|s| enumerate_shard(n, opts, Some((s, shards))))
        .collect();
    let mut entries = Vec::new();
    let mut merged = CensusRecord::empty(n, opts.keep_systems);
    for (s, part) in parts.into_iter().enumerate() {
        let part = part?;
        let file = format!("shard-{s:02}.jsonl");
        let mut body = Vec::new();
        for (lcm, &count) in &part.by_lcm {
            let systems = part.systems.as_ref().map(|list| {
                list.iter()
                    .filter(|sys| sys.lcm == *lcm)
                    .map(|sys| sys.progressions.clone())
                    .collect()
            });
            let line = ShardLine {
                lcm: lcm.clone(),
                count,
                systems,
            };
            serde_json::to_writer(&mut body, &line)?;
            body.push(b'\n');
        }
        std::fs::write(dir.join(&file), &body)?;
        entries.push(ShardEntry {
            shard: s as u64,
            file,
            checksum: hex_digest(&body),
            total: part.total,
        });
        merged.absorb(part);
    }
    merged.finalize();
    let manifest = CensusManifest {
        n,
        cap: opts.cap,
        shards: entries,
        by_lcm: merged
            .by_lcm
            .iter()
            .map(|(m, &c)| (m.to_string(), c))
            .collect(),
        total: merged.total,
        contains_z: merged.contains_z,
    };
    let mut out = std::fs::File::create(dir.join("census.json"))?;
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    Ok(merged)
}

/// Reads a persisted census back, validating every shard checksum.
pub fn read_census(dir: &Path) -> Result<CensusRecord> {
    let manifest: CensusManifest =
        serde_json::from_slice(&std::fs::read(dir.join("census.json"))?)?;
    let mut record = CensusRecord::empty(manifest.n, false);
    let mut keep = false;
    let mut systems = Vec::new();
    for entry in &manifest.shards {
        let body = std::fs::read(dir.join(&entry.file))?;
        let digest = hex_digest(&body);
        if digest != entry.checksum {
            return Err(Error::InvalidInput(format!(
                "checksum mismatch for {}: {digest} != {}",
                entry.file, entry.checksum
            )));
        }
        for line in body.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
            let parsed: ShardLine = serde_json::from_slice(line)?;
            *record.by_lcm.entry(parsed.lcm.clone()).or_insert(0) += parsed.count;
            record.total += parsed.count;
            if parsed.lcm.is_one() {
                record.contains_z = true;
            }
            if let Some(list) = parsed.systems {
                keep = true;
                for progressions in list {
                    let contains_z = progressions.iter().any(|p| p.modulus.is_one());
                    systems.push(CensusSystem {
                        lcm: parsed.lcm.clone(),
                        progressions,
                        contains_z,
                    });
                }
            }
        }
    }
    if keep {
        record.systems = Some(systems);
    }
    record.finalize();
    if record.total != manifest.total {
        return Err(Error::InvalidInput(format!(
            "manifest total {} does not match shard contents {}",
            manifest.total, record.total
        )));
    }
    Ok(record)
}

fn hex_digest(body: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(body);
    format!("{:x}", hasher.finalize())
}
