//! Coverage verification by point sieve, minimality with witnesses,
//! deterministic minimal-subcover extraction, the greedy density
//! ordering, and both Simpson bounds.

use crate::arith::{lcm_of, CrtSpace, FactoredModulus, Progression};
use crate::error::{Error, Result};
use crate::space::{CoordSet, Hyperplane, ProductSpace};
use num_rational::Ratio;

/// Default cap on the number of points a sieve will materialize.
pub const DEFAULT_SIEVE_CAP: u128 = 100_000_000;

/// A finite set of hyperplanes over a product space, deduplicated and in
/// canonical order. When built from progressions the CRT space is kept,
/// giving the integer view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverSystem {
    space: ProductSpace,
    planes: Vec<Hyperplane>,
    crt: Option<CrtSpace>,
}

impl CoverSystem {
    pub fn from_planes(space: ProductSpace, mut planes: Vec<Hyperplane>) -> Result<Self> {
        for p in &planes {
            p.check(&space)?;
        }
        planes.sort();
        planes.dedup();
        Ok(CoverSystem {
            space,
            planes,
            crt: None,
        })
    }

    /// Builds directly over a CRT slot space, keeping the integer view.
    pub fn with_crt(crt: CrtSpace, mut planes: Vec<Hyperplane>) -> Result<Self> {
        for p in &planes {
            p.check(crt.space())?;
        }
        planes.sort();
        planes.dedup();
        Ok(CoverSystem {
            space: crt.space().clone(),
            planes,
            crt: Some(crt),
        })
    }

    /// Integer view: maps each progression to its hyperplane over the
    /// slot space of `lcm` (the exact lcm of the moduli).
    pub fn from_progressions(progs: &[Progression]) -> Result<Self> {
        let lcm = lcm_of(progs)?;
        let crt = CrtSpace::new(lcm)?;
        let mut planes = Vec::with_capacity(progs.len());
        for prog in progs {
            planes.push(crt.hyperplane_of(prog)?);
        }
        planes.sort();
        planes.dedup();
        Ok(CoverSystem {
            space: crt.space().clone(),
            planes,
            crt: Some(crt),
        })
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn planes(&self) -> &[Hyperplane] {
        &self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn crt(&self) -> Option<&CrtSpace> {
        self.crt.as_ref()
    }

    /// The progressions of the integer view, in canonical plane order.
    pub fn progressions(&self) -> Result<Vec<Progression>> {
        let crt = self
            .crt
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("system has no integer view".into()))?;
        self.planes.iter().map(|h| crt.progression_of(h)).collect()
    }

    /// Union of the fixed coordinate sets, `F(A)`.
    pub fn fixed_coords(&self) -> CoordSet {
        self.planes
            .iter()
            .fold(CoordSet::EMPTY, |acc, h| acc.union(h.fixed_coords()))
    }

    /// The lcm of the integer view, from the fixed slots actually used.
    pub fn lcm(&self) -> Result<FactoredModulus> {
        let crt = self
            .crt
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("system has no integer view".into()))?;
        let mut m = FactoredModulus::one();
        for slot_idx in self.fixed_coords().iter() {
            let slot = crt.slots()[slot_idx];
            let cur = m.exponent_of(slot.prime);
            if slot.exp > cur {
                m.mul_prime_power(slot.prime, slot.exp - cur);
            }
        }
        Ok(m)
    }

    fn checked_points(&self, cap: u128) -> Result<usize> {
        let points = self.space.points();
        if points > cap {
            return Err(Error::SpaceTooLarge { points, cap });
        }
        Ok(points as usize)
    }

    /// Marks, for every point, how many planes cover it (saturating at 255).
    fn coverage_counts(&self, cap: u128) -> Result<Vec<u8>> {
        let n = self.checked_points(cap)?;
        let mut counts = vec![0u8; n];
        for h in &self.planes {
            h.for_each_point(&self.space, |p| {
                let idx = self.space.index_of(p) as usize;
                counts[idx] = counts[idx].saturating_add(1);
            });
        }
        Ok(counts)
    }

    /// True iff every point of the space lies in some plane.
    pub fn is_cover(&self) -> Result<bool> {
        Ok(self.coverage_report(DEFAULT_SIEVE_CAP)?.covers)
    }

    /// Sieve-based coverage check returning the first uncovered point,
    /// if any.
    pub fn coverage_report(&self, cap: u128) -> Result<CoverageReport> {
        let n = self.checked_points(cap)?;
        let mut covered = vec![false; n];
        for h in &self.planes {
            h.for_each_point(&self.space, |p| {
                covered[self.space.index_of(p) as usize] = true;
            });
        }
        match covered.iter().position(|&c| !c) {
            None => Ok(CoverageReport {
                covers: true,
                witness: None,
            }),
            Some(idx) => Ok(CoverageReport {
                covers: false,
                witness: Some(self.describe_point(idx as u128)),
            }),
        }
    }

    fn describe_point(&self, idx: u128) -> PointWitness {
        let point = self.space.point_at(idx);
        let integer = self
            .crt
            .as_ref()
            .and_then(|crt| crt.to_integer(&point).ok());
        PointWitness { point, integer }
    }

    /// True iff the system is a cover and every plane covers some point
    /// that no other plane covers.
    pub fn is_minimal(&self) -> Result<bool> {
        Ok(self.minimality_report(DEFAULT_SIEVE_CAP)?.minimal)
    }

    /// Minimality check with one witness point per plane; errors if the
    /// system is not a cover.
    pub fn minimality_report(&self, cap: u128) -> Result<MinimalityReport> {
        let report = self.coverage_report(cap)?;
        if !report.covers {
            let idx = self
                .space
                .index_of(&report.witness.as_ref().unwrap().point);
            return Err(Error::NotACover { witness: idx });
        }
        let counts = self.coverage_counts(cap)?;
        let mut witnesses = Vec::with_capacity(self.planes.len());
        let mut redundant = Vec::new();
        for (j, h) in self.planes.iter().enumerate() {
            let mut private: Option<u128> = None;
            h.for_each_point(&self.space, |p| {
                if private.is_none() {
                    let idx = self.space.index_of(p);
                    if counts[idx as usize] == 1 {
                        private = Some(idx);
                    }
                }
            });
            match private {
                Some(idx) => witnesses.push(Some(self.describe_point(idx))),
                None => {
                    witnesses.push(None);
                    redundant.push(j);
                }
            }
        }
        Ok(MinimalityReport {
            minimal: redundant.is_empty(),
            witnesses,
            redundant,
        })
    }

    /// Deterministic minimal subcover: scan planes in canonical order,
    /// delete any plane whose removal keeps coverage, repeat until stable.
    pub fn minimal_subcover(&self, cap: u128) -> Result<CoverSystem> {
        let report = self.coverage_report(cap)?;
        if !report.covers {
            let idx = self
                .space
                .index_of(&report.witness.as_ref().unwrap().point);
            return Err(Error::NotACover { witness: idx });
        }
        let keep = minimal_subcover_indices(&self.space, &self.planes, cap)?;
        let planes = keep.iter().map(|&j| self.planes[j].clone()).collect();
        Ok(CoverSystem {
            space: self.space.clone(),
            planes,
            crt: self.crt.clone(),
        })
    }

    /// Greedy ordering of a minimal cover: repeatedly pick the remaining
    /// plane of largest density inside the not-yet-covered part. The
    /// certificate densities satisfy `d >= 1/(number of planes left)`.
    pub fn greedy_order(&self, cap: u128) -> Result<GreedyOrder> {
        let report = self.minimality_report(cap)?;
        if !report.minimal {
            return Err(Error::NotMinimal {
                plane: report.redundant[0],
            });
        }
        let n_points = self.checked_points(cap)?;
        let n = self.planes.len();
        // covered[i] = point already covered by a previously picked plane
        let mut covered = vec![false; n_points];
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut picks = Vec::with_capacity(n);
        let mut densities = Vec::with_capacity(n);
        while !remaining.is_empty() {
            let rest_points = n_points - covered.iter().filter(|&&c| c).count();
            debug_assert!(rest_points > 0, "minimality keeps the rest non-empty");
            let mut best: Option<(usize, u64)> = None;
            for (pos, &j) in remaining.iter().enumerate() {
                let mut hits = 0u64;
                self.planes[j].for_each_point(&self.space, |p| {
                    if !covered[self.space.index_of(p) as usize] {
                        hits += 1;
                    }
                });
                if best.is_none_or(|(_, b)| hits > b) {
                    best = Some((pos, hits));
                }
            }
            let (pos, hits) = best.unwrap();
            let j = remaining.remove(pos);
            densities.push(Ratio::new(hits, rest_points as u64));
            picks.push(j);
            self.planes[j].for_each_point(&self.space, |p| {
                covered[self.space.index_of(p) as usize] = true;
            });
        }
        Ok(GreedyOrder {
            order: picks,
            densities,
        })
    }

    /// Geometric Simpson inequality for a proper subset `I` of `F(A)`:
    /// the number of planes with `F(H)` not inside `I` is at least
    /// `sum_{i in F(A) \ I} (|S_i| - 1) + 1`.
    pub fn geometric_simpson_check(&self, coords: CoordSet, cap: u128) -> Result<bool> {
        let report = self.minimality_report(cap)?;
        if !report.minimal {
            return Err(Error::NotMinimal {
                plane: report.redundant[0],
            });
        }
        let fixed = self.fixed_coords();
        if !coords.is_subset(fixed) || coords == fixed {
            return Err(Error::InvalidInput(format!(
                "I = {coords} must be a proper subset of F(A) = {fixed}"
            )));
        }
        let lhs = self
            .planes
            .iter()
            .filter(|h| !h.fixed_coords().is_subset(coords))
            .count() as u64;
        let rhs: u64 = fixed
            .difference(coords)
            .iter()
            .map(|i| self.space.size(i) - 1)
            .sum::<u64>()
            + 1;
        Ok(lhs >= rhs)
    }

    /// Simpson report against the bound of the system's own fixed slots.
    pub fn simpson_check(&self) -> SimpsonReport {
        let bound: u64 = self
            .fixed_coords()
            .iter()
            .map(|i| self.space.size(i) - 1)
            .sum::<u64>()
            + 1;
        let size = self.planes.len() as u64;
        SimpsonReport {
            bound,
            size,
            tight: size == bound,
        }
    }
}

/// Deterministic first-removable scan; shared with the exploration step,
/// which runs it on restricted plane lists.
pub(crate) fn minimal_subcover_indices(
    space: &ProductSpace,
    planes: &[Hyperplane],
    cap: u128,
) -> Result<Vec<usize>> {
    let points = space.points();
    if points > cap {
        return Err(Error::SpaceTooLarge { points, cap });
    }
    let n_points = points as usize;
    let mut keep: Vec<usize> = (0..planes.len()).collect();
    loop {
        let mut changed = false;
        let mut pos = 0;
        while pos < keep.len() {
            // does coverage survive without keep[pos]?
            let mut covered = vec![false; n_points];
            for (q, &j) in keep.iter().enumerate() {
                if q == pos {
                    continue;
                }
                planes[j].for_each_point(space, |p| {
                    covered[space.index_of(p) as usize] = true;
                });
            }
            if covered.iter().all(|&c| c) {
                keep.remove(pos);
                changed = true;
            } else {
                pos += 1;
            }
        }
        if !changed {
            return Ok(keep);
        }
    }
}

/// Simpson's bound for a factored modulus: `sum g_i (p_i - 1) + 1`.
pub fn simpson_bound(modulus: &FactoredModulus) -> u64 {
    modulus.slot_weight() + 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub covers: bool,
    pub witness: Option<PointWitness>,
}

/// A point described both as a vector and, in the integer view, as a
/// residue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointWitness {
    pub point: Vec<u64>,
    pub integer: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct MinimalityReport {
    pub minimal: bool,
    /// Per plane, a point covered only by that plane (canonical order).
    pub witnesses: Vec<Option<PointWitness>>,
    pub redundant: Vec<usize>,
}

/// The greedy ordering with its density certificate. `order[t]` is the
/// plane picked at step `t`, whose density inside the then-uncovered
/// part is `densities[t] >= 1/(n - t)`.
#[derive(Debug, Clone)]
pub struct GreedyOrder {
    pub order: Vec<usize>,
    pub densities: Vec<Ratio<u64>>,
}

impl GreedyOrder {
    pub fn certificate_holds(&self) -> bool {
        let n = self.order.len() as u64;
        self.densities
            .iter()
            .enumerate()
            .all(|(t, d)| *d >= Ratio::new(1, n - t as u64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SimpsonReport {
    pub bound: u64,
    pub size: u64,
    pub tight: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn system(progs: &[(u64, u64)]) -> CoverSystem {
        let progs: Vec<Progression> = progs
            .iter()
            .map(|&(a, d)| Progression::from_pair(a, d).unwrap())
            .collect();
        CoverSystem::from_progressions(&progs).unwrap()
    }

    fn z12_system() -> CoverSystem {
        system(&[(0, 2), (0, 3), (1, 4), (5, 6), (7, 12)])
    }

    #[test]
    fn whole_line_covers() {
        let c = system(&[(0, 1)]);
        assert!(c.is_cover().unwrap());
    }

    #[test]
    fn paper_three_progression_cover() {
        // {1 mod 2, 2 mod 4, 0 mod 4}
        let c = system(&[(1, 2), (2, 4), (0, 4)]);
        assert!(c.is_cover().unwrap());
        assert!(c.is_minimal().unwrap());
    }

    #[test]
    fn z12_cover_is_minimal() {
        let c = z12_system();
        assert!(c.is_cover().unwrap());
        let report = c.minimality_report(DEFAULT_SIEVE_CAP).unwrap();
        assert!(report.minimal);
        // each plane's witness is covered by that plane and nothing else;
        // removing 0 mod 2 / 0 mod 3 / 1 mod 4 / 5 mod 6 / 7 mod 12
        // uncovers a point in {2,4,8,10} / {3} / {1} / {11} / {7}
        for (j, w) in report.witnesses.iter().enumerate() {
            let w = w.as_ref().unwrap();
            assert!(c.planes()[j].contains(&w.point));
            for (q, other) in c.planes().iter().enumerate() {
                if q != j {
                    assert!(!other.contains(&w.point));
                }
            }
        }
        let mut ws: Vec<u64> = report
            .witnesses
            .iter()
            .map(|w| w.as_ref().unwrap().integer.unwrap())
            .collect();
        ws.sort_unstable();
        assert!(ws.contains(&1) && ws.contains(&3) && ws.contains(&7) && ws.contains(&11));
        assert!(ws.iter().any(|w| [2, 4, 8, 10].contains(w)));
    }

    #[test]
    fn non_minimal_detected() {
        let c = system(&[(0, 1), (0, 2)]);
        let report = c.minimality_report(DEFAULT_SIEVE_CAP).unwrap();
        assert!(!report.minimal);
        let c = system(&[(0, 2), (1, 2)]);
        assert!(c.is_minimal().unwrap());
    }

    #[test]
    fn coverage_witness_is_least_uncovered_residue() {
        let c = system(&[(0, 2)]);
        let report = c.coverage_report(DEFAULT_SIEVE_CAP).unwrap();
        assert!(!report.covers);
        assert_eq!(report.witness.unwrap().integer, Some(1));
    }

    #[test]
    fn minimal_subcover_examples() {
        let c = system(&[(0, 1), (0, 2)]);
        let sub = c.minimal_subcover(DEFAULT_SIEVE_CAP).unwrap();
        assert_eq!(sub.len(), 1);
        assert!(sub.planes()[0].fixed_coords().is_empty());

        let c = z12_system();
        let sub = c.minimal_subcover(DEFAULT_SIEVE_CAP).unwrap();
        assert_eq!(sub.planes(), c.planes());

        let c = system(&[(0, 2), (1, 2), (1, 4)]);
        let sub = c.minimal_subcover(DEFAULT_SIEVE_CAP).unwrap();
        let progs = sub.progressions().unwrap();
        let mut pairs: Vec<(u64, u64)> = progs
            .iter()
            .map(|p| (p.shift, p.modulus.value().unwrap()))
            .collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 2), (1, 2)]);
        assert!(sub.is_minimal().unwrap());
    }

    #[test]
    fn greedy_order_certificates() {
        let c = system(&[(0, 2), (1, 2)]);
        let g = c.greedy_order(DEFAULT_SIEVE_CAP).unwrap();
        assert_eq!(g.densities, vec![Ratio::new(1, 2), Ratio::new(1, 1)]);
        assert!(g.certificate_holds());

        let c = system(&[(0, 1)]);
        let g = c.greedy_order(DEFAULT_SIEVE_CAP).unwrap();
        assert_eq!(g.densities, vec![Ratio::new(1, 1)]);

        let g = z12_system().greedy_order(DEFAULT_SIEVE_CAP).unwrap();
        assert!(g.certificate_holds());

        // not minimal -> error
        let c = system(&[(0, 1), (0, 2)]);
        assert!(c.greedy_order(DEFAULT_SIEVE_CAP).is_err());
    }

    #[test]
    fn simpson_bounds() {
        assert_eq!(simpson_bound(&FactoredModulus::from_u64(12).unwrap()), 5);
        assert_eq!(simpson_bound(&FactoredModulus::from_u64(2).unwrap()), 2);
        assert_eq!(simpson_bound(&FactoredModulus::one()), 1);
        for n in 1..=10u32 {
            let m = FactoredModulus::from_factors((n > 1).then_some((2u64, n - 1))).unwrap();
            assert_eq!(simpson_bound(&m), n as u64);
        }
        let report = z12_system().simpson_check();
        assert_eq!(
            report,
            SimpsonReport {
                bound: 5,
                size: 5,
                tight: true
            }
        );
    }

    #[test]
    fn geometric_simpson_on_z12() {
        let c = z12_system();
        let fixed = c.fixed_coords();
        assert_eq!(fixed.len(), 3);
        // every proper subset I of F(A)
        let coords = fixed.to_vec();
        for mask in 0..(1u32 << coords.len()) - 1 {
            let subset = CoordSet::from_iter(
                coords
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask & (1 << b) != 0)
                    .map(|(_, &c)| c),
            );
            assert!(c.geometric_simpson_check(subset, DEFAULT_SIEVE_CAP).unwrap());
        }
        // I = F(A) rejected
        assert!(c.geometric_simpson_check(fixed, DEFAULT_SIEVE_CAP).is_err());
    }

    #[test]
    fn parity_geometric_simpson_reduces_to_plain() {
        let c = system(&[(0, 2), (1, 2)]);
        assert!(c
            .geometric_simpson_check(CoordSet::EMPTY, DEFAULT_SIEVE_CAP)
            .unwrap());
        assert_eq!(c.simpson_check().bound, 2);
    }

    #[test]
    fn subcover_is_always_minimal() {
        // property: minimal_subcover output passes is_minimal
        let cases: Vec<Vec<(u64, u64)>> = vec![
            vec![(0, 1), (0, 2), (1, 2), (1, 4)],
            vec![(0, 2), (1, 4), (3, 4), (1, 2)],
            vec![(0, 3), (1, 3), (2, 3), (0, 2), (5, 6)],
        ];
        for progs in cases {
            let c = system(&progs);
            let sub = c.minimal_subcover(DEFAULT_SIEVE_CAP).unwrap();
            assert!(sub.is_minimal().unwrap(), "case {progs:?}");
        }
    }

    #[test]
    fn lcm_from_planes() {
        let c = z12_system();
        assert_eq!(c.lcm().unwrap().value().unwrap(), 12);
        let c = system(&[(0, 2), (1, 2), (1, 4)]);
        let sub = c.minimal_subcover(DEFAULT_SIEVE_CAP).unwrap();
        // after dropping 1 mod 4 the lcm of the remaining planes is 2,
        // even though the ambient space is still Z_4
        assert_eq!(sub.lcm().unwrap().value().unwrap(), 2);
    }
}
