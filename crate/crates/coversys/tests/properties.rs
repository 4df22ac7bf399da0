//! Property tests for the library invariants: measure algebra, the
//! digit bijection, round trips, subcover minimality, family counts and
//! shard invariance.

use coversys::arith::{CrtSpace, FactoredModulus, Progression};
use coversys::census::{enumerate_minimal_covers, shard_and_merge, CensusOptions};
use coversys::cover::{simpson_bound, CoverSystem, DEFAULT_SIEVE_CAP};
use coversys::frames::{q_value, ArithOrdering, FrameFamily};
use coversys::space::{Constraint, CoordSet, Hyperplane, ProductSpace};
use proptest::prelude::*;

fn small_space() -> impl Strategy<Value = ProductSpace> {
    prop::collection::vec(2u64..6, 1..5).prop_map(|sizes| ProductSpace::new(sizes).unwrap())
}

fn coord_subset(k: usize) -> impl Strategy<Value = CoordSet> {
    prop::collection::vec(any::<bool>(), k).prop_map(|bits| {
        CoordSet::from_iter(
            bits.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i),
        )
    })
}

proptest! {
    #[test]
    fn measure_algebra((space, seed) in small_space().prop_flat_map(|s| {
        let k = s.dim();
        (Just(s), (prop::collection::vec(0u64..7, k), coord_subset(k), coord_subset(k)))
    })) {
        let (picks, i, j) = seed;
        let plane = Hyperplane::new(
            picks
                .iter()
                .enumerate()
                .map(|(c, &v)| {
                    let s = space.size(c);
                    if v % (s + 1) == s { Constraint::Free } else { Constraint::Fixed(v % (s + 1)) }
                })
                .collect(),
        );
        // free coordinates contribute nothing
        prop_assert_eq!(
            plane.measure(&space, i),
            plane.measure(&space, i.intersection(plane.fixed_coords()))
        );
        // multiplicativity over disjoint sets
        let j = j.difference(i);
        prop_assert_eq!(
            plane.measure(&space, i) * plane.measure(&space, j),
            plane.measure(&space, i.union(j))
        );
    }

    #[test]
    fn digit_bijection_and_membership(exps in prop::collection::vec(0u32..3, 3), shift_seed in any::<u64>()) {
        let primes = [2u64, 3, 5];
        let factors: Vec<(u64, u32)> = primes
            .iter()
            .zip(&exps)
            .filter(|(_, &e)| e > 0)
            .map(|(&p, &e)| (p, e))
            .collect();
        let modulus = FactoredModulus::from_factors(factors).unwrap();
        let crt = CrtSpace::new(modulus.clone()).unwrap();
        let n = modulus.value().unwrap();
        // bijection
        let mut seen = std::collections::HashSet::new();
        for x in 0..n {
            let point = crt.to_point(x).unwrap();
            prop_assert_eq!(crt.to_integer(&point).unwrap(), x);
            prop_assert!(seen.insert(point));
        }
        // membership transfers along the digit map for a random divisor
        let divisors = modulus.divisors().unwrap();
        let d = divisors[(shift_seed % divisors.len() as u64) as usize];
        let a = shift_seed % d;
        let prog = Progression::from_pair(a, d).unwrap();
        let plane = crt.hyperplane_of(&prog).unwrap();
        prop_assert!(crt.is_arithmetic(&plane));
        let back = crt.progression_of(&plane).unwrap();
        prop_assert_eq!(&back, &prog);
        for x in 0..n {
            prop_assert_eq!(prog.contains(x), plane.contains(&crt.to_point(x).unwrap()));
        }
    }

    #[test]
    fn subcover_is_minimal(seed in prop::collection::vec((0u64..12, 1u64..5), 3..10)) {
        // random progressions with moduli dividing 12, forced to cover
        // by adding the whole line when needed
        let divisors = [2u64, 3, 4, 6, 12];
        let mut progs: Vec<Progression> = seed
            .iter()
            .map(|&(a, di)| {
                let d = divisors[(di as usize) % divisors.len()];
                Progression::from_pair(a % d, d).unwrap()
            })
            .collect();
        progs.push(Progression::from_pair(0, 2).unwrap());
        progs.push(Progression::from_pair(1, 2).unwrap());
        let system = CoverSystem::from_progressions(&progs).unwrap();
        prop_assert!(system.is_cover().unwrap());
        let sub = system.minimal_subcover(DEFAULT_SIEVE_CAP).unwrap();
        prop_assert!(sub.is_minimal().unwrap());
        prop_assert!(sub.len() <= system.len());
    }

    #[test]
    fn frame_family_counts_match_q(n_idx in 0usize..6) {
        let pool = [2u64, 3, 4, 6, 8, 12];
        let modulus = FactoredModulus::from_u64(pool[n_idx]).unwrap();
        let ordering = ArithOrdering::canonical(&modulus);
        let family = FrameFamily::new(&modulus, &ordering).unwrap();
        let count = family.count().unwrap();
        prop_assert_eq!(count, q_value(&ordering).exp().round() as u128);
        let mut seen = std::collections::HashSet::new();
        for sys in family.iter().unwrap() {
            let sys = sys.unwrap();
            prop_assert!(sys.is_minimal().unwrap());
            prop_assert_eq!(sys.len() as u64, simpson_bound(&modulus));
            prop_assert!(seen.insert(sys.planes().to_vec()));
        }
        prop_assert_eq!(seen.len() as u128, count);
    }

    #[test]
    fn shard_merge_is_invariant(n in 1usize..=4, shards in 1u64..=9) {
        let opts = CensusOptions { cap: 6, keep_systems: true, distinct_moduli: false };
        let direct = enumerate_minimal_covers(n, &opts).unwrap();
        let sharded = shard_and_merge(n, shards, &opts).unwrap();
        prop_assert_eq!(direct, sharded);
    }
}
