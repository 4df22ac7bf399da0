//! Factored moduli, residue classes, and the digit bijection between
//! `Z_N` and the product space indexed by prime-power slots.
//!
//! The slot set of `N = p_1^g_1 ... p_m^g_m` consists of the pairs
//! `(p_i, e)` with `1 <= e <= g_i`. Mapping `x` to its base-`p` digits
//! (least significant first) identifies `Z_N` with the product of
//! `{0,...,p-1}` over the slots, and arithmetic progressions with the
//! hyperplanes whose fixed slots form per-prime initial segments.

use crate::error::{Error, Result};
use crate::space::{Constraint, Hyperplane, ProductSpace};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

/// Trial division primality check.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = 5u64;
    while d.checked_mul(d).is_some_and(|dd| dd <= n) {
        if n % d == 0 || n % (d + 2) == 0 {
            return false;
        }
        d += 6;
    }
    true
}

/// Primes up to and including `bound`, by sieve of Eratosthenes.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            primes.push(p as u64);
            let mut m = p * p;
            while m <= n {
                composite[m] = true;
                m += p;
            }
        }
    }
    primes
}

/// A positive integer kept in factored form: a sorted map prime -> exponent.
/// The empty map is the modulus 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FactoredModulus {
    factors: BTreeMap<u64, u32>,
}

impl FactoredModulus {
    pub fn one() -> Self {
        FactoredModulus::default()
    }

    /// Builds from explicit prime factors; primality is verified.
    pub fn from_factors<I: IntoIterator<Item = (u64, u32)>>(factors: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (p, e) in factors {
            if !is_prime(p) {
                return Err(Error::NotPrime(p));
            }
            if e == 0 {
                return Err(Error::ZeroExponent(p));
            }
            *map.entry(p).or_insert(0) += e;
        }
        Ok(FactoredModulus { factors: map })
    }

    /// Factors a plain integer by trial division; intended for small inputs.
    pub fn from_u64(mut n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("modulus must be positive".into()));
        }
        let mut factors = BTreeMap::new();
        let mut p = 2u64;
        while p.saturating_mul(p) <= n {
            while n % p == 0 {
                *factors.entry(p).or_insert(0) += 1;
                n /= p;
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if n > 1 {
            *factors.entry(n).or_insert(0) += 1;
        }
        Ok(FactoredModulus { factors })
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.factors.iter().map(|(&p, &e)| (p, e))
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors.get(&p).copied().unwrap_or(0)
    }

    pub fn num_primes(&self) -> usize {
        self.factors.len()
    }

    /// The integer value, if it fits in a `u64` (and hence below `2^63`
    /// checks are callers' business; overflow returns an error).
    pub fn value(&self) -> Result<u64> {
        let mut n: u64 = 1;
        for (&p, &e) in &self.factors {
            for _ in 0..e {
                n = n.checked_mul(p).ok_or(Error::OversizedModulus)?;
            }
        }
        Ok(n)
    }

    pub fn divides(&self, other: &FactoredModulus) -> bool {
        self.factors
            .iter()
            .all(|(&p, &e)| other.exponent_of(p) >= e)
    }

    /// Exponent-wise maximum.
    pub fn lcm_with(&self, other: &FactoredModulus) -> FactoredModulus {
        let mut factors = self.factors.clone();
        for (&p, &e) in &other.factors {
            let entry = factors.entry(p).or_insert(0);
            *entry = (*entry).max(e);
        }
        FactoredModulus { factors }
    }

    /// Multiply by `p^e` (p must already be known prime by the caller).
    pub fn mul_prime_power(&mut self, p: u64, e: u32) {
        if e > 0 {
            *self.factors.entry(p).or_insert(0) += e;
        }
    }

    /// The slots `(p, e)` in canonical order: primes ascending,
    /// exponents ascending.
    pub fn slots(&self) -> Vec<Slot> {
        let mut out = Vec::new();
        for (&p, &g) in &self.factors {
            for e in 1..=g {
                out.push(Slot { prime: p, exp: e });
            }
        }
        out
    }

    /// Sum of `p - 1` over all slots (one less than the Simpson bound).
    pub fn slot_weight(&self) -> u64 {
        self.factors
            .iter()
            .map(|(&p, &e)| (p - 1) * e as u64)
            .sum()
    }

    /// All divisors as integers, ascending. Only valid when the value
    /// fits a machine word.
    pub fn divisors(&self) -> Result<Vec<u64>> {
        self.value()?; // overflow check
        let mut divs = vec![1u64];
        for (&p, &e) in &self.factors {
            let mut next = Vec::with_capacity(divs.len() * (e as usize + 1));
            for &d in &divs {
                let mut q = d;
                next.push(q);
                for _ in 0..e {
                    q *= p;
                    next.push(q);
                }
            }
            divs = next;
        }
        divs.sort_unstable();
        Ok(divs)
    }

    /// Parses `"2^2*3"`-style strings; a bare integer is factored by
    /// trial division.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty modulus string".into()));
        }
        if !s.contains('*') && !s.contains('^') {
            let n: u64 = s
                .parse()
                .map_err(|_| Error::Parse(format!("invalid modulus {s:?}")))?;
            return FactoredModulus::from_u64(n);
        }
        let mut factors = Vec::new();
        for part in s.split('*') {
            let part = part.trim();
            let (base, exp) = match part.split_once('^') {
                Some((b, e)) => (
                    b.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Parse(format!("invalid prime {b:?}")))?,
                    e.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Parse(format!("invalid exponent {e:?}")))?,
                ),
                None => (
                    part.parse::<u64>()
                        .map_err(|_| Error::Parse(format!("invalid prime {part:?}")))?,
                    1,
                ),
            };
            factors.push((base, exp));
        }
        FactoredModulus::from_factors(factors)
    }
}

impl fmt::Display for FactoredModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (n, (&p, &e)) in self.factors.iter().enumerate() {
            if n > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}^{e}")?;
            }
        }
        Ok(())
    }
}

// Moduli are always factored in JSON: {"2": 2, "3": 1}.
impl Serialize for FactoredModulus {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, u32> = self
            .factors
            .iter()
            .map(|(&p, &e)| (p.to_string(), e))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FactoredModulus {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, u32>::deserialize(deserializer)?;
        let mut factors = Vec::with_capacity(map.len());
        for (k, e) in map {
            let p: u64 = k
                .parse()
                .map_err(|_| D::Error::custom(format!("invalid prime key {k:?}")))?;
            factors.push((p, e));
        }
        FactoredModulus::from_factors(factors).map_err(D::Error::custom)
    }
}

/// A prime-power slot `(p, e)`: the level-`e` digit position of prime `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub prime: u64,
    pub exp: u32,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.prime, self.exp)
    }
}

/// A residue class `shift (mod modulus)` with the modulus factored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Progression {
    #[serde(rename = "a")]
    pub shift: u64,
    #[serde(rename = "d")]
    pub modulus: FactoredModulus,
}

impl Progression {
    pub fn new(shift: u64, modulus: FactoredModulus) -> Result<Self> {
        let d = modulus.value()?;
        if shift >= d {
            return Err(Error::UnreducedShift { shift, modulus: d });
        }
        Ok(Progression { shift, modulus })
    }

    pub fn from_pair(shift: u64, modulus: u64) -> Result<Self> {
        Progression::new(shift, FactoredModulus::from_u64(modulus)?)
    }

    /// The whole line, `0 (mod 1)`.
    pub fn whole_line() -> Self {
        Progression {
            shift: 0,
            modulus: FactoredModulus::one(),
        }
    }

    pub fn contains(&self, x: u64) -> bool {
        match self.modulus.value() {
            Ok(d) => x % d == self.shift,
            Err(_) => false,
        }
    }
}

impl fmt::Display for Progression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.shift, self.modulus)
    }
}

/// Least common multiple of the moduli of a system of progressions.
pub fn lcm_of(system: &[Progression]) -> Result<FactoredModulus> {
    if system.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(system
        .iter()
        .fold(FactoredModulus::one(), |acc, p| acc.lcm_with(&p.modulus)))
}

/// The product space indexed by the slots of `N`, together with the digit
/// bijection from `Z_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrtSpace {
    modulus: FactoredModulus,
    slots: Vec<Slot>,
    space: ProductSpace,
}

impl CrtSpace {
    /// Requires the modulus value to fit a machine word, since the space
    /// exists for point-level work.
    pub fn new(modulus: FactoredModulus) -> Result<Self> {
        modulus.value()?;
        let slots = modulus.slots();
        let space = ProductSpace::new(slots.iter().map(|s| s.prime).collect())?;
        Ok(CrtSpace {
            modulus,
            slots,
            space,
        })
    }

    pub fn modulus(&self) -> &FactoredModulus {
        &self.modulus
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot_index(&self, slot: Slot) -> Option<usize> {
        self.slots.binary_search(&slot).ok()
    }

    /// Digit map: coordinate `(p, e)` holds digit `e-1` of `x mod p^g_p`
    /// in base `p`. Bijective from `Z_N` onto the product space.
    pub fn to_point(&self, x: u64) -> Result<Vec<u64>> {
        let n = self.modulus.value()?;
        if x >= n {
            return Err(Error::InvalidInput(format!("{x} is not reduced mod {n}")));
        }
        let mut point = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            let mut pe = 1u64;
            for _ in 0..slot.exp - 1 {
                pe *= slot.prime;
            }
            point.push((x / pe) % slot.prime);
        }
        Ok(point)
    }

    /// Inverse digit map, by the Chinese Remainder Theorem.
    pub fn to_integer(&self, point: &[u64]) -> Result<u64> {
        self.space.check_point(point)?;
        let mut residue: u64 = 0;
        let mut modulus: u64 = 1;
        for (&p, &g) in self.modulus.factors.iter() {
            // residue of x mod p^g from its digits
            let mut r: u64 = 0;
            let mut pe: u64 = 1;
            for e in 1..=g {
                let idx = self.slot_index(Slot { prime: p, exp: e }).unwrap();
                r += point[idx] * pe;
                pe *= p;
            }
            residue = crt_pair(residue, modulus, r, pe);
            modulus *= pe;
        }
        Ok(residue)
    }

    /// Maps a progression with modulus dividing `N` to its hyperplane:
    /// for each prime `p`, the slots `(p,1..v_p(d))` are fixed to the
    /// digits of the shift, everything else is free.
    pub fn hyperplane_of(&self, prog: &Progression) -> Result<Hyperplane> {
        if !prog.modulus.divides(&self.modulus) {
            return Err(Error::DoesNotDivide {
                d: prog.modulus.to_string(),
                n: self.modulus.to_string(),
            });
        }
        let mut constraints = vec![Constraint::Free; self.slots.len()];
        for (p, v) in prog.modulus.factors() {
            let mut pe = 1u64;
            for e in 1..=v {
                let idx = self.slot_index(Slot { prime: p, exp: e }).unwrap();
                constraints[idx] = Constraint::Fixed((prog.shift / pe) % p);
                pe *= p;
            }
        }
        Ok(Hyperplane::new(constraints))
    }

    /// True iff for each prime the fixed slots form an initial segment
    /// `(p,1), ..., (p,j_p)`; exactly the hyperplanes that invert to
    /// arithmetic progressions.
    pub fn is_arithmetic(&self, plane: &Hyperplane) -> bool {
        self.arithmetic_violation(plane).is_none()
    }

    fn arithmetic_violation(&self, plane: &Hyperplane) -> Option<(u64, u32, u32)> {
        for (idx, slot) in self.slots.iter().enumerate() {
            if plane.constraint(idx).is_fixed() && slot.exp > 1 {
                let below = self
                    .slot_index(Slot {
                        prime: slot.prime,
                        exp: slot.exp - 1,
                    })
                    .unwrap();
                if !plane.constraint(below).is_fixed() {
                    return Some((slot.prime, slot.exp, slot.exp - 1));
                }
            }
        }
        None
    }

    /// Inverse of [`hyperplane_of`](Self::hyperplane_of) on arithmetic
    /// hyperplanes.
    pub fn progression_of(&self, plane: &Hyperplane) -> Result<Progression> {
        plane.check(&self.space)?;
        if let Some((prime, level, missing)) = self.arithmetic_violation(plane) {
            return Err(Error::NotArithmetic {
                prime,
                level,
                missing,
            });
        }
        let mut shift: u64 = 0;
        let mut modulus_so_far: u64 = 1;
        let mut d = FactoredModulus::one();
        for (&p, &g) in self.modulus.factors.iter() {
            let mut j = 0u32;
            let mut r: u64 = 0;
            let mut pe: u64 = 1;
            for e in 1..=g {
                let idx = self.slot_index(Slot { prime: p, exp: e }).unwrap();
                match plane.constraint(idx) {
                    Constraint::Fixed(v) => {
                        j = e;
                        r += v * pe;
                        pe *= p;
                    }
                    Constraint::Free => break,
                }
            }
            if j > 0 {
                shift = crt_pair(shift, modulus_so_far, r, pe);
                modulus_so_far *= pe;
                d.mul_prime_power(p, j);
            }
        }
        Progression::new(shift, d)
    }
}

/// Combines `x = r1 (mod m1)` and `x = r2 (mod m2)` for coprime moduli.
fn crt_pair(r1: u64, m1: u64, r2: u64, m2: u64) -> u64 {
    // x = r1 + m1 * t where t = (r2 - r1) / m1 (mod m2)
    let m1i = mod_inverse(m1 % m2, m2);
    let diff = ((r2 as i128 - r1 as i128).rem_euclid(m2 as i128)) as u64;
    let t = (diff as u128 * m1i as u128 % m2 as u128) as u64;
    r1 + m1 * t
}

fn mod_inverse(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1, "moduli not coprime");
    old_s.rem_euclid(m as i128) as u64
}
