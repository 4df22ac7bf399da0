//! Product spaces of finite sets, hyperplanes and the densities `mu_I`.
//!
//! A point of the space `S_1 x ... x S_k` is a vector with `x_i` in
//! `{0, ..., |S_i|-1}`. A hyperplane fixes some coordinates to single
//! values and leaves the rest free; its density restricted to a
//! coordinate set `I` is the product of `1/|S_i|` over the fixed
//! coordinates in `I`.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Maximum number of coordinates for point-level work; coordinate sets
/// are bitmasks in a `u64`.
pub const MAX_COORDS: usize = 64;

/// A product of finite sets, each identified with `{0, ..., size-1}`.
///
/// The empty product (`k = 0`) is allowed and has exactly one point; it
/// hosts the modulus-1 progression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductSpace {
    sizes: Vec<u64>,
}

impl ProductSpace {
    pub fn new(sizes: Vec<u64>) -> Result<Self> {
        if sizes.len() > MAX_COORDS {
            return Err(Error::TooManyCoordinates(sizes.len()));
        }
        if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
            return Err(Error::UndersizedCoordinate(s));
        }
        Ok(ProductSpace { sizes })
    }

    /// The degenerate zero-coordinate space with a single point.
    pub fn empty() -> Self {
        ProductSpace { sizes: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn size(&self, coord: usize) -> u64 {
        self.sizes[coord]
    }

    /// Total number of points, as `u128` to survive spaces beyond the
    /// sieve cap.
    pub fn points(&self) -> u128 {
        self.sizes.iter().map(|&s| s as u128).product()
    }

    /// All coordinates as a set.
    pub fn all_coords(&self) -> CoordSet {
        CoordSet::full(self.dim())
    }

    /// Checks that `point` is a valid element of the space.
    pub fn check_point(&self, point: &[u64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        for (i, (&v, &s)) in point.iter().zip(&self.sizes).enumerate() {
            if v >= s {
                return Err(Error::ValueOutOfRange {
                    coord: i,
                    value: v,
                    size: s,
                });
            }
        }
        Ok(())
    }

    /// Mixed-radix index of a point, first coordinate most significant.
    pub fn index_of(&self, point: &[u64]) -> u128 {
        debug_assert_eq!(point.len(), self.dim());
        let mut idx = 0u128;
        for (&v, &s) in point.iter().zip(&self.sizes) {
            idx = idx * s as u128 + v as u128;
        }
        idx
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn point_at(&self, mut idx: u128) -> Vec<u64> {
        let mut point = vec![0u64; self.dim()];
        for i in (0..self.dim()).rev() {
            let s = self.sizes[i] as u128;
            point[i] = (idx % s) as u64;
            idx /= s;
        }
        point
    }

    /// The sub-space on the coordinates of `coords`, order preserved.
    pub fn restrict(&self, coords: CoordSet) -> ProductSpace {
        ProductSpace {
            sizes: coords.iter().map(|i| self.sizes[i]).collect(),
        }
    }
}

/// A subset of the coordinates `{0, ..., k-1}`, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CoordSet(u64);

impl CoordSet {
    pub const EMPTY: CoordSet = CoordSet(0);

    pub fn full(k: usize) -> Self {
        debug_assert!(k <= MAX_COORDS);
        if k == 64 {
            CoordSet(u64::MAX)
        } else {
            CoordSet((1u64 << k) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        CoordSet(1 << i)
    }

    pub fn contains(&self, i: usize) -> bool {
        i < MAX_COORDS && self.0 & (1 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.0 &= !(1 << i);
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn union(&self, other: CoordSet) -> CoordSet {
        CoordSet(self.0 | other.0)
    }

    pub fn intersection(&self, other: CoordSet) -> CoordSet {
        CoordSet(self.0 & other.0)
    }

    pub fn difference(&self, other: CoordSet) -> CoordSet {
        CoordSet(self.0 & !other.0)
    }

    pub fn is_subset(&self, other: CoordSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Ascending iterator over the member coordinates.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..MAX_COORDS).filter(move |i| mask & (1 << i) != 0)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for CoordSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut mask = 0u64;
        for i in iter {
            debug_assert!(i < MAX_COORDS);
            mask |= 1 << i;
        }
        CoordSet(mask)
    }
}

impl fmt::Display for CoordSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// A single coordinate constraint: free, or fixed to one value.
///
/// The derived order puts `Free` before any `Fixed`, giving hyperplanes
/// a canonical total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    Free,
    Fixed(u64),
}

impl Constraint {
    pub fn is_fixed(&self) -> bool {
        matches!(self, Constraint::Fixed(_))
    }

    pub fn fixed_value(&self) -> Option<u64> {
        match self {
            Constraint::Fixed(v) => Some(*v),
            Constraint::Free => None,
        }
    }
}

/// A hyperplane of a product space: one constraint per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hyperplane {
    constraints: Vec<Constraint>,
}

impl Hyperplane {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Hyperplane { constraints }
    }

    /// The all-free hyperplane (the whole space).
    pub fn free(dim: usize) -> Self {
        Hyperplane {
            constraints: vec![Constraint::Free; dim],
        }
    }

    /// Validates fixed values against the space's coordinate sizes.
    pub fn check(&self, space: &ProductSpace) -> Result<()> {
        if self.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: self.dim(),
            });
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let Constraint::Fixed(v) = c {
                if *v >= space.size(i) {
                    return Err(Error::ValueOutOfRange {
                        coord: i,
                        value: *v,
                        size: space.size(i),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, coord: usize) -> Constraint {
        self.constraints[coord]
    }

    /// The set of fixed coordinates `F(H)`.
    pub fn fixed_coords(&self) -> CoordSet {
        CoordSet::from_iter(
            self.constraints
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_fixed())
                .map(|(i, _)| i),
        )
    }

    /// Membership test; true iff every fixed coordinate matches.
    pub fn contains(&self, point: &[u64]) -> bool {
        debug_assert_eq!(point.len(), self.dim());
        self.constraints
            .iter()
            .zip(point)
            .all(|(c, &x)| match c {
                Constraint::Free => true,
                Constraint::Fixed(v) => *v == x,
            })
    }

    /// Exact density `mu_I(H)`: the product of `1/|S_i|` over fixed
    /// coordinates `i` in `coords`. `mu` of the empty set is 1.
    pub fn measure(&self, space: &ProductSpace, coords: CoordSet) -> BigRational {
        let mut denom = BigInt::one();
        for i in coords.intersection(self.fixed_coords()).iter() {
            denom *= BigInt::from(space.size(i));
        }
        BigRational::new(BigInt::one(), denom)
    }

    /// Natural logarithm of `mu_I(H)`, for underflow-free comparison
    /// against very small thresholds.
    pub fn ln_measure(&self, space: &ProductSpace, coords: CoordSet) -> f64 {
        coords
            .intersection(self.fixed_coords())
            .iter()
            .map(|i| -(space.size(i) as f64).ln())
            .sum()
    }

    /// Projection onto the coordinates of `coords`, order preserved.
    pub fn restrict(&self, coords: CoordSet) -> Result<Hyperplane> {
        if coords.is_empty() {
            return Err(Error::EmptyCoordSet);
        }
        Ok(Hyperplane {
            constraints: coords.iter().map(|i| self.constraints[i]).collect(),
        })
    }

    /// Number of points of the hyperplane (product of free sizes).
    pub fn points(&self, space: &ProductSpace) -> u128 {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_fixed())
            .map(|(i, _)| space.size(i) as u128)
            .product()
    }

    /// Visits every point of the hyperplane, in mixed-radix order of the
    /// free coordinates.
    pub fn for_each_point<F: FnMut(&[u64])>(&self, space: &ProductSpace, mut f: F) {
        let free: Vec<usize> = self
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_fixed())
            .map(|(i, _)| i)
            .collect();
        let mut point: Vec<u64> = self
            .constraints
            .iter()
            .map(|c| c.fixed_value().unwrap_or(0))
            .collect();
        loop {
            f(&point);
            // odometer over the free coordinates, last varying fastest
            let mut pos = free.len();
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                let i = free[pos];
                point[i] += 1;
                if point[i] < space.size(i) {
                    break;
                }
                point[i] = 0;
            }
        }
    }
}

impl fmt::Display for Hyperplane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (n, c) in self.constraints.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            match c {
                Constraint::Free => write!(f, "*")?,
                Constraint::Fixed(v) => write!(f, "{v}")?,
            }
        }
        write!(f, "]")
    }
}

// Hyperplanes serialize as JSON arrays mixing integers and "*",
// e.g. [1,"*",2].
impl Serialize for Hyperplane {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.constraints.len()))?;
        for c in &self.constraints {
            match c {
                Constraint::Free => seq.serialize_element("*")?,
                Constraint::Fixed(v) => seq.serialize_element(v)?,
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Hyperplane {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PlaneVisitor;

        impl<'de> Visitor<'de> for PlaneVisitor {
            type Value = Hyperplane;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of integers and \"*\"")
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Hyperplane, A::Error> {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Entry {
                    Int(u64),
                    Star(String),
                }
                let mut constraints = Vec::new();
                while let Some(entry) = seq.next_element::<Entry>()? {
                    match entry {
                        Entry::Int(v) => constraints.push(Constraint::Fixed(v)),
                        Entry::Star(s) if s == "*" => constraints.push(Constraint::Free),
                        Entry::Star(s) => {
                            return Err(de::Error::custom(format!(
                                "expected \"*\" or integer, got {s:?}"
                            )))
                        }
                    }
                }
                Ok(Hyperplane::new(constraints))
            }
        }

        deserializer.deserialize_seq(PlaneVisitor)
    }
}
