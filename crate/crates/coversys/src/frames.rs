//! Frame constructions and the counting quantities attached to them:
//! arithmetic orderings of prime-power slots, the log-family-count
//! `Q(N,<)` and its large-prime restriction, the slot weights `G`/`G_d`,
//! the series constant `tau`, the frame-family generator over `Z_N`,
//! size padding, and leading-order bound evaluators with a small exact
//! DP oracle.

use crate::arith::{primes_up_to, CrtSpace, FactoredModulus, Progression, Slot};
use crate::cover::{CoverSystem, DEFAULT_SIEVE_CAP};
use crate::error::{Error, Result};
use crate::space::{Constraint, CoordSet, Hyperplane, ProductSpace};
use std::collections::HashMap;

/// Sorting key of the slot `(p, e)`: `(p - 1) / ln((e+1)/e)`. Strictly
/// increasing in `e` for fixed `p`, so sorting by it always yields an
/// arithmetic ordering.
pub fn ordering_key(prime: u64, exp: u32) -> f64 {
    (prime - 1) as f64 / ((exp as f64 + 1.0) / exp as f64).ln()
}

/// A total order on the slots of a modulus that restricts to
/// `(p,1) < (p,2) < ...` within every prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArithOrdering {
    slots: Vec<Slot>,
}

impl ArithOrdering {
    /// Validates that `slots` lists each slot of `modulus` exactly once
    /// and is per-prime monotone.
    pub fn new(slots: Vec<Slot>, modulus: &FactoredModulus) -> Result<Self> {
        let mut expected = modulus.slots();
        expected.sort_unstable();
        let mut got = slots.clone();
        got.sort_unstable();
        if got != expected {
            return Err(Error::InvalidInput(
                "ordering does not enumerate the slot set of the modulus".into(),
            ));
        }
        let mut last_exp: HashMap<u64, u32> = HashMap::new();
        for s in &slots {
            let prev = last_exp.insert(s.prime, s.exp);
            if prev.is_some_and(|p| p >= s.exp) {
                return Err(Error::InvalidInput(format!(
                    "ordering violates per-prime monotonicity at {s}"
                )));
            }
        }
        Ok(ArithOrdering { slots })
    }

    /// The canonical instance: slots sorted by [`ordering_key`], ties
    /// broken by `(p, e)` lexicographically.
    pub fn canonical(modulus: &FactoredModulus) -> Self {
        let mut slots = modulus.slots();
        slots.sort_by(|a, b| {
            ordering_key(a.prime, a.exp)
                .partial_cmp(&ordering_key(b.prime, b.exp))
                .unwrap()
                .then_with(|| a.cmp(b))
        });
        ArithOrdering { slots }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// `Q(N, ord)`: the sum over slots `(p,e)` of `(p-1)` times the total
/// `ln((f+1)/f)` over strictly earlier slots `(q,f)` of other primes.
/// `exp(Q)` is the size of the frame family of `N` under the ordering.
pub fn q_value(ordering: &ArithOrdering) -> f64 {
    let mut total = NeumaierSum::default();
    let mut all = 0.0f64;
    let mut per_prime: HashMap<u64, f64> = HashMap::new();
    for slot in &ordering.slots {
        let own = per_prime.entry(slot.prime).or_insert(0.0);
        total.add((slot.prime - 1) as f64 * (all - *own));
        let w = ((slot.exp as f64 + 1.0) / slot.exp as f64).ln();
        all += w;
        *own += w;
    }
    total.value()
}

/// `Q` restricted to outer slots whose prime exceeds `1/delta`; the
/// inner sum now ranges over all earlier slots, own prime included.
pub fn q_value_restricted(ordering: &ArithOrdering, delta: f64) -> f64 {
    let mut total = NeumaierSum::default();
    let mut all = 0.0f64;
    for slot in &ordering.slots {
        if slot.prime as f64 * delta > 1.0 {
            total.add((slot.prime - 1) as f64 * all);
        }
        all += ((slot.exp as f64 + 1.0) / slot.exp as f64).ln();
    }
    total.value()
}

/// The slot weights `G(N)` and `G_d(N)`: the sum of `p-1` over all slots,
/// and over slots with `p > 1/delta`.
pub fn g_values(modulus: &FactoredModulus, delta: f64) -> (u64, u64) {
    let mut g = 0u64;
    let mut g_delta = 0u64;
    for slot in modulus.slots() {
        g += slot.prime - 1;
        if slot.prime as f64 * delta > 1.0 {
            g_delta += slot.prime - 1;
        }
    }
    (g, g_delta)
}

/// Kahan-Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// The series constant `tau = sum_t (ln((t+1)/t))^2` with a certified
/// two-sided tail bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConstants {
    pub tau: f64,
    /// Certified bound on `|tau - true value|`.
    pub tail_bound: f64,
    /// Number of explicitly summed terms.
    pub terms: u64,
}

/// Sums `terms` terms of the series directly (ascending magnitude) and
/// brackets the tail: `ln(1+x) < x` gives tail `< 1/T`, while
/// `ln(1+x) > x/(1+x)` gives tail `> 1/(T+2)`. The reported value is
/// the bracket midpoint, so it stays within the `1/T` envelope of the
/// partial sum while being certified far more tightly.
pub fn tau_constant(terms: u64) -> FrameConstants {
    let mut partial = NeumaierSum::default();
    for t in (1..=terms).rev() {
        let w = (1.0 / t as f64).ln_1p();
        partial.add(w * w);
    }
    let low = 1.0 / (terms as f64 + 2.0);
    let high = 1.0 / terms as f64;
    FrameConstants {
        tau: partial.value() + 0.5 * (low + high),
        tail_bound: 0.5 * (high - low) + 1e-13,
        terms,
    }
}

/// Default evaluation: 10^7 terms certify the value to ~1e-14, beyond
/// what a raw 10^9-term sum with the plain 1/T bound would give.
pub fn tau_default() -> FrameConstants {
    tau_constant(10_000_000)
}

/// All slots with [`ordering_key`] below `x`, in canonical slot order.
pub fn slots_below(x: f64) -> Vec<Slot> {
    let mut slots = Vec::new();
    let bound = (x * std::f64::consts::LN_2).ceil() as u64 + 1;
    for p in primes_up_to(bound) {
        let mut e = 1u32;
        while ordering_key(p, e) < x {
            slots.push(Slot { prime: p, exp: e });
            e += 1;
        }
    }
    slots.sort_unstable();
    slots
}

/// `n(x) = 1 + sum of (p-1)` over slots with key below `x`.
pub fn n_of_x(x: f64) -> u64 {
    1 + slots_below(x).iter().map(|s| s.prime - 1).sum::<u64>()
}

/// `N(x)`: the factored product of `p` over slots with key below `x`.
pub fn modulus_of_x(x: f64) -> FactoredModulus {
    let mut m = FactoredModulus::one();
    for slot in slots_below(x) {
        m.mul_prime_power(slot.prime, 1);
    }
    m
}

/// One row of the growth-trend table for the canonical ordering.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TrendPoint {
    pub x: f64,
    pub n: u64,
    pub q: f64,
    /// `Q(N(x),<) * sqrt(ln n(x)) / n(x)^{3/2}`.
    pub ratio: f64,
}

/// Evaluates `n(x)`, `Q(N(x),<)` and their ratio on an ascending grid,
/// in a single sweep over the slots below the largest grid point.
pub fn q_trend(grid: &[f64]) -> Vec<TrendPoint> {
    debug_assert!(grid.windows(2).all(|w| w[0] <= w[1]), "grid must ascend");
    let x_max = grid.iter().cloned().fold(0.0f64, f64::max);
    let mut slots = slots_below(x_max);
    slots.sort_by(|a, b| {
        ordering_key(a.prime, a.exp)
            .partial_cmp(&ordering_key(b.prime, b.exp))
            .unwrap()
            .then_with(|| a.cmp(b))
    });
    let mut q = NeumaierSum::default();
    let mut n: u64 = 1;
    let mut all = 0.0f64;
    let mut per_prime: HashMap<u64, f64> = HashMap::new();
    let mut next = 0usize;
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        while next < slots.len() && ordering_key(slots[next].prime, slots[next].exp) < x {
            let slot = slots[next];
            let own = per_prime.entry(slot.prime).or_insert(0.0);
            q.add((slot.prime - 1) as f64 * (all - *own));
            let w = ((slot.exp as f64 + 1.0) / slot.exp as f64).ln();
            all += w;
            *own += w;
            n += slot.prime - 1;
            next += 1;
        }
        let qv = q.value();
        let ratio = qv * (n as f64).ln().sqrt() / (n as f64).powf(1.5);
        out.push(TrendPoint { x, n, q: qv, ratio });
    }
    out
}

/// The family of Simpson-tight minimal covering systems of `Z_N` built
/// from simple frames centred at zero: for each slot `(p,e)` and each
/// `s in {1,...,p-1}` the generated plane fixes `(p,1..e-1)` to 0,
/// `(p,e)` to `s`, and an initial segment of the earlier slots of each
/// other prime to 0; the all-zero axis plane completes the system.
#[derive(Debug, Clone)]
pub struct FrameFamily {
    crt: CrtSpace,
    sites: Vec<ChoiceSite>,
}

/// One free choice: which initial segment of the earlier slots of one
/// other prime is fixed to 0 in the plane of `(slot, s)`.
#[derive(Debug, Clone)]
struct ChoiceSite {
    slot: Slot,
    s: u64,
    /// Coordinate indices of `(q,1), (q,2), ...` preceding `slot`.
    segment_coords: Vec<usize>,
}

impl FrameFamily {
    pub fn new(modulus: &FactoredModulus, ordering: &ArithOrdering) -> Result<Self> {
        ArithOrdering::new(ordering.slots().to_vec(), modulus)?;
        let crt = CrtSpace::new(modulus.clone())?;
        let mut sites = Vec::new();
        // earlier[q] = canonical coord indices of the processed slots of q
        let mut earlier: HashMap<u64, Vec<usize>> = HashMap::new();
        for &slot in ordering.slots() {
            for s in 1..slot.prime {
                let mut others: Vec<(&u64, &Vec<usize>)> = earlier
                    .iter()
                    .filter(|(&q, coords)| q != slot.prime && !coords.is_empty())
                    .collect();
                others.sort_by_key(|(&q, _)| q);
                for (_, coords) in others {
                    sites.push(ChoiceSite {
                        slot,
                        s,
                        segment_coords: coords.clone(),
                    });
                }
            }
            earlier
                .entry(slot.prime)
                .or_default()
                .push(crt.slot_index(slot).unwrap());
        }
        Ok(FrameFamily { crt, sites })
    }

    pub fn crt(&self) -> &CrtSpace {
        &self.crt
    }

    /// Exact family size: the product of `segment length + 1` over all
    /// choice sites. Equals `round(exp(Q(N, ord)))`.
    pub fn count(&self) -> Result<u128> {
        let mut count: u128 = 1;
        for site in &self.sites {
            count = count
                .checked_mul(site.segment_coords.len() as u128 + 1)
                .ok_or_else(|| {
                    Error::InvalidInput("frame family too large to enumerate".into())
                })?;
        }
        Ok(count)
    }

    /// The `index`-th system in mixed-radix order of the choice sites
    /// (site 0 least significant).
    pub fn system(&self, mut index: u128) -> Result<CoverSystem> {
        let k = self.crt.slots().len();
        // extra zero fixings per (slot coord, s)
        let mut segments: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
        for site in &self.sites {
            let radix = site.segment_coords.len() as u128 + 1;
            let len = (index % radix) as usize;
            index /= radix;
            let coord = self.crt.slot_index(site.slot).unwrap();
            segments
                .entry((coord, site.s))
                .or_default()
                .extend_from_slice(&site.segment_coords[..len]);
        }
        if index != 0 {
            return Err(Error::InvalidInput("frame index out of range".into()));
        }
        let mut planes = Vec::new();
        for slot in self.crt.slots() {
            let coord = self.crt.slot_index(*slot).unwrap();
            for s in 1..slot.prime {
                let mut constraints = vec![Constraint::Free; k];
                for e in 1..slot.exp {
                    let idx = self
                        .crt
                        .slot_index(Slot {
                            prime: slot.prime,
                            exp: e,
                        })
                        .unwrap();
                    constraints[idx] = Constraint::Fixed(0);
                }
                constraints[coord] = Constraint::Fixed(s);
                if let Some(extra) = segments.get(&(coord, s)) {
                    for &c in extra {
                        constraints[c] = Constraint::Fixed(0);
                    }
                }
                planes.push(Hyperplane::new(constraints));
            }
        }
        // axis plane: every coordinate fixed to zero
        planes.push(Hyperplane::new(vec![Constraint::Fixed(0); k]));
        CoverSystem::with_crt(self.crt.clone(), planes)
    }

    /// Enumerates the whole family in index order.
    pub fn iter(&self) -> Result<impl Iterator<Item = Result<CoverSystem>> + '_> {
        let count = self.count()?;
        Ok((0..count).map(move |i| self.system(i)))
    }
}

/// Pads a minimal system of lcm `N` containing the progression
/// `0 (mod N)` up to size `n`: the axis progression is replaced by the
/// binary chain `2^{l-1} N (mod 2^l N)` for `l in [t]` plus
/// `0 (mod 2^t N)`, where `t = n - |c|`.
pub fn pad_to_size(system: &CoverSystem, n: usize) -> Result<CoverSystem> {
    let progs = system.progressions()?;
    if n < progs.len() {
        return Err(Error::InvalidInput(format!(
            "target size {n} below system size {}",
            progs.len()
        )));
    }
    if !system.is_minimal()? {
        return Err(Error::NotMinimal { plane: 0 });
    }
    let lcm = system.lcm()?;
    let n_value = lcm.value()?;
    let axis = Progression::new(0, lcm.clone())?;
    if !progs.contains(&axis) {
        return Err(Error::InvalidInput(format!(
            "system lacks its axis progression 0 (mod {lcm})"
        )));
    }
    let t = n - progs.len();
    if t == 0 {
        return Ok(system.clone());
    }
    let mut padded: Vec<Progression> = progs.into_iter().filter(|p| *p != axis).collect();
    let mut chain = lcm.clone();
    chain.mul_prime_power(2, t as u32);
    chain.value()?; // overflow check on 2^t N
    for l in 1..=t as u32 {
        let mut modulus = lcm.clone();
        modulus.mul_prime_power(2, l);
        padded.push(Progression::new((1u64 << (l - 1)) * n_value, modulus)?);
    }
    padded.push(Progression::new(0, chain)?);
    CoverSystem::from_progressions(&padded)
}

/// A simple frame: an axis point plus one layer per coordinate. The
/// layer of the coordinate at position `t` of the order fixes that
/// coordinate to each non-axis value, may pin earlier coordinates to
/// their axis value, and leaves later coordinates free.
#[derive(Debug, Clone)]
pub struct SimpleFrame {
    pub space: ProductSpace,
    pub axis: Vec<u64>,
    /// `layers[c]` is the layer of coordinate `c`.
    pub layers: Vec<Vec<Hyperplane>>,
    /// `order[t]` is the coordinate at position `t`.
    pub order: Vec<usize>,
}

impl SimpleFrame {
    /// Shape check plus, on spaces of at most 10^6 points, the assertion
    /// that the layers together with the axis plane form a minimal cover.
    pub fn verify(&self) -> Result<bool> {
        let k = self.space.dim();
        self.space.check_point(&self.axis)?;
        if self.layers.len() != k || self.order.len() != k {
            return Ok(false);
        }
        let mut seen = vec![false; k];
        for &c in &self.order {
            if c >= k || seen[c] {
                return Ok(false);
            }
            seen[c] = true;
        }
        for (t, &c) in self.order.iter().enumerate() {
            let layer = &self.layers[c];
            if layer.len() as u64 != self.space.size(c) - 1 {
                return Ok(false);
            }
            let mut values_seen = Vec::new();
            for h in layer {
                h.check(&self.space)?;
                match h.constraint(c) {
                    Constraint::Fixed(v) if v != self.axis[c] => {
                        if values_seen.contains(&v) {
                            return Ok(false);
                        }
                        values_seen.push(v);
                    }
                    _ => return Ok(false),
                }
                for (pos, &j) in self.order.iter().enumerate() {
                    if j == c {
                        continue;
                    }
                    let ok = match h.constraint(j) {
                        Constraint::Free => true,
                        Constraint::Fixed(v) => pos < t && v == self.axis[j],
                    };
                    if !ok {
                        return Ok(false);
                    }
                }
            }
        }
        if self.space.points() <= 1_000_000 {
            let mut planes: Vec<Hyperplane> = self.layers.iter().flatten().cloned().collect();
            planes.push(Hyperplane::new(
                self.axis.iter().map(|&v| Constraint::Fixed(v)).collect(),
            ));
            let system = CoverSystem::from_planes(self.space.clone(), planes)?;
            if !system.minimality_report(DEFAULT_SIEVE_CAP)?.minimal {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Reads the simple frame as a generalized frame: scopes are the
    /// later coordinates in the order, anchors are the axis values.
    pub fn as_generalized(&self, ln_delta: f64) -> GeneralizedFrame {
        let k = self.space.dim();
        let mut scopes = vec![CoordSet::EMPTY; k];
        let mut anchors = vec![vec![None; k]; k];
        for (t, &c) in self.order.iter().enumerate() {
            scopes[c] = CoordSet::from_iter(self.order[t + 1..].iter().copied());
            for &j in &self.order[..t] {
                anchors[c][j] = Some(self.axis[j]);
            }
        }
        GeneralizedFrame {
            space: self.space.clone(),
            layers: self.layers.clone(),
            ln_delta,
            data: Some(FrameOrderData {
                order: self.order.clone(),
                scopes,
                anchors,
            }),
        }
    }
}

/// Ordering certificate of a generalized frame: the permutation, the
/// per-coordinate scope sets, and the anchor elements for coordinates
/// outside scope-and-self.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOrderData {
    pub order: Vec<usize>,
    pub scopes: Vec<CoordSet>,
    pub anchors: Vec<Vec<Option<u64>>>,
}

/// A generalized frame: per-coordinate layers of at most `|S_i|-1`
/// planes, each fixing its own coordinate, keeping density above `delta`
/// on its scope set, and agreeing with a per-pair anchor elsewhere.
/// Layers of two large coordinates must be disjoint.
#[derive(Debug, Clone)]
pub struct GeneralizedFrame {
    pub space: ProductSpace,
    pub layers: Vec<Vec<Hyperplane>>,
    pub ln_delta: f64,
    /// Explicit ordering certificate; when absent, verification searches
    /// for one (spaces of at most 12 coordinates).
    pub data: Option<FrameOrderData>,
}

/// Outcome of generalized-frame verification.
#[derive(Debug, Clone)]
pub enum FrameCheck {
    Valid {
        certificate: FrameOrderData,
        /// Whether the frame also satisfies the stronger disjointness
        /// clause that asks only one of the two coordinates to be large.
        one_sided_disjoint: bool,
    },
    Invalid(String),
}

impl FrameCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, FrameCheck::Valid { .. })
    }

    pub fn violation(&self) -> Option<&str> {
        match self {
            FrameCheck::Valid { .. } => None,
            FrameCheck::Invalid(v) => Some(v),
        }
    }
}

impl GeneralizedFrame {
    pub fn total_layer_size(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Checks every clause of the definition; with no explicit ordering
    /// data, searches for a valid permutation and anchors by subset DP.
    pub fn verify(&self) -> FrameCheck {
        let k = self.space.dim();
        if self.layers.len() != k {
            return FrameCheck::Invalid(format!(
                "expected {k} layers, got {}",
                self.layers.len()
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.len() as u64 > self.space.size(i) - 1 {
                return FrameCheck::Invalid(format!(
                    "layer {i} has {} planes, more than |S_{i}|-1 = {}",
                    layer.len(),
                    self.space.size(i) - 1
                ));
            }
            for h in layer {
                if h.check(&self.space).is_err() {
                    return FrameCheck::Invalid(format!("malformed plane {h} in layer {i}"));
                }
                if !h.fixed_coords().contains(i) {
                    return FrameCheck::Invalid(format!(
                        "plane {h} of layer {i} leaves coordinate {i} free"
                    ));
                }
            }
        }
        let large: Vec<bool> = (0..k)
            .map(|i| (self.space.size(i) as f64).ln() >= -self.ln_delta)
            .collect();
        let mut one_sided = true;
        for i in 0..k {
            for j in i + 1..k {
                let shared = self.layers[i].iter().any(|h| self.layers[j].contains(h));
                if shared && large[i] && large[j] {
                    return FrameCheck::Invalid(format!(
                        "layers {i} and {j} of large coordinates share a plane"
                    ));
                }
                if shared && (large[i] || large[j]) {
                    one_sided = false;
                }
            }
        }
        match &self.data {
            Some(data) => match self.check_order_data(data) {
                Ok(()) => FrameCheck::Valid {
                    certificate: data.clone(),
                    one_sided_disjoint: one_sided,
                },
                Err(msg) => FrameCheck::Invalid(msg),
            },
            None => match self.search_order_data() {
                Some(data) => FrameCheck::Valid {
                    certificate: data,
                    one_sided_disjoint: one_sided,
                },
                None => {
                    FrameCheck::Invalid("no ordering with valid scopes and anchors exists".into())
                }
            },
        }
    }

    fn check_order_data(&self, data: &FrameOrderData) -> std::result::Result<(), String> {
        let k = self.space.dim();
        if data.order.len() != k || data.scopes.len() != k || data.anchors.len() != k {
            return Err("ordering data has wrong dimensions".into());
        }
        let mut position = vec![usize::MAX; k];
        for (t, &c) in data.order.iter().enumerate() {
            if c >= k || position[c] != usize::MAX {
                return Err(format!("order is not a permutation at position {t}"));
            }
            position[c] = t;
        }
        for (t, &c) in data.order.iter().enumerate() {
            let later = CoordSet::from_iter(data.order[t + 1..].iter().copied());
            if !later.is_subset(data.scopes[c]) {
                return Err(format!(
                    "scope of coordinate {c} misses later coordinates {}",
                    later.difference(data.scopes[c])
                ));
            }
            if data.scopes[c].contains(c) {
                return Err(format!("scope of coordinate {c} contains itself"));
            }
            for h in &self.layers[c] {
                if h.ln_measure(&self.space, data.scopes[c]) <= self.ln_delta {
                    return Err(format!(
                        "plane {h} of layer {c} has density <= delta on its scope"
                    ));
                }
                for j in 0..k {
                    if j == c || data.scopes[c].contains(j) {
                        continue;
                    }
                    match (h.constraint(j), data.anchors[c][j]) {
                        (Constraint::Free, _) => {}
                        (Constraint::Fixed(v), Some(a)) if v == a => {}
                        (Constraint::Fixed(v), anchor) => {
                            return Err(format!(
                                "plane {h} of layer {c} fixes coordinate {j} to {v}, anchor is {anchor:?}"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Subset DP over suffix sets: a coordinate can front a suffix when
    /// every plane of its layer keeps density above delta on the suffix
    /// joined with the coordinates the layer cannot anchor.
    fn search_order_data(&self) -> Option<FrameOrderData> {
        let k = self.space.dim();
        if k > 12 {
            return None;
        }
        // forced[c] = coordinates where the layer of c fixes two
        // different values; they must sit inside the scope
        let mut forced = vec![CoordSet::EMPTY; k];
        let mut single_anchor = vec![vec![None; k]; k];
        for c in 0..k {
            for j in 0..k {
                if j == c {
                    continue;
                }
                let mut values = self.layers[c]
                    .iter()
                    .filter_map(|h| h.constraint(j).fixed_value());
                if let Some(first) = values.next() {
                    if values.any(|v| v != first) {
                        forced[c].insert(j);
                    } else {
                        single_anchor[c][j] = Some(first);
                    }
                }
            }
        }
        let scope_of = |c: usize, suffix: usize| -> CoordSet {
            let mut scope =
                CoordSet::from_iter((0..k).filter(|&i| suffix & (1 << i) != 0)).union(forced[c]);
            scope.remove(c);
            scope
        };
        let ok = |c: usize, suffix: usize| -> bool {
            let scope = scope_of(c, suffix);
            self.layers[c]
                .iter()
                .all(|h| h.ln_measure(&self.space, scope) > self.ln_delta)
        };
        let full = (1usize << k) - 1;
        let mut feasible = vec![false; full + 1];
        let mut choice = vec![usize::MAX; full + 1];
        feasible[0] = true;
        for s in 1..=full {
            for c in 0..k {
                if s & (1 << c) != 0 && feasible[s & !(1 << c)] && ok(c, s & !(1 << c)) {
                    feasible[s] = true;
                    choice[s] = c;
                    break;
                }
            }
        }
        if !feasible[full] {
            return None;
        }
        // peel the front coordinate off the full set
        let mut order = Vec::with_capacity(k);
        let mut s = full;
        while s != 0 {
            let c = choice[s];
            order.push(c);
            s &= !(1 << c);
        }
        let mut scopes = vec![CoordSet::EMPTY; k];
        let mut anchors = vec![vec![None; k]; k];
        for (t, &c) in order.iter().enumerate() {
            let suffix: usize = order[t + 1..].iter().map(|&i| 1usize << i).sum();
            scopes[c] = scope_of(c, suffix);
            for j in 0..k {
                if j != c && !scopes[c].contains(j) {
                    anchors[c][j] = single_anchor[c][j].or(Some(0));
                }
            }
        }
        let data = FrameOrderData {
            order,
            scopes,
            anchors,
        };
        self.check_order_data(&data).ok().map(|_| data)
    }
}

/// Leading-order bound `2 sqrt(tau) (M / ln M)^{1/2}` on the maximal
/// total log of subgroup counts under slot weight at most `M`. The o(1)
/// term is dropped; treat the value as an estimate.
pub fn subgroup_log_leading(m: f64, tau: f64) -> f64 {
    2.0 * tau.sqrt() * (m / m.ln()).sqrt()
}

/// Leading-order count exponent `(4 sqrt(tau) / 3) n^{3/2} / (ln n)^{1/2}`.
pub fn count_exponent_leading(n: f64, tau: f64) -> f64 {
    4.0 * tau.sqrt() / 3.0 * n.powf(1.5) / n.ln().sqrt()
}

/// Leading-order crude exponent `(2 sqrt(tau/C)) n^{3/2} / (ln n)^{1/2}`.
pub fn crude_exponent_leading(n: f64, c: f64, tau: f64) -> f64 {
    2.0 * (tau / c).sqrt() * n.powf(1.5) / n.ln().sqrt()
}

/// Mixed bound `2 sqrt(tau) (G_d / ln G_d)^{1/2} + (1/delta) ln G`.
pub fn mixed_subgroup_bound(g_delta: f64, g: f64, delta: f64, tau: f64) -> f64 {
    2.0 * tau.sqrt() * (g_delta / g_delta.ln()).sqrt() + g.ln() / delta
}

/// Exact DP oracle: the maximum product of `(gamma_i + 1)` over distinct
/// primes `p_i <= M+1` subject to `sum gamma_i (p_i - 1) <= M`.
pub fn max_subgroup_product(m: u64) -> u128 {
    let mut best = vec![1u128; m as usize + 1];
    for p in primes_up_to(m + 1) {
        let step = (p - 1) as usize;
        let mut next = best.clone();
        for budget in 0..=m as usize {
            let mut gamma = 1u128;
            let mut used = step;
            while used <= budget {
                gamma += 1;
                let cand = gamma
                    .checked_mul(best[budget - used])
                    .expect("subgroup product exceeds u128");
                if cand > next[budget] {
                    next[budget] = cand;
                }
                used += step;
            }
        }
        best = next;
    }
    best[m as usize]
}

/// Independent recursive enumeration of the same maximum, for
/// cross-checking the DP at small `M`.
pub fn max_subgroup_product_brute(m: u64) -> u128 {
    fn rec(primes: &[u64], budget: u64) -> u128 {
        match primes.split_first() {
            None => 1,
            Some((&p, rest)) => {
                let mut best = 0u128;
                let mut gamma = 0u64;
                while gamma * (p - 1) <= budget {
                    let cand = (gamma as u128 + 1) * rec(rest, budget - gamma * (p - 1));
                    best = best.max(cand);
                    gamma += 1;
                }
                best
            }
        }
    }
    rec(&primes_up_to(m + 1), m)
}

/// Natural log of the DP oracle value.
pub fn subgroup_log_dp(m: u64) -> f64 {
    (max_subgroup_product(m) as f64).ln()
}
