//! Coordinate-by-coordinate exploration of a minimal hyperplane cover,
//! construction and validation of exploration trees, depth-first
//! extraction of a tree-frame, conversion to a generalized frame, and
//! the weighted-inequality certificates behind the bad-vertex case.

use crate::cover::{minimal_subcover_indices, CoverSystem, DEFAULT_SIEVE_CAP};
use crate::error::{Error, Result};
use crate::frames::{FrameOrderData, GeneralizedFrame};
use crate::space::{Constraint, CoordSet, Hyperplane, ProductSpace};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `eta = ln(2)/4`, the weight exponent of the covering inequality.
pub const ETA: f64 = std::f64::consts::LN_2 / 4.0;

/// Parameters of the exploration. In strict mode the density threshold
/// is derived from `(C, eps)` and the one-step dichotomy is guaranteed;
/// in free mode any positive values are allowed and a step may come
/// back with no verdict.
#[derive(Debug, Clone, Copy)]
pub struct StructureParams {
    /// Cover-size ratio bound; NaN outside strict mode.
    pub c: f64,
    /// Epsilon used by the exploration verdicts.
    pub eps: f64,
    /// Epsilon of the final layer-size conclusion (twice `eps` in
    /// strict mode).
    pub eps_target: f64,
    pub lambda: f64,
    /// `ln(delta)`; delta itself can be far below f64 denormals.
    pub ln_delta: f64,
    pub eta: f64,
    pub strict: bool,
}

/// `ln` of the density threshold `2^{-9} l^2 e^{2 log2(1/(l e)) + 11}`
/// under which a plane's restricted mass obeys the per-coordinate bound.
pub fn mass_hypothesis_ln_bound(lambda: f64, eps: f64) -> f64 {
    -9.0 * std::f64::consts::LN_2
        + 2.0 * lambda.ln()
        + (2.0 * (1.0 / (lambda * eps)).log2() + 11.0) * eps.ln()
}

impl StructureParams {
    /// Strict parameters: `lambda = eps / (2^4 C)` and
    /// `delta = 2^{-23} lambda^4 eps^{2 log2(1/(lambda eps)) + 15}`,
    /// with exploration run at `eps/2`. The derived delta is checked
    /// against the exploration threshold for `(lambda, eps/2)`.
    pub fn strict(c: f64, eps: f64) -> Result<Self> {
        if c.is_nan() || c <= 0.0 || eps.is_nan() || eps <= 0.0 || eps >= 1.0 {
            return Err(Error::InvalidInput(
                "strict mode needs C > 0 and eps in (0,1)".into(),
            ));
        }
        let lambda = eps / (16.0 * c);
        let ln_delta = -23.0 * std::f64::consts::LN_2
            + 4.0 * lambda.ln()
            + (2.0 * (1.0 / (lambda * eps)).log2() + 15.0) * eps.ln();
        let explore_eps = eps / 2.0;
        if ln_delta >= mass_hypothesis_ln_bound(lambda, explore_eps) {
            return Err(Error::InvalidInput(
                "derived delta does not satisfy the exploration threshold".into(),
            ));
        }
        Ok(StructureParams {
            c,
            eps: explore_eps,
            eps_target: eps,
            lambda,
            ln_delta,
            eta: ETA,
            strict: true,
        })
    }

    /// Free parameters; the exploration may return no verdict.
    pub fn free(lambda: f64, eps: f64, delta: f64) -> Result<Self> {
        if [lambda, eps, delta].iter().any(|v| v.is_nan() || *v <= 0.0) || eps >= 1.0 {
            return Err(Error::InvalidInput(
                "free mode needs lambda > 0, eps in (0,1), delta > 0".into(),
            ));
        }
        Ok(StructureParams {
            c: f64::NAN,
            eps,
            eps_target: eps,
            lambda,
            ln_delta: delta.ln(),
            eta: ETA,
            strict: false,
        })
    }
}

/// Verdict of one exploration step on a restricted cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepVerdict {
    /// Frame-like planes: one witness per special element.
    Good { frame: Vec<usize> },
    /// Garbage planes carrying the weighted-count certificate.
    Bad { garbage: Vec<usize> },
    /// Free mode only: neither certificate could be established.
    Neither,
}

/// A child sub-cover produced by exploring one coordinate.
#[derive(Debug, Clone)]
pub struct StepChild {
    /// The element of the explored coordinate this child sits at.
    pub anchor: u64,
    /// Fixed-coordinate set of the child's minimal subcover (local
    /// coordinates of the input space).
    pub coords: CoordSet,
    /// Indices into the input plane list.
    pub planes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// The explored coordinate (local index).
    pub coord: usize,
    pub verdict: StepVerdict,
    /// Children with non-empty fixed sets, ascending anchor.
    pub children: Vec<StepChild>,
}

/// One exploration step on a minimal cover of the whole `space` with
/// every coordinate fixed by some plane.
///
/// The coordinate and verdict are chosen first: if some coordinate has
/// few non-special elements, its witnesses form a good set; otherwise
/// the restricted-mass inequality picks a coordinate whose incident
/// planes form the garbage certificate. The subcover decomposition is
/// then built for the chosen coordinate.
pub fn one_step(
    space: &ProductSpace,
    planes: &[Hyperplane],
    params: &StructureParams,
) -> Result<StepOutcome> {
    let k = space.dim();
    if k == 0 || planes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let system = CoverSystem::from_planes(space.clone(), planes.to_vec())?;
    if system.len() != planes.len() {
        return Err(Error::InvalidInput("duplicate planes in cover".into()));
    }
    let report = system.minimality_report(DEFAULT_SIEVE_CAP)?;
    if !report.minimal {
        return Err(Error::NotMinimal {
            plane: report.redundant[0],
        });
    }
    if system.fixed_coords() != space.all_coords() {
        return Err(Error::InvalidInput(
            "every coordinate must be fixed by some plane".into(),
        ));
    }
    // canonical order of the input planes
    let mut order: Vec<usize> = (0..planes.len()).collect();
    order.sort_by(|&a, &b| planes[a].cmp(&planes[b]));

    // special elements and their canonically-first witnesses
    let all = space.all_coords();
    let mut witness: Vec<Vec<Option<usize>>> = (0..k)
        .map(|i| vec![None; space.size(i) as usize])
        .collect();
    for &idx in &order {
        let h = &planes[idx];
        for i in h.fixed_coords().iter() {
            let mut rest = all;
            rest.remove(i);
            if h.ln_measure(space, rest) > params.ln_delta {
                let s = h.constraint(i).fixed_value().unwrap() as usize;
                witness[i][s].get_or_insert(idx);
            }
        }
    }
    let non_special =
        |i: usize| -> usize { witness[i].iter().filter(|w| w.is_none()).count() };

    // Case 1: some coordinate has few non-special elements
    let case1 = (0..k)
        .find(|&i| (non_special(i) as f64) < params.eps * (space.size(i) as f64 - 1.0) + 1.0);
    let (coord, verdict) = if let Some(i) = case1 {
        let frame: Vec<usize> = witness[i].iter().filter_map(|w| *w).collect();
        (i, StepVerdict::Good { frame })
    } else {
        case2_verdict(space, planes, &order, &witness, params)?
    };

    let children = decompose(space, planes, &order, coord)?;
    Ok(StepOutcome {
        coord,
        verdict,
        children,
    })
}

/// The heavy-coordinate selection and garbage certificate of the second
/// case: witnesses are removed, masses are taken uniform on the product
/// of non-special element sets, and the coordinate maximizing the
/// weighted incident mass is charged.
fn case2_verdict(
    space: &ProductSpace,
    planes: &[Hyperplane],
    order: &[usize],
    witness: &[Vec<Option<usize>>],
    params: &StructureParams,
) -> Result<(usize, StepVerdict)> {
    let k = space.dim();
    let restricted: Vec<Vec<u64>> = (0..k)
        .map(|i| {
            (0..space.size(i))
                .filter(|&s| witness[i][s as usize].is_none())
                .collect()
        })
        .collect();
    let witness_planes: std::collections::HashSet<usize> =
        witness.iter().flatten().filter_map(|w| *w).collect();
    let survivors: Vec<usize> = order
        .iter()
        .copied()
        .filter(|idx| !witness_planes.contains(idx))
        .collect();
    // weighted incident restricted mass per coordinate
    let mut sums = vec![0.0f64; k];
    for &idx in &survivors {
        let h = &planes[idx];
        let fixed = h.fixed_coords();
        let mut mass = 1.0f64;
        for j in fixed.iter() {
            let v = h.constraint(j).fixed_value().unwrap();
            if restricted[j].contains(&v) {
                mass /= restricted[j].len() as f64;
            } else {
                mass = 0.0;
                break;
            }
        }
        if mass > 0.0 {
            let w = (params.eta * fixed.len() as f64).exp() * mass;
            for j in fixed.iter() {
                sums[j] += w;
            }
        }
    }
    let coord = (0..k)
        .max_by(|&a, &b| sums[a].partial_cmp(&sums[b]).unwrap().then(b.cmp(&a)))
        .unwrap();
    if params.strict && sums[coord] < params.eta / 2.0 - 1e-12 {
        return Err(Error::CertificateViolation(format!(
            "heavy-coordinate sum {} below eta/2 in strict mode",
            sums[coord]
        )));
    }
    let garbage: Vec<usize> = survivors
        .iter()
        .copied()
        .filter(|&idx| planes[idx].fixed_coords().contains(coord))
        .collect();
    for &idx in &garbage {
        if planes[idx].fixed_coords().len() < 2 {
            return Err(Error::CertificateViolation(format!(
                "garbage plane {} fixes fewer than two coordinates",
                planes[idx]
            )));
        }
    }
    let weight: f64 = garbage
        .iter()
        .map(|&idx| (-(planes[idx].fixed_coords().len() as f64) / 4.0).exp2())
        .sum();
    let needed = space.size(coord) as f64 / params.lambda;
    if weight >= needed {
        Ok((coord, StepVerdict::Bad { garbage }))
    } else if params.strict {
        Err(Error::CertificateViolation(format!(
            "garbage weight {weight} below {needed} in strict mode"
        )))
    } else {
        Ok((coord, StepVerdict::Neither))
    }
}

/// For the explored coordinate, builds the per-element minimal
/// subcovers of the remaining space and their preimages.
fn decompose(
    space: &ProductSpace,
    planes: &[Hyperplane],
    order: &[usize],
    coord: usize,
) -> Result<Vec<StepChild>> {
    let k = space.dim();
    if k == 1 {
        return Ok(Vec::new());
    }
    let mut rest_coords = space.all_coords();
    rest_coords.remove(coord);
    let rest_space = space.restrict(rest_coords);
    let rest_list = rest_coords.to_vec();
    let mut children = Vec::new();
    let mut union = CoordSet::EMPTY;
    for s in 0..space.size(coord) {
        // planes alive at this element, canonical order
        let alive: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&idx| match planes[idx].constraint(coord) {
                Constraint::Free => true,
                Constraint::Fixed(v) => v == s,
            })
            .collect();
        let restricted: Vec<Hyperplane> = alive
            .iter()
            .map(|&idx| planes[idx].restrict(rest_coords).unwrap())
            .collect();
        {
            let mut sorted = restricted.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != restricted.len() {
                return Err(Error::CertificateViolation(
                    "restriction is not injective on the live planes".into(),
                ));
            }
        }
        // deterministic scan order: canonical order of the restrictions
        let mut scan: Vec<usize> = (0..restricted.len()).collect();
        scan.sort_by(|&a, &b| restricted[a].cmp(&restricted[b]));
        let scan_planes: Vec<Hyperplane> =
            scan.iter().map(|&t| restricted[t].clone()).collect();
        let keep = minimal_subcover_indices(&rest_space, &scan_planes, DEFAULT_SIEVE_CAP)?;
        let mut kept: Vec<usize> = keep.iter().map(|&t| alive[scan[t]]).collect();
        kept.sort_unstable();
        let mut fixed = CoordSet::EMPTY;
        for &t in &keep {
            fixed = fixed.union(scan_planes[t].fixed_coords());
        }
        // translate restricted positions back to input coordinates
        let fixed_local = CoordSet::from_iter(fixed.iter().map(|pos| rest_list[pos]));
        union = union.union(fixed_local);
        if !fixed_local.is_empty() {
            children.push(StepChild {
                anchor: s,
                coords: fixed_local,
                planes: kept,
            });
        }
    }
    let mut expected = space.all_coords();
    expected.remove(coord);
    if union != expected {
        return Err(Error::CertificateViolation(format!(
            "subcover fixed sets union {union} misses {expected}"
        )));
    }
    Ok(children)
}

/// Verdict stored at a tree vertex, with plane indices into the root
/// cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeVerdict {
    Good { frame: Vec<usize> },
    Bad { garbage: Vec<usize> },
}

/// One vertex of the exploration tree.
#[derive(Debug, Clone)]
pub struct TreeNode {
    /// Fixed-coordinate set of the vertex's restricted cover (global).
    pub coords: CoordSet,
    /// The explored coordinate (global).
    pub explored: usize,
    /// Plane indices into the root cover, ascending.
    pub planes: Vec<usize>,
    /// The element of the parent's explored coordinate this vertex
    /// descends through; absent at the root.
    pub anchor: Option<u64>,
    pub parent: Option<usize>,
    /// Children ascending by anchor.
    pub children: Vec<usize>,
    pub verdict: NodeVerdict,
}

/// An exploration tree of a minimal cover: every vertex carries a
/// sub-cover whose restriction is minimal on its coordinate set, plus a
/// good or bad verdict.
#[derive(Debug, Clone)]
pub struct ExplorationTree {
    pub space: ProductSpace,
    pub params: StructureParams,
    /// Root cover, canonical order.
    pub planes: Vec<Hyperplane>,
    /// Vertex 0 is the root; parents precede children.
    pub nodes: Vec<TreeNode>,
}

/// Builds the exploration tree by expanding boundary vertices in FIFO
/// order; single-coordinate vertices close as good with all planes.
pub fn build_exploration_tree(
    system: &CoverSystem,
    params: &StructureParams,
) -> Result<ExplorationTree> {
    let space = system.space().clone();
    if system.fixed_coords() != space.all_coords() {
        return Err(Error::InvalidInput(
            "exploration needs every coordinate fixed by some plane".into(),
        ));
    }
    let planes = system.planes().to_vec();
    let mut nodes = vec![TreeNode {
        coords: space.all_coords(),
        explored: usize::MAX,
        planes: (0..planes.len()).collect(),
        anchor: None,
        parent: None,
        children: Vec::new(),
        verdict: NodeVerdict::Good { frame: Vec::new() },
    }];
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let coords = nodes[u].coords;
        let members = nodes[u].planes.clone();
        if coords.len() == 1 {
            let i = coords.iter().next().unwrap();
            // the restricted cover must be the full set of singletons
            let mut values: Vec<u64> = members
                .iter()
                .map(|&idx| match planes[idx].constraint(i) {
                    Constraint::Fixed(v) => Ok(v),
                    Constraint::Free => Err(Error::CertificateViolation(format!(
                        "leaf plane {} does not fix coordinate {i}",
                        planes[idx]
                    ))),
                })
                .collect::<Result<_>>()?;
            values.sort_unstable();
            values.dedup();
            if values.len() as u64 != space.size(i) || members.len() as u64 != space.size(i) {
                return Err(Error::CertificateViolation(format!(
                    "leaf at coordinate {i} lacks the {} singleton planes",
                    space.size(i)
                )));
            }
            nodes[u].explored = i;
            nodes[u].verdict = NodeVerdict::Good {
                frame: members.clone(),
            };
            continue;
        }
        let local_list = coords.to_vec();
        let local_space = space.restrict(coords);
        let local_planes: Vec<Hyperplane> = members
            .iter()
            .map(|&idx| planes[idx].restrict(coords).unwrap())
            .collect();
        let step = one_step(&local_space, &local_planes, params)?;
        nodes[u].explored = local_list[step.coord];
        nodes[u].verdict = match step.verdict {
            StepVerdict::Good { frame } => NodeVerdict::Good {
                frame: frame.into_iter().map(|t| members[t]).collect(),
            },
            StepVerdict::Bad { garbage } => NodeVerdict::Bad {
                garbage: garbage.into_iter().map(|t| members[t]).collect(),
            },
            StepVerdict::Neither => {
                return Err(Error::NoVerdict {
                    coords: local_list,
                })
            }
        };
        for child in step.children {
            let child_coords =
                CoordSet::from_iter(child.coords.iter().map(|pos| local_list[pos]));
            let child_planes: Vec<usize> = child.planes.iter().map(|&t| members[t]).collect();
            let id = nodes.len();
            nodes.push(TreeNode {
                coords: child_coords,
                explored: usize::MAX,
                planes: child_planes,
                anchor: Some(child.anchor),
                parent: Some(u),
                children: Vec::new(),
                verdict: NodeVerdict::Good { frame: Vec::new() },
            });
            nodes[u].children.push(id);
            queue.push_back(id);
        }
    }
    let tree = ExplorationTree {
        space,
        params: *params,
        planes,
        nodes,
    };
    tree.validate()?;
    Ok(tree)
}

impl ExplorationTree {
    /// Explored coordinates along the path from the root to `u`,
    /// inclusive.
    fn path_explored(&self, u: usize) -> CoordSet {
        let mut set = CoordSet::EMPTY;
        let mut cur = Some(u);
        while let Some(v) = cur {
            set.insert(self.nodes[v].explored);
            cur = self.nodes[v].parent;
        }
        set
    }

    /// True iff `a` lies on the path from `b` to the root.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = Some(b);
        while let Some(v) = cur {
            if v == a {
                return true;
            }
            cur = self.nodes[v].parent;
        }
        false
    }

    /// Full clause-by-clause validation of the tree.
    pub fn validate(&self) -> Result<()> {
        let clause = |msg: String| Err(Error::CertificateViolation(msg));
        if self.nodes.is_empty() || self.nodes[0].coords != self.space.all_coords() {
            return clause("root must carry the full coordinate set".into());
        }
        for (u, node) in self.nodes.iter().enumerate() {
            if !node.coords.contains(node.explored) {
                return clause(format!("vertex {u}: explored coordinate outside its set"));
            }
            // index-tree equation: children fixed sets cover the rest
            let mut union = CoordSet::EMPTY;
            for &c in &node.children {
                union = union.union(self.nodes[c].coords);
            }
            let mut expected = node.coords;
            expected.remove(node.explored);
            if node.children.is_empty() {
                if !expected.is_empty() {
                    return clause(format!("vertex {u}: leaf with more than one coordinate"));
                }
            } else if union != expected {
                return clause(format!(
                    "vertex {u}: children cover {union}, expected {expected}"
                ));
            }
            // (a) restriction is a minimal cover with full fixed set
            let local_space = self.space.restrict(node.coords);
            let restricted: Vec<Hyperplane> = node
                .planes
                .iter()
                .map(|&idx| self.planes[idx].restrict(node.coords).unwrap())
                .collect();
            let sub = CoverSystem::from_planes(local_space.clone(), restricted.clone())?;
            if sub.len() != restricted.len() {
                return clause(format!("vertex {u}: restricted planes collide"));
            }
            if !sub.minimality_report(DEFAULT_SIEVE_CAP)?.minimal {
                return clause(format!("vertex {u}: restricted cover is not minimal"));
            }
            if sub.fixed_coords() != local_space.all_coords() {
                return clause(format!(
                    "vertex {u}: restricted cover leaves a coordinate free"
                ));
            }
            if let Some(p) = node.parent {
                // (i) sub-collection of the parent
                if !node
                    .planes
                    .iter()
                    .all(|idx| self.nodes[p].planes.binary_search(idx).is_ok())
                {
                    return clause(format!("vertex {u}: planes not a subset of the parent"));
                }
                // (ii) fixed coordinates inside explored-ancestors plus own set
                let allowed = self.path_explored(p).union(node.coords);
                for &idx in &node.planes {
                    if !self.planes[idx].fixed_coords().is_subset(allowed) {
                        return clause(format!(
                            "vertex {u}: plane {} fixes a coordinate outside {allowed}",
                            self.planes[idx]
                        ));
                    }
                }
                // (iii) anchored at one element of the parent's coordinate
                let anchor = node.anchor.ok_or_else(|| {
                    Error::CertificateViolation(format!("vertex {u}: missing anchor"))
                })?;
                let pc = self.nodes[p].explored;
                for &idx in &node.planes {
                    match self.planes[idx].constraint(pc) {
                        Constraint::Free => {}
                        Constraint::Fixed(v) if v == anchor => {}
                        Constraint::Fixed(v) => {
                            return clause(format!(
                                "vertex {u}: plane value {v} off the anchor {anchor}"
                            ))
                        }
                    }
                }
            }
            // (b)/(c) the verdict certificate
            let mut rest = node.coords;
            rest.remove(node.explored);
            match &node.verdict {
                NodeVerdict::Good { frame } => {
                    let needed = (1.0 - self.params.eps)
                        * (self.space.size(node.explored) as f64 - 1.0);
                    if (frame.len() as f64) < needed {
                        return clause(format!(
                            "vertex {u}: good set of {} planes, needs {needed}",
                            frame.len()
                        ));
                    }
                    for &idx in frame {
                        if !node.planes.contains(&idx) {
                            return clause(format!(
                                "vertex {u}: frame plane outside the vertex"
                            ));
                        }
                        let h = &self.planes[idx];
                        if !h.fixed_coords().contains(node.explored) {
                            return clause(format!(
                                "vertex {u}: frame plane {h} misses its coordinate"
                            ));
                        }
                        if h.ln_measure(&self.space, rest) <= self.params.ln_delta {
                            return clause(format!(
                                "vertex {u}: frame plane {h} below the density threshold"
                            ));
                        }
                    }
                    if node.children.is_empty()
                        && node.planes.len() as u64 != self.space.size(node.explored)
                    {
                        return clause(format!("vertex {u}: leaf without all singletons"));
                    }
                }
                NodeVerdict::Bad { garbage } => {
                    let mut weight = 0.0f64;
                    for &idx in garbage {
                        if !node.planes.contains(&idx) {
                            return clause(format!(
                                "vertex {u}: garbage plane outside the vertex"
                            ));
                        }
                        let h = &self.planes[idx];
                        let in_set = h.fixed_coords().intersection(node.coords);
                        if !h.fixed_coords().contains(node.explored) || in_set.len() < 2 {
                            return clause(format!(
                                "vertex {u}: garbage plane {h} fails the shape conditions"
                            ));
                        }
                        weight += (-(in_set.len() as f64) / 4.0).exp2();
                    }
                    let needed = self.space.size(node.explored) as f64 / self.params.lambda;
                    if weight < needed {
                        return clause(format!(
                            "vertex {u}: garbage weight {weight} below {needed}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Depth-first preorder, children in stored (ascending anchor) order.
    pub fn dfs_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(u) = stack.pop() {
            out.push(u);
            for &c in self.nodes[u].children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }
}

/// A vertex of the extracted sub-tree.
#[derive(Debug, Clone)]
pub struct FrameVertex {
    /// Index of the originating exploration-tree vertex.
    pub source: usize,
    /// The coordinate explored there.
    pub coordinate: usize,
    /// Fixed-coordinate set of the source vertex.
    pub coords: CoordSet,
    pub parent: Option<usize>,
    /// Label of the edge towards the parent.
    pub edge_label: Option<u64>,
}

/// The tree-frame: the union of root-paths of one chosen vertex per
/// coordinate, with per-coordinate layers and garbage sets.
#[derive(Debug, Clone)]
pub struct TreeFrame {
    pub space: ProductSpace,
    pub params: StructureParams,
    pub planes: Vec<Hyperplane>,
    /// Vertices in depth-first order; parents precede children.
    pub vertices: Vec<FrameVertex>,
    /// Coordinate -> vertex index.
    pub beta: Vec<usize>,
    /// Layers, trimmed to at most `|S_i| - 1` canonical-first planes.
    pub layers: Vec<Vec<usize>>,
    pub garbage: Vec<Vec<usize>>,
    /// Coordinates whose chosen vertex was bad.
    pub bad: CoordSet,
}

/// Extracts the tree-frame: the depth-first-minimal vertex per
/// coordinate, the union of their root paths, edge labels from the
/// anchors, and the layers of the good vertices.
pub fn extract_tree_frame(tree: &ExplorationTree) -> Result<TreeFrame> {
    let k = tree.space.dim();
    let dfs = tree.dfs_order();
    let mut beta_source = vec![usize::MAX; k];
    for &u in &dfs {
        let i = tree.nodes[u].explored;
        if beta_source[i] == usize::MAX {
            beta_source[i] = u;
        }
    }
    if let Some(i) = (0..k).find(|&i| beta_source[i] == usize::MAX) {
        return Err(Error::CertificateViolation(format!(
            "coordinate {i} never explored"
        )));
    }
    // union of the root paths
    let mut keep = vec![false; tree.nodes.len()];
    for &b in &beta_source {
        let mut cur = Some(b);
        while let Some(v) = cur {
            if keep[v] {
                break;
            }
            keep[v] = true;
            cur = tree.nodes[v].parent;
        }
    }
    // compact in DFS order so the restriction keeps its relative order
    let mut index = vec![usize::MAX; tree.nodes.len()];
    let mut vertices = Vec::new();
    for &u in &dfs {
        if !keep[u] {
            continue;
        }
        index[u] = vertices.len();
        let node = &tree.nodes[u];
        vertices.push(FrameVertex {
            source: u,
            coordinate: node.explored,
            coords: node.coords,
            parent: node.parent.map(|p| index[p]),
            edge_label: node.anchor,
        });
    }
    let beta: Vec<usize> = beta_source.iter().map(|&u| index[u]).collect();
    let mut layers = vec![Vec::new(); k];
    let mut garbage = vec![Vec::new(); k];
    let mut bad = CoordSet::EMPTY;
    for i in 0..k {
        match &tree.nodes[beta_source[i]].verdict {
            NodeVerdict::Good { frame } => {
                let mut sorted = frame.clone();
                sorted.sort_unstable();
                sorted.truncate(tree.space.size(i) as usize - 1);
                layers[i] = sorted;
            }
            NodeVerdict::Bad { garbage: g } => {
                let mut sorted = g.clone();
                sorted.sort_unstable();
                garbage[i] = sorted;
                bad.insert(i);
            }
        }
    }
    let tf = TreeFrame {
        space: tree.space.clone(),
        params: tree.params,
        planes: tree.planes.clone(),
        vertices,
        beta,
        layers,
        garbage,
        bad,
    };
    tf.validate()?;
    Ok(tf)
}

impl TreeFrame {
    fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = Some(b);
        while let Some(v) = cur {
            if v == a {
                return true;
            }
            cur = self.vertices[v].parent;
        }
        false
    }

    /// Coordinates explored on the path from the root to `v` inclusive.
    fn path_coords(&self, v: usize) -> CoordSet {
        let mut set = CoordSet::EMPTY;
        let mut cur = Some(v);
        while let Some(u) = cur {
            set.insert(self.vertices[u].coordinate);
            cur = self.vertices[u].parent;
        }
        set
    }

    /// The edge label of the step from the ancestor exploring `j`
    /// towards `v`.
    fn label_towards(&self, v: usize, j: usize) -> Option<u64> {
        let mut cur = v;
        loop {
            let parent = self.vertices[cur].parent?;
            if self.vertices[parent].coordinate == j {
                return self.vertices[cur].edge_label;
            }
            cur = parent;
        }
    }

    /// Validates every clause of the tree-frame definition together with
    /// the disjointness, path and volume properties of the extraction.
    pub fn validate(&self) -> Result<()> {
        let clause = |msg: String| Err(Error::CertificateViolation(msg));
        let k = self.space.dim();
        // distinct coordinates along root paths, edge labels in range
        for (v, vert) in self.vertices.iter().enumerate() {
            if let Some(p) = vert.parent {
                if p >= v {
                    return clause("vertices must be parent-first".into());
                }
                let label = vert
                    .edge_label
                    .ok_or_else(|| Error::CertificateViolation("edge without label".into()))?;
                if label >= self.space.size(self.vertices[p].coordinate) {
                    return clause(format!("edge label {label} out of range"));
                }
                let mut cur = Some(p);
                while let Some(u) = cur {
                    if self.vertices[u].coordinate == vert.coordinate {
                        return clause(format!(
                            "coordinate {} repeats along a root path",
                            vert.coordinate
                        ));
                    }
                    cur = self.vertices[u].parent;
                }
            }
        }
        for (i, &b) in self.beta.iter().enumerate() {
            if self.vertices[b].coordinate != i {
                return clause(format!("chosen vertex of coordinate {i} explores another"));
            }
        }
        // ordering condition: positions of the chosen vertices give a
        // permutation whose prefixes absorb each root path
        let mut pi: Vec<usize> = (0..k).collect();
        pi.sort_by_key(|&i| self.beta[i]);
        let mut placed = CoordSet::EMPTY;
        for &i in &pi {
            placed.insert(i);
            let path = self.path_coords(self.beta[i]);
            if !path.is_subset(placed) {
                return clause(format!(
                    "path coordinates of {i} escape the ordering prefix"
                ));
            }
        }
        // layer clauses
        for i in 0..k {
            if self.layers[i].len() as u64 > self.space.size(i) - 1 {
                return clause(format!("layer {i} exceeds its size bound"));
            }
            if !self.layers[i].is_empty() && self.bad.contains(i) {
                return clause(format!("bad coordinate {i} carries a layer"));
            }
            let path = self.path_coords(self.beta[i]);
            let scope = self.space.all_coords().difference(path);
            for &idx in &self.layers[i] {
                let h = &self.planes[idx];
                if !h.fixed_coords().contains(i) {
                    return clause(format!("layer plane {h} misses coordinate {i}"));
                }
                if h.ln_measure(&self.space, scope) <= self.params.ln_delta {
                    return clause(format!("layer plane {h} below the density threshold"));
                }
                for j in path.iter() {
                    if j == i {
                        continue;
                    }
                    let anchor = self.label_towards(self.beta[i], j).ok_or_else(|| {
                        Error::CertificateViolation(format!(
                            "missing edge label for coordinate {j}"
                        ))
                    })?;
                    match h.constraint(j) {
                        Constraint::Free => {}
                        Constraint::Fixed(v) if v == anchor => {}
                        Constraint::Fixed(v) => {
                            return clause(format!(
                                "layer plane {h} fixes {j} to {v}, edge label is {anchor}"
                            ))
                        }
                    }
                }
            }
        }
        // disjointness of layers at large coordinates
        let large: Vec<bool> = (0..k)
            .map(|i| (self.space.size(i) as f64).ln() >= -self.params.ln_delta)
            .collect();
        for i in 0..k {
            for j in i + 1..k {
                if large[i]
                    && large[j]
                    && self.layers[i].iter().any(|x| self.layers[j].contains(x))
                {
                    return clause(format!("layers {i} and {j} intersect"));
                }
            }
        }
        // shared garbage planes force comparable vertices with distinct
        // in-set fixed counts
        for i in 0..k {
            for j in i + 1..k {
                for &idx in &self.garbage[i] {
                    if !self.garbage[j].contains(&idx) {
                        continue;
                    }
                    let (bi, bj) = (self.beta[i], self.beta[j]);
                    if !self.is_ancestor(bi, bj) && !self.is_ancestor(bj, bi) {
                        return clause(format!(
                            "garbage plane shared by incomparable vertices {i}, {j}"
                        ));
                    }
                    let fixed = self.planes[idx].fixed_coords();
                    if fixed.intersection(self.vertices[bi].coords).len()
                        == fixed.intersection(self.vertices[bj].coords).len()
                    {
                        return clause(format!(
                            "garbage plane keeps its fixed count from {i} to {j}"
                        ));
                    }
                }
            }
        }
        if !self.bad.is_empty() {
            // per-plane contribution across bad coordinates stays below 5
            let mut pooled: std::collections::HashMap<usize, f64> = Default::default();
            for i in self.bad.iter() {
                for &idx in &self.garbage[i] {
                    let in_set = self.planes[idx]
                        .fixed_coords()
                        .intersection(self.vertices[self.beta[i]].coords)
                        .len();
                    *pooled.entry(idx).or_insert(0.0) += (-(in_set as f64) / 4.0).exp2();
                }
            }
            if let Some((&idx, &w)) = pooled.iter().find(|(_, &w)| w >= 5.0) {
                return clause(format!(
                    "plane {} contributes {w} across bad coordinates",
                    self.planes[idx]
                ));
            }
            let union: std::collections::HashSet<usize> = self
                .bad
                .iter()
                .flat_map(|i| self.garbage[i].iter().copied())
                .collect();
            let needed = self
                .bad
                .iter()
                .map(|i| self.space.size(i) as f64)
                .sum::<f64>()
                / (5.0 * self.params.lambda);
            if (union.len() as f64) < needed {
                return clause(format!(
                    "garbage union of {} planes below the volume bound {needed}",
                    union.len()
                ));
            }
        }
        Ok(())
    }

    pub fn total_layer_size(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Reads the tree-frame as a generalized frame: the ordering is the
    /// depth-first restriction to the chosen vertices, scopes exclude
    /// the path coordinates, anchors are the edge labels.
    pub fn to_generalized_frame(&self) -> GeneralizedFrame {
        let k = self.space.dim();
        let mut pi: Vec<usize> = (0..k).collect();
        pi.sort_by_key(|&i| self.beta[i]);
        let mut scopes = vec![CoordSet::EMPTY; k];
        let mut anchors = vec![vec![None; k]; k];
        let mut layers = vec![Vec::new(); k];
        for i in 0..k {
            let path = self.path_coords(self.beta[i]);
            scopes[i] = self.space.all_coords().difference(path);
            for j in path.iter() {
                if j != i {
                    anchors[i][j] = self.label_towards(self.beta[i], j);
                }
            }
            layers[i] = self.layers[i]
                .iter()
                .map(|&idx| self.planes[idx].clone())
                .collect();
        }
        GeneralizedFrame {
            space: self.space.clone(),
            layers,
            ln_delta: self.params.ln_delta,
            data: Some(FrameOrderData {
                order: pi,
                scopes,
                anchors,
            }),
        }
    }
}

/// Per-coordinate weighted sums of restricted plane masses, with exact
/// mass bookkeeping and the per-plane density-hypothesis check.
#[derive(Debug, Clone)]
pub struct WeightReport {
    /// Exact restricted mass per plane (zero when the plane misses the
    /// restricted set).
    pub masses: Vec<BigRational>,
    /// Per coordinate: the weighted sum over incident planes.
    pub sums: Vec<f64>,
    /// Coordinates whose sum reaches `eta/2`.
    pub heavy: Vec<usize>,
    /// Per (plane, fixed coordinate): whether the density hypothesis
    /// held and whether the mass conclusion held.
    pub mass_checks: Vec<MassCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MassCheck {
    pub plane: usize,
    pub coord: usize,
    pub hypothesis: bool,
    pub conclusion: bool,
}

/// Evaluates the per-coordinate weighted sums of `e^{eta |F(H)|}` times
/// the uniform mass of each plane on the restricted product set, and
/// checks the mass bound for every plane-coordinate pair whose density
/// hypothesis holds.
pub fn weight_report(
    space: &ProductSpace,
    planes: &[Hyperplane],
    restricted: &[Vec<u64>],
    params: &StructureParams,
) -> Result<WeightReport> {
    let k = space.dim();
    if restricted.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: restricted.len(),
        });
    }
    for (i, r) in restricted.iter().enumerate() {
        if r.len() < 2 {
            return Err(Error::RestrictedSetTooSmall {
                coord: i,
                len: r.len(),
            });
        }
        for &v in r {
            if v >= space.size(i) {
                return Err(Error::ValueOutOfRange {
                    coord: i,
                    value: v,
                    size: space.size(i),
                });
            }
        }
    }
    let ln_hypothesis = mass_hypothesis_ln_bound(params.lambda, params.eps);
    let mut masses = Vec::with_capacity(planes.len());
    let mut sums = vec![0.0f64; k];
    let mut mass_checks = Vec::new();
    for (idx, h) in planes.iter().enumerate() {
        h.check(space)?;
        let fixed = h.fixed_coords();
        let mut mass = BigRational::one();
        for j in fixed.iter() {
            let v = h.constraint(j).fixed_value().unwrap();
            if restricted[j].contains(&v) {
                mass *= BigRational::new(BigInt::one(), BigInt::from(restricted[j].len()));
            } else {
                mass = BigRational::zero();
                break;
            }
        }
        let mass_f = mass.to_f64().unwrap_or(0.0);
        if mass_f > 0.0 {
            let w = (params.eta * fixed.len() as f64).exp() * mass_f;
            for j in fixed.iter() {
                sums[j] += w;
            }
        }
        for i in fixed.iter() {
            let mut rest = space.all_coords();
            rest.remove(i);
            let hypothesis = h.ln_measure(space, rest) <= ln_hypothesis;
            let ln_mass = if mass_f > 0.0 {
                fixed
                    .iter()
                    .map(|j| -(restricted[j].len() as f64).ln())
                    .sum::<f64>()
            } else {
                f64::NEG_INFINITY
            };
            let ln_bound = params.lambda.ln()
                - (fixed.len() as f64 / 2.0 + 4.0) * std::f64::consts::LN_2
                - (space.size(i) as f64).ln();
            mass_checks.push(MassCheck {
                plane: idx,
                coord: i,
                hypothesis,
                conclusion: ln_mass <= ln_bound,
            });
        }
        masses.push(mass);
    }
    let heavy = (0..k).filter(|&i| sums[i] >= params.eta / 2.0).collect();
    Ok(WeightReport {
        masses,
        sums,
        heavy,
        mass_checks,
    })
}

/// Statistics of the randomized mass-bound check.
#[derive(Debug, Clone, Copy)]
pub struct MassBoundStats {
    pub samples: usize,
    pub violations: usize,
}

/// Samples random (plane, restricted sets, lambda, eps) tuples built to
/// satisfy the density hypothesis and checks the mass conclusion on
/// each. Sizes and memberships are randomized; fixed coordinates are
/// appended until the hypothesis threshold is crossed.
pub fn sample_mass_bound(seed: u64, samples: usize) -> MassBoundStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    for _ in 0..samples {
        let lambda: f64 = rng.gen_range(0.05..0.95);
        let eps: f64 = rng.gen_range(0.05..0.95);
        let ln_hyp = mass_hypothesis_ln_bound(lambda, eps);
        // the distinguished coordinate
        let size_i: u64 = rng.gen_range(2..=50);
        let r_min = ((eps * (size_i as f64 - 1.0) + 1.0).ceil() as u64).min(size_i);
        let r_i: u64 = rng.gen_range(r_min..=size_i);
        let member_i = rng.gen_range(0..size_i) < r_i;
        let mut r_sizes: Vec<u64> = vec![r_i];
        let mut members: Vec<bool> = vec![member_i];
        // append fixed coordinates until the density hypothesis holds
        let mut ln_measure_rest = 0.0f64;
        while ln_measure_rest > ln_hyp {
            let size: u64 = rng.gen_range(2..=1000);
            let lo = ((eps * (size as f64 - 1.0) + 1.0).ceil() as u64).min(size);
            let r: u64 = rng.gen_range(lo..=size);
            ln_measure_rest -= (size as f64).ln();
            r_sizes.push(r);
            members.push(rng.gen_range(0..size) < r);
        }
        // a few extra coordinates beyond the threshold
        for _ in 0..rng.gen_range(0..3u32) {
            let size: u64 = rng.gen_range(2..=1000);
            let lo = ((eps * (size as f64 - 1.0) + 1.0).ceil() as u64).min(size);
            let r: u64 = rng.gen_range(lo..=size);
            r_sizes.push(r);
            members.push(rng.gen_range(0..size) < r);
        }
        let ell = r_sizes.len();
        let ln_mass = if members.iter().all(|&m| m) {
            -r_sizes.iter().map(|&r| (r as f64).ln()).sum::<f64>()
        } else {
            f64::NEG_INFINITY
        };
        let ln_bound = lambda.ln()
            - (ell as f64 / 2.0 + 4.0) * std::f64::consts::LN_2
            - (size_i as f64).ln();
        if ln_mass > ln_bound {
            violations += 1;
        }
    }
    MassBoundStats {
        samples,
        violations,
    }
}

/// Runs the full pipeline: exploration, extraction, conversion.
pub fn explore_and_extract(
    system: &CoverSystem,
    params: &StructureParams,
) -> Result<(ExplorationTree, TreeFrame, GeneralizedFrame)> {
    let tree = build_exploration_tree(system, params)?;
    let tf = extract_tree_frame(&tree)?;
    let gf = tf.to_generalized_frame();
    Ok((tree, tf, gf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::Progression;

    fn plane(spec: &[i64]) -> Hyperplane {
        Hyperplane::new(
            spec.iter()
                .map(|&v| {
                    if v < 0 {
                        Constraint::Free
                    } else {
                        Constraint::Fixed(v as u64)
                    }
                })
                .collect(),
        )
    }

    fn strict_params() -> StructureParams {
        StructureParams::strict(4.0, 0.5).unwrap()
    }

    #[test]
    fn strict_delta_scale() {
        let p = strict_params();
        assert!((p.lambda - 1.0 / 128.0).abs() < 1e-15);
        // delta = 2^-82
        assert!((p.ln_delta - (-82.0 * std::f64::consts::LN_2)).abs() < 1e-9);
        assert_eq!(p.eps, 0.25);
        assert_eq!(p.eps_target, 0.5);
    }

    #[test]
    fn one_step_singleton_cover() {
        // k = 1, all p singletons: every element special, first case
        let space = ProductSpace::new(vec![5]).unwrap();
        let planes: Vec<Hyperplane> = (0..5).map(|v| plane(&[v])).collect();
        let out = one_step(&space, &planes, &strict_params()).unwrap();
        assert_eq!(out.coord, 0);
        match out.verdict {
            StepVerdict::Good { frame } => assert_eq!(frame.len(), 5),
            v => panic!("expected good verdict, got {v:?}"),
        }
        assert!(out.children.is_empty());
    }

    #[test]
    fn one_step_on_frame_cover() {
        // the Z_6 frame cover as hyperplanes over (2,3)
        let progs: Vec<Progression> = [(0u64, 6u64), (1, 2), (1, 3), (2, 3)]
            .iter()
            .map(|&(a, d)| Progression::from_pair(a, d).unwrap())
            .collect();
        let sys = CoverSystem::from_progressions(&progs).unwrap();
        let out = one_step(sys.space(), sys.planes(), &strict_params()).unwrap();
        assert_eq!(out.coord, 0);
        match &out.verdict {
            StepVerdict::Good { frame } => {
                // witnesses at s = 0 (the axis plane) and s = 1 (1 mod 2)
                assert_eq!(frame.len(), 2);
                let as_text: Vec<String> =
                    frame.iter().map(|&t| sys.planes()[t].to_string()).collect();
                assert!(as_text.contains(&"[1,*]".to_string()));
            }
            v => panic!("expected good verdict, got {v:?}"),
        }
    }

    #[test]
    fn engineered_bad_case() {
        // every plane fixes two of three coordinates; with delta = 0.6
        // nothing is special and the heavy coordinate collects all four
        let space = ProductSpace::new(vec![2, 2, 2]).unwrap();
        let planes = vec![
            plane(&[0, 0, -1]),
            plane(&[0, 1, -1]),
            plane(&[1, -1, 0]),
            plane(&[1, -1, 1]),
        ];
        let params = StructureParams::free(1.0, 0.5, 0.6).unwrap();
        let out = one_step(&space, &planes, &params).unwrap();
        assert_eq!(out.coord, 0);
        match out.verdict {
            StepVerdict::Bad { garbage } => {
                assert_eq!(garbage.len(), 4);
                let weight: f64 = garbage
                    .iter()
                    .map(|&t| (-(planes[t].fixed_coords().len() as f64) / 4.0).exp2())
                    .sum();
                assert!(weight >= space.size(0) as f64 / params.lambda);
            }
            v => panic!("expected bad verdict, got {v:?}"),
        }
    }

    #[test]
    fn free_mode_neither() {
        // same cover, but a lambda too demanding for the certificate
        let space = ProductSpace::new(vec![2, 2, 2]).unwrap();
        let planes = vec![
            plane(&[0, 0, -1]),
            plane(&[0, 1, -1]),
            plane(&[1, -1, 0]),
            plane(&[1, -1, 1]),
        ];
        let params = StructureParams::free(0.1, 0.5, 0.6).unwrap();
        let out = one_step(&space, &planes, &params).unwrap();
        assert_eq!(out.verdict, StepVerdict::Neither);
    }

    #[test]
    fn one_step_rejects_non_minimal() {
        let space = ProductSpace::new(vec![2]).unwrap();
        let planes = vec![plane(&[0]), plane(&[1]), plane(&[-1])];
        assert!(one_step(&space, &planes, &strict_params()).is_err());
    }

    fn z12_system() -> CoverSystem {
        let progs: Vec<Progression> = [(0u64, 2u64), (0, 3), (1, 4), (5, 6), (7, 12)]
            .iter()
            .map(|&(a, d)| Progression::from_pair(a, d).unwrap())
            .collect();
        CoverSystem::from_progressions(&progs).unwrap()
    }

    #[test]
    fn exploration_tree_on_z12() {
        let tree = build_exploration_tree(&z12_system(), &strict_params()).unwrap();
        tree.validate().unwrap();
        assert!(tree
            .nodes
            .iter()
            .all(|n| matches!(n.verdict, NodeVerdict::Good { .. })));
    }

    #[test]
    fn single_coordinate_tree() {
        let space = ProductSpace::new(vec![3]).unwrap();
        let planes: Vec<Hyperplane> = (0..3).map(|v| plane(&[v])).collect();
        let sys = CoverSystem::from_planes(space, planes).unwrap();
        let tree = build_exploration_tree(&sys, &strict_params()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        match &tree.nodes[0].verdict {
            NodeVerdict::Good { frame } => assert_eq!(frame.len(), 3),
            v => panic!("expected good root, got {v:?}"),
        }
    }

    #[test]
    fn pipeline_on_z12() {
        let (tree, tf, gf) = explore_and_extract(&z12_system(), &strict_params()).unwrap();
        assert!(tree.validate().is_ok());
        assert!(tf.bad.is_empty());
        let check = gf.verify();
        assert!(check.is_valid(), "{:?}", check.violation());
        let weight: u64 = tree.space.sizes().iter().map(|s| s - 1).sum();
        assert!(
            tf.total_layer_size() as f64 >= (1.0 - tree.params.eps_target) * weight as f64
        );
    }

    #[test]
    fn pipeline_on_diagonal_cover() {
        // {[0,*],[*,1],[1,0]} over (2,2)
        let space = ProductSpace::new(vec![2, 2]).unwrap();
        let planes = vec![plane(&[0, -1]), plane(&[-1, 1]), plane(&[1, 0])];
        let sys = CoverSystem::from_planes(space, planes).unwrap();
        let (_, tf, gf) = explore_and_extract(&sys, &strict_params()).unwrap();
        assert_eq!(tf.total_layer_size(), 2);
        assert!(gf.verify().is_valid());
    }

    #[test]
    fn weight_report_trivial_plane() {
        // a single all-free plane contributes nothing
        let space = ProductSpace::new(vec![2, 2]).unwrap();
        let planes = vec![Hyperplane::free(2)];
        let restricted = vec![vec![0, 1], vec![0, 1]];
        let report = weight_report(&space, &planes, &restricted, &strict_params()).unwrap();
        assert!(report.sums.iter().all(|&s| s == 0.0));
        assert!(report.heavy.is_empty());
        assert!(report.masses[0].is_one());
    }

    #[test]
    fn weight_report_matches_one_step_choice() {
        // on the engineered bad cover the heavy coordinate is 0
        let space = ProductSpace::new(vec![2, 2, 2]).unwrap();
        let planes = vec![
            plane(&[0, 0, -1]),
            plane(&[0, 1, -1]),
            plane(&[1, -1, 0]),
            plane(&[1, -1, 1]),
        ];
        let params = StructureParams::free(1.0, 0.5, 0.6).unwrap();
        let restricted = vec![vec![0, 1], vec![0, 1], vec![0, 1]];
        let report = weight_report(&space, &planes, &restricted, &params).unwrap();
        let argmax = (0..3)
            .max_by(|&a, &b| report.sums[a].partial_cmp(&report.sums[b]).unwrap())
            .unwrap();
        assert_eq!(argmax, 0);
        assert!(report.heavy.contains(&0));
        let out = one_step(&space, &planes, &params).unwrap();
        assert_eq!(out.coord, argmax);
    }

    #[test]
    fn mass_check_fires_on_thin_planes() {
        // a plane thin enough to satisfy the density hypothesis must
        // satisfy the mass conclusion at every incident coordinate
        let space = ProductSpace::new(vec![2, 13, 13, 13]).unwrap();
        let thin = plane(&[1, 5, 6, 7]);
        let wide = plane(&[1, -1, -1, -1]);
        let params = StructureParams::free(0.9, 0.9, 0.5).unwrap();
        let restricted: Vec<Vec<u64>> = space
            .sizes()
            .iter()
            .map(|&s| (0..s).collect())
            .collect();
        let report =
            weight_report(&space, &[thin, wide], &restricted, &params).unwrap();
        let thin_checks: Vec<&MassCheck> =
            report.mass_checks.iter().filter(|c| c.plane == 0).collect();
        assert_eq!(thin_checks.len(), 4);
        // seen from its small coordinate the plane is thin enough for
        // the hypothesis, and the conclusion follows
        let at_small = thin_checks.iter().find(|c| c.coord == 0).unwrap();
        assert!(at_small.hypothesis && at_small.conclusion);
        // wherever the hypothesis holds, the conclusion must
        assert!(report
            .mass_checks
            .iter()
            .all(|c| !c.hypothesis || c.conclusion));
        // the near-full plane never satisfies the hypothesis
        assert!(report
            .mass_checks
            .iter()
            .filter(|c| c.plane == 1)
            .all(|c| !c.hypothesis));
    }

    #[test]
    fn weight_report_rejects_small_sets() {
        let space = ProductSpace::new(vec![2, 2]).unwrap();
        let planes = vec![plane(&[0, -1])];
        let restricted = vec![vec![0], vec![0, 1]];
        assert!(weight_report(&space, &planes, &restricted, &strict_params()).is_err());
    }

    #[test]
    fn mass_bound_sampling_holds() {
        let stats = sample_mass_bound(7, 2000);
        assert_eq!(stats.violations, 0);
    }

    #[test]
    fn pipeline_through_a_bad_vertex() {
        // free mode on the paired cover: the root goes bad, its garbage
        // set feeds the volume bound, and the two good leaves still
        // deliver a valid generalized frame with an empty first layer
        let space = ProductSpace::new(vec![2, 2, 2]).unwrap();
        let planes = vec![
            plane(&[0, 0, -1]),
            plane(&[0, 1, -1]),
            plane(&[1, -1, 0]),
            plane(&[1, -1, 1]),
        ];
        let sys = CoverSystem::from_planes(space, planes).unwrap();
        let params = StructureParams::free(1.0, 0.5, 0.6).unwrap();
        let (tree, tf, gf) = explore_and_extract(&sys, &params).unwrap();
        assert!(matches!(tree.nodes[0].verdict, NodeVerdict::Bad { .. }));
        assert_eq!(tf.bad.to_vec(), vec![0]);
        assert!(tf.layers[0].is_empty() && !tf.garbage[0].is_empty());
        assert!(tf.validate().is_ok());
        let check = gf.verify();
        assert!(check.is_valid(), "{:?}", check.violation());
        assert_eq!(gf.total_layer_size(), 2);
    }

    #[test]
    fn bad_verdict_exists_among_small_covers() {
        // exhaustive search over the minimal covers of (2,2,2): with the
        // relaxed parameters some cover must reach the garbage case, and
        // every such verdict must carry a valid certificate
        let space = ProductSpace::new(vec![2, 2, 2]).unwrap();
        let covers = crate::census::enumerate_minimal_hyperplane_covers(
            &space,
            crate::census::HyperplaneFilter {
                require_full_fixed: true,
                max_size: None,
            },
        )
        .unwrap();
        let params = StructureParams::free(1.0, 0.5, 0.6).unwrap();
        let mut bad_found = 0usize;
        for cover in &covers {
            let out = one_step(cover.space(), cover.planes(), &params).unwrap();
            if let StepVerdict::Bad { garbage } = &out.verdict {
                bad_found += 1;
                let weight: f64 = garbage
                    .iter()
                    .map(|&t| {
                        (-(cover.planes()[t].fixed_coords().len() as f64) / 4.0).exp2()
                    })
                    .sum();
                assert!(weight >= space.size(out.coord) as f64 / params.lambda);
                for &t in garbage {
                    let fixed = cover.planes()[t].fixed_coords();
                    assert!(fixed.contains(out.coord) && fixed.len() >= 2);
                }
            }
        }
        assert!(bad_found > 0, "no garbage case among {} covers", covers.len());
    }
}
