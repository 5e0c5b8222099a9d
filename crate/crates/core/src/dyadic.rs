//! Dyadic cube systems: shifted Euclidean grids and greedy-net cubes on
//! arbitrary spaces, together with axiom, adjacency and boundary checks.
//!
//! Scales grow with size: a cube of scale `k` is comparable to a ball of
//! radius `kappa^k`, and `D_{k+1}` is coarser than `D_k`.

use crate::error::{invalid, Error, Result};
use crate::space::{BallQuery, Space, SpaceKind};
use crate::stats::fit_loglog;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Cubes with more members than this get an approximate diameter.
pub const EXACT_DIAMETER_LIMIT: usize = 4096;

pub const CUBES_DOC_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub id: usize,
    pub scale: i32,
    /// Member point ids in increasing order.
    pub members: Vec<usize>,
    pub center: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub diameter: f64,
    pub measure: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiameterMethod {
    Exact,
    DoubleSweep,
}

/// A finite dyadic system over the scales `k_min..=k_max`.
#[derive(Clone, Debug)]
pub struct CubeSystem {
    space: Arc<Space>,
    kappa: f64,
    k_min: i32,
    k_max: i32,
    cubes: Vec<Cube>,
    by_scale: Vec<Vec<usize>>,
    assignment: Vec<Vec<usize>>,
    a0: f64,
    c1: f64,
    diameter_method: DiameterMethod,
    label: String,
}

fn diameter_of(space: &Space, members: &[usize], center: usize) -> (f64, DiameterMethod) {
    if members.len() <= EXACT_DIAMETER_LIMIT {
        let mut d = 0.0f64;
        for (i, &x) in members.iter().enumerate() {
            for &y in &members[i + 1..] {
                d = d.max(space.dist(x, y));
            }
        }
        (d, DiameterMethod::Exact)
    } else {
        let far = *members
            .iter()
            .max_by(|&&a, &&b| space.dist(center, a).total_cmp(&space.dist(center, b)))
            .unwrap();
        let d = members.iter().map(|&y| space.dist(far, y)).fold(0.0, f64::max);
        (d, DiameterMethod::DoubleSweep)
    }
}

impl CubeSystem {
    /// Builds a system from explicit partitions, finest scale first. Each
    /// partition is a list of `(center, members)`. No axiom is enforced; use
    /// [`verify_cube_axioms`] on the result. The point-to-cube index keeps the
    /// last cube listing a point, and a parent is the next-scale cube listing
    /// the child's center.
    pub fn from_partitions(
        space: Arc<Space>,
        kappa: f64,
        k_min: i32,
        partitions: Vec<Vec<(usize, Vec<usize>)>>,
        label: &str,
    ) -> Result<Self> {
        if !(kappa > 1.0 && kappa.is_finite()) {
            return invalid("kappa must exceed 1");
        }
        if partitions.is_empty() {
            return invalid("scale range is empty");
        }
        let n = space.len();
        let mut cubes = Vec::new();
        let mut by_scale = Vec::with_capacity(partitions.len());
        let mut assignment = Vec::with_capacity(partitions.len());
        let mut method = DiameterMethod::Exact;
        for (s, part) in partitions.into_iter().enumerate() {
            let scale = k_min + s as i32;
            let mut ids = Vec::with_capacity(part.len());
            let mut assign = vec![usize::MAX; n];
            for (center, mut members) in part {
                members.sort_unstable();
                members.dedup();
                if members.is_empty() {
                    return Err(Error::Degenerate(format!("empty cube at scale {scale}")));
                }
                if center >= n || members.iter().any(|&m| m >= n) {
                    return invalid("cube refers to a point outside the space");
                }
                let id = cubes.len();
                for &m in &members {
                    assign[m] = id;
                }
                let measure = members.iter().map(|&m| space.weight(m)).sum();
                let (diameter, dm) = diameter_of(&space, &members, center);
                if dm == DiameterMethod::DoubleSweep {
                    method = dm;
                }
                cubes.push(Cube {
                    id,
                    scale,
                    members,
                    center,
                    parent: None,
                    children: Vec::new(),
                    diameter,
                    measure,
                });
                ids.push(id);
            }
            by_scale.push(ids);
            assignment.push(assign);
        }
        let k_max = k_min + by_scale.len() as i32 - 1;
        for s in 0..by_scale.len().saturating_sub(1) {
            for &id in &by_scale[s] {
                let c = cubes[id].center;
                let p = assignment[s + 1][c];
                if p != usize::MAX {
                    cubes[id].parent = Some(p);
                    cubes[p].children.push(id);
                }
            }
        }
        let mut sys = CubeSystem {
            space,
            kappa,
            k_min,
            k_max,
            cubes,
            by_scale,
            assignment,
            a0: 1.0,
            c1: 0.0,
            diameter_method: method,
            label: label.to_string(),
        };
        let (a0, c1) = sys.measure_constants();
        sys.a0 = a0;
        sys.c1 = c1;
        Ok(sys)
    }

    /// Inner and outer sandwich constants measured over all cubes.
    fn measure_constants(&self) -> (f64, f64) {
        let mut a0 = f64::INFINITY;
        let mut c1 = 0.0f64;
        let n = self.space.len();
        let mut inside = vec![false; n];
        for q in &self.cubes {
            let r = self.kappa.powi(q.scale);
            for &m in &q.members {
                inside[m] = true;
            }
            let outer = q.members.iter().map(|&m| self.space.dist(q.center, m)).fold(0.0, f64::max);
            c1 = c1.max(outer / r);
            if q.members.len() < n {
                let inner = (0..n)
                    .filter(|&y| !inside[y])
                    .map(|y| self.space.dist(q.center, y))
                    .fold(f64::INFINITY, f64::min);
                a0 = a0.min(inner / r);
            }
            for &m in &q.members {
                inside[m] = false;
            }
        }
        if !a0.is_finite() {
            a0 = 1.0;
        }
        (a0, c1)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<Space> {
        Arc::clone(&self.space)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn scales(&self) -> std::ops::RangeInclusive<i32> {
        self.k_min..=self.k_max
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn diameter_method(&self) -> DiameterMethod {
        self.diameter_method
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn cube(&self, id: usize) -> Result<&Cube> {
        self.cubes.get(id).ok_or(Error::UnknownCube(id))
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn check_scale(&self, k: i32) -> Result<()> {
        if k < self.k_min || k > self.k_max {
            return Err(Error::ScaleOutOfRange {
                scale: k,
                min: self.k_min,
                max: self.k_max,
            });
        }
        Ok(())
    }

    fn slot(&self, k: i32) -> usize {
        (k - self.k_min) as usize
    }

    /// Cube ids of scale `k`.
    pub fn cubes_at(&self, k: i32) -> &[usize] {
        &self.by_scale[self.slot(k)]
    }

    /// Point-to-cube index at scale `k`.
    pub fn assignment(&self, k: i32) -> &[usize] {
        &self.assignment[self.slot(k)]
    }

    /// The cube of scale `k` containing `x`.
    pub fn cube_of(&self, x: usize, k: i32) -> usize {
        self.assignment[self.slot(k)][x]
    }

    pub fn contains(&self, q: usize, x: usize) -> bool {
        let c = &self.cubes[q];
        self.cube_of(x, c.scale) == q
    }

    /// The ancestor of `q` at scale `k >= k(q)`.
    pub fn ancestor(&self, q: usize, k: i32) -> usize {
        let mut id = q;
        while self.cubes[id].scale < k {
            match self.cubes[id].parent {
                Some(p) => id = p,
                None => break,
            }
        }
        id
    }

    /// Whether `inner ⊆ outer` as dyadic cubes, i.e. `outer` is `inner` or
    /// one of its ancestors.
    pub fn is_subcube(&self, inner: usize, outer: usize) -> bool {
        let ko = self.cubes[outer].scale;
        self.cubes[inner].scale <= ko && self.ancestor(inner, ko) == outer
    }

    /// All cubes contained in `q`, including `q`, finest first.
    pub fn descendants(&self, q: usize) -> Vec<usize> {
        let mut out = vec![q];
        let mut i = 0;
        while i < out.len() {
            let id = out[i];
            out.extend_from_slice(&self.cubes[id].children);
            i += 1;
        }
        out.sort_by_key(|&id| (self.cubes[id].scale, id));
        out
    }

    pub fn to_doc(&self) -> CubeSystemDoc {
        let scales = (self.k_min..=self.k_max)
            .map(|k| ScaleDoc {
                scale: k,
                assignment: self.assignment(k).to_vec(),
                cubes: self
                    .cubes_at(k)
                    .iter()
                    .map(|&id| {
                        let q = &self.cubes[id];
                        CubeDoc {
                            id,
                            center: q.center,
                            measure: q.measure,
                            diameter: q.diameter,
                            parent: q.parent,
                        }
                    })
                    .collect(),
            })
            .collect();
        CubeSystemDoc {
            version: CUBES_DOC_VERSION,
            label: self.label.clone(),
            kappa: self.kappa,
            k_min: self.k_min,
            k_max: self.k_max,
            a0: self.a0,
            c1: self.c1,
            diameter_method: self.diameter_method,
            scales,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc())?)
    }

    /// Rebuilds a system from its document and the space it was built on.
    pub fn from_doc(space: Arc<Space>, doc: &CubeSystemDoc) -> Result<Self> {
        if doc.version != CUBES_DOC_VERSION {
            return Err(Error::Serialization(format!("unsupported cube document version {}", doc.version)));
        }
        let mut partitions = Vec::new();
        let mut offset = 0usize;
        for sd in &doc.scales {
            if sd.assignment.len() != space.len() {
                return Err(Error::IncompatibleSpace("assignment length differs from the space".into()));
            }
            let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (x, &id) in sd.assignment.iter().enumerate() {
                members.entry(id).or_default().push(x);
            }
            let mut part = Vec::new();
            for c in &sd.cubes {
                let m = members.remove(&c.id).unwrap_or_default();
                part.push((c.center, m));
            }
            if !members.is_empty() {
                return Err(Error::Serialization("assignment names an undeclared cube".into()));
            }
            // Ids are dense and ordered by scale in documents we write.
            if sd.cubes.iter().enumerate().any(|(i, c)| c.id != offset + i) {
                return Err(Error::Serialization("cube ids are not dense".into()));
            }
            offset += sd.cubes.len();
            partitions.push(part);
        }
        Self::from_partitions(space, doc.kappa, doc.k_min, partitions, &doc.label)
    }

    pub fn from_json(space: Arc<Space>, s: &str) -> Result<Self> {
        let doc: CubeSystemDoc = serde_json::from_str(s)?;
        Self::from_doc(space, &doc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeDoc {
    pub id: usize,
    pub center: usize,
    pub measure: f64,
    pub diameter: f64,
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleDoc {
    pub scale: i32,
    pub assignment: Vec<usize>,
    pub cubes: Vec<CubeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeSystemDoc {
    pub version: u32,
    pub label: String,
    pub kappa: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub a0: f64,
    pub c1: f64,
    pub diameter_method: DiameterMethod,
    pub scales: Vec<ScaleDoc>,
}

fn sign(k: i32) -> i64 {
    if k.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// The interval `2^k ([0,1) + m + (-1)^k alpha/3)` of the shifted system
/// `alpha` at scale `k` (side length `2^k`).
pub fn shifted_cube_interval(alpha: u8, k: i32, m: i64) -> (f64, f64) {
    let side = 2f64.powi(k);
    let shift = sign(k) as f64 * alpha as f64 / 3.0;
    (side * (m as f64 + shift), side * (m as f64 + 1.0 + shift))
}

/// Index `m` of the shifted cube of scale `k` containing the coordinate `x`.
pub fn shifted_cube_index(alpha: u8, k: i32, x: f64) -> i64 {
    (x / 2f64.powi(k) - sign(k) as f64 * alpha as f64 / 3.0).floor() as i64
}

/// Builds the shifted system with shift vector `alpha` (one entry per axis).
pub fn build_shifted_grid(space: Arc<Space>, alpha: &[u8], scales: (i32, i32)) -> Result<CubeSystem> {
    if space.kind() != SpaceKind::Euclidean {
        return Err(Error::IncompatibleSpace("shifted grids need a Euclidean space".into()));
    }
    let d = space.coordinate_dimension();
    if alpha.len() != d || alpha.iter().any(|&a| a > 2) {
        return invalid("alpha must have one entry in {0,1,2} per axis");
    }
    let (k_min, k_max) = scales;
    if k_min > k_max {
        return invalid("scale range is empty");
    }
    let n = space.len();
    // Finest indices from the formula; coarser ones by the exact recurrence
    // m' = floor((m + (-1)^k alpha) / 2), which keeps the nesting exact.
    let mut idx: Vec<[i64; 2]> = (0..n)
        .map(|x| {
            let c = space.coords(x);
            let mut m = [0i64; 2];
            for a in 0..d {
                m[a] = shifted_cube_index(alpha[a], k_min, c[a]);
            }
            m
        })
        .collect();
    let mut partitions = Vec::new();
    for k in k_min..=k_max {
        if k > k_min {
            let s = sign(k - 1);
            for m in idx.iter_mut() {
                for a in 0..d {
                    m[a] = (m[a] + s * alpha[a] as i64).div_euclid(2);
                }
            }
        }
        let mut groups: BTreeMap<[i64; 2], Vec<usize>> = BTreeMap::new();
        for (x, m) in idx.iter().enumerate() {
            groups.entry([m[1], m[0]]).or_default().push(x);
        }
        let part = groups
            .into_values()
            .map(|members| (hull_center(&space, &members), members))
            .collect();
        partitions.push(part);
    }
    let label = format!(
        "shifted:{}",
        alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    );
    CubeSystem::from_partitions(space, 2.0, k_min, partitions, &label)
}

/// Member closest to the midpoint of the members' coordinate box.
fn hull_center(space: &Space, members: &[usize]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &m in members {
        let c = space.coords(m);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let mut best = members[0];
    let mut bd = f64::INFINITY;
    for &m in members {
        let c = space.coords(m);
        let d: f64 = (0..3).map(|a| (c[a] - mid[a]).powi(2)).sum();
        if d < bd {
            bd = d;
            best = m;
        }
    }
    best
}

/// Member farthest from the complement (ties to the lowest id). Used as the
/// cube center, which maximizes the inner sandwich radius.
fn deepest_member(space: &Space, members: &[usize]) -> usize {
    let n = space.len();
    if members.len() == n {
        return members[0];
    }
    let mut inside = vec![false; n];
    for &m in members {
        inside[m] = true;
    }
    let outside: Vec<usize> = (0..n).filter(|&y| !inside[y]).collect();
    let mut best = members[0];
    let mut best_gap = -1.0f64;
    for &m in members {
        let mut gap = f64::INFINITY;
        for &y in &outside {
            let d = space.dist(m, y);
            if d < gap {
                gap = d;
                if gap <= best_gap {
                    break;
                }
            }
        }
        if gap > best_gap {
            best_gap = gap;
            best = m;
        }
    }
    best
}

/// All `3^D` shifted systems, ordered with the first axis varying fastest.
pub fn build_shifted_grids(space: Arc<Space>, scales: (i32, i32)) -> Result<Vec<CubeSystem>> {
    if space.kind() != SpaceKind::Euclidean {
        return Err(Error::IncompatibleSpace("shifted grids need a Euclidean space".into()));
    }
    let d = space.coordinate_dimension();
    let count = 3usize.pow(d as u32);
    (0..count)
        .map(|i| {
            let alpha: Vec<u8> = (0..d).map(|a| ((i / 3usize.pow(a as u32)) % 3) as u8).collect();
            build_shifted_grid(Arc::clone(&space), &alpha, scales)
        })
        .collect()
}

/// Greedy-net cubes: nested maximal `kappa^k`-separated nets chosen coarse to
/// fine in a seeded order, nearest-center cells, then bottom-up nesting by
/// moving each finer cube wholesale into the cell of its center.
pub fn build_christ_cubes(space: Arc<Space>, kappa: f64, scales: (i32, i32), seed: u64) -> Result<CubeSystem> {
    if !(kappa > 1.0 && kappa.is_finite()) {
        return invalid("kappa must exceed 1");
    }
    let (k_min, k_max) = scales;
    if k_min > k_max {
        return invalid("scale range is empty");
    }
    let n = space.len();
    if n > 1 {
        if kappa.powi(k_max) > space.diameter() * (1.0 + 1e-12) {
            return invalid("kappa^k_max exceeds the diameter of the space");
        }
        if kappa.powi(k_min) < space.min_spacing() * (1.0 - 1e-12) {
            return invalid("kappa^k_min is below the minimal point spacing");
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let levels = (k_max - k_min + 1) as usize;
    // nets[s] is the net of scale k_min + s.
    let mut nets: Vec<Vec<usize>> = vec![Vec::new(); levels];
    let mut current: Vec<usize> = Vec::new();
    let mut is_center = vec![false; n];
    for s in (0..levels).rev() {
        let r = kappa.powi(k_min + s as i32);
        for &p in &order {
            if is_center[p] {
                continue;
            }
            if current.iter().all(|&c| space.dist(p, c) >= r) {
                current.push(p);
                is_center[p] = true;
            }
        }
        let mut net = current.clone();
        net.sort_unstable();
        nets[s] = net;
    }
    if n > 1 && nets[0].len() == 1 {
        return Err(Error::Degenerate("the finest net has a single point".into()));
    }

    // Preliminary cells: nearest center, ties to the lowest center id.
    let prelim: Vec<Vec<usize>> = nets
        .iter()
        .map(|net| {
            (0..n)
                .map(|x| {
                    let mut best = net[0];
                    let mut bd = space.dist(x, best);
                    for &c in &net[1..] {
                        let d = space.dist(x, c);
                        if d < bd {
                            bd = d;
                            best = c;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();

    let mut owner: Vec<usize> = prelim[0].clone();
    let mut partitions = Vec::with_capacity(levels);
    for s in 0..levels {
        if s > 0 {
            for o in owner.iter_mut() {
                *o = prelim[s][*o];
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (x, &c) in owner.iter().enumerate() {
            groups.entry(c).or_default().push(x);
        }
        let part = groups
            .into_values()
            .map(|members| (deepest_member(&space, &members), members))
            .collect::<Vec<_>>();
        partitions.push(part);
    }
    CubeSystem::from_partitions(space, kappa, k_min, partitions, &format!("christ:{seed}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub pass: bool,
    pub witness: Option<String>,
}

impl AxiomCheck {
    fn ok() -> Self {
        AxiomCheck { pass: true, witness: None }
    }

    fn fail(w: String) -> Self {
        AxiomCheck {
            pass: false,
            witness: Some(w),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub coverage: AxiomCheck,
    pub disjointness: AxiomCheck,
    pub nesting: AxiomCheck,
    pub sandwich: AxiomCheck,
    pub a0: f64,
    pub c1: f64,
    /// Largest relative deviation of `sum_Q mu(Q)` from `mu(X)` over scales.
    pub partition_error: f64,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.coverage.pass && self.disjointness.pass && self.nesting.pass && self.sandwich.pass
    }
}

/// Checks the four dyadic axioms from the cube member lists, independently
/// of the cached point-to-cube index.
pub fn verify_cube_axioms(system: &CubeSystem) -> AxiomReport {
    let space = system.space();
    let n = space.len();
    let total = space.total_measure();
    let mut coverage = AxiomCheck::ok();
    let mut disjointness = AxiomCheck::ok();
    let mut nesting = AxiomCheck::ok();
    let mut sandwich = AxiomCheck::ok();
    let mut partition_error = 0.0f64;
    let mut owner_by_scale: Vec<Vec<usize>> = Vec::new();
    for k in system.scales() {
        let mut owner = vec![usize::MAX; n];
        let mut sum = 0.0;
        for &id in system.cubes_at(k) {
            let q = &system.cubes()[id];
            sum += q.measure;
            for &m in &q.members {
                if owner[m] != usize::MAX && disjointness.pass {
                    disjointness = AxiomCheck::fail(format!(
                        "point {m} lies in cubes {} and {id} at scale {k}",
                        owner[m]
                    ));
                }
                owner[m] = id;
            }
        }
        if let Some(x) = owner.iter().position(|&o| o == usize::MAX) {
            if coverage.pass {
                coverage = AxiomCheck::fail(format!("point {x} is in no cube of scale {k}"));
            }
        }
        partition_error = partition_error.max(((sum - total) / total).abs());
        owner_by_scale.push(owner);
    }
    // Nesting: every member of a cube lies in one and the same cube of every
    // coarser scale.
    'outer: for q in system.cubes() {
        let s = (q.scale - system.k_min()) as usize;
        for (t, owner) in owner_by_scale.iter().enumerate().skip(s + 1) {
            let first = owner[q.members[0]];
            if let Some(&m) = q.members.iter().find(|&&m| owner[m] != first) {
                nesting = AxiomCheck::fail(format!(
                    "cube {} of scale {} meets cubes {} and {} of scale {}",
                    q.id,
                    q.scale,
                    first,
                    owner[m],
                    system.k_min() + t as i32
                ));
                break 'outer;
            }
        }
    }
    'sand: for q in system.cubes() {
        let r = system.kappa().powi(q.scale);
        let inner = system.a0() * r;
        let outer = system.c1() * r * (1.0 + 1e-12);
        let mut member = vec![false; 0];
        if q.members.len() < n {
            member = vec![false; n];
            for &m in &q.members {
                member[m] = true;
            }
        }
        for y in 0..n {
            let d = space.dist(q.center, y);
            let inside = member.is_empty() || member[y];
            if !inside && d < inner {
                sandwich = AxiomCheck::fail(format!(
                    "point {y} at distance {d} from the center of cube {} is outside it",
                    q.id
                ));
                break 'sand;
            }
            if inside && d > outer {
                sandwich = AxiomCheck::fail(format!(
                    "member {y} of cube {} is at distance {d} > C1 kappa^k",
                    q.id
                ));
                break 'sand;
            }
        }
    }
    AxiomReport {
        coverage,
        disjointness,
        nesting,
        sandwich,
        a0: system.a0(),
        c1: system.c1(),
        partition_error,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyHit {
    pub system: usize,
    pub cube: usize,
    /// `diam(Q) / r`.
    pub ratio: f64,
    /// `max_{y in Q} rho(x, y) / r`, the ratio in `Q ⊆ B(x, C r)`.
    pub center_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyReport {
    pub queries: usize,
    /// Worst `diam(Q) / r` over the queries.
    pub c3: f64,
    /// Worst `max_{y in Q} rho(x, y) / r` over the queries.
    pub c3_center: f64,
    pub worst_query: usize,
    pub hits: Vec<AdjacencyHit>,
}

/// For each ball, finds the smallest cube over all systems containing it.
pub fn check_adjacency(systems: &[CubeSystem], queries: &[BallQuery]) -> Result<AdjacencyReport> {
    if systems.is_empty() {
        return invalid("no systems given");
    }
    let first = &systems[0];
    if systems
        .iter()
        .any(|s| s.kappa() != first.kappa() || s.k_min() != first.k_min() || s.k_max() != first.k_max())
    {
        return invalid("systems must share kappa and scale range");
    }
    let space = first.space();
    let mut hits = Vec::with_capacity(queries.len());
    let (mut c3, mut c3c, mut worst) = (0.0f64, 0.0f64, 0usize);
    for (qi, b) in queries.iter().enumerate() {
        let ball = space.ball(b.center, b.radius);
        let mut best: Option<(f64, usize, usize)> = None;
        for (si, sys) in systems.iter().enumerate() {
            let same = |k: i32| {
                let a = sys.assignment(k);
                let c = a[ball[0]];
                ball.iter().all(|&y| a[y] == c)
            };
            if !same(sys.k_max()) {
                continue;
            }
            // Containment is monotone in the scale: binary search the finest.
            let (mut lo, mut hi) = (sys.k_min(), sys.k_max());
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if same(mid) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let id = sys.cube_of(ball[0], lo);
            let d = sys.cubes()[id].diameter;
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, si, id));
            }
        }
        let (d, si, id) = best.ok_or(Error::BallNotCovered { index: qi })?;
        let q = &systems[si].cubes()[id];
        let reach = q.members.iter().map(|&y| space.dist(b.center, y)).fold(0.0, f64::max);
        let hit = AdjacencyHit {
            system: si,
            cube: id,
            ratio: d / b.radius,
            center_ratio: reach / b.radius,
        };
        if hit.ratio > c3 {
            c3 = hit.ratio;
            worst = qi;
        }
        c3c = c3c.max(hit.center_ratio);
        hits.push(hit);
    }
    Ok(AdjacencyReport {
        queries: queries.len(),
        c3,
        c3_center: c3c,
        worst_query: worst,
        hits,
    })
}

/// What to measure the boundary collars of.
pub enum BoundaryTarget<'a> {
    System(&'a CubeSystem),
    Balls(&'a Space, &'a [BallQuery]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub tau: f64,
    /// Largest `mu(boundary) / mu(Q)` over the measured sets.
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub sets_measured: usize,
    pub rows: Vec<BoundaryRow>,
    /// Slope of `ln max_ratio` against `ln tau`.
    pub eta: f64,
    /// Smallest `C3` with `max_ratio <= C3 tau^eta` at every sampled tau.
    pub c3: f64,
    /// Whether the fitted exponent is positive.
    pub holds: bool,
}

/// Measures `mu(d_{tau diam Q} Q) / mu(Q)` with the closed collar
/// `{x in Q : dist(x, X \ Q) <= s} ∪ {x ∉ Q : dist(x, Q) <= s}`. Sets with
/// `tau_min diam(Q) < 2 min_spacing`, and sets equal to the whole space, are
/// skipped.
pub fn measure_small_boundary(target: BoundaryTarget<'_>, taus: &[f64]) -> Result<BoundaryReport> {
    if taus.is_empty() {
        return invalid("empty tau list");
    }
    if taus.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return invalid("tau must lie in (0, 1]");
    }
    let (space, sets): (&Space, Vec<(Vec<usize>, f64)>) = match target {
        BoundaryTarget::System(sys) => (
            sys.space(),
            sys.cubes().iter().map(|q| (q.members.clone(), q.diameter)).collect(),
        ),
        BoundaryTarget::Balls(space, balls) => (
            space,
            balls
                .iter()
                .map(|b| {
                    let m = space.ball(b.center, b.radius);
                    let (d, _) = diameter_of(space, &m, b.center);
                    (m, d)
                })
                .collect(),
        ),
    };
    let n = space.len();
    let tau_min = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let tau_max = taus.iter().cloned().fold(0.0, f64::max);
    let floor = 2.0 * space.min_spacing();
    let mut sums = vec![0.0; taus.len()];
    let mut maxes = vec![0.0f64; taus.len()];
    let mut count = 0;
    let mut inside = vec![false; n];
    for (members, diam) in &sets {
        if members.len() >= n || tau_min * diam < floor * (1.0 - 1e-12) {
            continue;
        }
        count += 1;
        for &m in members {
            inside[m] = true;
        }
        let reach = tau_max * diam;
        let mu: f64 = members.iter().map(|&m| space.weight(m)).sum();
        // Distance from every point to the other side, capped at the reach.
        let mut gap = vec![f64::INFINITY; n];
        for x in 0..n {
            let mut g = f64::INFINITY;
            for y in 0..n {
                if inside[y] != inside[x] {
                    let d = space.dist(x, y);
                    if d < g {
                        g = d;
                        if g == 0.0 {
                            break;
                        }
                    }
                }
            }
            if g <= reach {
                gap[x] = g;
            }
        }
        for (i, &t) in taus.iter().enumerate() {
            let s = t * diam;
            let b: f64 = (0..n).filter(|&x| gap[x] <= s).map(|x| space.weight(x)).sum();
            let ratio = b / mu;
            sums[i] += ratio;
            maxes[i] = maxes[i].max(ratio);
        }
        for &m in members {
            inside[m] = false;
        }
    }
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let rows: Vec<BoundaryRow> = taus
        .iter()
        .enumerate()
        .map(|(i, &tau)| BoundaryRow {
            tau,
            max_ratio: maxes[i],
            mean_ratio: sums[i] / count as f64,
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.tau, r.max_ratio)).collect();
    let eta = fit_loglog(&pts).map(|f| f.slope).unwrap_or(0.0);
    let c3 = rows
        .iter()
        .map(|r| r.max_ratio / r.tau.powf(eta))
        .fold(0.0, f64::max);
    Ok(BoundaryReport {
        sets_measured: count,
        rows,
        eta,
        c3,
        holds: eta > 0.0 && c3.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_euclidean_grid, build_heisenberg_grid};

    fn line(n: usize, h: f64) -> Arc<Space> {
        Arc::new(build_euclidean_grid(1, n, h).unwrap())
    }

    #[test]
    fn unshifted_unit_intervals() {
        assert_eq!(shifted_cube_interval(0, 0, 3), (3.0, 4.0));
        let sys = build_shifted_grid(line(8, 0.5), &[0], (0, 1)).unwrap();
        // Points 0, .5 share [0,1); points 1, 1.5 share [1,2).
        assert_eq!(sys.cube_of(0, 0), sys.cube_of(1, 0));
        assert_ne!(sys.cube_of(1, 0), sys.cube_of(2, 0));
    }

    #[test]
    fn shifted_interval_examples() {
        let (a, b) = shifted_cube_interval(1, -1, 0);
        assert!((a + 1.0 / 6.0).abs() < 1e-15 && (b - 1.0 / 3.0).abs() < 1e-15);
        for m in -3..3 {
            let (a, b) = shifted_cube_interval(1, -2, m);
            assert!((a - (m as f64 / 4.0 + 1.0 / 12.0)).abs() < 1e-15);
            assert!((b - (m as f64 / 4.0 + 1.0 / 3.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn shifted_assignment_matches_formula() {
        let space = line(96, 1.0 / 32.0);
        for sys in build_shifted_grids(Arc::clone(&space), (-5, 1)).unwrap() {
            let alpha: u8 = sys.label()[8..].parse().unwrap();
            for k in sys.scales() {
                for x in 0..space.len() {
                    let m = shifted_cube_index(alpha, k, space.coords(x)[0]);
                    let (a, b) = shifted_cube_interval(alpha, k, m);
                    let c = space.coords(x)[0];
                    assert!(a <= c && c < b);
                    // Points share a cube iff they share the formula index.
                    let y = (x + 1).min(space.len() - 1);
                    let my = shifted_cube_index(alpha, k, space.coords(y)[0]);
                    assert_eq!(m == my, sys.cube_of(x, k) == sys.cube_of(y, k));
                }
            }
            assert!(verify_cube_axioms(&sys).all_pass());
        }
    }

    #[test]
    fn shifted_2d_axioms() {
        let space = Arc::new(build_euclidean_grid(2, 12, 0.25).unwrap());
        let systems = build_shifted_grids(space, (-2, 1)).unwrap();
        assert_eq!(systems.len(), 9);
        for s in &systems {
            let r = verify_cube_axioms(s);
            assert!(r.all_pass(), "{r:?}");
            assert!(r.partition_error < 1e-12);
        }
    }

    #[test]
    fn shifted_requires_euclidean() {
        let h = Arc::new(build_heisenberg_grid(3, 1.0).unwrap());
        assert!(matches!(build_shifted_grids(h, (0, 1)), Err(Error::IncompatibleSpace(_))));
    }

    #[test]
    fn christ_single_point() {
        let space = Arc::new(Space::from_points(1, vec![[0.0; 3]], vec![1.0]).unwrap());
        let sys = build_christ_cubes(space, 2.0, (0, 3), 1).unwrap();
        assert_eq!(sys.len(), 4);
        for k in 0..3 {
            assert_eq!(sys.cubes()[k].parent, Some(k + 1));
        }
        assert!(verify_cube_axioms(&sys).all_pass());
    }

    #[test]
    fn christ_line_axioms_and_constants() {
        let space = line(64, 1.0);
        for seed in [1, 2] {
            let sys = build_christ_cubes(Arc::clone(&space), 2.0, (0, 5), seed).unwrap();
            let r = verify_cube_axioms(&sys);
            assert!(r.all_pass(), "{r:?}");
            assert!(r.partition_error < 1e-12);
            assert!(r.c1 <= 4.0, "{r:?}");
            assert!(r.a0 >= 0.25, "{r:?}");
        }
    }

    #[test]
    fn christ_rejects_bad_ranges() {
        let space = line(64, 1.0);
        assert!(build_christ_cubes(Arc::clone(&space), 2.0, (3, 2), 1).is_err());
        assert!(build_christ_cubes(Arc::clone(&space), 2.0, (0, 7), 1).is_err());
        assert!(build_christ_cubes(Arc::clone(&space), 2.0, (-1, 3), 1).is_err());
        assert!(build_christ_cubes(space, 1.0, (0, 3), 1).is_err());
    }

    #[test]
    fn injected_defects_are_reported() {
        let space = line(8, 1.0);
        let good = vec![
            vec![(1, vec![0, 1, 2, 3]), (5, vec![4, 5, 6, 7])],
            vec![(3, (0..8).collect())],
        ];
        let sys = CubeSystem::from_partitions(Arc::clone(&space), 2.0, 1, good.clone(), "t").unwrap();
        assert!(verify_cube_axioms(&sys).all_pass());

        let mut overlap = good.clone();
        overlap[0][1].1.push(3);
        let sys = CubeSystem::from_partitions(Arc::clone(&space), 2.0, 1, overlap, "t").unwrap();
        let r = verify_cube_axioms(&sys);
        assert!(!r.disjointness.pass && r.disjointness.witness.is_some());

        let mut hole = good;
        hole[0][0].1.retain(|&x| x != 3);
        let sys = CubeSystem::from_partitions(space, 2.0, 1, hole, "t").unwrap();
        let r = verify_cube_axioms(&sys);
        assert!(!r.coverage.pass);
    }

    #[test]
    fn single_chain_passes() {
        let space = line(4, 1.0);
        let parts = (0..3).map(|_| vec![(1, (0..4).collect())]).collect();
        let sys = CubeSystem::from_partitions(space, 2.0, 0, parts, "chain").unwrap();
        assert!(verify_cube_axioms(&sys).all_pass());
    }

    #[test]
    fn doc_round_trip() {
        let space = line(32, 1.0);
        let sys = build_christ_cubes(Arc::clone(&space), 2.0, (0, 4), 9).unwrap();
        let json = sys.to_json().unwrap();
        let back = CubeSystem::from_json(space, &json).unwrap();
        assert_eq!(back.cubes(), sys.cubes());
        assert_eq!(back.a0(), sys.a0());
    }

    #[test]
    fn three_shifts_cover_small_ball() {
        let space = line(1024, 1.0 / 1024.0);
        let systems = build_shifted_grids(Arc::clone(&space), (-10, 0)).unwrap();
        let q = BallQuery::new(512, 0.1).unwrap();
        let rep = check_adjacency(&systems, &[q]).unwrap();
        assert!(rep.c3 <= 6.0, "{rep:?}");
        let cube = &systems[rep.hits[0].system].cubes()[rep.hits[0].cube];
        assert!(cube.diameter <= 0.6);
    }

    #[test]
    fn sandwich_ball_is_covered_by_its_cube() {
        let space = line(256, 1.0);
        let sys = build_christ_cubes(Arc::clone(&space), 2.0, (0, 7), 3).unwrap();
        let q = sys.cubes_at(4).iter().map(|&id| &sys.cubes()[id]).nth(3).unwrap().clone();
        let r = 0.999 * sys.a0() * 16.0;
        let rep = check_adjacency(std::slice::from_ref(&sys), &[BallQuery::new(q.center, r).unwrap()]).unwrap();
        assert!(rep.c3 <= 2.0 * sys.c1() / sys.a0() / 0.999, "{rep:?}");
    }

    #[test]
    fn straddling_ball_is_rejected() {
        let space = line(64, 1.0);
        let sys = build_shifted_grid(space, &[0], (0, 3)).unwrap();
        let q = BallQuery::new(8, 2.0).unwrap();
        assert!(matches!(check_adjacency(&[sys], &[q]), Err(Error::BallNotCovered { index: 0 })));
    }

    #[test]
    fn interval_boundary_collar() {
        let space = build_euclidean_grid(1, 2001, 0.001).unwrap();
        let ball = [BallQuery::new(1000, 0.5).unwrap()];
        let taus: Vec<f64> = (0..6).map(|i| 0.02 * 10f64.powf(i as f64 / 5.0)).collect();
        let rep = measure_small_boundary(BoundaryTarget::Balls(&space, &ball), &taus).unwrap();
        assert!((rep.eta - 1.0).abs() < 0.15, "{rep:?}");
        let at = measure_small_boundary(BoundaryTarget::Balls(&space, &ball), &[0.1]).unwrap();
        // Two strips inside plus two outside, each of width 0.1 * diam.
        assert!((at.rows[0].max_ratio - 0.4).abs() < 0.01, "{at:?}");
        let full = measure_small_boundary(BoundaryTarget::Balls(&space, &ball), &[1.0]).unwrap();
        assert!(full.rows[0].max_ratio >= 1.0);
        assert!(measure_small_boundary(BoundaryTarget::Balls(&space, &ball), &[]).is_err());
    }

    #[test]
    fn christ_2d_boundary_exponent() {
        let space = Arc::new(build_euclidean_grid(2, 24, 1.0).unwrap());
        let sys = build_christ_cubes(space, 2.0, (0, 4), 7).unwrap();
        let rep = measure_small_boundary(BoundaryTarget::System(&sys), &[0.25, 0.5, 1.0]).unwrap();
        assert!(rep.eta > 0.0, "{rep:?}");
    }
}
