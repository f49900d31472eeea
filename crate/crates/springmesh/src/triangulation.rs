//! Delaunay triangulation in 2-D and tetrahedralization in 3-D.
//!
//! Incremental Bowyer-Watson insertion with exact adaptive predicates. The
//! convex hull is closed by "ghost" simplices sharing a symbolic vertex at
//! infinity, so cavity carving works uniformly for points inside and
//! outside the current hull. Insertion order is a deterministic shuffle
//! derived from a fixed seed.

use crate::error::{MeshError, Result};
use crate::geom;
use crate::params::DomainShape;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Symbolic vertex at infinity closing the hull.
const GHOST: usize = usize::MAX;
/// Filler for unused slots when dim == 2.
const PAD: usize = usize::MAX - 1;

const SHUFFLE_SEED: u64 = 0x5eed_0d31;

#[derive(Clone, Debug)]
pub struct TriangulationResult {
    pub dim: usize,
    /// Positively-oriented simplices, flat, `dim + 1` ids each, in canonical
    /// sorted order.
    pub elements: Vec<usize>,
    /// Hull facets, flat, `dim` ids each, outward-oriented.
    pub hull: Vec<usize>,
}

impl TriangulationResult {
    pub fn element_count(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }
}

struct Triangulator<'a> {
    dim: usize,
    pts: &'a [f64],
    verts: Vec<[usize; 4]>,
    adj: Vec<[usize; 4]>,
    alive: Vec<bool>,
    /// Cavity-search stamps: epoch*2 for visited-outside, epoch*2+1 for
    /// in-cavity.
    mark: Vec<u32>,
    epoch: u32,
    hint: usize,
}

impl<'a> Triangulator<'a> {
    fn point(&self, i: usize) -> &[f64] {
        &self.pts[i * self.dim..(i + 1) * self.dim]
    }

    fn slots(&self) -> usize {
        self.dim + 1
    }

    fn is_ghost(&self, s: usize) -> bool {
        self.verts[s][..self.slots()].contains(&GHOST)
    }

    fn ghost_slot(&self, s: usize) -> usize {
        self.verts[s][..self.slots()]
            .iter()
            .position(|&v| v == GHOST)
            .expect("ghost simplex")
    }

    /// Vertices of the facet opposite `slot`, ordered so that appending the
    /// removed vertex reproduces the simplex orientation.
    fn facet(&self, s: usize, slot: usize) -> [usize; 3] {
        let v = &self.verts[s];
        let d = self.dim;
        let mut f = [PAD; 3];
        let mut w = 0;
        for k in 0..self.slots() {
            if k != slot {
                f[w] = v[k];
                w += 1;
            }
        }
        // Moving the removed vertex to the last slot takes dim - slot
        // transpositions; fix the parity with one swap when odd.
        if (d - slot) % 2 == 1 {
            f.swap(0, 1);
        }
        f
    }

    /// Math-convention orientation of (facet, p): positive when p lies on
    /// the side completing a positively-oriented simplex.
    fn facet_orient(&self, f: &[usize; 3], p: &[f64]) -> f64 {
        if self.dim == 2 {
            geom::orient2d(self.point(f[0]), self.point(f[1]), p)
        } else {
            geom::orient3d(self.point(f[0]), self.point(f[1]), self.point(f[2]), p)
        }
    }

    /// Symbolic in-circumsphere test: does the (possibly ghost) simplex's
    /// circumsphere strictly contain p?
    fn in_circum(&self, s: usize, p: &[f64]) -> bool {
        let v = &self.verts[s];
        if self.is_ghost(s) {
            let g = self.ghost_slot(s);
            let f = self.facet(s, g);
            let o = self.facet_orient(&f, p);
            if o > 0.0 {
                return true;
            }
            if o < 0.0 {
                return false;
            }
            // p lies exactly on the hull facet's supporting line/plane: in
            // the limit, the ghost circumsphere covers the facet's own
            // circumscribed disk.
            if self.dim == 2 {
                let a = self.point(f[0]);
                let b = self.point(f[1]);
                let ax = if (b[0] - a[0]).abs() >= (b[1] - a[1]).abs() { 0 } else { 1 };
                let (lo, hi) = if a[ax] <= b[ax] { (a[ax], b[ax]) } else { (b[ax], a[ax]) };
                lo < p[ax] && p[ax] < hi
            } else {
                geom::in_circle_coplanar(
                    self.point(f[0]),
                    self.point(f[1]),
                    self.point(f[2]),
                    p,
                ) > 0.0
            }
        } else if self.dim == 2 {
            geom::in_circle(self.point(v[0]), self.point(v[1]), self.point(v[2]), p) > 0.0
        } else {
            geom::in_sphere(
                self.point(v[0]),
                self.point(v[1]),
                self.point(v[2]),
                self.point(v[3]),
                p,
            ) > 0.0
        }
    }

    /// Find any simplex whose symbolic circumsphere contains `p`, walking
    /// from the previous insertion site.
    fn locate(&self, p: &[f64], pi: usize) -> Result<usize> {
        let mut cur = self.hint;
        let max_steps = 64 + 4 * self.alive.len();
        for _ in 0..max_steps {
            debug_assert!(self.alive[cur]);
            if self.is_ghost(cur) {
                if self.in_circum(cur, p) {
                    return Ok(cur);
                }
                cur = self.adj[cur][self.ghost_slot(cur)];
                continue;
            }
            let mut stepped = false;
            for k in 0..self.slots() {
                let f = self.facet(cur, k);
                if self.facet_orient(&f, p) < 0.0 {
                    cur = self.adj[cur][k];
                    stepped = true;
                    break;
                }
            }
            if !stepped {
                // Containment: p is inside or on this simplex, hence
                // strictly inside its circumsphere unless it duplicates one
                // of the simplex's vertices.
                if self.in_circum(cur, p) {
                    return Ok(cur);
                }
                return Err(MeshError::DegenerateInput(format!(
                    "point {pi} coincides with an existing vertex"
                )));
            }
        }
        // Degenerate walk cycle: fall back to a deterministic scan.
        for s in 0..self.alive.len() {
            if self.alive[s] && self.in_circum(s, p) {
                return Ok(s);
            }
        }
        Err(MeshError::DegenerateInput(format!(
            "point {pi} coincides with an existing vertex"
        )))
    }

    fn alloc(&mut self, verts: [usize; 4]) -> usize {
        self.verts.push(verts);
        self.adj.push([usize::MAX; 4]);
        self.alive.push(true);
        self.mark.push(0);
        self.verts.len() - 1
    }

    /// Even permutation bringing the ghost vertex (if any) to the last
    /// used slot.
    fn normalize(&self, mut v: [usize; 4]) -> [usize; 4] {
        let d = self.dim;
        if let Some(pos) = v[..=d].iter().position(|&x| x == GHOST) {
            if pos != d {
                if d == 2 {
                    // Rotate the three slots (even permutation).
                    while v[2] != GHOST {
                        let t = v[0];
                        v[0] = v[1];
                        v[1] = v[2];
                        v[2] = t;
                    }
                } else {
                    // Double transpositions are even.
                    match pos {
                        0 => {
                            v.swap(0, 3);
                            v.swap(1, 2);
                        }
                        1 => {
                            v.swap(1, 3);
                            v.swap(0, 2);
                        }
                        _ => {
                            v.swap(2, 3);
                            v.swap(0, 1);
                        }
                    }
                }
            }
        }
        v
    }

    fn insert(&mut self, pi: usize) -> Result<()> {
        let p: Vec<f64> = self.point(pi).to_vec();
        let seed = self.locate(&p, pi)?;
        self.epoch += 1;
        let in_cav = self.epoch * 2 + 1;
        let outside = self.epoch * 2;

        let mut cavity = vec![seed];
        self.mark[seed] = in_cav;
        let mut stack = vec![seed];
        let mut boundary: Vec<(usize, usize)>;
        loop {
            while let Some(s) = stack.pop() {
                for k in 0..self.slots() {
                    let n = self.adj[s][k];
                    if self.mark[n] == in_cav || self.mark[n] == outside {
                        continue;
                    }
                    if self.in_circum(n, &p) {
                        self.mark[n] = in_cav;
                        cavity.push(n);
                        stack.push(n);
                    } else {
                        self.mark[n] = outside;
                    }
                }
            }
            // Collect boundary facets; force-grow the cavity if a fill
            // simplex would come out non-positive (defence against
            // degenerate inputs) and re-expand.
            boundary = Vec::new();
            for &s in &cavity {
                for k in 0..self.slots() {
                    let n = self.adj[s][k];
                    if self.mark[n] == in_cav {
                        continue;
                    }
                    boundary.push((s, k));
                }
            }
            let mut grew = false;
            for &(s, k) in &boundary {
                let f = self.facet(s, k);
                let real = !f[..self.dim].contains(&GHOST);
                if real && self.facet_orient(&f, &p) <= 0.0 {
                    let n = self.adj[s][k];
                    if self.mark[n] != in_cav {
                        self.mark[n] = in_cav;
                        cavity.push(n);
                        stack.push(n);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }

        // Fill: connect every boundary facet to p.
        let mut rim: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        let mut created = Vec::with_capacity(boundary.len());
        for &(s, k) in &boundary {
            let f = self.facet(s, k);
            let mut v = [PAD; 4];
            v[..self.dim].copy_from_slice(&f[..self.dim]);
            v[self.dim] = pi;
            let v = self.normalize(v);
            let id = self.alloc(v);
            created.push(id);

            // Outward adjacency: the old neighbour across the facet.
            let n = self.adj[s][k];
            let p_slot = self.verts[id][..self.slots()]
                .iter()
                .position(|&x| x == pi)
                .unwrap();
            self.adj[id][p_slot] = n;
            let back = (0..self.slots())
                .find(|&j| self.adj[n][j] == s)
                .expect("mutual adjacency");
            self.adj[n][back] = id;

            // Inner adjacency: match the facets that contain p.
            for j in 0..self.slots() {
                if j == p_slot {
                    continue;
                }
                let mut key = [PAD; 3];
                let mut w = 0;
                for t in 0..self.slots() {
                    if t != j {
                        key[w] = self.verts[id][t];
                        w += 1;
                    }
                }
                key[..self.dim].sort_unstable();
                match rim.entry(key) {
                    std::collections::hash_map::Entry::Occupied(e) => {
                        let (other, oslot) = *e.get();
                        self.adj[id][j] = other;
                        self.adj[other][oslot] = id;
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert((id, j));
                    }
                }
            }
        }

        for s in cavity {
            self.alive[s] = false;
        }
        self.hint = created[0];
        Ok(())
    }
}

fn exact_collinear_3d(a: &[f64], b: &[f64], c: &[f64]) -> bool {
    for (u, v) in [(0, 1), (1, 2), (2, 0)] {
        let pa = [a[u], a[v]];
        let pb = [b[u], b[v]];
        let pc = [c[u], c[v]];
        if geom::orient2d(&pa, &pb, &pc) != 0.0 {
            return false;
        }
    }
    true
}

/// Delaunay triangulation of a point set. Points are `dim`-flat; at least
/// `dim + 1` affinely independent points are required.
pub fn delaunay(points: &[f64], dim: usize) -> Result<TriangulationResult> {
    assert!(dim == 2 || dim == 3);
    assert_eq!(points.len() % dim, 0);
    let n = points.len() / dim;
    if n < dim + 1 {
        return Err(MeshError::DegenerateInput(format!(
            "need at least {} points for a {dim}-d triangulation, got {n}",
            dim + 1
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SHUFFLE_SEED);
    order.shuffle(&mut rng);

    // Bootstrap: the first affinely independent dim+1 points in insertion
    // order form the initial simplex.
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut init: Vec<usize> = vec![order[0]];
    let mut used = vec![false; n];
    used[order[0]] = true;
    for &cand in order.iter().skip(1) {
        let ok = match init.len() {
            1 => pt(cand) != pt(init[0]),
            2 => {
                if dim == 2 {
                    geom::orient2d(pt(init[0]), pt(init[1]), pt(cand)) != 0.0
                } else {
                    !exact_collinear_3d(pt(init[0]), pt(init[1]), pt(cand))
                }
            }
            3 if dim == 3 => {
                geom::orient3d(pt(init[0]), pt(init[1]), pt(init[2]), pt(cand)) != 0.0
            }
            _ => break,
        };
        if ok {
            used[cand] = true;
            init.push(cand);
            if init.len() == dim + 1 {
                break;
            }
        }
    }
    if init.len() < dim + 1 {
        return Err(MeshError::DegenerateInput(format!(
            "all input points are {} for a {dim}-d triangulation",
            if dim == 2 { "collinear" } else { "coplanar" }
        )));
    }

    let mut tri = Triangulator {
        dim,
        pts: points,
        verts: Vec::new(),
        adj: Vec::new(),
        alive: Vec::new(),
        mark: Vec::new(),
        epoch: 0,
        hint: 0,
    };

    // Positive orientation for the seed simplex.
    let orient = if dim == 2 {
        geom::orient2d(pt(init[0]), pt(init[1]), pt(init[2]))
    } else {
        geom::orient3d(pt(init[0]), pt(init[1]), pt(init[2]), pt(init[3]))
    };
    if orient < 0.0 {
        init.swap(0, 1);
    }
    let mut seed_verts = [PAD; 4];
    seed_verts[..=dim].copy_from_slice(&init[..=dim]);
    let seed = tri.alloc(seed_verts);

    // One ghost per seed facet, outward-oriented: swapping the first two
    // facet vertices flips the inward orientation.
    for k in 0..=dim {
        let f = tri.facet(seed, k);
        let mut v = [PAD; 4];
        v[..dim].copy_from_slice(&f[..dim]);
        v.swap(0, 1);
        v[dim] = GHOST;
        tri.alloc(tri.normalize(v));
    }
    // Wire all mutual adjacencies of the bootstrap complex by facet key.
    let total = tri.verts.len();
    let mut fmap: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
    for s in 0..total {
        for k in 0..tri.slots() {
            let mut key = [PAD; 3];
            key[..dim].copy_from_slice(&tri.facet(s, k)[..dim]);
            key[..dim].sort_unstable();
            match fmap.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    let (o, oslot) = *e.get();
                    tri.adj[s][k] = o;
                    tri.adj[o][oslot] = s;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert((s, k));
                }
            }
        }
    }

    for &i in &order {
        if !used[i] {
            tri.insert(i)?;
        }
    }

    // Harvest real simplices and hull facets in canonical order.
    let mut elements = Vec::new();
    let mut hull = Vec::new();
    let mut elem_keys: Vec<[usize; 4]> = Vec::new();
    let mut hull_keys: Vec<[usize; 3]> = Vec::new();
    for s in 0..tri.verts.len() {
        if !tri.alive[s] {
            continue;
        }
        if tri.is_ghost(s) {
            let g = tri.ghost_slot(s);
            let f = tri.facet(s, g);
            hull_keys.push(canonical_facet(f, dim));
        } else {
            elem_keys.push(canonical_simplex(tri.verts[s], dim));
        }
    }
    elem_keys.sort_unstable();
    hull_keys.sort_unstable();
    for e in elem_keys {
        elements.extend_from_slice(&e[..=dim]);
    }
    for f in hull_keys {
        hull.extend_from_slice(&f[..dim]);
    }
    Ok(TriangulationResult { dim, elements, hull })
}

/// Orientation-preserving canonical form: smallest vertex first.
fn canonical_simplex(mut v: [usize; 4], dim: usize) -> [usize; 4] {
    if dim == 2 {
        while v[0] != v[..3].iter().min().copied().unwrap() {
            let t = v[0];
            v[0] = v[1];
            v[1] = v[2];
            v[2] = t;
        }
    } else {
        let min_pos = (0..4).min_by_key(|&k| v[k]).unwrap();
        match min_pos {
            0 => {}
            1 => {
                v.swap(0, 1);
                v.swap(2, 3);
            }
            2 => {
                v.swap(0, 2);
                v.swap(1, 3);
            }
            _ => {
                v.swap(0, 3);
                v.swap(1, 2);
            }
        }
        // Rotate the trailing three to put their minimum second.
        while v[1] != v[1..4].iter().min().copied().unwrap() {
            let t = v[1];
            v[1] = v[2];
            v[2] = v[3];
            v[3] = t;
        }
    }
    v
}

fn canonical_facet(mut f: [usize; 3], dim: usize) -> [usize; 3] {
    if dim == 3 {
        while f[0] != f.iter().min().copied().unwrap() {
            let t = f[0];
            f[0] = f[1];
            f[1] = f[2];
            f[2] = t;
        }
    }
    f
}

/// Drop simplices whose barycentre violates the domain's inequality; the
/// hull facet list is rebuilt from the retained elements.
pub fn strip_outside(
    tri: &TriangulationResult,
    domain: &DomainShape,
    points: &[f64],
) -> TriangulationResult {
    let dim = tri.dim;
    let k = dim + 1;
    let mut elements = Vec::new();
    for e in 0..tri.element_count() {
        let elem = tri.element(e);
        let mut b = [0.0; 3];
        for &nid in elem {
            for a in 0..dim {
                b[a] += points[nid * dim + a];
            }
        }
        for v in b.iter_mut().take(dim) {
            *v /= k as f64;
        }
        if domain.contains(&b[..dim]) {
            elements.extend_from_slice(elem);
        }
    }
    // Facets appearing exactly once are the new boundary.
    let mut counts: HashMap<[usize; 3], ([usize; 3], usize)> = HashMap::new();
    for chunk in elements.chunks(k) {
        let mut v4 = [PAD; 4];
        v4[..k].copy_from_slice(chunk);
        for slot in 0..k {
            let mut f = [PAD; 3];
            let mut w = 0;
            for t in 0..k {
                if t != slot {
                    f[w] = v4[t];
                    w += 1;
                }
            }
            if (dim - slot) % 2 == 1 {
                f.swap(0, 1);
            }
            // Outward orientation for a boundary facet is the inward facet
            // reversed.
            let mut out = f;
            out.swap(0, 1);
            let mut key = f;
            key[..dim].sort_unstable();
            counts
                .entry(key)
                .and_modify(|(_, c)| *c += 1)
                .or_insert((out, 1));
        }
    }
    let mut hull_keys: Vec<[usize; 3]> = counts
        .into_values()
        .filter_map(|(f, c)| (c == 1).then(|| canonical_facet(f, dim)))
        .collect();
    hull_keys.sort_unstable();
    let mut hull = Vec::new();
    for f in hull_keys {
        hull.extend_from_slice(&f[..dim]);
    }
    TriangulationResult { dim, elements, hull }
}

/// Triangulate a tagged point set over a domain: Delaunay, strip
/// out-of-domain simplices, normalize orientation and drop nodes left
/// without elements. Returns the mesh and the old -> new node id map.
pub fn build_domain_mesh(
    dim: usize,
    coords: Vec<f64>,
    tags: Vec<crate::mesh::Boundary>,
    domain: &DomainShape,
) -> Result<(crate::mesh::Mesh, Vec<Option<usize>>)> {
    let tri = delaunay(&coords, dim)?;
    let stripped = strip_outside(&tri, domain, &coords);
    let mesh = crate::mesh::Mesh::new(dim, coords, stripped.elements, tags)?;
    Ok(mesh.drop_orphan_nodes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Brute-force Delaunay oracle: every simplex with a strictly empty
    /// circumsphere. Assumes general position.
    pub fn brute_force_2d(points: &[f64]) -> BTreeSet<[usize; 3]> {
        let n = points.len() / 2;
        let pt = |i: usize| &points[i * 2..(i + 1) * 2];
        let mut out = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let o = geom::orient2d(pt(i), pt(j), pt(k));
                    if o == 0.0 {
                        continue;
                    }
                    let (a, b, c) = if o > 0.0 { (i, j, k) } else { (i, k, j) };
                    let empty = (0..n).all(|m| {
                        m == i
                            || m == j
                            || m == k
                            || geom::in_circle(pt(a), pt(b), pt(c), pt(m)) <= 0.0
                    });
                    if empty {
                        out.insert([i, j, k]);
                    }
                }
            }
        }
        out
    }

    pub fn brute_force_3d(points: &[f64]) -> BTreeSet<[usize; 4]> {
        let n = points.len() / 3;
        let pt = |i: usize| &points[i * 3..(i + 1) * 3];
        let mut out = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in k + 1..n {
                        let o = geom::orient3d(pt(i), pt(j), pt(k), pt(l));
                        if o == 0.0 {
                            continue;
                        }
                        let (a, b, c, d) = if o > 0.0 { (i, j, k, l) } else { (j, i, k, l) };
                        let empty = (0..n).all(|m| {
                            m == i
                                || m == j
                                || m == k
                                || m == l
                                || geom::in_sphere(pt(a), pt(b), pt(c), pt(d), pt(m)) <= 0.0
                        });
                        if empty {
                            out.insert([i, j, k, l]);
                        }
                    }
                }
            }
        }
        out
    }

    fn elem_set_2d(tri: &TriangulationResult) -> BTreeSet<[usize; 3]> {
        tri.elements
            .chunks(3)
            .map(|c| {
                let mut v = [c[0], c[1], c[2]];
                v.sort_unstable();
                v
            })
            .collect()
    }

    fn elem_set_3d(tri: &TriangulationResult) -> BTreeSet<[usize; 4]> {
        tri.elements
            .chunks(4)
            .map(|c| {
                let mut v = [c[0], c[1], c[2], c[3]];
                v.sort_unstable();
                v
            })
            .collect()
    }

    #[test]
    fn three_points_one_triangle() {
        let pts = vec![0.0, 0.0, 1.0, 0.0, 0.2, 0.9];
        let tri = delaunay(&pts, 2).unwrap();
        assert_eq!(tri.element_count(), 1);
        assert_eq!(tri.hull.len() / 2, 3);
    }

    #[test]
    fn unit_square_two_triangles_sharing_a_diagonal() {
        let pts = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let tri = delaunay(&pts, 2).unwrap();
        assert_eq!(tri.element_count(), 2);
        // Both circumcircles empty: no other point strictly inside.
        let pt = |i: usize| &pts[i * 2..(i + 1) * 2];
        for e in 0..2 {
            let el = tri.element(e);
            for m in 0..4 {
                if el.contains(&m) {
                    continue;
                }
                assert!(geom::in_circle(pt(el[0]), pt(el[1]), pt(el[2]), pt(m)) <= 0.0);
            }
        }
        // The two triangles share exactly one edge (the diagonal).
        let a: BTreeSet<usize> = tri.element(0).iter().cloned().collect();
        let b: BTreeSet<usize> = tri.element(1).iter().cloned().collect();
        assert_eq!(a.intersection(&b).count(), 2);
    }

    #[test]
    fn square_plus_centre_fans_to_four() {
        let pts = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.5, 0.5];
        let tri = delaunay(&pts, 2).unwrap();
        assert_eq!(tri.element_count(), 4);
        for e in 0..4 {
            assert!(tri.element(e).contains(&4), "all triangles touch the centre");
        }
        assert_eq!(elem_set_2d(&tri), brute_force_2d(&pts));
    }

    #[test]
    fn collinear_input_is_degenerate() {
        let pts = vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        assert!(matches!(
            delaunay(&pts, 2),
            Err(MeshError::DegenerateInput(_))
        ));
        let pts3 = vec![
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.3, 0.7, 0.0,
        ];
        assert!(matches!(
            delaunay(&pts3, 3),
            Err(MeshError::DegenerateInput(_))
        ));
    }

    #[test]
    fn single_tetrahedron() {
        let pts = vec![
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
        ];
        let tri = delaunay(&pts, 3).unwrap();
        assert_eq!(tri.element_count(), 1);
        assert_eq!(tri.hull.len() / 3, 4);
    }

    #[test]
    fn matches_brute_force_on_random_sets_2d() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let n = rng.random_range(4..=12);
            let pts: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let tri = delaunay(&pts, 2).unwrap();
            assert_eq!(elem_set_2d(&tri), brute_force_2d(&pts), "pts={pts:?}");
        }
    }

    #[test]
    fn matches_brute_force_on_random_sets_3d() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..30 {
            let n = rng.random_range(5..=9);
            let pts: Vec<f64> = (0..3 * n).map(|_| rng.random_range(0.0..1.0)).collect();
            let tri = delaunay(&pts, 3).unwrap();
            assert_eq!(elem_set_3d(&tri), brute_force_3d(&pts), "pts={pts:?}");
        }
    }

    #[test]
    fn deterministic_rerun() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<f64> = (0..2 * 40).map(|_| rng.random_range(0.0..10.0)).collect();
        let a = delaunay(&pts, 2).unwrap();
        let b = delaunay(&pts, 2).unwrap();
        assert_eq!(a.elements, b.elements);
        assert_eq!(a.hull, b.hull);
    }

    #[test]
    fn handles_cocircular_grid() {
        // A perfect 5x5 grid: every interior quad is cocircular. The result
        // must still be a valid triangulation with non-strictly empty
        // circumcircles.
        let mut pts = Vec::new();
        for j in 0..5 {
            for i in 0..5 {
                pts.push(i as f64);
                pts.push(j as f64);
            }
        }
        let tri = delaunay(&pts, 2).unwrap();
        // Any triangulation of a point set with h hull vertices has
        // 2n - 2 - h triangles.
        assert_eq!(tri.element_count(), 2 * 25 - 2 - 16);
        let pt = |i: usize| &pts[i * 2..(i + 1) * 2];
        for e in 0..tri.element_count() {
            let el = tri.element(e);
            assert!(geom::orient2d(pt(el[0]), pt(el[1]), pt(el[2])) > 0.0);
            for m in 0..25 {
                if el.contains(&m) {
                    continue;
                }
                assert!(
                    geom::in_circle(pt(el[0]), pt(el[1]), pt(el[2]), pt(m)) <= 0.0,
                    "triangle {el:?} not empty of {m}"
                );
            }
        }
    }

    #[test]
    fn handles_cospherical_lattice() {
        // A 3x3x3 cubic lattice is maximally degenerate in 3-D.
        let mut pts = Vec::new();
        for k in 0..3 {
            for j in 0..3 {
                for i in 0..3 {
                    pts.push(i as f64);
                    pts.push(j as f64);
                    pts.push(k as f64);
                }
            }
        }
        let tri = delaunay(&pts, 3).unwrap();
        let pt = |i: usize| &pts[i * 3..(i + 1) * 3];
        let mut vol = 0.0;
        for e in 0..tri.element_count() {
            let el = tri.element(e);
            let o = geom::orient3d(pt(el[0]), pt(el[1]), pt(el[2]), pt(el[3]));
            assert!(o > 0.0);
            vol += o / 6.0;
            for m in 0..27 {
                if el.contains(&m) {
                    continue;
                }
                assert!(
                    geom::in_sphere(pt(el[0]), pt(el[1]), pt(el[2]), pt(el[3]), pt(m)) <= 0.0
                );
            }
        }
        approx::assert_relative_eq!(vol, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn strip_outside_annulus() {
        // Points on two circles; Delaunay fills the hole, stripping empties it.
        let mut pts = Vec::new();
        for k in 0..12 {
            let a = k as f64 / 12.0 * std::f64::consts::TAU;
            pts.push(2.0 * a.cos());
            pts.push(2.0 * a.sin());
        }
        for k in 0..6 {
            let a = k as f64 / 6.0 * std::f64::consts::TAU;
            pts.push(1.0 * a.cos());
            pts.push(1.0 * a.sin());
        }
        let tri = delaunay(&pts, 2).unwrap();
        let dom = DomainShape::Annulus {
            r_inner: 1.0,
            r_outer: 2.0,
        };
        let stripped = strip_outside(&tri, &dom, &pts);
        assert!(stripped.element_count() < tri.element_count());
        for e in 0..stripped.element_count() {
            let el = stripped.element(e);
            let bx = (pts[el[0] * 2] + pts[el[1] * 2] + pts[el[2] * 2]) / 3.0;
            let by = (pts[el[0] * 2 + 1] + pts[el[1] * 2 + 1] + pts[el[2] * 2 + 1]) / 3.0;
            let r = bx.hypot(by);
            assert!((1.0..=2.0).contains(&r));
        }
        // The rebuilt hull now has inner and outer rings: 18 facets.
        assert_eq!(stripped.hull.len() / 2, 18);
    }

    #[test]
    fn strip_is_identity_when_all_inside() {
        let pts = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let tri = delaunay(&pts, 2).unwrap();
        let dom = DomainShape::Rectangle {
            length: 10.0,
            depth: 10.0,
        };
        // Shift into the rectangle's coordinate frame: y in [-depth, 0].
        let shifted: Vec<f64> = pts
            .chunks(2)
            .flat_map(|p| [p[0], p[1] - 5.0])
            .collect();
        let tri2 = delaunay(&shifted, 2).unwrap();
        let stripped = strip_outside(&tri2, &dom, &shifted);
        assert_eq!(stripped.elements, tri2.elements);
        let _ = tri;
    }
}
