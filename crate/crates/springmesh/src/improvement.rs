//! Local mesh surgery: strain-driven node addition and rejection with
//! sub-iteration control, Laplacian smoothing of interior nodes, repair of
//! badly shaped tetrahedra and sliver removal.

use crate::error::Result;
use crate::guide::GuideMesh;
use crate::mesh::{derive_edges, Boundary, EdgeSet, Mesh};
use crate::params::DomainShape;
use crate::quality::{element_quality, strain_eps};
use crate::triangulation::build_domain_mesh;

/// Strain magnitude beyond which a spring triggers a node edit.
pub const STRAIN_LIMIT: f64 = 0.5;
/// Quality threshold defining a sliver.
pub const SLIVER_Q: f64 = 0.1;
const MAX_SUB_ITERATIONS: usize = 25;

#[derive(Clone, Debug, Default)]
pub struct AddedNode {
    pub position: Vec<f64>,
    pub source_edge: [usize; 2],
}

/// Record of one surgery pass: new nodes with their originating edges,
/// removed node ids (in the input mesh's numbering), and the percentage of
/// over-strained springs seen at each sub-iteration.
#[derive(Clone, Debug, Default)]
pub struct EditLog {
    pub added: Vec<AddedNode>,
    pub removed: Vec<usize>,
    pub violation_percentages: Vec<f64>,
}

impl EditLog {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }

    fn merge(&mut self, other: EditLog) {
        self.added.extend(other.added);
        self.removed.extend(other.removed);
        self.violation_percentages
            .extend(other.violation_percentages);
    }
}

fn removable(tag: Boundary) -> bool {
    tag != Boundary::Corner
}

/// Removal endpoint for a compressed spring: prefer the interior endpoint,
/// otherwise the higher node id among removable ones.
fn removal_choice(mesh: &Mesh, i: usize, j: usize) -> Option<usize> {
    let (ti, tj) = (mesh.boundary_tag(i), mesh.boundary_tag(j));
    match (ti.is_boundary(), tj.is_boundary()) {
        (false, false) => Some(i.max(j)),
        (false, true) => Some(i),
        (true, false) => Some(j),
        (true, true) => {
            let cand = i.max(j);
            let other = i.min(j);
            if removable(mesh.boundary_tag(cand)) {
                Some(cand)
            } else if removable(mesh.boundary_tag(other)) {
                Some(other)
            } else {
                None
            }
        }
    }
}

/// Tag and position of a new node at the midpoint of edge (i, j); boundary
/// midpoints are projected radially onto curved boundaries or snapped onto
/// their straight side.
fn midpoint_node(mesh: &Mesh, domain: &DomainShape, i: usize, j: usize) -> (Vec<f64>, Boundary) {
    let dim = mesh.dim();
    let a = mesh.node(i);
    let b = mesh.node(j);
    let mut p: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let (ti, tj) = (mesh.boundary_tag(i), mesh.boundary_tag(j));
    match domain {
        DomainShape::Rectangle { length, depth } => {
            if !(ti.is_boundary() && tj.is_boundary()) {
                return (p, Boundary::Interior);
            }
            // Shared side line, checked on exact coordinates.
            let lines = [
                (0, -0.5 * length, crate::mesh::RectSide::Left),
                (0, 0.5 * length, crate::mesh::RectSide::Right),
                (1, -depth, crate::mesh::RectSide::Bottom),
                (1, 0.0, crate::mesh::RectSide::Top),
            ];
            let tol = 1e-9 * domain.diameter();
            for (axis, value, side) in lines {
                if (a[axis] - value).abs() <= tol && (b[axis] - value).abs() <= tol {
                    p[axis] = value;
                    return (p, Boundary::Side(side));
                }
            }
            (p, Boundary::Interior)
        }
        DomainShape::Annulus { r_inner, r_outer } | DomainShape::Shell { r_inner, r_outer } => {
            let surface = match (ti, tj) {
                (Boundary::InnerSurface, Boundary::InnerSurface) => Some((*r_inner, ti)),
                (Boundary::OuterSurface, Boundary::OuterSurface) => Some((*r_outer, ti)),
                _ => None,
            };
            match surface {
                Some((r, tag)) => {
                    let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        for v in &mut p {
                            *v *= r / norm;
                        }
                    }
                    (p, tag)
                }
                None => (p, Boundary::Interior),
            }
        }
    }
}

/// Apply collected edits and retriangulate over the domain.
fn apply_edits(
    mesh: &Mesh,
    domain: &DomainShape,
    removed: &[usize],
    added: &[(Vec<f64>, Boundary)],
) -> Result<Mesh> {
    let dim = mesh.dim();
    let mut gone = vec![false; mesh.node_count()];
    for &r in removed {
        gone[r] = true;
    }
    let mut coords = Vec::with_capacity((mesh.node_count() + added.len()) * dim);
    let mut tags = Vec::new();
    for i in 0..mesh.node_count() {
        if !gone[i] {
            coords.extend_from_slice(mesh.node(i));
            tags.push(mesh.boundary_tag(i));
        }
    }
    let tol = 1e-9 * domain.diameter();
    for (p, tag) in added {
        // Suppress additions that coincide with a surviving node.
        let dup = coords
            .chunks(dim)
            .any(|q| crate::geom::dist(q, p) < tol);
        if !dup {
            coords.extend_from_slice(p);
            tags.push(*tag);
        }
    }
    if coords.len() / dim < dim + 1 {
        // Surgery left too few points to triangulate.
        return Mesh::new(dim, coords, Vec::new(), tags);
    }
    match build_domain_mesh(dim, coords.clone(), tags.clone(), domain) {
        Ok((mesh, _)) => Ok(mesh),
        Err(crate::error::MeshError::DegenerateInput(_)) => {
            Mesh::new(dim, coords, Vec::new(), tags)
        }
        Err(e) => Err(e),
    }
}

/// One add/reject pass: stretched springs gain a midpoint node, compressed
/// springs lose an endpoint; connectivity is rebuilt by retriangulation.
pub fn add_reject_pass(
    mesh: &Mesh,
    domain: &DomainShape,
    edges: &EdgeSet,
    l0: &[f64],
) -> Result<(Mesh, EditLog)> {
    let mut log = EditLog::default();
    let mut consumed = vec![false; mesh.node_count()];
    let mut added: Vec<(Vec<f64>, Boundary)> = Vec::new();
    for (e, &[i, j]) in edges.edges.iter().enumerate() {
        let eps = strain_eps(edges.lengths[e], l0[e]);
        if eps > STRAIN_LIMIT {
            if consumed[i] || consumed[j] {
                continue;
            }
            let (p, tag) = midpoint_node(mesh, domain, i, j);
            log.added.push(AddedNode {
                position: p.clone(),
                source_edge: [i, j],
            });
            added.push((p, tag));
        } else if eps < -STRAIN_LIMIT {
            if consumed[i] || consumed[j] {
                continue;
            }
            if let Some(victim) = removal_choice(mesh, i, j) {
                consumed[i] = true;
                consumed[j] = true;
                log.removed.push(victim);
            }
        }
    }
    if log.is_empty() {
        return Ok((mesh.clone(), log));
    }
    let out = apply_edits(mesh, domain, &log.removed, &added)?;
    Ok((out, log))
}

fn violation_percentage(edges: &EdgeSet, l0: &[f64]) -> f64 {
    if edges.is_empty() {
        return 0.0;
    }
    let over = edges
        .lengths
        .iter()
        .zip(l0)
        .filter(|(&l, &t)| strain_eps(l, t).abs() > STRAIN_LIMIT)
        .count();
    100.0 * over as f64 / edges.len() as f64
}

fn edge_targets(mesh: &Mesh, edges: &EdgeSet, guide: &GuideMesh) -> Result<Vec<f64>> {
    (0..edges.len())
        .map(|e| guide.l0_at_cartesian(&edges.midpoint(mesh, e)))
        .collect()
}

/// Repeat add/reject passes, re-evaluating the desired lengths at the new
/// midpoints, until the percentage of over-strained springs stops
/// decreasing; returns the best (lowest-percentage) mesh seen.
pub fn add_reject_subiterate(
    mesh: &Mesh,
    domain: &DomainShape,
    guide: &GuideMesh,
) -> Result<(Mesh, EditLog)> {
    let edges = derive_edges(mesh)?;
    let l0 = edge_targets(mesh, &edges, guide)?;
    let mut p_prev = violation_percentage(&edges, &l0);
    let mut log = EditLog {
        violation_percentages: vec![p_prev],
        ..Default::default()
    };
    if p_prev == 0.0 {
        return Ok((mesh.clone(), log));
    }
    let mut best = (p_prev, mesh.clone(), EditLog::default());
    let mut current = mesh.clone();
    let mut cumulative = EditLog::default();
    for _ in 0..MAX_SUB_ITERATIONS {
        let edges = derive_edges(&current)?;
        let l0 = edge_targets(&current, &edges, guide)?;
        let (next, pass_log) = add_reject_pass(&current, domain, &edges, &l0)?;
        if pass_log.is_empty() {
            break;
        }
        cumulative.merge(pass_log);
        let next_edges = derive_edges(&next)?;
        let next_l0 = edge_targets(&next, &next_edges, guide)?;
        let p_next = violation_percentage(&next_edges, &next_l0);
        log.violation_percentages.push(p_next);
        current = next;
        if p_next < best.0 {
            best = (p_next, current.clone(), cumulative.clone());
        }
        if p_next >= p_prev {
            break;
        }
        p_prev = p_next;
    }
    let (_, best_mesh, mut best_log) = best;
    best_log.violation_percentages = log.violation_percentages;
    Ok((best_mesh, best_log))
}

/// One Laplacian sweep: every interior node moves to the mean of the
/// barycentres of its incident elements; boundary nodes stay put.
pub fn smooth_interior(mesh: &mut Mesh) {
    let dim = mesh.dim();
    let barycentres = mesh.barycentres();
    let adjacency = mesh.node_element_adjacency();
    let mut updates: Vec<(usize, Vec<f64>)> = Vec::new();
    for node in 0..mesh.node_count() {
        if mesh.boundary_tag(node).is_boundary() || adjacency[node].is_empty() {
            continue;
        }
        let mut mean = vec![0.0; dim];
        for &e in &adjacency[node] {
            for (m, &b) in mean.iter_mut().zip(&barycentres[e]) {
                *m += b;
            }
        }
        for m in &mut mean {
            *m /= adjacency[node].len() as f64;
        }
        updates.push((node, mean));
    }
    for (node, p) in updates {
        mesh.set_node(node, &p);
    }
}

/// Repair badly shaped tetrahedra (q below `q_bad`): split or collapse the
/// most distorted spring of each, one edit per node per pass.
pub fn fix_bad_tets(
    mesh: &Mesh,
    domain: &DomainShape,
    edges: &EdgeSet,
    l0: &[f64],
    q_bad: f64,
) -> Result<(Mesh, EditLog)> {
    assert!(mesh.dim() == 3, "tetrahedron repair is 3-d only");
    let edge_index = |i: usize, j: usize| -> usize {
        let key = [i.min(j), i.max(j)];
        edges.edges.binary_search(&key).expect("element edge present")
    };
    let mut log = EditLog::default();
    let mut consumed = vec![false; mesh.node_count()];
    let mut added: Vec<(Vec<f64>, Boundary)> = Vec::new();
    for e in 0..mesh.element_count() {
        if element_quality(mesh, e)? >= q_bad {
            continue;
        }
        let elem = mesh.element(e);
        if elem.iter().any(|&n| consumed[n]) {
            continue;
        }
        // Spring with maximum distortion within this element.
        let mut worst: Option<(f64, usize, usize, f64)> = None;
        for a in 0..4 {
            for b in a + 1..4 {
                let (i, j) = (elem[a], elem[b]);
                let idx = edge_index(i, j);
                let eps = strain_eps(edges.lengths[idx], l0[idx]);
                if worst.is_none() || eps.abs() > worst.unwrap().0 {
                    worst = Some((eps.abs(), i, j, eps));
                }
            }
        }
        let (_, i, j, eps) = worst.unwrap();
        if eps > 0.0 {
            let (p, tag) = midpoint_node(mesh, domain, i, j);
            log.added.push(AddedNode {
                position: p.clone(),
                source_edge: [i, j],
            });
            added.push((p, tag));
            consumed[i] = true;
            consumed[j] = true;
        } else if let Some(victim) = removal_choice(mesh, i, j) {
            log.removed.push(victim);
            consumed[i] = true;
            consumed[j] = true;
        }
    }
    if log.is_empty() {
        return Ok((mesh.clone(), log));
    }
    let out = apply_edits(mesh, domain, &log.removed, &added)?;
    Ok((out, log))
}

/// All 3-subsets of a sliver's 4 vertices and 6 edge midpoints in which
/// every vertex is either chosen or merged into a chosen midpoint.
fn sliver_candidates() -> Vec<[usize; 3]> {
    // Points 0..4 are the vertices; 4..10 the midpoints of edges in the
    // fixed order (01, 02, 03, 12, 13, 23).
    const EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
    let mut out = Vec::new();
    for a in 0..10 {
        for b in a + 1..10 {
            for c in b + 1..10 {
                let chosen = [a, b, c];
                let mut covered = [false; 4];
                for &p in &chosen {
                    if p < 4 {
                        covered[p] = true;
                    } else {
                        for &v in &EDGES[p - 4] {
                            covered[v] = true;
                        }
                    }
                }
                if covered.iter().all(|&c| c) {
                    out.push(chosen);
                }
            }
        }
    }
    out
}

/// Replace each sliver (q below 0.1) by the best-quality triangle formed
/// from its vertices and edge midpoints, then retriangulate.
pub fn remove_slivers(mesh: &Mesh, domain: &DomainShape) -> Result<(Mesh, EditLog)> {
    assert!(mesh.dim() == 3, "sliver removal is 3-d only");
    const EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
    let candidates = sliver_candidates();
    let mut log = EditLog::default();
    let mut consumed = vec![false; mesh.node_count()];
    let mut added: Vec<(Vec<f64>, Boundary)> = Vec::new();
    for e in 0..mesh.element_count() {
        if element_quality(mesh, e)? >= SLIVER_Q {
            continue;
        }
        let elem = mesh.element(e);
        if elem.iter().any(|&n| consumed[n]) {
            continue;
        }
        // Candidate points: the 4 vertices then the 6 midpoints.
        let mut pts: Vec<Vec<f64>> = elem.iter().map(|&n| mesh.node(n).to_vec()).collect();
        let mut tags: Vec<Boundary> = elem.iter().map(|&n| mesh.boundary_tag(n)).collect();
        for [a, b] in EDGES {
            let (p, tag) = midpoint_node(mesh, domain, elem[a], elem[b]);
            pts.push(p);
            tags.push(tag);
        }
        // A protected vertex must survive, i.e. be chosen directly.
        let protected: Vec<bool> = elem
            .iter()
            .map(|&n| !removable(mesh.boundary_tag(n)))
            .collect();
        let mut best: Option<(f64, &[usize; 3])> = None;
        for cand in &candidates {
            if (0..4).any(|v| protected[v] && !cand.contains(&v)) {
                continue;
            }
            let q = {
                let d01 = crate::geom::dist(&pts[cand[0]], &pts[cand[1]]);
                let d12 = crate::geom::dist(&pts[cand[1]], &pts[cand[2]]);
                let d20 = crate::geom::dist(&pts[cand[2]], &pts[cand[0]]);
                crate::quality::q_triangle(d01, d12, d20).unwrap_or(0.0)
            };
            if best.is_none() || q > best.unwrap().0 {
                best = Some((q, cand));
            }
        }
        let Some((_, chosen)) = best else { continue };
        for v in 0..4 {
            if !chosen.contains(&v) {
                log.removed.push(elem[v]);
            }
        }
        for &p in chosen {
            if p >= 4 {
                log.added.push(AddedNode {
                    position: pts[p].clone(),
                    source_edge: [elem[EDGES[p - 4][0]], elem[EDGES[p - 4][1]]],
                });
                added.push((pts[p].clone(), tags[p]));
            }
        }
        for &n in elem {
            consumed[n] = true;
        }
    }
    if log.is_empty() {
        return Ok((mesh.clone(), log));
    }
    let out = apply_edits(mesh, domain, &log.removed, &added)?;
    Ok((out, log))
}
