//! Element quality factors, spring misfit statistics and region bookkeeping.

use crate::error::{MeshError, Result};
use crate::geom;
use crate::guide::{GuideMesh, Region};
use crate::mesh::{EdgeSet, Mesh};
use serde::Serialize;

/// Normalized radius-ratio quality of a triangle from its side lengths:
/// twice the inradius over the circumradius. 1 for equilateral triangles,
/// 0 for degenerate ones.
pub fn q_triangle(a: f64, b: f64, c: f64) -> Result<f64> {
    let s = a + b + c;
    let eps = 1e-12 * s;
    let u = b + c - a;
    let v = c + a - b;
    let w = a + b - c;
    if u < -eps || v < -eps || w < -eps || s <= 0.0 {
        return Err(MeshError::DegenerateInput(format!(
            "side lengths ({a}, {b}, {c}) violate the triangle inequality"
        )));
    }
    // Round-off can push the radicands of near-degenerate triangles
    // slightly negative; clamp before the square roots.
    let u = u.max(0.0);
    let v = v.max(0.0);
    let w = w.max(0.0);
    let r_c = 0.5 * (u * v * w / s).sqrt();
    let denom = (s * u * v * w).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let r_circ = a * b * c / denom;
    Ok((2.0 * r_c / r_circ).clamp(0.0, 1.0))
}

fn tet_vectors(v: &[[f64; 3]; 4]) -> Result<([f64; 3], [f64; 3], [f64; 3])> {
    for i in 0..4 {
        for j in i + 1..4 {
            if v[i] == v[j] {
                return Err(MeshError::DegenerateInput(format!(
                    "tetrahedron vertices {i} and {j} coincide"
                )));
            }
        }
    }
    Ok((
        geom::sub3(&v[1], &v[0]),
        geom::sub3(&v[2], &v[0]),
        geom::sub3(&v[3], &v[0]),
    ))
}

/// Normalized radius-ratio quality of a tetrahedron: three times the
/// insphere radius over the circumsphere radius. 1 for regular tetrahedra,
/// 0 for zero-volume ones.
pub fn q_tet(vertices: &[[f64; 3]; 4]) -> Result<f64> {
    let (a, b, c) = tet_vectors(vertices)?;
    let bxc = geom::cross3(&b, &c);
    let cxa = geom::cross3(&c, &a);
    let axb = geom::cross3(&a, &b);
    let six_vol = geom::dot(&a, &bxc).abs();
    if six_vol == 0.0 {
        return Ok(0.0);
    }
    let far = [
        axb[0] + bxc[0] + cxa[0],
        axb[1] + bxc[1] + cxa[1],
        axb[2] + bxc[2] + cxa[2],
    ];
    let area_sum = geom::norm(&axb) + geom::norm(&bxc) + geom::norm(&cxa) + geom::norm(&far);
    let r_s = six_vol / area_sum;
    let num = [
        geom::dot(&a, &a) * bxc[0] + geom::dot(&b, &b) * cxa[0] + geom::dot(&c, &c) * axb[0],
        geom::dot(&a, &a) * bxc[1] + geom::dot(&b, &b) * cxa[1] + geom::dot(&c, &c) * axb[1],
        geom::dot(&a, &a) * bxc[2] + geom::dot(&b, &b) * cxa[2] + geom::dot(&c, &c) * axb[2],
    ];
    let r_circ = geom::norm(&num) / (2.0 * six_vol);
    if r_circ == 0.0 {
        return Ok(0.0);
    }
    Ok((3.0 * r_s / r_circ).clamp(0.0, 1.0))
}

/// Alternative tetrahedron shape measure built from volume and edge
/// lengths, normalized so regular tetrahedra score 1.
pub fn shape_measure_s(vertices: &[[f64; 3]; 4]) -> Result<f64> {
    let (a, b, c) = tet_vectors(vertices)?;
    let vol = geom::dot(&a, &geom::cross3(&b, &c)).abs() / 6.0;
    let mut sum_sq = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            let d = geom::sub3(&vertices[j], &vertices[i]);
            sum_sq += geom::dot(&d, &d);
        }
    }
    if sum_sq == 0.0 {
        return Ok(0.0);
    }
    let norm_const = 72.0 * 3.0f64.sqrt();
    Ok((norm_const * vol / sum_sq.powf(1.5)).clamp(0.0, 1.0))
}

/// Quality factor of mesh element `e` (triangle or tetrahedron).
pub fn element_quality(mesh: &Mesh, e: usize) -> Result<f64> {
    let elem = mesh.element(e);
    if mesh.dim() == 2 {
        let a = geom::dist(mesh.node(elem[0]), mesh.node(elem[1]));
        let b = geom::dist(mesh.node(elem[1]), mesh.node(elem[2]));
        let c = geom::dist(mesh.node(elem[2]), mesh.node(elem[0]));
        q_triangle(a, b, c)
    } else {
        let mut v = [[0.0; 3]; 4];
        for (slot, &n) in elem.iter().enumerate() {
            v[slot].copy_from_slice(mesh.node(n));
        }
        q_tet(&v)
    }
}

/// Mean absolute relative deviation of spring lengths from their targets.
pub fn misfit_mu(edges: &EdgeSet, l0: &[f64]) -> Result<f64> {
    if edges.is_empty() {
        return Err(MeshError::UndefinedStatistic(
            "misfit of an empty edge set".into(),
        ));
    }
    assert_eq!(edges.len(), l0.len());
    let sum: f64 = edges
        .lengths
        .iter()
        .zip(l0)
        .map(|(&l, &t)| ((l - t) / t).abs())
        .sum();
    Ok(sum / edges.len() as f64)
}

/// Relative length change of a single spring.
#[inline]
pub fn strain_eps(l: f64, l0: f64) -> f64 {
    (l - l0) / l0
}

/// Elements per refinement region, assigned by barycentre membership.
pub fn classify_regions(mesh: &Mesh, guide: &GuideMesh) -> Result<Vec<Region>> {
    mesh.barycentres()
        .iter()
        .map(|b| guide.region_of_cartesian(b))
        .collect()
}

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RegionCounts {
    pub refined: usize,
    pub transition: usize,
    pub coarse: usize,
}

/// Per-iteration quality summary.
#[derive(Clone, Debug, Serialize)]
pub struct MeshStats {
    pub iteration: usize,
    pub q_min: f64,
    pub q_mean: f64,
    pub mu: f64,
    pub histogram: Vec<usize>,
    pub region_counts: RegionCounts,
    pub nodes: usize,
    pub elements: usize,
    pub edits_added: usize,
    pub edits_removed: usize,
}

impl MeshStats {
    pub fn compute(
        mesh: &Mesh,
        edges: &EdgeSet,
        l0: &[f64],
        guide: &GuideMesh,
        iteration: usize,
        edits_added: usize,
        edits_removed: usize,
    ) -> Result<MeshStats> {
        let ne = mesh.element_count();
        if ne == 0 {
            return Err(MeshError::UndefinedStatistic("stats of an empty mesh".into()));
        }
        let mut q_min = f64::INFINITY;
        let mut q_sum = 0.0;
        let mut histogram = vec![0usize; HISTOGRAM_BINS];
        for e in 0..ne {
            let q = element_quality(mesh, e)?;
            q_min = q_min.min(q);
            q_sum += q;
            let bin = ((q * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            histogram[bin] += 1;
        }
        let mut region_counts = RegionCounts::default();
        for r in classify_regions(mesh, guide)? {
            match r {
                Region::Refined => region_counts.refined += 1,
                Region::Transition => region_counts.transition += 1,
                Region::Coarse => region_counts.coarse += 1,
            }
        }
        Ok(MeshStats {
            iteration,
            q_min,
            q_mean: q_sum / ne as f64,
            mu: misfit_mu(edges, l0)?,
            histogram,
            region_counts,
            nodes: mesh.node_count(),
            elements: ne,
            edits_added,
            edits_removed,
        })
    }

    /// Fraction of elements whose quality falls below `threshold`
    /// (a multiple of the bin width 0.05).
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        let cut = ((threshold * HISTOGRAM_BINS as f64).round() as usize).min(HISTOGRAM_BINS);
        let below: usize = self.histogram[..cut].iter().sum();
        below as f64 / self.elements.max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn regular_tet(edge: f64) -> [[f64; 3]; 4] {
        let s = edge / (2.0f64).sqrt();
        [
            [edge * 0.5, 0.0, -0.5 * s],
            [-edge * 0.5, 0.0, -0.5 * s],
            [0.0, edge * 0.5, 0.5 * s],
            [0.0, -edge * 0.5, 0.5 * s],
        ]
    }

    #[test]
    fn q_triangle_anchors() {
        assert_relative_eq!(q_triangle(1.0, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(q_triangle(3.0, 4.0, 5.0).unwrap(), 0.8, epsilon = 1e-9);
        assert!(q_triangle(1.0, 1.0, 1.999).unwrap() < 0.01);
        assert!(q_triangle(1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn q_tet_anchors() {
        for edge in [1.0, 0.37, 2900.0] {
            assert_relative_eq!(q_tet(&regular_tet(edge)).unwrap(), 1.0, epsilon = 1e-9);
        }
        let coplanar = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0],
        ];
        assert_eq!(q_tet(&coplanar).unwrap(), 0.0);
        let coincident = [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        assert!(q_tet(&coincident).is_err());
    }

    #[test]
    fn q_tet_permutation_invariant() {
        let v = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let base = q_tet(&v).unwrap();
        // Every choice of apex vertex O must give the same quality.
        let perms: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 2, 3, 0], [2, 3, 0, 1], [3, 0, 1, 2]];
        for p in perms {
            let w = [v[p[0]], v[p[1]], v[p[2]], v[p[3]]];
            assert_relative_eq!(q_tet(&w).unwrap(), base, epsilon = 1e-12);
        }
    }

    #[test]
    fn q_scale_invariant() {
        let v = [
            [0.1, 0.2, 0.3],
            [1.3, 0.1, 0.2],
            [0.4, 1.1, -0.2],
            [0.2, 0.3, 1.4],
        ];
        let base = q_tet(&v).unwrap();
        for lambda in [1e-6, 3.7, 2.9e5] {
            let w = v.map(|p| p.map(|c| c * lambda));
            assert_relative_eq!(q_tet(&w).unwrap(), base, epsilon = 1e-11);
        }
        let qt = q_triangle(3.0, 4.0, 5.0).unwrap();
        assert_relative_eq!(
            q_triangle(3e-4, 4e-4, 5e-4).unwrap(),
            qt,
            epsilon = 1e-12
        );
    }

    #[test]
    fn shape_measure_anchors() {
        assert_relative_eq!(
            shape_measure_s(&regular_tet(1.0)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let coplanar = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0],
        ];
        assert_eq!(shape_measure_s(&coplanar).unwrap(), 0.0);
    }

    #[test]
    fn misfit_examples() {
        let edges = EdgeSet {
            edges: vec![[0, 1], [1, 2]],
            lengths: vec![1.1, 0.9],
        };
        assert_relative_eq!(misfit_mu(&edges, &[1.0, 1.0]).unwrap(), 0.1);
        let same = EdgeSet {
            edges: vec![[0, 1]],
            lengths: vec![2.5],
        };
        assert_eq!(misfit_mu(&same, &[2.5]).unwrap(), 0.0);
        let empty = EdgeSet {
            edges: vec![],
            lengths: vec![],
        };
        assert!(misfit_mu(&empty, &[]).is_err());
    }

    #[test]
    fn misfit_is_order_invariant() {
        let a = EdgeSet {
            edges: vec![[0, 1], [1, 2], [2, 3]],
            lengths: vec![1.2, 0.7, 1.0],
        };
        let b = EdgeSet {
            edges: vec![[2, 3], [0, 1], [1, 2]],
            lengths: vec![1.0, 1.2, 0.7],
        };
        assert_relative_eq!(
            misfit_mu(&a, &[1.0, 1.0, 1.0]).unwrap(),
            misfit_mu(&b, &[1.0, 1.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn strain_examples() {
        assert_eq!(strain_eps(1.0, 1.0), 0.0);
        assert_relative_eq!(strain_eps(1.6, 1.0), 0.6);
        assert_relative_eq!(strain_eps(0.4, 1.0), -0.6);
    }
}
