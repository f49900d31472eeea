//! Guide mesh: a very coarse simplicial mesh in the domain's natural
//! coordinates whose nodal values define the desired spring-length field by
//! linear shape-function interpolation.

use crate::error::{MeshError, Result};
use crate::geom;
use crate::params::{DomainShape, MeshParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordSystem {
    Cartesian,
    Polar,
    Spherical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Refined,
    Transition,
    Coarse,
}

/// Axis-aligned box in guide coordinates.
#[derive(Clone, Copy, Debug)]
struct GuideBox {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl GuideBox {
    fn contains(&self, p: &[f64], dim: usize) -> bool {
        (0..dim).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }
}

/// Coarse mesh carrying the desired spring-length field `l0`.
///
/// Built on a tensor grid whose breakpoints are the faces of the refined
/// and transition boxes plus the domain bounds. Every grid node inside or
/// on the refined box carries `l0_refined`; every other node `l0_coarse`.
/// One cell layer bridges the two rims, so the field grades linearly
/// across the transition shell.
#[derive(Clone, Debug)]
pub struct GuideMesh {
    pub coord_system: CoordSystem,
    dim: usize,
    domain: DomainShape,
    /// Sorted breakpoints per axis.
    breaks: [Vec<f64>; 3],
    /// Grid node coordinates in guide coordinates, node-major.
    nodes: Vec<f64>,
    /// Simplices, element-major, dim+1 ids each.
    elements: Vec<usize>,
    l0_values: Vec<f64>,
    refined_box: GuideBox,
    transition_box: GuideBox,
    /// Wrap centre for the periodic angle, if any (theta for annuli,
    /// phi for shells).
    wrap_center: Option<f64>,
}

fn axis_breaks(dom_lo: f64, dom_hi: f64, t_lo: f64, t_hi: f64, r_lo: f64, r_hi: f64) -> Vec<f64> {
    let span = dom_hi - dom_lo;
    let tol = 1e-9 * span;
    let mut b = vec![dom_lo, t_lo, r_lo, r_hi, t_hi, dom_hi];
    b.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(6);
    for v in b {
        match out.last() {
            Some(&last) if v - last <= tol => {}
            _ => out.push(v),
        }
    }
    out
}

impl GuideMesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn element_count(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }

    pub fn l0_values(&self) -> &[f64] {
        &self.l0_values
    }

    /// Global minimum of the desired-length field.
    pub fn min_l0(&self) -> f64 {
        self.l0_values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_l0(&self) -> f64 {
        self.l0_values.iter().cloned().fold(0.0, f64::max)
    }

    /// Region assignment of a point given in guide coordinates.
    pub fn region_of(&self, p: &[f64]) -> Result<Region> {
        let p = self.wrap(p);
        if self.refined_box.contains(&p, self.dim) {
            Ok(Region::Refined)
        } else if self.transition_box.contains(&p, self.dim) {
            Ok(Region::Transition)
        } else {
            Ok(Region::Coarse)
        }
    }

    fn wrap(&self, p: &[f64]) -> [f64; 3] {
        let mut q = [0.0; 3];
        q[..self.dim].copy_from_slice(&p[..self.dim]);
        if let Some(c) = self.wrap_center {
            let axis = match self.coord_system {
                CoordSystem::Polar => 0,
                CoordSystem::Spherical => 1,
                CoordSystem::Cartesian => unreachable!(),
            };
            q[axis] = c + wrap_to_pi(q[axis] - c);
        }
        q
    }

    fn locate_cell(&self, p: &[f64]) -> Option<[usize; 3]> {
        let mut cell = [0usize; 3];
        for a in 0..self.dim {
            let b = &self.breaks[a];
            let x = p[a];
            if x < b[0] || x > *b.last().unwrap() {
                return None;
            }
            // Lowest interval containing x: ties on interior breakpoints go
            // to the left cell so the lowest element id wins.
            let i = b.partition_point(|&v| v < x);
            cell[a] = if i == 0 { 0 } else { (i - 1).min(b.len() - 2) };
        }
        Some(cell)
    }

    fn cells_per_axis(&self, a: usize) -> usize {
        self.breaks[a].len() - 1
    }

    fn grid_node_id(&self, idx: [usize; 3]) -> usize {
        let nx = self.breaks[0].len();
        if self.dim == 2 {
            idx[1] * nx + idx[0]
        } else {
            let ny = self.breaks[1].len();
            (idx[2] * ny + idx[1]) * nx + idx[0]
        }
    }

    fn simplices_per_cell(&self) -> usize {
        if self.dim == 2 {
            2
        } else {
            6
        }
    }

    fn cell_first_element(&self, cell: [usize; 3]) -> usize {
        let cx = self.cells_per_axis(0);
        let idx = if self.dim == 2 {
            cell[1] * cx + cell[0]
        } else {
            let cy = self.cells_per_axis(1);
            (cell[2] * cy + cell[1]) * cx + cell[0]
        };
        idx * self.simplices_per_cell()
    }

    /// Barycentric weights of `p` in element `e`, as unnormalized signed
    /// measures plus their sum.
    fn bary(&self, e: usize, p: &[f64]) -> (Vec<f64>, f64) {
        let elem = self.element(e);
        let mut w = Vec::with_capacity(self.dim + 1);
        if self.dim == 2 {
            let v: Vec<&[f64]> = elem.iter().map(|&n| self.node(n)).collect();
            w.push(geom::orient2d(p, v[1], v[2]));
            w.push(geom::orient2d(v[0], p, v[2]));
            w.push(geom::orient2d(v[0], v[1], p));
        } else {
            let v: Vec<&[f64]> = elem.iter().map(|&n| self.node(n)).collect();
            w.push(geom::orient3d(p, v[1], v[2], v[3]));
            w.push(geom::orient3d(v[0], p, v[2], v[3]));
            w.push(geom::orient3d(v[0], v[1], p, v[3]));
            w.push(geom::orient3d(v[0], v[1], v[2], p));
        }
        let total: f64 = w.iter().sum();
        (w, total)
    }

    fn interp_in_cell(&self, cell: [usize; 3], p: &[f64]) -> f64 {
        let first = self.cell_first_element(cell);
        let count = self.simplices_per_cell();
        let mut best = (f64::NEG_INFINITY, first);
        for e in first..first + count {
            let (w, total) = self.bary(e, p);
            if total <= 0.0 {
                continue;
            }
            let min_rel = w.iter().cloned().fold(f64::INFINITY, f64::min) / total;
            if min_rel >= -1e-12 {
                return self.value_from_bary(e, &w, total);
            }
            if min_rel > best.0 {
                best = (min_rel, e);
            }
        }
        // Round-off kept the point marginally outside every simplex of its
        // cell; use the closest one.
        let (w, total) = self.bary(best.1, p);
        self.value_from_bary(best.1, &w, total)
    }

    fn value_from_bary(&self, e: usize, w: &[f64], total: f64) -> f64 {
        let elem = self.element(e);
        let num: f64 = w
            .iter()
            .zip(elem)
            .map(|(&wi, &n)| wi * self.l0_values[n])
            .sum();
        num / total
    }

    /// Desired length at one point given in guide coordinates.
    pub fn interp_l0_at(&self, p: &[f64]) -> Result<f64> {
        let q = self.wrap(p);
        match self.locate_cell(&q) {
            Some(cell) => Ok(self.interp_in_cell(cell, &q)),
            None => Err(MeshError::OutOfCoverage {
                x: q[0],
                y: q[1],
                z: if self.dim == 3 { q[2] } else { 0.0 },
            }),
        }
    }

    /// Desired length at one point, clamping every coordinate into the
    /// guide coverage first. The field is constant beyond the transition
    /// region, so clamping extends it naturally; used by the workflow where
    /// transient solver overshoot may push midpoints marginally outside.
    pub fn interp_l0_clamped(&self, p: &[f64]) -> f64 {
        let mut q = self.wrap(p);
        for a in 0..self.dim {
            let b = &self.breaks[a];
            q[a] = q[a].clamp(b[0], *b.last().unwrap());
        }
        let cell = self.locate_cell(&q).expect("clamped point in coverage");
        self.interp_in_cell(cell, &q)
    }

    /// Guide coordinates of a Cartesian point, tolerating the polar-axis
    /// singularity: on-axis points take the wrap-centre longitude, where
    /// the field value is independent of the choice for valid parameter
    /// sets. Radius still errors at zero.
    pub fn guide_coords_of(&self, p: &[f64]) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        match self.coord_system {
            CoordSystem::Cartesian => out[..self.dim].copy_from_slice(&p[..self.dim]),
            CoordSystem::Polar => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    return Err(MeshError::SingularCoordinate {
                        x: p[0],
                        y: p[1],
                        z: 0.0,
                    });
                }
                out[0] = p[0].atan2(p[1]);
                out[1] = r;
            }
            CoordSystem::Spherical => {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if r == 0.0 {
                    return Err(MeshError::SingularCoordinate {
                        x: p[0],
                        y: p[1],
                        z: p[2],
                    });
                }
                out[0] = (p[2] / r).clamp(-1.0, 1.0).acos();
                out[1] = if p[0].hypot(p[1]) == 0.0 {
                    self.wrap_center.unwrap_or(0.0)
                } else {
                    p[1].atan2(p[0])
                };
                out[2] = r;
            }
        }
        Ok(out)
    }

    /// Desired length at a Cartesian point, via the clamped lookup.
    pub fn l0_at_cartesian(&self, p: &[f64]) -> Result<f64> {
        let g = self.guide_coords_of(p)?;
        Ok(self.interp_l0_clamped(&g[..self.dim]))
    }

    /// Region of a Cartesian point.
    pub fn region_of_cartesian(&self, p: &[f64]) -> Result<Region> {
        let g = self.guide_coords_of(p)?;
        self.region_of(&g[..self.dim])
    }

    pub fn domain(&self) -> DomainShape {
        self.domain
    }
}

fn wrap_to_pi(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        // Keep the seam on the +PI side so guide coverage [c-PI, c+PI]
        // always contains the wrapped value.
        -PI
    } else {
        w
    }
}

/// Build the guide mesh for a parameter set.
pub fn build_guide(params: &MeshParams) -> Result<GuideMesh> {
    params.validate()?;
    let domain = params.domain;
    let dim = domain.dim();
    let (coord_system, dom_lo, dom_hi, anchor, wrap_center) = match domain {
        DomainShape::Rectangle { length, depth } => (
            CoordSystem::Cartesian,
            [-0.5 * length, -depth, 0.0],
            [0.5 * length, 0.0, 0.0],
            [params.center[0], params.center[1], 0.0],
            None,
        ),
        DomainShape::Annulus { r_inner, r_outer } => {
            let theta0 = params.center[0];
            (
                CoordSystem::Polar,
                [theta0 - PI, r_inner, 0.0],
                [theta0 + PI, r_outer, 0.0],
                [theta0, params.center[1], 0.0],
                Some(theta0),
            )
        }
        DomainShape::Shell { r_inner, r_outer } => {
            let phi0 = params.center[1];
            (
                CoordSystem::Spherical,
                [0.0, phi0 - PI, r_inner],
                [PI, phi0 + PI, r_outer],
                [params.center[0], phi0, params.center[2]],
                Some(phi0),
            )
        }
    };

    // Refined/transition boxes in guide coordinates. Angular extents are
    // arc lengths at the anchor radius.
    let box_of = |e: &crate::params::RegionExtent| -> GuideBox {
        match coord_system {
            CoordSystem::Cartesian => GuideBox {
                lo: [anchor[0] - 0.5 * e.length, anchor[1] - e.depth, 0.0],
                hi: [anchor[0] + 0.5 * e.length, anchor[1], 0.0],
            },
            CoordSystem::Polar => {
                let r0 = anchor[1];
                GuideBox {
                    lo: [anchor[0] - 0.5 * e.length / r0, r0 - e.depth, 0.0],
                    hi: [anchor[0] + 0.5 * e.length / r0, r0, 0.0],
                }
            }
            CoordSystem::Spherical => {
                let r0 = anchor[2];
                GuideBox {
                    lo: [
                        anchor[0] - 0.5 * e.length / r0,
                        anchor[1] - 0.5 * e.width / r0,
                        r0 - e.depth,
                    ],
                    hi: [
                        anchor[0] + 0.5 * e.length / r0,
                        anchor[1] + 0.5 * e.width / r0,
                        r0,
                    ],
                }
            }
        }
    };
    let refined_box = box_of(&params.refined);
    let transition_box = box_of(&params.transition);

    let mut breaks: [Vec<f64>; 3] = Default::default();
    for a in 0..dim {
        breaks[a] = axis_breaks(
            dom_lo[a],
            dom_hi[a],
            transition_box.lo[a].max(dom_lo[a]),
            transition_box.hi[a].min(dom_hi[a]),
            refined_box.lo[a].max(dom_lo[a]),
            refined_box.hi[a].min(dom_hi[a]),
        );
    }

    // Tensor-grid nodes, axis-0 fastest.
    let mut nodes = Vec::new();
    let mut l0_values = Vec::new();
    let counts: Vec<usize> = (0..dim).map(|a| breaks[a].len()).collect();
    let total_nodes: usize = counts.iter().product();
    for flat in 0..total_nodes {
        let mut rem = flat;
        let mut idx = [0usize; 3];
        for a in 0..dim {
            idx[a] = rem % counts[a];
            rem /= counts[a];
        }
        let mut p = [0.0; 3];
        for a in 0..dim {
            p[a] = breaks[a][idx[a]];
        }
        nodes.extend_from_slice(&p[..dim]);
        let inside_refined = refined_box.contains(&p, dim);
        l0_values.push(if inside_refined {
            params.l0_refined
        } else {
            params.l0_coarse
        });
    }

    // Split every cell into simplices sharing the cell's min-max diagonal,
    // so faces match between neighbouring cells.
    let mut elements = Vec::new();
    let cell_counts: Vec<usize> = (0..dim).map(|a| counts[a] - 1).collect();
    let total_cells: usize = cell_counts.iter().product();
    for flat in 0..total_cells {
        let mut rem = flat;
        let mut cell = [0usize; 3];
        for a in 0..dim {
            cell[a] = rem % cell_counts[a];
            rem /= cell_counts[a];
        }
        if dim == 2 {
            let n00 = cell[1] * counts[0] + cell[0];
            let n10 = n00 + 1;
            let n01 = n00 + counts[0];
            let n11 = n01 + 1;
            elements.extend_from_slice(&[n00, n10, n11]);
            elements.extend_from_slice(&[n00, n11, n01]);
        } else {
            let id = |dx: usize, dy: usize, dz: usize| {
                ((cell[2] + dz) * counts[1] + cell[1] + dy) * counts[0] + cell[0] + dx
            };
            // Six tetrahedra along the main diagonal, one per axis order.
            const ORDERS: [[usize; 3]; 6] = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            for ord in ORDERS {
                let mut d = [0usize; 3];
                let mut tet = [id(0, 0, 0), 0, 0, 0];
                for (slot, &axis) in ord.iter().enumerate() {
                    d[axis] = 1;
                    tet[slot + 1] = id(d[0], d[1], d[2]);
                }
                elements.extend_from_slice(&tet);
            }
        }
    }

    Ok(GuideMesh {
        coord_system,
        dim,
        domain,
        breaks,
        nodes,
        elements,
        l0_values,
        refined_box,
        transition_box,
        wrap_center,
    })
}

/// Convert Cartesian points to the guide's coordinate system, clamping the
/// radius into the domain so boundary-adjacent points never fall outside
/// coverage.
pub fn to_guide_coords(domain: &DomainShape, points: &[f64]) -> Result<Vec<f64>> {
    match *domain {
        DomainShape::Rectangle { .. } => Ok(points.to_vec()),
        DomainShape::Annulus { r_inner, r_outer } => {
            let mut out = Vec::with_capacity(points.len());
            let clamp_tol = 1e-6 * r_outer;
            for p in points.chunks(2) {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    return Err(MeshError::SingularCoordinate {
                        x: p[0],
                        y: p[1],
                        z: 0.0,
                    });
                }
                // theta is measured clockwise from +Y: x = r sin(theta),
                // y = r cos(theta).
                let theta = p[0].atan2(p[1]);
                let rc = if r < r_inner && r_inner - r <= clamp_tol {
                    r_inner
                } else if r > r_outer && r - r_outer <= clamp_tol {
                    r_outer
                } else {
                    r
                };
                out.push(theta);
                out.push(rc);
            }
            Ok(out)
        }
        DomainShape::Shell { r_inner, r_outer } => {
            let mut out = Vec::with_capacity(points.len());
            let clamp_tol = 1e-6 * r_outer;
            for p in points.chunks(3) {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let axis_dist = p[0].hypot(p[1]);
                if r == 0.0 || axis_dist == 0.0 {
                    return Err(MeshError::SingularCoordinate {
                        x: p[0],
                        y: p[1],
                        z: p[2],
                    });
                }
                let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
                let phi = p[1].atan2(p[0]);
                let rc = if r < r_inner && r_inner - r <= clamp_tol {
                    r_inner
                } else if r > r_outer && r - r_outer <= clamp_tol {
                    r_outer
                } else {
                    r
                };
                out.push(theta);
                out.push(phi);
                out.push(rc);
            }
            Ok(out)
        }
    }
}

/// Interpolated desired length at each point (guide coordinates).
pub fn interp_l0(guide: &GuideMesh, points: &[f64]) -> Result<Vec<f64>> {
    points
        .chunks(guide.dim())
        .map(|p| guide.interp_l0_at(p))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn rect_params() -> MeshParams {
        MeshParams::reference_rectangle()
    }

    pub fn annulus_params() -> MeshParams {
        MeshParams::reference_annulus()
    }

    pub fn shell_params() -> MeshParams {
        MeshParams::reference_shell()
    }

    #[test]
    fn rect_guide_regions() {
        let guide = build_guide(&rect_params()).unwrap();
        assert_eq!(guide.coord_system, CoordSystem::Cartesian);
        // Inside refined region.
        assert_eq!(guide.region_of(&[0.0, -100.0]).unwrap(), Region::Refined);
        // Transition shell.
        assert_eq!(
            guide.region_of(&[3000.0, -100.0]).unwrap(),
            Region::Transition
        );
        // Far field.
        assert_eq!(guide.region_of(&[15000.0, -100.0]).unwrap(), Region::Coarse);
        // Nodal values split between the two levels.
        let l0r = 7.5;
        let l0c = 1500.0;
        assert!(guide.l0_values().iter().all(|&v| v == l0r || v == l0c));
        assert_eq!(guide.min_l0(), l0r);
    }

    #[test]
    fn interpolation_reproduces_nodes_exactly() {
        let guide = build_guide(&rect_params()).unwrap();
        for i in 0..guide.node_count() {
            let p = guide.node(i).to_vec();
            let v = guide.interp_l0_at(&p).unwrap();
            assert_eq!(v, guide.l0_values()[i], "node {i}");
        }
    }

    #[test]
    fn refined_region_is_constant() {
        let guide = build_guide(&rect_params()).unwrap();
        for &(x, y) in &[(0.0, -50.0), (-1600.0, -1.0), (1600.0, -299.0), (0.0, 0.0)] {
            assert_relative_eq!(guide.interp_l0_at(&[x, y]).unwrap(), 7.5, epsilon = 1e-9);
        }
        for &(x, y) in &[(10000.0, -500.0), (-19999.0, -2899.0), (0.0, -2900.0)] {
            let v = guide.interp_l0_at(&[x, y]).unwrap();
            assert_relative_eq!(v, 1500.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn transition_midedge_is_mean() {
        // A guide edge running across the transition shell joins an l0r
        // node to an l0c node; its midpoint interpolates to the mean.
        let p = rect_params();
        let guide = build_guide(&p).unwrap();
        // Refined box top-right corner x: 1666.5; transition box: 4000.
        let a = [1666.5, 0.0];
        let b = [4000.0, 0.0];
        let mid = [0.5 * (a[0] + b[0]), 0.0];
        let v = guide.interp_l0_at(&mid).unwrap();
        assert_relative_eq!(v, 0.5 * (7.5 + 1500.0), max_relative = 1e-12);
    }

    #[test]
    fn constant_field_when_equal_targets() {
        let mut p = rect_params();
        p.l0_refined = 1500.0;
        let guide = build_guide(&p).unwrap();
        for &(x, y) in &[(0.0, -10.0), (5000.0, -2000.0), (-19000.0, -1500.0)] {
            assert_eq!(guide.interp_l0_at(&[x, y]).unwrap(), 1500.0);
        }
    }

    #[test]
    fn transition_profile_is_monotone() {
        let guide = build_guide(&rect_params()).unwrap();
        // March along the surface from the refined centre out to the coarse
        // region; values must be non-decreasing.
        let mut prev = 0.0;
        for k in 0..200 {
            let x = k as f64 * 25.0;
            let v = guide.interp_l0_at(&[x, 0.0]).unwrap();
            assert!(v >= prev - 1e-9, "x={x}: {v} < {prev}");
            prev = v;
        }
        assert_relative_eq!(prev, 1500.0);
    }

    #[test]
    fn continuity_across_element_boundaries() {
        let guide = build_guide(&rect_params()).unwrap();
        // Evaluate at points on shared cell faces from both sides.
        for &(x, y) in &[
            (1666.5, -150.0),
            (4000.0, -150.0),
            (-1666.5, -299.0),
            (0.0, -300.0),
        ] {
            let v = guide.interp_l0_at(&[x, y]).unwrap();
            for (dx, dy) in [(1e-7, 0.0), (-1e-7, 0.0), (0.0, 1e-7), (0.0, -1e-7)] {
                let w = guide.interp_l0_at(&[x + dx, y + dy]).unwrap();
                assert!(
                    (v - w).abs() <= 1e-6 * v.max(w),
                    "jump at ({x},{y}): {v} vs {w}"
                );
            }
        }
    }

    #[test]
    fn annulus_guide_uses_polar_coordinates() {
        let guide = build_guide(&annulus_params()).unwrap();
        assert_eq!(guide.coord_system, CoordSystem::Polar);
        // Centre of the refined region.
        let gp = to_guide_coords(
            &DomainShape::Annulus {
                r_inner: 3471.0,
                r_outer: 6371.0,
            },
            &[6371.0, 0.0],
        )
        .unwrap();
        assert_relative_eq!(gp[0], 0.5 * PI, epsilon = 1e-12);
        assert_relative_eq!(gp[1], 6371.0);
        assert_relative_eq!(guide.interp_l0_at(&gp).unwrap(), 10.0, epsilon = 1e-9);
        // Opposite side of the annulus is coarse.
        let far = to_guide_coords(
            &DomainShape::Annulus {
                r_inner: 3471.0,
                r_outer: 6371.0,
            },
            &[-6000.0, 0.0],
        )
        .unwrap();
        assert_relative_eq!(guide.interp_l0_at(&far).unwrap(), 2000.0, epsilon = 1e-9);
    }

    #[test]
    fn guide_coord_conventions() {
        let dom = DomainShape::Annulus {
            r_inner: 1.0,
            r_outer: 2.0,
        };
        // theta measured clockwise from +Y.
        let g = to_guide_coords(&dom, &[0.0, 2.0]).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 2.0);
        // Radius drift is clamped.
        let r_o = 2.0;
        let g = to_guide_coords(&dom, &[0.0, r_o * (1.0 + 1e-9)]).unwrap();
        assert_eq!(g[1], r_o);
        // Spherical centre of the refined region for the shell parameters.
        let shell = DomainShape::Shell {
            r_inner: 3471.0,
            r_outer: 6371.0,
        };
        let g = to_guide_coords(&shell, &[0.0, 6371.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 0.5 * PI);
        assert_relative_eq!(g[1], 0.5 * PI);
        assert_relative_eq!(g[2], 6371.0);
        // Coordinate singularities error out.
        assert!(to_guide_coords(&dom, &[0.0, 0.0]).is_err());
        assert!(to_guide_coords(&shell, &[0.0, 0.0, 5000.0]).is_err());
    }

    #[test]
    fn shell_guide_interpolates_refined_centre() {
        let guide = build_guide(&shell_params()).unwrap();
        let v = guide.interp_l0_at(&[0.5 * PI, 0.5 * PI, 6371.0]).unwrap();
        assert_relative_eq!(v, 60.0, epsilon = 1e-9);
        let coarse = guide.interp_l0_at(&[0.5 * PI, -0.5 * PI, 5000.0]).unwrap();
        assert_relative_eq!(coarse, 2000.0, epsilon = 1e-9);
        // Radial line through the refined centre: monotone decrease of l0
        // towards the surface.
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let r = 3471.0 + k as f64 * 29.0;
            let v = guide.interp_l0_at(&[0.5 * PI, 0.5 * PI, r]).unwrap();
            assert!(v <= prev + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn out_of_coverage_is_reported() {
        let guide = build_guide(&rect_params()).unwrap();
        assert!(matches!(
            guide.interp_l0_at(&[90000.0, -100.0]),
            Err(MeshError::OutOfCoverage { .. })
        ));
        // The clamped variant extends the constant far field instead.
        assert_eq!(guide.interp_l0_clamped(&[90000.0, -100.0]), 1500.0);
    }

    #[test]
    fn refined_region_must_fit() {
        let mut p = rect_params();
        p.refined.length = 50000.0;
        p.transition.length = 60000.0;
        assert!(matches!(build_guide(&p), Err(MeshError::Config(_))));
    }

    #[test]
    fn bad_l0_ordering_is_rejected() {
        let mut p = rect_params();
        p.l0_refined = 2000.0;
        assert!(build_guide(&p).is_err());
    }
}
