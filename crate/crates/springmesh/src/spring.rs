//! Global static-equilibrium spring system: per-edge rank-one stiffness
//! blocks, sliding boundary-condition transforms, elimination of constrained
//! degrees of freedom, and the sparse solve.

use crate::error::{MeshError, Result};
use crate::mesh::EdgeSet;
use faer::sparse::{SparseColMat, Triplet};

/// Hard cap for the direct factorization path; larger systems fall back to
/// conjugate gradients.
const DIRECT_DOF_LIMIT: usize = 100_000;
const RESIDUAL_TOL: f64 = 1e-8;

/// Per-node sliding constraint. Angles are radians; `theta` follows each
/// domain's convention (clockwise from +Y for circles, colatitude for
/// spheres).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintKind {
    /// All components pinned at the node's current position.
    Fixed,
    /// Slides along the x-axis; y stays at its current value.
    SlideX,
    /// Slides along the y-axis; x stays at its current value.
    SlideY,
    /// Slides along a line tilted by `angle` from the x-axis.
    SlideLine { angle: f64 },
    /// Slides along the tangent line of the circle of the given radius at
    /// polar angle `theta`.
    SlideCircle { theta: f64, radius: f64 },
    /// Slides along the tangent plane of the sphere of the given radius at
    /// colatitude `theta`, longitude `phi`.
    SlideSphere { theta: f64, phi: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct NodeConstraint {
    pub node: usize,
    pub kind: ConstraintKind,
}

/// Extra single-axis pin (in the node's local frame) used to remove
/// rigid-body modes.
#[derive(Clone, Copy, Debug)]
pub struct Pin {
    pub node: usize,
    pub axis: usize,
}

/// The spring network at its current linearization point.
pub struct SpringProblem<'a> {
    pub dim: usize,
    pub coords: &'a [f64],
    pub edges: &'a EdgeSet,
    /// Desired length per edge.
    pub l0: &'a [f64],
    /// Uniform spring stiffness.
    pub stiffness: f64,
}

/// Local frame of one node: `x_global = rot * x_local`, with some local
/// components fixed.
#[derive(Clone, Copy, Debug)]
struct Frame {
    rot: [[f64; 3]; 3],
    fixed: [Option<f64>; 3],
}

impl Frame {
    fn identity() -> Self {
        Frame {
            rot: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            fixed: [None; 3],
        }
    }

    fn to_local(&self, x: &[f64], dim: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, o) in out.iter_mut().enumerate().take(dim) {
            for b in 0..dim {
                *o += self.rot[b][a] * x[b];
            }
        }
        out
    }

    fn to_global(&self, x: &[f64; 3], dim: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, o) in out.iter_mut().enumerate().take(dim) {
            for b in 0..dim {
                *o += self.rot[a][b] * x[b];
            }
        }
        out
    }
}

/// Rotation block of the boundary-condition transform for one node;
/// `x_global = R x_local`.
pub fn constraint_rotation(kind: &ConstraintKind) -> [[f64; 3]; 3] {
    match *kind {
        ConstraintKind::Fixed | ConstraintKind::SlideX | ConstraintKind::SlideY => {
            Frame::identity().rot
        }
        ConstraintKind::SlideLine { angle } => {
            let (s, c) = angle.sin_cos();
            [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
        }
        ConstraintKind::SlideCircle { theta, .. } => {
            let (s, c) = theta.sin_cos();
            // x = r sin(theta), y = r cos(theta): local x' is the tangent,
            // local y' the radial direction.
            [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
        }
        ConstraintKind::SlideSphere { theta, phi, .. } => {
            let (st, ct) = theta.sin_cos();
            let (sp, cp) = phi.sin_cos();
            // Columns: colatitude tangent, longitude tangent, radial.
            [
                [cp * ct, -sp, cp * st],
                [sp * ct, cp, sp * st],
                [-st, 0.0, ct],
            ]
        }
    }
}

fn build_frames(
    n: usize,
    dim: usize,
    coords: &[f64],
    constraints: &[NodeConstraint],
    pins: &[Pin],
) -> Result<Vec<Frame>> {
    let mut frames = vec![Frame::identity(); n];
    let mut seen = vec![false; n];
    for c in constraints {
        if c.node >= n {
            return Err(MeshError::Config(format!(
                "constraint references node {} of {n}",
                c.node
            )));
        }
        if seen[c.node] {
            return Err(MeshError::Config(format!(
                "node {} carries more than one constraint",
                c.node
            )));
        }
        seen[c.node] = true;
        let x = &coords[c.node * dim..(c.node + 1) * dim];
        let mut f = Frame {
            rot: constraint_rotation(&c.kind),
            fixed: [None; 3],
        };
        match c.kind {
            ConstraintKind::Fixed => {
                for a in 0..dim {
                    f.fixed[a] = Some(x[a]);
                }
            }
            ConstraintKind::SlideX => f.fixed[1] = Some(x[1]),
            ConstraintKind::SlideY => f.fixed[0] = Some(x[0]),
            ConstraintKind::SlideLine { .. } => {
                let local = f.to_local(x, dim);
                f.fixed[1] = Some(local[1]);
            }
            ConstraintKind::SlideCircle { radius, .. } => f.fixed[1] = Some(radius),
            ConstraintKind::SlideSphere { radius, .. } => f.fixed[2] = Some(radius),
        }
        frames[c.node] = f;
    }
    for p in pins {
        if p.node >= n || p.axis >= dim {
            return Err(MeshError::Config(format!(
                "pin references node {} axis {}",
                p.node, p.axis
            )));
        }
        let x = &coords[p.node * dim..(p.node + 1) * dim];
        let local = frames[p.node].to_local(x, dim);
        frames[p.node].fixed[p.axis] = Some(local[p.axis]);
    }
    Ok(frames)
}

/// Direction cosines of the 2-D element unknown vector: the stiffness block
/// is `k v v^T` and the target-length force is `-k l0 v`.
fn axis_vector_2d(alpha: f64) -> [f64; 4] {
    let (s, c) = alpha.sin_cos();
    [c, s, -c, -s]
}

fn axis_vector_3d(alpha: f64, beta: f64) -> [f64; 6] {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    [ca * cb, ca * sb, sa, -ca * cb, -ca * sb, -sa]
}

/// 4x4 stiffness block and right-hand-side vector of one 2-D spring tilted
/// by `alpha`. A spring at its natural length contributes zero net force.
pub fn element_stiffness_2d(alpha: f64, k: f64, l0: f64) -> ([[f64; 4]; 4], [f64; 4]) {
    let v = axis_vector_2d(alpha);
    let mut block = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            block[i][j] = k * v[i] * v[j];
        }
    }
    let rhs = v.map(|vi| -k * l0 * vi);
    (block, rhs)
}

/// 6x6 stiffness block and right-hand-side vector of one 3-D spring with
/// direction angles `alpha` (latitude-like) and `beta` (longitude-like).
pub fn element_stiffness_3d(alpha: f64, beta: f64, k: f64, l0: f64) -> ([[f64; 6]; 6], [f64; 6]) {
    let v = axis_vector_3d(alpha, beta);
    let mut block = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            block[i][j] = k * v[i] * v[j];
        }
    }
    let rhs = v.map(|vi| -k * l0 * vi);
    (block, rhs)
}

/// Edge direction angles from current coordinates: `alpha = atan2(dy, dx)`
/// in 2-D; latitude/longitude pair in 3-D.
pub fn edge_angles(coords: &[f64], dim: usize, i: usize, j: usize) -> (f64, f64) {
    let a = &coords[i * dim..(i + 1) * dim];
    let b = &coords[j * dim..(j + 1) * dim];
    if dim == 2 {
        ((b[1] - a[1]).atan2(b[0] - a[0]), 0.0)
    } else {
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let dz = b[2] - a[2];
        let horiz = dx.hypot(dy);
        (dz.atan2(horiz), dy.atan2(dx))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Dof {
    Free(usize),
    Fixed(f64),
}

/// Assembled constrained system `K' x' = f'` over the free degrees of
/// freedom, stored symmetric CSR.
pub struct AssembledSystem {
    dim: usize,
    n_nodes: usize,
    frames: Vec<Frame>,
    dof_map: Vec<Dof>,
    pub n_free: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Scatter-add all element blocks, apply the per-node rotations and
/// eliminate constrained degrees of freedom by substitution into the
/// right-hand side.
pub fn assemble(
    problem: &SpringProblem,
    constraints: &[NodeConstraint],
    pins: &[Pin],
) -> Result<AssembledSystem> {
    let dim = problem.dim;
    assert!(dim == 2 || dim == 3);
    assert_eq!(problem.edges.len(), problem.l0.len());
    let n = problem.coords.len() / dim;
    let frames = build_frames(n, dim, problem.coords, constraints, pins)?;

    let mut dof_map = Vec::with_capacity(n * dim);
    let mut n_free = 0;
    for frame in &frames {
        for a in 0..dim {
            match frame.fixed[a] {
                Some(v) => dof_map.push(Dof::Fixed(v)),
                None => {
                    dof_map.push(Dof::Free(n_free));
                    n_free += 1;
                }
            }
        }
    }

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; n_free];
    let k_spring = problem.stiffness;
    for (e, &[i, j]) in problem.edges.edges.iter().enumerate() {
        let (alpha, beta) = edge_angles(problem.coords, dim, i, j);
        let v2;
        let v3;
        let v: &[f64] = if dim == 2 {
            v2 = axis_vector_2d(alpha);
            &v2
        } else {
            v3 = axis_vector_3d(alpha, beta);
            &v3
        };
        // Rotate the element vector halves into the nodes' local frames;
        // the rank-one structure survives: B' = k u u^T, f' = -k l0 u.
        let w = 2 * dim;
        let mut u = [0.0f64; 6];
        for (half, node) in [(0, i), (1, j)] {
            let local = frames[node].to_local(&v[half * dim..(half + 1) * dim], dim);
            u[half * dim..half * dim + dim].copy_from_slice(&local[..dim]);
        }
        let l0 = problem.l0[e];
        for p in 0..w {
            let node_p = if p < dim { i } else { j };
            let gp = node_p * dim + p % dim;
            let Dof::Free(row) = dof_map[gp] else { continue };
            rhs[row] += -k_spring * l0 * u[p];
            for q in 0..w {
                let node_q = if q < dim { i } else { j };
                let gq = node_q * dim + q % dim;
                let val = k_spring * u[p] * u[q];
                match dof_map[gq] {
                    Dof::Free(col) => triplets.push((row, col, val)),
                    Dof::Fixed(g) => rhs[row] -= val * g,
                }
            }
        }
    }

    triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
    let mut row_ptr = vec![0usize; n_free + 1];
    let mut col_idx: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut it = triplets.into_iter().peekable();
    while let Some((r, c, mut v)) = it.next() {
        while let Some(&(r2, c2, v2)) = it.peek() {
            if r2 == r && c2 == c {
                v += v2;
                it.next();
            } else {
                break;
            }
        }
        col_idx.push(c);
        values.push(v);
        row_ptr[r + 1] += 1;
    }
    for r in 0..n_free {
        row_ptr[r + 1] += row_ptr[r];
    }

    Ok(AssembledSystem {
        dim,
        n_nodes: n,
        frames,
        dof_map,
        n_free,
        row_ptr,
        col_idx,
        values,
        rhs,
    })
}

impl AssembledSystem {
    fn spmv(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n_free {
            let mut acc = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[idx] * x[self.col_idx[idx]];
            }
            out[r] = acc;
        }
    }

    fn residual_norm(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n_free];
        self.spmv(x, &mut ax);
        ax.iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_free];
        for r in 0..self.n_free {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[idx] == r {
                    d[r] = self.values[idx];
                }
            }
        }
        d
    }

    fn solve_direct(&self) -> Result<Vec<f64>> {
        faer::set_global_parallelism(faer::Par::Seq);
        let mut trips: Vec<Triplet<usize, usize, f64>> =
            Vec::with_capacity(self.col_idx.len());
        for r in 0..self.n_free {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                trips.push(Triplet::new(r, self.col_idx[idx], self.values[idx]));
            }
        }
        let mat = SparseColMat::try_new_from_triplets(self.n_free, self.n_free, &trips)
            .map_err(|e| MeshError::Numerical(format!("sparse assembly failed: {e:?}")))?;
        let llt = mat.sp_cholesky(faer::Side::Lower).map_err(|e| {
            MeshError::ConstraintDeficiency(format!("Cholesky factorization failed: {e:?}"))
        })?;
        use faer::prelude::Solve;
        let b = faer::Mat::from_fn(self.n_free, 1, |i, _| self.rhs[i]);
        let x = llt.solve(&b);
        Ok((0..self.n_free).map(|i| x[(i, 0)]).collect())
    }

    fn solve_cg(&self, x0: Option<Vec<f64>>) -> Result<Vec<f64>> {
        let n = self.n_free;
        let b_norm = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
        if b_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let diag = self.diag();
        if diag.iter().any(|&d| d <= 0.0) {
            return Err(MeshError::ConstraintDeficiency(
                "zero or negative diagonal entry in the reduced stiffness".into(),
            ));
        }
        let mut r = vec![0.0; n];
        self.spmv(&x, &mut r);
        for i in 0..n {
            r[i] = self.rhs[i] - r[i];
        }
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let max_iter = 40 * n + 100;
        for _ in 0..max_iter {
            let res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if res <= RESIDUAL_TOL * b_norm {
                return Ok(x);
            }
            self.spmv(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(MeshError::ConstraintDeficiency(
                    "conjugate gradients hit a non-positive curvature direction".into(),
                ));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(MeshError::Numerical(format!(
            "conjugate gradients stalled at relative residual {:.3e}",
            self.residual_norm(&x) / b_norm
        )))
    }

    /// Solve for the free local coordinates. The contract is the residual
    /// bound `|K'x' - f'| <= 1e-8 |f'|`, direct factorization below 1e5
    /// degrees of freedom and conjugate gradients above.
    pub fn solve(&self) -> Result<Vec<f64>> {
        if self.n_free == 0 {
            return Ok(Vec::new());
        }
        let b_norm = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x = if self.n_free <= DIRECT_DOF_LIMIT {
            let x = self.solve_direct()?;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(MeshError::ConstraintDeficiency(
                    "factorization produced non-finite values".into(),
                ));
            }
            x
        } else {
            self.solve_cg(None)?
        };
        if b_norm > 0.0 && self.residual_norm(&x) > RESIDUAL_TOL * b_norm {
            let x = self.solve_cg(Some(x))?;
            if self.residual_norm(&x) > RESIDUAL_TOL * b_norm {
                return Err(MeshError::Numerical(format!(
                    "solve residual {:.3e} exceeds {:.0e} of |f|",
                    self.residual_norm(&x) / b_norm,
                    RESIDUAL_TOL
                )));
            }
            return Ok(x);
        }
        Ok(x)
    }

    /// Recover global Cartesian coordinates from the local solution;
    /// unconstrained nodes pass through.
    pub fn recover_global(&self, x_local: &[f64]) -> Vec<f64> {
        let dim = self.dim;
        let mut coords = vec![0.0; self.n_nodes * dim];
        for node in 0..self.n_nodes {
            let mut local = [0.0; 3];
            for a in 0..dim {
                local[a] = match self.dof_map[node * dim + a] {
                    Dof::Free(idx) => x_local[idx],
                    Dof::Fixed(v) => v,
                };
            }
            let global = self.frames[node].to_global(&local, dim);
            coords[node * dim..(node + 1) * dim].copy_from_slice(&global[..dim]);
        }
        coords
    }
}

/// Rescale tangentially-displaced circle/sphere nodes back onto their
/// boundary radius; line-sliding nodes are already on their line.
pub fn project_to_boundary(
    coords: &mut [f64],
    dim: usize,
    constraints: &[NodeConstraint],
) -> Result<()> {
    for c in constraints {
        let radius = match c.kind {
            ConstraintKind::SlideCircle { radius, .. } => radius,
            ConstraintKind::SlideSphere { radius, .. } => radius,
            _ => continue,
        };
        let x = &mut coords[c.node * dim..(c.node + 1) * dim];
        let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(MeshError::ProjectionSingular { node: c.node });
        }
        let scale = radius / r;
        for v in x {
            *v *= scale;
        }
    }
    Ok(())
}

/// Total spring energy `sum k (l - l0)^2` of the network.
pub fn spring_energy(coords: &[f64], dim: usize, edges: &EdgeSet, l0: &[f64], k: f64) -> f64 {
    edges
        .edges
        .iter()
        .zip(l0)
        .map(|(&[i, j], &t)| {
            let a = &coords[i * dim..(i + 1) * dim];
            let b = &coords[j * dim..(j + 1) * dim];
            let l = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            k * (l - t) * (l - t)
        })
        .sum()
}

/// Assemble, solve and recover in one step; returns the new coordinates.
pub fn solve_equilibrium(
    problem: &SpringProblem,
    constraints: &[NodeConstraint],
    pins: &[Pin],
) -> Result<Vec<f64>> {
    let system = assemble(problem, constraints, pins)?;
    let x = system.solve()?;
    Ok(system.recover_global(&x))
}
