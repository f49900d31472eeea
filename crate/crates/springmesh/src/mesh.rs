//! Mesh containers, connectivity derivation and basic geometric queries.

use crate::error::{MeshError, Result};
use crate::geom;
use serde::{Deserialize, Serialize};

/// Which rectangle side a boundary node lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RectSide {
    Left,
    Right,
    Bottom,
    Top,
}

/// Per-node boundary tag. `Corner` nodes belong to two rectangle sides and
/// stay fully pinned; curved domains tag nodes by which bounding surface
/// they sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    Interior,
    Side(RectSide),
    Corner,
    InnerSurface,
    OuterSurface,
}

impl Boundary {
    #[inline]
    pub fn is_boundary(self) -> bool {
        self != Boundary::Interior
    }
}

/// Simplicial mesh: triangles in 2-D, tetrahedra in 3-D.
///
/// Coordinates are stored flat and node-major; element connectivity flat and
/// element-major with `dim + 1` node ids per simplex. All elements keep
/// positive orientation (counterclockwise / right-handed).
#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    elements: Vec<usize>,
    boundary: Vec<Boundary>,
}

impl Mesh {
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        elements: Vec<usize>,
        boundary: Vec<Boundary>,
    ) -> Result<Self> {
        assert!(dim == 2 || dim == 3, "mesh dimension must be 2 or 3");
        assert_eq!(coords.len() % dim, 0);
        assert_eq!(elements.len() % (dim + 1), 0);
        let n = coords.len() / dim;
        if boundary.len() != n {
            return Err(MeshError::Config(format!(
                "boundary tags cover {} nodes but mesh has {}",
                boundary.len(),
                n
            )));
        }
        let mut mesh = Mesh {
            dim,
            coords,
            elements,
            boundary,
        };
        mesh.validate_connectivity()?;
        mesh.normalize_orientation()?;
        Ok(mesh)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn element_count(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    #[inline]
    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }

    #[inline]
    pub fn boundary_tag(&self, i: usize) -> Boundary {
        self.boundary[i]
    }

    #[inline]
    pub fn boundary_tags(&self) -> &[Boundary] {
        &self.boundary
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn set_node(&mut self, i: usize, p: &[f64]) {
        self.coords[i * self.dim..(i + 1) * self.dim].copy_from_slice(p);
    }

    fn validate_connectivity(&self) -> Result<()> {
        let n = self.node_count();
        let k = self.dim + 1;
        for (e, elem) in self.elements.chunks(k).enumerate() {
            for (a, &na) in elem.iter().enumerate() {
                if na >= n {
                    return Err(MeshError::MalformedElement { element: e, node: na });
                }
                if elem[a + 1..].contains(&na) {
                    return Err(MeshError::MalformedElement { element: e, node: na });
                }
            }
        }
        Ok(())
    }

    /// Swap two vertices of every negatively-oriented simplex so that all
    /// signed areas/volumes come out positive.
    pub fn normalize_orientation(&mut self) -> Result<()> {
        let k = self.dim + 1;
        let dim = self.dim;
        for e in 0..self.element_count() {
            let s = {
                let elem = self.element(e);
                if dim == 2 {
                    geom::orient2d(self.node(elem[0]), self.node(elem[1]), self.node(elem[2]))
                } else {
                    geom::orient3d(
                        self.node(elem[0]),
                        self.node(elem[1]),
                        self.node(elem[2]),
                        self.node(elem[3]),
                    )
                }
            };
            if s == 0.0 {
                return Err(MeshError::DegenerateInput(format!(
                    "element {e} has zero signed {}",
                    if dim == 2 { "area" } else { "volume" }
                )));
            }
            if s < 0.0 {
                self.elements.swap(e * k, e * k + 1);
            }
        }
        Ok(())
    }

    pub fn signed_measure(&self, e: usize) -> f64 {
        let elem = self.element(e);
        if self.dim == 2 {
            0.5 * geom::orient2d(self.node(elem[0]), self.node(elem[1]), self.node(elem[2]))
        } else {
            geom::orient3d(
                self.node(elem[0]),
                self.node(elem[1]),
                self.node(elem[2]),
                self.node(elem[3]),
            ) / 6.0
        }
    }

    /// Per-element arithmetic mean of vertex coordinates.
    pub fn barycentres(&self) -> Vec<Vec<f64>> {
        let k = self.dim + 1;
        (0..self.element_count())
            .map(|e| {
                let mut b = vec![0.0; self.dim];
                for &n in self.element(e) {
                    for (bi, &ci) in b.iter_mut().zip(self.node(n)) {
                        *bi += ci;
                    }
                }
                for bi in &mut b {
                    *bi /= k as f64;
                }
                b
            })
            .collect()
    }

    /// Map node id -> ids of incident elements, in increasing element order.
    pub fn node_element_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in 0..self.element_count() {
            for &n in self.element(e) {
                adj[n].push(e);
            }
        }
        adj
    }

    /// Drop the given nodes, compact the remaining ids and rebuild nothing
    /// else: elements referencing a removed node are discarded. Returns the
    /// old -> new id map (`None` for removed nodes).
    pub fn remove_nodes(&self, removed: &[usize]) -> (Mesh, Vec<Option<usize>>) {
        let n = self.node_count();
        let mut gone = vec![false; n];
        for &r in removed {
            gone[r] = true;
        }
        let mut map = vec![None; n];
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut boundary = Vec::with_capacity(n);
        let mut next = 0;
        for i in 0..n {
            if !gone[i] {
                map[i] = Some(next);
                coords.extend_from_slice(self.node(i));
                boundary.push(self.boundary[i]);
                next += 1;
            }
        }
        let k = self.dim + 1;
        let mut elements = Vec::new();
        'outer: for e in 0..self.element_count() {
            let elem = self.element(e);
            let mut mapped = [0usize; 4];
            for (slot, &ni) in elem.iter().enumerate() {
                match map[ni] {
                    Some(m) => mapped[slot] = m,
                    None => continue 'outer,
                }
            }
            elements.extend_from_slice(&mapped[..k]);
        }
        (
            Mesh {
                dim: self.dim,
                coords,
                elements,
                boundary,
            },
            map,
        )
    }

    /// Keep only nodes referenced by at least one element.
    pub fn drop_orphan_nodes(&self) -> (Mesh, Vec<Option<usize>>) {
        let mut used = vec![false; self.node_count()];
        for &n in &self.elements {
            used[n] = true;
        }
        let orphans: Vec<usize> = (0..self.node_count()).filter(|&i| !used[i]).collect();
        self.remove_nodes(&orphans)
    }
}

/// Deduplicated element-edge list; each spring appears once with `i < j`.
#[derive(Clone, Debug)]
pub struct EdgeSet {
    pub edges: Vec<[usize; 2]>,
    pub lengths: Vec<f64>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Midpoint of edge `e` in the mesh's coordinates.
    pub fn midpoint(&self, mesh: &Mesh, e: usize) -> Vec<f64> {
        let [i, j] = self.edges[e];
        mesh.node(i)
            .iter()
            .zip(mesh.node(j))
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}

/// Deduplicated set of element edges with current lengths, sorted
/// lexicographically.
pub fn derive_edges(mesh: &Mesh) -> Result<EdgeSet> {
    let k = mesh.nodes_per_element();
    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(mesh.element_count() * k);
    for e in 0..mesh.element_count() {
        let elem = mesh.element(e);
        for a in 0..k {
            for b in a + 1..k {
                let (i, j) = (elem[a].min(elem[b]), elem[a].max(elem[b]));
                if i == j {
                    return Err(MeshError::MalformedElement { element: e, node: i });
                }
                edges.push([i, j]);
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let lengths = edges
        .iter()
        .map(|&[i, j]| geom::dist(mesh.node(i), mesh.node(j)))
        .collect();
    Ok(EdgeSet { edges, lengths })
}
