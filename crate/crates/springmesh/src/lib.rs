//! Unstructured triangular and tetrahedral mesh generation with embedded
//! high-resolution sub-regions.
//!
//! Mesh nodes are treated as ends of virtual springs whose desired lengths
//! come from a coarse guide mesh; a linear static-equilibrium solve places
//! the nodes, and local add/reject, smoothing and shape-repair passes
//! iterate the mesh to the requested quality.

pub mod config;
pub mod error;
pub mod geom;
pub mod guide;
pub mod improvement;
pub mod mesh;
pub mod params;
pub mod placement;
pub mod quality;
pub mod report;
pub mod spring;
pub mod svg;
pub mod triangulation;
pub mod vtk;
pub mod workflow;

pub use error::{MeshError, Result};
pub use guide::{build_guide, interp_l0, to_guide_coords, GuideMesh, Region};
pub use mesh::{derive_edges, Boundary, EdgeSet, Mesh};
pub use params::{DomainShape, MeshParams, RegionExtent};
pub use quality::{
    misfit_mu, q_tet, q_triangle, shape_measure_s, strain_eps, MeshStats,
};
pub use triangulation::{delaunay, strip_outside, TriangulationResult};
pub use workflow::{run, run_desk_scale, Preset, RunResult, Termination};

