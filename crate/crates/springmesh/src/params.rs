//! Generation parameters: domain geometry, refinement regions, spring-length
//! targets and convergence tolerances.

use crate::error::{MeshError, Result};
use serde::{Deserialize, Serialize};

/// The meshed domain. Lengths are in the same units as coordinates (km in
/// the shipped configurations).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainShape {
    /// `x` in `[-length/2, length/2]`, `y` in `[-depth, 0]`.
    Rectangle { length: f64, depth: f64 },
    /// Ring between two concentric circles centred at the origin.
    Annulus { r_inner: f64, r_outer: f64 },
    /// Volume between two concentric spheres centred at the origin.
    Shell { r_inner: f64, r_outer: f64 },
}

impl DomainShape {
    pub fn dim(&self) -> usize {
        match self {
            DomainShape::Shell { .. } => 3,
            _ => 2,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            DomainShape::Rectangle { length, depth } => length.hypot(depth),
            DomainShape::Annulus { r_outer, .. } | DomainShape::Shell { r_outer, .. } => {
                2.0 * r_outer
            }
        }
    }

    /// True when the barycentre-style inequality for the domain holds.
    pub fn contains(&self, p: &[f64]) -> bool {
        match *self {
            DomainShape::Rectangle { length, depth } => {
                p[0] >= -0.5 * length && p[0] <= 0.5 * length && p[1] >= -depth && p[1] <= 0.0
            }
            DomainShape::Annulus { r_inner, r_outer } => {
                let r = p[0].hypot(p[1]);
                r >= r_inner && r <= r_outer
            }
            DomainShape::Shell { r_inner, r_outer } => {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                r >= r_inner && r <= r_outer
            }
        }
    }
}

/// Extents of a refinement box, measured in length units. `depth` extends
/// inward (down / toward the centre) from the anchor, `length` and `width`
/// are centred on it. `width` is ignored in 2-D.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionExtent {
    pub depth: f64,
    pub length: f64,
    pub width: f64,
}

/// Full parameter set for one mesh generation run.
///
/// `center` holds the refined-region anchor in the domain's natural
/// coordinates: `(x0, z0)` for rectangles, `(theta0, r0)` for annuli and
/// `(theta0, phi0, r0)` for shells, angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub domain: DomainShape,
    pub center: [f64; 3],
    pub refined: RegionExtent,
    pub transition: RegionExtent,
    pub l0_refined: f64,
    pub l0_coarse: f64,
    pub q_min_tol: f64,
    pub q_mean_tol: f64,
    pub mu_tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl MeshParams {
    /// Reference rectangular-box configuration: a 40000 x 2900 km section
    /// with a 3333 x 300 km refined patch at the top centre and an
    /// edge-length contrast of 1/200.
    pub fn reference_rectangle() -> Self {
        MeshParams {
            domain: DomainShape::Rectangle {
                length: 40000.0,
                depth: 2900.0,
            },
            center: [0.0, 0.0, 0.0],
            refined: RegionExtent {
                depth: 300.0,
                length: 3333.0,
                width: 0.0,
            },
            transition: RegionExtent {
                depth: 2900.0,
                length: 8000.0,
                width: 0.0,
            },
            l0_refined: 7.5,
            l0_coarse: 1500.0,
            q_min_tol: 0.45,
            q_mean_tol: 0.89,
            mu_tol: 0.025,
            max_iterations: 30,
            seed: 1,
        }
    }

    /// Reference cylindrical-annulus configuration (inner radius 3471 km,
    /// outer 6371 km, refined patch at 90 degrees colatitude on the outer
    /// boundary).
    pub fn reference_annulus() -> Self {
        MeshParams {
            domain: DomainShape::Annulus {
                r_inner: 3471.0,
                r_outer: 6371.0,
            },
            center: [0.5 * std::f64::consts::PI, 6371.0, 0.0],
            refined: RegionExtent {
                depth: 300.0,
                length: 3333.0,
                width: 0.0,
            },
            transition: RegionExtent {
                depth: 2900.0,
                length: 8000.0,
                width: 0.0,
            },
            l0_refined: 10.0,
            l0_coarse: 2000.0,
            q_min_tol: 0.30,
            q_mean_tol: 0.93,
            mu_tol: 0.04,
            max_iterations: 30,
            seed: 1,
        }
    }

    /// Reference spherical-shell configuration (refined tesseroid of
    /// 2200 x 5000 x 300 km at 90N/90E on the outer boundary, edge-length
    /// contrast 1/33).
    pub fn reference_shell() -> Self {
        MeshParams {
            domain: DomainShape::Shell {
                r_inner: 3471.0,
                r_outer: 6371.0,
            },
            center: [
                0.5 * std::f64::consts::PI,
                0.5 * std::f64::consts::PI,
                6371.0,
            ],
            refined: RegionExtent {
                depth: 300.0,
                length: 2200.0,
                width: 5000.0,
            },
            transition: RegionExtent {
                depth: 2900.0,
                length: 6800.0,
                width: 9600.0,
            },
            l0_refined: 60.0,
            l0_coarse: 2000.0,
            q_min_tol: 0.23,
            q_mean_tol: 0.86,
            mu_tol: 0.11,
            max_iterations: 30,
            seed: 1,
        }
    }

    /// Check invariants; returns non-fatal warnings (e.g. a refined region
    /// close to the polar axis).
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.l0_refined <= 0.0 || self.l0_coarse <= 0.0 {
            return Err(MeshError::Config(
                "l0_refined and l0_coarse must be positive".into(),
            ));
        }
        if self.l0_refined > self.l0_coarse {
            return Err(MeshError::Config(format!(
                "l0_refined ({}) must not exceed l0_coarse ({})",
                self.l0_refined, self.l0_coarse
            )));
        }
        for (name, v) in [("q_min_tol", self.q_min_tol), ("q_mean_tol", self.q_mean_tol)] {
            if !(0.0 < v && v < 1.0) {
                return Err(MeshError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(0.0 < self.mu_tol && self.mu_tol < 1.0) {
            return Err(MeshError::Config(format!(
                "mu_tol must lie in (0, 1), got {}",
                self.mu_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(MeshError::Config("max_iterations must be at least 1".into()));
        }
        let nested = |inner: &RegionExtent, outer: &RegionExtent| {
            inner.depth <= outer.depth
                && inner.length <= outer.length
                && (self.domain.dim() == 2 || inner.width <= outer.width)
        };
        if !nested(&self.refined, &self.transition) {
            return Err(MeshError::Config(
                "refined region extents exceed the transition region".into(),
            ));
        }
        match self.domain {
            DomainShape::Rectangle { length, depth } => {
                let (x0, z0) = (self.center[0], self.center[1]);
                let within = |e: &RegionExtent| {
                    x0 - 0.5 * e.length >= -0.5 * length
                        && x0 + 0.5 * e.length <= 0.5 * length
                        && z0 - e.depth >= -depth
                        && z0 <= 0.0
                };
                if !within(&self.refined) || !within(&self.transition) {
                    return Err(MeshError::Config(
                        "refined/transition region extends outside the rectangle".into(),
                    ));
                }
            }
            DomainShape::Annulus { r_inner, r_outer } => {
                if r_inner >= r_outer {
                    return Err(MeshError::Config(format!(
                        "empty domain: r_inner ({r_inner}) must be smaller than r_outer ({r_outer})"
                    )));
                }
                let r0 = self.center[1];
                let within = |e: &RegionExtent| {
                    let half = 0.5 * e.length / r0;
                    r0 - e.depth >= r_inner && r0 <= r_outer && half < std::f64::consts::PI
                };
                if !within(&self.refined) || !within(&self.transition) {
                    return Err(MeshError::Config(
                        "refined/transition region extends outside the annulus".into(),
                    ));
                }
            }
            DomainShape::Shell { r_inner, r_outer } => {
                if r_inner >= r_outer {
                    return Err(MeshError::Config(format!(
                        "empty domain: r_inner ({r_inner}) must be smaller than r_outer ({r_outer})"
                    )));
                }
                let (theta0, r0) = (self.center[0], self.center[2]);
                let within = |e: &RegionExtent| {
                    let half_t = 0.5 * e.length / r0;
                    let half_p = 0.5 * e.width / r0;
                    theta0 - half_t >= 0.0
                        && theta0 + half_t <= std::f64::consts::PI
                        && half_p < std::f64::consts::PI
                        && r0 - e.depth >= r_inner
                        && r0 <= r_outer
                };
                if !within(&self.refined) || !within(&self.transition) {
                    return Err(MeshError::Config(
                        "refined/transition region extends outside the shell".into(),
                    ));
                }
                let margin = 0.2;
                let half_t = 0.5 * self.transition.length / r0;
                if theta0 - half_t < margin || theta0 + half_t > std::f64::consts::PI - margin {
                    warnings.push(
                        "refined region lies close to the polar axis; guide-mesh \
                         interpolation degrades there"
                            .into(),
                    );
                }
            }
        }
        Ok(warnings)
    }
}
