//! Small fixed-dimension vector helpers and exact orientation predicates.
//!
//! Coordinates are slices of length 2 or 3. Orientation conventions follow
//! the usual mathematical sign: positive area for counterclockwise triangles
//! and positive volume for right-handed tetrahedra.

use robust::{Coord, Coord3D};

#[inline]
pub fn sub2(a: &[f64], b: &[f64]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn sub3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn c2(p: &[f64]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn c3(p: &[f64]) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

/// Twice the signed area of triangle (a, b, c); exact sign.
#[inline]
pub fn orient2d(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    robust::orient2d(c2(a), c2(b), c2(c))
}

/// Six times the signed volume of tetrahedron (a, b, c, d); exact sign.
/// Positive for a right-handed vertex order.
#[inline]
pub fn orient3d(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    // robust::orient3d follows Shewchuk's plane-side convention, which is
    // the negation of det(b-a, c-a, d-a).
    -robust::orient3d(c3(a), c3(b), c3(c), c3(d))
}

/// Positive when `p` lies strictly inside the circumcircle of the
/// counterclockwise triangle (a, b, c); exact sign.
#[inline]
pub fn in_circle(a: &[f64], b: &[f64], c: &[f64], p: &[f64]) -> f64 {
    robust::incircle(c2(a), c2(b), c2(c), c2(p))
}

/// Positive when `p` lies strictly inside the circumsphere of the
/// positively-oriented tetrahedron (a, b, c, d); exact sign.
#[inline]
pub fn in_sphere(a: &[f64], b: &[f64], c: &[f64], d: &[f64], p: &[f64]) -> f64 {
    // robust::insphere expects Shewchuk-positive ordering, the opposite of
    // our volume convention; compensate by negating.
    -robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(p))
}

/// In-circumcircle test for four coplanar points in 3-D, positive when `p`
/// is strictly inside the circle through (a, b, c). The triangle may have
/// either orientation within its plane.
pub fn in_circle_coplanar(a: &[f64], b: &[f64], c: &[f64], p: &[f64]) -> f64 {
    // Project onto the coordinate plane most orthogonal to the facet normal;
    // the projection direction only needs to keep the triangle non-degenerate.
    let n = cross3(&sub3(b, a), &sub3(c, a));
    let ax = if n[0].abs() >= n[1].abs() && n[0].abs() >= n[2].abs() {
        0
    } else if n[1].abs() >= n[2].abs() {
        1
    } else {
        2
    };
    let (u, v) = match ax {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let pa = [a[u], a[v]];
    let pb = [b[u], b[v]];
    let pc = [c[u], c[v]];
    let pp = [p[u], p[v]];
    let orient = orient2d(&pa, &pb, &pc);
    let ic = in_circle(&pa, &pb, &pc, &pp);
    if orient < 0.0 {
        -ic
    } else {
        ic
    }
}
