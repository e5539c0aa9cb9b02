//! Exact geometry of the upper half-plane model.
//!
//! `PSL(2,R)` acts on `H = {x + iy : y > 0}` by fractional-linear maps. A
//! group element `F` doubles as a frame (unit tangent vector): the identity is
//! the vector at `o = i` pointing straight up, towards `∞`, and `F` is its
//! image under `F`. Right multiplication by
//!
//! ```text
//! a_t = diag(e^{t/2}, e^{-t/2})      n_s = [[1, 0], [s, 1]]
//! ```
//!
//! gives the geodesic flow and the unstable horocycle flow respectively, with
//! `a_t n_s a_{-t} = n_{s e^{-t}}`.
//!
//! Hopf coordinates of a frame are `(ξ⁻, ξ⁺, t)`: the backward and forward
//! endpoints of its geodesic and the Busemann time `t = β_{ξ⁻}(π(F), o)`.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}) is not in the upper half-plane")]
    NotInHalfPlane { x: f64, y: f64 },
    #[error("matrix has non-positive or non-finite determinant {det}")]
    BadDeterminant { det: f64 },
    #[error("hopf coordinates need distinct endpoints")]
    DegenerateEndpoints,
}

/// A point of the boundary circle `R ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Finite(f64),
    Infinity,
}

impl BoundaryPoint {
    /// Wraps a real; `±inf` become the point at infinity.
    pub fn new(x: f64) -> Self {
        debug_assert!(!x.is_nan(), "boundary point from NaN");
        if x.is_finite() {
            BoundaryPoint::Finite(x)
        } else {
            BoundaryPoint::Infinity
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, BoundaryPoint::Infinity)
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            BoundaryPoint::Finite(x) => Some(x),
            BoundaryPoint::Infinity => None,
        }
    }

    /// Absolute closeness for finite points; `∞` is only close to `∞`.
    pub fn approx_eq(&self, other: &BoundaryPoint, tol: f64) -> bool {
        match (self, other) {
            (BoundaryPoint::Finite(a), BoundaryPoint::Finite(b)) => (a - b).abs() <= tol,
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => true,
            _ => false,
        }
    }

    /// Total order used for deterministic iteration: reals ascending, `∞` last.
    pub fn sort_key(&self) -> (u8, f64) {
        match *self {
            BoundaryPoint::Finite(x) => (0, x),
            BoundaryPoint::Infinity => (1, 0.0),
        }
    }

    pub fn total_cmp(&self, other: &BoundaryPoint) -> std::cmp::Ordering {
        let (ka, xa) = self.sort_key();
        let (kb, xb) = other.sort_key();
        ka.cmp(&kb).then(xa.total_cmp(&xb))
    }
}

impl From<f64> for BoundaryPoint {
    fn from(x: f64) -> Self {
        BoundaryPoint::new(x)
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPoint::Finite(x) => write!(f, "{x}"),
            BoundaryPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    x: f64,
    y: f64,
}

impl HPoint {
    /// The base point `o = i`.
    pub const BASE: HPoint = HPoint { x: 0.0, y: 1.0 };

    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() && y > 0.0 {
            Ok(HPoint { x, y })
        } else {
            Err(GeometryError::NotInHalfPlane { x, y })
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn dist(&self, other: &HPoint) -> f64 {
        dist(self, other)
    }
}

/// Hyperbolic distance, `arcosh(1 + |p-q|² / (2 p.y q.y))`.
///
/// Evaluated as `2 asinh(|p-q| / (2 sqrt(p.y q.y)))`, which is the same
/// quantity without the cancellation near the diagonal.
pub fn dist(p: &HPoint, q: &HPoint) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let chord = dx.hypot(dy);
    2.0 * (chord / (2.0 * (p.y * q.y).sqrt())).asinh()
}

/// `ad - bc` via Kahan's fma trick, accurate even under cancellation.
fn det2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let w = b * c;
    let err = (-b).mul_add(c, w);
    let f = a.mul_add(d, -w);
    f + err
}

/// An element of `PSL(2,R)`, stored as a unit-determinant matrix with a
/// canonical sign.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct GroupElement {
    m: [f64; 4],
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.m;
        write!(f, "[[{a}, {b}], [{c}, {d}]]")
    }
}

impl TryFrom<[f64; 4]> for GroupElement {
    type Error = GeometryError;
    fn try_from(m: [f64; 4]) -> Result<Self, Self::Error> {
        GroupElement::new(m[0], m[1], m[2], m[3])
    }
}

impl From<GroupElement> for [f64; 4] {
    fn from(g: GroupElement) -> Self {
        g.m
    }
}

impl GroupElement {
    /// Builds `[[a, b], [c, d]] / sqrt(ad - bc)`; the determinant must be positive.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeometryError> {
        let det = det2(a, b, c, d);
        if !(det.is_finite() && det > 0.0) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::BadDeterminant { det });
        }
        let s = det.sqrt().recip();
        Ok(GroupElement::canonical([a * s, b * s, c * s, d * s]))
    }

    pub fn identity() -> Self {
        GroupElement { m: [1.0, 0.0, 0.0, 1.0] }
    }

    /// The geodesic flow element `a_t = diag(e^{t/2}, e^{-t/2})`.
    pub fn geodesic(t: f64) -> Self {
        let h = (0.5 * t).exp();
        GroupElement { m: [h, 0.0, 0.0, h.recip()] }
    }

    /// The unstable horocycle element `n_s = [[1, 0], [s, 1]]`.
    pub fn horocycle(s: f64) -> Self {
        GroupElement::canonical([1.0, 0.0, s, 1.0])
    }

    pub fn entries(&self) -> [f64; 4] {
        self.m
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d] = self.m;
        det2(a, b, c, d)
    }

    /// Squared Frobenius norm; equals `2 cosh d(o, g o)`.
    pub fn norm_sq(&self) -> f64 {
        self.m.iter().map(|v| v * v).sum()
    }

    pub fn trace(&self) -> f64 {
        (self.m[0] + self.m[3]).abs()
    }

    pub fn inverse(&self) -> Self {
        let [a, b, c, d] = self.m;
        GroupElement::canonical([d, -b, -c, a])
    }

    /// Projective closeness: `min(|g - h|, |g + h|)` in the max norm.
    pub fn approx_eq(&self, other: &GroupElement, tol: f64) -> bool {
        self.projective_distance(other) <= tol
    }

    pub fn projective_distance(&self, other: &GroupElement) -> f64 {
        let mut plus = 0.0f64;
        let mut minus = 0.0f64;
        for (x, y) in self.m.iter().zip(other.m.iter()) {
            plus = plus.max((x - y).abs());
            minus = minus.max((x + y).abs());
        }
        plus.min(minus)
    }

    pub fn apply_point(&self, z: &HPoint) -> HPoint {
        let [a, b, c, d] = self.m;
        let cx_d = c * z.x + d;
        let cy = c * z.y;
        let denom = cx_d * cx_d + cy * cy;
        let x = ((a * z.x + b) * cx_d + a * c * z.y * z.y) / denom;
        let y = z.y / denom;
        HPoint { x, y }
    }

    pub fn apply_boundary(&self, xi: &BoundaryPoint) -> BoundaryPoint {
        let [a, b, c, d] = self.m;
        match *xi {
            BoundaryPoint::Infinity => {
                if c == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::new(a / c)
                }
            }
            BoundaryPoint::Finite(x) => {
                let denom = c * x + d;
                if denom == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::new((a * x + b) / denom)
                }
            }
        }
    }

    /// Repelling and attracting fixed points of a hyperbolic element, i.e.
    /// the backward and forward endpoints of its axis.
    pub fn fixed_points(&self) -> Option<(BoundaryPoint, BoundaryPoint)> {
        let [a, b, c, d] = self.m;
        let tr = a + d;
        if tr.abs() <= 2.0 {
            return None;
        }
        if c == 0.0 {
            let finite = BoundaryPoint::new(b / (d - a));
            return Some(if a.abs() > d.abs() {
                (finite, BoundaryPoint::Infinity)
            } else {
                (BoundaryPoint::Infinity, finite)
            });
        }
        let root = (tr * tr - 4.0).sqrt();
        let z1 = ((a - d) + root) / (2.0 * c);
        let z2 = ((a - d) - root) / (2.0 * c);
        // attracting iff |c z + d| > 1
        if (c * z1 + d).abs() > 1.0 {
            Some((BoundaryPoint::new(z2), BoundaryPoint::new(z1)))
        } else {
            Some((BoundaryPoint::new(z1), BoundaryPoint::new(z2)))
        }
    }

    /// Base point `π(F) = F o`.
    pub fn base_point(&self) -> HPoint {
        self.apply_point(&HPoint::BASE)
    }

    fn canonical(mut m: [f64; 4]) -> Self {
        if let Some(first) = m.iter().copied().find(|v| *v != 0.0) {
            if first < 0.0 {
                for v in m.iter_mut() {
                    *v = -*v;
                }
            }
        }
        GroupElement { m }
    }

    /// Divides by `sqrt(det)` when the determinant is resolvable in `f64`.
    ///
    /// For large-norm products the rounding error of the entries already
    /// exceeds `|det - 1|`, so rescaling would only inject noise.
    fn renormalized(m: [f64; 4]) -> Self {
        let [a, b, c, d] = m;
        let det = det2(a, b, c, d);
        let scale = (a * d).abs() + (b * c).abs();
        if det > 0.0 && scale * f64::EPSILON < 1e-13 {
            let s = det.sqrt().recip();
            GroupElement::canonical([a * s, b * s, c * s, d * s])
        } else {
            GroupElement::canonical(m)
        }
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        &self * &rhs
    }
}

impl Mul<&GroupElement> for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = rhs.m;
        GroupElement::renormalized([
            a.mul_add(e, b * g),
            a.mul_add(f, b * h),
            c.mul_add(e, d * g),
            c.mul_add(f, d * h),
        ])
    }
}

/// Points that `PSL(2,R)` acts on.
pub trait MobiusAction: Sized {
    fn transformed_by(&self, g: &GroupElement) -> Self;
}

impl MobiusAction for HPoint {
    fn transformed_by(&self, g: &GroupElement) -> Self {
        g.apply_point(self)
    }
}

impl MobiusAction for BoundaryPoint {
    fn transformed_by(&self, g: &GroupElement) -> Self {
        g.apply_boundary(self)
    }
}

pub fn mobius_apply<T: MobiusAction>(g: &GroupElement, z: &T) -> T {
    z.transformed_by(g)
}

/// Poisson-kernel logarithm `log P(z, ξ)`.
fn log_poisson(z: &HPoint, xi: &BoundaryPoint) -> f64 {
    match *xi {
        BoundaryPoint::Infinity => z.y.ln(),
        BoundaryPoint::Finite(x) => {
            let dx = z.x - x;
            z.y.ln() - dx.mul_add(dx, z.y * z.y).ln()
        }
    }
}

/// Busemann function `β_ξ(p, q) = lim_{z→ξ} d(p, z) - d(q, z)`.
pub fn busemann(xi: &BoundaryPoint, p: &HPoint, q: &HPoint) -> f64 {
    log_poisson(q, xi) - log_poisson(p, xi)
}

/// `d(x, q) - d(y, q)` without the cancellation that the two large distances
/// suffer when `q` is close to the boundary.
pub fn distance_difference(x: &HPoint, y: &HPoint, q: &HPoint) -> f64 {
    // d = 2 asinh(u), u = |p - q| / (2 sqrt(p.y q.y)); asinh(u) = ln(2u) + g(u)
    let chord_x = (x.x - q.x).hypot(x.y - q.y);
    let chord_y = (y.x - q.x).hypot(y.y - q.y);
    let ux = chord_x / (2.0 * (x.y * q.y).sqrt());
    let uy = chord_y / (2.0 * (y.y * q.y).sqrt());
    if ux < 1e3 || uy < 1e3 {
        return 2.0 * (ux.asinh() - uy.asinh());
    }
    let g = |u: f64| {
        let h = (u * u).recip();
        (h / (2.0 * ((1.0 + h).sqrt() + 1.0))).ln_1p()
    };
    let log_ratio = (chord_x / chord_y).ln() + 0.5 * (y.y / x.y).ln();
    2.0 * (log_ratio + g(ux) - g(uy))
}

/// Forward endpoint of the geodesic ray from `from` through `through`.
pub fn ray_endpoint(from: &HPoint, through: &HPoint) -> BoundaryPoint {
    // move `from` to i, then read the direction in the disk model
    let qx = (through.x - from.x) / from.y;
    let qy = through.y / from.y;
    let re = qx.mul_add(qx, qy * qy) - 1.0;
    let im = -2.0 * qx;
    let norm = re.hypot(im);
    // endpoint -cot(θ/2) with e^{iθ} = (re + i im) / norm
    let z = if im == 0.0 {
        if re > 0.0 {
            return BoundaryPoint::Infinity;
        }
        0.0
    } else if re >= 0.0 {
        -im / (norm - re)
    } else {
        -(norm + re) / im
    };
    BoundaryPoint::new(from.x + from.y * z)
}

/// Hopf coordinates `(ξ⁻, ξ⁺, t)` of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfCoord {
    pub xi_minus: BoundaryPoint,
    pub xi_plus: BoundaryPoint,
    pub t: f64,
}

impl HopfCoord {
    pub fn new(xi_minus: BoundaryPoint, xi_plus: BoundaryPoint, t: f64) -> Result<Self, GeometryError> {
        if xi_minus == xi_plus {
            return Err(GeometryError::DegenerateEndpoints);
        }
        Ok(HopfCoord { xi_minus, xi_plus, t })
    }

    pub fn approx_eq(&self, other: &HopfCoord, tol: f64) -> bool {
        self.xi_minus.approx_eq(&other.xi_minus, tol)
            && self.xi_plus.approx_eq(&other.xi_plus, tol)
            && (self.t - other.t).abs() <= tol
    }
}

pub fn frame_to_hopf(frame: &GroupElement) -> HopfCoord {
    let xi_minus = frame.apply_boundary(&BoundaryPoint::Finite(0.0));
    let xi_plus = frame.apply_boundary(&BoundaryPoint::Infinity);
    let t = busemann(&xi_minus, &frame.base_point(), &HPoint::BASE);
    HopfCoord { xi_minus, xi_plus, t }
}

/// Some element sending `0 ↦ ξ⁻` and `∞ ↦ ξ⁺`.
fn endpoint_map(xi_minus: &BoundaryPoint, xi_plus: &BoundaryPoint) -> Result<GroupElement, GeometryError> {
    match (*xi_minus, *xi_plus) {
        (BoundaryPoint::Finite(m), BoundaryPoint::Infinity) => GroupElement::new(1.0, m, 0.0, 1.0),
        (BoundaryPoint::Infinity, BoundaryPoint::Finite(p)) => GroupElement::new(p, -1.0, 1.0, 0.0),
        (BoundaryPoint::Finite(m), BoundaryPoint::Finite(p)) if m != p => {
            // columns (p, 1) and (m, 1), oriented so the determinant is positive
            if p > m {
                GroupElement::new(p, m, 1.0, 1.0)
            } else {
                GroupElement::new(p, -m, 1.0, -1.0)
            }
        }
        _ => Err(GeometryError::DegenerateEndpoints),
    }
}

pub fn hopf_to_frame(h: &HopfCoord) -> Result<GroupElement, GeometryError> {
    let g = endpoint_map(&h.xi_minus, &h.xi_plus)?;
    let t0 = busemann(&h.xi_minus, &g.base_point(), &HPoint::BASE);
    Ok(g * GroupElement::geodesic(h.t - t0))
}

/// `γ.(ξ⁻, ξ⁺, t) = (γξ⁻, γξ⁺, t + β_{ξ⁻}(o, γ⁻¹o))`.
///
/// The shift sign is the one that agrees with `frame_to_hopf(γ F)`.
pub fn isometry_on_hopf(gamma: &GroupElement, h: &HopfCoord) -> HopfCoord {
    let pulled_back = gamma.inverse().base_point();
    HopfCoord {
        xi_minus: gamma.apply_boundary(&h.xi_minus),
        xi_plus: gamma.apply_boundary(&h.xi_plus),
        t: h.t + busemann(&h.xi_minus, &HPoint::BASE, &pulled_back),
    }
}

pub fn geodesic_flow(frame: &GroupElement, t: f64) -> GroupElement {
    frame * &GroupElement::geodesic(t)
}

pub fn horocycle_step(frame: &GroupElement, s: f64) -> GroupElement {
    frame * &GroupElement::horocycle(s)
}

/// A left-invariant distance on frames: base points plus the points one unit
/// further along each frame's geodesic.
pub fn frame_distance(f: &GroupElement, g: &GroupElement) -> f64 {
    let ahead = HPoint { x: 0.0, y: std::f64::consts::E };
    dist(&f.base_point(), &g.base_point()) + dist(&f.apply_point(&ahead), &g.apply_point(&ahead))
}
