//! Quadratures for the Bowen-Margulis and Burger-Roblin measures on the
//! quotient, conditional measures on horocycles, and flow boxes of the
//! horocycle foliation.
//!
//! A quadrature atom is a frame whose base point lies in the fundamental
//! domain. For a pair of boundary atoms `(ξ, η)` the geodesic from `ξ` to `η`
//! meets the domain in a single segment (it crosses only the disk around `ξ`
//! and the disk around `η`); the segment is sampled by a midpoint rule in the
//! Hopf time `t`. Every frame of the quotient has exactly one such lift, so the
//! atoms need no further reduction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{AtomicBoundaryMeasure, DensityError};
use crate::hypgeom::{
    busemann, frame_to_hopf, hopf_to_frame, BoundaryPoint, GeometryError, GroupElement, HPoint, HopfCoord,
};
use crate::schottky::{Disk, SchottkyData, SchottkyError};
use crate::summation::{par_sum_by, par_sums_by};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("no atoms of the boundary measure fall in the horocycle window")]
    EmptySupport,
    #[error("{fraction:.3e} of the box mass could not be assigned to a plaque")]
    LeakyBox { fraction: f64 },
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Schottky(#[from] SchottkyError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "BM")]
    BowenMargulis,
    #[serde(rename = "BR")]
    BurgerRoblin,
}

impl MeasureKind {
    pub fn tag(self) -> &'static str {
        match self {
            MeasureKind::BowenMargulis => "BM",
            MeasureKind::BurgerRoblin => "BR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureAtom {
    pub hopf: HopfCoord,
    pub frame: GroupElement,
    pub weight: f64,
}

/// How a quadrature was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub delta: f64,
    pub backward_cutoff: usize,
    pub backward_atoms: usize,
    pub forward_cutoff: usize,
    pub forward_atoms: usize,
    pub t_step: f64,
    /// Sign in front of the Busemann exponent of the density.
    pub density_sign: i8,
    /// Pairs whose geodesic never enters the domain inside the window.
    pub empty_pairs: usize,
    /// Atoms dropped because their base point sat on a disk boundary.
    pub dropped_atoms: usize,
}

#[derive(Debug, Clone)]
pub struct QuadratureMeasure {
    atoms: Vec<QuadratureAtom>,
    kind: MeasureKind,
    t_window: (f64, f64),
    provenance: Provenance,
}

impl QuadratureMeasure {
    pub fn atoms(&self) -> &[QuadratureAtom] {
        &self.atoms
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn t_window(&self) -> (f64, f64) {
        self.t_window
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        par_sum_by(&self.atoms, |a| a.weight)
    }

    /// `Σ w f(F)` over atom frames `F` (already in the fundamental domain).
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&QuadratureAtom) -> f64 + Sync,
    {
        par_sum_by(&self.atoms, |a| a.weight * f(a))
    }

    /// `(∫ f, ∫ |f|)` in one pass.
    pub fn integrate_with_abs<F>(&self, f: F) -> (f64, f64)
    where
        F: Fn(&QuadratureAtom) -> f64 + Sync,
    {
        let [a, b] = par_sums_by(&self.atoms, |atom| {
            let v = atom.weight * f(atom);
            [v, v.abs()]
        });
        (a, b)
    }

    /// Same atoms rescaled to total mass one.
    pub fn normalized(&self) -> QuadratureMeasure {
        let m = self.mass();
        let atoms = self.atoms.iter().map(|a| QuadratureAtom { weight: a.weight / m, ..*a }).collect();
        QuadratureMeasure { atoms, ..self.clone_header() }
    }

    fn clone_header(&self) -> QuadratureMeasure {
        QuadratureMeasure {
            atoms: Vec::new(),
            kind: self.kind,
            t_window: self.t_window,
            provenance: self.provenance.clone(),
        }
    }

    /// CSV rows `xi_minus,xi_plus,t,weight,kind`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi_minus,xi_plus,t,weight,kind\n");
        for a in &self.atoms {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                a.hopf.xi_minus,
                a.hopf.xi_plus,
                a.hopf.t,
                a.weight,
                self.kind.tag()
            );
        }
        out
    }
}

/// Crossing of the geodesic `ξ → η` (both finite) with a disk boundary.
fn crossing_point(xi: f64, eta: f64, disk: &Disk) -> Option<HPoint> {
    let m = 0.5 * (xi + eta);
    let rho = 0.5 * (eta - xi).abs();
    let (c, r) = (disk.center, disk.radius);
    if c == m {
        return None;
    }
    let x = ((rho - r) * (rho + r) + (c - m) * (c + m)) / (2.0 * (c - m));
    let y2 = (rho - (x - m)) * (rho + (x - m));
    (y2 > 0.0).then(|| HPoint::new(x, y2.sqrt()).ok()).flatten()
}

/// Hopf-time interval on which the geodesic `ξ → η` lies in the fundamental
/// domain; an endpoint outside every disk gives an infinite end. `None` if
/// both endpoints are in the same disk (the geodesic never leaves it) or an
/// endpoint is infinite or on a disk boundary.
pub fn domain_segment(group: &SchottkyData, xi: &BoundaryPoint, eta: &BoundaryPoint) -> Option<(f64, f64)> {
    let (x, e) = (xi.value()?, eta.value()?);
    if x == e {
        return None;
    }
    let li = group.locate_boundary(xi).ok()?;
    let lj = group.locate_boundary(eta).ok()?;
    if li.is_some() && li == lj {
        return None;
    }
    let t_of = |p: HPoint| busemann(xi, &p, &HPoint::BASE);
    let start = match li {
        Some(l) => t_of(crossing_point(x, e, group.disk_of(l))?),
        None => f64::NEG_INFINITY,
    };
    let end = match lj {
        Some(l) => t_of(crossing_point(x, e, group.disk_of(l))?),
        None => f64::INFINITY,
    };
    (start < end).then_some((start, end))
}

struct PairRule {
    backward_exponent: f64,
    forward_exponent: f64,
}

fn pair_quadrature(
    group: &SchottkyData,
    backward: &AtomicBoundaryMeasure,
    forward: &AtomicBoundaryMeasure,
    rule: PairRule,
    t_window: (f64, f64),
    t_step: f64,
) -> (Vec<QuadratureAtom>, usize, usize) {
    let per_xi: Vec<(Vec<QuadratureAtom>, usize, usize)> = backward
        .atoms()
        .par_iter()
        .map(|(xi, wx)| {
            let mut atoms = Vec::new();
            let mut empty = 0;
            let mut dropped = 0;
            for (eta, we) in forward.atoms() {
                let Some((a, b)) = domain_segment(group, xi, eta) else {
                    empty += 1;
                    continue;
                };
                let (lo, hi) = (a.max(t_window.0), b.min(t_window.1));
                if !(lo < hi) {
                    empty += 1;
                    continue;
                }
                let n = ((hi - lo) / t_step).ceil().max(1.0) as usize;
                let h = (hi - lo) / n as f64;
                for m in 0..n {
                    let t = lo + (m as f64 + 0.5) * h;
                    let hopf = HopfCoord { xi_minus: *xi, xi_plus: *eta, t };
                    let Ok(frame) = hopf_to_frame(&hopf) else {
                        dropped += 1;
                        continue;
                    };
                    let p = frame.base_point();
                    if !matches!(group.locate_point(&p), Ok(None)) {
                        dropped += 1;
                        continue;
                    }
                    let exponent = rule.backward_exponent * busemann(xi, &HPoint::BASE, &p)
                        + rule.forward_exponent * busemann(eta, &HPoint::BASE, &p);
                    atoms.push(QuadratureAtom { hopf, frame, weight: wx * we * exponent.exp() * h });
                }
            }
            (atoms, empty, dropped)
        })
        .collect();
    let mut atoms = Vec::new();
    let (mut empty, mut dropped) = (0, 0);
    for (a, e, d) in per_xi {
        atoms.extend(a);
        empty += e;
        dropped += d;
    }
    (atoms, empty, dropped)
}

fn check_window(t_window: (f64, f64), t_step: f64) -> Result<(), MeasureError> {
    if !(t_step > 0.0 && t_window.0 < t_window.1 && t_window.0.is_finite() && t_window.1.is_finite()) {
        return Err(MeasureError::BadParameter(format!("t_window {t_window:?}, t_step {t_step}")));
    }
    Ok(())
}

/// `m̂_BM` with independent boundary measures for the backward and forward
/// endpoints (both approximations of `ν_o`).
pub fn bm_quadrature_pairs(
    group: &SchottkyData,
    nu_backward: &AtomicBoundaryMeasure,
    nu_forward: &AtomicBoundaryMeasure,
    delta: f64,
    t_window: (f64, f64),
    t_step: f64,
) -> Result<QuadratureMeasure, MeasureError> {
    check_window(t_window, t_step)?;
    let rule = PairRule { backward_exponent: delta, forward_exponent: delta };
    let (atoms, empty_pairs, dropped_atoms) =
        pair_quadrature(group, nu_backward, nu_forward, rule, t_window, t_step);
    finish(
        atoms,
        MeasureKind::BowenMargulis,
        t_window,
        Provenance {
            delta,
            backward_cutoff: nu_backward.cutoff(),
            backward_atoms: nu_backward.len(),
            forward_cutoff: nu_forward.cutoff(),
            forward_atoms: nu_forward.len(),
            t_step,
            density_sign: 1,
            empty_pairs,
            dropped_atoms,
        },
    )
}

/// `dm̂_BM = e^{δ β_ξ(o,p) + δ β_η(o,p)} dν̂_o(ξ) dν̂_o(η) dt` on the
/// fundamental domain.
///
/// The exponent is constant along each geodesic (twice the Gromov product of
/// `ξ, η` seen from `o`), which is what makes the measure flow invariant.
pub fn bm_quadrature(
    group: &SchottkyData,
    nu_o: &AtomicBoundaryMeasure,
    delta: f64,
    t_window: (f64, f64),
    t_step: f64,
) -> Result<QuadratureMeasure, MeasureError> {
    bm_quadrature_pairs(group, nu_o, nu_o, delta, t_window, t_step)
}

/// `dm̂_BR = e^{δ β_ξ(o,p) + β_η(o,p)} dν̂_o(ξ) dλ̂_o(η) dt` on the
/// fundamental domain, truncated to `t_window` (the measure is infinite).
pub fn br_quadrature(
    group: &SchottkyData,
    nu_o: &AtomicBoundaryMeasure,
    lambda_o: &AtomicBoundaryMeasure,
    delta: f64,
    t_window: (f64, f64),
    t_step: f64,
) -> Result<QuadratureMeasure, MeasureError> {
    check_window(t_window, t_step)?;
    let rule = PairRule { backward_exponent: delta, forward_exponent: lambda_o.exponent() };
    let (atoms, empty_pairs, dropped_atoms) = pair_quadrature(group, nu_o, lambda_o, rule, t_window, t_step);
    finish(
        atoms,
        MeasureKind::BurgerRoblin,
        t_window,
        Provenance {
            delta,
            backward_cutoff: nu_o.cutoff(),
            backward_atoms: nu_o.len(),
            forward_cutoff: lambda_o.cutoff(),
            forward_atoms: lambda_o.len(),
            t_step,
            density_sign: 1,
            empty_pairs,
            dropped_atoms,
        },
    )
}

fn finish(
    atoms: Vec<QuadratureAtom>,
    kind: MeasureKind,
    t_window: (f64, f64),
    provenance: Provenance,
) -> Result<QuadratureMeasure, MeasureError> {
    let q = QuadratureMeasure { atoms, kind, t_window, provenance };
    let mass = q.mass();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(MeasureError::EmptySupport);
    }
    Ok(q)
}

/// Horocycle parameter of the forward endpoint `η` on the leaf of `F`:
/// `F n_s` has forward endpoint `F(1/s)`.
pub fn leaf_parameter(inverse_frame: &GroupElement, eta: &BoundaryPoint) -> Option<f64> {
    match inverse_frame.apply_boundary(eta) {
        BoundaryPoint::Infinity => Some(0.0),
        BoundaryPoint::Finite(0.0) => None,
        BoundaryPoint::Finite(u) => Some(u.recip()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    BmConditional,
    Lebesgue,
}

impl Weighting {
    pub fn tag(self) -> &'static str {
        match self {
            Weighting::BmConditional => "BM-conditional",
            Weighting::Lebesgue => "Lebesgue",
        }
    }
}

/// A measure on the horocycle `{F n_s : |s| <= radius}` given by atoms on the
/// parameter `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorocycleConditional {
    base: GroupElement,
    atoms: Vec<(f64, f64)>,
    radius: f64,
    weighting: Weighting,
}

impl HorocycleConditional {
    pub fn new(
        base: GroupElement,
        atoms: Vec<(f64, f64)>,
        radius: f64,
        weighting: Weighting,
    ) -> Result<Self, MeasureError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(MeasureError::BadParameter(format!("radius {radius}")));
        }
        if atoms.iter().any(|(s, w)| s.abs() > radius || !(*w >= 0.0 && w.is_finite())) {
            return Err(MeasureError::BadParameter("atom outside the ball or with a bad weight".into()));
        }
        Ok(HorocycleConditional { base, atoms, radius, weighting })
    }

    pub fn base(&self) -> &GroupElement {
        &self.base
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn mass(&self) -> f64 {
        par_sum_by(&self.atoms, |a| a.1)
    }

    /// Mass of `{|s| <= r}`.
    pub fn ball_mass(&self, r: f64) -> f64 {
        par_sum_by(&self.atoms, |(s, w)| if s.abs() <= r { *w } else { 0.0 })
    }

    /// Mass of `{r_in < |s| <= r_out}`.
    pub fn annulus_mass(&self, r_in: f64, r_out: f64) -> f64 {
        par_sum_by(&self.atoms, |(s, w)| {
            let a = s.abs();
            if a > r_in && a <= r_out {
                *w
            } else {
                0.0
            }
        })
    }

    /// The same atoms seen from `F a_t`: `F n_s = (F a_t) n_{s e^t} a_{-t}`,
    /// so parameters scale by `e^t`. For the BM conditional the density
    /// scales by `e^{δ t}`, which is passed as `weight_factor`.
    pub fn push(&self, t: f64, weight_factor: f64) -> HorocycleConditional {
        let k = t.exp();
        HorocycleConditional {
            base: self.base * GroupElement::geodesic(t),
            atoms: self.atoms.iter().map(|(s, w)| (s * k, w * weight_factor)).collect(),
            radius: self.radius * k,
            weighting: self.weighting,
        }
    }

    /// `(1/mass) Σ w f(F n_s)` over `|s| <= r`, together with the ball mass.
    pub fn average<F>(&self, r: f64, f: F) -> Option<(f64, f64, usize)>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let [num, mass, count] = par_sums_by(&self.atoms, |(s, w)| {
            if s.abs() <= r {
                [w * f(*s), *w, 1.0]
            } else {
                [0.0; 3]
            }
        });
        (mass > 0.0).then_some((num / mass, mass, count as usize))
    }
}

/// Conditional of `m̂_BM` on the leaf of `F`:
/// `dμ = e^{δ β_η(o, π(F n_s))} dν̂_o(η)`, binned to a grid of `resolution`
/// cells on `[-radius, radius]`. Weights use the exact parameter of each
/// `ν̂_o` atom; the atom is placed at the centre of its cell.
pub fn bm_conditional(
    frame: &GroupElement,
    nu_o: &AtomicBoundaryMeasure,
    delta: f64,
    radius: f64,
    resolution: usize,
) -> Result<HorocycleConditional, MeasureError> {
    if !(radius > 0.0 && radius.is_finite()) || resolution == 0 {
        return Err(MeasureError::BadParameter(format!("radius {radius}, resolution {resolution}")));
    }
    let inv = frame.inverse();
    let cell = 2.0 * radius / resolution as f64;
    let contributions: Vec<Option<(usize, f64)>> = nu_o
        .atoms()
        .par_iter()
        .map(|(eta, w)| {
            let s = leaf_parameter(&inv, eta)?;
            if s.abs() > radius {
                return None;
            }
            let p = (frame * &GroupElement::horocycle(s)).base_point();
            let bin = (((s + radius) / cell).floor() as usize).min(resolution - 1);
            Some((bin, w * (delta * busemann(eta, &HPoint::BASE, &p)).exp()))
        })
        .collect();
    // sparse bins: the support is a Cantor set, so most cells are empty
    let mut bins: BTreeMap<usize, f64> = BTreeMap::new();
    for (bin, w) in contributions.into_iter().flatten() {
        *bins.entry(bin).or_insert(0.0) += w;
    }
    if bins.is_empty() {
        return Err(MeasureError::EmptySupport);
    }
    let atoms = bins
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(j, w)| ((-radius + (j as f64 + 0.5) * cell).clamp(-radius, radius), w))
        .collect();
    HorocycleConditional::new(*frame, atoms, radius, Weighting::BmConditional)
}

/// Lebesgue measure `ds` on `[-radius, radius]` as a midpoint grid.
pub fn lebesgue_conditional(
    frame: &GroupElement,
    radius: f64,
    resolution: usize,
) -> Result<HorocycleConditional, MeasureError> {
    if !(radius > 0.0 && radius.is_finite()) || resolution == 0 {
        return Err(MeasureError::BadParameter(format!("radius {radius}, resolution {resolution}")));
    }
    let h = 2.0 * radius / resolution as f64;
    let atoms = (0..resolution).map(|j| (-radius + (j as f64 + 0.5) * h, h)).collect();
    HorocycleConditional::new(*frame, atoms, radius, Weighting::Lebesgue)
}

/// A flow box of the horocycle foliation in the product coordinates
/// `(ξ⁻, t, s)`: the transversal point over `(ξ⁻, t)` is the frame
/// `(ξ⁻, η₀, t)` moved by `n_{slide}`, and its plaque is the leaf segment
/// `|s| <= r₀` around it. Transversal points are grouped into a grid of
/// cells, which index the plaques.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowBox {
    pub xi_minus: (f64, f64),
    pub t: (f64, f64),
    pub xi_plus_center: f64,
    pub r0: f64,
    #[serde(default)]
    pub slide: f64,
    pub cells: (usize, usize),
}

/// Position of a frame inside a flow box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPosition {
    pub cell: usize,
    /// Leaf coordinate relative to the transversal point.
    pub s: f64,
}

impl FlowBox {
    pub fn validate(&self) -> Result<(), MeasureError> {
        let ok = self.xi_minus.0 < self.xi_minus.1
            && self.t.0 < self.t.1
            && self.r0 > 0.0
            && self.slide.abs() < self.r0
            && self.cells.0 > 0
            && self.cells.1 > 0
            && self.xi_plus_center.is_finite();
        if ok {
            Ok(())
        } else {
            Err(MeasureError::BadParameter(format!("invalid flow box {self:?}")))
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.0 * self.cells.1
    }

    /// The box with its transversal slid along the leaves by `s0`.
    pub fn slid(&self, s0: f64) -> FlowBox {
        FlowBox { slide: s0, ..*self }
    }

    /// Leaf frame through `(ξ⁻, t)` at leaf coordinate zero.
    pub fn transversal_frame(&self, xi_minus: f64, t: f64) -> Result<GroupElement, MeasureError> {
        let base = hopf_to_frame(&HopfCoord {
            xi_minus: BoundaryPoint::Finite(xi_minus),
            xi_plus: BoundaryPoint::Finite(self.xi_plus_center),
            t,
        })?;
        Ok(base * GroupElement::horocycle(self.slide))
    }

    /// Centres of the transversal cells, row-major in `(ξ⁻, t)`.
    pub fn transversal(&self) -> Result<Vec<GroupElement>, MeasureError> {
        let mut out = Vec::with_capacity(self.cell_count());
        for i in 0..self.cells.0 {
            for j in 0..self.cells.1 {
                let x = lerp(self.xi_minus, (i as f64 + 0.5) / self.cells.0 as f64);
                let t = lerp(self.t, (j as f64 + 0.5) / self.cells.1 as f64);
                out.push(self.transversal_frame(x, t)?);
            }
        }
        Ok(out)
    }

    fn cell_of(&self, x: f64, t: f64) -> Option<usize> {
        let inside = |v: f64, (a, b): (f64, f64)| v >= a && v < b;
        if !(inside(x, self.xi_minus) && inside(t, self.t)) {
            return None;
        }
        let i = (((x - self.xi_minus.0) / (self.xi_minus.1 - self.xi_minus.0)) * self.cells.0 as f64) as usize;
        let j = (((t - self.t.0) / (self.t.1 - self.t.0)) * self.cells.1 as f64) as usize;
        Some(i.min(self.cells.0 - 1) * self.cells.1 + j.min(self.cells.1 - 1))
    }

    /// Whether the frame's `(ξ⁻, t)` lies over the transversal; `Err` if it
    /// does but its leaf coordinate cannot be computed.
    fn over_transversal(&self, h: &HopfCoord) -> Option<usize> {
        self.cell_of(h.xi_minus.value()?, h.t)
    }

    /// Plaque cell and leaf coordinate, if the frame (with Hopf coordinates
    /// `h`) lies in the box. `Err(())` marks a frame over the transversal
    /// whose leaf coordinate is undefined.
    pub fn locate(&self, h: &HopfCoord) -> Result<Option<BoxPosition>, ()> {
        let Some(cell) = self.over_transversal(h) else {
            return Ok(None);
        };
        let x = h.xi_minus.value().ok_or(())?;
        let tf = self.transversal_frame(x, h.t).map_err(|_| ())?;
        let s = leaf_parameter(&tf.inverse(), &h.xi_plus).ok_or(())?;
        if !s.is_finite() {
            return Err(());
        }
        Ok((s.abs() <= self.r0).then_some(BoxPosition { cell, s }))
    }

    /// Whether the Hopf point lies within `eps` of the box boundary.
    pub fn near_boundary(&self, h: &HopfCoord, s: f64, eps: f64) -> bool {
        let Some(x) = h.xi_minus.value() else {
            return false;
        };
        let edge = |v: f64, (a, b): (f64, f64)| (v - a).abs() < eps || (b - v).abs() < eps;
        edge(x, self.xi_minus) || edge(h.t, self.t) || (self.r0 - s.abs()) < eps
    }
}

fn lerp((a, b): (f64, f64), u: f64) -> f64 {
    a + (b - a) * u
}

/// Per-plaque result of [`transverse_decompose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaqueMass {
    pub cell: usize,
    /// Quadrature mass of the plaques in the cell.
    pub mass: f64,
    /// Induced transverse mass: each atom's weight divided by the leafwise
    /// conditional mass of its own plaque.
    pub transverse: f64,
    pub atoms: usize,
}

/// Leafwise conditional mass of the plaque through `leaf_frame`:
/// `Σ w_η e^{κ β_η(o, π(T n_s))}` over atoms `η` with `|s(η) - slide| <= r₀`,
/// where `κ` is the boundary measure's exponent.
pub fn plaque_conditional_mass(
    leaf_frame: &GroupElement,
    boundary: &[(BoundaryPoint, f64)],
    exponent: f64,
    r0: f64,
) -> f64 {
    let inv = leaf_frame.inverse();
    let terms: Vec<f64> = boundary
        .iter()
        .map(|(eta, w)| match leaf_parameter(&inv, eta) {
            Some(s) if s.abs() <= r0 => {
                let p = (leaf_frame * &GroupElement::horocycle(s)).base_point();
                w * (exponent * busemann(eta, &HPoint::BASE, &p)).exp()
            }
            _ => 0.0,
        })
        .collect();
    crate::summation::pairwise_sum(&terms)
}

/// Splits the box part of `q` into plaques and returns per-cell masses and
/// induced transverse masses. `forward` is the boundary measure that
/// supplied the forward endpoints of `q` (`ν̂_o` for BM, `λ̂_o` for BR); it
/// defines the leafwise conditionals.
pub fn transverse_decompose(
    flow_box: &FlowBox,
    q: &QuadratureMeasure,
    forward: &AtomicBoundaryMeasure,
) -> Result<Vec<PlaqueMass>, MeasureError> {
    flow_box.validate()?;
    let exponent = match q.kind() {
        MeasureKind::BowenMargulis => q.provenance().delta,
        MeasureKind::BurgerRoblin => forward.exponent(),
    };
    let located: Vec<Result<Option<(BoxPosition, f64)>, f64>> = q
        .atoms()
        .par_iter()
        .map(|a| match flow_box.locate(&a.hopf) {
            Ok(None) => Ok(None),
            Err(()) => Err(a.weight),
            Ok(Some(pos)) => {
                let x = a.hopf.xi_minus.value().expect("located frames have finite ξ⁻");
                let leaf = flow_box.transversal_frame(x, a.hopf.t).expect("finite transversal");
                let cond = plaque_conditional_mass(&leaf, forward.atoms(), exponent, flow_box.r0);
                Ok(Some((pos, if cond > 0.0 { a.weight / cond } else { f64::NAN })))
            }
        })
        .collect();
    let mut out: Vec<PlaqueMass> =
        (0..flow_box.cell_count()).map(|cell| PlaqueMass { cell, mass: 0.0, transverse: 0.0, atoms: 0 }).collect();
    let mut leaked = 0.0;
    let mut inside = 0.0;
    for (a, r) in q.atoms().iter().zip(&located) {
        match r {
            Ok(None) => {}
            Err(w) => {
                leaked += w;
                inside += w;
            }
            Ok(Some((pos, tr))) => {
                inside += a.weight;
                if tr.is_nan() {
                    leaked += a.weight;
                    continue;
                }
                let slot = &mut out[pos.cell];
                slot.mass += a.weight;
                slot.transverse += tr;
                slot.atoms += 1;
            }
        }
    }
    if inside > 0.0 && leaked > 0.01 * inside {
        return Err(MeasureError::LeakyBox { fraction: leaked / inside });
    }
    Ok(out.into_iter().filter(|p| p.atoms > 0).collect())
}

/// Fraction of the box mass of `q` within `eps` of the box boundary.
pub fn boundary_shell_fraction(flow_box: &FlowBox, q: &QuadratureMeasure, eps: f64) -> f64 {
    let [shell, total] = par_sums_by(q.atoms(), |a| match flow_box.locate(&a.hopf) {
        Ok(Some(pos)) => {
            let near = flow_box.near_boundary(&a.hopf, pos.s, eps);
            [if near { a.weight } else { 0.0 }, a.weight]
        }
        _ => [0.0, 0.0],
    });
    if total > 0.0 {
        shell / total
    } else {
        0.0
    }
}

/// Hopf coordinates of the representative of `F` in the fundamental domain.
pub fn reduced_hopf(group: &SchottkyData, frame: &GroupElement) -> Result<HopfCoord, SchottkyError> {
    Ok(frame_to_hopf(&group.reduce_frame(frame)?))
}
