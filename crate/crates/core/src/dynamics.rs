//! Horocycle averages pushed by the geodesic flow, Lebesgue ratio averages,
//! correlations, empirical transverse measures and the annulus error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::AtomicBoundaryMeasure;
use crate::hypgeom::{frame_to_hopf, hopf_to_frame, BoundaryPoint, GroupElement, HopfCoord};
use crate::measures::{
    bm_conditional, domain_segment, lebesgue_conditional, FlowBox, HorocycleConditional, MeasureError,
    QuadratureMeasure, Weighting,
};
use crate::schottky::{Letter, SchottkyData, Word};
use crate::summation::{par_sum_by, par_sums_by};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("the averaging measure has no mass on the ball")]
    EmptySupport,
    #[error("denominator integral {value:e} is below the threshold {threshold:e}")]
    ZeroDenominator { value: f64, threshold: f64 },
    #[error("{fraction:.3e} of the in-box samples could not be assigned to a plaque")]
    LeakyBox { fraction: f64 },
    #[error("test function {id} is not supported inside the fundamental domain")]
    InvalidTestFunction { id: String },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// A smooth bump in Hopf coordinates, evaluated on the representative of a
/// frame in the fundamental domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    /// `(ξ⁻₀, ξ⁺₀, t₀)`.
    pub center: [f64; 3],
    pub widths: [f64; 3],
    pub height: f64,
}

impl TestFunction {
    pub fn constant(id: &str, value: f64) -> TestFunction {
        TestFunction { id: id.to_string(), center: [0.0; 3], widths: [f64::INFINITY; 3], height: value }
    }

    pub fn is_constant(&self) -> bool {
        self.widths.iter().all(|w| w.is_infinite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.height.abs()
    }

    pub fn eval_hopf(&self, h: &HopfCoord) -> f64 {
        if self.is_constant() {
            return self.height;
        }
        let (Some(x), Some(y)) = (h.xi_minus.value(), h.xi_plus.value()) else {
            return 0.0;
        };
        let [cx, cy, ct] = self.center;
        let [wx, wy, wt] = self.widths;
        self.height * bump((x - cx) / wx) * bump((y - cy) / wy) * bump((h.t - ct) / wt)
    }

    /// `φ(Γ F)`. A frame that cannot be reduced sits on a disk boundary,
    /// where every valid test function vanishes.
    pub fn eval(&self, group: &SchottkyData, frame: &GroupElement) -> f64 {
        if self.is_constant() {
            return self.height;
        }
        match group.reduce_frame(frame) {
            Ok(f0) => self.eval_hopf(&frame_to_hopf(&f0)),
            Err(_) => 0.0,
        }
    }

    /// Samples the closed support box on a grid and checks that every frame
    /// has its base point strictly inside the fundamental domain and its time
    /// inside `t_window`.
    pub fn validate(&self, group: &SchottkyData, t_window: (f64, f64)) -> Result<(), DynamicsError> {
        if self.is_constant() {
            return Ok(());
        }
        let invalid = || DynamicsError::InvalidTestFunction { id: self.id.clone() };
        let [cx, cy, ct] = self.center;
        let [wx, wy, wt] = self.widths;
        if ct - wt <= t_window.0 || ct + wt >= t_window.1 {
            return Err(invalid());
        }
        const N: usize = 9;
        let grid = |c: f64, w: f64, i: usize| c + w * (2.0 * i as f64 / (N - 1) as f64 - 1.0);
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    let h = HopfCoord {
                        xi_minus: BoundaryPoint::Finite(grid(cx, wx, i)),
                        xi_plus: BoundaryPoint::Finite(grid(cy, wy, j)),
                        t: grid(ct, wt, k),
                    };
                    let frame = hopf_to_frame(&h).map_err(|_| invalid())?;
                    if !matches!(group.locate_point(&frame.base_point()), Ok(None)) {
                        return Err(invalid());
                    }
                }
            }
        }
        Ok(())
    }

    /// Bump on the frames over the part of the geodesic `ξ⁻₀ → ξ⁺₀` that lies
    /// in the fundamental domain, shrunk until it passes [`validate`].
    ///
    /// [`validate`]: TestFunction::validate
    pub fn on_geodesic(
        group: &SchottkyData,
        id: &str,
        xi_minus: f64,
        xi_plus: f64,
        t_window: (f64, f64),
    ) -> Result<TestFunction, DynamicsError> {
        let invalid = || DynamicsError::InvalidTestFunction { id: id.to_string() };
        let (a, b) = (BoundaryPoint::Finite(xi_minus), BoundaryPoint::Finite(xi_plus));
        let (lo, hi) = domain_segment(group, &a, &b).ok_or_else(invalid)?;
        let (lo, hi) = (lo.max(t_window.0 + 1.0), hi.min(t_window.1 - 1.0));
        if !(lo < hi) {
            return Err(invalid());
        }
        let disk_radius = |x: &BoundaryPoint| match group.locate_boundary(x) {
            Ok(Some(l)) => group.disk_of(l).radius,
            _ => 1.0,
        };
        let mut phi = TestFunction {
            id: id.to_string(),
            center: [xi_minus, xi_plus, 0.5 * (lo + hi)],
            widths: [0.6 * disk_radius(&a), 0.6 * disk_radius(&b), 0.45 * (hi - lo)],
            height: 1.0,
        };
        for _ in 0..40 {
            if phi.validate(group, t_window).is_ok() {
                return Ok(phi);
            }
            for w in phi.widths.iter_mut() {
                *w *= 0.85;
            }
        }
        Err(invalid())
    }

    /// Five bumps centred on geodesics between periodic limit points of
    /// two-letter words, one per ordered pair of distinct disks.
    pub fn suite(group: &SchottkyData, t_window: (f64, f64)) -> Result<Vec<TestFunction>, DynamicsError> {
        let letters: Vec<Letter> = group.letters().collect();
        let point = |a: Letter, b: Letter| {
            let w = Word::from_letters(if a.inv() == b { vec![a] } else { vec![a, b] }).expect("reduced");
            group.periodic_limit_point(&w).and_then(|p| p.value()).expect("hyperbolic word")
        };
        let n = letters.len();
        let picks = [(0, 1), (1, 2), (2, 3 % n), (3 % n, 0), (0, 2)];
        picks
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let (la, lb) = (letters[a], letters[b]);
                let x = point(la, letters[(a + 2) % n]);
                let y = point(lb, letters[(b + 3) % n]);
                TestFunction::on_geodesic(group, &format!("phi{}", i + 1), x, y, t_window)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageResult {
    pub value: f64,
    pub r: f64,
    pub t: f64,
    pub weighting: Weighting,
    pub base: GroupElement,
    pub atoms: usize,
}

/// `(1/μ̂(B)) Σ_{|s| <= r} w(s) φ(Γ F n_s a_t)`: with BM-conditional weights
/// this is `M_r^t(φ)(F)`; with Lebesgue weights the uniform horocycle
/// average.
pub fn m_average(
    group: &SchottkyData,
    conditional: &HorocycleConditional,
    r: f64,
    t: f64,
    phi: &TestFunction,
) -> Result<AverageResult, DynamicsError> {
    let base = *conditional.base();
    let a_t = GroupElement::geodesic(t);
    let (value, _, atoms) = conditional
        .average(r, |s| {
            let f = base * GroupElement::horocycle(s) * a_t;
            phi.eval(group, &f)
        })
        .ok_or(DynamicsError::EmptySupport)?;
    Ok(AverageResult { value, r, t, weighting: conditional.weighting(), base, atoms })
}

/// `∫_{|s|<=r} φ(F n_s) ds / ∫_{|s|<=r} ψ(F n_s) ds` on a uniform grid.
pub fn ratio_average(
    group: &SchottkyData,
    frame: &GroupElement,
    r: f64,
    phi: &TestFunction,
    psi: &TestFunction,
    resolution: usize,
) -> Result<f64, DynamicsError> {
    let grid = lebesgue_conditional(frame, r, resolution)?;
    let [num, den] = par_sums_by(grid.atoms(), |(s, w)| {
        let f = frame * &GroupElement::horocycle(*s);
        let f0 = group.reduce_frame(&f).ok();
        let eval = |g: &TestFunction| match &f0 {
            Some(f0) => g.eval_hopf(&frame_to_hopf(f0)),
            None => 0.0,
        };
        [w * eval(phi), w * eval(psi)]
    });
    let threshold = 1e-12 * 2.0 * r;
    if den.abs() < threshold {
        return Err(DynamicsError::ZeroDenominator { value: den, threshold });
    }
    Ok(num / den)
}

/// `∫ φ · ψ∘a_t dQ / Q(1)`.
pub fn correlation(group: &SchottkyData, q: &QuadratureMeasure, t: f64, phi: &TestFunction, psi: &TestFunction) -> f64 {
    let a_t = GroupElement::geodesic(t);
    let num = q.integrate(|a| {
        let p = phi.eval_hopf(&a.hopf);
        if p == 0.0 {
            return 0.0;
        }
        p * psi.eval(group, &(a.frame * a_t))
    });
    num / q.mass()
}

/// `∫ φ dQ / Q(1)`.
pub fn quadrature_mean(q: &QuadratureMeasure, phi: &TestFunction) -> f64 {
    q.integrate(|a| phi.eval_hopf(&a.hopf)) / q.mass()
}

/// Crossing counts of a horocycle segment through the plaques of a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTransverse {
    /// `(cell, crossings)` for cells crossed at least once.
    pub counts: Vec<(usize, usize)>,
    /// BM-conditional mass of the ball the counts are normalized by.
    pub ball_mass: f64,
    pub samples: usize,
}

impl EmpiricalTransverse {
    /// `(cell, crossings / ball_mass)`.
    pub fn normalized(&self) -> Vec<(usize, f64)> {
        self.counts.iter().map(|&(c, n)| (c, n as f64 / self.ball_mass)).collect()
    }
}

/// Walks `{F n_s : |s| <= r}` with step `step`, reduces each frame to the
/// fundamental domain and records one Dirac mass per plaque crossing.
#[allow(clippy::too_many_arguments)]
pub fn empirical_transverse(
    group: &SchottkyData,
    frame: &GroupElement,
    flow_box: &FlowBox,
    r: f64,
    step: f64,
    nu_o: &AtomicBoundaryMeasure,
    delta: f64,
    conditional_resolution: usize,
) -> Result<EmpiricalTransverse, DynamicsError> {
    flow_box.validate()?;
    if !(step > 0.0 && step < flow_box.r0) {
        return Err(MeasureError::BadParameter(format!("walk step {step} must be in (0, r0)")).into());
    }
    let n = (2.0 * r / step).ceil() as usize + 1;
    let h = 2.0 * r / (n - 1) as f64;
    let cells: Vec<Result<Option<usize>, ()>> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let s = -r + i as f64 * h;
                let f = frame * &GroupElement::horocycle(s);
                match group.reduce_frame(&f) {
                    Ok(f0) => flow_box.locate(&frame_to_hopf(&f0)).map(|p| p.map(|p| p.cell)),
                    Err(_) => Ok(None),
                }
            })
            .collect()
    };
    let mut counts = vec![0usize; flow_box.cell_count()];
    let (mut inside, mut leaked) = (0usize, 0usize);
    let mut previous = None;
    for c in &cells {
        let current = match c {
            Ok(c) => *c,
            Err(()) => {
                leaked += 1;
                inside += 1;
                None
            }
        };
        if let Some(cell) = current {
            inside += 1;
            if previous != Some(cell) {
                counts[cell] += 1;
            }
        }
        previous = current;
    }
    if inside > 0 && leaked as f64 > 0.01 * inside as f64 {
        return Err(DynamicsError::LeakyBox { fraction: leaked as f64 / inside as f64 });
    }
    let ball_mass = bm_conditional(frame, nu_o, delta, r, conditional_resolution)
        .map_err(DynamicsError::from)?
        .ball_mass(r);
    Ok(EmpiricalTransverse {
        counts: counts.into_iter().enumerate().filter(|(_, n)| *n > 0).collect(),
        ball_mass,
        samples: n,
    })
}

/// `‖φ‖_∞ μ(B(r + r₀) \ B(r - r₀)) / μ(B(r))` for a conditional at `F`
/// whose radius covers `r + r₀`.
pub fn annulus_error(
    conditional: &HorocycleConditional,
    r: f64,
    r0: f64,
    phi_bound: f64,
) -> Result<f64, DynamicsError> {
    if r0 == 0.0 {
        return Ok(0.0);
    }
    if !(r > r0 && r0 > 0.0) || r + r0 > conditional.radius() * (1.0 + 1e-12) {
        return Err(MeasureError::BadParameter(format!(
            "annulus needs r > r0 > 0 and r + r0 <= {}",
            conditional.radius()
        ))
        .into());
    }
    let ball = conditional.ball_mass(r);
    if ball <= 0.0 {
        return Err(DynamicsError::EmptySupport);
    }
    Ok(phi_bound * conditional.annulus_mass(r - r0, r + r0) / ball)
}

/// Mass of the atoms with `||s| - r| <= eps`.
pub fn sphere_mass(conditional: &HorocycleConditional, r: f64, eps: f64) -> f64 {
    par_sum_by(conditional.atoms(), |(s, w)| if (s.abs() - r).abs() <= eps { *w } else { 0.0 })
}

/// Outcome of [`select_radius`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusChoice {
    pub radius: f64,
    pub retries: usize,
    pub boundary_fraction: f64,
}

/// Moves `r` by pseudo-random factors in `[0.95, 1.05]` until the ball
/// boundary (`||s| - r| <= eps`) carries at most `1e-6` of the ball mass.
pub fn select_radius(
    conditional: &HorocycleConditional,
    r: f64,
    eps: f64,
    seed: u64,
    max_retries: usize,
) -> Result<RadiusChoice, DynamicsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radius = r;
    for retries in 0..=max_retries {
        let ball = conditional.ball_mass(radius + eps);
        if ball <= 0.0 {
            return Err(DynamicsError::EmptySupport);
        }
        let fraction = sphere_mass(conditional, radius, eps) / ball;
        if fraction <= 1e-6 {
            return Ok(RadiusChoice { radius, retries, boundary_fraction: fraction });
        }
        radius = r * rng.gen_range(0.95..=1.05);
    }
    Err(DynamicsError::EmptySupport)
}

/// A frame with backward endpoint the periodic limit point of a random word
/// of length `depth` and `t = 0`. The forward endpoint is a Lebesgue-random
/// boundary point outside the disks, or, with `forward_in_limit_set`, another
/// periodic limit point in a different disk.
pub fn generic_frame<R: Rng>(
    group: &SchottkyData,
    rng: &mut R,
    depth: usize,
    forward_in_limit_set: bool,
) -> GroupElement {
    let word = random_word(group, rng, depth);
    let xi_minus = group.periodic_limit_point(&word).expect("non-trivial words are hyperbolic");
    let first = word.first().expect("depth >= 1");
    let xi_plus = loop {
        let candidate = if forward_in_limit_set {
            let w = random_word(group, rng, depth);
            if w.first() == Some(first) {
                continue;
            }
            group.periodic_limit_point(&w).expect("hyperbolic")
        } else {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = BoundaryPoint::new(-(0.5 * theta).tan().recip());
            if !matches!(group.locate_boundary(&x), Ok(None)) {
                continue;
            }
            x
        };
        if candidate != xi_minus {
            break candidate;
        }
    };
    hopf_to_frame(&HopfCoord { xi_minus, xi_plus, t: 0.0 }).expect("distinct endpoints")
}

fn random_word<R: Rng>(group: &SchottkyData, rng: &mut R, depth: usize) -> Word {
    let k = group.alphabet_size();
    let mut letters: Vec<Letter> = Vec::with_capacity(depth);
    while letters.len() < depth.max(1) {
        let l = Letter::from_index(rng.gen_range(0..k));
        if letters.last().map(|p| p.inv()) != Some(l) {
            letters.push(l);
        }
    }
    Word::from_letters(letters).expect("built reduced")
}

/// `max_t |M_1^t(φ)(F) - M_1^t(φ)(F')|` with BM-conditional weights.
#[allow(clippy::too_many_arguments)]
pub fn equicontinuity_gap(
    group: &SchottkyData,
    f: &GroupElement,
    g: &GroupElement,
    nu_o: &AtomicBoundaryMeasure,
    delta: f64,
    phi: &TestFunction,
    times: &[f64],
    resolution: usize,
) -> Result<f64, DynamicsError> {
    let cf = bm_conditional(f, nu_o, delta, 1.0, resolution)?;
    let cg = bm_conditional(g, nu_o, delta, 1.0, resolution)?;
    let mut worst = 0.0f64;
    for &t in times {
        let a = m_average(group, &cf, 1.0, t, phi)?.value;
        let b = m_average(group, &cg, 1.0, t, phi)?.value;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::PattersonSullivan;
    use crate::hypgeom::HPoint;
    use crate::measures::bm_quadrature;

    const WINDOW: (f64, f64) = (-12.0, 12.0);

    #[test]
    fn suite_is_valid_on_presets() {
        for name in ["default", "thin", "asym"] {
            let g = SchottkyData::preset(name).unwrap();
            let suite = TestFunction::suite(&g, WINDOW).unwrap();
            assert_eq!(suite.len(), 5);
            for phi in &suite {
                phi.validate(&g, WINDOW).unwrap();
                let c = phi.center;
                let h = HopfCoord::new(c[0].into(), c[1].into(), c[2]).unwrap();
                assert!((phi.eval_hopf(&h) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn averages_of_constants() {
        let g = SchottkyData::default_group();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = generic_frame(&g, &mut rng, 12, true);
        let nu = PattersonSullivan::new(&g, 0.2795, 10).unwrap().measure_at(&HPoint::BASE);
        let c = bm_conditional(&f, &nu, 0.2795, 1.0, 2000).unwrap();
        let one = TestFunction::constant("one", 1.0);
        for t in [0.0, 2.0, 5.0] {
            assert_eq!(m_average(&g, &c, 1.0, t, &one).unwrap().value, 1.0);
        }
        let phi = &TestFunction::suite(&g, WINDOW).unwrap()[0];
        let f2 = generic_frame(&g, &mut rng, 12, false);
        let r = ratio_average(&g, &f2, 30.0, phi, phi, 3000);
        if let Ok(v) = r {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn push_identity_is_exact() {
        let g = SchottkyData::default_group();
        let delta = 0.2795;
        let nu = PattersonSullivan::new(&g, delta, 10).unwrap().measure_at(&HPoint::BASE);
        let suite = TestFunction::suite(&g, WINDOW).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for phi in &suite {
            let f = generic_frame(&g, &mut rng, 12, true);
            let t = 3.0;
            let back = f * GroupElement::geodesic(-t);
            let c1 = bm_conditional(&back, &nu, delta, 1.0, 3000).unwrap();
            let route_a = m_average(&g, &c1, 1.0, t, phi).unwrap();
            let pushed = c1.push(t, (delta * t).exp());
            let route_b = m_average(&g, &pushed, t.exp(), 0.0, phi).unwrap();
            assert!((route_a.value - route_b.value).abs() <= 1e-9);
        }
    }

    #[test]
    fn correlation_with_constant() {
        let g = SchottkyData::default_group();
        let delta = 0.2795;
        let nu = PattersonSullivan::new(&g, delta, 8).unwrap().measure_at(&HPoint::BASE).coarsen(&g, 3);
        let q = bm_quadrature(&g, &nu, delta, (-20.0, 20.0), 0.25).unwrap().normalized();
        let phi = &TestFunction::suite(&g, WINDOW).unwrap()[1];
        let c = TestFunction::constant("c", 2.0);
        let mean = quadrature_mean(&q, phi);
        for t in [1.5, 4.0] {
            let v = correlation(&g, &q, t, &c, phi);
            assert!((v - 2.0 * mean).abs() <= 0.02 * 2.0 * mean, "t = {t}: {v} vs {}", 2.0 * mean);
        }
        assert!((correlation(&g, &q, 0.0, &c, phi) - 2.0 * mean).abs() < 1e-12);
        let sq = q.integrate(|a| phi.eval_hopf(&a.hopf).powi(2)) / q.mass();
        assert!((correlation(&g, &q, 0.0, phi, phi) - sq).abs() < 1e-12);
    }

    #[test]
    fn annulus_and_radius_helpers() {
        let c = lebesgue_conditional(&GroupElement::identity(), 10.0, 2000).unwrap();
        assert_eq!(annulus_error(&c, 5.0, 0.0, 1.0).unwrap(), 0.0);
        let e = annulus_error(&c, 5.0, 1.0, 1.0).unwrap();
        assert!((e - 0.4).abs() < 1e-9);
        let choice = select_radius(&c, 5.0, 1e-9, 7, 20).unwrap();
        assert!(choice.radius >= 4.75 && choice.radius <= 5.25);
    }

    #[test]
    fn generic_frames_are_radial() {
        let g = SchottkyData::default_group();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for forward in [true, false] {
            for _ in 0..20 {
                let f = generic_frame(&g, &mut rng, 12, forward);
                assert!(g.is_radial(&frame_to_hopf(&f), 8).unwrap());
            }
        }
    }
}
