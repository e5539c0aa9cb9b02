//! Boundary measures: Poincaré series, the critical exponent, finite-cutoff
//! Patterson-Sullivan densities and the Lebesgue (visual) family.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypgeom::{busemann, dist, distance_difference, ray_endpoint, BoundaryPoint, GroupElement, HPoint};
use crate::schottky::{Coding, SchottkyData, SchottkyError, Word};
use crate::summation::{pairwise_sum, par_sum_by};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("measure needs finite non-negative weights and positive total mass")]
    InvalidWeights,
    #[error("delta brackets are disjoint at depth {depth}: counting [{counting_lo}, {counting_hi}], series [{series_lo}, {series_hi}]")]
    InsufficientDepth {
        depth: usize,
        counting_lo: f64,
        counting_hi: f64,
        series_lo: f64,
        series_hi: f64,
    },
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("malformed measure file: {0}")]
    Parse(String),
    #[error(transparent)]
    Schottky(#[from] SchottkyError),
}

/// Weighted atoms on `R ∪ {∞}`, sorted by position with `∞` last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicBoundaryMeasure {
    atoms: Vec<(BoundaryPoint, f64)>,
    basepoint: HPoint,
    exponent: f64,
    cutoff: usize,
}

impl AtomicBoundaryMeasure {
    pub fn new(
        mut atoms: Vec<(BoundaryPoint, f64)>,
        basepoint: HPoint,
        exponent: f64,
        cutoff: usize,
    ) -> Result<Self, DensityError> {
        if atoms.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(DensityError::InvalidWeights);
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let measure = AtomicBoundaryMeasure { atoms, basepoint, exponent, cutoff };
        let mass = measure.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(DensityError::InvalidWeights);
        }
        Ok(measure)
    }

    pub fn atoms(&self) -> &[(BoundaryPoint, f64)] {
        &self.atoms
    }

    pub fn basepoint(&self) -> HPoint {
        self.basepoint
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        par_sum_by(&self.atoms, |a| a.1)
    }

    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&BoundaryPoint) -> f64 + Sync,
    {
        par_sum_by(&self.atoms, |(xi, w)| w * f(xi))
    }

    /// `γ_* μ`: atoms moved by `γ`, basepoint moved to `γ x`.
    pub fn push_forward(&self, gamma: &GroupElement) -> AtomicBoundaryMeasure {
        let mut atoms: Vec<_> = self.atoms.iter().map(|(xi, w)| (gamma.apply_boundary(xi), *w)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        AtomicBoundaryMeasure {
            atoms,
            basepoint: gamma.apply_point(&self.basepoint),
            exponent: self.exponent,
            cutoff: self.cutoff,
        }
    }

    /// Masses of the depth-`level` coding cylinders, plus the mass of atoms
    /// that could not be coded (outside the disks or on a disk boundary).
    pub fn cylinder_masses(&self, group: &SchottkyData, level: usize) -> (BTreeMap<Word, f64>, f64) {
        let (bins, loose) = self.bin_by_cylinder(group, level);
        let masses = bins
            .into_iter()
            .map(|(w, members)| {
                let ws: Vec<f64> = members.iter().map(|&i| self.atoms[i].1).collect();
                (w, pairwise_sum(&ws))
            })
            .collect();
        let loose: Vec<f64> = loose.iter().map(|&i| self.atoms[i].1).collect();
        (masses, pairwise_sum(&loose))
    }

    /// Merges the atoms of each depth-`level` cylinder into one atom carrying
    /// the cylinder mass, placed at the heaviest member. Uncodable atoms are
    /// kept as they are.
    pub fn coarsen(&self, group: &SchottkyData, level: usize) -> AtomicBoundaryMeasure {
        let (bins, loose) = self.bin_by_cylinder(group, level);
        let mut atoms = Vec::with_capacity(bins.len() + loose.len());
        for members in bins.values() {
            let heaviest = members
                .iter()
                .copied()
                .max_by(|&a, &b| self.atoms[a].1.total_cmp(&self.atoms[b].1))
                .expect("bins are non-empty");
            let ws: Vec<f64> = members.iter().map(|&i| self.atoms[i].1).collect();
            atoms.push((self.atoms[heaviest].0, pairwise_sum(&ws)));
        }
        atoms.extend(loose.iter().map(|&i| self.atoms[i]));
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        AtomicBoundaryMeasure { atoms, ..self.clone_header() }
    }

    fn clone_header(&self) -> AtomicBoundaryMeasure {
        AtomicBoundaryMeasure {
            atoms: Vec::new(),
            basepoint: self.basepoint,
            exponent: self.exponent,
            cutoff: self.cutoff,
        }
    }

    fn bin_by_cylinder(&self, group: &SchottkyData, level: usize) -> (BTreeMap<Word, Vec<usize>>, Vec<usize>) {
        let mut bins: BTreeMap<Word, Vec<usize>> = BTreeMap::new();
        let mut loose = Vec::new();
        for (i, (xi, _)) in self.atoms.iter().enumerate() {
            match group.code_boundary(xi, level) {
                Ok(Coding::Word(w)) => bins.entry(w).or_default().push(i),
                _ => loose.push(i),
            }
        }
        (bins, loose)
    }

    /// CSV with a `#` metadata line followed by `xi,weight` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# basepoint={},{} exponent={} cutoff={}",
            self.basepoint.x(),
            self.basepoint.y(),
            self.exponent,
            self.cutoff
        );
        out.push_str("xi,weight\n");
        for (xi, w) in &self.atoms {
            let _ = writeln!(out, "{xi},{w}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, DensityError> {
        let bad = |m: &str| DensityError::Parse(m.to_string());
        let mut lines = text.lines();
        let meta = lines.next().ok_or_else(|| bad("empty input"))?;
        let meta = meta.strip_prefix('#').ok_or_else(|| bad("missing metadata line"))?;
        let mut basepoint = None;
        let mut exponent = None;
        let mut cutoff = None;
        for field in meta.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(field))?;
            match key {
                "basepoint" => {
                    let (x, y) = value.split_once(',').ok_or_else(|| bad(value))?;
                    let x: f64 = x.parse().map_err(|_| bad(x))?;
                    let y: f64 = y.parse().map_err(|_| bad(y))?;
                    basepoint = Some(HPoint::new(x, y).map_err(|e| DensityError::Parse(e.to_string()))?);
                }
                "exponent" => exponent = Some(value.parse::<f64>().map_err(|_| bad(value))?),
                "cutoff" => cutoff = Some(value.parse::<usize>().map_err(|_| bad(value))?),
                _ => return Err(bad(key)),
            }
        }
        if lines.next().map(str::trim) != Some("xi,weight") {
            return Err(bad("missing header row"));
        }
        let mut atoms = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (xi, w) = line.split_once(',').ok_or_else(|| bad(line))?;
            let xi = if xi.trim() == "inf" {
                BoundaryPoint::Infinity
            } else {
                BoundaryPoint::Finite(xi.trim().parse().map_err(|_| bad(xi))?)
            };
            atoms.push((xi, w.trim().parse().map_err(|_| bad(w))?));
        }
        AtomicBoundaryMeasure::new(
            atoms,
            basepoint.ok_or_else(|| bad("basepoint"))?,
            exponent.ok_or_else(|| bad("exponent"))?,
            cutoff.ok_or_else(|| bad("cutoff"))?,
        )
    }
}

/// Orbit distances `d(o, γ o)` grouped by word length `0..=k`, each level in
/// lexicographic word order.
pub fn orbit_distances(group: &SchottkyData, k: usize) -> Vec<Vec<f64>> {
    let flat = group.map_words(k, |w, g| Some((w.len(), dist(&HPoint::BASE, &g.base_point()))));
    let mut levels = vec![Vec::new(); k + 1];
    for (len, d) in flat {
        levels[len].push(d);
    }
    levels
}

/// `Σ_{|γ| ≤ k} exp(-s d(o, γ o))`.
pub fn poincare_partial(group: &SchottkyData, s: f64, k: usize) -> f64 {
    let levels = orbit_distances(group, k);
    let flat: Vec<f64> = levels.into_iter().flatten().collect();
    par_sum_by(&flat, |d| (-s * d).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMethod {
    Counting,
    SeriesBisection,
}

/// Critical exponent estimate with a bracket from both estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: DeltaMethod,
    /// Orbit-counting slope over the complete range.
    pub counting: f64,
    /// Level-ratio root on the two deepest levels.
    pub series: f64,
    pub depth: usize,
}

impl DeltaEstimate {
    pub fn relative_disagreement(&self) -> f64 {
        (self.counting - self.series).abs() / self.series
    }
}

/// Root in `s` of `Σ_{level hi} e^{-s d} = Σ_{level lo} e^{-s d}`.
fn level_ratio_root(lo: &[f64], hi: &[f64]) -> f64 {
    let excess = |s: f64| {
        let a = par_sum_by(hi, |d| (-s * d).exp());
        let b = par_sum_by(lo, |d| (-s * d).exp());
        a.ln() - b.ln()
    };
    let (mut a, mut b) = (0.0f64, 2.0f64);
    while excess(b) > 0.0 && b < 64.0 {
        b *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if excess(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Least-squares fit of `log N(R)` against `R` over `[r0, r1]`, where `N`
/// counts the sorted distances. Returns the slope and the largest absolute
/// residual.
fn counting_fit(sorted: &[f64], r0: f64, r1: f64, samples: usize) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let r = r0 + (r1 - r0) * i as f64 / (samples - 1) as f64;
            let n = sorted.partition_point(|d| *d <= r).max(1);
            (r, (n as f64).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let residual = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).abs()).fold(0.0, f64::max);
    (slope, residual)
}

/// Estimates `δ` from words of length `<= k`.
///
/// The value is the series-bisection root on levels `k-1, k`. The counting
/// estimator fits `log #{γ : d(o,γo) <= R}` over `R ∈ [R_max/2, R_max]`,
/// where `R_max` is the smallest level-`k` distance, so every orbit point
/// inside the window has been enumerated. `N` is a staircase, so the
/// counting bracket is the set of slopes of lines that stay within the
/// staircase's residual band (`± 2ρ / W` for residual `ρ`, window `W`),
/// widened by the two half-window slopes. The series bracket is spanned by
/// the roots on levels `k-2, k-1` and `k-1, k`. The reported bracket is the
/// hull of both; disjoint brackets are an error.
pub fn estimate_delta(group: &SchottkyData, k: usize) -> Result<DeltaEstimate, DensityError> {
    if k < 6 {
        return Err(DensityError::BadParameter(format!("estimate_delta needs k >= 6, got {k}")));
    }
    let levels = orbit_distances(group, k);
    let series = level_ratio_root(&levels[k - 1], &levels[k]);
    let series_prev = level_ratio_root(&levels[k - 2], &levels[k - 1]);

    let r_max = levels[k].iter().copied().fold(f64::INFINITY, f64::min);
    let mut sorted: Vec<f64> = levels.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let half = 0.5 * r_max;
    let (counting, residual) = counting_fit(&sorted, half, r_max, 200);
    let (sub_lo, _) = counting_fit(&sorted, half, 0.75 * r_max, 200);
    let (sub_hi, _) = counting_fit(&sorted, 0.75 * r_max, r_max, 200);
    let band = 2.0 * residual / (r_max - half);

    let counting_lo = (counting - band).min(sub_lo).min(sub_hi);
    let counting_hi = (counting + band).max(sub_lo).max(sub_hi);
    let series_lo = series.min(series_prev);
    let series_hi = series.max(series_prev);
    if counting_hi < series_lo || series_hi < counting_lo {
        return Err(DensityError::InsufficientDepth { depth: k, counting_lo, counting_hi, series_lo, series_hi });
    }
    Ok(DeltaEstimate {
        value: series,
        lower: counting_lo.min(series_lo),
        upper: counting_hi.max(series_hi),
        method: DeltaMethod::SeriesBisection,
        counting,
        series,
        depth: k,
    })
}

/// Finite-cutoff Patterson-Sullivan family built on the words of length
/// exactly `cutoff`.
///
/// Using the sphere `|γ| = k` rather than the ball keeps every atom inside a
/// depth-`k` cylinder, i.e. within the cutoff resolution of the limit set.
#[derive(Debug, Clone)]
pub struct PattersonSullivan {
    group: SchottkyData,
    delta: f64,
    cutoff: usize,
    orbit: Vec<HPoint>,
    normalization: f64,
}

impl PattersonSullivan {
    pub fn new(group: &SchottkyData, delta: f64, cutoff: usize) -> Result<Self, DensityError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(DensityError::BadParameter(format!("delta must be positive, got {delta}")));
        }
        if cutoff == 0 {
            return Err(DensityError::BadParameter("cutoff must be at least 1".into()));
        }
        let orbit = group.map_words(cutoff, |w, g| (w.len() == cutoff).then(|| g.base_point()));
        let total = par_sum_by(&orbit, |p| (-delta * dist(&HPoint::BASE, p)).exp());
        Ok(PattersonSullivan { group: group.clone(), delta, cutoff, orbit, normalization: total.recip() })
    }

    pub fn group(&self) -> &SchottkyData {
        &self.group
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Orbit points `γ o`, `|γ| = cutoff`, in lexicographic word order.
    pub fn orbit(&self) -> &[HPoint] {
        &self.orbit
    }

    /// Atoms of `ν̂_x` in orbit order (unsorted), paired with their orbit point.
    pub fn raw_atoms(&self, x: &HPoint) -> Vec<(BoundaryPoint, f64)> {
        use rayon::prelude::*;
        self.orbit
            .par_iter()
            .map(|p| (ray_endpoint(x, p), self.normalization * (-self.delta * dist(x, p)).exp()))
            .collect()
    }

    pub fn measure_at(&self, x: &HPoint) -> AtomicBoundaryMeasure {
        let atoms = self.raw_atoms(x);
        AtomicBoundaryMeasure::new(atoms, *x, self.delta, self.cutoff).expect("orbit weights are positive")
    }
}

/// `|log(dν̂_y/dν̂_x)(ξ) - δ β_ξ(x, y)|` for every orbit atom, atoms paired
/// by word.
pub fn ps_cocycle_deviations(ps: &PattersonSullivan, x: &HPoint, y: &HPoint) -> Vec<f64> {
    use rayon::prelude::*;
    let delta = ps.delta();
    ps.orbit()
        .par_iter()
        .map(|p| {
            let xi = ray_endpoint(x, p);
            let log_ratio = delta * distance_difference(x, y, p);
            (log_ratio - delta * busemann(&xi, x, y)).abs()
        })
        .collect()
}

/// `β_ξ(x, y)` as the limit of `d(x, z) - d(y, z)` for `z → ξ` along the
/// vertical line through `ξ` (or through `x` when `ξ = ∞`), Richardson
/// extrapolated from two heights.
pub fn busemann_numeric_limit(xi: &BoundaryPoint, x: &HPoint, y: &HPoint) -> f64 {
    let at = |h: f64| {
        let z = match xi {
            BoundaryPoint::Finite(v) => HPoint::new(*v, h),
            BoundaryPoint::Infinity => HPoint::new(x.x(), 1.0 / h),
        }
        .expect("positive height");
        distance_difference(x, y, &z)
    };
    let h = 1e-6 * x.y().min(y.y()) / (1.0 + x.x().abs() + y.x().abs());
    2.0 * at(0.5 * h) - at(h)
}

/// `ν̂_x` at cutoff `k`, normalized so that `ν̂_o` is a probability.
pub fn build_ps_measure(
    group: &SchottkyData,
    x: &HPoint,
    delta: f64,
    k: usize,
) -> Result<AtomicBoundaryMeasure, DensityError> {
    Ok(PattersonSullivan::new(group, delta, k)?.measure_at(x))
}

/// `dλ_y / dλ_x (ξ) = exp(β_ξ(x, y))`.
pub fn lebesgue_density(x: &HPoint, y: &HPoint, xi: &BoundaryPoint) -> f64 {
    busemann(xi, x, y).exp()
}

/// Visual measure from `x`: `resolution` equally spaced unit directions at
/// `x`, each of weight `2π / resolution`.
pub fn discretize_lebesgue(x: &HPoint, resolution: usize) -> Result<AtomicBoundaryMeasure, DensityError> {
    if resolution < 16 {
        return Err(DensityError::BadParameter(format!("resolution must be >= 16, got {resolution}")));
    }
    let w = 2.0 * PI / resolution as f64;
    let atoms = (0..resolution)
        .map(|j| {
            let theta = 2.0 * PI * (j as f64 + 0.5) / resolution as f64;
            let z = -(0.5 * theta).tan().recip();
            (BoundaryPoint::Finite(x.x() + x.y() * z), w)
        })
        .collect();
    AtomicBoundaryMeasure::new(atoms, *x, 1.0, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgeom::distance_difference;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn poincare_small_cases() {
        let g = SchottkyData::default_group();
        assert_eq!(poincare_partial(&g, 0.7, 0), 1.0);
        assert_eq!(poincare_partial(&g, 0.0, 2), 17.0);
    }

    #[test]
    fn poincare_monotone_and_reproducible() {
        let g = SchottkyData::default_group();
        let a = poincare_partial(&g, 0.5, 6);
        assert!(poincare_partial(&g, 0.5, 7) >= a);
        assert!(poincare_partial(&g, 0.6, 6) <= a);
        assert_eq!(a.to_bits(), poincare_partial(&g, 0.5, 6).to_bits());
    }

    #[test]
    fn poincare_regression_anchor() {
        let g = SchottkyData::default_group();
        let v = poincare_partial(&g, 0.5, 10);
        let again = poincare_partial(&g, 0.5, 10);
        assert_eq!(v.to_bits(), again.to_bits());
        assert!((v - POINCARE_ANCHOR).abs() <= 1e-9, "{v}");
    }

    const POINCARE_ANCHOR: f64 = 1.760949596656494;

    #[test]
    fn delta_estimators_agree_and_order() {
        let d = estimate_delta(&SchottkyData::default_group(), 12).unwrap();
        assert!(d.lower <= d.value && d.value <= d.upper);
        assert!(d.relative_disagreement() <= 0.02, "{d:?}");
        assert!(0.0 < d.value && d.value < 1.0);
        let thin = estimate_delta(&SchottkyData::thin(), 12).unwrap();
        assert!(thin.value < d.value);
    }

    #[test]
    fn delta_needs_depth() {
        assert!(matches!(
            estimate_delta(&SchottkyData::default_group(), 5),
            Err(DensityError::BadParameter(_))
        ));
    }

    #[test]
    fn delta_bracket_refines() {
        let g = SchottkyData::default_group();
        let a = estimate_delta(&g, 8).unwrap();
        match estimate_delta(&g, 10) {
            Ok(b) => assert!(b.upper - b.lower <= a.upper - a.lower),
            Err(e) => assert!(matches!(e, DensityError::InsufficientDepth { .. })),
        }
    }

    #[test]
    fn ps_mass_one_at_base() {
        let g = SchottkyData::default_group();
        let nu = build_ps_measure(&g, &HPoint::BASE, 0.28, 8).unwrap();
        assert!((nu.mass() - 1.0).abs() < 1e-12);
        assert_eq!(nu.len(), 4 * 3usize.pow(7));
        assert!(nu.atoms().windows(2).all(|p| p[0].0.total_cmp(&p[1].0).is_le()));
    }

    #[test]
    fn ps_cocycle_small_depth() {
        let g = SchottkyData::default_group();
        let delta = 0.2795;
        let ps = PattersonSullivan::new(&g, delta, 8).unwrap();
        let x = HPoint::BASE;
        let y = HPoint::new(0.4, 1.7).unwrap();
        let ax = ps.raw_atoms(&x);
        let ay = ps.raw_atoms(&y);
        let devs: Vec<f64> = ax
            .iter()
            .zip(&ay)
            .map(|((xi, wx), (_, wy))| ((wy / wx).ln() - delta * busemann(xi, &x, &y)).abs())
            .collect();
        assert!(median(devs) < 1e-6);
        // the exact identity behind it
        let p = ps.orbit()[17];
        let lhs = delta * distance_difference(&x, &y, &p);
        assert!((lhs - (ay[17].1 / ax[17].1).ln()).abs() < 1e-9);
    }

    #[test]
    fn ps_atoms_near_limit_set() {
        let g = SchottkyData::default_group();
        let nu = build_ps_measure(&g, &HPoint::BASE, 0.28, 8).unwrap();
        let (cyl, loose) = nu.cylinder_masses(&g, 4);
        assert_eq!(cyl.len(), 4 * 27);
        assert!(loose < 1e-12);
        let coarse = nu.coarsen(&g, 4);
        assert_eq!(coarse.len(), 108);
        assert!((coarse.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ps_equivariance_on_cylinders() {
        let g = SchottkyData::default_group();
        let ps = PattersonSullivan::new(&g, 0.2795, 8).unwrap();
        let x = HPoint::new(-0.2, 1.3).unwrap();
        for letter in g.letters() {
            let gamma = *g.letter_matrix(letter);
            let (pushed, _) = ps.measure_at(&x).push_forward(&gamma).cylinder_masses(&g, 4);
            let (direct, _) = ps.measure_at(&gamma.apply_point(&x)).cylinder_masses(&g, 4);
            let errs: Vec<f64> = direct
                .iter()
                .filter_map(|(w, b)| pushed.get(w).map(|a| (a - b).abs() / b))
                .collect();
            assert!(errs.len() >= 100);
            assert!(median(errs) <= 0.03);
        }
    }

    #[test]
    fn ps_csv_round_trip() {
        let g = SchottkyData::default_group();
        let nu = build_ps_measure(&g, &HPoint::new(0.1, 2.0).unwrap(), 0.28, 3).unwrap();
        let back = AtomicBoundaryMeasure::from_csv(&nu.to_csv()).unwrap();
        assert_eq!(back, nu);
        assert!(AtomicBoundaryMeasure::from_csv("xi,weight\n1,1\n").is_err());
    }

    #[test]
    fn lebesgue_density_examples() {
        let o = HPoint::BASE;
        let up = HPoint::new(0.0, 2.0).unwrap();
        assert_eq!(lebesgue_density(&o, &o, &BoundaryPoint::Finite(3.0)), 1.0);
        assert!((lebesgue_density(&o, &up, &BoundaryPoint::Infinity) - 2.0).abs() < 1e-15);
        assert!((lebesgue_density(&o, &up, &BoundaryPoint::Finite(0.0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lebesgue_oracle_numeric_limit() {
        // exp(d(x,z) - d(y,z)) along z -> 0 on the imaginary axis
        let x = HPoint::BASE;
        let y = HPoint::new(0.0, 2.0).unwrap();
        let approx = |h: f64| {
            let z = HPoint::new(0.0, h).unwrap();
            (dist(&x, &z) - dist(&y, &z)).exp()
        };
        let (a, b) = (approx(1e-3), approx(5e-4));
        let extrapolated = 2.0 * b - a;
        assert!((extrapolated - lebesgue_density(&x, &y, &BoundaryPoint::Finite(0.0))).abs() < 1e-6);
    }

    #[test]
    fn numeric_limit_matches_closed_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let mut pt = || HPoint::new(rng.gen_range(-5.0..5.0), rng.gen_range(-3.0f64..3.0).exp()).unwrap();
            let (x, y) = (pt(), pt());
            let xi = if rng.gen_bool(0.1) { BoundaryPoint::Infinity } else { BoundaryPoint::Finite(rng.gen_range(-8.0..8.0)) };
            let exact = lebesgue_density(&x, &y, &xi);
            let numeric = busemann_numeric_limit(&xi, &x, &y).exp();
            worst = worst.max((numeric / exact - 1.0).abs());
        }
        assert!(worst <= 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn ps_cocycle_helper_at_floor() {
        let g = SchottkyData::default_group();
        let ps = PattersonSullivan::new(&g, 0.2795, 8).unwrap();
        let devs = ps_cocycle_deviations(&ps, &HPoint::BASE, &HPoint::new(0.4, 1.7).unwrap());
        assert_eq!(devs.len(), ps.orbit().len());
        assert!(median(devs) < 1e-9);
    }

    #[test]
    fn lebesgue_discretization_basics() {
        let lam = discretize_lebesgue(&HPoint::BASE, 64).unwrap();
        assert!((lam.mass() - 2.0 * PI).abs() < 1e-12);
        let xs: Vec<f64> = lam.atoms().iter().map(|a| a.0.value().unwrap()).collect();
        for (a, b) in xs.iter().zip(xs.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
        assert!(discretize_lebesgue(&HPoint::BASE, 8).is_err());
    }

    #[test]
    fn lebesgue_pushforward_matches_reweighting() {
        let g = SchottkyData::default_group();
        let gamma = *g.letter_matrix(crate::schottky::Letter::new(0, false));
        let x = HPoint::new(0.3, 1.2).unwrap();
        let gx = gamma.apply_point(&x);
        // bump in the visual angle from o
        let f = |xi: &BoundaryPoint| match xi {
            BoundaryPoint::Infinity => 1.0,
            BoundaryPoint::Finite(v) => 1.0 + (2.0 * (-1.0 / v).atan()).cos() * 0.5 + 1.0 / (1.0 + (v - 2.0).powi(2)),
        };
        let err = |n: usize| {
            let lam = discretize_lebesgue(&x, n).unwrap();
            let pushed = lam.push_forward(&gamma).integrate(f);
            let lam_gx = discretize_lebesgue(&gx, n).unwrap();
            let reweighted = lam_gx.integrate(f);
            let direct = lam.integrate(|xi| f(&gamma.apply_boundary(xi)));
            assert!((pushed - direct).abs() < 1e-9);
            let via_density = lam.integrate(|xi| f(xi) * lebesgue_density(&x, &gx, xi));
            ((pushed - reweighted).abs() / reweighted, (via_density - reweighted).abs() / reweighted)
        };
        let (e1, _) = err(64);
        let (e2, d2) = err(1024);
        assert!(e2 <= e1 + 1e-12);
        assert!(e2 < 1e-3 && d2 < 1e-2, "{e2} {d2}");
    }
}
