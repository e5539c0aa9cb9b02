//! Schottky groups: validated generator data, reduced words, ping-pong
//! reduction to the fundamental domain and symbolic coding of the boundary.
//!
//! Generator `g_i` maps the exterior of the disk `D_i⁻` onto the interior of
//! `D_i⁺`. All disks are centred on the real axis, so in the half-plane they
//! are half-disks bounded by geodesics. The fundamental domain is the common
//! exterior of the `2m` disks.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypgeom::{BoundaryPoint, GeometryError, GroupElement, HPoint, HopfCoord};

/// Distance to a disk boundary below which membership is refused.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Step budget for [`SchottkyData::reduce_to_domain`].
pub const MAX_REDUCTION_STEPS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchottkyError {
    #[error("a Schottky group needs at least two generators, got {0}")]
    TooFewGenerators(usize),
    #[error("disk radius must be positive and finite (generator {generator})")]
    BadDisk { generator: usize },
    #[error("disks {first} and {second} overlap")]
    OverlappingDisks { first: usize, second: usize },
    #[error("generator {generator} does not map the boundary of D- onto the boundary of D+ (error {error:e})")]
    MappingMismatch { generator: usize, error: f64 },
    #[error("point lies within {BOUNDARY_TOL:e} of a disk boundary")]
    AmbiguousBoundary,
    #[error("reduction did not terminate after {MAX_REDUCTION_STEPS} steps")]
    NonTerminating,
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid group description: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: f64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: f64, radius: f64) -> Self {
        Disk { center, radius }
    }

    /// Boundary interval `[c - r, c + r]`.
    pub fn interval(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    /// Signed distance of a half-plane point to the boundary circle
    /// (negative inside).
    fn signed_gap_point(&self, p: &HPoint) -> f64 {
        (p.x() - self.center).hypot(p.y()) - self.radius
    }

    fn signed_gap_real(&self, x: f64) -> f64 {
        (x - self.center).abs() - self.radius
    }
}

/// A generator or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Letter { generator, inverse }
    }

    pub fn inv(self) -> Letter {
        Letter { generator: self.generator, inverse: !self.inverse }
    }

    /// Position in the alphabet `g_1, g_1⁻¹, g_2, g_2⁻¹, ...`.
    pub fn index(self) -> usize {
        2 * self.generator + self.inverse as usize
    }

    pub fn from_index(index: usize) -> Letter {
        Letter { generator: index / 2, inverse: index % 2 == 1 }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "g{}^-1", self.generator + 1)
        } else {
            write!(f, "g{}", self.generator + 1)
        }
    }
}

/// A reduced word in the generators.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a word, rejecting adjacent cancelling pairs.
    pub fn from_letters(letters: Vec<Letter>) -> Option<Self> {
        let w = Word(letters);
        w.is_reduced().then_some(w)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|p| p[1] != p[0].inv())
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inv()).collect())
    }

    pub fn first(&self) -> Option<Letter> {
        self.0.first().copied()
    }

    fn push(&mut self, letter: Letter) {
        self.0.push(letter);
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub matrix: GroupElement,
    pub disk_minus: Disk,
    pub disk_plus: Disk,
}

impl Generator {
    /// The disk-swapping map `z ↦ c⁺ - r⁻ r⁺ / (z - c⁻)`, which sends the
    /// exterior of `D⁻` onto the interior of `D⁺`.
    pub fn pairing(disk_minus: Disk, disk_plus: Disk) -> Result<Self, GeometryError> {
        let (c1, r1) = (disk_minus.center, disk_minus.radius);
        let (c2, r2) = (disk_plus.center, disk_plus.radius);
        let matrix = GroupElement::new(c2, -c2 * c1 - r1 * r2, 1.0, -c1)?;
        Ok(Generator { matrix, disk_minus, disk_plus })
    }
}

#[derive(Deserialize, Serialize)]
struct GroupDocument {
    generators: Vec<Generator>,
}

/// Result of boundary coding.
#[derive(Debug, Clone, PartialEq)]
pub enum Coding {
    /// Full-depth itinerary.
    Word(Word),
    /// The iterate left every disk; `reached` letters were read first.
    NotInLimitSet { reached: Word },
}

/// A validated Schottky group.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "GroupDocumentOwned")]
pub struct SchottkyData {
    generators: Vec<Generator>,
    letter_matrices: Vec<GroupElement>,
}

#[derive(Serialize)]
struct GroupDocumentOwned {
    generators: Vec<Generator>,
}

impl From<SchottkyData> for GroupDocumentOwned {
    fn from(s: SchottkyData) -> Self {
        GroupDocumentOwned { generators: s.generators }
    }
}

impl<'de> Deserialize<'de> for SchottkyData {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = GroupDocument::deserialize(deserializer)?;
        SchottkyData::new(doc.generators).map_err(serde::de::Error::custom)
    }
}

impl SchottkyData {
    pub fn new(generators: Vec<Generator>) -> Result<Self, SchottkyError> {
        if generators.len() < 2 {
            return Err(SchottkyError::TooFewGenerators(generators.len()));
        }
        let mut disks = Vec::with_capacity(2 * generators.len());
        for (i, g) in generators.iter().enumerate() {
            for d in [g.disk_minus, g.disk_plus] {
                if !(d.radius > 0.0 && d.radius.is_finite() && d.center.is_finite()) {
                    return Err(SchottkyError::BadDisk { generator: i });
                }
                disks.push(d);
            }
        }
        for i in 0..disks.len() {
            for j in i + 1..disks.len() {
                if (disks[i].center - disks[j].center).abs() <= disks[i].radius + disks[j].radius {
                    return Err(SchottkyError::OverlappingDisks { first: i, second: j });
                }
            }
        }
        for (i, g) in generators.iter().enumerate() {
            check_mapping(i, g)?;
        }
        let letter_matrices = generators.iter().flat_map(|g| [g.matrix, g.matrix.inverse()]).collect();
        Ok(SchottkyData { generators, letter_matrices })
    }

    /// Builds the group whose `i`-th generator is the standard pairing of the
    /// `i`-th disk pair.
    pub fn from_disk_pairs(pairs: &[(Disk, Disk)]) -> Result<Self, SchottkyError> {
        let generators = pairs
            .iter()
            .map(|(m, p)| Generator::pairing(*m, *p))
            .collect::<Result<Vec<_>, _>>()?;
        SchottkyData::new(generators)
    }

    /// Two generators: `D(-c, r) → D(c, r)` and the image of that pair under
    /// `z ↦ -1/z`, reversed.
    pub fn symmetric(c: f64, r: f64) -> Result<Self, SchottkyError> {
        let inverted = |d: Disk| {
            let s = d.center * d.center - d.radius * d.radius;
            Disk::new(-d.center / s, d.radius / s)
        };
        let a = Disk::new(-c, r);
        let b = Disk::new(c, r);
        SchottkyData::from_disk_pairs(&[(a, b), (inverted(a), inverted(b))])
    }

    /// `c = 3, r = 1`.
    pub fn default_group() -> Self {
        SchottkyData::symmetric(3.0, 1.0).expect("default preset is valid")
    }

    /// `c = 3, r = 0.5`.
    pub fn thin() -> Self {
        SchottkyData::symmetric(3.0, 0.5).expect("thin preset is valid")
    }

    /// Unequal radii inside the first pair, second pair its inverted image.
    pub fn asym() -> Self {
        let a = Disk::new(-3.0, 1.0);
        let b = Disk::new(3.0, 0.6);
        let inv = |d: Disk| {
            let s = d.center * d.center - d.radius * d.radius;
            Disk::new(-d.center / s, d.radius / s)
        };
        SchottkyData::from_disk_pairs(&[(a, b), (inv(a), inv(b))]).expect("asym preset is valid")
    }

    pub fn preset(name: &str) -> Result<Self, SchottkyError> {
        match name {
            "default" => Ok(SchottkyData::default_group()),
            "thin" => Ok(SchottkyData::thin()),
            "asym" => Ok(SchottkyData::asym()),
            other => Err(SchottkyError::UnknownPreset(other.to_string())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SchottkyError> {
        serde_json::from_str(text).map_err(|e| SchottkyError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("group serializes")
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.generators.len()
    }

    pub fn letter_matrix(&self, letter: Letter) -> &GroupElement {
        &self.letter_matrices[letter.index()]
    }

    pub fn word_matrix(&self, word: &Word) -> GroupElement {
        word.letters()
            .iter()
            .fold(GroupElement::identity(), |acc, l| acc * *self.letter_matrix(*l))
    }

    /// The disk that `letter` maps the complement of its inverse's disk into.
    pub fn disk_of(&self, letter: Letter) -> &Disk {
        let g = &self.generators[letter.generator];
        if letter.inverse {
            &g.disk_minus
        } else {
            &g.disk_plus
        }
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.alphabet_size()).map(Letter::from_index)
    }

    /// The letter whose disk contains `p`, if any.
    pub fn locate_point(&self, p: &HPoint) -> Result<Option<Letter>, SchottkyError> {
        let mut found = None;
        for letter in self.letters() {
            let gap = self.disk_of(letter).signed_gap_point(p);
            if gap.abs() < BOUNDARY_TOL {
                return Err(SchottkyError::AmbiguousBoundary);
            }
            if gap < 0.0 {
                found = Some(letter);
            }
        }
        Ok(found)
    }

    /// The letter whose boundary interval contains `xi`; `∞` is in none.
    pub fn locate_boundary(&self, xi: &BoundaryPoint) -> Result<Option<Letter>, SchottkyError> {
        let x = match xi {
            BoundaryPoint::Infinity => return Ok(None),
            BoundaryPoint::Finite(x) => *x,
        };
        let mut found = None;
        for letter in self.letters() {
            let gap = self.disk_of(letter).signed_gap_real(x);
            if gap.abs() < BOUNDARY_TOL {
                return Err(SchottkyError::AmbiguousBoundary);
            }
            if gap < 0.0 {
                found = Some(letter);
            }
        }
        Ok(found)
    }

    /// Whether `p` lies in the open fundamental domain.
    pub fn in_domain(&self, p: &HPoint) -> Result<bool, SchottkyError> {
        Ok(self.locate_point(p)?.is_none())
    }

    /// Number of reduced words of length exactly `len`.
    pub fn word_count(&self, len: usize) -> u64 {
        if len == 0 {
            return 1;
        }
        let k = self.alphabet_size() as u64;
        k * (k - 1).pow(len as u32 - 1)
    }

    /// Visits every reduced word of length `<= max_len` in lexicographic
    /// (depth-first, prefix-first) order.
    pub fn visit_words<F>(&self, max_len: usize, mut visit: F)
    where
        F: FnMut(&[Letter], &GroupElement),
    {
        let mut stack = Vec::with_capacity(max_len);
        self.visit_from(&mut stack, &GroupElement::identity(), max_len, &mut visit);
    }

    fn visit_from<F>(&self, prefix: &mut Vec<Letter>, matrix: &GroupElement, max_len: usize, visit: &mut F)
    where
        F: FnMut(&[Letter], &GroupElement),
    {
        visit(prefix, matrix);
        if prefix.len() == max_len {
            return;
        }
        let forbidden = prefix.last().map(|l| l.inv());
        for letter in self.letters() {
            if Some(letter) == forbidden {
                continue;
            }
            let next = matrix * self.letter_matrix(letter);
            prefix.push(letter);
            self.visit_from(prefix, &next, max_len, visit);
            prefix.pop();
        }
    }

    /// Maps every reduced word of length `<= max_len` through `f`, in parallel
    /// over first letters, returning results in lexicographic word order.
    pub fn map_words<T, F>(&self, max_len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[Letter], &GroupElement) -> Option<T> + Sync,
    {
        let mut out = Vec::new();
        if let Some(v) = f(&[], &GroupElement::identity()) {
            out.push(v);
        }
        if max_len == 0 {
            return out;
        }
        let branches: Vec<Vec<T>> = self
            .letters()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|first| {
                let mut local = Vec::new();
                let mut prefix = vec![first];
                let m = *self.letter_matrix(first);
                let mut visit = |w: &[Letter], g: &GroupElement| {
                    if let Some(v) = f(w, g) {
                        local.push(v);
                    }
                };
                self.visit_from(&mut prefix, &m, max_len, &mut visit);
                local
            })
            .collect();
        out.extend(branches.into_iter().flatten());
        out
    }

    /// Every reduced word of length `<= max_len` with its matrix, in
    /// lexicographic order.
    pub fn enumerate_words(&self, max_len: usize) -> WordIter<'_> {
        WordIter::new(self, max_len)
    }

    /// Ping-pong reduction: returns `(F₀, w)` with `F = γ_w F₀` and the base
    /// point of `F₀` in the fundamental domain.
    pub fn reduce_to_domain(&self, frame: &GroupElement) -> Result<(GroupElement, Word), SchottkyError> {
        let mut current = *frame;
        let mut word = Word::empty();
        for _ in 0..MAX_REDUCTION_STEPS {
            match self.locate_point(&current.base_point())? {
                None => return Ok((current, word)),
                Some(letter) => {
                    current = self.letter_matrix(letter.inv()) * &current;
                    word.push(letter);
                }
            }
        }
        Err(SchottkyError::NonTerminating)
    }

    /// Reduction that only tracks the frame (no word allocation).
    pub fn reduce_frame(&self, frame: &GroupElement) -> Result<GroupElement, SchottkyError> {
        let mut current = *frame;
        for _ in 0..MAX_REDUCTION_STEPS {
            match self.locate_point(&current.base_point())? {
                None => return Ok(current),
                Some(letter) => current = self.letter_matrix(letter.inv()) * &current,
            }
        }
        Err(SchottkyError::NonTerminating)
    }

    /// Itinerary of `xi` under the expanding boundary map: read the letter
    /// whose disk contains the iterate, then pull back by that letter.
    pub fn code_boundary(&self, xi: &BoundaryPoint, depth: usize) -> Result<Coding, SchottkyError> {
        let mut current = *xi;
        let mut word = Word::empty();
        for _ in 0..depth {
            match self.locate_boundary(&current)? {
                None => return Ok(Coding::NotInLimitSet { reached: word }),
                Some(letter) => {
                    current = self.letter_matrix(letter.inv()).apply_boundary(&current);
                    word.push(letter);
                }
            }
        }
        Ok(Coding::Word(word))
    }

    /// Radial-set proxy: the backward endpoint codes to full depth.
    pub fn is_radial(&self, h: &HopfCoord, depth: usize) -> Result<bool, SchottkyError> {
        Ok(matches!(self.code_boundary(&h.xi_minus, depth)?, Coding::Word(_)))
    }

    /// A point of the limit set with the periodic coding `w w w ...`: the
    /// attracting fixed point of `γ_w`.
    pub fn periodic_limit_point(&self, word: &Word) -> Option<BoundaryPoint> {
        if word.is_empty() {
            return None;
        }
        self.word_matrix(word).fixed_points().map(|(_, attracting)| attracting)
    }
}

fn check_mapping(index: usize, g: &Generator) -> Result<(), SchottkyError> {
    let (cm, rm) = (g.disk_minus.center, g.disk_minus.radius);
    let (cp, rp) = (g.disk_plus.center, g.disk_plus.radius);
    let mut worst = 0.0f64;
    for k in 0..16 {
        let th = std::f64::consts::PI * (k as f64 + 0.5) / 16.0;
        let p = HPoint::new(cm + rm * th.cos(), rm * th.sin())?;
        let q = g.matrix.apply_point(&p);
        worst = worst.max(((q.x() - cp).hypot(q.y()) - rp).abs() / rp.max(1.0));
    }
    for x in [cm - rm, cm + rm] {
        if let BoundaryPoint::Finite(y) = g.matrix.apply_boundary(&BoundaryPoint::Finite(x)) {
            worst = worst.max((((y - cp).abs()) - rp).abs() / rp.max(1.0));
        } else {
            worst = f64::INFINITY;
        }
    }
    // exterior goes inside: the far point ∞ must land in D⁺
    let inside = match g.matrix.apply_boundary(&BoundaryPoint::Infinity) {
        BoundaryPoint::Finite(y) => (y - cp).abs() < rp,
        BoundaryPoint::Infinity => false,
    };
    if worst > 1e-9 || !inside {
        return Err(SchottkyError::MappingMismatch { generator: index, error: worst });
    }
    Ok(())
}

/// Depth-first iterator over reduced words.
pub struct WordIter<'a> {
    group: &'a SchottkyData,
    max_len: usize,
    letters: Vec<Letter>,
    matrices: Vec<GroupElement>,
    // next alphabet index to try at each depth
    cursor: Vec<usize>,
    started: bool,
}

impl<'a> WordIter<'a> {
    fn new(group: &'a SchottkyData, max_len: usize) -> Self {
        WordIter {
            group,
            max_len,
            letters: Vec::new(),
            matrices: vec![GroupElement::identity()],
            cursor: vec![0],
            started: false,
        }
    }
}

impl Iterator for WordIter<'_> {
    type Item = (Word, GroupElement);

    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            self.started = true;
            return Some((Word::empty(), GroupElement::identity()));
        }
        let k = self.group.alphabet_size();
        loop {
            let depth = self.letters.len();
            if depth < self.max_len {
                let forbidden = self.letters.last().map(|l| l.inv().index());
                let mut idx = self.cursor[depth];
                if Some(idx) == forbidden {
                    idx += 1;
                }
                if idx < k {
                    self.cursor[depth] = idx + 1;
                    let letter = Letter::from_index(idx);
                    let m = self.matrices[depth] * *self.group.letter_matrix(letter);
                    self.letters.push(letter);
                    self.matrices.push(m);
                    self.cursor.push(0);
                    return Some((Word(self.letters.clone()), m));
                }
            }
            // exhausted this node: backtrack
            self.letters.pop()?;
            self.matrices.pop();
            self.cursor.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_word(s: &SchottkyData, len: usize, rng: &mut ChaCha8Rng) -> Word {
        let mut letters: Vec<Letter> = Vec::with_capacity(len);
        while letters.len() < len {
            let l = Letter::from_index(rng.gen_range(0..s.alphabet_size()));
            if letters.last().map(|p| p.inv()) != Some(l) {
                letters.push(l);
            }
        }
        Word::from_letters(letters).unwrap()
    }

    #[test]
    fn presets_validate() {
        for name in ["default", "thin", "asym"] {
            let s = SchottkyData::preset(name).unwrap();
            assert_eq!(s.rank(), 2);
            assert!(s.in_domain(&HPoint::BASE).unwrap());
        }
        assert!(matches!(SchottkyData::preset("nope"), Err(SchottkyError::UnknownPreset(_))));
    }

    #[test]
    fn default_disks() {
        let s = SchottkyData::default_group();
        let g = &s.generators()[1];
        assert!((g.disk_minus.center - 0.375).abs() < 1e-15);
        assert!((g.disk_minus.radius - 0.125).abs() < 1e-15);
        assert!((g.disk_plus.center + 0.375).abs() < 1e-15);
    }

    #[test]
    fn validation_errors() {
        let a = Disk::new(-3.0, 1.0);
        let b = Disk::new(3.0, 1.0);
        assert_eq!(
            SchottkyData::from_disk_pairs(&[(a, b)]).unwrap_err(),
            SchottkyError::TooFewGenerators(1)
        );
        let c = Disk::new(2.5, 0.4);
        let d = Disk::new(-0.5, 0.1);
        assert!(matches!(
            SchottkyData::from_disk_pairs(&[(a, b), (c, d)]),
            Err(SchottkyError::OverlappingDisks { .. })
        ));
        let wrong = Generator { matrix: GroupElement::geodesic(1.0), disk_minus: a, disk_plus: b };
        let good = Generator::pairing(Disk::new(0.4, 0.1), Disk::new(-0.4, 0.1)).unwrap();
        assert!(matches!(
            SchottkyData::new(vec![wrong, good]),
            Err(SchottkyError::MappingMismatch { generator: 0, .. })
        ));
    }

    #[test]
    fn word_counts() {
        let s = SchottkyData::default_group();
        let mut per_len = [0u64; 4];
        for (w, _) in s.enumerate_words(3) {
            per_len[w.len()] += 1;
            assert!(w.is_reduced());
        }
        assert_eq!(per_len, [1, 4, 12, 36]);
    }

    #[test]
    fn iterator_and_visitor_agree() {
        let s = SchottkyData::asym();
        let mut visited = Vec::new();
        s.visit_words(4, |w, g| visited.push((w.to_vec(), *g)));
        let iterated: Vec<_> = s.enumerate_words(4).map(|(w, g)| (w.letters().to_vec(), g)).collect();
        assert_eq!(visited.len(), iterated.len());
        for (a, b) in visited.iter().zip(&iterated) {
            assert_eq!(a.0, b.0);
            assert!(a.1.approx_eq(&b.1, 1e-12));
        }
        let mapped = s.map_words(4, |w, _| Some(w.to_vec()));
        assert_eq!(mapped, visited.iter().map(|v| v.0.clone()).collect::<Vec<_>>());
        // lexicographic order
        let words: Vec<Word> = iterated.into_iter().map(|(w, _)| Word(w)).collect();
        assert!(words.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn reduce_trivial_cases() {
        let s = SchottkyData::default_group();
        let f = GroupElement::geodesic(0.1);
        let (f0, w) = s.reduce_to_domain(&f).unwrap();
        assert!(w.is_empty());
        assert_eq!(f0, f);
        let g1 = s.generators()[0].matrix;
        let (f0, w) = s.reduce_to_domain(&g1).unwrap();
        assert_eq!(w.letters(), &[Letter::new(0, false)]);
        assert!(f0.approx_eq(&GroupElement::identity(), 1e-12));
    }

    #[test]
    fn reduce_recovers_random_words() {
        let s = SchottkyData::default_group();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let w = random_word(&s, 8, &mut rng);
            let g = s.word_matrix(&w);
            let (f0, back) = s.reduce_to_domain(&g).unwrap();
            assert_eq!(back, w);
            assert!(f0.approx_eq(&GroupElement::identity(), 1e-6));
            assert!(s.in_domain(&f0.base_point()).unwrap());
            let (_, again) = s.reduce_to_domain(&f0).unwrap();
            assert!(again.is_empty());
        }
    }

    #[test]
    fn reduce_rejects_boundary_points() {
        let s = SchottkyData::default_group();
        // base point on the circle of D(3, 1)
        let on = GroupElement::new(1.0, 3.0, 0.0, 1.0).unwrap();
        assert_eq!(s.reduce_to_domain(&on), Err(SchottkyError::AmbiguousBoundary));
    }

    #[test]
    fn coding_examples() {
        let s = SchottkyData::default_group();
        let g1 = Letter::new(0, false);
        match s.code_boundary(&BoundaryPoint::Finite(3.0), 1).unwrap() {
            Coding::Word(w) => assert_eq!(w.letters(), &[g1]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            s.code_boundary(&BoundaryPoint::Finite(1.0), 3).unwrap(),
            Coding::NotInLimitSet { .. }
        ));
        assert!(matches!(
            s.code_boundary(&BoundaryPoint::Infinity, 3).unwrap(),
            Coding::NotInLimitSet { .. }
        ));
        let fixed = s.generators()[0].matrix.fixed_points().unwrap().1;
        assert!(fixed.approx_eq(&BoundaryPoint::Finite(8f64.sqrt()), 1e-12));
        for depth in 1..=10 {
            match s.code_boundary(&fixed, depth).unwrap() {
                Coding::Word(w) => assert!(w.letters().iter().all(|l| *l == g1)),
                other => panic!("depth {depth}: {other:?}"),
            }
        }
    }

    #[test]
    fn radial_examples() {
        let s = SchottkyData::default_group();
        let fixed = s.generators()[0].matrix.fixed_points().unwrap().1;
        let h = HopfCoord { xi_minus: fixed, xi_plus: BoundaryPoint::Finite(-1.0), t: 0.0 };
        for depth in [1, 5, 10] {
            assert!(s.is_radial(&h, depth).unwrap());
        }
        let h = HopfCoord { xi_minus: BoundaryPoint::Finite(1.0), xi_plus: BoundaryPoint::Finite(3.0), t: 0.0 };
        assert!(!s.is_radial(&h, 1).unwrap());
    }

    #[test]
    fn coding_first_letter_matches_reduction() {
        let s = SchottkyData::default_group();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let w = random_word(&s, 6, &mut rng);
            let xi = s.periodic_limit_point(&w).unwrap();
            let first = match s.code_boundary(&xi, 1).unwrap() {
                Coding::Word(c) => c.first().unwrap(),
                other => panic!("{other:?}"),
            };
            assert_eq!(first, w.first().unwrap());
            // frame leaving xi towards 0 (outside every disk), slid back into the first disk
            let h = HopfCoord { xi_minus: xi, xi_plus: BoundaryPoint::Finite(0.0), t: 0.0 };
            let mut frame = crate::hypgeom::hopf_to_frame(&h).unwrap();
            while s.locate_point(&frame.base_point()).unwrap() != Some(first) {
                frame = crate::hypgeom::geodesic_flow(&frame, -0.25);
            }
            let (_, red) = s.reduce_to_domain(&frame).unwrap();
            assert_eq!(red.first(), Some(first));
        }
    }

    #[test]
    fn json_round_trip() {
        let s = SchottkyData::asym();
        let text = s.to_json();
        assert!(text.contains("disk_minus"));
        let back = SchottkyData::from_json(&text).unwrap();
        for (a, b) in s.generators().iter().zip(back.generators()) {
            let (ea, eb) = (a.matrix.entries(), b.matrix.entries());
            for (x, y) in ea.iter().zip(eb) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            assert_eq!(a.disk_minus, b.disk_minus);
        }
        assert!(SchottkyData::from_json("{\"generators\": []}").is_err());
    }
}
