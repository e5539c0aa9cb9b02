use horolab::density::{lebesgue_density, poincare_partial};
use horolab::hypgeom::*;
use horolab::schottky::{Letter, SchottkyData, Word};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = HPoint> {
    (-6.0..6.0f64, -3.0..3.0f64).prop_map(|(x, ly)| HPoint::new(x, ly.exp()).unwrap())
}

fn boundary() -> impl Strategy<Value = BoundaryPoint> {
    prop_oneof![
        9 => (-8.0..8.0f64).prop_map(BoundaryPoint::Finite),
        1 => Just(BoundaryPoint::Infinity),
    ]
}

fn rotation(theta: f64) -> GroupElement {
    let (s, c) = theta.sin_cos();
    GroupElement::new(c, -s, s, c).unwrap()
}

/// `k_θ a_t n_s`, covering the group up to bounded norm.
fn element() -> impl Strategy<Value = GroupElement> {
    (0.0..std::f64::consts::TAU, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(th, t, s)| rotation(th) * GroupElement::geodesic(t) * GroupElement::horocycle(s))
}

fn frame() -> impl Strategy<Value = GroupElement> {
    (point(), 0.0..std::f64::consts::TAU).prop_map(|(p, th)| {
        let lift = GroupElement::new(p.y().sqrt(), p.x() / p.y().sqrt(), 0.0, 1.0 / p.y().sqrt()).unwrap();
        lift * rotation(th)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn busemann_cocycle(xi in boundary(), x in point(), y in point(), z in point()) {
        let lhs = busemann(&xi, &x, &z);
        let rhs = busemann(&xi, &x, &y) + busemann(&xi, &y, &z);
        prop_assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn busemann_equivariance(g in element(), xi in boundary(), x in point(), y in point()) {
        let moved = busemann(&g.apply_boundary(&xi), &g.apply_point(&x), &g.apply_point(&y));
        prop_assert!((moved - busemann(&xi, &x, &y)).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn mobius_preserves_distance(g in element(), p in point(), q in point()) {
        let (gp, gq) = (g.apply_point(&p), g.apply_point(&q));
        prop_assert!(gp.y() > 0.0 && gq.y() > 0.0);
        prop_assert!((dist(&gp, &gq) - dist(&p, &q)).abs() <= 1e-9);
    }

    #[test]
    fn geodesic_flow_translates_t(f in frame(), t in -5.0..5.0f64) {
        let (h0, h1) = (frame_to_hopf(&f), frame_to_hopf(&geodesic_flow(&f, t)));
        prop_assert!((h1.t - h0.t - t).abs() <= 1e-9);
        prop_assert!(h1.xi_minus.approx_eq(&h0.xi_minus, 1e-9));
        prop_assert!(h1.xi_plus.approx_eq(&h0.xi_plus, 1e-9));
    }

    #[test]
    fn horocycle_conjugation(t in -5.0..5.0f64, s in -5.0..5.0f64) {
        let lhs = GroupElement::geodesic(t) * GroupElement::horocycle(s) * GroupElement::geodesic(-t);
        let rhs = GroupElement::horocycle(s * (-t).exp());
        prop_assert!(lhs.approx_eq(&rhs, 1e-12), "{lhs:?} vs {rhs:?}");
    }

    #[test]
    fn flow_is_additive(f in frame(), s in -4.0..4.0f64, t in -4.0..4.0f64) {
        let two_steps = geodesic_flow(&geodesic_flow(&f, s), t);
        let one_step = geodesic_flow(&f, s + t);
        prop_assert!(two_steps.approx_eq(&one_step, 1e-12 * (1.0 + f.norm_sq()) * (s.abs() + t.abs()).exp()));
    }

    #[test]
    fn hopf_round_trip(f in frame()) {
        let back = hopf_to_frame(&frame_to_hopf(&f)).unwrap();
        prop_assert!(back.projective_distance(&f) <= 1e-9, "{back:?} vs {f:?}");
    }

    #[test]
    fn isometry_matches_matrix_route(g in element(), f in frame()) {
        let h = frame_to_hopf(&f);
        let by_formula = isometry_on_hopf(&g, &h);
        let by_product = frame_to_hopf(&(g * f));
        prop_assert!(by_formula.approx_eq(&by_product, 1e-9), "{by_formula:?} vs {by_product:?}");
    }

    #[test]
    fn horocycle_keeps_backward_endpoint_and_time(f in frame(), s in -5.0..5.0f64) {
        let (h0, h1) = (frame_to_hopf(&f), frame_to_hopf(&horocycle_step(&f, s)));
        prop_assert!(h1.xi_minus.approx_eq(&h0.xi_minus, 1e-9));
        prop_assert!((h1.t - h0.t).abs() <= 1e-9);
    }

    #[test]
    fn lebesgue_cocycle_is_exact(xi in boundary(), x in point(), y in point(), z in point()) {
        let lhs = lebesgue_density(&x, &z, &xi);
        let rhs = lebesgue_density(&x, &y, &xi) * lebesgue_density(&y, &z, &xi);
        prop_assert!((lhs / rhs - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn reduction_recovers_words(indices in proptest::collection::vec(0usize..4, 8)) {
        let g = SchottkyData::default_group();
        let mut letters: Vec<Letter> = Vec::new();
        for i in indices {
            let mut l = Letter::from_index(i);
            if letters.last().map(|p| p.inv()) == Some(l) {
                l = Letter::from_index((i + 1) % 4);
            }
            letters.push(l);
        }
        let word = Word::from_letters(letters).unwrap();
        let frame = g.word_matrix(&word);
        let (reduced, coded) = g.reduce_to_domain(&frame).unwrap();
        prop_assert_eq!(&coded, &word);
        prop_assert!(reduced.projective_distance(&GroupElement::identity()) <= 1e-9);
        prop_assert!((g.word_matrix(&coded) * reduced).projective_distance(&frame) <= 1e-9 * frame.norm_sq().sqrt());
        let (_, again) = g.reduce_to_domain(&reduced).unwrap();
        prop_assert!(again.is_empty());
    }
}

#[test]
fn poincare_partials_are_monotone() {
    let g = SchottkyData::default_group();
    let by_k: Vec<f64> = (1..=7).map(|k| poincare_partial(&g, 0.5, k)).collect();
    assert!(by_k.windows(2).all(|w| w[0] <= w[1]));
    let by_s: Vec<f64> = [0.3, 0.4, 0.5, 0.7].iter().map(|&s| poincare_partial(&g, s, 6)).collect();
    assert!(by_s.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(poincare_partial(&g, 0.5, 6).to_bits(), poincare_partial(&g, 0.5, 6).to_bits());
}
