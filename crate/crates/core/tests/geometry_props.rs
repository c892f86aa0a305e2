use affgeo::affine::{AffineMap, AffineSpaceSpec, BiAffineMap};
use affgeo::duality::{pair, DualElement, HullPoint, SpecialAffineSpace};
use affgeo::mechanics::{gauge_transform, newton_dynamics, NewtonSpaceTime, ObservedPhase, TimeDepSystem};
use affgeo::phase::{bold_d, AvBundle, CotangentSpacetime};
use affgeo::sampling::{grid, Point};
use affgeo::symexpr::{parse_free, Expr};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_map(DVector::from_vec)
}

fn matrix(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
}

/// Diagonally dominant, hence invertible.
fn invertible(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n).prop_map(move |m| DMatrix::identity(n, n) + m * 0.2)
}

fn space_with_chart(n: usize) -> impl Strategy<Value = AffineSpaceSpec> {
    (invertible(n), vector(n)).prop_map(move |(m, b)| AffineSpaceSpec::new("A", n, "ref").with_chart("alt", m, b).unwrap())
}

fn max_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

proptest! {
    #[test]
    fn differences_are_chart_independent(
        (space, x, y) in (1usize..5).prop_flat_map(|n| (space_with_chart(n), vector(n), vector(n)))
    ) {
        let (px, py) = (space.point("alt", x).unwrap(), space.point("alt", y).unwrap());
        let (rx, ry) = (space.convert(&px, "ref").unwrap(), space.convert(&py, "ref").unwrap());
        let d_alt = space.vector_to_reference(&space.difference(&px, &py).unwrap()).unwrap();
        let d_ref = space.vector_to_reference(&space.difference(&rx, &ry).unwrap()).unwrap();
        prop_assert!(max_diff(&d_alt, &d_ref) < 1e-12);
        prop_assert!(space.cocycle_check(&px, &ry, &px).unwrap() < 1e-12);
    }

    #[test]
    fn affine_map_linear_part(
        (m, b, a, u) in (1usize..5, 1usize..4).prop_flat_map(|(n, k)| (matrix(k, n), vector(k), vector(n), vector(n)))
    ) {
        let f = AffineMap::new(m.clone(), b).unwrap();
        let lhs = f.apply(&(&a + &u)).unwrap() - f.apply(&a).unwrap();
        prop_assert!(max_diff(&lhs, &(&m * &u)) < 1e-12);
    }

    #[test]
    fn biaffine_parts(
        (c, d, e, f, x, y, u, w) in (1usize..4, 1usize..4, 1usize..3).prop_flat_map(|(n1, n2, k)| (
            prop::collection::vec(matrix(n1, n2), k), matrix(k, n1), matrix(k, n2), vector(k),
            vector(n1), vector(n2), vector(n1), vector(n2),
        ))
    ) {
        let phi = BiAffineMap::new(c, d, e, f).unwrap();
        let parts = phi.parts();
        let ap = |x: &DVector<f64>, y: &DVector<f64>| phi.apply(x, y).unwrap();
        let xu = &x + &u;
        let yw = &y + &w;
        prop_assert!(max_diff(&(ap(&xu, &y) - ap(&x, &y)), &parts.first(&u, &y).unwrap()) < 1e-12);
        prop_assert!(max_diff(&(ap(&x, &yw) - ap(&x, &y)), &parts.second(&x, &w).unwrap()) < 1e-12);
        let mixed = ap(&xu, &yw) - ap(&xu, &y) - ap(&x, &yw) + ap(&x, &y);
        prop_assert!(max_diff(&mixed, &parts.bilinear(&u, &w).unwrap()) < 1e-12);
    }

    #[test]
    fn double_dual_round_trip(
        (v, a, u) in (1usize..5).prop_flat_map(|n| (vector(n), vector(n), vector(n)))
    ) {
        prop_assume!(v.amax() > 0.1);
        let sp = SpecialAffineSpace::new(AffineSpaceSpec::new("A", v.len(), "ref"), v).unwrap();
        let dd = sp.double_dual();
        prop_assert!(max_diff(&dd.from_double(&dd.to_double(&a)).unwrap(), &a) < 1e-12);
        prop_assert!(max_diff(&dd.vector_from_double(&dd.vector_to_double(&u)).unwrap(), &u) < 1e-12);
        let sd = sp.special_dual();
        let elt = sd.element(&sd.coords(&sd.particular).unwrap()).unwrap();
        prop_assert!(sd.contains(&elt));
    }

    #[test]
    fn pairing_is_evaluation(
        (w, c, x, space) in (1usize..5).prop_flat_map(|n| (vector(n), -2.0..2.0f64, vector(n), space_with_chart(n)))
    ) {
        let d = DualElement::new(w, c);
        prop_assert!((pair(&HullPoint::embed_point(x.clone()), &d).unwrap() - d.eval(&x)).abs() < 1e-12);
        let alt = d.in_chart(&space, "alt").unwrap();
        let rx = space.to_reference(&space.point("alt", x.clone()).unwrap()).unwrap();
        prop_assert!((alt.eval(&x) - d.eval(&rx)).abs() < 1e-10);
    }

    #[test]
    fn retagging_is_a_groupoid(seed in any::<u64>(), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vars = ["x", "y"];
        let sections: Vec<Expr> = (0..3).map(|_| Expr::random_polynomial(&mut rng, &vars, 3, 4)).collect();
        let bundle = AvBundle::new(vec!["x".into(), "y".into()], vec!["px".into(), "py".into()], "s").unwrap()
            .with_section("a", sections[0].clone()).unwrap()
            .with_section("b", sections[1].clone()).unwrap()
            .with_section("c", sections[2].clone()).unwrap();
        let m: Point = [("x".to_string(), x), ("y".to_string(), y)].into_iter().collect();
        let sigma = Expr::random_polynomial(&mut rng, &vars, 3, 4);
        let pa = bold_d(&bundle, &sigma, "a", &m).unwrap();
        let via = pa.retag(&bundle, "b").unwrap().retag(&bundle, "c").unwrap();
        let direct = pa.retag(&bundle, "c").unwrap();
        let fresh = bold_d(&bundle, &sigma, "c", &m).unwrap();
        prop_assert!(max_diff(&via.p, &direct.p) < 1e-12);
        prop_assert!(max_diff(&direct.p, &fresh.p) < 1e-12);
        prop_assert_eq!(pa.retag(&bundle, "a").unwrap().p, pa.p.clone());
    }

    #[test]
    fn gauge_composes(
        (x, p, s, v1, v2, m) in (1usize..4).prop_flat_map(|d| (
            vector(d + 1), vector(d), -5.0..5.0f64, vector(d), vector(d), 0.1..5.0f64,
        ))
    ) {
        let d = p.len();
        let st = NewtonSpaceTime::standard(d);
        let mut u = DVector::zeros(d + 1);
        u[0] = 1.0;
        let lift = |w: &DVector<f64>| st.embed_spatial(w);
        let ph = ObservedPhase { x, p, s, u };
        let step = gauge_transform(&st, &gauge_transform(&st, &ph, &lift(&v1), m).unwrap(), &lift(&v2), m).unwrap();
        let once = gauge_transform(&st, &ph, &lift(&(&v1 + &v2)), m).unwrap();
        prop_assert!(max_diff(&step.p, &once.p) < 1e-12 * (1.0 + m * 6.0));
        prop_assert!((step.s - once.s).abs() < 1e-10 * (1.0 + once.s.abs()));
        prop_assert_eq!(&step.x, &once.x);
        prop_assert!(max_diff(&step.u, &once.u) < 1e-12);
        let back = gauge_transform(&st, &gauge_transform(&st, &ph, &lift(&v1), m).unwrap(), &lift(&-v1.clone()), m).unwrap();
        prop_assert!(max_diff(&back.p, &ph.p) < 1e-12 * (1.0 + m * 3.0));
        prop_assert!((back.s - ph.s).abs() < 1e-10 * (1.0 + ph.s.abs()));
    }

    #[test]
    fn clock_is_one_in_every_frame(
        (v, y, a) in (1usize..4).prop_flat_map(|d| (vector(d), vector(2 * d + 1), -2.0..2.0f64))
    ) {
        let d = v.len();
        let st = NewtonSpaceTime::standard(d);
        let mut u = st.embed_spatial(&v);
        u[0] = 1.0;
        let phi = parse_free(&format!("{a}*x1 + x1^2/2")).unwrap();
        let f = newton_dynamics(&st, &st.frame(u).unwrap(), 1.3, &phi).unwrap();
        prop_assert!(f.clock_residual(y.as_slice()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn reduction_recovers_time_dependent_field(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = Expr::random_polynomial(&mut rng, &["q", "t", "p"], 4, 6);
        let sys = TimeDepSystem::new(CotangentSpacetime::standard(1), h).unwrap();
        let samples = grid(&["q", "t", "p"], &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        prop_assert!(sys.recovery_residual(&samples).unwrap().value < 1e-12);
    }
}
