use affgeo::symexpr::{parse_free, Expr, Func};
use proptest::prelude::*;

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0..3.0f64).prop_map(Expr::num),
        Just(Expr::var("x")),
        Just(Expr::var("y")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / (Expr::num(2.0) + b.clone() * b)),
            inner.clone().prop_map(|a| -a),
            (inner.clone(), 0..4i32).prop_map(|(a, k)| a.powi(k)),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.prop_map(|a| Expr::call(Func::Cos, a)),
        ]
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn print_then_parse_evaluates_equal(e in expr(), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let back = parse_free(&e.to_string()).unwrap();
        let at = [("x", x), ("y", y)];
        let (a, b) = (e.eval(&at).unwrap(), back.eval(&at).unwrap());
        prop_assert!(close(a, b, 1e-12), "{} -> {}: {} vs {}", e, back, a, b);
    }

    #[test]
    fn derivative_matches_central_difference(e in expr(), x in -1.5..1.5f64, y in -1.5..1.5f64) {
        let h = 1e-5;
        let f = |x: f64| e.eval(&[("x", x), ("y", y)]).unwrap();
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let d = e.diff("x").eval(&[("x", x), ("y", y)]).unwrap();
        let scale = f(x).abs().max(f(x + h).abs()).max(1.0);
        prop_assert!((fd - d).abs() <= 1e-4 * scale * (1.0 + d.abs()), "{}: fd {} vs {}", e, fd, d);
    }

    #[test]
    fn simplify_preserves_value(e in expr(), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let at = [("x", x), ("y", y)];
        prop_assert!(close(e.eval(&at).unwrap(), e.simplify().eval(&at).unwrap(), 1e-12));
    }

    #[test]
    fn expand_preserves_value(e in expr(), x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let at = [("x", x), ("y", y)];
        let ex = e.expand();
        let (a, b) = (e.eval(&at).unwrap(), ex.eval(&at).unwrap());
        prop_assert!(close(a, b, 1e-9), "{} -> {}: {} vs {}", e, ex, a, b);
    }

    #[test]
    fn expand_is_idempotent(e in expr()) {
        let once = e.expand();
        prop_assert_eq!(once.expand().to_string(), once.to_string());
    }

    #[test]
    fn substitution_is_composition(e in expr(), g in expr(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let gx = g.eval(&[("x", x), ("y", y)]).unwrap();
        let lhs = e.substitute("x", &g).eval(&[("x", x), ("y", y)]).unwrap();
        let rhs = e.eval(&[("x", gx), ("y", y)]).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
    }
}

#[test]
fn expand_collects_like_terms() {
    let cases = [
        ("y*(2*x) - x*y", "x*y"),
        ("y*y - x*x + x^2", "y^2"),
        ("(x + 1)^2 - x^2", "2.0*x + 1.0"),
        ("p^2/2 + q^2/2", "0.5*p^2 + 0.5*q^2"),
        ("x*y/y", "x"),
        ("sin(x + x) - sin(2*x)", "0.0"),
        ("(x + y)*(x - y)", "x^2 - y^2"),
    ];
    for (input, want) in cases {
        assert_eq!(parse_free(input).unwrap().expand().to_string(), want, "{input}");
    }
}
