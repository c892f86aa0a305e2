use affgeo::symexpr::{parse, VarContext, VarRole};
use affgeo_demo::{field_bracket, frame_comparison, hamiltonian_flow};

#[test]
fn bracket_of_rotation_and_dilation_in_x() {
    let out = field_bracket("x, y", "y; -x", "x; 0").unwrap();
    let ctx = VarContext::from_names(&["x", "y"], VarRole::Base).unwrap();
    let parts: Vec<_> = out
        .trim_matches(|c| c == '(' || c == ')')
        .split(';')
        .map(|c| parse(c.trim(), &ctx).unwrap())
        .collect();
    let at = [("x", 0.7), ("y", -1.3)];
    let values: Vec<f64> = parts.iter().map(|e| e.eval(&at[..]).unwrap()).collect();
    assert!((values[0] + 1.3).abs() < 1e-14 && (values[1] - 0.7).abs() < 1e-14, "{out}");
}

#[test]
fn bracket_rejects_bad_input() {
    assert!(field_bracket("x", "z", "x").unwrap_err().contains("z"));
    assert!(field_bracket("x, y", "y", "x; 0").unwrap_err().contains("components"));
    assert!(field_bracket(" , ", "1", "1").is_err());
}

#[test]
fn oscillator_flow_follows_cosine_and_keeps_energy() {
    let f = hamiltonian_flow("p^2/2 + q^2/2", 1.0, 0.0, 0.0, 1e-3, 10.0).unwrap();
    assert!(f.t.len() <= 601 && f.t.len() > 500);
    for k in 0..f.t.len() {
        assert!((f.q[k] - f.t[k].cos()).abs() < 1e-9);
        assert!((f.p[k] + f.t[k].sin()).abs() < 1e-9);
        assert!((f.energy[k] - 0.5).abs() < 1e-9);
    }
}

#[test]
fn flow_reports_domain_errors() {
    assert!(hamiltonian_flow("p^2/2", 0.0, 0.0, 1.0, 0.0, 1.0).is_err());
    assert!(hamiltonian_flow("p^2/2 + w", 0.0, 0.0, 1.0, 0.1, 1.0).is_err());
}

#[test]
fn boosted_frame_sees_the_same_world_line() {
    let r = frame_comparison("(x1^2 + x2^2)/2", 1.0, [1.0, 0.0], [0.0, 0.5], [0.3, -0.2], 1e-3, 5.0).unwrap();
    assert!(r.pass && r.max_deviation < 1e-9, "{}", r.max_deviation);
    assert!(r.clock_residual < 1e-9);
    assert_eq!(r.rest.len(), r.boosted.len());
    assert!((r.rest[0][0] - 1.0).abs() < 1e-15);
}

#[test]
fn bracket_is_printed_with_like_terms_collected() {
    assert_eq!(field_bracket("x, y", "y; -x", "x^2; x*y").unwrap(), "(x*y; y^2)");
}
