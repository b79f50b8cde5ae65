use quench_web::{field_points, static_points, tau_points};

#[test]
fn static_curve_is_polarized_at_large_field() {
    let v = static_points(40, 1.0, -30.0, 30.0, 3, "qfi", 1).unwrap();
    assert_eq!(v.len(), 6);
    assert_eq!((v[0], v[4]), (-30.0, 30.0));
    assert!((v[1] - 8.0).abs() < 0.05 && (v[5] - 8.0).abs() < 0.05);
}

#[test]
fn field_and_tau_curves_have_requested_points() {
    let f = field_points(20, 1.0, 2.0, 0.1, -2.0, 2.0, 9, "lqc_x", 2).unwrap();
    assert_eq!(f.len(), 18);
    assert!(f.chunks(2).all(|p| p[1] >= 0.0 && p[1].is_finite()));
    let t = tau_points(20, 1.0, 0.0, 0.5, 5.0, 4, "qfi", 1).unwrap();
    assert_eq!(t.len(), 8);
    assert!((t[6] - 5.0).abs() < 1e-12);
}

#[test]
fn bad_input_is_reported() {
    assert!(static_points(40, 1.0, -1.0, 1.0, 3, "fisher", 1).is_err());
    assert!(static_points(40, 1.0, -1.0, 1.0, 3, "qfi", 3).is_err());
    assert!(static_points(7, 1.0, -1.0, 1.0, 3, "qfi", 1).is_err());
    assert!(tau_points(20, 1.0, 0.0, 0.0, 5.0, 4, "qfi", 1).is_err());
}
