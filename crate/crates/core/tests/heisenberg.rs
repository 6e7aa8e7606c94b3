use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use hslice::heisenberg::{project_along, HPoint, HorizontalDirection};

fn point(n: usize) -> impl Strategy<Value = HPoint> {
    (prop::collection::vec(-3.0..3.0f64, 2 * n), -3.0..3.0f64)
        .prop_map(move |(h, z)| HPoint::new(h[..n].to_vec(), h[n..].to_vec(), z).unwrap())
}

fn direction(n: usize) -> impl Strategy<Value = HorizontalDirection> {
    prop::collection::vec(-1.5..1.5f64, 2 * n - 1).prop_map(move |mut h| {
        h.push(1.0);
        HorizontalDirection::from_horizontal(&h).unwrap()
    })
}

fn assert_close(a: &HPoint, b: &HPoint, tol: f64) {
    for (u, v) in a.project_pi().iter().zip(b.project_pi()) {
        assert_abs_diff_eq!(*u, v, epsilon = tol);
    }
    assert_abs_diff_eq!(a.z, b.z, epsilon = tol);
}

fn points_with_n() -> impl Strategy<Value = (HPoint, HPoint, HPoint)> {
    (1usize..=3).prop_flat_map(|n| (point(n), point(n), point(n)))
}

proptest! {
    #[test]
    fn group_law_is_associative((a, b, c) in points_with_n()) {
        assert_close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-10);
    }

    #[test]
    fn inverse_is_two_sided_and_involutive((a, _b, _c) in points_with_n()) {
        let e = HPoint::origin(a.n());
        assert_close(&(&a * &a.inv()), &e, 1e-12);
        assert_close(&(&a.inv() * &a), &e, 1e-12);
        assert_close(&a.inv().inv(), &a, 0.0);
    }

    #[test]
    fn dilations_are_automorphisms((a, b, _c) in points_with_n(), t in -3.0..3.0f64) {
        assert_close(&(&a * &b).dilate(t), &(&a.dilate(t) * &b.dilate(t)), 1e-10);
        assert_close(&a.dilate(-1.0).dilate(-1.0), &a, 0.0);
    }

    #[test]
    fn gauge_distance_is_a_homogeneous_left_invariant_metric((a, b, c) in points_with_n(), t in 0.01..5.0f64) {
        let d = a.gauge_dist(&b);
        assert_abs_diff_eq!(d, b.gauge_dist(&a), epsilon = 1e-12);
        assert_abs_diff_eq!(a.dilate(t).gauge_dist(&b.dilate(t)), t * d, epsilon = 1e-10 * (1.0 + t * d));
        assert_abs_diff_eq!((&c * &a).gauge_dist(&(&c * &b)), d, epsilon = 1e-9 * (1.0 + d));
        prop_assert!(a.gauge_dist(&c) <= d + b.gauge_dist(&c) + 1e-10);
    }

    #[test]
    fn horizontal_projection_is_a_homomorphism((a, b, _c) in points_with_n(), t in -3.0..3.0f64) {
        let sum: Vec<f64> = a.project_pi().iter().zip(b.project_pi()).map(|(u, v)| u + v).collect();
        for (u, v) in (&a * &b).project_pi().iter().zip(&sum) {
            assert_abs_diff_eq!(*u, *v, epsilon = 1e-12);
        }
        for (u, v) in a.dilate(t).project_pi().iter().zip(a.project_pi()) {
            assert_abs_diff_eq!(*u, t * v, epsilon = 1e-12);
        }
    }

    #[test]
    fn commutator_is_central((a, b, _c) in points_with_n()) {
        let k = a.commutator(&b).unwrap();
        prop_assert!(k.project_pi().iter().all(|v| v.abs() < 1e-12));
        assert_abs_diff_eq!(k.z, a.omega_bar(&b), epsilon = 1e-10);
        prop_assert!(a.commutator(&a).unwrap().z.abs() < 1e-12);
    }

    #[test]
    fn projection_along_w_lands_in_the_hyperplane_and_is_idempotent(
        (w, h, g) in (2usize..=3).prop_flat_map(|n| (direction(n), point(n), point(n)))
    ) {
        let n = h.n();
        let p = project_along(&w, &h);
        assert_abs_diff_eq!(p.y[n - 1], 0.0, epsilon = 1e-12);
        assert_close(&project_along(&w, &p), &p, 1e-12);
        let lhs = project_along(&w, &(&g * &h));
        let rhs = project_along(&w, &(&g * &p));
        assert_close(&lhs, &rhs, 1e-9);
    }
}

#[test]
fn projection_of_the_direction_itself_is_the_identity() {
    let w = HorizontalDirection::from_horizontal(&[0.3, -0.2, 0.5, 1.0]).unwrap();
    let p = project_along(&w, w.point());
    assert_close(&p, &HPoint::origin(2), 1e-14);
}
