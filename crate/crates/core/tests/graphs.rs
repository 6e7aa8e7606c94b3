use hslice::beta::{best_affine_fit_with, QuasiBox, Quadrature};
use hslice::graphs::{
    check_cone_condition, make_family, reparametrize, slice_lipschitz_bound, vertical_plane_graph, Family,
    GraphFamilySpec, IntrinsicGraph,
};
use hslice::grid::{BoxDomain, DyadicGrid, ScalarGrid};
use hslice::heisenberg::{project_along, HPoint, HorizontalDirection};

fn plane(slope: &[f64], constant: f64) -> IntrinsicGraph {
    let dom = BoxDomain::centered(&[3.0, 3.0, 3.0, 6.0]).unwrap();
    vertical_plane_graph(2, slope, constant, dom, 16, 0.3, 0.72).unwrap()
}

#[test]
fn graph_points_project_back_to_their_parameters() {
    let g = make_family(&GraphFamilySpec::new(Family::SmoothBump, 2, 0.3, 1, 16)).unwrap();
    for coords in [[0.1, -0.4, 0.3, 0.2], [-1.0, 0.5, 0.0, -0.7], [0.0, 0.0, 0.0, 0.0]] {
        let v = HPoint::from_v0_coords(&coords);
        let p = g.graph_point(&v).unwrap();
        let back = project_along(g.w(), &p);
        for (a, b) in back.v0_coords().iter().zip(coords) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn vertical_planes_satisfy_the_cone_condition_with_room_to_spare() {
    let rep = check_cone_condition(&plane(&[0.1, -0.2, 0.15], 0.3), 10_000, 0).unwrap();
    assert!(rep.passed);
    assert!(rep.worst_ratio < rep.threshold);
    assert!(rep.worst_ratio > 0.0);
    let flat = check_cone_condition(&plane(&[0.0, 0.0, 0.0], 0.0), 10_000, 0).unwrap();
    assert_eq!(flat.worst_ratio, 0.0);
}

#[test]
fn the_gauge_norm_is_not_intrinsic_lipschitz_for_small_cones() {
    let grid = DyadicGrid::new(BoxDomain::centered(&[2.0, 2.0, 2.0, 4.0]).unwrap(), 16).unwrap();
    let f = ScalarGrid::from_fn(grid, |c| HPoint::from_v0_coords(c).gauge_norm()).unwrap();
    let g = IntrinsicGraph::new(HorizontalDirection::y_n(2), f, 0.3, 0.72).unwrap();
    assert!(!check_cone_condition(&g, 10_000, 0).unwrap().passed);
}

#[test]
fn families_are_admissible_and_deterministic() {
    for family in [Family::VerticalPlane, Family::SmoothBump, Family::RandomLipschitz] {
        let spec = GraphFamilySpec::new(family, 2, 0.3, 4, 16);
        let a = make_family(&spec).unwrap();
        let b = make_family(&spec).unwrap();
        assert_eq!(a.f().values, b.f().values, "{family:?}");
        assert!(check_cone_condition(&a, 10_000, 9).unwrap().passed, "{family:?}");
    }
}

#[test]
fn steeper_cones_allow_larger_bumps() {
    let amp = |lambda| {
        let g = make_family(&GraphFamilySpec::new(Family::SmoothBump, 2, lambda, 0, 16)).unwrap();
        g.f().max() - g.f().min()
    };
    let (low, high) = (amp(0.2), amp(0.5));
    assert!(high > 1.5 * low, "{low} vs {high}");
}

#[test]
fn reparametrizing_a_plane_along_a_commuting_direction_stays_affine() {
    let g = plane(&[0.2, -0.1, 0.15], 0.4);
    let wp = HorizontalDirection::from_horizontal(&[0.1, 0.0, 0.05, 1.0]).unwrap();
    assert!(g.w().commutes_with(&wp, 1e-15));
    let gp = reparametrize(&g, &wp).unwrap();
    let q = QuasiBox::new(wp.clone(), HPoint::origin(2), 1.0).unwrap();
    let fit = best_affine_fit_with(gp.f(), &q, Quadrature::Lattice { per_axis: 6 }).unwrap();
    assert!(fit.residual < 1e-8, "{}", fit.residual);
    let lip_t = (0.2f64.powi(2) + 0.1f64.powi(2) + 0.15f64.powi(2)).sqrt();
    assert!(fit.function.lipschitz() < 2.0 * lip_t);

    let back = reparametrize(&gp, g.w()).unwrap();
    let dom = back.domain().shrink(0.8);
    let grid = &back.f().grid;
    let mut checked = 0;
    for i in 0..grid.node_count() {
        let v = grid.node(i);
        if dom.contains(&v) {
            let (a, b) = (back.f_at(&v).unwrap(), g.f_at(&v).unwrap());
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn reparametrizing_along_the_same_direction_changes_nothing() {
    let g = make_family(&GraphFamilySpec::new(Family::SmoothBump, 2, 0.3, 2, 16)).unwrap();
    let same = reparametrize(&g, g.w()).unwrap();
    let grid = &same.f().grid;
    for i in (0..grid.node_count()).step_by(97) {
        let v = grid.node(i);
        assert!((same.f_at(&v).unwrap() - g.f_at(&v).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn slice_quotients_vanish_when_f_is_constant_on_slices() {
    let zero = plane(&[0.0, 0.0, 0.0], 0.0);
    let rep = slice_lipschitz_bound(&zero, &HPoint::origin(2), 500, 0).unwrap();
    assert_eq!(rep.max_quotient, 0.0);
    // A slope along X_2 only is transverse to the slices of P_{Y_2}.
    let transverse = plane(&[0.0, 0.3, 0.0], 0.1);
    let rep = slice_lipschitz_bound(&transverse, &HPoint::origin(2), 500, 0).unwrap();
    assert!(rep.max_quotient < 1e-9, "{}", rep.max_quotient);
}

#[test]
fn random_lipschitz_slices_respect_the_bound_for_a_wider_cone() {
    let mut spec = GraphFamilySpec::new(Family::RandomLipschitz, 2, 0.3, 5, 16);
    spec.lambda_prime = Some(0.65);
    let g = make_family(&spec).unwrap();
    let rep = slice_lipschitz_bound(&g, &HPoint::from_v0_coords(&[0.2, 0.0, -0.3, 0.1]), 2000, 1).unwrap();
    assert!((rep.bound - 0.3 * 0.65 / 0.35).abs() < 1e-12);
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn binary_and_json_containers_round_trip() {
    let g = make_family(&GraphFamilySpec::new(Family::RandomLipschitz, 2, 0.3, 3, 8)).unwrap();
    let mut buf = Vec::new();
    g.write_binary(&mut buf).unwrap();
    let from_bin = IntrinsicGraph::read_binary(buf.as_slice()).unwrap();
    assert_eq!(from_bin.f().values, g.f().values);
    let from_json = IntrinsicGraph::from_json(&g.to_json().unwrap()).unwrap();
    assert_eq!(from_json.f().values, g.f().values);
    assert_eq!(from_json.header(), g.header());
}
