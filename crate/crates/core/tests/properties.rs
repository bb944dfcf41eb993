//! Property tests: exact algebraic invariants that must hold for any input.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use lpscatter::geometry::{sphere_quadrature, BallGrid, OrthogonalMap, SGrid, SphereQuadrature};
use lpscatter::io::lpbs::{decode, encode, FieldKind, Metadata};
use lpscatter::io::ExperimentConfig;
use lpscatter::laxphillips::translate;
use lpscatter::radon::{radon_forward, CylinderField, ScalarField};
use lpscatter::vlp::VlpOperator;

fn small() -> (BallGrid, SGrid, Arc<SphereQuadrature>) {
    (BallGrid::new(1.0, 1.0, 8).unwrap(), SGrid::symmetric(2.5, 32).unwrap(), sphere_quadrature(11).unwrap().shared())
}

fn field(grid: &BallGrid, v: &[f64]) -> ScalarField {
    let mut f = ScalarField::from_fn(grid, grid.rho, |_| 0.0);
    for (i, x) in f.values.iter_mut().enumerate() {
        *x = v[i % v.len()];
    }
    f.enforce_support();
    f
}

fn cylinder(s_grid: &SGrid, sphere: &Arc<SphereQuadrature>, v: &[f64]) -> CylinderField {
    let mut g = CylinderField::zeros(s_grid, sphere);
    for (i, x) in g.values.iter_mut().enumerate() {
        *x = C64::new(v[i % v.len()], v[(i * 7 + 3) % v.len()]);
    }
    g
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lpbs_round_trip(shape in prop::collection::vec(1usize..6, 1..4), complex: bool, seed in values()) {
        let meta = Metadata::new(FieldKind::Array, shape, complex);
        let payload: Vec<f64> = (0..meta.payload_len()).map(|i| seed[i % seed.len()] * i as f64).collect();
        let bytes = encode(&meta, &payload).unwrap();
        let (m, p) = decode(&bytes).unwrap();
        prop_assert_eq!(m, meta);
        prop_assert_eq!(p, payload);
        // every strict prefix is rejected, never a panic
        let cut = bytes.len() / 2;
        prop_assert!(decode(&bytes[..cut]).is_err());
    }

    #[test]
    fn radon_is_linear_and_odd_under_antipodes(a in values(), b in values(), c in -2.0f64..2.0) {
        let (grid, s_grid, sphere) = small();
        let (f, g) = (field(&grid, &a), field(&grid, &b));
        let lhs = radon_forward(&f.add_scaled(c, &g), &s_grid, &sphere).unwrap();
        let rhs = radon_forward(&f, &s_grid, &sphere).unwrap()
            .add_scaled(C64::new(c, 0.0), &radon_forward(&g, &s_grid, &sphere).unwrap());
        let scale = rhs.norm_l2().max(1e-300);
        prop_assert!(lhs.add_scaled(C64::new(-1.0, 0.0), &rhs).norm_l2() <= 1e-12 * scale);
        // Rf(-s, -w) = Rf(s, w)
        let n = s_grid.n_s;
        for k in 0..sphere.len() {
            let ka = sphere.antipode[k];
            for i in 1..n {
                let d = (lhs.at(i, k) - lhs.at(s_grid.mirror(i), ka)).norm();
                prop_assert!(d <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn vlp_is_linear_and_homogeneous_in_v(a in values(), b in values(), c in -2.0f64..2.0) {
        let (grid, s_grid, sphere) = small();
        let v = field(&grid.with_rho(0.5).unwrap(), &a);
        let op = VlpOperator::new(&v, &s_grid, &sphere).unwrap();
        let (g, h) = (cylinder(&s_grid, &sphere, &a), cylinder(&s_grid, &sphere, &b));
        let lhs = op.apply(&g.add_scaled(C64::new(c, 0.0), &h)).unwrap();
        let rhs = op.apply(&g).unwrap().add_scaled(C64::new(c, 0.0), &op.apply(&h).unwrap());
        let scale = rhs.norm_l2().max(1e-300);
        prop_assert!(lhs.add_scaled(C64::new(-1.0, 0.0), &rhs).norm_l2() <= 1e-12 * scale);
        let scaled = op.with_scaled_potential(c).apply(&g).unwrap();
        let expect = op.apply(&g).unwrap().scaled(C64::new(c, 0.0));
        prop_assert!(scaled.add_scaled(C64::new(-1.0, 0.0), &expect).norm_l2() <= 1e-12 * expect.norm_l2().max(1e-300));
    }

    #[test]
    fn translations_form_a_group(a in values(), t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let (_, s_grid, sphere) = small();
        let g = cylinder(&s_grid, &sphere, &a);
        let lhs = translate(&translate(&g, t1), t2);
        let rhs = translate(&g, t1 + t2);
        prop_assert!(lhs.add_scaled(C64::new(-1.0, 0.0), &rhs).norm_l2() <= 1e-12 * g.norm_l2().max(1e-300));
        prop_assert!((translate(&g, t1).norm_l2() - g.norm_l2()).abs() <= 1e-12 * g.norm_l2().max(1e-300));
    }

    #[test]
    fn rotoreflections_are_accepted_away_from_the_identity(angle in 0.0f64..std::f64::consts::TAU) {
        // det(Id - S) = 4 (1 + cos angle), zero only at angle = pi
        match OrthogonalMap::rotoreflection_z(angle) {
            Ok(m) => {
                prop_assert!((m.det_id_minus_s - 4.0 * (1.0 + angle.cos())).abs() < 1e-12);
                prop_assert!(m.orthogonality_defect < 1e-14);
            }
            Err(_) => prop_assert!(4.0 * (1.0 + angle.cos()) < 1e-6),
        }
    }

    #[test]
    fn config_json_round_trip(eps in 0.2f64..0.8, seed: u64, degree in prop::sample::select(vec![11usize, 17, 23, 29])) {
        let mut cfg = ExperimentConfig::reduced();
        cfg.epsilon = Some(eps);
        cfg.seed = seed;
        cfg.sphere_degree = degree;
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&cfg).unwrap());
    }
}
