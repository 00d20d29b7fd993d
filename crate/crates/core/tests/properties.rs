use proptest::prelude::*;

use ssf_core::models::{build_finite, build_lattice, discretize_schrodinger, Bump, CouplingPath, RiggedModel};
use ssf_core::numerics::Numerics;
use ssf_core::numkernel::{eig_hermitian, max_abs, op_norm, CMatrix, HermMatrix};
use ssf_core::resolvent::{t_at, Side, SpectralPoint};
use ssf_core::resonance::{poles_at, total_resonance_index};
use ssf_core::scattering::{scattering_matrix, wave_matrix};
use ssf_core::specflow::{mu, track_eigenphases, UnitaryPath};
use ssf_core::ssf::{ac_ssf, counting_density_integral, singular_ssf, smoothed_ssf, ssf_counting_oracle, ssf_measure};
use ssf_core::C64;

fn herm(k: usize, raw: &[f64], scale: f64) -> HermMatrix {
    let a = CMatrix::from_fn(k, k, |i, j| C64::new(raw[2 * (i * k + j)], raw[2 * (i * k + j) + 1]));
    HermMatrix::new((&a + a.adjoint()) * C64::new(0.5 * scale, 0.0)).unwrap()
}

fn raw(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2 * k * k)
}

fn finite_model() -> impl Strategy<Value = (RiggedModel, Vec<f64>)> {
    (2usize..5).prop_flat_map(|k| (Just(k), raw(k), raw(k), raw(k))).prop_map(|(k, h, j, extra)| {
        let m = build_finite(herm(k, &h, 1.0), CMatrix::identity(k, k), CouplingPath::straight(herm(k, &j, 1.5))).unwrap();
        (m, extra)
    })
}

fn lattice_model() -> impl Strategy<Value = RiggedModel> {
    (1usize..4)
        .prop_flat_map(|k| (Just(k), prop::collection::vec(1i64..4, k), prop::collection::vec(0.7f64..1.3, k), raw(k), raw(k)))
        .prop_map(|(k, gaps, w, bg, j)| {
            let mut sites = Vec::with_capacity(k);
            let mut s = -2;
            for g in gaps {
                sites.push(s);
                s += g;
            }
            build_lattice(sites, w, herm(k, &bg, 0.3), CouplingPath::straight(herm(k, &j, 1.5))).unwrap()
        })
}

fn nm() -> Numerics {
    Numerics::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn finite_family_is_hermitian_and_starts_at_h0((m, _) in finite_model(), r in 0.0f64..1.0) {
        let h = m.h_at(r).unwrap();
        prop_assert!(h.residual() <= 1e-12);
        prop_assert_eq!(max_abs(&m.path().j_at(0.0)), 0.0);
    }

    #[test]
    fn lattice_essential_spectrum_is_the_band(m in lattice_model()) {
        prop_assert_eq!(m.essential_spectrum(), Some((-2.0, 2.0)));
    }

    #[test]
    fn schrodinger_with_zero_potential_is_constant(v0 in prop::collection::vec(-3.0f64..3.0, 3..8), r in 0.0f64..1.0) {
        let v = vec![0.0; v0.len()];
        let m = discretize_schrodinger(&v0, &v, 0.5, 1e-6).unwrap();
        prop_assert!(max_abs(&(m.h_at(r).unwrap().into_matrix() - m.h_at(0.0).unwrap().into_matrix())) == 0.0);
    }

    #[test]
    fn resolvent_conjugation_psd_and_identity(m in lattice_model(), l in -3.0f64..3.0, y in 1e-3f64..2.0, r in 0.0f64..1.0) {
        let p = t_at(&m, r, SpectralPoint::new(l, y, Side::Plus).unwrap()).unwrap();
        let q = t_at(&m, r, SpectralPoint::new(l, y, Side::Minus).unwrap()).unwrap();
        let scale = 1.0 + op_norm(&p.t);
        prop_assert!(max_abs(&(&q.t - p.t.adjoint())) <= 1e-10 * scale);
        let direct = (&p.t - p.t.adjoint()) * C64::new(0.0, -0.5);
        prop_assert!(max_abs(&(direct - p.im_t.as_matrix())) <= 1e-10 * scale);
        let min = eig_hermitian(&p.im_t).unwrap().eigenvalues[0];
        prop_assert!(min >= -1e-10 * scale);
    }

    #[test]
    fn pole_sets_reflect_under_side_change(m in lattice_model(), l in -3.0f64..3.0, y in 1e-4f64..1.0) {
        let mut a: Vec<C64> = poles_at(&m, l, y, Side::Plus).unwrap().into_iter().map(|p| p.conj()).collect();
        let mut b = poles_at(&m, l, y, Side::Minus).unwrap();
        let key = |p: &C64, q: &C64| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im));
        a.sort_by(key);
        b.sort_by(key);
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).norm() <= 1e-10 * (1.0 + p.norm()));
        }
    }

    #[test]
    fn measure_is_path_independent_and_counting((m, extra) in finite_model(), a in -2.5f64..0.0, w in 0.5f64..3.0) {
        let k = m.k();
        let phi = Bump::new(a, a + w, 1.0).unwrap();
        let straight = ssf_measure(&m, &phi, &nm()).unwrap();
        let j1 = HermMatrix::new(m.path().j_at(1.0)).unwrap();
        let bent = m.with_path(CouplingPath::bent(herm(k, &extra, 1.0), j1).unwrap()).unwrap();
        prop_assert!((straight - ssf_measure(&bent, &phi, &nm()).unwrap()).abs() <= 1e-8);
        prop_assert!((straight - counting_density_integral(&m, &phi, &nm()).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn positive_perturbations_give_nonnegative_shift(m in lattice_model(), l in -2.9f64..2.9, y in 1e-2f64..1.0) {
        let j = HermMatrix::new(m.path().j_at(1.0)).unwrap();
        let sq = j.as_matrix() * j.as_matrix();
        let pos = m.with_path(CouplingPath::straight(HermMatrix::new(sq).unwrap())).unwrap();
        prop_assert!(smoothed_ssf(&pos, SpectralPoint::upper(l, y), &nm()).unwrap() >= -1e-10);
        if let Ok(v) = ac_ssf(&pos, l, &nm()) {
            prop_assert!(v >= -1e-10);
        }
    }

    #[test]
    fn scattering_is_unitary(m in lattice_model(), l in -1.9f64..1.9, y in 1e-3f64..1.0) {
        let off = scattering_matrix(&m, SpectralPoint::upper(l, y), 1.0, &nm()).unwrap();
        prop_assert!(off.unitarity_defect() <= 1e-8);
        if let Ok(on) = scattering_matrix(&m, SpectralPoint::boundary(l, Side::Plus), 1.0, &nm()) {
            prop_assert!(on.unitarity_defect() <= 1e-8);
            prop_assert!((on.det.norm() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn wave_matrices_compose(m in lattice_model(), l in -1.9f64..1.9, r1 in 0.05f64..0.5, r2 in 0.5f64..0.95) {
        let w = |a: f64, b: f64| wave_matrix(&m, l, a, b, Side::Plus, &nm());
        if let (Ok(w20), Ok(w21), Ok(w10)) = (w(r2, 0.0), w(r2, r1), w(r1, 0.0)) {
            prop_assert!(op_norm(&(&w20.matrix - &w21.matrix * &w10.matrix)) <= 1e-7);
        }
    }

    #[test]
    fn closed_loops_have_theta_independent_mu(winds in prop::collection::vec(-3i32..4, 1..4), thetas in prop::collection::vec(0.01f64..6.27, 8)) {
        let n = winds.len();
        let w2 = winds.clone();
        let path = UnitaryPath::uniform(0.0, 1.0, 64, move |t| {
            Ok(CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(0.0, std::f64::consts::TAU * w2[i] as f64 * t).exp() } else { C64::new(0.0, 0.0) }))
        }).unwrap();
        let tr = track_eigenphases(&path).unwrap();
        let want: i64 = winds.iter().map(|&w| w as i64).sum();
        for th in thetas {
            prop_assert_eq!(mu(th, &tr, 1e-6).unwrap(), want);
        }
    }

    #[test]
    fn singular_shift_equals_total_resonance_index((m, _) in finite_model(), l in -2.0f64..2.0) {
        // skip lambda too close to an eigenvalue at either end
        prop_assume!(ssf_counting_oracle(&m, l - 1e-4).is_ok() && ssf_counting_oracle(&m, l + 1e-4).is_ok());
        prop_assume!(ssf_counting_oracle(&m, l - 1e-4).unwrap() == ssf_counting_oracle(&m, l + 1e-4).unwrap());
        let s = singular_ssf(&m, l, &nm()).unwrap();
        prop_assert_eq!(total_resonance_index(&m, l, &nm()).unwrap(), s.xi_s_rounded);
        prop_assert_eq!(s.xi_s_rounded, ssf_counting_oracle(&m, l).unwrap());
    }
}
