use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rislens_core::channel::{cm1_steering, cm2_steering, cm3_amplitudes, patch_power};
use rislens_core::estimator::{azimuth_basis, bessel_basis, projected_residual};
use rislens_core::fisher::{efim_projection, efim_schur, fim_full, peb};
use rislens_core::geometry::{build_ris_grid, wrap_angle, Scenario, SphericalCoords};
use rislens_core::profiles::{antenna_compensation, assemble_w, quantize_profiles, random_profiles};
use rislens_core::{CMatrix, CVector, C64};

const LAMBDA: f64 = 0.010707;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steering_vectors_have_unit_modulus(theta in 0.0..FRAC_PI_2, phi in 0.0..TAU, d in 0.05..20.0f64) {
        let ris = build_ris_grid(6, 7, LAMBDA / 2.0);
        let p = SphericalCoords::new(d, theta, phi).to_cartesian();
        for v in cm1_steering(theta, phi, &ris, LAMBDA).iter().chain(cm2_steering(&p, &ris, LAMBDA).unwrap().iter()) {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn patch_power_is_positive_and_mirror_symmetric(dx in -1.0..1.0f64, dy in -1.0..1.0f64, z in 0.001..5.0f64) {
        let side = LAMBDA / 2.0;
        let g = patch_power(dx, dy, z, side);
        prop_assert!(g > 0.0);
        for other in [patch_power(-dx, dy, z, side), patch_power(dx, -dy, z, side)] {
            prop_assert!((other - g).abs() <= 1e-9 * g);
        }
        // a single patch never collects more than a third
        prop_assert!(g <= 1.0 / 3.0 + 1e-12);
    }

    #[test]
    fn cm3_is_even_in_height(x in -0.5..0.5f64, y in -0.5..0.5f64, z in 0.01..3.0f64) {
        let ris = build_ris_grid(4, 4, LAMBDA / 2.0);
        let up = cm3_amplitudes(&Vector3::new(x, y, z), &ris, LAMBDA / 2.0).unwrap();
        let down = cm3_amplitudes(&Vector3::new(x, y, -z), &ris, LAMBDA / 2.0).unwrap();
        prop_assert_eq!(up, down);
    }

    #[test]
    fn fisher_information_is_symmetric_psd(x in -0.3..0.3f64, y in -0.3..0.3f64, z in 0.1..3.0f64, seed in 0u64..1000) {
        let mut s = Scenario::reference();
        s.ris_rows = 6;
        s.ris_cols = 6;
        s.num_pilots = 16;
        let ris = s.ris();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_profiles(ris.len(), 16, &mut rng).angles.map(C64::cis);
        let p = Vector3::new(x, y, z);
        let j = fim_full(&p, 1e-3, &w, &s, &ris).unwrap();
        prop_assert!((j - j.transpose()).norm() <= 1e-12 * j.norm());
        let eig = j.symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= -1e-9 * eig.max());
        let schur = efim_schur(&j).unwrap();
        let proj = efim_projection(&p, 1e-3, &w, &s, &ris).unwrap().unwrap();
        prop_assert!((schur - proj).norm() <= 1e-8 * proj.norm());
        prop_assert!(peb(&proj) > 0.0);
    }

    #[test]
    fn residual_is_bounded_and_scale_invariant(seed in 0u64..1000, scale in 1e-6..1e6f64) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = CVector::from_fn(9, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let c = CVector::from_fn(9, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = projected_residual(&y, &c);
        prop_assert!(r >= 0.0 && r <= y.norm_squared() * (1.0 + 1e-12));
        let rs = projected_residual(&(&y * C64::from(scale)), &c);
        prop_assert!((rs - r * scale * scale).abs() <= 1e-9 * rs.max(1e-300));
        prop_assert!((projected_residual(&y, &(&c * C64::new(0.0, scale))) - r).abs() <= 1e-9 * y.norm_squared());
    }

    #[test]
    fn azimuth_basis_is_periodic(phi in -10.0..10.0f64, order in 0usize..8) {
        let a = azimuth_basis(phi, order);
        let b = azimuth_basis(wrap_angle(phi), order);
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn jacobi_anger_expansion_converges(theta in 0.0..FRAC_PI_2, phi in 0.0..TAU) {
        let ris = build_ris_grid(6, 6, LAMBDA / 2.0);
        let exact = cm1_steering(theta, phi, &ris, LAMBDA);
        let approx = bessel_basis(theta, &ris, LAMBDA, 30).steering(phi);
        prop_assert!((approx - &exact).norm() <= 1e-10 * exact.norm());
    }

    #[test]
    fn compensated_weights_follow_coupling_magnitude(seed in 0u64..1000, bits in 1u32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Scenario::reference();
        let ris = build_ris_grid(5, 5, s.element_spacing);
        let h = rislens_core::channel::antenna_coupling(&s, &ris).unwrap();
        let q = quantize_profiles(&random_profiles(ris.len(), 7, &mut rng), bits).unwrap();
        let w: CMatrix = assemble_w(&q, &antenna_compensation(&h), &h).unwrap();
        for i in 0..ris.len() {
            for t in 0..7 {
                prop_assert!((w[(i, t)].norm() - h[i].norm()).abs() <= 1e-12 * h[i].norm().max(1e-300));
            }
        }
    }
}
