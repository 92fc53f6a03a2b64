use num_complex::Complex64 as C64;
use proptest::prelude::*;
use tunnelcorr::amplitude::summed_mode_overlap;
use tunnelcorr::correlation::closed_p;
use tunnelcorr::scattering::{reduced_transmission, scattering_coefficients, transfer_matrix};
use tunnelcorr::validate::mirrored;
use tunnelcorr::{BarrierProfile, Segment};

fn profile() -> impl Strategy<Value = BarrierProfile> {
    (0.1..3.0f64, prop::collection::vec((0.05..1.5f64, 0.0..6.0f64), 1..6)).prop_map(|(a, segs)| {
        let segments = segs.into_iter().map(|(length, cutoff)| Segment { length, cutoff }).collect();
        BarrierProfile::new(a, segments).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flux_is_conserved(p in profile(), f in 1e-3..3.0f64) {
        let kz = f * p.max_cutoff().max(1.0);
        let c = scattering_coefficients(&p, C64::new(kz, 0.0)).unwrap();
        prop_assert!((c.t.norm_sqr() + c.r.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!(transfer_matrix(&p, C64::new(kz, 0.0)).unwrap().log_abs_det().abs() < 1e-10);
    }

    #[test]
    fn transmission_is_reciprocal(p in profile(), f in 1e-3..3.0f64) {
        let k = C64::new(f * p.max_cutoff().max(1.0), 0.0);
        let left = scattering_coefficients(&p, k).unwrap().t;
        let right = scattering_coefficients(&mirrored(&p), k).unwrap().t;
        prop_assert!((left - right).norm() < 1e-12);
    }

    #[test]
    fn cancellation_identity_holds(p in profile(), f in 1e-3..3.0f64) {
        let c = scattering_coefficients(&p, C64::new(f * p.max_cutoff().max(1.0), 0.0)).unwrap();
        prop_assert!(c.b1_residual(&p).norm() < 1e-10);
    }

    #[test]
    fn overlap_reduced_form_agrees(p in profile(), f in 1e-2..3.0f64, gap in 0.5..30.0f64) {
        let kz = f * p.max_cutoff().max(1.0);
        let o = summed_mode_overlap(kz, p.b() + gap, &p).unwrap();
        prop_assert!(o.residual() < 1e-9);
    }

    #[test]
    fn transmission_is_scale_invariant(p in profile(), f in 1e-2..3.0f64, s in 0.2..5.0f64) {
        let kz = f * p.max_cutoff().max(1.0);
        let a = reduced_transmission(&p, C64::new(kz, 0.0)).unwrap();
        let b = reduced_transmission(&p.rescaled(s).unwrap(), C64::new(kz * s, 0.0)).unwrap();
        prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-300));
    }

    #[test]
    fn closed_p_is_monotone(t1 in 41.0..200.0f64, t2 in 41.0..200.0f64, d1 in 0.0..5.0f64, d2 in 0.0..5.0f64) {
        let p = |a, b| closed_p(1.0, 0.05, 40.0, 1.0, a, b);
        prop_assert!(p(t1 + d1, t2) >= p(t1, t2));
        prop_assert!(p(t1, t2 + d2) >= p(t1, t2));
        prop_assert!(p(t1, t2) >= 0.0);
    }
}
