use std::f64::consts::PI;
use std::sync::Arc;

use chiral_berry::berry::principal_value;
use chiral_berry::molecule::{apply_matrix, random_rotation};
use chiral_berry::{
    gram_tensor, propensity_vector, transform_model, BerryGeometry, Complex64, ComplexMat3, DipoleField,
    HarmonicDipoleModel, Helicity, LoopPath, OrientationPoint, QuadratureRule, StokesOptions,
};
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(seed: u64, l_max: usize) -> HarmonicDipoleModel {
    HarmonicDipoleModel::random(l_max, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn helicity() -> impl Strategy<Value = Helicity> {
    prop_oneof![Just(Helicity::Plus), Just(Helicity::Minus)]
}

fn to_complex(m: &Matrix3<f64>) -> ComplexMat3 {
    ComplexMat3::from_fn(|i, j| Complex64::new(m[(i, j)], 0.0))
}

fn mul(a: &ComplexMat3, b: &ComplexMat3) -> ComplexMat3 {
    ComplexMat3::from_fn(|i, j| (0..3).map(|k| a.0[i][k] * b.0[k][j]).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_is_hermitian_psd(seed in any::<u64>(), l_max in 0usize..5) {
        let m = model(seed, l_max);
        let q = gram_tensor(&m, &QuadratureRule::for_band_limit(l_max)).unwrap();
        let scale = q.max_abs().max(1.0);
        prop_assert!(q.hermiticity_residual() < 1e-13 * scale);
        for ev in q.hermitian_eigenvalues() {
            prop_assert!(ev > -1e-12 * scale);
        }
    }

    #[test]
    fn density_is_real(seed in any::<u64>(), l_max in 1usize..4, theta in 0.05..PI - 0.05, phi in 0.0..2.0 * PI, s in helicity()) {
        let m = model(seed, l_max);
        let g = BerryGeometry::new(&m, &QuadratureRule::for_band_limit(l_max)).unwrap();
        let p = OrientationPoint::new(theta, phi);
        let ch = g.density_channels(&p, s).unwrap();
        let scale = g.gram().max_abs().max(1.0);
        for v in [ch.xi, ch.zeta, ch.chi, ch.total] {
            prop_assert!(v.im.abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn rotated_gram_is_conjugated(seed in any::<u64>(), l_max in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Arc<dyn DipoleField> = Arc::new(HarmonicDipoleModel::random(l_max, &mut rng));
        let m = random_rotation(&mut rng);
        let rule = QuadratureRule::for_band_limit(l_max);
        let q = gram_tensor(&*base, &rule).unwrap();
        let t = transform_model(Arc::clone(&base), m).unwrap();
        let expected = mul(&mul(&to_complex(&m), &q), &to_complex(&m.transpose()));
        prop_assert!(gram_tensor(&t, &rule).unwrap().max_abs_diff(&expected) < 1e-12 * q.max_abs().max(1.0));
        let omega = propensity_vector(&*base, &rule).unwrap();
        prop_assert!(propensity_vector(&t, &rule).unwrap().max_abs_diff(&apply_matrix(&m, &omega)) < 1e-12 * omega.norm().max(1.0));
    }

    #[test]
    fn latitude_phase_reverses_and_stokes_closes(
        seed in any::<u64>(),
        l_max in 1usize..3,
        t1 in 0.2..1.5f64,
        width in 0.2..1.4f64,
        s in helicity(),
    ) {
        let m = model(seed, l_max);
        let g = BerryGeometry::new(&m, &QuadratureRule::for_band_limit(l_max)).unwrap();
        let path = LoopPath::latitude(t1, 180, 1e-3).unwrap();
        let fwd = g.loop_phase(&path, s).unwrap();
        let back = g.loop_phase(&path.reversed(), s).unwrap();
        prop_assert!((fwd.raw + back.raw).abs() < 1e-10 * fwd.raw.abs().max(1.0));
        prop_assert!(fwd.imaginary.abs() < 1e-10 * g.gram().max_abs().max(1.0));

        let options = StokesOptions { n_theta: 64, n_phi: 64, loop_segments: 128, ..StokesOptions::default() };
        let report = g.stokes(t1, t1 + width, s, &options).unwrap();
        prop_assert!(report.residual < 1e-8 * g.gram().max_abs().max(1.0));
    }

    #[test]
    fn principal_value_is_congruent(x in -1e3..1e3f64) {
        let p = principal_value(x);
        prop_assert!(p > -PI && p <= PI);
        let k = (x - p) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
    }
}

#[test]
fn helicity_flip_of_isotropic_phase() {
    let g = BerryGeometry::new(&HarmonicDipoleModel::isotropic(2.0), &QuadratureRule::for_band_limit(1)).unwrap();
    let path = LoopPath::latitude(1.1, 256, 1e-3).unwrap();
    let plus = g.loop_phase(&path, Helicity::Plus).unwrap().raw;
    let minus = g.loop_phase(&path, Helicity::Minus).unwrap().raw;
    assert!((plus + minus).abs() < 1e-12);
    assert!((plus - 4.0 * PI * 1.1f64.cos()).abs() < 1e-12);
}
