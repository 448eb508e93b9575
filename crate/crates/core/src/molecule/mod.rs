//! Continuum-dipole models `D(k̂)`, angular quadrature over the
//! photoelectron sphere and the molecular tensors built from them.
//!
//! The Gram tensor `Q_ij = |Ẽ|² ∫dΘ_k D_i* D_j` is Hermitian positive
//! semidefinite; its ε-contraction `i ε_lij Q_ij` is the propensity
//! pseudovector `Ω_a = i|Ẽ|² ∫dΘ_k D* × D`.

pub mod harmonics;
pub mod quadrature;

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra3::{cross, ComplexMat3, ComplexVec3};
use crate::error::{Error, Result};
use harmonics::{lm_index, spherical_harmonics, table_len};
pub use quadrature::QuadratureRule;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Anything that can evaluate a continuum dipole on the unit sphere.
pub trait DipoleField: Send + Sync {
    /// `D(k̂)`; `k` is a unit vector.
    fn dipole(&self, k: &[f64; 3]) -> ComplexVec3;

    /// `Ẽ_ω` at the transition frequency.
    fn spectral_amplitude(&self) -> Complex64;

    /// Highest spherical-harmonic degree present, when known.
    fn band_limit(&self) -> Option<usize>;
}

/// Dipole expanded in spherical harmonics: `D_j(k̂) = Σ_lm c[j][l][m] Y_lm(k̂)`.
#[derive(Clone, PartialEq)]
pub struct HarmonicDipoleModel {
    l_max: usize,
    coefficients: [Vec<Complex64>; 3],
    pub e_tilde: Complex64,
}

impl HarmonicDipoleModel {
    pub fn zero(l_max: usize) -> Self {
        let n = table_len(l_max);
        HarmonicDipoleModel {
            l_max,
            coefficients: [vec![Complex64::ZERO; n], vec![Complex64::ZERO; n], vec![Complex64::ZERO; n]],
            e_tilde: Complex64::new(1.0, 0.0),
        }
    }

    pub fn with_spectral_amplitude(mut self, e_tilde: Complex64) -> Self {
        self.e_tilde = e_tilde;
        self
    }

    /// `D(k̂) = √(3q/4π) k̂`, whose components are orthogonal with norm `q`, so
    /// `Q = q·1` (with `Ẽ = 1`).
    pub fn isotropic(q: f64) -> Self {
        let mut m = Self::zero(1);
        let s = (q / 2.0).sqrt();
        let c = Complex64::new;
        m.set(0, 1, -1, c(s, 0.0)).expect("in range");
        m.set(0, 1, 1, c(-s, 0.0)).expect("in range");
        m.set(1, 1, -1, c(0.0, s)).expect("in range");
        m.set(1, 1, 1, c(0.0, s)).expect("in range");
        m.set(2, 1, 0, c(q.sqrt(), 0.0)).expect("in range");
        m
    }

    /// Complex, anisotropic model whose propensity vector is `(0, 0, −2)`.
    ///
    /// `D_x = Y_00 + ½Y_10`, `D_y = iY_00 + ½Y_10`, `D_z = 0.3Y_11 + 0.2Y_2,−1`.
    /// Only `Q_xy = i + ¼` carries an imaginary part, so `Ω_a = −2 Im Q_xy ẑ`.
    pub fn chiral_demo() -> Self {
        let mut m = Self::zero(2);
        let c = Complex64::new;
        m.set(0, 0, 0, c(1.0, 0.0)).unwrap();
        m.set(0, 1, 0, c(0.5, 0.0)).unwrap();
        m.set(1, 0, 0, c(0.0, 1.0)).unwrap();
        m.set(1, 1, 0, c(0.5, 0.0)).unwrap();
        m.set(2, 1, 1, c(0.3, 0.0)).unwrap();
        m.set(2, 2, -1, c(0.2, 0.0)).unwrap();
        m
    }

    /// Coefficients with independent uniform real and imaginary parts in
    /// `[-1, 1)`.
    pub fn random<R: Rng + ?Sized>(l_max: usize, rng: &mut R) -> Self {
        let mut m = Self::zero(l_max);
        for comp in m.coefficients.iter_mut() {
            for c in comp.iter_mut() {
                *c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        m
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn set(&mut self, component: usize, l: usize, m: i32, value: Complex64) -> Result<()> {
        self.check_index(component, l, m)?;
        self.coefficients[component][lm_index(l, m)] = value;
        Ok(())
    }

    pub fn get(&self, component: usize, l: usize, m: i32) -> Result<Complex64> {
        self.check_index(component, l, m)?;
        Ok(self.coefficients[component][lm_index(l, m)])
    }

    fn check_index(&self, component: usize, l: usize, m: i32) -> Result<()> {
        if component > 2 || l > self.l_max || m.unsigned_abs() as usize > l {
            return Err(Error::InvalidArgument(format!(
                "coefficient (component {component}, l {l}, m {m}) outside table with l_max {}",
                self.l_max
            )));
        }
        Ok(())
    }

    pub fn coefficients(&self, component: usize) -> &[Complex64] {
        &self.coefficients[component]
    }

    /// `|Ẽ|² Σ_lm c[i][l][m]* c[j][l][m]`, the Gram tensor via orthonormality.
    pub fn coefficient_gram(&self) -> ComplexMat3 {
        let e2 = self.e_tilde.norm_sqr();
        ComplexMat3::from_fn(|i, j| {
            self.coefficients[i]
                .iter()
                .zip(&self.coefficients[j])
                .fold(Complex64::ZERO, |acc, (a, b)| acc + a.conj() * b)
                * e2
        })
    }
}

impl fmt::Debug for HarmonicDipoleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HarmonicDipoleModel")
            .field("l_max", &self.l_max)
            .field("e_tilde", &self.e_tilde)
            .finish_non_exhaustive()
    }
}

impl DipoleField for HarmonicDipoleModel {
    fn dipole(&self, k: &[f64; 3]) -> ComplexVec3 {
        let y = spherical_harmonics(self.l_max, k);
        ComplexVec3([0, 1, 2].map(|j| {
            self.coefficients[j]
                .iter()
                .zip(&y)
                .fold(Complex64::ZERO, |acc, (c, y)| acc + c * y)
        }))
    }

    fn spectral_amplitude(&self) -> Complex64 {
        self.e_tilde
    }

    fn band_limit(&self) -> Option<usize> {
        Some(self.l_max)
    }
}

type DipoleFn = dyn Fn(&[f64; 3]) -> ComplexVec3 + Send + Sync;

enum Source {
    Field(Arc<dyn DipoleField>),
    Closure(Arc<DipoleFn>),
}

impl Clone for Source {
    fn clone(&self) -> Self {
        match self {
            Source::Field(f) => Source::Field(Arc::clone(f)),
            Source::Closure(f) => Source::Closure(Arc::clone(f)),
        }
    }
}

/// A dipole given by an evaluator, optionally viewed through an orthogonal
/// transform `D'(k̂) = M D(Mᵀ k̂)`.
///
/// `D` is a polar vector, so quantities bilinear in `D*` and `D` such as
/// `D* × D` pick up `det M` under the transform; [`determinant`] records it.
///
/// [`determinant`]: SampledDipoleModel::determinant
#[derive(Clone)]
pub struct SampledDipoleModel {
    source: Source,
    e_tilde: Complex64,
    band_limit: Option<usize>,
    transform: Matrix3<f64>,
}

impl SampledDipoleModel {
    pub fn from_fn<F>(e_tilde: Complex64, band_limit: Option<usize>, f: F) -> Self
    where
        F: Fn(&[f64; 3]) -> ComplexVec3 + Send + Sync + 'static,
    {
        SampledDipoleModel { source: Source::Closure(Arc::new(f)), e_tilde, band_limit, transform: Matrix3::identity() }
    }

    pub fn from_field(field: Arc<dyn DipoleField>) -> Self {
        SampledDipoleModel {
            e_tilde: field.spectral_amplitude(),
            band_limit: field.band_limit(),
            source: Source::Field(field),
            transform: Matrix3::identity(),
        }
    }

    pub fn transform(&self) -> &Matrix3<f64> {
        &self.transform
    }

    /// `det M` of the accumulated transform: `+1` proper, `−1` improper.
    pub fn determinant(&self) -> f64 {
        self.transform.determinant()
    }

    fn base(&self, k: &[f64; 3]) -> ComplexVec3 {
        match &self.source {
            Source::Field(f) => f.dipole(k),
            Source::Closure(f) => f(k),
        }
    }
}

impl fmt::Debug for SampledDipoleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledDipoleModel")
            .field("e_tilde", &self.e_tilde)
            .field("band_limit", &self.band_limit)
            .field("transform", &self.transform)
            .finish_non_exhaustive()
    }
}

impl DipoleField for SampledDipoleModel {
    fn dipole(&self, k: &[f64; 3]) -> ComplexVec3 {
        let m = &self.transform;
        let kk = m.transpose() * nalgebra::Vector3::new(k[0], k[1], k[2]);
        let d = self.base(&[kk[0], kk[1], kk[2]]);
        apply_matrix(m, &d)
    }

    fn spectral_amplitude(&self) -> Complex64 {
        self.e_tilde
    }

    fn band_limit(&self) -> Option<usize> {
        self.band_limit
    }
}

impl<T: DipoleField + ?Sized> DipoleField for Arc<T> {
    fn dipole(&self, k: &[f64; 3]) -> ComplexVec3 {
        (**self).dipole(k)
    }

    fn spectral_amplitude(&self) -> Complex64 {
        (**self).spectral_amplitude()
    }

    fn band_limit(&self) -> Option<usize> {
        (**self).band_limit()
    }
}

/// Tolerance on `MᵀM − I` accepted by [`transform_model`].
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

pub fn orthogonality_residual(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).abs().max()
}

/// `D'(k̂) = M D(Mᵀ k̂)` for orthogonal `M`.
pub fn transform_model(model: Arc<dyn DipoleField>, m: Matrix3<f64>) -> Result<SampledDipoleModel> {
    let residual = orthogonality_residual(&m);
    if residual.is_nan() || residual >= ORTHOGONALITY_TOL {
        return Err(Error::NotOrthogonal { residual });
    }
    let mut out = SampledDipoleModel::from_field(model);
    out.transform = m;
    Ok(out)
}

/// Uniformly distributed proper rotation (normalized Gaussian quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let q = nalgebra::Quaternion::new(g[0], g[1], g[2], g[3]);
        if q.norm() > 1e-6 {
            return *nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix();
        }
    }
}

/// `M v` for a real matrix and complex vector.
pub fn apply_matrix(m: &Matrix3<f64>, v: &ComplexVec3) -> ComplexVec3 {
    ComplexVec3([0, 1, 2].map(|i| (0..3).fold(Complex64::ZERO, |acc, j| acc + v[j] * m[(i, j)])))
}

/// `D(k̂)` at every node of the rule, in node order.
pub fn dipole_samples(model: &dyn DipoleField, rule: &QuadratureRule) -> Vec<ComplexVec3> {
    rule.nodes.par_iter().map(|k| model.dipole(k)).collect()
}

/// `D(k̂)` at one point.
pub fn evaluate_dipole(model: &dyn DipoleField, k: &[f64; 3]) -> ComplexVec3 {
    model.dipole(k)
}

/// `Q_ij = |Ẽ|² ∫dΘ_k D_i* D_j` by quadrature.
pub fn gram_tensor(model: &dyn DipoleField, rule: &QuadratureRule) -> Result<ComplexMat3> {
    rule.ensure_resolves(model.band_limit())?;
    let samples = dipole_samples(model, rule);
    let mut q = ComplexMat3::ZERO;
    for (d, w) in samples.iter().zip(&rule.weights) {
        for i in 0..3 {
            let di = d[i].conj() * *w;
            for j in 0..3 {
                q.0[i][j] += di * d[j];
            }
        }
    }
    Ok(q.scale(Complex64::new(model.spectral_amplitude().norm_sqr(), 0.0)))
}

/// `Ω_a = i|Ẽ|² ∫dΘ_k D* × D` by quadrature of the cross product.
pub fn propensity_vector(model: &dyn DipoleField, rule: &QuadratureRule) -> Result<ComplexVec3> {
    rule.ensure_resolves(model.band_limit())?;
    let samples = dipole_samples(model, rule);
    let mut acc = ComplexVec3::ZERO;
    for (d, w) in samples.iter().zip(&rule.weights) {
        acc += cross(&d.conj(), d) * *w;
    }
    Ok(acc * (I * model.spectral_amplitude().norm_sqr()))
}

/// `i ε_lij Q_ij` from an already computed Gram tensor.
pub fn propensity_from_gram(q: &ComplexMat3) -> ComplexVec3 {
    q.epsilon_contract() * I
}
