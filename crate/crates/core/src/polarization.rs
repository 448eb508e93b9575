//! Orientation sphere, circular and linear polarization vectors, and the
//! polarization 2-form densities pulled back to `dθ∧dφ`.
//!
//! The spherical frame is
//!
//! ```text
//! r̂ = (sinθ cosφ, sinθ sinφ, cosθ)
//! θ̂ = (cosθ cosφ, cosθ sinφ, −sinθ)
//! φ̂ = (−sinφ, cosφ, 0)
//! ```
//!
//! and the circular vector is `ê = (θ̂ + iσφ̂)/√2`. The frame (and hence `ê`)
//! is coordinate-singular at the poles, so every frame-dependent operation
//! refuses points within the point's pole margin.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra3::{cross, diamond, odot, ComplexMat3, ComplexVec3};
use crate::error::{Error, Result};

/// Default pole-exclusion margin in radians.
pub const DEFAULT_POLE_MARGIN: f64 = 1e-3;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A point `(θ, φ)` on the orientation sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationPoint {
    pub theta: f64,
    pub phi: f64,
    pub pole_margin: f64,
}

impl OrientationPoint {
    /// `phi` is reduced to `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Self {
        OrientationPoint { theta, phi: phi.rem_euclid(2.0 * PI), pole_margin: DEFAULT_POLE_MARGIN }
    }

    pub fn with_pole_margin(mut self, margin: f64) -> Self {
        self.pole_margin = margin;
        self
    }

    /// Same margin, shifted coordinates. `phi` is not reduced so that finite
    /// difference stencils stay contiguous.
    pub fn offset(&self, d_theta: f64, d_phi: f64) -> Self {
        OrientationPoint { theta: self.theta + d_theta, phi: self.phi + d_phi, pole_margin: self.pole_margin }
    }

    pub fn check_off_pole(&self) -> Result<()> {
        let m = self.pole_margin;
        if self.theta.is_finite() && self.theta > m && self.theta < PI - m {
            Ok(())
        } else {
            Err(Error::PoleSingularity { theta: self.theta, margin: m })
        }
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Field rotation direction `σ = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Helicity {
    Plus,
    Minus,
}

impl Helicity {
    pub fn sign(self) -> f64 {
        match self {
            Helicity::Plus => 1.0,
            Helicity::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Helicity::Plus => Helicity::Minus,
            Helicity::Minus => Helicity::Plus,
        }
    }

    pub fn as_i32(self) -> i32 {
        self.sign() as i32
    }
}

impl TryFrom<i32> for Helicity {
    type Error = Error;
    fn try_from(s: i32) -> Result<Self> {
        match s {
            1 => Ok(Helicity::Plus),
            -1 => Ok(Helicity::Minus),
            _ => Err(Error::InvalidArgument(format!("helicity must be ±1, got {s}"))),
        }
    }
}

/// Right-handed orthonormal triad at a point, with `θ̂ × φ̂ = r̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalFrame {
    pub r: ComplexVec3,
    pub theta: ComplexVec3,
    pub phi: ComplexVec3,
}

pub fn spherical_frame(point: &OrientationPoint) -> Result<SphericalFrame> {
    point.check_off_pole()?;
    let (st, ct) = point.theta.sin_cos();
    let (sp, cp) = point.phi.sin_cos();
    Ok(SphericalFrame {
        r: ComplexVec3::from_real([st * cp, st * sp, ct]),
        theta: ComplexVec3::from_real([ct * cp, ct * sp, -st]),
        phi: ComplexVec3::from_real([-sp, cp, 0.0]),
    })
}

/// Cartesian partial derivatives of θ̂ and φ̂: `(∂θ θ̂, ∂θ φ̂, ∂φ θ̂, ∂φ φ̂)`.
fn frame_partials(point: &OrientationPoint) -> [ComplexVec3; 4] {
    let (st, ct) = point.theta.sin_cos();
    let (sp, cp) = point.phi.sin_cos();
    [
        ComplexVec3::from_real([-st * cp, -st * sp, -ct]),
        ComplexVec3::ZERO,
        ComplexVec3::from_real([-ct * sp, ct * cp, 0.0]),
        ComplexVec3::from_real([-cp, -sp, 0.0]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularPolarization {
    pub point: OrientationPoint,
    pub sigma: Helicity,
}

impl CircularPolarization {
    pub fn new(point: OrientationPoint, sigma: Helicity) -> Self {
        CircularPolarization { point, sigma }
    }
}

/// `ê = (θ̂ + iσφ̂)/√2`.
pub fn circular_vector(cp: &CircularPolarization) -> Result<ComplexVec3> {
    let f = spherical_frame(&cp.point)?;
    Ok((f.theta + f.phi * (I * cp.sigma.sign())) * FRAC_1_SQRT_2)
}

/// `(∂ê/∂θ, ∂ê/∂φ)` from the Cartesian derivatives of the frame.
pub fn circular_vector_derivatives(cp: &CircularPolarization) -> Result<(ComplexVec3, ComplexVec3)> {
    cp.point.check_off_pole()?;
    let [dt_th, dt_ph, dp_th, dp_ph] = frame_partials(&cp.point);
    let is = I * cp.sigma.sign();
    Ok(((dt_th + dt_ph * is) * FRAC_1_SQRT_2, (dp_th + dp_ph * is) * FRAC_1_SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPolarization {
    pub point: OrientationPoint,
    pub alpha: f64,
}

impl LinearPolarization {
    pub fn new(point: OrientationPoint, alpha: f64) -> Self {
        LinearPolarization { point, alpha }
    }
}

/// `ε = cosα θ̂ + sinα φ̂`.
pub fn linear_vector(lp: &LinearPolarization) -> Result<ComplexVec3> {
    let f = spherical_frame(&lp.point)?;
    let (sa, ca) = lp.alpha.sin_cos();
    Ok(f.theta * ca + f.phi * sa)
}

/// Linear polarization derivatives along all three coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDerivatives {
    pub d_theta: ComplexVec3,
    pub d_phi: ComplexVec3,
    pub d_alpha: ComplexVec3,
}

pub fn linear_vector_derivatives(lp: &LinearPolarization) -> Result<LinearDerivatives> {
    let f = spherical_frame(&lp.point)?;
    let [dt_th, dt_ph, dp_th, dp_ph] = frame_partials(&lp.point);
    let (sa, ca) = lp.alpha.sin_cos();
    Ok(LinearDerivatives {
        d_theta: dt_th * ca + dt_ph * sa,
        d_phi: dp_th * ca + dp_ph * sa,
        d_alpha: f.theta * (-sa) + f.phi * ca,
    })
}

/// `π(e) = (1/2i) e* × e`, returned exactly as defined (magnitude ½ for a
/// circular unit vector). Real up to round-off.
pub fn projection_map(e: &ComplexVec3) -> ComplexVec3 {
    cross(&e.conj(), e) * Complex64::new(0.0, -0.5)
}

/// [`projection_map`] rescaled onto the unit sphere; `None` when the map
/// vanishes (linear polarization).
pub fn projection_map_unit(e: &ComplexVec3) -> Option<[f64; 3]> {
    let p = projection_map(e).re();
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    (n > 1e-14).then(|| p.map(|c| c / n))
}

/// Wedge coefficients `W_ij = ∂θe*_i ∂φe_j − ∂φe*_i ∂θe_j` of
/// `de*_i ∧ de_j = W_ij dθ∧dφ`.
pub fn wedge_coefficients(d_theta: &ComplexVec3, d_phi: &ComplexVec3) -> ComplexMat3 {
    ComplexMat3::from_fn(|i, j| d_theta[i].conj() * d_phi[j] - d_phi[i].conj() * d_theta[j])
}

/// The three polarization 2-form densities (coefficients of `dθ∧dφ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormDensities {
    pub xi: ComplexVec3,
    pub zeta: ComplexVec3,
    pub chi: ComplexVec3,
}

impl FormDensities {
    /// Closed forms in terms of the two partial derivatives of `e`.
    pub fn from_derivatives(d_theta: &ComplexVec3, d_phi: &ComplexVec3) -> Self {
        let dt_conj = d_theta.conj();
        FormDensities {
            xi: cross(&dt_conj, d_phi).real_part(),
            zeta: diamond(&dt_conj, d_phi).imag_part_i(),
            chi: odot(&dt_conj, d_phi).imag_part_i() * 2.0,
        }
    }

    /// Index-class extraction from the full wedge coefficient matrix:
    /// `½ ε_lij W_ij`, `½ |ε_lij| W_ij`, `W_ll`.
    pub fn from_wedge(w: &ComplexMat3) -> Self {
        let half = Complex64::new(0.5, 0.0);
        FormDensities {
            xi: w.epsilon_contract() * half,
            zeta: w.abs_epsilon_contract() * half,
            chi: w.diagonal(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.xi
            .max_abs_diff(&other.xi)
            .max(self.zeta.max_abs_diff(&other.zeta))
            .max(self.chi.max_abs_diff(&other.chi))
    }
}

pub fn form_densities(point: &OrientationPoint, sigma: Helicity) -> Result<FormDensities> {
    let (dt, dp) = circular_vector_derivatives(&CircularPolarization::new(*point, sigma))?;
    Ok(FormDensities::from_derivatives(&dt, &dp))
}

/// `dξ = dθ∧dφ Re[∂θê* × ∂φê]`; real-valued.
pub fn xi_density(point: &OrientationPoint, sigma: Helicity) -> Result<ComplexVec3> {
    Ok(form_densities(point, sigma)?.xi)
}

/// `dζ = dθ∧dφ i Im[∂θê* ⋄ ∂φê]`.
pub fn zeta_density(point: &OrientationPoint, sigma: Helicity) -> Result<ComplexVec3> {
    Ok(form_densities(point, sigma)?.zeta)
}

/// `dχ = dθ∧dφ 2i Im[∂θê* ⊙ ∂φê]`.
pub fn chi_density(point: &OrientationPoint, sigma: Helicity) -> Result<ComplexVec3> {
    Ok(form_densities(point, sigma)?.chi)
}

/// Which 2-form a density grid holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    Xi,
    Zeta,
    Chi,
}

impl FormKind {
    pub fn name(self) -> &'static str {
        match self {
            FormKind::Xi => "xi",
            FormKind::Zeta => "zeta",
            FormKind::Chi => "chi",
        }
    }

    pub fn select(self, d: &FormDensities) -> ComplexVec3 {
        match self {
            FormKind::Xi => d.xi,
            FormKind::Zeta => d.zeta,
            FormKind::Chi => d.chi,
        }
    }
}

/// Tensor-product `(θ, φ)` grid on the orientation sphere. Nodes are stored
/// θ-major: node `k` has `θ = thetas[k / n_phi]`, `φ = phis[k % n_phi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Integration weights in θ (including any Jacobian); empty for
    /// visualization grids.
    pub theta_weights: Vec<f64>,
    pub pole_margin: f64,
}

impl SphereGrid {
    /// Cell-centred uniform θ in `(0, π)` and uniform φ in `[0, 2π)`.
    pub fn uniform(n_theta: usize, n_phi: usize, pole_margin: f64) -> Result<Self> {
        check_resolution(n_theta, n_phi)?;
        let thetas = (0..n_theta).map(|i| (i as f64 + 0.5) * PI / n_theta as f64).collect();
        Self::build(thetas, Vec::new(), n_phi, pole_margin)
    }

    /// Gauss-Legendre nodes in `cosθ` (weights are for `sinθ dθ`).
    pub fn gauss_legendre(n_theta: usize, n_phi: usize, pole_margin: f64) -> Result<Self> {
        check_resolution(n_theta, n_phi)?;
        let (x, w) = crate::molecule::quadrature::gauss_legendre(n_theta);
        let thetas = x.iter().rev().map(|c| c.acos()).collect();
        Self::build(thetas, w.into_iter().rev().collect(), n_phi, pole_margin)
    }

    /// Gauss-Legendre nodes in θ over `[theta1, theta2]` (weights for `dθ`).
    pub fn annulus(theta1: f64, theta2: f64, n_theta: usize, n_phi: usize, pole_margin: f64) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::InvalidArgument("annulus grid needs at least one node per axis".into()));
        }
        for t in [theta1, theta2] {
            OrientationPoint::new(t, 0.0).with_pole_margin(pole_margin).check_off_pole()?;
        }
        let (x, w) = crate::molecule::quadrature::gauss_legendre(n_theta);
        let half = 0.5 * (theta2 - theta1);
        let mid = 0.5 * (theta2 + theta1);
        let thetas = x.iter().map(|c| mid + half * c).collect();
        let weights = w.iter().map(|c| c * half).collect();
        Self::build(thetas, weights, n_phi, pole_margin)
    }

    fn build(thetas: Vec<f64>, theta_weights: Vec<f64>, n_phi: usize, pole_margin: f64) -> Result<Self> {
        let phis = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        let grid = SphereGrid { thetas, phis, theta_weights, pole_margin };
        for t in &grid.thetas {
            OrientationPoint::new(*t, 0.0).with_pole_margin(pole_margin).check_off_pole()?;
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.thetas.len() * self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> OrientationPoint {
        let n_phi = self.phis.len();
        OrientationPoint::new(self.thetas[k / n_phi], self.phis[k % n_phi]).with_pole_margin(self.pole_margin)
    }

    pub fn points(&self) -> impl Iterator<Item = OrientationPoint> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Evaluates `f` at every node in parallel; output order is node order.
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&OrientationPoint) -> Result<T> + Sync,
    {
        (0..self.len()).into_par_iter().map(|k| f(&self.point(k))).collect()
    }
}

fn check_resolution(n_theta: usize, n_phi: usize) -> Result<()> {
    if n_theta == 0 || n_phi == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    Ok(())
}

/// Values of a 1-form or 2-form density sampled on a [`SphereGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FormDensityGrid<T> {
    pub grid: SphereGrid,
    pub label: String,
    pub sigma: Option<Helicity>,
    pub values: Vec<T>,
}

impl<T> FormDensityGrid<T> {
    pub fn iter(&self) -> impl Iterator<Item = (OrientationPoint, &T)> {
        self.grid.points().zip(self.values.iter())
    }
}

pub fn form_density_grid(grid: &SphereGrid, kind: FormKind, sigma: Helicity) -> Result<FormDensityGrid<ComplexVec3>> {
    let values = grid.map(|p| Ok(kind.select(&form_densities(p, sigma)?)))?;
    Ok(FormDensityGrid { grid: grid.clone(), label: kind.name().to_string(), sigma: Some(sigma), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::FRAC_PI_2;

    const FD_STEP: f64 = 1e-5;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cp(theta: f64, phi: f64, s: Helicity) -> CircularPolarization {
        CircularPolarization::new(OrientationPoint::new(theta, phi), s)
    }

    #[test]
    fn frame_at_equator() {
        let f = spherical_frame(&OrientationPoint::new(FRAC_PI_2, 0.0)).unwrap();
        assert!(f.r.max_abs_diff(&ComplexVec3::unit(0)) < 1e-15);
        assert!(f.theta.max_abs_diff(&-ComplexVec3::unit(2)) < 1e-15);
        assert!(f.phi.max_abs_diff(&ComplexVec3::unit(1)) < 1e-15);
        let f = spherical_frame(&OrientationPoint::new(FRAC_PI_2, FRAC_PI_2)).unwrap();
        assert!(f.r.max_abs_diff(&ComplexVec3::unit(1)) < 1e-15);
    }

    #[test]
    fn frame_orthonormal_right_handed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = OrientationPoint::new(rng.random_range(0.01..PI - 0.01), rng.random_range(0.0..2.0 * PI));
            let f = spherical_frame(&p).unwrap();
            assert!(f.theta.dot(&f.phi).norm() < 1e-15);
            assert!(f.r.dot(&f.theta).norm() < 1e-15);
            assert!((f.theta.norm() - 1.0).abs() < 1e-15 && (f.phi.norm() - 1.0).abs() < 1e-15);
            assert!(cross(&f.theta, &f.phi).max_abs_diff(&f.r) < 1e-15);
        }
    }

    #[test]
    fn pole_is_rejected() {
        for theta in [0.0, 5e-4, PI, PI - 1e-4, f64::NAN] {
            let err = spherical_frame(&OrientationPoint::new(theta, 0.3)).unwrap_err();
            assert!(matches!(err, Error::PoleSingularity { .. }));
        }
        assert!(spherical_frame(&OrientationPoint::new(0.05, 0.0).with_pole_margin(0.1)).is_err());
        assert!(circular_vector(&cp(1e-4, 0.0, Helicity::Plus)).is_err());
    }

    #[test]
    fn circular_vector_at_equator() {
        let e = circular_vector(&cp(FRAC_PI_2, 0.0, Helicity::Plus)).unwrap();
        let expected = ComplexVec3::new(c(0., 0.), c(0., 1.), c(-1., 0.)) * FRAC_1_SQRT_2;
        assert!(e.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn circular_vector_norm_transversal_and_sigma_flip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (t, p) = (rng.random_range(0.01..PI - 0.01), rng.random_range(0.0..2.0 * PI));
            let e = circular_vector(&cp(t, p, Helicity::Plus)).unwrap();
            let em = circular_vector(&cp(t, p, Helicity::Minus)).unwrap();
            let r = spherical_frame(&OrientationPoint::new(t, p)).unwrap().r;
            assert!((e.hdot(&e) - 1.0).norm() < 1e-14);
            assert!(e.dot(&r).norm() < 1e-15);
            assert!(em.max_abs_diff(&e.conj()) < 1e-15);
        }
    }

    #[test]
    fn circular_derivatives_match_frame_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let (t, p) = (rng.random_range(0.01..PI - 0.01), rng.random_range(0.0..2.0 * PI));
            for s in [Helicity::Plus, Helicity::Minus] {
                let (dt, dp) = circular_vector_derivatives(&cp(t, p, s)).unwrap();
                let f = spherical_frame(&OrientationPoint::new(t, p)).unwrap();
                let is = I * s.sign();
                let dp_expected = (f.phi * t.cos() - f.r * (is * t.sin()) - f.theta * (is * t.cos())) * FRAC_1_SQRT_2;
                assert!(dt.max_abs_diff(&(-f.r * FRAC_1_SQRT_2)) < 1e-14);
                assert!(dp.max_abs_diff(&dp_expected) < 1e-14);
            }
        }
    }

    fn central_fd(f: impl Fn(f64) -> ComplexVec3, x: f64, h: f64) -> ComplexVec3 {
        (f(x + h) - f(x - h)) * (0.5 / h)
    }

    #[test]
    fn circular_derivatives_match_finite_differences() {
        for s in [Helicity::Plus, Helicity::Minus] {
            let (t, p) = (1.0, 0.7);
            let (dt, dp) = circular_vector_derivatives(&cp(t, p, s)).unwrap();
            let fd_t = central_fd(|x| circular_vector(&cp(x, p, s)).unwrap(), t, FD_STEP);
            let fd_p = central_fd(|x| circular_vector(&cp(t, x, s)).unwrap(), p, FD_STEP);
            assert!(dt.max_abs_diff(&fd_t) < 1e-8);
            assert!(dp.max_abs_diff(&fd_p) < 1e-8);
        }
    }

    #[test]
    fn linear_vector_and_derivatives() {
        let p = OrientationPoint::new(1.1, 2.3);
        let f = spherical_frame(&p).unwrap();
        assert!(linear_vector(&LinearPolarization::new(p, 0.0)).unwrap().max_abs_diff(&f.theta) < 1e-15);
        let d = linear_vector_derivatives(&LinearPolarization::new(p, 0.0)).unwrap();
        assert!(d.d_alpha.max_abs_diff(&f.phi) < 1e-15);

        let alpha = 0.4;
        let lp = |t: f64, ph: f64, a: f64| LinearPolarization::new(OrientationPoint::new(t, ph), a);
        let d = linear_vector_derivatives(&lp(1.1, 2.3, alpha)).unwrap();
        let fd_t = central_fd(|x| linear_vector(&lp(x, 2.3, alpha)).unwrap(), 1.1, FD_STEP);
        let fd_p = central_fd(|x| linear_vector(&lp(1.1, x, alpha)).unwrap(), 2.3, FD_STEP);
        let fd_a = central_fd(|x| linear_vector(&lp(1.1, 2.3, x)).unwrap(), alpha, FD_STEP);
        assert!(d.d_theta.max_abs_diff(&fd_t) < 1e-8);
        assert!(d.d_phi.max_abs_diff(&fd_p) < 1e-8);
        assert!(d.d_alpha.max_abs_diff(&fd_a) < 1e-8);

        let e = linear_vector(&lp(1.1, 2.3, alpha)).unwrap();
        assert!(e.max_imag() == 0.0);
        assert!((e.norm() - 1.0).abs() < 1e-15);
        assert!(e.dot(&f.r).norm() < 1e-15);
    }

    #[test]
    fn projection_map_examples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (t, p) = (rng.random_range(0.01..PI - 0.01), rng.random_range(0.0..2.0 * PI));
            for s in [Helicity::Plus, Helicity::Minus] {
                let e = circular_vector(&cp(t, p, s)).unwrap();
                let pi = projection_map(&e);
                let r = spherical_frame(&OrientationPoint::new(t, p)).unwrap().r;
                assert!(pi.max_abs_diff(&(r * (0.5 * s.sign()))) < 1e-12);
                assert!(pi.max_imag() < 1e-14);
                let unit = projection_map_unit(&e).unwrap();
                assert!(ComplexVec3::from_real(unit).max_abs_diff(&(r * s.sign())) < 1e-12);
            }
            let lin = linear_vector(&LinearPolarization::new(OrientationPoint::new(t, p), 0.3)).unwrap();
            assert!(projection_map(&lin).norm() < 1e-15);
            assert!(projection_map_unit(&lin).is_none());
        }
    }

    #[test]
    fn xi_density_closed_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let p = OrientationPoint::new(rng.random_range(0.01..PI - 0.01), rng.random_range(0.0..2.0 * PI));
            let f = spherical_frame(&p).unwrap();
            let xp = xi_density(&p, Helicity::Plus).unwrap();
            let xm = xi_density(&p, Helicity::Minus).unwrap();
            assert!(xp.max_abs_diff(&(f.theta * (0.5 * p.theta.cos()))) < 1e-14);
            assert!(xp.max_abs_diff(&xm) < 1e-15);
        }
        let eq = xi_density(&OrientationPoint::new(FRAC_PI_2, 0.4), Helicity::Plus).unwrap();
        assert!(eq.norm() < 1e-16);
    }

    #[test]
    fn zeta_chi_are_sigma_odd_and_imaginary() {
        let p = OrientationPoint::new(1.1, 2.0);
        for kind in [FormKind::Zeta, FormKind::Chi] {
            let dp = kind.select(&form_densities(&p, Helicity::Plus).unwrap());
            let dm = kind.select(&form_densities(&p, Helicity::Minus).unwrap());
            assert!(dp.max_abs_diff(&-dm) < 1e-15);
            assert_eq!(dp.max_real(), 0.0);
            assert!(dp.norm() > 1e-3);
        }
    }

    fn fd_densities(p: &OrientationPoint, s: Helicity) -> FormDensities {
        let dt = central_fd(|x| circular_vector(&cp(x, p.phi, s)).unwrap(), p.theta, FD_STEP);
        let dp = central_fd(|x| circular_vector(&cp(p.theta, x, s)).unwrap(), p.phi, FD_STEP);
        FormDensities::from_wedge(&wedge_coefficients(&dt, &dp))
    }

    #[test]
    fn densities_match_finite_difference_wedge() {
        let p = OrientationPoint::new(1.1, 2.0);
        for s in [Helicity::Plus, Helicity::Minus] {
            let analytic = form_densities(&p, s).unwrap();
            assert!(analytic.max_abs_diff(&fd_densities(&p, s)) < 1e-8);
        }
    }

    #[test]
    fn densities_equal_index_class_extraction() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = OrientationPoint::new(rng.random_range(0.01..PI - 0.01), rng.random_range(0.0..2.0 * PI));
            for s in [Helicity::Plus, Helicity::Minus] {
                let (dt, dp) = circular_vector_derivatives(&CircularPolarization::new(p, s)).unwrap();
                let closed = FormDensities::from_derivatives(&dt, &dp);
                let extracted = FormDensities::from_wedge(&wedge_coefficients(&dt, &dp));
                assert!(closed.max_abs_diff(&extracted) < 1e-14);
            }
        }
    }

    #[test]
    fn wedge_coefficients_are_anti_hermitian() {
        let (dt, dp) = circular_vector_derivatives(&cp(0.8, 1.3, Helicity::Plus)).unwrap();
        let w = wedge_coefficients(&dt, &dp);
        assert!(w.add(&w.adjoint()).max_abs() < 1e-15);
    }

    #[test]
    fn grids() {
        let g = SphereGrid::uniform(8, 16, DEFAULT_POLE_MARGIN).unwrap();
        assert_eq!(g.len(), 128);
        assert!(g.points().all(|p| p.check_off_pole().is_ok()));
        let gl = SphereGrid::gauss_legendre(12, 24, DEFAULT_POLE_MARGIN).unwrap();
        let area: f64 = gl.theta_weights.iter().sum::<f64>() * 2.0 * PI;
        assert!((area - 4.0 * PI).abs() < 1e-12);
        assert!(gl.thetas.windows(2).all(|w| w[0] < w[1]));
        let ann = SphereGrid::annulus(0.5, 1.0, 16, 8, DEFAULT_POLE_MARGIN).unwrap();
        assert!((ann.theta_weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        assert!(SphereGrid::annulus(0.0, 1.0, 16, 8, DEFAULT_POLE_MARGIN).is_err());

        let xi = form_density_grid(&g, FormKind::Xi, Helicity::Plus).unwrap();
        for (p, v) in xi.iter() {
            assert!(v.max_abs_diff(&xi_density(&p, Helicity::Plus).unwrap()) == 0.0);
        }
    }
}
