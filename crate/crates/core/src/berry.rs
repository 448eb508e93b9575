//! Berry connection and curvature of the one-photon perturbative state
//! `ψ = ψ₀ + ∫dΘ_k a_k(e) ψ_k` with `a_k = −Ẽ (D(k̂)·e)`.
//!
//! Everything here is driven by the Gram tensor `Q_ij = ⟨∂_{e_i}ψ|∂_{e_j}ψ⟩`:
//!
//! * connection: `A_j = i⟨ψ|∂_{e_j}ψ⟩ = i Σ_i e_i* Q_ij`, pulled back through
//!   `de_j = ∂θe_j dθ + ∂φe_j dφ` (holomorphic section, no `de*` term);
//! * curvature: `Ω = i Q_ij de*_i ∧ de_j`, whose `dθ∧dφ` coefficient is
//!   `i Q_ij W_ij` with `W` from [`wedge_coefficients`];
//! * decomposition: `Ω = Ω_a·dξ + (i|ε|Q)·dζ + (i diag Q)·dχ`.
//!
//! `ψ` is used unnormalized, so `A` carries an exact imaginary part
//! `½ d⟨ψ|ψ⟩`; it integrates to zero around closed loops and drops out of
//! the curvature.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra3::{ComplexMat3, ComplexVec3};
use crate::error::{Error, Result};
use crate::molecule::{gram_tensor, DipoleField, QuadratureRule};
use crate::polarization::{
    circular_vector, circular_vector_derivatives, form_densities, wedge_coefficients, CircularPolarization,
    FormDensities, FormDensityGrid, Helicity, OrientationPoint, SphereGrid,
};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default number of segments for latitude loops.
pub const DEFAULT_LOOP_SEGMENTS: usize = 720;

/// Tolerance for deciding that a polyline is closed.
pub const CLOSURE_TOL: f64 = 1e-12;

/// Whether the amplitude depends on `e` (physical) or on `e*` (a negative
/// control for the holomorphy check).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeKind {
    #[default]
    Holomorphic,
    AntiHolomorphic,
}

/// `a_k(e) = −Ẽ (D(k̂)·e)` bound to a dipole model.
#[derive(Clone, Copy)]
pub struct AmplitudeField<'a> {
    pub model: &'a dyn DipoleField,
    pub kind: AmplitudeKind,
}

impl<'a> AmplitudeField<'a> {
    pub fn new(model: &'a dyn DipoleField) -> Self {
        AmplitudeField { model, kind: AmplitudeKind::Holomorphic }
    }

    pub fn anti_holomorphic(model: &'a dyn DipoleField) -> Self {
        AmplitudeField { model, kind: AmplitudeKind::AntiHolomorphic }
    }

    pub fn amplitude(&self, k: &[f64; 3], e: &ComplexVec3) -> Complex64 {
        let d = self.model.dipole(k);
        let arg = match self.kind {
            AmplitudeKind::Holomorphic => *e,
            AmplitudeKind::AntiHolomorphic => e.conj(),
        };
        -self.model.spectral_amplitude() * d.dot(&arg)
    }

    /// Wirtinger gradient `∇_e a`.
    pub fn gradient(&self, k: &[f64; 3]) -> ComplexVec3 {
        match self.kind {
            AmplitudeKind::Holomorphic => self.model.dipole(k) * -self.model.spectral_amplitude(),
            AmplitudeKind::AntiHolomorphic => ComplexVec3::ZERO,
        }
    }

    /// Wirtinger gradient `∇_{e*} a`; identically zero for the physical
    /// amplitude.
    pub fn conjugate_gradient(&self, k: &[f64; 3]) -> ComplexVec3 {
        match self.kind {
            AmplitudeKind::Holomorphic => ComplexVec3::ZERO,
            AmplitudeKind::AntiHolomorphic => self.model.dipole(k) * -self.model.spectral_amplitude(),
        }
    }

    /// Finite-difference estimate of `max |∂_{e*_i} a_k|` at `e = ê(point, σ)`
    /// over a fixed set of photoelectron directions, with
    /// `∂_{e*} = ½(∂_{Re e} + i ∂_{Im e})`.
    pub fn holomorphy_residual(&self, point: &OrientationPoint, sigma: Helicity, fd_step: f64) -> Result<f64> {
        let e = circular_vector(&CircularPolarization::new(*point, sigma))?;
        let probes = QuadratureRule::with_degree(4);
        let h = fd_step;
        let mut worst: f64 = 0.0;
        for k in &probes.nodes {
            for i in 0..3 {
                let step = |delta: Complex64| {
                    let mut ep = e;
                    ep[i] += delta;
                    self.amplitude(k, &ep)
                };
                let d_re = (step(Complex64::new(h, 0.0)) - step(Complex64::new(-h, 0.0))) / (2.0 * h);
                let d_im = (step(Complex64::new(0.0, h)) - step(Complex64::new(0.0, -h))) / (2.0 * h);
                worst = worst.max(((d_re + I * d_im) * 0.5).norm());
            }
        }
        Ok(worst)
    }
}

/// `∇_{e*} a` residual of the physical amplitude (see
/// [`AmplitudeField::holomorphy_residual`]).
pub fn holomorphy_check(model: &dyn DipoleField, point: &OrientationPoint, sigma: Helicity, fd_step: f64) -> Result<f64> {
    AmplitudeField::new(model).holomorphy_residual(point, sigma, fd_step)
}

/// Connection at one orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionSample {
    pub point: OrientationPoint,
    /// Coefficient of `dθ`.
    pub a_theta: Complex64,
    /// Coefficient of `dφ`.
    pub a_phi: Complex64,
    /// Ambient connection `A_j = i⟨ψ|∂_{e_j}ψ⟩`.
    pub a_vec: ComplexVec3,
}

/// Gram tensor together with its three channel vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureTensor {
    pub q: ComplexMat3,
    /// `i ε_lij Q_ij`, the propensity vector `Ω_a`.
    pub antisym_vector: ComplexVec3,
    /// `i |ε_lij| Q_ij`.
    pub diamond_vector: ComplexVec3,
    /// `i Q_ll`.
    pub diagonal_vector: ComplexVec3,
}

impl CurvatureTensor {
    pub fn from_gram(q: ComplexMat3) -> Self {
        CurvatureTensor {
            q,
            antisym_vector: q.epsilon_contract() * I,
            diamond_vector: q.abs_epsilon_contract() * I,
            diagonal_vector: q.diagonal() * I,
        }
    }

    /// `i Q_ij` rebuilt from the three channel vectors alone.
    pub fn reconstruct(&self) -> ComplexMat3 {
        let mut out = ComplexMat3::ZERO;
        for (n, l, m) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            out.0[l][m] = (self.diamond_vector[n] + self.antisym_vector[n]) * 0.5;
            out.0[m][l] = (self.diamond_vector[n] - self.antisym_vector[n]) * 0.5;
        }
        for i in 0..3 {
            out.0[i][i] = self.diagonal_vector[i];
        }
        out
    }

    /// `−ε_lij Im Q_ij`, the antisymmetric channel from the imaginary part of
    /// the Gram tensor.
    pub fn antisym_from_imaginary_part(&self) -> ComplexVec3 {
        let im = ComplexMat3::from_fn(|i, j| Complex64::new(-self.q.0[i][j].im, 0.0));
        im.epsilon_contract()
    }

    pub fn channels(&self, forms: &FormDensities) -> DensityChannels {
        let xi = self.antisym_vector.dot(&forms.xi);
        let zeta = self.diamond_vector.dot(&forms.zeta);
        let chi = self.diagonal_vector.dot(&forms.chi);
        DensityChannels { xi, zeta, chi, total: xi + zeta + chi }
    }
}

/// `dθ∧dφ` coefficients of the curvature split by 2-form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityChannels {
    pub xi: Complex64,
    pub zeta: Complex64,
    pub chi: Complex64,
    pub total: Complex64,
}

/// Geometric phase around a loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPhase {
    /// Real part of the line integral.
    pub raw: f64,
    /// `raw` reduced to `(−π, π]`.
    pub principal: f64,
    /// Imaginary part of the line integral (the exact `½ d⟨ψ|ψ⟩` piece);
    /// zero up to discretization error.
    pub imaginary: f64,
}

impl LoopPhase {
    pub fn from_integral(s: Complex64) -> Self {
        LoopPhase { raw: s.re, principal: principal_value(s.re), imaginary: s.im }
    }
}

/// Reduces an angle to `(−π, π]`.
pub fn principal_value(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

fn wrap_delta(d: f64) -> f64 {
    principal_value(d)
}

/// Closed polyline on the orientation sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopPath {
    points: Vec<OrientationPoint>,
    latitude: Option<f64>,
}

impl LoopPath {
    /// The last point must coincide with the first (φ compared modulo 2π).
    pub fn new(points: Vec<OrientationPoint>) -> Result<Self> {
        let (first, last) = match (points.first(), points.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidArgument("loop path needs at least one point".into())),
        };
        let gap = (last.theta - first.theta).abs().max(wrap_delta(last.phi - first.phi).abs());
        if gap.is_nan() || gap > CLOSURE_TOL {
            return Err(Error::OpenPath { gap });
        }
        for p in &points {
            p.check_off_pole()?;
        }
        Ok(LoopPath { points, latitude: None })
    }

    /// Latitude circle at `theta0`, traversed with increasing φ.
    pub fn latitude(theta0: f64, segments: usize, pole_margin: f64) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidArgument("latitude loop needs at least one segment".into()));
        }
        let points = (0..=segments)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / segments as f64;
                OrientationPoint { theta: theta0, phi, pole_margin }
            })
            .collect();
        let mut path = LoopPath::new(points)?;
        path.latitude = Some(theta0);
        Ok(path)
    }

    pub fn points(&self) -> &[OrientationPoint] {
        &self.points
    }

    pub fn latitude_theta(&self) -> Option<f64> {
        self.latitude
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        LoopPath { points, latitude: None }
    }

    /// Traverse `self` then `other`; both must start at the same point.
    pub fn concat(&self, other: &LoopPath) -> Result<Self> {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points[1..]);
        LoopPath::new(points)
    }
}

/// `∮ (A_θ dθ + A_φ dφ)` for a connection given pointwise as `(A_θ, A_φ)`.
/// Latitude loops use the periodic trapezoid (only `A_φ` contributes); other
/// paths use the composite trapezoid per segment with `Δφ` wrapped.
pub fn integrate_path<F>(path: &LoopPath, connection: F) -> Result<Complex64>
where
    F: Fn(&OrientationPoint) -> Result<(Complex64, Complex64)> + Sync,
{
    let pts = path.points();
    let samples: Vec<(Complex64, Complex64)> = pts.par_iter().map(&connection).collect::<Result<_>>()?;
    let mut s = Complex64::new(0.0, 0.0);
    if path.latitude_theta().is_some() {
        let n = samples.len() - 1;
        for (_, a_phi) in &samples[..n] {
            s += a_phi;
        }
        s *= 2.0 * PI / n as f64;
    } else {
        for (w, pair) in samples.windows(2).zip(pts.windows(2)) {
            let d_theta = pair[1].theta - pair[0].theta;
            let d_phi = wrap_delta(pair[1].phi - pair[0].phi);
            s += (w[0].0 + w[1].0) * (0.5 * d_theta) + (w[0].1 + w[1].1) * (0.5 * d_phi);
        }
    }
    Ok(s)
}

/// Connection and curvature of one circular field, built once from the Gram
/// tensor of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerryGeometry {
    tensor: CurvatureTensor,
}

impl BerryGeometry {
    pub fn new(model: &dyn DipoleField, rule: &QuadratureRule) -> Result<Self> {
        Ok(Self::from_gram(gram_tensor(model, rule)?))
    }

    pub fn from_gram(q: ComplexMat3) -> Self {
        BerryGeometry { tensor: CurvatureTensor::from_gram(q) }
    }

    pub fn gram(&self) -> &ComplexMat3 {
        &self.tensor.q
    }

    pub fn curvature_tensor(&self) -> CurvatureTensor {
        self.tensor
    }

    pub fn connection_at(&self, cp: &CircularPolarization) -> Result<ConnectionSample> {
        let e = circular_vector(cp)?;
        let (dt, dp) = circular_vector_derivatives(cp)?;
        let a_vec = self.tensor.q.left_mul(&e.conj()) * I;
        Ok(ConnectionSample { point: cp.point, a_theta: a_vec.dot(&dt), a_phi: a_vec.dot(&dp), a_vec })
    }

    /// Curvature density assembled from the ξ, ζ, χ channels.
    pub fn density_channels(&self, point: &OrientationPoint, sigma: Helicity) -> Result<DensityChannels> {
        Ok(self.tensor.channels(&form_densities(point, sigma)?))
    }

    pub fn curvature_density(&self, point: &OrientationPoint, sigma: Helicity) -> Result<Complex64> {
        Ok(self.density_channels(point, sigma)?.total)
    }

    /// `i Q_ij (∂θe*_i ∂φe_j − ∂φe*_i ∂θe_j)` without the channel split.
    pub fn direct_density(&self, point: &OrientationPoint, sigma: Helicity) -> Result<Complex64> {
        let (dt, dp) = circular_vector_derivatives(&CircularPolarization::new(*point, sigma))?;
        Ok(self.tensor.q.contract(&wedge_coefficients(&dt, &dp)) * I)
    }

    /// `|∂θA_φ − ∂φA_θ − Ω_θφ|` with central differences of the connection.
    pub fn exterior_derivative_residual(&self, point: &OrientationPoint, sigma: Helicity, fd_step: f64) -> Result<f64> {
        let h = fd_step;
        let at = |dt: f64, dp: f64| self.connection_at(&CircularPolarization::new(point.offset(dt, dp), sigma));
        let d_theta_a_phi = (at(h, 0.0)?.a_phi - at(-h, 0.0)?.a_phi) / (2.0 * h);
        let d_phi_a_theta = (at(0.0, h)?.a_theta - at(0.0, -h)?.a_theta) / (2.0 * h);
        let density = self.curvature_density(point, sigma)?;
        Ok((d_theta_a_phi - d_phi_a_theta - density).norm())
    }

    /// Composite-trapezoid line integral of `A_θ dθ + A_φ dφ`.
    pub fn loop_phase(&self, path: &LoopPath, sigma: Helicity) -> Result<LoopPhase> {
        let s = integrate_path(path, |p| {
            let a = self.connection_at(&CircularPolarization::new(*p, sigma))?;
            Ok((a.a_theta, a.a_phi))
        })?;
        Ok(LoopPhase::from_integral(s))
    }

    /// `∬ Ω dθ dφ` over a latitude band with Gauss-Legendre in θ and the
    /// periodic trapezoid in φ.
    pub fn annulus_flux(&self, theta1: f64, theta2: f64, sigma: Helicity, n_theta: usize, n_phi: usize, pole_margin: f64) -> Result<f64> {
        let grid = SphereGrid::annulus(theta1, theta2, n_theta, n_phi, pole_margin)?;
        let values = grid.map(|p| self.curvature_density(p, sigma))?;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut flux = 0.0;
        for (i, w) in grid.theta_weights.iter().enumerate() {
            let row: f64 = values[i * n_phi..(i + 1) * n_phi].iter().map(|v| v.re).sum();
            flux += w * row * dphi;
        }
        Ok(flux)
    }

    pub fn stokes(&self, theta1: f64, theta2: f64, sigma: Helicity, options: &StokesOptions) -> Result<StokesReport> {
        let m = options.pole_margin;
        for t in [theta1, theta2] {
            OrientationPoint::new(t, 0.0).with_pole_margin(m).check_off_pole()?;
        }
        if theta1 > theta2 {
            return Err(Error::InvalidArgument(format!("annulus needs theta1 ≤ theta2, got {theta1} > {theta2}")));
        }
        let inner = self.loop_phase(&LoopPath::latitude(theta1, options.loop_segments, m)?, sigma)?;
        let outer = self.loop_phase(&LoopPath::latitude(theta2, options.loop_segments, m)?, sigma)?;
        let flux = if theta1 == theta2 {
            0.0
        } else {
            self.annulus_flux(theta1, theta2, sigma, options.n_theta, options.n_phi, m)?
        };
        let boundary = outer.raw - inner.raw;
        Ok(StokesReport { theta1, theta2, inner: inner.raw, outer: outer.raw, flux, residual: (boundary - flux).abs() })
    }

    pub fn connection_grid(&self, grid: &SphereGrid, sigma: Helicity) -> Result<Vec<ConnectionSample>> {
        grid.map(|p| self.connection_at(&CircularPolarization::new(*p, sigma)))
    }

    pub fn density_grid(&self, grid: &SphereGrid, sigma: Helicity) -> Result<Vec<DensityChannels>> {
        grid.map(|p| self.density_channels(p, sigma))
    }

    /// Total density as a labelled grid.
    pub fn total_density_grid(&self, grid: &SphereGrid, sigma: Helicity) -> Result<FormDensityGrid<Complex64>> {
        let values = grid.map(|p| self.curvature_density(p, sigma))?;
        Ok(FormDensityGrid { grid: grid.clone(), label: "total".into(), sigma: Some(sigma), values })
    }
}

/// Resolution of a Stokes comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesOptions {
    pub n_theta: usize,
    pub n_phi: usize,
    pub loop_segments: usize,
    pub pole_margin: f64,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions {
            n_theta: 256,
            n_phi: 256,
            loop_segments: DEFAULT_LOOP_SEGMENTS,
            pole_margin: crate::polarization::DEFAULT_POLE_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesReport {
    pub theta1: f64,
    pub theta2: f64,
    pub inner: f64,
    pub outer: f64,
    pub flux: f64,
    pub residual: f64,
}

pub fn connection_at(model: &dyn DipoleField, rule: &QuadratureRule, cp: &CircularPolarization) -> Result<ConnectionSample> {
    BerryGeometry::new(model, rule)?.connection_at(cp)
}

pub fn curvature_tensor(model: &dyn DipoleField, rule: &QuadratureRule) -> Result<CurvatureTensor> {
    Ok(BerryGeometry::new(model, rule)?.curvature_tensor())
}

pub fn curvature_density(model: &dyn DipoleField, rule: &QuadratureRule, point: &OrientationPoint, sigma: Helicity) -> Result<Complex64> {
    BerryGeometry::new(model, rule)?.curvature_density(point, sigma)
}

pub fn exterior_derivative_check(
    model: &dyn DipoleField,
    rule: &QuadratureRule,
    point: &OrientationPoint,
    sigma: Helicity,
    fd_step: f64,
) -> Result<f64> {
    BerryGeometry::new(model, rule)?.exterior_derivative_residual(point, sigma, fd_step)
}

pub fn loop_phase(model: &dyn DipoleField, rule: &QuadratureRule, path: &LoopPath, sigma: Helicity) -> Result<LoopPhase> {
    BerryGeometry::new(model, rule)?.loop_phase(path, sigma)
}

/// Stokes residual on the band `theta1 ≤ θ ≤ theta2` at the default
/// 256×256 annulus resolution.
pub fn stokes_check(model: &dyn DipoleField, rule: &QuadratureRule, theta1: f64, theta2: f64, sigma: Helicity) -> Result<f64> {
    Ok(BerryGeometry::new(model, rule)?.stokes(theta1, theta2, sigma, &StokesOptions::default())?.residual)
}
