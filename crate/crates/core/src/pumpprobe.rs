//! Two-field parameter manifold: a circular field `ê(θ, φ, σ)` and a linear
//! field `ε(θ, φ, α)` acting on the same oriented molecule.
//!
//! The state is `ψ = ψ₀ + ∫dΘ_k a_k(e, ε) ψ_k` with the factorized two-photon
//! amplitude
//!
//! ```text
//! a_k = −G (D(k̂)·e)(d·ε)      linear field first (bound-bound d), circular ionizes
//! a_k = −G (d·e)(D(k̂)·ε)      circular field first
//! ```
//!
//! Coordinates are the six complex components `z = (e, ε)`. The connection
//! `A = i⟨ψ|∂_z ψ⟩ dz` splits into `A_e + A_ε`, and the joint Gram tensor
//! `G_AB = ⟨∂_Aψ|∂_Bψ⟩` splits into the circular, linear and cross blocks.
//! Every quantity here is integrated directly from the amplitude and its
//! gradients; closed forms are used only in the tests.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra3::{ComplexMat3, ComplexVec3};
use crate::berry::{integrate_path, principal_value, CurvatureTensor, DensityChannels, LoopPath, LoopPhase};
use crate::error::{Error, Result};
use crate::molecule::{gram_tensor, DipoleField, QuadratureRule};
use crate::polarization::{
    circular_vector, circular_vector_derivatives, linear_vector, linear_vector_derivatives, CircularPolarization,
    FormDensities, Helicity, LinearPolarization, OrientationPoint,
};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which field drives the bound-bound step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldOrdering {
    /// `a = −G (D·e)(d·ε)`.
    #[default]
    LinearFirst,
    /// `a = −G (d·e)(D·ε)`.
    CircularFirst,
}

/// Circular and linear polarization at a common molecular orientation,
/// with spectral factor `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFieldConfiguration {
    pub circular: CircularPolarization,
    pub linear: LinearPolarization,
    pub g: Complex64,
}

impl TwoFieldConfiguration {
    pub fn new(circular: CircularPolarization, linear: LinearPolarization, g: Complex64) -> Result<Self> {
        let (a, b) = (circular.point, linear.point);
        let gap = (a.theta - b.theta).abs().max(principal_value(a.phi - b.phi).abs());
        if gap.is_nan() || gap > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "circular and linear fields must share one orientation (θ, φ differ by {gap:e})"
            )));
        }
        Ok(TwoFieldConfiguration { circular, linear, g })
    }

    pub fn at(point: OrientationPoint, sigma: Helicity, alpha: f64, g: Complex64) -> Self {
        TwoFieldConfiguration {
            circular: CircularPolarization::new(point, sigma),
            linear: LinearPolarization::new(point, alpha),
            g,
        }
    }

    pub fn point(&self) -> OrientationPoint {
        self.circular.point
    }

    fn moved(&self, d_theta: f64, d_phi: f64, d_alpha: f64) -> Self {
        let p = self.point().offset(d_theta, d_phi);
        TwoFieldConfiguration::at(p, self.circular.sigma, self.linear.alpha + d_alpha, self.g)
    }

    /// `(ê, ε)`.
    pub fn vectors(&self) -> Result<(ComplexVec3, ComplexVec3)> {
        Ok((circular_vector(&self.circular)?, linear_vector(&self.linear)?))
    }
}

/// Continuum dipole `D`, bound-bound dipole `d` and field ordering.
#[derive(Clone)]
pub struct TwoPhotonAmplitudeModel {
    model: Arc<dyn DipoleField>,
    pub d: ComplexVec3,
    pub ordering: FieldOrdering,
}

impl std::fmt::Debug for TwoPhotonAmplitudeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwoPhotonAmplitudeModel")
            .field("d", &self.d)
            .field("ordering", &self.ordering)
            .finish_non_exhaustive()
    }
}

impl TwoPhotonAmplitudeModel {
    pub fn new(model: Arc<dyn DipoleField>, d: ComplexVec3) -> Self {
        TwoPhotonAmplitudeModel { model, d, ordering: FieldOrdering::LinearFirst }
    }

    pub fn with_ordering(mut self, ordering: FieldOrdering) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn continuum(&self) -> &dyn DipoleField {
        &*self.model
    }

    pub fn amplitude(&self, k: &[f64; 3], e: &ComplexVec3, eps: &ComplexVec3, g: Complex64) -> Complex64 {
        amplitude_from(self.ordering, &self.model.dipole(k), &self.d, e, eps, g)
    }

    /// `(∇_e a, ∇_ε a)`.
    pub fn gradients(&self, k: &[f64; 3], e: &ComplexVec3, eps: &ComplexVec3, g: Complex64) -> (ComplexVec3, ComplexVec3) {
        gradients_from(self.ordering, &self.model.dipole(k), &self.d, e, eps, g)
    }

    /// Samples `D` on the rule once for repeated evaluation.
    pub fn prepare(&self, rule: &QuadratureRule) -> Result<PreparedTwoPhoton> {
        rule.ensure_resolves(self.model.band_limit())?;
        Ok(PreparedTwoPhoton {
            samples: rule.nodes.par_iter().map(|k| self.model.dipole(k)).collect(),
            weights: rule.weights.clone(),
            d: self.d,
            ordering: self.ordering,
        })
    }
}

fn amplitude_from(
    ordering: FieldOrdering,
    dk: &ComplexVec3,
    d: &ComplexVec3,
    e: &ComplexVec3,
    eps: &ComplexVec3,
    g: Complex64,
) -> Complex64 {
    match ordering {
        FieldOrdering::LinearFirst => -g * dk.dot(e) * d.dot(eps),
        FieldOrdering::CircularFirst => -g * d.dot(e) * dk.dot(eps),
    }
}

fn gradients_from(
    ordering: FieldOrdering,
    dk: &ComplexVec3,
    d: &ComplexVec3,
    e: &ComplexVec3,
    eps: &ComplexVec3,
    g: Complex64,
) -> (ComplexVec3, ComplexVec3) {
    match ordering {
        FieldOrdering::LinearFirst => (*dk * (-g * d.dot(eps)), *d * (-g * dk.dot(e))),
        FieldOrdering::CircularFirst => (*d * (-g * dk.dot(eps)), *dk * (-g * d.dot(e))),
    }
}

/// [`TwoPhotonAmplitudeModel`] with `D` tabulated on a quadrature rule.
#[derive(Debug, Clone)]
pub struct PreparedTwoPhoton {
    samples: Vec<ComplexVec3>,
    weights: Vec<f64>,
    d: ComplexVec3,
    ordering: FieldOrdering,
}

impl PreparedTwoPhoton {
    /// Connection parts and joint Gram tensor at one configuration.
    pub fn integrals(&self, config: &TwoFieldConfiguration) -> Result<TwoFieldIntegrals> {
        let (e, eps) = config.vectors()?;
        Ok(self.integrals_at(&e, &eps, config.g))
    }

    fn integrals_at(&self, e: &ComplexVec3, eps: &ComplexVec3, g: Complex64) -> TwoFieldIntegrals {
        let mut a_e = ComplexVec3::ZERO;
        let mut a_eps = ComplexVec3::ZERO;
        let mut gram = [[Complex64::ZERO; 6]; 6];
        for (dk, w) in self.samples.iter().zip(&self.weights) {
            let a = amplitude_from(self.ordering, dk, &self.d, e, eps, g);
            let (ge, gl) = gradients_from(self.ordering, dk, &self.d, e, eps, g);
            let aw = a.conj() * *w;
            a_e += ge * aw;
            a_eps += gl * aw;
            let grad = [ge[0], ge[1], ge[2], gl[0], gl[1], gl[2]];
            for (row, ga) in gram.iter_mut().zip(&grad) {
                let ga = ga.conj() * *w;
                for (cell, gb) in row.iter_mut().zip(&grad) {
                    *cell += ga * gb;
                }
            }
        }
        TwoFieldIntegrals {
            connection: SplitConnection { a_e: a_e * I, a_eps: a_eps * I },
            gram: JointGram(gram),
        }
    }

    /// `i ∫ a* ∂_u a` with `∂_u a` from central differences of the amplitude
    /// along the orientation/α coordinates `(dθ, dφ, dα)·h`. Independent of
    /// the gradient path; used to cross-check pullbacks.
    pub fn connection_by_differences(&self, config: &TwoFieldConfiguration, direction: [f64; 3], h: f64) -> Result<Complex64> {
        let (e, eps) = config.vectors()?;
        let [dt, dp, da] = direction.map(|x| x * h);
        let (ep, lp) = config.moved(dt, dp, da).vectors()?;
        let (em, lm) = config.moved(-dt, -dp, -da).vectors()?;
        let g = config.g;
        let mut s = Complex64::ZERO;
        for (dk, w) in self.samples.iter().zip(&self.weights) {
            let a = amplitude_from(self.ordering, dk, &self.d, &e, &eps, g);
            let da = (amplitude_from(self.ordering, dk, &self.d, &ep, &lp, g)
                - amplitude_from(self.ordering, dk, &self.d, &em, &lm, g))
                / (2.0 * h);
            s += a.conj() * da * *w;
        }
        Ok(s * I)
    }
}

/// `A_e = i⟨ψ|∇_e ψ⟩` and `A_ε = i⟨ψ|∇_ε ψ⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConnection {
    pub a_e: ComplexVec3,
    pub a_eps: ComplexVec3,
}

/// `⟨∂_Aψ|∂_Bψ⟩` over `z = (e_x, e_y, e_z, ε_x, ε_y, ε_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointGram(pub [[Complex64; 6]; 6]);

impl JointGram {
    fn block(&self, row: usize, col: usize) -> ComplexMat3 {
        ComplexMat3::from_fn(|i, j| self.0[row + i][col + j])
    }

    /// `⟨∂_{e_i}ψ|∂_{e_j}ψ⟩`.
    pub fn circular(&self) -> ComplexMat3 {
        self.block(0, 0)
    }

    /// `⟨∂_{ε_i}ψ|∂_{ε_j}ψ⟩`.
    pub fn linear(&self) -> ComplexMat3 {
        self.block(3, 3)
    }

    /// `⟨∂_{ε_i}ψ|∂_{e_j}ψ⟩`.
    pub fn linear_circular(&self) -> ComplexMat3 {
        self.block(3, 0)
    }

    /// `⟨∂_{e_i}ψ|∂_{ε_j}ψ⟩`.
    pub fn circular_linear(&self) -> ComplexMat3 {
        self.block(0, 3)
    }

    /// `i G_AB (u_A* v_B − v_A* u_B)`: the curvature evaluated on two tangent
    /// vectors of `z`.
    pub fn curvature(&self, u: &[Complex64; 6], v: &[Complex64; 6]) -> Complex64 {
        let mut s = Complex64::ZERO;
        for a in 0..6 {
            for b in 0..6 {
                s += self.0[a][b] * (u[a].conj() * v[b] - v[a].conj() * u[b]);
            }
        }
        s * I
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..6 {
            for b in 0..6 {
                worst = worst.max((self.0[a][b] - self.0[b][a].conj()).norm());
            }
        }
        worst
    }
}

/// Connection parts and joint Gram tensor at one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFieldIntegrals {
    pub connection: SplitConnection,
    pub gram: JointGram,
}

/// Orbital-antisymmetric curvature blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureBlocks {
    /// `i⟨∇_e ψ|×|∇_e ψ⟩`.
    pub omega_e: ComplexVec3,
    /// `i⟨∇_ε ψ|×|∇_ε ψ⟩`.
    pub omega_eps: ComplexVec3,
    /// `⟨∂_{ε_i}ψ|∂_{e_j}ψ⟩`.
    pub cross_tensor: ComplexMat3,
    /// `i ε_nij ⟨∂_{ε_i}ψ|∂_{e_j}ψ⟩`.
    pub cross_vector: ComplexVec3,
}

impl CurvatureBlocks {
    pub fn from_gram(gram: &JointGram) -> Self {
        let cross_tensor = gram.linear_circular();
        CurvatureBlocks {
            omega_e: gram.circular().epsilon_contract() * I,
            omega_eps: gram.linear().epsilon_contract() * I,
            cross_tensor,
            cross_vector: cross_tensor.epsilon_contract() * I,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.omega_e
            .norm()
            .max(self.omega_eps.norm())
            .max(self.cross_tensor.max_abs())
            .max(self.cross_vector.norm())
    }
}

pub fn split_connection(
    model: &TwoPhotonAmplitudeModel,
    rule: &QuadratureRule,
    config: &TwoFieldConfiguration,
) -> Result<SplitConnection> {
    Ok(model.prepare(rule)?.integrals(config)?.connection)
}

pub fn curvature_blocks(
    model: &TwoPhotonAmplitudeModel,
    rule: &QuadratureRule,
    config: &TwoFieldConfiguration,
) -> Result<CurvatureBlocks> {
    Ok(CurvatureBlocks::from_gram(&model.prepare(rule)?.integrals(config)?.gram))
}

/// How the block of the field that ionizes compares with the one-field
/// propensity vector `i ε Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    /// `|G|² |d·f|² / |Ẽ|²`, with `f` the bound-bound field.
    pub coupling: f64,
    /// The ionizing field's block (`Ω_a^e` for linear-first ordering).
    pub block: ComplexVec3,
    pub one_field: ComplexVec3,
    /// `‖block / coupling − one_field‖`, or `‖block‖` when the coupling
    /// vanishes.
    pub residual: f64,
}

/// Compares the ionizing field's curvature block with the one-field
/// antisymmetric channel computed from the Gram tensor of `D`.
pub fn one_field_reduction(
    model: &TwoPhotonAmplitudeModel,
    rule: &QuadratureRule,
    config: &TwoFieldConfiguration,
) -> Result<Reduction> {
    let e_tilde2 = model.continuum().spectral_amplitude().norm_sqr();
    if e_tilde2 == 0.0 {
        return Err(Error::InvalidArgument("one-field reduction needs a nonzero spectral amplitude".into()));
    }
    let blocks = curvature_blocks(model, rule, config)?;
    let (e, eps) = config.vectors()?;
    let (block, bound_field) = match model.ordering {
        FieldOrdering::LinearFirst => (blocks.omega_e, eps),
        FieldOrdering::CircularFirst => (blocks.omega_eps, e),
    };
    let one_field = CurvatureTensor::from_gram(gram_tensor(model.continuum(), rule)?).antisym_vector;
    let coupling = config.g.norm_sqr() * model.d.dot(&bound_field).norm_sqr() / e_tilde2;
    let residual = if coupling > 0.0 {
        (block * (1.0 / coupling) - one_field).norm()
    } else {
        block.norm()
    };
    Ok(Reduction { coupling, block, one_field, residual })
}

pub fn one_field_reduction_check(
    model: &TwoPhotonAmplitudeModel,
    rule: &QuadratureRule,
    config: &TwoFieldConfiguration,
) -> Result<f64> {
    Ok(one_field_reduction(model, rule, config)?.residual)
}

/// Tangent vectors of `z = (e, ε)` along θ, φ and α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangents {
    pub theta: [Complex64; 6],
    pub phi: [Complex64; 6],
    pub alpha: [Complex64; 6],
}

fn join(a: &ComplexVec3, b: &ComplexVec3) -> [Complex64; 6] {
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

pub fn tangents(config: &TwoFieldConfiguration) -> Result<Tangents> {
    let (et, ep) = circular_vector_derivatives(&config.circular)?;
    let l = linear_vector_derivatives(&config.linear)?;
    Ok(Tangents {
        theta: join(&et, &l.d_theta),
        phi: join(&ep, &l.d_phi),
        alpha: join(&ComplexVec3::ZERO, &l.d_alpha),
    })
}

/// Connection pulled back to `(θ, φ, α)`, split by field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulledBackConnection {
    pub theta_e: Complex64,
    pub theta_eps: Complex64,
    pub phi_e: Complex64,
    pub phi_eps: Complex64,
    /// Only the linear field depends on α.
    pub alpha: Complex64,
}

impl PulledBackConnection {
    pub fn theta(&self) -> Complex64 {
        self.theta_e + self.theta_eps
    }

    pub fn phi(&self) -> Complex64 {
        self.phi_e + self.phi_eps
    }
}

/// `dθ∧dφ` coefficient of the two-field curvature by block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFieldDensity {
    /// `e`–`e` block, split into its ξ, ζ, χ channels.
    pub circular: DensityChannels,
    /// `ε`–`ε` block, split into its ξ, ζ, χ channels.
    pub linear: DensityChannels,
    /// Both mixed `e`–`ε` blocks.
    pub cross: Complex64,
    /// Full six-component contraction.
    pub total: Complex64,
}

impl TwoFieldDensity {
    pub fn block_sum(&self) -> Complex64 {
        self.circular.total + self.linear.total + self.cross
    }
}

/// Curvature components involving `dα`. These break the cylindrical
/// symmetry of the circular field and are reported as an anisotropic
/// channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropicDensity {
    pub theta_alpha: Complex64,
    pub phi_alpha: Complex64,
}

/// Connection, curvature and phase of the two-field state on the
/// orientation sphere.
#[derive(Debug, Clone)]
pub struct TwoFieldGeometry {
    prepared: PreparedTwoPhoton,
}

impl TwoFieldGeometry {
    pub fn new(model: &TwoPhotonAmplitudeModel, rule: &QuadratureRule) -> Result<Self> {
        Ok(TwoFieldGeometry { prepared: model.prepare(rule)? })
    }

    pub fn prepared(&self) -> &PreparedTwoPhoton {
        &self.prepared
    }

    pub fn integrals(&self, config: &TwoFieldConfiguration) -> Result<TwoFieldIntegrals> {
        self.prepared.integrals(config)
    }

    pub fn connection(&self, config: &TwoFieldConfiguration) -> Result<PulledBackConnection> {
        let c = self.integrals(config)?.connection;
        let t = tangents(config)?;
        let (et, lt) = split(&t.theta);
        let (ep, lp) = split(&t.phi);
        let (_, la) = split(&t.alpha);
        Ok(PulledBackConnection {
            theta_e: c.a_e.dot(&et),
            theta_eps: c.a_eps.dot(&lt),
            phi_e: c.a_e.dot(&ep),
            phi_eps: c.a_eps.dot(&lp),
            alpha: c.a_eps.dot(&la),
        })
    }

    pub fn density(&self, config: &TwoFieldConfiguration) -> Result<TwoFieldDensity> {
        let gram = self.integrals(config)?.gram;
        let t = tangents(config)?;
        let (et, lt) = split(&t.theta);
        let (ep, lp) = split(&t.phi);
        let circular = CurvatureTensor::from_gram(gram.circular()).channels(&FormDensities::from_derivatives(&et, &ep));
        let linear = CurvatureTensor::from_gram(gram.linear()).channels(&FormDensities::from_derivatives(&lt, &lp));
        let cross = (gram.linear_circular().contract(&mixed_wedge(&lt, &lp, &et, &ep))
            + gram.circular_linear().contract(&mixed_wedge(&et, &ep, &lt, &lp)))
            * I;
        Ok(TwoFieldDensity { circular, linear, cross, total: gram.curvature(&t.theta, &t.phi) })
    }

    pub fn anisotropic_density(&self, config: &TwoFieldConfiguration) -> Result<AnisotropicDensity> {
        let gram = self.integrals(config)?.gram;
        let t = tangents(config)?;
        Ok(AnisotropicDensity {
            theta_alpha: gram.curvature(&t.theta, &t.alpha),
            phi_alpha: gram.curvature(&t.phi, &t.alpha),
        })
    }

    /// Loop phase at fixed α and helicity, split into the circular and
    /// linear parts of the connection.
    pub fn loop_phase(&self, path: &LoopPath, sigma: Helicity, alpha: f64, g: Complex64) -> Result<SplitPhase> {
        let at = |p: &OrientationPoint| self.connection(&TwoFieldConfiguration::at(*p, sigma, alpha, g));
        let circular = integrate_path(path, |p| at(p).map(|c| (c.theta_e, c.phi_e)))?;
        let linear = integrate_path(path, |p| at(p).map(|c| (c.theta_eps, c.phi_eps)))?;
        let total = integrate_path(path, |p| at(p).map(|c| (c.theta(), c.phi())))?;
        Ok(SplitPhase {
            circular: LoopPhase::from_integral(circular),
            linear: LoopPhase::from_integral(linear),
            total: LoopPhase::from_integral(total),
        })
    }

    /// `∬ Ω dθ dφ` over a latitude band (Gauss-Legendre in θ, trapezoid in φ).
    pub fn annulus_flux(
        &self,
        theta1: f64,
        theta2: f64,
        sigma: Helicity,
        alpha: f64,
        g: Complex64,
        resolution: (usize, usize),
    ) -> Result<f64> {
        let (n_theta, n_phi) = resolution;
        let grid = crate::polarization::SphereGrid::annulus(theta1, theta2, n_theta, n_phi, crate::polarization::DEFAULT_POLE_MARGIN)?;
        let values = grid.map(|p| self.density(&TwoFieldConfiguration::at(*p, sigma, alpha, g)))?;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut flux = 0.0;
        for (i, w) in grid.theta_weights.iter().enumerate() {
            let row: f64 = values[i * n_phi..(i + 1) * n_phi].iter().map(|v| v.total.re).sum();
            flux += w * row * dphi;
        }
        Ok(flux)
    }
}

fn split(v: &[Complex64; 6]) -> (ComplexVec3, ComplexVec3) {
    (ComplexVec3([v[0], v[1], v[2]]), ComplexVec3([v[3], v[4], v[5]]))
}

/// `u_θ,i* v_φ,j − u_φ,i* v_θ,j`.
fn mixed_wedge(u_t: &ComplexVec3, u_p: &ComplexVec3, v_t: &ComplexVec3, v_p: &ComplexVec3) -> ComplexMat3 {
    ComplexMat3::from_fn(|i, j| u_t[i].conj() * v_p[j] - u_p[i].conj() * v_t[j])
}

/// Loop phase split by field; `total` is integrated from the summed
/// connection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPhase {
    pub circular: LoopPhase,
    pub linear: LoopPhase,
    pub total: LoopPhase,
}
