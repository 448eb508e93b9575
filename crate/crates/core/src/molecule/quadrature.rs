//! Product quadrature on the photoelectron sphere: Gauss-Legendre in
//! `cosθ_k` times the periodic trapezoid in `φ_k`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A quadrature rule on the unit sphere, exact for polynomials in the
/// Cartesian coordinates (equivalently spherical harmonics) of total degree
/// up to `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Skip the band-limit exactness guard.
    pub allow_underresolved: bool,
}

impl QuadratureRule {
    pub fn with_degree(degree: usize) -> Self {
        let n_theta = degree / 2 + 1;
        let n_phi = degree + 1;
        let (x, w) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for (ct, wt) in x.iter().zip(&w) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..n_phi {
                let (sp, cp) = (j as f64 * dphi).sin_cos();
                nodes.push([st * cp, st * sp, *ct]);
                weights.push(wt * dphi);
            }
        }
        QuadratureRule { degree, nodes, weights, allow_underresolved: false }
    }

    /// Default rule for a band limit: degree `2·l_max + 2`.
    pub fn for_band_limit(l_max: usize) -> Self {
        Self::with_degree(2 * l_max + 2)
    }

    pub fn allowing_underresolved(mut self) -> Self {
        self.allow_underresolved = true;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Minimum degree for exact Gram integrals of a band-limited dipole.
    pub fn required_degree(l_max: usize) -> usize {
        2 * l_max + 1
    }

    pub fn ensure_resolves(&self, band_limit: Option<usize>) -> Result<()> {
        match band_limit {
            Some(l_max) if !self.allow_underresolved && self.degree < Self::required_degree(l_max) => {
                Err(Error::QuadratureUnderResolved { degree: self.degree, required: Self::required_degree(l_max), l_max })
            }
            _ => Ok(()),
        }
    }
}
