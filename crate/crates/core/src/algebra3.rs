//! Complex 3-vectors, the Levi-Civita symbol and the three bilinear
//! products used to vectorize rank-2 tensors in three dimensions.
//!
//! The generic bilinear map `a_i b_j` splits into three disjoint index
//! classes: the antisymmetric off-diagonal pairs picked by `ε` ([`cross`]),
//! the symmetric off-diagonal pairs picked by `|ε|` ([`diamond`]) and the
//! diagonal ([`odot`]).

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

/// Absolute tolerance for identity checks that are exact up to round-off
/// on unit-scale inputs.
pub const IDENTITY_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, PartialEq, Default)]
pub struct ComplexVec3(pub [Complex64; 3]);

impl ComplexVec3 {
    pub const ZERO: ComplexVec3 = ComplexVec3([ZERO; 3]);

    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        ComplexVec3([x, y, z])
    }

    pub fn from_real(v: [f64; 3]) -> Self {
        ComplexVec3(v.map(|c| Complex64::new(c, 0.0)))
    }

    pub fn from_parts(re: [f64; 3], im: [f64; 3]) -> Self {
        ComplexVec3([0, 1, 2].map(|i| Complex64::new(re[i], im[i])))
    }

    /// Cartesian unit vector along axis `i` (0 = x, 1 = y, 2 = z).
    pub fn unit(i: usize) -> Self {
        let mut v = Self::ZERO;
        v.0[i] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn x(&self) -> Complex64 {
        self.0[0]
    }

    pub fn y(&self) -> Complex64 {
        self.0[1]
    }

    pub fn z(&self) -> Complex64 {
        self.0[2]
    }

    pub fn conj(&self) -> Self {
        ComplexVec3(self.0.map(|c| c.conj()))
    }

    pub fn re(&self) -> [f64; 3] {
        self.0.map(|c| c.re)
    }

    pub fn im(&self) -> [f64; 3] {
        self.0.map(|c| c.im)
    }

    /// Real part as a complex vector with zero imaginary components.
    pub fn real_part(&self) -> Self {
        ComplexVec3::from_real(self.re())
    }

    /// `i Im(v)` componentwise.
    pub fn imag_part_i(&self) -> Self {
        ComplexVec3(self.0.map(|c| Complex64::new(0.0, c.im)))
    }

    /// Bilinear dot product `Σ a_i b_i` (no conjugation).
    pub fn dot(&self, other: &Self) -> Complex64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(ZERO, |acc, (a, b)| acc + a * b)
    }

    /// Sesquilinear product `Σ a_i* b_i`.
    pub fn hdot(&self, other: &Self) -> Complex64 {
        self.conj().dot(other)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ComplexVec3(self.0.map(|c| c * s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        ComplexVec3(self.0.map(|c| c * s))
    }

    /// Largest componentwise imaginary magnitude.
    pub fn max_imag(&self) -> f64 {
        self.0.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Largest componentwise real magnitude.
    pub fn max_real(&self) -> f64 {
        self.0.iter().map(|c| c.re.abs()).fold(0.0, f64::max)
    }

    /// Maximum componentwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..3).map(|i| (self.0[i] - other.0[i]).norm()).fold(0.0, f64::max)
    }

    pub fn cross(&self, other: &Self) -> Self {
        cross(self, other)
    }

    pub fn diamond(&self, other: &Self) -> Self {
        diamond(self, other)
    }

    pub fn odot(&self, other: &Self) -> Self {
        odot(self, other)
    }
}

impl fmt::Debug for ComplexVec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

impl Index<usize> for ComplexVec3 {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVec3 {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl Add for ComplexVec3 {
    type Output = ComplexVec3;
    fn add(self, rhs: Self) -> Self {
        ComplexVec3([0, 1, 2].map(|i| self.0[i] + rhs.0[i]))
    }
}

impl AddAssign for ComplexVec3 {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..3 {
            self.0[i] += rhs.0[i];
        }
    }
}

impl Sub for ComplexVec3 {
    type Output = ComplexVec3;
    fn sub(self, rhs: Self) -> Self {
        ComplexVec3([0, 1, 2].map(|i| self.0[i] - rhs.0[i]))
    }
}

impl Neg for ComplexVec3 {
    type Output = ComplexVec3;
    fn neg(self) -> Self {
        ComplexVec3(self.0.map(|c| -c))
    }
}

impl Mul<Complex64> for ComplexVec3 {
    type Output = ComplexVec3;
    fn mul(self, rhs: Complex64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<f64> for ComplexVec3 {
    type Output = ComplexVec3;
    fn mul(self, rhs: f64) -> Self {
        self.scale_re(rhs)
    }
}

/// The Levi-Civita symbol on zero-based indices.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeviCivita;

impl LeviCivita {
    /// `ε_ijk` with `ε_012 = +1`.
    pub fn eval(i: usize, j: usize, k: usize) -> i32 {
        if i == j || j == k || i == k {
            return 0;
        }
        // Cyclic permutations of (0,1,2) are even.
        if (j + 3 - i) % 3 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn abs(i: usize, j: usize, k: usize) -> i32 {
        Self::eval(i, j, k).abs()
    }
}

fn delta(i: usize, j: usize) -> i32 {
    (i == j) as i32
}

/// `(a × b)_l = ε_lij a_i b_j`.
pub fn cross(a: &ComplexVec3, b: &ComplexVec3) -> ComplexVec3 {
    ComplexVec3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

/// `(a ⋄ b)_l = |ε_lij| a_i b_j`.
pub fn diamond(a: &ComplexVec3, b: &ComplexVec3) -> ComplexVec3 {
    ComplexVec3::new(
        a[1] * b[2] + a[2] * b[1],
        a[2] * b[0] + a[0] * b[2],
        a[0] * b[1] + a[1] * b[0],
    )
}

/// `(a ⊙ b)_l = a_l b_l`.
pub fn odot(a: &ComplexVec3, b: &ComplexVec3) -> ComplexVec3 {
    ComplexVec3([0, 1, 2].map(|i| a[i] * b[i]))
}

/// Dense complex 3×3 matrix, row-major.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct ComplexMat3(pub [[Complex64; 3]; 3]);

impl ComplexMat3 {
    pub const ZERO: ComplexMat3 = ComplexMat3([[ZERO; 3]; 3]);

    pub fn identity() -> Self {
        let mut m = Self::ZERO;
        for i in 0..3 {
            m.0[i][i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> Complex64) -> Self {
        ComplexMat3([0, 1, 2].map(|i| [0, 1, 2].map(|j| f(i, j))))
    }

    /// `a_i* b_j`.
    pub fn outer_conj(a: &ComplexVec3, b: &ComplexVec3) -> Self {
        Self::from_fn(|i, j| a[i].conj() * b[j])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[i][j]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + other.0[i][j])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - other.0[i][j])
    }

    /// `(vᵀ M)_j = Σ_i v_i M_ij`.
    pub fn left_mul(&self, v: &ComplexVec3) -> ComplexVec3 {
        ComplexVec3([0, 1, 2].map(|j| (0..3).fold(ZERO, |acc, i| acc + v[i] * self.0[i][j])))
    }

    /// `(M v)_i = Σ_j M_ij v_j`.
    pub fn mul_vec(&self, v: &ComplexVec3) -> ComplexVec3 {
        ComplexVec3([0, 1, 2].map(|i| (0..3).fold(ZERO, |acc, j| acc + self.0[i][j] * v[j])))
    }

    /// Full contraction `Σ_ij M_ij K_ij`.
    pub fn contract(&self, other: &Self) -> Complex64 {
        let mut acc = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.0[i][j] * other.0[i][j];
            }
        }
        acc
    }

    /// `v_l = ε_lij M_ij`.
    pub fn epsilon_contract(&self) -> ComplexVec3 {
        ComplexVec3::new(
            self.0[1][2] - self.0[2][1],
            self.0[2][0] - self.0[0][2],
            self.0[0][1] - self.0[1][0],
        )
    }

    /// `v_l = |ε_lij| M_ij`.
    pub fn abs_epsilon_contract(&self) -> ComplexVec3 {
        ComplexVec3::new(
            self.0[1][2] + self.0[2][1],
            self.0[2][0] + self.0[0][2],
            self.0[0][1] + self.0[1][0],
        )
    }

    pub fn diagonal(&self) -> ComplexVec3 {
        ComplexVec3([0, 1, 2].map(|i| self.0[i][i]))
    }

    /// Maximum entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// `max |M − M†|`.
    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Eigenvalues of the Hermitian part `(M + M†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> [f64; 3] {
        let h = self.add(&self.adjoint()).scale(Complex64::new(0.5, 0.0));
        let m = nalgebra::Matrix3::from_fn(|i, j| h.0[i][j]);
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl fmt::Debug for ComplexMat3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for row in &self.0 {
            writeln!(f, "  [{}, {}, {}]", row[0], row[1], row[2])?;
        }
        write!(f, "]")
    }
}

/// One evaluated tuple of an index identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityTuple {
    pub indices: [usize; 4],
    pub lhs: i32,
    pub rhs: i32,
}

/// Evaluates `Σ_n |ε_nij||ε_nlm|` against `(1−δ_ij)(δ_il δ_jm + δ_im δ_jl)`
/// on all 81 index tuples.
pub fn symmetrized_levi_civita_table() -> Vec<IdentityTuple> {
    index_tuples()
        .map(|[i, j, l, m]| {
            let lhs = (0..3)
                .map(|n| LeviCivita::abs(n, i, j) * LeviCivita::abs(n, l, m))
                .sum();
            let rhs = (1 - delta(i, j)) * (delta(i, l) * delta(j, m) + delta(i, m) * delta(j, l));
            IdentityTuple { indices: [i, j, l, m], lhs, rhs }
        })
        .collect()
}

/// True iff the symmetrized (absolute-value) Levi-Civita lemma holds on
/// every index tuple.
pub fn symmetrized_levi_civita_identity_check() -> bool {
    symmetrized_levi_civita_table().iter().all(|t| t.lhs == t.rhs)
}

/// Evaluates `Σ_n ε_nij ε_nlm` against `δ_il δ_jm − δ_im δ_jl`.
pub fn signed_levi_civita_table() -> Vec<IdentityTuple> {
    index_tuples()
        .map(|[i, j, l, m]| {
            let lhs = (0..3)
                .map(|n| LeviCivita::eval(n, i, j) * LeviCivita::eval(n, l, m))
                .sum();
            let rhs = delta(i, l) * delta(j, m) - delta(i, m) * delta(j, l);
            IdentityTuple { indices: [i, j, l, m], lhs, rhs }
        })
        .collect()
}

pub fn signed_levi_civita_identity_check() -> bool {
    signed_levi_civita_table().iter().all(|t| t.lhs == t.rhs)
}

fn index_tuples() -> impl Iterator<Item = [usize; 4]> {
    (0..81).map(|n| [n / 27, (n / 9) % 3, (n / 3) % 3, n % 3])
}

/// Both sides of `T_ij K_ij = ½ ε_nij ε_nlm T_ij K_lm`.
pub fn contraction_identity_sides(t: &ComplexMat3, k: &ComplexMat3) -> (Complex64, Complex64) {
    let lhs = t.contract(k);
    let mut rhs = ZERO;
    for n in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    for m in 0..3 {
                        let e = LeviCivita::eval(n, i, j) * LeviCivita::eval(n, l, m);
                        if e != 0 {
                            rhs += t.0[i][j] * k.0[l][m] * (0.5 * e as f64);
                        }
                    }
                }
            }
        }
    }
    (lhs, rhs)
}

/// Largest `|lhs − rhs|` of the antisymmetric contraction identity over
/// `trials` random antisymmetric `T` and arbitrary `K`.
pub fn contraction_identity_residual<R: rand::Rng + ?Sized>(rng: &mut R, trials: usize) -> f64 {
    let mut worst: f64 = 0.0;
    let sample = |rng: &mut R| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    for _ in 0..trials {
        let mut t = ComplexMat3::ZERO;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let v = sample(rng);
            t.0[i][j] = v;
            t.0[j][i] = -v;
        }
        let mut k = ComplexMat3::ZERO;
        for row in k.0.iter_mut() {
            for c in row.iter_mut() {
                *c = sample(rng);
            }
        }
        let (lhs, rhs) = contraction_identity_sides(&t, &k);
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

/// True iff the antisymmetric contraction identity holds to
/// [`IDENTITY_TOL`] on at least 100 random trials.
pub fn contraction_identity_check<R: rand::Rng + ?Sized>(rng: &mut R) -> bool {
    contraction_identity_residual(rng, 100) < IDENTITY_TOL
}
