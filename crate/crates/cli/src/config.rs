//! JSON run configuration.
//!
//! Every section is optional; an empty object `{}` runs the chiral demo model
//! with the default grid. Angles are radians unless given as
//! `{"value": 60, "unit": "deg"}`; complex numbers are `[re, im]` or a bare
//! real number.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chiral_berry::molecule::{transform_model, DipoleField, HarmonicDipoleModel, QuadratureRule};
use chiral_berry::pumpprobe::FieldOrdering;
use chiral_berry::{Complex64, ComplexVec3, Helicity, OrientationPoint, SphereGrid};
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Smallest grid, loop and annulus resolution accepted.
pub const MIN_RESOLUTION: usize = 8;

/// Largest band limit accepted for harmonic and random models.
pub const MAX_L: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Radians(f64),
    Tagged { value: f64, unit: AngleUnit },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Rad,
    Deg,
}

impl AngleSpec {
    pub fn radians(&self) -> f64 {
        match *self {
            AngleSpec::Radians(x) | AngleSpec::Tagged { value: x, unit: AngleUnit::Rad } => x,
            AngleSpec::Tagged { value, unit: AngleUnit::Deg } => value.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexSpec {
    pub fn value(&self) -> Complex64 {
        match *self {
            ComplexSpec::Real(x) => Complex64::new(x, 0.0),
            ComplexSpec::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    /// Cartesian component of `D`: 0, 1, 2 for x, y, z.
    pub component: usize,
    pub l: usize,
    pub m: i32,
    pub value: ComplexSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    ChiralDemo,
    Isotropic { q: f64 },
    Zero { l_max: usize },
    /// Uniform random coefficients drawn from the run seed.
    Random { l_max: usize },
    Harmonic { l_max: usize, coefficients: Vec<CoefficientSpec> },
}

/// Orthogonal map applied as `D'(k̂) = M D(Mᵀk̂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransformSpec {
    Matrix { matrix: [[f64; 3]; 3] },
    /// Rotation about `axis`; `invert` composes it with the inversion `−1`.
    AxisAngle {
        axis: [f64; 3],
        angle: AngleSpec,
        #[serde(default)]
        invert: bool,
    },
    /// Mirror through the plane with the given normal.
    Reflection { normal: [f64; 3] },
}

impl TransformSpec {
    pub fn matrix(&self) -> Result<Matrix3<f64>, CliError> {
        match self {
            TransformSpec::Matrix { matrix } => Ok(Matrix3::from_fn(|i, j| matrix[i][j])),
            TransformSpec::AxisAngle { axis, angle, invert } => {
                let axis = unit_axis(axis)?;
                let r = *Rotation3::from_axis_angle(&axis, angle.radians()).matrix();
                Ok(if *invert { -r } else { r })
            }
            TransformSpec::Reflection { normal } => {
                let n = unit_axis(normal)?;
                Ok(Matrix3::identity() - 2.0 * n.into_inner() * n.transpose())
            }
        }
    }
}

fn unit_axis(v: &[f64; 3]) -> Result<Unit<Vector3<f64>>, CliError> {
    Unit::try_new(Vector3::from(*v), 1e-12)
        .ok_or_else(|| CliError::Config(format!("axis {v:?} must be a nonzero vector")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub e_tilde: ComplexSpec,
    #[serde(default)]
    pub transform: Option<TransformSpec>,
}

fn one() -> ComplexSpec {
    ComplexSpec::Real(1.0)
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { kind: ModelKind::ChiralDemo, e_tilde: one(), transform: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderingSpec {
    #[default]
    LinearFirst,
    CircularFirst,
}

impl From<OrderingSpec> for FieldOrdering {
    fn from(o: OrderingSpec) -> Self {
        match o {
            OrderingSpec::LinearFirst => FieldOrdering::LinearFirst,
            OrderingSpec::CircularFirst => FieldOrdering::CircularFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub theta: AngleSpec,
    pub phi: AngleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    /// `+1` or `−1`.
    pub helicity: i32,
    /// Linear-field angle in the `(θ̂, φ̂)` plane.
    pub alpha: AngleSpec,
    /// Two-photon spectral factor.
    pub g: ComplexSpec,
    /// Bound-bound dipole of the two-photon model.
    pub d: [ComplexSpec; 3],
    pub ordering: OrderingSpec,
    /// Orientation at which pump-probe vectors and tensors are reported.
    pub anchor: AnchorSpec,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec {
            helicity: 1,
            alpha: AngleSpec::Radians(0.0),
            g: one(),
            d: [ComplexSpec::Real(0.0), ComplexSpec::Real(0.0), ComplexSpec::Real(1.0)],
            ordering: OrderingSpec::LinearFirst,
            anchor: AnchorSpec { theta: AngleSpec::Radians(PI / 3.0), phi: AngleSpec::Radians(PI / 4.0) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Cell-centred θ, uniform φ.
    #[default]
    Uniform,
    /// Gauss-Legendre nodes in cosθ, uniform φ.
    GaussLegendre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
    pub pole_margin: f64,
    pub kind: GridKind,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_theta: 32, n_phi: 64, pole_margin: chiral_berry::polarization::DEFAULT_POLE_MARGIN, kind: GridKind::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Defaults to `2·l_max + 2`.
    pub degree: Option<usize>,
    pub allow_underresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnulusSpec {
    pub theta1: AngleSpec,
    pub theta2: AngleSpec,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for AnnulusSpec {
    fn default() -> Self {
        AnnulusSpec {
            theta1: AngleSpec::Radians(PI / 4.0),
            theta2: AngleSpec::Radians(PI / 2.0),
            n_theta: 256,
            n_phi: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSpec {
    /// Latitude loops, traversed with increasing φ.
    pub latitudes: Vec<AngleSpec>,
    /// Additional evenly spaced latitudes strictly inside the pole margins.
    pub sweep: Option<usize>,
    pub segments: usize,
    /// Optional closed polyline of `[θ, φ]` points.
    pub path: Option<Vec<[AngleSpec; 2]>>,
    pub annulus: Option<AnnulusSpec>,
}

impl Default for PhaseSpec {
    fn default() -> Self {
        PhaseSpec {
            latitudes: vec![AngleSpec::Radians(PI / 3.0)],
            sweep: None,
            segments: chiral_berry::berry::DEFAULT_LOOP_SEGMENTS,
            path: None,
            annulus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DebugSpec {
    /// Replace the amplitude by its anti-holomorphic counterpart in the
    /// holomorphy suite.
    pub anti_holomorphic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub field: FieldSpec,
    pub grid: GridSpec,
    pub quadrature: QuadratureSpec,
    pub phase: PhaseSpec,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub debug: DebugSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let g = &self.grid;
        if g.n_theta < MIN_RESOLUTION || g.n_phi < MIN_RESOLUTION {
            return bad(format!("grid resolution {}×{} is below {MIN_RESOLUTION}", g.n_theta, g.n_phi));
        }
        if !(g.pole_margin > 0.0 && g.pole_margin < PI / 4.0) {
            return bad(format!("pole_margin {} must lie in (0, π/4)", g.pole_margin));
        }
        if self.phase.segments < MIN_RESOLUTION {
            return bad(format!("loop segments {} is below {MIN_RESOLUTION}", self.phase.segments));
        }
        if let Some(n) = self.phase.sweep {
            if n == 0 {
                return bad("phase sweep needs at least one latitude".into());
            }
        }
        if let Some(a) = &self.phase.annulus {
            if a.n_theta < MIN_RESOLUTION || a.n_phi < MIN_RESOLUTION {
                return bad(format!("annulus resolution {}×{} is below {MIN_RESOLUTION}", a.n_theta, a.n_phi));
            }
        }
        if let Some(path) = &self.phase.path {
            if path.len() < 2 {
                return bad("phase path needs at least two points".into());
            }
        }
        if self.field.helicity != 1 && self.field.helicity != -1 {
            return bad(format!("helicity must be +1 or -1, got {}", self.field.helicity));
        }
        let finite = |c: &ComplexSpec| c.value().re.is_finite() && c.value().im.is_finite();
        if !finite(&self.model.e_tilde) || !finite(&self.field.g) || !self.field.d.iter().all(finite) {
            return bad("complex parameters must be finite".into());
        }
        match &self.model.kind {
            ModelKind::Isotropic { q } if !(*q >= 0.0 && q.is_finite()) => {
                return bad(format!("isotropic q must be a finite non-negative number, got {q}"))
            }
            ModelKind::Zero { l_max } | ModelKind::Random { l_max } | ModelKind::Harmonic { l_max, .. }
                if *l_max > MAX_L =>
            {
                return bad(format!("l_max {l_max} exceeds {MAX_L}"))
            }
            ModelKind::Harmonic { l_max, coefficients } => {
                for c in coefficients {
                    if c.component > 2 || c.l > *l_max || c.m.unsigned_abs() as usize > c.l || !finite(&c.value) {
                        return bad(format!("coefficient {c:?} is outside the table with l_max {l_max}"));
                    }
                }
            }
            _ => {}
        }
        if let Some(t) = &self.model.transform {
            t.matrix()?;
        }
        Ok(())
    }

    pub fn helicity(&self) -> Helicity {
        if self.field.helicity < 0 {
            Helicity::Minus
        } else {
            Helicity::Plus
        }
    }

    /// The harmonic model before any transform.
    pub fn harmonic_model(&self) -> HarmonicDipoleModel {
        let model = match &self.model.kind {
            ModelKind::ChiralDemo => HarmonicDipoleModel::chiral_demo(),
            ModelKind::Isotropic { q } => HarmonicDipoleModel::isotropic(*q),
            ModelKind::Zero { l_max } => HarmonicDipoleModel::zero(*l_max),
            ModelKind::Random { l_max } => {
                HarmonicDipoleModel::random(*l_max, &mut rand_chacha::ChaCha8Rng::seed_from_u64(self.seed))
            }
            ModelKind::Harmonic { l_max, coefficients } => {
                let mut m = HarmonicDipoleModel::zero(*l_max);
                for c in coefficients {
                    m.set(c.component, c.l, c.m, c.value.value()).expect("validated");
                }
                m
            }
        };
        model.with_spectral_amplitude(self.model.e_tilde.value())
    }

    /// The configured dipole field, transformed when requested.
    pub fn model(&self) -> Result<Arc<dyn DipoleField>, CliError> {
        let base: Arc<dyn DipoleField> = Arc::new(self.harmonic_model());
        match &self.model.transform {
            None => Ok(base),
            Some(t) => Ok(Arc::new(transform_model(base, t.matrix()?)?)),
        }
    }

    pub fn transform_matrix(&self) -> Result<Option<Matrix3<f64>>, CliError> {
        self.model.transform.as_ref().map(|t| t.matrix()).transpose()
    }

    pub fn quadrature(&self, l_max: usize) -> QuadratureRule {
        let degree = self.quadrature.degree.unwrap_or(2 * l_max + 2);
        let rule = QuadratureRule::with_degree(degree);
        if self.quadrature.allow_underresolved {
            rule.allowing_underresolved()
        } else {
            rule
        }
    }

    pub fn rule(&self) -> QuadratureRule {
        self.quadrature(self.harmonic_model().l_max())
    }

    pub fn grid(&self) -> Result<SphereGrid, CliError> {
        let g = &self.grid;
        Ok(match g.kind {
            GridKind::Uniform => SphereGrid::uniform(g.n_theta, g.n_phi, g.pole_margin)?,
            GridKind::GaussLegendre => SphereGrid::gauss_legendre(g.n_theta, g.n_phi, g.pole_margin)?,
        })
    }

    pub fn bound_dipole(&self) -> ComplexVec3 {
        ComplexVec3(self.field.d.map(|c| c.value()))
    }

    pub fn anchor(&self) -> OrientationPoint {
        OrientationPoint::new(self.field.anchor.theta.radians(), self.field.anchor.phi.radians())
            .with_pole_margin(self.grid.pole_margin)
    }

    /// Configured latitudes followed by the sweep, in radians.
    pub fn latitudes(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.phase.latitudes.iter().map(AngleSpec::radians).collect();
        if let Some(n) = self.phase.sweep {
            let m = self.grid.pole_margin;
            let span = PI - 2.0 * m;
            out.extend((0..n).map(|i| m + span * (i as f64 + 0.5) / n as f64));
        }
        out
    }

    /// `q·|Ẽ|²` when the connection is known in closed form.
    pub fn isotropic_strength(&self) -> Option<f64> {
        match self.model.kind {
            ModelKind::Isotropic { q } => Some(q * self.model.e_tilde.value().norm_sqr()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_demo() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.model.kind, ModelKind::ChiralDemo);
        assert_eq!(c.grid.n_theta, 32);
        assert_eq!(c.rule().degree, 6);
        assert_eq!(c.latitudes(), vec![PI / 3.0]);
    }

    #[test]
    fn angles_and_complex_values() {
        let c = RunConfig::from_json(
            r#"{"field": {"alpha": {"value": 90, "unit": "deg"}, "g": [0.5, -1], "d": [1, [0, 1], 0], "helicity": -1},
                "phase": {"latitudes": [1.0, {"value": 60, "unit": "deg"}]}}"#,
        )
        .unwrap();
        assert!((c.field.alpha.radians() - PI / 2.0).abs() < 1e-15);
        assert_eq!(c.field.g.value(), Complex64::new(0.5, -1.0));
        assert_eq!(c.bound_dipole()[1], Complex64::new(0.0, 1.0));
        assert_eq!(c.helicity(), Helicity::Minus);
        assert!((c.latitudes()[1] - PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn models() {
        let c = RunConfig::from_json(
            r#"{"model": {"kind": "harmonic", "l_max": 1, "coefficients": [{"component": 2, "l": 1, "m": -1, "value": [0, 2]}],
                          "e_tilde": 0.5}}"#,
        )
        .unwrap();
        let m = c.harmonic_model();
        assert_eq!(m.get(2, 1, -1).unwrap(), Complex64::new(0.0, 2.0));
        assert_eq!(m.e_tilde, Complex64::new(0.5, 0.0));
        assert_eq!(c.isotropic_strength(), None);

        let iso = RunConfig::from_json(r#"{"model": {"kind": "isotropic", "q": 2, "e_tilde": 3}}"#).unwrap();
        assert_eq!(iso.isotropic_strength(), Some(18.0));

        let r1 = RunConfig::from_json(r#"{"model": {"kind": "random", "l_max": 2}, "seed": 4}"#).unwrap();
        let r2 = r1.clone();
        assert_eq!(r1.harmonic_model(), r2.harmonic_model());
    }

    #[test]
    fn transforms() {
        let c = RunConfig::from_json(r#"{"model": {"kind": "chiral_demo", "transform": {"normal": [0, 1, 0]}}}"#).unwrap();
        let m = c.transform_matrix().unwrap().unwrap();
        assert_eq!(m, Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0)));
        let c = RunConfig::from_json(
            r#"{"model": {"kind": "zero", "l_max": 1, "transform": {"axis": [0, 0, 2], "angle": {"value": 90, "unit": "deg"}, "invert": true}}}"#,
        )
        .unwrap();
        let m = c.transform_matrix().unwrap().unwrap();
        assert!((m.determinant() + 1.0).abs() < 1e-14);
        assert!((m[(0, 1)] - 1.0).abs() < 1e-15);
        let bad = RunConfig::from_json(r#"{"model": {"kind": "zero", "l_max": 1, "transform": {"matrix": [[1,1,0],[0,1,0],[0,0,1]]}}}"#)
            .unwrap();
        assert!(matches!(bad.model(), Err(CliError::Numeric(_))));
    }

    #[test]
    fn validation_errors() {
        for text in [
            "{",
            r#"{"grid": {"n_theta": 4}}"#,
            r#"{"grid": {"bogus": 1}}"#,
            r#"{"phase": {"segments": 3}}"#,
            r#"{"field": {"helicity": 0}}"#,
            r#"{"model": {"kind": "isotropic", "q": -1}}"#,
            r#"{"model": {"kind": "harmonic", "l_max": 1, "coefficients": [{"component": 0, "l": 2, "m": 0, "value": 1}]}}"#,
            r#"{"model": {"kind": "chiral_demo", "transform": {"axis": [0, 0, 0], "angle": 1}}}"#,
            r#"{"model": {"kind": "octopus"}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn sweep_stays_inside_margins() {
        let c = RunConfig::from_json(r#"{"phase": {"latitudes": [], "sweep": 5}}"#).unwrap();
        let l = c.latitudes();
        assert_eq!(l.len(), 5);
        assert!(l.iter().all(|t| *t > c.grid.pole_margin && *t < PI - c.grid.pole_margin));
    }
}
