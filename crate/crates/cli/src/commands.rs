//! One runner per subcommand. Each validates its inputs, computes, writes
//! its files and finishes with the manifest.

use std::path::Path;
use std::sync::Arc;

use chiral_berry::berry::{BerryGeometry, LoopPath, StokesOptions};
use chiral_berry::molecule::{apply_matrix, propensity_vector, DipoleField};
use chiral_berry::pumpprobe::{one_field_reduction, TwoFieldConfiguration, TwoFieldGeometry, TwoPhotonAmplitudeModel};
use chiral_berry::{Complex64, ComplexVec3, OrientationPoint};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{sha256_hex, OutputSet, ResultManifest};
use crate::verify;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Connection,
    Curvature,
    Phase,
    Pumpprobe,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Connection => "connection",
            Command::Curvature => "curvature",
            Command::Phase => "phase",
            Command::Pumpprobe => "pumpprobe",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub manifest: ResultManifest,
    /// False only when a verification suite failed.
    pub passed: bool,
}

/// Threshold on the pump-probe one-field reduction residual.
pub const REDUCTION_TOL: f64 = 1e-10;

/// Threshold on the pseudovector-law residual.
pub const PSEUDOVECTOR_TOL: f64 = 1e-8;

pub fn config_hash(config: &RunConfig) -> String {
    sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
}

/// Runs `command`. All numeric work happens before the output directory is
/// created, so a failing run leaves no files behind.
pub fn run_command(command: Command, config: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    config.validate()?;
    let mut passed = true;
    let writer: Writer = match command {
        Command::Connection => connection(config)?,
        Command::Curvature => curvature(config)?,
        Command::Phase => phase(config)?,
        Command::Pumpprobe => pumpprobe(config)?,
        Command::Verify => {
            let report = verify::run_all(config)?;
            passed = report.passed;
            Box::new(move |out| out.json("verify.json", &report))
        }
    };
    let mut out = OutputSet::create(out_dir)?;
    writer(&mut out)?;
    let manifest = out.finish(command.name(), &config_hash(config), config.seed)?;
    Ok(Outcome { manifest, passed })
}

type Writer = Box<dyn FnOnce(&mut OutputSet) -> Result<(), CliError>>;

fn connection(config: &RunConfig) -> Result<Writer, CliError> {
    let model = config.model()?;
    let geometry = BerryGeometry::new(&*model, &config.rule())?;
    let grid = config.grid()?;
    let samples = geometry.connection_grid(&grid, config.helicity())?;
    let a_theta: Vec<Complex64> = samples.iter().map(|s| s.a_theta).collect();
    let a_phi: Vec<Complex64> = samples.iter().map(|s| s.a_phi).collect();
    Ok(Box::new(move |out| {
        out.grid("connection_a_theta.csv", &grid, &a_theta, "a_theta")?;
        out.grid("connection_a_phi.csv", &grid, &a_phi, "a_phi")
    }))
}

fn curvature(config: &RunConfig) -> Result<Writer, CliError> {
    let model = config.model()?;
    let rule = config.rule();
    let geometry = BerryGeometry::new(&*model, &rule)?;
    let tensor = geometry.curvature_tensor();
    let propensity = propensity_vector(&*model, &rule)?;
    let grid = config.grid()?;
    let sigma = config.helicity();
    let channels = geometry.density_grid(&grid, sigma)?;
    let direct = grid.map(|p| geometry.direct_density(p, sigma))?;
    Ok(Box::new(move |out| {
        out.tensors("curvature_tensor.csv", &[("q", tensor.q), ("i_q_reconstructed", tensor.reconstruct())])?;
        out.vectors(
            "curvature_vectors.csv",
            &[
                ("antisym", tensor.antisym_vector),
                ("diamond", tensor.diamond_vector),
                ("diagonal", tensor.diagonal_vector),
                ("propensity", propensity),
            ],
        )?;
        let pick = |f: fn(&chiral_berry::DensityChannels) -> Complex64| channels.iter().map(f).collect::<Vec<_>>();
        out.grid("density_xi.csv", &grid, &pick(|c| c.xi), "xi")?;
        out.grid("density_zeta.csv", &grid, &pick(|c| c.zeta), "zeta")?;
        out.grid("density_chi.csv", &grid, &pick(|c| c.chi), "chi")?;
        out.grid("density_total.csv", &grid, &direct, "total")
    }))
}

#[derive(Debug, Serialize)]
struct PhaseRow {
    #[serde(rename = "loop")]
    kind: &'static str,
    theta0: Option<f64>,
    sigma: i32,
    segments: usize,
    raw: f64,
    principal: f64,
    imaginary: f64,
    /// `2πσ q|Ẽ|² cosθ₀` for isotropic models.
    analytic: Option<f64>,
}

#[derive(Debug, Serialize)]
struct StokesRow {
    theta1: f64,
    theta2: f64,
    sigma: i32,
    inner: f64,
    outer: f64,
    flux: f64,
    residual: f64,
}

fn phase(config: &RunConfig) -> Result<Writer, CliError> {
    let model = config.model()?;
    let geometry = BerryGeometry::new(&*model, &config.rule())?;
    let sigma = config.helicity();
    let margin = config.grid.pole_margin;
    let segments = config.phase.segments;
    let iso = config.isotropic_strength().filter(|_| config.model.transform.is_none());
    let mut rows = Vec::new();
    for theta0 in config.latitudes() {
        let ph = geometry.loop_phase(&LoopPath::latitude(theta0, segments, margin)?, sigma)?;
        rows.push(PhaseRow {
            kind: "latitude",
            theta0: Some(theta0),
            sigma: sigma.as_i32(),
            segments,
            raw: ph.raw,
            principal: ph.principal,
            imaginary: ph.imaginary,
            analytic: iso.map(|q| 2.0 * std::f64::consts::PI * sigma.sign() * q * theta0.cos()),
        });
    }
    if let Some(points) = &config.phase.path {
        let pts = points
            .iter()
            .map(|[t, p]| OrientationPoint::new(t.radians(), p.radians()).with_pole_margin(margin))
            .collect::<Vec<_>>();
        let n = pts.len() - 1;
        let ph = geometry.loop_phase(&LoopPath::new(pts)?, sigma)?;
        rows.push(PhaseRow {
            kind: "path",
            theta0: None,
            sigma: sigma.as_i32(),
            segments: n,
            raw: ph.raw,
            principal: ph.principal,
            imaginary: ph.imaginary,
            analytic: None,
        });
    }
    let stokes = match &config.phase.annulus {
        None => None,
        Some(a) => {
            let options = StokesOptions { n_theta: a.n_theta, n_phi: a.n_phi, loop_segments: segments, pole_margin: margin };
            let r = geometry.stokes(a.theta1.radians(), a.theta2.radians(), sigma, &options)?;
            Some(StokesRow {
                theta1: r.theta1,
                theta2: r.theta2,
                sigma: sigma.as_i32(),
                inner: r.inner,
                outer: r.outer,
                flux: r.flux,
                residual: r.residual,
            })
        }
    };
    Ok(Box::new(move |out| {
        out.rows("phase.csv", &rows)?;
        match stokes {
            Some(s) => out.rows("stokes.csv", &[s]),
            None => Ok(()),
        }
    }))
}

fn json_vec(v: &ComplexVec3) -> [[f64; 2]; 3] {
    v.0.map(|c| [c.re, c.im])
}

#[derive(Debug, Serialize)]
struct PseudovectorReport {
    determinant: f64,
    omega_e_untransformed: [[f64; 2]; 3],
    omega_e: [[f64; 2]; 3],
    expected: [[f64; 2]; 3],
    residual: f64,
    threshold: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct PumpProbeReport {
    theta: f64,
    phi: f64,
    sigma: i32,
    alpha: f64,
    ordering: crate::config::OrderingSpec,
    coupling: f64,
    reduction_residual: f64,
    reduction_threshold: f64,
    reduction_pass: bool,
    omega_e: [[f64; 2]; 3],
    omega_eps: [[f64; 2]; 3],
    cross_vector: [[f64; 2]; 3],
    one_field_antisym: [[f64; 2]; 3],
    pseudovector: Option<PseudovectorReport>,
}

fn pumpprobe(config: &RunConfig) -> Result<Writer, CliError> {
    let model = config.model()?;
    let rule = config.rule();
    let d = config.bound_dipole();
    let ordering = config.field.ordering.into();
    let two = TwoPhotonAmplitudeModel::new(Arc::clone(&model), d).with_ordering(ordering);
    let geometry = TwoFieldGeometry::new(&two, &rule)?;
    let sigma = config.helicity();
    let alpha = config.field.alpha.radians();
    let g = config.field.g.value();
    let anchor = config.anchor();
    let at = |p: &OrientationPoint| TwoFieldConfiguration::at(*p, sigma, alpha, g);

    let integrals = geometry.integrals(&at(&anchor))?;
    let blocks = chiral_berry::pumpprobe::CurvatureBlocks::from_gram(&integrals.gram);
    let reduction = if model.spectral_amplitude().norm_sqr() > 0.0 {
        Some(one_field_reduction(&two, &rule, &at(&anchor))?)
    } else {
        None
    };

    let pseudovector = match config.transform_matrix()? {
        None => None,
        Some(m) => {
            let base: Arc<dyn DipoleField> = Arc::new(config.harmonic_model());
            let base_two = TwoPhotonAmplitudeModel::new(base, d).with_ordering(ordering);
            let reference = chiral_berry::pumpprobe::curvature_blocks(&base_two, &rule, &at(&anchor))?.omega_e;
            let det = m.determinant();
            let expected = apply_matrix(&m, &reference) * det;
            let residual = blocks.omega_e.max_abs_diff(&expected);
            Some(PseudovectorReport {
                determinant: det,
                omega_e_untransformed: json_vec(&reference),
                omega_e: json_vec(&blocks.omega_e),
                expected: json_vec(&expected),
                residual,
                threshold: PSEUDOVECTOR_TOL,
                pass: residual < PSEUDOVECTOR_TOL,
            })
        }
    };

    let grid = config.grid()?;
    let connection = grid.map(|p| geometry.connection(&at(p)))?;
    let density = grid.map(|p| geometry.density(&at(p)))?;

    let (coupling, residual, one_field) = match &reduction {
        Some(r) => (r.coupling, r.residual, r.one_field),
        None => (0.0, blocks.omega_e.norm(), ComplexVec3::ZERO),
    };
    let report = PumpProbeReport {
        theta: anchor.theta,
        phi: anchor.phi,
        sigma: sigma.as_i32(),
        alpha,
        ordering: config.field.ordering,
        coupling,
        reduction_residual: residual,
        reduction_threshold: REDUCTION_TOL,
        reduction_pass: residual < REDUCTION_TOL,
        omega_e: json_vec(&blocks.omega_e),
        omega_eps: json_vec(&blocks.omega_eps),
        cross_vector: json_vec(&blocks.cross_vector),
        one_field_antisym: json_vec(&one_field),
        pseudovector,
    };

    Ok(Box::new(move |out| {
        let c = integrals.connection;
        out.vectors(
            "pumpprobe_vectors.csv",
            &[
                ("a_e", c.a_e),
                ("a_eps", c.a_eps),
                ("omega_e", blocks.omega_e),
                ("omega_eps", blocks.omega_eps),
                ("cross_vector", blocks.cross_vector),
                ("one_field_antisym", one_field),
            ],
        )?;
        out.tensors(
            "pumpprobe_tensors.csv",
            &[
                ("cross", blocks.cross_tensor),
                ("gram_circular", integrals.gram.circular()),
                ("gram_linear", integrals.gram.linear()),
            ],
        )?;
        let col = |f: &dyn Fn(&chiral_berry::pumpprobe::PulledBackConnection) -> Complex64| {
            connection.iter().map(f).collect::<Vec<_>>()
        };
        out.grid("pumpprobe_a_theta_e.csv", &grid, &col(&|c| c.theta_e), "a_theta_e")?;
        out.grid("pumpprobe_a_theta_eps.csv", &grid, &col(&|c| c.theta_eps), "a_theta_eps")?;
        out.grid("pumpprobe_a_phi_e.csv", &grid, &col(&|c| c.phi_e), "a_phi_e")?;
        out.grid("pumpprobe_a_phi_eps.csv", &grid, &col(&|c| c.phi_eps), "a_phi_eps")?;
        let dens = |f: &dyn Fn(&chiral_berry::pumpprobe::TwoFieldDensity) -> Complex64| {
            density.iter().map(f).collect::<Vec<_>>()
        };
        out.grid("pumpprobe_density_circular.csv", &grid, &dens(&|d| d.circular.total), "circular")?;
        out.grid("pumpprobe_density_linear.csv", &grid, &dens(&|d| d.linear.total), "linear")?;
        out.grid("pumpprobe_density_cross.csv", &grid, &dens(&|d| d.cross), "cross")?;
        out.grid("pumpprobe_density_total.csv", &grid, &dens(&|d| d.total), "total")?;
        out.json("pumpprobe_report.json", &report)
    }))
}
