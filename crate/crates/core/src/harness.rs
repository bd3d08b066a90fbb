//! Configuration-driven experiment runs: oracle studies, single solves, L-sweeps
//! and NtD dumps, with their CSV and summary outputs.
//!
//! Every run collects per-point failures instead of aborting; callers turn a
//! non-empty failure list into a partial-success exit status.

use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use ini::Ini;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::asymptotics::{fit_decay, DecayFit, ErrorCurve};
use crate::geometry::{PmlProfile, Point, ProfileKind, SurfaceKind, SurfaceSpec};
use crate::linalg::eigenvalues;
use crate::ntd::{assemble_cell_ntd, lateral_operators, RiccatiOptions};
use crate::quadrature::QuadOptions;
use crate::solver::{
    extract_source, h1_relative_error, solve, Cutoff, FieldGrid, Rect, SolveConfig, SolveReport, REGION_SAMPLES,
};
use crate::spectral::{w0_field, w1_field, OracleParams};
use crate::{PmlError, Result};

/// Problem geometry and wavenumber for `solve` and `ntd`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub surface: SurfaceKind,
    pub wavenumber: f64,
    pub source: Point,
    /// Recorded for provenance only; no computation reads it.
    pub s_param: f64,
}

/// PML band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlSection {
    pub pml_start: f64,
    pub thickness: f64,
    pub sigma_max: f64,
    pub profile: ProfileKind,
}

/// Discretization and solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationSection {
    pub resolution: usize,
    pub lateral_cells: usize,
    pub window: f64,
    pub cutoff: Cutoff,
    pub riccati: RiccatiOptions,
}

/// L-sweep lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub k_values: Vec<f64>,
    pub l_values: Vec<f64>,
    /// Thickness of the reference run; defaults to 1.5 × the largest swept L.
    pub reference_l: Option<f64>,
    /// E_rel at or below this level counts as the numerical floor in fits.
    pub floor: f64,
}

/// Oracle study at P̃ = P(1 + i·p_slope).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSection {
    pub k_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub p_slope: f64,
    pub point: Point,
    pub x2_star: f64,
    /// Relative quadrature tolerance.
    pub tol: f64,
}

/// Parsed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub pml: PmlSection,
    pub discretization: DiscretizationSection,
    pub region: Rect,
    pub sweep: SweepSection,
    pub oracle: OracleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemSection {
                surface: SurfaceKind::Sine,
                wavenumber: 1.5,
                source: Point::new(0.0, 1.5),
                s_param: 2.8,
            },
            pml: PmlSection {
                pml_start: default_h(SurfaceKind::Sine),
                thickness: 2.0,
                sigma_max: 2.0,
                profile: ProfileKind::Smooth,
            },
            discretization: DiscretizationSection {
                resolution: 32,
                lateral_cells: 1,
                window: 0.5,
                cutoff: Cutoff::default(),
                riccati: RiccatiOptions::default(),
            },
            region: Rect::default_region(),
            sweep: SweepSection {
                k_values: vec![1.5, 3.0, 6.0],
                l_values: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
                reference_l: None,
                floor: 1e-10,
            },
            oracle: OracleSection {
                k_values: vec![0.5, 0.6],
                p_values: vec![20.0, 40.0, 80.0, 160.0],
                p_slope: 1.0,
                point: Point::new(1.0, 0.5),
                x2_star: 1.5,
                tol: 1e-8,
            },
        }
    }
}

/// H = 4 for the surface with the obstacle, H = 3 otherwise.
pub fn default_h(kind: SurfaceKind) -> f64 {
    if kind == SurfaceKind::SineWithObstacle {
        4.0
    } else {
        3.0
    }
}

pub fn parse_surface(s: &str) -> Result<SurfaceKind> {
    match s.trim().to_ascii_lowercase().as_str() {
        "sine" | "g1" => Ok(SurfaceKind::Sine),
        "sine_flattened" | "g2" => Ok(SurfaceKind::SineFlattened),
        "binary_grating" | "g3" => Ok(SurfaceKind::BinaryGrating),
        "sine_with_obstacle" | "g4" => Ok(SurfaceKind::SineWithObstacle),
        "flat" => Ok(SurfaceKind::Flat),
        other => Err(PmlError::Config(format!("unknown surface '{other}'"))),
    }
}

pub fn surface_name(kind: SurfaceKind) -> &'static str {
    match kind {
        SurfaceKind::Sine => "sine",
        SurfaceKind::SineFlattened => "sine_flattened",
        SurfaceKind::BinaryGrating => "binary_grating",
        SurfaceKind::SineWithObstacle => "sine_with_obstacle",
        SurfaceKind::Flat => "flat",
    }
}

pub fn parse_profile(s: &str) -> Result<ProfileKind> {
    match s.trim().to_ascii_lowercase().as_str() {
        "smooth" => Ok(ProfileKind::Smooth),
        "constant" => Ok(ProfileKind::Constant),
        "zero" => Ok(ProfileKind::Zero),
        other => Err(PmlError::Config(format!("unknown profile '{other}'"))),
    }
}

pub fn profile_name(kind: ProfileKind) -> &'static str {
    match kind {
        ProfileKind::Smooth => "smooth",
        ProfileKind::Constant => "constant",
        ProfileKind::Zero => "zero",
    }
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("problem", &["surface", "wavenumber", "source_x1", "source_x2", "s_param"]),
    ("pml", &["start", "thickness", "sigma_max", "profile"]),
    (
        "discretization",
        &["resolution", "lateral_cells", "window", "cutoff_inner", "cutoff_outer", "max_level", "doubling_tol"],
    ),
    ("region", &["x1_min", "x1_max", "x2_min", "x2_max"]),
    ("sweep", &["k_values", "l_values", "reference_l", "floor"]),
    ("oracle", &["k_values", "p_values", "p_slope", "x1", "x2", "x2_star", "tol"]),
];

fn parse_f64(section: &str, key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| PmlError::Config(format!("[{section}] {key}: '{v}' is not a finite number")))
}

fn parse_usize(section: &str, key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| PmlError::Config(format!("[{section}] {key}: '{v}' is not a non-negative integer")))
}

fn parse_list(section: &str, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(section, key, s)).collect()
}

impl RunConfig {
    /// Parses INI text; absent keys keep their defaults, unknown keys are errors.
    /// H defaults from the surface unless given.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| PmlError::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        let mut h_given = false;
        for (sec, props) in ini.iter() {
            let Some(sec) = sec else {
                if props.iter().next().is_some() {
                    return Err(PmlError::Config("keys outside a section".into()));
                }
                continue;
            };
            let known = KNOWN_KEYS
                .iter()
                .find(|(name, _)| *name == sec)
                .ok_or_else(|| PmlError::Config(format!("unknown section [{sec}]")))?;
            for (key, v) in props.iter() {
                if !known.1.contains(&key) {
                    return Err(PmlError::Config(format!("unknown key '{key}' in [{sec}]")));
                }
                let f = || parse_f64(sec, key, v);
                match (sec, key) {
                    ("problem", "surface") => cfg.problem.surface = parse_surface(v)?,
                    ("problem", "wavenumber") => cfg.problem.wavenumber = f()?,
                    ("problem", "source_x1") => cfg.problem.source.x1 = f()?,
                    ("problem", "source_x2") => cfg.problem.source.x2 = f()?,
                    ("problem", "s_param") => cfg.problem.s_param = f()?,
                    ("pml", "start") => {
                        cfg.pml.pml_start = f()?;
                        h_given = true;
                    }
                    ("pml", "thickness") => cfg.pml.thickness = f()?,
                    ("pml", "sigma_max") => cfg.pml.sigma_max = f()?,
                    ("pml", "profile") => cfg.pml.profile = parse_profile(v)?,
                    ("discretization", "resolution") => cfg.discretization.resolution = parse_usize(sec, key, v)?,
                    ("discretization", "lateral_cells") => cfg.discretization.lateral_cells = parse_usize(sec, key, v)?,
                    ("discretization", "window") => cfg.discretization.window = f()?,
                    ("discretization", "cutoff_inner") => cfg.discretization.cutoff.inner = f()?,
                    ("discretization", "cutoff_outer") => cfg.discretization.cutoff.outer = f()?,
                    ("discretization", "max_level") => {
                        cfg.discretization.riccati.max_level = parse_usize(sec, key, v)? as u32
                    }
                    ("discretization", "doubling_tol") => cfg.discretization.riccati.tol = f()?,
                    ("region", "x1_min") => cfg.region.x1_min = f()?,
                    ("region", "x1_max") => cfg.region.x1_max = f()?,
                    ("region", "x2_min") => cfg.region.x2_min = f()?,
                    ("region", "x2_max") => cfg.region.x2_max = f()?,
                    ("sweep", "k_values") => cfg.sweep.k_values = parse_list(sec, key, v)?,
                    ("sweep", "l_values") => cfg.sweep.l_values = parse_list(sec, key, v)?,
                    ("sweep", "reference_l") => cfg.sweep.reference_l = Some(f()?),
                    ("sweep", "floor") => cfg.sweep.floor = f()?,
                    ("oracle", "k_values") => cfg.oracle.k_values = parse_list(sec, key, v)?,
                    ("oracle", "p_values") => cfg.oracle.p_values = parse_list(sec, key, v)?,
                    ("oracle", "p_slope") => cfg.oracle.p_slope = f()?,
                    ("oracle", "x1") => cfg.oracle.point.x1 = f()?,
                    ("oracle", "x2") => cfg.oracle.point.x2 = f()?,
                    ("oracle", "x2_star") => cfg.oracle.x2_star = f()?,
                    ("oracle", "tol") => cfg.oracle.tol = f()?,
                    _ => unreachable!("key list and match arms agree"),
                }
            }
        }
        if !h_given {
            cfg.pml.pml_start = default_h(cfg.problem.surface);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PmlError::Config(format!("{}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    /// Value checks that do not need a solve.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PmlError::Config(m.to_string()));
        if !(self.problem.wavenumber > 0.0) {
            return bad("[problem] k must be positive");
        }
        if !(self.pml.thickness > 0.0 && self.pml.pml_start > 0.0 && self.pml.sigma_max >= 0.0) {
            return bad("[pml] needs h > 0, l > 0 and sigma_max >= 0");
        }
        if self.discretization.resolution < 4 {
            return bad("[discretization] resolution must be at least 4");
        }
        if self.sweep.k_values.iter().any(|&k| !(k > 0.0)) || self.oracle.k_values.iter().any(|&k| !(k > 0.0)) {
            return bad("wavenumbers must be positive");
        }
        if self.sweep.l_values.iter().any(|&l| !(l > 0.0)) {
            return bad("[sweep] l_values must be positive");
        }
        if self.sweep.l_values.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("[sweep] l_values must be strictly increasing");
        }
        if let (Some(r), Some(&m)) = (self.sweep.reference_l, self.sweep.l_values.last()) {
            if !(r > m) {
                return bad("[sweep] reference_l must exceed every swept L");
            }
        }
        if self.oracle.p_values.iter().any(|&p| !(p > 1.0)) || self.oracle.p_values.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("[oracle] p_values must exceed 1 and increase strictly");
        }
        if !(self.oracle.p_slope > 0.0 && self.oracle.tol > 0.0) {
            return bad("[oracle] p_slope and tol must be positive");
        }
        if !(self.oracle.point.x2 > 0.0 && self.oracle.point.x2 < 1.0) {
            return bad("[oracle] x2 must lie inside the layer, 0 < x2 < 1");
        }
        Ok(())
    }

    pub fn profile(&self, l: f64) -> Result<PmlProfile> {
        PmlProfile::new(self.pml.pml_start, l, self.pml.sigma_max, self.pml.profile)
    }

    /// Solver configuration for wavenumber k and thickness L.
    pub fn solve_config(&self, k: f64, l: f64) -> Result<SolveConfig> {
        let mut c = SolveConfig::new(
            SurfaceSpec::new(self.problem.surface),
            self.profile(l)?,
            k,
            self.discretization.resolution,
        );
        c.source = self.problem.source;
        c.lateral_cells = self.discretization.lateral_cells;
        c.window = self.discretization.window;
        c.cutoff = self.discretization.cutoff;
        c.riccati = self.discretization.riccati;
        c.region_d = self.region;
        Ok(c)
    }

    /// Geometric preconditions of a solve at (k, L), checked without solving.
    pub fn check_geometry(&self, k: f64, l: f64) -> Result<()> {
        let sc = self.solve_config(k, l)?;
        sc.validate()?;
        sc.model()?;
        extract_source(&sc)?;
        Ok(())
    }

    /// Reference thickness of a sweep.
    pub fn reference_l(&self) -> Option<f64> {
        self.sweep.reference_l.or_else(|| self.sweep.l_values.last().map(|l| 1.5 * l))
    }
}

/// A failed point of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub wavenumber: f64,
    /// L (or P for oracle studies); None when the failure concerns the whole k.
    pub thickness: Option<f64>,
    pub message: String,
}

/// One curve with its fit (or the reason it is inconclusive).
#[derive(Debug, Clone)]
pub struct CurveResult {
    pub name: String,
    pub curve: ErrorCurve,
    pub fit: std::result::Result<DecayFit, String>,
    /// Number of leading samples the fit used.
    pub fit_samples: usize,
}

/// Results of a study: curves, failures and key-value metadata.
#[derive(Debug, Clone, Default)]
pub struct StudyOutcome {
    pub curves: Vec<CurveResult>,
    pub failures: Vec<PointFailure>,
    pub metadata: Vec<(String, String)>,
}

impl StudyOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `f` and turns a panic into an error.
fn guarded<T>(f: impl FnOnce() -> Result<T>) -> Result<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(PmlError::Contract(format!("internal failure: {msg}")))
        }
    }
}

/// Leading samples before the floor: above `floor` and strictly decreasing.
pub fn pre_floor(curve: &ErrorCurve, floor: f64) -> ErrorCurve {
    let mut out = ErrorCurve { samples: Vec::new(), ..curve.clone() };
    for s in &curve.samples {
        let decreasing = out.samples.last().is_none_or(|p| s.e_rel < p.e_rel);
        if !(s.e_rel > floor && s.e_rel.is_finite()) || !decreasing {
            break;
        }
        out.samples.push(*s);
    }
    out
}

fn fitted(name: String, curve: ErrorCurve, floor: f64) -> CurveResult {
    let seg = pre_floor(&curve, floor);
    let fit = fit_decay(&seg).map_err(|e| e.to_string());
    CurveResult { name, fit_samples: seg.samples.len(), curve, fit }
}

fn p_tilde_of(p: f64, slope: f64) -> Complex64 {
    Complex64::new(p, p * slope)
}

/// |w₀(x)| and |w₁(x)| against P for every k of the oracle section.
pub fn run_oracle_study(cfg: &RunConfig) -> StudyOutcome {
    let o = &cfg.oracle;
    let opts = QuadOptions::mixed(0.0, o.tol);
    let jobs: Vec<(f64, f64)> = o.k_values.iter().flat_map(|&k| o.p_values.iter().map(move |&p| (k, p))).collect();
    let values: Vec<(Result<Complex64>, Result<Complex64>)> = jobs
        .par_iter()
        .map(|&(k, p)| {
            let params = OracleParams::new(k, o.x2_star, p_tilde_of(p, o.p_slope));
            let w0 = guarded(|| w0_field(o.point, &params.clone()?, opts).map(|r| r.value));
            let w1 = guarded(|| w1_field(o.point, &params.clone()?, opts).map(|r| r.value));
            (w0, w1)
        })
        .collect();
    let mut out = StudyOutcome::default();
    out.metadata = vec![
        ("study".into(), "oracle".into()),
        ("x1".into(), fmt17(o.point.x1)),
        ("x2".into(), fmt17(o.point.x2)),
        ("x2_star".into(), fmt17(o.x2_star)),
        ("p_tilde".into(), format!("P*(1+{}i)", fmt17(o.p_slope))),
        ("tol".into(), fmt17(o.tol)),
    ];
    for &k in &o.k_values {
        for (field, pick) in [("w0", 0usize), ("w1", 1)] {
            let mut curve = ErrorCurve {
                wavenumber: k,
                surface: "layered".into(),
                resolution: 0,
                profile: "p_tilde".into(),
                ..Default::default()
            };
            for (&(kk, p), v) in jobs.iter().zip(&values) {
                if kk != k {
                    continue;
                }
                match if pick == 0 { &v.0 } else { &v.1 } {
                    Ok(val) => curve.push(p, p_tilde_of(p, o.p_slope), val.norm()),
                    Err(e) => out.failures.push(PointFailure {
                        wavenumber: k,
                        thickness: Some(p),
                        message: format!("{field}: {e}"),
                    }),
                }
            }
            out.curves.push(fitted(format!("oracle_{field}_k{}", tag(k)), curve, 0.0));
        }
    }
    out
}

/// E_rel against L for every k of the sweep section.
pub fn run_sweep(cfg: &RunConfig) -> StudyOutcome {
    let mut out = StudyOutcome::default();
    let Some(l_ref) = cfg.reference_l() else {
        return out;
    };
    out.metadata = vec![
        ("study".into(), "sweep".into()),
        ("surface".into(), surface_name(cfg.problem.surface).into()),
        ("resolution".into(), cfg.discretization.resolution.to_string()),
        ("profile".into(), profile_name(cfg.pml.profile).into()),
        ("pml_start".into(), fmt17(cfg.pml.pml_start)),
        ("sigma_max".into(), fmt17(cfg.pml.sigma_max)),
        ("reference_l".into(), fmt17(l_ref)),
        ("s_param".into(), fmt17(cfg.problem.s_param)),
    ];
    let solve_at = |k: f64, l: f64| -> Result<FieldGrid> { guarded(|| solve(&cfg.solve_config(k, l)?).map(|r| r.0)) };
    let refs: Vec<Result<FieldGrid>> = cfg.sweep.k_values.par_iter().map(|&k| solve_at(k, l_ref)).collect();
    let jobs: Vec<(usize, f64)> = (0..cfg.sweep.k_values.len())
        .filter(|&i| refs[i].is_ok())
        .flat_map(|i| cfg.sweep.l_values.iter().map(move |&l| (i, l)))
        .collect();
    let errs: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(i, l)| {
            let reference = refs[i].as_ref().expect("filtered to successful references");
            let field = solve_at(cfg.sweep.k_values[i], l)?;
            guarded(|| h1_relative_error(&field, reference, &cfg.region))
        })
        .collect();
    for (i, &k) in cfg.sweep.k_values.iter().enumerate() {
        if let Err(e) = &refs[i] {
            out.failures.push(PointFailure {
                wavenumber: k,
                thickness: Some(l_ref),
                message: format!("reference solve: {e}"),
            });
        }
        let mut curve = ErrorCurve {
            wavenumber: k,
            surface: surface_name(cfg.problem.surface).into(),
            resolution: cfg.discretization.resolution,
            profile: profile_name(cfg.pml.profile).into(),
            ..Default::default()
        };
        for (&(j, l), e) in jobs.iter().zip(&errs) {
            if j != i {
                continue;
            }
            match (e, &cfg.profile(l)) {
                (Ok(e), Ok(p)) => curve.push(l, p.p_tilde(), *e),
                (Err(err), _) | (_, Err(err)) => {
                    out.failures.push(PointFailure { wavenumber: k, thickness: Some(l), message: err.to_string() })
                }
            }
        }
        out.curves.push(fitted(format!("sweep_k{}", tag(k)), curve, cfg.sweep.floor));
    }
    out
}

/// Single solve at the problem's k and the PML section's L.
pub fn run_solve(cfg: &RunConfig) -> Result<(FieldGrid, SolveReport)> {
    guarded(|| solve(&cfg.solve_config(cfg.problem.wavenumber, cfg.pml.thickness)?))
}

/// Level-0 cell blocks, the lateral operators and the spectra of ℛ±.
pub struct NtdDump {
    pub blocks: [(String, crate::linalg::CMat); 6],
    pub spectra: Vec<(String, Vec<Complex64>)>,
    pub depth: u32,
    pub rho_plus: f64,
    pub rho_minus: f64,
}

pub fn run_ntd(cfg: &RunConfig) -> Result<NtdDump> {
    guarded(|| {
        let sc = cfg.solve_config(cfg.problem.wavenumber, cfg.pml.thickness)?;
        sc.validate()?;
        let model = sc.model()?;
        let level0 = assemble_cell_ntd(&model, &sc.layout_for(&model), 2.0 * std::f64::consts::PI)?;
        let lat = lateral_operators(&level0, sc.riccati)?;
        let spectra = vec![
            ("r_plus".to_string(), eigenvalues(lat.r_plus.matrix.as_ref())?),
            ("r_minus".to_string(), eigenvalues(lat.r_minus.matrix.as_ref())?),
        ];
        Ok(NtdDump {
            blocks: [
                ("n11".into(), level0.n11),
                ("n12".into(), level0.n12),
                ("n21".into(), level0.n21),
                ("n22".into(), level0.n22),
                ("n_plus".into(), lat.plus),
                ("n_minus".into(), lat.minus),
            ],
            spectra,
            depth: lat.depth,
            rho_plus: lat.rho_plus,
            rho_minus: lat.rho_minus,
        })
    })
}

/// Shortest round-trip text of a float, used in file names: 1.5 → "1.5".
pub fn tag(x: f64) -> String {
    format!("{x}")
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the curve as `L,ReP,ImP,E_rel`.
pub fn emit_csv(curve: &ErrorCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["L", "ReP", "ImP", "E_rel"]).map_err(csv_err)?;
    for s in &curve.samples {
        w.write_record([fmt17(s.thickness), fmt17(s.p_tilde.re), fmt17(s.p_tilde.im), fmt17(s.e_rel)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by `emit_csv` back into samples.
pub fn read_csv(path: &Path) -> Result<ErrorCurve> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["L", "ReP", "ImP", "E_rel"] {
        return Err(PmlError::Config(format!("{}: unexpected header", path.display())));
    }
    let mut curve = ErrorCurve::default();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let v: Vec<f64> = rec.iter().map(|f| parse_f64("csv", "field", f)).collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(PmlError::Config(format!("{}: row with {} fields", path.display(), v.len())));
        }
        curve.push(v[0], Complex64::new(v[1], v[2]), v[3]);
    }
    Ok(curve)
}

fn csv_err(e: csv::Error) -> PmlError {
    PmlError::Io(e.to_string())
}

/// Two-column `L E_rel` text for gnuplot.
pub fn emit_gnuplot(curve: &ErrorCurve, path: &Path) -> Result<()> {
    let mut s = String::from("# L E_rel\n");
    for p in &curve.samples {
        writeln!(s, "{} {}", fmt17(p.thickness), fmt17(p.e_rel)).expect("write to string");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Metadata and one section per curve with the DecayFit fields.
pub fn summary_text(outcome: &StudyOutcome) -> String {
    let mut s = String::from("[metadata]\n");
    for (k, v) in &outcome.metadata {
        writeln!(s, "{k} = {v}").expect("write to string");
    }
    for c in &outcome.curves {
        writeln!(s, "\n[{}]", c.name).expect("write to string");
        writeln!(s, "wavenumber = {}", fmt17(c.curve.wavenumber)).expect("write to string");
        writeln!(s, "samples = {}", c.curve.samples.len()).expect("write to string");
        writeln!(s, "fit_samples = {}", c.fit_samples).expect("write to string");
        match &c.fit {
            Ok(f) => {
                writeln!(s, "model = {}", f.model.name()).expect("write to string");
                writeln!(s, "rate = {}", fmt17(f.rate)).expect("write to string");
                writeln!(s, "r_squared = {}", fmt17(f.r_squared)).expect("write to string");
                writeln!(s, "prefactor = {}", fmt17(f.prefactor)).expect("write to string");
            }
            Err(e) => writeln!(s, "model = inconclusive\nreason = {e}").expect("write to string"),
        }
    }
    s
}

/// Writes every curve (CSV and gnuplot), the summary and, when needed, the
/// failure manifest. Returns the written paths.
pub fn write_outcome(outcome: &StudyOutcome, dir: &Path, summary_name: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for c in &outcome.curves {
        let csv = dir.join(format!("{}.csv", c.name));
        emit_csv(&c.curve, &csv)?;
        let dat = dir.join(format!("{}.dat", c.name));
        emit_gnuplot(&c.curve, &dat)?;
        paths.extend([csv, dat]);
    }
    let summary = dir.join(summary_name);
    fs::write(&summary, summary_text(outcome))?;
    paths.push(summary);
    if outcome.failures.is_empty() {
        let manifest = dir.join("failures.csv");
        if manifest.exists() {
            fs::remove_file(&manifest)?;
        }
    } else {
        paths.push(write_failures(&outcome.failures, dir)?);
    }
    Ok(paths)
}

/// Writes the failure manifest `failures.csv` (k, L, error).
pub fn write_failures(failures: &[PointFailure], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join("failures.csv");
    let mut w = csv::Writer::from_path(&manifest).map_err(csv_err)?;
    w.write_record(["k", "L", "error"]).map_err(csv_err)?;
    for f in failures {
        let l = f.thickness.map(fmt17).unwrap_or_default();
        w.write_record([fmt17(f.wavenumber), l, f.message.clone()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(manifest)
}

/// Writes the NtD dump as (row, col, Re, Im) and (index, Re, Im) CSV files.
pub fn write_ntd(dump: &NtdDump, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, m) in &dump.blocks {
        let path = dir.join(format!("ntd_{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["row", "col", "Re", "Im"]).map_err(csv_err)?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                w.write_record([i.to_string(), j.to_string(), fmt17(v.re), fmt17(v.im)]).map_err(csv_err)?;
            }
        }
        w.flush()?;
        paths.push(path);
    }
    for (name, ev) in &dump.spectra {
        let path = dir.join(format!("spectrum_{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["index", "Re", "Im"]).map_err(csv_err)?;
        let mut ev = ev.clone();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
        for (i, v) in ev.iter().enumerate() {
            w.write_record([i.to_string(), fmt17(v.re), fmt17(v.im)]).map_err(csv_err)?;
        }
        w.flush()?;
        paths.push(path);
    }
    let summary = dir.join("ntd_summary.txt");
    fs::write(
        &summary,
        format!("depth = {}\nrho_plus = {}\nrho_minus = {}\n", dump.depth, fmt17(dump.rho_plus), fmt17(dump.rho_minus)),
    )?;
    paths.push(summary);
    Ok(paths)
}

/// Writes the field over D and the solve diagnostics.
pub fn write_solve(field: &FieldGrid, report: &SolveReport, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join("field_d.csv");
    field.write_region_csv(&csv, &cfg.region, REGION_SAMPLES, REGION_SAMPLES)?;
    let summary = dir.join("solve_summary.txt");
    fs::write(
        &summary,
        format!(
            "surface = {}\nwavenumber = {}\npml_start = {}\nthickness = {}\nresolution = {}\ndepth = {}\nrho_plus = {}\nrho_minus = {}\nunknowns_per_trace = {}\n",
            surface_name(cfg.problem.surface),
            fmt17(cfg.problem.wavenumber),
            fmt17(cfg.pml.pml_start),
            fmt17(cfg.pml.thickness),
            cfg.discretization.resolution,
            report.depth,
            fmt17(report.rho_plus),
            fmt17(report.rho_minus),
            report.unknowns_per_trace
        ),
    )?;
    Ok(vec![csv, summary])
}
