//! PML-truncated scattering of a point source by a locally perturbed periodic
//! surface, with lateral NtD closures and singularity extraction.
//!
//! The strip |x₁| < R, R = (2m+1)π, is split into m periodic cells on each side of
//! the central cell. The free-space solution χG is subtracted with a radial cutoff
//! χ, so the remainder v = ũ − χG solves the PML equation with the smooth forcing
//! −(Δ + k²)(χG) supported in an annulus around the source. The annulus lies in a
//! single spectral element (the window); everything else is reduced to NtD blocks
//! on the two window edges.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cheb;
use crate::discretization::{cell_elements, Element, ElementSpec, LayoutParams, StripModel};
use crate::error::{PmlError, Result};
use crate::geometry::{PmlProfile, Point, SurfaceSpec};
use crate::linalg::{mul_add, CMat, Lu};
use crate::ntd::{assemble_cell_ntd, chain_blocks, lateral_operators, LateralOperators, RiccatiOptions};
use crate::special::{green, green_dr};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Axis-aligned rectangle [x1_min, x1_max] × [x2_min, x2_max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl Rect {
    pub const fn new(x1_min: f64, x1_max: f64, x2_min: f64, x2_max: f64) -> Self {
        Rect { x1_min, x1_max, x2_min, x2_max }
    }

    /// The evaluation region [−0.3, 0.3] × [1.2, 1.8].
    pub const fn default_region() -> Self {
        Rect::new(-0.3, 0.3, 1.2, 1.8)
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.x1_min..=self.x1_max).contains(&p.x1) && (self.x2_min..=self.x2_max).contains(&p.x2)
    }

    /// Tensor sample points, x₁ fastest; `nx`, `ny` ≥ 2 points per side.
    pub fn samples(&self, nx: usize, ny: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let x2 = self.x2_min + (self.x2_max - self.x2_min) * iy as f64 / (ny - 1) as f64;
            for ix in 0..nx {
                let x1 = self.x1_min + (self.x1_max - self.x1_min) * ix as f64 / (nx - 1) as f64;
                out.push(Point::new(x1, x2));
            }
        }
        out
    }
}

/// Sample points per side of the evaluation region. With 31 intervals the grid on
/// the default region never contains the source.
pub const REGION_SAMPLES: usize = 32;

/// Radial C∞ cutoff: 1 for r ≤ inner, 0 for r ≥ outer, a logistic blend of
/// 1/(1 − t) − 1/t in between. A finite-order polynomial blend leaves the forcing
/// with a derivative jump that caps the x₁ convergence of the spectral elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { inner: 0.1, outer: 0.45 }
    }
}

impl Cutoff {
    /// χ, χ′, χ″ at radius r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.inner {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.outer {
            return (0.0, 0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let t = (r - self.inner) / w;
        let z = 1.0 / (1.0 - t) - 1.0 / t;
        let sg = 1.0 / (1.0 + (-z).exp());
        let s1 = sg * (1.0 - sg);
        let s2 = s1 * (1.0 - 2.0 * sg);
        let z1 = 1.0 / ((1.0 - t) * (1.0 - t)) + 1.0 / (t * t);
        let z2 = 2.0 / (1.0 - t).powi(3) - 2.0 / t.powi(3);
        (1.0 - sg, -s1 * z1 / w, -(s2 * z1 * z1 + s1 * z2) / (w * w))
    }
}

/// Parameters of one scattering solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub spec: SurfaceSpec,
    pub profile: PmlProfile,
    pub wavenumber: f64,
    pub source: Point,
    /// Periodic cells on each side of the central cell; R = (2m+1)π.
    pub lateral_cells: usize,
    /// Vertical grid intervals per unit length.
    pub resolution: usize,
    pub region_d: Rect,
    pub cutoff: Cutoff,
    /// Half-width of the window element centred at x₁ = 0.
    pub window: f64,
    /// Element layout; derived from k and the grid spacing when absent.
    pub layout: Option<LayoutParams>,
    pub riccati: RiccatiOptions,
}

impl SolveConfig {
    /// Defaults: source (0, 1.5), one lateral cell per side, default region and cutoff.
    pub fn new(spec: SurfaceSpec, profile: PmlProfile, k: f64, resolution: usize) -> Self {
        SolveConfig {
            spec,
            profile,
            wavenumber: k,
            source: Point::new(0.0, 1.5),
            lateral_cells: 1,
            resolution,
            region_d: Rect::default_region(),
            cutoff: Cutoff::default(),
            window: 0.5,
            layout: None,
            riccati: RiccatiOptions::default(),
        }
    }

    /// Half-width R of the truncated strip.
    pub fn lateral_half_width(&self) -> f64 {
        (2 * self.lateral_cells + 1) as f64 * PI
    }

    pub fn model(&self) -> Result<StripModel> {
        StripModel::new(&self.spec, &self.profile, self.wavenumber, self.resolution)
    }

    pub fn layout_for(&self, model: &StripModel) -> LayoutParams {
        self.layout.unwrap_or_else(|| LayoutParams::auto(self.wavenumber, model.grid.delta))
    }

    /// Checks the geometric preconditions that do not involve the cutoff.
    pub fn validate(&self) -> Result<()> {
        if !(self.wavenumber > 0.0) {
            return Err(PmlError::contract("wavenumber must be positive"));
        }
        if self.lateral_cells == 0 {
            return Err(PmlError::contract("at least one periodic cell per side is required (R >= 3π)"));
        }
        if !(self.window > 0.0 && self.window < 0.5 * PI) {
            return Err(PmlError::contract("window half-width must lie in (0, π/2)"));
        }
        let d = self.region_d;
        if !(d.x1_min < d.x1_max && d.x2_min < d.x2_max) {
            return Err(PmlError::contract("empty evaluation region"));
        }
        if d.x1_min <= -self.window || d.x1_max >= self.window {
            return Err(PmlError::contract("evaluation region must lie inside the window element"));
        }
        if d.x2_max >= self.profile.pml_start {
            return Err(PmlError::contract("evaluation region must lie below the PML"));
        }
        let floor = (0..=64)
            .map(|i| d.x1_min + (d.x1_max - d.x1_min) * i as f64 / 64.0)
            .map(|x| self.spec.height(x))
            .fold(f64::NEG_INFINITY, f64::max);
        if d.x2_min <= floor {
            return Err(PmlError::contract("evaluation region must lie above the surface"));
        }
        if let Some(disc) = self.spec.obstacle {
            let cx = disc.center.x1.clamp(d.x1_min, d.x1_max);
            let cy = disc.center.x2.clamp(d.x2_min, d.x2_max);
            if Point::new(cx, cy).dist(&disc.center) <= disc.radius {
                return Err(PmlError::contract("evaluation region intersects the obstacle"));
            }
        }
        if !self.spec.is_periodic_cell(2.0 * PI) || !self.spec.is_periodic_cell(-2.0 * PI) {
            return Err(PmlError::contract("the perturbation must be confined to the central cell"));
        }
        Ok(())
    }
}

/// Cutoff data of the extracted singular part χG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceExtraction {
    pub source: Point,
    pub cutoff: Cutoff,
    pub wavenumber: f64,
}

impl SourceExtraction {
    /// χ(x)G(x; x*). Infinite at the source itself.
    pub fn singular_part(&self, x: Point) -> Complex64 {
        let r = x.dist(&self.source);
        let (chi, _, _) = self.cutoff.eval(r);
        if chi == 0.0 {
            ZERO
        } else {
            green(self.wavenumber, r) * chi
        }
    }

    /// Right-hand side −(Δ + k²)(χG) = −(2χ′G_r + G(χ″ + χ′/r)) of the remainder equation.
    pub fn forcing(&self, x: Point) -> Complex64 {
        let r = x.dist(&self.source);
        let (_, d1, d2) = self.cutoff.eval(r);
        if d1 == 0.0 && d2 == 0.0 {
            return ZERO;
        }
        -(green_dr(self.wavenumber, r) * (2.0 * d1) + green(self.wavenumber, r) * (d2 + d1 / r))
    }
}

/// Validates the cutoff disc and returns the extraction data.
pub fn extract_source(cfg: &SolveConfig) -> Result<SourceExtraction> {
    let Cutoff { inner, outer } = cfg.cutoff;
    if !(inner > 0.0 && outer > inner) {
        return Err(PmlError::contract("cutoff radii must satisfy 0 < inner < outer"));
    }
    let x = cfg.source;
    if x.x1.abs() + outer >= cfg.window {
        return Err(PmlError::contract("cutoff disc must lie inside the window element"));
    }
    if x.x2 + outer >= cfg.profile.pml_start {
        return Err(PmlError::contract("cutoff disc intersects the PML"));
    }
    for i in 0..=200 {
        let x1 = x.x1 - outer + 2.0 * outer * i as f64 / 200.0;
        let reach = (outer * outer - (x1 - x.x1).powi(2)).max(0.0).sqrt();
        if cfg.spec.height(x1) >= x.x2 - reach || cfg.spec.is_solid(x1, x.x2 - reach) {
            return Err(PmlError::contract("cutoff disc intersects the surface"));
        }
    }
    if let Some(disc) = cfg.spec.obstacle {
        if disc.center.dist(&x) <= disc.radius + outer {
            return Err(PmlError::contract("cutoff disc intersects the obstacle"));
        }
    }
    Ok(SourceExtraction { source: x, cutoff: cfg.cutoff, wavenumber: cfg.wavenumber })
}

/// Lateral NtD operators for the periodic cells of `cfg`.
pub fn build_lateral(cfg: &SolveConfig) -> Result<LateralOperators> {
    cfg.validate()?;
    let model = cfg.model()?;
    let params = cfg.layout_for(&model);
    let level0 = assemble_cell_ntd(&model, &params, 2.0 * PI)?;
    lateral_operators(&level0, cfg.riccati)
}

/// Remainder values on one window element.
#[derive(Debug, Clone)]
pub struct FieldPatch {
    /// Lobatto abscissae.
    pub x1: Vec<f64>,
    /// Mapped surface height of each column.
    pub heights: Vec<f64>,
    /// Smooth remainder ũ − χG, row-major by s level (zero on Dirichlet rows and
    /// solid nodes).
    pub remainder: Vec<Complex64>,
}

/// Solution samples on the window elements around the source.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    /// Window elements from left to right.
    pub patches: Vec<FieldPatch>,
    /// All s levels, including the Dirichlet rows at 0 and H + L.
    pub s: Vec<f64>,
    pub extraction: SourceExtraction,
    pub spec: SurfaceSpec,
    pub profile: PmlProfile,
    pub resolution: usize,
}

impl FieldGrid {
    fn s_of_x2(&self, x2: f64, h: f64) -> f64 {
        let top_h = self.profile.pml_start;
        if x2 >= top_h || h == 0.0 {
            return x2;
        }
        let mut s = x2.clamp(0.0, top_h);
        for _ in 0..60 {
            let t = 1.0 - s / top_h;
            let step = (s + t * t * h - x2) / (1.0 - 2.0 * t * h / top_h);
            s -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        s
    }

    fn column_value(&self, patch: &FieldPatch, i: usize, s: f64) -> Complex64 {
        let n = patch.x1.len();
        let last = self.s.len() - 1;
        let j = self.s.partition_point(|&v| v <= s).clamp(1, last);
        let lo = j.saturating_sub(2).min(last.saturating_sub(3));
        let idx: Vec<usize> = (lo..(lo + 4).min(last + 1)).collect();
        let mut v = ZERO;
        for &a in &idx {
            let mut w = 1.0;
            for &b in &idx {
                if a != b {
                    w *= (s - self.s[b]) / (self.s[a] - self.s[b]);
                }
            }
            v += patch.remainder[a * n + i] * w;
        }
        v
    }

    fn patch_of(&self, x1: f64) -> Option<&FieldPatch> {
        self.patches.iter().find(|p| x1 >= p.x1[0] && x1 <= *p.x1.last().expect("non-empty"))
    }

    /// Remainder ũ − χG at a point of the window.
    pub fn remainder_at(&self, p: Point) -> Complex64 {
        let patch = self.patch_of(p.x1).expect("point inside the window");
        let cols: Vec<Complex64> =
            (0..patch.x1.len()).map(|i| self.column_value(patch, i, self.s_of_x2(p.x2, patch.heights[i]))).collect();
        cheb::interpolate(&patch.x1, &cols, p.x1)
    }

    /// Total field ũ at a point of the window other than the source.
    pub fn total_at(&self, p: Point) -> Complex64 {
        self.remainder_at(p) + self.extraction.singular_part(p)
    }

    fn window_contains(&self, p: Point) -> bool {
        self.patch_of(p.x1).is_some() && p.x2 >= 0.0 && p.x2 <= *self.s.last().expect("non-empty")
    }

    /// Total field on the tensor samples of `region`.
    pub fn sample_total(&self, region: &Rect, nx: usize, ny: usize) -> Result<Vec<Complex64>> {
        self.sample(region, nx, ny, true)
    }

    /// Remainder on the tensor samples of `region`.
    pub fn sample_remainder(&self, region: &Rect, nx: usize, ny: usize) -> Result<Vec<Complex64>> {
        self.sample(region, nx, ny, false)
    }

    fn sample(&self, region: &Rect, nx: usize, ny: usize, total: bool) -> Result<Vec<Complex64>> {
        let pts = region.samples(nx, ny);
        if pts.iter().any(|p| !self.window_contains(*p)) {
            return Err(PmlError::contract("sample region leaves the window"));
        }
        if total && pts.iter().any(|p| *p == self.extraction.source) {
            return Err(PmlError::contract("sample grid contains the source point"));
        }
        Ok(pts.iter().map(|&p| if total { self.total_at(p) } else { self.remainder_at(p) }).collect())
    }

    /// Writes (x₁, x₂, Re ũ, Im ũ) over `region` as CSV.
    pub fn write_region_csv(&self, path: &Path, region: &Rect, nx: usize, ny: usize) -> Result<()> {
        let values = self.sample_total(region, nx, ny)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x1,x2,Re,Im")?;
        for (p, v) in region.samples(nx, ny).iter().zip(&values) {
            writeln!(f, "{:.16e},{:.16e},{:.16e},{:.16e}", p.x1, p.x2, v.re, v.im)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Diagnostics of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub depth: u32,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub unknowns_per_trace: usize,
}

/// One window element with its NtD blocks and forced response.
struct WindowElement {
    elem: Element,
    blocks: (CMat, CMat, CMat, CMat),
    forcing: Vec<Complex64>,
    p_left: Vec<Complex64>,
    p_right: Vec<Complex64>,
}

fn window_element(model: &StripModel, es: ElementSpec, src: &SourceExtraction) -> Result<WindowElement> {
    let mut elem = model.element(es);
    let blocks = elem.ntd()?;
    let forcing = window_forcing(model, &elem, src);
    let zl = vec![ZERO; elem.left_active.len()];
    let zr = vec![ZERO; elem.right_active.len()];
    let particular = elem.solve(&zl, &zr, Some(&forcing))?;
    let (p_left, p_right) = elem.traces(&particular);
    Ok(WindowElement { elem, blocks, forcing, p_left, p_right })
}

/// Solves with the given lateral operators.
pub fn solve_scattering(cfg: &SolveConfig, lateral: &LateralOperators) -> Result<FieldGrid> {
    cfg.validate()?;
    let model = cfg.model()?;
    let levels = model.grid.levels();
    if lateral.plus.nrows() != levels || lateral.minus.nrows() != levels {
        return Err(PmlError::contract("lateral NtD operators do not match the trace grid"));
    }
    let src = extract_source(cfg)?;
    let params = cfg.layout_for(&model);
    let center = cell_elements(&cfg.spec, 0.0, &params, Some(cfg.window));
    let in_window = |e: &ElementSpec| e.a >= -cfg.window - 1e-9 && e.b <= cfg.window + 1e-9;
    let first = center.iter().position(in_window).ok_or_else(|| PmlError::contract("empty window"))?;
    let end = first + center[first..].iter().take_while(|e| in_window(e)).count();
    let mut left: Vec<ElementSpec> = Vec::new();
    for c in (1..=cfg.lateral_cells).rev() {
        left.extend(cell_elements(&cfg.spec, -2.0 * PI * c as f64, &params, None));
    }
    left.extend_from_slice(&center[..first]);
    let mut right: Vec<ElementSpec> = center[end..].to_vec();
    for c in 1..=cfg.lateral_cells {
        right.extend(cell_elements(&cfg.spec, 2.0 * PI * c as f64, &params, None));
    }
    let (lb, rb) = rayon::join(|| chain_blocks(&model, &left), || chain_blocks(&model, &right));
    let (lb, rb) = (lb?, rb?);
    if lb.left.len() != levels || rb.right.len() != levels {
        return Err(PmlError::contract("outer traces must be free of solid nodes"));
    }
    let mut win: Vec<WindowElement> =
        center[first..end].par_iter().map(|&es| window_element(&model, es, &src)).collect::<Result<Vec<_>>>()?;
    let last = win.len() - 1;
    if lb.right != win[0].elem.left_active || rb.left != win[last].elem.right_active {
        return Err(PmlError::contract("window traces do not match the neighbouring blocks"));
    }

    // Outer closures: u = Λ g on the window's outer edges.
    let mut k_left = lateral.minus.clone();
    sub_assign(&mut k_left, &lb.n11);
    let x = Lu::new(k_left.as_ref(), "left closure")?.solve(lb.n12.as_ref());
    let mut lam_l = lb.n22.clone();
    mul_add(&mut lam_l, lb.n21.as_ref(), x.as_ref(), ONE);
    let mut k_right = lateral.plus.clone();
    sub_assign(&mut k_right, &rb.n22);
    let y = Lu::new(k_right.as_ref(), "right closure")?.solve(rb.n21.as_ref());
    let mut lam_r = rb.n11.clone();
    mul_add(&mut lam_r, rb.n12.as_ref(), y.as_ref(), ONE);

    // Continuity of u on the interfaces 0..=K of the window elements:
    // lower·g_{i−1} + diag·g_i + upper·g_{i+1} = rhs_i.
    let k = win.len();
    let mut lower: Vec<Option<CMat>> = Vec::with_capacity(k + 1);
    let mut diag: Vec<CMat> = Vec::with_capacity(k + 1);
    let mut upper: Vec<Option<CMat>> = Vec::with_capacity(k + 1);
    let mut rhs: Vec<Vec<Complex64>> = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let mut d = if i == 0 { lam_l.clone() } else { win[i - 1].blocks.3.clone() };
        if i < k {
            sub_assign(&mut d, &win[i].blocks.0);
        } else {
            let mut lr = lam_r.clone();
            sub_assign(&mut lr, &d);
            d = lr;
        }
        let lo = (i > 0).then(|| {
            let b = &win[i - 1].blocks.2;
            if i < k {
                b.clone()
            } else {
                neg(b)
            }
        });
        let up = (i < k).then(|| neg(&win[i].blocks.1));
        let r: Vec<Complex64> = match (i > 0, i < k) {
            (false, _) => win[0].p_left.clone(),
            (true, true) => win[i].p_left.iter().zip(&win[i - 1].p_right).map(|(a, b)| a - b).collect(),
            (true, false) => win[k - 1].p_right.clone(),
        };
        lower.push(lo);
        diag.push(d);
        upper.push(up);
        rhs.push(r);
    }
    let g = block_tridiagonal_solve(&lower, diag, &upper, rhs)?;

    let n_levels = model.grid.intervals + 1;
    let mut patches = Vec::with_capacity(k);
    for (i, w) in win.iter_mut().enumerate() {
        let v = w.elem.solve(&g[i], &g[i + 1], Some(&w.forcing))?;
        let n = w.elem.nodes();
        let mut remainder = vec![ZERO; n * n_levels];
        remainder[n..n * (levels + 1)].copy_from_slice(&v);
        patches.push(FieldPatch {
            x1: w.elem.x.clone(),
            heights: w.elem.x.iter().map(|&t| cfg.spec.mapped_height(t)).collect(),
            remainder,
        });
    }
    Ok(FieldGrid {
        patches,
        s: (0..=model.grid.intervals).map(|j| model.grid.s(j)).collect(),
        extraction: src,
        spec: cfg.spec,
        profile: cfg.profile,
        resolution: cfg.resolution,
    })
}

fn neg(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| -a[(i, j)])
}

/// Block Thomas elimination for a block tridiagonal system.
fn block_tridiagonal_solve(
    lower: &[Option<CMat>],
    mut diag: Vec<CMat>,
    upper: &[Option<CMat>],
    mut rhs: Vec<Vec<Complex64>>,
) -> Result<Vec<Vec<Complex64>>> {
    let n = diag.len();
    let mut factors: Vec<Lu> = Vec::with_capacity(n);
    let mut ks: Vec<Option<CMat>> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            if let Some(l) = &lower[i] {
                if let Some(kprev) = &ks[i - 1] {
                    mul_add(&mut diag[i], l.as_ref(), kprev.as_ref(), -ONE);
                }
                let prev = factors[i - 1].solve_vec(&rhs[i - 1]);
                let corr = crate::linalg::mul_vec(l.as_ref(), &prev);
                for (r, c) in rhs[i].iter_mut().zip(corr) {
                    *r -= c;
                }
            }
        }
        let lu = Lu::new(diag[i].as_ref(), "window interface system")?;
        ks.push(upper[i].as_ref().map(|u| lu.solve(u.as_ref())));
        factors.push(lu);
    }
    let mut out: Vec<Vec<Complex64>> = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let mut y = factors[i].solve_vec(&rhs[i]);
        if let Some(kk) = &ks[i] {
            let corr = crate::linalg::mul_vec(kk.as_ref(), &out[i + 1]);
            for (a, c) in y.iter_mut().zip(corr) {
                *a -= c;
            }
        }
        out[i] = y;
    }
    Ok(out)
}

/// Builds the lateral operators and solves.
pub fn solve(cfg: &SolveConfig) -> Result<(FieldGrid, SolveReport)> {
    let lateral = build_lateral(cfg)?;
    let field = solve_scattering(cfg, &lateral)?;
    let report = SolveReport {
        depth: lateral.depth,
        rho_plus: lateral.rho_plus,
        rho_minus: lateral.rho_minus,
        unknowns_per_trace: lateral.plus.nrows(),
    };
    Ok((field, report))
}

fn sub_assign(a: &mut CMat, b: &CMat) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] -= b[(i, j)];
        }
    }
}

fn window_forcing(model: &StripModel, elem: &Element, src: &SourceExtraction) -> Vec<Complex64> {
    let n = elem.nodes();
    let mut f = vec![ZERO; n * elem.levels()];
    for jb in 0..elem.levels() {
        for i in 0..n {
            let (x1, x2) = model.point(elem.x[i], jb + 1);
            f[jb * n + i] = src.forcing(Point::new(x1, x2));
        }
    }
    f
}

/// Discrete H¹ norm of tensor samples over `region` (x₁ fastest): second-order
/// differences (central inside, one-sided on the sides) and trapezoidal weights.
pub fn h1_norm(values: &[Complex64], nx: usize, ny: usize, region: &Rect) -> f64 {
    assert!(nx >= 3 && ny >= 3 && values.len() == nx * ny);
    let hx = (region.x1_max - region.x1_min) / (nx - 1) as f64;
    let hy = (region.x2_max - region.x2_min) / (ny - 1) as f64;
    let at = |ix: usize, iy: usize| values[iy * nx + ix];
    let diff = |get: &dyn Fn(usize) -> Complex64, i: usize, len: usize, h: f64| {
        if i == 0 {
            (get(0) * -3.0 + get(1) * 4.0 - get(2)) / (2.0 * h)
        } else if i == len - 1 {
            (get(len - 1) * 3.0 - get(len - 2) * 4.0 + get(len - 3)) / (2.0 * h)
        } else {
            (get(i + 1) - get(i - 1)) / (2.0 * h)
        }
    };
    let mut total = 0.0;
    for iy in 0..ny {
        for ix in 0..nx {
            let wx = if ix == 0 || ix == nx - 1 { 0.5 * hx } else { hx };
            let wy = if iy == 0 || iy == ny - 1 { 0.5 * hy } else { hy };
            let dx = diff(&|i| at(i, iy), ix, nx, hx);
            let dy = diff(&|j| at(ix, j), iy, ny, hy);
            total += wx * wy * (at(ix, iy).norm_sqr() + dx.norm_sqr() + dy.norm_sqr());
        }
    }
    total.sqrt()
}

/// ‖u − u_ref‖_{H¹(D)} / ‖u_ref‖_{H¹(D)} on the default sample grid. When both
/// fields share the same singular part the difference is formed from the smooth
/// remainders, where χG cancels exactly.
pub fn h1_relative_error(u: &FieldGrid, u_ref: &FieldGrid, region: &Rect) -> Result<f64> {
    let n = REGION_SAMPLES;
    let reference = u_ref.sample_total(region, n, n)?;
    let denom = h1_norm(&reference, n, n, region);
    if !(denom > 10.0 * f64::EPSILON) {
        return Err(PmlError::contract("reference field has vanishing H1 norm on the region"));
    }
    let diff: Vec<Complex64> = if u.extraction == u_ref.extraction {
        let a = u.sample_remainder(region, n, n)?;
        let b = u_ref.sample_remainder(region, n, n)?;
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    } else {
        let a = u.sample_total(region, n, n)?;
        a.iter().zip(&reference).map(|(x, y)| x - y).collect()
    };
    Ok(h1_norm(&diff, n, n, region) / denom)
}

/// H¹ error of sampled values against an exact field, relative to the exact norm.
pub fn h1_error_against(values: &[Complex64], exact: &[Complex64], nx: usize, ny: usize, region: &Rect) -> f64 {
    let diff: Vec<Complex64> = values.iter().zip(exact).map(|(a, b)| a - b).collect();
    h1_norm(&diff, nx, ny, region) / h1_norm(exact, nx, ny, region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ProfileKind, SurfaceKind};

    #[test]
    fn cutoff_is_smooth_and_forcing_vanishes_off_the_annulus() {
        let c = Cutoff::default();
        let eps = 1e-3;
        for r in [c.inner, c.outer] {
            for side in [-eps, eps] {
                let (v, d, dd) = c.eval(r + side);
                assert!(
                    (v - if r == c.inner { 1.0 } else { 0.0 }).abs() < 1e-12 && d.abs() < 1e-12 && dd.abs() < 1e-12
                );
            }
        }
        // Derivatives against central differences in the blend.
        let h = 1e-5;
        for r in [0.15, 0.25, 0.4] {
            let (_, d, dd) = c.eval(r);
            let fd1 = (c.eval(r + h).0 - c.eval(r - h).0) / (2.0 * h);
            let fd2 = (c.eval(r + h).1 - c.eval(r - h).1) / (2.0 * h);
            assert!((d - fd1).abs() < 1e-7 * (1.0 + d.abs()) && (dd - fd2).abs() < 1e-6 * (1.0 + dd.abs()));
        }
        let src = SourceExtraction { source: Point::new(0.0, 1.5), cutoff: c, wavenumber: 1.5 };
        assert_eq!(src.forcing(Point::new(0.05, 1.5)), ZERO);
        assert_eq!(src.forcing(Point::new(0.0, 1.96)), ZERO);
        assert_ne!(src.forcing(Point::new(0.2, 1.5)), ZERO);
    }

    #[test]
    fn forcing_is_minus_helmholtz_of_cut_green() {
        let src = SourceExtraction { source: Point::new(0.0, 1.5), cutoff: Cutoff::default(), wavenumber: 1.3 };
        let p = Point::new(0.13, 1.62);
        let f = |dx: f64, dy: f64| src.singular_part(Point::new(p.x1 + dx, p.x2 + dy));
        let lap_h = |h: f64| (f(h, 0.0) + f(-h, 0.0) + f(0.0, h) + f(0.0, -h) - f(0.0, 0.0) * 4.0) / (h * h);
        let lap = (lap_h(1e-3) * 4.0 - lap_h(2e-3)) / 3.0;
        let expect = -(lap + f(0.0, 0.0) * 1.69);
        assert!((src.forcing(p) - expect).norm() < 1e-6 * expect.norm(), "{} {}", src.forcing(p), expect);
    }

    #[test]
    fn h1_norm_of_identical_and_doubled_fields() {
        let region = Rect::default_region();
        let vals: Vec<Complex64> =
            region.samples(12, 12).iter().map(|p| Complex64::new((p.x1 * 3.0).sin(), p.x2 * p.x2)).collect();
        let doubled: Vec<Complex64> = vals.iter().map(|v| v * 2.0).collect();
        assert_eq!(h1_error_against(&vals, &vals, 12, 12, &region), 0.0);
        assert!((h1_error_against(&doubled, &vals, 12, 12, &region) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn h1_norm_of_a_bump_matches_the_analytic_value() {
        // u = sin(πξ)sin(πη) on the unit-scaled region; |u|² + |∇u|² integrates in closed form.
        let region = Rect::new(0.0, 1.0, 0.0, 1.0);
        let n = 401;
        let vals: Vec<Complex64> =
            region.samples(n, n).iter().map(|p| Complex64::new((PI * p.x1).sin() * (PI * p.x2).sin(), 0.0)).collect();
        let exact = (0.25 + 2.0 * PI * PI * 0.25).sqrt();
        assert!((h1_norm(&vals, n, n, &region) / exact - 1.0).abs() < 1e-4);
    }

    #[test]
    fn cutoff_touching_the_surface_is_rejected() {
        let profile = PmlProfile::new(3.0, 1.0, 4.0, ProfileKind::Smooth).unwrap();
        let mut cfg = SolveConfig::new(SurfaceSpec::new(SurfaceKind::Flat), profile, 1.0, 16);
        cfg.source = Point::new(0.0, 0.25);
        assert!(matches!(extract_source(&cfg), Err(PmlError::Contract(_))));
        cfg.source = Point::new(0.0, 2.8);
        assert!(matches!(extract_source(&cfg), Err(PmlError::Contract(_))));
        cfg.source = Point::new(0.0, 1.5);
        assert!(extract_source(&cfg).is_ok());
    }
}
