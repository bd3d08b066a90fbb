//! Boundary-fitted grid of a vertical strip and its spectral elements.
//!
//! The physical height is x₂ = s + φ(s)·h(x₁) with φ(s) = (1 − s/H)² below the PML
//! start H and φ = 0 above, so the grid follows the surface x₂ = h(x₁) at s = 0 and
//! is the identity in the PML. The s-direction uses uniform second-order finite
//! differences (uniform below H and in the PML) with Dirichlet rows at s = 0 and s = H + L. The x₁-direction uses
//! Chebyshev–Lobatto collocation on elements; element edges carry ∂ₓ₁u as data.
//!
//! Unknowns are ordered s-major, so an element matrix is block tridiagonal with
//! one block per interior s level. It is eliminated by block LU from the surface up.

use faer::Mat;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::cheb;
use crate::error::{PmlError, Result};
use crate::geometry::{PmlProfile, SurfaceSpec};
use crate::linalg::{mul_add, CMat, Lu};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Grid in the mapped vertical coordinate s ∈ [0, H + L], uniform on [0, H] and on
/// [H, H + L]. The spacing below H depends only on H and the resolution, so runs with
/// different L share the same discretization of the physical region.
#[derive(Debug, Clone)]
pub struct VerticalGrid {
    /// Number of intervals; interior levels are 1..intervals−1.
    pub intervals: usize,
    /// Intervals below H.
    pub h_intervals: usize,
    /// Spacing below H.
    pub delta: f64,
    /// Spacing inside the PML.
    pub pml_delta: f64,
    /// PML start H.
    pub pml_start: f64,
    /// Truncation height H + L.
    pub top: f64,
    pub profile: PmlProfile,
}

/// Lateral trace nodes between the surface and the truncation line.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceGrid {
    /// Physical heights x₂, strictly increasing.
    pub nodes: Vec<f64>,
    /// Trapezoidal weights for ∫ · dx₂.
    pub weights: Vec<f64>,
}

impl TraceGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl VerticalGrid {
    /// `resolution` is the number of intervals per unit length of s.
    pub fn new(profile: &PmlProfile, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(PmlError::contract("resolution must be positive"));
        }
        let res = resolution as f64;
        let pml = ((profile.thickness * res).round() as usize).max(4);
        let below = ((profile.pml_start * res).round() as usize).max(8).max(17 - pml.min(17));
        Ok(VerticalGrid {
            intervals: below + pml,
            h_intervals: below,
            delta: profile.pml_start / below as f64,
            pml_delta: profile.thickness / pml as f64,
            pml_start: profile.pml_start,
            top: profile.top(),
            profile: *profile,
        })
    }

    /// Number of interior levels (vertical unknowns per column).
    pub fn levels(&self) -> usize {
        self.intervals - 1
    }

    pub fn s(&self, j: usize) -> f64 {
        if j >= self.intervals {
            self.top
        } else if j <= self.h_intervals {
            j as f64 * self.delta
        } else {
            self.pml_start + (j - self.h_intervals) as f64 * self.pml_delta
        }
    }

    /// Spacings (below, above) around level j.
    pub fn spacing(&self, j: usize) -> (f64, f64) {
        let below = if j <= self.h_intervals { self.delta } else { self.pml_delta };
        let above = if j < self.h_intervals { self.delta } else { self.pml_delta };
        (below, above)
    }

    /// φ(s), φ′(s), φ″(s).
    pub fn phi(&self, s: f64) -> (f64, f64, f64) {
        if s >= self.pml_start {
            return (0.0, 0.0, 0.0);
        }
        let t = 1.0 - s / self.pml_start;
        (t * t, -2.0 * t / self.pml_start, 2.0 / (self.pml_start * self.pml_start))
    }

    /// Physical height of grid point (s, column with mapped height h).
    pub fn x2(&self, s: f64, h: f64) -> f64 {
        s + self.phi(s).0 * h
    }

    /// Inverse of `x2` in s (the map is monotone for |h| < H/2).
    pub fn s_of_x2(&self, x2: f64, h: f64) -> f64 {
        if x2 >= self.pml_start || h == 0.0 {
            return x2;
        }
        let mut s = x2.clamp(0.0, self.pml_start);
        for _ in 0..60 {
            let (p, dp, _) = self.phi(s);
            let step = (s + p * h - x2) / (1.0 + dp * h);
            s -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        s
    }

    /// Complex PML factor α at height s ≥ H (x₂ = s there).
    pub fn alpha(&self, s: f64) -> Complex64 {
        self.profile.alpha(s)
    }

    /// Trace grid on a vertical line whose mapped height is `h_edge`.
    pub fn trace_grid(&self, h_edge: f64) -> TraceGrid {
        let levels = self.levels();
        let mut nodes = Vec::with_capacity(levels);
        let mut weights = Vec::with_capacity(levels);
        for j in 1..=levels {
            let s = self.s(j);
            let (_, dp, _) = self.phi(s);
            nodes.push(self.x2(s, h_edge));
            let (lo, hi) = self.spacing(j);
            weights.push((1.0 + dp * h_edge) * 0.5 * (lo + hi));
        }
        TraceGrid { nodes, weights }
    }

    /// Checks that the map is invertible for the surface.
    pub fn check_surface(&self, spec: &SurfaceSpec) -> Result<()> {
        if !(spec.max_mapped_height() < 0.45 * self.pml_start) {
            return Err(PmlError::contract(format!(
                "surface height {} too large for the grid map below H = {}",
                spec.max_mapped_height(),
                self.pml_start
            )));
        }
        Ok(())
    }
}

/// One element [a, b] with `nodes` Lobatto points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementSpec {
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
}

/// Element widths and node counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    /// Width of the thinnest element at each cell edge; widths then double.
    pub edge_width: f64,
    /// Largest width of an interior element.
    pub bulk_width: f64,
    pub edge_nodes: usize,
    pub bulk_nodes: usize,
    /// Elements across the source window, which carries the forcing.
    pub window_elements: usize,
    /// Nodes per window element.
    pub window_nodes: usize,
}

impl LayoutParams {
    /// Defaults for wavenumber k and vertical spacing Δ: the thin edge elements
    /// resolve the steepest evanescent modes (decay length ≈ Δ/2).
    pub fn auto(k: f64, delta: f64) -> Self {
        let bulk_width = (2.5 / k.max(1e-3)).min(1.0);
        let bulk_nodes = ((10.0 + 3.0 * k * bulk_width).ceil() as usize).max(16);
        LayoutParams {
            edge_width: (16.0 * delta).min(0.25),
            bulk_width,
            edge_nodes: 24,
            bulk_nodes,
            window_elements: 8,
            window_nodes: 32,
        }
    }
}

/// Elements of the cell [center − π, center + π], split at the surface breakpoints.
/// With `center_window` the interval [−w, w] around x₁ = 0 is split into
/// `window_elements` equal elements of `window_nodes` nodes.
pub fn cell_elements(
    spec: &SurfaceSpec,
    center: f64,
    params: &LayoutParams,
    center_window: Option<f64>,
) -> Vec<ElementSpec> {
    let a = center - PI;
    let b = center + PI;
    let mut graded = Vec::new();
    let mut w = params.edge_width;
    let mut off = 0.0;
    while off + w <= 0.5 * PI && w <= params.bulk_width {
        off += w;
        graded.push(off);
        w *= 2.0;
    }
    let mut pts = vec![a, b];
    for &g in &graded {
        pts.push(a + g);
        pts.push(b - g);
    }
    pts.extend(spec.breakpoints(a, b));
    if let Some(cw) = center_window {
        let parts = params.window_elements.max(1);
        for i in 0..=parts {
            pts.push(-cw + 2.0 * cw * i as f64 / parts as f64);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    let edge_zone = off;
    let mut out = Vec::new();
    for pair in pts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let pieces = ((hi - lo) / params.bulk_width - 1e-9).ceil().max(1.0) as usize;
        let near_edge = lo < a + edge_zone - 1e-9 || hi > b - edge_zone + 1e-9;
        let is_window = center_window.is_some_and(|cw| lo >= -cw - 1e-9 && hi <= cw + 1e-9);
        let nodes = if near_edge { params.edge_nodes } else { params.bulk_nodes };
        let pieces = if near_edge || is_window { 1 } else { pieces };
        let nodes = if is_window { params.window_nodes } else { nodes };
        for p in 0..pieces {
            let x0 = lo + (hi - lo) * p as f64 / pieces as f64;
            let x1 = lo + (hi - lo) * (p + 1) as f64 / pieces as f64;
            out.push(ElementSpec { a: x0, b: x1, nodes });
        }
    }
    out
}

/// Role of a row of the element system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// Collocated PDE.
    Pde,
    /// ∂ₓ₁u = g on an element edge.
    Neumann,
    /// Node inside a solid; u = 0.
    Solid,
}

/// Discrete PDE data shared by the elements of a strip.
#[derive(Debug, Clone)]
pub struct StripModel {
    pub spec: SurfaceSpec,
    pub wavenumber: f64,
    pub grid: VerticalGrid,
}

impl StripModel {
    pub fn new(spec: &SurfaceSpec, profile: &PmlProfile, k: f64, resolution: usize) -> Result<Self> {
        if !(k > 0.0) {
            return Err(PmlError::contract("wavenumber must be positive"));
        }
        let grid = VerticalGrid::new(profile, resolution)?;
        grid.check_surface(spec)?;
        spec.validate(profile.pml_start)?;
        Ok(StripModel { spec: *spec, wavenumber: k, grid })
    }

    /// Physical point of node (x₁, level j).
    pub fn point(&self, x1: f64, j: usize) -> (f64, f64) {
        (x1, self.grid.x2(self.grid.s(j), self.spec.mapped_height(x1)))
    }

    /// Builds the element system for `es`.
    pub fn element(&self, es: ElementSpec) -> Element {
        Element::assemble(self, es)
    }
}

/// Collocation system of one element with its block factorization.
pub struct Element {
    pub spec: ElementSpec,
    /// Lobatto abscissae.
    pub x: Vec<f64>,
    n: usize,
    m: usize,
    lower: Vec<CMat>,
    diag: Vec<CMat>,
    upper: Vec<CMat>,
    kinds: Vec<RowKind>,
    /// Active (non-solid) levels on the left and right edges, as indices 0..levels.
    pub left_active: Vec<usize>,
    pub right_active: Vec<usize>,
    factor: Option<BlockFactor>,
}

struct BlockFactor {
    pivots: Vec<Lu>,
    /// K_j = D′_j⁻¹ C_j.
    k: Vec<CMat>,
}

impl Element {
    fn assemble(model: &StripModel, es: ElementSpec) -> Element {
        let n = es.nodes;
        let g = &model.grid;
        let m = g.levels();
        let x = cheb::lobatto_nodes(n, es.a, es.b);
        let d1 = cheb::diff_matrix(&x);
        let d2 = cheb::square(&d1, n);
        let k2 = Complex64::new(model.wavenumber * model.wavenumber, 0.0);
        let dl = g.delta;
        let mut lower = vec![Mat::zeros(n, n); m];
        let mut diag = vec![Mat::zeros(n, n); m];
        let mut upper = vec![Mat::zeros(n, n); m];
        let mut kinds = vec![RowKind::Pde; n * m];
        let cols: Vec<(f64, f64, f64)> = x
            .iter()
            .map(|&t| (model.spec.mapped_height(t), model.spec.mapped_slope(t), model.spec.mapped_curvature(t)))
            .collect();
        for jb in 0..m {
            let s = g.s(jb + 1);
            let (p, dp, ddp) = g.phi(s);
            let (lo, di, up) = (&mut lower[jb], &mut diag[jb], &mut upper[jb]);
            for i in 0..n {
                let (h, hp, hpp) = cols[i];
                let x2 = s + p * h;
                if model.spec.is_solid(x[i], x2) {
                    kinds[jb * n + i] = RowKind::Solid;
                    di[(i, i)] = ONE;
                    continue;
                }
                let jac = 1.0 + dp * h;
                let q = p * hp / jac;
                if i == 0 || i == n - 1 {
                    kinds[jb * n + i] = RowKind::Neumann;
                    for c in 0..n {
                        di[(i, c)] += Complex64::new(d1[i * n + c], 0.0);
                    }
                    if q != 0.0 {
                        up[(i, i)] -= Complex64::new(q / (2.0 * dl), 0.0);
                        lo[(i, i)] += Complex64::new(q / (2.0 * dl), 0.0);
                    }
                    continue;
                }
                for c in 0..n {
                    di[(i, c)] += Complex64::new(d2[i * n + c], 0.0);
                }
                di[(i, i)] += k2;
                if s >= g.pml_start {
                    let (dm, dp_) = g.spacing(jb + 1);
                    let a = g.alpha(s);
                    let bp = 1.0 / g.alpha(s + 0.5 * dp_) / dp_;
                    let bm = 1.0 / g.alpha(s - 0.5 * dm) / dm;
                    let scale = 2.0 / (a * (dm + dp_));
                    di[(i, i)] -= (bp + bm) * scale;
                    up[(i, i)] += bp * scale;
                    lo[(i, i)] += bm * scale;
                } else {
                    let js = ddp * h;
                    let q1 = p * hpp / jac - p * hp * dp * hp / (jac * jac);
                    let qs = dp * hp / jac - p * hp * ddp * h / (jac * jac);
                    let a = q * q + 1.0 / (jac * jac);
                    let c = q * qs - q1 - js / jac.powi(3);
                    if q != 0.0 {
                        for cc in 0..n {
                            let v = Complex64::new(q * d1[i * n + cc] / dl, 0.0);
                            up[(i, cc)] -= v;
                            lo[(i, cc)] += v;
                        }
                    }
                    di[(i, i)] -= Complex64::new(2.0 * a / (dl * dl), 0.0);
                    up[(i, i)] += Complex64::new(a / (dl * dl) + c / (2.0 * dl), 0.0);
                    lo[(i, i)] += Complex64::new(a / (dl * dl) - c / (2.0 * dl), 0.0);
                }
            }
        }
        let left_active = (0..m).filter(|&jb| kinds[jb * n] == RowKind::Neumann).collect();
        let right_active = (0..m).filter(|&jb| kinds[jb * n + n - 1] == RowKind::Neumann).collect();
        Element { spec: es, x, n, m, lower, diag, upper, kinds, left_active, right_active, factor: None }
    }

    /// Nodes in x₁.
    pub fn nodes(&self) -> usize {
        self.n
    }

    /// Interior s levels.
    pub fn levels(&self) -> usize {
        self.m
    }

    /// Row kind of node (i, level jb).
    pub fn row_kind(&self, i: usize, jb: usize) -> RowKind {
        self.kinds[jb * self.n + i]
    }

    /// Calls `f(row, col, value)` for every nonzero entry; index = jb·nodes + i.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, Complex64)) {
        let n = self.n;
        for jb in 0..self.m {
            for r in 0..n {
                for c in 0..n {
                    let v = self.diag[jb][(r, c)];
                    if v != ZERO {
                        f(jb * n + r, jb * n + c, v);
                    }
                    if jb > 0 {
                        let v = self.lower[jb][(r, c)];
                        if v != ZERO {
                            f(jb * n + r, (jb - 1) * n + c, v);
                        }
                    }
                    if jb + 1 < self.m {
                        let v = self.upper[jb][(r, c)];
                        if v != ZERO {
                            f(jb * n + r, (jb + 1) * n + c, v);
                        }
                    }
                }
            }
        }
    }

    /// Block LU from the lowest level up: D′₁ = D₁, D′ⱼ = Dⱼ − Bⱼ D′ⱼ₋₁⁻¹ Cⱼ₋₁.
    pub fn factor(&mut self) -> Result<()> {
        if self.factor.is_some() {
            return Ok(());
        }
        let mut pivots = Vec::with_capacity(self.m);
        let mut ks: Vec<CMat> = Vec::with_capacity(self.m);
        for jb in 0..self.m {
            let mut d = self.diag[jb].clone();
            if jb > 0 {
                mul_add(&mut d, self.lower[jb].as_ref(), ks[jb - 1].as_ref(), -ONE);
            }
            let lu = Lu::new(d.as_ref(), "element block elimination").map_err(|e| annotate(e, &self.spec, jb))?;
            let kj = if jb + 1 < self.m { lu.solve(self.upper[jb].as_ref()) } else { Mat::zeros(self.n, self.n) };
            pivots.push(lu);
            ks.push(kj);
        }
        self.factor = Some(BlockFactor { pivots, k: ks });
        Ok(())
    }

    /// Solves for right-hand sides given per level (n × cols each). Levels below
    /// `first` must be zero.
    fn solve_blocks(&self, rhs: &mut [CMat], first: usize) {
        let f = self.factor.as_ref().expect("element factored");
        for jb in first..self.m {
            if jb > first {
                let (done, rest) = rhs.split_at_mut(jb);
                mul_add(&mut rest[0], self.lower[jb].as_ref(), done[jb - 1].as_ref(), -ONE);
            }
            rhs[jb] = f.pivots[jb].solve(rhs[jb].as_ref());
        }
        for jb in (0..self.m.saturating_sub(1)).rev() {
            let (head, tail) = rhs.split_at_mut(jb + 1);
            mul_add(&mut head[jb], f.k[jb].as_ref(), tail[0].as_ref(), -ONE);
        }
    }

    /// Edge-to-edge Neumann-to-Dirichlet blocks restricted to active levels.
    pub fn ntd(&mut self) -> Result<(CMat, CMat, CMat, CMat)> {
        self.factor()?;
        let nl = self.left_active.len();
        let nr = self.right_active.len();
        let mut columns: Vec<(usize, bool, usize)> = Vec::with_capacity(nl + nr);
        for (c, &jb) in self.left_active.iter().enumerate() {
            columns.push((jb, false, c));
        }
        for (c, &jb) in self.right_active.iter().enumerate() {
            columns.push((jb, true, c));
        }
        columns.sort_by_key(|&(jb, right, _)| (jb, right));
        let mut n11 = Mat::zeros(nl, nl);
        let mut n12 = Mat::zeros(nl, nr);
        let mut n21 = Mat::zeros(nr, nl);
        let mut n22 = Mat::zeros(nr, nr);
        const CHUNK: usize = 64;
        for chunk in columns.chunks(CHUNK) {
            let first = chunk[0].0;
            let w = chunk.len();
            let mut rhs: Vec<CMat> = (0..self.m).map(|_| Mat::zeros(self.n, w)).collect();
            for (c, &(jb, right, _)) in chunk.iter().enumerate() {
                let i = if right { self.n - 1 } else { 0 };
                rhs[jb][(i, c)] = ONE;
            }
            self.solve_blocks(&mut rhs, first);
            for (c, &(_, right, col)) in chunk.iter().enumerate() {
                for (r, &jb) in self.left_active.iter().enumerate() {
                    let v = rhs[jb][(0, c)];
                    if right {
                        n12[(r, col)] = v;
                    } else {
                        n11[(r, col)] = v;
                    }
                }
                for (r, &jb) in self.right_active.iter().enumerate() {
                    let v = rhs[jb][(self.n - 1, c)];
                    if right {
                        n22[(r, col)] = v;
                    } else {
                        n21[(r, col)] = v;
                    }
                }
            }
        }
        Ok((n11, n12, n21, n22))
    }

    /// Full solution for edge data on the active levels and a forcing on PDE rows
    /// (`forcing[jb * nodes + i]`). Returns u in the same layout.
    pub fn solve(
        &mut self,
        g_left: &[Complex64],
        g_right: &[Complex64],
        forcing: Option<&[Complex64]>,
    ) -> Result<Vec<Complex64>> {
        self.factor()?;
        assert_eq!(g_left.len(), self.left_active.len());
        assert_eq!(g_right.len(), self.right_active.len());
        let n = self.n;
        let mut rhs: Vec<CMat> = (0..self.m).map(|_| Mat::zeros(n, 1)).collect();
        if let Some(f) = forcing {
            for jb in 0..self.m {
                for i in 0..n {
                    if self.kinds[jb * n + i] == RowKind::Pde {
                        rhs[jb][(i, 0)] = f[jb * n + i];
                    }
                }
            }
        }
        for (v, &jb) in g_left.iter().zip(&self.left_active) {
            rhs[jb][(0, 0)] = *v;
        }
        for (v, &jb) in g_right.iter().zip(&self.right_active) {
            rhs[jb][(n - 1, 0)] = *v;
        }
        self.solve_blocks(&mut rhs, 0);
        let mut out = vec![ZERO; n * self.m];
        for jb in 0..self.m {
            for i in 0..n {
                out[jb * n + i] = rhs[jb][(i, 0)];
            }
        }
        Ok(out)
    }

    /// Edge traces (active levels) of a full solution vector.
    pub fn traces(&self, u: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        (
            self.left_active.iter().map(|&jb| u[jb * n]).collect(),
            self.right_active.iter().map(|&jb| u[jb * n + n - 1]).collect(),
        )
    }

    /// Residual A·u − rhs for checks (rhs assembled as in `solve`).
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; u.len()];
        self.for_each_entry(|r, c, v| out[r] += v * u[c]);
        out
    }

    /// Dense product helper used by tests of the block elimination.
    pub fn dense(&self) -> CMat {
        let size = self.n * self.m;
        let mut a = Mat::zeros(size, size);
        self.for_each_entry(|r, c, v| a[(r, c)] = v);
        a
    }
}

fn annotate(e: PmlError, es: &ElementSpec, jb: usize) -> PmlError {
    match e {
        PmlError::Singular { context, hint } => {
            PmlError::Singular { context: format!("{context} on [{:.4}, {:.4}] at level {}", es.a, es.b, jb + 1), hint }
        }
        other => other,
    }
}
