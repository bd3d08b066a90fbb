//! Neumann-to-Dirichlet blocks of periodic cells, recursive doubling and the
//! backward Riccati iteration that terminates a periodic semi-waveguide.
//!
//! Blocks map lateral ∂ₓ₁u on the (left, right) traces to u on the same traces:
//!
//! ```text
//! u_left  = n11·g_left + n12·g_right (+ p_left)
//! u_right = n21·g_left + n22·g_right (+ p_right)
//! ```
//!
//! with the x₁-derivative taken in the +x₁ direction on both sides. The optional
//! affine part carries the response to an interior forcing.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::{cell_elements, ElementSpec, LayoutParams, StripModel, TraceGrid};
use crate::error::{PmlError, Result};
use crate::linalg::{frobenius, mul, mul_add, mul_vec, spectral_radius, CMat, Lu};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// NtD blocks of a chain of 2^level cells (or of any glued interval).
#[derive(Debug, Clone)]
pub struct NtdBlocks {
    pub n11: CMat,
    pub n12: CMat,
    pub n21: CMat,
    pub n22: CMat,
    pub level: u32,
    /// Active trace levels on the left and right edges.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Affine response (left, right) to an interior forcing, if any.
    pub source: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

impl NtdBlocks {
    /// Blocks from explicit matrices on fully active square traces.
    pub fn from_matrices(n11: CMat, n12: CMat, n21: CMat, n22: CMat, level: u32) -> Self {
        let n = n11.nrows();
        NtdBlocks { n11, n12, n21, n22, level, left: (0..n).collect(), right: (0..n).collect(), source: None }
    }

    /// Dimension of the left trace.
    pub fn dim(&self) -> usize {
        self.left.len()
    }

    /// Blocks of the mirror image x₁ ↦ −x₁. The derivative changes sign and the
    /// traces swap: n′11 = −n22, n′12 = −n21, n′21 = −n12, n′22 = −n11.
    pub fn mirror(&self) -> NtdBlocks {
        let neg = |m: &CMat| Mat::from_fn(m.nrows(), m.ncols(), |i, j| -m[(i, j)]);
        NtdBlocks {
            n11: neg(&self.n22),
            n12: neg(&self.n21),
            n21: neg(&self.n12),
            n22: neg(&self.n11),
            level: self.level,
            left: self.right.clone(),
            right: self.left.clone(),
            source: self.source.as_ref().map(|(l, r)| (r.clone(), l.clone())),
        }
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        [&self.n11, &self.n12, &self.n21, &self.n22].iter().all(|m| {
            (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
        })
    }
}

/// Glues `a` (left) and `b` (right) by eliminating the shared trace with continuity
/// of u and ∂ₓ₁u.
pub fn glue(a: &NtdBlocks, b: &NtdBlocks) -> Result<NtdBlocks> {
    if a.right != b.left {
        return Err(PmlError::contract("glued blocks do not share the interface trace"));
    }
    let mut m = a.n22.clone();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] -= b.n11[(i, j)];
        }
    }
    let lu = Lu::new(m.as_ref(), "interface elimination")?;
    let xa = lu.solve(a.n21.as_ref());
    let xb = lu.solve(b.n12.as_ref());
    let mut n11 = a.n11.clone();
    mul_add(&mut n11, a.n12.as_ref(), xa.as_ref(), -ONE);
    let n12 = mul(a.n12.as_ref(), xb.as_ref());
    let mut n21 = mul(b.n21.as_ref(), xa.as_ref());
    for j in 0..n21.ncols() {
        for i in 0..n21.nrows() {
            n21[(i, j)] = -n21[(i, j)];
        }
    }
    let mut n22 = b.n22.clone();
    mul_add(&mut n22, b.n21.as_ref(), xb.as_ref(), ONE);
    let source = if a.source.is_some() || b.source.is_some() {
        let zl = vec![Complex64::new(0.0, 0.0); a.left.len()];
        let zm = vec![Complex64::new(0.0, 0.0); a.right.len()];
        let zr = vec![Complex64::new(0.0, 0.0); b.right.len()];
        let (pa_l, pa_r) = a.source.clone().unwrap_or((zl, zm.clone()));
        let (pb_l, pb_r) = b.source.clone().unwrap_or((zm, zr));
        let jump: Vec<Complex64> = pb_l.iter().zip(&pa_r).map(|(x, y)| x - y).collect();
        let s = lu.solve_vec(&jump);
        let left: Vec<Complex64> = pa_l.iter().zip(mul_vec(a.n12.as_ref(), &s)).map(|(p, v)| p + v).collect();
        let right: Vec<Complex64> = pb_r.iter().zip(mul_vec(b.n21.as_ref(), &s)).map(|(p, v)| p + v).collect();
        Some((left, right))
    } else {
        None
    };
    Ok(NtdBlocks {
        n11,
        n12,
        n21,
        n22,
        level: a.level.max(b.level),
        left: a.left.clone(),
        right: b.right.clone(),
        source,
    })
}

/// Level m + 1 blocks from level m: two copies glued.
pub fn double_ntd(blocks: &NtdBlocks) -> Result<NtdBlocks> {
    let mut out = glue(blocks, blocks).map_err(|e| match e {
        PmlError::Singular { context, hint } => {
            PmlError::Singular { context: format!("{context} while doubling level {}", blocks.level), hint }
        }
        other => other,
    })?;
    out.level = blocks.level + 1;
    Ok(out)
}

/// Glues a sequence of blocks from left to right.
pub fn glue_chain(parts: &[NtdBlocks]) -> Result<NtdBlocks> {
    let mut iter = parts.iter();
    let first = iter.next().ok_or_else(|| PmlError::contract("empty chain"))?;
    let mut acc = first.clone();
    for p in iter {
        acc = glue(&acc, p)?;
    }
    Ok(acc)
}

/// Element NtD blocks, with the affine part for an optional forcing.
pub fn element_blocks(model: &StripModel, es: ElementSpec) -> Result<NtdBlocks> {
    let mut e = model.element(es);
    let (n11, n12, n21, n22) = e.ntd()?;
    Ok(NtdBlocks {
        n11,
        n12,
        n21,
        n22,
        level: 0,
        left: e.left_active.clone(),
        right: e.right_active.clone(),
        source: None,
    })
}

/// NtD blocks of a list of adjacent elements; elements are assembled in parallel.
pub fn chain_blocks(model: &StripModel, elements: &[ElementSpec]) -> Result<NtdBlocks> {
    let parts: Vec<NtdBlocks> = elements.par_iter().map(|&es| element_blocks(model, es)).collect::<Result<Vec<_>>>()?;
    glue_chain(&parts)
}

/// Level-0 blocks of the cell [center − π, center + π].
pub fn assemble_cell_ntd(model: &StripModel, params: &LayoutParams, center: f64) -> Result<NtdBlocks> {
    let els = cell_elements(&model.spec, center, params, None);
    let blocks = chain_blocks(model, &els)?;
    let n = model.grid.levels();
    if blocks.left.len() != n || blocks.right.len() != n {
        return Err(PmlError::contract("cell edges must be free of solid nodes"));
    }
    if !blocks.is_finite() {
        return Err(PmlError::singular("cell NtD", "non-finite entries"));
    }
    Ok(blocks)
}

/// Trace grid of the cell edges of `model`.
pub fn cell_trace_grid(model: &StripModel) -> TraceGrid {
    model.grid.trace_grid(model.spec.mapped_height(std::f64::consts::PI))
}

/// Options of the doubling and Riccati stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    pub max_level: u32,
    /// Stop doubling once ‖n12‖·‖n21‖ ≤ tol·‖n11⁽⁰⁾‖² (Frobenius norms).
    pub tol: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions { max_level: 12, tol: 1e-12 }
    }
}

/// Doubling levels 0..=M with M the first level where the coupling proxy is below tol.
pub fn doubling_levels(level0: &NtdBlocks, opts: RiccatiOptions) -> Result<Vec<NtdBlocks>> {
    let scale = frobenius(level0.n11.as_ref()).powi(2).max(f64::MIN_POSITIVE);
    let mut levels = vec![level0.clone()];
    loop {
        let last = levels.last().expect("non-empty");
        let proxy = frobenius(last.n12.as_ref()) * frobenius(last.n21.as_ref()) / scale;
        if proxy < opts.tol {
            return Ok(levels);
        }
        if last.level >= opts.max_level {
            return Err(PmlError::Absorption(format!(
                "coupling across 2^{} cells is still {proxy:.3e} (> {:.1e}); raise max_level or the absorption",
                last.level, opts.tol
            )));
        }
        let next = double_ntd(last)?;
        levels.push(next);
    }
}

/// Marching operator ℛ with the backward iterates [ℛ]^{2^m}, m = 0..=M.
#[derive(Debug, Clone)]
pub struct MarchingOperator {
    pub matrix: CMat,
    pub powers: Vec<CMat>,
}

impl MarchingOperator {
    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(self.matrix.as_ref())
    }

    /// Operator norm of ℛ in the weighted trace inner product.
    pub fn weighted_norm(&self, grid: &TraceGrid) -> Result<f64> {
        let n = self.matrix.nrows();
        let w: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
        let m = Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * (w[i] / w[j]));
        crate::linalg::operator_norm(m.as_ref())
    }
}

/// Backward iteration [ℛ]^{2^m} = (n22 − n11)⁻¹(n12·[ℛ]^{2^{m+1}} − n21) from
/// [ℛ]^{2^{M+1}} = 0 down to m = 0.
pub fn riccati_backward(levels: &[NtdBlocks]) -> Result<MarchingOperator> {
    backward(levels, false)
}

/// Backward iteration on the levels, or on their mirror images without copying them.
/// Mirroring leaves n22 − n11 unchanged and turns n12·R − n21 into n12 − n21·R.
fn backward(levels: &[NtdBlocks], mirrored: bool) -> Result<MarchingOperator> {
    let n = levels[0].dim();
    let mut next: CMat = Mat::zeros(n, n);
    let mut powers = vec![Mat::zeros(n, n); levels.len()];
    for (m, lv) in levels.iter().enumerate().rev() {
        let mut d = lv.n22.clone();
        for j in 0..n {
            for i in 0..n {
                d[(i, j)] -= lv.n11[(i, j)];
            }
        }
        let lu = Lu::new(d.as_ref(), &format!("Riccati step at level {m}"))?;
        let rhs = if mirrored {
            let mut rhs = lv.n12.clone();
            mul_add(&mut rhs, lv.n21.as_ref(), next.as_ref(), -ONE);
            rhs
        } else {
            let mut rhs = mul(lv.n12.as_ref(), next.as_ref());
            for j in 0..n {
                for i in 0..n {
                    rhs[(i, j)] -= lv.n21[(i, j)];
                }
            }
            rhs
        };
        next = lu.solve(rhs.as_ref());
        powers[m] = next.clone();
    }
    Ok(MarchingOperator { matrix: next, powers })
}

/// ℛ⁺ from level-0 blocks: doubling, backward iteration and the contraction check.
pub fn riccati_solve(level0: &NtdBlocks, opts: RiccatiOptions) -> Result<MarchingOperator> {
    let levels = doubling_levels(level0, opts)?;
    let r = riccati_backward(&levels)?;
    check_contraction(&r)?;
    Ok(r)
}

fn check_contraction(r: &MarchingOperator) -> Result<f64> {
    let rho = r.spectral_radius()?;
    if !(rho < 1.0) {
        return Err(PmlError::Absorption(format!(
            "marching operator has spectral radius {rho:.6} >= 1; increase sigma_max or L"
        )));
    }
    Ok(rho)
}

/// 𝒩⁺ = n11⁽⁰⁾ + n12⁽⁰⁾ℛ⁺.
pub fn lateral_ntd(level0: &NtdBlocks, r: &MarchingOperator) -> CMat {
    let mut out = level0.n11.clone();
    mul_add(&mut out, level0.n12.as_ref(), r.matrix.as_ref(), ONE);
    out
}

/// Relative Riccati residual ‖n21 + n22ℛ − n11ℛ − n12ℛ²‖_F / ‖n21‖_F.
pub fn riccati_residual(level0: &NtdBlocks, r: &CMat) -> f64 {
    let r2 = mul(r.as_ref(), r.as_ref());
    let mut res = level0.n21.clone();
    mul_add(&mut res, level0.n22.as_ref(), r.as_ref(), ONE);
    mul_add(&mut res, level0.n11.as_ref(), r.as_ref(), -ONE);
    mul_add(&mut res, level0.n12.as_ref(), r2.as_ref(), -ONE);
    frobenius(res.as_ref()) / frobenius(level0.n21.as_ref()).max(f64::MIN_POSITIVE)
}

/// Lateral NtD operators of both semi-waveguides.
#[derive(Debug, Clone)]
pub struct LateralOperators {
    /// Right semi-waveguide: u = 𝒩⁺ ∂ₓ₁u on its left end.
    pub plus: CMat,
    /// Left semi-waveguide: u = 𝒩⁻ ∂ₓ₁u on its right end.
    pub minus: CMat,
    pub r_plus: MarchingOperator,
    pub r_minus: MarchingOperator,
    pub rho_plus: f64,
    pub rho_minus: f64,
    /// Doubling depth M used.
    pub depth: u32,
}

/// Builds 𝒩⁺ and 𝒩⁻ from the periodic cell's level-0 blocks. The left side uses the
/// mirrored cell: 𝒩⁻ = −(n′11 + n′12ℛ′) = n22 + n21ℛ′ with n′ the mirrored blocks.
pub fn lateral_operators(level0: &NtdBlocks, opts: RiccatiOptions) -> Result<LateralOperators> {
    let levels = doubling_levels(level0, opts)?;
    let r_plus = backward(&levels, false)?;
    let rho_plus = check_contraction(&r_plus)?;
    let r_minus = backward(&levels, true)?;
    let rho_minus = check_contraction(&r_minus)?;
    let plus = lateral_ntd(level0, &r_plus);
    let mut minus = level0.n22.clone();
    mul_add(&mut minus, level0.n21.as_ref(), r_minus.matrix.as_ref(), ONE);
    Ok(LateralOperators {
        plus,
        minus,
        r_plus,
        r_minus,
        rho_plus,
        rho_minus,
        depth: levels.last().map_or(0, |l| l.level),
    })
}
