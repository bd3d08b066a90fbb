//! Shared oracles for the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;

use pmlconv::discretization::{cell_elements, Element, LayoutParams, RowKind, StripModel};
use pmlconv::geometry::{PmlProfile, Point, ProfileKind, SurfaceKind, SurfaceSpec};
use pmlconv::linalg::{mul, mul_vec, CMat, Lu};
use pmlconv::ntd::{assemble_cell_ntd, NtdBlocks};
use pmlconv::special::hankel1_0;
use pmlconv::spectral::{mu_real, printed, OracleParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Vertical part V of the flat-strip operator: each discrete row reads u₁₁ + V u.
pub fn vertical_operator(model: &StripModel) -> CMat {
    let g = &model.grid;
    let m = g.levels();
    let mut v: CMat = Mat::zeros(m, m);
    for jb in 0..m {
        let s = g.s(jb + 1);
        v[(jb, jb)] += Complex64::new(model.wavenumber * model.wavenumber, 0.0);
        let (dm, dp) = g.spacing(jb + 1);
        let (lo, di, up) = if s >= g.pml_start {
            let a = g.alpha(s);
            let bp = 1.0 / g.alpha(s + 0.5 * dp) / dp;
            let bm = 1.0 / g.alpha(s - 0.5 * dm) / dm;
            let sc = 2.0 / (a * (dm + dp));
            (bm * sc, -(bp + bm) * sc, bp * sc)
        } else {
            let sc = Complex64::new(1.0 / (dm * dm), 0.0);
            (sc, -2.0 * sc, sc)
        };
        v[(jb, jb)] += di;
        if jb > 0 {
            v[(jb, jb - 1)] = lo;
        }
        if jb + 1 < m {
            v[(jb, jb + 1)] = up;
        }
    }
    v
}

/// Modal data of the x₁-continuous flat strip: V = W diag(μ²) W⁻¹ with Im μ ≥ 0.
pub struct Modal {
    pub w: CMat,
    pub w_inv: CMat,
    pub mu: Vec<Complex64>,
}

impl Modal {
    pub fn new(model: &StripModel) -> Modal {
        let v = vertical_operator(model);
        let evd = v.eigen().unwrap();
        let m = v.nrows();
        let w = evd.U().to_owned();
        let mu: Vec<Complex64> = (0..m)
            .map(|j| {
                let r = evd.S().column_vector()[j].sqrt();
                if r.im < 0.0 {
                    -r
                } else {
                    r
                }
            })
            .collect();
        let ident = Mat::from_fn(m, m, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { ZERO });
        let w_inv = Lu::new(w.as_ref(), "modal basis").unwrap().solve(ident.as_ref());
        Modal { w, w_inv, mu }
    }

    pub fn apply(&self, f: impl Fn(Complex64) -> Complex64) -> CMat {
        let m = self.mu.len();
        let scaled = Mat::from_fn(m, m, |i, j| self.w[(i, j)] * f(self.mu[j]));
        mul(scaled.as_ref(), self.w_inv.as_ref())
    }

    /// Blocks of a flat strip of width d. With e = e^{iμd} (|e| ≤ 1),
    /// cos/(μ sin) = i(1 + e²)/(μ(e² − 1)) and 1/(μ sin) = 2ie/(μ(e² − 1)), which stay
    /// finite for strongly evanescent modes.
    pub fn blocks(&self, d: f64) -> [CMat; 4] {
        let cot = move |mu: Complex64| {
            let e2 = (2.0 * I * mu * d).exp();
            I * (1.0 + e2) / (mu * (e2 - 1.0))
        };
        let csc = move |mu: Complex64| {
            let e = (I * mu * d).exp();
            2.0 * I * e / (mu * (e * e - 1.0))
        };
        [self.apply(cot), self.apply(move |mu| -csc(mu)), self.apply(csc), self.apply(move |mu| -cot(mu))]
    }

    /// Semi-discrete solution of v₁₁ + V v = f(x₁) on the whole line with outgoing
    /// modes, for a forcing supported in [a, b]. Returns v at x₁ on every level.
    pub fn line_response(
        &self,
        forcing: impl Fn(f64) -> Vec<Complex64>,
        a: f64,
        b: f64,
        x1: f64,
        panels: usize,
    ) -> Vec<Complex64> {
        let m = self.mu.len();
        let mut acc = vec![ZERO; m];
        let gl = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for &(t, w) in &gl {
                let y = mid + 0.5 * h * t;
                let f = mul_vec(self.w_inv.as_ref(), &forcing(y));
                for n in 0..m {
                    let mu = self.mu[n];
                    let g = (Complex64::new(0.0, 1.0) * mu * (x1 - y).abs()).exp() / (Complex64::new(0.0, 2.0) * mu);
                    acc[n] += g * f[n] * (0.5 * h * w);
                }
            }
        }
        mul_vec(self.w.as_ref(), &acc)
    }
}

/// Flat strip with H = 2, L = 1.
pub fn flat_model(kind: ProfileKind, sigma: f64, k: f64, resolution: usize) -> StripModel {
    let profile = PmlProfile::new(2.0, 1.0, sigma, kind).unwrap();
    StripModel::new(&SurfaceSpec::new(SurfaceKind::Flat), &profile, k, resolution).unwrap()
}

pub fn cell(model: &StripModel) -> NtdBlocks {
    let params = LayoutParams::auto(model.wavenumber, model.grid.delta);
    assemble_cell_ntd(model, &params, 0.0).unwrap()
}

/// Sine surface with H = 2.5, L = 1, constant absorption, k = 1.5.
pub fn sine_model(sigma: f64, resolution: usize) -> StripModel {
    let profile = PmlProfile::new(2.5, 1.0, sigma, ProfileKind::Constant).unwrap();
    StripModel::new(&SurfaceSpec::new(SurfaceKind::Sine), &profile, 1.5, resolution).unwrap()
}

/// Dense monolithic system of consecutive cells with shared interface nodes; returns
/// the NtD blocks between the outer edges.
pub fn monolithic_blocks(model: &StripModel, params: &LayoutParams, cells: usize) -> [CMat; 4] {
    let elements: Vec<Element> = (0..cells)
        .flat_map(|c| cell_elements(&model.spec, 2.0 * PI * c as f64 + PI, params, None))
        .map(|es| model.element(es))
        .collect();
    let m = model.grid.levels();
    let offsets: Vec<usize> = elements
        .iter()
        .scan(0, |acc, e| {
            let o = *acc;
            *acc += e.nodes() * m;
            Some(o)
        })
        .collect();
    let total = offsets.last().unwrap() + elements.last().unwrap().nodes() * m;
    let mut a: CMat = Mat::zeros(total, total);
    let ne = elements.len();
    for (e, el) in elements.iter().enumerate() {
        let n = el.nodes();
        let off = offsets[e];
        el.for_each_entry(|r, c, v| {
            let (i, jb) = (r % n, r / n);
            let interior_right = i == n - 1 && e + 1 < ne && el.row_kind(i, jb) == RowKind::Neumann;
            let interior_left = i == 0 && e > 0 && el.row_kind(i, jb) == RowKind::Neumann;
            if interior_right {
                // Flux continuity lives in the right neighbour's left-edge row.
                let row = offsets[e + 1] + jb * elements[e + 1].nodes();
                a[(row, off + c)] += v;
            } else if interior_left {
                a[(off + r, off + c)] -= v;
            } else {
                a[(off + r, off + c)] += v;
            }
        });
        if e + 1 < ne {
            for jb in 0..m {
                if el.row_kind(n - 1, jb) == RowKind::Neumann {
                    let row = off + jb * n + n - 1;
                    a[(row, row)] += Complex64::new(1.0, 0.0);
                    a[(row, offsets[e + 1] + jb * elements[e + 1].nodes())] -= Complex64::new(1.0, 0.0);
                }
            }
        }
    }
    let lu = Lu::new(a.as_ref(), "monolithic").unwrap();
    let first = &elements[0];
    let left: Vec<usize> = (0..m).map(|jb| jb * first.nodes()).collect();
    let last_n = elements[ne - 1].nodes();
    let right: Vec<usize> = (0..m).map(|jb| offsets[ne - 1] + jb * last_n + last_n - 1).collect();
    let mut rhs: CMat = Mat::zeros(total, 2 * m);
    for jb in 0..m {
        rhs[(left[jb], jb)] = Complex64::new(1.0, 0.0);
        rhs[(right[jb], m + jb)] = Complex64::new(1.0, 0.0);
    }
    let u = lu.solve(rhs.as_ref());
    let pick = |rows: &[usize], c0: usize| Mat::from_fn(m, m, |i, j| u[(rows[i], c0 + j)]);
    [pick(&left, 0), pick(&left, m), pick(&right, 0), pick(&right, m)]
}

/// Half-plane Dirichlet Green's function (i/4)[H₀⁽¹⁾(k|x−x*|) − H₀⁽¹⁾(k|x−x̄*|)].
pub fn image_source(k: f64, src: Point, p: Point) -> Complex64 {
    let mirror = Point::new(src.x1, -src.x2);
    Complex64::new(0.0, 0.25) * (hankel1_0(k * p.dist(&src)) - hankel1_0(k * p.dist(&mirror)))
}

/// C₁ from continuity of value and derivative at x₂ = 1 and ŵ₁(P̃) = −û₁(P̃),
/// with ŵ₁ = A e^{iμx̃} + B e^{−iμx̃} above the layer.
pub fn c1_by_linear_solve(xi: f64, p: &OracleParams) -> Complex64 {
    let m = mu_real(xi, p.wavenumber);
    let (wm, dwm) = printed::w1_minus(1.0, xi, p);
    let pt = p.p_tilde;
    let (e1p, e1m) = ((I * m).exp(), (-I * m).exp());
    let a = Mat::from_fn(3, 3, |i, j| {
        [
            [m.sin(), -e1p, -e1m],
            [m * m.cos(), -I * m * e1p, I * m * e1m],
            [Complex64::new(0.0, 0.0), (I * m * pt).exp(), (-I * m * pt).exp()],
        ][i][j]
    });
    let b = Mat::from_fn(3, 1, |i, _| [-wm, -dwm, -printed::u1_hat(pt, xi, p)][i]);
    Lu::new(a.as_ref(), "3x3").unwrap().solve(b.as_ref())[(0, 0)]
}
