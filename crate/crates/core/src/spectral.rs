//! Closed-form Fourier-domain fields of the layered-medium perturbation problem and
//! their inverse Fourier transforms.
//!
//! The unperturbed half-plane field û₀, its first-order correction û₁ (forcing
//! sin x₁·u₀ on the layer 0 < x₂ < 1) and the corresponding PML errors ŵ₀, ŵ₁ are
//! evaluated in a form that is free of removable singularities: every quotient by
//! 2ξ ± 1 is rewritten as a divided difference of the entire functions
//! S(z; x) = sin(√z x)/√z and C(z; x) = cos(√z x) in the variable z = μ², and every
//! quotient by sin(μP̃) is rewritten with decaying exponentials. The formulas exactly
//! as printed (with explicit 1/(2ξ ± 1) factors) are kept for cross-checks.

use num_complex::Complex64;

use crate::error::{PmlError, Result};
use crate::geometry::{PmlProfile, Point};
use crate::quadrature::{gauss_legendre_16, integrate_intervals, QuadOptions, QuadResult};
use crate::special::{expm1, sinc};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Parameters of the layered-medium problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    pub wavenumber: f64,
    /// Source location; the oracle assumes x₁* = 0.
    pub x_star: Point,
    /// Stretched coordinate of the top of the PML band.
    pub p_tilde: Complex64,
    /// H + L, kept for bookkeeping.
    pub h_plus_l: f64,
}

impl OracleParams {
    /// Parameters with an explicitly given P̃.
    pub fn new(k: f64, x2_star: f64, p_tilde: Complex64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(PmlError::contract(format!("wavenumber must be positive, got {k}")));
        }
        if !(x2_star > 1.0) {
            return Err(PmlError::contract(format!("source height must exceed the layer top 1, got {x2_star}")));
        }
        Ok(OracleParams { wavenumber: k, x_star: Point::new(0.0, x2_star), p_tilde, h_plus_l: p_tilde.re })
    }

    /// Parameters whose P̃ is the stretched top stretch(H + L) of `profile`.
    /// The stretch has to start above the source (H ≥ x₂*).
    pub fn from_profile(k: f64, x2_star: f64, profile: &PmlProfile) -> Result<Self> {
        if profile.pml_start < x2_star {
            return Err(PmlError::contract(format!(
                "PML must start above the source: H = {} < x2* = {x2_star}",
                profile.pml_start
            )));
        }
        let mut p = Self::new(k, x2_star, profile.stretch(profile.top()))?;
        p.h_plus_l = profile.top();
        Ok(p)
    }

    fn x2s(&self) -> f64 {
        self.x_star.x2
    }

    fn check_absorbing(&self) -> Result<()> {
        if !(self.p_tilde.im > 0.0) {
            return Err(PmlError::contract(format!("Im P~ must be positive, got {}", self.p_tilde.im)));
        }
        if !(self.p_tilde.re > 1.0) {
            return Err(PmlError::contract("Re P~ must exceed the layer top 1"));
        }
        Ok(())
    }
}

/// A sample ξ ↦ value of a Fourier-domain field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralValue {
    pub xi: Complex64,
    pub value: Complex64,
}

/// μ(ξ) = √(k² − ξ²). On the real axis |ξ| > k gives +i√(ξ² − k²); off the axis the
/// principal root is used, whose cut is where k² − ξ² is negative real.
pub fn mu(xi: Complex64, k: f64) -> Complex64 {
    if xi.im == 0.0 {
        return mu_real(xi.re, k);
    }
    let z = c(k * k) - xi * xi;
    if z.im == 0.0 && z.re < 0.0 {
        return Complex64::new(0.0, (-z.re).sqrt());
    }
    z.sqrt()
}

/// μ for real ξ.
pub fn mu_real(xi: f64, k: f64) -> Complex64 {
    mu_of_z(k * k - xi * xi)
}

fn mu_of_z(z: f64) -> Complex64 {
    if z >= 0.0 {
        c(z.sqrt())
    } else {
        Complex64::new(0.0, (-z).sqrt())
    }
}

// ---------------------------------------------------------------------------
// Entire functions of z = μ² and their divided differences.

const SERIES_RADIUS: f64 = 4.0;

/// S(z; x) = sin(√z x)/√z.
pub fn s_entire(z: Complex64, x: Complex64) -> Complex64 {
    let w = z * x * x;
    if w.norm() < SERIES_RADIUS {
        // x Σ (−w)ⁿ/(2n+1)!
        let mut term = c(1.0);
        let mut sum = c(1.0);
        for n in 1..60 {
            term *= -w / ((2 * n) as f64 * (2 * n + 1) as f64);
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        x * sum
    } else {
        let u = z.sqrt();
        (u * x).sin() / u
    }
}

/// C(z; x) = cos(√z x).
pub fn c_entire(z: Complex64, x: Complex64) -> Complex64 {
    (z.sqrt() * x).cos()
}

/// ∂S/∂z.
pub fn ds_dz(z: Complex64, x: Complex64) -> Complex64 {
    let w = z * x * x;
    if w.norm() < SERIES_RADIUS {
        // x³ Σ_{n≥1} (−1)ⁿ n wⁿ⁻¹/(2n+1)!
        let mut fact = c(-1.0 / 6.0); // (−1)ⁿ wⁿ⁻¹/(2n+1)! at n = 1
        let mut sum = fact;
        for n in 2..60 {
            fact *= -w / ((2 * n) as f64 * (2 * n + 1) as f64);
            let term = fact * n as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        x * x * x * sum
    } else {
        let u = z.sqrt();
        let ux = u * x;
        (x * u * ux.cos() - ux.sin()) / (2.0 * u * u * u)
    }
}

const DIVDIFF_RADIUS: f64 = 0.5;

/// [S(zs; x) − S(z; x)]/(z − zs), continuous across zs = z.
pub fn div_s(zs: Complex64, z: Complex64, x: Complex64) -> Complex64 {
    let d = zs - z;
    if d.norm() > DIVDIFF_RADIUS {
        return (s_entire(zs, x) - s_entire(z, x)) / (z - zs);
    }
    // −∫₀¹ ∂S/∂z(z + t(zs − z)) dt
    let (nodes, weights) = gauss_legendre_16();
    let mut acc = c(0.0);
    for (&t, &w) in nodes.iter().zip(weights) {
        acc += ds_dz(z + d * (0.5 * (t + 1.0)), x) * w;
    }
    -acc * 0.5
}

/// [C(zs; x) − C(z; x)]/(z − zs), continuous across zs = z.
pub fn div_c(zs: Complex64, z: Complex64, x: Complex64) -> Complex64 {
    let d = zs - z;
    if d.norm() > DIVDIFF_RADIUS {
        return (c_entire(zs, x) - c_entire(z, x)) / (z - zs);
    }
    // ∂C/∂z = −(x/2)S, hence (x/2)∫₀¹ S(z + t(zs − z)) dt.
    let (nodes, weights) = gauss_legendre_16();
    let mut acc = c(0.0);
    for (&t, &w) in nodes.iter().zip(weights) {
        acc += s_entire(z + d * (0.5 * (t + 1.0)), x) * w;
    }
    acc * 0.25 * x
}

// ---------------------------------------------------------------------------
// Ratios of sines written with decaying exponentials (Im(μP̃) ≥ 0).

/// μ e^{iμP̃}/sin(μP̃), tending to 1/P̃ as μ → 0.
fn q_factor(m: Complex64, pt: Complex64) -> Complex64 {
    let w = m * pt;
    if w.norm() < 1.0 {
        (I * w).exp() / (pt * sinc(w))
    } else {
        2.0 * I * m * (2.0 * I * w).exp() / expm1(2.0 * I * w)
    }
}

/// μ cos(μ(P̃ − 1))/sin(μP̃) and sin(μ(P̃ − 1))/sin(μP̃).
fn top_factors(m: Complex64, pt: Complex64) -> (Complex64, Complex64) {
    let w = m * pt;
    let theta = m * (pt - 1.0);
    if w.norm() < 1.0 {
        let s = sinc(w);
        (theta.cos() / (pt * s), (pt - 1.0) / pt * sinc(theta) / s)
    } else {
        let den = expm1(2.0 * I * w);
        let e1 = (I * m).exp();
        let e2t = (2.0 * I * theta).exp();
        (I * m * e1 * (1.0 + e2t) / den, e1 * expm1(2.0 * I * theta) / den)
    }
}

/// sin(μx̃)/sin(μP̃) for a (possibly complex) height x̃ below the top.
fn sine_ratio(m: Complex64, xt: Complex64, pt: Complex64) -> Complex64 {
    let w = m * pt;
    if w.norm() < 1.0 {
        xt / pt * sinc(m * xt) / sinc(w)
    } else {
        (I * m * (pt - xt)).exp() * expm1(2.0 * I * m * xt) / expm1(2.0 * I * w)
    }
}

// ---------------------------------------------------------------------------
// Per-ξ kernel shared by all first-order quantities.

/// Quantities that depend on ξ only; evaluating a field at several heights reuses them.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    pub xi: f64,
    z: Complex64,
    zp: Complex64,
    zm: Complex64,
    mu: Complex64,
    mu_p: Complex64,
    mu_m: Complex64,
    /// e^{iμ±x₂*}.
    ep: Complex64,
    em: Complex64,
    /// Exterior amplitude: û₁(x̃₂) = phi e^{iμx̃₂} above the layer.
    phi: Complex64,
}

impl Kernel {
    pub fn new(xi: f64, p: &OracleParams) -> Self {
        let k2 = p.wavenumber * p.wavenumber;
        let z = c(k2 - xi * xi);
        let zp = c(k2 - (xi + 1.0) * (xi + 1.0));
        let zm = c(k2 - (xi - 1.0) * (xi - 1.0));
        let (mu, mu_p, mu_m) = (mu_of_z(z.re), mu_of_z(zp.re), mu_of_z(zm.re));
        let xs = p.x2s();
        let ep = (I * mu_p * xs).exp();
        let em = (I * mu_m * xs).exp();
        let one = c(1.0);
        let q1 = 0.5 * (ep * div_s(zp, z, one) - em * div_s(zm, z, one));
        let dq1 = 0.5 * (ep * div_c(zp, z, one) - em * div_c(zm, z, one));
        let phi = q1 * c_entire(z, one) - dq1 * s_entire(z, one);
        Kernel { xi, z, zp, zm, mu, mu_p, mu_m, ep, em, phi }
    }

    /// Particular interior solution of the û₁ equation and its x₂-derivative.
    fn u1_particular(&self, x: f64) -> (Complex64, Complex64) {
        let x = c(x);
        let q = 0.5 * (self.ep * div_s(self.zp, self.z, x) - self.em * div_s(self.zm, self.z, x));
        let dq = 0.5 * (self.ep * div_c(self.zp, self.z, x) - self.em * div_c(self.zm, self.z, x));
        (q, dq)
    }

    /// Homogeneous coefficient of the interior û₁ representation.
    fn u1_interior_coef(&self) -> Complex64 {
        let one = c(1.0);
        let (q1, dq1) = self.u1_particular(1.0);
        let e = (I * self.mu).exp();
        let (s1, c1) = (s_entire(self.z, one), c_entire(self.z, one));
        // Value or derivative matching, whichever is better conditioned.
        if s1.norm() >= c1.norm() {
            (self.phi * e - q1) / s1
        } else {
            (I * self.mu * self.phi * e - dq1) / c1
        }
    }

    /// û₁ and ∂û₁/∂x₂ on 0 ≤ x₂ ≤ 1.
    pub fn u1_interior(&self, x: f64) -> (Complex64, Complex64) {
        let (q, dq) = self.u1_particular(x);
        let b = self.u1_interior_coef();
        let xc = c(x);
        (q + b * s_entire(self.z, xc), dq + b * c_entire(self.z, xc))
    }

    /// û₁ at a (possibly stretched) height above the layer.
    pub fn u1_exterior(&self, xt: Complex64) -> Complex64 {
        self.phi * (I * self.mu * xt).exp()
    }

    /// ∂û₁/∂x₂ above the layer (unstretched region).
    pub fn u1_exterior_dx(&self, x: f64) -> Complex64 {
        I * self.mu * self.u1_exterior(c(x))
    }

    /// Particular interior solution of the ŵ₁ equation and its derivative.
    fn w1_particular(&self, x: f64, p: &OracleParams) -> (Complex64, Complex64) {
        let xs = c(p.x2s());
        let ap = s_entire(self.zp, xs) * q_factor(self.mu_p, p.p_tilde);
        let am = s_entire(self.zm, xs) * q_factor(self.mu_m, p.p_tilde);
        let x = c(x);
        let w = -0.5 * (ap * div_s(self.zp, self.z, x) - am * div_s(self.zm, self.z, x));
        let dw = -0.5 * (ap * div_c(self.zp, self.z, x) - am * div_c(self.zm, self.z, x));
        (w, dw)
    }

    fn w1_interior_coef(&self, p: &OracleParams) -> Complex64 {
        let (p1, dp1) = self.w1_particular(1.0, p);
        let (ac, bc) = top_factors(self.mu, p.p_tilde);
        -(self.phi * q_factor(self.mu, p.p_tilde) + p1 * ac + dp1 * bc)
    }

    /// ŵ₁ and ∂ŵ₁/∂x₂ on 0 ≤ x₂ ≤ 1.
    pub fn w1_interior(&self, x: f64, p: &OracleParams) -> (Complex64, Complex64) {
        let (w, dw) = self.w1_particular(x, p);
        let cf = self.w1_interior_coef(p);
        let xc = c(x);
        (w + cf * s_entire(self.z, xc), dw + cf * c_entire(self.z, xc))
    }

    /// ŵ₁ above the layer at stretched height x̃ (propagated from the Cauchy data at
    /// x₂ = 1; loses accuracy once |μ(x̃ − 1)| is large).
    pub fn w1_exterior(&self, xt: Complex64, p: &OracleParams) -> Complex64 {
        let (w1, dw1) = self.w1_interior(1.0, p);
        let d = xt - 1.0;
        w1 * c_entire(self.z, d) + dw1 * s_entire(self.z, d)
    }

    /// Bracket function [S(z₊;1)C(z;1) − S(z;1)C(z₊;1)]/(2ξ + 1), analytic in ξ.
    pub fn bracket(&self) -> Complex64 {
        let one = c(1.0);
        div_s(self.zp, self.z, one) * c_entire(self.z, one) - s_entire(self.z, one) * div_c(self.zp, self.z, one)
    }
}

// ---------------------------------------------------------------------------
// Public field evaluations.

/// Half-plane field û₀(x₂; ξ).
pub fn u0_hat(x2: f64, xi: f64, p: &OracleParams) -> Complex64 {
    u0_hat_stretched(c(x2), xi, p)
}

/// û₀ at a complex height x̃₂ (the source lies below any stretched height).
pub fn u0_hat_stretched(xt: Complex64, xi: f64, p: &OracleParams) -> Complex64 {
    let z = c(p.wavenumber * p.wavenumber - xi * xi);
    let m = mu_of_z(z.re);
    let xs = p.x2s();
    if xt.im == 0.0 && xt.re < xs {
        -I * (I * m * xs).exp() * s_entire(z, xt)
    } else {
        -I * (I * m * xt).exp() * s_entire(z, c(xs))
    }
}

/// û₀ through the difference-of-exponentials form ½(e^{iμ|x₂−x₂*|} − e^{iμ(x₂+x₂*)})/μ.
pub fn u0_hat_exponential(x2: f64, xi: f64, p: &OracleParams) -> Complex64 {
    let m = mu_real(xi, p.wavenumber);
    let xs = p.x2s();
    0.5 * ((I * m * (x2 - xs).abs()).exp() - (I * m * (x2 + xs)).exp()) / m
}

/// û₁(x₂; ξ) above the layer (x₂ > 1).
pub fn u1_hat(x2: f64, xi: f64, p: &OracleParams) -> Result<Complex64> {
    if !(x2 > 1.0) {
        return Err(PmlError::contract(format!("exterior representation of u1 needs x2 > 1, got {x2}")));
    }
    Ok(Kernel::new(xi, p).u1_exterior(c(x2)))
}

/// û₁ at a complex height x̃₂ above the layer.
pub fn u1_hat_stretched(xt: Complex64, xi: f64, p: &OracleParams) -> Complex64 {
    Kernel::new(xi, p).u1_exterior(xt)
}

/// û₁(x₂; ξ) below the layer top (0 ≤ x₂ ≤ 1).
pub fn u1_hat_interior(x2: f64, xi: f64, p: &OracleParams) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&x2) {
        return Err(PmlError::contract(format!("interior representation needs 0 <= x2 <= 1, got {x2}")));
    }
    Ok(Kernel::new(xi, p).u1_interior(x2).0)
}

/// ŵ₀(x₂; ξ) with x̃₂ = stretch(x₂).
pub fn w0_hat(x2: f64, xi: f64, p: &OracleParams, profile: &PmlProfile) -> Result<Complex64> {
    w0_hat_stretched(profile.stretch(x2), xi, p)
}

/// ŵ₀ at stretched height x̃₂.
pub fn w0_hat_stretched(xt: Complex64, xi: f64, p: &OracleParams) -> Result<Complex64> {
    p.check_absorbing()?;
    let z = c(p.wavenumber * p.wavenumber - xi * xi);
    let m = mu_of_z(z.re);
    let pt = p.p_tilde;
    Ok(I * (I * m * pt).exp() * s_entire(z, c(p.x2s())) * sine_ratio(m, xt, pt))
}

/// ŵ₁(x₂; ξ) on 0 ≤ x₂ ≤ 1.
pub fn w1_hat(x2: f64, xi: f64, p: &OracleParams) -> Result<Complex64> {
    p.check_absorbing()?;
    if !(0.0..=1.0).contains(&x2) {
        return Err(PmlError::contract(format!("w1_hat needs 0 <= x2 <= 1, got {x2}")));
    }
    Ok(Kernel::new(xi, p).w1_interior(x2, p).0)
}

/// ŵ₁ above the layer at stretched height x̃₂.
pub fn w1_hat_exterior(xt: Complex64, xi: f64, p: &OracleParams) -> Result<Complex64> {
    p.check_absorbing()?;
    Ok(Kernel::new(xi, p).w1_exterior(xt, p))
}

/// The bracket function f(ξ) entering the leading-order asymptotics.
pub fn bracket_f(xi: f64, k: f64) -> Complex64 {
    let p =
        OracleParams { wavenumber: k, x_star: Point::new(0.0, 2.0), p_tilde: Complex64::new(2.0, 1.0), h_plus_l: 2.0 };
    Kernel::new(xi, &p).bracket()
}

// ---------------------------------------------------------------------------
// Formulas with explicit 1/(2ξ ± 1) factors, valid away from ξ = ±1/2 and μ = 0.

/// Direct forms of the first-order fields, used only to cross-check the stable ones.
pub mod printed {
    use super::*;

    fn sinmu(m: Complex64, x: Complex64) -> Complex64 {
        (m * x).sin() / m
    }

    /// û₁ above the layer from the explicit two-bracket formula.
    pub fn u1_hat(xt: Complex64, xi: f64, p: &OracleParams) -> Complex64 {
        let k = p.wavenumber;
        let (m, mp, mm) = (mu_real(xi, k), mu_real(xi + 1.0, k), mu_real(xi - 1.0, k));
        let xs = c(p.x2s());
        let one = c(1.0);
        let bp = sinmu(mp, one) * m.cos() - sinmu(m, one) * mp.cos();
        let bm = sinmu(mm, one) * m.cos() - sinmu(m, one) * mm.cos();
        0.5 * ((I * mp * xs).exp() / (2.0 * xi + 1.0) * bp + (I * mm * xs).exp() / (2.0 * xi - 1.0) * bm)
            * (I * m * xt).exp()
    }

    fn t_factor(a: Complex64, p: &OracleParams) -> Complex64 {
        (I * a * p.p_tilde).exp() * sinmu(a, c(p.x2s()))
    }

    /// Particular solution ŵ₁⁻(x₂) and its derivative.
    pub fn w1_minus(x2: f64, xi: f64, p: &OracleParams) -> (Complex64, Complex64) {
        let k = p.wavenumber;
        let pt = p.p_tilde;
        let (mp, mm) = (mu_real(xi + 1.0, k), mu_real(xi - 1.0, k));
        let x = c(x2);
        let gp = t_factor(mp, p) / ((mp * pt).sin() * (2.0 * xi + 1.0));
        let gm = t_factor(mm, p) / ((mm * pt).sin() * (2.0 * xi - 1.0));
        let v = -0.5 * (gp * (mp * x).sin() + gm * (mm * x).sin());
        let d = -0.5 * (gp * mp * (mp * x).cos() + gm * mm * (mm * x).cos());
        (v, d)
    }

    /// The coefficient C₁(ξ) of sin(μx₂).
    pub fn c1(xi: f64, p: &OracleParams) -> Complex64 {
        let k = p.wavenumber;
        let pt = p.p_tilde;
        let (m, mp, mm) = (mu_real(xi, k), mu_real(xi + 1.0, k), mu_real(xi - 1.0, k));
        let xs = c(p.x2s());
        let u1p = u1_hat(pt, xi, p);
        let sp = (m * pt).sin();
        let gp = t_factor(mp, p) / ((mp * pt).sin() * (2.0 * xi + 1.0));
        let gm = t_factor(mm, p) / ((mm * pt).sin() * (2.0 * xi - 1.0));
        let hp = (I * mp * pt).exp() * (mp * xs).sin() / m * mp.cos() / ((mp * pt).sin() * (2.0 * xi + 1.0));
        let hm = (I * mm * pt).exp() * (mm * xs).sin() / m * mm.cos() / ((mm * pt).sin() * (2.0 * xi - 1.0));
        -u1p / sp
            + (m * (pt - 1.0)).cos() / (2.0 * sp) * (gp * mp.sin() + gm * mm.sin())
            + (m * (pt - 1.0)).sin() / (2.0 * sp) * (hp + hm)
    }

    /// ŵ₁ = ŵ₁⁻ + C₁ sin(μx₂).
    pub fn w1_hat(x2: f64, xi: f64, p: &OracleParams) -> Complex64 {
        let m = mu_real(xi, p.wavenumber);
        w1_minus(x2, xi, p).0 + c1(xi, p) * (m * x2).sin()
    }

    /// Bracket function [sin μ₊/μ₊ cos μ − sin μ/μ cos μ₊]/(2ξ + 1).
    pub fn bracket_f(xi: f64, k: f64) -> Complex64 {
        let (m, mp) = (mu_real(xi, k), mu_real(xi + 1.0, k));
        let one = c(1.0);
        (sinmu(mp, one) * m.cos() - sinmu(m, one) * mp.cos()) / (2.0 * xi + 1.0)
    }
}

// ---------------------------------------------------------------------------
// Inverse Fourier transform along the real axis.

/// Parity of a spectrum, used to fold the real axis onto ξ > 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// Sorted, deduplicated non-negative branch points {k, |1 − k|, 1 + k}.
pub fn branch_points(k: f64) -> Vec<f64> {
    let mut pts = vec![k, (1.0 - k).abs(), 1.0 + k];
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts
}

/// Segment of the axis: either plain or parametrized by ξ = ξ₀ ± t² near a branch point.
#[derive(Debug, Clone, Copy)]
enum Segment {
    Plain(f64, f64),
    /// (ξ₀, sign, √d): ξ = ξ₀ + sign·t², t ∈ [0, √d].
    Sqrt(f64, f64, f64),
}

const SUBSTITUTION_RADIUS: f64 = 0.1;

/// Splits [lo, hi] at the given singular points, with square-root substitutions
/// within SUBSTITUTION_RADIUS of each point.
fn segments(points: &[f64], lo: f64, hi: f64) -> Vec<Segment> {
    let mut pts: Vec<f64> = points.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut cuts = vec![lo];
    cuts.extend(pts.iter().copied().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let singular = |x: f64| pts.iter().any(|&q| (q - x).abs() < 1e-14);
    let mut out = Vec::new();
    for win in cuts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b - a <= 0.0 {
            continue;
        }
        let (sa, sb) = (singular(a), singular(b));
        let d = SUBSTITUTION_RADIUS.min(if sa && sb { 0.5 * (b - a) } else { b - a });
        let mut left = a;
        let mut right = b;
        if sa {
            out.push(Segment::Sqrt(a, 1.0, d.sqrt()));
            left = a + d;
        }
        if sb {
            out.push(Segment::Sqrt(b, -1.0, d.sqrt()));
            right = b - d;
        }
        if right > left + 1e-15 {
            out.push(Segment::Plain(left, right));
        }
    }
    out
}

/// Integrates f over the segments with one global adaptive pass.
fn integrate_segments(f: &impl Fn(f64) -> Complex64, segs: &[Segment], opts: QuadOptions) -> Result<QuadResult> {
    // Map every segment onto a window of one long parameter axis so that a single
    // global error budget covers all of them.
    let mut offsets = Vec::with_capacity(segs.len());
    let mut pos = 0.0;
    for s in segs {
        let len = match *s {
            Segment::Plain(a, b) => b - a,
            Segment::Sqrt(_, _, r) => r,
        };
        offsets.push((pos, len));
        pos += len + 1.0;
    }
    let g = |u: f64| -> Complex64 {
        let idx = offsets.iter().position(|&(o, l)| u >= o && u <= o + l).unwrap_or(0);
        let t = u - offsets[idx].0;
        match segs[idx] {
            Segment::Plain(a, _) => f(a + t),
            Segment::Sqrt(x0, sign, _) => f(x0 + sign * t * t) * (2.0 * t),
        }
    };
    let intervals: Vec<(f64, f64)> = offsets.iter().map(|&(o, l)| (o, o + l)).collect();
    integrate_intervals(&g, &intervals, opts)
}

/// Integrates f over [start, ∞) in panels of growing width until the panels are
/// negligible.
fn integrate_tail(f: &impl Fn(f64) -> Complex64, start: f64, floor: f64, opts: QuadOptions) -> Result<QuadResult> {
    let mut total = QuadResult { value: c(0.0), error: 0.0, l1: 0.0, panels: 0 };
    let (mut a, mut width) = (start, 1.0);
    let mut quiet = 0;
    while quiet < 2 {
        if a > 1e4 {
            return Err(PmlError::Quadrature {
                estimate_re: total.value.re,
                estimate_im: total.value.im,
                error: f64::INFINITY,
                target: floor,
            });
        }
        let r = integrate_intervals(f, &[(a, a + width)], opts)?;
        total.value += r.value;
        total.error += r.error;
        total.l1 += r.l1;
        total.panels += r.panels;
        quiet = if r.l1 < floor { quiet + 1 } else { 0 };
        a += width;
        width = (2.0 * width).min(8.0);
    }
    Ok(total)
}

/// (1/2π)∫ field(ξ) e^{−iξx₁} dξ with a combined absolute/relative tolerance.
pub fn inverse_fourier_with(
    field: &impl Fn(f64) -> Complex64,
    x1: f64,
    k: f64,
    parity: Parity,
    opts: QuadOptions,
) -> Result<QuadResult> {
    let bp = branch_points(k);
    let edge = bp.last().copied().unwrap_or(k) + SUBSTITUTION_RADIUS;
    let (integrand, lo): (Box<dyn Fn(f64) -> Complex64 + '_>, f64) = match parity {
        // Folded onto ξ > 0: even → 2∫ f cos, odd → −2i∫ f sin.
        Parity::Even => (Box::new(move |xi: f64| 2.0 * field(xi) * (xi * x1).cos()), 0.0),
        Parity::Odd => (Box::new(move |xi: f64| -2.0 * I * field(xi) * (xi * x1).sin()), 0.0),
        Parity::None => (Box::new(move |xi: f64| field(xi) * (-I * xi * x1).exp()), -edge),
    };
    let mut pts: Vec<f64> = bp.clone();
    if parity == Parity::None {
        pts.extend(bp.iter().map(|x| -x));
    }
    let segs = segments(&pts, lo, edge);
    let core = integrate_segments(&integrand, &segs, opts)?;
    let floor = 1e-3 * opts.abs_tol.max(opts.rel_tol * core.value.norm());
    let tail_opts = QuadOptions { abs_tol: floor, rel_tol: 0.0, max_panels: opts.max_panels };
    let mut total = core;
    let mut add = |r: QuadResult| {
        total.value += r.value;
        total.error += r.error;
        total.l1 += r.l1;
        total.panels += r.panels;
    };
    add(integrate_tail(&integrand, edge, floor, tail_opts)?);
    if parity == Parity::None {
        let mirrored = |xi: f64| integrand(-xi);
        add(integrate_tail(&mirrored, edge, floor, tail_opts)?);
    }
    let scale = 1.0 / (2.0 * std::f64::consts::PI);
    total.value *= scale;
    total.error *= scale;
    total.l1 *= scale;
    Ok(total)
}

/// (1/2π)∫ field(ξ) e^{−iξx₁} dξ to an absolute tolerance.
pub fn inverse_fourier(field: impl Fn(f64) -> Complex64, x1: f64, k: f64, tol: f64) -> Result<Complex64> {
    inverse_fourier_with(&field, x1, k, Parity::None, QuadOptions::absolute(tol)).map(|r| r.value)
}

/// u₀(x) by inverse transform of û₀.
pub fn u0_field(x: Point, p: &OracleParams, opts: QuadOptions) -> Result<QuadResult> {
    let f = |xi: f64| u0_hat(x.x2, xi, p);
    inverse_fourier_with(&f, x.x1, p.wavenumber, Parity::Even, opts)
}

/// w₀(x) for 0 ≤ x₂ below the PML (x̃₂ = x₂) in double precision.
pub fn w0_field_f64(x: Point, p: &OracleParams, opts: QuadOptions) -> Result<QuadResult> {
    p.check_absorbing()?;
    let f = |xi: f64| w0_hat_stretched(c(x.x2), xi, p).unwrap_or(c(f64::NAN));
    inverse_fourier_with(&f, x.x1, p.wavenumber, Parity::Even, opts)
}

/// w₁(x) for 0 < x₂ < 1 in double precision.
pub fn w1_field_f64(x: Point, p: &OracleParams, opts: QuadOptions) -> Result<QuadResult> {
    p.check_absorbing()?;
    check_w1_point(x)?;
    let f = |xi: f64| Kernel::new(xi, p).w1_interior(x.x2, p).0;
    inverse_fourier_with(&f, x.x1, p.wavenumber, Parity::Odd, opts)
}

/// How an oracle value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Double,
    Multiprecision { bits: usize },
}

/// An oracle value with its accuracy diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct OracleValue {
    pub value: Complex64,
    /// Estimated absolute error.
    pub error: f64,
    /// Estimate of (1/2π)∫|integrand|.
    pub l1: f64,
    pub method: OracleMethod,
}

/// Rounding-error scale of a double-precision sum relative to ∫|f|.
const DOUBLE_NOISE: f64 = 1e-15;
const FIRST_BITS: usize = 128;
const BITS_STEP: usize = 64;
const MAX_BITS: usize = 1024;

/// w₀(x) for 0 ≤ x₂ below the PML, with the same precision ladder as [`w1_field`].
pub fn w0_field(x: Point, p: &OracleParams, opts: QuadOptions) -> Result<OracleValue> {
    p.check_absorbing()?;
    laddered(|o| w0_field_f64(x, p, o), |bits, tol| crate::mp::w0_field_mp(x, p, bits, tol), opts)
}

/// w₁(x) for 0 < x₂ < 1. Tries double precision first; when cancellation makes the
/// requested tolerance unreachable, repeats the integral with increasing binary
/// precision until two consecutive precisions agree.
pub fn w1_field(x: Point, p: &OracleParams, opts: QuadOptions) -> Result<OracleValue> {
    p.check_absorbing()?;
    check_w1_point(x)?;
    laddered(|o| w1_field_f64(x, p, o), |bits, tol| crate::mp::w1_field_mp(x, p, bits, tol), opts)
}

fn laddered(
    double: impl Fn(QuadOptions) -> Result<QuadResult>,
    multi: impl Fn(usize, f64) -> Result<crate::mp::MpValue>,
    opts: QuadOptions,
) -> Result<OracleValue> {
    let mut quick = opts;
    quick.max_panels = opts.max_panels.min(200);
    if let Ok(r) = double(quick) {
        let target = opts.abs_tol.max(opts.rel_tol * r.value.norm());
        if DOUBLE_NOISE * r.l1 + r.error <= target {
            return Ok(OracleValue {
                value: r.value,
                error: r.error + DOUBLE_NOISE * r.l1,
                l1: r.l1,
                method: OracleMethod::Double,
            });
        }
    }
    let mut bits = FIRST_BITS;
    let mut prev: Option<crate::mp::MpValue> = None;
    let mut last_err = None;
    while bits <= MAX_BITS {
        // The previous estimate sets the quadrature scale; if it was rounding noise the
        // next run disagrees with it and the ladder continues.
        let run_tol = prev.map_or(0.0, |pv| 0.1 * opts.abs_tol.max(opts.rel_tol * pv.value.norm()));
        match multi(bits, run_tol) {
            Ok(next) => {
                if let Some(pv) = prev {
                    let diff = (next.value - pv.value).norm();
                    let target = opts.abs_tol.max(opts.rel_tol * next.value.norm());
                    if diff <= target && next.error <= target {
                        return Ok(OracleValue {
                            value: next.value,
                            error: diff.max(next.error),
                            l1: next.l1,
                            method: OracleMethod::Multiprecision { bits },
                        });
                    }
                }
                prev = Some(next);
            }
            Err(e @ PmlError::Quadrature { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        bits += BITS_STEP;
    }
    Err(last_err.unwrap_or_else(|| {
        let v = prev.map_or(Complex64::new(0.0, 0.0), |pv| pv.value);
        PmlError::Quadrature {
            estimate_re: v.re,
            estimate_im: v.im,
            error: f64::INFINITY,
            target: opts.abs_tol.max(opts.rel_tol * v.norm()),
        }
    }))
}

pub(crate) fn check_w1_point(x: Point) -> Result<()> {
    if !(x.x2 > 0.0 && x.x2 < 1.0) {
        return Err(PmlError::contract(format!("w1 is evaluated for 0 < x2 < 1, got {}", x.x2)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k: f64) -> OracleParams {
        OracleParams::new(k, 1.5, Complex64::new(20.0, 20.0)).unwrap()
    }

    #[test]
    fn mu_convention() {
        assert_eq!(mu_real(0.0, 0.5), c(0.5));
        assert_eq!(mu_real(0.7, 0.7), c(0.0));
        let m = mu_real(2.0, 0.5);
        assert!(m.re == 0.0 && (m.im - 3.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn entire_functions_match_direct_forms() {
        for &z in &[c(0.3), c(-2.0), c(1e-9), Complex64::new(5.0, 3.0), c(-400.0)] {
            for &x in &[0.5, 1.0, 1.5] {
                let u = z.sqrt();
                let xc = c(x);
                let direct = if u.norm() > 0.0 { (u * xc).sin() / u } else { xc };
                assert!((s_entire(z, xc) - direct).norm() <= 1e-13 * direct.norm().max(1.0));
                let h = 1e-5 * z.norm().max(1.0);
                let fd = (s_entire(z + h, xc) - s_entire(z - h, xc)) / (2.0 * h);
                assert!((ds_dz(z, xc) - fd).norm() <= 1e-6 * fd.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn divided_differences_are_continuous() {
        let z = c(0.2);
        let x = c(1.0);
        let near = div_s(z + 1e-13, z, x);
        let direct = (s_entire(z + 1e-3, x) - s_entire(z, x)) / (-1e-3);
        assert!((near + ds_dz(z, x)).norm() < 1e-12);
        assert!((div_s(z + 1e-3, z, x) - direct).norm() < 1e-10);
        let dc = div_c(z + 0.4, z, x);
        let dc_direct = (c_entire(z + 0.4, x) - c_entire(z, x)) / (-0.4);
        assert!((dc - dc_direct).norm() < 1e-13);
    }

    #[test]
    fn bracket_value_at_minus_half() {
        assert!((bracket_f(-0.5, 0.5) - c(-1.0 / 3.0)).norm() < 1e-14);
        let stable = bracket_f(0.3, 0.5);
        assert!((stable - printed::bracket_f(0.3, 0.5)).norm() < 1e-13);
    }

    #[test]
    fn u0_forms_agree() {
        let p = params(0.5);
        for &xi in &[0.0, 0.2, 0.9, 3.0] {
            for &x2 in &[0.0, 0.3, 1.2] {
                let a = u0_hat(x2, xi, &p);
                let b = u0_hat_exponential(x2, xi, &p);
                assert!((a - b).norm() < 1e-13, "xi={xi} x2={x2}");
            }
        }
        // At the source height with ξ = 0, k = 1/2: ½(1 − e^{i·2x₂*/2})/(1/2).
        let expected = 0.5 * (c(1.0) - (I * 1.5).exp()) / 0.5;
        assert!((u0_hat(1.5, 0.0, &p) - expected).norm() < 1e-14);
    }

    #[test]
    fn u1_stable_matches_printed() {
        let p = params(0.6);
        for &xi in &[0.05, 0.3, -0.8, 1.3, 2.5] {
            let a = u1_hat(1.7, xi, &p).unwrap();
            let b = printed::u1_hat(c(1.7), xi, &p);
            assert!((a - b).norm() < 1e-12 * b.norm().max(1e-3), "xi={xi}");
        }
        assert!(u1_hat(0.5, 0.1, &p).is_err());
    }

    #[test]
    fn u1_interior_and_exterior_join() {
        let p = params(0.5);
        let kern = Kernel::new(0.3, &p);
        let (v, d) = kern.u1_interior(1.0);
        assert!((v - kern.u1_exterior(c(1.0))).norm() < 1e-12);
        assert!((d - kern.u1_exterior_dx(1.0)).norm() < 1e-12);
        assert!(kern.u1_interior(0.0).0.norm() < 1e-15);
    }

    #[test]
    fn w1_stable_matches_printed() {
        let p = params(0.6);
        for &xi in &[0.05, 0.3, -0.8, 1.3, 2.5] {
            let a = w1_hat(0.5, xi, &p).unwrap();
            let b = printed::w1_hat(0.5, xi, &p);
            assert!((a - b).norm() < 1e-10 * b.norm().max(1e-12), "xi={xi}: {a} vs {b}");
        }
    }

    #[test]
    fn gaussian_transform() {
        let r = inverse_fourier(|xi| c((-xi * xi).exp()), 0.0, 0.6, 1e-12).unwrap();
        let expected = std::f64::consts::PI.sqrt() / (2.0 * std::f64::consts::PI);
        assert!((r - c(expected)).norm() < 1e-12);
    }

    #[test]
    fn odd_spectrum_vanishes_at_origin() {
        let r = inverse_fourier(|xi| c(xi * (-xi * xi).exp()), 0.0, 0.6, 1e-12).unwrap();
        assert!(r.norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn mu_squares_back(xr in -5.0f64..5.0, xim in -2.0f64..2.0, k in 0.1f64..4.0) {
            let xi = Complex64::new(xr, xim);
            let m = mu(xi, k);
            let err = (m * m + xi * xi - c(k * k)).norm();
            prop_assert!(err <= 1e-13 * (k * k + xi.norm_sqr()));
        }

        #[test]
        fn mu_decays_on_real_axis(xi in -10.0f64..10.0, k in 0.1f64..4.0) {
            prop_assert!(mu_real(xi, k).im >= 0.0);
        }

        #[test]
        fn w1_is_odd_in_xi(xi in 0.01f64..3.0, x2 in 0.05f64..0.95) {
            let p = params(0.6);
            let a = w1_hat(x2, xi, &p).unwrap();
            let b = w1_hat(x2, -xi, &p).unwrap();
            prop_assert!((a + b).norm() <= 1e-12 * a.norm().max(1e-30));
        }
    }
}
