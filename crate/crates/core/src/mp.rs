//! Multiprecision evaluation of the PML errors w₀ and w₁ for parameters where the
//! double-precision real-axis integral cancels catastrophically.
//!
//! Away from half-integer k the value of w₁ decays exponentially in |P̃| while the
//! integrand stays of moderate size near ξ = |1 − k|; the integral therefore loses
//! roughly log₁₀(∫|ŵ₁|/|w₁|) digits. Here the direct closed forms are evaluated in
//! binary floating point with a few hundred bits and integrated by tanh-sinh
//! quadrature on the intervals between branch points.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_complex::Complex64;

use crate::error::{PmlError, Result};
use crate::geometry::Point;
use crate::spectral::{check_w1_point, OracleParams};

const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Clone, Debug)]
struct Cx {
    re: BigFloat,
    im: BigFloat,
}

/// Vertical wavenumber for real ξ: either real or purely imaginary.
#[derive(Clone, Debug)]
enum Mu {
    Real(BigFloat),
    Imag(BigFloat),
}

struct Ctx {
    p: usize,
    cc: Consts,
}

impl Ctx {
    fn new(p: usize) -> Result<Self> {
        let cc = Consts::new().map_err(|e| PmlError::contract(format!("multiprecision setup: {e:?}")))?;
        Ok(Ctx { p, cc })
    }

    fn num(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }

    fn cx(&self, re: f64, im: f64) -> Cx {
        Cx { re: self.num(re), im: self.num(im) }
    }

    fn real(&self, x: &BigFloat) -> Cx {
        Cx { re: x.clone(), im: self.num(0.0) }
    }

    fn add(&self, a: &Cx, b: &Cx) -> Cx {
        Cx { re: a.re.add(&b.re, self.p, RM), im: a.im.add(&b.im, self.p, RM) }
    }

    fn sub(&self, a: &Cx, b: &Cx) -> Cx {
        Cx { re: a.re.sub(&b.re, self.p, RM), im: a.im.sub(&b.im, self.p, RM) }
    }

    fn mul(&self, a: &Cx, b: &Cx) -> Cx {
        let p = self.p;
        Cx {
            re: a.re.mul(&b.re, p, RM).sub(&a.im.mul(&b.im, p, RM), p, RM),
            im: a.re.mul(&b.im, p, RM).add(&a.im.mul(&b.re, p, RM), p, RM),
        }
    }

    fn scale(&self, a: &Cx, s: &BigFloat) -> Cx {
        Cx { re: a.re.mul(s, self.p, RM), im: a.im.mul(s, self.p, RM) }
    }

    fn div(&self, a: &Cx, b: &Cx) -> Cx {
        let p = self.p;
        let den = b.re.mul(&b.re, p, RM).add(&b.im.mul(&b.im, p, RM), p, RM);
        let re = a.re.mul(&b.re, p, RM).add(&a.im.mul(&b.im, p, RM), p, RM);
        let im = a.im.mul(&b.re, p, RM).sub(&a.re.mul(&b.im, p, RM), p, RM);
        Cx { re: re.div(&den, p, RM), im: im.div(&den, p, RM) }
    }

    fn times_i(&self, a: &Cx) -> Cx {
        Cx { re: a.im.neg(), im: a.re.clone() }
    }

    /// e^{iw} and e^{−iw} for complex w; purely real or imaginary w skip the
    /// transcendental that is trivially 1.
    fn exp_i_pair(&mut self, w: &Cx) -> (Cx, Cx) {
        let p = self.p;
        let one = self.num(1.0);
        let (mag, inv) = if w.im.is_zero() {
            (one.clone(), one.clone())
        } else {
            let mag = w.im.neg().exp(p, RM, &mut self.cc);
            let inv = one.div(&mag, p, RM);
            (mag, inv)
        };
        let (s, c) = if w.re.is_zero() {
            (self.num(0.0), one)
        } else {
            (w.re.sin(p, RM, &mut self.cc), w.re.cos(p, RM, &mut self.cc))
        };
        let e = Cx { re: c.mul(&mag, p, RM), im: s.mul(&mag, p, RM) };
        let einv = Cx { re: c.mul(&inv, p, RM), im: s.neg().mul(&inv, p, RM) };
        (e, einv)
    }

    /// (sin w, cos w, e^{iw}).
    fn trig(&mut self, w: &Cx) -> (Cx, Cx, Cx) {
        let (e, einv) = self.exp_i_pair(w);
        let half = self.num(0.5);
        let diff = self.sub(&e, &einv);
        // sin = (e − e⁻¹)/(2i) = −i(e − e⁻¹)/2
        let sin = Cx { re: diff.im.mul(&half, self.p, RM), im: diff.re.neg().mul(&half, self.p, RM) };
        let cos = self.scale(&self.add(&e, &einv), &half);
        (sin, cos, e)
    }

    fn mu_times(&self, m: &Mu, w: &Cx) -> Cx {
        match m {
            Mu::Real(r) => self.scale(w, r),
            Mu::Imag(r) => self.times_i(&self.scale(w, r)),
        }
    }

    fn mu_cx(&self, m: &Mu) -> Cx {
        match m {
            Mu::Real(r) => self.real(r),
            Mu::Imag(r) => Cx { re: self.num(0.0), im: r.clone() },
        }
    }

    fn mu(&self, z: &BigFloat) -> Mu {
        if z.is_negative() {
            Mu::Imag(z.neg().sqrt(self.p, RM))
        } else {
            Mu::Real(z.sqrt(self.p, RM))
        }
    }

    fn to_c64(&self, a: &Cx) -> Complex64 {
        Complex64::new(to_f64(&a.re), to_f64(&a.im))
    }
}

/// Rounds a multiprecision number to the nearest double (values far outside the
/// double range saturate to 0 or ±∞).
fn to_f64(x: &BigFloat) -> f64 {
    match x.as_raw_parts() {
        None => f64::NAN,
        Some((words, _, sign, exp, _)) => {
            if x.is_zero() {
                return 0.0;
            }
            let top = *words.last().unwrap_or(&0) as f64;
            let mag = libm::ldexp(top * 2f64.powi(-64), exp);
            if sign == Sign::Neg {
                -mag
            } else {
                mag
            }
        }
    }
}

/// ŵ₁(x₂; ξ) from the direct closed forms, in multiprecision.
fn w1_hat_direct(ctx: &mut Ctx, xi: &BigFloat, x2: &BigFloat, xs: &BigFloat, k: &BigFloat, pt: &Cx) -> Cx {
    let p = ctx.p;
    let one = ctx.num(1.0);
    let two = ctx.num(2.0);
    let half = ctx.num(0.5);
    let k2 = k.mul(k, p, RM);
    let xp = xi.add(&one, p, RM);
    let xm = xi.sub(&one, p, RM);
    let m = ctx.mu(&k2.sub(&xi.mul(xi, p, RM), p, RM));
    let mp = ctx.mu(&k2.sub(&xp.mul(&xp, p, RM), p, RM));
    let mm = ctx.mu(&k2.sub(&xm.mul(&xm, p, RM), p, RM));
    let dp = ctx.real(&two.mul(xi, p, RM).add(&one, p, RM)); // 2ξ + 1
    let dm = ctx.real(&two.mul(xi, p, RM).sub(&one, p, RM)); // 2ξ − 1

    let unit = ctx.real(&one);
    let xs_c = ctx.real(xs);
    let x2_c = ctx.real(x2);
    let mc = ctx.mu_cx(&m);
    let mpc = ctx.mu_cx(&mp);
    let mmc = ctx.mu_cx(&mm);

    // Per-branch trigonometric data.
    let branch = |ctx: &mut Ctx, a: &Mu, ac: &Cx| {
        let (s_p, _, e_p) = ctx.trig(&ctx.mu_times(a, pt));
        let (s_xs, _, e_xs) = ctx.trig(&ctx.mu_times(a, &xs_c));
        let (s_1, c_1, _) = ctx.trig(&ctx.mu_times(a, &unit));
        let (s_x2, _, _) = ctx.trig(&ctx.mu_times(a, &x2_c));
        let t = ctx.div(&ctx.mul(&e_p, &s_xs), ac); // e^{iaP̃} sin(a x₂*)/a
        (s_p, e_p, s_xs, e_xs, s_1, c_1, s_x2, t)
    };
    let (sp_p, ep_p, sxs_p, exs_p, s1_p, c1_p, sx2_p, t_p) = branch(ctx, &mp, &mpc);
    let (sp_m, ep_m, sxs_m, exs_m, s1_m, c1_m, sx2_m, t_m) = branch(ctx, &mm, &mmc);
    let (sp_0, ep_0, _, _, s1_0, c1_0, sx2_0, _) = branch(ctx, &m, &mc);

    // g± = T(μ±)/(sin(μ±P̃)(2ξ ± 1))
    let g_p = ctx.div(&t_p, &ctx.mul(&sp_p, &dp));
    let g_m = ctx.div(&t_m, &ctx.mul(&sp_m, &dm));
    let w_minus = ctx.scale(&ctx.add(&ctx.mul(&g_p, &sx2_p), &ctx.mul(&g_m, &sx2_m)), &half.neg());

    // û₁(P̃)
    let sinc = |ctx: &Ctx, s: &Cx, a: &Cx| ctx.div(s, a);
    let br_p = ctx.sub(&ctx.mul(&sinc(ctx, &s1_p, &mpc), &c1_0), &ctx.mul(&sinc(ctx, &s1_0, &mc), &c1_p));
    let br_m = ctx.sub(&ctx.mul(&sinc(ctx, &s1_m, &mmc), &c1_0), &ctx.mul(&sinc(ctx, &s1_0, &mc), &c1_m));
    let u1 = ctx.add(&ctx.div(&ctx.mul(&exs_p, &br_p), &dp), &ctx.div(&ctx.mul(&exs_m, &br_m), &dm));
    let u1 = ctx.scale(&ctx.mul(&u1, &ep_0), &half);

    // cos(μ(P̃ − 1)) and sin(μ(P̃ − 1))
    let pt_m1 = ctx.sub(pt, &unit);
    let (s_th, c_th, _) = ctx.trig(&ctx.mu_times(&m, &pt_m1));

    let a_term = ctx.add(&ctx.mul(&g_p, &s1_p), &ctx.mul(&g_m, &s1_m));
    let h_p = ctx.div(&ctx.mul(&ctx.mul(&ep_p, &sxs_p), &c1_p), &ctx.mul(&ctx.mul(&mc, &sp_p), &dp));
    let h_m = ctx.div(&ctx.mul(&ctx.mul(&ep_m, &sxs_m), &c1_m), &ctx.mul(&ctx.mul(&mc, &sp_m), &dm));
    let two_s = ctx.scale(&sp_0, &two);
    let c1 = ctx.add(
        &ctx.sub(&ctx.div(&ctx.mul(&c_th, &a_term), &two_s), &ctx.div(&u1, &sp_0)),
        &ctx.div(&ctx.mul(&s_th, &ctx.add(&h_p, &h_m)), &two_s),
    );
    ctx.add(&w_minus, &ctx.mul(&c1, &sx2_0))
}

/// Tanh-sinh abscissae on [−1, 1] for t ≥ 0: (distance 1 − y to the endpoint, weight).
struct TanhSinhNodes {
    /// levels[m] holds nodes t = j·2^{−m} with j odd (all j for m = 0).
    levels: Vec<Vec<(BigFloat, BigFloat, bool)>>,
}

impl TanhSinhNodes {
    fn new(ctx: &mut Ctx, max_level: usize) -> Self {
        let p = ctx.p;
        let t_max = (((p as f64) - 16.0) * std::f64::consts::LN_2 / std::f64::consts::PI).asinh();
        let pi = ctx.cc.pi(p, RM);
        let half_pi = pi.mul(&ctx.num(0.5), p, RM);
        let one = ctx.num(1.0);
        let two = ctx.num(2.0);
        let mut levels = Vec::new();
        for m in 0..=max_level {
            let h = 0.5f64.powi(m as i32);
            let mut nodes = Vec::new();
            let mut j: u64 = if m == 0 { 0 } else { 1 };
            loop {
                let t = j as f64 * h;
                if t > t_max {
                    break;
                }
                let tb = ctx.num(t);
                let et = tb.exp(p, RM, &mut ctx.cc);
                let inv_et = one.div(&et, p, RM);
                let sinh_t = et.sub(&inv_et, p, RM).mul(&ctx.num(0.5), p, RM);
                let cosh_t = et.add(&inv_et, p, RM).mul(&ctx.num(0.5), p, RM);
                let u = half_pi.mul(&sinh_t, p, RM);
                let e2u = u.mul(&two, p, RM).exp(p, RM, &mut ctx.cc);
                // 1 − tanh u = 2/(e^{2u} + 1); 1/cosh²u = 4e^{2u}/(e^{2u}+1)².
                let den = e2u.add(&one, p, RM);
                let delta = two.div(&den, p, RM);
                let sech2 = ctx.num(4.0).mul(&e2u, p, RM).div(&den.mul(&den, p, RM), p, RM);
                let w = half_pi.mul(&cosh_t, p, RM).mul(&sech2, p, RM);
                nodes.push((delta, w, j == 0));
                j += if m == 0 { 1 } else { 2 };
            }
            levels.push(nodes);
        }
        TanhSinhNodes { levels }
    }
}

/// Integrates f over [a, b] by tanh-sinh with successive halving of the step until
/// two levels agree to `abs_tol` or to the rounding level of the working precision.
/// Returns the value, the last level difference and an estimate of ∫|f|.
fn tanh_sinh(
    ctx: &mut Ctx,
    nodes: &TanhSinhNodes,
    a: &BigFloat,
    b: &BigFloat,
    abs_tol: f64,
    f: &mut dyn FnMut(&mut Ctx, &BigFloat) -> Cx,
) -> Result<(Cx, f64, f64)> {
    let p = ctx.p;
    let half_len = b.sub(a, p, RM).mul(&ctx.num(0.5), p, RM);
    let guard = ctx.num(2f64.powi(-(p as i32 - 16)));
    let mut sum = ctx.cx(0.0, 0.0);
    let mut l1 = 0.0;
    let mut prev: Option<Cx> = None;
    let mut last_diff = f64::INFINITY;
    let mut last_target = abs_tol;
    let noise = 2f64.powi(-(p as i32) + 32);
    for (m, level) in nodes.levels.iter().enumerate() {
        for (delta, w, center) in level {
            let off = half_len.mul(delta, p, RM);
            if off.abs().cmp(&guard).map(|c| c < 0).unwrap_or(true) {
                continue;
            }
            let wl = w.mul(&half_len, p, RM);
            let wf = to_f64(&wl).abs();
            let left = a.add(&off, p, RM);
            let fl = f(ctx, &left);
            l1 += wf * ctx.to_c64(&fl).norm();
            sum = ctx.add(&sum, &ctx.scale(&fl, &wl));
            if !center {
                let right = b.sub(&off, p, RM);
                let fr = f(ctx, &right);
                l1 += wf * ctx.to_c64(&fr).norm();
                sum = ctx.add(&sum, &ctx.scale(&fr, &wl));
            }
        }
        let h = ctx.num(0.5f64.powi(m as i32));
        let est = ctx.scale(&sum, &h);
        if let Some(pv) = &prev {
            last_diff = ctx.to_c64(&ctx.sub(&est, pv)).norm();
            let floor = noise * l1 / 2f64.powi(m as i32);
            last_target = abs_tol.max(floor);
            if m >= 3 && last_diff <= abs_tol.max(floor) {
                return Ok((est, last_diff, l1 / 2f64.powi(m as i32)));
            }
        }
        prev = Some(est);
    }
    let est = ctx.to_c64(prev.as_ref().expect("at least one level"));
    Err(PmlError::Quadrature { estimate_re: est.re, estimate_im: est.im, error: last_diff, target: last_target })
}

/// Result of a multiprecision oracle evaluation.
#[derive(Debug, Clone, Copy)]
pub struct MpValue {
    pub value: Complex64,
    /// Difference between the last two tanh-sinh levels, summed over intervals.
    pub error: f64,
    /// Estimate of the integral of the absolute integrand (same normalization).
    pub l1: f64,
    pub bits: usize,
}

/// Upper end of the truncated ξ-axis; the spectrum decays like e^{−2|ξ| Re P̃}.
const XI_MAX: f64 = 20.0;

/// ŵ₀(x₂; ξ) = i e^{iμP̃} sin(μx₂*) sin(μx₂)/(μ sin(μP̃)), in multiprecision.
fn w0_hat_direct(ctx: &mut Ctx, xi: &BigFloat, x2: &BigFloat, xs: &BigFloat, k: &BigFloat, pt: &Cx) -> Cx {
    let p = ctx.p;
    let m = ctx.mu(&k.mul(k, p, RM).sub(&xi.mul(xi, p, RM), p, RM));
    let mc = ctx.mu_cx(&m);
    let (s_p, _, e_p) = ctx.trig(&ctx.mu_times(&m, pt));
    let (s_xs, _, _) = ctx.trig(&ctx.mu_times(&m, &ctx.real(xs)));
    let (s_x2, _, _) = ctx.trig(&ctx.mu_times(&m, &ctx.real(x2)));
    let num = ctx.mul(&ctx.mul(&e_p, &s_xs), &s_x2);
    ctx.times_i(&ctx.div(&num, &ctx.mul(&mc, &s_p)))
}

/// Which oracle field to integrate.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Field {
    W0,
    W1,
}

/// w₀(x) = (1/π)∫₀^∞ ŵ₀(x₂; ξ) cos(ξx₁) dξ evaluated with `bits` of precision,
/// for 0 ≤ x₂ below the PML.
pub fn w0_field_mp(x: Point, params: &OracleParams, bits: usize, abs_tol: f64) -> Result<MpValue> {
    field_mp(Field::W0, x, params, bits, abs_tol)
}

/// w₁(x) = (−i/π)∫₀^∞ ŵ₁(x₂; ξ) sin(ξx₁) dξ evaluated with `bits` of precision.
/// `abs_tol` is the absolute accuracy requested from the quadrature.
pub fn w1_field_mp(x: Point, params: &OracleParams, bits: usize, abs_tol: f64) -> Result<MpValue> {
    check_w1_point(x)?;
    field_mp(Field::W1, x, params, bits, abs_tol)
}

fn field_mp(field: Field, x: Point, params: &OracleParams, bits: usize, abs_tol: f64) -> Result<MpValue> {
    if !(params.p_tilde.im > 0.0) {
        return Err(PmlError::contract("Im P~ must be positive"));
    }
    let mut ctx = Ctx::new(bits)?;
    let p = bits;
    let k = ctx.num(params.wavenumber);
    let xs = ctx.num(params.x_star.x2);
    let x2 = ctx.num(x.x2);
    let x1 = ctx.num(x.x1);
    let pt = ctx.cx(params.p_tilde.re, params.p_tilde.im);
    let one = ctx.num(1.0);

    // Interval ends: 0, the branch points and (for w₁) the removable point 1/2, XI_MAX.
    let kf = params.wavenumber;
    let mut ends: Vec<(f64, BigFloat)> = vec![(0.0, ctx.num(0.0)), (kf, k.clone()), (XI_MAX, ctx.num(XI_MAX))];
    if field == Field::W1 {
        ends.push(((1.0 - kf).abs(), one.sub(&k, p, RM).abs()));
        ends.push((1.0 + kf, one.add(&k, p, RM)));
        ends.push((0.5, ctx.num(0.5)));
    }
    ends.retain(|(v, _)| *v <= XI_MAX);
    ends.sort_by(|a, b| a.0.total_cmp(&b.0));
    ends.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-15);

    let nodes = TanhSinhNodes::new(&mut ctx, 9);
    let mut integrand = |ctx: &mut Ctx, xi: &BigFloat| {
        let arg = xi.mul(&x1, ctx.p, RM);
        match field {
            Field::W0 => {
                let w = w0_hat_direct(ctx, xi, &x2, &xs, &k, &pt);
                let c = arg.cos(ctx.p, RM, &mut ctx.cc);
                ctx.scale(&w, &c)
            }
            Field::W1 => {
                let w = w1_hat_direct(ctx, xi, &x2, &xs, &k, &pt);
                let s = arg.sin(ctx.p, RM, &mut ctx.cc);
                ctx.scale(&w, &s)
            }
        }
    };
    let mut total = ctx.cx(0.0, 0.0);
    let (mut err, mut l1) = (0.0, 0.0);
    let share = abs_tol / ends.len() as f64;
    for pair in ends.windows(2) {
        let (v, e, a) = tanh_sinh(&mut ctx, &nodes, &pair[0].1, &pair[1].1, share, &mut integrand)?;
        total = ctx.add(&total, &v);
        err += e;
        l1 += a;
    }
    let pi = ctx.cc.pi(p, RM);
    let scaled = ctx.scale(&total, &one.div(&pi, p, RM));
    let value = match field {
        Field::W0 => ctx.to_c64(&scaled),
        // (−i)·scaled
        Field::W1 => ctx.to_c64(&Cx { re: scaled.im.clone(), im: scaled.re.neg() }),
    };
    Ok(MpValue { value, error: err / std::f64::consts::PI, l1: l1 / std::f64::consts::PI, bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{w1_hat, OracleParams};

    #[test]
    fn conversion_to_double() {
        for &v in &[1.0, -3.25, 1e-70, 6.02e23, -7.5e-300] {
            let b = BigFloat::from_f64(v, 256);
            assert!((to_f64(&b) - v).abs() <= 1e-15 * v.abs());
        }
    }

    #[test]
    fn direct_w0_spectrum_matches_double_form() {
        let params = OracleParams::new(0.6, 1.5, Complex64::new(5.0, 5.0)).unwrap();
        let mut ctx = Ctx::new(192).unwrap();
        let (k, xs, x2) = (ctx.num(0.6), ctx.num(1.5), ctx.num(0.5));
        let pt = ctx.cx(5.0, 5.0);
        for &xi in &[0.1, 0.59, 0.61, 1.9, 3.0] {
            let v = w0_hat_direct(&mut ctx, &BigFloat::from_f64(xi, 192), &x2, &xs, &k, &pt);
            let got = ctx.to_c64(&v);
            let want = crate::spectral::w0_hat_stretched(Complex64::new(0.5, 0.0), xi, &params).unwrap();
            assert!((got - want).norm() < 1e-12 * want.norm(), "{xi}: {got} vs {want}");
        }
    }

    #[test]
    fn direct_spectrum_matches_stable_double_form() {
        let params = OracleParams::new(0.6, 1.5, Complex64::new(5.0, 5.0)).unwrap();
        let mut ctx = Ctx::new(192).unwrap();
        let (k, xs, x2) = (ctx.num(0.6), ctx.num(1.5), ctx.num(0.5));
        let pt = ctx.cx(5.0, 5.0);
        for &xi in &[0.1, 0.45, 0.9, 1.9, 3.0] {
            let v = w1_hat_direct(&mut ctx, &BigFloat::from_f64(xi, 192), &x2, &xs, &k, &pt);
            let got = ctx.to_c64(&v);
            let want = w1_hat(0.5, xi, &params).unwrap();
            assert!((got - want).norm() <= 1e-11 * want.norm(), "xi={xi}: {got} vs {want}");
        }
    }
}
