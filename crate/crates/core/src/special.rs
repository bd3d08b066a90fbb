//! Special functions: Hankel functions of the first kind and a few complex helpers.

use num_complex::Complex64;

/// H₀⁽¹⁾(x) = J₀(x) + iY₀(x) for real x > 0.
pub fn hankel1_0(x: f64) -> Complex64 {
    Complex64::new(libm::j0(x), libm::y0(x))
}

/// H₁⁽¹⁾(x) = J₁(x) + iY₁(x) for real x > 0.
pub fn hankel1_1(x: f64) -> Complex64 {
    Complex64::new(libm::j1(x), libm::y1(x))
}

/// Free-space Green's function G(r) = (i/4)H₀⁽¹⁾(kr) of Δ + k².
pub fn green(k: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel1_0(k * r)
}

/// Radial derivative ∂G/∂r = −(ik/4)H₁⁽¹⁾(kr).
pub fn green_dr(k: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, -0.25 * k) * hankel1_1(k * r)
}

/// e^z − 1 without cancellation for small |z|.
pub fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let s = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * s * s;
    let im = x.exp() * y.sin();
    Complex64::new(re, im)
}

/// sin(w)/w, equal to 1 at w = 0.
pub fn sinc(w: Complex64) -> Complex64 {
    if w.norm() < 1e-4 {
        let w2 = w * w;
        1.0 - w2 / 6.0 + w2 * w2 / 120.0
    } else {
        w.sin() / w
    }
}
