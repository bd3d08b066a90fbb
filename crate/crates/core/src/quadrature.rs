//! Quadrature rules: Gauss–Legendre nodes and globally adaptive Gauss–Kronrod (10/21)
//! integration of complex-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{PmlError, Result};

/// Gauss–Legendre nodes and weights on [−1, 1], computed by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Cached 16-point rule.
pub fn gauss_legendre_16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Cached 32-point rule.
pub fn gauss_legendre_32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// Integrates a real function over [a, b] with a cached Gauss–Legendre rule.
pub fn fixed_gauss_real(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(&t, &w)| w * f(c + h * t)).sum::<f64>() * h
}

// Kronrod abscissae and weights of the 21-point rule, with the embedded 10-point
// Gauss weights (QUADPACK qk21 constants).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Outcome of one 21-point Kronrod panel.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: Complex64,
    pub error: f64,
    /// ∫|f| over the panel (Kronrod estimate).
    pub l1: f64,
}

/// Applies the 21-point Kronrod rule and its embedded 10-point Gauss rule on [a, b].
pub fn gk21(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = Complex64::new(0.0, 0.0);
    let mut resabs = fc.norm() * WGK[10];
    let mut fv1 = [Complex64::new(0.0, 0.0); 10];
    let mut fv2 = [Complex64::new(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += (f1 + f2) * WGK[j];
        resabs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            resg += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = (fc - mean).norm() * WGK[10];
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let hh = h.abs();
    let value = resk * h;
    let resabs = resabs * hh;
    let resasc = resasc * hh;
    let mut err = ((resk - resg) * h).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Panel { a, b, value, error: err, l1: resabs }
}

/// Tolerances and budget for adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Absolute error target.
    pub abs_tol: f64,
    /// Relative error target (measured against the current integral estimate).
    pub rel_tol: f64,
    /// Maximum number of panels kept by the global subdivision.
    pub max_panels: usize,
}

impl QuadOptions {
    /// Absolute tolerance only.
    pub fn absolute(tol: f64) -> Self {
        QuadOptions { abs_tol: tol, rel_tol: 0.0, max_panels: 4000 }
    }

    /// Absolute and relative tolerances; the looser one governs.
    pub fn mixed(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions { abs_tol, rel_tol, max_panels: 4000 }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    /// Estimated absolute error.
    pub error: f64,
    /// Estimate of ∫|f|; the ratio l1/|value| measures cancellation.
    pub l1: f64,
    /// Number of panels used.
    pub panels: usize,
}

struct HeapPanel(Panel);

impl PartialEq for HeapPanel {
    fn eq(&self, other: &Self) -> bool {
        self.0.error == other.0.error
    }
}
impl Eq for HeapPanel {}
impl PartialOrd for HeapPanel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapPanel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error).then_with(|| other.0.a.total_cmp(&self.0.a))
    }
}

/// Globally adaptive integration over a union of intervals: the panel with the
/// largest error estimate is bisected until the summed error meets the target.
pub fn integrate_intervals(
    f: &impl Fn(f64) -> Complex64,
    intervals: &[(f64, f64)],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    for &(a, b) in intervals {
        if b > a {
            heap.push(HeapPanel(gk21(f, a, b)));
        }
    }
    loop {
        let (value, error, l1) = totals(&heap);
        let target = opts.abs_tol.max(opts.rel_tol * value.norm());
        if error <= target {
            return Ok(QuadResult { value, error, l1, panels: heap.len() });
        }
        let too_small = heap.peek().map(|p| (p.0.b - p.0.a).abs() <= 1e-12 * (1.0 + p.0.a.abs())).unwrap_or(true);
        if heap.len() >= opts.max_panels || too_small {
            return Err(PmlError::Quadrature { estimate_re: value.re, estimate_im: value.im, error, target });
        }
        let worst = heap.pop().expect("heap is non-empty").0;
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(HeapPanel(gk21(f, worst.a, mid)));
        heap.push(HeapPanel(gk21(f, mid, worst.b)));
    }
}

/// Sums in a fixed order (sorted by left endpoint) so results are deterministic.
fn totals(heap: &BinaryHeap<HeapPanel>) -> (Complex64, f64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().map(|p| &p.0).collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = Complex64::new(0.0, 0.0);
    let (mut error, mut l1) = (0.0, 0.0);
    for p in panels {
        value += p.value;
        error += p.error;
        l1 += p.l1;
    }
    (value, error, l1)
}

/// Adaptive integration of a real function over [a, b] (absolute tolerance).
pub fn integrate_real(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let g = |x: f64| Complex64::new(f(x), 0.0);
    integrate_intervals(&g, &[(a, b)], QuadOptions::absolute(tol)).map(|r| r.value.re)
}
