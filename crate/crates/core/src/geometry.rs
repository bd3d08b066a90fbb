//! PML absorption profiles, the complex coordinate stretch and the catalog of
//! scattering surfaces.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{PmlError, Result};
use crate::quadrature::{fixed_gauss_real, gauss_legendre_32};

/// A point (x₁, x₂) of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Point { x1, x2 }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }
}

/// Shape of the absorption function inside the PML band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Sixth-power blend ramp on [H, H+L/2] followed by a plateau.
    Smooth,
    /// Constant value on (H, H+L].
    Constant,
    /// No absorption (pure truncation).
    Zero,
}

/// Absorption profile σ(x₂) on the PML band [H, H+L].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlProfile {
    pub pml_start: f64,
    pub thickness: f64,
    pub sigma_max: f64,
    pub kind: ProfileKind,
}

/// Complex stretch data: P̃ and α(x₂) = 1 + iσ(x₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchParam {
    pub p_tilde: Complex64,
    pub profile: PmlProfile,
}

impl StretchParam {
    pub fn alpha_of(&self, x2: f64) -> Complex64 {
        self.profile.alpha(x2)
    }
}

impl PmlProfile {
    /// Validated constructor.
    pub fn new(h: f64, l: f64, sigma_max: f64, kind: ProfileKind) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(PmlError::contract(format!("PML thickness L must be positive, got {l}")));
        }
        if !(h >= 0.0 && h.is_finite()) {
            return Err(PmlError::contract(format!("PML start H must be non-negative, got {h}")));
        }
        if !(sigma_max >= 0.0 && sigma_max.is_finite()) {
            return Err(PmlError::contract(format!("sigma_max must be non-negative, got {sigma_max}")));
        }
        Ok(PmlProfile { pml_start: h, thickness: l, sigma_max, kind })
    }

    /// The smooth profile with plateau value 2.
    pub fn smooth(h: f64, l: f64) -> Result<Self> {
        Self::new(h, l, 2.0, ProfileKind::Smooth)
    }

    /// Top of the PML band, H + L.
    pub fn top(&self) -> f64 {
        self.pml_start + self.thickness
    }

    /// σ(x₂).
    pub fn sigma(&self, x2: f64) -> f64 {
        if x2 <= self.pml_start {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Zero => 0.0,
            ProfileKind::Constant => self.sigma_max,
            ProfileKind::Smooth => {
                let half = 0.5 * self.thickness;
                if x2 >= self.pml_start + half {
                    return self.sigma_max;
                }
                let xi = (2.0 * x2 - (2.0 * self.pml_start + half)) / half;
                self.sigma_max * blend(xi)
            }
        }
    }

    /// α(x₂) = 1 + iσ(x₂).
    pub fn alpha(&self, x2: f64) -> Complex64 {
        Complex64::new(1.0, self.sigma(x2))
    }

    /// ∫₀^{x₂} σ(t) dt.
    pub fn sigma_integral(&self, x2: f64) -> f64 {
        if x2 <= self.pml_start {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Zero => 0.0,
            ProfileKind::Constant => self.sigma_max * (x2 - self.pml_start),
            ProfileKind::Smooth => {
                let ramp_end = self.pml_start + 0.5 * self.thickness;
                if x2 >= ramp_end {
                    // blend(ξ) + blend(−ξ) = 1, so the ramp carries exactly half its width.
                    self.sigma_max * (0.25 * self.thickness + (x2 - ramp_end))
                } else {
                    fixed_gauss_real(|t| self.sigma(t), self.pml_start, x2, gauss_legendre_32())
                }
            }
        }
    }

    /// x̃₂ = x₂ + i∫₀^{x₂} σ.
    pub fn stretch(&self, x2: f64) -> Complex64 {
        Complex64::new(x2, self.sigma_integral(x2))
    }

    /// P̃ = ∫_H^{H+L} α = L + i∫σ.
    pub fn p_tilde(&self) -> Complex64 {
        Complex64::new(self.thickness, self.sigma_integral(self.top()))
    }

    pub fn stretch_param(&self) -> StretchParam {
        StretchParam { p_tilde: self.p_tilde(), profile: *self }
    }
}

/// Normalized ramp f₁⁶/(f₁⁶+f₂⁶) on ξ ∈ [−1, 1], rising from 0 to 1.
fn blend(xi: f64) -> f64 {
    let f1 = xi * xi * xi / 3.0 + xi / 6.0 + 0.5;
    let f2 = 1.0 - f1;
    let (a, b) = (f1.powi(6), f2.powi(6));
    a / (a + b)
}

/// σ(x₂) for `profile`.
pub fn sigma_eval(profile: &PmlProfile, x2: f64) -> f64 {
    profile.sigma(x2)
}

/// Complex stretch x̃₂ for `profile`.
pub fn stretch(profile: &PmlProfile, x2: f64) -> Complex64 {
    profile.stretch(x2)
}

/// P̃ for `profile`.
pub fn p_tilde(profile: &PmlProfile) -> Complex64 {
    profile.p_tilde()
}

/// Catalog of scattering surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    /// x₂ = sin x₁.
    Sine,
    /// sin x₁ replaced by the straight line x₂ = 0 on (−π, π).
    SineFlattened,
    /// Two-level grating with one widened central tooth.
    BinaryGrating,
    /// x₂ = sin x₁ with a sound-soft disc above the central period.
    SineWithObstacle,
    /// x₂ = 0.
    Flat,
}

/// Sound-soft disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

/// Dimensions of the binary grating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingSpec {
    pub low: f64,
    pub high: f64,
    /// Teeth occupy |x₁ − 2πn| < tooth_half_width.
    pub tooth_half_width: f64,
    /// Half-width of the widened tooth on the central period.
    pub widened_half_width: f64,
}

impl Default for GratingSpec {
    fn default() -> Self {
        GratingSpec { low: 0.0, high: 1.0, tooth_half_width: 0.5 * PI, widened_half_width: 0.75 * PI }
    }
}

/// A periodic surface with an optional local perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub period: f64,
    pub obstacle: Option<Disc>,
    pub grating: GratingSpec,
}

impl SurfaceSpec {
    /// Surface of the given kind with default dimensions (obstacle at (0, 2.8), radius 0.4).
    pub fn new(kind: SurfaceKind) -> Self {
        let obstacle =
            (kind == SurfaceKind::SineWithObstacle).then_some(Disc { center: Point::new(0.0, 2.8), radius: 0.4 });
        SurfaceSpec { kind, period: 2.0 * PI, obstacle, grating: GratingSpec::default() }
    }

    /// Height of Γ at x₁.
    pub fn height(&self, x1: f64) -> f64 {
        match self.kind {
            SurfaceKind::Sine | SurfaceKind::SineWithObstacle => x1.sin(),
            SurfaceKind::SineFlattened => {
                if x1.abs() < PI {
                    0.0
                } else {
                    x1.sin()
                }
            }
            SurfaceKind::BinaryGrating => {
                if self.in_tooth(x1, false) {
                    self.grating.high
                } else {
                    self.grating.low
                }
            }
            SurfaceKind::Flat => 0.0,
        }
    }

    /// Part of the height that the computational grid follows; the grating's
    /// teeth and the obstacle are carved out of a flat grid instead.
    pub fn mapped_height(&self, x1: f64) -> f64 {
        match self.kind {
            SurfaceKind::BinaryGrating => self.grating.low,
            _ => self.height(x1),
        }
    }

    /// Derivative of `mapped_height`.
    pub fn mapped_slope(&self, x1: f64) -> f64 {
        match self.kind {
            SurfaceKind::Sine | SurfaceKind::SineWithObstacle => x1.cos(),
            SurfaceKind::SineFlattened => {
                if x1.abs() < PI {
                    0.0
                } else {
                    x1.cos()
                }
            }
            SurfaceKind::BinaryGrating | SurfaceKind::Flat => 0.0,
        }
    }

    /// Second derivative of `mapped_height`.
    pub fn mapped_curvature(&self, x1: f64) -> f64 {
        match self.kind {
            SurfaceKind::Sine | SurfaceKind::SineWithObstacle => -x1.sin(),
            SurfaceKind::SineFlattened => {
                if x1.abs() < PI {
                    0.0
                } else {
                    -x1.sin()
                }
            }
            SurfaceKind::BinaryGrating | SurfaceKind::Flat => 0.0,
        }
    }

    /// Largest |mapped_height|.
    pub fn max_mapped_height(&self) -> f64 {
        match self.kind {
            SurfaceKind::BinaryGrating => self.grating.low.abs(),
            SurfaceKind::Flat => 0.0,
            _ => 1.0,
        }
    }

    /// Upper bound of the surface height.
    pub fn max_height(&self) -> f64 {
        match self.kind {
            SurfaceKind::BinaryGrating => self.grating.high.max(self.grating.low),
            SurfaceKind::Flat => 0.0,
            _ => 1.0,
        }
    }

    /// True for points in the closed solid region carved out of the grid
    /// (grating teeth and the obstacle disc); such points carry ũ = 0.
    pub fn is_solid(&self, x1: f64, x2: f64) -> bool {
        if self.kind == SurfaceKind::BinaryGrating && x2 <= self.grating.high && self.in_tooth(x1, true) {
            return true;
        }
        if let Some(d) = self.obstacle {
            if d.center.dist(&Point::new(x1, x2)) <= d.radius {
                return true;
            }
        }
        false
    }

    fn in_tooth(&self, x1: f64, closed: bool) -> bool {
        let g = &self.grating;
        let central = x1.abs() <= PI;
        let half = if central { g.widened_half_width } else { g.tooth_half_width };
        let r = x1 - self.period * (x1 / self.period).round();
        if closed {
            r.abs() <= half * (1.0 + 1e-14)
        } else {
            r.abs() < half
        }
    }

    /// Abscissae in (a, b) where the surface or the solid region has a kink or jump;
    /// spectral elements are split there.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = Vec::new();
        let n0 = ((a - PI) / self.period).floor() as i64 - 1;
        let n1 = ((b + PI) / self.period).ceil() as i64 + 1;
        for n in n0..=n1 {
            let c = n as f64 * self.period;
            match self.kind {
                SurfaceKind::BinaryGrating => {
                    let half = if n == 0 { self.grating.widened_half_width } else { self.grating.tooth_half_width };
                    pts.push(c - half);
                    pts.push(c + half);
                }
                SurfaceKind::SineFlattened if n == 0 => {
                    pts.push(-PI);
                    pts.push(PI);
                }
                _ => {}
            }
        }
        let eps = 1e-12;
        let mut out: Vec<f64> = pts.into_iter().filter(|&x| x > a + eps && x < b - eps).collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|x, y| (*x - *y).abs() < eps);
        out
    }

    /// Whether the cell [c − π, c + π] coincides with the unperturbed periodic cell.
    pub fn is_periodic_cell(&self, center: f64) -> bool {
        match self.kind {
            SurfaceKind::Sine | SurfaceKind::Flat => true,
            SurfaceKind::SineFlattened | SurfaceKind::BinaryGrating | SurfaceKind::SineWithObstacle => {
                center.abs() > PI
            }
        }
    }

    /// Checks the obstacle against the surface and the PML start H.
    pub fn validate(&self, h: f64) -> Result<()> {
        if let Some(d) = self.obstacle {
            if d.radius <= 0.0 {
                return Err(PmlError::contract("obstacle radius must be positive"));
            }
            if d.center.x2 - d.radius <= self.max_height() || d.center.x2 + d.radius >= h {
                return Err(PmlError::contract(format!(
                    "obstacle disc [{}, {}] must lie strictly between the surface and x2 = H = {h}",
                    d.center.x2 - d.radius,
                    d.center.x2 + d.radius
                )));
            }
            if d.center.x1.abs() + d.radius >= PI {
                return Err(PmlError::contract("obstacle must lie inside the central period"));
            }
        }
        if self.kind == SurfaceKind::BinaryGrating {
            let g = &self.grating;
            if !(g.high > g.low && g.tooth_half_width > 0.0 && g.tooth_half_width < PI) {
                return Err(PmlError::contract("invalid grating dimensions"));
            }
            if !(g.widened_half_width > 0.0 && g.widened_half_width < PI) {
                return Err(PmlError::contract("widened tooth must fit in the central period"));
            }
        }
        Ok(())
    }
}

/// Height of `spec` at x₁.
pub fn surface_height(spec: &SurfaceSpec, x1: f64) -> f64 {
    spec.height(x1)
}
