//! Closed-form 1D propagators (free, step, delta) and path-decomposition
//! compositions across x = 0.
//!
//! Oscillatory time/space integrals are evaluated on rotated contours so the
//! Fresnel factors decay; rotations stay in regions where the integrands are
//! analytic.

use crate::phys::{GaussianPacket, PhysParams};
#[cfg(test)]
use crate::phys::SpreadMode;
use crate::quad::{adaptive_gk, GaussLegendre};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, PI};

/// Step potential V(x) = height * theta(-x); `height` may be complex,
/// with -i V0 (V0 > 0) for the absorbing case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPotential {
    pub height: Complex64,
}

impl StepPotential {
    pub fn real(v0: f64) -> Self {
        StepPotential { height: Complex64::new(v0, 0.0) }
    }

    pub fn absorbing(v0: f64) -> Result<Self> {
        if !(v0 > 0.0) {
            return Err(Error::invalid("absorbing step needs V0 > 0".to_string()));
        }
        Ok(StepPotential { height: Complex64::new(0.0, -v0) })
    }

    pub fn is_absorbing(&self) -> bool {
        self.height.re == 0.0 && self.height.im < 0.0
    }
}

/// Delta potential V(x) = lambda delta(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPotential {
    pub strength: f64,
}

impl DeltaPotential {
    /// Full propagator sample between two points.
    pub fn kernel(&self, x1: f64, x0: f64, t: f64, params: PhysParams) -> Result<KernelSample> {
        Ok(KernelSample {
            value: delta_kernel(x1, x0, t, self.strength, params)?,
            x1,
            x0,
            t1: t,
            t0: 0.0,
            kernel_id: KernelId::DeltaFull,
        })
    }
}

/// Which closed form produced a sampled kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelId {
    Free,
    Restricted,
    StepFull,
    StepEdge,
    DeltaFull,
    SemiclassicalStep,
}

/// A propagator value tagged with its endpoints and provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub value: Complex64,
    pub x1: f64,
    pub x0: f64,
    pub t1: f64,
    pub t0: f64,
    pub kernel_id: KernelId,
}

/// Free propagator (m / 2 pi i t)^{1/2} exp(i m (x1-x0)^2 / 2t).
pub fn free_kernel(x1: f64, x0: f64, t: f64, params: PhysParams) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("free kernel needs t > 0, got {t}")));
    }
    let m = params.mass;
    let pref = Complex64::new(0.0, -m / (2.0 * PI * t)).sqrt();
    let dx = x1 - x0;
    Ok(pref * Complex64::new(0.0, m * dx * dx / (2.0 * t)).exp())
}

/// Method-of-images propagator restricted to x > 0; zero if either endpoint
/// leaves the half-line.
pub fn restricted_kernel(x1: f64, x0: f64, t: f64, params: PhysParams) -> Result<Complex64> {
    if x1 <= 0.0 || x0 <= 0.0 {
        return Ok(Complex64::default());
    }
    Ok(free_kernel(x1, x0, t, params)? - free_kernel(-x1, x0, t, params)?)
}

/// (1 - e^{-z}) / z with the analytic limit at z = 0.
fn edge_factor(z: Complex64) -> Complex64 {
    if z.norm() < 1e-6 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        (1.0 - (-z).exp()) / z
    }
}

/// Propagator along the edge of a step potential,
/// g(0,t|0,0) = (m/2 pi i t)^{1/2} (1 - e^{-i V0 t})/(i V0 t).
///
/// For the absorbing step pass `height = -i V0`, which yields the real
/// boundary factor f_V(t) = (1 - e^{-V0 t})/(V0 t).
pub fn step_edge_kernel(t: f64, step: StepPotential, params: PhysParams) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("edge kernel needs t > 0, got {t}")));
    }
    let z = Complex64::new(0.0, 1.0) * step.height * t;
    let pref = Complex64::new(0.0, -params.mass / (2.0 * PI * t)).sqrt();
    Ok(pref * edge_factor(z))
}

/// Transmission and reflection amplitudes for a left-moving state on the
/// absorbing step, T = 2/(1 + (1 + i V0/E)^{1/2}), R = T - 1.
pub fn step_scattering_amplitudes(
    p: f64,
    v0: f64,
    params: PhysParams,
) -> Result<(Complex64, Complex64)> {
    if p == 0.0 {
        return Err(Error::invalid("scattering amplitudes singular at p = 0".to_string()));
    }
    if !(p < 0.0) {
        return Err(Error::invalid("incoming state must have p < 0".to_string()));
    }
    let e = p * p / (2.0 * params.mass);
    let root = Complex64::new(e, v0).sqrt() / e.sqrt();
    let t = 2.0 / (1.0 + root);
    Ok((t, t - 1.0))
}

/// Flux fraction carried by the transmitted wave at the boundary.
pub fn transmitted_flux_fraction(p: f64, v0: f64, params: PhysParams) -> Result<f64> {
    let (t, _) = step_scattering_amplitudes(p, v0, params)?;
    let e = p * p / (2.0 * params.mass);
    Ok(t.norm_sqr() * Complex64::new(e, v0).sqrt().re / e.sqrt())
}

/// Full delta-potential propagator,
/// g = g_f(x1,t|x0) - lambda m int_0^inf du e^{-lambda m u} g_f(|x1|+|x0|+u, t|0).
///
/// The u integral runs on the rotated ray u = e^{i pi/4} s, where the Fresnel
/// factor decays as exp(-m s^2/2t).
pub fn delta_kernel(x1: f64, x0: f64, t: f64, lam: f64, params: PhysParams) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("delta kernel needs t > 0, got {t}")));
    }
    if lam < 0.0 {
        return Err(Error::invalid(
            "attractive delta (lambda < 0) is outside the convergent integral form".to_string(),
        ));
    }
    let free = free_kernel(x1, x0, t, params)?;
    if lam == 0.0 {
        return Ok(free);
    }
    let m = params.mass;
    let c = x1.abs() + x0.abs();
    let rot = Complex64::from_polar(1.0, FRAC_PI_4);
    let pref = Complex64::new(0.0, -m / (2.0 * PI * t)).sqrt();
    let head = pref * Complex64::new(0.0, m * c * c / (2.0 * t)).exp();
    let s_max = 9.0 * (2.0 * t / m).sqrt() + 30.0 / (lam * m);
    let (integral, _) = adaptive_gk(0.0, s_max, 1e-9, |s| {
        let lin = (Complex64::new(0.0, m * c / t) - lam * m) * rot * s;
        (Complex64::new(-m * s * s / (2.0 * t), 0.0) + lin).exp()
    })?;
    Ok(free - lam * m * head * rot * integral)
}

/// Mode for the PDX time-convolution compositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdxMode {
    /// Keeps the exact edge propagator; outgoing leg composed by its last
    /// crossing.
    Exact,
    /// Straight-line-dominated approximation: the outgoing leg is free
    /// propagation damped by e^{-V0 s}, valid for V0 much below E.
    Semiclassical,
}

/// Free kernel continued to complex duration (fourth-quadrant arguments).
fn free_kernel_ct(x1: f64, x0: f64, t: Complex64, m: f64) -> Complex64 {
    let pref = (Complex64::new(0.0, -m / (2.0 * PI)) / t).sqrt();
    let dx = x1 - x0;
    pref * (Complex64::new(0.0, m * dx * dx / 2.0) / t).exp()
}

/// Evolved Gaussian amplitude and spatial derivative at complex time.
fn gaussian_ct(packet: &GaussianPacket, x: f64, t: Complex64) -> (Complex64, Complex64) {
    let m = packet.params.mass;
    let s2 = packet.sigma * packet.sigma;
    let lam = Complex64::new(1.0, 0.0) + Complex64::new(0.0, 1.0) * t / (2.0 * m * s2);
    let norm = (2.0 * PI * s2).powf(-0.25) * lam.sqrt().inv();
    let u = Complex64::new(x - packet.q0, 0.0) - t * (packet.p0 / m);
    let e0 = packet.p0 * packet.p0 / (2.0 * m);
    let psi = norm
        * (-(u * u) / (4.0 * s2 * lam) + Complex64::new(0.0, packet.p0 * x)
            - Complex64::new(0.0, e0) * t)
            .exp();
    let dpsi = psi * (Complex64::new(0.0, packet.p0) - u / (2.0 * s2 * lam));
    (psi, dpsi)
}

/// Integrate g(s) over s in [0, tau] where g oscillates like exp(i c / s)
/// near s = 0: a ray rotated by -theta (where the Fresnel factor decays),
/// a closing arc at |s| = s_split, then the real segment in `panels` panels.
fn rotated_endpoint_integral(
    tau: f64,
    s_split: f64,
    theta: f64,
    panels: usize,
    g: &dyn Fn(Complex64) -> Complex64,
) -> Complex64 {
    let rule = GaussLegendre::new(12);
    let dir = Complex64::from_polar(1.0, -theta);
    // ray s = dir v^2, sqrt-graded against the s^{-1/2} edge prefactor
    let v_max = s_split.sqrt();
    let mut acc = Complex64::default();
    let ray_panels = 8;
    for k in 0..ray_panels {
        let a = v_max * k as f64 / ray_panels as f64;
        let b = v_max * (k + 1) as f64 / ray_panels as f64;
        acc += rule.integrate_complex(a, b, |v| {
            if v == 0.0 {
                return Complex64::default();
            }
            g(dir * v * v) * dir * 2.0 * v
        });
    }
    // closing arc s = s_split e^{-i phi}, phi from theta down to 0
    acc += rule.integrate_complex(0.0, theta, |phi| {
        let s = Complex64::from_polar(s_split, -phi);
        g(s) * Complex64::new(0.0, 1.0) * s
    });
    // real remainder
    let h = (tau - s_split) / panels as f64;
    for k in 0..panels {
        acc += rule.integrate_complex(s_split + k as f64 * h, s_split + (k + 1) as f64 * h, |s| {
            g(Complex64::new(s, 0.0))
        });
    }
    acc
}

fn pdx_split_radius(initial: &GaussianPacket, x1: f64, tau: f64) -> f64 {
    let m = initial.params.mass;
    let p_ref = initial.p0.abs() + 3.0 / (2.0 * initial.sigma);
    (0.5 * m * x1.abs() / p_ref).min(0.5 * tau)
}

/// Transmitted amplitude at (x1 < 0, tau) for an initial packet incident on
/// the absorbing step, composed from the first-crossing decomposition
/// psi(x1,tau) = (i/m) int_0^tau ds K_out(x1, s) d/dx psi_free(0, tau - s).
pub fn pdx_compose_first_crossing(
    initial: &GaussianPacket,
    v0: f64,
    x1: f64,
    tau: f64,
    quadrature_n: usize,
    mode: PdxMode,
) -> Result<Complex64> {
    if !(x1 < 0.0) {
        return Err(Error::invalid("first-crossing composition needs x1 < 0".to_string()));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("need tau > 0".to_string()));
    }
    let m = initial.params.mass;
    let panels = quadrature_n.max(16);
    let s_split = pdx_split_radius(initial, x1, tau);
    let packet = *initial;
    let g: Box<dyn Fn(Complex64) -> Complex64> = match mode {
        PdxMode::Semiclassical => Box::new(move |s: Complex64| {
            let k_out = free_kernel_ct(x1, 0.0, s, m) * (-v0 * s).exp();
            let (_, dpsi) = gaussian_ct(&packet, 0.0, Complex64::new(tau, 0.0) - s);
            k_out * dpsi
        }),
        PdxMode::Exact => Box::new(move |s: Complex64| {
            let k_out = exact_outgoing_leg(x1, s, v0, m);
            let (_, dpsi) = gaussian_ct(&packet, 0.0, Complex64::new(tau, 0.0) - s);
            k_out * dpsi
        }),
    };
    let acc = rotated_endpoint_integral(tau, s_split, 0.35, panels, &g);
    Ok(Complex64::new(0.0, 1.0 / m) * acc)
}

/// Last-crossing companion in the semiclassical approximation:
/// psi(x1,tau) = (1/m) int_0^tau dw <x1|e^{-i H0 w} p|0> e^{-V0 w}
///               psi_free(0, tau - w).
pub fn pdx_compose_last_crossing_semiclassical(
    initial: &GaussianPacket,
    v0: f64,
    x1: f64,
    tau: f64,
    quadrature_n: usize,
) -> Result<Complex64> {
    if !(x1 < 0.0) {
        return Err(Error::invalid("last-crossing composition needs x1 < 0".to_string()));
    }
    let m = initial.params.mass;
    let panels = quadrature_n.max(16);
    let s_split = pdx_split_radius(initial, x1, tau);
    let packet = *initial;
    let g = move |w: Complex64| -> Complex64 {
        // restricted-derivative leg (-x1/w) g_f(x1, w | 0) e^{-V0 w}
        let leg = free_kernel_ct(x1, 0.0, w, m) * (-x1) / w * (-v0 * w).exp();
        let (psi, _) = gaussian_ct(&packet, 0.0, Complex64::new(tau, 0.0) - w);
        leg * psi
    };
    Ok(rotated_endpoint_integral(tau, s_split, 0.35, panels, &g))
}

/// Exact <x1 < 0 | e^{-iHs} | 0> for the absorbing step, composed from the
/// last crossing of the origin:
/// K(s) = int_0^s dw (-x1/w) g_f(x1,w|0) e^{-V0 w} g_edge(s - w).
///
/// The w contour is parametrized as w = s zeta with zeta independent of s, so
/// the formula continues analytically to the (slightly rotated) complex s of
/// the outer integral: a rotated ray and arc up to zeta = 1/2 soak up the
/// w -> 0 Fresnel oscillation, and the upper piece substitutes
/// 1 - zeta = nu^2 against the edge-kernel square root.
fn exact_outgoing_leg(x1: f64, s: Complex64, v0: f64, m: f64) -> Complex64 {
    let edge = |t2: Complex64| -> Complex64 {
        let z = Complex64::new(v0, 0.0) * t2;
        let pref = (Complex64::new(0.0, -m / (2.0 * PI)) / t2).sqrt();
        pref * edge_factor(z)
    };
    let leg = |w: Complex64| -> Complex64 {
        let pref = (Complex64::new(0.0, -m / (2.0 * PI)) / w).sqrt();
        let phase = (Complex64::new(0.0, m * x1 * x1 / 2.0) / w).exp();
        (-x1) / w * pref * phase * (-v0 * w).exp()
    };
    let rule = GaussLegendre::new(16);
    let theta_w = 0.45f64;
    let dir = Complex64::from_polar(1.0, -theta_w);

    // rotated ray w = s dir rho^2, rho in (0, sqrt(1/2)]
    let rho_max = 0.5f64.sqrt();
    let mut acc = Complex64::default();
    for k in 0..6 {
        let a = rho_max * k as f64 / 6.0;
        let b = rho_max * (k + 1) as f64 / 6.0;
        acc += rule.integrate_complex(a, b, |rho| {
            if rho == 0.0 {
                return Complex64::default();
            }
            let w = s * dir * rho * rho;
            leg(w) * edge(s - w) * s * dir * 2.0 * rho
        });
    }
    // arc w = (s/2) e^{-i phi}, phi from theta_w to 0
    acc += rule.integrate_complex(0.0, theta_w, |phi| {
        let w = s * 0.5 * Complex64::from_polar(1.0, -phi);
        leg(w) * edge(s - w) * Complex64::new(0.0, 1.0) * w
    });
    // upper piece w = s (1 - nu^2), t2 = s nu^2
    acc += rule.integrate_complex(0.0, rho_max, |nu| {
        if nu == 0.0 {
            return Complex64::default();
        }
        let t2 = s * nu * nu;
        let w = s - t2;
        leg(w) * edge(t2) * s * 2.0 * nu
    });
    acc
}

/// Momentum-space synthesis of the transmitted wave,
/// psi_tr(x,tau) = int dp/sqrt(2 pi) T(p) psi~(p)
///                 exp(-i x [2m(E+iV0)]^{1/2} - i E tau),
/// used as the scattering-state oracle for the PDX compositions.
pub fn transmitted_wave_synthesis(
    initial: &GaussianPacket,
    v0: f64,
    x: f64,
    tau: f64,
) -> Result<Complex64> {
    let m = initial.params.mass;
    let sp = 1.0 / (2.0 * initial.sigma);
    let p_lo = initial.p0 - 10.0 * sp;
    let p_hi = (initial.p0 + 10.0 * sp).min(-1e-4);
    if p_lo >= p_hi {
        return Err(Error::invalid("packet must be supported on p < 0".to_string()));
    }
    let rule = GaussLegendre::new(400);
    let mut acc = Complex64::default();
    for (p, w) in rule.mapped(p_lo, p_hi) {
        let e = p * p / (2.0 * m);
        let (t_amp, _) = step_scattering_amplitudes(p, v0, initial.params)?;
        let kappa = (Complex64::new(e, v0) * 2.0 * m).sqrt();
        let phase = (Complex64::new(0.0, -x) * kappa + Complex64::new(0.0, -e * tau)).exp();
        acc += t_amp * initial.momentum_amplitude(p) * phase * w;
    }
    Ok(acc / (2.0 * PI).sqrt())
}
