//! Open-system (quantum-Brownian-motion) arrival machinery in the
//! negligible-dissipation limit: Gaussian phase-space propagation, the
//! density-matrix route, positivity time, the arrival POVM, restricted
//! propagation, and the interference diagnostic in three regimes.

use crate::engine::{self, Observable, SpatialField};
use crate::phase_space::PhaseSpaceField;
use crate::phys::{GaussianPacket, PhysParams};
use crate::quad::GaussLegendre;
use crate::special::{erfc, si_tail};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Momentum-diffusion environment, D = 2 m gamma kT; dynamics drop the
/// dissipative gamma terms, gamma enters only through diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbmParams {
    pub d: f64,
    pub gamma: f64,
    pub params: PhysParams,
}

impl QbmParams {
    pub fn new(d: f64, gamma: f64, params: PhysParams) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::invalid("momentum diffusion D must be > 0".to_string()));
        }
        if gamma < 0.0 {
            return Err(Error::invalid("gamma must be >= 0".to_string()));
        }
        Ok(QbmParams { d, gamma, params })
    }

    /// Localisation time sqrt(2 m hbar / D).
    pub fn localisation_time(&self) -> f64 {
        (2.0 * self.params.mass * self.params.hbar / self.d).sqrt()
    }

    /// Stochastic time p0^2 / D for a packet of mean momentum p0.
    pub fn stochastic_time(&self, p0: f64) -> f64 {
        p0 * p0 / self.d
    }

    /// b^2 = gamma^2 / (2 D) from the Lindblad combination a x + i b p.
    pub fn b_squared(&self) -> f64 {
        self.gamma * self.gamma / (2.0 * self.d)
    }

    /// tau_l << tau_s, equivalently E tau_l / hbar >> 1.
    pub fn timescale_ordering_ok(&self, packet: &GaussianPacket) -> bool {
        packet.energy_mean() * self.localisation_time() / self.params.hbar > 10.0
    }
}

/// Symmetric 2x2 smearing matrix in (p, q).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelMatrix {
    pub a_pp: f64,
    pub a_pq: f64,
    pub a_qq: f64,
}

impl KernelMatrix {
    /// A(t) = D t [[2, t/m], [t/m, 2 t^2 / 3 m^2]].
    pub fn qbm(qbm: &QbmParams, t: f64) -> Self {
        let m = qbm.params.mass;
        KernelMatrix {
            a_pp: 2.0 * qbm.d * t,
            a_pq: qbm.d * t * t / m,
            a_qq: 2.0 * qbm.d * t * t * t / (3.0 * m * m),
        }
    }

    /// Minimum-uncertainty matrix hbar diag(s^2, 1/(4 s^2)).
    pub fn squeezed_vacuum(s: f64, hbar: f64) -> Self {
        KernelMatrix { a_pp: hbar * s * s, a_pq: 0.0, a_qq: hbar / (4.0 * s * s) }
    }

    pub fn det(&self) -> f64 {
        self.a_pp * self.a_qq - self.a_pq * self.a_pq
    }

    pub fn sub(&self, other: &KernelMatrix) -> KernelMatrix {
        KernelMatrix {
            a_pp: self.a_pp - other.a_pp,
            a_pq: self.a_pq - other.a_pq,
            a_qq: self.a_qq - other.a_qq,
        }
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.a_pp >= 0.0 && self.a_qq >= 0.0 && self.det() >= -1e-300
    }

    /// A Gaussian of covariance A is a Wigner function iff det A >= hbar^2/4.
    pub fn is_wigner_admissible(&self, hbar: f64) -> bool {
        self.det() >= hbar * hbar / 4.0
    }
}

/// Time after which the smearing kernel is itself a Wigner function,
/// t* = (3/16)^{1/4} sqrt(2 m hbar / D).
pub fn positivity_time(qbm: &QbmParams) -> f64 {
    (3.0f64 / 16.0).powf(0.25) * qbm.localisation_time()
}

fn fft2_apply(field: &mut PhaseSpaceField, symbol: impl Fn(f64, f64) -> Complex64) {
    let (n_p, n_q) = (field.n_p, field.n_q);
    let mut data: Vec<Complex64> = field.values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    // rows (q direction)
    for i in 0..n_p {
        engine::fft_forward(&mut data[i * n_q..(i + 1) * n_q]);
    }
    // columns (p direction)
    let mut col = vec![Complex64::default(); n_p];
    for j in 0..n_q {
        for i in 0..n_p {
            col[i] = data[i * n_q + j];
        }
        engine::fft_forward(&mut col);
        for i in 0..n_p {
            data[i * n_q + j] = col[i];
        }
    }
    let span_p = field.p_max - field.p_min;
    let span_q = field.q_max - field.q_min;
    let wrap = |idx: usize, n: usize| -> f64 {
        let k = if idx < n / 2 { idx as isize } else { idx as isize - n as isize };
        k as f64
    };
    for i in 0..n_p {
        let kp = 2.0 * PI * wrap(i, n_p) / span_p;
        for j in 0..n_q {
            let kq = 2.0 * PI * wrap(j, n_q) / span_q;
            data[i * n_q + j] *= symbol(kp, kq);
        }
    }
    for j in 0..n_q {
        for i in 0..n_p {
            col[i] = data[i * n_q + j];
        }
        engine::fft_inverse(&mut col);
        for i in 0..n_p {
            data[i * n_q + j] = col[i];
        }
    }
    for i in 0..n_p {
        engine::fft_inverse(&mut data[i * n_q..(i + 1) * n_q]);
    }
    for (v, c) in field.values.iter_mut().zip(&data) {
        *v = c.re;
    }
}

/// Convolve with the Gaussian of covariance `a` (Fourier symbol
/// exp(-k^T A k / 2)).
pub fn gaussian_smear(field: &mut PhaseSpaceField, a: &KernelMatrix) {
    let (app, apq, aqq) = (a.a_pp, a.a_pq, a.a_qq);
    fft2_apply(field, |kp, kq| {
        Complex64::new((-0.5 * (app * kp * kp + 2.0 * apq * kp * kq + aqq * kq * kq)).exp(), 0.0)
    });
}

/// Free shear W(p, q) <- W(p, q - p t / m), spectrally row by row.
pub fn free_shear(field: &mut PhaseSpaceField, t: f64, mass: f64) {
    let n_q = field.n_q;
    let span_q = field.q_max - field.q_min;
    let mut row = vec![Complex64::default(); n_q];
    for i in 0..field.n_p {
        let shift = field.p_at(i) * t / mass;
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = Complex64::new(field.at(i, j), 0.0);
        }
        engine::fft_forward(&mut row);
        for (j, slot) in row.iter_mut().enumerate() {
            let k = if j < n_q / 2 { j as isize } else { j as isize - n_q as isize };
            let kq = 2.0 * PI * k as f64 / span_q;
            *slot *= Complex64::from_polar(1.0, -kq * shift);
        }
        engine::fft_inverse(&mut row);
        for j in 0..n_q {
            *field.at_mut(i, j) = row[j].re;
        }
    }
}

fn edge_mass(field: &PhaseSpaceField) -> f64 {
    let mut acc = 0.0;
    for i in 0..field.n_p {
        for j in 0..field.n_q {
            if i < 2 || i >= field.n_p - 2 || j < 2 || j >= field.n_q - 2 {
                acc += field.at(i, j).abs();
            }
        }
    }
    acc * field.dp() * field.dq()
}

fn qbm_propagate_unchecked(w0: &PhaseSpaceField, t: f64, qbm: &QbmParams) -> Result<PhaseSpaceField> {
    if !(t > 0.0) {
        return Err(Error::invalid("propagation needs t > 0".to_string()));
    }
    let mut out = w0.clone();
    free_shear(&mut out, t, qbm.params.mass);
    gaussian_smear(&mut out, &KernelMatrix::qbm(qbm, t));
    Ok(out)
}

/// Evolve a Wigner function by time t under negligible-dissipation QBM:
/// shear along free trajectories, then Gaussian smearing with A(t).
pub fn qbm_wigner_propagate(w0: &PhaseSpaceField, t: f64, qbm: &QbmParams) -> Result<PhaseSpaceField> {
    let out = qbm_propagate_unchecked(w0, t, qbm)?;
    let total = out.integral().abs().max(1e-300);
    // wrap-around parks mass at the frame; restricted stepping bypasses
    // this check because its sharp cuts leave benign spectral ringing there
    if edge_mass(&out) > 1e-3 * total {
        return Err(Error::DomainTooSmall { tail_mass: edge_mass(&out) / total });
    }
    Ok(out)
}

/// Density matrix on the rotated frame s = x + y, u = x - y.
#[derive(Debug, Clone)]
pub struct RotatedDensity {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    /// Row-major over (s, u).
    pub values: Vec<Complex64>,
}

impl RotatedDensity {
    pub fn at(&self, is: usize, iu: usize) -> Complex64 {
        self.values[is * self.u.len() + iu]
    }

    fn u_zero_index(&self) -> usize {
        self.u
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0
    }

    /// rho(x, x) sampled at x = s/2.
    pub fn diagonal(&self) -> Vec<(f64, f64)> {
        let j0 = self.u_zero_index();
        self.s
            .iter()
            .enumerate()
            .map(|(i, &s)| (0.5 * s, self.at(i, j0).re))
            .collect()
    }

    /// Tr rho = int dx rho(x, x).
    pub fn trace(&self) -> f64 {
        let diag = self.diagonal();
        let dx = diag[1].0 - diag[0].0;
        diag.iter().map(|(_, v)| v).sum::<f64>() * dx
    }

    /// rho(a, -a): the coherence between mirror points (s = 0, u = 2a).
    pub fn coherence_at(&self, a: f64) -> Complex64 {
        let is = self
            .s
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap()
            .0;
        let iu = self
            .u
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - 2.0 * a).abs().total_cmp(&(y.1 - 2.0 * a).abs()))
            .unwrap()
            .0;
        self.at(is, iu)
    }
}

/// Propagate a density matrix by the two-point QBM kernel
/// J = (m/2 pi hbar t) exp[(i m/2 hbar t)((x-x0)^2 - (y-y0)^2)
///     - (D t/3 hbar^2)((x-y)^2 + (x-y)(x0-y0) + (x0-y0)^2)].
///
/// Evaluated in the rotated frame, where the s0 integral is a Fourier
/// transform at frequency m(u - u0)/(2 hbar t).
pub fn qbm_density_propagate(
    rho0: impl Fn(f64, f64) -> Complex64 + Sync,
    s_grid: (f64, f64, usize),
    u_grid: (f64, f64, usize),
    t: f64,
    qbm: &QbmParams,
) -> Result<RotatedDensity> {
    if !(t > 0.0) {
        return Err(Error::invalid("propagation needs t > 0".to_string()));
    }
    let m = qbm.params.mass;
    let hbar = qbm.params.hbar;
    let decay_c = qbm.d * t / (3.0 * hbar * hbar);
    let (s_min, s_max, n_s) = s_grid;
    let (u_min, u_max, n_u) = u_grid;
    let s: Vec<f64> = (0..n_s)
        .map(|i| s_min + (s_max - s_min) * i as f64 / (n_s - 1) as f64)
        .collect();
    let u: Vec<f64> = (0..n_u)
        .map(|j| u_min + (u_max - u_min) * j as f64 / (n_u - 1) as f64)
        .collect();
    let ds0 = s[1] - s[0];
    let du0 = u[1] - u[0];
    // the u0 sum carries plane waves e^{i m (u-u0) s / 2 hbar t}; undersampling
    // them aliases the whole transform
    let kappa_reach = m * s_max.abs().max(s_min.abs()) / (2.0 * hbar * t);
    if du0 * kappa_reach > 5.0 {
        return Err(Error::GridResolution(format!(
            "u grid spacing {du0:.4} cannot carry frequencies up to {kappa_reach:.2}"
        )));
    }
    // rho0 on the rotated source grid
    let rho0_rot: Vec<Complex64> = (0..n_s * n_u)
        .map(|idx| {
            let (i, j) = (idx / n_u, idx % n_u);
            rho0(0.5 * (s[i] + u[j]), 0.5 * (s[i] - u[j]))
        })
        .collect();

    use rayon::prelude::*;
    let values: Vec<Complex64> = (0..n_u)
        .into_par_iter()
        .flat_map_iter(|ju| {
            // accumulate over u0 for every s at this output u
            let mut acc = vec![Complex64::default(); n_s];
            for ju0 in 0..n_u {
                let kappa = m * (u[ju] - u[ju0]) / (2.0 * hbar * t);
                let decay = (-decay_c
                    * (u[ju] * u[ju] + u[ju] * u[ju0] + u[ju0] * u[ju0]))
                    .exp();
                if decay < 1e-300 {
                    continue;
                }
                // F = int ds0 e^{-i kappa s0} rho0(s0, u0)
                let mut f = Complex64::default();
                for is0 in 0..n_s {
                    f += rho0_rot[is0 * n_u + ju0] * Complex64::from_polar(1.0, -kappa * s[is0]);
                }
                f *= ds0;
                let w = decay * du0;
                for (is, slot) in acc.iter_mut().enumerate() {
                    *slot += f * Complex64::from_polar(w, kappa * s[is]);
                }
            }
            acc.into_iter()
        })
        .collect();
    // values arrived as [u][s]; transpose to [s][u]
    let mut out = vec![Complex64::default(); n_s * n_u];
    let pref = m / (4.0 * PI * hbar * t);
    for ju in 0..n_u {
        for is in 0..n_s {
            out[is * n_u + ju] = values[ju * n_s + is] * pref;
        }
    }
    Ok(RotatedDensity { s, u, values: out })
}

/// Current pieces at the origin for an open system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OpenCurrent {
    /// Standard flux, positive for left-movers.
    pub j: f64,
    /// b^2-dependent Lindblad correction hbar^2 b^2 d/dx rho(x,x) at 0.
    pub correction: f64,
    /// Diffusive current J_D = -2 hbar^2 b^2 d rho/dx at 0.
    pub j_diffusive: f64,
}

/// Current of a Wigner field: J = -int dp (p/m) W(p, 0), with the q = 0
/// column read by linear interpolation.
pub fn wigner_current(w: &PhaseSpaceField, mass: f64) -> f64 {
    let pos = (0.0 - w.q_min) / w.dq() - 0.5;
    let j = pos.floor().max(0.0) as usize;
    let frac = (pos - j as f64).clamp(0.0, 1.0);
    let mut acc = 0.0;
    for i in 0..w.n_p {
        let wq = w.at(i, j.min(w.n_q - 1)) * (1.0 - frac) + w.at(i, (j + 1).min(w.n_q - 1)) * frac;
        acc += -w.p_at(i) / mass * wq;
    }
    acc * w.dp()
}

/// Open-system current for a pure state on the grid.
pub fn open_current_pure(field: &SpatialField, b_squared: f64) -> Result<OpenCurrent> {
    let j = engine::expectation(field, Observable::CurrentAt0)?;
    let hbar = field.params.hbar;
    let idx = ((0.0 - field.x_min) / field.dx()).round() as usize;
    if idx == 0 || idx + 1 >= field.len() {
        return Err(Error::GridResolution("origin too close to the boundary".to_string()));
    }
    let drho = (field.values[idx + 1].norm_sqr() - field.values[idx - 1].norm_sqr()) / (2.0 * field.dx());
    Ok(OpenCurrent {
        j,
        correction: hbar * hbar * b_squared * drho,
        j_diffusive: -2.0 * hbar * hbar * b_squared * drho,
    })
}

/// Open-system current pieces from a Wigner field.
pub fn open_current_wigner(w: &PhaseSpaceField, qbm: &QbmParams) -> OpenCurrent {
    let mass = qbm.params.mass;
    let hbar = qbm.params.hbar;
    let b2 = qbm.b_squared();
    let j = wigner_current(w, mass);
    // position marginal derivative at the origin
    let marginal_at = |q_target: f64| -> f64 {
        let pos = (q_target - w.q_min) / w.dq() - 0.5;
        let jj = pos.floor().max(0.0) as usize;
        let frac = (pos - jj as f64).clamp(0.0, 1.0);
        let mut acc = 0.0;
        for i in 0..w.n_p {
            acc += w.at(i, jj.min(w.n_q - 1)) * (1.0 - frac)
                + w.at(i, (jj + 1).min(w.n_q - 1)) * frac;
        }
        acc * w.dp()
    };
    let h = w.dq();
    let drho = (marginal_at(h) - marginal_at(-h)) / (2.0 * h);
    OpenCurrent {
        j,
        correction: hbar * hbar * b2 * drho,
        j_diffusive: -2.0 * hbar * hbar * b2 * drho,
    }
}

/// Validity warnings for the arrival POVM window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PovmFlags {
    /// t1 at or past the positivity time.
    pub positivity_ok: bool,
    /// t2 - t1 well below the localisation time.
    pub window_ok: bool,
}

/// Packet-matched squeezing: A0 equals the packet's own minimum-uncertainty
/// covariance, hbar s^2 = (hbar / 2 sigma)^2.
pub fn default_squeezing(packet: &GaussianPacket) -> f64 {
    packet.params.hbar.sqrt() / (2.0 * packet.sigma)
}

/// Admissible squeezing range for which B = A(t1) - A0(s) stays positive
/// semidefinite.
pub fn admissible_s_range(qbm: &QbmParams, t1: f64) -> Result<(f64, f64)> {
    let a = KernelMatrix::qbm(qbm, t1);
    let hbar = qbm.params.hbar;
    let ok = |s: f64| a.sub(&KernelMatrix::squeezed_vacuum(s, hbar)).is_positive_semidefinite();
    let n = 4000;
    let (lo, hi) = (1e-4f64, 1e4f64);
    let mut s_min = f64::NAN;
    let mut s_max = f64::NAN;
    for k in 0..=n {
        let s = lo * (hi / lo).powf(k as f64 / n as f64);
        if ok(s) {
            if s_min.is_nan() {
                s_min = s;
            }
            s_max = s;
        }
    }
    if s_min.is_nan() {
        return Err(Error::invalid(format!(
            "no admissible squeezing at t1 = {t1}; the kernel is below minimum uncertainty"
        )));
    }
    Ok((s_min, s_max))
}

/// Arrival probability over [t1, t2] as Tr(E rho): the initial Wigner
/// function is smeared by A0(s) + B = A(t1) and integrated against the
/// free-trajectory window theta(q + p t1/m) - theta(q + p t2/m).
pub fn arrival_povm(
    w0: &PhaseSpaceField,
    t1: f64,
    t2: f64,
    qbm: &QbmParams,
    s: f64,
) -> Result<(f64, PovmFlags)> {
    if !(t2 > t1 && t1 > 0.0) {
        return Err(Error::invalid("need 0 < t1 < t2".to_string()));
    }
    let a = KernelMatrix::qbm(qbm, t1);
    let a0 = KernelMatrix::squeezed_vacuum(s, qbm.params.hbar);
    let b = a.sub(&a0);
    if !b.is_positive_semidefinite() {
        let (s_min, s_max) = admissible_s_range(qbm, t1)?;
        return Err(Error::NotPositiveSemidefinite { s, s_min, s_max });
    }
    let flags = PovmFlags {
        positivity_ok: t1 >= positivity_time(qbm) * (1.0 - 1e-12),
        window_ok: (t2 - t1) < 0.25 * qbm.localisation_time(),
    };
    // the theta window reads free trajectories from t = 0, so the smearing
    // kernel is transported to the unsheared frame: S^{-1} A S^{-T} flips
    // the off-diagonal sign
    let a_desheared = KernelMatrix { a_pp: a.a_pp, a_pq: -a.a_pq, a_qq: a.a_qq };
    let mut smeared = w0.clone();
    gaussian_smear(&mut smeared, &a_desheared);
    let m = qbm.params.mass;
    let mut acc = 0.0;
    for i in 0..smeared.n_p {
        let p = smeared.p_at(i);
        for j in 0..smeared.n_q {
            let q = smeared.q_at(j);
            let window = theta(q + p * t1 / m) - theta(q + p * t2 / m);
            if window != 0.0 {
                acc += window * smeared.at(i, j);
            }
        }
    }
    Ok((acc * smeared.dp() * smeared.dq(), flags))
}

fn theta(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Boundary handling for restricted propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictedBoundary {
    /// Zero the whole q < 0 half after each sub-step.
    ZeroNegativeQ,
    /// Zero only returning (p > 0) cells in q <= 0, letting absorbed mass
    /// drift away.
    ZeroReturningOnly,
}

/// Iterate QBM propagation over sub-steps, applying the boundary rule after
/// each one. Survivors are counted in q > 0.
pub fn restricted_wigner_propagate(
    w0: &PhaseSpaceField,
    t: f64,
    qbm: &QbmParams,
    epsilon_steps: usize,
    boundary: RestrictedBoundary,
) -> Result<PhaseSpaceField> {
    if epsilon_steps < 10 {
        return Err(Error::invalid("need at least 10 sub-steps".to_string()));
    }
    let dt = t / epsilon_steps as f64;
    let mut w = w0.clone();
    apply_boundary(&mut w, boundary);
    let mut survivors = positive_q_mass(&w);
    for _ in 0..epsilon_steps {
        w = qbm_propagate_unchecked(&w, dt, qbm)?;
        apply_boundary(&mut w, boundary);
        let now = positive_q_mass(&w);
        if now < 0.8 * survivors && survivors > 1e-6 {
            return Err(Error::StepTooCoarse(format!(
                "lost {:.1}% of surviving mass in one sub-step",
                100.0 * (1.0 - now / survivors)
            )));
        }
        survivors = now;
    }
    Ok(w)
}

fn apply_boundary(w: &mut PhaseSpaceField, boundary: RestrictedBoundary) {
    for i in 0..w.n_p {
        let p = w.p_at(i);
        for j in 0..w.n_q {
            let q = w.q_at(j);
            let kill = match boundary {
                RestrictedBoundary::ZeroNegativeQ => q < 0.0,
                RestrictedBoundary::ZeroReturningOnly => q <= 0.0 && p > 0.0,
            };
            if kill {
                *w.at_mut(i, j) = 0.0;
            }
        }
    }
}

fn positive_q_mass(w: &PhaseSpaceField) -> f64 {
    let mut acc = 0.0;
    for i in 0..w.n_p {
        for j in 0..w.n_q {
            if w.q_at(j) > 0.0 {
                acc += w.at(i, j);
            }
        }
    }
    acc * w.dp() * w.dq()
}

/// Survival mass and first-passage density -dS/dt on `n_samples` points.
pub fn first_passage_distribution(
    w0: &PhaseSpaceField,
    t_max: f64,
    n_samples: usize,
    qbm: &QbmParams,
    boundary: RestrictedBoundary,
    substeps_per_sample: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if n_samples < 3 || substeps_per_sample == 0 {
        return Err(Error::invalid("need n_samples >= 3".to_string()));
    }
    let dt = t_max / (n_samples - 1) as f64;
    let sub = dt / substeps_per_sample as f64;
    let mut w = w0.clone();
    apply_boundary(&mut w, boundary);
    let mut survival = vec![positive_q_mass(&w)];
    for _ in 1..n_samples {
        for _ in 0..substeps_per_sample {
            w = qbm_propagate_unchecked(&w, sub, qbm)?;
            apply_boundary(&mut w, boundary);
        }
        survival.push(positive_q_mass(&w));
    }
    let times: Vec<f64> = (0..n_samples).map(|k| k as f64 * dt).collect();
    let mut density = vec![0.0; n_samples];
    for k in 0..n_samples {
        density[k] = if k == 0 {
            (survival[0] - survival[1]) / dt
        } else if k == n_samples - 1 {
            (survival[k - 1] - survival[k]) / dt
        } else {
            (survival[k - 1] - survival[k + 1]) / (2.0 * dt)
        };
    }
    Ok((times, density, survival))
}

/// Regime selector for the interference diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaRegime {
    /// D = 0 between t1 and t2, free state at t1.
    Unitary,
    /// Environment matters before t1, negligible during [t1, t2].
    Intermediate,
    /// (t2 - t1) well above the localisation time.
    Strong,
}

/// Validity notes for the chosen regime window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeltaFlags {
    pub regime_window_ok: bool,
}

/// Gaussian Wigner function of a packet evolved under QBM to t1: sheared
/// mean and covariance S Sigma0 S^T + A(t1).
fn evolved_gaussian_wigner(packet: &GaussianPacket, t1: f64, qbm: &QbmParams) -> impl Fn(f64, f64) -> f64 {
    let m = qbm.params.mass;
    let s2 = packet.sigma * packet.sigma;
    let sp2 = 1.0 / (4.0 * s2);
    // covariance in (p, q) after shear + diffusion
    let a = KernelMatrix::qbm(qbm, t1);
    let c_pp = sp2 + a.a_pp;
    let c_pq = sp2 * t1 / m + a.a_pq;
    let c_qq = s2 + sp2 * t1 * t1 / (m * m) + a.a_qq;
    let det = c_pp * c_qq - c_pq * c_pq;
    let (p0, q0) = (packet.p0, packet.q0 + packet.p0 * t1 / m);
    move |p: f64, q: f64| {
        let (dp, dq) = (p - p0, q - q0);
        let quad = (c_qq * dp * dp - 2.0 * c_pq * dp * dq + c_pp * dq * dq) / det;
        (1.0 / (2.0 * PI * det.sqrt())) * (-0.5 * quad).exp()
    }
}

/// Delta = Tr(P(t2) Pbar(t1) rho Pbar(t1)) in the regime-appropriate form:
/// the f(u) kernel (u = 2X(m X/(t2-t1) + p)/hbar) for the unitary and
/// intermediate regimes, the Erfc kernel for the strong regime.
pub fn delta_diagnostic(
    packet: &GaussianPacket,
    t1: f64,
    t2: f64,
    qbm: &QbmParams,
    regime: DeltaRegime,
) -> Result<(f64, DeltaFlags)> {
    if !(t2 > t1 && t1 > 0.0) {
        return Err(Error::invalid("need 0 < t1 < t2".to_string()));
    }
    let m = qbm.params.mass;
    let hbar = qbm.params.hbar;
    let tau_l = qbm.localisation_time();
    let dt = t2 - t1;
    let flags = DeltaFlags {
        regime_window_ok: match regime {
            DeltaRegime::Unitary => true,
            DeltaRegime::Intermediate => t1 > 3.0 * tau_l && dt < 0.3 * tau_l,
            DeltaRegime::Strong => dt > 3.0 * tau_l && dt < 0.3 * qbm.stochastic_time(packet.p0),
        },
    };
    let wig: Box<dyn Fn(f64, f64) -> f64> = match regime {
        DeltaRegime::Unitary => {
            let p = *packet;
            Box::new(move |pp, q| p.wigner(pp, q, t1))
        }
        _ => Box::new(evolved_gaussian_wigner(packet, t1, qbm)),
    };
    // integration extents from the evolved covariance
    let a = match regime {
        DeltaRegime::Unitary => KernelMatrix { a_pp: 0.0, a_pq: 0.0, a_qq: 0.0 },
        _ => KernelMatrix::qbm(qbm, t1),
    };
    let sp = (1.0 / (4.0 * packet.sigma * packet.sigma) + a.a_pp).sqrt();
    let sq = (packet.sigma * packet.sigma
        + t1 * t1 / (4.0 * packet.sigma * packet.sigma * m * m)
        + a.a_qq)
        .sqrt();
    let center = packet.q0 + packet.p0 * t1 / m;
    let rule = GaussLegendre::new(24);
    let x_lo = (center - 8.0 * sq).min(-1e-9);
    let kernel: Box<dyn Fn(f64, f64) -> f64> = match regime {
        DeltaRegime::Strong => Box::new(move |x: f64, p: f64| {
            let arg = -(3.0 * m * m / (qbm.d * dt * dt * dt)).sqrt() * (x + p * dt / m);
            0.5 * erfc(arg)
        }),
        _ => Box::new(move |x: f64, p: f64| {
            let u = 2.0 * x * (m * x / dt + p) / hbar;
            si_tail(u) / PI
        }),
    };
    // panel count against the kernel oscillation in x
    let panels = match regime {
        DeltaRegime::Strong => 24,
        _ => {
            let rate = 2.0 * (packet.p0.abs() + 4.0 * sp) / hbar + 4.0 * 8.0 * sq * m / (dt * hbar);
            ((rate * 8.0 * sq / 6.0).ceil() as usize).clamp(24, 600)
        }
    };
    let hx = (0.0 - x_lo) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        acc += rule.integrate(x_lo + k as f64 * hx, x_lo + (k + 1) as f64 * hx, |x| {
            rule.integrate(packet.p0 - 8.0 * sp, packet.p0 + 8.0 * sp, |p| {
                wig(p, x) * kernel(x, p)
            })
        });
    }
    Ok((acc, flags))
}
