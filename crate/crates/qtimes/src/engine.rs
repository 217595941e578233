//! Spectral split-operator evolution on uniform grids: the brute-force oracle
//! for every closed-form result in the crate.
//!
//! Kinetic steps are exact in momentum space; potentials act as pointwise
//! exponential factors (the absorbing step as a real decay factor, so the
//! potential factor carries no splitting error). Sharp position projections
//! multiply by a theta weight with the boundary point counted 1/2.

use crate::phys::{GaussianPacket, PhysParams, SpreadMode};
use crate::pulsed::ProjectionSchedule;
use crate::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::sync::Arc;

pub use crate::special::sine_integral;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn rustfft::Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

pub fn fft_forward(data: &mut [Complex64]) {
    plan(data.len(), true).process(data);
}

pub fn fft_inverse(data: &mut [Complex64]) {
    plan(data.len(), false).process(data);
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Complex amplitude sampled on a uniform periodic grid.
#[derive(Debug, Clone)]
pub struct SpatialField {
    pub x_min: f64,
    pub x_max: f64,
    pub values: Vec<Complex64>,
    pub params: PhysParams,
}

impl SpatialField {
    pub fn new(x_min: f64, x_max: f64, n: usize, params: PhysParams) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::invalid(format!("grid size must be a power of two, got {n}")));
        }
        if !(x_max > x_min) {
            return Err(Error::invalid("grid needs x_max > x_min".to_string()));
        }
        Ok(SpatialField { x_min, x_max, values: vec![Complex64::default(); n], params })
    }

    /// Default oracle grid: 4096 points on [-60, 60].
    pub fn default_grid(params: PhysParams) -> Self {
        Self::new(-60.0, 60.0, 4096, params).unwrap()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.len() as f64
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.x_at(i))
    }

    /// Wavenumber for FFT bin `j` (standard wrap-around ordering).
    pub fn k_at(&self, j: usize) -> f64 {
        let n = self.len();
        let jj = if j < n / 2 { j as isize } else { j as isize - n as isize };
        2.0 * std::f64::consts::PI * jj as f64 / (self.x_max - self.x_min)
    }

    pub fn fill(&mut self, f: impl Fn(f64) -> Complex64) {
        let n = self.len();
        for i in 0..n {
            self.values[i] = f(self.x_at(i));
        }
    }

    pub fn from_packet(packet: &GaussianPacket, x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        let mut field = Self::new(x_min, x_max, n, packet.params)?;
        field.fill(|x| packet.position_amplitude(x, 0.0, SpreadMode::Exact));
        Ok(field)
    }

    pub fn norm_sqr(&self) -> f64 {
        let dx = self.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
    }

    pub fn inner(&self, other: &SpatialField) -> Complex64 {
        let dx = self.dx();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * dx
    }

    /// Value at x = 0 (grid point required).
    pub fn at_origin(&self) -> Result<Complex64> {
        Ok(self.values[self.origin_index()?])
    }

    fn origin_index(&self) -> Result<usize> {
        let dx = self.dx();
        let idx = (-self.x_min / dx).round() as usize;
        if idx >= self.len() || (self.x_at(idx)).abs() > 0.25 * dx {
            return Err(Error::GridResolution("x = 0 is not a grid point".to_string()));
        }
        Ok(idx)
    }

    /// Exact free evolution by `t` (single spectral step).
    pub fn free_step(&mut self, t: f64) {
        let m = self.params.mass;
        let n = self.len();
        fft_forward(&mut self.values);
        for j in 0..n {
            let k = self.k_at(j);
            let phase = -k * k * t / (2.0 * m);
            self.values[j] *= Complex64::from_polar(1.0, phase);
        }
        fft_inverse(&mut self.values);
    }

    /// Spectral spatial derivative.
    pub fn derivative(&self) -> SpatialField {
        let mut out = self.clone();
        fft_forward(&mut out.values);
        let n = out.len();
        for j in 0..n {
            let k = out.k_at(j);
            out.values[j] *= Complex64::new(0.0, k);
        }
        fft_inverse(&mut out.values);
        out
    }

    /// Multiply by theta(x) with the boundary point weighted 1/2.
    pub fn project_positive(&mut self) {
        let dx = self.dx();
        let n = self.len();
        for i in 0..n {
            let x = self.x_at(i);
            if x.abs() < 0.25 * dx {
                self.values[i] *= 0.5;
            } else if x < 0.0 {
                self.values[i] = Complex64::default();
            }
        }
    }

    /// Kinetic-energy expectation estimate from the spectral density.
    fn energy_scale(&self) -> f64 {
        let mut hat = self.values.clone();
        fft_forward(&mut hat);
        let total: f64 = hat.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut e = 0.0;
        for (j, v) in hat.iter().enumerate() {
            let k = self.k_at(j);
            e += v.norm_sqr() * k * k / (2.0 * self.params.mass);
        }
        e / total
    }
}

/// Potentials the 1D engine can evolve under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    None,
    /// V(x) = V0 theta(-x), real.
    RealStep { v0: f64 },
    /// V(x) = -i V0 theta(-x); applied as the exact decay factor exp(-V0 dt).
    AbsorbingStep { v0: f64 },
    /// Square barrier of width `width` and height `lambda/width` around x = 0.
    Delta { lambda: f64, width: f64 },
    /// Clock coupling lambda theta(x) p_y; only valid in the coupled 2D evolution.
    ClockCoupled { lambda: f64 },
}

/// A single evolution request.
#[derive(Debug, Clone)]
pub struct EvolutionSpec {
    pub potential: Potential,
    pub dt: f64,
    pub steps: usize,
    pub projection_schedule: Option<ProjectionSchedule>,
}

impl EvolutionSpec {
    pub fn new(potential: Potential, dt: f64, steps: usize) -> Self {
        EvolutionSpec { potential, dt, steps, projection_schedule: None }
    }

    pub fn with_schedule(mut self, schedule: ProjectionSchedule) -> Self {
        self.projection_schedule = Some(schedule);
        self
    }

    fn total_time(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

fn potential_factor(potential: Potential, x: f64, dx: f64, dt: f64) -> Result<Complex64> {
    let weight = |x: f64| -> f64 {
        // theta(-x) with the boundary point counted 1/2
        if x.abs() < 0.25 * dx {
            0.5
        } else if x < 0.0 {
            1.0
        } else {
            0.0
        }
    };
    Ok(match potential {
        Potential::None => Complex64::new(1.0, 0.0),
        Potential::RealStep { v0 } => Complex64::from_polar(1.0, -v0 * weight(x) * dt),
        Potential::AbsorbingStep { v0 } => Complex64::new((-v0 * weight(x) * dt).exp(), 0.0),
        Potential::Delta { lambda, width } => {
            if width < 2.0 * dx {
                return Err(Error::GridResolution(format!(
                    "delta regularization width {width} below 2 dx = {}",
                    2.0 * dx
                )));
            }
            let inside = x.abs() <= 0.5 * width;
            let v = if inside { lambda / width } else { 0.0 };
            Complex64::from_polar(1.0, -v * dt)
        }
        Potential::ClockCoupled { .. } => {
            return Err(Error::invalid(
                "clock coupling needs the 2D coupled evolution".to_string(),
            ))
        }
    })
}

fn strang_evolve(field: &mut SpatialField, potential: Potential, dt: f64, steps: usize) -> Result<()> {
    if steps == 0 {
        return Ok(());
    }
    if matches!(potential, Potential::None) {
        field.free_step(dt * steps as f64);
        return Ok(());
    }
    let n = field.len();
    let m = field.params.mass;
    let dx = field.dx();
    let mut vfac = Vec::with_capacity(n);
    for i in 0..n {
        vfac.push(potential_factor(potential, field.x_at(i), dx, dt)?);
    }
    let half_kin: Vec<Complex64> = (0..n)
        .map(|j| {
            let k = field.k_at(j);
            Complex64::from_polar(1.0, -k * k * dt / (4.0 * m))
        })
        .collect();
    for _ in 0..steps {
        fft_forward(&mut field.values);
        for j in 0..n {
            field.values[j] *= half_kin[j];
        }
        fft_inverse(&mut field.values);
        for i in 0..n {
            field.values[i] *= vfac[i];
        }
        fft_forward(&mut field.values);
        for j in 0..n {
            field.values[j] *= half_kin[j];
        }
        fft_inverse(&mut field.values);
    }
    Ok(())
}

/// Evolve `field` under `spec`, applying scheduled projections if present.
///
/// With a projection schedule the evolution runs over
/// `tau = eps0 + (n-1) eps + eps_n`, projecting onto x > 0 at
/// `eps0, eps0 + eps, ...`; `spec.dt` bounds the sub-step within each segment.
pub fn evolve(field: &SpatialField, spec: &EvolutionSpec) -> Result<SpatialField> {
    let mut out = field.clone();
    let v_scale = match spec.potential {
        Potential::RealStep { v0 } | Potential::AbsorbingStep { v0 } => v0.abs(),
        Potential::Delta { lambda, width } => (lambda / width).abs(),
        _ => 0.0,
    };
    let e_scale = out.energy_scale() + v_scale;
    if spec.dt * e_scale >= 0.1 && !matches!(spec.potential, Potential::None) {
        return Err(Error::invalid(format!(
            "dt * E_max = {} exceeds the 0.1 accuracy bound",
            spec.dt * e_scale
        )));
    }
    let hermitian = !matches!(spec.potential, Potential::AbsorbingStep { .. });
    let norm0 = out.norm_sqr();

    match &spec.projection_schedule {
        None => strang_evolve(&mut out, spec.potential, spec.dt, spec.steps)?,
        Some(schedule) => {
            let segment = |field: &mut SpatialField, duration: f64| -> Result<()> {
                if duration <= 0.0 {
                    return Ok(());
                }
                let steps = (duration / spec.dt).ceil().max(1.0) as usize;
                strang_evolve(field, spec.potential, duration / steps as f64, steps)
            };
            segment(&mut out, schedule.epsilon0)?;
            out.project_positive();
            for _ in 1..schedule.n {
                segment(&mut out, schedule.epsilon)?;
                out.project_positive();
            }
            segment(&mut out, schedule.epsilon_n)?;
        }
    }

    if hermitian && spec.projection_schedule.is_none() {
        let growth = out.norm_sqr() / norm0;
        if growth > 1.0 + 1e-6 {
            return Err(Error::invalid(format!("norm blow-up: factor {growth}")));
        }
    }
    let _ = spec.total_time();
    Ok(out)
}

/// Quadratic-form observables evaluated on a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    ThetaX,
    ThetaMinusX,
    CurrentAt0,
    KineticDensityAt0,
    ThetaP,
    ThetaMinusP,
}

pub fn expectation(field: &SpatialField, observable: Observable) -> Result<f64> {
    let dx = field.dx();
    match observable {
        Observable::ThetaX | Observable::ThetaMinusX => {
            let positive = matches!(observable, Observable::ThetaX);
            let mut acc = 0.0;
            for (i, v) in field.values.iter().enumerate() {
                let x = field.x_at(i);
                let w = if x.abs() < 0.25 * dx {
                    0.5
                } else if (x > 0.0) == positive {
                    1.0
                } else {
                    0.0
                };
                acc += w * v.norm_sqr();
            }
            Ok(acc * dx)
        }
        Observable::CurrentAt0 => {
            let idx = field.origin_index()?;
            let deriv = field.derivative();
            let j = -(field.values[idx].conj() * deriv.values[idx]).im / field.params.mass;
            Ok(j)
        }
        Observable::KineticDensityAt0 => {
            let idx = field.origin_index()?;
            let deriv = field.derivative();
            let m = field.params.mass;
            Ok(deriv.values[idx].norm_sqr() / (m * m))
        }
        Observable::ThetaP | Observable::ThetaMinusP => {
            let positive = matches!(observable, Observable::ThetaP);
            let mut hat = field.values.clone();
            fft_forward(&mut hat);
            let total: f64 = hat.iter().map(|v| v.norm_sqr()).sum();
            let mut acc = 0.0;
            for (j, v) in hat.iter().enumerate() {
                let k = field.k_at(j);
                let w = if k == 0.0 {
                    0.5
                } else if (k > 0.0) == positive {
                    1.0
                } else {
                    0.0
                };
                acc += w * v.norm_sqr();
            }
            Ok(acc / total * field.norm_sqr())
        }
    }
}

/// Split the field into its positive- and negative-momentum components.
pub fn momentum_sign_split(field: &SpatialField) -> (SpatialField, SpatialField) {
    let mut hat = field.values.clone();
    fft_forward(&mut hat);
    let n = field.len();
    let mut plus = field.clone();
    let mut minus = field.clone();
    let mut hat_plus = vec![Complex64::default(); n];
    let mut hat_minus = vec![Complex64::default(); n];
    for j in 0..n {
        let k = field.k_at(j);
        if k == 0.0 {
            hat_plus[j] = 0.5 * hat[j];
            hat_minus[j] = 0.5 * hat[j];
        } else if k > 0.0 {
            hat_plus[j] = hat[j];
        } else {
            hat_minus[j] = hat[j];
        }
    }
    plus.values = hat_plus;
    minus.values = hat_minus;
    fft_inverse(&mut plus.values);
    fft_inverse(&mut minus.values);
    (plus, minus)
}

/// Result of the coupled particle-clock evolution.
#[derive(Debug, Clone)]
pub struct CoupledResult {
    pub y: Vec<f64>,
    /// Pointer distribution Pi(y) = int dx |Psi(x, y, tau)|^2.
    pub pointer_density: Vec<f64>,
    pub final_norm: f64,
}

/// Region in which the clock runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClockRegion {
    HalfLineArrival,
    IntervalDwell { half_width: f64 },
}

/// Evolve `psi0 (x) phi0(y)` under `H = p_x^2/2m + lambda chi(x) p_y` on a
/// tensor grid, spectrally in p_y: each clock-momentum line sees a real step
/// potential `lambda k chi(x)`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_coupled(
    psi0: &SpatialField,
    clock_profile: impl Fn(f64) -> Complex64,
    y_min: f64,
    y_max: f64,
    n_y: usize,
    lambda: f64,
    region: ClockRegion,
    tau: f64,
    steps: usize,
) -> Result<CoupledResult> {
    if !n_y.is_power_of_two() {
        return Err(Error::invalid("clock grid size must be a power of two".to_string()));
    }
    let n_x = psi0.len();
    let dy = (y_max - y_min) / n_y as f64;
    let mut phi: Vec<Complex64> = (0..n_y)
        .map(|j| clock_profile(y_min + j as f64 * dy))
        .collect();
    let phi_norm: f64 = phi.iter().map(|v| v.norm_sqr()).sum::<f64>() * dy;
    let scale = 1.0 / phi_norm.sqrt();
    for v in phi.iter_mut() {
        *v *= scale;
    }
    fft_forward(&mut phi);

    let clock_k = |j: usize| -> f64 {
        let jj = if j < n_y / 2 { j as isize } else { j as isize - n_y as isize };
        2.0 * std::f64::consts::PI * jj as f64 / (y_max - y_min)
    };

    let dt = tau / steps as f64;
    let dx = psi0.dx();
    let chi_weight = |x: f64| -> f64 {
        match region {
            ClockRegion::HalfLineArrival => {
                if x.abs() < 0.25 * dx {
                    0.5
                } else if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ClockRegion::IntervalDwell { half_width } => {
                if (x.abs() - half_width).abs() < 0.25 * dx {
                    0.5
                } else if x.abs() < half_width {
                    1.0
                } else {
                    0.0
                }
            }
        }
    };

    let peak = phi.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    use rayon::prelude::*;
    let lines: Vec<Vec<Complex64>> = (0..n_y)
        .into_par_iter()
        .map(|j| {
            if phi[j].norm() < 1e-14 * peak {
                return vec![Complex64::default(); n_x];
            }
            let mut line = psi0.clone();
            let v0 = lambda * clock_k(j);
            let half_kin: Vec<Complex64> = (0..n_x)
                .map(|i| {
                    let k = line.k_at(i);
                    Complex64::from_polar(1.0, -k * k * dt / (4.0 * line.params.mass))
                })
                .collect();
            let vfac: Vec<Complex64> = (0..n_x)
                .map(|i| Complex64::from_polar(1.0, -v0 * chi_weight(line.x_at(i)) * dt))
                .collect();
            for _ in 0..steps {
                fft_forward(&mut line.values);
                for (v, h) in line.values.iter_mut().zip(&half_kin) {
                    *v *= *h;
                }
                fft_inverse(&mut line.values);
                for (v, f) in line.values.iter_mut().zip(&vfac) {
                    *v *= *f;
                }
                fft_forward(&mut line.values);
                for (v, h) in line.values.iter_mut().zip(&half_kin) {
                    *v *= *h;
                }
                fft_inverse(&mut line.values);
            }
            let mut out = line.values;
            for v in out.iter_mut() {
                *v *= phi[j];
            }
            out
        })
        .collect();

    // Inverse transform over the clock axis, column by column.
    let mut pointer_density = vec![0.0f64; n_y];
    let mut final_norm = 0.0;
    let mut column = vec![Complex64::default(); n_y];
    for ix in 0..n_x {
        for jy in 0..n_y {
            column[jy] = lines[jy][ix];
        }
        fft_inverse(&mut column);
        for (jy, v) in column.iter().enumerate() {
            pointer_density[jy] += v.norm_sqr() * dx;
        }
    }
    for w in &pointer_density {
        final_norm += w * dy;
    }
    let y: Vec<f64> = (0..n_y).map(|j| y_min + j as f64 * dy).collect();
    Ok(CoupledResult { y, pointer_density, final_norm })
}

/// Write a field checkpoint: header {N: u64, x_min, x_max, t: f64} then
/// interleaved re/im 64-bit floats, all little-endian.
pub fn write_checkpoint(field: &SpatialField, t: f64, mut w: impl std::io::Write) -> std::io::Result<()> {
    w.write_all(&(field.len() as u64).to_le_bytes())?;
    w.write_all(&field.x_min.to_le_bytes())?;
    w.write_all(&field.x_max.to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_checkpoint(mut r: impl std::io::Read, params: PhysParams) -> std::io::Result<(SpatialField, f64)> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let x_min = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let x_max = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        values.push(Complex64::new(re, im));
    }
    Ok((SpatialField { x_min, x_max, values, params }, t))
}
