//! Arrival and dwell times read off a coupled model clock with linear
//! Hamiltonian H_c = p_y: weak-coupling smearing of the current,
//! strong-coupling kinetic-energy regime, and the semiclassical dwell
//! distribution, each cross-checked against the coupled tensor-grid oracle.

use crate::engine::{self, ClockRegion, SpatialField};
use crate::phys::GaussianPacket;
use crate::quad::GaussLegendre;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Linear-momentum clock with a Gaussian pointer profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockModel {
    pub lambda: f64,
    /// Pointer width of the initial Gaussian profile.
    pub sigma_y: f64,
    pub region: ClockRegion,
}

impl ClockModel {
    pub fn new(lambda: f64, sigma_y: f64, region: ClockRegion) -> Result<Self> {
        if !(lambda > 0.0 && sigma_y > 0.0) {
            return Err(Error::invalid("clock needs lambda > 0 and sigma_y > 0".to_string()));
        }
        Ok(ClockModel { lambda, sigma_y, region })
    }

    pub fn arrival(lambda: f64, sigma_y: f64) -> Result<Self> {
        Self::new(lambda, sigma_y, ClockRegion::HalfLineArrival)
    }

    /// Initial pointer profile phi_0(y).
    pub fn profile(&self, y: f64) -> Complex64 {
        Complex64::new(
            (2.0 * PI * self.sigma_y * self.sigma_y).powf(-0.25)
                * (-y * y / (4.0 * self.sigma_y * self.sigma_y)).exp(),
            0.0,
        )
    }

    /// Energy spread of the clock, sigma_eps = 1/(2 sigma_y) for H_c = p_y.
    pub fn energy_spread(&self) -> f64 {
        1.0 / (2.0 * self.sigma_y)
    }

    /// Temporal resolution 1/(lambda sigma_eps).
    pub fn resolution(&self) -> f64 {
        1.0 / (self.lambda * self.energy_spread())
    }
}

/// Pointer wavefunction Phi(y, t) = phi_0(y - lambda t) for the linear clock.
pub fn clock_wavefn(clock: &ClockModel, y: f64, t: f64) -> Complex64 {
    clock.profile(y - clock.lambda * t)
}

/// Pointer distribution on a uniform y grid; times map as t = y / lambda.
#[derive(Debug, Clone, Serialize)]
pub struct ClockDistribution {
    pub y: Vec<f64>,
    pub values: Vec<f64>,
    pub lambda: f64,
}

impl ClockDistribution {
    pub fn new(y: Vec<f64>, values: Vec<f64>, lambda: f64) -> Result<Self> {
        if y.len() != values.len() || y.len() < 2 {
            return Err(Error::invalid("mismatched clock distribution".to_string()));
        }
        if values.iter().any(|v| *v < -1e-12) {
            return Err(Error::invalid("clock distribution must be non-negative".to_string()));
        }
        Ok(ClockDistribution { y, values, lambda })
    }

    pub fn dy(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    pub fn total(&self) -> f64 {
        crate::quad::trapezoid(&self.values, self.dy())
    }

    /// Measured time for each pointer position.
    pub fn times(&self) -> Vec<f64> {
        self.y.iter().map(|y| y / self.lambda).collect()
    }

    pub fn peak_y(&self) -> f64 {
        let (mut best, mut arg) = (f64::MIN, 0.0);
        for (y, v) in self.y.iter().zip(&self.values) {
            if *v > best {
                best = *v;
                arg = *y;
            }
        }
        arg
    }

    pub fn mean_time(&self) -> f64 {
        let dy = self.dy();
        let num: f64 = self
            .y
            .iter()
            .zip(&self.values)
            .map(|(y, v)| y / self.lambda * v)
            .sum::<f64>()
            * dy;
        num / self.total()
    }
}

fn uniform_grid(y_min: f64, y_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| y_min + (y_max - y_min) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Weak-coupling pointer distribution Pi(y) = int dt |Phi(y, t)|^2 J(t),
/// with a validity flag for E >> lambda sigma_eps.
pub fn weak_coupling_arrival(
    packet: &GaussianPacket,
    clock: &ClockModel,
    y_grid: (f64, f64, usize),
) -> Result<(ClockDistribution, bool)> {
    let valid = packet.energy_mean() > 10.0 * clock.lambda * clock.energy_spread();
    let (y_min, y_max, n) = y_grid;
    let y = uniform_grid(y_min, y_max, n);
    let m = packet.params.mass;
    let t_end = (packet.q0.abs() + 10.0 * packet.sigma) / (packet.p0.abs() / m)
        + 10.0 * packet.sigma * m / packet.p0.abs();
    let rule = GaussLegendre::new(12);
    let panels = ((t_end * clock.lambda / clock.sigma_y).ceil() as usize).clamp(64, 2000);
    let h = t_end / panels as f64;
    let values: Vec<f64> = y
        .iter()
        .map(|&yy| {
            let mut acc = 0.0;
            for k in 0..panels {
                acc += rule.integrate(k as f64 * h, (k + 1) as f64 * h, |t| {
                    clock_wavefn(clock, yy, t).norm_sqr() * packet.current_at_origin(t)
                });
            }
            acc.max(0.0)
        })
        .collect();
    Ok((ClockDistribution::new(y, values, clock.lambda)?, valid))
}

/// Strong-coupling pointer distribution: the normalised kinetic-energy
/// density read at t = y / lambda.
pub fn strong_coupling_arrival(
    packet: &GaussianPacket,
    clock: &ClockModel,
    y_grid: (f64, f64, usize),
) -> Result<ClockDistribution> {
    let (y_min, y_max, n) = y_grid;
    let y = uniform_grid(y_min.max(0.0), y_max, n);
    let m = packet.params.mass;
    let raw: Vec<f64> = y
        .iter()
        .map(|&yy| {
            let t = yy / clock.lambda;
            packet
                .position_derivative(0.0, t, crate::phys::SpreadMode::Exact)
                .norm_sqr()
                / (m * m)
        })
        .collect();
    let dist = ClockDistribution::new(y, raw, clock.lambda)?;
    let total = dist.total();
    if !(total > 0.0) {
        return Err(Error::invalid("empty strong-coupling distribution".to_string()));
    }
    let values = dist.values.iter().map(|v| v / total).collect();
    ClockDistribution::new(dist.y, values, clock.lambda)
}

/// Semiclassical dwell distribution over [-L, L]:
/// Pi(y) = int dp |psi~(p)|^2 |phi_0(y - lambda 2 L m / |p|)|^2.
pub fn dwell_distribution(
    packet: &GaussianPacket,
    clock: &ClockModel,
    half_width: f64,
    y_grid: (f64, f64, usize),
) -> Result<(ClockDistribution, bool)> {
    if !(half_width > 0.0) {
        return Err(Error::invalid("dwell region needs L > 0".to_string()));
    }
    // validity flag |p0| L >> 1
    let valid = packet.p0.abs() * half_width > 10.0;
    let (y_min, y_max, n) = y_grid;
    let y = uniform_grid(y_min, y_max, n);
    let m = packet.params.mass;
    let sp = 1.0 / (2.0 * packet.sigma);
    let rule = GaussLegendre::new(64);
    let p_hi = (packet.p0 + 10.0 * sp).min(-1e-3);
    let p_lo = packet.p0 - 10.0 * sp;
    let values: Vec<f64> = y
        .iter()
        .map(|&yy| {
            rule.integrate(p_lo, p_hi, |p| {
                let dwell_t = 2.0 * half_width * m / p.abs();
                packet.momentum_amplitude(p).norm_sqr()
                    * clock_wavefn(clock, yy, dwell_t).norm_sqr()
            })
            .max(0.0)
        })
        .collect();
    Ok((ClockDistribution::new(y, values, clock.lambda)?, valid))
}

/// Full coupled tensor-grid evolution, spectrally diagonal in the clock
/// momentum; returns the pointer distribution at tau.
#[allow(clippy::too_many_arguments)]
pub fn coupled_oracle(
    packet: &GaussianPacket,
    clock: &ClockModel,
    x_grid: (f64, f64, usize),
    y_grid: (f64, f64, usize),
    tau: f64,
    steps: usize,
) -> Result<engine::CoupledResult> {
    let psi0 = SpatialField::from_packet(packet, x_grid.0, x_grid.1, x_grid.2)?;
    let profile = *clock;
    engine::evolve_coupled(
        &psi0,
        move |y| profile.profile(y),
        y_grid.0,
        y_grid.1,
        y_grid.2,
        clock.lambda,
        clock.region,
        tau,
        steps,
    )
}
