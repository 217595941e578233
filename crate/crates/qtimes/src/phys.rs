//! Physical parameters and the analytic Gaussian wavepacket used throughout.

use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Mass and hbar convention. Natural units (`hbar = 1`) everywhere except the
/// open-system formulas, which read `hbar` from here explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub mass: f64,
    pub hbar: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams { mass: 1.0, hbar: 1.0 }
    }
}

impl PhysParams {
    pub fn natural(mass: f64) -> Result<Self> {
        Self::new(mass, 1.0)
    }

    pub fn new(mass: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::invalid(format!("mass must be > 0, got {mass}")));
        }
        if !(hbar > 0.0) {
            return Err(Error::invalid(format!("hbar must be > 0, got {hbar}")));
        }
        Ok(PhysParams { mass, hbar })
    }
}

/// Uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::invalid(format!(
                "time grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        if n_samples < 2 {
            return Err(Error::invalid("time grid needs n_samples >= 2".to_string()));
        }
        Ok(TimeGrid { t_start, t_end, n_samples })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.step();
        (0..self.n_samples).map(move |k| self.t_start + k as f64 * dt)
    }
}

/// Whether the free Gaussian is evolved exactly or with its width frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpreadMode {
    #[default]
    Exact,
    /// Envelope width held at sigma; only valid as a short-time estimate.
    NoSpreading,
}

/// Normalised Gaussian wavepacket
/// `psi(x) = (2 pi sigma^2)^{-1/4} exp(-(x-q0)^2/(4 sigma^2) + i p0 x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub q0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub params: PhysParams,
}

impl GaussianPacket {
    pub fn new(q0: f64, p0: f64, sigma: f64, params: PhysParams) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(GaussianPacket { q0, p0, sigma, params })
    }

    /// Packet centre under free motion.
    pub fn center(&self, t: f64) -> f64 {
        self.q0 + self.p0 * t / self.params.mass
    }

    /// Complex width factor `1 + i t / (2 m sigma^2)`.
    fn lambda(&self, t: f64, mode: SpreadMode) -> Complex64 {
        match mode {
            SpreadMode::Exact => {
                Complex64::new(1.0, t / (2.0 * self.params.mass * self.sigma * self.sigma))
            }
            SpreadMode::NoSpreading => Complex64::new(1.0, 0.0),
        }
    }

    /// Freely evolved position amplitude psi(x, t).
    pub fn position_amplitude(&self, x: f64, t: f64, mode: SpreadMode) -> Complex64 {
        let s2 = self.sigma * self.sigma;
        let lam = self.lambda(t, mode);
        let norm = (2.0 * PI * s2).powf(-0.25) * lam.sqrt().inv();
        let u = x - self.center(t);
        let e0 = self.p0 * self.p0 / (2.0 * self.params.mass);
        let phase = Complex64::new(0.0, self.p0 * x - e0 * t);
        norm * (-(u * u) / (4.0 * s2 * lam) + phase).exp()
    }

    /// Spatial derivative of the evolved amplitude.
    pub fn position_derivative(&self, x: f64, t: f64, mode: SpreadMode) -> Complex64 {
        let s2 = self.sigma * self.sigma;
        let lam = self.lambda(t, mode);
        let u = x - self.center(t);
        let factor = Complex64::new(0.0, self.p0) - u / (2.0 * s2 * lam);
        self.position_amplitude(x, t, mode) * factor
    }

    /// Momentum amplitude at t = 0 (Fourier pair of the position amplitude).
    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        let s2 = self.sigma * self.sigma;
        let k = p - self.p0;
        let norm = (2.0 * s2 / PI).powf(0.25);
        norm * Complex64::new(-s2 * k * k, -k * self.q0).exp()
    }

    /// Probability of positive momentum.
    pub fn positive_momentum_fraction(&self) -> f64 {
        // |psi~|^2 is Gaussian with mean p0 and sd 1/(2 sigma)
        0.5 * crate::special::erfc(-self.p0 * self.sigma * std::f64::consts::SQRT_2)
    }

    /// Probability current at the origin for the freely evolving packet,
    /// positive for left-movers crossing x = 0.
    pub fn current_at_origin(&self, t: f64) -> f64 {
        let psi = self.position_amplitude(0.0, t, SpreadMode::Exact);
        let dpsi = self.position_derivative(0.0, t, SpreadMode::Exact);
        -(psi.conj() * dpsi).im / self.params.mass
    }

    /// Wigner function of the freely evolved packet (hbar = 1 form).
    pub fn wigner(&self, p: f64, q: f64, t: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let q_back = q - p * t / self.params.mass;
        let dq = q_back - self.q0;
        let dp = p - self.p0;
        (1.0 / PI) * (-dq * dq / (2.0 * s2) - 2.0 * s2 * dp * dp).exp()
    }

    /// Mean energy `p0^2/2m + 1/(8 m sigma^2)`.
    pub fn energy_mean(&self) -> f64 {
        let m = self.params.mass;
        self.p0 * self.p0 / (2.0 * m) + 1.0 / (8.0 * m * self.sigma * self.sigma)
    }

    /// Energy spread Delta H from the analytic Gaussian moments.
    pub fn energy_spread(&self) -> f64 {
        let sp2 = 1.0 / (4.0 * self.sigma * self.sigma);
        let var_p2 = 4.0 * self.p0 * self.p0 * sp2 + 2.0 * sp2 * sp2;
        var_p2.sqrt() / (2.0 * self.params.mass)
    }

    /// Zeno time 1/(Delta H).
    pub fn zeno_time(&self) -> f64 {
        1.0 / self.energy_spread()
    }

    /// Crossing-timescale estimate `m sigma / |p0|`.
    pub fn zeno_time_classical(&self) -> Result<f64> {
        if self.p0 == 0.0 {
            return Err(Error::invalid(
                "m sigma/|p0| estimate undefined for p0 = 0".to_string(),
            ));
        }
        Ok(self.params.mass * self.sigma / self.p0.abs())
    }
}
