//! Real-valued distributions on a uniform (p, q) grid: Wigner functions and
//! classical phase-space densities.

use crate::phys::GaussianPacket;
use crate::{Error, Result};
use std::f64::consts::PI;

/// Distribution sampled on a uniform (p, q) grid, row-major in p.
#[derive(Debug, Clone)]
pub struct PhaseSpaceField {
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub n_q: usize,
    pub values: Vec<f64>,
}

impl PhaseSpaceField {
    pub fn new(p_min: f64, p_max: f64, n_p: usize, q_min: f64, q_max: f64, n_q: usize) -> Result<Self> {
        if !(p_max > p_min && q_max > q_min) || n_p < 2 || n_q < 2 {
            return Err(Error::invalid("degenerate phase-space grid".to_string()));
        }
        Ok(PhaseSpaceField {
            p_min,
            p_max,
            n_p,
            q_min,
            q_max,
            n_q,
            values: vec![0.0; n_p * n_q],
        })
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_p as f64
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_q as f64
    }

    pub fn p_at(&self, i: usize) -> f64 {
        self.p_min + (i as f64 + 0.5) * self.dp()
    }

    pub fn q_at(&self, j: usize) -> f64 {
        self.q_min + (j as f64 + 0.5) * self.dq()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_q + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.values[i * self.n_q + j]
    }

    pub fn fill(&mut self, f: impl Fn(f64, f64) -> f64) {
        for i in 0..self.n_p {
            let p = self.p_at(i);
            for j in 0..self.n_q {
                self.values[i * self.n_q + j] = f(p, self.q_at(j));
            }
        }
    }

    pub fn from_fn(
        p_min: f64,
        p_max: f64,
        n_p: usize,
        q_min: f64,
        q_max: f64,
        n_q: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut field = Self::new(p_min, p_max, n_p, q_min, q_max, n_q)?;
        field.fill(f);
        Ok(field)
    }

    /// Wigner function of a Gaussian packet on a grid covering its support.
    pub fn gaussian_wigner(packet: &GaussianPacket, n_p: usize, n_q: usize) -> Result<Self> {
        let sp = 1.0 / (2.0 * packet.sigma);
        let (p0, q0, s) = (packet.p0, packet.q0, packet.sigma);
        Self::from_fn(
            p0 - 8.0 * sp,
            p0 + 8.0 * sp,
            n_p,
            q0 - 8.0 * s,
            q0 + 8.0 * s,
            n_q,
            |p, q| {
                (1.0 / PI)
                    * (-(q - q0) * (q - q0) / (2.0 * s * s)
                        - 2.0 * s * s * (p - p0) * (p - p0))
                        .exp()
            },
        )
    }

    /// Wigner function of an even superposition of packets at +-a (hbar = 1):
    /// two positive lobes plus an interference fringe cos(2 a (p - p0)) at q = 0.
    pub fn cat_wigner(
        a: f64,
        sigma: f64,
        p0: f64,
        grid: (f64, f64, usize, f64, f64, usize),
    ) -> Result<Self> {
        let s2 = sigma * sigma;
        let overlap = (-a * a / (2.0 * s2)).exp();
        let norm = 1.0 / (2.0 * (1.0 + overlap));
        let (p_min, p_max, n_p, q_min, q_max, n_q) = grid;
        Self::from_fn(p_min, p_max, n_p, q_min, q_max, n_q, |p, q| {
            let dp2 = 2.0 * s2 * (p - p0) * (p - p0);
            let lobe = |c: f64| (-(q - c) * (q - c) / (2.0 * s2) - dp2).exp();
            let fringe = 2.0 * (-q * q / (2.0 * s2) - dp2).exp() * (2.0 * a * (p - p0)).cos();
            norm / PI * (lobe(a) + lobe(-a) + fringe)
        })
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dp() * self.dq()
    }

    pub fn momentum_mean(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_p {
            let p = self.p_at(i);
            for j in 0..self.n_q {
                acc += p * self.at(i, j);
            }
        }
        acc * self.dp() * self.dq() / self.integral()
    }

    pub fn momentum_variance(&self) -> f64 {
        let mean = self.momentum_mean();
        let mut acc = 0.0;
        for i in 0..self.n_p {
            let p = self.p_at(i);
            for j in 0..self.n_q {
                acc += (p - mean) * (p - mean) * self.at(i, j);
            }
        }
        acc * self.dp() * self.dq() / self.integral()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Mass carried by positive-momentum cells.
    pub fn positive_momentum_mass(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_p {
            if self.p_at(i) > 0.0 {
                for j in 0..self.n_q {
                    acc += self.at(i, j);
                }
            }
        }
        acc * self.dp() * self.dq()
    }
}
