//! Pulsed-measurement propagator along the boundary: exact small-n values,
//! the Euclidean half-line lattice recursion, the sawtooth model, and the
//! equivalence test against continuous absorbing-potential evolution.

use crate::engine::{self, EvolutionSpec, Observable, Potential, SpatialField};
use crate::phys::{GaussianPacket, PhysParams};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Timing of a string of projections: tau = eps0 + (n-1) eps + eps_n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSchedule {
    pub epsilon: f64,
    pub epsilon0: f64,
    pub epsilon_n: f64,
    /// Number of projections.
    pub n: usize,
}

impl ProjectionSchedule {
    pub fn new(epsilon: f64, epsilon0: f64, epsilon_n: f64, n: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon0 > 0.0 && epsilon_n > 0.0) {
            return Err(Error::invalid("all projection spacings must be > 0".to_string()));
        }
        if n == 0 {
            return Err(Error::invalid("need at least one projection".to_string()));
        }
        Ok(ProjectionSchedule { epsilon, epsilon0, epsilon_n, n })
    }

    /// All spacings equal: tau = (n + 1) eps.
    pub fn uniform(epsilon: f64, n: usize) -> Result<Self> {
        Self::new(epsilon, epsilon, epsilon, n)
    }

    pub fn tau(&self) -> f64 {
        self.epsilon0 + (self.n as f64 - 1.0) * self.epsilon + self.epsilon_n
    }
}

/// Closed-form half-line Gaussian integrals behind the two- and
/// three-projection amplitudes. `signs` picks the integration ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcSigns {
    PlusPlus,
    PlusMinus,
}

/// T_{++} / T_{+-} for spacings (eps1, eps2, eps3).
pub fn tc_integral(eps1: f64, eps2: f64, eps3: f64, signs: TcSigns) -> f64 {
    assert!(eps1 > 0.0 && eps2 > 0.0 && eps3 > 0.0);
    let total = eps1 + eps2 + eps3;
    let arg = (eps1 * eps3 / (eps2 * total)).sqrt();
    let sign = match signs {
        TcSigns::PlusPlus => 1.0,
        TcSigns::PlusMinus => -1.0,
    };
    (PI + sign * 2.0 * arg.atan()) / (4.0 * PI * total.sqrt())
}

/// Dimensionless boundary factor of g_P for zero to three projections at
/// equal spacing; valid for t in [0, 3 eps) and at t = 4 eps exactly.
pub fn gp_exact_factor(t: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || t < 0.0 {
        return Err(Error::invalid("need eps > 0 and t >= 0".to_string()));
    }
    let s = t / eps;
    if s < 1.0 {
        Ok(1.0)
    } else if s < 2.0 {
        Ok(0.5)
    } else if s < 3.0 {
        Ok(0.25 * (1.0 + (2.0 / PI) * ((t - 2.0 * eps) / t).sqrt().atan()))
    } else if (s - 4.0).abs() < 1e-12 {
        Ok(0.25)
    } else {
        Err(Error::invalid(format!(
            "t/eps = {s} outside the exactly solved regimes [0,3) and {{4}}"
        )))
    }
}

/// Exact boundary propagator g_P(0,t|0,0) on its solved regimes.
pub fn gp_exact_small_n(t: f64, eps: f64, params: PhysParams) -> Result<Complex64> {
    let factor = gp_exact_factor(t, eps)?;
    Ok(free_boundary_prefactor(t, params) * factor)
}

/// (m / 2 pi i t)^{1/2}, principal branch.
pub fn free_boundary_prefactor(t: f64, params: PhysParams) -> Complex64 {
    (Complex64::new(0.0, -params.mass / (2.0 * PI * t))).sqrt()
}

/// Piecewise-linear sawtooth model of the boundary factor f_P.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothModel {
    pub epsilon0: f64,
    pub epsilon: f64,
}

impl SawtoothModel {
    pub fn new(epsilon0: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon0 > 0.0 && epsilon > 0.0) {
            return Err(Error::invalid("sawtooth spacings must be > 0".to_string()));
        }
        Ok(SawtoothModel { epsilon0, epsilon })
    }

    /// Peak value approached from below at t = eps0 + k eps.
    pub fn peak(&self, k: usize) -> f64 {
        1.0 / (k as f64 + 1.0)
    }

    /// Trough value just after t = eps0 + (k-1) eps, k >= 1.
    pub fn trough(&self, k: usize) -> f64 {
        assert!(k >= 1);
        1.0 / (2.0 * k as f64)
    }
}

/// Piecewise-linear f_P(t); 1 before the first projection, then linear
/// from 1/(2k) up to 1/(k+1) on the k-th panel.
pub fn sawtooth_fp(t: f64, model: &SawtoothModel) -> f64 {
    if t < model.epsilon0 {
        return 1.0;
    }
    let k = 1 + ((t - model.epsilon0) / model.epsilon).floor() as usize;
    let t_left = model.epsilon0 + (k as f64 - 1.0) * model.epsilon;
    let frac = (t - t_left) / model.epsilon;
    model.trough(k) * (1.0 - frac) + model.peak(k) * frac
}

/// Boundary factor of the absorbing-potential propagator,
/// f_V(t) = (1 - exp(-V0 t)) / (V0 t).
pub fn fv_factor(t: f64, v0: f64) -> f64 {
    let u = v0 * t;
    if u.abs() < 1e-8 {
        // series limit
        1.0 - 0.5 * u + u * u / 6.0
    } else {
        (1.0 - (-u).exp()) / u
    }
}

/// S(t) = f_P(t)/f_V(t) - 1.
pub fn s_function(t: f64, fp_value: f64, v0: f64) -> f64 {
    fp_value / fv_factor(t, v0) - 1.0
}

/// Lattice solution of the Euclidean half-line recursion in units m = 1,
/// eps = 1: panel n carries n projections and covers s in [n, n+1].
#[derive(Debug, Clone)]
pub struct LatticeTable {
    /// (s, f_P(s)) samples across all panels.
    pub samples: Vec<(f64, f64)>,
    /// Peak of panel n, i.e. f_P(s -> (n+1)^-); expected 1/(n+1).
    pub peaks: Vec<f64>,
    /// Trough at the left edge of panel n >= 1; expected 1/(2n).
    pub troughs: Vec<f64>,
}

impl LatticeTable {
    /// f_P at the k-th peak (approached from below at s = k + 1).
    pub fn peak(&self, k: usize) -> f64 {
        self.peaks[k]
    }
}

/// Iterate the half-line convolution with a mid-point rule and report f_P
/// over the first `n_max` panels.
pub fn gp_lattice_recursion(n_max: usize, lattice_dx: f64, s_samples: usize) -> Result<LatticeTable> {
    if lattice_dx > 1e-2 {
        return Err(Error::invalid(format!(
            "lattice_dx must be <= 1e-2, got {lattice_dx}"
        )));
    }
    if n_max == 0 || s_samples == 0 {
        return Err(Error::invalid("need n_max >= 1 and s_samples >= 1".to_string()));
    }
    let y_max = 10.0 * (n_max as f64).sqrt().max(1.0);
    let n = (y_max / lattice_dx).ceil() as usize;
    let dx = lattice_dx;
    // midpoint lattice y_j = (j + 1/2) dx
    let y = |j: usize| (j as f64 + 0.5) * dx;

    // kernel K(u; 1) truncated at 8 standard deviations
    let k_half = (8.0 / dx).ceil() as usize;
    let fft_len = (n + 2 * k_half + 1).next_power_of_two();
    let mut kernel_hat = vec![Complex64::default(); fft_len];
    for (offset, slot) in (-(k_half as isize)..=(k_half as isize)).zip(kernel_hat.iter_mut()) {
        let u = offset as f64 * dx;
        *slot = Complex64::new((2.0 * PI).powf(-0.5) * (-0.5 * u * u).exp(), 0.0);
    }
    engine::fft_forward(&mut kernel_hat);

    // state after the first projection: S_1(y) = theta(y) gtilde_f(1, y)
    let mut state: Vec<f64> = (0..n)
        .map(|j| (2.0 * PI).powf(-0.5) * (-0.5 * y(j) * y(j)).exp())
        .collect();

    let mut samples = Vec::new();
    let mut peaks = vec![1.0];
    let mut troughs = vec![f64::NAN];
    // panel 0 is projection-free: f_P = 1 exactly
    for i in 0..s_samples {
        let s = (i as f64 + 0.5) / s_samples as f64;
        samples.push((s, 1.0));
    }

    let trough_delta = 1e-3_f64.max(4.0 * dx * dx);
    for panel in 1..=n_max {
        // truncation guard: mass in the last kernel width before the boundary
        let tail_start = ((y_max - 1.0) / dx) as usize;
        let tail: f64 = state[tail_start.min(n - 1)..].iter().sum::<f64>() * dx;
        let total: f64 = state.iter().sum::<f64>() * dx;
        if tail > 1e-10 * total.max(1e-300) {
            return Err(Error::DomainTooSmall { tail_mass: tail / total });
        }

        // boundary evaluation F(s, 0) = dx sum_j K(y_j; s - panel) S(y_j)
        let eval_at = |delta: f64, state: &[f64]| -> f64 {
            let width = delta.sqrt();
            let j_max = ((8.0 * width) / dx).ceil() as usize;
            let mut acc = 0.0;
            let norm = (2.0 * PI * delta).powf(-0.5);
            for j in 0..j_max.min(n) {
                let u = y(j);
                acc += norm * (-0.5 * u * u / delta).exp() * state[j];
            }
            acc * dx
        };
        let fp_at = |delta: f64, state: &[f64]| -> f64 {
            let s = panel as f64 + delta;
            eval_at(delta, state) * (2.0 * PI * s).sqrt()
        };

        // f_P rises like sqrt(delta) off the trough; eliminate that term by
        // evaluating at delta and 4 delta
        troughs.push(2.0 * fp_at(trough_delta, &state) - fp_at(4.0 * trough_delta, &state));
        for i in 0..s_samples {
            let delta = (i as f64 + 0.5) / s_samples as f64;
            samples.push((panel as f64 + delta, fp_at(delta, &state)));
        }
        let peak = fp_at(1.0, &state);
        peaks.push(peak);

        if panel < n_max {
            // advance: S_{panel+1} = theta * (K(.;1) * S_panel)
            let mut buf = vec![Complex64::default(); fft_len];
            for (slot, v) in buf.iter_mut().zip(&state) {
                *slot = Complex64::new(*v, 0.0);
            }
            engine::fft_forward(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kernel_hat) {
                *b *= *k;
            }
            engine::fft_inverse(&mut buf);
            for j in 0..n {
                state[j] = buf[j + k_half].re * dx;
            }
        }
    }

    Ok(LatticeTable { samples, peaks, troughs })
}

/// Pulsed-versus-potential comparison on the grid engine.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// L2 norm of the difference of the final states restricted to x > 0.
    pub max_wavefn_deviation: f64,
    pub reflection_prob_pulsed: f64,
    pub reflection_prob_potential: f64,
}

/// Grid choices for the equivalence run.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub dt: f64,
}

impl EquivalenceGrid {
    pub fn for_packet(packet: &GaussianPacket, tau: f64) -> Self {
        let m = packet.params.mass;
        let reach = packet.q0.abs() + packet.p0.abs() * tau / m + 12.0 * packet.sigma;
        let half = reach.max(20.0);
        let e = packet.energy_mean();
        EquivalenceGrid {
            x_min: -half,
            x_max: half,
            n: 4096,
            dt: (0.05 / e).min(1e-3),
        }
    }
}

/// Evolve the same packet under repeated sharp projections at spacing
/// `epsilon` and under the continuous absorbing step `v0`, both over `tau`.
pub fn equivalence_test(
    packet: &GaussianPacket,
    epsilon: f64,
    v0: f64,
    tau: f64,
    grid: &EquivalenceGrid,
) -> Result<EquivalenceReport> {
    let dx = (grid.x_max - grid.x_min) / grid.n as f64;
    let p_reach = packet.p0.abs() + 6.0 / (2.0 * packet.sigma);
    if PI / dx < 4.0 * p_reach {
        return Err(Error::GridResolution(format!(
            "dx = {dx} cannot resolve momenta up to {p_reach}"
        )));
    }
    let field = SpatialField::from_packet(packet, grid.x_min, grid.x_max, grid.n)?;

    let n_proj = (tau / epsilon).round() as usize;
    if n_proj < 2 {
        return Err(Error::invalid("tau must cover at least two projection spacings".to_string()));
    }
    let schedule = ProjectionSchedule::uniform(epsilon, n_proj - 1)?;
    let pulsed_spec = EvolutionSpec::new(Potential::None, epsilon, 0).with_schedule(schedule);
    let pulsed = engine::evolve(&field, &pulsed_spec)?;

    let steps = (tau / grid.dt).ceil() as usize;
    let pot_spec = EvolutionSpec::new(Potential::AbsorbingStep { v0 }, tau / steps as f64, steps);
    let potential = engine::evolve(&field, &pot_spec)?;

    let mut dev2 = 0.0;
    for i in 0..pulsed.len() {
        if pulsed.x_at(i) > 0.0 {
            dev2 += (pulsed.values[i] - potential.values[i]).norm_sqr() * dx;
        }
    }
    Ok(EquivalenceReport {
        max_wavefn_deviation: dev2.sqrt(),
        reflection_prob_pulsed: engine::expectation(&pulsed, Observable::ThetaX)?,
        reflection_prob_potential: engine::expectation(&potential, Observable::ThetaX)?,
    })
}

/// Reflection probability of the projected string alone (the Zeno-regime
/// observable; no continuous-potential companion run).
pub fn pulsed_reflection(
    packet: &GaussianPacket,
    epsilon: f64,
    tau: f64,
    grid: &EquivalenceGrid,
) -> Result<f64> {
    let field = SpatialField::from_packet(packet, grid.x_min, grid.x_max, grid.n)?;
    let n_proj = (tau / epsilon).round() as usize;
    if n_proj < 2 {
        return Err(Error::invalid("tau must cover at least two projection spacings".to_string()));
    }
    let schedule = ProjectionSchedule::uniform(epsilon, n_proj - 1)?;
    let spec = EvolutionSpec::new(Potential::None, epsilon, 0).with_schedule(schedule);
    let pulsed = engine::evolve(&field, &spec)?;
    engine::expectation(&pulsed, Observable::ThetaX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tc_closed_form_reference_values() {
        // T_{++}(eps,eps,eps) = 1/(3 sqrt(3 eps)), T_{+-} = 1/(6 sqrt(3 eps))
        let tpp = tc_integral(1.0, 1.0, 1.0, TcSigns::PlusPlus);
        let tpm = tc_integral(1.0, 1.0, 1.0, TcSigns::PlusMinus);
        assert_abs_diff_eq!(tpp, 1.0 / (3.0 * 3.0f64.sqrt()), epsilon = 1e-14);
        assert_abs_diff_eq!(tpp, 0.19245, epsilon = 1e-5);
        assert_abs_diff_eq!(tpm, 1.0 / (6.0 * 3.0f64.sqrt()), epsilon = 1e-14);
        assert_abs_diff_eq!(tpm, 0.09623, epsilon = 1e-5);
        // T_{++} + T_{+-} = T_{+0} = (1/2) T_00 = 1/(2 sqrt(3 eps))
        assert_abs_diff_eq!(tpp + tpm, 1.0 / (2.0 * 3.0f64.sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn tc_matches_direct_double_quadrature() {
        // Independent oracle: 2D half-line Gaussian quadrature.
        let rule = crate::quad::GaussLegendre::new(80);
        let (e1, e2, e3) = (0.7, 1.3, 0.4);
        for signs in [TcSigns::PlusPlus, TcSigns::PlusMinus] {
            let oracle = rule.integrate(0.0, 12.0, |y1| {
                let inner = |y2: f64| {
                    (-(y1 * y1) / e1 - (y1 - y2) * (y1 - y2) / e2 - y2 * y2 / e3).exp()
                };
                match signs {
                    TcSigns::PlusPlus => rule.integrate(0.0, 12.0, inner),
                    TcSigns::PlusMinus => rule.integrate(-12.0, 0.0, inner),
                }
            }) / (PI * (e1 * e2 * e3).sqrt());
            assert_abs_diff_eq!(oracle, tc_integral(e1, e2, e3, signs), epsilon = 1e-10);
        }
    }

    #[test]
    fn gp_exact_regimes() {
        let params = PhysParams::default();
        let eps = 0.5;
        assert_abs_diff_eq!(gp_exact_factor(0.2, eps).unwrap(), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(gp_exact_factor(0.7, eps).unwrap(), 0.5, epsilon = 0.0);
        // t -> 3 eps^-: 1/4 (1 + (2/pi) arctan(1/sqrt(3))) = 1/3
        let f = gp_exact_factor(3.0 * eps - 1e-12, eps).unwrap();
        assert_abs_diff_eq!(f, 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(gp_exact_factor(4.0 * eps, eps).unwrap(), 0.25, epsilon = 0.0);
        assert!(gp_exact_factor(3.5 * eps, eps).is_err());
        // prefactor modulus: |(m/2 pi i t)^(1/2)| = sqrt(m / 2 pi t)
        let g = gp_exact_small_n(0.2, eps, params).unwrap();
        assert_abs_diff_eq!(g.norm(), (1.0 / (2.0 * PI * 0.2)).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn sawtooth_panel_values() {
        let model = SawtoothModel::new(1.0, 1.0).unwrap();
        assert_eq!(sawtooth_fp(0.3, &model), 1.0);
        // plateau on the single-projection panel
        assert_abs_diff_eq!(sawtooth_fp(1.2, &model), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sawtooth_fp(1.9, &model), 0.5, epsilon = 1e-14);
        // peak/trough ratio is 2 across every boundary
        for k in 1..20 {
            let peak = model.peak(k);
            let trough_after = model.trough(k + 1);
            assert_abs_diff_eq!(peak / trough_after, 2.0, epsilon = 1e-12);
        }
        // midpoint of a panel is the average of its trough and peak
        let mid = sawtooth_fp(2.5, &model);
        assert_abs_diff_eq!(mid, 0.5 * (model.trough(2) + model.peak(2)), epsilon = 1e-14);
    }

    #[test]
    fn s_function_identities() {
        // f_P = f_V identically gives S = 0
        for t in [0.5, 1.0, 7.3] {
            let fv = fv_factor(t, 4.0 / 3.0);
            assert_abs_diff_eq!(s_function(t, fv, 4.0 / 3.0), 0.0, epsilon = 1e-14);
        }
        // absorbing edge factor at V0 t = 1
        assert_abs_diff_eq!(fv_factor(1.0, 1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(fv_factor(1.0, 1.0), 0.63212, epsilon = 1e-5);
        // large V0 t asymptote 1/(V0 t)
        let u = 100.0;
        assert!((fv_factor(u, 1.0) - 1.0 / u).abs() / (1.0 / u) < 0.01);
        // V0 -> 0 limit
        assert_abs_diff_eq!(fv_factor(1.0, 1e-12), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn lattice_recursion_first_panels() {
        let table = gp_lattice_recursion(3, 2e-3, 4).unwrap();
        // single-projection plateau is exactly 1/2
        assert_abs_diff_eq!(table.peaks[1], 0.5, epsilon = 0.005 * 0.5);
        assert_abs_diff_eq!(table.troughs[1], 0.5, epsilon = 0.005 * 0.5);
        // two-projection panel: trough 1/4, peak 1/3
        assert_abs_diff_eq!(table.troughs[2], 0.25, epsilon = 0.01 * 0.25);
        assert_abs_diff_eq!(table.peaks[2], 1.0 / 3.0, epsilon = 0.01 / 3.0);
        // against the exact arctan interpolation inside panel 2
        for &(s, fp) in table.samples.iter().filter(|(s, _)| (2.0..3.0).contains(s)) {
            let exact = gp_exact_factor(s, 1.0).unwrap();
            assert_abs_diff_eq!(fp, exact, epsilon = 0.01 * exact);
        }
    }

    #[test]
    fn half_drop_after_projection() {
        let table = gp_lattice_recursion(6, 2e-3, 2).unwrap();
        for k in 1..=5usize {
            let ratio = table.troughs[k + 1] / table.peaks[k];
            assert!((ratio - 0.5).abs() < 0.02 * 0.5, "panel {k}: ratio {ratio}");
        }
    }

    #[test]
    fn time_average_identity_small_n() {
        // Eq-level identity: the average over projection times of the
        // boundary matrix element equals 1/(n+1) of the free value.
        let rule = crate::quad::GaussLegendre::new(48);
        let tau = 3.0f64;
        // n = 1: inner oracle by half-line y quadrature
        let boundary = |t1: f64| -> f64 {
            rule.integrate(0.0, 15.0, |y| {
                let a = 1.0 / (2.0 * (tau - t1)) + 1.0 / (2.0 * t1);
                (1.0 / (2.0 * PI * (t1 * (tau - t1)).sqrt())) * (-a * y * y).exp()
            })
        };
        let avg = rule.integrate(1e-6, tau - 1e-6, boundary) / tau;
        let free = (1.0 / (2.0 * PI * tau)).sqrt();
        assert!((avg - free / 2.0).abs() / (free / 2.0) < 1e-4);

        // n = 2: nested quadrature over ordered projection times of the
        // dimensionless factor T_{++}; expected (1/sqrt(tau)) / (n + 1)
        let inner = |t2: f64| rule.integrate(1e-9, t2, |t1| {
            tc_integral(t1, t2 - t1, tau - t2, TcSigns::PlusPlus)
        });
        let avg2 = 2.0 / (tau * tau) * rule.integrate(1e-9, tau - 1e-9, inner);
        let expected = 1.0 / (tau.sqrt() * 3.0);
        assert!((avg2 - expected).abs() / expected < 1e-4, "avg2 = {avg2}, expected {expected}");
    }

    #[test]
    fn reflection_symmetry_single_projection() {
        // replacing P by (1 - P) leaves the boundary matrix element unchanged
        let rule = crate::quad::GaussLegendre::new(48);
        let (t1, tau) = (0.8f64, 2.0f64);
        let integrand = |y: f64| {
            let a = 1.0 / (2.0 * (tau - t1)) + 1.0 / (2.0 * t1);
            (1.0 / (2.0 * PI * (t1 * (tau - t1)).sqrt())) * (-a * y * y).exp()
        };
        let plus = rule.integrate(0.0, 15.0, integrand);
        let minus = rule.integrate(-15.0, 0.0, integrand);
        assert_abs_diff_eq!(plus, minus, epsilon = 1e-12);
    }
}

