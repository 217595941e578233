//! Class operators for crossing and not crossing, decoherence functionals,
//! the d_m^2 interference bound, and their Wigner-representation kernels.
//!
//! Heisenberg projectors are realised spectrally: exact free evolution in
//! momentum space, sharp theta multiplication in position space (boundary
//! point weighted 1/2), evolution back.

use crate::engine::{self, Observable, SpatialField};
use crate::special::si_tail;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Which coarse-grained history a class operator represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassOperatorKind {
    /// Not crossing during [t1, t2].
    NonCrossing,
    /// Crossing during [t1, t2] (left-moving sector form theta_1 - theta_2).
    CrossInterval,
    /// Crossing from the right: theta(-x(t2)) theta(x(t1)).
    CrossRight,
    /// Crossing from the left: theta(x(t2)) theta(-x(t1)).
    CrossLeft,
    /// Hermitian two-sided crossing combination.
    CrossTwosidedHermitian,
}

/// A class operator over [t1, t2]; `v0` selects the absorbing-potential
/// realization of the non-crossing operator instead of the sharp form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassOperatorSpec {
    pub kind: ClassOperatorKind,
    pub t1: f64,
    pub t2: f64,
    pub v0: Option<f64>,
}

impl ClassOperatorSpec {
    pub fn new(kind: ClassOperatorKind, t1: f64, t2: f64) -> Result<Self> {
        if !(t2 > t1) {
            return Err(Error::invalid("class operator needs t2 > t1".to_string()));
        }
        Ok(ClassOperatorSpec { kind, t1, t2, v0: None })
    }

    pub fn with_potential(mut self, v0: f64) -> Self {
        self.v0 = Some(v0);
        self
    }
}

/// theta(+-x(t)) |psi>: evolve by t, multiply by the sharp indicator,
/// evolve back.
///
/// Unlike the engine's projector strings (boundary point weighted 1/2),
/// sandwich observables converge fastest with a sharp complementary split;
/// the x = 0 point is assigned to the positive side so that
/// theta_+ + theta_- = 1 holds exactly.
pub fn heisenberg_theta(state: &SpatialField, t: f64, positive: bool) -> SpatialField {
    let mut out = state.clone();
    if t != 0.0 {
        out.free_step(t);
    }
    let dx = out.dx();
    let n = out.len();
    for i in 0..n {
        let x = out.x_at(i);
        let on_positive_side = x > -0.25 * dx;
        if on_positive_side != positive {
            out.values[i] = Complex64::default();
        }
    }
    if t != 0.0 {
        out.free_step(-t);
    }
    out
}

fn sub(a: &SpatialField, b: &SpatialField) -> SpatialField {
    let mut out = a.clone();
    for (v, w) in out.values.iter_mut().zip(&b.values) {
        *v -= *w;
    }
    out
}

/// Apply the class operator at reference time 0, i.e. e^{i H0 tau} C |psi>;
/// the overall final-time unitary is omitted since it cancels in every
/// decoherence functional.
pub fn apply_class_operator(spec: &ClassOperatorSpec, state: &SpatialField) -> Result<SpatialField> {
    let norm0 = state.norm_sqr();
    let out = match spec.kind {
        ClassOperatorKind::CrossInterval => match spec.v0 {
            None => sub(
                &heisenberg_theta(state, spec.t1, true),
                &heisenberg_theta(state, spec.t2, true),
            ),
            Some(v0) => complex_potential_crossing(state, spec.t1, spec.t2, v0)?,
        },
        ClassOperatorKind::NonCrossing => match spec.v0 {
            None => {
                // 1 - theta(x(t1)) + theta(x(t2))
                let crossing = sub(
                    &heisenberg_theta(state, spec.t1, true),
                    &heisenberg_theta(state, spec.t2, true),
                );
                sub(state, &crossing)
            }
            Some(v0) => {
                // e^{i H0 (t2-t1)} e^{-i H0 (t2-t1) - V0 theta(-x)(t2-t1)} around t1
                let mut s = state.clone();
                s.free_step(spec.t1);
                let steps = ((spec.t2 - spec.t1) * (s.energy_estimate() + v0) / 0.05)
                    .ceil()
                    .max(8.0) as usize;
                let evo = engine::EvolutionSpec::new(
                    engine::Potential::AbsorbingStep { v0 },
                    (spec.t2 - spec.t1) / steps as f64,
                    steps,
                );
                let mut evolved = engine::evolve(&s, &evo)?;
                evolved.free_step(-spec.t2);
                evolved
            }
        },
        ClassOperatorKind::CrossRight => {
            let first = heisenberg_theta(state, spec.t1, true);
            heisenberg_theta(&first, spec.t2, false)
        }
        ClassOperatorKind::CrossLeft => {
            let first = heisenberg_theta(state, spec.t1, false);
            heisenberg_theta(&first, spec.t2, true)
        }
        ClassOperatorKind::CrossTwosidedHermitian => {
            // theta(-p) [P1 - P2] theta(-p) + theta(p) [Pbar1 - Pbar2] theta(p)
            let (plus, minus) = engine::momentum_sign_split(state);
            let right = sub(
                &heisenberg_theta(&minus, spec.t1, true),
                &heisenberg_theta(&minus, spec.t2, true),
            );
            let left = sub(
                &heisenberg_theta(&plus, spec.t2, true),
                &heisenberg_theta(&plus, spec.t1, true),
            );
            let (rp, rm) = engine::momentum_sign_split(&right);
            let (lp, lm) = engine::momentum_sign_split(&left);
            let _ = (rp, lm);
            let mut out = rm;
            for (v, w) in out.values.iter_mut().zip(&lp.values) {
                *v += *w;
            }
            out
        }
    };
    // aliasing guard: contraction-kind operators must not inject norm
    // (the non-crossing combination 1 - P1 + P2 has operator norm 2)
    let contraction = !matches!(spec.kind, ClassOperatorKind::NonCrossing);
    if contraction && out.norm_sqr() > norm0 * (1.0 + 1e-6) {
        return Err(Error::GridResolution(format!(
            "class operator grew the norm by {:e}",
            out.norm_sqr() / norm0 - 1.0
        )));
    }
    Ok(out)
}

/// Coarse-grained absorbing-potential crossing operator
/// e^{i H0 t} C_c^k |psi> = int_{t1}^{t2} dt e^{i H0 t} V e^{-i H0 t - V t}|psi>.
fn complex_potential_crossing(
    state: &SpatialField,
    t1: f64,
    t2: f64,
    v0: f64,
) -> Result<SpatialField> {
    let nodes = 24usize;
    let mut acc = state.clone();
    for v in acc.values.iter_mut() {
        *v = Complex64::default();
    }
    let rule = crate::quad::GaussLegendre::new(nodes);
    for (t, w) in rule.mapped(t1, t2) {
        let steps = ((t * (state.energy_estimate() + v0)) / 0.05).ceil().max(8.0) as usize;
        let evo = engine::EvolutionSpec::new(
            engine::Potential::AbsorbingStep { v0 },
            t / steps as f64,
            steps,
        );
        let mut s = engine::evolve(state, &evo)?;
        // multiply by V0 theta(-x)
        let dx = s.dx();
        for i in 0..s.len() {
            let x = s.x_at(i);
            let weight = if x.abs() < 0.25 * dx {
                0.5
            } else if x < 0.0 {
                1.0
            } else {
                0.0
            };
            s.values[i] *= v0 * weight;
        }
        s.free_step(-t);
        for (a, b) in acc.values.iter_mut().zip(&s.values) {
            *a += b * w;
        }
    }
    Ok(acc)
}

/// Interference diagnostics for one exhaustive set of crossing histories.
#[derive(Debug, Clone, Serialize)]
pub struct DecoherenceReport {
    /// Diagonal probabilities per crossing interval.
    pub probabilities: Vec<f64>,
    /// Non-crossing probability.
    pub p_nc: f64,
    /// Off-diagonal functional D_kj between crossing intervals (k < j).
    pub offdiag: Vec<Vec<(f64, f64)>>,
    /// q_k = Re <psi(tau)| C_k psi>: the linear-positivity values.
    pub q_values: Vec<f64>,
    /// d_m^2 bounds for adjacent interval edges.
    pub dm2_bounds: Vec<f64>,
    /// max over k != j of |D_kj|^2 / (p_k p_j).
    pub decoherence_measure: f64,
    /// Completeness defect |p_nc + sum p_k + 2 Re sum D - 1|.
    pub sum_rule_defect: f64,
}

impl DecoherenceReport {
    pub fn is_decoherent(&self, threshold: f64) -> bool {
        self.decoherence_measure < threshold
    }
}

/// Default threshold on |D_kj|^2/(p_k p_j).
pub const DECOHERENCE_THRESHOLD: f64 = 0.01;

/// Evaluate the decoherence functional for the exhaustive set
/// {crossing in interval k} union {never crossing} over `intervals`
/// (contiguous, ordered).
pub fn decoherence_functional(
    state: &SpatialField,
    intervals: &[(f64, f64)],
) -> Result<DecoherenceReport> {
    if intervals.is_empty() {
        return Err(Error::invalid("need at least one interval".to_string()));
    }
    let mut crossing_states = Vec::with_capacity(intervals.len());
    for &(t1, t2) in intervals {
        let spec = ClassOperatorSpec::new(ClassOperatorKind::CrossInterval, t1, t2)?;
        crossing_states.push(apply_class_operator(&spec, state)?);
    }
    // C_nc = 1 - theta(x(first)) + theta(x(last)) over the whole span
    let span = ClassOperatorSpec::new(
        ClassOperatorKind::NonCrossing,
        intervals[0].0,
        intervals[intervals.len() - 1].1,
    )?;
    let nc_state = apply_class_operator(&span, state)?;

    let n = crossing_states.len();
    let probabilities: Vec<f64> = crossing_states.iter().map(|s| s.norm_sqr()).collect();
    let p_nc = nc_state.norm_sqr();
    let mut offdiag = vec![vec![(0.0, 0.0); n]; n];
    let mut measure: f64 = 0.0;
    let mut offdiag_sum = Complex64::default();
    for k in 0..n {
        for j in 0..n {
            if j == k {
                continue;
            }
            let d = crossing_states[j].inner(&crossing_states[k]);
            offdiag[k][j] = (d.re, d.im);
            if j > k {
                offdiag_sum += d;
            }
            let denom = probabilities[k] * probabilities[j];
            if denom > 1e-20 {
                measure = measure.max(d.norm_sqr() / denom);
            }
        }
    }
    // nc cross terms enter the sum rule
    for cs in &crossing_states {
        offdiag_sum += nc_state.inner(cs);
    }
    let d_nc: Vec<Complex64> = crossing_states.iter().map(|s| s.inner(&nc_state)).collect();
    for (k, d) in d_nc.iter().enumerate() {
        let denom = probabilities[k] * p_nc;
        if denom > 1e-20 {
            measure = measure.max(d.norm_sqr() / denom);
        }
    }
    let q_values: Vec<f64> = crossing_states.iter().map(|s| state.inner(s).re).collect();
    let mut dm2_bounds = Vec::new();
    for w in intervals.windows(2) {
        dm2_bounds.push(dm2_bound(state, w[0].1, w[1].0.max(w[0].1 + 1e-9))?);
    }
    let total: f64 = probabilities.iter().sum::<f64>() + p_nc + 2.0 * offdiag_sum.re;
    Ok(DecoherenceReport {
        probabilities,
        p_nc,
        offdiag,
        q_values,
        dm2_bounds,
        decoherence_measure: measure,
        sum_rule_defect: (total - state.norm_sqr()).abs(),
    })
}

/// d_m^2 = <theta(-x(t1)) theta(x(t2)) theta(-x(t1))>: the probability of
/// being found in x < 0 at t1 and in x > 0 at t2.
pub fn dm2_bound(state: &SpatialField, t1: f64, t2: f64) -> Result<f64> {
    if !(t2 > t1) {
        return Err(Error::invalid("dm2 bound needs t2 > t1".to_string()));
    }
    let first = heisenberg_theta(state, t1, false);
    let second = heisenberg_theta(&first, t2, true);
    Ok(second.norm_sqr())
}

/// p_12 = <theta(x(t1)) theta(-x(t2)) theta(x(t1))>: cross without return.
pub fn p12_probability(state: &SpatialField, t1: f64, t2: f64) -> Result<f64> {
    if !(t2 > t1) {
        return Err(Error::invalid("p12 needs t2 > t1".to_string()));
    }
    let first = heisenberg_theta(state, t1, true);
    let second = heisenberg_theta(&first, t2, false);
    Ok(second.norm_sqr())
}

/// Wigner kernels of the sandwich operators:
/// W_P = theta(q) f(u)/(2 pi^2), W_D = theta(-q) f(u)/(2 pi^2) with
/// u = 2 q (p + m q / (t2 - t1)) and f(u) = pi/2 - Si(u).
pub fn wigner_kernels(p: f64, q: f64, t2_minus_t1: f64, mass: f64) -> Result<(f64, f64)> {
    if !(t2_minus_t1 > 0.0) {
        return Err(Error::invalid("wigner kernels need t2 > t1".to_string()));
    }
    let u = 2.0 * q * (p + mass * q / t2_minus_t1);
    let f = si_tail(u);
    let w = f / (2.0 * PI * PI);
    if q > 0.0 {
        Ok((w, 0.0))
    } else if q < 0.0 {
        Ok((0.0, w))
    } else {
        Ok((0.5 * w, 0.5 * w))
    }
}

/// Two-sided crossing probabilities from the momentum-sign-projected state:
/// p_k = <psi_-|P(t_k)-P(t_{k+1})|psi_-> - <psi_+|P(t_k)-P(t_{k+1})|psi_+>.
pub fn crossing_probabilities_twosided(
    state: &SpatialField,
    intervals: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let (plus, minus) = engine::momentum_sign_split(state);
    let theta_at = |field: &SpatialField, t: f64| -> Result<f64> {
        let mut f = field.clone();
        f.free_step(t);
        engine::expectation(&f, Observable::ThetaX)
    };
    let mut out = Vec::with_capacity(intervals.len());
    for &(t1, t2) in intervals {
        if !(t2 > t1) {
            return Err(Error::invalid("intervals need t2 > t1".to_string()));
        }
        let minus_part = theta_at(&minus, t1)? - theta_at(&minus, t2)?;
        let plus_part = theta_at(&plus, t1)? - theta_at(&plus, t2)?;
        out.push(minus_part - plus_part);
    }
    Ok(out)
}

/// Per-sector decoherence of two-sided crossing.
#[derive(Debug, Clone, Serialize)]
pub struct TwosidedReport {
    pub right_sector: DecoherenceReport,
    pub left_sector: Option<DecoherenceReport>,
    pub combined_measure: f64,
    pub probabilities: Vec<f64>,
}

/// Evaluate the decoherence functional separately in each momentum-sign
/// sector; the set decoheres iff each sector does.
pub fn twosided_decoherence(state: &SpatialField, intervals: &[(f64, f64)]) -> Result<TwosidedReport> {
    let (plus, minus) = engine::momentum_sign_split(state);
    let right_sector = decoherence_functional(&minus, intervals)?;
    let plus_mass = plus.norm_sqr();
    let left_sector = if plus_mass > 1e-12 * state.norm_sqr() {
        // mirror the positive sector so the same machinery applies
        let mut mirrored = plus.clone();
        let n = mirrored.len();
        for i in 0..n {
            // x -> -x on the periodic grid
            let j = (n - i) % n;
            mirrored.values[i] = plus.values[j];
        }
        Some(decoherence_functional(&mirrored, intervals)?)
    } else {
        None
    };
    let combined_measure = right_sector
        .decoherence_measure
        .max(left_sector.as_ref().map_or(0.0, |r| r.decoherence_measure));
    let probabilities = crossing_probabilities_twosided(state, intervals)?;
    Ok(TwosidedReport { right_sector, left_sector, combined_measure, probabilities })
}

impl SpatialField {
    /// Mean kinetic energy estimate used for evolution step control.
    pub(crate) fn energy_estimate(&self) -> f64 {
        let mut hat = self.values.clone();
        engine::fft_forward(&mut hat);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phys::{GaussianPacket, PhysParams};
    use crate::quad::GaussLegendre;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;

    const PARAMS: PhysParams = PhysParams { mass: 1.0, hbar: 1.0 };

    fn fast_packet() -> GaussianPacket {
        // |p0| sigma = 10, E = 50
        GaussianPacket::new(10.0, -10.0, 1.0, PARAMS).unwrap()
    }

    fn field_of(packet: &GaussianPacket) -> SpatialField {
        SpatialField::from_packet(packet, -60.0, 60.0, 4096).unwrap()
    }

    fn random_state(rng: &mut impl Rng) -> SpatialField {
        let mut field = SpatialField::new(-60.0, 60.0, 2048, PARAMS).unwrap();
        let mut packets = Vec::new();
        for _ in 0..3 {
            let q0: f64 = rng.gen_range(-8.0..8.0);
            let p0: f64 = rng.gen_range(-6.0..6.0);
            let sigma: f64 = rng.gen_range(0.6..2.0);
            let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            packets.push((GaussianPacket::new(q0, p0, sigma, PARAMS).unwrap(), amp));
        }
        field.fill(|x| {
            packets
                .iter()
                .map(|(p, a)| a * p.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact))
                .sum()
        });
        let norm = field.norm_sqr().sqrt();
        for v in field.values.iter_mut() {
            *v /= norm;
        }
        field
    }

    #[test]
    fn completeness_reproduces_unit_evolution() {
        // C_nc + sum_k C_c^k = identity at reference time
        let state = field_of(&fast_packet());
        let intervals = [(0.4, 0.8), (0.8, 1.2), (1.2, 1.6)];
        let mut total = apply_class_operator(
            &ClassOperatorSpec::new(ClassOperatorKind::NonCrossing, 0.4, 1.6).unwrap(),
            &state,
        )
        .unwrap();
        for &(t1, t2) in &intervals {
            let c = apply_class_operator(
                &ClassOperatorSpec::new(ClassOperatorKind::CrossInterval, t1, t2).unwrap(),
                &state,
            )
            .unwrap();
            for (v, w) in total.values.iter_mut().zip(&c.values) {
                *v += *w;
            }
        }
        let defect = sub(&total, &state).norm_sqr().sqrt();
        assert!(defect < 1e-8, "completeness defect {defect}");
    }

    #[test]
    fn crossing_identity_on_random_states() {
        // (P(t1) - P(t2)) = Pbar(t2) P(t1) - P(t2) Pbar(t1) exactly
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let state = random_state(&mut rng);
            let (t1, t2) = (0.5, 1.3);
            let lhs = sub(
                &heisenberg_theta(&state, t1, true),
                &heisenberg_theta(&state, t2, true),
            );
            let right = apply_class_operator(
                &ClassOperatorSpec::new(ClassOperatorKind::CrossRight, t1, t2).unwrap(),
                &state,
            )
            .unwrap();
            let left = apply_class_operator(
                &ClassOperatorSpec::new(ClassOperatorKind::CrossLeft, t1, t2).unwrap(),
                &state,
            )
            .unwrap();
            let rhs = sub(&right, &left);
            let defect = sub(&lhs, &rhs).norm_sqr().sqrt();
            assert!(defect < 1e-8, "identity defect {defect}");
        }
    }

    #[test]
    fn deep_packet_has_no_crossing_amplitude() {
        let packet = GaussianPacket::new(30.0, -1.0, 1.0, PARAMS).unwrap();
        let state = field_of(&packet);
        let c = apply_class_operator(
            &ClassOperatorSpec::new(ClassOperatorKind::CrossInterval, 0.1, 0.2).unwrap(),
            &state,
        )
        .unwrap();
        assert!(c.norm_sqr() < 1e-10);
    }

    #[test]
    fn single_packet_intervals_decohere_and_match_current() {
        let packet = fast_packet();
        let state = field_of(&packet);
        // crossing at t* = 1; intervals of width 0.5 with E Delta = 25
        let intervals = [(0.25, 0.75), (0.75, 1.25), (1.25, 1.75)];
        let report = decoherence_functional(&state, &intervals).unwrap();
        assert!(report.decoherence_measure < DECOHERENCE_THRESHOLD,
            "measure {}", report.decoherence_measure);
        assert!(report.sum_rule_defect < 1e-8);
        let rule = GaussLegendre::new(64);
        for (k, &(t1, t2)) in intervals.iter().enumerate() {
            let j_int = rule.integrate(t1, t2, |t| packet.current_at_origin(t));
            if j_int > 0.05 {
                let rel = (report.probabilities[k] - j_int).abs() / j_int;
                assert!(rel < 0.03, "interval {k}: p = {} vs int J = {j_int}", report.probabilities[k]);
                // under decoherence q_k matches p_k
                assert!((report.q_values[k] - report.probabilities[k]).abs() < 0.02);
            }
        }
    }

    #[test]
    fn backflow_state_flagged_not_decoherent() {
        // near-extremal flux eigenstate under a broad envelope
        let t = 1.0;
        let res = crate::arrival::backflow_eigenproblem(
            t,
            200,
            crate::arrival::backflow_default_p_max(t, 1.0),
            PARAMS,
        )
        .unwrap();
        let mut field = SpatialField::new(-400.0, 400.0, 16384, PARAMS).unwrap();
        crate::arrival::backflow_extremal_state(&res, 20.0, &mut field).unwrap();
        let report = decoherence_functional(&field, &[(1e-9, t)]).unwrap();
        // q (the integrated current) is negative, so |D| >= p and the
        // histories cannot decohere
        assert!(report.q_values[0] < -0.02, "window current {}", report.q_values[0]);
        assert!(!report.is_decoherent(DECOHERENCE_THRESHOLD),
            "measure {}", report.decoherence_measure);
    }

    #[test]
    fn orthogonal_superposition_with_separated_windows_decoheres() {
        // two packets crossing in well-separated windows
        let a = GaussianPacket::new(10.0, -10.0, 1.0, PARAMS).unwrap();
        let b = GaussianPacket::new(30.0, -10.0, 1.0, PARAMS).unwrap();
        let mut field = SpatialField::new(-60.0, 90.0, 8192, PARAMS).unwrap();
        field.fill(|x| {
            (a.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact)
                + b.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact))
                / 2.0f64.sqrt()
        });
        let intervals = [(0.5, 1.5), (2.5, 3.5)];
        let report = decoherence_functional(&field, &intervals).unwrap();
        let (p0, p1) = (report.probabilities[0], report.probabilities[1]);
        assert!(p0 > 0.3 && p1 > 0.3, "p = {p0}, {p1}");
        let d01 = Complex64::new(report.offdiag[0][1].0, report.offdiag[0][1].1);
        assert!(d01.norm() < 0.02 * (p0 * p1).sqrt(), "D01 = {}", d01.norm());
    }

    #[test]
    fn dm2_examples() {
        // broad packet straddling the origin at t1
        let packet = fast_packet();
        let state = field_of(&packet);
        let t1 = 1.0; // center reaches x = 0
        let delta = 1.0;
        let d = dm2_bound(&state, t1, t1 + delta).unwrap();
        // asymptotic estimate (2 pi^3)^{-1/2} / (2 |p0| sigma): the tail
        // integral int_0^inf (pi/2 - Si) du = 1 fixes the constant
        let expected = 1.0 / (2.0 * PI.powi(3)).sqrt() / (2.0 * packet.p0.abs() * packet.sigma);
        assert!(
            (d - expected).abs() / expected < 0.3,
            "dm2 = {d}, expected {expected}"
        );
        // packet still deep in x > 0 at t1: nothing to re-cross
        let early = dm2_bound(&state, 0.2, 0.7).unwrap();
        assert!(early < 1e-4, "early dm2 = {early}");
        // p12 is about 1/2 for the straddling packet and a wide interval
        let p12 = p12_probability(&state, t1, t1 + delta).unwrap();
        assert!((p12 - 0.5).abs() < 0.05, "p12 = {p12}");
    }

    #[test]
    fn wigner_kernel_limits_and_phase_space_route() {
        // f(0) = pi/2; f(-inf) = pi; f(+inf) = 0
        assert_abs_diff_eq!(si_tail(0.0), PI / 2.0, epsilon = 1e-12);
        assert!((si_tail(-1e4) - PI).abs() < 1e-3);
        assert!(si_tail(1e4).abs() < 1e-3);
        let (wp, wd) = wigner_kernels(-1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(wp > 0.0 && wd == 0.0);
        let (wp2, wd2) = wigner_kernels(-1.0, -0.5, 1.0, 1.0).unwrap();
        assert!(wp2 == 0.0 && wd2 > 0.0);

        // phase-space integrals reproduce the grid sandwich expectations;
        // the sandwich needs a fine grid since the sharp cut carries high-k
        // content
        let packet = fast_packet();
        let state = SpatialField::from_packet(&packet, -100.0, 100.0, 16384).unwrap();
        let (t1, delta) = (1.0, 1.0);
        let d_grid = dm2_bound(&state, t1, t1 + delta).unwrap();
        let p_grid = p12_probability(&state, t1, t1 + delta).unwrap();
        // 2 pi int W_X W0(t1) over the packet support
        let rule = GaussLegendre::new(24);
        let sp = 1.0 / (2.0 * packet.sigma);
        let center = packet.center(t1);
        let (q_lo, q_hi) = (center - 8.0 * packet.sigma, center + 8.0 * packet.sigma);
        // panel count resolves the f(u) oscillation du/dq ~ 2|p0| + 4|q|/dt
        let q_panels = 160;
        let hq = (q_hi - q_lo) / q_panels as f64;
        let integrate = |want_p12: bool| -> f64 {
            let mut acc = 0.0;
            for kq in 0..q_panels {
                acc += rule.integrate(q_lo + kq as f64 * hq, q_lo + (kq + 1) as f64 * hq, |q| {
                    rule.integrate(packet.p0 - 8.0 * sp, packet.p0 + 8.0 * sp, |p| {
                        let (wp, wd) = wigner_kernels(p, q, delta, 1.0).unwrap();
                        let w0 = packet.wigner(p, q, t1);
                        2.0 * PI * if want_p12 { wp } else { wd } * w0
                    })
                });
            }
            acc
        };
        let p_ps = integrate(true);
        let d_ps = integrate(false);
        assert!((p_ps - p_grid).abs() / p_grid < 0.05, "p12 {p_ps} vs {p_grid}");
        assert!((d_ps - d_grid).abs() / d_grid < 0.05, "dm2 {d_ps} vs {d_grid}");
    }

    #[test]
    fn mirror_superposition_crossing_counts_both_packets() {
        // x -> -x, p -> -p image pair: J = 0 identically, yet the crossing
        // probability is twice the single-packet value
        let single = GaussianPacket::new(10.0, -4.0, 1.0, PARAMS).unwrap();
        let mirror = GaussianPacket::new(-10.0, 4.0, 1.0, PARAMS).unwrap();
        let mut field = SpatialField::new(-80.0, 80.0, 4096, PARAMS).unwrap();
        field.fill(|x| {
            (single.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact)
                + mirror.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact))
                / 2.0f64.sqrt()
        });
        // raw current vanishes by symmetry
        let mut evolved = field.clone();
        evolved.free_step(2.5);
        let j = engine::expectation(&evolved, Observable::CurrentAt0).unwrap();
        assert!(j.abs() < 1e-8, "raw current {j}");

        let intervals = [(2.0, 3.0)];
        let p = crossing_probabilities_twosided(&field, &intervals).unwrap()[0];
        // each branch carries mass 1/2, so twice the per-branch arrival
        // probability equals the full single-packet value
        let single_field = field_of(&single);
        let p_single = crossing_probabilities_twosided(&single_field, &intervals).unwrap()[0];
        assert!(
            (p - p_single).abs() < 0.03 * p_single,
            "p = {p} vs per-branch doubling {p_single}"
        );

        // a relative phase between the sectors does not move the answer
        let mut phased = SpatialField::new(-80.0, 80.0, 4096, PARAMS).unwrap();
        phased.fill(|x| {
            (single.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact)
                + Complex64::from_polar(1.0, 1.1)
                    * mirror.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact))
                / 2.0f64.sqrt()
        });
        let p_phased = crossing_probabilities_twosided(&phased, &intervals).unwrap()[0];
        assert!((p_phased - p).abs() < 1e-6, "phase dependence {}", (p_phased - p).abs());
    }

    #[test]
    fn twosided_reduces_to_onesided_for_negative_momentum() {
        let packet = fast_packet();
        let state = field_of(&packet);
        let intervals = [(0.5, 1.0), (1.0, 1.5)];
        let two = twosided_decoherence(&state, &intervals).unwrap();
        assert!(two.left_sector.is_none());
        let one = decoherence_functional(&state, &intervals).unwrap();
        // with an empty positive sector the two-sided probabilities reduce to
        // the one-sided linear expressions q_k = <psi| P(t1) - P(t2) |psi>
        for (&(t1, t2), p) in intervals.iter().zip(&two.probabilities) {
            let mut f1 = state.clone();
            f1.free_step(t1);
            let mut f2 = state.clone();
            f2.free_step(t2);
            let q = engine::expectation(&f1, Observable::ThetaX).unwrap()
                - engine::expectation(&f2, Observable::ThetaX).unwrap();
            assert!((p - q).abs() < 1e-6, "p = {p} vs q = {q}");
        }
        assert!((two.combined_measure - one.decoherence_measure).abs() < 1e-12);
    }

    #[test]
    fn twosided_superposition_of_decoherent_sectors_decoheres() {
        let single = GaussianPacket::new(10.0, -10.0, 1.0, PARAMS).unwrap();
        let mirror = GaussianPacket::new(-10.0, 10.0, 1.0, PARAMS).unwrap();
        let mut field = SpatialField::new(-80.0, 80.0, 8192, PARAMS).unwrap();
        field.fill(|x| {
            (single.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact)
                + mirror.position_amplitude(x, 0.0, crate::phys::SpreadMode::Exact))
                / 2.0f64.sqrt()
        });
        let intervals = [(0.5, 1.0), (1.0, 1.5)];
        let report = twosided_decoherence(&field, &intervals).unwrap();
        assert!(report.left_sector.is_some());
        assert!(report.combined_measure < 0.02, "measure {}", report.combined_measure);
    }
}
