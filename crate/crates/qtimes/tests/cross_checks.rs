//! Cross-module oracles: closed forms checked against the spectral grid
//! engine with independent discretizations.

use num_complex::Complex64;
use qtimes::engine::{self, EvolutionSpec, Observable, Potential, SpatialField};
use qtimes::phys::{GaussianPacket, PhysParams, SpreadMode};
use qtimes::propagators;
use qtimes::pulsed::ProjectionSchedule;
use qtimes::quad::GaussLegendre;

const PARAMS: PhysParams = PhysParams { mass: 1.0, hbar: 1.0 };

/// Delta-potential propagator against grid evolution through a narrow tall
/// square barrier, extrapolated to zero width over three widths.
#[test]
fn delta_kernel_matches_square_barrier_extrapolation() {
    let lam = 1.0;
    let t = 2.0;
    // narrow packet standing in for the source point at x0 = -3
    let source = GaussianPacket::new(-3.0, 0.0, 0.2, PARAMS).unwrap();
    let x1 = 3.0;

    // prediction: int dx0 g_delta(x1, t | x0) psi(x0)
    let rule = GaussLegendre::new(96);
    let predicted = rule.integrate_complex(-3.0 - 8.0 * 0.2, -3.0 + 8.0 * 0.2, |x0| {
        propagators::delta_kernel(x1, x0, t, lam, PARAMS).unwrap()
            * source.position_amplitude(x0, 0.0, SpreadMode::Exact)
    });

    // grid evolution through barriers of width w and height lam/w; widths
    // snap to odd cell counts so the covered strength is exactly lam
    let dx = 96.0 / 4096.0;
    let evolve_through = |cells: usize| -> Complex64 {
        let w = cells as f64 * dx;
        let field = SpatialField::from_packet(&source, -48.0, 48.0, 4096).unwrap();
        let dt = 2.5e-3;
        let steps = (t / dt).round() as usize;
        let spec = EvolutionSpec::new(Potential::Delta { lambda: lam, width: w }, dt, steps);
        let out = engine::evolve(&field, &spec).unwrap();
        let idx = ((x1 - out.x_min) / out.dx()).round() as usize;
        out.values[idx]
    };
    let cells = [5usize, 11, 21];
    let values: Vec<Complex64> = cells.iter().map(|&c| evolve_through(c)).collect();
    // quadratic Lagrange extrapolation of g(w) to w = 0
    let ws: Vec<f64> = cells.iter().map(|&c| c as f64 * dx).collect();
    let mut extrapolated = Complex64::default();
    for i in 0..3 {
        let mut li = 1.0;
        for j in 0..3 {
            if j != i {
                li *= -ws[j] / (ws[i] - ws[j]);
            }
        }
        extrapolated += values[i] * li;
    }
    let rel = (extrapolated - predicted).norm() / predicted.norm();
    assert!(rel < 0.02, "delta kernel vs barrier extrapolation: rel = {rel}");
}

/// Transmission amplitude at E = V0 against the grid reflection through the
/// absorbing step: survivors at late times carry |R|^2 = |T - 1|^2.
#[test]
fn step_scattering_matches_grid_reflection_at_matched_energy() {
    let p0 = -3.0;
    let e = p0 * p0 / 2.0;
    let v0 = e;
    let (t_amp, r_amp) = propagators::step_scattering_amplitudes(p0, v0, PARAMS).unwrap();
    // T = 2 / (1 + (1 + i)^{1/2}) at E = V0
    let expected_t = 2.0 / (1.0 + Complex64::new(1.0, 1.0).sqrt());
    assert!((t_amp - expected_t).norm() < 1e-14);

    let packet = GaussianPacket::new(34.0, p0, 4.0, PARAMS).unwrap();
    let field = SpatialField::from_packet(&packet, -60.0, 100.0, 8192).unwrap();
    // long enough for the slow momentum tail to finish its transit
    let tau = 26.0;
    let dt = 5e-3;
    let spec = EvolutionSpec::new(Potential::AbsorbingStep { v0 }, dt, (tau / dt).round() as usize);
    let out = engine::evolve(&field, &spec).unwrap();
    let reflected = engine::expectation(&out, Observable::ThetaX).unwrap();
    let rel = (reflected - r_amp.norm_sqr()).abs() / r_amp.norm_sqr();
    assert!(
        rel < 0.02,
        "grid reflection {reflected} vs |R|^2 = {} (rel {rel})",
        r_amp.norm_sqr()
    );
}

/// Projection-schedule survival against the absorbing-potential prediction
/// with the V0 eps = 4/3 correspondence.
#[test]
fn projected_survival_matches_absorbing_prediction() {
    let packet = GaussianPacket::new(10.0, -10.0, 1.0, PARAMS).unwrap();
    let eps = 0.08f64;
    let tau = 2.0f64;
    let field = SpatialField::from_packet(&packet, -42.0, 42.0, 4096).unwrap();
    let n_proj = (tau / eps).round() as usize - 1;
    let schedule = ProjectionSchedule::uniform(eps, n_proj).unwrap();
    let spec = EvolutionSpec::new(Potential::None, eps, 0).with_schedule(schedule);
    let projected = engine::evolve(&field, &spec).unwrap();

    let v0 = 4.0 / (3.0 * eps);
    let dt = 1e-3;
    let pot_spec = EvolutionSpec::new(Potential::AbsorbingStep { v0 }, dt, (tau / dt).round() as usize);
    let absorbed = engine::evolve(&field, &pot_spec).unwrap();

    let n_pulsed = projected.norm_sqr();
    let n_potential = absorbed.norm_sqr();
    assert!(
        (n_pulsed - n_potential).abs() < 0.02,
        "survival {n_pulsed} vs absorbing prediction {n_potential}"
    );
}

/// The first-crossing composition against the grid-engine transmitted
/// amplitude deep in x < 0.
#[test]
fn pdx_composition_matches_grid_amplitude() {
    let packet = GaussianPacket::new(10.0, -3.0, 1.0, PARAMS).unwrap();
    let (v0, x1, tau) = (0.5, -20.0, 12.0);
    let composed =
        propagators::pdx_compose_first_crossing(&packet, v0, x1, tau, 96, propagators::PdxMode::Exact)
            .unwrap();
    let field = SpatialField::from_packet(&packet, -96.0, 96.0, 8192).unwrap();
    let dt = 2e-3;
    let spec = EvolutionSpec::new(Potential::AbsorbingStep { v0 }, dt, (tau / dt).round() as usize);
    let out = engine::evolve(&field, &spec).unwrap();
    let idx = ((x1 - out.x_min) / out.dx()).round() as usize;
    let grid_amp = out.values[idx];
    let rel = (composed - grid_amp).norm() / grid_amp.norm();
    // both routes carry ~1% discretization error of their own; the tight 2%
    // comparison against the scattering synthesis lives in the unit suite
    assert!(rel < 0.04, "PDX {composed} vs grid {grid_amp} (rel {rel})");
}

/// Absorbing-step survival loss against the arrival-module distribution.
#[test]
fn norm_loss_matches_arrival_distribution() {
    let packet = GaussianPacket::new(25.0, -5.0, 1.0, PARAMS).unwrap();
    let v0 = 0.5;
    let field = SpatialField::from_packet(&packet, -80.0, 80.0, 4096).unwrap();
    let dt = 2e-3;
    let (t1, t2) = (4.0, 7.0);
    let run_to = |t: f64| {
        let spec = EvolutionSpec::new(Potential::AbsorbingStep { v0 }, dt, (t / dt).round() as usize);
        engine::evolve(&field, &spec).unwrap().norm_sqr()
    };
    let loss = run_to(t1) - run_to(t2);
    let rule = GaussLegendre::new(48);
    let pi_integral = rule.integrate(t1, t2, |t| {
        qtimes::arrival::complex_potential_pi(&packet, v0, t).unwrap().0
    });
    assert!(
        (loss - pi_integral).abs() / pi_integral < 0.02,
        "norm loss {loss} vs distribution integral {pi_integral}"
    );
}

/// Grid-evaluated current against the analytic Gaussian current, and its
/// resolution-failure contract.
#[test]
fn grid_current_matches_analytic_and_reports_coarse_grids() {
    let packet = GaussianPacket::new(10.0, -3.0, 1.0, PARAMS).unwrap();
    let mut field = SpatialField::from_packet(&packet, -60.0, 60.0, 4096).unwrap();
    field.free_step(10.0 / 3.0);
    let j = qtimes::arrival::current_j_field(&field).unwrap();
    let exact = qtimes::arrival::current_j(&packet, 10.0 / 3.0);
    assert!((j - exact).abs() < 1e-4, "grid current {j} vs analytic {exact}");

    // a grid that cannot resolve the oscillation makes the two derivative
    // estimates disagree
    let fast = GaussianPacket::new(4.0, -40.0, 0.5, PARAMS).unwrap();
    let mut coarse = SpatialField::new(-16.0, 16.0, 128, PARAMS).unwrap();
    coarse.fill(|x| fast.position_amplitude(x, 0.1, SpreadMode::Exact));
    assert!(qtimes::arrival::current_j_field(&coarse).is_err());
}

/// The absorbing-potential realization of the coarse crossing operator
/// approaches the sharp projector form once E >> V0 >> 1/Delta.
#[test]
fn complex_potential_class_operator_matches_sharp_form() {
    use qtimes::histories::{apply_class_operator, ClassOperatorKind, ClassOperatorSpec};
    let packet = GaussianPacket::new(10.0, -10.0, 1.0, PARAMS).unwrap();
    let state = SpatialField::from_packet(&packet, -60.0, 60.0, 2048).unwrap();
    let (t1, t2) = (0.5, 1.5);
    let sharp = apply_class_operator(
        &ClassOperatorSpec::new(ClassOperatorKind::CrossInterval, t1, t2).unwrap(),
        &state,
    )
    .unwrap();
    let spec =
        ClassOperatorSpec::new(ClassOperatorKind::CrossInterval, t1, t2).unwrap().with_potential(8.0);
    let realized = apply_class_operator(&spec, &state).unwrap();
    let mut diff2 = 0.0;
    for (a, b) in realized.values.iter().zip(&sharp.values) {
        diff2 += (a - b).norm_sqr() * state.dx();
    }
    let rel = diff2.sqrt() / sharp.norm_sqr().sqrt();
    assert!(rel < 0.25, "realization deviates by {rel}");
    // crossing probabilities agree at the resolution-function level
    let (p_sharp, p_real) = (sharp.norm_sqr(), realized.norm_sqr());
    assert!(
        (p_sharp - p_real).abs() / p_sharp < 0.1,
        "p {p_real} vs sharp {p_sharp}"
    );
}

/// The 1D engine rejects the clock coupling; it lives on the tensor grid.
#[test]
fn clock_coupling_rejected_in_one_dimension() {
    let packet = GaussianPacket::new(10.0, -3.0, 1.0, PARAMS).unwrap();
    let field = SpatialField::from_packet(&packet, -60.0, 60.0, 1024).unwrap();
    let spec = EvolutionSpec::new(Potential::ClockCoupled { lambda: 0.5 }, 1e-3, 10);
    assert!(engine::evolve(&field, &spec).is_err());
}

/// Positive distribution kinds reject negative samples.
#[test]
fn arrival_distribution_kind_validation() {
    use qtimes::arrival::{ArrivalDistribution, DistributionKind};
    use qtimes::phys::TimeGrid;
    let grid = TimeGrid::new(0.0, 1.0, 3).unwrap();
    assert!(ArrivalDistribution::new(grid, vec![0.1, -0.2, 0.1], DistributionKind::Kijowski).is_err());
    assert!(ArrivalDistribution::new(grid, vec![0.1, -0.2, 0.1], DistributionKind::CurrentJ).is_ok());
    assert!(TimeGrid::new(1.0, 0.5, 3).is_err());
    assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
}
