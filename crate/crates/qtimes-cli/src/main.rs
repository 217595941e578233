//! Declarative experiment runner: parses a key-value config, dispatches to
//! the library modules, and writes CSV/JSON artifacts plus a checksum
//! manifest. Identical configs reproduce byte-identical outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical-validation
//! failure.

mod config;
mod output;

use clap::{Parser, Subcommand};
use config::Config;
use output::OutputDir;
use qtimes::engine::ClockRegion;
use qtimes::phys::{GaussianPacket, PhysParams, TimeGrid};
use qtimes::{acceptance, arrival, clocks, opensys, pulsed};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qtimes", about = "quantum arrival/dwell-time experiment runner", version)]
struct Cli {
    /// Key-value configuration file (key = value per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Inline overrides, key=value; applied after the config file.
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Lattice sawtooth f_P, the piecewise model, f_V and S(t).
    Pulsed,
    /// Pulsed-vs-continuous equivalence report.
    Equivalence,
    /// Arrival-time distributions (current, absorbing, Kijowski, kinetic).
    Arrival,
    /// Backflow flux-matrix eigenproblem.
    Backflow,
    /// Decoherent-histories report for an incoming packet.
    Histories,
    /// Quantum-Brownian-motion currents and first passage.
    Qbm,
    /// Weak-coupling clock pointer distribution.
    Clock,
    /// Semiclassical dwell-time distribution.
    Dwell,
    /// Run the acceptance suite; exit 0 iff every criterion passes.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    qtimes_thread_cap();
    let cfg = match Config::load(cli.config.as_deref(), &cli.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            emit_error(2, &e.to_string());
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Validate => return run_validate(),
        cmd => dispatch(cmd, &cfg, &cli.out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Config(msg)) => {
            emit_error(2, &msg);
            ExitCode::from(2)
        }
        Err(RunError::Numerical(msg)) => {
            emit_error(3, &msg);
            ExitCode::from(3)
        }
    }
}

fn qtimes_thread_cap() {
    if let Ok(raw) = std::env::var("QTIMES_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn emit_error(code: u8, message: &str) {
    #[derive(Serialize)]
    struct ErrorReport<'a> {
        error: &'a str,
        exit_code: u8,
    }
    let report = ErrorReport { error: message, exit_code: code };
    eprintln!("{}", serde_json::to_string(&report).unwrap());
}

enum RunError {
    Config(String),
    Numerical(String),
}

impl From<config::ConfigError> for RunError {
    fn from(e: config::ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<qtimes::Error> for RunError {
    fn from(e: qtimes::Error) -> Self {
        RunError::Numerical(e.to_string())
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Config(format!("io: {e}"))
    }
}

fn packet_from(cfg: &Config, default_p0: f64) -> Result<GaussianPacket, RunError> {
    let mass = cfg.positive_f64("mass", 1.0)?;
    let hbar = cfg.positive_f64("hbar", 1.0)?;
    let params = PhysParams::new(mass, hbar)?;
    Ok(GaussianPacket::new(
        cfg.f64("q0", 10.0)?,
        cfg.f64("p0", default_p0)?,
        cfg.positive_f64("sigma", 1.0)?,
        params,
    )?)
}

fn dispatch(cmd: Command, cfg: &Config, out_dir: &PathBuf) -> Result<(), RunError> {
    let mut out = OutputDir::create(out_dir)?;
    match cmd {
        Command::Pulsed => run_pulsed(cfg, &mut out)?,
        Command::Equivalence => run_equivalence(cfg, &mut out)?,
        Command::Arrival => run_arrival(cfg, &mut out)?,
        Command::Backflow => run_backflow(cfg, &mut out)?,
        Command::Histories => run_histories(cfg, &mut out)?,
        Command::Qbm => run_qbm(cfg, &mut out)?,
        Command::Clock => run_clock(cfg, &mut out)?,
        Command::Dwell => run_dwell(cfg, &mut out)?,
        Command::Validate => unreachable!(),
    }
    out.write_manifest(&format!("{cmd:?}").to_lowercase())?;
    Ok(())
}

fn run_pulsed(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let n_max = cfg.usize("n_max", 20)?;
    let lattice_dx = cfg.positive_f64("lattice_dx", 1e-3)?;
    let s_samples = cfg.usize("s_samples", 16)?;
    let v0_eps = cfg.positive_f64("v0_epsilon", 4.0 / 3.0)?;
    let table = pulsed::gp_lattice_recursion(n_max, lattice_dx, s_samples)?;
    let model = pulsed::SawtoothModel::new(1.0, 1.0)?;
    out.write_csv(
        "fp_lattice.csv",
        &["t", "f_P_lattice", "f_P_sawtooth", "f_V", "S"],
        table.samples.iter().map(|&(s, fp)| {
            let fv = pulsed::fv_factor(s, v0_eps);
            vec![s, fp, pulsed::sawtooth_fp(s, &model), fv, pulsed::s_function(s, fp, v0_eps)]
        }),
    )?;
    out.tag_figure("fp_lattice.csv", "fig4_2");
    out.tag_figure("fp_lattice.csv", "fig4_3");
    out.tag_figure("fp_lattice.csv", "fig4_4");

    #[derive(Serialize)]
    struct PeakError {
        k: usize,
        peak: f64,
        expected: f64,
        rel_error: f64,
        trough: f64,
        trough_rel_error: f64,
    }
    #[derive(Serialize)]
    struct Summary {
        n_max: usize,
        lattice_dx: f64,
        v0_epsilon: f64,
        peaks: Vec<PeakError>,
    }
    let peaks: Vec<PeakError> = (1..=n_max)
        .map(|k| {
            let expected = 1.0 / (k as f64 + 1.0);
            let trough_expected = 1.0 / (2.0 * k as f64);
            PeakError {
                k,
                peak: table.peaks[k],
                expected,
                rel_error: (table.peaks[k] - expected).abs() / expected,
                trough: table.troughs[k],
                trough_rel_error: (table.troughs[k] - trough_expected).abs() / trough_expected,
            }
        })
        .collect();
    out.write_json("pulsed_summary.json", &Summary { n_max, lattice_dx, v0_epsilon: v0_eps, peaks })?;
    Ok(())
}

fn run_equivalence(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let packet = packet_from(cfg, -10.0)?;
    let epsilon = cfg.positive_f64("epsilon", 0.08)?;
    let v0 = cfg.positive_f64("v0", 4.0 / (3.0 * epsilon))?;
    let tau = cfg.positive_f64("tau", 2.0)?;
    let grid = pulsed::EquivalenceGrid::for_packet(&packet, tau);
    let report = pulsed::equivalence_test(&packet, epsilon, v0, tau, &grid)?;
    #[derive(Serialize)]
    struct Report {
        epsilon: f64,
        v0: f64,
        tau: f64,
        max_wavefn_deviation: f64,
        reflection_prob_pulsed: f64,
        reflection_prob_potential: f64,
    }
    out.write_json(
        "equivalence.json",
        &Report {
            epsilon,
            v0,
            tau,
            max_wavefn_deviation: report.max_wavefn_deviation,
            reflection_prob_pulsed: report.reflection_prob_pulsed,
            reflection_prob_potential: report.reflection_prob_potential,
        },
    )?;
    Ok(())
}

fn run_arrival(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let packet = packet_from(cfg, -3.0)?;
    let v0 = cfg.positive_f64("v0", 0.5)?;
    let t_start = cfg.positive_f64("t_start", 0.1)?;
    let t_end = cfg.positive_f64("t_end", 12.0)?;
    let n = cfg.usize("n_samples", 121)?;
    let grid = TimeGrid::new(t_start, t_end, n)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for t in grid.times() {
        let j = arrival::current_j(&packet, t);
        let (pi_c, _) = arrival::complex_potential_pi(&packet, v0, t)?;
        let kij = arrival::kijowski_pi(&packet, t);
        let (_, zn) = arrival::zeno_regime_pi(&packet, t)?;
        rows.push(vec![t, j, pi_c, kij, zn]);
    }
    out.write_csv(
        "arrival.csv",
        &["t", "J", "Pi_complex", "Pi_kijowski", "Pi_N"],
        rows.into_iter(),
    )?;
    out.tag_figure("arrival.csv", "fig5_4");
    Ok(())
}

fn run_backflow(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let n_modes = cfg.usize("modes", 200)?;
    let t_horizon = cfg.positive_f64("t_horizon", 1.0)?;
    let mass = cfg.positive_f64("mass", 1.0)?;
    let params = PhysParams::natural(mass)?;
    let p_max = cfg.positive_f64("p_max", arrival::backflow_default_p_max(t_horizon, mass))?;
    let result = arrival::backflow_eigenproblem(t_horizon, n_modes, p_max, params)?;
    #[derive(Serialize)]
    struct Report {
        lambda_min: f64,
        n_modes: usize,
        t_horizon: f64,
        p_max: f64,
        hermiticity_residual: f64,
    }
    out.write_json(
        "backflow.json",
        &Report {
            lambda_min: result.lambda_min,
            n_modes,
            t_horizon,
            p_max,
            hermiticity_residual: result.hermiticity_residual,
        },
    )?;
    out.write_csv(
        "backflow_eigenvector.csv",
        &["p", "coefficient"],
        result
            .nodes
            .iter()
            .zip(&result.eigenvector)
            .map(|(&p, &c)| vec![p, c]),
    )?;
    Ok(())
}

fn run_histories(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let packet = packet_from(cfg, -10.0)?;
    let n_intervals = cfg.usize("n_intervals", 3)?.max(1);
    let t_first = cfg.positive_f64("t_first", 0.25)?;
    let dt = cfg.positive_f64("interval_width", 0.5)?;
    let half = cfg.positive_f64("grid_half_width", 60.0)?;
    let n_grid = cfg.usize("grid_points", 4096)?;
    let state = qtimes::engine::SpatialField::from_packet(&packet, -half, half, n_grid)?;
    let intervals: Vec<(f64, f64)> = (0..n_intervals)
        .map(|k| (t_first + k as f64 * dt, t_first + (k + 1) as f64 * dt))
        .collect();
    let report = qtimes::histories::decoherence_functional(&state, &intervals)?;
    out.write_json("decoherence.json", &report)?;
    out.write_csv(
        "interval_probabilities.csv",
        &["t1", "t2", "p_k", "q_k"],
        intervals
            .iter()
            .zip(report.probabilities.iter().zip(&report.q_values))
            .map(|(&(t1, t2), (&p, &q))| vec![t1, t2, p, q]),
    )?;
    Ok(())
}

fn run_qbm(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let packet = packet_from(cfg, -2.0)?;
    let d = cfg.positive_f64("diffusion", 0.01)?;
    let gamma = cfg.f64("gamma", 0.0)?;
    let qbm = opensys::QbmParams::new(d, gamma, packet.params)?;
    let t_max = cfg.positive_f64("t_max", 8.0)?;
    let n = cfg.usize("n_samples", 41)?;
    let substeps = cfg.usize("substeps", 2)?.max(1);
    let sp = 1.0 / (2.0 * packet.sigma);
    let spread = (2.0 * d * t_max).sqrt();
    let w0 = qtimes::phase_space::PhaseSpaceField::from_fn(
        packet.p0 - 8.0 * sp - 4.0 * spread,
        (packet.p0 + 8.0 * sp + 4.0 * spread).min(2.0 * sp),
        cfg.usize("n_p", 128)?,
        -4.0 * packet.q0.abs() - 8.0 * packet.sigma,
        packet.q0 + 10.0 * packet.sigma,
        cfg.usize("n_q", 768)?,
        |p, q| packet.wigner(p, q, 0.0),
    )?;
    let (times, density, survival) = opensys::first_passage_distribution(
        &w0,
        t_max,
        n,
        &qbm,
        opensys::RestrictedBoundary::ZeroNegativeQ,
        substeps,
    )?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let (j, j_d) = if t > 0.0 {
            let w = opensys::qbm_wigner_propagate(&w0, t, &qbm)?;
            let oc = opensys::open_current_wigner(&w, &qbm);
            (oc.j, oc.j_diffusive)
        } else {
            (0.0, 0.0)
        };
        rows.push(vec![t, j, j_d, density[k], survival[k]]);
    }
    out.write_csv(
        "qbm.csv",
        &["t", "J_open", "J_D", "first_passage", "survival"],
        rows.into_iter(),
    )?;
    // regime report for the interference diagnostic
    let t1 = cfg.positive_f64("t1", 3.0)?;
    let t2 = cfg.positive_f64("t2", 4.0)?;
    let (unitary, _) = opensys::delta_diagnostic(&packet, t1, t2, &qbm, opensys::DeltaRegime::Unitary)?;
    let (intermediate, fi) =
        opensys::delta_diagnostic(&packet, t1, t2, &qbm, opensys::DeltaRegime::Intermediate)?;
    let (strong, fs) = opensys::delta_diagnostic(&packet, t1, t2, &qbm, opensys::DeltaRegime::Strong)?;
    #[derive(Serialize)]
    struct DeltaReport {
        t1: f64,
        t2: f64,
        localisation_time: f64,
        stochastic_time: f64,
        positivity_time: f64,
        unitary: f64,
        intermediate: f64,
        intermediate_window_ok: bool,
        strong: f64,
        strong_window_ok: bool,
    }
    out.write_json(
        "delta_regimes.json",
        &DeltaReport {
            t1,
            t2,
            localisation_time: qbm.localisation_time(),
            stochastic_time: qbm.stochastic_time(packet.p0),
            positivity_time: opensys::positivity_time(&qbm),
            unitary,
            intermediate,
            intermediate_window_ok: fi.regime_window_ok,
            strong,
            strong_window_ok: fs.regime_window_ok,
        },
    )?;
    Ok(())
}

fn run_clock(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let packet = packet_from(cfg, -5.0)?;
    let lambda = cfg.positive_f64("lambda", 0.5)?;
    let sigma_y = cfg.positive_f64("sigma_y", 0.3)?;
    let clock = clocks::ClockModel::arrival(lambda, sigma_y)?;
    let y_min = cfg.f64("y_min", -3.0)?;
    let y_max = cfg.f64("y_max", 6.0)?;
    let n = cfg.usize("n_samples", 361)?;
    let (dist, valid) = clocks::weak_coupling_arrival(&packet, &clock, (y_min, y_max, n))?;
    if !valid {
        eprintln!("warning: outside the weak-coupling window E >> lambda sigma_eps");
    }
    out.write_csv(
        "clock.csv",
        &["y", "t", "Pi"],
        dist.y
            .iter()
            .zip(&dist.values)
            .map(|(&y, &v)| vec![y, y / lambda, v]),
    )?;
    Ok(())
}

fn run_dwell(cfg: &Config, out: &mut OutputDir) -> Result<(), RunError> {
    let packet = packet_from(cfg, -5.0)?;
    let lambda = cfg.positive_f64("lambda", 0.5)?;
    let sigma_y = cfg.positive_f64("sigma_y", 0.05)?;
    let half_width = cfg.positive_f64("L", 3.0)?;
    let clock = clocks::ClockModel::new(lambda, sigma_y, ClockRegion::IntervalDwell { half_width })?;
    let y_min = cfg.f64("y_min", 0.0)?;
    let y_max = cfg.f64("y_max", 2.0)?;
    let n = cfg.usize("n_samples", 801)?;
    let (dist, valid) = clocks::dwell_distribution(&packet, &clock, half_width, (y_min, y_max, n))?;
    if !valid {
        eprintln!("warning: outside the semiclassical window |p0| L >> 1");
    }
    out.write_csv(
        "dwell.csv",
        &["y", "t", "Pi"],
        dist.y
            .iter()
            .zip(&dist.values)
            .map(|(&y, &v)| vec![y, y / lambda, v]),
    )?;
    Ok(())
}

fn run_validate() -> ExitCode {
    let start = std::time::Instant::now();
    let reports = acceptance::run_all();
    let mut all_passed = true;
    for report in &reports {
        println!("{}", report.summary_line());
        for line in report.detail_lines() {
            println!("{line}");
        }
        all_passed &= report.passed;
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!("validate: total runtime {elapsed:.1} s (budget 900 s)");
    if elapsed > 900.0 {
        all_passed = false;
        println!("validate: runtime budget exceeded");
    }
    if all_passed {
        println!("validate: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("validate: FAILURES present");
        ExitCode::from(3)
    }
}
