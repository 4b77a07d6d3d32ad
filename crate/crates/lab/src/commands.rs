//! Subcommand implementations. Each returns an [`ExperimentReport`]; the
//! caller prints and persists it and turns failed checks into exit status 1.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use piezobeam::config::{magnetic_initial_state, InitialStateSpec};
use piezobeam::dynamics::{random_smooth_state, run, InputSignal, RunPlan, TimeSeries};
use piezobeam::spectral::{
    classify_stabilizability, closed_loop_of, decay_rate_fit_series, spectrum_of, SymmetrizedSystem,
};
use piezobeam::state::{Field, StateVector};
use piezobeam::variants::{assemble_charge_magnetic, assemble_electrostatic, boundary_feedback_simulate};
use piezobeam::{Actuation, BeamParameters, ExperimentConfig, SpectrumReport, StaggeredGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checks::{CheckResult, Suite};
use crate::error::{LabError, LabResult};
use crate::report::ExperimentReport;

/// Options shared by all subcommands.
#[derive(Debug, Clone)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Overrides the configured seed; 42 when neither is given.
    pub seed: Option<u64>,
    pub n_cells: Option<usize>,
    pub variant: Option<Variant>,
    pub gain: Option<f64>,
    pub only: Option<String>,
}

impl Options {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { config: None, out: out.into(), seed: None, n_cells: None, variant: None, gain: None, only: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Current,
    ChargeMagnetic,
    Electrostatic,
}

impl std::str::FromStr for Variant {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "current" => Ok(Variant::Current),
            "charge_magnetic" => Ok(Variant::ChargeMagnetic),
            "electrostatic" | "charge_electrostatic" => Ok(Variant::Electrostatic),
            _ => Err(LabError::UnknownVariant(s.into())),
        }
    }
}

impl Variant {
    fn actuation(self) -> Actuation {
        match self {
            Variant::Current => Actuation::Current,
            Variant::ChargeMagnetic => Actuation::ChargeMagnetic,
            Variant::Electrostatic => Actuation::ChargeElectrostatic,
        }
    }
}

fn ensure_dir(dir: &Path) -> LabResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| LabError::Output { path: dir.to_path_buf(), source })
}

/// Loads `--config` (or the toy template) and applies the command-line
/// overrides before validating.
fn load_config(opts: &Options, default_n: usize, default_t: f64) -> LabResult<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|source| LabError::ConfigRead { path: path.clone(), source })?;
            ExperimentConfig::from_json(&text, path.parent())?
        }
        None => {
            let mut c = ExperimentConfig::toy(default_n, default_t);
            c.initial_state = if opts.variant == Some(Variant::Electrostatic) {
                InitialStateSpec::Modal { mode: 0, amplitude: 1.0 }
            } else {
                InitialStateSpec::Random
            };
            c
        }
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(n) = opts.n_cells {
        cfg.n_cells = n;
    }
    if let Some(v) = opts.variant {
        cfg.actuation = v.actuation();
    }
    if let Some(k) = opts.gain {
        cfg.feedback_gain = k;
        if k > 0.0 && cfg.actuation == Actuation::None {
            cfg.actuation = Actuation::Current;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn echo(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn energy_nonincreasing(energies: &[f64]) -> f64 {
    // largest relative increase between consecutive records
    energies.windows(2).fold(0.0f64, |a, w| a.max((w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE)))
}

fn full_window_fit(series: &TimeSeries<f64>) -> Option<piezobeam::spectral::DecayFit<f64>> {
    let t_end = *series.times.last()?;
    decay_rate_fit_series(series, (0.0, t_end)).ok()
}

pub fn simulate(opts: &Options) -> LabResult<ExperimentReport> {
    let cfg = load_config(opts, 32, 1.0)?;
    ensure_dir(&opts.out)?;
    let mut report = ExperimentReport::new("simulate");
    report.config_echo = echo(&cfg);
    let series = piezobeam::simulate(&cfg)?;
    let path = opts.out.join("trajectory.csv");
    series.write_csv(&path)?;
    report.artifact(path);

    let e = series.totals();
    report.record("records", series.times.len());
    report.record("energy_initial", e[0]);
    report.record("energy_final", *e.last().expect("at least one record"));
    report.record("energy_drift", series.max_relative_drift());
    report.record("max_gauge_residual", series.max_gauge_residual());

    let input_free = cfg.actuation == Actuation::None || cfg.input()?.is_zero();
    if cfg.feedback_gain > 0.0 {
        let rise = energy_nonincreasing(&e);
        report.check(CheckResult::new("dissipation", rise, "relative rise <= 1e-12", rise <= 1e-12, "closed loop"));
        if let Some(fit) = full_window_fit(&series) {
            report.record("decay_rate", fit.rate);
            report.record("decay_r_squared", fit.r_squared);
        }
    } else if input_free {
        let drift = series.max_relative_drift();
        report.check(CheckResult::new("conservation", drift, "<= 1e-9", drift <= 1e-9, "open loop, no input"));
    }
    if cfg.actuation != Actuation::ChargeElectrostatic {
        let g = series.max_gauge_residual();
        let tol = cfg.tolerances.gauge_tol;
        report.check(CheckResult::new("gauge", g, format!("<= {tol:e}"), g <= tol, "constraint residual along the run"));
    }
    Ok(report)
}

fn write_spectrum(report: &mut ExperimentReport, dir: &Path, name: &str, spectrum: &SpectrumReport) -> LabResult<()> {
    let path = dir.join(name);
    spectrum.write_csv(&path)?;
    report.artifact(path);
    Ok(())
}

/// Rows `omega, bstar_abs, stabilizable, dominant_block, open_re, closed_re,
/// closed_im, predicted_re` for every open-loop mode.
fn write_mode_table(path: &Path, open: &SpectrumReport, closed: &SpectrumReport, gain: f64) -> LabResult<()> {
    let matched = piezobeam::spectral::match_eigenvalues(&open.eigenvalues, &closed.eigenvalues);
    let file = File::create(path).map_err(|source| LabError::Output { path: path.to_path_buf(), source })?;
    let mut w = BufWriter::new(file);
    let io = |source| LabError::Output { path: path.to_path_buf(), source };
    writeln!(w, "omega,bstar_abs,stabilizable,dominant_block,open_re,closed_re,closed_im,predicted_re").map_err(io)?;
    for (m, c) in open.modes.iter().zip(&matched) {
        writeln!(
            w,
            "{:.17e},{:.17e},{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            m.lambda.im,
            m.bstar_abs(),
            m.stabilizable,
            m.dominant_block.name(),
            m.lambda.re,
            c.re,
            c.im,
            -gain * m.bstar_abs().powi(2)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

fn record_spectrum(report: &mut ExperimentReport, r: &SpectrumReport) {
    let c = classify_stabilizability(r);
    report.record("dimension", r.eigenvalues.len());
    report.record("max_abs_real", r.max_abs_real);
    report.record("spectral_radius", r.spectral_radius);
    report.record("kernel_dimension", c.kernel);
    report.record("stabilizable_modes", c.stabilizable);
    report.record("non_stabilizable_modes", c.non_stabilizable);
}

fn imaginary_check(r: &SpectrumReport) -> CheckResult {
    let rel = r.max_abs_real / r.spectral_radius;
    CheckResult::new("imaginary_spectrum", rel, "<= 1e-10", rel <= 1e-10, "max|Re| / max|lambda|")
}

fn closed_loop_check(closed: &SpectrumReport, scale: f64) -> CheckResult {
    let a = closed.spectral_abscissa();
    CheckResult::new(
        "closed_loop_half_plane",
        a / scale,
        "max Re / max|lambda| <= 1e-12",
        a <= 1e-12 * scale,
        "no eigenvalue crosses into Re > 0",
    )
}

/// Symmetrized system of the selected model. Electrostatic feedback is
/// `σ = −k·v̇(L)`, so the gain is rescaled to act on `B*y = γ/(ε3 h)·v̇(L)`.
fn symmetrized(cfg: &ExperimentConfig, variant: Option<Variant>) -> LabResult<(SymmetrizedSystem<f64>, f64)> {
    let p = cfg.beam_parameters()?;
    let g = cfg.grid()?;
    if variant == Some(Variant::Electrostatic) || cfg.actuation == Actuation::ChargeElectrostatic {
        let a = assemble_electrostatic(&p, &g)?;
        let b_scale = p.gamma() / (p.eps3() * p.h());
        let gain_scale = if cfg.feedback_gain > 0.0 {
            if !(b_scale > 0.0) {
                return Err(piezobeam::Error::InvalidConfig("boundary feedback sign requires gamma > 0".into()).into());
            }
            1.0 / b_scale
        } else {
            1.0
        };
        return Ok((a.symmetrized()?, gain_scale));
    }
    Ok((SymmetrizedSystem::new(&cfg.magnetic_assembly()?)?, 1.0))
}

pub fn spectrum(opts: &Options) -> LabResult<ExperimentReport> {
    let cfg = load_config(opts, 32, 1.0)?;
    ensure_dir(&opts.out)?;
    let mut report = ExperimentReport::new("spectrum");
    report.config_echo = echo(&cfg);
    let (sys, gain_scale) = symmetrized(&cfg, opts.variant)?;
    let open = spectrum_of(&sys, cfg.tolerances.eig_tol)?;
    record_spectrum(&mut report, &open);
    write_spectrum(&mut report, &opts.out, "spectrum.csv", &open)?;
    report.check(imaginary_check(&open));
    let gain = cfg.feedback_gain;
    if gain > 0.0 {
        let closed = closed_loop_of(&sys, gain * gain_scale, cfg.tolerances.eig_tol);
        report.record("closed_loop_abscissa", closed.spectral_abscissa());
        write_spectrum(&mut report, &opts.out, "closed_loop_spectrum.csv", &closed)?;
        let path = opts.out.join("modes.csv");
        write_mode_table(&path, &open, &closed, gain * gain_scale)?;
        report.artifact(path);
        report.check(closed_loop_check(&closed, open.spectral_radius));
    }
    Ok(report)
}

pub fn stabilize(opts: &Options) -> LabResult<ExperimentReport> {
    let mut opts = opts.clone();
    opts.gain = Some(opts.gain.unwrap_or(1.0));
    if opts.variant == Some(Variant::Electrostatic) {
        return Err(LabError::InvalidOption("stabilize drives the magnetic model; use `variants` for electrostatic".into()));
    }
    let mut cfg = load_config(&opts, 32, 2.0)?;
    if cfg.actuation == Actuation::None {
        cfg.actuation = Actuation::Current;
    }
    ensure_dir(&opts.out)?;
    let mut report = ExperimentReport::new("stabilize");
    report.config_echo = echo(&cfg);
    let gain = cfg.feedback_gain;
    let eig_tol = cfg.tolerances.eig_tol;

    let assembly = cfg.magnetic_assembly()?;
    let sys = SymmetrizedSystem::new(&assembly)?;
    let open = spectrum_of(&sys, eig_tol)?;
    let closed = closed_loop_of(&sys, gain, eig_tol);
    record_spectrum(&mut report, &open);
    report.record("gain", gain);
    report.record("closed_loop_abscissa", closed.spectral_abscissa());
    let path = opts.out.join("stabilize_modes.csv");
    write_mode_table(&path, &open, &closed, gain)?;
    report.artifact(path);
    report.check(closed_loop_check(&closed, open.spectral_radius));

    let matched = piezobeam::spectral::match_eigenvalues(&open.eigenvalues, &closed.eigenvalues);
    let kernel_tol = 1e-10 * open.spectral_radius;
    let undamped = open
        .modes
        .iter()
        .zip(&matched)
        .filter(|(m, _)| !m.stabilizable && m.lambda.norm() > kernel_tol)
        .fold(0.0f64, |a, (_, c)| a.max(c.re.abs()));
    report.check(CheckResult::new(
        "non_stabilizable_undamped",
        undamped,
        "|Re| <= 1e-8",
        undamped <= 1e-8,
        "modes with |B*phi| <= eig_tol keep their eigenvalue",
    ));

    // closed-loop run from the configured (or a seeded random) state
    let y0 = match cfg.initial_state {
        // from rest nothing happens under feedback alone
        InitialStateSpec::Zero => random_smooth_state(&assembly, &mut ChaCha8Rng::seed_from_u64(cfg.seed)),
        _ => magnetic_initial_state(&cfg, &assembly)?,
    };
    let mut plan = RunPlan::open_loop(cfg.dt.unwrap_or_else(|| piezobeam::dynamics::default_dt(&assembly)), 0);
    plan.steps = (cfg.t_final / plan.dt).round() as usize;
    plan.stride = cfg.stride;
    plan.gain = gain;
    plan.gauge_tol = cfg.tolerances.gauge_tol;
    plan.solver_tol = cfg.tolerances.solver_tol;
    let series = run(&assembly, &y0, &plan)?;
    let path = opts.out.join("stabilize_trajectory.csv");
    series.write_csv(&path)?;
    report.artifact(path);
    let e = series.totals();
    report.record("energy_ratio", e.last().copied().unwrap_or(0.0) / e[0]);
    if let Some(fit) = full_window_fit(&series) {
        report.record("decay_rate", fit.rate);
        report.record("decay_r_squared", fit.r_squared);
    }
    let rise = energy_nonincreasing(&e);
    report.check(CheckResult::new("dissipation", rise, "relative rise <= 1e-12", rise <= 1e-12, "closed-loop run"));
    Ok(report)
}

pub fn variants(opts: &Options) -> LabResult<ExperimentReport> {
    let mut cfg = load_config(opts, 64, 6.0)?;
    if opts.gain.is_none() && cfg.feedback_gain == 0.0 {
        cfg.feedback_gain = 1.0;
    }
    ensure_dir(&opts.out)?;
    let mut report = ExperimentReport::new("variants");
    report.config_echo = echo(&cfg);
    let p = cfg.beam_parameters()?;
    let grid = cfg.grid()?;
    let n = cfg.n_cells;

    // electrostatic boundary feedback
    let es = assemble_electrostatic(&p, &grid)?;
    report.check(CheckResult::new("electrostatic_skewness", es.skewness(), "<= 1e-12", es.skewness() <= 1e-12, "clamped-free model"));
    let es_spec = es.spectrum(cfg.tolerances.eig_tol)?;
    write_spectrum(&mut report, &opts.out, "electrostatic_spectrum.csv", &es_spec)?;
    let lowest = es_spec.eigenvalues.iter().map(|l| l.im).filter(|w| *w > 0.0).fold(f64::INFINITY, f64::min);
    report.record("electrostatic_lowest_frequency", lowest);
    let y0 = es.mode(0)?;
    let speed = ((p.alpha() + p.nonlocal_stiffness()) / p.rho()).sqrt();
    let dt = cfg.dt.unwrap_or(grid.dx() / (10.0 * speed));
    let gain = cfg.feedback_gain;
    let series = boundary_feedback_simulate(&es, gain, &y0, cfg.t_final, dt, cfg.stride.max(10))?;
    let path = opts.out.join("electrostatic_trajectory.csv");
    series.write_csv(&path)?;
    report.artifact(path);
    let e = series.totals();
    let rise = energy_nonincreasing(&e);
    report.check(CheckResult::new("electrostatic_dissipation", rise, "relative rise <= 1e-12", rise <= 1e-12, format!("k = {gain}")));
    if gain > 0.0 {
        match full_window_fit(&series) {
            Some(fit) => {
                report.record("electrostatic_decay_rate", fit.rate);
                report.record("electrostatic_r_squared", fit.r_squared);
                report.check(CheckResult::new(
                    "electrostatic_decay",
                    fit.rate,
                    "rate > 0, R^2 >= 0.99",
                    fit.rate > 0.0 && fit.r_squared >= 0.99,
                    format!("R^2 {:.4}", fit.r_squared),
                ));
            }
            None => report.check(CheckResult::new("electrostatic_decay", f64::NAN, "rate > 0, R^2 >= 0.99", false, "too few records")),
        }
    }

    // charge-actuated magnetic model
    let mut rows = Vec::new();
    for m in [32usize, 64, 128, 256] {
        let a = assemble_charge_magnetic(&p, &StaggeredGrid::new(p.length(), m)?)?;
        rows.push((m, a.energy_norm_sq(a.control()).sqrt()));
    }
    let path = opts.out.join("charge_norms.csv");
    let mut text = String::from("n_cells,b_norm\n");
    for (m, v) in &rows {
        text.push_str(&format!("{m},{v:.17e}\n"));
    }
    std::fs::write(&path, text).map_err(|source| LabError::Output { path: path.clone(), source })?;
    report.artifact(path);
    let min_ratio = rows.windows(2).fold(f64::INFINITY, |a, w| a.min(w[1].1 / w[0].1));
    report.check(CheckResult::new("charge_norm", min_ratio, "successive ratio > 1", min_ratio > 1.0, "N = 32..256"));

    let anti = charge_antisymmetry(&p, &grid)?;
    report.check(CheckResult::new(
        "charge_antisymmetry",
        anti,
        "<= 1e-10",
        anti <= 1e-10,
        format!("constant charge step from rest, N = {n}"),
    ));
    Ok(report)
}

/// `max_j |y4[j] + y4[N−j]| / max|y4|` after a constant charge step.
fn charge_antisymmetry(p: &BeamParameters, grid: &StaggeredGrid) -> LabResult<f64> {
    let n = grid.n_cells();
    let a = assemble_charge_magnetic(p, grid)?;
    let mut plan = RunPlan::open_loop(piezobeam::dynamics::default_dt(&a), 200);
    plan.input = InputSignal::Constant(1.0);
    plan.stride = 200;
    plan.keep_states = true;
    let s = run(&a, &StateVector::zeros(n), &plan)?;
    let last: &DVector<f64> = s.states.last().expect("final record");
    let y = StateVector::from_vector(n, last.clone())?;
    let v = y.field(Field::Velocity);
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((0..=n).fold(0.0f64, |m, j| m.max((v[j] + v[n - j]).abs())) / scale)
}

pub fn paper_suite(opts: &Options) -> LabResult<ExperimentReport> {
    ensure_dir(&opts.out)?;
    let mut report = ExperimentReport::new("paper-suite");
    let seed = opts.seed.unwrap_or(42);
    report.record("seed", seed);
    let results = Suite::new(seed).run(opts.only.as_deref())?;
    for r in results {
        report.check(r);
    }
    report.record("checks_run", report.pass_fail.len());
    report.record("checks_passed", report.pass_fail.iter().filter(|c| c.pass).count());
    Ok(report)
}
