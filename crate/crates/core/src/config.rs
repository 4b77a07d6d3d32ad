//! JSON experiment description and the `simulate` entry point.
//!
//! ```json
//! {
//!   "params": {"rho": 1, "alpha": 1, "gamma": 1, "eps1": 1, "eps3": 1, "mu": 1, "h": 1, "L": 1},
//!   "n_cells": 32,
//!   "t_final": 1.0,
//!   "actuation": "current",
//!   "input_signal": {"kind": "sinusoid", "amplitude": 1.0, "frequency": 0.5},
//!   "initial_state": {"kind": "modal", "mode": 0}
//! }
//! ```
//!
//! Relative CSV paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{default_dt, random_smooth_state, run, InputSignal, RunPlan, TimeSeries};
use crate::error::{Error, Result};
use crate::generator::{assemble_generator, GeneratorAssembly};
use crate::grid::{StaggeredGrid, MIN_CELLS};
use crate::params::{BeamParameters, RawParameters};
use crate::spectral::{real_mode, SymmetrizedSystem};
use crate::state::{Field, StateVector};
use crate::variants::{assemble_charge_magnetic, assemble_electrostatic, electrostatic_default_dt, simulate_electrostatic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Actuation {
    #[default]
    None,
    Current,
    ChargeMagnetic,
    ChargeElectrostatic,
}

impl Actuation {
    pub fn name(self) -> &'static str {
        match self {
            Actuation::None => "none",
            Actuation::Current => "current",
            Actuation::ChargeMagnetic => "charge_magnetic",
            Actuation::ChargeElectrostatic => "charge_electrostatic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    #[default]
    Zero,
    Constant { value: f64 },
    Sinusoid {
        amplitude: f64,
        /// Hz.
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// CSV with header `time,value`.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateSpec {
    #[default]
    Zero,
    /// Real part of an open-loop mode (0 = lowest nonzero frequency), unit
    /// energy norm times `amplitude`.
    Modal {
        mode: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Smooth random data on the gauge manifold drawn from the config seed.
    /// Magnetic actuations only.
    Random,
    /// CSV in long format with header `field,index,value`.
    Tabulated { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub gauge_tol: f64,
    pub solver_tol: f64,
    pub eig_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gauge_tol: 1e-10, solver_tol: 1e-12, eig_tol: 1e-8 }
    }
}

fn default_stride() -> usize {
    1
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: RawParameters,
    pub n_cells: usize,
    pub t_final: f64,
    /// Defaults to `dx/(10·sqrt(α/ρ))`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub actuation: Actuation,
    #[serde(default)]
    pub input_signal: SignalSpec,
    #[serde(default)]
    pub feedback_gain: f64,
    #[serde(default)]
    pub initial_state: InitialStateSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Record every `stride`-th step.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Toy-unit template used by the command-line defaults and tests.
    pub fn toy(n_cells: usize, t_final: f64) -> Self {
        Self {
            params: RawParameters::TOY,
            n_cells,
            t_final,
            dt: None,
            actuation: Actuation::None,
            input_signal: SignalSpec::Zero,
            feedback_gain: 0.0,
            initial_state: InitialStateSpec::Zero,
            tolerances: Tolerances::default(),
            stride: 1,
            seed: 42,
        }
    }

    /// Parses and validates; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SignalSpec::Tabulated { path } = &mut self.input_signal {
            fix(path);
        }
        if let InitialStateSpec::Tabulated { path } = &mut self.initial_state {
            fix(path);
        }
    }

    pub fn validate(&self) -> Result<()> {
        BeamParameters::<f64>::from_raw(&self.params)?;
        if self.n_cells < MIN_CELLS {
            return Err(Error::GridTooCoarse(self.n_cells));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidConfig("t_final must be positive".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidConfig("dt must be positive".into()));
            }
            if self.t_final < dt {
                return Err(Error::InvalidConfig(format!("t_final {} is shorter than dt {}", self.t_final, dt)));
            }
        }
        if !(self.feedback_gain.is_finite() && self.feedback_gain >= 0.0) {
            return Err(Error::InvalidConfig("feedback_gain must be non-negative".into()));
        }
        if self.feedback_gain > 0.0 && self.actuation == Actuation::None {
            return Err(Error::InvalidConfig("feedback needs an actuation".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be at least 1".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [("gauge_tol", t.gauge_tol), ("solver_tol", t.solver_tol), ("eig_tol", t.eig_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if let SignalSpec::Sinusoid { amplitude, frequency, phase } = self.input_signal {
            if !(amplitude.is_finite() && frequency.is_finite() && phase.is_finite()) {
                return Err(Error::InvalidConfig("sinusoid parameters must be finite".into()));
            }
        }
        if self.actuation == Actuation::ChargeElectrostatic && self.initial_state == InitialStateSpec::Random {
            return Err(Error::InvalidConfig("random initial state is only defined for the magnetic model".into()));
        }
        Ok(())
    }

    pub fn beam_parameters(&self) -> Result<BeamParameters<f64>> {
        BeamParameters::from_raw(&self.params)
    }

    pub fn grid(&self) -> Result<StaggeredGrid<f64>> {
        StaggeredGrid::new(self.params.length, self.n_cells)
    }

    /// Open-loop input; zero when `actuation` is `none` or feedback is on.
    pub fn input(&self) -> Result<InputSignal<f64>> {
        if self.actuation == Actuation::None || self.feedback_gain > 0.0 {
            return Ok(InputSignal::Zero);
        }
        Ok(match &self.input_signal {
            SignalSpec::Zero => InputSignal::Zero,
            SignalSpec::Constant { value } => InputSignal::Constant(*value),
            SignalSpec::Sinusoid { amplitude, frequency, phase } => {
                InputSignal::Sinusoid { amplitude: *amplitude, frequency: *frequency, phase: *phase }
            }
            SignalSpec::Tabulated { path } => read_signal_csv(path)?,
        })
    }

    /// Magnetic assembly for `none`, `current` and `charge_magnetic`.
    pub fn magnetic_assembly(&self) -> Result<GeneratorAssembly<f64>> {
        let p = self.beam_parameters()?;
        let g = self.grid()?;
        match self.actuation {
            Actuation::ChargeMagnetic => assemble_charge_magnetic(&p, &g),
            _ => assemble_generator(&p, &g),
        }
    }

    fn plan(&self, default: f64) -> Result<RunPlan<f64>> {
        let dt = self.dt.unwrap_or(default);
        if self.t_final < dt {
            return Err(Error::InvalidConfig(format!("t_final {} is shorter than dt {}", self.t_final, dt)));
        }
        let steps = (self.t_final / dt).round() as usize;
        Ok(RunPlan {
            dt,
            steps,
            stride: self.stride,
            input: self.input()?,
            gain: self.feedback_gain,
            gauge_tol: self.tolerances.gauge_tol,
            solver_tol: self.tolerances.solver_tol,
            keep_states: false,
        })
    }
}

/// Reads `time,value` samples. Times must be strictly increasing.
pub fn read_signal_csv(path: &Path) -> Result<InputSignal<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, row) in reader.deserialize::<(f64, f64)>().enumerate() {
        let (t, v) = row?;
        if let Some(&last) = times.last() {
            if !(t > last) {
                return Err(Error::InvalidConfig(format!("{}: times not increasing at row {}", path.display(), line + 1)));
            }
        }
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(Error::InvalidConfig(format!("{}: no samples", path.display())));
    }
    Ok(InputSignal::Tabulated { times, values })
}

/// Reads `field,index,value` rows into per-field arrays of the given lengths.
/// Fields not present in the file stay `None`.
fn read_state_csv(path: &Path, lengths: &[(Field, usize)]) -> Result<Vec<Option<Vec<f64>>>> {
    #[derive(Deserialize)]
    struct Row {
        field: String,
        index: usize,
        value: f64,
    }
    let mut out: Vec<Option<Vec<f64>>> = vec![None; lengths.len()];
    let mut reader = csv::Reader::from_path(path)?;
    for row in reader.deserialize::<Row>() {
        let row = row?;
        let field = Field::from_name(&row.field)
            .ok_or_else(|| Error::InvalidConfig(format!("{}: unknown field `{}`", path.display(), row.field)))?;
        let slot = lengths
            .iter()
            .position(|(f, _)| *f == field)
            .ok_or_else(|| Error::InvalidConfig(format!("{}: field `{}` not used by this model", path.display(), row.field)))?;
        let len = lengths[slot].1;
        if row.index >= len {
            return Err(Error::DimensionMismatch { field: field.name(), expected: len, found: row.index + 1 });
        }
        out[slot].get_or_insert_with(|| vec![0.0; len])[row.index] = row.value;
    }
    Ok(out)
}

pub fn magnetic_initial_state(cfg: &ExperimentConfig, assembly: &GeneratorAssembly<f64>) -> Result<StateVector<f64>> {
    let n = cfg.n_cells;
    let xi = assembly.params().xi();
    let dx = assembly.grid().dx();
    match &cfg.initial_state {
        InitialStateSpec::Zero => Ok(StateVector::zeros(n)),
        InitialStateSpec::Modal { mode, amplitude } => {
            let sys = SymmetrizedSystem::new(assembly)?;
            let (_, reduced) = real_mode(&sys, *mode)?;
            StateVector::from_vector(n, assembly.lift(&(reduced * *amplitude)))
        }
        InitialStateSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok(random_smooth_state(assembly, &mut rng))
        }
        InitialStateSpec::Tabulated { path } => {
            let layout = assembly.layout();
            let lengths: Vec<(Field, usize)> = Field::ALL.iter().map(|&f| (f, layout.len(f))).collect();
            let fields = read_state_csv(path, &lengths)?;
            let get = |k: usize| fields[k].clone().unwrap_or_else(|| vec![0.0; lengths[k].1]);
            let mut y = StateVector::constrained(n, xi, dx, &get(0), &get(1), &get(3), &get(4))?;
            if fields[2].is_some() || fields[5].is_some() {
                // explicit η fields must already satisfy the gauge
                y.set(Field::Eta, &get(2))?;
                y.set(Field::EtaRate, &get(5))?;
                let (rp, rv) = assembly.gauge_residual(&y);
                let worst = rp.max(rv);
                if worst > cfg.tolerances.gauge_tol {
                    return Err(Error::GaugeViolation { residual: worst, tolerance: cfg.tolerances.gauge_tol });
                }
            }
            Ok(y)
        }
    }
}

/// Runs the experiment described by `cfg`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<TimeSeries<f64>> {
    cfg.validate()?;
    match cfg.actuation {
        Actuation::ChargeElectrostatic => {
            let assembly = assemble_electrostatic(&cfg.beam_parameters()?, &cfg.grid()?)?;
            let n = cfg.n_cells;
            let y0 = match &cfg.initial_state {
                InitialStateSpec::Zero => DVector::zeros(assembly.dim()),
                InitialStateSpec::Modal { mode, amplitude } => assembly.mode(*mode)? * *amplitude,
                InitialStateSpec::Random => unreachable!("rejected by validate"),
                InitialStateSpec::Tabulated { path } => {
                    let fields = read_state_csv(path, &[(Field::Strain, n), (Field::Velocity, n + 1)])?;
                    let strain = fields[0].clone().unwrap_or_else(|| vec![0.0; n]);
                    let velocity = fields[1].clone().unwrap_or_else(|| vec![0.0; n + 1]);
                    if velocity[0] != 0.0 {
                        return Err(Error::InvalidConfig("electrostatic model is clamped at node 0 (y4[0] must be 0)".into()));
                    }
                    DVector::from_iterator(2 * n, strain.into_iter().chain(velocity.into_iter().skip(1)))
                }
            };
            let plan = cfg.plan(electrostatic_default_dt(&assembly))?;
            simulate_electrostatic(&assembly, &y0, &plan)
        }
        _ => {
            let assembly = cfg.magnetic_assembly()?;
            let y0 = magnetic_initial_state(cfg, &assembly)?;
            let plan = cfg.plan(default_dt(&assembly))?;
            run(&assembly, &y0, &plan)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY_JSON: &str = r#"{
        "params": {"rho": 1, "alpha": 1, "gamma": 1, "eps1": 1, "eps3": 1, "mu": 1, "h": 1, "L": 1},
        "n_cells": 16,
        "t_final": 0.5
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(TOY_JSON, None).unwrap();
        assert_eq!(cfg.actuation, Actuation::None);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.stride, 1);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.initial_state, InitialStateSpec::Zero);
    }

    #[test]
    fn missing_rho_is_named() {
        let text = TOY_JSON.replace("\"rho\": 1, ", "");
        let err = ExperimentConfig::from_json(&text, None).unwrap_err();
        assert!(matches!(&err, Error::ConfigParse(m) if m.contains("rho")), "{err}");
    }

    #[test]
    fn t_final_shorter_than_dt() {
        let text = TOY_JSON.replace("\"t_final\": 0.5", "\"t_final\": 0.001, \"dt\": 0.01");
        assert!(matches!(ExperimentConfig::from_json(&text, None), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = TOY_JSON.replace("\"n_cells\"", "\"bogus\": 1, \"n_cells\"");
        assert!(matches!(ExperimentConfig::from_json(&text, None), Err(Error::ConfigParse(_))));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let text = TOY_JSON.replace("\"n_cells\": 16", "\"n_cells\": 4");
        assert!(matches!(ExperimentConfig::from_json(&text, None), Err(Error::GridTooCoarse(4))));
    }

    #[test]
    fn signal_variants_parse() {
        let text = TOY_JSON.replace(
            "\"t_final\": 0.5",
            "\"t_final\": 0.5, \"actuation\": \"current\", \"input_signal\": {\"kind\": \"sinusoid\", \"amplitude\": 2, \"frequency\": 3}",
        );
        let cfg = ExperimentConfig::from_json(&text, None).unwrap();
        assert_eq!(cfg.input_signal, SignalSpec::Sinusoid { amplitude: 2.0, frequency: 3.0, phase: 0.0 });
    }

    #[test]
    fn gain_overrides_input() {
        let mut cfg = ExperimentConfig::toy(16, 0.1);
        cfg.actuation = Actuation::Current;
        cfg.input_signal = SignalSpec::Constant { value: 1.0 };
        cfg.feedback_gain = 1.0;
        assert_eq!(cfg.input().unwrap(), InputSignal::Zero);
    }

    #[test]
    fn modal_run_conserves_energy() {
        let mut cfg = ExperimentConfig::toy(16, 0.5);
        cfg.initial_state = InitialStateSpec::Modal { mode: 0, amplitude: 2.0 };
        let s = simulate(&cfg).unwrap();
        assert!((s.energies[0].total - 2.0).abs() < 1e-10);
        assert!(s.max_relative_drift() < 1e-10);
    }

    #[test]
    fn tabulated_files_resolve_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("u.csv"), "time,value\n0,0\n1,1\n").unwrap();
        let theta: String = (0..15).map(|i| format!("y2,{i},{}\n", (i as f64 * 0.2).sin())).collect();
        std::fs::write(dir.path().join("y0.csv"), format!("field,index,value\n{theta}")).unwrap();
        let text = TOY_JSON.replace(
            "\"t_final\": 0.5",
            "\"t_final\": 0.5, \"actuation\": \"current\", \"input_signal\": {\"kind\": \"tabulated\", \"path\": \"u.csv\"}, \"initial_state\": {\"kind\": \"tabulated\", \"path\": \"y0.csv\"}",
        );
        let cfg_path = dir.path().join("cfg.json");
        std::fs::write(&cfg_path, text).unwrap();
        let cfg = ExperimentConfig::from_path(&cfg_path).unwrap();
        let s = simulate(&cfg).unwrap();
        assert!(s.energies[0].total > 0.0);
        assert!(s.max_gauge_residual() < 1e-10);
        assert!((s.record_inputs.last().unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn inconsistent_eta_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y0.csv");
        std::fs::write(&path, "field,index,value\ny2,3,1.0\ny3,0,5.0\n").unwrap();
        let mut cfg = ExperimentConfig::toy(16, 0.1);
        cfg.initial_state = InitialStateSpec::Tabulated { path };
        assert!(matches!(simulate(&cfg), Err(Error::GaugeViolation { .. })));
    }

    #[test]
    fn electrostatic_dispatch() {
        let mut cfg = ExperimentConfig::toy(16, 1.0);
        cfg.actuation = Actuation::ChargeElectrostatic;
        cfg.feedback_gain = 1.0;
        cfg.initial_state = InitialStateSpec::Modal { mode: 0, amplitude: 1.0 };
        let s = simulate(&cfg).unwrap();
        let e = s.totals();
        assert!(e.last().unwrap() < &e[0]);
        assert!(s.gauge_residuals.iter().all(|&(a, b)| a == 0.0 && b == 0.0));
    }
}
