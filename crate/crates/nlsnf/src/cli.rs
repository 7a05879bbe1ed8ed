//! Batch commands behind the `nlsnf` binary. Each command reads one validated
//! [`RunConfig`], writes CSV/JSON/text artifacts to the output directory and
//! maps failures onto the documented exit codes.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::ball::BallSampler;
use crate::config::{ConfigError, InitialData, RunConfig};
use crate::kernel::NonResonanceParams;
use crate::measure::{self, MeasureError};
use crate::poly::{build_hamiltonian, k2, PolyError};
use crate::rational_nf::{self, RationalError, RationalHamiltonian, RationalOptions};
use crate::resonant_nf::{self, NfError, NfOptions};
use crate::simulator::{self, SimConfig, SimError};
use crate::state::FourierState;
use crate::timeplan::{self, RegimeInputs, TimeplanError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SMALLNESS: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Smallness(String),
    #[error("{0}")]
    Numeric(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Smallness(_) => EXIT_SMALLNESS,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<NfError> for CliError {
    fn from(e: NfError) -> Self {
        match e {
            NfError::SmallnessViolated { .. } => CliError::Smallness(e.to_string()),
            NfError::Poly(PolyError::Scale { .. }) => {
                CliError::Config(ConfigError::Invalid { block: "norm", msg: e.to_string() })
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<RationalError> for CliError {
    fn from(e: RationalError) -> Self {
        match e {
            RationalError::SmallnessViolated { .. }
            | RationalError::NonResonantDomainViolation { .. }
            | RationalError::DomainExit { .. }
            | RationalError::HBudgetExceeded { .. } => CliError::Smallness(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(msg) => CliError::Config(ConfigError::Invalid { block: "simulate", msg }),
            SimError::Kernel(k) => CliError::Config(ConfigError::Invalid { block: "kernel", msg: k.to_string() }),
            SimError::StepUnstable { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Invalid(msg) => CliError::Config(ConfigError::Invalid { block: "measure", msg }),
            MeasureError::TooFewSamples { .. } => {
                CliError::Config(ConfigError::Invalid { block: "measure", msg: e.to_string() })
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<TimeplanError> for CliError {
    fn from(e: TimeplanError) -> Self {
        match e {
            TimeplanError::Invalid(msg) => CliError::Config(ConfigError::Invalid { block: "timeplan", msg }),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<PolyError> for CliError {
    fn from(e: PolyError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub modes: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub scheme: Option<simulator::Scheme>,
    pub radius: Option<f64>,
    pub gamma: Option<f64>,
    pub output: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(c) = cfg.simulate.as_mut() {
            c.modes = self.modes.unwrap_or(c.modes);
            c.dt = self.dt.unwrap_or(c.dt);
            c.t_end = self.t_end.unwrap_or(c.t_end);
            c.scheme = self.scheme.unwrap_or(c.scheme);
            c.radius = self.radius.unwrap_or(c.radius);
            c.gamma = self.gamma.unwrap_or(c.gamma);
        }
        if let Some(c) = cfg.normalize.as_mut() {
            c.modes = self.modes.unwrap_or(c.modes);
            c.gamma = self.gamma.unwrap_or(c.gamma);
        }
        if let Some(c) = cfg.measure.as_mut() {
            c.modes = self.modes.unwrap_or(c.modes);
            c.radius = self.radius.unwrap_or(c.radius);
            if let Some(g) = self.gamma {
                c.gammas = vec![g];
            }
        }
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.output)?;
    Ok(cfg.output.clone())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ResidualReport {
    /// nonzero terms of {H0, Z}; zero means the bracket vanishes exactly
    h0_bracket_terms: usize,
    h0_bracket_max: f64,
    /// max |Z4 - K2| over coefficients
    quartic_vs_k2: f64,
    rational: Option<RationalResiduals>,
}

#[derive(Debug, Serialize)]
struct RationalResiduals {
    states: usize,
    /// max over sampled domain states and sites of |X_{K,|u_j|^2}| / |X_K|
    action_commutator: f64,
}

/// Resonant then rational normal form; writes dumps, step logs and residuals.
pub fn cmd_normalize(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.kernel()?;
    let f = cfg.weight()?;
    let p = cfg.norm()?;
    let nc = cfg.normalize()?;
    let dir = out_dir(cfg)?;
    let mut written = Vec::new();
    let h = build_hamiltonian(&spec, nc.modes)?;
    let opts = NfOptions { c1: nc.c1, c2: nc.c2, keep_remainder: nc.keep_remainder };
    let nf = resonant_nf::resonant_normalize(&h, nc.degree, &p, &f, spec.c_k(), &opts)?;
    let z_path = dir.join("resonant_normal_form.txt");
    fs::write(&z_path, nf.normal_form().dump())?;
    written.push(z_path);
    let log_path = dir.join("resonant_steps.json");
    fs::write(&log_path, nf.step_log_json() + "\n")?;
    written.push(log_path);
    let k2p = k2(&spec, nc.modes)?;
    let z4 = nf.z.layer(4);
    let quartic_vs_k2 = z4
        .sorted_terms()
        .iter()
        .map(|(k, c)| (c - k2p.get(k)).norm())
        .chain(k2p.sorted_terms().iter().map(|(k, c)| (c - z4.get(k)).norm()))
        .fold(0.0, f64::max);
    let hb = nf.z.h0_bracket();
    let mut report = ResidualReport {
        h0_bracket_terms: hb.sorted_terms().iter().filter(|(_, c)| c.norm() != 0.0).count(),
        h0_bracket_max: hb.max_abs_coeff(),
        quartic_vs_k2,
        rational: None,
    };
    if nc.rational {
        let nr = NonResonanceParams { gamma: nc.gamma, m: nc.modes, d: nc.degree };
        let p2 = crate::lattice::NormParams { r: nc.rational_radius, ..p };
        let res = rational_nf::integrable_normalize(
            &nf.normal_form(),
            nc.degree,
            &p2,
            &nr,
            &f,
            &RationalOptions { h_budget: nc.h_budget },
        )?;
        let k_path = dir.join("rational_normal_form.txt");
        fs::write(&k_path, res.k.dump(&res.alg))?;
        written.push(k_path);
        let log_path = dir.join("rational_steps.json");
        fs::write(&log_path, res.step_log_json() + "\n")?;
        written.push(log_path);
        let b = BallSampler { m: nc.modes, s: p2.s, f, r: p2.r, seed: cfg.seed };
        let mut rng = b.rng();
        let kc = res.k.compile(&res.alg);
        let mut worst: f64 = 0.0;
        let mut states = 0;
        for _ in 0..200 {
            if states == 3 {
                break;
            }
            let u = b.sample_sphere(&mut rng);
            if rational_nf::domain_margin(&res.alg, &u, &nr, &p2, &f)? <= 0.0 {
                continue;
            }
            states += 1;
            let nk = kc.vector_field(&res.alg, &u).max_abs();
            for j in -(nc.modes as i64)..=nc.modes as i64 {
                let jm = crate::MultiIndex::from_pairs(&[(j as i32, 1), (j as i32, -1)]).expect("action index");
                let ij = crate::poly::Poly::monomial(&jm, Complex64::new(1.0, 0.0))?;
                let ic = RationalHamiltonian::from_poly(&ij).compile(&res.alg);
                let x = rational_nf::bracket_field_exact(&kc, &ic, &res.alg, &u).max_abs();
                worst = worst.max(if nk > 0.0 { x / nk } else { x });
            }
        }
        report.rational = Some(RationalResiduals { states, action_commutator: worst });
    }
    let res_path = dir.join("residuals.json");
    write_json(&res_path, &report)?;
    written.push(res_path);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    config: SimConfig,
    initial: InitialData,
    exit_flag: bool,
    exit_time: Option<f64>,
    max_norm_ratio: f64,
    max_l2_drift: f64,
    max_h_drift: f64,
    experiment: Option<simulator::ExperimentSummary>,
}

/// One trajectory to CSV plus, when `members > 0`, the gated ensemble.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.kernel()?;
    let f = cfg.weight()?;
    let p = cfg.norm()?;
    let sc = cfg.simulate()?;
    let dir = out_dir(cfg)?;
    let sim = SimConfig {
        m_sim: sc.modes,
        dt: sc.dt,
        t_end: sc.t_end,
        scheme: sc.scheme,
        observer_stride: sc.observer_stride,
    };
    let b = BallSampler { m: sc.modes, s: p.s, f, r: sc.radius, seed: cfg.seed };
    let u0 = match sc.initial {
        InitialData::Zero => FourierState::zeros(sc.modes),
        InitialData::Ball => b.sample(&mut b.stream(0)),
    };
    let rep = simulator::evolve(&u0, &sim, &spec, &p, &f)?;
    let csv_path = dir.join("trajectory.csv");
    rep.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    let nr = NonResonanceParams { gamma: sc.gamma, m: sc.modes, d: sc.d };
    let experiment = if sc.members > 0 {
        Some(simulator::run_stability_experiment(&b, sc.members, &sim, &spec, &p, &nr)?)
    } else {
        None
    };
    let maxabs = |v: &[f64]| v.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
    let summary = SimulationSummary {
        config: sim,
        initial: sc.initial,
        exit_flag: rep.exit_flag,
        exit_time: rep.exit_time,
        max_norm_ratio: rep.max_norm_ratio,
        max_l2_drift: maxabs(&rep.l2_drift),
        max_h_drift: maxabs(&rep.h_drift),
        experiment,
    };
    let json_path = dir.join("summary.json");
    write_json(&json_path, &summary)?;
    Ok(vec![csv_path, json_path])
}

#[derive(Debug, Serialize)]
struct MeasureSummary {
    fractions: Vec<measure::FractionEstimate>,
    derivative: Option<measure::DerivativeReport>,
    volume: Option<measure::VolumeReport>,
}

/// Resonant-fraction sweep over the configured gammas on one sample set.
pub fn cmd_measure(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.kernel()?;
    let f = cfg.weight()?;
    let p = cfg.norm()?;
    let mc = cfg.measure()?;
    let dir = out_dir(cfg)?;
    let b = BallSampler { m: mc.modes, s: p.s, f, r: mc.radius, seed: cfg.seed };
    let nr = NonResonanceParams { gamma: 0.0, m: mc.modes, d: mc.d };
    let rows = measure::fraction_sweep(&spec, &nr, &b, mc.samples, &mc.gammas, mc.threshold)?;
    let csv_path = dir.join("fractions.csv");
    measure::write_fraction_csv(&rows, BufWriter::new(File::create(&csv_path)?))?;
    let derivative = match measure::derivative_lower_bound_check(&spec, mc.d, mc.modes) {
        Ok(r) => Some(r),
        Err(MeasureError::EnumerationOverflow { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let volume = match mc.jstar {
        Some(j) => Some(measure::volume_identity_check(&b, j, mc.samples, 0.25)?),
        None => None,
    };
    let json_path = dir.join("measure.json");
    write_json(&json_path, &MeasureSummary { fractions: rows, derivative, volume })?;
    Ok(vec![csv_path, json_path])
}

#[derive(Debug, Serialize)]
struct TimeplanSummary {
    params: Vec<timeplan::RegimeParams>,
    asymptotics: timeplan::AsymptoticReport,
}

/// Regime sweep over the configured d grid.
pub fn cmd_timeplan(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let tc = cfg.timeplan()?;
    let dir = out_dir(cfg)?;
    let base = RegimeInputs {
        regime: tc.regime,
        d: tc.d_grid[0],
        iota: tc.iota,
        a: tc.a,
        s: tc.s,
        weight: tc.weight,
        p: tc.p,
        c1: tc.c1,
        c2: tc.c2,
        c_k: cfg.kernel.map(|k| k.c_k()).unwrap_or(1.0),
    };
    let rep = timeplan::asymptotic_constant(&base, &tc.d_grid)?;
    let params = tc
        .d_grid
        .iter()
        .map(|&d| timeplan::select_params(&RegimeInputs { d, ..base }))
        .collect::<Result<Vec<_>, _>>()?;
    let csv_path = dir.join(format!("timeplan_{:?}.csv", tc.regime).to_lowercase());
    timeplan::write_sweep_csv(&rep, BufWriter::new(File::create(&csv_path)?))?;
    let json_path = dir.join("timeplan.json");
    write_json(&json_path, &TimeplanSummary { params, asymptotics: rep })?;
    Ok(vec![csv_path, json_path])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Normalize,
    Simulate,
    Measure,
    Timeplan,
}

/// Loads the config, applies overrides and runs one command.
pub fn run(cmd: Command, config: &Path, ov: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = RunConfig::load(config)?;
    ov.apply(&mut cfg);
    match cmd {
        Command::Normalize => cmd_normalize(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Measure => cmd_measure(&cfg),
        Command::Timeplan => cmd_timeplan(&cfg),
    }
}
