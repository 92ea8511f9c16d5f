//! Command-line front end.
//!
//! Every subcommand is a thin wrapper over library calls. Tabular output
//! goes to standard output or to `--out FILE`; diagnostics go to standard
//! error. Exit codes: 0 success, 1 computation error, 2 usage error.
//!
//! `--config FILE` reads flat `key = value` lines, one flag per line
//! (`kappa = 1.0` acts as `--kappa 1.0`). Flags on the command line win.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::cavity::pulse::effective_coeffs;
use crate::cavity::{
    cold_coeff, hot_coeffs, integrate_pulse, CavityError, CavityParams, GaussianPulse,
};
use crate::circuits::{
    build, run_circuit_with, truth_table_with_limit, CircuitError, GateKind, GateVariant, Mode,
    DEFAULT_TABLE_LIMIT,
};
use crate::elements::MergePolicy;
use crate::metrics::{
    format_sig, run_regression, sweep, EfficiencyConvention, FidelityConvention, GridAxis,
    InitialState, Metric, MetricConfig, MetricError, RegressionMode, REFERENCE_TOLERANCE,
};
use crate::state::{format_state, parse_state, Amplitude, AtomGround, Polarization, StateError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::InvalidGate(_)
            | CircuitError::BadInput { .. }
            | CircuitError::TableTooLarge { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<StateError> for CliError {
    fn from(e: StateError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::InvalidRange(_) | MetricError::State(_) => CliError::Usage(e.to_string()),
            MetricError::Circuit(c) => c.into(),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<CavityError> for CliError {
    fn from(e: CavityError) -> Self {
        match e {
            CavityError::InvalidParams(_) | CavityError::InvalidPulse(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Compute(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lgs",
    version,
    about = "Hybrid photon-atom gate simulator",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a gate on an input state and print the output state.
    #[command(args_override_self = true)]
    Evolve(EvolveArgs),
    /// Print the gate's action on every computational basis input.
    #[command(args_override_self = true)]
    TruthTable(TruthTableArgs),
    /// Evaluate a metric over a (kappa/g, gamma/g) grid as CSV.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Print a gate's circuit in the text format.
    #[command(args_override_self = true)]
    EmitCircuit(EmitArgs),
    /// Time-domain checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Score the reference values under every convention.
    #[command(args_override_self = true)]
    Regress(RegressArgs),
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Integrate a Gaussian photon pulse through one cavity.
    #[command(args_override_self = true)]
    Pulse(PulseArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GateArg {
    Cnot,
    Fredkin,
    Toffoli,
}

impl From<GateArg> for GateVariant {
    fn from(g: GateArg) -> Self {
        match g {
            GateArg::Cnot => GateVariant::Cnot,
            GateArg::Fredkin => GateVariant::Fredkin,
            GateArg::Toffoli => GateVariant::Toffoli,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ideal,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PortsArg {
    Strict,
    Discard,
    Coherent,
}

impl From<PortsArg> for MergePolicy {
    fn from(p: PortsArg) -> Self {
        match p {
            PortsArg::Strict => MergePolicy::Strict,
            PortsArg::Discard => MergePolicy::Discard,
            PortsArg::Coherent => MergePolicy::Coherent,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Fidelity,
    Efficiency,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FidelityArg {
    Normalized,
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EfficiencyArg {
    Projection,
    Norm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AtomArg {
    Gh,
    Gv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolArg {
    #[value(name = "H", alias = "h")]
    H,
    #[value(name = "V", alias = "v")]
    V,
}

#[derive(Debug, Args)]
pub struct GateOpts {
    #[arg(long, value_enum)]
    pub gate: GateArg,
    /// Atom count (default 1 for cnot, 2 otherwise).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = crate::circuits::DEFAULT_MAX_ATOMS)]
    pub max_atoms: usize,
}

impl GateOpts {
    fn gate(&self) -> Result<GateKind, CliError> {
        let v = GateVariant::from(self.gate);
        Ok(GateKind::with_max(
            v,
            self.n.unwrap_or(v.min_atoms()),
            self.max_atoms,
        )?)
    }
}

#[derive(Debug, Args)]
pub struct PhysicsOpts {
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Coupling for both transitions.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub eta_h: Option<f64>,
    #[arg(long)]
    pub eta_v: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega: f64,
}

impl PhysicsOpts {
    fn params(&self) -> Result<CavityParams, CliError> {
        let (Some(kappa), Some(gamma)) = (self.kappa, self.gamma) else {
            return Err(CliError::Usage(
                "--kappa and --gamma are required here".into(),
            ));
        };
        Ok(CavityParams::new(
            kappa,
            gamma,
            self.eta_h.unwrap_or(self.eta),
            self.eta_v.unwrap_or(self.eta),
            self.omega,
        )?)
    }

    fn mode(&self, mode: ModeArg) -> Result<Mode, CliError> {
        match mode {
            ModeArg::Ideal => Ok(Mode::Ideal),
            ModeArg::Real => Ok(Mode::Real(self.params()?)),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub gate: GateOpts,
    #[arg(long, value_enum, default_value_t = ModeArg::Ideal)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub physics: PhysicsOpts,
    /// Merge handling (default: strict when ideal, discard when real).
    #[arg(long, value_enum)]
    pub ports: Option<PortsArg>,
    /// Input state literal on line l0.
    #[arg(long)]
    pub input: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TruthTableArgs {
    #[command(flatten)]
    pub gate: GateOpts,
    #[arg(long, value_enum, default_value_t = ModeArg::Ideal)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub physics: PhysicsOpts,
    /// Largest table (rows) to enumerate.
    #[arg(long, default_value_t = DEFAULT_TABLE_LIMIT)]
    pub limit: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub gate: GateOpts,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    /// lo:hi:steps
    #[arg(long, default_value = "0.2:2.0:30")]
    pub kappa: String,
    /// lo:hi:steps
    #[arg(long, default_value = "0.01:0.2:30")]
    pub gamma: String,
    #[arg(long, value_enum, default_value_t = FidelityArg::Normalized)]
    pub fidelity_convention: FidelityArg,
    #[arg(long, value_enum, default_value_t = EfficiencyArg::Projection)]
    pub efficiency_convention: EfficiencyArg,
    #[arg(long, value_enum, default_value_t = PortsArg::Coherent)]
    pub ports: PortsArg,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega: f64,
    /// Initial state literal (default: uniform product superposition).
    #[arg(long)]
    pub input: Option<String>,
    /// Worker cap (overrides LGS_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    #[command(flatten)]
    pub gate: GateOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PulseArgs {
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub eta_h: Option<f64>,
    #[arg(long)]
    pub eta_v: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub omega: f64,
    /// Spectral width of the Gaussian envelope, units of g.
    #[arg(long)]
    pub sigma: f64,
    /// Time step, units of 1/g (default 0.001/kappa).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = AtomArg::Gh)]
    pub atom: AtomArg,
    #[arg(long, value_enum, default_value_t = PolArg::H)]
    pub polarization: PolArg,
    /// Keep every k-th sample in the CSV.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Real)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = REFERENCE_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "{}:{}: expected key = value",
                path.display(),
                no + 1
            ))
        })?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!(
                "{}:{}: empty key",
                path.display(),
                no + 1
            )));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Removes `--config` and splices the file's flags in right after the
/// subcommand, so later command-line flags override them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(
                it.next()
                    .ok_or_else(|| CliError::Usage("--config needs a file".into()))?,
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let mut inject = Vec::new();
    for (k, v) in read_config(Path::new(&path))? {
        inject.push(format!("--{k}"));
        if !v.is_empty() {
            inject.push(v);
        }
    }
    let head = match rest.get(1).map(String::as_str) {
        Some("oracle") => 3,
        _ => 2,
    }
    .min(rest.len());
    rest.splice(head..head, inject);
    Ok(rest)
}

struct Output<'a> {
    file: Option<PathBuf>,
    stdout: &'a mut dyn Write,
}

impl Output<'_> {
    fn emit(&mut self, text: &str) -> Result<(), CliError> {
        match &self.file {
            Some(p) => fs::write(p, text)
                .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", p.display()))),
            None => self
                .stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Compute(format!("stdout: {e}"))),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))
}

fn fmt_amp(a: Amplitude) -> String {
    let sign = if a.im.is_sign_negative() { '-' } else { '+' };
    format!("({:.6}{sign}{:.6}i)", a.re, a.im.abs())
}

/// Parses and runs one command line. `args[0]` is the program name.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(
    cmd: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    match cmd {
        Command::Evolve(a) => evolve(a, stdout),
        Command::TruthTable(a) => truth_table_cmd(a, stdout, stderr),
        Command::Sweep(a) => sweep_cmd(a, stdout),
        Command::EmitCircuit(a) => {
            let text = build(a.gate.gate()?).to_text();
            Output {
                file: a.out,
                stdout,
            }
            .emit(&text)
        }
        Command::Oracle(OracleCommand::Pulse(a)) => pulse_cmd(a, stdout, stderr),
        Command::Regress(a) => regress_cmd(a, stdout),
    }
}

fn evolve(a: EvolveArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let gate = a.gate.gate()?;
    let mode = a.physics.mode(a.mode)?;
    let input = parse_state(&a.input)?;
    if input.n() != gate.n {
        return Err(CliError::Usage(format!(
            "input has {} atoms but the gate has n = {}",
            input.n(),
            gate.n
        )));
    }
    let policy = a
        .ports
        .map(MergePolicy::from)
        .unwrap_or(mode.default_policy());
    let output = run_circuit_with(&build(gate), &input, mode, policy)?;
    let text = format!(
        "{}\nnorm_squared = {}\n",
        format_state(&output),
        format_sig(output.norm_squared(), 12)
    );
    Output {
        file: a.out,
        stdout,
    }
    .emit(&text)
}

fn truth_table_cmd(
    a: TruthTableArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let gate = a.gate.gate()?;
    let mode = a.physics.mode(a.mode)?;
    let table = truth_table_with_limit(gate, mode, a.limit)?;
    let mut text = String::new();
    for row in &table.rows {
        let input = format_state(&crate::state::HybridState::basis(gate.n, row.input));
        let input = input.trim_start_matches("(1+0i)");
        let phase = row.phase.map(fmt_amp).unwrap_or_else(|| "-".into());
        text.push_str(&format!(
            "{input} -> {}  phase={phase}\n",
            format_state(&row.output)
        ));
    }
    Output {
        file: a.out,
        stdout,
    }
    .emit(&text)?;
    let summary = match table.global_phase(1e-9) {
        Some(p) if table.is_permutation(1e-9) => {
            format!("permutation with global phase {}", fmt_amp(p))
        }
        _ if table.is_permutation(1e-9) => "permutation with row-dependent phases".to_string(),
        _ => "not a permutation".to_string(),
    };
    let _ = writeln!(stderr, "{gate}: {} rows, {summary}", table.rows.len());
    Ok(())
}

fn sweep_cmd(a: SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let gate = a.gate.gate()?;
    let kappa: GridAxis = a.kappa.parse()?;
    let gamma: GridAxis = a.gamma.parse()?;
    let cfg = MetricConfig {
        fidelity_convention: match a.fidelity_convention {
            FidelityArg::Normalized => FidelityConvention::NormalizedOverlap,
            FidelityArg::Raw => FidelityConvention::RawOverlap,
        },
        efficiency_convention: match a.efficiency_convention {
            EfficiencyArg::Projection => EfficiencyConvention::IdealProjection,
            EfficiencyArg::Norm => EfficiencyConvention::OutputNorm,
        },
        port_accounting: a.ports.into(),
        initial_state: match a.input {
            Some(lit) => {
                parse_state(&lit)?;
                InitialState::Explicit(lit)
            }
            None => InitialState::Uniform,
        },
        omega_over_g: a.omega,
        eta_over_g: a.eta,
        threads: a.threads,
    };
    cfg.params(1.0, 0.0)?;
    let metric = match a.metric {
        MetricArg::Fidelity => Metric::Fidelity,
        MetricArg::Efficiency => Metric::Efficiency,
    };
    let result = sweep(gate, metric, kappa, gamma, &cfg)?;
    Output {
        file: a.out,
        stdout,
    }
    .emit(&result.to_csv())?;
    if let Some(p) = a.summary {
        write_file(&p, &(result.summary_json() + "\n"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CoeffJson {
    re: f64,
    im: f64,
}

impl From<Amplitude> for CoeffJson {
    fn from(a: Amplitude) -> Self {
        CoeffJson { re: a.re, im: a.im }
    }
}

#[derive(Serialize)]
struct PulseSummary {
    params: CavityParams,
    sigma: f64,
    dt: f64,
    steps: usize,
    atom: AtomGround,
    polarization: Polarization,
    input_energy: f64,
    output_energy_h: f64,
    output_energy_v: f64,
    extracted: CoeffSet,
    analytic: CoeffSet,
    max_deviation: f64,
}

#[derive(Serialize)]
struct CoeffSet {
    r0: CoeffJson,
    rh1: CoeffJson,
    rh2: CoeffJson,
}

fn pulse_cmd(a: PulseArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let p = CavityParams::new(
        a.kappa,
        a.gamma,
        a.eta_h.unwrap_or(a.eta),
        a.eta_v.unwrap_or(a.eta),
        a.omega,
    )?;
    let dt = a.dt.unwrap_or(1e-3 / a.kappa);
    if a.every == 0 {
        return Err(CliError::Usage("--every must be >= 1".into()));
    }
    let pulse = GaussianPulse::new(a.sigma)?.with_carrier(a.omega);
    let atom = match a.atom {
        AtomArg::Gh => AtomGround::Gh,
        AtomArg::Gv => AtomGround::Gv,
    };
    let pol = match a.polarization {
        PolArg::H => Polarization::H,
        PolArg::V => Polarization::V,
    };
    let result = integrate_pulse(&p, atom, pol, &pulse, dt, a.every)?;
    let mut csv = String::from("t,in_re,in_im,out_h_re,out_h_im,out_v_re,out_v_im\n");
    for s in &result.samples {
        let cells = [
            s.t, s.input.re, s.input.im, s.out_h.re, s.out_h.im, s.out_v.re, s.out_v.im,
        ];
        let row: Vec<String> = cells.iter().map(|&x| format_sig(x, 10)).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Output {
        file: a.out,
        stdout,
    }
    .emit(&csv)?;

    let extracted = effective_coeffs(&p, &pulse, dt)?;
    let (rh1, rh2) =
        hot_coeffs(&p, Polarization::H).unwrap_or((cold_coeff(&p), Amplitude::new(0.0, 0.0)));
    let r0 = cold_coeff(&p);
    let max_deviation = [
        (extracted.r0 - r0).norm(),
        (extracted.rh1 - rh1).norm(),
        (extracted.rh2 - rh2).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let _ = writeln!(
        stderr,
        "extracted r0={} rh1={} rh2={}  max deviation from frequency domain {:.3e}",
        fmt_amp(extracted.r0),
        fmt_amp(extracted.rh1),
        fmt_amp(extracted.rh2),
        max_deviation
    );
    if let Some(path) = a.summary {
        let summary = PulseSummary {
            params: p,
            sigma: a.sigma,
            dt,
            steps: result.steps,
            atom,
            polarization: pol,
            input_energy: result.input_energy,
            output_energy_h: result.output_energy[0],
            output_energy_v: result.output_energy[1],
            extracted: CoeffSet {
                r0: extracted.r0.into(),
                rh1: extracted.rh1.into(),
                rh2: extracted.rh2.into(),
            },
            analytic: CoeffSet {
                r0: r0.into(),
                rh1: rh1.into(),
                rh2: rh2.into(),
            },
            max_deviation,
        };
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_file(&path, &(json + "\n"))?;
    }
    Ok(())
}

fn regress_cmd(a: RegressArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !(a.tolerance.is_finite() && a.tolerance >= 0.0) {
        return Err(CliError::Usage("--tolerance must be >= 0".into()));
    }
    let mode = match a.mode {
        ModeArg::Ideal => RegressionMode::Ideal,
        ModeArg::Real => RegressionMode::Real,
    };
    let report = run_regression(mode, a.tolerance, &MetricConfig::default())?;
    Output {
        file: a.out,
        stdout,
    }
    .emit(&report.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("lgs").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn truth_table_smoke() {
        let (code, out, _) = run_capture(&[
            "truth-table",
            "--gate",
            "cnot",
            "--n",
            "1",
            "--mode",
            "ideal",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 4);
        assert!(out.contains("|V,l0;gh> -> (1+0i)|V,l0;gv>"));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(
            run_capture(&["truth-table", "--gate", "cnot", "--bogus"]).0,
            2
        );
        assert_eq!(run_capture(&["truth-table", "--gate", "nand"]).0, 2);
        assert_eq!(
            run_capture(&["evolve", "--gate", "toffoli", "--mode", "real", "--input", "x"]).0,
            2
        );
        assert_eq!(
            run_capture(&["emit-circuit", "--gate", "fredkin", "--n", "1"]).0,
            2
        );
        assert_eq!(
            run_capture(&["sweep", "--gate", "cnot", "--metric", "fidelity", "--kappa", "1:0:3"]).0,
            2
        );
        assert_eq!(run_capture(&[]).0, 2);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn evolve_matches_library() {
        let lit = "photon=0.6H+0.8V; atom1=0.8gh+0.6gv; atom2=1gh+0gv";
        let (code, out, _) = run_capture(&[
            "evolve", "--gate", "toffoli", "--n", "2", "--mode", "real", "--kappa", "1", "--gamma",
            "0.2", "--input", lit,
        ]);
        assert_eq!(code, 0);
        let p = CavityParams::resonant(1.0, 0.2).unwrap();
        let s = parse_state(lit).unwrap();
        let g = GateKind::new(GateVariant::Toffoli, 2).unwrap();
        let expect = crate::circuits::run_circuit(&build(g), &s, Mode::Real(p)).unwrap();
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), format_state(&expect));
        assert!(lines.next().unwrap().starts_with("norm_squared = 0.9"));
    }

    #[test]
    fn config_file_and_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# sweep settings\ngate = toffoli\nmetric = efficiency\nkappa = 1:1:1\ngamma = 0.2:0.2:1\n").unwrap();
        let cfg = cfg.to_str().unwrap();
        let (code, out, err) = run_capture(&["sweep", "--config", cfg]);
        assert_eq!(code, 0, "{err}");
        assert!(out.lines().nth(1).unwrap().starts_with("1,0.2,0.930"));
        let (code, out, err) = run_capture(&["--config", cfg, "sweep", "--gamma", "0.1:0.1:1"]);
        assert_eq!(code, 0, "{err}");
        assert!(out.lines().nth(1).unwrap().starts_with("1,0.1,0.963"));
        assert_eq!(
            run_capture(&["sweep", "--config", "/nonexistent/file"]).0,
            2
        );
    }

    #[test]
    fn regress_reports_matching_conventions() {
        let (code, out, _) = run_capture(&["regress"]);
        assert_eq!(code, 0);
        assert!(out.contains("matching fidelity conventions: normalized-overlap/coherent"));
        assert!(out.contains("matching efficiency conventions: ideal-projection/coherent"));
    }
}
