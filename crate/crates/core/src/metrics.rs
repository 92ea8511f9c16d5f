//! Fidelity and efficiency of the lossy gates, and sweeps over `(κ/g, γ/g)`.
//!
//! The lossy output is compared with the ideal output for the same input.
//! Two fidelity conventions are available:
//!
//! * `NormalizedOverlap`: `|⟨ideal|actual⟩|² / ‖actual‖²`
//! * `RawOverlap`: `|⟨ideal|actual⟩|²`
//!
//! Efficiency is either the squared projection onto the ideal output
//! (`IdealProjection`) or the surviving norm `‖actual‖²` (`OutputNorm`).
//! Amplitude reaching a PBS merge in the wrong polarization is handled by
//! the configured [`MergePolicy`].
//!
//! The defaults (normalized overlap, ideal projection, coherent
//! recombination, uniform product input) reproduce the reference values in
//! [`reference_points`].

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cavity::{CavityError, CavityParams};
use crate::circuits::{
    build, run_circuit_with, Circuit, CircuitError, GateKind, GateVariant, Mode, INPUT_LINE,
};
use crate::elements::MergePolicy;
use crate::state::{make_product_state, parse_state, Amplitude, HybridState, StateError};

/// Values above `1 + VALUE_SLACK` are rejected rather than clamped.
pub const VALUE_SLACK: f64 = 1e-9;
pub const THREADS_ENV: &str = "LGS_THREADS";

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("the output state vanished; fidelity is undefined")]
    ZeroState,
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(
        "value {value} at kappa/g = {kappa_over_g}, gamma/g = {gamma_over_g} is outside [0, 1]"
    )]
    OutOfRange {
        kappa_over_g: f64,
        gamma_over_g: f64,
        value: f64,
    },
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityConvention {
    NormalizedOverlap,
    RawOverlap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfficiencyConvention {
    IdealProjection,
    OutputNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Every qubit in `(|0⟩ + |1⟩)/√2`.
    Uniform,
    /// A state literal, see [`crate::state::parse_state`].
    Explicit(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Fidelity,
    Efficiency,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fidelity" => Ok(Metric::Fidelity),
            "efficiency" => Ok(Metric::Efficiency),
            _ => Err(format!("unknown metric `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricConfig {
    pub fidelity_convention: FidelityConvention,
    pub efficiency_convention: EfficiencyConvention,
    pub port_accounting: MergePolicy,
    pub initial_state: InitialState,
    pub omega_over_g: f64,
    pub eta_over_g: f64,
    /// Worker cap for sweeps; `None` defers to `LGS_THREADS`, then to rayon.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            fidelity_convention: FidelityConvention::NormalizedOverlap,
            efficiency_convention: EfficiencyConvention::IdealProjection,
            port_accounting: MergePolicy::Coherent,
            initial_state: InitialState::Uniform,
            omega_over_g: 0.0,
            eta_over_g: 1.0,
            threads: None,
        }
    }
}

impl MetricConfig {
    pub fn params(
        &self,
        kappa_over_g: f64,
        gamma_over_g: f64,
    ) -> Result<CavityParams, CavityError> {
        CavityParams::new(
            kappa_over_g,
            gamma_over_g,
            self.eta_over_g,
            self.eta_over_g,
            self.omega_over_g,
        )
    }
}

pub fn uniform_state(n: usize) -> HybridState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let pair = (Amplitude::new(h, 0.0), Amplitude::new(h, 0.0));
    make_product_state(pair, INPUT_LINE, &vec![pair; n]).expect("uniform amplitudes are normalized")
}

pub fn initial_state(policy: &InitialState, n: usize) -> Result<HybridState, MetricError> {
    match policy {
        InitialState::Uniform => Ok(uniform_state(n)),
        InitialState::Explicit(lit) => {
            let s = parse_state(lit)?;
            if s.n() != n {
                return Err(StateError::AtomCountMismatch {
                    left: s.n(),
                    right: n,
                }
                .into());
            }
            Ok(s)
        }
    }
}

pub fn ideal_reference(g: GateKind, s0: &HybridState) -> Result<HybridState, MetricError> {
    Ok(run_circuit_with(
        &build(g),
        s0,
        Mode::Ideal,
        MergePolicy::Strict,
    )?)
}

pub fn fidelity(
    actual: &HybridState,
    ideal: &HybridState,
    convention: FidelityConvention,
) -> Result<f64, MetricError> {
    let norm = actual.norm_squared();
    if norm == 0.0 {
        return Err(MetricError::ZeroState);
    }
    let overlap = ideal.inner_product(actual)?.norm_sqr();
    Ok(match convention {
        FidelityConvention::NormalizedOverlap => overlap / norm,
        FidelityConvention::RawOverlap => overlap,
    })
}

/// Surviving norm of a state that started normalized.
pub fn efficiency(actual: &HybridState) -> f64 {
    actual.norm_squared()
}

pub fn projected_efficiency(actual: &HybridState, ideal: &HybridState) -> Result<f64, MetricError> {
    Ok(ideal.inner_product(actual)?.norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GatePoint {
    pub fidelity: f64,
    pub efficiency: f64,
}

impl GatePoint {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Fidelity => self.fidelity,
            Metric::Efficiency => self.efficiency,
        }
    }
}

/// A gate with its input and ideal output prepared once.
pub struct Evaluator {
    pub gate: GateKind,
    pub config: MetricConfig,
    circuit: Circuit,
    input: HybridState,
    ideal: HybridState,
}

impl Evaluator {
    pub fn new(gate: GateKind, config: MetricConfig) -> Result<Self, MetricError> {
        let input = initial_state(&config.initial_state, gate.n)?;
        let ideal = ideal_reference(gate, &input)?;
        Ok(Evaluator {
            gate,
            config,
            circuit: build(gate),
            input,
            ideal,
        })
    }

    pub fn input(&self) -> &HybridState {
        &self.input
    }

    pub fn ideal(&self) -> &HybridState {
        &self.ideal
    }

    pub fn run(&self, mode: Mode) -> Result<HybridState, MetricError> {
        let policy = match mode {
            Mode::Ideal => MergePolicy::Strict,
            Mode::Real(_) => self.config.port_accounting,
        };
        Ok(run_circuit_with(&self.circuit, &self.input, mode, policy)?)
    }

    pub fn point_in_mode(&self, mode: Mode) -> Result<GatePoint, MetricError> {
        let actual = self.run(mode)?;
        let fidelity = fidelity(&actual, &self.ideal, self.config.fidelity_convention)?;
        let efficiency = match self.config.efficiency_convention {
            EfficiencyConvention::IdealProjection => projected_efficiency(&actual, &self.ideal)?,
            EfficiencyConvention::OutputNorm => efficiency(&actual),
        };
        Ok(GatePoint {
            fidelity,
            efficiency,
        })
    }

    pub fn point(&self, kappa_over_g: f64, gamma_over_g: f64) -> Result<GatePoint, MetricError> {
        let p = self.config.params(kappa_over_g, gamma_over_g)?;
        self.point_in_mode(Mode::Real(p))
    }
}

pub fn evaluate(
    g: GateKind,
    kappa_over_g: f64,
    gamma_over_g: f64,
    cfg: &MetricConfig,
) -> Result<GatePoint, MetricError> {
    Evaluator::new(g, cfg.clone())?.point(kappa_over_g, gamma_over_g)
}

/// Inclusive grid `lo..=hi` with `steps` nodes; one step is the single point `lo`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

pub const DEFAULT_KAPPA_AXIS: GridAxis = GridAxis {
    lo: 0.2,
    hi: 2.0,
    steps: 30,
};
pub const DEFAULT_GAMMA_AXIS: GridAxis = GridAxis {
    lo: 0.01,
    hi: 0.2,
    steps: 30,
};

impl GridAxis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self, MetricError> {
        let axis = GridAxis { lo, hi, steps };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(MetricError::InvalidRange("bounds must be finite".into()));
        }
        if self.lo < 0.0 || self.hi < self.lo {
            return Err(MetricError::InvalidRange(format!(
                "need 0 <= lo <= hi, got {}:{}",
                self.lo, self.hi
            )));
        }
        if self.steps == 0 {
            return Err(MetricError::InvalidRange("steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == last {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / last as f64
                }
            })
            .collect()
    }
}

impl std::str::FromStr for GridAxis {
    type Err = MetricError;

    /// `lo:hi:steps`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MetricError::InvalidRange(format!("expected lo:hi:steps, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts.as_slice() else {
            return Err(bad());
        };
        GridAxis::new(
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            steps.trim().parse().map_err(|_| bad())?,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub kappa_over_g: f64,
    pub gamma_over_g: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub gate: GateKind,
    pub metric: Metric,
    pub config: MetricConfig,
    pub kappa_axis: GridAxis,
    pub gamma_axis: GridAxis,
    /// κ outer, γ inner.
    pub rows: Vec<SweepRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary<'a> {
    pub gate: GateVariant,
    pub n: usize,
    pub metric: Metric,
    pub config: &'a MetricConfig,
    pub kappa_axis: GridAxis,
    pub gamma_axis: GridAxis,
    pub rows: usize,
    pub min: f64,
    pub max: f64,
    pub argmin: SweepRow,
    pub argmax: SweepRow,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kappa_over_g,gamma_over_g,value\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_sig(r.kappa_over_g, 10),
                format_sig(r.gamma_over_g, 10),
                format_sig(r.value, 10)
            );
        }
        out
    }

    pub fn summary(&self) -> SweepSummary<'_> {
        // first occurrence wins on ties
        let mut argmin = self.rows[0];
        let mut argmax = self.rows[0];
        for r in &self.rows {
            if r.value < argmin.value {
                argmin = *r;
            }
            if r.value > argmax.value {
                argmax = *r;
            }
        }
        SweepSummary {
            gate: self.gate.variant,
            n: self.gate.n,
            metric: self.metric,
            config: &self.config,
            kappa_axis: self.kappa_axis,
            gamma_axis: self.gamma_axis,
            rows: self.rows.len(),
            min: argmin.value,
            max: argmax.value,
            argmin,
            argmax,
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// Values along γ for the `i`-th κ node.
    pub fn column(&self, i: usize) -> &[SweepRow] {
        let m = self.gamma_axis.steps;
        &self.rows[i * m..(i + 1) * m]
    }
}

fn thread_cap(cfg: &MetricConfig) -> Option<usize> {
    cfg.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

pub fn sweep(
    g: GateKind,
    metric: Metric,
    kappa: GridAxis,
    gamma: GridAxis,
    cfg: &MetricConfig,
) -> Result<SweepResult, MetricError> {
    kappa.validate()?;
    gamma.validate()?;
    if kappa.lo <= 0.0 {
        return Err(MetricError::InvalidRange("kappa/g must be > 0".into()));
    }
    let eval = Evaluator::new(g, cfg.clone())?;
    let nodes: Vec<(f64, f64)> = kappa
        .values()
        .into_iter()
        .flat_map(|k| gamma.values().into_iter().map(move |y| (k, y)))
        .collect();
    let compute = || {
        nodes
            .par_iter()
            .map(|&(k, y)| {
                let value = eval.point(k, y)?.get(metric);
                if !(value.is_finite() && (0.0..=1.0 + VALUE_SLACK).contains(&value)) {
                    return Err(MetricError::OutOfRange {
                        kappa_over_g: k,
                        gamma_over_g: y,
                        value,
                    });
                }
                Ok(SweepRow {
                    kappa_over_g: k,
                    gamma_over_g: y,
                    value,
                })
            })
            .collect::<Result<Vec<_>, MetricError>>()
    };
    let rows = match thread_cap(cfg) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| MetricError::Threads(e.to_string()))?
            .install(compute)?,
        None => compute()?,
    };
    Ok(SweepResult {
        gate: g,
        metric,
        config: cfg.clone(),
        kappa_axis: kappa,
        gamma_axis: gamma,
        rows,
    })
}

/// `%.{sig}g`-style formatting.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A published value used for regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub gate: GateVariant,
    pub n: usize,
    pub metric: Metric,
    pub kappa_over_g: f64,
    pub gamma_over_g: f64,
    pub value: f64,
}

const fn rp(
    gate: GateVariant,
    metric: Metric,
    kappa_over_g: f64,
    gamma_over_g: f64,
    value: f64,
) -> ReferencePoint {
    let n = match gate {
        GateVariant::Cnot => 1,
        _ => 2,
    };
    ReferencePoint {
        gate,
        n,
        metric,
        kappa_over_g,
        gamma_over_g,
        value,
    }
}

const REFERENCE: [ReferencePoint; 10] = [
    rp(GateVariant::Fredkin, Metric::Fidelity, 2.0, 0.2, 0.9988),
    rp(GateVariant::Fredkin, Metric::Fidelity, 1.0, 0.2, 0.9997),
    rp(GateVariant::Toffoli, Metric::Fidelity, 2.0, 0.2, 0.9972),
    rp(GateVariant::Toffoli, Metric::Fidelity, 1.0, 0.2, 0.9993),
    rp(GateVariant::Cnot, Metric::Efficiency, 1.0, 0.2, 0.9518),
    rp(GateVariant::Cnot, Metric::Efficiency, 1.0, 0.1, 0.9755),
    rp(GateVariant::Fredkin, Metric::Efficiency, 1.0, 0.2, 0.9524),
    rp(GateVariant::Fredkin, Metric::Efficiency, 1.0, 0.1, 0.9756),
    rp(GateVariant::Toffoli, Metric::Efficiency, 1.0, 0.2, 0.9304),
    rp(GateVariant::Toffoli, Metric::Efficiency, 1.0, 0.1, 0.9639),
];

pub const REFERENCE_TOLERANCE: f64 = 5e-4;

pub fn reference_points() -> &'static [ReferencePoint] {
    &REFERENCE
}

/// One way of scoring a metric: the formula plus the port accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Convention {
    pub metric: Metric,
    pub fidelity: FidelityConvention,
    pub efficiency: EfficiencyConvention,
    pub ports: MergePolicy,
}

impl Convention {
    pub fn label(&self) -> String {
        let formula = match self.metric {
            Metric::Fidelity => match self.fidelity {
                FidelityConvention::NormalizedOverlap => "normalized-overlap",
                FidelityConvention::RawOverlap => "raw-overlap",
            },
            Metric::Efficiency => match self.efficiency {
                EfficiencyConvention::IdealProjection => "ideal-projection",
                EfficiencyConvention::OutputNorm => "output-norm",
            },
        };
        let ports = match self.ports {
            MergePolicy::Strict => "strict",
            MergePolicy::Discard => "discard",
            MergePolicy::Coherent => "coherent",
        };
        format!("{formula}/{ports}")
    }

    pub fn apply(&self, cfg: &MetricConfig) -> MetricConfig {
        MetricConfig {
            fidelity_convention: self.fidelity,
            efficiency_convention: self.efficiency,
            port_accounting: self.ports,
            ..cfg.clone()
        }
    }

    /// Every convention scored by the regression, defaults first.
    pub fn all(metric: Metric) -> Vec<Convention> {
        let mut out = Vec::new();
        for ports in [MergePolicy::Coherent, MergePolicy::Discard] {
            match metric {
                Metric::Fidelity => {
                    for fidelity in [
                        FidelityConvention::NormalizedOverlap,
                        FidelityConvention::RawOverlap,
                    ] {
                        out.push(Convention {
                            metric,
                            fidelity,
                            efficiency: EfficiencyConvention::IdealProjection,
                            ports,
                        });
                    }
                }
                Metric::Efficiency => {
                    for efficiency in [
                        EfficiencyConvention::IdealProjection,
                        EfficiencyConvention::OutputNorm,
                    ] {
                        out.push(Convention {
                            metric,
                            fidelity: FidelityConvention::NormalizedOverlap,
                            efficiency,
                            ports,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionMode {
    Ideal,
    Real,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionRow {
    pub point: ReferencePoint,
    pub convention: String,
    pub value: f64,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionReport {
    pub mode: RegressionMode,
    pub tolerance: f64,
    pub rows: Vec<RegressionRow>,
    /// Conventions that pass every point of their metric.
    pub matching: Vec<String>,
}

impl RegressionReport {
    pub fn passes(&self, convention: &str) -> bool {
        self.matching.iter().any(|m| m == convention)
    }

    pub fn rows_for(&self, convention: &str) -> impl Iterator<Item = &RegressionRow> {
        let c = convention.to_string();
        self.rows.iter().filter(move |r| r.convention == c)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# regression ({} mode, tolerance {})",
            match self.mode {
                RegressionMode::Ideal => "ideal",
                RegressionMode::Real => "real",
            },
            self.tolerance
        );
        let _ = writeln!(
            out,
            "{:<8} {:<10} {:>6} {:>6} {:>8} {:>10} {:>10}  {:<28} result",
            "gate", "metric", "kappa", "gamma", "expected", "value", "deviation", "convention"
        );
        for r in &self.rows {
            let p = &r.point;
            let _ = writeln!(
                out,
                "{:<8} {:<10} {:>6} {:>6} {:>8.4} {:>10.6} {:>+10.6}  {:<28} {}",
                p.gate.name(),
                match p.metric {
                    Metric::Fidelity => "fidelity",
                    Metric::Efficiency => "efficiency",
                },
                p.kappa_over_g,
                p.gamma_over_g,
                p.value,
                r.value,
                r.deviation,
                r.convention,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        for metric in [Metric::Fidelity, Metric::Efficiency] {
            let names: Vec<String> = Convention::all(metric)
                .iter()
                .map(Convention::label)
                .filter(|l| self.passes(l))
                .collect();
            let label = match metric {
                Metric::Fidelity => "fidelity",
                Metric::Efficiency => "efficiency",
            };
            let _ = writeln!(
                out,
                "matching {label} conventions: {}",
                if names.is_empty() {
                    "none".to_string()
                } else {
                    names.join(", ")
                }
            );
        }
        out
    }
}

/// Scores every reference point under every convention.
pub fn run_regression(
    mode: RegressionMode,
    tolerance: f64,
    base: &MetricConfig,
) -> Result<RegressionReport, MetricError> {
    let mut rows = Vec::new();
    let mut matching = Vec::new();
    for metric in [Metric::Fidelity, Metric::Efficiency] {
        for conv in Convention::all(metric) {
            let cfg = conv.apply(base);
            let label = conv.label();
            let mut all_pass = true;
            for point in reference_points().iter().filter(|p| p.metric == metric) {
                let gate = GateKind::new(point.gate, point.n)?;
                let eval = Evaluator::new(gate, cfg.clone())?;
                let value = match mode {
                    RegressionMode::Ideal => eval.point_in_mode(Mode::Ideal)?,
                    RegressionMode::Real => eval.point(point.kappa_over_g, point.gamma_over_g)?,
                }
                .get(metric);
                let deviation = value - point.value;
                let pass = deviation.abs() <= tolerance;
                all_pass &= pass;
                rows.push(RegressionRow {
                    point: *point,
                    convention: label.clone(),
                    value,
                    deviation,
                    pass,
                });
            }
            if all_pass {
                matching.push(label);
            }
        }
    }
    Ok(RegressionReport {
        mode,
        tolerance,
        rows,
        matching,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::hot_coeffs;
    use crate::circuits::{run_circuit, GateVariant as GV};
    use crate::state::{AtomGround, BasisKet, LineLabel, Polarization};
    use proptest::prelude::*;

    fn gate(v: GV, n: usize) -> GateKind {
        GateKind::new(v, n).unwrap()
    }

    #[test]
    fn fidelity_conventions() {
        let ideal = uniform_state(2);
        assert!(
            (fidelity(&ideal, &ideal, FidelityConvention::NormalizedOverlap).unwrap() - 1.0).abs()
                < 1e-14
        );
        let half = ideal.scaled(Amplitude::new(0.5, 0.0));
        assert!(
            (fidelity(&half, &ideal, FidelityConvention::NormalizedOverlap).unwrap() - 1.0).abs()
                < 1e-14
        );
        assert!(
            (fidelity(&half, &ideal, FidelityConvention::RawOverlap).unwrap() - 0.25).abs() < 1e-14
        );
        assert!(matches!(
            fidelity(
                &HybridState::empty(2),
                &ideal,
                FidelityConvention::RawOverlap
            ),
            Err(MetricError::ZeroState)
        ));
    }

    #[test]
    fn single_bounce_efficiency() {
        let p = CavityParams::resonant(1.0, 0.2).unwrap();
        let (rh1, rh2) = hot_coeffs(&p, Polarization::H).unwrap();
        let s = HybridState::basis(
            1,
            BasisKet::new(Polarization::H, LineLabel(2), &[AtomGround::Gh]),
        );
        let out = crate::cavity::scatter_real(&s, LineLabel(2), 0, &p).unwrap();
        assert!((efficiency(&out) - (rh1.norm_sqr() + rh2.norm_sqr())).abs() < 1e-15);
    }

    #[test]
    fn ideal_reference_is_the_ideal_gate() {
        let g = gate(GV::Cnot, 1);
        let s = uniform_state(1);
        let r = ideal_reference(g, &s).unwrap();
        assert!((r.norm_squared() - 1.0).abs() < 1e-14);
        assert_eq!(r, run_circuit(&build(g), &s, Mode::Ideal).unwrap());
        // H photons pass a Toffoli untouched
        let lit = "photon=1H+0V; atom1=0.6gh+0.8gv; atom2=0.8gh+0.6igv";
        let s = parse_state(lit).unwrap();
        assert_eq!(ideal_reference(gate(GV::Toffoli, 2), &s).unwrap(), s);
    }

    #[test]
    fn reference_values_under_defaults() {
        let cfg = MetricConfig::default();
        for p in reference_points() {
            let v = evaluate(gate(p.gate, p.n), p.kappa_over_g, p.gamma_over_g, &cfg)
                .unwrap()
                .get(p.metric);
            assert!((v - p.value).abs() <= REFERENCE_TOLERANCE, "{p:?}: {v}");
        }
    }

    #[test]
    fn frozen_values() {
        // independent evaluation of the same conventions, 5 decimals
        let cfg = MetricConfig::default();
        let cases = [
            (GV::Fredkin, 2.0, 0.2, Metric::Fidelity, 0.99882),
            (GV::Fredkin, 1.0, 0.2, Metric::Fidelity, 0.99970),
            (GV::Toffoli, 2.0, 0.2, Metric::Fidelity, 0.99717),
            (GV::Toffoli, 1.0, 0.2, Metric::Fidelity, 0.99925),
            (GV::Cnot, 1.0, 0.2, Metric::Efficiency, 0.95181),
            (GV::Cnot, 1.0, 0.1, Metric::Efficiency, 0.97546),
            (GV::Fredkin, 1.0, 0.2, Metric::Efficiency, 0.95241),
            (GV::Fredkin, 1.0, 0.1, Metric::Efficiency, 0.97561),
            (GV::Toffoli, 1.0, 0.2, Metric::Efficiency, 0.93045),
            (GV::Toffoli, 1.0, 0.1, Metric::Efficiency, 0.96390),
        ];
        for (v, k, y, m, want) in cases {
            let n = v.min_atoms();
            let got = evaluate(gate(v, n), k, y, &cfg).unwrap().get(m);
            assert!((got - want).abs() < 6e-6, "{v} {k} {y} {m:?}: {got}");
        }
    }

    #[test]
    fn cnot_fidelity_is_unity_on_uniform_input() {
        let cfg = MetricConfig::default();
        let r = sweep(
            gate(GV::Cnot, 1),
            Metric::Fidelity,
            DEFAULT_KAPPA_AXIS,
            DEFAULT_GAMMA_AXIS,
            &cfg,
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| (row.value - 1.0).abs() < 1e-12));
    }

    #[test]
    fn loss_channel_closes() {
        let cfg = MetricConfig::default();
        for (v, n) in [(GV::Cnot, 1), (GV::Fredkin, 2), (GV::Toffoli, 2)] {
            let e = evaluate(gate(v, n), 1.0, 1e-6, &cfg).unwrap().efficiency;
            assert!(e > 0.9999, "{v}: {e}");
        }
    }

    #[test]
    fn monotone_in_gamma() {
        let cfg = MetricConfig::default();
        for (v, n) in [(GV::Cnot, 1), (GV::Fredkin, 2), (GV::Toffoli, 2)] {
            let g = gate(v, n);
            let eff = sweep(
                g,
                Metric::Efficiency,
                DEFAULT_KAPPA_AXIS,
                DEFAULT_GAMMA_AXIS,
                &cfg,
            )
            .unwrap();
            for i in 0..DEFAULT_KAPPA_AXIS.steps {
                assert!(
                    eff.column(i)
                        .windows(2)
                        .all(|w| w[1].value <= w[0].value + 1e-15),
                    "{v}"
                );
            }
            if v != GV::Cnot {
                let fid = sweep(
                    g,
                    Metric::Fidelity,
                    DEFAULT_KAPPA_AXIS,
                    DEFAULT_GAMMA_AXIS,
                    &cfg,
                )
                .unwrap();
                for i in 0..DEFAULT_KAPPA_AXIS.steps {
                    assert!(
                        fid.column(i)
                            .windows(2)
                            .all(|w| w[1].value <= w[0].value + 1e-15),
                        "{v}"
                    );
                }
            }
        }
    }

    #[test]
    fn grid_axis() {
        let a: GridAxis = "0.2:2.0:30".parse().unwrap();
        let v = a.values();
        assert_eq!(v.len(), 30);
        assert_eq!(v[0], 0.2);
        assert_eq!(v[29], 2.0);
        assert_eq!("0.5:1:1".parse::<GridAxis>().unwrap().values(), vec![0.5]);
        assert!("1:0.5:3".parse::<GridAxis>().is_err());
        assert!("1:2".parse::<GridAxis>().is_err());
        assert!("1:2:0".parse::<GridAxis>().is_err());
    }

    #[test]
    fn sweep_shape_and_order() {
        let cfg = MetricConfig::default();
        let k = GridAxis::new(1.0, 2.0, 2).unwrap();
        let y = GridAxis::new(0.1, 0.2, 2).unwrap();
        let r = sweep(gate(GV::Toffoli, 2), Metric::Efficiency, k, y, &cfg).unwrap();
        let nodes: Vec<(f64, f64)> = r
            .rows
            .iter()
            .map(|r| (r.kappa_over_g, r.gamma_over_g))
            .collect();
        assert_eq!(nodes, [(1.0, 0.1), (1.0, 0.2), (2.0, 0.1), (2.0, 0.2)]);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("kappa_over_g,gamma_over_g,value\n"));
        let json: serde_json::Value = serde_json::from_str(&r.summary_json()).unwrap();
        assert_eq!(json["rows"], 4);
        assert_eq!(json["gate"], "toffoli");
        assert!(json["min"].as_f64().unwrap() <= json["max"].as_f64().unwrap());
    }

    #[test]
    fn sweep_is_deterministic_across_thread_counts() {
        let mut cfg = MetricConfig::default();
        let g = gate(GV::Fredkin, 3);
        let k = GridAxis::new(0.2, 2.0, 7).unwrap();
        let y = GridAxis::new(0.01, 0.2, 5).unwrap();
        cfg.threads = Some(1);
        let a = sweep(g, Metric::Fidelity, k, y, &cfg).unwrap().to_csv();
        cfg.threads = Some(4);
        let b = sweep(g, Metric::Fidelity, k, y, &cfg).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rejects_out_of_range_values() {
        // coherent recombination can gain norm for a detuned, skewed input
        let cfg = MetricConfig {
            efficiency_convention: EfficiencyConvention::OutputNorm,
            omega_over_g: 0.8,
            initial_state: InitialState::Explicit(
                "photon=0.6H+0.8V; atom1=0.8gh+0.6gv; atom2=0.6gh-0.8gv".into(),
            ),
            ..MetricConfig::default()
        };
        let g = gate(GV::Toffoli, 2);
        let res = sweep(
            g,
            Metric::Efficiency,
            GridAxis::new(0.2, 4.0, 12).unwrap(),
            GridAxis::new(0.0, 0.05, 3).unwrap(),
            &cfg,
        );
        match res {
            Err(MetricError::OutOfRange { value, .. }) => assert!(value > 1.0),
            Ok(r) => assert!(r.rows.iter().all(|row| row.value <= 1.0 + VALUE_SLACK)),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn format_sig_matches_printf() {
        assert_eq!(format_sig(0.0, 10), "0");
        assert_eq!(format_sig(1.0, 10), "1");
        assert_eq!(format_sig(0.2, 10), "0.2");
        assert_eq!(format_sig(0.9988166, 10), "0.9988166");
        assert_eq!(format_sig(2.0 / 3.0, 10), "0.6666666667");
        assert_eq!(format_sig(1.0 / 3.0 * 1e-6, 10), "3.333333333e-07");
        assert_eq!(format_sig(12345678901.0, 10), "1.23456789e+10");
        assert_eq!(format_sig(-0.25, 10), "-0.25");
        assert_eq!(format_sig(0.99999999999, 10), "1");
    }

    #[test]
    fn regression_report() {
        let r = run_regression(
            RegressionMode::Real,
            REFERENCE_TOLERANCE,
            &MetricConfig::default(),
        )
        .unwrap();
        assert!(r.passes("normalized-overlap/coherent"));
        assert!(r.passes("ideal-projection/coherent"));
        assert!(!r.passes("output-norm/coherent"));
        let fredkin = r
            .rows_for("ideal-projection/coherent")
            .find(|row| row.point.gate == GV::Fredkin && row.point.gamma_over_g == 0.1)
            .unwrap();
        assert!((fredkin.value - 0.9756).abs() < 5e-4);
        let text = r.to_text();
        assert_eq!(
            text,
            run_regression(
                RegressionMode::Real,
                REFERENCE_TOLERANCE,
                &MetricConfig::default()
            )
            .unwrap()
            .to_text()
        );
        assert!(text.contains("matching fidelity conventions: normalized-overlap/coherent"));

        let ideal = run_regression(
            RegressionMode::Ideal,
            REFERENCE_TOLERANCE,
            &MetricConfig::default(),
        )
        .unwrap();
        assert!(ideal.rows.iter().all(|row| (row.value - 1.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn normalized_fidelity_is_scale_invariant(re in -3.0f64..3.0, im in -3.0f64..3.0, kappa in 0.2f64..2.0, gamma in 0.01f64..0.2) {
            let c = Amplitude::new(re, im);
            prop_assume!(c.norm() > 1e-3);
            let g = gate(GV::Toffoli, 2);
            let cfg = MetricConfig::default();
            let eval = Evaluator::new(g, cfg.clone()).unwrap();
            let actual = eval.run(Mode::Real(cfg.params(kappa, gamma).unwrap())).unwrap();
            let scaled = actual.scaled(c);
            let f = fidelity(&actual, eval.ideal(), FidelityConvention::NormalizedOverlap).unwrap();
            let fs = fidelity(&scaled, eval.ideal(), FidelityConvention::NormalizedOverlap).unwrap();
            prop_assert!((f - fs).abs() < 1e-12);
            let r = fidelity(&actual, eval.ideal(), FidelityConvention::RawOverlap).unwrap();
            let rs = fidelity(&scaled, eval.ideal(), FidelityConvention::RawOverlap).unwrap();
            prop_assert!((rs - c.norm_sqr() * r).abs() < 1e-10);
        }

        #[test]
        fn metrics_within_unit_interval(kappa in 0.2f64..2.0, gamma in 0.01f64..0.2, which in 0usize..3) {
            let (v, n) = [(GV::Cnot, 1), (GV::Fredkin, 2), (GV::Toffoli, 2)][which];
            let p = evaluate(gate(v, n), kappa, gamma, &MetricConfig::default()).unwrap();
            prop_assert!((0.0..=1.0 + VALUE_SLACK).contains(&p.fidelity));
            prop_assert!((0.0..=1.0 + VALUE_SLACK).contains(&p.efficiency));
        }
    }
}
