//! Gate circuits as explicit step lists, plus an executor.
//!
//! Every builder starts with a PBS splitting the photon on `l0` into `l1`
//! (H, idle) and `l2` (V, active), and ends by merging `l1` with the active
//! line back onto `l0`.
//!
//! * CNOT: `HWP 0` on `l2` when `n` is odd, then for each atom a visit,
//!   `HWP 45`, and a second visit.
//! * Fredkin, `n = 2`: `HWP 0`, then atoms 1, 2, 1.
//! * Fredkin, `n > 2` and Toffoli: a control chain. Each control atom is
//!   visited and followed by a PBS that passes `H` on along the main line and
//!   parks `V` on a bypass line (two mirrors). The core then acts on the main
//!   line: `HWP 90` and atoms `n−1, n, n−1` for Fredkin, or a visit to atom
//!   `n`, `HWP 45`, a second visit and `HWP 90` for Toffoli. The chain is
//!   unwound in reverse, each merge on the PBS that made the split, followed
//!   by a restoring visit to that control atom.
//!
//! The resulting gates are multi-controlled: Fredkin swaps atoms `n−1` and
//! `n`, and Toffoli flips atom `n`, only when the photon is `V` and all
//! earlier atoms are `g_v`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavity::{scatter_ideal, scatter_real, CavityError, CavityParams};
use crate::elements::{ElementError, ElementStep, HwpAngle, MergePolicy};
use crate::state::{
    Amplitude, AtomGround, BasisKet, HybridState, LineLabel, Polarization, StateError,
};

pub const DEFAULT_MAX_ATOMS: usize = 12;
/// Largest truth table (in rows) built by default.
pub const DEFAULT_TABLE_LIMIT: usize = 1 << 14;

pub const INPUT_LINE: LineLabel = LineLabel(0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("input state must have every term on {expected} with {n} atoms")]
    BadInput { expected: LineLabel, n: usize },
    #[error("truth table for n = {n} has {rows} rows, above the limit {limit}")]
    TableTooLarge { n: usize, rows: usize, limit: usize },
    #[error("step {index} (`{step}`): {source}")]
    Element {
        index: usize,
        step: String,
        source: ElementError,
    },
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("circuit text line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateVariant {
    Cnot,
    Fredkin,
    Toffoli,
}

impl GateVariant {
    pub fn name(self) -> &'static str {
        match self {
            GateVariant::Cnot => "cnot",
            GateVariant::Fredkin => "fredkin",
            GateVariant::Toffoli => "toffoli",
        }
    }

    pub fn min_atoms(self) -> usize {
        match self {
            GateVariant::Cnot => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for GateVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GateVariant {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cnot" => Ok(GateVariant::Cnot),
            "fredkin" => Ok(GateVariant::Fredkin),
            "toffoli" => Ok(GateVariant::Toffoli),
            other => Err(CircuitError::InvalidGate(format!("unknown gate `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateKind {
    pub variant: GateVariant,
    pub n: usize,
}

impl GateKind {
    pub fn new(variant: GateVariant, n: usize) -> Result<Self, CircuitError> {
        Self::with_max(variant, n, DEFAULT_MAX_ATOMS)
    }

    pub fn with_max(
        variant: GateVariant,
        n: usize,
        max_atoms: usize,
    ) -> Result<Self, CircuitError> {
        if n < variant.min_atoms() {
            return Err(CircuitError::InvalidGate(format!(
                "{variant} needs n >= {}, got {n}",
                variant.min_atoms()
            )));
        }
        if n > max_atoms {
            return Err(CircuitError::InvalidGate(format!(
                "n = {n} exceeds the maximum of {max_atoms} atoms"
            )));
        }
        Ok(GateKind { variant, n })
    }

    /// Ideal action on a basis ket entering on `l0`.
    pub fn target(&self, ket: &BasisKet) -> BasisKet {
        let n = self.n;
        if ket.polarization == Polarization::H {
            return *ket;
        }
        let all_gv = |upto: usize| (0..upto).all(|i| ket.atom(i) == AtomGround::Gv);
        match self.variant {
            GateVariant::Cnot => (0..n).fold(*ket, |k, i| k.with_atom(i, k.atom(i).flipped())),
            GateVariant::Fredkin if all_gv(n - 2) => ket
                .with_atom(n - 2, ket.atom(n - 1))
                .with_atom(n - 1, ket.atom(n - 2)),
            GateVariant::Toffoli if all_gv(n - 1) => {
                ket.with_atom(n - 1, ket.atom(n - 1).flipped())
            }
            _ => *ket,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} n={}", self.variant, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Ideal,
    Real(CavityParams),
}

impl Mode {
    pub fn default_policy(&self) -> MergePolicy {
        match self {
            Mode::Ideal => MergePolicy::Strict,
            Mode::Real(_) => MergePolicy::Discard,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub gate: Option<GateKind>,
    pub n: usize,
    pub steps: Vec<ElementStep>,
    /// Named states: the state after executing `steps[..=index]`.
    pub cuts: BTreeMap<String, usize>,
}

impl Circuit {
    pub fn lines(&self) -> BTreeSet<LineLabel> {
        self.steps.iter().flat_map(|s| s.lines()).collect()
    }

    pub fn cut(&self, name: &str) -> Option<usize> {
        self.cuts.get(name).copied()
    }

    /// Writes the text format: one element per line, PBS steps annotated with
    /// their physical device.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.gate {
            Some(g) => out.push_str(&format!("# {} n={}\n", g.variant, g.n)),
            None => out.push_str(&format!("# n={}\n", self.n)),
        }
        for step in &self.steps {
            match step {
                ElementStep::PbsSplit { device, .. } | ElementStep::PbsMerge { device, .. } => {
                    out.push_str(&format!("{step}  # PBS{}\n", device + 1))
                }
                _ => out.push_str(&format!("{step}\n")),
            }
        }
        out
    }

    /// Parses the text format. A `# PBSk` annotation assigns the device;
    /// unannotated PBS steps each get a fresh one. The atom count comes from
    /// an `n=` header comment or, failing that, the highest atom visited.
    pub fn from_text(text: &str) -> Result<Self, CircuitError> {
        let mut steps = Vec::new();
        let mut header: Option<(Option<GateVariant>, usize)> = None;
        let mut next_free = 1_000_000;
        for (no, raw) in text.lines().enumerate() {
            let (body, comment) = match raw.find('#') {
                Some(i) => (&raw[..i], raw[i + 1..].trim()),
                None => (raw, ""),
            };
            let body = body.trim();
            if body.is_empty() {
                if header.is_none() {
                    header = parse_header(comment);
                }
                continue;
            }
            let mut step: ElementStep =
                body.parse()
                    .map_err(|e: ElementError| CircuitError::Parse {
                        line: no + 1,
                        message: e.to_string(),
                    })?;
            let device = comment
                .strip_prefix("PBS")
                .and_then(|d| d.trim().parse::<usize>().ok())
                .filter(|&d| d >= 1)
                .map(|d| d - 1);
            match &mut step {
                ElementStep::PbsSplit { device: d, .. }
                | ElementStep::PbsMerge { device: d, .. } => {
                    *d = device.unwrap_or_else(|| {
                        next_free += 1;
                        next_free
                    });
                }
                _ => {}
            }
            steps.push(step);
        }
        let visited = steps
            .iter()
            .filter_map(|s| match s {
                ElementStep::CavityVisit { atom, .. } => Some(atom + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let (variant, n) = header.unwrap_or((None, visited));
        if n < visited {
            return Err(CircuitError::Parse {
                line: 1,
                message: format!("header declares n={n} but atom{visited} is visited"),
            });
        }
        let gate = variant.and_then(|v| GateKind::with_max(v, n, usize::MAX).ok());
        Ok(Circuit {
            gate,
            n,
            steps,
            cuts: BTreeMap::new(),
        })
    }

    pub fn element_count(&self) -> ElementCounts {
        let mut c = ElementCounts::default();
        let mut devices = BTreeSet::new();
        for step in &self.steps {
            match *step {
                ElementStep::PbsSplit { device, .. } | ElementStep::PbsMerge { device, .. } => {
                    devices.insert(device);
                }
                ElementStep::Hwp { angle, .. } => match angle {
                    HwpAngle::Deg0 => c.hwp0 += 1,
                    HwpAngle::Deg45 => c.hwp45 += 1,
                    HwpAngle::Deg90 => c.hwp90 += 1,
                },
                ElementStep::Mirror { .. } => c.mirrors += 1,
                ElementStep::CavityVisit { .. } => c.cavity_visits += 1,
            }
        }
        c.pbs = devices.len();
        c
    }
}

fn parse_header(comment: &str) -> Option<(Option<GateVariant>, usize)> {
    let mut variant = None;
    let mut n = None;
    for tok in comment.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        } else if let Ok(g) = tok.parse() {
            variant = Some(g);
        }
    }
    n.map(|n| (variant, n))
}

/// Physical element inventory. Split and merge on the same device count once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ElementCounts {
    pub pbs: usize,
    pub hwp0: usize,
    pub hwp45: usize,
    pub hwp90: usize,
    pub mirrors: usize,
    pub cavity_visits: usize,
}

impl ElementCounts {
    pub fn optical_elements(&self) -> usize {
        self.pbs + self.hwp0 + self.hwp45 + self.hwp90 + self.mirrors
    }
}

struct Builder {
    steps: Vec<ElementStep>,
    next_line: u16,
    next_device: usize,
}

impl Builder {
    fn new() -> Self {
        Builder {
            steps: Vec::new(),
            next_line: 1,
            next_device: 0,
        }
    }

    fn line(&mut self) -> LineLabel {
        let l = LineLabel(self.next_line);
        self.next_line += 1;
        l
    }

    fn device(&mut self) -> usize {
        self.next_device += 1;
        self.next_device - 1
    }

    fn split(&mut self, device: usize, input: LineLabel) -> (LineLabel, LineLabel) {
        let h_out = self.line();
        let v_out = self.line();
        self.steps.push(ElementStep::PbsSplit {
            device,
            input,
            h_out,
            v_out,
        });
        (h_out, v_out)
    }

    fn merge(&mut self, device: usize, h_in: LineLabel, v_in: LineLabel, out: LineLabel) {
        self.steps.push(ElementStep::PbsMerge {
            device,
            h_in,
            v_in,
            out,
        });
    }

    fn hwp(&mut self, line: LineLabel, angle: HwpAngle) {
        self.steps.push(ElementStep::Hwp { line, angle });
    }

    fn cav(&mut self, line: LineLabel, atom: usize) {
        self.steps.push(ElementStep::CavityVisit { line, atom });
    }

    fn mirror(&mut self, line: LineLabel) {
        self.steps.push(ElementStep::Mirror { line });
    }

    fn last(&self) -> usize {
        self.steps.len() - 1
    }

    /// Control chain over `controls`; `core` runs on the innermost main line.
    fn controlled(
        &mut self,
        main: LineLabel,
        controls: usize,
        core: impl FnOnce(&mut Self, LineLabel),
    ) -> LineLabel {
        let mut line = main;
        let mut levels = Vec::with_capacity(controls);
        for atom in 0..controls {
            self.cav(line, atom);
            let device = self.device();
            let (h, v) = self.split(device, line);
            levels.push((atom, device, v));
            line = h;
        }
        core(self, line);
        for (atom, device, bypass) in levels.into_iter().rev() {
            self.mirror(bypass);
            self.mirror(bypass);
            let out = self.line();
            self.merge(device, line, bypass, out);
            self.cav(out, atom);
            line = out;
        }
        line
    }

    fn finish(self, gate: GateKind, cuts: BTreeMap<String, usize>) -> Circuit {
        Circuit {
            gate: Some(gate),
            n: gate.n,
            steps: self.steps,
            cuts,
        }
    }
}

pub fn build(gate: GateKind) -> Circuit {
    match gate.variant {
        GateVariant::Cnot => cnot(gate),
        GateVariant::Fredkin => fredkin(gate),
        GateVariant::Toffoli => toffoli(gate),
    }
}

pub fn build_cnot(n: usize) -> Result<Circuit, CircuitError> {
    Ok(build(GateKind::new(GateVariant::Cnot, n)?))
}

pub fn build_fredkin(n: usize) -> Result<Circuit, CircuitError> {
    Ok(build(GateKind::new(GateVariant::Fredkin, n)?))
}

pub fn build_toffoli(n: usize) -> Result<Circuit, CircuitError> {
    Ok(build(GateKind::new(GateVariant::Toffoli, n)?))
}

fn cnot(gate: GateKind) -> Circuit {
    let mut b = Builder::new();
    let mut cuts = BTreeMap::new();
    let d_in = b.device();
    let (idle, active) = b.split(d_in, INPUT_LINE);
    if gate.n % 2 == 1 {
        b.hwp(active, HwpAngle::Deg0);
    }
    for atom in 0..gate.n {
        b.cav(active, atom);
        if atom == 0 {
            cuts.insert("first-visit".into(), b.last());
        }
        b.hwp(active, HwpAngle::Deg45);
        if atom == 0 {
            cuts.insert("after-flip".into(), b.last());
        }
        b.cav(active, atom);
    }
    let d_out = b.device();
    b.merge(d_out, idle, active, INPUT_LINE);
    cuts.insert("output".into(), b.last());
    b.finish(gate, cuts)
}

fn fredkin(gate: GateKind) -> Circuit {
    let n = gate.n;
    let mut b = Builder::new();
    let mut cuts = BTreeMap::new();
    let d_in = b.device();
    let (idle, active) = b.split(d_in, INPUT_LINE);
    let main = if n == 2 {
        b.hwp(active, HwpAngle::Deg0);
        b.cav(active, 0);
        cuts.insert("first-visit".into(), b.last());
        b.cav(active, 1);
        cuts.insert("second-atom".into(), b.last());
        b.cav(active, 0);
        active
    } else {
        b.controlled(active, n - 2, |b, line| {
            b.hwp(line, HwpAngle::Deg90);
            b.cav(line, n - 2);
            b.cav(line, n - 1);
            b.cav(line, n - 2);
        })
    };
    let d_out = b.device();
    b.merge(d_out, idle, main, INPUT_LINE);
    cuts.insert("output".into(), b.last());
    b.finish(gate, cuts)
}

fn toffoli(gate: GateKind) -> Circuit {
    let n = gate.n;
    let mut b = Builder::new();
    let mut cuts = BTreeMap::new();
    let d_in = b.device();
    let (idle, active) = b.split(d_in, INPUT_LINE);
    let mut first_target_visit = 0;
    let main = b.controlled(active, n - 1, |b, line| {
        b.cav(line, n - 1);
        first_target_visit = b.last();
        b.hwp(line, HwpAngle::Deg45);
        b.cav(line, n - 1);
        b.hwp(line, HwpAngle::Deg90);
    });
    if n == 2 {
        cuts.insert("target-first-visit".into(), first_target_visit);
        // the merge of the last control level precedes the restoring visit
        let inner_merge = b.last() - 1;
        cuts.insert("inner-merge".into(), inner_merge);
    }
    let d_out = b.device();
    b.merge(d_out, idle, main, INPUT_LINE);
    cuts.insert("output".into(), b.last());
    b.finish(gate, cuts)
}

fn check_input(c: &Circuit, s: &HybridState) -> Result<(), CircuitError> {
    if s.n() != c.n || s.terms().any(|(k, _)| k.line != INPUT_LINE) {
        return Err(CircuitError::BadInput {
            expected: INPUT_LINE,
            n: c.n,
        });
    }
    Ok(())
}

fn apply_step(
    index: usize,
    step: &ElementStep,
    s: &HybridState,
    mode: &Mode,
    policy: MergePolicy,
) -> Result<HybridState, CircuitError> {
    if let Some(r) = step.apply_optical(s, policy) {
        return r.map_err(|source| CircuitError::Element {
            index,
            step: step.to_string(),
            source,
        });
    }
    let ElementStep::CavityVisit { line, atom } = *step else {
        unreachable!("optical steps handled above")
    };
    Ok(match mode {
        Mode::Ideal => scatter_ideal(s, line, atom)?,
        Mode::Real(p) => scatter_real(s, line, atom, p)?,
    })
}

/// Runs the whole circuit with the mode's default merge policy
/// (strict when ideal, discarding wrong-port amplitude when lossy).
pub fn run_circuit(c: &Circuit, s: &HybridState, mode: Mode) -> Result<HybridState, CircuitError> {
    run_circuit_with(c, s, mode, mode.default_policy())
}

pub fn run_circuit_with(
    c: &Circuit,
    s: &HybridState,
    mode: Mode,
    policy: MergePolicy,
) -> Result<HybridState, CircuitError> {
    run_prefix(c, s, mode, policy, c.steps.len())
}

/// State after the first `count` steps.
pub fn run_prefix(
    c: &Circuit,
    s: &HybridState,
    mode: Mode,
    policy: MergePolicy,
    count: usize,
) -> Result<HybridState, CircuitError> {
    check_input(c, s)?;
    let mut state = s.clone();
    for (i, step) in c.steps.iter().take(count).enumerate() {
        state = apply_step(i, step, &state, &mode, policy)?;
    }
    Ok(state)
}

/// State at a named cut point.
pub fn run_to_cut(
    c: &Circuit,
    s: &HybridState,
    mode: Mode,
    cut: &str,
) -> Result<HybridState, CircuitError> {
    let idx = c
        .cut(cut)
        .ok_or_else(|| CircuitError::InvalidGate(format!("no cut point `{cut}`")))?;
    run_prefix(c, s, mode, mode.default_policy(), idx + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthRow {
    pub input: BasisKet,
    pub output: HybridState,
    /// Expected basis output of the ideal gate.
    pub target: BasisKet,
    /// `λ` when the output is exactly `λ|target⟩`.
    pub phase: Option<Amplitude>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthTable {
    pub gate: GateKind,
    pub rows: Vec<TruthRow>,
}

impl TruthTable {
    /// Every row maps to a single distinct basis ket with unit modulus.
    pub fn is_permutation(&self, tol: f64) -> bool {
        let mut seen = BTreeSet::new();
        self.rows.iter().all(|r| {
            r.output.len() == 1
                && r.output
                    .terms()
                    .all(|(k, a)| (a.norm() - 1.0).abs() < tol && seen.insert(*k))
        })
    }

    /// Every row matches the ideal gate action.
    pub fn matches_target(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.phase.is_some_and(|p| (p.norm() - 1.0).abs() < tol))
    }

    /// The common phase of all rows, if there is one.
    pub fn global_phase(&self, tol: f64) -> Option<Amplitude> {
        let first = self.rows.first()?.phase?;
        self.rows
            .iter()
            .all(|r| r.phase.is_some_and(|p| (p - first).norm() < tol))
            .then_some(first)
    }
}

/// All `2^(n+1)` basis inputs in order: photon `H` before `V`, then atoms in
/// binary with atom 1 most significant.
pub fn basis_inputs(n: usize) -> Vec<BasisKet> {
    let mut out = Vec::with_capacity(2 << n);
    for pol in [Polarization::H, Polarization::V] {
        for idx in 0..(1u64 << n) {
            let atoms: Vec<AtomGround> = (0..n)
                .map(|i| AtomGround::from_index(((idx >> (n - 1 - i)) & 1) as usize))
                .collect();
            out.push(BasisKet::new(pol, INPUT_LINE, &atoms));
        }
    }
    out
}

pub fn truth_table(g: GateKind, mode: Mode) -> Result<TruthTable, CircuitError> {
    truth_table_with_limit(g, mode, DEFAULT_TABLE_LIMIT)
}

pub fn truth_table_with_limit(
    g: GateKind,
    mode: Mode,
    limit: usize,
) -> Result<TruthTable, CircuitError> {
    let rows = 2usize << g.n;
    if rows > limit {
        return Err(CircuitError::TableTooLarge {
            n: g.n,
            rows,
            limit,
        });
    }
    let c = build(g);
    let rows = basis_inputs(g.n)
        .into_par_iter()
        .map(|input| {
            let output = run_circuit(&c, &HybridState::basis(g.n, input), mode)?;
            let target = g.target(&input);
            let phase = match output.len() {
                1 if output.amplitude(&target) != Amplitude::new(0.0, 0.0) => {
                    Some(output.amplitude(&target))
                }
                _ => None,
            };
            Ok(TruthRow {
                input,
                output,
                target,
                phase,
            })
        })
        .collect::<Result<Vec<_>, CircuitError>>()?;
    Ok(TruthTable { gate: g, rows })
}

pub fn element_count(g: GateKind) -> ElementCounts {
    build(g).element_count()
}
