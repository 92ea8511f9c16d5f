//! Sparse joint photon–atom state vectors.
//!
//! A [`HybridState`] holds exactly one photon, described by its polarization
//! and the spatial line it travels on, together with `n` Λ-type atoms that
//! are each in one of their two ground states. Only nonzero amplitudes are
//! stored, keyed by [`BasisKet`] in a `BTreeMap` so that iteration order (and
//! therefore every floating-point reduction) is reproducible.

mod literal;

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use literal::{format_state, parse_state};

/// Complex probability amplitude.
pub type Amplitude = Complex64;

/// 2×2 complex matrix acting on the `(H, V)` polarization basis, row-major.
pub type PolarizationMatrix = [[Amplitude; 2]; 2];

/// Terms whose magnitude does not exceed this are dropped after every operation.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-14;

/// Largest atom register a [`BasisKet`] can address.
pub const MAX_ATOMS: usize = 64;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("coefficients of {qubit} are not normalized (|a|^2+|b|^2 = {norm_squared})")]
    NotNormalized { qubit: String, norm_squared: f64 },
    #[error("atom counts differ: {left} vs {right}")]
    AtomCountMismatch { left: usize, right: usize },
    #[error("operation undefined for the zero state")]
    ZeroState,
    #[error("atom index {index} out of range for {n} atoms")]
    AtomOutOfRange { index: usize, n: usize },
    #[error("at most {MAX_ATOMS} atoms are supported, got {0}")]
    TooManyAtoms(usize),
    #[error("non-finite amplitude")]
    NonFinite,
    #[error("cannot parse state literal: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }

    /// Row/column index into a [`PolarizationMatrix`].
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }

    /// The ground state this polarization drives resonantly (H ↔ g_h, V ↔ g_v).
    pub fn resonant_ground(self) -> AtomGround {
        match self {
            Polarization::H => AtomGround::Gh,
            Polarization::V => AtomGround::Gv,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

/// A spatial path the photon may travel on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineLabel(pub u16);

impl fmt::Display for LineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

/// One of the two atomic ground states. The excited state never appears here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AtomGround {
    Gh,
    Gv,
}

impl AtomGround {
    pub fn flipped(self) -> Self {
        match self {
            AtomGround::Gh => AtomGround::Gv,
            AtomGround::Gv => AtomGround::Gh,
        }
    }

    pub fn index(self) -> usize {
        match self {
            AtomGround::Gh => 0,
            AtomGround::Gv => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            AtomGround::Gh
        } else {
            AtomGround::Gv
        }
    }
}

impl fmt::Display for AtomGround {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomGround::Gh => "gh",
            AtomGround::Gv => "gv",
        })
    }
}

/// Product ket `|pol⟩_line ⊗ |a_1⟩ ⊗ … ⊗ |a_n⟩`.
///
/// Atoms are packed into a bit register (bit `i` set ⇔ atom `i` in `g_v`);
/// the register length lives on the owning [`HybridState`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisKet {
    pub polarization: Polarization,
    pub line: LineLabel,
    atoms: u64,
}

impl BasisKet {
    pub fn new(polarization: Polarization, line: LineLabel, atoms: &[AtomGround]) -> Self {
        assert!(atoms.len() <= MAX_ATOMS);
        let bits = atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == AtomGround::Gv)
            .fold(0u64, |acc, (i, _)| acc | (1 << i));
        BasisKet {
            polarization,
            line,
            atoms: bits,
        }
    }

    /// Builds a ket from a raw register where bit `i` set means atom `i` is in `g_v`.
    pub fn from_bits(polarization: Polarization, line: LineLabel, bits: u64) -> Self {
        BasisKet {
            polarization,
            line,
            atoms: bits,
        }
    }

    pub fn atom_bits(&self) -> u64 {
        self.atoms
    }

    pub fn atom(&self, i: usize) -> AtomGround {
        AtomGround::from_index(((self.atoms >> i) & 1) as usize)
    }

    pub fn atoms(&self, n: usize) -> Vec<AtomGround> {
        (0..n).map(|i| self.atom(i)).collect()
    }

    pub fn with_atom(self, i: usize, a: AtomGround) -> Self {
        let atoms = match a {
            AtomGround::Gh => self.atoms & !(1 << i),
            AtomGround::Gv => self.atoms | (1 << i),
        };
        BasisKet { atoms, ..self }
    }

    pub fn with_polarization(self, polarization: Polarization) -> Self {
        BasisKet {
            polarization,
            ..self
        }
    }

    pub fn with_line(self, line: LineLabel) -> Self {
        BasisKet { line, ..self }
    }
}

/// Accumulates amplitudes for a new state, summing contributions that land on the same ket.
#[derive(Debug, Default)]
pub struct TermAccumulator {
    terms: BTreeMap<BasisKet, Amplitude>,
}

impl TermAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, ket: BasisKet, amp: Amplitude) {
        *self.terms.entry(ket).or_insert(Amplitude::new(0.0, 0.0)) += amp;
    }
}

/// Joint state of one photon and `n` atoms, possibly sub-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    n: usize,
    terms: BTreeMap<BasisKet, Amplitude>,
    prune_threshold: f64,
}

impl HybridState {
    pub fn empty(n: usize) -> Self {
        assert!(n <= MAX_ATOMS, "at most {MAX_ATOMS} atoms");
        HybridState {
            n,
            terms: BTreeMap::new(),
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        }
    }

    pub fn basis(n: usize, ket: BasisKet) -> Self {
        Self::from_terms(n, [(ket, Amplitude::new(1.0, 0.0))])
            .expect("basis ket must address at most n atoms")
    }

    /// Builds a state from `(ket, amplitude)` pairs; repeated kets are summed.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (BasisKet, Amplitude)>,
    {
        if n > MAX_ATOMS {
            return Err(StateError::TooManyAtoms(n));
        }
        let mut acc = TermAccumulator::new();
        for (ket, amp) in terms {
            if n < MAX_ATOMS && ket.atoms >> n != 0 {
                return Err(StateError::AtomOutOfRange {
                    index: 63 - ket.atoms.leading_zeros() as usize,
                    n,
                });
            }
            if !(amp.re.is_finite() && amp.im.is_finite()) {
                return Err(StateError::NonFinite);
            }
            acc.add(ket, amp);
        }
        Ok(Self::empty(n).rebuild(acc))
    }

    /// Returns a copy that prunes with `threshold` from now on (and prunes immediately).
    pub fn with_prune_threshold(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        out.prune_threshold = threshold.max(0.0);
        out.terms.retain(|_, a| a.norm() > out.prune_threshold);
        out
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisKet, &Amplitude)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, ket: &BasisKet) -> Amplitude {
        self.terms.get(ket).copied().unwrap_or_default()
    }

    /// Finalizes an accumulator into a state sharing this state's `n` and prune threshold.
    pub fn rebuild(&self, acc: TermAccumulator) -> Self {
        let thr = self.prune_threshold;
        let mut terms = acc.terms;
        terms.retain(|_, a| a.norm() > thr);
        debug_assert!(terms.values().all(|a| a.re.is_finite() && a.im.is_finite()));
        HybridState {
            n: self.n,
            terms,
            prune_threshold: thr,
        }
    }

    /// Rebuilds the state by sending every term through `f`, which pushes its images into the accumulator.
    pub fn map_terms<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&BasisKet, Amplitude, &mut TermAccumulator),
    {
        let mut acc = TermAccumulator::new();
        for (ket, amp) in &self.terms {
            f(ket, *amp, &mut acc);
        }
        self.rebuild(acc)
    }

    /// Σ|amp|².
    pub fn norm_squared(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &HybridState) -> Result<Amplitude, StateError> {
        if self.n != other.n {
            return Err(StateError::AtomCountMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let (small, large, conj_swap) = if self.len() <= other.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut sum = Amplitude::new(0.0, 0.0);
        for (ket, a) in &small.terms {
            if let Some(b) = large.terms.get(ket) {
                sum += if conj_swap {
                    b.conj() * a
                } else {
                    a.conj() * b
                };
            }
        }
        Ok(sum)
    }

    pub fn scaled(&self, c: Amplitude) -> Self {
        self.map_terms(|ket, amp, acc| acc.add(*ket, amp * c))
    }

    /// Unit complex λ aligning `other` onto `self`, taken from the largest-magnitude
    /// term of `self` that `other` also populates. `None` if no term overlaps.
    pub fn relative_phase(&self, other: &HybridState) -> Result<Option<Amplitude>, StateError> {
        if self.n != other.n {
            return Err(StateError::AtomCountMismatch {
                left: self.n,
                right: other.n,
            });
        }
        if self.is_empty() || other.is_empty() {
            return Err(StateError::ZeroState);
        }
        let best = self
            .terms
            .iter()
            .filter_map(|(k, a)| other.terms.get(k).map(|b| (a, b)))
            .max_by(|x, y| x.0.norm().total_cmp(&y.0.norm()));
        Ok(best.map(|(a, b)| {
            let r = a / b;
            r / r.norm()
        }))
    }

    /// True iff ‖self − λ·other‖ ≤ tol for the unit λ picked by [`Self::relative_phase`].
    pub fn equal_up_to_global_phase(
        &self,
        other: &HybridState,
        tol: f64,
    ) -> Result<bool, StateError> {
        let Some(lambda) = self.relative_phase(other)? else {
            return Ok(false);
        };
        Ok(self.distance(&other.scaled(lambda))? <= tol)
    }

    /// Euclidean distance ‖self − other‖.
    pub fn distance(&self, other: &HybridState) -> Result<f64, StateError> {
        if self.n != other.n {
            return Err(StateError::AtomCountMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let mut sum = 0.0;
        for (k, a) in &self.terms {
            sum += (a - other.amplitude(k)).norm_sqr();
        }
        for (k, b) in &other.terms {
            if !self.terms.contains_key(k) {
                sum += b.norm_sqr();
            }
        }
        Ok(sum.sqrt())
    }

    /// Largest |self_k − other_k| over all kets.
    pub fn max_abs_deviation(&self, other: &HybridState) -> f64 {
        self.terms
            .keys()
            .chain(other.terms.keys())
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Applies `m` to the polarization of every term whose photon is on `line`.
    pub fn apply_polarization_map(&self, line: LineLabel, m: &PolarizationMatrix) -> Self {
        self.map_terms(|ket, amp, acc| {
            if ket.line != line {
                acc.add(*ket, amp);
                return;
            }
            let col = ket.polarization.index();
            for (row, m_row) in m.iter().enumerate() {
                let c = m_row[col];
                if c != Amplitude::new(0.0, 0.0) {
                    acc.add(
                        ket.with_polarization(Polarization::from_index(row)),
                        c * amp,
                    );
                }
            }
        })
    }

    /// Reduced density matrix of atom `i` in the `(g_h, g_v)` basis.
    pub fn atom_density(&self, i: usize) -> Result<[[Amplitude; 2]; 2], StateError> {
        if i >= self.n {
            return Err(StateError::AtomOutOfRange {
                index: i,
                n: self.n,
            });
        }
        let mut rho = [[Amplitude::new(0.0, 0.0); 2]; 2];
        for (ket, a) in &self.terms {
            let row = ket.atom(i).index();
            let partner = ket.with_atom(i, ket.atom(i).flipped());
            rho[row][row] += a.norm_sqr();
            if let Some(b) = self.terms.get(&partner) {
                rho[row][1 - row] += a * b.conj();
            }
        }
        Ok(rho)
    }
}

/// Tensor product `(photon) ⊗ atom_1 ⊗ … ⊗ atom_n` with the photon on `line`.
///
/// Every coefficient pair must have unit norm within 1e-9.
pub fn make_product_state(
    photon: (Amplitude, Amplitude),
    line: LineLabel,
    atoms: &[(Amplitude, Amplitude)],
) -> Result<HybridState, StateError> {
    if atoms.len() > MAX_ATOMS {
        return Err(StateError::TooManyAtoms(atoms.len()));
    }
    check_pair("photon".to_string(), photon)?;
    for (i, pair) in atoms.iter().enumerate() {
        check_pair(format!("atom{}", i + 1), *pair)?;
    }
    let n = atoms.len();
    let mut acc = TermAccumulator::new();
    for pol in [Polarization::H, Polarization::V] {
        let p = if pol == Polarization::H {
            photon.0
        } else {
            photon.1
        };
        if p == Amplitude::new(0.0, 0.0) {
            continue;
        }
        // Depth-first expansion over the atoms, skipping zero branches.
        let mut partial = vec![(0u64, p)];
        for (i, (gh, gv)) in atoms.iter().enumerate() {
            let mut next = Vec::with_capacity(partial.len() * 2);
            for (bits, amp) in partial {
                if *gh != Amplitude::new(0.0, 0.0) {
                    next.push((bits, amp * gh));
                }
                if *gv != Amplitude::new(0.0, 0.0) {
                    next.push((bits | (1 << i), amp * gv));
                }
            }
            partial = next;
        }
        for (bits, amp) in partial {
            acc.add(BasisKet::from_bits(pol, line, bits), amp);
        }
    }
    Ok(HybridState::empty(n).rebuild(acc))
}

fn check_pair(qubit: String, (a, b): (Amplitude, Amplitude)) -> Result<(), StateError> {
    let norm_squared = a.norm_sqr() + b.norm_sqr();
    if !norm_squared.is_finite() {
        return Err(StateError::NonFinite);
    }
    if (norm_squared - 1.0).abs() > NORMALIZATION_TOL {
        return Err(StateError::NotNormalized {
            qubit,
            norm_squared,
        });
    }
    Ok(())
}

/// Pauli σ_x on polarization.
pub fn sigma_x() -> PolarizationMatrix {
    let (o, z) = (Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0));
    [[z, o], [o, z]]
}

/// Pauli σ_z on polarization.
pub fn sigma_z() -> PolarizationMatrix {
    let (o, z) = (Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0));
    [[o, z], [z, -o]]
}

pub fn identity() -> PolarizationMatrix {
    let (o, z) = (Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0));
    [[o, z], [z, o]]
}
