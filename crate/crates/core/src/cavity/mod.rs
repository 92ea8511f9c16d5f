//! Photon scattering off a Λ-type atom in a single-sided cavity.
//!
//! All rates are dimensionless ratios to a reference coupling `g`. The
//! stationary rules act on ground states only; the excited state appears
//! solely inside the time-domain integrator in [`pulse`].
//!
//! With detuning `ω`, cavity damping `κ`, atomic decay `γ` and couplings
//! `η_k` (`k` the polarization resonant with the atom's ground state, `k̄`
//! the other one), write `A = iω + κ/2`, `B = iω + γ/2` and
//! `D = η_k² + η_k̄² + A·B`. Then
//!
//! ```text
//! r0  = (2iω − κ) / (2iω + κ)
//! rh1 = [(iω − κ/2) + κ η_k² / D] / A
//! rh2 = κ η_k η_k̄ / (A D)
//! ```

pub mod pulse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{Amplitude, AtomGround, HybridState, LineLabel, Polarization, StateError};

pub use pulse::{integrate_pulse, GaussianPulse, PulseResult, PulseSample, PulseSimState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CavityError {
    #[error("invalid cavity parameters: {0}")]
    InvalidParams(String),
    #[error("both couplings vanish; the cavity is cold for every input")]
    ZeroCoupling,
    #[error(transparent)]
    State(#[from] StateError),
    #[error("integration unstable at t = {t:.6} (internal energy {energy:.3e}); reduce dt (currently {dt:.3e})")]
    Unstable { t: f64, dt: f64, energy: f64 },
    #[error("invalid pulse setup: {0}")]
    InvalidPulse(String),
}

/// Physical rates in units of the reference coupling `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub kappa_over_g: f64,
    pub gamma_over_g: f64,
    pub eta_h_over_g: f64,
    pub eta_v_over_g: f64,
    pub omega_over_g: f64,
}

impl CavityParams {
    pub fn new(
        kappa_over_g: f64,
        gamma_over_g: f64,
        eta_h_over_g: f64,
        eta_v_over_g: f64,
        omega_over_g: f64,
    ) -> Result<Self, CavityError> {
        let p = CavityParams {
            kappa_over_g,
            gamma_over_g,
            eta_h_over_g,
            eta_v_over_g,
            omega_over_g,
        };
        p.validate()?;
        Ok(p)
    }

    /// η_h = η_v = g, ω = 0.
    pub fn resonant(kappa_over_g: f64, gamma_over_g: f64) -> Result<Self, CavityError> {
        Self::new(kappa_over_g, gamma_over_g, 1.0, 1.0, 0.0)
    }

    pub fn with_omega(self, omega_over_g: f64) -> Result<Self, CavityError> {
        Self::new(
            self.kappa_over_g,
            self.gamma_over_g,
            self.eta_h_over_g,
            self.eta_v_over_g,
            omega_over_g,
        )
    }

    pub fn validate(&self) -> Result<(), CavityError> {
        let all = [
            self.kappa_over_g,
            self.gamma_over_g,
            self.eta_h_over_g,
            self.eta_v_over_g,
            self.omega_over_g,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(CavityError::InvalidParams("non-finite value".into()));
        }
        if self.kappa_over_g <= 0.0 {
            return Err(CavityError::InvalidParams(format!(
                "kappa/g must be > 0, got {}",
                self.kappa_over_g
            )));
        }
        if self.gamma_over_g < 0.0 || self.eta_h_over_g < 0.0 || self.eta_v_over_g < 0.0 {
            return Err(CavityError::InvalidParams(
                "gamma/g and couplings must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// `(η_k, η_k̄)` for an input of polarization `k`.
    pub fn couplings(&self, k: Polarization) -> (f64, f64) {
        match k {
            Polarization::H => (self.eta_h_over_g, self.eta_v_over_g),
            Polarization::V => (self.eta_v_over_g, self.eta_h_over_g),
        }
    }
}

/// Reflection coefficients of one cavity for a fixed resonant polarization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterCoeffs {
    pub r0: Amplitude,
    pub rh1: Amplitude,
    pub rh2: Amplitude,
}

impl ScatterCoeffs {
    /// Coefficients for a hot transition driven by polarization `k`. With both
    /// couplings zero the "hot" channel degenerates to the cold one (`rh1 = r0`, `rh2 = 0`).
    pub fn evaluate(p: &CavityParams, k: Polarization) -> Self {
        let r0 = cold_coeff(p);
        match hot_coeffs(p, k) {
            Ok((rh1, rh2)) => ScatterCoeffs { r0, rh1, rh2 },
            Err(_) => ScatterCoeffs {
                r0,
                rh1: r0,
                rh2: Amplitude::new(0.0, 0.0),
            },
        }
    }
}

/// Reflection coefficient when the atom does not couple to the photon.
pub fn cold_coeff(p: &CavityParams) -> Amplitude {
    let two_iw = Amplitude::new(0.0, 2.0 * p.omega_over_g);
    (two_iw - p.kappa_over_g) / (two_iw + p.kappa_over_g)
}

/// `(rh1, rh2)` for an input of polarization `k` meeting an atom in the resonant ground state.
pub fn hot_coeffs(
    p: &CavityParams,
    k: Polarization,
) -> Result<(Amplitude, Amplitude), CavityError> {
    let (eta_k, eta_kbar) = p.couplings(k);
    if eta_k * eta_k + eta_kbar * eta_kbar == 0.0 {
        return Err(CavityError::ZeroCoupling);
    }
    let iw = Amplitude::new(0.0, p.omega_over_g);
    let kappa = p.kappa_over_g;
    let a = iw + kappa / 2.0;
    let b = iw + p.gamma_over_g / 2.0;
    let d = a * b + eta_k * eta_k + eta_kbar * eta_kbar;
    let rh1 = ((iw - kappa / 2.0) + kappa * eta_k * eta_k / d) / a;
    let rh2 = kappa * eta_k * eta_kbar / (a * d);
    Ok((rh1, rh2))
}

fn check_atom(s: &HybridState, atom: usize) -> Result<(), CavityError> {
    if atom >= s.n() {
        return Err(StateError::AtomOutOfRange {
            index: atom,
            n: s.n(),
        }
        .into());
    }
    Ok(())
}

/// Lossless limit: resonant pairs swap photon and atom (`|H⟩|g_h⟩ ↔ |V⟩|g_v⟩`),
/// every other pair picks up a sign.
pub fn scatter_ideal(
    s: &HybridState,
    line: LineLabel,
    atom: usize,
) -> Result<HybridState, CavityError> {
    check_atom(s, atom)?;
    Ok(s.map_terms(|ket, amp, acc| {
        if ket.line != line {
            acc.add(*ket, amp);
            return;
        }
        let a = ket.atom(atom);
        if ket.polarization.resonant_ground() == a {
            let flipped = ket
                .with_polarization(ket.polarization.flipped())
                .with_atom(atom, a.flipped());
            acc.add(flipped, amp);
        } else {
            acc.add(*ket, -amp);
        }
    }))
}

/// Lossy scattering. The output may be sub-normalized; the missing norm is
/// the probability that the photon was lost through atomic decay.
pub fn scatter_real(
    s: &HybridState,
    line: LineLabel,
    atom: usize,
    p: &CavityParams,
) -> Result<HybridState, CavityError> {
    check_atom(s, atom)?;
    let by_pol = [
        ScatterCoeffs::evaluate(p, Polarization::H),
        ScatterCoeffs::evaluate(p, Polarization::V),
    ];
    Ok(s.map_terms(|ket, amp, acc| {
        if ket.line != line {
            acc.add(*ket, amp);
            return;
        }
        let a = ket.atom(atom);
        let co = &by_pol[ket.polarization.index()];
        if ket.polarization.resonant_ground() == a {
            acc.add(*ket, co.rh1 * amp);
            let flipped = ket
                .with_polarization(ket.polarization.flipped())
                .with_atom(atom, a.flipped());
            acc.add(flipped, co.rh2 * amp);
        } else {
            acc.add(*ket, co.r0 * amp);
        }
    }))
}

/// Whether a photon of polarization `p` meeting an atom in `a` sees a hot cavity.
pub fn is_hot(p: Polarization, a: AtomGround) -> bool {
    p.resonant_ground() == a
}
