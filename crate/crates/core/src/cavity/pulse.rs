//! Time-domain input-output integration for a single photon wave packet.
//!
//! The one-excitation amplitudes evolve as
//!
//! ```text
//! d/dt β_{g,k} = −η_k β_e − √κ β_in,k − (κ/2) β_{g,k}
//! d/dt β_e     =  η_h β_{g,h} + η_v β_{g,v} − (γ/2) β_e
//! β_out,k      =  β_in,k + √κ β_{g,k}
//! ```
//!
//! Sign calibration: under the Fourier convention `d/dt ↔ +iω` this system
//! reproduces the frequency-domain coefficients of the parent module exactly,
//! including their sign, so no sign flips are applied relative to the
//! equations as written. A carrier `e^{+iωt}` on the input probes detuning `+ω`.
//!
//! A photon meeting an atom whose ground state does not match its
//! polarization sees a bare cavity; that case is integrated with the
//! couplings switched off.

use serde::Serialize;

use super::{CavityError, CavityParams, ScatterCoeffs};
use crate::state::{Amplitude, AtomGround, Polarization};

const HALF_WINDOW_SIGMAS: f64 = 8.0;
/// Internal energy may not exceed the injected energy by more than this.
const GROWTH_LIMIT: f64 = 1.0 + 1e-3;

/// Unit-energy Gaussian envelope `β_in(t) ∝ exp(−σ²(t − t0)²/2) e^{iωt}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianPulse {
    pub sigma: f64,
    pub center: f64,
    pub carrier: f64,
}

impl GaussianPulse {
    pub fn new(sigma: f64) -> Result<Self, CavityError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(CavityError::InvalidPulse(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        Ok(GaussianPulse {
            sigma,
            center: 0.0,
            carrier: 0.0,
        })
    }

    pub fn with_carrier(mut self, omega: f64) -> Self {
        self.carrier = omega;
        self
    }

    pub fn amplitude(&self, t: f64) -> Amplitude {
        let norm = (self.sigma * self.sigma / std::f64::consts::PI).powf(0.25);
        let x = self.sigma * (t - self.center);
        let env = norm * (-0.5 * x * x).exp();
        if self.carrier == 0.0 {
            Amplitude::new(env, 0.0)
        } else {
            Amplitude::from_polar(env, self.carrier * t)
        }
    }

    pub fn window(&self) -> (f64, f64) {
        let w = HALF_WINDOW_SIGMAS / self.sigma;
        (self.center - w, self.center + w)
    }
}

/// Internal amplitudes at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PulseSimState {
    pub beta_g_h: Amplitude,
    pub beta_g_v: Amplitude,
    pub beta_e: Amplitude,
    pub t: f64,
}

impl PulseSimState {
    pub fn energy(&self) -> f64 {
        self.beta_g_h.norm_sqr() + self.beta_g_v.norm_sqr() + self.beta_e.norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PulseSample {
    pub t: f64,
    pub input: Amplitude,
    pub out_h: Amplitude,
    pub out_v: Amplitude,
}

#[derive(Clone, Debug, Serialize)]
pub struct PulseResult {
    pub input_polarization: Polarization,
    pub atom: AtomGround,
    pub dt: f64,
    pub steps: usize,
    /// Sampled envelopes; empty unless recording was requested.
    pub samples: Vec<PulseSample>,
    pub input_energy: f64,
    pub output_energy: [f64; 2],
    /// `⟨in|out_h⟩`, `⟨in|out_v⟩`.
    pub overlaps: [Amplitude; 2],
    pub final_state: PulseSimState,
}

impl PulseResult {
    /// Projection of the output in polarization `p` onto the input mode shape.
    pub fn projection(&self, p: Polarization) -> Amplitude {
        self.overlaps[p.index()] / self.input_energy
    }

    /// Projection onto the input's own polarization.
    pub fn co_polarized(&self) -> Amplitude {
        self.projection(self.input_polarization)
    }

    pub fn cross_polarized(&self) -> Amplitude {
        self.projection(self.input_polarization.flipped())
    }

    pub fn total_output_energy(&self) -> f64 {
        self.output_energy[0] + self.output_energy[1]
    }
}

#[derive(Clone, Copy)]
struct Rates {
    half_kappa: f64,
    sqrt_kappa: f64,
    half_gamma: f64,
    eta: [f64; 2],
    drive: usize,
}

type Y = [Amplitude; 3];

fn deriv(r: &Rates, y: &Y, input: Amplitude) -> Y {
    let [a_h, a_v, e] = *y;
    let mut drive = [Amplitude::new(0.0, 0.0); 2];
    drive[r.drive] = input * r.sqrt_kappa;
    [
        -e * r.eta[0] - drive[0] - a_h * r.half_kappa,
        -e * r.eta[1] - drive[1] - a_v * r.half_kappa,
        a_h * r.eta[0] + a_v * r.eta[1] - e * r.half_gamma,
    ]
}

fn axpy(y: &Y, h: f64, k: &Y) -> Y {
    [y[0] + k[0] * h, y[1] + k[1] * h, y[2] + k[2] * h]
}

/// Integrates one wave packet with classical RK4 on a uniform grid spanning
/// ±8/σ around the pulse center. When `record_every > 0`, every
/// `record_every`-th sample is kept in the result.
pub fn integrate_pulse(
    p: &CavityParams,
    atom: AtomGround,
    input_polarization: Polarization,
    pulse: &GaussianPulse,
    dt: f64,
    record_every: usize,
) -> Result<PulseResult, CavityError> {
    p.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CavityError::InvalidPulse(format!(
            "dt must be > 0, got {dt}"
        )));
    }
    let (t0, t1) = pulse.window();
    let steps = ((t1 - t0) / dt).ceil() as usize;
    if steps > 500_000_000 {
        return Err(CavityError::InvalidPulse(format!(
            "{steps} steps requested; increase dt or sigma"
        )));
    }
    let hot = input_polarization.resonant_ground() == atom;
    let rates = Rates {
        half_kappa: p.kappa_over_g / 2.0,
        sqrt_kappa: p.kappa_over_g.sqrt(),
        half_gamma: p.gamma_over_g / 2.0,
        eta: if hot {
            [p.eta_h_over_g, p.eta_v_over_g]
        } else {
            [0.0, 0.0]
        },
        drive: input_polarization.index(),
    };

    let zero = Amplitude::new(0.0, 0.0);
    let mut y: Y = [zero; 3];
    let mut samples = Vec::new();
    let mut input_energy = 0.0;
    let mut output_energy = [0.0; 2];
    let mut overlaps = [zero; 2];
    let mut injected = 0.0;

    let mut b_in = pulse.amplitude(t0);
    for i in 0..=steps {
        let t = t0 + i as f64 * dt;
        let mut out = [zero; 2];
        out[0] = y[0] * rates.sqrt_kappa;
        out[1] = y[1] * rates.sqrt_kappa;
        out[rates.drive] += b_in;
        let w = if i == 0 || i == steps { 0.5 * dt } else { dt };
        input_energy += w * b_in.norm_sqr();
        for k in 0..2 {
            output_energy[k] += w * out[k].norm_sqr();
            overlaps[k] += w * b_in.conj() * out[k];
        }
        if record_every > 0 && i % record_every == 0 {
            samples.push(PulseSample {
                t,
                input: b_in,
                out_h: out[0],
                out_v: out[1],
            });
        }
        if i == steps {
            break;
        }

        let b_mid = pulse.amplitude(t + 0.5 * dt);
        let b_next = pulse.amplitude(t + dt);
        let k1 = deriv(&rates, &y, b_in);
        let k2 = deriv(&rates, &axpy(&y, 0.5 * dt, &k1), b_mid);
        let k3 = deriv(&rates, &axpy(&y, 0.5 * dt, &k2), b_mid);
        let k4 = deriv(&rates, &axpy(&y, dt, &k3), b_next);
        for j in 0..3 {
            y[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (dt / 6.0);
        }
        injected += dt * b_in.norm_sqr().max(b_next.norm_sqr());
        let energy: f64 = y.iter().map(|a| a.norm_sqr()).sum();
        if !energy.is_finite() || energy > GROWTH_LIMIT * injected.min(1.0) + 1e-12 {
            return Err(CavityError::Unstable {
                t: t + dt,
                dt,
                energy,
            });
        }
        b_in = b_next;
    }

    Ok(PulseResult {
        input_polarization,
        atom,
        dt,
        steps,
        samples,
        input_energy,
        output_energy,
        overlaps,
        final_state: PulseSimState {
            beta_g_h: y[0],
            beta_g_v: y[1],
            beta_e: y[2],
            t: t1,
        },
    })
}

/// Coefficients extracted by projecting simulated outputs on the input mode:
/// `r0` from an `H` photon on a `g_v` atom, `rh1`/`rh2` from an `H` photon on `g_h`.
pub fn effective_coeffs(
    p: &CavityParams,
    pulse: &GaussianPulse,
    dt: f64,
) -> Result<ScatterCoeffs, CavityError> {
    let (cold, hot) = rayon::join(
        || integrate_pulse(p, AtomGround::Gv, Polarization::H, pulse, dt, 0),
        || integrate_pulse(p, AtomGround::Gh, Polarization::H, pulse, dt, 0),
    );
    let (cold, hot) = (cold?, hot?);
    Ok(ScatterCoeffs {
        r0: cold.co_polarized(),
        rh1: hot.co_polarized(),
        rh2: hot.cross_polarized(),
    })
}
