//! Linear-optical elements acting on [`HybridState`]s.
//!
//! Polarizing beam splitters are pure routers (no reflection phase), wave
//! plates act on polarization only, and mirrors are exact identities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{sigma_x, sigma_z, Amplitude, HybridState, LineLabel, Polarization};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("mis-wired merge: {polarization} amplitude {amplitude} on {line} would leave through an unmodelled port")]
    MisWired {
        line: LineLabel,
        polarization: Polarization,
        amplitude: Amplitude,
    },
    #[error("unsupported half-wave plate angle {0} (only 0, 45, 90)")]
    BadAngle(u32),
    #[error("cannot parse element `{0}`")]
    Parse(String),
}

/// Orientation of a half-wave plate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HwpAngle {
    /// σ_z
    Deg0,
    /// σ_x
    Deg45,
    /// −σ_z
    Deg90,
}

impl HwpAngle {
    pub fn degrees(self) -> u32 {
        match self {
            HwpAngle::Deg0 => 0,
            HwpAngle::Deg45 => 45,
            HwpAngle::Deg90 => 90,
        }
    }
}

impl TryFrom<u32> for HwpAngle {
    type Error = ElementError;

    fn try_from(deg: u32) -> Result<Self, Self::Error> {
        match deg {
            0 => Ok(HwpAngle::Deg0),
            45 => Ok(HwpAngle::Deg45),
            90 => Ok(HwpAngle::Deg90),
            d => Err(ElementError::BadAngle(d)),
        }
    }
}

/// What a PBS merge does with amplitude arriving in the wrong polarization
/// (V on the H input, or H on the V input).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergePolicy {
    /// Any such amplitude is an error; ideal circuits never produce it.
    Strict,
    /// The amplitude exits through the other port and is dropped (photon loss).
    Discard,
    /// The amplitude is recombined into the output line regardless of
    /// polarization. Not norm-non-increasing in general.
    Coherent,
}

/// One element application in a circuit. Atom indices are zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementStep {
    /// `device` identifies the physical PBS; a split and its matching merge may share one.
    PbsSplit {
        device: usize,
        input: LineLabel,
        h_out: LineLabel,
        v_out: LineLabel,
    },
    PbsMerge {
        device: usize,
        h_in: LineLabel,
        v_in: LineLabel,
        out: LineLabel,
    },
    Hwp {
        line: LineLabel,
        angle: HwpAngle,
    },
    Mirror {
        line: LineLabel,
    },
    CavityVisit {
        line: LineLabel,
        atom: usize,
    },
}

impl ElementStep {
    /// Lines this step reads from or writes to.
    pub fn lines(&self) -> Vec<LineLabel> {
        match *self {
            ElementStep::PbsSplit {
                input,
                h_out,
                v_out,
                ..
            } => vec![input, h_out, v_out],
            ElementStep::PbsMerge {
                h_in, v_in, out, ..
            } => vec![h_in, v_in, out],
            ElementStep::Hwp { line, .. }
            | ElementStep::Mirror { line }
            | ElementStep::CavityVisit { line, .. } => vec![line],
        }
    }

    /// Applies a purely optical step. Returns `None` for cavity visits, which
    /// need a scattering model.
    pub fn apply_optical(
        &self,
        s: &HybridState,
        policy: MergePolicy,
    ) -> Option<Result<HybridState, ElementError>> {
        Some(match *self {
            ElementStep::PbsSplit {
                input,
                h_out,
                v_out,
                ..
            } => Ok(pbs_split(s, input, h_out, v_out)),
            ElementStep::PbsMerge {
                h_in, v_in, out, ..
            } => pbs_merge(s, h_in, v_in, out, policy),
            ElementStep::Hwp { line, angle } => Ok(hwp(s, line, angle)),
            ElementStep::Mirror { line } => Ok(mirror(s, line)),
            ElementStep::CavityVisit { .. } => return None,
        })
    }
}

impl fmt::Display for ElementStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ElementStep::PbsSplit {
                input,
                h_out,
                v_out,
                ..
            } => write!(f, "PBS split {input} -> {h_out} {v_out}"),
            ElementStep::PbsMerge {
                h_in, v_in, out, ..
            } => {
                write!(f, "PBS merge {h_in} {v_in} -> {out}")
            }
            ElementStep::Hwp { line, angle } => write!(f, "HWP {} {line}", angle.degrees()),
            ElementStep::Mirror { line } => write!(f, "MIRROR {line}"),
            ElementStep::CavityVisit { line, atom } => write!(f, "CAV {line} atom{}", atom + 1),
        }
    }
}

impl FromStr for ElementStep {
    type Err = ElementError;

    /// Parses one line of the circuit text format. PBS steps get `device = 0`;
    /// callers assign devices.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ElementError::Parse(s.to_string());
        let line = |t: &str| -> Result<LineLabel, ElementError> {
            t.strip_prefix('l')
                .and_then(|d| d.parse().ok())
                .map(LineLabel)
                .ok_or_else(bad)
        };
        let toks: Vec<&str> = s.split_whitespace().collect();
        match toks.as_slice() {
            ["PBS", "split", i, "->", h, v] => Ok(ElementStep::PbsSplit {
                device: 0,
                input: line(i)?,
                h_out: line(h)?,
                v_out: line(v)?,
            }),
            ["PBS", "merge", h, v, "->", o] => Ok(ElementStep::PbsMerge {
                device: 0,
                h_in: line(h)?,
                v_in: line(v)?,
                out: line(o)?,
            }),
            ["HWP", deg, l] => Ok(ElementStep::Hwp {
                line: line(l)?,
                angle: HwpAngle::try_from(deg.parse::<u32>().map_err(|_| bad())?)?,
            }),
            ["MIRROR", l] => Ok(ElementStep::Mirror { line: line(l)? }),
            ["CAV", l, a] => {
                let idx: usize = a
                    .strip_prefix("atom")
                    .and_then(|d| d.parse().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(bad)?;
                Ok(ElementStep::CavityVisit {
                    line: line(l)?,
                    atom: idx - 1,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// Sends H on `input` to `h_out` and V on `input` to `v_out`.
pub fn pbs_split(
    s: &HybridState,
    input: LineLabel,
    h_out: LineLabel,
    v_out: LineLabel,
) -> HybridState {
    s.map_terms(|ket, amp, acc| {
        if ket.line != input {
            acc.add(*ket, amp);
            return;
        }
        let out = match ket.polarization {
            Polarization::H => h_out,
            Polarization::V => v_out,
        };
        acc.add(ket.with_line(out), amp);
    })
}

/// Recombines H from `h_in` and V from `v_in` onto `out`.
pub fn pbs_merge(
    s: &HybridState,
    h_in: LineLabel,
    v_in: LineLabel,
    out: LineLabel,
    policy: MergePolicy,
) -> Result<HybridState, ElementError> {
    let mut wrong = None;
    let merged = s.map_terms(|ket, amp, acc| {
        let on_h = ket.line == h_in;
        let on_v = ket.line == v_in;
        if !on_h && !on_v {
            acc.add(*ket, amp);
            return;
        }
        let legal = (on_h && ket.polarization == Polarization::H)
            || (on_v && ket.polarization == Polarization::V);
        if legal {
            acc.add(ket.with_line(out), amp);
            return;
        }
        match policy {
            MergePolicy::Strict => {
                wrong.get_or_insert((ket.line, ket.polarization, amp));
            }
            MergePolicy::Discard => {}
            MergePolicy::Coherent => acc.add(ket.with_line(out), amp),
        }
    });
    match wrong {
        Some((line, polarization, amplitude)) => Err(ElementError::MisWired {
            line,
            polarization,
            amplitude,
        }),
        None => Ok(merged),
    }
}

/// Half-wave plate: σ_z at 0°, σ_x at 45°, −σ_z at 90°.
pub fn hwp(s: &HybridState, line: LineLabel, angle: HwpAngle) -> HybridState {
    let m = match angle {
        HwpAngle::Deg0 => sigma_z(),
        HwpAngle::Deg45 => sigma_x(),
        HwpAngle::Deg90 => {
            let z = sigma_z();
            [[-z[0][0], -z[0][1]], [-z[1][0], -z[1][1]]]
        }
    };
    s.apply_polarization_map(line, &m)
}

/// Mirrors only redirect the beam.
pub fn mirror(s: &HybridState, _line: LineLabel) -> HybridState {
    s.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{AtomGround, BasisKet};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    const L0: LineLabel = LineLabel(0);
    const L1: LineLabel = LineLabel(1);
    const L2: LineLabel = LineLabel(2);

    fn photon(p: Polarization, line: LineLabel) -> HybridState {
        HybridState::basis(1, BasisKet::new(p, line, &[AtomGround::Gh]))
    }

    fn c(re: f64) -> Amplitude {
        Amplitude::new(re, 0.0)
    }

    #[test]
    fn split_routes_by_polarization() {
        assert_eq!(
            pbs_split(&photon(Polarization::H, L0), L0, L1, L2),
            photon(Polarization::H, L1)
        );
        assert_eq!(
            pbs_split(&photon(Polarization::V, L0), L0, L1, L2),
            photon(Polarization::V, L2)
        );
        let r = c(FRAC_1_SQRT_2);
        let sup = HybridState::from_terms(
            1,
            [
                (BasisKet::new(Polarization::H, L0, &[AtomGround::Gh]), r),
                (BasisKet::new(Polarization::V, L0, &[AtomGround::Gh]), r),
            ],
        )
        .unwrap();
        let out = pbs_split(&sup, L0, L1, L2);
        assert_eq!(
            out.amplitude(&BasisKet::new(Polarization::H, L1, &[AtomGround::Gh])),
            r
        );
        assert_eq!(
            out.amplitude(&BasisKet::new(Polarization::V, L2, &[AtomGround::Gh])),
            r
        );
        assert!((out.norm_squared() - 1.0).abs() < 1e-12);
        // terms elsewhere pass through
        assert_eq!(
            pbs_split(&photon(Polarization::V, L1), L0, L1, L2),
            photon(Polarization::V, L1)
        );
    }

    #[test]
    fn merge_recombines_and_rejects_wrong_ports() {
        let s = HybridState::from_terms(
            1,
            [
                (
                    BasisKet::new(Polarization::H, L1, &[AtomGround::Gh]),
                    c(0.6),
                ),
                (
                    BasisKet::new(Polarization::V, L2, &[AtomGround::Gh]),
                    c(0.8),
                ),
            ],
        )
        .unwrap();
        let out = pbs_merge(&s, L1, L2, L0, MergePolicy::Strict).unwrap();
        assert_eq!(
            out.amplitude(&BasisKet::new(Polarization::H, L0, &[AtomGround::Gh])),
            c(0.6)
        );
        assert_eq!(
            out.amplitude(&BasisKet::new(Polarization::V, L0, &[AtomGround::Gh])),
            c(0.8)
        );

        assert_eq!(
            pbs_merge(&HybridState::empty(1), L1, L2, L0, MergePolicy::Strict).unwrap(),
            HybridState::empty(1)
        );

        let wrong = photon(Polarization::V, L1);
        assert!(matches!(
            pbs_merge(&wrong, L1, L2, L0, MergePolicy::Strict),
            Err(ElementError::MisWired {
                polarization: Polarization::V,
                ..
            })
        ));
        assert!(pbs_merge(&wrong, L1, L2, L0, MergePolicy::Discard)
            .unwrap()
            .is_empty());
        assert_eq!(
            pbs_merge(&wrong, L1, L2, L0, MergePolicy::Coherent).unwrap(),
            photon(Polarization::V, L0)
        );
    }

    #[test]
    fn wave_plates() {
        let h = photon(Polarization::H, L2);
        let v = photon(Polarization::V, L2);
        assert_eq!(hwp(&v, L2, HwpAngle::Deg0), v.scaled(c(-1.0)));
        assert_eq!(hwp(&h, L2, HwpAngle::Deg0), h);
        assert_eq!(hwp(&h, L2, HwpAngle::Deg45), v);
        assert_eq!(hwp(&h, L2, HwpAngle::Deg90), h.scaled(c(-1.0)));
        assert_eq!(hwp(&v, L2, HwpAngle::Deg90), v);
        assert_eq!(HwpAngle::try_from(30), Err(ElementError::BadAngle(30)));
    }

    #[test]
    fn mirror_is_identity() {
        let h = photon(Polarization::H, L2);
        assert_eq!(mirror(&h, L2), h);
        assert_eq!(mirror(&mirror(&h, L2), L2), h);
    }

    #[test]
    fn text_format_round_trip() {
        for text in [
            "PBS split l0 -> l1 l2",
            "PBS merge l1 l2 -> l0",
            "HWP 45 l2",
            "HWP 90 l3",
            "CAV l2 atom1",
            "MIRROR l4",
        ] {
            let step: ElementStep = text.parse().unwrap();
            assert_eq!(step.to_string(), text);
        }
        assert!("HWP 30 l2".parse::<ElementStep>().is_err());
        assert!("CAV l2 atom0".parse::<ElementStep>().is_err());
        assert!("LENS l2".parse::<ElementStep>().is_err());
    }

    fn arb_state() -> impl Strategy<Value = HybridState> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16).prop_map(|amps| {
            let terms = amps.into_iter().enumerate().map(|(i, (re, im))| {
                let pol = Polarization::from_index(i & 1);
                (
                    BasisKet::from_bits(pol, LineLabel(((i >> 1) % 4) as u16), (i >> 3) as u64),
                    Amplitude::new(re, im),
                )
            });
            HybridState::from_terms(2, terms).unwrap()
        })
    }

    fn arb_angle() -> impl Strategy<Value = HwpAngle> {
        prop_oneof![
            Just(HwpAngle::Deg0),
            Just(HwpAngle::Deg45),
            Just(HwpAngle::Deg90)
        ]
    }

    proptest! {
        #[test]
        fn elements_preserve_norm(s in arb_state(), angle in arb_angle(), line in 0u16..4) {
            let n0 = s.norm_squared();
            let l = LineLabel(line);
            prop_assert!((hwp(&s, l, angle).norm_squared() - n0).abs() < 1e-12);
            prop_assert!((mirror(&s, l).norm_squared() - n0).abs() < 1e-12);
            let split = pbs_split(&s, l, LineLabel(10), LineLabel(11));
            prop_assert!((split.norm_squared() - n0).abs() < 1e-12);
        }

        #[test]
        fn merge_undoes_split(s in arb_state()) {
            let split = pbs_split(&s, L0, LineLabel(10), LineLabel(11));
            let back = pbs_merge(&split, LineLabel(10), LineLabel(11), L0, MergePolicy::Strict).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn plates_are_involutions(s in arb_state(), angle in arb_angle(), line in 0u16..4) {
            let l = LineLabel(line);
            let twice = hwp(&hwp(&s, l, angle), l, angle);
            prop_assert!(twice.max_abs_deviation(&s) < 1e-15);
        }

        #[test]
        fn disjoint_lines_commute(s in arb_state(), a in arb_angle(), b in arb_angle()) {
            let x = hwp(&hwp(&s, L1, a), L2, b);
            let y = hwp(&hwp(&s, L2, b), L1, a);
            prop_assert!(x.max_abs_deviation(&y) < 1e-15);
            let x = pbs_split(&hwp(&s, L1, a), L0, LineLabel(10), LineLabel(11));
            let y = hwp(&pbs_split(&s, L0, LineLabel(10), LineLabel(11)), L1, a);
            prop_assert!(x.max_abs_deviation(&y) < 1e-15);
        }
    }
}
