//! Text forms of states.
//!
//! Two literals are accepted, both whitespace-insensitive:
//!
//! * product form: `photon(l0)=0.7071H+0.7071V; atom1=1.0gh; atom2=0.6gh+0.8gv`
//! * ket-sum form: `(0.5+0i)|H,l0;gh,gv> - 0.5i|V,l2;gv,gv>`
//!
//! Coefficients are a real number, an imaginary number (`0.5i`), or a
//! parenthesized complex number `(a+bi)`. A missing coefficient means 1.
//! [`format_state`] always emits the ket-sum form with every coefficient
//! parenthesized, and round-trips exactly through [`parse_state`].

use super::{
    make_product_state, Amplitude, AtomGround, BasisKet, HybridState, LineLabel, Polarization,
    StateError,
};

pub fn parse_state(text: &str) -> Result<HybridState, StateError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(StateError::Parse("empty literal".into()));
    }
    if compact.contains('|') {
        parse_ket_sum(&compact)
    } else {
        parse_product(&compact)
    }
}

/// Ket-sum rendering of `s`; the empty state renders as `0`.
pub fn format_state(s: &HybridState) -> String {
    if s.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (ket, amp)) in s.terms().enumerate() {
        if i > 0 {
            out.push_str(" + ");
        }
        out.push_str(&format_complex(*amp));
        out.push('|');
        out.push_str(&format!("{},{};", ket.polarization, ket.line));
        let atoms: Vec<String> = ket.atoms(s.n()).iter().map(|a| a.to_string()).collect();
        out.push_str(&atoms.join(","));
        out.push('>');
    }
    out
}

fn format_complex(a: Amplitude) -> String {
    let sign = if a.im.is_sign_negative() { '-' } else { '+' };
    format!("({}{}{}i)", a.re, sign, a.im.abs())
}

fn err<T>(msg: impl Into<String>) -> Result<T, StateError> {
    Err(StateError::Parse(msg.into()))
}

fn parse_product(s: &str) -> Result<HybridState, StateError> {
    let mut photon: Option<((Amplitude, Amplitude), LineLabel)> = None;
    let mut atoms: Vec<Option<(Amplitude, Amplitude)>> = Vec::new();
    for seg in s.split(';').filter(|seg| !seg.is_empty()) {
        let Some((lhs, rhs)) = seg.split_once('=') else {
            return err(format!("segment `{seg}` has no `=`"));
        };
        if let Some(rest) = lhs.strip_prefix("photon") {
            let line = match rest {
                "" => LineLabel(0),
                r => {
                    let inner = r
                        .strip_prefix('(')
                        .and_then(|r| r.strip_suffix(')'))
                        .ok_or_else(|| StateError::Parse(format!("bad photon label `{lhs}`")))?;
                    parse_line(inner)?
                }
            };
            if photon.is_some() {
                return err("photon given twice");
            }
            let pair = parse_lincomb(rhs, &["H", "V"])?;
            photon = Some((pair, line));
        } else if let Some(idx) = lhs.strip_prefix("atom") {
            let idx: usize = idx
                .parse()
                .map_err(|_| StateError::Parse(format!("bad atom label `{lhs}`")))?;
            if idx == 0 {
                return err("atoms are numbered from 1");
            }
            if idx > super::MAX_ATOMS {
                return Err(StateError::TooManyAtoms(idx));
            }
            if atoms.len() < idx {
                atoms.resize(idx, None);
            }
            if atoms[idx - 1].is_some() {
                return err(format!("atom{idx} given twice"));
            }
            atoms[idx - 1] = Some(parse_lincomb(rhs, &["gh", "gv"])?);
        } else {
            return err(format!("unknown qubit `{lhs}`"));
        }
    }
    let Some((photon, line)) = photon else {
        return err("missing photon");
    };
    let atoms = atoms
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.ok_or_else(|| StateError::Parse(format!("missing atom{}", i + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    make_product_state(photon, line, &atoms)
}

fn parse_line(s: &str) -> Result<LineLabel, StateError> {
    s.strip_prefix('l')
        .and_then(|d| d.parse::<u16>().ok())
        .map(LineLabel)
        .ok_or_else(|| StateError::Parse(format!("bad line label `{s}`")))
}

/// Parses `c1 X + c2 Y` over exactly the two given symbols.
fn parse_lincomb(s: &str, symbols: &[&str; 2]) -> Result<(Amplitude, Amplitude), StateError> {
    let mut cur = Cursor::new(s);
    let mut coeffs = [Amplitude::new(0.0, 0.0); 2];
    let mut first = true;
    while !cur.at_end() {
        let sign = cur.sign(first)?;
        first = false;
        let coeff = cur.coefficient()?.unwrap_or(Amplitude::new(1.0, 0.0));
        let Some(idx) = symbols.iter().position(|sym| cur.eat(sym)) else {
            return err(format!("expected one of {symbols:?} in `{s}`"));
        };
        coeffs[idx] += sign * coeff;
    }
    if first {
        return err("empty combination");
    }
    Ok((coeffs[0], coeffs[1]))
}

fn parse_ket_sum(s: &str) -> Result<HybridState, StateError> {
    let mut cur = Cursor::new(s);
    let mut terms = Vec::new();
    let mut n: Option<usize> = None;
    let mut first = true;
    while !cur.at_end() {
        let sign = cur.sign(first)?;
        first = false;
        let coeff = cur.coefficient()?.unwrap_or(Amplitude::new(1.0, 0.0));
        if !cur.eat("|") {
            return err(format!("expected `|` at offset {}", cur.pos));
        }
        let body = cur.take_until('>')?;
        let (photon, atoms) = body.split_once(';').unwrap_or((body, ""));
        let (pol, line) = photon
            .split_once(',')
            .ok_or_else(|| StateError::Parse(format!("bad ket `{body}`")))?;
        let pol = match pol {
            "H" => Polarization::H,
            "V" => Polarization::V,
            p => return err(format!("bad polarization `{p}`")),
        };
        let line = parse_line(line)?;
        let atoms = if atoms.is_empty() {
            Vec::new()
        } else {
            atoms
                .split(',')
                .map(|a| match a {
                    "gh" => Ok(AtomGround::Gh),
                    "gv" => Ok(AtomGround::Gv),
                    a => err(format!("bad atom state `{a}`")),
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        if atoms.len() > super::MAX_ATOMS {
            return Err(StateError::TooManyAtoms(atoms.len()));
        }
        match n {
            None => n = Some(atoms.len()),
            Some(m) if m != atoms.len() => {
                return Err(StateError::AtomCountMismatch {
                    left: m,
                    right: atoms.len(),
                })
            }
            _ => {}
        }
        terms.push((BasisKet::new(pol, line, &atoms), sign * coeff));
    }
    HybridState::from_terms(n.unwrap_or(0), terms)
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Cursor { s, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.s.len()
    }

    fn eat(&mut self, tok: &str) -> bool {
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn take_until(&mut self, end: char) -> Result<&'a str, StateError> {
        let rest = self.rest();
        let Some(i) = rest.find(end) else {
            return err(format!("missing `{end}`"));
        };
        self.pos += i + end.len_utf8();
        Ok(&rest[..i])
    }

    /// Leading `+`/`-` between terms; optional before the first term.
    fn sign(&mut self, first: bool) -> Result<f64, StateError> {
        if self.eat("+") {
            Ok(1.0)
        } else if self.eat("-") {
            Ok(-1.0)
        } else if first {
            Ok(1.0)
        } else {
            err(format!("expected `+` or `-` at offset {}", self.pos))
        }
    }

    fn number(&mut self) -> Option<f64> {
        let bytes = self.rest().as_bytes();
        let mut i = 0;
        let digits = |i: &mut usize| {
            let start = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > start
        };
        let mut any = digits(&mut i);
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            any |= digits(&mut i);
        }
        if !any {
            return None;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) {
                i = j;
            }
        }
        let v = self.rest()[..i].parse().ok()?;
        self.pos += i;
        Some(v)
    }

    /// Real `a`, imaginary `bi`, or `(a±bi)`; `None` if no coefficient is present.
    fn coefficient(&mut self) -> Result<Option<Amplitude>, StateError> {
        if self.eat("(") {
            let mut total = Amplitude::new(0.0, 0.0);
            let mut first = true;
            while !self.eat(")") {
                if self.at_end() {
                    return err("unclosed `(`");
                }
                let sign = self.sign(first)?;
                first = false;
                let v = self.number();
                let imag = self.eat("i");
                let v = match (v, imag) {
                    (Some(v), _) => v,
                    (None, true) => 1.0,
                    (None, false) => return err(format!("bad number at offset {}", self.pos)),
                };
                total += if imag {
                    Amplitude::new(0.0, sign * v)
                } else {
                    Amplitude::new(sign * v, 0.0)
                };
            }
            if first {
                return err("empty `()`");
            }
            return Ok(Some(total));
        }
        match self.number() {
            Some(v) if self.eat("i") => Ok(Some(Amplitude::new(0.0, v))),
            Some(v) => Ok(Some(Amplitude::new(v, 0.0))),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Amplitude {
        Amplitude::new(re, im)
    }

    #[test]
    fn parses_product_literal() {
        let s = parse_state("photon(l0)=0.6H+0.8V; atom1=1.0gh; atom2=0.6gh+0.8gv").unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.len(), 4);
        let k = BasisKet::new(
            Polarization::V,
            LineLabel(0),
            &[AtomGround::Gh, AtomGround::Gv],
        );
        assert!((s.amplitude(&k) - c(0.64, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn parses_complex_and_implicit_coefficients() {
        let s = parse_state("photon(l2) = (0.6+0.8i)H ; atom1 = gv").unwrap();
        let k = BasisKet::new(Polarization::H, LineLabel(2), &[AtomGround::Gv]);
        assert_eq!(s.amplitude(&k), c(0.6, 0.8));
        let s = parse_state("photon=0.6H-0.8iV;atom1=-gh").unwrap();
        let k = BasisKet::new(Polarization::V, LineLabel(0), &[AtomGround::Gh]);
        assert!((s.amplitude(&k) - c(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn product_literal_errors() {
        assert!(matches!(
            parse_state("photon(l0)=0.5H+0.5V; atom1=gh"),
            Err(StateError::NotNormalized { ref qubit, .. }) if qubit == "photon"
        ));
        assert!(matches!(
            parse_state("photon=H; atom2=gh"),
            Err(StateError::Parse(_))
        ));
        assert!(matches!(parse_state("atom1=gh"), Err(StateError::Parse(_))));
        assert!(matches!(
            parse_state("photon=H; atom1=gx"),
            Err(StateError::Parse(_))
        ));
        assert!(matches!(parse_state(""), Err(StateError::Parse(_))));
    }

    #[test]
    fn parses_ket_sum() {
        let s = parse_state("0.6|H,l0;gh> - (0+0.8i)|V,l3;gv>").unwrap();
        assert_eq!(s.n(), 1);
        let k = BasisKet::new(Polarization::V, LineLabel(3), &[AtomGround::Gv]);
        assert_eq!(s.amplitude(&k), c(0.0, -0.8));
        assert!(matches!(
            parse_state("|H,l0;gh> + |H,l0;gh,gv>"),
            Err(StateError::AtomCountMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn format_round_trips(amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8)) {
            let terms = amps.iter().enumerate().map(|(i, (re, im))| {
                (BasisKet::from_bits(Polarization::from_index(i & 1), LineLabel((i % 5) as u16), (i >> 1) as u64), c(*re, *im))
            });
            let s = HybridState::from_terms(2, terms).unwrap();
            let back = parse_state(&format_state(&s)).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
