use std::collections::BTreeMap;

use thiserror::Error;

use super::{AtomExpr, AtomPrimitive, BondExpr, QueryBond, QueryPattern};
use crate::chem::element;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmartsError {
    #[error("unsupported SMARTS primitive '{name}' at byte {offset}")]
    UnsupportedPrimitive { name: String, offset: usize },
    #[error("malformed SMARTS at byte {offset}: {reason}")]
    MalformedQuery { offset: usize, reason: String },
}

fn malformed(offset: usize, reason: &str) -> SmartsError {
    SmartsError::MalformedQuery {
        offset,
        reason: reason.to_string(),
    }
}

fn unsupported(offset: usize, name: &str) -> SmartsError {
    SmartsError::UnsupportedPrimitive {
        name: name.to_string(),
        offset,
    }
}

/// Parses the supported SMARTS subset into a connected query graph.
///
/// Recursive SMARTS, chirality, directional bonds, `.` grouping, isotopes,
/// atom maps and the `h`, `v`, `x`, `^` primitives are rejected by name.
pub fn parse_smarts(text: &str) -> Result<QueryPattern, SmartsError> {
    if text.is_empty() {
        return Err(malformed(0, "empty pattern"));
    }
    Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
    }
    .run()
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

struct OpenRing {
    atom: usize,
    bond: Option<BondExpr>,
    offset: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn run(mut self) -> Result<QueryPattern, SmartsError> {
        let mut atoms: Vec<AtomExpr> = Vec::new();
        let mut bonds: Vec<QueryBond> = Vec::new();
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondExpr, usize)> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(malformed(start, "branch before any atom"));
                    };
                    if pending.is_some() {
                        return Err(malformed(start, "bond before branch"));
                    }
                    if self.bytes.get(start + 1) == Some(&b')') {
                        return Err(malformed(start, "empty branch"));
                    }
                    branches.push((p, start));
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return Err(malformed(start, "dangling bond"));
                    }
                    let Some((p, _)) = branches.pop() else {
                        return Err(malformed(start, "unbalanced ')'"));
                    };
                    prev = Some(p);
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else {
                        return Err(malformed(start, "ring closure before any atom"));
                    };
                    let label = self.ring_label()?;
                    let bond = pending.take().map(|(b, _)| b);
                    match rings.remove(&label) {
                        None => {
                            rings.insert(
                                label,
                                OpenRing {
                                    atom: p,
                                    bond,
                                    offset: start,
                                },
                            );
                        }
                        Some(open) => {
                            if open.atom == p {
                                return Err(malformed(start, "ring closure onto the same atom"));
                            }
                            if bonds.iter().any(|b| {
                                (b.begin, b.end) == (open.atom, p)
                                    || (b.begin, b.end) == (p, open.atom)
                            }) {
                                return Err(malformed(start, "duplicate bond"));
                            }
                            let expr = match (open.bond, bond) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(malformed(start, "conflicting ring-closure bonds"))
                                }
                                (Some(a), _) => a,
                                (None, Some(b)) => b,
                                (None, None) => implicit_bond(&atoms[open.atom], &atoms[p]),
                            };
                            bonds.push(QueryBond {
                                begin: open.atom,
                                end: p,
                                expr,
                            });
                        }
                    }
                }
                b'-' | b'=' | b'#' | b':' | b'~' | b'@' | b'!' | b'&' | b',' | b';' | b'/'
                | b'\\' => {
                    if prev.is_none() {
                        return Err(malformed(start, "bond before any atom"));
                    }
                    if pending.is_some() {
                        return Err(malformed(start, "two bond expressions in a row"));
                    }
                    let expr = self.bond_expr()?;
                    pending = Some((expr, start));
                }
                b'.' => return Err(unsupported(start, "component grouping '.'")),
                _ => {
                    let expr = if c == b'[' {
                        self.bracket_atom()?
                    } else {
                        self.bare_atom()?
                    };
                    let idx = atoms.len();
                    atoms.push(expr);
                    if let Some(p) = prev {
                        let expr = match pending.take() {
                            Some((b, _)) => b,
                            None => implicit_bond(&atoms[p], &atoms[idx]),
                        };
                        bonds.push(QueryBond {
                            begin: p,
                            end: idx,
                            expr,
                        });
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, offset)) = pending {
            return Err(malformed(offset, "dangling bond"));
        }
        if let Some(&(_, offset)) = branches.last() {
            return Err(malformed(offset, "unbalanced '('"));
        }
        if let Some(open) = rings.values().next() {
            return Err(malformed(open.offset, "unclosed ring"));
        }
        if atoms.is_empty() {
            return Err(malformed(0, "no atoms"));
        }
        Ok(QueryPattern::new(atoms, bonds, self.text.to_string()))
    }

    fn ring_label(&mut self) -> Result<u32, SmartsError> {
        let start = self.pos;
        if self.bytes[start] == b'%' {
            let digits = self.bytes.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(malformed(start, "'%' needs two digits")),
            }
        } else {
            self.pos += 1;
            Ok((self.bytes[start] - b'0') as u32)
        }
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            self.text[start..self.pos].parse().ok()
        }
    }

    fn bare_atom(&mut self) -> Result<AtomExpr, SmartsError> {
        let start = self.pos;
        let rest = &self.bytes[start..];
        let (prim, len) = match rest {
            [b'C', b'l', ..] => (element_prim(17, false), 2),
            [b'B', b'r', ..] => (element_prim(35, false), 2),
            [b'*', ..] => (AtomPrimitive::Wildcard, 1),
            [b'a', ..] => (AtomPrimitive::Aromatic, 1),
            [b'A', ..] => (AtomPrimitive::Aliphatic, 1),
            [c @ (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I'), ..] => {
                let n = element::atomic_number(std::str::from_utf8(&[*c]).unwrap()).unwrap();
                (element_prim(n, false), 1)
            }
            [c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's'), ..] => {
                let upper = c.to_ascii_uppercase();
                let n = element::atomic_number(std::str::from_utf8(&[upper]).unwrap()).unwrap();
                (element_prim(n, true), 1)
            }
            _ => return Err(malformed(start, "expected an atom")),
        };
        self.pos += len;
        Ok(AtomExpr::Prim(prim))
    }

    fn bracket_atom(&mut self) -> Result<AtomExpr, SmartsError> {
        let open = self.pos;
        let close = self.bytes[open..]
            .iter()
            .position(|&b| b == b']')
            .map(|p| open + p)
            .ok_or_else(|| malformed(open, "unterminated '['"))?;
        self.pos += 1;
        // a lone H is the hydrogen atom, not a hydrogen count
        if &self.bytes[self.pos..close] == b"H" {
            self.pos = close + 1;
            return Ok(AtomExpr::Prim(element_prim(element::HYDROGEN, false)));
        }
        if self.pos == close {
            return Err(malformed(open, "empty bracket atom"));
        }
        let expr = self.low_and()?;
        if self.pos != close {
            return Err(malformed(self.pos, "unexpected character in bracket atom"));
        }
        self.pos += 1;
        Ok(expr)
    }

    fn low_and(&mut self) -> Result<AtomExpr, SmartsError> {
        let mut parts = vec![self.or()?];
        while self.peek() == Some(b';') {
            self.pos += 1;
            parts.push(self.or()?);
        }
        Ok(collapse(parts, AtomExpr::And))
    }

    fn or(&mut self) -> Result<AtomExpr, SmartsError> {
        let mut parts = vec![self.high_and()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            parts.push(self.high_and()?);
        }
        Ok(collapse(parts, AtomExpr::Or))
    }

    fn high_and(&mut self) -> Result<AtomExpr, SmartsError> {
        let mut parts = vec![self.unary()?];
        loop {
            match self.peek() {
                Some(b'&') => {
                    self.pos += 1;
                    parts.push(self.unary()?);
                }
                Some(b',' | b';' | b']') | None => break,
                Some(_) => parts.push(self.unary()?),
            }
        }
        Ok(collapse(parts, AtomExpr::And))
    }

    fn unary(&mut self) -> Result<AtomExpr, SmartsError> {
        if self.peek() == Some(b'!') {
            self.pos += 1;
            return Ok(AtomExpr::Not(Box::new(self.unary()?)));
        }
        Ok(AtomExpr::Prim(self.primitive()?))
    }

    fn primitive(&mut self) -> Result<AtomPrimitive, SmartsError> {
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Err(malformed(start, "expected a primitive"));
        };
        let count = |p: &mut Self, default: u32| -> Result<u8, SmartsError> {
            let n = p.number().unwrap_or(default);
            u8::try_from(n).map_err(|_| malformed(start, "count out of range"))
        };
        match c {
            b'*' => {
                self.pos += 1;
                Ok(AtomPrimitive::Wildcard)
            }
            b'a' => {
                self.pos += 1;
                Ok(AtomPrimitive::Aromatic)
            }
            b'A' if self
                .bytes
                .get(start + 1)
                .is_none_or(|b| !b.is_ascii_lowercase()) =>
            {
                self.pos += 1;
                Ok(AtomPrimitive::Aliphatic)
            }
            b'#' => {
                self.pos += 1;
                match self.number() {
                    Some(n) if (1..=118).contains(&n) => Ok(AtomPrimitive::AtomicNumber(n as u8)),
                    _ => Err(malformed(start, "'#' needs an atomic number")),
                }
            }
            b'D' => {
                self.pos += 1;
                Ok(AtomPrimitive::Degree(count(self, 1)?))
            }
            b'H' => {
                self.pos += 1;
                Ok(AtomPrimitive::TotalH(count(self, 1)?))
            }
            b'X' => {
                self.pos += 1;
                Ok(AtomPrimitive::Connectivity(count(self, 1)?))
            }
            b'R' => {
                self.pos += 1;
                Ok(match self.number() {
                    None => AtomPrimitive::InRing,
                    Some(n) => AtomPrimitive::RingCount(
                        u8::try_from(n).map_err(|_| malformed(start, "count out of range"))?,
                    ),
                })
            }
            b'r' => {
                self.pos += 1;
                Ok(match self.number() {
                    None => AtomPrimitive::InRing,
                    Some(n) => AtomPrimitive::SmallestRing(
                        u8::try_from(n).map_err(|_| malformed(start, "count out of range"))?,
                    ),
                })
            }
            b'+' | b'-' => {
                let sign: i32 = if c == b'+' { 1 } else { -1 };
                self.pos += 1;
                let magnitude = match self.number() {
                    Some(n) => n as i32,
                    None => {
                        let mut m = 1;
                        while self.peek() == Some(c) {
                            self.pos += 1;
                            m += 1;
                        }
                        m
                    }
                };
                i8::try_from(sign * magnitude)
                    .map(AtomPrimitive::Charge)
                    .map_err(|_| malformed(start, "charge out of range"))
            }
            b'$' => Err(unsupported(start, "recursive SMARTS $(...)")),
            b'@' => Err(unsupported(start, "chirality @")),
            b'h' => Err(unsupported(start, "implicit hydrogen count h")),
            b'v' => Err(unsupported(start, "valence v")),
            b'x' => Err(unsupported(start, "ring connectivity x")),
            b'^' => Err(unsupported(start, "hybridization ^")),
            b':' => Err(unsupported(start, "atom map :")),
            b'0'..=b'9' => Err(unsupported(start, "isotope")),
            b'A'..=b'Z' => {
                let two = self
                    .text
                    .get(start..start + 2)
                    .filter(|s| s.as_bytes()[1].is_ascii_lowercase())
                    .and_then(|s| element::atomic_number(s).map(|n| (n, 2)));
                let (n, len) = match two {
                    Some(v) => v,
                    None => element::atomic_number(&self.text[start..start + 1])
                        .map(|n| (n, 1))
                        .ok_or_else(|| malformed(start, "unknown element"))?,
                };
                self.pos += len;
                Ok(element_prim(n, false))
            }
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                let len = match self.bytes.get(start..start + 2) {
                    Some(b"se") | Some(b"as") => 2,
                    _ => 1,
                };
                let symbol = self.text[start..start + len].to_string();
                let mut chars = symbol.chars();
                let cap: String = chars
                    .next()
                    .map(|f| f.to_ascii_uppercase())
                    .into_iter()
                    .chain(chars)
                    .collect();
                let n = element::atomic_number(&cap).expect("aromatic symbol");
                self.pos += len;
                Ok(element_prim(n, true))
            }
            _ => Err(malformed(start, "unexpected character")),
        }
    }

    fn bond_expr(&mut self) -> Result<BondExpr, SmartsError> {
        self.bond_low()
    }

    fn bond_low(&mut self) -> Result<BondExpr, SmartsError> {
        let mut parts = vec![self.bond_or()?];
        while self.peek() == Some(b';') {
            self.pos += 1;
            parts.push(self.bond_or()?);
        }
        Ok(collapse(parts, BondExpr::And))
    }

    fn bond_or(&mut self) -> Result<BondExpr, SmartsError> {
        let mut parts = vec![self.bond_high()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            parts.push(self.bond_high()?);
        }
        Ok(collapse(parts, BondExpr::Or))
    }

    fn bond_high(&mut self) -> Result<BondExpr, SmartsError> {
        let mut parts = vec![self.bond_unary()?];
        loop {
            match self.peek() {
                Some(b'&') => {
                    self.pos += 1;
                    parts.push(self.bond_unary()?);
                }
                Some(b'-' | b'=' | b'#' | b':' | b'~' | b'@' | b'!' | b'/' | b'\\') => {
                    parts.push(self.bond_unary()?)
                }
                _ => break,
            }
        }
        Ok(collapse(parts, BondExpr::And))
    }

    fn bond_unary(&mut self) -> Result<BondExpr, SmartsError> {
        let start = self.pos;
        let c = self
            .peek()
            .ok_or_else(|| malformed(start, "expected a bond"))?;
        self.pos += 1;
        Ok(match c {
            b'!' => BondExpr::Not(Box::new(self.bond_unary()?)),
            b'-' => BondExpr::Single,
            b'=' => BondExpr::Double,
            b'#' => BondExpr::Triple,
            b':' => BondExpr::Aromatic,
            b'~' => BondExpr::Any,
            b'@' => BondExpr::Ring,
            b'/' | b'\\' => return Err(unsupported(start, "directional bond")),
            _ => return Err(malformed(start, "expected a bond")),
        })
    }
}

fn element_prim(number: u8, aromatic: bool) -> AtomPrimitive {
    AtomPrimitive::Element { number, aromatic }
}

fn implicit_bond(a: &AtomExpr, b: &AtomExpr) -> BondExpr {
    BondExpr::Unspecified {
        aromatic_pair: a.requires_aromatic() && b.requires_aromatic(),
    }
}

fn collapse<T>(mut parts: Vec<T>, wrap: fn(Vec<T>) -> T) -> T {
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        wrap(parts)
    }
}
