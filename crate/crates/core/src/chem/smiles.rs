use std::collections::BTreeMap;

use thiserror::Error;

use super::{element, implicit_hydrogens, Atom, Bond, BondOrder, Molecule};

pub const DEFAULT_MAX_SMILES_LEN: usize = 4096;

/// SMILES parse failures. Offsets are 0-based byte positions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("SMILES is {len} bytes, limit is {max}")]
    TooLong { len: usize, max: usize },
    #[error("unbalanced ring closure {label} at byte {offset}")]
    UnbalancedRingClosure { label: u16, offset: usize },
    #[error("unbalanced parenthesis at byte {offset}")]
    UnbalancedParenthesis { offset: usize },
    #[error("unknown atom symbol '{symbol}' at byte {offset}")]
    UnknownAtomSymbol { symbol: String, offset: usize },
    #[error("valence overflow on atom {atom} at byte {offset}")]
    ValenceOverflow { atom: usize, offset: usize },
    #[error("unterminated bracket atom at byte {offset}")]
    UnterminatedBracketAtom { offset: usize },
    #[error("unexpected character '{ch}' at byte {offset}")]
    UnexpectedCharacter { ch: char, offset: usize },
    #[error("conflicting ring-closure bond symbols at byte {offset}")]
    RingBondConflict { offset: usize },
    #[error("duplicate bond between the same atoms at byte {offset}")]
    DuplicateBond { offset: usize },
    #[error("bond symbol not followed by an atom at byte {offset}")]
    DanglingBond { offset: usize },
    #[error("empty branch at byte {offset}")]
    EmptyBranch { offset: usize },
}

pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    parse_smiles_with_limit(text, DEFAULT_MAX_SMILES_LEN)
}

pub fn parse_smiles_with_limit(text: &str, max_len: usize) -> Result<Molecule, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    if text.len() > max_len {
        return Err(SmilesError::TooLong {
            len: text.len(),
            max: max_len,
        });
    }
    Parser::new(text).run()
}

#[derive(Clone, Copy)]
struct PendingBond {
    order: BondOrder,
    stereo: Option<char>,
    offset: usize,
}

struct OpenRing {
    atom: usize,
    bond: Option<PendingBond>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    atom_offsets: Vec<usize>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    /// (atom before the branch, atom count at open, offset of `(`)
    branches: Vec<(Option<usize>, usize, usize)>,
    pending: Option<PendingBond>,
    rings: BTreeMap<u16, OpenRing>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            atom_offsets: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            branches: Vec::new(),
            pending: None,
            rings: BTreeMap::new(),
        }
    }

    fn unexpected(&self, offset: usize) -> SmilesError {
        let ch = self.text[offset..].chars().next().unwrap_or('?');
        SmilesError::UnexpectedCharacter { ch, offset }
    }

    fn run(mut self) -> Result<Molecule, SmilesError> {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'(' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(self.unexpected(self.pos));
                    }
                    self.branches.push((self.prev, self.atoms.len(), self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((prev, count, _)) = self.branches.pop() else {
                        return Err(SmilesError::UnbalancedParenthesis { offset: self.pos });
                    };
                    if let Some(p) = self.pending {
                        return Err(SmilesError::DanglingBond { offset: p.offset });
                    }
                    if self.atoms.len() == count {
                        return Err(SmilesError::EmptyBranch { offset: self.pos });
                    }
                    self.prev = prev;
                    self.pos += 1;
                }
                b'.' => {
                    if self.prev.is_none() || !self.branches.is_empty() {
                        return Err(self.unexpected(self.pos));
                    }
                    if let Some(p) = self.pending {
                        return Err(SmilesError::DanglingBond { offset: p.offset });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.unexpected(self.pos));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    let stereo = matches!(c, b'/' | b'\\').then_some(c as char);
                    self.pending = Some(PendingBond {
                        order,
                        stereo,
                        offset: self.pos,
                    });
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let start = self.pos;
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, start)?;
                }
                _ => {
                    let start = self.pos;
                    let atom = self.organic_atom()?;
                    self.add_atom(atom, start)?;
                }
            }
        }
        if let Some(p) = self.pending {
            return Err(SmilesError::DanglingBond { offset: p.offset });
        }
        if let Some(&(_, _, offset)) = self.branches.last() {
            return Err(SmilesError::UnbalancedParenthesis { offset });
        }
        if let Some((&label, open)) = self.rings.iter().next() {
            return Err(SmilesError::UnbalancedRingClosure {
                label,
                offset: open.offset,
            });
        }
        self.assign_hydrogens()?;
        Ok(Molecule::from_parts(
            self.atoms,
            self.bonds,
            self.text.to_string(),
        ))
    }

    fn add_atom(&mut self, atom: Atom, offset: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        self.atom_offsets.push(offset);
        if let Some(prev) = self.prev {
            let pending = self.pending.take();
            self.push_bond(prev, idx, pending, offset)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        spec: Option<PendingBond>,
        offset: usize,
    ) -> Result<(), SmilesError> {
        if a == b
            || self
                .bonds
                .iter()
                .any(|x| (x.begin == a && x.end == b) || (x.begin == b && x.end == a))
        {
            return Err(SmilesError::DuplicateBond { offset });
        }
        let order = match spec {
            Some(p) => p.order,
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        self.bonds.push(Bond {
            begin: a,
            end: b,
            order,
            in_ring: false,
            stereo: spec.and_then(|p| p.stereo),
        });
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let label = if self.bytes[self.pos] == b'%' {
            let digits = self.bytes.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') as u16) * 10 + (d[1] - b'0') as u16
                }
                _ => return Err(self.unexpected(start)),
            }
        } else {
            self.pos += 1;
            (self.bytes[start] - b'0') as u16
        };
        let Some(atom) = self.prev else {
            return Err(self.unexpected(start));
        };
        let bond = self.pending.take();
        match self.rings.remove(&label) {
            None => {
                self.rings.insert(
                    label,
                    OpenRing {
                        atom,
                        bond,
                        offset: start,
                    },
                );
            }
            Some(open) => {
                let spec = match (open.bond, bond) {
                    (Some(x), Some(y)) if x.order != y.order => {
                        return Err(SmilesError::RingBondConflict { offset: start })
                    }
                    (Some(x), _) => Some(x),
                    (None, y) => y,
                };
                if open.atom == atom {
                    return Err(SmilesError::DuplicateBond { offset: start });
                }
                self.push_bond(open.atom, atom, spec, start)?;
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let rest = &self.bytes[start..];
        let (sym, aromatic, len): (&str, bool, usize) = match rest {
            [b'C', b'l', ..] => ("Cl", false, 2),
            [b'B', b'r', ..] => ("Br", false, 2),
            [b'B', ..] => ("B", false, 1),
            [b'C', ..] => ("C", false, 1),
            [b'N', ..] => ("N", false, 1),
            [b'O', ..] => ("O", false, 1),
            [b'P', ..] => ("P", false, 1),
            [b'S', ..] => ("S", false, 1),
            [b'F', ..] => ("F", false, 1),
            [b'I', ..] => ("I", false, 1),
            [b'*', ..] => ("*", false, 1),
            [b'b', ..] => ("B", true, 1),
            [b'c', ..] => ("C", true, 1),
            [b'n', ..] => ("N", true, 1),
            [b'o', ..] => ("O", true, 1),
            [b'p', ..] => ("P", true, 1),
            [b's', ..] => ("S", true, 1),
            [c, ..] if c.is_ascii_alphabetic() => {
                let end = if rest.get(1).is_some_and(u8::is_ascii_lowercase) {
                    2
                } else {
                    1
                };
                return Err(SmilesError::UnknownAtomSymbol {
                    symbol: self.text[start..start + end].to_string(),
                    offset: start,
                });
            }
            _ => return Err(self.unexpected(start)),
        };
        self.pos += len;
        let mut atom = Atom::new(element::atomic_number(sym).unwrap_or(0));
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        let close = match self.bytes[open..].iter().position(|&b| b == b']') {
            Some(p) => open + p,
            None => return Err(SmilesError::UnterminatedBracketAtom { offset: open }),
        };
        let body = &self.bytes[..close];
        let mut i = open + 1;

        let digits_end = |from: usize| {
            let mut j = from;
            while j < close && body[j].is_ascii_digit() {
                j += 1;
            }
            j
        };

        let iso_end = digits_end(i);
        let isotope = if iso_end > i {
            let v: u16 = self.text[i..iso_end]
                .parse()
                .map_err(|_| self.unexpected(i))?;
            i = iso_end;
            Some(v)
        } else {
            None
        };

        if i >= close {
            return Err(self.unexpected(i.min(close)));
        }
        let sym_start = i;
        let (element, aromatic) = match body[i] {
            b'*' => {
                i += 1;
                (0u8, false)
            }
            c if c.is_ascii_uppercase() => {
                let two = if i + 1 < close && body[i + 1].is_ascii_lowercase() {
                    element::atomic_number(&self.text[i..i + 2])
                } else {
                    None
                };
                match two {
                    Some(z) => {
                        i += 2;
                        (z, false)
                    }
                    None => match element::atomic_number(&self.text[i..i + 1]) {
                        Some(z) => {
                            i += 1;
                            (z, false)
                        }
                        None => {
                            return Err(SmilesError::UnknownAtomSymbol {
                                symbol: self.text[i..i + 1].to_string(),
                                offset: i,
                            })
                        }
                    },
                }
            }
            c if c.is_ascii_lowercase() => {
                let z = match c {
                    b'b' => 5,
                    b'c' => 6,
                    b'n' => 7,
                    b'o' => 8,
                    b'p' => 15,
                    b's' => 16,
                    _ => 0,
                };
                let two_letter =
                    i + 1 < close && body[i + 1].is_ascii_lowercase() && matches!(c, b's' | b'a');
                if z == 0 || (two_letter && matches!(&body[i..i + 2], b"se" | b"as")) {
                    let end = if two_letter { i + 2 } else { i + 1 };
                    return Err(SmilesError::UnknownAtomSymbol {
                        symbol: self.text[i..end].to_string(),
                        offset: i,
                    });
                }
                i += 1;
                (z, true)
            }
            _ => return Err(self.unexpected(i)),
        };
        debug_assert!(i > sym_start);

        let mut chirality = None;
        if i < close && body[i] == b'@' {
            let cstart = i;
            i += 1;
            if i < close && body[i] == b'@' {
                i += 1;
            } else if i + 1 < close
                && body[i].is_ascii_uppercase()
                && body[i + 1].is_ascii_uppercase()
            {
                i = digits_end(i + 2);
            }
            chirality = Some(self.text[cstart..i].to_string());
        }

        let mut explicit_h = 0u8;
        if i < close && body[i] == b'H' {
            i += 1;
            let end = digits_end(i);
            explicit_h = if end > i {
                self.text[i..end].parse().map_err(|_| self.unexpected(i))?
            } else {
                1
            };
            i = end;
        }

        let mut charge: i8 = 0;
        if i < close && matches!(body[i], b'+' | b'-') {
            let sign: i8 = if body[i] == b'+' { 1 } else { -1 };
            let sign_byte = body[i];
            i += 1;
            let end = digits_end(i);
            if end > i {
                let mag: i8 = self.text[i..end].parse().map_err(|_| self.unexpected(i))?;
                charge = sign * mag;
                i = end;
            } else {
                let mut mag = 1;
                while i < close && body[i] == sign_byte {
                    mag += 1;
                    i += 1;
                }
                charge = sign * mag;
            }
        }

        if i < close && body[i] == b':' {
            let end = digits_end(i + 1);
            if end == i + 1 {
                return Err(self.unexpected(i));
            }
            i = end;
        }

        if i != close {
            return Err(self.unexpected(i));
        }
        self.pos = close + 1;

        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        atom.isotope = isotope;
        atom.explicit_h = explicit_h;
        atom.formal_charge = charge;
        atom.bracket = true;
        atom.chirality = chirality;
        Ok(atom)
    }

    fn assign_hydrogens(&mut self) -> Result<(), SmilesError> {
        let mut sums = vec![0usize; self.atoms.len()];
        for b in &self.bonds {
            sums[b.begin] += b.order.valence() as usize;
            sums[b.end] += b.order.valence() as usize;
        }
        for (i, atom) in self.atoms.iter_mut().enumerate() {
            if atom.bracket {
                continue;
            }
            atom.implicit_h = implicit_hydrogens(atom.element, atom.aromatic, sums[i]).ok_or(
                SmilesError::ValenceOverflow {
                    atom: i,
                    offset: self.atom_offsets[i],
                },
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ethanol() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(m.num_atoms(), 3);
        assert_eq!(m.num_bonds(), 2);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(m.atom(2).implicit_h, 1);
        assert_eq!(m.atom(0).implicit_h, 3);
    }

    #[test]
    fn cyclopropane_ring_closure() {
        let m = parse_smiles("C1CC1").unwrap();
        assert_eq!(m.num_atoms(), 3);
        assert_eq!(m.num_bonds(), 3);
        assert!(m.atoms().iter().all(|a| a.in_ring && a.implicit_h == 2));
    }

    #[test]
    fn benzene_aromatic() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.num_atoms(), 6);
        assert_eq!(m.num_bonds(), 6);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert!(m.atoms().iter().all(|a| a.aromatic && a.implicit_h == 1));
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("C(=O)[O-]").unwrap();
        let o = m.atom(2);
        assert_eq!(o.formal_charge, -1);
        assert_eq!(o.implicit_h, 0);
        assert!(o.bracket);

        let m = parse_smiles("[13CH3][NH3+]").unwrap();
        assert_eq!(m.atom(0).isotope, Some(13));
        assert_eq!(m.atom(0).explicit_h, 3);
        assert_eq!(m.atom(1).formal_charge, 1);
        assert_eq!(m.total_h(1), 3);

        let m = parse_smiles("[Fe++]").unwrap();
        assert_eq!(m.atom(0).formal_charge, 2);
        let m = parse_smiles("[C@@H](F)(Cl)Br").unwrap();
        assert_eq!(m.atom(0).chirality.as_deref(), Some("@@"));
        let m = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(m.total_h(3), 1);
    }

    #[test]
    fn stereo_bonds_are_single() {
        let m = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(m.bonds()[0].order, BondOrder::Single);
        assert_eq!(m.bonds()[0].stereo, Some('/'));
        assert_eq!(m.bonds()[1].order, BondOrder::Double);
    }

    #[test]
    fn percent_ring_labels_and_dots() {
        let m = parse_smiles("C%12CC%12.[Na+]").unwrap();
        assert_eq!(m.num_bonds(), 3);
        assert_eq!(m.num_components(), 2);
    }

    #[test]
    fn ring_bond_symbol_on_either_side() {
        let m = parse_smiles("C=1CCCC1").unwrap();
        assert_eq!(m.bond_between(0, 4).unwrap().order, BondOrder::Double);
        let m = parse_smiles("C1CCCC=1").unwrap();
        assert_eq!(m.bond_between(0, 4).unwrap().order, BondOrder::Double);
        assert_eq!(
            parse_smiles("C=1CCCC#1").err(),
            Some(SmilesError::RingBondConflict { offset: 8 })
        );
    }

    #[test]
    fn error_offsets() {
        assert_eq!(
            parse_smiles("C1CC").err(),
            Some(SmilesError::UnbalancedRingClosure {
                label: 1,
                offset: 1
            })
        );
        assert_eq!(
            parse_smiles("CC(O").err(),
            Some(SmilesError::UnbalancedParenthesis { offset: 2 })
        );
        assert_eq!(
            parse_smiles("CC)O").err(),
            Some(SmilesError::UnbalancedParenthesis { offset: 2 })
        );
        assert_eq!(
            parse_smiles("CXC").err(),
            Some(SmilesError::UnknownAtomSymbol {
                symbol: "X".into(),
                offset: 1
            })
        );
        assert_eq!(
            parse_smiles("C[Xx]").err(),
            Some(SmilesError::UnknownAtomSymbol {
                symbol: "X".into(),
                offset: 2
            })
        );
        assert_eq!(
            parse_smiles("CC(C)(C)(C)(C)C").err(),
            Some(SmilesError::ValenceOverflow { atom: 1, offset: 1 })
        );
        assert_eq!(
            parse_smiles("C[NH2").err(),
            Some(SmilesError::UnterminatedBracketAtom { offset: 1 })
        );
        assert_eq!(parse_smiles("").err(), Some(SmilesError::Empty));
        assert_eq!(
            parse_smiles("C=").err(),
            Some(SmilesError::DanglingBond { offset: 1 })
        );
        assert_eq!(
            parse_smiles("C()C").err(),
            Some(SmilesError::EmptyBranch { offset: 2 })
        );
        assert!(matches!(
            parse_smiles("C11"),
            Err(SmilesError::DuplicateBond { .. })
        ));
        assert!(matches!(
            parse_smiles("C12CC12"),
            Err(SmilesError::DuplicateBond { .. })
        ));
        assert!(matches!(
            parse_smiles_with_limit("CCCC", 3),
            Err(SmilesError::TooLong { len: 4, max: 3 })
        ));
    }

    #[test]
    fn aromatic_selenium_rejected() {
        assert!(matches!(
            parse_smiles("c1cc[se]c1"),
            Err(SmilesError::UnknownAtomSymbol { .. })
        ));
    }

    #[test]
    fn hypervalent_sulfur_and_nitro() {
        let m = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(m.atom(1).implicit_h, 0);
        let m = parse_smiles("C[N+](=O)[O-]").unwrap();
        assert_eq!(m.num_atoms(), 4);
        let m = parse_smiles("CN(=O)=O").unwrap();
        assert_eq!(m.atom(1).implicit_h, 0);
    }
}
