//! SMILES subset: organic-subset and bracket atoms, branches, ring closures
//! (`1`-`9`, `%nn`), `-`, `=`, `#` bonds and `.` component separators.
//! Aromatic (lowercase) atoms, stereo and isotopes are rejected.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, MolecularGraph, MoleculeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unsupported feature at {position}: {feature}")]
    UnsupportedFeature { position: usize, feature: String },
    #[error("valence error: {0}")]
    Valence(MoleculeError),
}

fn syntax(position: usize, message: &str) -> SmilesError {
    SmilesError::Syntax { position, message: message.to_string() }
}

fn unsupported(position: usize, feature: &str) -> SmilesError {
    SmilesError::UnsupportedFeature { position, feature: feature.to_string() }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    // digit -> (atom, explicit bond order at the opening, position)
    open_rings: BTreeMap<u32, (usize, Option<BondOrder>, usize)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder, at: usize) -> Result<(), SmilesError> {
        if a == b {
            return Err(syntax(at, "ring closure onto the same atom"));
        }
        if self.bonds.iter().any(|x| x.touches(a) && x.touches(b)) {
            return Err(syntax(at, "duplicate bond"));
        }
        self.bonds.push(Bond::new(a, b, order));
        Ok(())
    }

    fn bond_symbol(&mut self) -> Result<Option<BondOrder>, SmilesError> {
        let order = match self.peek() {
            Some(b'-') => Some(BondOrder::Single),
            Some(b'=') => Some(BondOrder::Double),
            Some(b'#') => Some(BondOrder::Triple),
            Some(b'/') | Some(b'\\') => return Err(unsupported(self.pos, "directional bond (stereo)")),
            Some(b':') => return Err(unsupported(self.pos, "aromatic bond")),
            Some(b'$') => return Err(unsupported(self.pos, "quadruple bond")),
            _ => None,
        };
        if order.is_some() {
            self.pos += 1;
        }
        Ok(order)
    }

    fn organic_atom(&mut self) -> Result<Option<Atom>, SmilesError> {
        let start = self.pos;
        let Some(c) = self.peek() else { return Ok(None) };
        let element = match c {
            b'C' if self.text.get(start + 1) == Some(&b'l') => {
                self.pos += 2;
                Element::Cl
            }
            b'B' if self.text.get(start + 1) == Some(&b'r') => {
                self.pos += 2;
                Element::Br
            }
            b'C' => {
                self.pos += 1;
                Element::C
            }
            b'N' => {
                self.pos += 1;
                Element::N
            }
            b'O' => {
                self.pos += 1;
                Element::O
            }
            b'S' => {
                self.pos += 1;
                Element::S
            }
            b'P' => {
                self.pos += 1;
                Element::P
            }
            b'F' => {
                self.pos += 1;
                Element::F
            }
            b'I' => {
                self.pos += 1;
                Element::I
            }
            b'B' => return Err(unsupported(start, "element B")),
            b'b' | b'c' | b'n' | b'o' | b's' | b'p' => {
                return Err(unsupported(start, "aromatic atom (kekulize the input)"))
            }
            b'*' => return Err(unsupported(start, "wildcard atom")),
            _ => return Ok(None),
        };
        Ok(Some(Atom::new(element)))
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            core::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        self.pos += 1;
        if matches!(self.peek(), Some(b'0'..=b'9')) {
            return Err(unsupported(self.pos, "isotope"));
        }
        let sym_start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_uppercase() => self.pos += 1,
            Some(c) if c.is_ascii_lowercase() => return Err(unsupported(sym_start, "aromatic atom (kekulize the input)")),
            _ => return Err(syntax(sym_start, "expected element symbol")),
        }
        if matches!(self.peek(), Some(c) if c.is_ascii_lowercase()) {
            self.pos += 1;
        }
        let sym = core::str::from_utf8(&self.text[sym_start..self.pos]).unwrap_or("");
        let element = Element::from_symbol(sym).ok_or_else(|| unsupported(sym_start, &format!("element {sym}")))?;
        if self.peek() == Some(b'@') {
            return Err(unsupported(self.pos, "chirality"));
        }
        let mut h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h = self.number().map(|n| n as u8).unwrap_or(1);
        }
        let mut charge: i8 = 0;
        if let Some(s @ (b'+' | b'-')) = self.peek() {
            let sign: i8 = if s == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.number() {
                charge = sign * n as i8;
            } else {
                charge = sign;
                while self.peek() == Some(s) {
                    self.pos += 1;
                    charge += sign;
                }
            }
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.number().is_none() {
                return Err(syntax(self.pos, "expected atom-map number"));
            }
        }
        if self.peek() != Some(b']') {
            return Err(syntax(self.pos, "unterminated bracket atom"));
        }
        self.pos += 1;
        Ok(Atom { element, charge, explicit_h: Some(h) })
    }

    fn parse(mut self) -> Result<MolecularGraph, SmilesError> {
        let mut stack: Vec<usize> = Vec::new();
        let mut prev: Option<usize> = None;
        let mut pending: Option<BondOrder> = None;
        let mut expect_atom = true;
        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'(' => {
                    let Some(p) = prev else { return Err(syntax(at, "branch without a preceding atom")) };
                    if pending.is_some() {
                        return Err(syntax(at, "bond symbol before branch"));
                    }
                    stack.push(p);
                    self.pos += 1;
                    expect_atom = true;
                }
                b')' => {
                    if expect_atom {
                        return Err(syntax(at, "empty branch or dangling bond"));
                    }
                    prev = Some(stack.pop().ok_or_else(|| syntax(at, "unbalanced ')'"))?);
                    self.pos += 1;
                }
                b'.' => {
                    if expect_atom || !stack.is_empty() {
                        return Err(syntax(at, "misplaced '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                    expect_atom = true;
                }
                b'-' | b'=' | b'#' | b'/' | b'\\' | b':' | b'$' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(syntax(at, "misplaced bond symbol"));
                    }
                    pending = self.bond_symbol()?;
                    expect_atom = true;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(p) = prev else { return Err(syntax(at, "ring closure without an atom")) };
                    if expect_atom && pending.is_none() {
                        return Err(syntax(at, "ring closure without an atom"));
                    }
                    let digit = if c == b'%' {
                        self.pos += 1;
                        let d = self.text.get(self.pos..self.pos + 2).ok_or_else(|| syntax(at, "bad %nn"))?;
                        if !d.iter().all(u8::is_ascii_digit) {
                            return Err(syntax(at, "bad %nn"));
                        }
                        self.pos += 2;
                        ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                    } else {
                        self.pos += 1;
                        (c - b'0') as u32
                    };
                    let here = pending.take();
                    match self.open_rings.remove(&digit) {
                        Some((other, there, _)) => {
                            let order = match (here, there) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(syntax(at, "conflicting ring-closure bond orders"))
                                }
                                (Some(a), _) | (None, Some(a)) => a,
                                (None, None) => BondOrder::Single,
                            };
                            self.add_bond(other, p, order, at)?;
                        }
                        None => {
                            self.open_rings.insert(digit, (p, here, at));
                        }
                    }
                    expect_atom = false;
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom, &mut prev, &mut pending, at)?;
                    expect_atom = false;
                }
                _ => match self.organic_atom()? {
                    Some(atom) => {
                        self.push_atom(atom, &mut prev, &mut pending, at)?;
                        expect_atom = false;
                    }
                    None => {
                        if c == b'@' {
                            return Err(unsupported(at, "chirality"));
                        }
                        return Err(syntax(at, &format!("unexpected character '{}'", c as char)));
                    }
                },
            }
        }
        if let Some((_, _, at)) = self.open_rings.values().next() {
            return Err(syntax(*at, "unclosed ring"));
        }
        if !stack.is_empty() {
            return Err(syntax(self.text.len(), "unbalanced '('"));
        }
        if expect_atom && !self.atoms.is_empty() {
            return Err(syntax(self.text.len(), "dangling bond"));
        }
        let g = MolecularGraph::new(self.atoms, self.bonds).map_err(SmilesError::Valence)?;
        g.check_valence().map_err(SmilesError::Valence)?;
        Ok(g)
    }

    fn push_atom(
        &mut self,
        atom: Atom,
        prev: &mut Option<usize>,
        pending: &mut Option<BondOrder>,
        at: usize,
    ) -> Result<(), SmilesError> {
        let id = self.atoms.len();
        self.atoms.push(atom);
        if let Some(p) = *prev {
            let order = pending.take().unwrap_or(BondOrder::Single);
            self.add_bond(p, id, order, at)?;
        } else if pending.is_some() {
            return Err(syntax(at, "bond symbol without a preceding atom"));
        }
        *prev = Some(id);
        Ok(())
    }
}

/// Parses the supported SMILES subset. Atoms are numbered in order of
/// appearance; bonds in order of creation (ring-closure bonds when closed).
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(syntax(0, "empty SMILES"));
    }
    Parser { text: text.as_bytes(), pos: 0, atoms: Vec::new(), bonds: Vec::new(), open_rings: BTreeMap::new() }.parse()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum AtomStyle {
    Plain,
    Mapped,
}

/// Writes a SMILES string by depth-first traversal from the lowest atom of
/// each component, visiting neighbors in ascending atom order. Ring-closure
/// digits are the lowest free ones at the moment a ring bond opens.
pub fn write_smiles(g: &MolecularGraph) -> String {
    write(g, AtomStyle::Plain)
}

/// Writes every atom as `[Sym:n]` with `n` = atom index + 1 (hydrogens are
/// omitted; charges are kept). Layout matches [`write_smiles`].
pub fn write_smiles_mapped(g: &MolecularGraph) -> String {
    write(g, AtomStyle::Mapped)
}

fn write(g: &MolecularGraph, style: AtomStyle) -> String {
    let n = g.atom_count();
    let mut visited = vec![false; n];
    let mut out = String::new();
    for comp in g.components() {
        if !out.is_empty() {
            out.push('.');
        }
        let start = comp[0];
        let plan = plan_component(g, start, &mut visited);
        let mut free_digits: Vec<u32> = Vec::new();
        let mut next_digit = 1u32;
        let mut assigned: BTreeMap<usize, u32> = BTreeMap::new();
        emit(g, start, &plan, style, &mut out, &mut free_digits, &mut next_digit, &mut assigned);
    }
    out
}

struct Plan {
    children: Vec<Vec<(usize, usize)>>,
    // ring bonds opened at an atom, in discovery order of the closing atom
    opens: Vec<Vec<usize>>,
    // ring bonds closed at an atom
    closes: Vec<Vec<usize>>,
}

fn plan_component(g: &MolecularGraph, start: usize, visited: &mut [bool]) -> Plan {
    let n = g.atom_count();
    let mut plan = Plan { children: vec![Vec::new(); n], opens: vec![Vec::new(); n], closes: vec![Vec::new(); n] };
    let mut bond_seen = vec![false; g.bond_count()];
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    visited[start] = true;
    while let Some(&mut (v, ref mut i)) = stack.last_mut() {
        let nbrs = g.neighbors(v);
        if *i >= nbrs.len() {
            stack.pop();
            continue;
        }
        let (w, b) = nbrs[*i];
        *i += 1;
        if bond_seen[b] {
            continue;
        }
        bond_seen[b] = true;
        if !visited[w] {
            visited[w] = true;
            plan.children[v].push((w, b));
            stack.push((w, 0));
        } else {
            // w is an ancestor still on the stack: the ring opens at w.
            plan.opens[w].push(b);
            plan.closes[v].push(b);
        }
    }
    plan
}

#[allow(clippy::too_many_arguments)]
fn emit(
    g: &MolecularGraph,
    start: usize,
    plan: &Plan,
    style: AtomStyle,
    out: &mut String,
    free: &mut Vec<u32>,
    next: &mut u32,
    assigned: &mut BTreeMap<usize, u32>,
) {
    enum Step {
        Atom(usize, usize),
        Open,
        Close,
    }
    let mut work: Vec<Step> = vec![Step::Atom(start, usize::MAX)];
    while let Some(step) = work.pop() {
        let (v, via) = match step {
            Step::Open => {
                out.push('(');
                continue;
            }
            Step::Close => {
                out.push(')');
                continue;
            }
            Step::Atom(v, via) => (v, via),
        };
        if via != usize::MAX {
            out.push_str(g.bond(via).order.symbol());
        }
        write_atom(g, v, style, out);
        for &b in &plan.closes[v] {
            let d = assigned.remove(&b).expect("ring opened before closing");
            push_digit(out, d);
            free.push(d);
        }
        for &b in &plan.opens[v] {
            free.sort_unstable_by(|a, b| b.cmp(a));
            let d = free.pop().unwrap_or_else(|| {
                let d = *next;
                *next += 1;
                d
            });
            out.push_str(g.bond(b).order.symbol());
            push_digit(out, d);
            assigned.insert(b, d);
        }
        let kids = &plan.children[v];
        // reversed so the first child is emitted first; all but the last
        // child go in parentheses
        for (k, &(w, b)) in kids.iter().enumerate().rev() {
            if k + 1 == kids.len() {
                work.push(Step::Atom(w, b));
            } else {
                work.push(Step::Close);
                work.push(Step::Atom(w, b));
                work.push(Step::Open);
            }
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push('%');
        out.push_str(&format!("{d:02}"));
    }
}

fn write_atom(g: &MolecularGraph, v: usize, style: AtomStyle, out: &mut String) {
    let atom = g.atom(v);
    let sym = atom.element.symbol();
    if style == AtomStyle::Mapped {
        out.push('[');
        out.push_str(sym);
        push_charge(out, atom.charge);
        out.push(':');
        out.push_str(&(v + 1).to_string());
        out.push(']');
        return;
    }
    if atom.explicit_h.is_none() && atom.charge == 0 && atom.element.is_organic_subset() {
        out.push_str(sym);
        return;
    }
    // A pinned count equal to the implicit one is still written explicitly:
    // bracket atoms stay bracket atoms on round trip.
    let h = g.hydrogen_count(v);
    out.push('[');
    out.push_str(sym);
    match h {
        0 => {}
        1 => out.push('H'),
        n => {
            out.push('H');
            out.push_str(&n.to_string());
        }
    }
    push_charge(out, atom.charge);
    out.push(']');
}

fn push_charge(out: &mut String, charge: i8) {
    match charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -(c as i16))),
    }
}
