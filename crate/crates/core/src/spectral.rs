//! Fourier-Galerkin machinery of the vorticity equation at beta = 0.
//!
//! Expanding zeta = sum_m C_m exp(i m^ . x) with m^ = (m1 k, m2 l) turns the
//! equation into
//!
//! ```text
//! dC_m/dt = - sum_{m' != 0}  (z . [m^' x m^]) / |m^'|^2  C_{m'} C_{m-m'}
//! ```
//!
//! restricted to a finite mode set closed under negation. The reality
//! constraint C_{-m} = conj(C_m) identifies real coordinates via
//! C_m = (A_m - i B_m)/2.
//!
//! The mirror symmetries e1, e2 and the half-period translations p, q act on
//! coefficients as signed index permutations generating a group isomorphic to
//! Z2^4; e3 flips time. Fixed-point subspaces of subgroups are invariant
//! under the dynamics by equivariance, and restricting the quadratic sum to
//! such a subspace yields reduced models, among them the Lorenz 1960
//! three-component system for the subgroup {1, pq e1, pq e2, e1 e2}.

use crate::error::{Error, Result};
use crate::linalg::{nullspace, orthonormalize, SplitMix64};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub m1: i32,
    pub m2: i32,
}

impl ModeIndex {
    pub fn new(m1: i32, m2: i32) -> Self {
        ModeIndex { m1, m2 }
    }

    pub fn neg(self) -> Self {
        ModeIndex {
            m1: -self.m1,
            m2: -self.m2,
        }
    }

    pub fn is_zero(self) -> bool {
        self.m1 == 0 && self.m2 == 0
    }

    /// Lexicographically positive: m1 > 0, or m1 = 0 and m2 > 0.
    pub fn is_representative(self) -> bool {
        self.m1 > 0 || (self.m1 == 0 && self.m2 > 0)
    }

    fn sub(self, other: Self) -> Self {
        ModeIndex {
            m1: self.m1 - other.m1,
            m2: self.m2 - other.m2,
        }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m1, self.m2)
    }
}

/// Finite mode set closed under negation, with the base wavenumbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    modes: BTreeSet<ModeIndex>,
    reps: Vec<ModeIndex>,
    pub k: f64,
    pub l: f64,
}

const MAX_MODE: i32 = 3;

impl Truncation {
    pub fn new(modes: BTreeSet<ModeIndex>, k: f64, l: f64) -> Result<Self> {
        if k <= 0.0 || l <= 0.0 {
            return Err(Error::InvalidParameter(
                "base wavenumbers must be positive".into(),
            ));
        }
        for m in &modes {
            if m.is_zero() {
                return Err(Error::InvalidParameter(
                    "the (0,0) coefficient vanishes and is excluded".into(),
                ));
            }
            if m.m1.abs() > MAX_MODE || m.m2.abs() > MAX_MODE {
                return Err(Error::InvalidParameter(format!(
                    "mode {} outside the |m1|,|m2| <= {} guard",
                    m, MAX_MODE
                )));
            }
            if !modes.contains(&m.neg()) {
                return Err(Error::InvalidParameter(format!(
                    "mode set not closed under negation: missing {}",
                    m.neg()
                )));
            }
        }
        let reps = modes
            .iter()
            .copied()
            .filter(|m| m.is_representative())
            .collect();
        Ok(Truncation { modes, reps, k, l })
    }

    /// All indices in {-1, 0, 1}^2 except (0,0): the eight-component model.
    pub fn box_pm1(k: f64, l: f64) -> Result<Self> {
        let mut modes = BTreeSet::new();
        for m1 in -1..=1 {
            for m2 in -1..=1 {
                if m1 != 0 || m2 != 0 {
                    modes.insert(ModeIndex::new(m1, m2));
                }
            }
        }
        Self::new(modes, k, l)
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.modes.iter().copied()
    }

    pub fn contains(&self, m: ModeIndex) -> bool {
        self.modes.contains(&m)
    }

    /// Sorted lexicographically positive representatives (one per pair).
    pub fn representatives(&self) -> &[ModeIndex] {
        &self.reps
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Real dimension: (A_m, B_m) per representative pair.
    pub fn real_dim(&self) -> usize {
        2 * self.reps.len()
    }

    /// |m^|^2 = (m1 k)^2 + (m2 l)^2.
    pub fn wavenumber_sq(&self, m: ModeIndex) -> f64 {
        let a = m.m1 as f64 * self.k;
        let b = m.m2 as f64 * self.l;
        a * a + b * b
    }

    /// Name of real coordinate `i` in the layout [A(r0), B(r0), A(r1), ...].
    pub fn coord_name(&self, i: usize) -> String {
        let r = self.reps[i / 2];
        format!("{}({},{})", if i % 2 == 0 { "A" } else { "B" }, r.m1, r.m2)
    }
}

/// The interaction factor of ordered pair (m', m): -(z . [m^' x m^]) / |m^'|^2.
pub fn interaction_term(mprime: ModeIndex, m: ModeIndex, k: f64, l: f64) -> Result<f64> {
    if mprime.is_zero() {
        return Err(Error::InvalidParameter(
            "interaction term undefined for m' = 0".into(),
        ));
    }
    let cross = k * l * (mprime.m1 as f64 * m.m2 as f64 - mprime.m2 as f64 * m.m1 as f64);
    let denom =
        (mprime.m1 as f64 * k).powi(2) + (mprime.m2 as f64 * l).powi(2);
    Ok(-cross / denom)
}

/// Complex coefficient state over a truncation; the reality constraint
/// C_{-m} = conj(C_m) holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    trunc: Truncation,
    coeffs: BTreeMap<ModeIndex, Complex64>,
}

impl SpectralState {
    /// Build from representative coefficients; conjugate partners are filled in.
    pub fn from_representatives(
        trunc: Truncation,
        reps: &BTreeMap<ModeIndex, Complex64>,
    ) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (m, c) in reps {
            if !m.is_representative() {
                return Err(Error::InvalidParameter(format!(
                    "{} is not a representative mode",
                    m
                )));
            }
            if !trunc.contains(*m) {
                return Err(Error::ModeOutsideTruncation(m.m1, m.m2));
            }
            coeffs.insert(*m, *c);
            coeffs.insert(m.neg(), c.conj());
        }
        for m in trunc.modes() {
            coeffs.entry(m).or_insert(Complex64::new(0.0, 0.0));
        }
        Ok(SpectralState { trunc, coeffs })
    }

    pub fn zero(trunc: Truncation) -> Self {
        let coeffs = trunc.modes().map(|m| (m, Complex64::new(0.0, 0.0))).collect();
        SpectralState { trunc, coeffs }
    }

    /// Real coordinates [A(r), B(r), ...] with C_m = (A_m - i B_m)/2.
    pub fn from_real(trunc: Truncation, coords: &[f64]) -> Result<Self> {
        if coords.len() != trunc.real_dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} real coordinates, got {}",
                trunc.real_dim(),
                coords.len()
            )));
        }
        let reps: BTreeMap<ModeIndex, Complex64> = trunc
            .representatives()
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                (
                    m,
                    Complex64::new(coords[2 * i] / 2.0, -coords[2 * i + 1] / 2.0),
                )
            })
            .collect();
        Self::from_representatives(trunc, &reps)
    }

    pub fn to_real(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trunc.real_dim());
        for &m in self.trunc.representatives() {
            let c = self.coeffs[&m];
            out.push(2.0 * c.re);
            out.push(-2.0 * c.im);
        }
        out
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    pub fn get(&self, m: ModeIndex) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Max violation of C_{-m} = conj(C_m) (zero by construction; useful as
    /// an oracle check on derived states).
    pub fn reality_defect(&self) -> f64 {
        self.trunc
            .representatives()
            .iter()
            .map(|&m| {
                let d = self.coeffs[&m].conj() - self.coeffs[&m.neg()];
                d.norm()
            })
            .fold(0.0, f64::max)
    }

    /// Enstrophy sum_m |C_m|^2 over the full mode set.
    pub fn enstrophy(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    /// Energy sum_m |C_m|^2 / |m^|^2 over the full mode set.
    pub fn energy(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(m, c)| c.norm_sqr() / self.trunc.wavenumber_sq(*m))
            .sum()
    }
}

/// Galerkin right-hand side: for each mode m the sum over m' in the
/// truncation with m - m' also in the truncation. Derivatives are computed
/// for representatives and mirrored, so the output satisfies the reality
/// constraint exactly.
pub fn spectral_rhs(state: &SpectralState) -> SpectralState {
    let trunc = &state.trunc;
    let mut coeffs = BTreeMap::new();
    for &m in trunc.representatives() {
        let mut acc = Complex64::new(0.0, 0.0);
        for mp in trunc.modes() {
            let rest = m.sub(mp);
            if !trunc.contains(rest) {
                continue;
            }
            let factor = interaction_term(mp, m, trunc.k, trunc.l)
                .expect("truncation excludes the zero mode");
            acc += factor * state.coeffs[&mp] * state.coeffs[&rest];
        }
        coeffs.insert(m, acc);
        coeffs.insert(m.neg(), acc.conj());
    }
    SpectralState {
        trunc: trunc.clone(),
        coeffs,
    }
}

/// A signed index permutation of coefficients, optionally with time reversal:
/// (sigma C)_m = sign(m) C_{tau(m)}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoefficientMap {
    pub negate: bool,
    pub flip_m1: bool,
    pub flip_m2: bool,
    pub parity_m1: bool,
    pub parity_m2: bool,
    pub time_reversal: bool,
}

impl CoefficientMap {
    pub fn identity() -> Self {
        CoefficientMap {
            negate: false,
            flip_m1: false,
            flip_m2: false,
            parity_m1: false,
            parity_m2: false,
            time_reversal: false,
        }
    }

    /// Source index and sign for the target index m.
    pub fn apply_mode(&self, m: ModeIndex) -> (ModeIndex, f64) {
        let tau = ModeIndex {
            m1: if self.flip_m1 { -m.m1 } else { m.m1 },
            m2: if self.flip_m2 { -m.m2 } else { m.m2 },
        };
        let mut exponent = self.negate as i32;
        if self.parity_m1 {
            exponent += m.m1;
        }
        if self.parity_m2 {
            exponent += m.m2;
        }
        let sign = if exponent.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        (tau, sign)
    }

    pub fn compose(&self, other: &Self) -> Self {
        // the parity characters are invariant under index flips, so the
        // group generated here is abelian and composition is XOR
        CoefficientMap {
            negate: self.negate ^ other.negate,
            flip_m1: self.flip_m1 ^ other.flip_m1,
            flip_m2: self.flip_m2 ^ other.flip_m2,
            parity_m1: self.parity_m1 ^ other.parity_m1,
            parity_m2: self.parity_m2 ^ other.parity_m2,
            time_reversal: self.time_reversal ^ other.time_reversal,
        }
    }

    pub fn apply_state(&self, state: &SpectralState) -> Result<SpectralState> {
        let trunc = &state.trunc;
        let mut coeffs = BTreeMap::new();
        for m in trunc.modes() {
            let (src, sign) = self.apply_mode(m);
            if !trunc.contains(src) {
                return Err(Error::ModeOutsideTruncation(src.m1, src.m2));
            }
            coeffs.insert(m, sign * state.coeffs[&src]);
        }
        Ok(SpectralState {
            trunc: trunc.clone(),
            coeffs,
        })
    }

    /// Action on the real coordinates of a truncation (exact +-1 entries).
    pub fn real_matrix(&self, trunc: &Truncation) -> Result<Vec<Vec<f64>>> {
        let n = trunc.real_dim();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut unit = vec![0.0; n];
            unit[j] = 1.0;
            let state = SpectralState::from_real(trunc.clone(), &unit)?;
            cols.push(self.apply_state(&state)?.to_real());
        }
        // columns to rows
        Ok((0..n)
            .map(|r| (0..n).map(|c| cols[c][r]).collect())
            .collect())
    }
}

/// The five induced symmetries printed for the spectral model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryName {
    E1,
    E2,
    E3,
    P,
    Q,
}

impl std::str::FromStr for SymmetryName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e1" => Ok(SymmetryName::E1),
            "e2" => Ok(SymmetryName::E2),
            "e3" => Ok(SymmetryName::E3),
            "p" => Ok(SymmetryName::P),
            "q" => Ok(SymmetryName::Q),
            other => Err(Error::Parse(format!("unknown symmetry '{}'", other))),
        }
    }
}

/// The induced action on Fourier coefficients:
/// e1: C_{m1,m2} -> -C_{m1,-m2};  e2: C_{m1,m2} -> -C_{-m1,m2};
/// e3: C -> -C with t -> -t;  p: C -> (-1)^{m1} C;  q: C -> (-1)^{m2} C.
pub fn induced_symmetry(name: SymmetryName) -> CoefficientMap {
    let mut map = CoefficientMap::identity();
    match name {
        SymmetryName::E1 => {
            map.negate = true;
            map.flip_m2 = true;
        }
        SymmetryName::E2 => {
            map.negate = true;
            map.flip_m1 = true;
        }
        SymmetryName::E3 => {
            map.negate = true;
            map.time_reversal = true;
        }
        SymmetryName::P => map.parity_m1 = true,
        SymmetryName::Q => map.parity_m2 = true,
    }
    map
}

/// Element of the group generated by {e1, e2, p, q}, encoded by exponent
/// bits in that order. Composition is XOR (the group is Z2^4).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupElement(pub u8);

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement(0);

    pub fn compose(self, other: Self) -> Self {
        GroupElement(self.0 ^ other.0)
    }

    pub fn coefficient_map(self) -> CoefficientMap {
        let mut map = CoefficientMap::identity();
        if self.0 & 1 != 0 {
            map = map.compose(&induced_symmetry(SymmetryName::E1));
        }
        if self.0 & 2 != 0 {
            map = map.compose(&induced_symmetry(SymmetryName::E2));
        }
        if self.0 & 4 != 0 {
            map = map.compose(&induced_symmetry(SymmetryName::P));
        }
        if self.0 & 8 != 0 {
            map = map.compose(&induced_symmetry(SymmetryName::Q));
        }
        map
    }

    /// Canonical word in generator order e1 < e2 < p < q ("1" for identity).
    pub fn word(self) -> String {
        if self.0 == 0 {
            return "1".into();
        }
        let mut s = String::new();
        if self.0 & 1 != 0 {
            s += "e1";
        }
        if self.0 & 2 != 0 {
            s += "e2";
        }
        if self.0 & 4 != 0 {
            s += "p";
        }
        if self.0 & 8 != 0 {
            s += "q";
        }
        s
    }

    /// Parse a generator word such as "pqe1" (tokens in any order).
    pub fn parse(word: &str) -> Result<Self> {
        if word == "1" {
            return Ok(GroupElement(0));
        }
        let mut mask = 0u8;
        let bytes = word.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'e' => {
                    let digit = bytes
                        .get(i + 1)
                        .ok_or_else(|| Error::Parse(format!("dangling 'e' in '{}'", word)))?;
                    match digit {
                        b'1' => mask ^= 1,
                        b'2' => mask ^= 2,
                        b'3' => {
                            return Err(Error::Parse(
                                "e3 acts on time and cannot enter reduction subgroups".into(),
                            ))
                        }
                        _ => {
                            return Err(Error::Parse(format!(
                                "unknown generator 'e{}' in '{}'",
                                *digit as char, word
                            )))
                        }
                    }
                    i += 2;
                }
                b'p' => {
                    mask ^= 4;
                    i += 1;
                }
                b'q' => {
                    mask ^= 8;
                    i += 1;
                }
                other => {
                    return Err(Error::Parse(format!(
                        "unexpected character '{}' in generator word '{}'",
                        other as char, word
                    )))
                }
            }
        }
        Ok(GroupElement(mask))
    }
}

/// A subgroup of Z2^4, stored as its sorted element list (always contains
/// the identity and is closed under composition).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Subgroup {
    elements: Vec<GroupElement>,
}

impl Subgroup {
    pub fn trivial() -> Self {
        Subgroup {
            elements: vec![GroupElement::IDENTITY],
        }
    }

    /// Closure of a generating set.
    pub fn generate(generators: &[GroupElement]) -> Self {
        let mut set: BTreeSet<GroupElement> = BTreeSet::new();
        set.insert(GroupElement::IDENTITY);
        // span over F2: fold each generator into the existing span
        for &g in generators {
            if set.contains(&g) {
                continue;
            }
            let existing: Vec<GroupElement> = set.iter().copied().collect();
            for e in existing {
                set.insert(e.compose(g));
            }
        }
        Subgroup {
            elements: set.into_iter().collect(),
        }
    }

    pub fn parse_word_list(words: &str) -> Result<Self> {
        let gens: Vec<GroupElement> = words
            .split(',')
            .map(|w| GroupElement::parse(w.trim()))
            .collect::<Result<_>>()?;
        Ok(Self::generate(&gens))
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Minimal generating set, greedily built from the sorted elements.
    pub fn minimal_generators(&self) -> Vec<GroupElement> {
        let mut gens: Vec<GroupElement> = Vec::new();
        let mut span = Subgroup::trivial();
        for &e in &self.elements {
            if e == GroupElement::IDENTITY || span.elements.contains(&e) {
                continue;
            }
            gens.push(e);
            span = Subgroup::generate(&gens);
            if span.order() == self.order() {
                break;
            }
        }
        gens
    }

    /// Canonical comma-joined generator words ("1" for the trivial subgroup).
    pub fn word(&self) -> String {
        let gens = self.minimal_generators();
        if gens.is_empty() {
            "1".into()
        } else {
            gens.iter()
                .map(|g| g.word())
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    /// The subgroup S = {1, pq e1, pq e2, e1 e2} that produces the Lorenz
    /// 1960 three-component model.
    pub fn lorenz() -> Self {
        Subgroup::generate(&[
            GroupElement::parse("pqe1").unwrap(),
            GroupElement::parse("pqe2").unwrap(),
        ])
    }
}

/// All subgroups of the group generated by {e1, e2, p, q}; there are 67,
/// matching the Gaussian binomial count 1 + 15 + 35 + 15 + 1 for Z2^4.
pub fn enumerate_subgroups() -> Vec<Subgroup> {
    let nonzero: Vec<GroupElement> = (1u8..16).map(GroupElement).collect();
    let mut found: BTreeSet<Subgroup> = BTreeSet::new();
    // spans of all generator subsets of size <= 4 (larger sets add nothing)
    let n = nonzero.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() > 4 {
            continue;
        }
        let gens: Vec<GroupElement> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| nonzero[i])
            .collect();
        found.insert(Subgroup::generate(&gens));
    }
    let mut out: Vec<Subgroup> = found.into_iter().collect();
    out.sort_by_key(|s| (s.order(), s.elements.clone()));
    out
}

/// The fixed-point subspace { v : sigma v = v for all sigma in S } over the
/// real coordinates of a truncation.
#[derive(Clone, Debug)]
pub struct FixedSubspace {
    pub truncation: Truncation,
    /// Orthonormal basis of the subspace.
    pub basis: Vec<Vec<f64>>,
    /// Indices of free coordinates; basis_free[i] has a 1 at free_coords[i].
    pub free_coords: Vec<usize>,
    /// Embedding basis in free-coordinate form (unit at the free coordinate).
    pub embedding: Vec<Vec<f64>>,
    /// Human-readable constraint equations.
    pub constraints: Vec<String>,
    /// The rref constraint rows (vanish on the subspace).
    pub constraint_rows: Vec<Vec<f64>>,
}

impl FixedSubspace {
    pub fn dim(&self) -> usize {
        self.embedding.len()
    }

    /// Full real coordinates of a free-coordinate vector.
    pub fn embed(&self, free: &[f64]) -> Vec<f64> {
        let n = self.truncation.real_dim();
        let mut out = vec![0.0; n];
        for (b, &v) in self.embedding.iter().zip(free) {
            for (o, &e) in out.iter_mut().zip(b) {
                *o += v * e;
            }
        }
        out
    }

    /// Values at the free coordinates.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_coords.iter().map(|&i| full[i]).collect()
    }

    /// Euclidean distance from the subspace (via the orthonormal basis).
    pub fn distance(&self, full: &[f64]) -> f64 {
        let mut residual: Vec<f64> = full.to_vec();
        for b in &self.basis {
            let d: f64 = b.iter().zip(full).map(|(x, y)| x * y).sum();
            for (r, &x) in residual.iter_mut().zip(b) {
                *r -= d * x;
            }
        }
        residual.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn names(&self) -> Vec<String> {
        self.free_coords
            .iter()
            .map(|&i| self.truncation.coord_name(i))
            .collect()
    }
}

fn constraint_to_string(row: &[f64], trunc: &Truncation) -> String {
    // print the eliminated (highest-index) coordinate first
    let mut terms: Vec<(usize, f64)> = row
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &v)| v.abs() > 1e-12)
        .map(|(i, &v)| (i, v))
        .collect();
    if terms.is_empty() {
        return "0 = 0".into();
    }
    // normalize the leading coefficient to +1
    let lead = terms[0].1;
    for t in terms.iter_mut() {
        t.1 /= lead;
    }
    let mut s = trunc.coord_name(terms[0].0);
    for (i, c) in &terms[1..] {
        let name = trunc.coord_name(*i);
        if (c - 1.0).abs() < 1e-12 {
            s += &format!(" + {}", name);
        } else if (c + 1.0).abs() < 1e-12 {
            s += &format!(" - {}", name);
        } else {
            s += &format!(" {} {}·{}", if *c < 0.0 { "-" } else { "+" }, c.abs(), name);
        }
    }
    s + " = 0"
}

/// Solve { v = sigma v for all sigma in S } over the real coordinates.
/// Pivoting prefers eliminating the lexicographically latest coordinates, so
/// the free (named) amplitudes are the earliest ones.
pub fn fixed_subspace(subgroup: &Subgroup, trunc: &Truncation) -> Result<FixedSubspace> {
    let n = trunc.real_dim();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for &g in subgroup.elements() {
        if g == GroupElement::IDENTITY {
            continue;
        }
        let m = g.coefficient_map().real_matrix(trunc)?;
        for (r, row) in m.into_iter().enumerate() {
            let mut diff = row;
            diff[r] -= 1.0;
            if diff.iter().any(|v| v.abs() > 0.0) {
                rows.push(diff);
            }
        }
    }
    let flip = |v: &[f64]| -> Vec<f64> { v.iter().rev().copied().collect() };
    let flipped: Vec<Vec<f64>> = rows.iter().map(|r| flip(r)).collect();
    let ns = nullspace(flipped, n, 1e-9);
    let unflip_idx = |i: usize| n - 1 - i;
    let mut order: Vec<usize> = (0..ns.basis.len()).collect();
    order.sort_by_key(|&i| unflip_idx(ns.free_cols[i]));
    let embedding: Vec<Vec<f64>> = order.iter().map(|&i| flip(&ns.basis[i])).collect();
    let free_coords: Vec<usize> = order.iter().map(|&i| unflip_idx(ns.free_cols[i])).collect();
    let constraint_rows: Vec<Vec<f64>> = ns.constraints.iter().map(|r| flip(r)).collect();
    let basis = orthonormalize(&embedding, 1e-12);
    let constraints = constraint_rows
        .iter()
        .map(|row| constraint_to_string(row, trunc))
        .collect();
    Ok(FixedSubspace {
        truncation: trunc.clone(),
        basis,
        free_coords,
        embedding,
        constraints,
        constraint_rows,
    })
}

/// One quadratic monomial of a reduced model: coeff * v[factors.0] * v[factors.1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadTerm {
    pub target: usize,
    pub coeff: f64,
    pub factors: (usize, usize),
}

/// Autonomous quadratic ODE system over named real amplitudes, obtained by
/// restricting the spectral sum to a fixed-point subspace.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    pub amplitudes: Vec<String>,
    pub terms: Vec<QuadTerm>,
    pub subspace: FixedSubspace,
    pub subgroup_word: String,
}

impl ReducedModel {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn rhs(&self, v: &[f64], dv: &mut [f64]) {
        dv.iter_mut().for_each(|d| *d = 0.0);
        for t in &self.terms {
            dv[t.target] += t.coeff * v[t.factors.0] * v[t.factors.1];
        }
    }

    /// Energy and enstrophy in amplitude space, normalized so that a pure
    /// A(0,1) state has E = A^2 / l^2 and Z = A^2 (twice the full-spectrum
    /// sums of the embedded state).
    pub fn invariants(&self, v: &[f64]) -> (f64, f64) {
        let full = self.subspace.embed(v);
        let state = SpectralState::from_real(self.subspace.truncation.clone(), &full)
            .expect("embedding stays inside the truncation");
        (2.0 * state.energy(), 2.0 * state.enstrophy())
    }

    pub fn coefficient(&self, target: &str, fa: &str, fb: &str) -> f64 {
        let idx = |name: &str| self.amplitudes.iter().position(|a| a == name);
        let (Some(t), Some(a), Some(b)) = (idx(target), idx(fa), idx(fb)) else {
            return 0.0;
        };
        self.terms
            .iter()
            .filter(|term| {
                term.target == t
                    && (term.factors == (a, b) || term.factors == (b, a))
            })
            .map(|term| term.coeff)
            .sum()
    }

    /// Reorder and rename amplitudes (names must all resolve).
    pub fn select_and_rename(&self, mapping: &[(&str, &str)]) -> Result<ReducedModel> {
        if mapping.len() != self.amplitudes.len() {
            return Err(Error::InvalidParameter(
                "rename must cover every amplitude".into(),
            ));
        }
        let mut order = Vec::with_capacity(mapping.len());
        for (old, _) in mapping {
            let i = self
                .amplitudes
                .iter()
                .position(|a| a == old)
                .ok_or_else(|| Error::InvalidParameter(format!("no amplitude '{}'", old)))?;
            order.push(i);
        }
        let mut inverse = vec![0usize; order.len()];
        for (newi, &oldi) in order.iter().enumerate() {
            inverse[oldi] = newi;
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut f = (inverse[t.factors.0], inverse[t.factors.1]);
                if f.0 > f.1 {
                    f = (f.1, f.0);
                }
                QuadTerm {
                    target: inverse[t.target],
                    coeff: t.coeff,
                    factors: f,
                }
            })
            .collect::<Vec<_>>();
        let mut terms = terms;
        terms.sort_by_key(|t| (t.target, t.factors));
        let mut subspace = self.subspace.clone();
        subspace.free_coords = order.iter().map(|&i| self.subspace.free_coords[i]).collect();
        subspace.embedding = order
            .iter()
            .map(|&i| self.subspace.embedding[i].clone())
            .collect();
        Ok(ReducedModel {
            amplitudes: mapping.iter().map(|(_, new)| new.to_string()).collect(),
            terms,
            subspace,
            subgroup_word: self.subgroup_word.clone(),
        })
    }

    /// The documented JSON form.
    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|t| {
                serde_json::json!({
                    "target": self.amplitudes[t.target],
                    "coeff": t.coeff,
                    "factors": [
                        self.amplitudes[t.factors.0],
                        self.amplitudes[t.factors.1]
                    ],
                })
            })
            .collect();
        let modes: Vec<[i32; 2]> = self
            .subspace
            .truncation
            .modes()
            .map(|m| [m.m1, m.m2])
            .collect();
        serde_json::json!({
            "amplitudes": self.amplitudes,
            "terms": terms,
            "provenance": {
                "subgroup": self.subgroup_word,
                "truncation": modes,
                "k": self.subspace.truncation.k,
                "l": self.subspace.truncation.l,
                "constraints": self.subspace.constraints,
            },
        })
    }
}

const INVARIANCE_TOL: f64 = 1e-12;

/// Restrict the spectral dynamics to the fixed subspace of `subgroup` and
/// extract the quadratic monomials in the free coordinates. The subspace is
/// first checked to be dynamically invariant at random sample points.
pub fn reduce_model(subgroup: &Subgroup, trunc: &Truncation) -> Result<ReducedModel> {
    let subspace = fixed_subspace(subgroup, trunc)?;
    let dim = subspace.dim();
    let full_rhs = |free: &[f64]| -> Vec<f64> {
        let full = subspace.embed(free);
        let state = SpectralState::from_real(trunc.clone(), &full)
            .expect("embedding stays inside the truncation");
        spectral_rhs(&state).to_real()
    };

    // dynamic invariance: the full rhs of a subspace point satisfies the
    // constraint equations
    let mut rng = SplitMix64(0xfeed);
    for _ in 0..5 {
        let free: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let d = full_rhs(&free);
        let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (row, text) in subspace.constraint_rows.iter().zip(&subspace.constraints) {
            let v: f64 = row.iter().zip(&d).map(|(a, b)| a * b).sum();
            if v.abs() > INVARIANCE_TOL * scale {
                return Err(Error::SubspaceNotInvariant {
                    violation: v.abs(),
                    direction: text.clone(),
                });
            }
        }
    }

    // polarization of the homogeneous quadratic restriction
    let unit = |i: usize| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let q_single: Vec<Vec<f64>> = (0..dim).map(|i| {
        let d = full_rhs(&unit(i));
        subspace.restrict(&d)
    }).collect();
    let mut terms = Vec::new();
    let mut max_coeff = 0.0f64;
    let push = |target: usize, coeff: f64, i: usize, j: usize, terms: &mut Vec<QuadTerm>| {
        if coeff != 0.0 {
            terms.push(QuadTerm {
                target,
                coeff,
                factors: (i, j),
            });
        }
    };
    for i in 0..dim {
        for target in 0..dim {
            let c = q_single[i][target];
            max_coeff = max_coeff.max(c.abs());
            push(target, c, i, i, &mut terms);
        }
        for j in (i + 1)..dim {
            let mut both = unit(i);
            both[j] = 1.0;
            let q_ij = subspace.restrict(&full_rhs(&both));
            for target in 0..dim {
                let c = q_ij[target] - q_single[i][target] - q_single[j][target];
                max_coeff = max_coeff.max(c.abs());
                push(target, c, i, j, &mut terms);
            }
        }
    }
    let floor = 1e-13 * max_coeff.max(1.0);
    terms.retain(|t| t.coeff.abs() > floor);
    terms.sort_by_key(|t| (t.target, t.factors));
    Ok(ReducedModel {
        amplitudes: subspace.names(),
        terms,
        subspace,
        subgroup_word: subgroup.word(),
    })
}

/// The printed three-component model coefficients for reference:
/// dA/dt = -(1/k^2 - 1/(k^2+l^2)) k l F G,
/// dF/dt =  (1/l^2 - 1/(k^2+l^2)) k l A G,
/// dG/dt = -1/2 (1/l^2 - 1/k^2) k l A F.
pub fn lorenz_coefficients(k: f64, l: f64) -> (f64, f64, f64) {
    let k2 = k * k;
    let l2 = l * l;
    let kl = k * l;
    (
        -(1.0 / k2 - 1.0 / (k2 + l2)) * kl,
        (1.0 / l2 - 1.0 / (k2 + l2)) * kl,
        -0.5 * (1.0 / l2 - 1.0 / k2) * kl,
    )
}

/// The Lorenz 1960 model from the subgroup S = {1, pq e1, pq e2, e1 e2} on
/// the eight-component truncation, with amplitudes renamed
/// A = A(0,1), F = A(1,0), G = A(1,-1).
pub fn lorenz1960(k: f64, l: f64) -> Result<ReducedModel> {
    let trunc = Truncation::box_pm1(k, l)?;
    let model = reduce_model(&Subgroup::lorenz(), &trunc)?;
    model.select_and_rename(&[("A(0,1)", "A"), ("A(1,0)", "F"), ("A(1,-1)", "G")])
}
