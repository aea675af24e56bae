//! The conformal algebra Cl(4,1) in the null basis {e0, e1, e2, e3, e∞}.
//!
//! Coefficients are stored for the 32 basis blades in canonical order: grade
//! first, then lexicographic on the sorted index tuple over (0, 1, 2, 3, ∞).
//! Products use tables that are generated at compile time from the orthogonal
//! basis e1..e5 (e4² = 1, e5² = −1) through e0 = ½(e5 − e4), e∞ = e4 + e5.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Identity checks (products, sandwich comparisons).
pub const IDENTITY_TOL: f64 = 1e-12;
/// Degeneracy thresholds (non-scalar norms, degenerate primitives).
pub const DEGENERACY_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Table generation
// ---------------------------------------------------------------------------

/// Sign of the reordering needed to bring `a ^ b` into canonical bit order.
const fn reorder_sign(a: usize, b: usize) -> f64 {
    let mut a = a >> 1;
    let mut swaps = 0u32;
    while a != 0 {
        swaps += (a & b).count_ones();
        a >>= 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Geometric product sign of two orthogonal-basis blades (bit 4 is e5, e5² = −1).
const fn orth_product_sign(a: usize, b: usize) -> f64 {
    let mut s = reorder_sign(a, b);
    if a & b & 0b10000 != 0 {
        s = -s;
    }
    s
}

/// Wedge a dense multivector (indexed by bit mask) with a vector given as
/// `(mask, coeff)` terms. Outer products do not depend on the metric.
const fn wedge_vector(mv: [f64; 32], v: &[(usize, f64); 2], nv: usize) -> [f64; 32] {
    let mut out = [0.0; 32];
    let mut m = 0;
    while m < 32 {
        if mv[m] != 0.0 {
            let mut t = 0;
            while t < nv {
                let (vb, c) = v[t];
                if m & vb == 0 {
                    out[m | vb] += mv[m] * c * reorder_sign(m, vb);
                }
                t += 1;
            }
        }
        m += 1;
    }
    out
}

/// Expansion of a null-basis blade (bits: e0, e1, e2, e3, e∞) in the orthogonal basis
/// (bits: e1, e2, e3, e4, e5).
const fn null_to_orth(mask: usize) -> [f64; 32] {
    let mut mv = [0.0; 32];
    mv[0] = 1.0;
    let mut bit = 0;
    while bit < 5 {
        if mask & (1 << bit) != 0 {
            let v: [(usize, f64); 2] = match bit {
                0 => [(0b01000, -0.5), (0b10000, 0.5)],
                1 => [(0b00001, 1.0), (0, 0.0)],
                2 => [(0b00010, 1.0), (0, 0.0)],
                3 => [(0b00100, 1.0), (0, 0.0)],
                _ => [(0b01000, 1.0), (0b10000, 1.0)],
            };
            let nv = if bit == 0 || bit == 4 { 2 } else { 1 };
            mv = wedge_vector(mv, &v, nv);
        }
        bit += 1;
    }
    mv
}

/// Expansion of an orthogonal-basis blade in the null basis.
const fn orth_to_null(mask: usize) -> [f64; 32] {
    let mut mv = [0.0; 32];
    mv[0] = 1.0;
    let mut bit = 0;
    while bit < 5 {
        if mask & (1 << bit) != 0 {
            let v: [(usize, f64); 2] = match bit {
                0 => [(0b00010, 1.0), (0, 0.0)],
                1 => [(0b00100, 1.0), (0, 0.0)],
                2 => [(0b01000, 1.0), (0, 0.0)],
                3 => [(0b00001, -1.0), (0b10000, 0.5)],
                _ => [(0b00001, 1.0), (0b10000, 0.5)],
            };
            let nv = if bit >= 3 { 2 } else { 1 };
            mv = wedge_vector(mv, &v, nv);
        }
        bit += 1;
    }
    mv
}

/// Geometric product of two null-basis blades as a dense null-basis multivector (by mask).
const fn null_blade_product(a: usize, b: usize) -> [f64; 32] {
    let ea = null_to_orth(a);
    let eb = null_to_orth(b);
    let mut orth = [0.0; 32];
    let mut i = 0;
    while i < 32 {
        if ea[i] != 0.0 {
            let mut j = 0;
            while j < 32 {
                if eb[j] != 0.0 {
                    orth[i ^ j] += ea[i] * eb[j] * orth_product_sign(i, j);
                }
                j += 1;
            }
        }
        i += 1;
    }
    let mut out = [0.0; 32];
    let mut o = 0;
    while o < 32 {
        if orth[o] != 0.0 {
            let back = orth_to_null(o);
            let mut k = 0;
            while k < 32 {
                out[k] += orth[o] * back[k];
                k += 1;
            }
        }
        o += 1;
    }
    out
}

/// `true` when mask `a` precedes mask `b` in canonical blade order.
const fn blade_before(a: usize, b: usize) -> bool {
    let ga = a.count_ones();
    let gb = b.count_ones();
    if ga != gb {
        return ga < gb;
    }
    let mut x = a;
    let mut y = b;
    while x != 0 && y != 0 {
        let lx = x.trailing_zeros();
        let ly = y.trailing_zeros();
        if lx != ly {
            return lx < ly;
        }
        x &= x - 1;
        y &= y - 1;
    }
    false
}

const fn canonical_order() -> [usize; 32] {
    let mut order = [0usize; 32];
    let mut i = 0;
    while i < 32 {
        order[i] = i;
        i += 1;
    }
    let mut i = 0;
    while i < 32 {
        let mut best = i;
        let mut j = i + 1;
        while j < 32 {
            if blade_before(order[j], order[best]) {
                best = j;
            }
            j += 1;
        }
        let t = order[i];
        order[i] = order[best];
        order[best] = t;
        i += 1;
    }
    order
}

const fn mask_to_index() -> [usize; 32] {
    let order = canonical_order();
    let mut idx = [0usize; 32];
    let mut i = 0;
    while i < 32 {
        idx[order[i]] = i;
        i += 1;
    }
    idx
}

/// Bit mask of each canonical blade index.
pub const BLADE_MASK: [usize; 32] = canonical_order();
/// Canonical blade index of each bit mask.
pub const BLADE_INDEX: [usize; 32] = mask_to_index();

const fn grade_of_index() -> [usize; 32] {
    let mut g = [0usize; 32];
    let mut i = 0;
    while i < 32 {
        g[i] = BLADE_MASK[i].count_ones() as usize;
        i += 1;
    }
    g
}

/// Grade of each canonical blade index.
pub const BLADE_GRADE: [usize; 32] = grade_of_index();

#[derive(Clone, Copy)]
struct Term {
    j: u8,
    k: u8,
    c: f64,
}

const GEOMETRIC: u8 = 0;
const OUTER: u8 = 1;
const LEFT: u8 = 2;
const RIGHT: u8 = 3;

const fn keep(kind: u8, ga: usize, gb: usize, gk: usize) -> bool {
    match kind {
        GEOMETRIC => true,
        OUTER => gk == ga + gb,
        LEFT => gb >= ga && gk == gb - ga,
        _ => ga >= gb && gk == ga - gb,
    }
}

const fn count_terms(kind: u8) -> usize {
    let mut n = 0;
    let mut i = 0;
    while i < 32 {
        let mut j = 0;
        while j < 32 {
            let p = null_blade_product(BLADE_MASK[i], BLADE_MASK[j]);
            let mut m = 0;
            while m < 32 {
                if p[m] != 0.0 && keep(kind, BLADE_GRADE[i], BLADE_GRADE[j], m.count_ones() as usize) {
                    n += 1;
                }
                m += 1;
            }
            j += 1;
        }
        i += 1;
    }
    n
}

struct Table<const N: usize> {
    terms: [Term; N],
    start: [usize; 33],
}

const fn build_table<const N: usize>(kind: u8) -> Table<N> {
    let mut terms = [Term { j: 0, k: 0, c: 0.0 }; N];
    let mut start = [0usize; 33];
    let mut n = 0;
    let mut i = 0;
    while i < 32 {
        start[i] = n;
        let mut j = 0;
        while j < 32 {
            let p = null_blade_product(BLADE_MASK[i], BLADE_MASK[j]);
            let mut k = 0;
            while k < 32 {
                let m = BLADE_MASK[k];
                if p[m] != 0.0 && keep(kind, BLADE_GRADE[i], BLADE_GRADE[j], BLADE_GRADE[k]) {
                    terms[n] = Term { j: j as u8, k: k as u8, c: p[m] };
                    n += 1;
                }
                k += 1;
            }
            j += 1;
        }
        i += 1;
    }
    start[32] = n;
    Table { terms, start }
}

const N_GEOMETRIC: usize = count_terms(GEOMETRIC);
const N_OUTER: usize = count_terms(OUTER);
const N_LEFT: usize = count_terms(LEFT);
const N_RIGHT: usize = count_terms(RIGHT);

static GEOMETRIC_TABLE: Table<N_GEOMETRIC> = build_table(GEOMETRIC);
static OUTER_TABLE: Table<N_OUTER> = build_table(OUTER);
static LEFT_TABLE: Table<N_LEFT> = build_table(LEFT);
static RIGHT_TABLE: Table<N_RIGHT> = build_table(RIGHT);

fn apply<const N: usize>(t: &Table<N>, a: &[f64; 32], b: &[f64; 32]) -> [f64; 32] {
    let mut out = [0.0; 32];
    for i in 0..32 {
        let ai = a[i];
        if ai == 0.0 {
            continue;
        }
        for term in &t.terms[t.start[i]..t.start[i + 1]] {
            let bj = b[term.j as usize];
            if bj != 0.0 {
                out[term.k as usize] += term.c * ai * bj;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Blades
// ---------------------------------------------------------------------------

/// Index of a basis blade in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Blade(pub usize);

const fn blade(mask: usize) -> Blade {
    Blade(BLADE_INDEX[mask])
}

impl Blade {
    pub const SCALAR: Blade = blade(0);
    pub const E0: Blade = blade(0b00001);
    pub const E1: Blade = blade(0b00010);
    pub const E2: Blade = blade(0b00100);
    pub const E3: Blade = blade(0b01000);
    pub const EINF: Blade = blade(0b10000);
    pub const E01: Blade = blade(0b00011);
    pub const E02: Blade = blade(0b00101);
    pub const E03: Blade = blade(0b01001);
    pub const E0INF: Blade = blade(0b10001);
    pub const E12: Blade = blade(0b00110);
    pub const E13: Blade = blade(0b01010);
    pub const E1INF: Blade = blade(0b10010);
    pub const E23: Blade = blade(0b01100);
    pub const E2INF: Blade = blade(0b10100);
    pub const E3INF: Blade = blade(0b11000);
    pub const E123: Blade = blade(0b01110);
    pub const E012INF: Blade = blade(0b10111);
    pub const E013INF: Blade = blade(0b11011);
    pub const E023INF: Blade = blade(0b11101);
    pub const E123INF: Blade = blade(0b11110);
    pub const PSEUDOSCALAR: Blade = blade(0b11111);

    pub fn grade(self) -> usize {
        BLADE_GRADE[self.0]
    }

    pub fn mask(self) -> usize {
        BLADE_MASK[self.0]
    }

    /// Human-readable name, e.g. `e0`, `e12`, `e3inf`, `1`.
    pub fn name(self) -> alloc::string::String {
        let m = self.mask();
        if m == 0 {
            return "1".into();
        }
        let mut s = alloc::string::String::from("e");
        for (bit, label) in ["0", "1", "2", "3", "inf"].iter().enumerate() {
            if m & (1 << bit) != 0 {
                s.push_str(label);
            }
        }
        s
    }

    /// Parse a name produced by [`Blade::name`] (`∞` is accepted for `inf`).
    pub fn from_name(name: &str) -> Option<Blade> {
        if name == "1" {
            return Some(Blade::SCALAR);
        }
        let rest = name.strip_prefix('e')?;
        let mut mask = 0usize;
        let mut last: i32 = -1;
        let mut chars = rest.char_indices().peekable();
        while let Some((pos, ch)) = chars.next() {
            let bit = match ch {
                '0'..='3' => ch as i32 - '0' as i32,
                '∞' => 4,
                'i' if rest[pos..].starts_with("inf") => {
                    chars.next();
                    chars.next();
                    4
                }
                _ => return None,
            };
            if bit <= last {
                return None;
            }
            last = bit;
            mask |= 1 << bit;
        }
        if mask == 0 {
            return None;
        }
        Some(blade(mask))
    }
}

// ---------------------------------------------------------------------------
// Multivector
// ---------------------------------------------------------------------------

/// A general element of Cl(4,1): 32 coefficients in canonical null-basis order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multivector(pub [f64; 32]);

impl Default for Multivector {
    fn default() -> Self {
        Self::ZERO
    }
}

const REVERSE_SIGN: [f64; 6] = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0];

impl Multivector {
    pub const ZERO: Multivector = Multivector([0.0; 32]);
    pub const ONE: Multivector = Multivector::scalar(1.0);

    pub const fn scalar(s: f64) -> Self {
        let mut c = [0.0; 32];
        c[0] = s;
        Multivector(c)
    }

    pub fn basis(b: Blade) -> Self {
        Self::term(b, 1.0)
    }

    pub fn term(b: Blade, coeff: f64) -> Self {
        let mut c = [0.0; 32];
        c[b.0] = coeff;
        Multivector(c)
    }

    pub fn from_terms(terms: &[(Blade, f64)]) -> Self {
        let mut m = Self::ZERO;
        for &(b, c) in terms {
            m.0[b.0] += c;
        }
        m
    }

    pub fn e0() -> Self {
        Self::basis(Blade::E0)
    }
    pub fn e1() -> Self {
        Self::basis(Blade::E1)
    }
    pub fn e2() -> Self {
        Self::basis(Blade::E2)
    }
    pub fn e3() -> Self {
        Self::basis(Blade::E3)
    }
    pub fn einf() -> Self {
        Self::basis(Blade::EINF)
    }
    pub fn pseudoscalar() -> Self {
        Self::basis(Blade::PSEUDOSCALAR)
    }

    /// Euclidean vector x1 e1 + x2 e2 + x3 e3.
    pub fn vector(x: [f64; 3]) -> Self {
        Self::from_terms(&[(Blade::E1, x[0]), (Blade::E2, x[1]), (Blade::E3, x[2])])
    }

    pub fn get(&self, b: Blade) -> f64 {
        self.0[b.0]
    }

    pub fn set(&mut self, b: Blade, v: f64) {
        self.0[b.0] = v;
    }

    /// Euclidean part (e1, e2, e3 coefficients).
    pub fn euclidean(&self) -> [f64; 3] {
        [self.get(Blade::E1), self.get(Blade::E2), self.get(Blade::E3)]
    }

    pub fn geometric(&self, rhs: &Self) -> Self {
        Multivector(apply(&GEOMETRIC_TABLE, &self.0, &rhs.0))
    }

    pub fn wedge(&self, rhs: &Self) -> Self {
        Multivector(apply(&OUTER_TABLE, &self.0, &rhs.0))
    }

    /// Left contraction; this is the inner product used throughout the crate.
    pub fn lc(&self, rhs: &Self) -> Self {
        Multivector(apply(&LEFT_TABLE, &self.0, &rhs.0))
    }

    /// Right contraction.
    pub fn rc(&self, rhs: &Self) -> Self {
        Multivector(apply(&RIGHT_TABLE, &self.0, &rhs.0))
    }

    pub fn reverse(&self) -> Self {
        let mut out = *self;
        for (i, c) in out.0.iter_mut().enumerate() {
            *c *= REVERSE_SIGN[BLADE_GRADE[i]];
        }
        out
    }

    pub fn grade_involution(&self) -> Self {
        let mut out = *self;
        for (i, c) in out.0.iter_mut().enumerate() {
            if BLADE_GRADE[i] % 2 == 1 {
                *c = -*c;
            }
        }
        out
    }

    pub fn grade(&self, k: usize) -> Self {
        let mut out = Self::ZERO;
        for i in 0..32 {
            if BLADE_GRADE[i] == k {
                out.0[i] = self.0[i];
            }
        }
        out
    }

    pub fn scalar_part(&self) -> f64 {
        self.0[0]
    }

    /// `X I`.
    pub fn dual(&self) -> Self {
        self.geometric(&Self::pseudoscalar())
    }

    /// Inverse of [`Multivector::dual`]: `−X I`.
    pub fn undual(&self) -> Self {
        -self.geometric(&Self::pseudoscalar())
    }

    /// Sandwich `self * x * reverse(self)`.
    pub fn sandwich(&self, x: &Self) -> Self {
        self.geometric(x).geometric(&self.reverse())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for c in out.0.iter_mut() {
            *c *= s;
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Euclidean norm of the coefficient vector (a numerical size, not a metric norm).
    pub fn coeff_norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|c| c * c).sum())
    }

    /// Largest coefficient difference.
    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.distance(other) <= tol
    }

    /// `X * reverse(X)`, checked to be scalar.
    pub fn squared_norm(&self) -> Result<f64> {
        let p = self.geometric(&self.reverse());
        let s = p.0[0];
        let residual = p.0[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if residual > DEGENERACY_TOL * s.abs().max(1.0) {
            return Err(Error::NonScalarNorm { residual });
        }
        Ok(s)
    }

    /// `X |X reverse(X)|^(−1/2)`.
    pub fn normalized(&self) -> Result<Self> {
        let s = self.squared_norm()?;
        if s.abs() < IDENTITY_TOL {
            return Err(Error::NullMultivector);
        }
        Ok(self.scale(1.0 / libm::sqrt(s.abs())))
    }

    /// `reverse(X) (X reverse(X))^(−1)`.
    pub fn inverse(&self) -> Result<Self> {
        let s = self.squared_norm()?;
        if s.abs() < IDENTITY_TOL {
            return Err(Error::NullMultivector);
        }
        Ok(self.reverse().scale(1.0 / s))
    }

    /// Scale so that the largest-magnitude coefficient becomes +1.
    pub fn normalize_blade(&self) -> Result<Self> {
        let mut best = 0.0f64;
        for &c in &self.0 {
            if c.abs() > best.abs() {
                best = c;
            }
        }
        if best.abs() < IDENTITY_TOL {
            return Err(Error::NullMultivector);
        }
        Ok(self.scale(1.0 / best))
    }

    /// Distance between two multivectors up to a nonzero scale (sign included),
    /// measured after scaling both to unit coefficient norm.
    pub fn projective_distance(&self, other: &Self) -> f64 {
        let na = self.coeff_norm();
        let nb = other.coeff_norm();
        if na == 0.0 || nb == 0.0 {
            return if na == nb { 0.0 } else { 1.0 };
        }
        let a = self.scale(1.0 / na);
        let b = other.scale(1.0 / nb);
        (a - b).max_abs().min((a + b).max_abs())
    }
}

impl Index<Blade> for Multivector {
    type Output = f64;
    fn index(&self, b: Blade) -> &f64 {
        &self.0[b.0]
    }
}

impl IndexMut<Blade> for Multivector {
    fn index_mut(&mut self, b: Blade) -> &mut f64 {
        &mut self.0[b.0]
    }
}

impl Add for Multivector {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for Multivector {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a += b;
        }
    }
}

impl Sub for Multivector {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for Multivector {
    fn sub_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a -= b;
        }
    }
}

impl Neg for Multivector {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for Multivector {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.geometric(&rhs)
    }
}

impl Mul<&Multivector> for &Multivector {
    type Output = Multivector;
    fn mul(self, rhs: &Multivector) -> Multivector {
        self.geometric(rhs)
    }
}

impl Mul<f64> for Multivector {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// Conformal embedding `e0 + x + ½|x|² e∞`.
pub fn embed_point(x: [f64; 3]) -> Multivector {
    let sq = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    Multivector::from_terms(&[
        (Blade::E0, 1.0),
        (Blade::E1, x[0]),
        (Blade::E2, x[1]),
        (Blade::E3, x[2]),
        (Blade::EINF, 0.5 * sq),
    ])
}

/// Euclidean position of a (possibly scaled) conformal point.
pub fn extract_point(p: &Multivector) -> Result<[f64; 3]> {
    let w = p.get(Blade::E0);
    if w.abs() < IDENTITY_TOL {
        return Err(Error::DegeneratePoint);
    }
    let e = p.euclidean();
    Ok([e[0] / w, e[1] / w, e[2] / w])
}

// ---------------------------------------------------------------------------
// Jacobians of normalization and inversion
// ---------------------------------------------------------------------------

/// Columns of d normalize(X) given the columns `j` of dX.
pub fn jacobian_normalize(x: &Multivector, j: &[Multivector]) -> Result<Vec<Multivector>> {
    let s = x.squared_norm()?;
    if s.abs() < IDENTITY_TOL {
        return Err(Error::NullMultivector);
    }
    let a = s.abs();
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let xr = x.reverse();
    let f = 1.0 / libm::sqrt(a);
    let g = 0.5 * sign / (a * libm::sqrt(a));
    Ok(j.iter()
        .map(|col| {
            let ds = (col.geometric(&xr) + x.geometric(&col.reverse())).scalar_part();
            col.scale(f) - x.scale(g * ds)
        })
        .collect())
}

/// Columns of d inverse(X) given the columns `j` of dX.
pub fn jacobian_inverse(x: &Multivector, j: &[Multivector]) -> Result<Vec<Multivector>> {
    let s = x.squared_norm()?;
    if s.abs() < IDENTITY_TOL {
        return Err(Error::NullMultivector);
    }
    let xr = x.reverse();
    Ok(j.iter()
        .map(|col| {
            let jr = col.reverse();
            let dot = x.geometric(&jr).scalar_part();
            jr.scale(1.0 / s) - xr.scale(2.0 * dot / (s * s))
        })
        .collect())
}
