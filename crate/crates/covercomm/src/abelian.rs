//! Integer matrix groups and the crystallographic completion machinery:
//! finiteness testing in `GL_d(Z)` (order cap 12 for d = 2), out-finiteness
//! of virtually abelian commensurations, the explicit completion for the
//! split case, and the equivariant averaging projector.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::zlin::{self, ZMat};

// ---------------------------------------------------------------------------
// integer matrices
// ---------------------------------------------------------------------------

/// A d x d integer matrix with a cached determinant.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct IntMatrix {
    d: usize,
    entries: Vec<i64>,
    det: i64,
}

impl IntMatrix {
    pub fn new(d: usize, entries: Vec<i64>) -> Result<IntMatrix> {
        if entries.len() != d * d {
            return Err(Error::Matrix(format!(
                "expected {} entries for a {d}x{d} matrix, got {}",
                d * d,
                entries.len()
            )));
        }
        let z = ZMat::from_fn(d, d, |i, j| BigInt::from(entries[i * d + j]));
        let det_big = z.det()?;
        let det = i64::try_from(&det_big)
            .map_err(|_| Error::Matrix("determinant overflows i64".into()))?;
        Ok(IntMatrix { d, entries, det })
    }

    pub fn identity(d: usize) -> IntMatrix {
        let mut entries = vec![0i64; d * d];
        for i in 0..d {
            entries[i * d + i] = 1;
        }
        IntMatrix::new(d, entries).unwrap()
    }

    pub fn scalar(d: usize, s: i64) -> IntMatrix {
        let mut entries = vec![0i64; d * d];
        for i in 0..d {
            entries[i * d + i] = s;
        }
        IntMatrix::new(d, entries).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn det(&self) -> i64 {
        self.det
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.d + j]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn trace(&self) -> i64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn is_identity(&self) -> bool {
        *self == IntMatrix::identity(self.d)
    }

    pub fn neg(&self) -> IntMatrix {
        IntMatrix::new(self.d, self.entries.iter().map(|&x| -x).collect()).unwrap()
    }

    pub fn mul(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if self.d != rhs.d {
            return Err(Error::Matrix("dimension mismatch".into()));
        }
        let d = self.d;
        let mut out = vec![0i64; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc: i128 = 0;
                for k in 0..d {
                    acc += self.get(i, k) as i128 * rhs.get(k, j) as i128;
                }
                out[i * d + j] = i64::try_from(acc)
                    .map_err(|_| Error::Matrix("entry overflow in matrix product".into()))?;
            }
        }
        IntMatrix::new(d, out)
    }

    pub fn to_zmat(&self) -> ZMat {
        ZMat::from_fn(self.d, self.d, |i, j| BigInt::from(self.get(i, j)))
    }

    /// `true` iff some positive power is the identity; exact, via the
    /// universal exponent `lcm { m : phi(m) <= d }` (12 for d = 2).
    pub fn has_finite_order(&self) -> Result<bool> {
        if self.det.abs() != 1 {
            return Ok(false);
        }
        if self.d == 2 {
            // trace criterion: |tr| > 2 is hyperbolic; |tr| = 2 is parabolic
            // unless the matrix is +-identity
            let t = self.trace().abs();
            if t > 2 {
                return Ok(false);
            }
            if t == 2 {
                return Ok(self.is_identity() || self.neg().is_identity());
            }
            return Ok(true);
        }
        let e = finite_order_exponent(self.d);
        let z = self.to_zmat();
        let mut acc = ZMat::identity(self.d);
        let mut base = z;
        let mut exp = e;
        while exp > 0 {
            if exp % 2 == 1 {
                acc = acc.mul(&base)?;
            }
            base = base.mul(&base)?;
            exp /= 2;
        }
        Ok(acc == ZMat::identity(self.d))
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.d {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.d {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// `lcm { m : phi(m) <= d }`: every finite-order element of `GL_d(Z)` has
/// order dividing this.
pub fn finite_order_exponent(d: usize) -> u64 {
    let mut l: u64 = 1;
    for m in 1..=(2 * d * d).max(8) as u64 {
        if euler_phi(m) <= d as u64 {
            l = num_integer::lcm(l, m);
        }
    }
    l
}

fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            while n.is_multiple_of(p) {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

// ---------------------------------------------------------------------------
// closures in GL_d(Z)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum ClosureOutcome {
    /// Closed element list (contains the identity, closed under products
    /// and inverses).
    Finite(Vec<IntMatrix>),
    /// Shortest word over the generators whose matrix has infinite order.
    Infinite { word: Vec<usize>, witness: IntMatrix },
    /// Exploration limit reached without a verdict.
    Inconclusive { explored: usize },
}

/// BFS closure of the generated subgroup. Completes to `Finite` when the
/// closure is finite; once the element count exceeds `cap`, elements are
/// tested for infinite order in discovery (shortest-lex) order and the
/// first hit is returned as the witness.
pub fn closure(gens: &[IntMatrix], cap: usize) -> Result<ClosureOutcome> {
    let d = gens
        .first()
        .map(|g| g.dim())
        .ok_or_else(|| Error::Matrix("closure of an empty generating set needs a dimension".into()))?;
    for (i, g) in gens.iter().enumerate() {
        if g.dim() != d {
            return Err(Error::Matrix("generators have mixed dimensions".into()));
        }
        if g.det().abs() != 1 {
            return Err(Error::Matrix(format!(
                "generator {i} has determinant {} (must be +-1)",
                g.det()
            )));
        }
    }
    let hard_limit = (cap.saturating_mul(64)).max(4096);
    let mut elements: Vec<(IntMatrix, Vec<usize>)> = vec![(IntMatrix::identity(d), Vec::new())];
    let mut seen: HashMap<IntMatrix, usize> = HashMap::new();
    seen.insert(IntMatrix::identity(d), 0);
    let mut head = 0usize;
    let mut tested = 0usize;
    let mut hunting = false;
    while head < elements.len() {
        if hunting {
            while tested < elements.len() {
                let (m, w) = &elements[tested];
                if !m.has_finite_order()? {
                    return Ok(ClosureOutcome::Infinite {
                        word: w.clone(),
                        witness: m.clone(),
                    });
                }
                tested += 1;
            }
        }
        let (cur, word) = elements[head].clone();
        head += 1;
        for (gi, g) in gens.iter().enumerate() {
            let next = cur.mul(g)?;
            if seen.contains_key(&next) {
                continue;
            }
            seen.insert(next.clone(), elements.len());
            let mut w = word.clone();
            w.push(gi);
            elements.push((next, w));
            if elements.len() > cap {
                hunting = true;
            }
            if elements.len() > hard_limit {
                return Ok(ClosureOutcome::Inconclusive {
                    explored: elements.len(),
                });
            }
        }
    }
    if hunting {
        // closure completed above the cap yet every element has finite
        // order, so the group is definitively finite
        while tested < elements.len() {
            let (m, w) = &elements[tested];
            if !m.has_finite_order()? {
                return Ok(ClosureOutcome::Infinite {
                    word: w.clone(),
                    witness: m.clone(),
                });
            }
            tested += 1;
        }
    }
    Ok(ClosureOutcome::Finite(
        elements.into_iter().map(|(m, _)| m).collect(),
    ))
}

/// Default order cap: 12 in dimension 2 (no finite subgroup of `GL_2(Z)`
/// is larger); higher dimensions need an explicit cap.
pub fn resolve_cap(d: usize, cap: Option<usize>) -> Result<usize> {
    match (d, cap) {
        (_, Some(c)) => Ok(c),
        (2, None) => Ok(12),
        _ => Err(Error::InvalidArgument(format!(
            "an explicit --cap is required in dimension {d}"
        ))),
    }
}

pub fn d4_generators() -> Vec<IntMatrix> {
    vec![
        IntMatrix::new(2, vec![0, -1, 1, 0]).unwrap(),
        IntMatrix::new(2, vec![1, 0, 0, -1]).unwrap(),
    ]
}

pub fn d6_generators() -> Vec<IntMatrix> {
    vec![
        IntMatrix::new(2, vec![0, -1, 1, 1]).unwrap(),
        IntMatrix::new(2, vec![0, 1, 1, 0]).unwrap(),
    ]
}

// ---------------------------------------------------------------------------
// abelian commensurations
// ---------------------------------------------------------------------------

/// A commensuration of split virtually abelian groups
/// `G_i = Z^d x| P_i`, over `N = Z^d` embedded via the integer matrices
/// `M_i` into the translation lattices.
#[derive(Clone, Debug)]
pub struct AbelianCommensuration {
    pub dim: usize,
    pub m1: IntMatrix,
    pub m2: IntMatrix,
    pub p1: Vec<IntMatrix>,
    pub p2: Vec<IntMatrix>,
}

/// `A (M Z^d) = M Z^d`, i.e. `M^-1 A M` is integral.
pub fn is_invariant_lattice(m: &IntMatrix, holonomy: &[IntMatrix]) -> Result<bool> {
    for a in holonomy {
        if transport(m, a)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `M^-1 A M` when integral (`adj(M) A M / det(M)`).
fn transport(m: &IntMatrix, a: &IntMatrix) -> Result<Option<IntMatrix>> {
    let d = m.dim();
    let adj = zlin_adjugate(&m.to_zmat())?;
    let t = adj.mul(&a.to_zmat())?.mul(&m.to_zmat())?;
    let det = BigInt::from(m.det());
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let (q, r) = t.get(i, j).div_rem(&det);
            if !r.is_zero() {
                return Ok(None);
            }
            out.push(
                i64::try_from(&q).map_err(|_| Error::Matrix("transport overflow".into()))?,
            );
        }
    }
    Ok(Some(IntMatrix::new(d, out)?))
}

fn zlin_adjugate(m: &ZMat) -> Result<ZMat> {
    let n = m.rows;
    if n == 0 {
        return Ok(ZMat::identity(0));
    }
    let minor = |i: usize, j: usize| -> Result<BigInt> {
        let sub = ZMat::from_fn(n - 1, n - 1, |r, c| {
            let rr = if r < i { r } else { r + 1 };
            let cc = if c < j { c } else { c + 1 };
            m.get(rr, cc).clone()
        });
        sub.det()
    };
    let mut out = ZMat::zero(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = minor(i, j)?;
            if (i + j) % 2 == 1 {
                v = -v;
            }
            out.set(j, i, v);
        }
    }
    Ok(out)
}

impl AbelianCommensuration {
    pub fn new(
        dim: usize,
        m1: IntMatrix,
        m2: IntMatrix,
        p1: Vec<IntMatrix>,
        p2: Vec<IntMatrix>,
    ) -> Result<AbelianCommensuration> {
        for m in [&m1, &m2] {
            if m.dim() != dim {
                return Err(Error::Matrix("embedding matrix dimension mismatch".into()));
            }
            if m.det() == 0 {
                return Err(Error::Matrix("embedding matrices must be nonsingular".into()));
            }
        }
        for a in p1.iter().chain(&p2) {
            if a.dim() != dim {
                return Err(Error::Matrix("holonomy dimension mismatch".into()));
            }
            if a.det().abs() != 1 {
                return Err(Error::Matrix("holonomy generators must lie in GL_d(Z)".into()));
            }
        }
        Ok(AbelianCommensuration { dim, m1, m2, p1, p2 })
    }

    /// Holonomy transported to N-coordinates: `M_i^-1 P_i M_i`, which is
    /// integral exactly when `M_i Z^d` is `P_i`-invariant.
    pub fn transported(&self, side: usize) -> Result<Vec<IntMatrix>> {
        let (m, p) = if side == 0 {
            (&self.m1, &self.p1)
        } else {
            (&self.m2, &self.p2)
        };
        let mut out = Vec::with_capacity(p.len());
        for (i, a) in p.iter().enumerate() {
            match transport(m, a)? {
                Some(q) => out.push(q),
                None => {
                    return Err(Error::Matrix(format!(
                        "lattice M{} Z^d is not invariant under holonomy generator {i} ({a})",
                        side + 1
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub enum OutFiniteOutcome {
    /// The group generated by both transported holonomies, as an element
    /// list.
    OutFinite { gamma: Vec<IntMatrix> },
    NotOutFinite { word: Vec<usize>, witness: IntMatrix },
    Inconclusive { explored: usize },
}

/// Decides whether `<O(G1/N), O(G2/N)> <= Out(Z^d) = GL_d(Z)` is finite.
pub fn is_out_finite(c: &AbelianCommensuration, cap: usize) -> Result<OutFiniteOutcome> {
    let mut gens = c.transported(0)?;
    gens.extend(c.transported(1)?);
    if gens.is_empty() {
        return Ok(OutFiniteOutcome::OutFinite {
            gamma: vec![IntMatrix::identity(c.dim)],
        });
    }
    Ok(match closure(&gens, cap)? {
        ClosureOutcome::Finite(gamma) => OutFiniteOutcome::OutFinite { gamma },
        ClosureOutcome::Infinite { word, witness } => {
            OutFiniteOutcome::NotOutFinite { word, witness }
        }
        ClosureOutcome::Inconclusive { explored } => OutFiniteOutcome::Inconclusive { explored },
    })
}

// ---------------------------------------------------------------------------
// rational lattices and completions
// ---------------------------------------------------------------------------

/// A full-rank lattice in `Q^d`: the column span of `basis / den`, kept in
/// Hermite normal form with the denominator reduced, so equality is
/// structural.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatLattice {
    pub den: BigInt,
    pub basis: ZMat,
}

impl RatLattice {
    /// Lattice generated by rational columns `cols / den`.
    pub fn from_scaled_columns(d: usize, den: BigInt, cols: &[Vec<BigInt>]) -> Result<RatLattice> {
        if cols.is_empty() {
            return Err(Error::Matrix("a lattice needs at least one generator".into()));
        }
        let m = ZMat::from_fn(d, cols.len(), |i, j| cols[j][i].clone());
        let basis = zlin::hnf_column_basis(&m);
        if basis.cols != d {
            return Err(Error::Matrix("lattice generators do not have full rank".into()));
        }
        Ok(RatLattice { den, basis }.normalized())
    }

    fn normalized(mut self) -> RatLattice {
        let mut g = self.den.clone();
        for i in 0..self.basis.rows {
            for j in 0..self.basis.cols {
                g = g.gcd(self.basis.get(i, j));
            }
        }
        if g > BigInt::one() {
            self.den = &self.den / &g;
            self.basis = ZMat::from_fn(self.basis.rows, self.basis.cols, |i, j| {
                self.basis.get(i, j) / &g
            });
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    /// Image of the lattice under an integer matrix (must stay full rank).
    pub fn transform(&self, a: &IntMatrix) -> Result<RatLattice> {
        let m = a.to_zmat().mul(&self.basis)?;
        let basis = zlin::hnf_column_basis(&m);
        if basis.cols != self.basis.cols {
            return Err(Error::Matrix("transform dropped the lattice rank".into()));
        }
        Ok(RatLattice {
            den: self.den.clone(),
            basis,
        }
        .normalized())
    }

    /// Does `num / den` lie in the lattice?
    pub fn contains(&self, num: &[BigInt], den: &BigInt) -> Result<bool> {
        // solve basis * x = (self.den / den) * num over the integers
        let scaled: Option<Vec<BigInt>> = num
            .iter()
            .map(|x| {
                let v = x * &self.den;
                let (q, r) = v.div_rem(den);
                r.is_zero().then_some(q)
            })
            .collect();
        match scaled {
            None => Ok(false),
            Some(target) => Ok(zlin::solve(&self.basis, &target)?.is_some()),
        }
    }

    /// Index `[self : sub]` when `sub` is a sublattice.
    pub fn index_of_sublattice(&self, sub: &RatLattice) -> Result<BigInt> {
        // covol(sub) / covol(self) = |det Bs| * den_l^d / (|det Bl| * den_s^d)
        let d = self.dim() as u32;
        let num = sub.basis.det()?.abs() * self.den.pow(d);
        let den = self.basis.det()?.abs() * sub.den.pow(d);
        let (q, r) = num.div_rem(&den);
        if !r.is_zero() || q <= BigInt::zero() {
            return Err(Error::Matrix("not a sublattice".into()));
        }
        Ok(q)
    }

    pub fn standard(d: usize) -> RatLattice {
        RatLattice {
            den: BigInt::one(),
            basis: ZMat::identity(d),
        }
    }

    /// Lattice spanned by `basis / den`, re-canonicalized.
    pub fn from_basis(den: BigInt, basis: ZMat) -> RatLattice {
        RatLattice {
            den,
            basis: zlin::hnf_column_basis(&basis),
        }
        .normalized()
    }

    /// Lattice `M Z^d / den`.
    pub fn from_int_matrix(m: &ZMat, den: BigInt) -> RatLattice {
        RatLattice {
            den,
            basis: zlin::hnf_column_basis(m),
        }
        .normalized()
    }
}

/// The constructed common overgroup `K = L x| Gamma` with the two
/// conjugating embeddings and their indices.
#[derive(Clone, Debug)]
pub struct AbelianCompletion {
    pub lattice: RatLattice,
    pub gamma: Vec<IntMatrix>,
    /// conjugators: `j_i` maps translations by `v` to translations by
    /// `conj_num_i v / conj_den_i` (this is `M_i^-1`)
    pub conj_num: [ZMat; 2],
    pub conj_den: [BigInt; 2],
    pub indices: [BigInt; 2],
}

#[derive(Clone, Debug)]
pub enum CompletionOutcome {
    Completed(AbelianCompletion),
    NotOutFinite { word: Vec<usize>, witness: IntMatrix },
    Inconclusive { explored: usize },
}

/// Builds the completion of an out-finite split abelian commensuration:
/// `L` is generated by the `Gamma`-orbits of the columns of `M_1^-1` and
/// `M_2^-1`, `K = L x| Gamma`, and `G_i` embeds by conjugation with
/// `M_i^-1`.
pub fn complete_abelian(c: &AbelianCommensuration, cap: usize) -> Result<CompletionOutcome> {
    let gamma = match is_out_finite(c, cap)? {
        OutFiniteOutcome::OutFinite { gamma } => gamma,
        OutFiniteOutcome::NotOutFinite { word, witness } => {
            return Ok(CompletionOutcome::NotOutFinite { word, witness })
        }
        OutFiniteOutcome::Inconclusive { explored } => {
            return Ok(CompletionOutcome::Inconclusive { explored })
        }
    };
    let d = c.dim;
    let det1 = BigInt::from(c.m1.det());
    let det2 = BigInt::from(c.m2.det());
    let den = num_integer::lcm(det1.abs(), det2.abs());

    // columns of M_i^-1 scaled to the common denominator
    let mut cols: Vec<Vec<BigInt>> = Vec::new();
    for m in [&c.m1, &c.m2] {
        let adj = zlin_adjugate(&m.to_zmat())?;
        let det = BigInt::from(m.det());
        let scale = &den / &det; // den / det, signed
        for j in 0..d {
            let col: Vec<BigInt> = (0..d).map(|i| adj.get(i, j) * &scale).collect();
            cols.push(col);
        }
    }
    // close under the Gamma action
    let mut all = Vec::new();
    for g in &gamma {
        let gz = g.to_zmat();
        for col in &cols {
            all.push(gz.mul_vec(col)?);
        }
    }
    let lattice = RatLattice::from_scaled_columns(d, den.clone(), &all)?;

    // indices [K : j_i(G_i)] = [L : M_i^-1 Z^d] * |Gamma| / |P_i|
    let mut indices = [BigInt::zero(), BigInt::zero()];
    let gamma_order = BigInt::from(gamma.len() as i64);
    for (side, m) in [&c.m1, &c.m2].into_iter().enumerate() {
        let adj = zlin_adjugate(&m.to_zmat())?;
        let mi_inv = RatLattice::from_int_matrix(&adj, BigInt::from(m.det()).abs());
        let lat_index = lattice.index_of_sublattice(&mi_inv)?;
        let p = if side == 0 { &c.p1 } else { &c.p2 };
        let p_order = if p.is_empty() {
            BigInt::one()
        } else {
            match closure(p, cap.max(4096))? {
                ClosureOutcome::Finite(els) => BigInt::from(els.len() as i64),
                _ => {
                    return Err(Error::Matrix(format!(
                        "holonomy group P{} is not finite within the cap",
                        side + 1
                    )))
                }
            }
        };
        let (q, r) = (&lat_index * &gamma_order).div_rem(&p_order);
        if !r.is_zero() {
            return Err(Error::Matrix("index bookkeeping failed".into()));
        }
        indices[side] = q;
    }

    let adj1 = zlin_adjugate(&c.m1.to_zmat())?;
    let adj2 = zlin_adjugate(&c.m2.to_zmat())?;
    let sign = |det: &BigInt| if det.is_negative() { -BigInt::one() } else { BigInt::one() };
    let conj_num = [
        ZMat::from_fn(d, d, |i, j| adj1.get(i, j) * sign(&det1)),
        ZMat::from_fn(d, d, |i, j| adj2.get(i, j) * sign(&det2)),
    ];
    let conj_den = [det1.abs(), det2.abs()];
    Ok(CompletionOutcome::Completed(AbelianCompletion {
        lattice,
        gamma,
        conj_num,
        conj_den,
        indices,
    }))
}

/// Re-checks a completion against its commensuration; returns every
/// diagnostic (empty iff the completion verifies).
pub fn verify_completion(c: &AbelianCommensuration, comp: &AbelianCompletion) -> Result<Vec<String>> {
    let mut issues = Vec::new();
    let d = c.dim;

    // gamma is a finite group: identity, closed under products
    let gamma_set: HashMap<&IntMatrix, usize> =
        comp.gamma.iter().enumerate().map(|(i, g)| (g, i)).collect();
    if !comp.gamma.iter().any(|g| g.is_identity()) {
        issues.push("Gamma does not contain the identity".into());
    }
    'outer: for a in &comp.gamma {
        for b in &comp.gamma {
            if !gamma_set.contains_key(&a.mul(b)?) {
                issues.push(format!("Gamma is not closed under products ({a}) * ({b})"));
                break 'outer;
            }
        }
    }

    // j1 . h1 = j2 . h2 on the standard basis of N:
    // conj_num1 * M1 / den1 = conj_num2 * M2 / den2
    let lhs = comp.conj_num[0].mul(&c.m1.to_zmat())?;
    let rhs = comp.conj_num[1].mul(&c.m2.to_zmat())?;
    let cross_ok = (0..d).all(|i| {
        (0..d).all(|j| lhs.get(i, j) * &comp.conj_den[1] == rhs.get(i, j) * &comp.conj_den[0])
    });
    if !cross_ok {
        issues.push("diagram does not commute: j1 . h1 != j2 . h2 on N".into());
    }

    // Gamma-invariance of L
    for g in &comp.gamma {
        if comp.lattice.transform(g)? != comp.lattice {
            issues.push(format!("lattice L is not invariant under Gamma element ({g})"));
            break;
        }
    }

    // embedded generators of G_i land in K = L x| Gamma
    for side in 0..2 {
        let num = &comp.conj_num[side];
        let den = &comp.conj_den[side];
        for j in 0..d {
            let col: Vec<BigInt> = (0..d).map(|i| num.get(i, j).clone()).collect();
            if !comp.lattice.contains(&col, den)? {
                issues.push(format!(
                    "translation generator {j} of G{} does not land in L",
                    side + 1
                ));
            }
        }
        let p = if side == 0 { &c.p1 } else { &c.p2 };
        for (i, a) in p.iter().enumerate() {
            // j_i(A) = C A C^-1 with C = num/den; the scalar cancels, so
            // compute num * A * adj(num) / det(num) over BigInt
            match conj_forward(num, a)? {
                Some(qm) => {
                    if !gamma_set.contains_key(&qm) {
                        issues.push(format!(
                            "holonomy generator {i} of G{} maps outside Gamma",
                            side + 1
                        ));
                    }
                }
                None => issues.push(format!(
                    "holonomy generator {i} of G{} does not conjugate integrally",
                    side + 1
                )),
            }
        }
    }

    // index bookkeeping
    for side in 0..2 {
        let m = if side == 0 { &c.m1 } else { &c.m2 };
        let adj = zlin_adjugate(&m.to_zmat())?;
        let mi_inv = RatLattice::from_int_matrix(&adj, BigInt::from(m.det()).abs());
        match comp.lattice.index_of_sublattice(&mi_inv) {
            Ok(lat_index) => {
                let p = if side == 0 { &c.p1 } else { &c.p2 };
                let p_order = if p.is_empty() {
                    BigInt::one()
                } else {
                    match closure(p, 4096)? {
                        ClosureOutcome::Finite(els) => BigInt::from(els.len() as i64),
                        _ => {
                            issues.push(format!("holonomy P{} not finite", side + 1));
                            continue;
                        }
                    }
                };
                let expect = &lat_index * BigInt::from(comp.gamma.len() as i64) / &p_order;
                if expect != comp.indices[side] {
                    issues.push(format!(
                        "index [K:G{}] is {expect}, certificate claims {}",
                        side + 1,
                        comp.indices[side]
                    ));
                }
                if comp.indices[side] <= BigInt::zero() {
                    issues.push(format!("index [K:G{}] must be positive", side + 1));
                }
            }
            Err(_) => issues.push(format!(
                "M{}^-1 Z^d is not a sublattice of L",
                side + 1
            )),
        }
    }
    Ok(issues)
}

/// `B A B^-1` for an integer matrix `B` given as a `ZMat`, when integral.
fn conj_forward(b: &ZMat, a: &IntMatrix) -> Result<Option<IntMatrix>> {
    let d = a.dim();
    let det = b.det()?;
    if det.is_zero() {
        return Ok(None);
    }
    let adj = zlin_adjugate(b)?;
    let t = b.mul(&a.to_zmat())?.mul(&adj)?;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let (q, r) = t.get(i, j).div_rem(&det);
            if !r.is_zero() {
                return Ok(None);
            }
            match i64::try_from(&q) {
                Ok(x) => out.push(x),
                Err(_) => return Ok(None),
            }
        }
    }
    Ok(Some(IntMatrix::new(d, out)?))
}

// ---------------------------------------------------------------------------
// equivariant averaging
// ---------------------------------------------------------------------------

/// A finitely generated abelian group `Z^r (+) Z/t_1 (+) ... (+) Z/t_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FgAbelian {
    pub free_rank: usize,
    pub torsion: Vec<u64>,
}

impl FgAbelian {
    pub fn dims(&self) -> usize {
        self.free_rank + self.torsion.len()
    }

    /// Reduces torsion coordinates into `0..t`.
    pub fn canon_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        v.iter()
            .enumerate()
            .map(|(i, x)| {
                if i < self.free_rank {
                    x.clone()
                } else {
                    x.mod_floor(&BigInt::from(self.torsion[i - self.free_rank]))
                }
            })
            .collect()
    }

    pub fn is_zero_vec(&self, v: &[BigInt]) -> bool {
        self.canon_vec(v).iter().all(|x| x.is_zero())
    }

    /// Canonical form of an endomorphism matrix (torsion rows reduced).
    pub fn canon_endo(&self, m: &ZMat) -> ZMat {
        ZMat::from_fn(self.dims(), self.dims(), |i, j| {
            if i < self.free_rank {
                m.get(i, j).clone()
            } else {
                m.get(i, j).mod_floor(&BigInt::from(self.torsion[i - self.free_rank]))
            }
        })
    }

    /// Structural constraints: columns from torsion generators must vanish
    /// on free coordinates and respect the order relations.
    pub fn check_endo(&self, m: &ZMat) -> Result<()> {
        let n = self.dims();
        if m.rows != n || m.cols != n {
            return Err(Error::Averaging(format!(
                "endomorphism must be {n}x{n}"
            )));
        }
        for j in self.free_rank..n {
            let tj = BigInt::from(self.torsion[j - self.free_rank]);
            for i in 0..n {
                let v = &tj * m.get(i, j);
                if i < self.free_rank {
                    if !v.is_zero() {
                        return Err(Error::Averaging(format!(
                            "entry ({i},{j}) sends a torsion generator into the free part"
                        )));
                    }
                } else {
                    let ti = BigInt::from(self.torsion[i - self.free_rank]);
                    if !v.mod_floor(&ti).is_zero() {
                        return Err(Error::Averaging(format!(
                            "entry ({i},{j}) does not respect the torsion relations"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Columns `t_j e_{r+j}` of the relation matrix.
    pub fn relation_columns(&self) -> ZMat {
        let n = self.dims();
        let k = self.torsion.len();
        ZMat::from_fn(n, k, |i, j| {
            if i == self.free_rank + j {
                BigInt::from(self.torsion[j])
            } else {
                BigInt::zero()
            }
        })
    }

    /// Membership of `v` in the subgroup generated by `gens`.
    pub fn member(&self, v: &[BigInt], gens: &[Vec<BigInt>]) -> Result<bool> {
        let n = self.dims();
        let k = self.torsion.len();
        let m = ZMat::from_fn(n, gens.len() + k, |i, j| {
            if j < gens.len() {
                gens[j][i].clone()
            } else {
                let jj = j - gens.len();
                if i == self.free_rank + jj {
                    BigInt::from(self.torsion[jj])
                } else {
                    BigInt::zero()
                }
            }
        });
        Ok(zlin::solve(&m, v)?.is_some())
    }
}

/// Input data for the averaging projector: a finite action of `Gamma` on
/// `M`, an invariant subgroup `Z`, and a retraction `rho_0 : M -> Z`.
#[derive(Clone, Debug)]
pub struct AveragingInstance {
    pub group: FgAbelian,
    pub gamma_gens: Vec<ZMat>,
    pub z_gens: Vec<Vec<BigInt>>,
    pub rho0: ZMat,
}

#[derive(Clone, Debug)]
pub struct AveragedRetraction {
    /// `rho(v) = sum_gamma gamma . rho0(gamma^-1 v)` as an endomorphism.
    pub rho: ZMat,
    pub gamma: Vec<ZMat>,
    pub kernel_gens: Vec<Vec<BigInt>>,
}

/// Builds the averaged retraction and its kernel, verifying the instance
/// invariants along the way.
pub fn equivariant_average(inst: &AveragingInstance) -> Result<AveragedRetraction> {
    let g = &inst.group;
    let n = g.dims();
    g.check_endo(&inst.rho0)?;
    for ggen in &inst.gamma_gens {
        g.check_endo(ggen)?;
    }
    for z in &inst.z_gens {
        if z.len() != n {
            return Err(Error::Averaging("Z generator has the wrong length".into()));
        }
    }

    // rho0 is a retraction onto Z: image inside Z, identity on Z
    for j in 0..n {
        let e: Vec<BigInt> = (0..n).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect();
        let img = inst.rho0.mul_vec(&e)?;
        if !g.member(&g.canon_vec(&img), &inst.z_gens)? {
            return Err(Error::Averaging(format!(
                "rho0 does not map generator {j} into Z"
            )));
        }
    }
    for z in &inst.z_gens {
        let img = inst.rho0.mul_vec(z)?;
        let diff: Vec<BigInt> = img.iter().zip(z).map(|(a, b)| a - b).collect();
        if !g.is_zero_vec(&diff) {
            return Err(Error::Averaging("rho0 is not the identity on Z".into()));
        }
    }

    // close Gamma (as canonical endomorphisms) and find inverses
    const GAMMA_CAP: usize = 4096;
    let id = ZMat::identity(n);
    let mut elements: Vec<ZMat> = vec![g.canon_endo(&id)];
    let mut seen: HashMap<ZMat, usize> = HashMap::new();
    seen.insert(elements[0].clone(), 0);
    let mut head = 0;
    while head < elements.len() {
        let cur = elements[head].clone();
        head += 1;
        for ggen in &inst.gamma_gens {
            let next = g.canon_endo(&cur.mul(ggen)?);
            if !seen.contains_key(&next) {
                if elements.len() >= GAMMA_CAP {
                    return Err(Error::Averaging(format!(
                        "Gamma does not close within {GAMMA_CAP} elements"
                    )));
                }
                seen.insert(next.clone(), elements.len());
                elements.push(next);
            }
        }
    }
    // inverses: gamma acts by automorphisms, so each element has one in the
    // closure
    let mut inverse_of = vec![usize::MAX; elements.len()];
    for (i, a) in elements.iter().enumerate() {
        for (j, b) in elements.iter().enumerate() {
            if g.canon_endo(&a.mul(b)?) == elements[0] && g.canon_endo(&b.mul(a)?) == elements[0] {
                inverse_of[i] = j;
                break;
            }
        }
        if inverse_of[i] == usize::MAX {
            return Err(Error::Averaging(
                "a Gamma element is not invertible on M".into(),
            ));
        }
    }

    // Z is Gamma-invariant
    for ggen in &inst.gamma_gens {
        for z in &inst.z_gens {
            let img = ggen.mul_vec(z)?;
            if !g.member(&g.canon_vec(&img), &inst.z_gens)? {
                return Err(Error::Averaging("Z is not Gamma-invariant".into()));
            }
        }
    }

    // rho = sum gamma rho0 gamma^-1
    let mut rho = ZMat::zero(n, n);
    for (i, a) in elements.iter().enumerate() {
        let term = a.mul(&inst.rho0)?.mul(&elements[inverse_of[i]])?;
        rho = rho.add(&term)?;
    }
    let rho = g.canon_endo(&rho);

    // kernel of rho as a map M -> M: integer kernel of [rho | relations],
    // projected to the coordinate block
    let k = g.torsion.len();
    let sys = ZMat::from_fn(n, n + k, |i, j| {
        if j < n {
            rho.get(i, j).clone()
        } else {
            let jj = j - n;
            if i == g.free_rank + jj {
                BigInt::from(g.torsion[jj])
            } else {
                BigInt::zero()
            }
        }
    });
    let mut kernel_gens: Vec<Vec<BigInt>> = zlin::kernel_basis(&sys)
        .into_iter()
        .map(|v| g.canon_vec(&v[..n]))
        .filter(|v| !g.is_zero_vec(v))
        .collect();
    // torsion relations themselves are in the kernel trivially; drop dups
    kernel_gens.sort();
    kernel_gens.dedup();

    Ok(AveragedRetraction {
        rho,
        gamma: elements,
        kernel_gens,
    })
}

impl AveragedRetraction {
    pub fn gamma_order(&self) -> usize {
        self.gamma.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(entries: [i64; 4]) -> IntMatrix {
        IntMatrix::new(2, entries.to_vec()).unwrap()
    }

    #[test]
    fn d4_d6_orders() {
        match closure(&d4_generators(), 12).unwrap() {
            ClosureOutcome::Finite(els) => assert_eq!(els.len(), 8),
            other => panic!("D4 is finite, got {other:?}"),
        }
        match closure(&d6_generators(), 12).unwrap() {
            ClosureOutcome::Finite(els) => assert_eq!(els.len(), 12),
            other => panic!("D6 is finite, got {other:?}"),
        }
        match closure(&[IntMatrix::identity(2)], 12).unwrap() {
            ClosureOutcome::Finite(els) => assert_eq!(els.len(), 1),
            other => panic!("trivial group, got {other:?}"),
        }
    }

    #[test]
    fn d4_union_d6_infinite() {
        let mut gens = d4_generators();
        gens.extend(d6_generators());
        match closure(&gens, 12).unwrap() {
            ClosureOutcome::Infinite { word, witness } => {
                assert!(word.len() <= 2, "witness word {word:?}");
                assert_eq!(witness, m2([-1, -1, 0, -1]));
                // its square is unipotent and nontrivial
                let sq = witness.mul(&witness).unwrap();
                assert_eq!(sq, m2([1, 2, 0, 1]));
                assert!(!sq.is_identity());
                assert!(!witness.has_finite_order().unwrap());
            }
            other => panic!("expected infinite, got {other:?}"),
        }
    }

    #[test]
    fn finite_order_exponents() {
        assert_eq!(finite_order_exponent(2), 12);
        // order tests agree with the trace criterion in dimension 2
        for m in [
            m2([0, -1, 1, 0]),
            m2([1, 1, 0, 1]),
            m2([2, 1, 1, 1]),
            m2([-1, 0, 0, -1]),
        ] {
            let by_exp = {
                let e = finite_order_exponent(2);
                let mut acc = IntMatrix::identity(2);
                for _ in 0..e {
                    acc = acc.mul(&m).unwrap();
                }
                acc.is_identity()
            };
            assert_eq!(m.has_finite_order().unwrap(), by_exp, "matrix {m}");
        }
    }

    fn z2_d4_self() -> AbelianCommensuration {
        AbelianCommensuration::new(
            2,
            IntMatrix::identity(2),
            IntMatrix::scalar(2, 2),
            d4_generators(),
            d4_generators(),
        )
        .unwrap()
    }

    fn z2_d4_vs_d6() -> AbelianCommensuration {
        AbelianCommensuration::new(
            2,
            IntMatrix::identity(2),
            IntMatrix::identity(2),
            d4_generators(),
            d6_generators(),
        )
        .unwrap()
    }

    #[test]
    fn out_finiteness() {
        // trivial holonomy
        let c = AbelianCommensuration::new(
            2,
            IntMatrix::identity(2),
            IntMatrix::scalar(2, 3),
            vec![],
            vec![],
        )
        .unwrap();
        match is_out_finite(&c, 12).unwrap() {
            OutFiniteOutcome::OutFinite { gamma } => assert_eq!(gamma.len(), 1),
            other => panic!("{other:?}"),
        }

        // scalars conjugate trivially: D4 against D4 stays finite
        match is_out_finite(&z2_d4_self(), 12).unwrap() {
            OutFiniteOutcome::OutFinite { gamma } => assert_eq!(gamma.len(), 8),
            other => panic!("{other:?}"),
        }

        // D4 and D6 cannot generate a finite subgroup (no common overgroup
        // in GL_2(Z) has elements of order 4 and 6)
        match is_out_finite(&z2_d4_vs_d6(), 12).unwrap() {
            OutFiniteOutcome::NotOutFinite { .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invariance_violation_is_reported() {
        // M = diag(1, 2) is not D4-invariant (the rotation maps it out)
        let c = AbelianCommensuration::new(
            2,
            IntMatrix::new(2, vec![1, 0, 0, 2]).unwrap(),
            IntMatrix::identity(2),
            d4_generators(),
            vec![],
        )
        .unwrap();
        assert!(is_out_finite(&c, 12).is_err());
        assert!(!is_invariant_lattice(
            &IntMatrix::new(2, vec![1, 0, 0, 2]).unwrap(),
            &d4_generators()
        )
        .unwrap());
        assert!(is_invariant_lattice(&IntMatrix::scalar(2, 2), &d4_generators()).unwrap());
    }

    #[test]
    fn completion_trivial_and_scaled() {
        // M1 = M2 = I: K is G1 itself
        let c = AbelianCommensuration::new(
            2,
            IntMatrix::identity(2),
            IntMatrix::identity(2),
            d4_generators(),
            d4_generators(),
        )
        .unwrap();
        match complete_abelian(&c, 12).unwrap() {
            CompletionOutcome::Completed(comp) => {
                assert_eq!(comp.indices, [BigInt::one(), BigInt::one()]);
                assert!(verify_completion(&c, &comp).unwrap().is_empty());
            }
            other => panic!("{other:?}"),
        }

        // scaled case: indices (4, 1)
        let c = z2_d4_self();
        match complete_abelian(&c, 12).unwrap() {
            CompletionOutcome::Completed(comp) => {
                assert_eq!(comp.indices, [BigInt::from(4), BigInt::one()]);
                assert!(verify_completion(&c, &comp).unwrap().is_empty());
            }
            other => panic!("{other:?}"),
        }

        // D4 vs D6 has no completion
        match complete_abelian(&z2_d4_vs_d6(), 12).unwrap() {
            CompletionOutcome::NotOutFinite { .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupted_completion_fails() {
        let c = z2_d4_self();
        let comp = match complete_abelian(&c, 12).unwrap() {
            CompletionOutcome::Completed(comp) => comp,
            _ => unreachable!(),
        };
        let mut bad = comp.clone();
        // shrink the lattice: drop the half-integer part
        bad.lattice = RatLattice::standard(2);
        let issues = verify_completion(&c, &bad).unwrap();
        assert!(!issues.is_empty());
        assert!(issues.iter().any(|s| s.contains("does not land in L") || s.contains("index")));
    }

    #[test]
    fn averaging_sign_flip() {
        // M = Z^2, Z = first coordinate, Gamma = {+-I}, rho0 = projection
        let inst = AveragingInstance {
            group: FgAbelian { free_rank: 2, torsion: vec![] },
            gamma_gens: vec![ZMat::from_rows(&[vec![-1, 0], vec![0, -1]]).unwrap()],
            z_gens: vec![vec![BigInt::one(), BigInt::zero()]],
            rho0: ZMat::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap(),
        };
        let avg = equivariant_average(&inst).unwrap();
        assert_eq!(avg.gamma_order(), 2);
        assert_eq!(avg.rho, ZMat::from_rows(&[vec![2, 0], vec![0, 0]]).unwrap());
        // kernel is the second coordinate
        assert_eq!(avg.kernel_gens.len(), 1);
        assert_eq!(avg.kernel_gens[0], vec![BigInt::zero(), BigInt::one()]);
        // |Gamma| M <= Z + ker rho
        let g = &inst.group;
        let mut gens = inst.z_gens.clone();
        gens.extend(avg.kernel_gens.clone());
        for j in 0..2 {
            let v: Vec<BigInt> = (0..2)
                .map(|i| if i == j { BigInt::from(2) } else { BigInt::zero() })
                .collect();
            assert!(g.member(&v, &gens).unwrap());
        }
    }

    #[test]
    fn averaging_with_torsion() {
        // M = Z (+) Z/2, Gamma flips the free part, Z = torsion part
        let inst = AveragingInstance {
            group: FgAbelian { free_rank: 1, torsion: vec![2] },
            gamma_gens: vec![ZMat::from_rows(&[vec![-1, 0], vec![0, 1]]).unwrap()],
            z_gens: vec![vec![BigInt::zero(), BigInt::one()]],
            rho0: ZMat::from_rows(&[vec![0, 0], vec![0, 1]]).unwrap(),
        };
        let avg = equivariant_average(&inst).unwrap();
        assert_eq!(avg.gamma_order(), 2);
        // Z ∩ ker rho = {h in Z : |Gamma| h = 0} = all of Z/2
        let g = &inst.group;
        for h in 0..2u8 {
            let v = vec![BigInt::zero(), BigInt::from(h)];
            let in_ker = g.is_zero_vec(&avg.rho.mul_vec(&v).unwrap());
            let killed = g.is_zero_vec(&[BigInt::zero(), BigInt::from(2 * h)]);
            assert_eq!(in_ker, killed);
            assert!(in_ker); // 2h = 0 in Z/2 always
        }
    }

    #[test]
    fn gamma_trivial_average_is_rho0() {
        let inst = AveragingInstance {
            group: FgAbelian { free_rank: 2, torsion: vec![] },
            gamma_gens: vec![],
            z_gens: vec![vec![BigInt::one(), BigInt::zero()]],
            rho0: ZMat::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap(),
        };
        let avg = equivariant_average(&inst).unwrap();
        assert_eq!(avg.gamma_order(), 1);
        assert_eq!(avg.rho, inst.rho0);
    }

    #[test]
    fn averaging_rejects_bad_instances() {
        // Z not invariant: Gamma swaps coordinates, Z = first coordinate
        let inst = AveragingInstance {
            group: FgAbelian { free_rank: 2, torsion: vec![] },
            gamma_gens: vec![ZMat::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap()],
            z_gens: vec![vec![BigInt::one(), BigInt::zero()]],
            rho0: ZMat::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap(),
        };
        assert!(equivariant_average(&inst).is_err());

        // rho0 not a retraction (zero map on Z)
        let inst = AveragingInstance {
            group: FgAbelian { free_rank: 2, torsion: vec![] },
            gamma_gens: vec![],
            z_gens: vec![vec![BigInt::one(), BigInt::zero()]],
            rho0: ZMat::zero(2, 2),
        };
        assert!(equivariant_average(&inst).is_err());
    }

    #[test]
    fn cap_resolution() {
        assert_eq!(resolve_cap(2, None).unwrap(), 12);
        assert_eq!(resolve_cap(3, Some(100)).unwrap(), 100);
        assert!(resolve_cap(3, None).is_err());
    }
}
