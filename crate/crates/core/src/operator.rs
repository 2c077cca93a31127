//! Convolution operators `M = Σ d_k D^k`, Weyl operators `T = M − azI` and
//! polynomial composites `L(T)`, together with their exact action on the
//! monomial basis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{falling_factorial, linear_combine, pair, pairs, TaylorSeries, C64};

/// Largest monomial degree accepted by the dense matrix routines.
pub const MAX_NCAP: usize = 512;

/// Tolerance used by [`decompose`] for both the commutator test and the
/// constant-coefficient test.
pub const DECOMPOSE_TOL: f64 = 1e-9;

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Horner evaluation of `Σ p_k x^k`.
pub fn eval_poly(p: &[C64], x: C64) -> C64 {
    p.iter().rev().fold(C64::default(), |acc, &c| acc * x + c)
}

/// A linear operator on truncated series.
pub trait Operator {
    fn apply(&self, f: &TaylorSeries) -> Result<TaylorSeries>;

    /// Maximal increase of polynomial degree.
    fn degree_raise(&self) -> usize;
}

/// `M = Σ_{k=0}^p d_k D^k` with characteristic polynomial `L(λ) = Σ d_k λ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionOperator {
    d: Vec<C64>,
}

impl ConvolutionOperator {
    /// Trailing zero coefficients are dropped. The zero operator is rejected.
    pub fn new(mut d: Vec<C64>) -> Result<Self> {
        while d.len() > 1 && d[d.len() - 1] == C64::default() {
            d.pop();
        }
        if d.iter().all(|c| *c == C64::default()) {
            return Err(Error::ZeroOperator);
        }
        if d.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::MalformedSpec("non-finite operator coefficient".into()));
        }
        Ok(ConvolutionOperator { d })
    }

    pub fn from_real(d: &[f64]) -> Result<Self> {
        Self::new(d.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// `D^k`.
    pub fn derivative(k: usize) -> Self {
        let mut d = vec![C64::default(); k + 1];
        d[k] = one();
        ConvolutionOperator { d }
    }

    pub fn identity() -> Self {
        Self::derivative(0)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.d
    }

    pub fn order(&self) -> usize {
        self.d.len() - 1
    }

    /// `L(λ)`.
    pub fn characteristic(&self, lambda: C64) -> C64 {
        eval_poly(&self.d, lambda)
    }
}

impl Operator for ConvolutionOperator {
    fn apply(&self, f: &TaylorSeries) -> Result<TaylorSeries> {
        let p = self.order();
        if !f.is_exact() && p >= f.valid_order() {
            return Err(Error::OrderExhausted { requested: p, valid_order: f.valid_order() });
        }
        let derivs = self
            .d
            .iter()
            .enumerate()
            .filter(|&(k, c)| *c != C64::default() || k == p)
            .map(|(k, &c)| Ok((c, f.differentiate(k)?)))
            .collect::<Result<Vec<_>>>()?;
        let terms: Vec<(C64, &TaylorSeries)> = derivs.iter().map(|(c, s)| (*c, s)).collect();
        Ok(linear_combine(&terms)?.with_label(f.label()))
    }

    fn degree_raise(&self) -> usize {
        0
    }
}

/// `T = M − azI`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylOperator {
    pub m: ConvolutionOperator,
    pub a: C64,
}

impl WeylOperator {
    pub fn new(m: ConvolutionOperator, a: C64) -> Self {
        WeylOperator { m, a }
    }

    /// `Σ d_k D^k − a z I` from real coefficients.
    pub fn from_real(d: &[f64], a: f64) -> Result<Self> {
        Ok(WeylOperator { m: ConvolutionOperator::from_real(d)?, a: C64::new(a, 0.0) })
    }

    pub fn order(&self) -> usize {
        self.m.order()
    }
}

impl Operator for WeylOperator {
    fn apply(&self, f: &TaylorSeries) -> Result<TaylorSeries> {
        let mf = self.m.apply(f)?;
        if self.a == C64::default() {
            return Ok(mf);
        }
        let zf = f.multiply_by_poly(&[C64::default(), one()])?;
        Ok(linear_combine(&[(one(), &mf), (-self.a, &zf)])?.with_label(f.label()))
    }

    fn degree_raise(&self) -> usize {
        usize::from(self.a != C64::default())
    }
}

/// `L(T) = Σ l_k T^k` for a polynomial `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeOperator {
    pub base: WeylOperator,
    l: Vec<C64>,
}

impl CompositeOperator {
    pub fn new(base: WeylOperator, mut l: Vec<C64>) -> Result<Self> {
        while l.len() > 1 && l[l.len() - 1] == C64::default() {
            l.pop();
        }
        if l.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        Ok(CompositeOperator { base, l })
    }

    /// `L(λ) = λ`, i.e. `T` itself.
    pub fn identity_of(base: WeylOperator) -> Self {
        CompositeOperator { base, l: vec![C64::default(), one()] }
    }

    pub fn l(&self) -> &[C64] {
        &self.l
    }

    pub fn degree(&self) -> usize {
        self.l.len() - 1
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    /// `L(x)`.
    pub fn polynomial(&self, x: C64) -> C64 {
        eval_poly(&self.l, x)
    }

    /// `L_a(λ) = L(aλ)`: the eigenvalue of `L(T)` on `S_λ f` for `f ∈ ker T`.
    pub fn l_a(&self, lambda: C64) -> C64 {
        self.polynomial(self.base.a * lambda)
    }

    /// Sum of the powers `Σ l_k T^k f`, each power applied separately. Used
    /// to cross-check the Horner route of [`Operator::apply`].
    pub fn apply_expanded(&self, f: &TaylorSeries) -> Result<TaylorSeries> {
        self.check_order(f)?;
        let mut powers = vec![f.clone()];
        for k in 1..=self.degree() {
            let next = self.base.apply(&powers[k - 1])?;
            powers.push(next);
        }
        let terms: Vec<(C64, &TaylorSeries)> = self.l.iter().copied().zip(powers.iter()).collect();
        Ok(linear_combine(&terms)?.with_label(f.label()))
    }

    fn check_order(&self, f: &TaylorSeries) -> Result<()> {
        let needed = self.degree() * self.base.order();
        if !f.is_exact() && needed > 0 && needed >= f.valid_order() {
            return Err(Error::OrderExhausted { requested: needed, valid_order: f.valid_order() });
        }
        Ok(())
    }
}

impl Operator for CompositeOperator {
    fn apply(&self, f: &TaylorSeries) -> Result<TaylorSeries> {
        self.check_order(f)?;
        let q = self.degree();
        let mut acc = f.scale(self.l[q]);
        for k in (0..q).rev() {
            let t = self.base.apply(&acc)?;
            acc = linear_combine(&[(one(), &t), (self.l[k], f)])?;
        }
        Ok(acc.with_label(f.label()))
    }

    fn degree_raise(&self) -> usize {
        self.degree() * self.base.degree_raise()
    }
}

/// Multiplication by a fixed polynomial `p(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplicationOperator {
    p: Vec<C64>,
}

impl MultiplicationOperator {
    pub fn new(p: Vec<C64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        Ok(MultiplicationOperator { p })
    }

    /// `z^k I`.
    pub fn monomial(k: usize) -> Self {
        let mut p = vec![C64::default(); k + 1];
        p[k] = one();
        MultiplicationOperator { p }
    }
}

impl Operator for MultiplicationOperator {
    fn apply(&self, f: &TaylorSeries) -> Result<TaylorSeries> {
        f.multiply_by_poly(&self.p)
    }

    fn degree_raise(&self) -> usize {
        self.p.len() - 1
    }
}

/// Matrix of an operator on `1, z, …, z^{n_cap}`: column `n` holds the
/// coefficients of the image of `z^n`. Rows cover degrees
/// `0..=n_cap + degree_raise` (`n_cap + 2` rows for a Weyl operator).
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
    n_cap: usize,
}

impl OperatorMatrix {
    /// Build from column images; images longer than `rows` are truncated.
    pub fn from_columns(n_cap: usize, rows: usize, mut column: impl FnMut(usize) -> Result<TaylorSeries>) -> Result<Self> {
        let mut entries = DMatrix::from_element(rows, n_cap + 1, C64::default());
        for n in 0..=n_cap {
            let img = column(n)?;
            for (r, &c) in img.coeffs().iter().enumerate().take(rows) {
                entries[(r, n)] = c;
            }
        }
        Ok(OperatorMatrix { entries, n_cap })
    }

    pub fn from_entries(entries: DMatrix<C64>) -> Result<Self> {
        if entries.ncols() == 0 || entries.nrows() == 0 {
            return Err(Error::InvalidArgument("empty operator matrix".into()));
        }
        let n_cap = entries.ncols() - 1;
        Ok(OperatorMatrix { entries, n_cap })
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn n_cap(&self) -> usize {
        self.n_cap
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        if row < self.entries.nrows() && col < self.entries.ncols() {
            self.entries[(row, col)]
        } else {
            C64::default()
        }
    }

    /// Image of `z^n` as an exact polynomial.
    pub fn column_series(&self, n: usize) -> TaylorSeries {
        let coeffs: Vec<C64> = self.entries.column(n).iter().copied().collect();
        TaylorSeries::polynomial(coeffs, format!("col{n}")).expect("matrix entries are finite")
    }

    /// `(row, col, re, im)` for every stored entry, column-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::with_capacity(self.entries.len());
        for col in 0..self.entries.ncols() {
            for row in 0..self.entries.nrows() {
                let c = self.entries[(row, col)];
                out.push((row, col, c.re, c.im));
            }
        }
        out
    }
}

fn check_ncap(n_cap: usize, min: usize) -> Result<()> {
    if n_cap < min || n_cap > MAX_NCAP {
        return Err(Error::InvalidArgument(format!("n_cap {n_cap} outside {min}..={MAX_NCAP}")));
    }
    Ok(())
}

/// Exact images of `z^0..z^{n_cap}`.
pub fn matrix_on_monomials(op: &dyn Operator, n_cap: usize) -> Result<OperatorMatrix> {
    check_ncap(n_cap, 1)?;
    let rows = n_cap + 1 + op.degree_raise();
    OperatorMatrix::from_columns(n_cap, rows, |n| op.apply(&TaylorSeries::monomial(n)))
}

/// Matrix of `AB − BA` on monomials of degree `<= n_cap − 1`.
pub fn commutator_matrix(op_a: &dyn Operator, op_b: &dyn Operator, n_cap: usize) -> Result<OperatorMatrix> {
    check_ncap(n_cap, 2)?;
    let cols = n_cap - 1;
    let rows = cols + 1 + op_a.degree_raise() + op_b.degree_raise();
    OperatorMatrix::from_columns(cols, rows, |n| {
        let zn = TaylorSeries::monomial(n);
        let ab = op_a.apply(&op_b.apply(&zn)?)?;
        let ba = op_b.apply(&op_a.apply(&zn)?)?;
        linear_combine(&[(one(), &ab), (-one(), &ba)])
    })
}

/// Commutator matrix of `A` and `B` with its distance from `a·I`, each
/// entry measured relative to `|AB z^n| + |BA z^n|` at that entry (floored
/// at 1), which is the scale of the cancellation that produces it.
pub fn commutator_check(op_a: &dyn Operator, op_b: &dyn Operator, n_cap: usize) -> Result<(OperatorMatrix, ScalarIdentityCheck)> {
    let m = commutator_matrix(op_a, op_b, n_cap)?;
    let (rows, cols) = m.entries().shape();
    let mut scale = DMatrix::from_element(rows, cols, 0.0f64);
    for n in 0..cols {
        let zn = TaylorSeries::monomial(n);
        let ab = op_a.apply(&op_b.apply(&zn)?)?;
        let ba = op_b.apply(&op_a.apply(&zn)?)?;
        for r in 0..rows {
            scale[(r, n)] = ab.coeff(r).norm() + ba.coeff(r).norm();
        }
    }
    let check = scalar_identity_check(m.entries(), Some(&scale));
    Ok((m, check))
}

/// Deviation of a matrix from `a·I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarIdentityCheck {
    #[serde(with = "pair")]
    pub a: C64,
    pub off_diagonal_max: f64,
    pub diagonal_spread: f64,
}

/// Estimate `a` as the mean diagonal and measure how far `m` is from `a·I`.
/// Deviations of each entry are divided by `max(1, scale[row, col])` when a
/// scale matrix is supplied.
pub fn scalar_identity_check(m: &DMatrix<C64>, scale: Option<&DMatrix<f64>>) -> ScalarIdentityCheck {
    let diag_len = m.nrows().min(m.ncols());
    let mut sum = C64::default();
    for i in 0..diag_len {
        sum += m[(i, i)];
    }
    let a = if diag_len > 0 { sum / diag_len as f64 } else { C64::default() };
    let norm = |r: usize, c: usize| scale.map_or(1.0, |s| s[(r, c)].max(1.0));
    let mut off = 0.0f64;
    let mut spread = 0.0f64;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if r == c {
                spread = spread.max((m[(r, c)] - a).norm() / norm(r, c));
            } else {
                off = off.max(m[(r, c)].norm() / norm(r, c));
            }
        }
    }
    ScalarIdentityCheck { a, off_diagonal_max: off, diagonal_spread: spread }
}

/// Outcome of [`decompose`].
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub operator: WeylOperator,
    pub commutator: ScalarIdentityCheck,
    /// Largest relative deviation of `T + azI` from the constant-coefficient
    /// image pattern.
    pub convolution_deviation: f64,
}

/// Recover `T = M − azI` from the monomial action of an unknown operator.
///
/// The commutator `[T, D]` is read off the columns (`[T,D]z^n = n T z^{n−1}
/// − D T z^n`); if it is `a·I`, `M = T + azI` must commute with `D`, so
/// `d_k = (M z^k)(0)/k!` and every column of `M` is checked against
/// `M z^n = Σ d_k n!/(n−k)! z^{n−k}`.
pub fn decompose(matrix: &OperatorMatrix) -> Result<Decomposition> {
    let n_cap = matrix.n_cap();
    let rows = matrix.entries().nrows().saturating_sub(1).max(1);
    let cols = n_cap + 1;
    let mut comm = DMatrix::from_element(rows, cols, C64::default());
    let mut scale = DMatrix::from_element(rows, cols, 0.0f64);
    for n in 0..cols {
        for r in 0..rows {
            let left = if n > 0 { matrix.get(r, n - 1) * n as f64 } else { C64::default() };
            let right = matrix.get(r + 1, n) * (r + 1) as f64;
            comm[(r, n)] = left - right;
            scale[(r, n)] = left.norm() + right.norm();
        }
    }
    let check = scalar_identity_check(&comm, Some(&scale));
    if check.off_diagonal_max > DECOMPOSE_TOL || check.diagonal_spread > DECOMPOSE_TOL {
        return Err(Error::NotWeyl { off_diagonal: check.off_diagonal_max, diagonal_spread: check.diagonal_spread });
    }
    let a = check.a;
    let m_entry = |r: usize, n: usize| {
        let shift = if r == n + 1 { a } else { C64::default() };
        matrix.get(r, n) + shift
    };
    let d: Vec<C64> = (0..cols).map(|k| m_entry(0, k) / falling_factorial(k, k)).collect();
    let tiny = DECOMPOSE_TOL * d.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let d: Vec<C64> = d.into_iter().map(|c| if c.norm() <= tiny { C64::default() } else { c }).collect();

    let mut worst = 0.0f64;
    for n in 0..cols {
        for r in 0..matrix.entries().nrows() {
            let predicted = if r <= n { d[n - r] * falling_factorial(n, n - r) } else { C64::default() };
            let dev = (m_entry(r, n) - predicted).norm() / predicted.norm().max(matrix.get(r, n).norm()).max(1.0);
            if dev > DECOMPOSE_TOL {
                return Err(Error::InconsistentConvolution { column: n, row: r, deviation: dev });
            }
            worst = worst.max(dev);
        }
    }
    let m = ConvolutionOperator::new(d)?;
    Ok(Decomposition { operator: WeylOperator::new(m, a), commutator: check, convolution_deviation: worst })
}

/// Residuals of `T f^{(n)} = a n f^{(n−1)}` on a disk.
pub fn ladder_check(t: &WeylOperator, f: &TaylorSeries, n_max: usize, disk: &crate::series::DiskSpec) -> Result<Vec<f64>> {
    let tf = t.apply(f)?;
    let base = tf.disk_sup_norm(disk);
    if base > crate::kernel::KERNEL_THRESHOLD {
        return Err(Error::KernelResidualTooLarge { residual: base, threshold: crate::kernel::KERNEL_THRESHOLD });
    }
    let mut out = vec![base];
    let mut prev = f.clone();
    for n in 1..=n_max {
        let deriv = prev.differentiate(1)?;
        let lhs = t.apply(&deriv)?;
        let diff = linear_combine(&[(one(), &lhs), (-t.a * n as f64, &prev)])?;
        out.push(diff.disk_sup_norm(disk));
        prev = deriv;
    }
    Ok(out)
}

// --- operator JSON: {"d": [[re,im],...], "a": [re,im], "L": [[re,im],...]}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<SpecPoly>,
    #[serde(with = "pair", default)]
    pub a: C64,
    #[serde(with = "pairs")]
    pub d: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpecPoly(#[serde(with = "pairs")] pub Vec<C64>);

/// A parsed operator: `T` alone or `L(T)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ParsedOperator {
    Weyl(WeylOperator),
    Composite(CompositeOperator),
}

impl ParsedOperator {
    pub fn base(&self) -> &WeylOperator {
        match self {
            ParsedOperator::Weyl(t) => t,
            ParsedOperator::Composite(c) => &c.base,
        }
    }

    /// `L(T)`, with `L(λ) = λ` when none was given.
    pub fn composite(&self) -> CompositeOperator {
        match self {
            ParsedOperator::Weyl(t) => CompositeOperator::identity_of(t.clone()),
            ParsedOperator::Composite(c) => c.clone(),
        }
    }
}

impl OperatorSpec {
    pub fn into_operator(self) -> Result<ParsedOperator> {
        if self.d.is_empty() {
            return Err(Error::MalformedSpec("field \"d\" must be a non-empty list of [re, im] pairs".into()));
        }
        let base = WeylOperator::new(ConvolutionOperator::new(self.d)?, self.a);
        match self.l {
            None => Ok(ParsedOperator::Weyl(base)),
            Some(SpecPoly(l)) if l.is_empty() => {
                Err(Error::MalformedSpec("field \"L\" must be non-empty when present".into()))
            }
            Some(SpecPoly(l)) => Ok(ParsedOperator::Composite(CompositeOperator::new(base, l)?)),
        }
    }

    pub fn from_operator(op: &ParsedOperator) -> Self {
        let base = op.base();
        OperatorSpec {
            d: base.m.coeffs().to_vec(),
            a: base.a,
            l: match op {
                ParsedOperator::Weyl(_) => None,
                ParsedOperator::Composite(c) => Some(SpecPoly(c.l().to_vec())),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::DiskSpec;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn d_minus_z() -> WeylOperator {
        WeylOperator::from_real(&[0.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn zero_convolution_rejected() {
        assert!(matches!(ConvolutionOperator::from_real(&[0.0, 0.0]), Err(Error::ZeroOperator)));
        assert_eq!(ConvolutionOperator::from_real(&[1.0, 2.0, 0.0]).unwrap().order(), 1);
    }

    #[test]
    fn apply_conv_examples() {
        let z2 = TaylorSeries::monomial(2);
        let dz2 = ConvolutionOperator::derivative(1).apply(&z2).unwrap();
        assert_eq!(dz2.coeffs()[..2], [c(0.0), c(2.0)]);
        let g = TaylorSeries::gaussian(c(0.5), 30);
        assert_eq!(ConvolutionOperator::identity().apply(&g).unwrap().coeffs(), g.coeffs());
        let short = TaylorSeries::from_real(&[1.0, 1.0], "").unwrap();
        assert!(matches!(
            ConvolutionOperator::derivative(2).apply(&short),
            Err(Error::OrderExhausted { .. })
        ));
    }

    #[test]
    fn apply_weyl_examples() {
        let t = d_minus_z();
        let g = TaylorSeries::gaussian(c(0.5), 60);
        let r = t.apply(&g).unwrap();
        for n in 0..r.valid_order() {
            assert!(r.coeff(n).norm() <= 1e-10, "n={n}");
        }
        let one = TaylorSeries::real_polynomial(&[1.0], "").unwrap();
        let img = t.apply(&one).unwrap();
        assert_eq!(img.coeffs(), &[c(0.0), c(-1.0)]);
    }

    #[test]
    fn composite_horner_matches_expanded_operator_five() {
        // L(λ)=λ²+λ, T = D − z: L(T) = D² + (2z−1)D + (z²−z−1)I
        let comp = CompositeOperator::new(d_minus_z(), vec![c(0.0), c(1.0), c(1.0)]).unwrap();
        let one = TaylorSeries::real_polynomial(&[1.0], "").unwrap();
        let horner = comp.apply(&one).unwrap();
        let expanded = comp.apply_expanded(&one).unwrap();
        // T(1) = −z, T²(1) = −1 + z², sum z² − z − 1
        let want = [c(-1.0), c(-1.0), c(1.0)];
        for n in 0..3 {
            assert!((horner.coeff(n) - want[n]).norm() <= 1e-12);
            assert!((expanded.coeff(n) - want[n]).norm() <= 1e-12);
        }
        for n in 3..horner.len() {
            assert_eq!(horner.coeff(n), C64::default());
        }
        // L(T) = id when L(λ)=λ
        let id = CompositeOperator::identity_of(d_minus_z());
        let g = TaylorSeries::gaussian(c(0.5), 30);
        assert_eq!(id.apply(&g).unwrap().coeffs(), d_minus_z().apply(&g).unwrap().coeffs());
    }

    #[test]
    fn monomial_matrices() {
        let d = matrix_on_monomials(&ConvolutionOperator::derivative(1), 2).unwrap();
        assert_eq!(d.get(0, 0), c(0.0));
        assert_eq!(d.get(0, 1), c(1.0));
        assert_eq!(d.get(1, 2), c(2.0));
        let z = matrix_on_monomials(&MultiplicationOperator::monomial(1), 1).unwrap();
        assert_eq!(z.get(1, 0), c(1.0));
        assert_eq!(z.get(2, 1), c(1.0));
        let t = matrix_on_monomials(&d_minus_z(), 3).unwrap();
        assert_eq!(t.entries().nrows(), 5);
        for n in 0..=3 {
            for r in 0..5 {
                let mut want = C64::default();
                if n >= 1 && r == n - 1 {
                    want += c(n as f64);
                }
                if r == n + 1 {
                    want -= c(1.0);
                }
                assert_eq!(t.get(r, n), want, "r={r} n={n}");
            }
        }
    }

    #[test]
    fn commutator_examples() {
        let dd = ConvolutionOperator::derivative(1);
        let m = commutator_matrix(&d_minus_z(), &dd, 11).unwrap();
        let chk = scalar_identity_check(m.entries(), None);
        assert_eq!(chk.off_diagonal_max, 0.0);
        assert!((chk.a - c(1.0)).norm() < 1e-14);

        let conv = ConvolutionOperator::from_real(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        let m = commutator_matrix(&conv, &dd, 10).unwrap();
        assert!(m.entries().iter().all(|x| x.norm() == 0.0));

        let t2 = WeylOperator::from_real(&[0.0, 1.0], 2.0).unwrap();
        let m = commutator_matrix(&t2, &dd, 10).unwrap();
        let chk = scalar_identity_check(m.entries(), None);
        assert!((chk.a - c(2.0)).norm() < 1e-14);
        assert!(chk.diagonal_spread < 1e-13);
    }

    #[test]
    fn decompose_examples() {
        let mat = matrix_on_monomials(&d_minus_z(), 16).unwrap();
        let dec = decompose(&mat).unwrap();
        assert!((dec.operator.a - c(1.0)).norm() < 1e-12);
        assert_eq!(dec.operator.m.coeffs(), &[c(0.0), c(1.0)]);

        let mat = matrix_on_monomials(&ConvolutionOperator::derivative(2), 16).unwrap();
        let dec = decompose(&mat).unwrap();
        assert_eq!(dec.operator.a, C64::default());
        assert_eq!(dec.operator.m.order(), 2);

        let mat = matrix_on_monomials(&MultiplicationOperator::monomial(2), 16).unwrap();
        assert!(matches!(decompose(&mat), Err(Error::NotWeyl { .. })));
    }

    #[test]
    fn decompose_flags_inconsistent_convolution() {
        // D − zI with one perturbed entry that keeps [T, D] scalar is hard to
        // build; perturbing d_1 in one column breaks the commutator instead.
        let mut entries = matrix_on_monomials(&d_minus_z(), 8).unwrap().entries().clone();
        entries[(0, 1)] += c(0.5);
        let mat = OperatorMatrix::from_entries(entries).unwrap();
        assert!(decompose(&mat).is_err());
    }

    #[test]
    fn ladder_examples() {
        let t = d_minus_z();
        let g = TaylorSeries::gaussian(c(0.5), 60);
        let res = ladder_check(&t, &g, 5, &DiskSpec::unit()).unwrap();
        assert_eq!(res.len(), 6);
        assert!(res.iter().all(|&r| r <= 1e-8), "{res:?}");
        let e = TaylorSeries::exponential(c(1.0), 30);
        assert!(matches!(ladder_check(&t, &e, 2, &DiskSpec::unit()), Err(Error::KernelResidualTooLarge { .. })));
    }

    #[test]
    fn spec_json() {
        let spec: OperatorSpec = serde_json::from_str(r#"{"d":[[0,0],[1,0]],"a":[1,0]}"#).unwrap();
        let op = spec.into_operator().unwrap();
        assert_eq!(op, ParsedOperator::Weyl(d_minus_z()));
        let spec: OperatorSpec = serde_json::from_str(r#"{"d":[[0,0]]}"#).unwrap();
        assert!(matches!(spec.into_operator(), Err(Error::ZeroOperator)));
        let spec: OperatorSpec =
            serde_json::from_str(r#"{"d":[[0,0],[1,0]],"a":[1,0],"L":[[0,0],[1,0],[1,0]]}"#).unwrap();
        let op = spec.clone().into_operator().unwrap();
        assert_eq!(OperatorSpec::from_operator(&op), spec);
    }
}
