//! Truncated Taylor series about the origin.
//!
//! A [`TaylorSeries`] stores `c_0..c_N` together with `valid_order`, the
//! number of leading coefficients that are still trustworthy after lossy
//! operations (differentiation of a truncation, translation, ...). Series
//! built with [`TaylorSeries::polynomial`] are *exact*: every coefficient
//! past the stored ones is known to be zero, so no operation loses order.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Working order used when nothing else is requested.
pub const DEFAULT_ORDER: usize = 128;

/// Boundary sample count used when nothing else is requested.
pub const DEFAULT_GRID_POINTS: usize = 64;

/// Relative significance floor used by the translation validity heuristic.
const TRANSLATE_SIGNIFICANCE: f64 = 1e3 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorSeries {
    coeffs: Vec<C64>,
    valid_order: usize,
    exact: bool,
    label: String,
    /// Accumulated translation distance; metadata only.
    shift: f64,
}

/// Closed disk `|z| <= radius`, sampled on its boundary circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskSpec {
    radius: f64,
    grid_points: usize,
}

impl DiskSpec {
    pub fn new(radius: f64, grid_points: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || grid_points < 8 {
            return Err(Error::InvalidDisk { radius, grid_points });
        }
        Ok(DiskSpec { radius, grid_points })
    }

    pub fn with_radius(radius: f64) -> Result<Self> {
        Self::new(radius, DEFAULT_GRID_POINTS)
    }

    pub fn unit() -> Self {
        DiskSpec { radius: 1.0, grid_points: DEFAULT_GRID_POINTS }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    /// Equispaced points `R e^{iθ_j}`, `θ_j = 2πj/G`.
    pub fn boundary(&self) -> Vec<C64> {
        circle_points(self.radius, self.grid_points)
    }
}

pub fn circle_points(radius: f64, count: usize) -> Vec<C64> {
    (0..count)
        .map(|j| C64::from_polar(radius, 2.0 * PI * j as f64 / count as f64))
        .collect()
}

fn check_finite(coeffs: &[C64]) -> Result<()> {
    match coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        Some(index) => Err(Error::NonFiniteCoefficient { index }),
        None => Ok(()),
    }
}

impl TaylorSeries {
    /// Truncation of an entire function: coefficients past the stored ones
    /// are unknown.
    pub fn new(coeffs: Vec<C64>, label: impl Into<String>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        check_finite(&coeffs)?;
        let valid_order = coeffs.len();
        Ok(TaylorSeries { coeffs, valid_order, exact: false, label: label.into(), shift: 0.0 })
    }

    /// A polynomial; every coefficient beyond `coeffs` is exactly zero.
    pub fn polynomial(coeffs: Vec<C64>, label: impl Into<String>) -> Result<Self> {
        let mut s = Self::new(coeffs, label)?;
        s.exact = true;
        Ok(s)
    }

    pub fn from_real(coeffs: &[f64], label: impl Into<String>) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect(), label)
    }

    pub fn real_polynomial(coeffs: &[f64], label: impl Into<String>) -> Result<Self> {
        Self::polynomial(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect(), label)
    }

    pub fn zero() -> Self {
        TaylorSeries {
            coeffs: vec![C64::new(0.0, 0.0)],
            valid_order: 1,
            exact: true,
            label: String::new(),
            shift: 0.0,
        }
    }

    pub fn monomial(n: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
        coeffs[n] = C64::new(1.0, 0.0);
        TaylorSeries { coeffs, valid_order: n + 1, exact: true, label: format!("z^{n}"), shift: 0.0 }
    }

    /// Truncation of `e^{λz}` with `order` coefficients.
    pub fn exponential(lambda: C64, order: usize) -> Self {
        let order = order.max(1);
        let mut coeffs = Vec::with_capacity(order);
        let mut c = C64::new(1.0, 0.0);
        for n in 0..order {
            coeffs.push(c);
            c = c * lambda / (n as f64 + 1.0);
        }
        TaylorSeries { coeffs, valid_order: order, exact: false, label: format!("exp({lambda}z)"), shift: 0.0 }
    }

    /// Truncation of `e^{αz²}`: `c_{2k} = α^k / k!`.
    pub fn gaussian(alpha: C64, order: usize) -> Self {
        let order = order.max(1);
        let mut coeffs = vec![C64::new(0.0, 0.0); order];
        let mut c = C64::new(1.0, 0.0);
        let mut k = 0usize;
        while 2 * k < order {
            coeffs[2 * k] = c;
            k += 1;
            c = c * alpha / k as f64;
        }
        TaylorSeries { coeffs, valid_order: order, exact: false, label: format!("exp({alpha}z^2)"), shift: 0.0 }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> C64 {
        self.coeffs.get(n).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn valid_order(&self) -> usize {
        self.valid_order
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Keep at most `len` coefficients. Exact series become truncations if
    /// anything non-zero is dropped.
    pub fn truncate(mut self, len: usize) -> Self {
        let len = len.max(1);
        if len < self.coeffs.len() {
            if self.coeffs[len..].iter().any(|c| *c != C64::default()) {
                self.exact = false;
            }
            self.coeffs.truncate(len);
            self.valid_order = self.valid_order.min(len);
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == C64::default())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `k`-th derivative. Coefficient `n` of the result is `c_{n+k}(n+k)!/n!`.
    pub fn differentiate(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        if !self.exact && k >= self.valid_order {
            return Err(Error::OrderExhausted { requested: k, valid_order: self.valid_order });
        }
        if k >= self.coeffs.len() {
            // exact polynomial of degree < k
            let mut z = TaylorSeries::zero();
            z.label = self.label.clone();
            return Ok(z);
        }
        let coeffs: Vec<C64> = (0..self.coeffs.len() - k)
            .map(|n| self.coeffs[n + k] * falling_factorial(n + k, k))
            .collect();
        let valid_order = if self.exact { coeffs.len() } else { self.valid_order - k };
        Ok(TaylorSeries { coeffs, valid_order, exact: self.exact, label: self.label.clone(), shift: self.shift })
    }

    /// `S_λ f(z) = f(z + λ)`: `b_m = Σ_{n≥m} C(n,m) c_n λ^{n-m}`.
    ///
    /// Each `b_m` is summed with Neumaier compensation. The valid order is
    /// cut just past the largest `m` whose `|b_m|` exceeds `1e3·ε·Σ|terms|`
    /// (coefficients with no contributing terms count as significant).
    pub fn translate(&self, lambda: C64) -> Self {
        if lambda == C64::default() {
            return self.clone();
        }
        let len = self.coeffs.len();
        let mut coeffs = Vec::with_capacity(len);
        let mut last_significant = None;
        for m in 0..len {
            let mut sum = NeumaierSum::default();
            let mut weight = C64::new(1.0, 0.0);
            let mut magnitude = 0.0;
            for n in m..len {
                let term = self.coeffs[n] * weight;
                magnitude += term.norm();
                sum.add(term);
                weight = weight * lambda * ((n + 1) as f64 / (n + 1 - m) as f64);
            }
            let b = sum.total();
            if magnitude == 0.0 || b.norm() > TRANSLATE_SIGNIFICANCE * magnitude {
                last_significant = Some(m);
            }
            coeffs.push(b);
        }
        let valid_order = if self.exact {
            len
        } else {
            let cut = last_significant.map_or(1, |m| m + 1);
            self.valid_order.min(cut)
        };
        TaylorSeries {
            coeffs,
            valid_order,
            exact: self.exact,
            label: self.label.clone(),
            shift: self.shift + lambda.norm(),
        }
    }

    /// Compensated Horner evaluation of the stored polynomial.
    pub fn evaluate(&self, z: C64) -> C64 {
        compensated_horner(&self.coeffs, z)
    }

    pub fn evaluate_many(&self, points: &[C64]) -> Vec<C64> {
        points.iter().map(|&z| self.evaluate(z)).collect()
    }

    /// `max_j |f(R e^{iθ_j})|`.
    pub fn disk_sup_norm(&self, disk: &DiskSpec) -> f64 {
        disk.boundary().into_iter().map(|z| self.evaluate(z).norm()).fold(0.0, f64::max)
    }

    /// Product with the polynomial `p`; the result carries `deg p` more
    /// coefficients and keeps the valid order of `self`.
    pub fn multiply_by_poly(&self, p: &[C64]) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        let len = self.coeffs.len() + p.len() - 1;
        let mut coeffs = vec![C64::default(); len];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == C64::default() {
                continue;
            }
            for (j, &q) in p.iter().enumerate() {
                coeffs[i + j] += c * q;
            }
        }
        let valid_order = if self.exact { len } else { self.valid_order };
        Ok(TaylorSeries { coeffs, valid_order, exact: self.exact, label: self.label.clone(), shift: self.shift })
    }
}

/// `Σ α_i f_i`. Truncated terms bound the length and valid order of the
/// result; exact terms are zero-padded.
pub fn linear_combine(terms: &[(C64, &TaylorSeries)]) -> Result<TaylorSeries> {
    if terms.is_empty() {
        return Err(Error::EmptyCombination);
    }
    let truncated_len = terms.iter().filter(|(_, f)| !f.exact).map(|(_, f)| f.len()).min();
    let exact_len = terms.iter().filter(|(_, f)| f.exact).map(|(_, f)| f.len()).max();
    let len = match (truncated_len, exact_len) {
        (Some(t), Some(e)) => t.max(e),
        (Some(t), None) => t,
        (None, Some(e)) => e,
        (None, None) => unreachable!(),
    };
    let valid_order = terms
        .iter()
        .filter(|(_, f)| !f.exact)
        .map(|(_, f)| f.valid_order)
        .min()
        .unwrap_or(len);
    let mut coeffs = Vec::with_capacity(len);
    for n in 0..len {
        let mut sum = NeumaierSum::default();
        for (alpha, f) in terms {
            if f.exact || n < f.len() {
                sum.add(*alpha * f.coeff(n));
            }
        }
        coeffs.push(sum.total());
    }
    check_finite(&coeffs)?;
    Ok(TaylorSeries {
        coeffs,
        valid_order: valid_order.clamp(1, len),
        exact: truncated_len.is_none(),
        label: String::new(),
        shift: terms.iter().map(|(_, f)| f.shift).fold(0.0, f64::max),
    })
}

/// `n!/(n-k)!` as a float.
pub fn falling_factorial(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).fold(1.0, |acc, j| acc * j as f64)
}

/// Neumaier (improved Kahan–Babuška) summation on both components.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: C64,
    comp: C64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: C64) {
        let (re, ce) = neumaier_step(self.sum.re, x.re);
        let (im, ci) = neumaier_step(self.sum.im, x.im);
        self.sum = C64::new(re, im);
        self.comp += C64::new(ce, ci);
    }

    pub fn total(&self) -> C64 {
        self.sum + self.comp
    }
}

fn neumaier_step(sum: f64, x: f64) -> (f64, f64) {
    let t = sum + x;
    let c = if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
    (t, c)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Horner scheme with error-free transformations on every real product and
/// sum; the accumulated rounding errors are evaluated by a second plain
/// Horner pass and added back.
pub fn compensated_horner(coeffs: &[C64], z: C64) -> C64 {
    let mut s = C64::default();
    let mut err = C64::default();
    for &c in coeffs.iter().rev() {
        let (p1, e1) = two_prod(s.re, z.re);
        let (p2, e2) = two_prod(s.im, z.im);
        let (p3, e3) = two_prod(s.re, z.im);
        let (p4, e4) = two_prod(s.im, z.re);
        let (t_re, e5) = two_sum(p1, -p2);
        let (t_im, e6) = two_sum(p3, p4);
        let (r_re, e7) = two_sum(t_re, c.re);
        let (r_im, e8) = two_sum(t_im, c.im);
        let local = C64::new(e1 - e2 + e5 + e7, e3 + e4 + e6 + e8);
        err = err * z + local;
        s = C64::new(r_re, r_im);
    }
    s + err
}

// --- serde: {"coeffs": [[re, im], ...], "label": str, "valid_order": int}

pub(crate) mod pairs {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serializer, ser::SerializeSeq};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for c in v {
            seq.serialize_element(&[c.re, c.im])?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

pub(crate) mod pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &C64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }

    use serde::Serialize;
}

#[derive(Serialize, Deserialize)]
struct SeriesRepr {
    #[serde(with = "pairs")]
    coeffs: Vec<C64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    exact: bool,
    #[serde(default)]
    label: String,
    #[serde(default)]
    valid_order: Option<usize>,
}

impl Serialize for TaylorSeries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesRepr {
            coeffs: self.coeffs.clone(),
            exact: self.exact,
            label: self.label.clone(),
            valid_order: Some(self.valid_order),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TaylorSeries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SeriesRepr::deserialize(d)?;
        let mut s = if repr.exact {
            TaylorSeries::polynomial(repr.coeffs, repr.label)
        } else {
            TaylorSeries::new(repr.coeffs, repr.label)
        }
        .map_err(D::Error::custom)?;
        if let Some(v) = repr.valid_order {
            if v == 0 || v > s.len() {
                return Err(D::Error::custom(format!(
                    "valid_order {v} outside 1..={}",
                    s.len()
                )));
            }
            if !s.exact {
                s.valid_order = v;
            }
        }
        Ok(s)
    }
}
