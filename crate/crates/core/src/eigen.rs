//! Eigenfunction families `f_λ = S_λ f₀` and translate-span fits.
//!
//! For `f₀ ∈ ker T` the ladder identity `T f₀^{(n)} = a n f₀^{(n−1)}` turns
//! the Taylor expansion of `S_λ f₀` into `T S_λ f₀ = aλ S_λ f₀`. When
//! `a = 0` the operator is a convolution and the exponentials `e^{λz}` play
//! the same role with eigenvalue `L(λ)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_residual, KERNEL_THRESHOLD};
use crate::operator::{CompositeOperator, Operator, WeylOperator};
use crate::series::{circle_points, linear_combine, pairs, DiskSpec, TaylorSeries, C64};

/// Interior collocation circles, as fractions of the disk radius.
pub const INTERIOR_RADII: [f64; 3] = [0.25, 0.5, 0.75];
pub const INTERIOR_POINTS: usize = 32;
/// Boundary points of the verification grid.
pub const VERIFY_POINTS: usize = 128;

/// Default ridge on column-normalized weights. Filter factors cut singular
/// values near `sqrt(ridge) = 1e-12`, a few hundred ulps above the SVD's own
/// backward error.
pub const DEFAULT_RIDGE: f64 = 1e-24;
pub const MAX_RIDGE: f64 = 1e-4;
/// Condition proxy above which the regularized system counts as singular,
/// about `1/ε²` for double precision.
pub const SINGULAR_CONDITION: f64 = 1e30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `f_λ = S_λ f₀`, `f₀ ∈ ker T`, eigenvalue `aλ`.
    Translate,
    /// `f_λ = e^{λz}`, eigenvalue `L_M(λ)`.
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenFamily {
    f0: TaylorSeries,
    #[serde(with = "crate::series::pair")]
    a: C64,
    kind: FamilyKind,
}

impl EigenFamily {
    /// Translates of a kernel element of `t` (`a ≠ 0`).
    pub fn translates(t: &WeylOperator, f0: TaylorSeries) -> Result<Self> {
        if t.a == C64::default() {
            return Err(Error::ConvolutionCase);
        }
        let residual = kernel_residual(t, &f0, &DiskSpec::unit())?;
        if !(residual <= KERNEL_THRESHOLD) {
            return Err(Error::KernelResidualTooLarge { residual, threshold: KERNEL_THRESHOLD });
        }
        Ok(EigenFamily { f0, a: t.a, kind: FamilyKind::Translate })
    }

    /// The natural family of `t`: translates of its first kernel solution
    /// with `order` terms, or exponentials when `a = 0`.
    pub fn for_operator(t: &WeylOperator, order: usize) -> Result<Self> {
        if t.a == C64::default() {
            return Ok(EigenFamily::exponential(order));
        }
        let basis = crate::kernel::kernel_basis(t, order)?;
        let f0 = basis.solutions.into_iter().next().expect("order >= 1 gives a solution");
        EigenFamily::translates(t, f0)
    }

    /// Exponentials `e^{λz}` truncated to `order` coefficients.
    pub fn exponential(order: usize) -> Self {
        EigenFamily {
            f0: TaylorSeries::exponential(C64::default(), order).with_label("exp(0z)"),
            a: C64::default(),
            kind: FamilyKind::Exponential,
        }
    }

    pub fn f0(&self) -> &TaylorSeries {
        &self.f0
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn member(&self, lambda: C64) -> TaylorSeries {
        match self.kind {
            FamilyKind::Translate => self.f0.translate(lambda),
            FamilyKind::Exponential => {
                if lambda == C64::default() {
                    self.f0.clone()
                } else {
                    TaylorSeries::exponential(lambda, self.f0.len())
                }
            }
        }
    }

    /// Eigenvalue of `t` on `f_λ`.
    pub fn eigenvalue(&self, t: &WeylOperator, lambda: C64) -> C64 {
        match self.kind {
            FamilyKind::Translate => t.a * lambda,
            FamilyKind::Exponential => t.m.characteristic(lambda),
        }
    }

    /// Eigenvalue of `L(T)` on `f_λ`.
    pub fn composite_eigenvalue(&self, c: &CompositeOperator, lambda: C64) -> C64 {
        c.polynomial(self.eigenvalue(&c.base, lambda))
    }
}

/// `f_λ` for the family.
pub fn eigenfunction(family: &EigenFamily, lambda: C64) -> TaylorSeries {
    family.member(lambda)
}

/// `sup |T f_λ − μ(λ) f_λ|` on the disk.
pub fn eigen_residual(t: &WeylOperator, family: &EigenFamily, lambda: C64, disk: &DiskSpec) -> Result<f64> {
    let f = family.member(lambda);
    let tf = t.apply(&f)?;
    let mu = family.eigenvalue(t, lambda);
    Ok(linear_combine(&[(C64::new(1.0, 0.0), &tf), (-mu, &f)])?.disk_sup_norm(disk))
}

/// `sup |L(T) f_λ − L(μ(λ)) f_λ|` on the disk.
pub fn composite_eigencheck(c: &CompositeOperator, family: &EigenFamily, lambda: C64, disk: &DiskSpec) -> Result<f64> {
    let f = family.member(lambda);
    let lf = c.apply(&f)?;
    let mu = family.composite_eigenvalue(c, lambda);
    Ok(linear_combine(&[(C64::new(1.0, 0.0), &lf), (-mu, &f)])?.disk_sup_norm(disk))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSet {
    #[serde(with = "pairs")]
    points: Vec<C64>,
    description: String,
}

impl LambdaSet {
    pub fn new(points: Vec<C64>, description: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty λ set".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.re.is_finite() && p.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("λ[{i}] is not finite")));
            }
            if points[..i].contains(p) {
                return Err(Error::InvalidArgument(format!("λ[{i}] = {p} is repeated")));
            }
        }
        Ok(LambdaSet { points, description: description.into() })
    }

    /// `{1/k : k = 1..count}`, accumulating at 0.
    pub fn reciprocal(count: usize) -> Result<Self> {
        Self::new(
            (1..=count).map(|k| C64::new(1.0 / k as f64, 0.0)).collect(),
            format!("1/k, k=1..{count}"),
        )
    }

    /// `{start + (end − start) k/count : k = 1..count}`.
    pub fn segment(start: C64, end: C64, count: usize) -> Result<Self> {
        Self::new(
            (1..=count).map(|k| start + (end - start) * (k as f64 / count as f64)).collect(),
            format!("k/{count} on segment [{start}, {end}]"),
        )
    }

    /// Complex Gaussian samples (σ = 0.5 per component) kept inside the unit disk.
    pub fn gaussian_disk(count: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.5).expect("valid sigma");
        let mut points = Vec::with_capacity(count);
        while points.len() < count {
            let p = C64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            if p.norm() < 1.0 && !points.contains(&p) {
                points.push(p);
            }
        }
        Self::new(points, format!("gaussian-random in unit disk, seed {seed}"))
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn prefix(&self, count: usize) -> Result<Self> {
        Self::new(self.points[..count.min(self.len())].to_vec(), format!("{} (first {count})", self.description))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(with = "pairs")]
    pub weights: Vec<C64>,
    /// Sup norm of `target − fit` on the verification circle.
    pub residual_norm: f64,
    /// `(σ_max² + μ) / (σ_min² + μ)` of the regularized system.
    pub condition_diag: f64,
    /// Ridge finally used, applied to column-normalized weights.
    pub ridge: f64,
    /// Regularized least-squares objective on the collocation grid.
    pub objective: f64,
}

/// Boundary circle (`disk.grid_points()` points) plus interior circles.
pub fn collocation_grid(disk: &DiskSpec) -> Vec<C64> {
    let mut pts = disk.boundary();
    for frac in INTERIOR_RADII {
        pts.extend(circle_points(frac * disk.radius(), INTERIOR_POINTS));
    }
    pts
}

pub fn verification_grid(disk: &DiskSpec) -> Vec<C64> {
    circle_points(disk.radius(), VERIFY_POINTS)
}

/// Tikhonov solution of `min ‖A w − b‖² + ridge·‖N w‖²`, where `N` holds
/// the column norms of `A`, computed by SVD filter factors on the
/// column-normalized matrix. Returns `(weights, condition, ridge, objective)`.
pub(crate) fn ridge_solve(a: &DMatrix<C64>, b: &DVector<C64>, ridge: f64) -> Result<(DVector<C64>, f64, f64, f64)> {
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge {ridge} must be finite and >= 0")));
    }
    if a.iter().chain(b.iter()).any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::SingularSystem { condition: f64::INFINITY, ridge });
    }
    let cols = a.ncols();
    let norms: Vec<f64> = (0..cols)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 { n } else { 1.0 }
        })
        .collect();
    let mut scaled_a = a.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled_a.column_mut(j).unscale_mut(*n);
    }
    let svd = scaled_a.svd(true, true);
    let sigma = &svd.singular_values;
    let s_max = sigma.iter().copied().fold(0.0, f64::max);
    if s_max == 0.0 {
        let objective = b.norm_squared();
        return Ok((DVector::from_element(cols, C64::default()), 1.0, ridge, objective));
    }
    let s_min = if sigma.len() < cols { 0.0 } else { sigma.iter().copied().fold(f64::INFINITY, f64::min) };
    let condition = |mu: f64| (s_max * s_max + mu) / (s_min * s_min + mu);
    let mut mu = ridge;
    while !(condition(mu) <= SINGULAR_CONDITION) {
        let next = if mu == 0.0 { DEFAULT_RIDGE } else { mu * 10.0 };
        if next > MAX_RIDGE * (1.0 + 1e-9) {
            return Err(Error::SingularSystem { condition: condition(mu), ridge: mu });
        }
        mu = next;
    }
    let u = svd.u.as_ref().expect("u computed");
    let v_t = svd.v_t.as_ref().expect("v_t computed");
    let utb = u.adjoint() * b;
    let mut filtered = DVector::from_element(sigma.len(), C64::default());
    for i in 0..sigma.len() {
        let s = sigma[i];
        if s > 0.0 {
            filtered[i] = utb[i] * (s / (s * s + mu));
        }
    }
    let v = v_t.adjoint() * filtered;
    let w = DVector::from_iterator(cols, v.iter().zip(&norms).map(|(x, n)| x / *n));
    let objective = (a * &w - b).norm_squared() + mu * v.norm_squared();
    Ok((w, condition(mu), mu, objective))
}

/// Values of every family member on `points`, one column per λ.
pub(crate) fn member_matrix(members: &[TaylorSeries], points: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(points.len(), members.len(), |r, c| members[c].evaluate(points[r]))
}

/// Fit `target` by `Σ w_i f_{λ_i}` on the collocation grid.
pub fn completeness_fit(
    family: &EigenFamily,
    lambdas: &LambdaSet,
    target: &TaylorSeries,
    disk: &DiskSpec,
    ridge: f64,
) -> Result<FitReport> {
    let members: Vec<TaylorSeries> = lambdas.points().iter().map(|&l| family.member(l)).collect();
    fit_members(&members, target, disk, ridge)
}

pub(crate) fn fit_members(members: &[TaylorSeries], target: &TaylorSeries, disk: &DiskSpec, ridge: f64) -> Result<FitReport> {
    let grid = collocation_grid(disk);
    let a = member_matrix(members, &grid);
    let b = DVector::from_iterator(grid.len(), grid.iter().map(|&z| target.evaluate(z)));
    let (w, condition_diag, ridge, objective) = ridge_solve(&a, &b, ridge)?;
    let weights: Vec<C64> = w.iter().copied().collect();
    let residual_norm = fit_residual(members, &weights, target, disk);
    Ok(FitReport { weights, residual_norm, condition_diag, ridge, objective })
}

/// Sup norm of `target − Σ w_i f_i` on the verification circle.
pub fn fit_residual(members: &[TaylorSeries], weights: &[C64], target: &TaylorSeries, disk: &DiskSpec) -> f64 {
    verification_grid(disk)
        .into_iter()
        .map(|z| {
            let fit: C64 = members.iter().zip(weights).map(|(f, w)| w * f.evaluate(z)).sum();
            (target.evaluate(z) - fit).norm()
        })
        .fold(0.0, f64::max)
}

/// Residuals of [`completeness_fit`] on nested prefixes of `lambdas`.
pub fn residual_curve(
    family: &EigenFamily,
    lambdas: &LambdaSet,
    sizes: &[usize],
    target: &TaylorSeries,
    disk: &DiskSpec,
    ridge: f64,
) -> Result<Vec<(usize, FitReport)>> {
    sizes
        .iter()
        .map(|&k| Ok((k, completeness_fit(family, &lambdas.prefix(k)?, target, disk, ridge)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ConvolutionOperator;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn gaussian_family(order: usize) -> (WeylOperator, EigenFamily) {
        let t = WeylOperator::from_real(&[0.0, 1.0], 1.0).unwrap();
        let fam = EigenFamily::translates(&t, TaylorSeries::gaussian(c(0.5), order)).unwrap();
        (t, fam)
    }

    #[test]
    fn family_validation() {
        let t = WeylOperator::from_real(&[0.0, 1.0], 1.0).unwrap();
        let bad = TaylorSeries::exponential(c(1.0), 40);
        assert!(matches!(EigenFamily::translates(&t, bad), Err(Error::KernelResidualTooLarge { .. })));
        let conv = WeylOperator::from_real(&[0.0, 1.0], 0.0).unwrap();
        assert!(EigenFamily::translates(&conv, TaylorSeries::gaussian(c(0.5), 40)).is_err());
    }

    #[test]
    fn eigenfunction_examples() {
        let (_, fam) = gaussian_family(100);
        assert_eq!(eigenfunction(&fam, C64::default()), *fam.f0());
        // e^{1/2} e^{z} e^{z²/2}
        let f1 = eigenfunction(&fam, c(1.0));
        let e = TaylorSeries::exponential(c(1.0), 100);
        let g = TaylorSeries::gaussian(c(0.5), 100);
        for m in 0..40 {
            let prod: C64 = (0..=m).map(|j| e.coeff(j) * g.coeff(m - j)).sum::<C64>() * 0.5f64.exp();
            assert!((f1.coeff(m) - prod).norm() <= 1e-12 * (1.0 + prod.norm()));
        }
        let ex = EigenFamily::exponential(30);
        let f2 = eigenfunction(&ex, c(2.0));
        let mut want = 1.0;
        for n in 0..30 {
            assert!((f2.coeff(n) - c(want)).norm() <= 1e-15 * want);
            want *= 2.0 / (n + 1) as f64;
        }
    }

    #[test]
    fn eigen_residual_examples() {
        let disk = DiskSpec::unit();
        let (t, fam) = gaussian_family(128);
        assert!(eigen_residual(&t, &fam, c(1.0), &disk).unwrap() <= 1e-7);
        let r0 = eigen_residual(&t, &fam, C64::default(), &disk).unwrap();
        assert_eq!(r0, kernel_residual(&t, fam.f0(), &disk).unwrap());
        let d = WeylOperator::new(ConvolutionOperator::derivative(1), C64::default());
        let ex = EigenFamily::exponential(60);
        assert!(eigen_residual(&d, &ex, c(1.0), &disk).unwrap() <= 1e-10);
    }

    #[test]
    fn composite_eigencheck_examples() {
        let disk = DiskSpec::unit();
        let (t, fam) = gaussian_family(128);
        let comp = CompositeOperator::new(t.clone(), vec![c(0.0), c(1.0), c(1.0)]).unwrap();
        assert_eq!(comp.l_a(c(1.0)), c(2.0));
        assert!(composite_eigencheck(&comp, &fam, c(1.0), &disk).unwrap() <= 1e-6);
        assert!(composite_eigencheck(&comp, &fam, C64::default(), &disk).unwrap() <= 1e-10);
        let constant = CompositeOperator::new(t, vec![c(1.0)]).unwrap();
        assert_eq!(composite_eigencheck(&constant, &fam, c(0.5), &disk).unwrap(), 0.0);
    }

    #[test]
    fn lambda_sets() {
        assert!(LambdaSet::new(vec![c(1.0), c(1.0)], "").is_err());
        assert!(LambdaSet::new(vec![], "").is_err());
        let r = LambdaSet::reciprocal(5).unwrap();
        assert_eq!(r.points()[4], c(0.2));
        let s = LambdaSet::segment(c(0.0), c(1.0), 40).unwrap();
        assert_eq!(s.points()[39], c(1.0));
        let g1 = LambdaSet::gaussian_disk(12, 7).unwrap();
        let g2 = LambdaSet::gaussian_disk(12, 7).unwrap();
        assert_eq!(g1, g2);
        assert!(g1.points().iter().all(|p| p.norm() < 1.0));
    }

    #[test]
    fn fit_reproduces_family_member() {
        let (_, fam) = gaussian_family(60);
        let l0 = LambdaSet::new(vec![C64::default()], "{0}").unwrap();
        let rep = completeness_fit(&fam, &l0, fam.f0(), &DiskSpec::unit(), DEFAULT_RIDGE).unwrap();
        assert!((rep.weights[0] - c(1.0)).norm() < 1e-8);
        assert!(rep.residual_norm < 1e-8);
    }

    #[test]
    fn zero_target_gives_zero_weights() {
        let (_, fam) = gaussian_family(60);
        let rep = completeness_fit(&fam, &LambdaSet::reciprocal(8).unwrap(), &TaylorSeries::zero(), &DiskSpec::unit(), DEFAULT_RIDGE)
            .unwrap();
        assert!(rep.weights.iter().all(|w| w.norm() == 0.0));
        assert_eq!(rep.residual_norm, 0.0);
    }

    #[test]
    fn ridge_escalates_on_rank_deficiency() {
        let a = DMatrix::from_element(4, 2, c(1.0));
        let b = DVector::from_element(4, c(1.0));
        let (w, cond, r, _) = ridge_solve(&a, &b, 0.0).unwrap();
        assert!(r >= DEFAULT_RIDGE);
        assert!(cond <= SINGULAR_CONDITION);
        assert!((w[0] + w[1] - c(1.0)).norm() < 1e-6);
        let nan = DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0));
        assert!(matches!(ridge_solve(&nan, &DVector::from_element(2, c(1.0)), 0.0), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn nested_sets_do_not_increase_objective() {
        let (_, fam) = gaussian_family(100);
        let lam = LambdaSet::reciprocal(12).unwrap();
        let target = TaylorSeries::real_polynomial(&[0.0, 0.0, 1.0], "z^2").unwrap();
        let small = completeness_fit(&fam, &lam.prefix(3).unwrap(), &target, &DiskSpec::unit(), DEFAULT_RIDGE).unwrap();
        let large = completeness_fit(&fam, &lam.prefix(6).unwrap(), &target, &DiskSpec::unit(), DEFAULT_RIDGE).unwrap();
        assert!(large.objective <= small.objective + 1e-12);
    }
}
