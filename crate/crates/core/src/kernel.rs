//! Formal power-series solutions of `T f = 0` for `T = M − azI`.
//!
//! Matching the coefficient of `z^n` in `Σ d_k f^{(k)} = a z f` gives
//! `Σ_k d_k (n+k)!/n! c_{n+k} = a c_{n−1}`; since `d_p ≠ 0` this determines
//! `c_{n+p}` from lower coefficients. The `p` initial segments `e_0..e_{p−1}`
//! produce a basis whose initial-condition matrix is the identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Operator, WeylOperator};
use crate::series::{falling_factorial, DiskSpec, NeumaierSum, TaylorSeries, C64};

/// Unit-disk sup-norm threshold for treating a series as a kernel element.
pub const KERNEL_THRESHOLD: f64 = 1e-8;

/// The recurrence stops once a coefficient exceeds this magnitude.
pub const OVERFLOW_GUARD: f64 = 1e150;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBasis {
    pub solutions: Vec<TaylorSeries>,
    pub residuals: Vec<f64>,
    /// Entirety is evidenced numerically, not proven.
    pub formal: bool,
    /// Set when the overflow guard cut a solution short.
    pub truncated_by_guard: bool,
}

pub fn kernel_basis(t: &WeylOperator, n_terms: usize) -> Result<KernelBasis> {
    let p = t.order();
    if p == 0 {
        return Err(Error::ZeroOrderOperator);
    }
    if t.a == C64::default() {
        return Err(Error::ConvolutionCase);
    }
    if n_terms < p + 2 {
        return Err(Error::InvalidArgument(format!("n_terms {n_terms} < order + 2 = {}", p + 2)));
    }
    let d = t.m.coeffs();
    let disk = DiskSpec::unit();
    let mut solutions = Vec::with_capacity(p);
    let mut residuals = Vec::with_capacity(p);
    let mut guarded = false;
    for j in 0..p {
        let mut c = vec![C64::default(); n_terms];
        c[j] = C64::new(1.0, 0.0);
        let mut len = n_terms;
        for n in 0..n_terms - p {
            let mut rhs = NeumaierSum::default();
            if n > 0 {
                rhs.add(t.a * c[n - 1]);
            }
            for k in 0..p {
                rhs.add(-(d[k] * c[n + k] * falling_factorial(n + k, k)));
            }
            let next = rhs.total().fdiv(d[p] * falling_factorial(n + p, p));
            if !(next.norm() <= OVERFLOW_GUARD) {
                len = n + p;
                guarded = true;
                break;
            }
            c[n + p] = next;
        }
        c.truncate(len.max(p));
        let f = TaylorSeries::new(c, format!("kernel[{j}]"))?;
        residuals.push(kernel_residual(t, &f, &disk)?);
        solutions.push(f);
    }
    Ok(KernelBasis { solutions, residuals, formal: true, truncated_by_guard: guarded })
}

/// `sup_{|z|=R} |T f|`.
pub fn kernel_residual(t: &WeylOperator, f: &TaylorSeries, disk: &DiskSpec) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    Ok(t.apply(f)?.disk_sup_norm(disk))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn gaussian_kernel() {
        let t = WeylOperator::from_real(&[0.0, 1.0], 1.0).unwrap();
        let b = kernel_basis(&t, 41).unwrap();
        assert_eq!(b.solutions.len(), 1);
        let f = &b.solutions[0];
        let mut fact = 1.0;
        for k in 0..=20 {
            if k > 0 {
                fact *= k as f64;
            }
            let want = 1.0 / (2f64.powi(k as i32) * fact);
            assert!((f.coeff(2 * k) - c(want)).norm() <= 1e-12 * want);
            if 2 * k + 1 < 41 {
                assert_eq!(f.coeff(2 * k + 1), C64::default());
            }
        }
        assert!(b.residuals[0] <= 1e-10);
    }

    #[test]
    fn half_gaussian_kernel() {
        // 2f' = zf  =>  f = e^{z²/4}
        let t = WeylOperator::from_real(&[0.0, 2.0], 1.0).unwrap();
        let f = &kernel_basis(&t, 40).unwrap().solutions[0];
        let oracle = TaylorSeries::gaussian(c(0.25), 40);
        for n in 0..40 {
            assert!((f.coeff(n) - oracle.coeff(n)).norm() <= 1e-15);
        }
    }

    #[test]
    fn airy_kernel() {
        let t = WeylOperator::from_real(&[0.0, 0.0, 1.0], 1.0).unwrap();
        let b = kernel_basis(&t, 40).unwrap();
        assert_eq!(b.solutions.len(), 2);
        assert_eq!(b.solutions[0].coeff(0), c(1.0));
        assert_eq!(b.solutions[0].coeff(1), c(0.0));
        assert_eq!(b.solutions[1].coeff(0), c(0.0));
        assert_eq!(b.solutions[1].coeff(1), c(1.0));
        assert!(b.residuals.iter().all(|&r| r <= 1e-10), "{:?}", b.residuals);
    }

    #[test]
    fn error_paths() {
        let t0 = WeylOperator::from_real(&[2.0], 1.0).unwrap();
        assert!(matches!(kernel_basis(&t0, 10), Err(Error::ZeroOrderOperator)));
        let conv = WeylOperator::from_real(&[0.0, 1.0], 0.0).unwrap();
        assert!(matches!(kernel_basis(&conv, 10), Err(Error::ConvolutionCase)));
        let t = WeylOperator::from_real(&[0.0, 1.0], 1.0).unwrap();
        assert!(kernel_basis(&t, 2).is_err());
    }

    #[test]
    fn overflow_guard_cuts_prefix() {
        // 1e-3 f' = z f: c_{2k} = 500^k / k! peaks near e^{500}
        let t = WeylOperator::from_real(&[0.0, 1e-3], 1.0).unwrap();
        let b = kernel_basis(&t, 1200).unwrap();
        assert!(b.truncated_by_guard);
        assert!(b.solutions[0].len() < 1200);
        assert!(b.solutions[0].coeffs().iter().all(|c| c.norm() <= OVERFLOW_GUARD));
    }

    #[test]
    fn residual_examples() {
        let t = WeylOperator::from_real(&[0.0, 1.0], 1.0).unwrap();
        let disk = DiskSpec::unit();
        let e = TaylorSeries::exponential(c(1.0), 40);
        assert!(kernel_residual(&t, &e, &disk).unwrap() >= 0.1);
        assert_eq!(kernel_residual(&t, &TaylorSeries::zero(), &disk).unwrap(), 0.0);
    }
}
