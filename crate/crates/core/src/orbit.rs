//! Explicit approximate hypercyclic vectors for `A = L(T)`.
//!
//! The vector is a finite eigen-expansion `f = Σ_j u_j`,
//! `u_j = Σ_i w_{j,i} ℓ_{j,i}^{−n_j} f_{λ_{j,i}}` with `ℓ = L_a(λ)` and
//! `|ℓ| > 1`. Since `A^n u_j = Σ_i w_{j,i} ℓ^{n−n_j} f_λ`, block `j` is
//! damped at every earlier time `n_k < n_j` and block `j` reproduces the
//! fit `Σ_i w_{j,i} f_{λ_{j,i}}` at time `n_j`. Blocks from earlier targets
//! keep growing, so target `j` is fit after subtracting `A^{n_j}` of all
//! earlier blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::{fit_members, verification_grid, EigenFamily, LambdaSet, DEFAULT_RIDGE};
use crate::error::{Error, Result};
use crate::operator::{CompositeOperator, Operator};
use crate::series::{linear_combine, pairs, DiskSpec, TaylorSeries, C64};

pub const MAX_TARGET_DEGREE: usize = 32;
pub const DEFAULT_SCHEDULE_CAP: usize = 200;
pub const DEFAULT_DIRECT_CAP: usize = 40;
pub const DEFAULT_GAP_FACTOR: f64 = 1.25;
/// Largest method discrepancy at which the direct and bookkeeping routes
/// count as agreeing.
pub const METHOD_AGREEMENT_TOL: f64 = 1e-6;
/// Radius beyond which the expanding-λ ray search gives up.
pub const SEARCH_RADIUS_CAP: f64 = 64.0;
const SEARCH_STEP: f64 = 1.0 / 64.0;

/// Eigenvalue of `c = L(T)` on the family member `f_λ` implied by `c`:
/// `L(aλ)` for `a ≠ 0`, `L(L_M(λ))` for a convolution base.
pub fn composite_eigenvalue(c: &CompositeOperator, lambda: C64) -> C64 {
    if c.base.a != C64::default() {
        c.l_a(lambda)
    } else {
        c.polynomial(c.base.m.characteristic(lambda))
    }
}

/// `count` points with `|ℓ(λ)| ≥ 1 + margin`, one per equispaced ray, each
/// at the smallest qualifying radius on its ray.
pub fn select_expanding_lambdas(c: &CompositeOperator, count: usize, margin: f64) -> Result<LambdaSet> {
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("margin {margin} must be positive")));
    }
    select_lambdas_above(c, count, 1.0 + margin)
}

/// As [`select_expanding_lambdas`] with an explicit modulus threshold.
pub fn select_lambdas_above(c: &CompositeOperator, count: usize, threshold: f64) -> Result<LambdaSet> {
    if c.is_constant() {
        return Err(Error::InvalidArgument("L must not be constant".into()));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    let modulus = |l: C64| composite_eigenvalue(c, l).norm();
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let dir = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / count as f64);
        let mut r = SEARCH_STEP;
        while r <= SEARCH_RADIUS_CAP && modulus(dir * r) < threshold {
            r += SEARCH_STEP;
        }
        if r > SEARCH_RADIUS_CAP {
            return Err(Error::SearchExhausted { threshold, radius_cap: SEARCH_RADIUS_CAP });
        }
        let (mut lo, mut hi) = ((r - SEARCH_STEP).max(0.0), r);
        if lo > 0.0 {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if modulus(dir * mid) >= threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        points.push(dir * hi);
    }
    LambdaSet::new(points, format!("{count} rays, |L_a| >= {threshold}"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitProblem {
    operator: CompositeOperator,
    pub family: EigenFamily,
    pub targets: Vec<TaylorSeries>,
    pub radius: f64,
    pub epsilon: f64,
}

impl OrbitProblem {
    pub fn new(
        operator: CompositeOperator,
        family: EigenFamily,
        targets: Vec<TaylorSeries>,
        radius: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if operator.is_constant() {
            return Err(Error::InvalidArgument("L must not be constant".into()));
        }
        if !(epsilon > 0.0) || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("need epsilon > 0 and radius > 0, got {epsilon}, {radius}")));
        }
        if targets.is_empty() {
            return Err(Error::InvalidArgument("at least one target is required".into()));
        }
        if let Some(j) = targets.iter().position(|q| q.len() > MAX_TARGET_DEGREE + 1) {
            return Err(Error::InvalidArgument(format!("target {j} has degree above {MAX_TARGET_DEGREE}")));
        }
        // targets are polynomials; exactness keeps corrections from being truncated
        let targets = targets
            .into_iter()
            .map(|q| if q.is_exact() { Ok(q) } else { TaylorSeries::polynomial(q.coeffs().to_vec(), q.label()) })
            .collect::<Result<Vec<_>>>()?;
        Ok(OrbitProblem { operator, family, targets, radius, epsilon })
    }

    pub fn operator(&self) -> &CompositeOperator {
        &self.operator
    }

    pub fn disk(&self) -> Result<DiskSpec> {
        DiskSpec::with_radius(self.radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub ridge: f64,
    pub schedule_cap: usize,
    pub direct_cap: usize,
    /// Block `j` draws its λ's from `|ℓ| ≥ (1 + margin)·growth^j`.
    pub block_growth: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            ridge: DEFAULT_RIDGE,
            schedule_cap: DEFAULT_SCHEDULE_CAP,
            direct_cap: DEFAULT_DIRECT_CAP,
            block_growth: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    #[serde(with = "pairs")]
    pub lambdas: Vec<C64>,
    #[serde(with = "pairs")]
    pub eigenvalues: Vec<C64>,
    #[serde(with = "pairs")]
    pub weights: Vec<C64>,
    pub n: usize,
    /// `min_i |ℓ_i|`.
    pub contraction: f64,
    /// `Σ_i |w_i| · max_i ‖f_{λ_i}‖`.
    pub mass: f64,
    pub fit_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub target: usize,
    pub n: usize,
    pub achieved_error: f64,
    /// `Σ_{j>k} contraction_j^{−(n_j−n_k)} · mass_j`.
    pub leakage_bound: f64,
    pub measured_leakage: f64,
    pub fit_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub n: usize,
    /// Sup-grid difference between direct application and eigen bookkeeping.
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitConstruction {
    pub f: TaylorSeries,
    pub schedule: Vec<usize>,
    pub blocks: Vec<Block>,
    pub report: Vec<TargetReport>,
    pub spot_check: Option<SpotCheck>,
}

fn members_of(family: &EigenFamily, lambdas: &[C64]) -> Vec<TaylorSeries> {
    lambdas.iter().map(|&l| family.member(l)).collect()
}

/// `ceil(gap·ln(mass·4m/ε)/ln ρ)`, at least 1.
fn required_gap(mass: f64, m: usize, epsilon: f64, contraction: f64, gap_factor: f64) -> f64 {
    let ratio = mass * 4.0 * m as f64 / epsilon;
    if ratio <= 1.0 {
        return 1.0;
    }
    (gap_factor * ratio.ln() / contraction.ln()).ceil().max(1.0)
}

/// `A^n (Σ blocks)` as a series, using eigenvalues only.
fn propagate(blocks: &[Block], members: &[Vec<TaylorSeries>], n: usize) -> Result<Option<TaylorSeries>> {
    let mut terms = Vec::new();
    for (b, mem) in blocks.iter().zip(members) {
        let power = n as i32 - b.n as i32;
        for ((w, ell), f) in b.weights.iter().zip(&b.eigenvalues).zip(mem) {
            terms.push((w * ell.powi(power), f));
        }
    }
    if terms.is_empty() {
        return Ok(None);
    }
    Ok(Some(linear_combine(&terms)?))
}

/// Values of `A^n (Σ blocks)` on `points`, using eigenvalues only.
fn propagate_values(blocks: &[Block], members: &[Vec<TaylorSeries>], n: usize, points: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::default(); points.len()];
    for (b, mem) in blocks.iter().zip(members) {
        let power = n as i32 - b.n as i32;
        for ((w, ell), f) in b.weights.iter().zip(&b.eigenvalues).zip(mem) {
            let coef = w * ell.powi(power);
            if coef == C64::default() {
                continue;
            }
            for (o, &z) in out.iter_mut().zip(points) {
                *o += coef * f.evaluate(z);
            }
        }
    }
    out
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn construct_orbit(problem: &OrbitProblem, lambda_count: usize, margin: f64, gap_factor: f64) -> Result<OrbitConstruction> {
    construct_orbit_with(problem, lambda_count, margin, gap_factor, &OrbitConfig::default())
}

pub fn construct_orbit_with(
    problem: &OrbitProblem,
    lambda_count: usize,
    margin: f64,
    gap_factor: f64,
    config: &OrbitConfig,
) -> Result<OrbitConstruction> {
    if !(margin > 0.0) || !(gap_factor > 0.0) {
        return Err(Error::InvalidArgument("margin and gap_factor must be positive".into()));
    }
    let op = problem.operator();
    let disk = problem.disk()?;
    let eps = problem.epsilon;
    let m = problem.targets.len();
    let mut blocks: Vec<Block> = Vec::with_capacity(m);
    let mut members: Vec<Vec<TaylorSeries>> = Vec::with_capacity(m);

    for (j, q) in problem.targets.iter().enumerate() {
        let threshold = (1.0 + margin) * config.block_growth.powi(j as i32);
        let lambdas = select_lambdas_above(op, lambda_count, threshold)?;
        let mem = members_of(&problem.family, lambdas.points());
        let eigenvalues: Vec<C64> =
            lambdas.points().iter().map(|&l| problem.family.composite_eigenvalue(op, l)).collect();
        let contraction = eigenvalues.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min);
        let max_norm = mem.iter().map(|f| f.disk_sup_norm(&disk)).fold(0.0, f64::max);
        let prev_n = blocks.last().map_or(0, |b| b.n);

        let mut n = match blocks.last() {
            None => prev_n + 1,
            Some(b) => prev_n + required_gap(b.mass, m, eps, contraction, gap_factor) as usize,
        };
        let block = loop {
            if n > config.schedule_cap {
                return Err(Error::ScheduleOverflow { target: j, requested: n, cap: config.schedule_cap });
            }
            let correction = match propagate(&blocks, &members, n)? {
                None => q.clone(),
                Some(past) => linear_combine(&[(C64::new(1.0, 0.0), q), (C64::new(-1.0, 0.0), &past)])?,
            };
            let fit = fit_members(&mem, &correction, &disk, config.ridge)?;
            if fit.residual_norm > eps / 2.0 {
                return Err(Error::BudgetExceeded {
                    target: j,
                    residual: fit.residual_norm,
                    budget: eps / 2.0,
                    stage: format!("fit in expanding span at n = {n}"),
                });
            }
            let mass = fit.weights.iter().map(|w| w.norm()).sum::<f64>() * max_norm;
            // the first block has no earlier time at which it must be damped
            let gap = if j == 0 { 1 } else { required_gap(mass, m, eps, contraction, gap_factor) as usize };
            if n - prev_n >= gap {
                break Block {
                    lambdas: lambdas.points().to_vec(),
                    eigenvalues: eigenvalues.clone(),
                    weights: fit.weights,
                    n,
                    contraction,
                    mass,
                    fit_residual: fit.residual_norm,
                };
            }
            n = prev_n + gap;
        };
        blocks.push(block);
        members.push(mem);
    }

    let f = synthesize(&blocks, &members)?;
    let grid = verification_grid(&disk);
    let mut report = Vec::with_capacity(m);
    for (k, q) in problem.targets.iter().enumerate() {
        let n = blocks[k].n;
        let values = propagate_values(&blocks, &members, n, &grid);
        let qv: Vec<C64> = grid.iter().map(|&z| q.evaluate(z)).collect();
        let later = propagate_values(&blocks[k + 1..], &members[k + 1..], n, &grid);
        report.push(TargetReport {
            target: k,
            n,
            achieved_error: sup_diff(&values, &qv),
            leakage_bound: blocks[k + 1..]
                .iter()
                .map(|b| b.contraction.powi(-((b.n - n) as i32)) * b.mass)
                .fold(0.0, |acc, x| acc + x),
            measured_leakage: later.iter().map(|v| v.norm()).fold(0.0, f64::max),
            fit_residual: blocks[k].fit_residual,
        });
    }

    let spot_check = match direct_powers(op, &f, &[blocks[0].n], config.direct_cap)? {
        Some(direct) => {
            let eig = propagate_values(&blocks, &members, blocks[0].n, &grid);
            let dv: Vec<C64> = grid.iter().map(|&z| direct[0].evaluate(z)).collect();
            Some(SpotCheck { n: blocks[0].n, discrepancy: sup_diff(&dv, &eig) })
        }
        None => None,
    };

    let construction = OrbitConstruction { f, schedule: blocks.iter().map(|b| b.n).collect(), blocks, report, spot_check };
    if let Some(bad) = construction.report.iter().find(|r| r.achieved_error > eps) {
        return Err(Error::BudgetExceeded {
            target: bad.target,
            residual: bad.achieved_error,
            budget: eps,
            stage: format!("verification at n = {}", bad.n),
        });
    }
    Ok(construction)
}

/// `f = Σ_j Σ_i w_{j,i} ℓ_{j,i}^{−n_j} f_{λ_{j,i}}`.
fn synthesize(blocks: &[Block], members: &[Vec<TaylorSeries>]) -> Result<TaylorSeries> {
    Ok(propagate(blocks, members, 0)?.unwrap_or_else(TaylorSeries::zero).with_label("orbit vector"))
}

/// `A^n f` for each requested `n` by repeated application, or `None` when
/// the largest `n` exceeds `cap` or the series runs out of valid order.
fn direct_powers(op: &CompositeOperator, f: &TaylorSeries, ns: &[usize], cap: usize) -> Result<Option<Vec<TaylorSeries>>> {
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let loss = op.degree() * op.base.order();
    if n_max > cap || (!f.is_exact() && n_max * loss >= f.valid_order()) {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(ns.len());
    let mut current = f.clone();
    let mut done = 0;
    for &n in ns {
        while done < n {
            current = op.apply(&current)?;
            done += 1;
        }
        out.push(current.clone());
    }
    Ok(Some(out))
}

impl OrbitConstruction {
    /// Rebuild `f` from the stored blocks, e.g. after editing weights.
    pub fn resynthesize(&mut self, family: &EigenFamily) -> Result<()> {
        let members: Vec<Vec<TaylorSeries>> = self.blocks.iter().map(|b| members_of(family, &b.lambdas)).collect();
        self.f = synthesize(&self.blocks, &members)?;
        Ok(())
    }

    /// Multiply every weight by an independent factor in `[1 − rel, 1 + rel]`.
    pub fn perturb_weights(&mut self, rel: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in &mut self.blocks {
            for w in &mut b.weights {
                *w *= 1.0 + rel * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub target: usize,
    pub n: usize,
    /// `sup |A^{n_j} f − q_j|` by eigen bookkeeping.
    pub eigen_error: f64,
    /// Same quantity by repeated application, when run.
    pub direct_error: Option<f64>,
    /// `sup |direct − bookkeeping|`, when the direct route was run.
    pub method_discrepancy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<VerifyEntry>,
    pub epsilon: f64,
    /// Every bookkeeping error is within `epsilon`.
    pub all_within_budget: bool,
    /// Every direct run agrees with bookkeeping within [`METHOD_AGREEMENT_TOL`].
    /// Repeated application loses roughly a factor `sqrt(N)/|λ|` per step to
    /// cancellation, so this tends to fail for large `n` even when the
    /// construction is sound.
    pub methods_agree: bool,
}

pub fn verify_orbit(construction: &OrbitConstruction, problem: &OrbitProblem) -> Result<VerificationReport> {
    verify_orbit_with(construction, problem, DEFAULT_DIRECT_CAP)
}

pub fn verify_orbit_with(construction: &OrbitConstruction, problem: &OrbitProblem, direct_cap: usize) -> Result<VerificationReport> {
    let op = problem.operator();
    let grid = verification_grid(&problem.disk()?);
    let members: Vec<Vec<TaylorSeries>> =
        construction.blocks.iter().map(|b| members_of(&problem.family, &b.lambdas)).collect();
    let direct_ns: Vec<usize> = construction.schedule.iter().copied().filter(|&n| n <= direct_cap).collect();
    let direct = direct_powers(op, &construction.f, &direct_ns, direct_cap)?;
    let mut entries = Vec::with_capacity(problem.targets.len());
    for (j, q) in problem.targets.iter().enumerate() {
        let n = construction.schedule.get(j).copied().unwrap_or(0);
        let qv: Vec<C64> = grid.iter().map(|&z| q.evaluate(z)).collect();
        let eig = propagate_values(&construction.blocks, &members, n, &grid);
        let eigen_error = sup_diff(&eig, &qv);
        let (direct_error, method_discrepancy) = match (&direct, direct_ns.iter().position(|&x| x == n)) {
            (Some(series), Some(pos)) => {
                let dv: Vec<C64> = grid.iter().map(|&z| series[pos].evaluate(z)).collect();
                (Some(sup_diff(&dv, &qv)), Some(sup_diff(&dv, &eig)))
            }
            _ => (None, None),
        };
        entries.push(VerifyEntry { target: j, n, eigen_error, direct_error, method_discrepancy });
    }
    let all_within_budget = entries.iter().all(|e| e.eigen_error <= problem.epsilon);
    let methods_agree = entries.iter().all(|e| e.method_discrepancy.is_none_or(|d| d <= METHOD_AGREEMENT_TOL));
    Ok(VerificationReport { entries, epsilon: problem.epsilon, all_within_budget, methods_agree })
}
