//! Communication covariance design.
//!
//! One solver handles every weighted-interference problem
//!
//! ```text
//! min  sum_l Tr(W_l G2 R_xl G2^H)
//! s.t. (1/L) sum_l log2|I + R_wl^{-1} H R_xl H^H| >= C,  sum_l Tr(R_xl) <= P_t
//! ```
//!
//! by bisection on the power multiplier `lambda1`. For a fixed `lambda1` the
//! per-symbol subproblems have a water-filling closed form whose common
//! water level `lambda2` is found exactly.

use crate::error::{Error, Result};
use crate::interference::{average_capacity, weighted_interference, CovarianceSchedule, NoiseCovSchedule, WeightSchedule};
use crate::num::{creal, frob2, inv_sqrt, trace_re, CMat, HermitianEigen, RVec, Real, Svd};

/// Lagrange multipliers of the power (`lambda1`) and capacity (`lambda2`)
/// constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint<T: Real> {
    pub lambda1: T,
    pub lambda2: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSolution<T: Real> {
    pub schedule: CovarianceSchedule<T>,
    pub dual: DualPoint<T>,
    /// Bits per symbol, averaged over the block.
    pub achieved_capacity: T,
    pub consumed_power: T,
    /// Value of the weighted objective the solution was designed for
    /// (zero for the selfish design until the caller evaluates a metric).
    pub objective_eip: T,
    /// Dual evaluations spent.
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bisection stops once `lambda_u - lambda_l <= delta_lambda`.
    pub delta_lambda: f64,
    pub max_doublings: usize,
    pub max_bisections: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            delta_lambda: 1e-8,
            max_doublings: 200,
            max_bisections: 400,
        }
    }
}

/// Smallest `lambda2 >= 0` with `sum_i (log2(lambda2 sigma_i^2))^+ >= L C`.
///
/// Exact: the active set is found by sorting, then the water level solves
/// `k log2(lambda2) + sum_{i<=k} log2(sigma_i^2) = L C`.
pub fn min_capacity_multiplier<T: Real>(sigmas: &[T], c: T, l: usize) -> Result<T> {
    let target = c * T::lit(l as f64);
    if target <= T::zero() {
        return Ok(T::zero());
    }
    let mut g: Vec<T> = sigmas.iter().map(|&s| s * s).filter(|&g| g > T::zero()).collect();
    if g.is_empty() {
        return Err(Error::Infeasible("every channel gain is zero".into()));
    }
    g.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut sum_log = T::zero();
    let mut level = T::zero();
    for k in 0..g.len() {
        sum_log += g[k].log2();
        let log_level = (target - sum_log) / T::lit((k + 1) as f64);
        level = T::lit(2.0).powf(log_level);
        if k + 1 == g.len() || level * g[k + 1] <= T::one() {
            break;
        }
    }
    // Round-off can leave the sum a hair under the target; aim a summation
    // error above it so the level holds in any summation order.
    let want = target * (T::one() + <T as Real>::epsilon() * T::lit((g.len() + 2) as f64));
    for _ in 0..64 {
        let cap = water_capacity(&g, level);
        if cap >= want {
            break;
        }
        let active = g.iter().filter(|&&x| level * x > T::one()).count().max(1);
        let step = T::lit(2.0).powf((want - cap) / T::lit(active as f64));
        level *= step * (T::one() + T::lit(4.0) * <T as Real>::epsilon());
    }
    Ok(level)
}

/// `sum_i (log2(lambda2 g_i))^+` over squared gains `g_i`.
pub fn water_capacity<T: Real>(gains: &[T], lambda2: T) -> T {
    gains
        .iter()
        .fold(T::zero(), |acc, &g| acc + (lambda2 * g).log2().max(T::zero()))
}

/// Per-symbol data that does not depend on the multipliers.
struct SymbolData<T: Real> {
    /// `R_w^{-1/2} H`
    hw: CMat<T>,
    /// Eigen-decomposition of `G2^H W G2`.
    a: HermitianEigen<T>,
}

/// Per-symbol state at one `lambda1`.
struct SymbolEval<T: Real> {
    phi_isqrt: CMat<T>,
    sigmas: Vec<T>,
    /// Right singular vectors of `H~`, one column per entry of `sigmas`.
    u: CMat<T>,
}

struct Engine<T: Real> {
    symbols: Vec<SymbolData<T>>,
    reg: T,
    c: T,
}

struct Evaluation<T: Real> {
    lambda2: T,
    schedule: Vec<CMat<T>>,
    power: T,
}

fn phi_inv_sqrt<T: Real>(a: &HermitianEigen<T>, lambda1: T, reg: T) -> Result<CMat<T>> {
    let mut phi: Vec<T> = a.values.iter().map(|&e| e.max(T::zero()) + lambda1).collect();
    let top = phi.iter().fold(T::zero(), |m, &v| m.max(v));
    let low = phi.iter().fold(T::max_value().unwrap_or(top), |m, &v| m.min(v));
    if low <= T::lit(1e-14) * top || low <= T::zero() {
        if reg <= T::zero() {
            return Err(Error::NotPositiveDefinite("Phi = G2^H W G2 + lambda1 I".into()));
        }
        for v in phi.iter_mut() {
            *v += reg;
        }
    }
    let n = phi.len();
    let mut scaled = a.vectors.clone();
    for (j, v) in phi.iter().enumerate() {
        let s = creal(T::one() / v.sqrt());
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * a.vectors.adjoint())
}

fn right_singular<T: Real>(m: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let svd = Svd::new(m);
    let keep: Vec<usize> = (0..svd.values.len()).filter(|&i| svd.values[i] > T::zero()).collect();
    let mut u = CMat::zeros(m.ncols(), keep.len());
    for (dst, &i) in keep.iter().enumerate() {
        u.set_column(dst, &svd.v.column(i));
    }
    (keep.iter().map(|&i| svd.values[i]).collect(), u)
}

fn water_fill<T: Real>(ev: &SymbolEval<T>, lambda2: T) -> CMat<T> {
    let n = ev.phi_isqrt.nrows();
    let mut core = CMat::zeros(n, n);
    for (i, &s) in ev.sigmas.iter().enumerate() {
        let p = lambda2 - T::one() / (s * s);
        if p > T::zero() {
            let u = ev.u.column(i);
            core += u * u.adjoint() * creal(p);
        }
    }
    let r = &ev.phi_isqrt * core * &ev.phi_isqrt;
    crate::num::hermitian_part(&r)
}

impl<T: Real> Engine<T> {
    fn new(a_mats: Vec<CMat<T>>, h: &CMat<T>, noise: &NoiseCovSchedule<T>, reg: T, c: T) -> Result<Self> {
        let mut symbols = Vec::with_capacity(noise.len());
        for (l, (rw, a)) in noise.matrices().iter().zip(a_mats).enumerate() {
            if rw.nrows() != h.nrows() {
                return Err(Error::Dimension(format!("R_w{l} does not match H")));
            }
            let iw = inv_sqrt(rw).ok_or_else(|| Error::NotPositiveDefinite(format!("R_w{l}")))?;
            symbols.push(SymbolData {
                hw: iw * h,
                a: HermitianEigen::new(&a),
            });
        }
        Ok(Self { symbols, reg, c })
    }

    fn evaluate(&self, lambda1: T) -> Result<Evaluation<T>> {
        let mut evals = Vec::with_capacity(self.symbols.len());
        let mut all = Vec::new();
        for sym in &self.symbols {
            let phi_isqrt = phi_inv_sqrt(&sym.a, lambda1, self.reg)?;
            let (sigmas, u) = right_singular(&(&sym.hw * &phi_isqrt));
            all.extend_from_slice(&sigmas);
            evals.push(SymbolEval { phi_isqrt, sigmas, u });
        }
        let lambda2 = min_capacity_multiplier(&all, self.c, self.symbols.len())?;
        let schedule: Vec<CMat<T>> = evals.iter().map(|ev| water_fill(ev, lambda2)).collect();
        let power = schedule.iter().fold(T::zero(), |acc, r| acc + trace_re(r));
        Ok(Evaluation { lambda2, schedule, power })
    }
}

/// Closed-form optimum of one per-symbol subproblem:
/// `R = Phi^{-1/2} U diag((lambda2 - 1/sigma_i^2)^+) U^H Phi^{-1/2}` with
/// `Phi = G2^H W G2 + lambda1 I` and `U`, `sigma` from the SVD of
/// `R_w^{-1/2} H Phi^{-1/2}`.
pub fn subproblem_solution<T: Real>(
    lambda1: T,
    lambda2: T,
    w_diag: &RVec<T>,
    g2: &CMat<T>,
    h: &CMat<T>,
    rw: &CMat<T>,
) -> Result<CMat<T>> {
    if w_diag.len() != g2.nrows() || g2.ncols() != h.ncols() || rw.nrows() != h.nrows() {
        return Err(Error::Dimension("subproblem shapes disagree".into()));
    }
    let a = weighted_gram(w_diag, g2);
    let phi_isqrt = phi_inv_sqrt(&HermitianEigen::new(&a), lambda1, T::zero())?;
    let iw = inv_sqrt(rw).ok_or_else(|| Error::NotPositiveDefinite("R_w".into()))?;
    let (sigmas, u) = right_singular(&(iw * h * &phi_isqrt));
    Ok(water_fill(&SymbolEval { phi_isqrt, sigmas, u }, lambda2))
}

/// `G2^H diag(w) G2`.
fn weighted_gram<T: Real>(w: &RVec<T>, g2: &CMat<T>) -> CMat<T> {
    let mut scaled = g2.clone();
    for (i, &wi) in w.iter().enumerate() {
        let s = creal(wi);
        for j in 0..g2.ncols() {
            scaled[(i, j)] *= s;
        }
    }
    crate::num::hermitian_part(&(g2.adjoint() * scaled))
}

fn finish<T: Real>(
    eval: Evaluation<T>,
    lambda1: T,
    h: &CMat<T>,
    noise: &NoiseCovSchedule<T>,
    iterations: usize,
    converged: bool,
) -> Result<DesignSolution<T>> {
    let schedule = CovarianceSchedule::from_trusted(eval.schedule);
    let achieved_capacity = average_capacity(&schedule, h, noise)?;
    Ok(DesignSolution {
        consumed_power: eval.power,
        schedule,
        dual: DualPoint {
            lambda1,
            lambda2: eval.lambda2,
        },
        achieved_capacity,
        objective_eip: T::zero(),
        iterations,
        converged,
    })
}

/// Minimum-power design meeting average capacity `c`: water-filling on
/// `R_wl^{-1/2} H` with a common water level.
pub fn solve_selfish<T: Real>(h: &CMat<T>, noise: &NoiseCovSchedule<T>, c: T) -> Result<DesignSolution<T>> {
    let n = h.ncols();
    let engine = Engine::new(vec![CMat::zeros(n, n); noise.len()], h, noise, T::zero(), c)?;
    let eval = engine.evaluate(T::one())?;
    finish(eval, T::zero(), h, noise, 1, true)
}

/// Minimize `sum_l Tr(W_l G2 R_xl G2^H)` under the capacity and power
/// constraints.
#[allow(clippy::too_many_arguments)]
pub fn solve_weighted_eip<T: Real>(
    weights: &WeightSchedule<T>,
    h: &CMat<T>,
    g2: &CMat<T>,
    noise: &NoiseCovSchedule<T>,
    p_t: T,
    c: T,
    opts: &SolverOptions,
) -> Result<DesignSolution<T>> {
    let l = noise.len();
    if weights.len() != l {
        return Err(Error::Dimension(format!("{} weights for {l} symbols", weights.len())));
    }
    if g2.ncols() != h.ncols() {
        return Err(Error::Dimension("G2 and H disagree on transmit antennas".into()));
    }
    let a_mats = weights
        .diags()
        .iter()
        .map(|w| {
            if w.len() != g2.nrows() {
                return Err(Error::Dimension("weight length differs from G2 rows".into()));
            }
            Ok(weighted_gram(w, g2))
        })
        .collect::<Result<Vec<_>>>()?;
    let reg = T::lit(1e-12) * frob2(g2);
    let engine = Engine::new(a_mats, h, noise, reg, c)?;

    // the lambda1 -> infinity limit is the selfish design
    let floor = solve_selfish(h, noise, c)?;
    if floor.consumed_power > p_t * (T::one() + T::lit(1e-12)) {
        return Err(Error::Infeasible(format!(
            "capacity {c} needs power {} > P_t = {p_t}",
            floor.consumed_power
        )));
    }

    let mut evals = 1;
    let mut hi = T::one();
    let mut at_hi = engine.evaluate(hi)?;
    let mut doublings = 0;
    while at_hi.power > p_t {
        if doublings >= opts.max_doublings {
            return Err(Error::Infeasible(format!("no lambda1 meets P_t = {p_t}")));
        }
        hi *= T::lit(2.0);
        at_hi = engine.evaluate(hi)?;
        evals += 1;
        doublings += 1;
    }

    let delta = T::lit(opts.delta_lambda);
    let mut lo = T::zero();
    let mut converged = false;
    for _ in 0..opts.max_bisections {
        if hi - lo <= delta {
            converged = true;
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        let at_mid = engine.evaluate(mid)?;
        evals += 1;
        if at_mid.power <= p_t {
            hi = mid;
            at_hi = at_mid;
        } else {
            lo = mid;
        }
    }
    let mut sol = finish(at_hi, hi, h, noise, evals, converged)?;
    sol.objective_eip = weighted_interference(weights, g2, &sol.schedule)?;
    Ok(sol)
}

/// Problem data a solution is checked against.
#[derive(Debug, Clone, Copy)]
pub struct ProblemData<'a, T: Real> {
    pub h: &'a CMat<T>,
    pub g2: &'a CMat<T>,
    pub noise: &'a NoiseCovSchedule<T>,
    pub p_t: T,
    pub c: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport<T: Real> {
    pub min_eigenvalue: T,
    pub psd: bool,
    pub power: T,
    pub power_feasible: bool,
    pub capacity: T,
    /// `capacity - C`; zero when the capacity constraint is active.
    pub capacity_gap: T,
    /// `lambda1 (P_t - power)`.
    pub slackness: T,
    /// Whether this solution's objective is at most the reference's,
    /// both evaluated under the given weights.
    pub ordering: Option<EipOrdering<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EipOrdering<T: Real> {
    pub designed: T,
    pub reference: T,
    pub holds: bool,
}

/// Recompute feasibility, activeness and slackness of `sol` from its
/// schedule. With `reference`, also check that `sol` has no larger
/// weighted interference than the reference design (tolerance `1e-8`
/// relative to the larger value, floored at `1e-8`).
pub fn verify_solution<T: Real>(
    sol: &DesignSolution<T>,
    problem: &ProblemData<'_, T>,
    reference: Option<(&WeightSchedule<T>, &DesignSolution<T>)>,
) -> Result<VerificationReport<T>> {
    let min_eigenvalue = sol.schedule.min_eigenvalue();
    let power = sol.schedule.total_power();
    let capacity = average_capacity(&sol.schedule, problem.h, problem.noise)?;
    let ordering = match reference {
        Some((w, other)) => {
            let designed = weighted_interference(w, problem.g2, &sol.schedule)?;
            let reference = weighted_interference(w, problem.g2, &other.schedule)?;
            let tol = T::lit(1e-8) * designed.max(reference).max(T::one());
            Some(EipOrdering {
                designed,
                reference,
                holds: designed <= reference + tol,
            })
        }
        None => None,
    };
    Ok(VerificationReport {
        min_eigenvalue,
        psd: min_eigenvalue >= -T::lit(1e-9),
        power,
        power_feasible: power <= problem.p_t + T::lit(1e-6),
        capacity,
        capacity_gap: capacity - problem.c,
        slackness: sol.dual.lambda1 * (problem.p_t - power),
        ordering,
    })
}

/// Stationarity residual of one per-symbol subproblem.
///
/// The Lagrangian gradient is
/// `Z = Phi - lambda2 H^H (R_w + H R H^H)^{-1} H`; at the optimum `Z` is PSD
/// and `Z R = 0`. Returns `(min eigenvalue of Z, ||Z R||_F)`.
pub fn kkt_residual<T: Real>(
    dual: &DualPoint<T>,
    w_diag: &RVec<T>,
    g2: &CMat<T>,
    h: &CMat<T>,
    rw: &CMat<T>,
    r: &CMat<T>,
) -> Result<(T, T)> {
    let n = h.ncols();
    let phi = weighted_gram(w_diag, g2) + CMat::identity(n, n) * creal(dual.lambda1);
    let k = rw + h * r * h.adjoint();
    let k_inv = k
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("R_w + H R H^H".into()))?;
    let z = crate::num::hermitian_part(&(phi - h.adjoint() * k_inv * h * creal(dual.lambda2)));
    let min = HermitianEigen::new(&z).min();
    Ok((min, frob2(&(z * r)).sqrt()))
}

/// `sum_i (log2(lambda2 sigma_i^2))^+` for each symbol at a dual point;
/// used to test the closed form against the determinant capacity.
pub fn closed_form_capacity<T: Real>(sigmas: &[T], lambda2: T) -> T {
    let g: Vec<T> = sigmas.iter().map(|s| *s * *s).collect();
    water_capacity(&g, lambda2)
}

/// Singular values of `R_w^{-1/2} H Phi^{-1/2}` for one symbol.
pub fn whitened_singular_values<T: Real>(lambda1: T, w_diag: &RVec<T>, g2: &CMat<T>, h: &CMat<T>, rw: &CMat<T>) -> Result<Vec<T>> {
    let a = weighted_gram(w_diag, g2);
    let phi_isqrt = phi_inv_sqrt(&HermitianEigen::new(&a), lambda1, T::zero())?;
    let iw = inv_sqrt(rw).ok_or_else(|| Error::NotPositiveDefinite("R_w".into()))?;
    Ok(right_singular(&(iw * h * &phi_isqrt)).0)
}
