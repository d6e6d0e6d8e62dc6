//! Sampling-mask optimization over row/column permutations and the joint
//! covariance/mask design.
//!
//! Permuting rows and columns of a mask leaves its singular values (and so
//! its spectral gap) unchanged, so the radar can search that orbit for the
//! arrangement that collects the least interference. For fixed covariances
//! the interference on a mask is linear, `Tr(Omega^T Q~)`, and each
//! row-only or column-only step is a linear assignment problem.

mod hungarian;

pub use hungarian::{hungarian, Assignment};

use crate::covdesign::{solve_weighted_eip, DesignSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::interference::{interference_q, scheme_eip, scheme_weights, CovarianceSchedule, NoiseCovSchedule};
use crate::num::{modulus_sq, CMat, RMat, Real};
use crate::scenario::{SamplingMask, Scheme};

/// `Tr(Omega^T Q~)`.
pub fn mask_objective<T: Real>(mask: &SamplingMask, qtilde: &RMat<T>) -> Result<T> {
    check_shape(mask, qtilde)?;
    let mut total = T::zero();
    for j in 0..mask.ncols() {
        for i in 0..mask.nrows() {
            if mask.get(i, j) {
                total += qtilde[(i, j)];
            }
        }
    }
    Ok(total)
}

fn check_shape<T: Real>(mask: &SamplingMask, qtilde: &RMat<T>) -> Result<()> {
    if mask.shape() != qtilde.shape() {
        return Err(Error::Dimension(format!(
            "mask is {:?}, cost weights are {:?}",
            mask.shape(),
            qtilde.shape()
        )));
    }
    Ok(())
}

fn identity_cost<T: Real>(c: &RMat<T>) -> T {
    (0..c.nrows()).fold(T::zero(), |acc, i| acc + c[(i, i)])
}

/// Reorder mask columns to minimize `Tr(Omega^T Q~)`. Entry `[m, l]` of the
/// assignment cost is the interference collected by mask column `m` if it
/// is moved to position `l`. The input is returned unchanged unless a
/// strictly better arrangement exists.
pub fn best_column_permutation<T: Real>(mask: &SamplingMask, qtilde: &RMat<T>) -> Result<SamplingMask> {
    check_shape(mask, qtilde)?;
    let cost = mask.to_real::<T>().transpose() * qtilde;
    let best = hungarian(&cost)?;
    if best.cost < identity_cost(&cost) {
        Ok(mask.permute_cols(&best.permutation))
    } else {
        Ok(mask.clone())
    }
}

/// Row counterpart of [`best_column_permutation`].
pub fn best_row_permutation<T: Real>(mask: &SamplingMask, qtilde: &RMat<T>) -> Result<SamplingMask> {
    check_shape(mask, qtilde)?;
    let cost = mask.to_real::<T>() * qtilde.transpose();
    let best = hungarian(&cost)?;
    if best.cost < identity_cost(&cost) {
        Ok(mask.permute_rows(&best.permutation))
    } else {
        Ok(mask.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskOptimization<T: Real> {
    pub mask: SamplingMask,
    /// Objective before the first sweep and after every sweep.
    pub objective_trace: Vec<T>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 1000;

/// Alternate column and row assignment steps until a sweep lowers the
/// objective by less than `delta1` or leaves the mask unchanged.
pub fn optimize_mask<T: Real>(mask0: &SamplingMask, qtilde: &RMat<T>, delta1: T) -> Result<MaskOptimization<T>> {
    let mut mask = mask0.clone();
    let mut obj = mask_objective(&mask, qtilde)?;
    let mut trace = vec![obj];
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let next = best_row_permutation(&best_column_permutation(&mask, qtilde)?, qtilde)?;
        let next_obj = mask_objective(&next, qtilde)?;
        let changed = next != mask;
        trace.push(next_obj);
        let gain = obj - next_obj;
        mask = next;
        obj = next_obj;
        if !changed || gain < delta1 {
            break;
        }
    }
    Ok(MaskOptimization {
        mask,
        objective_trace: trace,
        sweeps,
    })
}

/// Permutation cost weights: `Q` for Scheme I, `Q (S o conj(S))^T` for
/// Scheme II, where column `l` of `Q` is `diag(G2 R_xl G2^H)`.
pub fn qtilde<T: Real>(scheme: Scheme, g2: &CMat<T>, s: &CMat<T>, schedule: &CovarianceSchedule<T>) -> RMat<T> {
    let q = interference_q(g2, schedule);
    match scheme {
        Scheme::SchemeI => q,
        Scheme::SchemeII => q * modulus_sq(s).transpose(),
    }
}

/// Everything the joint design needs besides the initial mask.
#[derive(Debug, Clone, Copy)]
pub struct JointProblem<'a, T: Real> {
    pub scheme: Scheme,
    pub h: &'a CMat<T>,
    pub g2: &'a CMat<T>,
    pub s: &'a CMat<T>,
    pub noise: &'a NoiseCovSchedule<T>,
    pub p_t: T,
    pub c: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOptions {
    /// Mask sweeps stop when the gain drops below this times the
    /// initial mask objective.
    pub delta1_rel: f64,
    /// Outer iterations stop when the EIP changes by less than this times
    /// the initial EIP.
    pub delta2_rel: f64,
    pub max_outer: usize,
    pub solver: SolverOptions,
}

impl Default for JointOptions {
    fn default() -> Self {
        Self {
            delta1_rel: 1e-9,
            delta2_rel: 1e-6,
            max_outer: 50,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDesignResult<T: Real> {
    /// Final covariance design; `objective_eip` is the final EIP.
    pub solution: DesignSolution<T>,
    pub mask: SamplingMask,
    /// EIP after the initial covariance design and after every outer
    /// iteration.
    pub eip_trace: Vec<T>,
    pub outer_iterations: usize,
}

impl<T: Real> JointDesignResult<T> {
    pub fn schedule(&self) -> &CovarianceSchedule<T> {
        &self.solution.schedule
    }

    pub fn eip(&self) -> T {
        *self.eip_trace.last().expect("trace starts with the initial EIP")
    }
}

fn design_for_mask<T: Real>(problem: &JointProblem<'_, T>, mask: &SamplingMask, opts: &JointOptions) -> Result<DesignSolution<T>> {
    let w = scheme_weights(problem.scheme, mask, problem.s)?;
    solve_weighted_eip(&w, problem.h, problem.g2, problem.noise, problem.p_t, problem.c, &opts.solver)
}

/// Alternate the covariance design for the current mask with the mask
/// permutation for the current covariances. The first iterate is the
/// cooperative design on `omega0`; every later step is accepted only if it
/// does not raise the EIP, so the trace is nonincreasing.
pub fn joint_design<T: Real>(
    problem: &JointProblem<'_, T>,
    omega0: &SamplingMask,
    opts: &JointOptions,
) -> Result<JointDesignResult<T>> {
    let mut mask = omega0.clone();
    let mut sol = design_for_mask(problem, &mask, opts)?;
    let mut eip = sol.objective_eip;
    let mut trace = vec![eip];
    let delta2 = T::lit(opts.delta2_rel) * eip;
    let mut delta1 = None;
    let mut outer = 0;
    while outer < opts.max_outer {
        outer += 1;
        let q = qtilde(problem.scheme, problem.g2, problem.s, &sol.schedule);
        let d1 = *delta1.get_or_insert_with(|| {
            let base = mask_objective(&mask, &q).unwrap_or_else(|_| T::zero());
            T::lit(opts.delta1_rel) * base.max(T::tiny())
        });
        let moved = optimize_mask(&mask, &q, d1)?.mask;
        if moved == mask {
            break;
        }
        let eip_mask = scheme_eip(problem.scheme, &moved, problem.s, problem.g2, &sol.schedule)?;
        if eip_mask > eip {
            break;
        }
        mask = moved;
        let mut step_eip = eip_mask;
        let next = design_for_mask(problem, &mask, opts)?;
        if next.objective_eip <= eip_mask {
            step_eip = next.objective_eip;
            sol = next;
        }
        let change = eip - step_eip;
        eip = step_eip;
        trace.push(eip);
        if change < delta2 {
            break;
        }
    }
    sol.objective_eip = eip;
    Ok(JointDesignResult {
        solution: sol,
        mask,
        eip_trace: trace,
        outer_iterations: outer,
    })
}

/// Run [`joint_design`] from several initial masks and keep the lowest
/// final EIP (earliest on ties).
pub fn joint_design_restarts<T: Real>(
    problem: &JointProblem<'_, T>,
    starts: &[SamplingMask],
    opts: &JointOptions,
) -> Result<JointDesignResult<T>> {
    let mut best: Option<JointDesignResult<T>> = None;
    for m in starts {
        let r = joint_design(problem, m, opts)?;
        if best.as_ref().is_none_or(|b| r.eip() < b.eip()) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Invalid("no initial mask given".into()))
}

/// Largest and second-largest singular values of the mask and their gap.
pub fn spectral_gap(mask: &SamplingMask) -> Result<(f64, f64, f64)> {
    if mask.ones_count() == 0 {
        return Err(Error::Invalid("spectral gap of an all-zero mask".into()));
    }
    let sv = mask_singular_values(mask);
    let s1 = sv[0];
    let s2 = sv.get(1).copied().unwrap_or(0.0);
    Ok((s1, s2, s1 - s2))
}

/// Singular values of the mask, descending.
pub fn mask_singular_values(mask: &SamplingMask) -> Vec<f64> {
    crate::num::singular_values(&crate::num::to_complex(&mask.to_real::<f64>()))
}
