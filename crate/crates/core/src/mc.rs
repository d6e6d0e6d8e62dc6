//! Low-rank completion of the sub-sampled radar data matrix and the
//! end-to-end recovery pipeline.
//!
//! The solver minimizes `mu ||X||_* + 1/2 ||P_Omega(X - M)||_F^2` by
//! proximal-gradient singular-value thresholding (monotone accelerated
//! variant), with continuation on `mu` and a final least-squares refit of
//! the singular values on the recovered subspaces.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::interference::CovarianceSchedule;
use crate::num::{creal, frob, frob2, singular_values, CMat, Real, Svd, C};
use crate::scenario::{
    draw_codewords, generate_phase_offsets, synthesize_radar_rx, SamplingMask, Scenario, Scheme,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionParams {
    /// Gradient step; the data term is 1-smooth so `tau <= 1` keeps the
    /// iteration monotone.
    pub tau: f64,
    /// Regularization as a fraction of the largest singular value of the
    /// observed matrix.
    pub mu_rel: f64,
    pub max_iterations: usize,
    /// Relative change between iterates at which the solver stops.
    pub tolerance: f64,
    /// Start from a large `mu` and shrink it geometrically to the target.
    pub continuation: bool,
    /// Refit the singular values on the recovered subspaces.
    pub debias: bool,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            mu_rel: 1e-4,
            max_iterations: 500,
            tolerance: 1e-5,
            continuation: true,
            debias: true,
        }
    }
}

impl CompletionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if !(self.mu_rel > 0.0) {
            return Err(Error::Config("mu must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion<T: Real> {
    pub matrix: CMat<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the target `mu` for every iteration run at it.
    pub objective_trace: Vec<T>,
}

/// Singular-value soft thresholding. Returns the result and its rank.
pub fn shrink<T: Real>(x: &CMat<T>, t: T) -> (CMat<T>, usize) {
    let (out, rank, _) = shrink_nuclear(x, t);
    (out, rank)
}

/// `shrink` plus the nuclear norm of its output.
fn shrink_nuclear<T: Real>(x: &CMat<T>, t: T) -> (CMat<T>, usize, T) {
    let svd = Svd::new(x);
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    let mut rank = 0;
    let mut norm = T::zero();
    for (i, &s) in svd.values.iter().enumerate() {
        let k = s - t;
        if k > T::zero() {
            out += svd.u.column(i) * svd.v.column(i).adjoint() * creal(k);
            rank += 1;
            norm += k;
        }
    }
    (out, rank, norm)
}


fn masked_residual<T: Real>(mask: &SamplingMask, x: &CMat<T>, observed: &CMat<T>) -> CMat<T> {
    CMat::from_fn(x.nrows(), x.ncols(), |i, j| {
        if mask.get(i, j) {
            x[(i, j)] - observed[(i, j)]
        } else {
            C::new(T::zero(), T::zero())
        }
    })
}

fn objective<T: Real>(mask: &SamplingMask, x: &CMat<T>, observed: &CMat<T>, mu: T, x_nuclear: T) -> T {
    mu * x_nuclear + T::lit(0.5) * frob2(&masked_residual(mask, x, observed))
}

/// Complete `observed` from the entries flagged in `mask`.
pub fn complete<T: Real>(observed: &CMat<T>, mask: &SamplingMask, params: &CompletionParams) -> Result<Completion<T>> {
    params.validate()?;
    if observed.shape() != mask.shape() {
        return Err(Error::Dimension(format!(
            "observed matrix is {:?}, mask is {:?}",
            observed.shape(),
            mask.shape()
        )));
    }
    if !mask.rows_covered() || !mask.cols_covered() {
        return Err(Error::Invalid("every row and column of the mask needs a sample".into()));
    }
    let data = mask.apply(observed)?;
    let sigma1 = singular_values(&data).first().copied().unwrap_or(T::zero());
    if sigma1 == T::zero() {
        return Ok(Completion {
            matrix: CMat::zeros(data.nrows(), data.ncols()),
            iterations: 0,
            converged: true,
            objective_trace: vec![T::zero()],
        });
    }
    let tau = T::lit(params.tau);
    let mu_final = T::lit(params.mu_rel) * sigma1;
    let mut mu = if params.continuation {
        (T::lit(0.5) * sigma1).max(mu_final)
    } else {
        mu_final
    };
    let decay = T::lit(0.7);

    let mut x = CMat::zeros(data.nrows(), data.ncols());
    let mut y = x.clone();
    let mut t_k = T::one();
    let mut x_nuc = T::zero();
    let mut f_x = objective(mask, &x, &data, mu, x_nuc);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let grad = masked_residual(mask, &y, &data);
        let (z, _, z_nuc) = shrink_nuclear(&(&y - grad * creal(tau)), tau * mu);
        let f_z = objective(mask, &z, &data, mu, z_nuc);
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t_k * t_k).sqrt()) * T::lit(0.5);
        let accept = f_z <= f_x;
        let x_next = if accept { z.clone() } else { x.clone() };
        if accept {
            x_nuc = z_nuc;
        }
        // monotone momentum step
        y = &x_next + (&z - &x_next) * creal(t_k / t_next) + (&x_next - &x) * creal((t_k - T::one()) / t_next);
        // prox-step residual; `x` alone can stall on rejected steps
        let change = frob(&(&z - &x)) / frob(&x).max(T::tiny());
        x = x_next;
        t_k = t_next;
        f_x = f_x.min(f_z);
        if mu <= mu_final {
            trace.push(f_x);
            if change < T::lit(params.tolerance) {
                converged = true;
                break;
            }
        } else {
            let next_mu = (mu * decay).max(mu_final);
            mu = next_mu;
            // restart momentum at each new regularization level
            y = x.clone();
            t_k = T::one();
            f_x = objective(mask, &x, &data, mu, x_nuc);
        }
    }
    if params.debias {
        if let Some(refit) = debias(&x, mask, &data) {
            x = refit;
        }
    }
    Ok(Completion {
        matrix: x,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Least-squares refit `U K V^H` on the observed entries, with `U`, `V` the
/// singular subspaces of `x`. Skipped when the core has too many unknowns
/// for the sample count.
fn debias<T: Real>(x: &CMat<T>, mask: &SamplingMask, data: &CMat<T>) -> Option<CMat<T>> {
    let svd = Svd::new(x);
    let u_all = svd.u;
    let vt_all = svd.v.adjoint();
    let top = svd.values.first().copied().unwrap_or(T::zero());
    let keep: Vec<usize> = (0..svd.values.len())
        .filter(|&i| svd.values[i] > T::lit(1e-10) * top)
        .collect();
    let r = keep.len();
    if r == 0 || 4 * r * r > mask.ones_count() {
        return None;
    }
    let rows: Vec<(usize, usize)> = (0..mask.ncols())
        .flat_map(|j| (0..mask.nrows()).map(move |i| (i, j)))
        .filter(|&(i, j)| mask.get(i, j))
        .collect();
    let a = CMat::from_fn(rows.len(), r * r, |k, col| {
        let (i, j) = rows[k];
        let (p, q) = (keep[col / r], keep[col % r]);
        u_all[(i, p)] * vt_all[(q, j)]
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&(i, j)| data[(i, j)]));
    // normal equations; the columns of `a` are close to orthogonal
    let sol = (a.adjoint() * &a).cholesky()?.solve(&(a.adjoint() * b));
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    for (col, k) in sol.iter().enumerate() {
        let (p, q) = (keep[col / r], keep[col % r]);
        out += u_all.column(p) * vt_all.row(q) * *k;
    }
    let before = frob2(&masked_residual(mask, x, data));
    let after = frob2(&masked_residual(mask, &out, data));
    (after <= before).then_some(out)
}

/// `||truth - estimate||_F / ||truth||_F`.
pub fn relative_error<T: Real>(truth: &CMat<T>, estimate: &CMat<T>) -> Result<T> {
    if truth.shape() != estimate.shape() {
        return Err(Error::Dimension("truth and estimate shapes differ".into()));
    }
    let n = frob(truth);
    if n == T::zero() {
        return Err(Error::Invalid("relative error against a zero matrix".into()));
    }
    Ok(frob(&(truth - estimate)) / n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryReport<T: Real> {
    pub relative_error: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryStats<T: Real> {
    pub mean_error: T,
    /// Sample standard deviation across trials (zero for one trial).
    pub std_error: T,
    pub reports: Vec<RecoveryReport<T>>,
}

/// Noiseless quantity the radar completion is scored against, scaled by
/// `gamma rho`: `D S` for Scheme I, `D` for Scheme II.
pub fn radar_ground_truth<T: Real>(scenario: &Scenario<T>) -> CMat<T> {
    let d = &scenario.target.d;
    match scenario.cfg.scheme {
        Scheme::SchemeI => d * &scenario.waveforms.s,
        Scheme::SchemeII => d.clone(),
    }
}

/// Simulate `trials` radar blocks with codewords drawn from `schedule`,
/// complete each masked data matrix and score it.
///
/// Channels, waveforms and targets come from `scenario`; codewords, phase
/// offsets and receiver noise are redrawn from `rng` every trial.
pub fn radar_pipeline<T: Real, R: Rng + ?Sized>(
    scenario: &Scenario<T>,
    schedule: &CovarianceSchedule<T>,
    mask: &SamplingMask,
    trials: usize,
    params: &CompletionParams,
    rng: &mut R,
) -> Result<RecoveryStats<T>> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial required".into()));
    }
    let cfg = &scenario.cfg;
    let truth = radar_ground_truth(scenario);
    let amp = creal(T::lit(cfg.gamma() * cfg.rho()));
    let roots = schedule.roots();
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let x = draw_codewords(&roots, rng);
        let phases = generate_phase_offsets(cfg, rng);
        let y = synthesize_radar_rx(
            cfg,
            &scenario.channels,
            &scenario.target.d,
            &scenario.waveforms.s,
            &x,
            &phases,
            mask,
            rng,
        )?;
        let done = complete(&y, mask, params)?;
        let estimate = done.matrix.map(|z| z / amp);
        reports.push(RecoveryReport {
            relative_error: relative_error(&truth, &estimate)?,
            iterations: done.iterations,
            converged: done.converged,
        });
    }
    let n = T::lit(trials as f64);
    let mean = reports.iter().fold(T::zero(), |a, r| a + r.relative_error) / n;
    let std = if trials > 1 {
        let ss = reports
            .iter()
            .fold(T::zero(), |a, r| a + (r.relative_error - mean) * (r.relative_error - mean));
        (ss / (n - T::one())).sqrt()
    } else {
        T::zero()
    };
    Ok(RecoveryStats {
        mean_error: mean,
        std_error: std,
        reports,
    })
}
