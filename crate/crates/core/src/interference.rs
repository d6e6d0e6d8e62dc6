//! Communication capacity and interference metrics at the radar receiver.
//!
//! Every metric here is a weighted sum `sum_l Tr(W_l G2 R_xl G2^H)` with a
//! nonnegative diagonal `W_l`:
//!
//! | metric   | `W_l`                                   |
//! |----------|-----------------------------------------|
//! | TIP      | `I`                                     |
//! | EIP-I    | `diag(Omega[:, l])`                     |
//! | IP-FMFB  | `a_l I`, `a_l = s(l)^H s(l)`            |
//! | EIP-II   | `diag_m( sum_{i in xi_m} |s_i(l)|^2 )`  |
//!
//! [`WeightSchedule`] carries those diagonals so the covariance solver can
//! treat all four problems the same way.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{abs2, creal, log2_det_pd, modulus_sq, psd_sqrt, trace_re, CMat, HermitianEigen, RMat, RVec, Real};
use crate::scenario::{draw_codewords, SamplingMask, ScenarioConfig, Scheme};

/// Per-symbol transmit covariances `R_x1 .. R_xL`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSchedule<T: Real> {
    mats: Vec<CMat<T>>,
}

impl<T: Real> CovarianceSchedule<T> {
    /// Accepts Hermitian matrices whose eigenvalues are `>= -1e-9` (scaled by
    /// the largest magnitude); small negative eigenvalues are clipped to zero.
    pub fn new(mats: Vec<CMat<T>>) -> Result<Self> {
        let n = mats.first().map_or(0, |m| m.nrows());
        let mut out = Vec::with_capacity(mats.len());
        for (l, m) in mats.into_iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!("R_x{l} is {:?}, expected {n}x{n}", m.shape())));
            }
            let scale = m.iter().fold(T::one(), |acc, z| acc.max(abs2(*z).sqrt()));
            let asym = (&m - m.adjoint()).iter().fold(T::zero(), |acc, z| acc.max(abs2(*z).sqrt()));
            if asym > T::lit(1e-10) * scale {
                return Err(Error::Invalid(format!("R_x{l} is not Hermitian (asymmetry {asym})")));
            }
            let eig = HermitianEigen::new(&m);
            if eig.min() < -T::lit(1e-9) * scale {
                return Err(Error::Invalid(format!("R_x{l} is not PSD (eigenvalue {})", eig.min())));
            }
            if eig.min() < T::zero() {
                out.push(eig.apply(|v| v.max(T::zero())));
            } else {
                out.push(crate::num::hermitian_part(&m));
            }
        }
        Ok(Self { mats: out })
    }

    pub fn zeros(l: usize, n: usize) -> Self {
        Self {
            mats: vec![CMat::zeros(n, n); l],
        }
    }

    pub(crate) fn from_trusted(mats: Vec<CMat<T>>) -> Self {
        Self { mats }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Transmit antenna count.
    pub fn dim(&self) -> usize {
        self.mats.first().map_or(0, |m| m.nrows())
    }

    pub fn matrices(&self) -> &[CMat<T>] {
        &self.mats
    }

    pub fn get(&self, l: usize) -> &CMat<T> {
        &self.mats[l]
    }

    /// `sum_l Tr(R_xl)`.
    pub fn total_power(&self) -> T {
        self.mats.iter().fold(T::zero(), |acc, m| acc + trace_re(m))
    }

    pub fn min_eigenvalue(&self) -> T {
        self.mats
            .iter()
            .map(|m| HermitianEigen::new(m).min())
            .fold(T::zero(), |a, b| a.min(b))
    }

    /// Matrix square roots, for drawing `x(l) = R_xl^{1/2} z`.
    pub fn roots(&self) -> Vec<CMat<T>> {
        self.mats.iter().map(psd_sqrt).collect()
    }

    pub fn map(&self, f: impl Fn(&CMat<T>) -> CMat<T>) -> Self {
        Self {
            mats: self.mats.iter().map(f).collect(),
        }
    }
}

/// Interference-plus-noise covariances `R_wl` at the communication receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovSchedule<T: Real> {
    mats: Vec<CMat<T>>,
}

impl<T: Real> NoiseCovSchedule<T> {
    pub fn new(mats: Vec<CMat<T>>) -> Self {
        Self { mats }
    }

    /// `sigma2 I` for every symbol.
    pub fn white(l: usize, n: usize, sigma2: T) -> Self {
        Self {
            mats: vec![CMat::identity(n, n) * creal(sigma2); l],
        }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn matrices(&self) -> &[CMat<T>] {
        &self.mats
    }

    pub fn get(&self, l: usize) -> &CMat<T> {
        &self.mats[l]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightMethod {
    Tip,
    EipI,
    IpFmfb,
    EipII,
}

/// Diagonal weights `W_l` (stored as their diagonals), one per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule<T: Real> {
    pub method: WeightMethod,
    diags: Vec<RVec<T>>,
}

impl<T: Real> WeightSchedule<T> {
    pub fn new(method: WeightMethod, diags: Vec<RVec<T>>) -> Result<Self> {
        if diags.iter().flat_map(|d| d.iter()).any(|&w| !(w >= T::zero())) {
            return Err(Error::Invalid("weights must be nonnegative".into()));
        }
        Ok(Self { method, diags })
    }

    pub fn len(&self) -> usize {
        self.diags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diags.is_empty()
    }

    pub fn diag(&self, l: usize) -> &RVec<T> {
        &self.diags[l]
    }

    pub fn diags(&self) -> &[RVec<T>] {
        &self.diags
    }
}

fn check_schedule<T: Real>(schedule: &CovarianceSchedule<T>, g2: &CMat<T>) -> Result<()> {
    if !schedule.is_empty() && schedule.dim() != g2.ncols() {
        return Err(Error::Dimension(format!(
            "schedule is {0}x{0}, G2 has {1} columns",
            schedule.dim(),
            g2.ncols()
        )));
    }
    Ok(())
}

/// `R_wl = rho^2 sigma_alpha^2 G1 s(l) s(l)^H G1^H + sigma_C^2 I`.
pub fn noise_covariances<T: Real>(cfg: &ScenarioConfig, g1: &CMat<T>, s: &CMat<T>) -> Result<NoiseCovSchedule<T>> {
    if g1.ncols() != s.nrows() {
        return Err(Error::Dimension(format!("G1 has {} columns, S has {} rows", g1.ncols(), s.nrows())));
    }
    let n = g1.nrows();
    let scale = creal(T::lit(cfg.rho2 * cfg.sigma_alpha2));
    let floor = CMat::identity(n, n) * creal(T::lit(cfg.sigma_c2));
    let mats = s
        .column_iter()
        .map(|col| {
            let v = g1 * col;
            &v * v.adjoint() * scale + &floor
        })
        .collect();
    Ok(NoiseCovSchedule { mats })
}

/// Average capacity in bits/symbol,
/// `(1/L) sum_l log2 |I + R_wl^{-1} H R_xl H^H|`.
pub fn average_capacity<T: Real>(schedule: &CovarianceSchedule<T>, h: &CMat<T>, noise: &NoiseCovSchedule<T>) -> Result<T> {
    if schedule.len() != noise.len() {
        return Err(Error::Dimension(format!(
            "{} covariances vs {} noise covariances",
            schedule.len(),
            noise.len()
        )));
    }
    if schedule.is_empty() {
        return Ok(T::zero());
    }
    if schedule.dim() != h.ncols() {
        return Err(Error::Dimension("schedule does not match H".into()));
    }
    let mut total = T::zero();
    for (l, (r, rw)) in schedule.mats.iter().zip(noise.mats.iter()).enumerate() {
        let base = log2_det_pd(rw).ok_or_else(|| Error::NotPositiveDefinite(format!("R_w{l}")))?;
        let full = rw + h * r * h.adjoint();
        let with = log2_det_pd(&full).ok_or_else(|| Error::NotPositiveDefinite(format!("R_w{l} + H R H^H")))?;
        total += with - base;
    }
    Ok(total / T::lit(schedule.len() as f64))
}

/// Diagonal of `G2 R G2^H`: the interference power on each radar antenna.
pub fn interference_diag<T: Real>(g2: &CMat<T>, r: &CMat<T>) -> RVec<T> {
    let gr = g2 * r;
    DVector::from_iterator(
        g2.nrows(),
        (0..g2.nrows()).map(|m| {
            gr.row(m)
                .iter()
                .zip(g2.row(m).iter())
                .fold(T::zero(), |acc, (a, b)| acc + (*a * b.conj()).re)
        }),
    )
}

/// `Q` with column `l` equal to `diag(G2 R_xl G2^H)`.
pub fn interference_q<T: Real>(g2: &CMat<T>, schedule: &CovarianceSchedule<T>) -> RMat<T> {
    let mut q = RMat::zeros(g2.nrows(), schedule.len());
    for (l, r) in schedule.mats.iter().enumerate() {
        q.set_column(l, &interference_diag(g2, r));
    }
    q
}

/// Total interference power, `sum_l Tr(G2 R_xl G2^H)`.
pub fn tip<T: Real>(schedule: &CovarianceSchedule<T>, g2: &CMat<T>) -> Result<T> {
    check_schedule(schedule, g2)?;
    Ok(schedule
        .mats
        .iter()
        .fold(T::zero(), |acc, r| acc + trace_re(&(g2 * r * g2.adjoint()))))
}

/// Interference on Scheme-I sampled entries, `sum_l Tr(Delta_l G2 R_xl G2^H)`.
pub fn eip_scheme1<T: Real>(mask: &SamplingMask, g2: &CMat<T>, schedule: &CovarianceSchedule<T>) -> Result<T> {
    check_schedule(schedule, g2)?;
    if mask.shape() != (g2.nrows(), schedule.len()) {
        return Err(Error::Dimension(format!(
            "Scheme-I mask is {:?}, expected {}x{}",
            mask.shape(),
            g2.nrows(),
            schedule.len()
        )));
    }
    let mut total = T::zero();
    for (l, r) in schedule.mats.iter().enumerate() {
        let d = interference_diag(g2, r);
        for m in 0..g2.nrows() {
            if mask.get(m, l) {
                total += d[m];
            }
        }
    }
    Ok(total)
}

/// Matched-filter weights of a Scheme-II mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedFilterWeights<T: Real> {
    /// `delta[l][m] = a_{l xi_m} = sum_{i in xi_m} |s_i(l)|^2`.
    pub delta: Vec<RVec<T>>,
    /// `a_l = s(l)^H s(l)`.
    pub a: Vec<T>,
}

pub fn matched_filter_weights<T: Real>(s: &CMat<T>, mask: &SamplingMask) -> Result<MatchedFilterWeights<T>> {
    if mask.ncols() != s.nrows() {
        return Err(Error::Dimension(format!(
            "Scheme-II mask has {} columns, S has {} rows",
            mask.ncols(),
            s.nrows()
        )));
    }
    let power = modulus_sq(s);
    let omega = mask.to_real::<T>();
    // column l of Omega * |S|^2 is diag(Delta_{l xi})
    let weights = &omega * &power;
    let delta = weights.column_iter().map(|c| c.into_owned()).collect();
    let a = power.column_iter().map(|c| c.sum()).collect();
    Ok(MatchedFilterWeights { delta, a })
}

/// `sum_l Tr(Delta_{l xi} G2 R_xl G2^H)`.
pub fn eip_scheme2<T: Real>(mask: &SamplingMask, s: &CMat<T>, g2: &CMat<T>, schedule: &CovarianceSchedule<T>) -> Result<T> {
    check_schedule(schedule, g2)?;
    if mask.nrows() != g2.nrows() || s.ncols() != schedule.len() {
        return Err(Error::Dimension("Scheme-II mask/S/schedule shapes disagree".into()));
    }
    let w = matched_filter_weights(s, mask)?;
    let mut total = T::zero();
    for (l, r) in schedule.mats.iter().enumerate() {
        total += w.delta[l].dot(&interference_diag(g2, r));
    }
    Ok(total)
}

/// `Tr(Omega^T Q (S o conj(S))^T)`.
pub fn eip_scheme2_trace_form<T: Real>(
    mask: &SamplingMask,
    s: &CMat<T>,
    g2: &CMat<T>,
    schedule: &CovarianceSchedule<T>,
) -> Result<T> {
    check_schedule(schedule, g2)?;
    if mask.shape() != (g2.nrows(), s.nrows()) || s.ncols() != schedule.len() {
        return Err(Error::Dimension("Scheme-II mask/S/schedule shapes disagree".into()));
    }
    let q = interference_q(g2, schedule);
    let product = mask.to_real::<T>().transpose() * q * modulus_sq(s).transpose();
    Ok(product.trace())
}

/// Interference at the output of the full matched-filter bank,
/// `sum_l a_l Tr(G2 R_xl G2^H)`.
pub fn ip_fmfb<T: Real>(s: &CMat<T>, g2: &CMat<T>, schedule: &CovarianceSchedule<T>) -> Result<T> {
    check_schedule(schedule, g2)?;
    if s.ncols() != schedule.len() {
        return Err(Error::Dimension("S and schedule lengths differ".into()));
    }
    let mut total = T::zero();
    for (l, r) in schedule.mats.iter().enumerate() {
        let a = s.column(l).iter().fold(T::zero(), |acc, z| acc + abs2(*z));
        total += a * trace_re(&(g2 * r * g2.adjoint()));
    }
    Ok(total)
}

/// Build `W_l` for a metric.
///
/// `mask` is required for the EIP metrics; `s` for IP-FMFB and EIP-II.
/// `l` and `m_rr` fix the schedule shape for TIP.
pub fn weight_schedule<T: Real>(
    method: WeightMethod,
    l: usize,
    m_rr: usize,
    mask: Option<&SamplingMask>,
    s: Option<&CMat<T>>,
) -> Result<WeightSchedule<T>> {
    let need_mask = || mask.ok_or_else(|| Error::Invalid(format!("{method:?} weights need a sampling mask")));
    let need_s = || s.ok_or_else(|| Error::Invalid(format!("{method:?} weights need the waveform matrix")));
    let diags = match method {
        WeightMethod::Tip => vec![RVec::from_element(m_rr, T::one()); l],
        WeightMethod::EipI => {
            let mask = need_mask()?;
            if mask.shape() != (m_rr, l) {
                return Err(Error::Dimension(format!("Scheme-I mask is {:?}, expected {m_rr}x{l}", mask.shape())));
            }
            let omega = mask.to_real::<T>();
            omega.column_iter().map(|c| c.into_owned()).collect()
        }
        WeightMethod::IpFmfb => {
            let s = need_s()?;
            if s.ncols() != l {
                return Err(Error::Dimension("S length differs from schedule length".into()));
            }
            s.column_iter()
                .map(|c| {
                    let a = c.iter().fold(T::zero(), |acc, z| acc + abs2(*z));
                    RVec::from_element(m_rr, a)
                })
                .collect()
        }
        WeightMethod::EipII => {
            let mask = need_mask()?;
            let s = need_s()?;
            if mask.nrows() != m_rr || s.ncols() != l {
                return Err(Error::Dimension("Scheme-II mask/S shapes disagree".into()));
            }
            matched_filter_weights(s, mask)?.delta
        }
    };
    WeightSchedule::new(method, diags)
}

/// Weights for the metric that matches the radar scheme (EIP-I or EIP-II).
pub fn scheme_weights<T: Real>(scheme: Scheme, mask: &SamplingMask, s: &CMat<T>) -> Result<WeightSchedule<T>> {
    match scheme {
        Scheme::SchemeI => weight_schedule(WeightMethod::EipI, mask.ncols(), mask.nrows(), Some(mask), Some(s)),
        Scheme::SchemeII => weight_schedule(WeightMethod::EipII, s.ncols(), mask.nrows(), Some(mask), Some(s)),
    }
}

/// `sum_l Tr(W_l G2 R_xl G2^H)`.
pub fn weighted_interference<T: Real>(weights: &WeightSchedule<T>, g2: &CMat<T>, schedule: &CovarianceSchedule<T>) -> Result<T> {
    check_schedule(schedule, g2)?;
    if weights.len() != schedule.len() {
        return Err(Error::Dimension(format!(
            "{} weights vs {} covariances",
            weights.len(),
            schedule.len()
        )));
    }
    let mut total = T::zero();
    for (w, r) in weights.diags.iter().zip(schedule.mats.iter()) {
        if w.len() != g2.nrows() {
            return Err(Error::Dimension("weight length differs from G2 rows".into()));
        }
        total += w.dot(&interference_diag(g2, r));
    }
    Ok(total)
}

/// Evaluate the interference metric of the radar scheme on a schedule.
pub fn scheme_eip<T: Real>(
    scheme: Scheme,
    mask: &SamplingMask,
    s: &CMat<T>,
    g2: &CMat<T>,
    schedule: &CovarianceSchedule<T>,
) -> Result<T> {
    match scheme {
        Scheme::SchemeI => eip_scheme1(mask, g2, schedule),
        Scheme::SchemeII => eip_scheme2(mask, s, g2, schedule),
    }
}

/// Communication symbol (0-based) during which each radar symbol is sampled.
///
/// Radar symbol `l'` (1-based) is sampled at `l' T_R` and lands in
/// communication symbol `ceil(l' T_R / T_C)`. Returns that map and the number
/// of communication symbols `L_C = ceil(L_R f_C / f_R)` in the block.
pub fn radar_to_comm_symbols(radar_len: usize, radar_rate: f64, comm_rate: f64) -> Result<(Vec<usize>, usize)> {
    if !(radar_rate > 0.0 && comm_rate > 0.0) {
        return Err(Error::Config("symbol rates must be positive".into()));
    }
    let ratio = comm_rate / radar_rate;
    let ceil = |x: f64| (x - 1e-9).ceil().max(1.0) as usize;
    let comm_len = ceil(radar_len as f64 * ratio);
    let map = (1..=radar_len).map(|lp| ceil(lp as f64 * ratio) - 1).collect();
    Ok((map, comm_len))
}

/// Re-index per-radar-symbol weights onto communication symbols.
///
/// Radar slower than comm: unsampled communication symbols get zero weight.
/// Radar faster: each communication symbol sums the weights of every radar
/// sample taken during it. Equal rates return the weights unchanged.
pub fn mismatched_weights<T: Real>(radar: &WeightSchedule<T>, radar_rate: f64, comm_rate: f64) -> Result<WeightSchedule<T>> {
    let (map, comm_len) = radar_to_comm_symbols(radar.len(), radar_rate, comm_rate)?;
    let m = radar.diags.first().map_or(0, |d| d.len());
    let mut diags = vec![RVec::zeros(m); comm_len];
    for (lp, &l) in map.iter().enumerate() {
        diags[l] += &radar.diags[lp];
    }
    WeightSchedule::new(radar.method, diags)
}

/// Scheme EIP when radar and communication symbol rates differ. The
/// schedule holds one covariance per communication symbol.
pub fn eip_mismatched<T: Real>(
    cfg: &ScenarioConfig,
    mask: &SamplingMask,
    g2: &CMat<T>,
    s: &CMat<T>,
    schedule: &CovarianceSchedule<T>,
) -> Result<T> {
    let radar = scheme_weights(cfg.scheme, mask, s)?;
    let w = mismatched_weights(&radar, cfg.radar_rate, cfg.comm_rate)?;
    if w.len() != schedule.len() {
        return Err(Error::Dimension(format!(
            "schedule has {} symbols, rates imply {}",
            schedule.len(),
            w.len()
        )));
    }
    weighted_interference(&w, g2, schedule)
}

/// Interference energy on the sampled entries for one realization of the
/// codewords `x` and the phase offsets `alpha2`, evaluated directly on the
/// signal model.
pub fn masked_interference_power<T: Real>(
    scheme: Scheme,
    mask: &SamplingMask,
    g2: &CMat<T>,
    s: &CMat<T>,
    x: &CMat<T>,
    alpha2: &[T],
) -> Result<T> {
    let lambda = CMat::from_diagonal(&DVector::from_iterator(
        alpha2.len(),
        alpha2.iter().map(|&a| crate::num::cplx(a.cos(), a.sin())),
    ));
    let arrived = g2 * x * lambda;
    let data = match scheme {
        Scheme::SchemeI => arrived,
        Scheme::SchemeII => arrived * s.adjoint(),
    };
    Ok(crate::num::frob2(&mask.apply(&data)?))
}

/// Sample mean and standard error of [`masked_interference_power`] over
/// random codewords `x(l) ~ CN(0, R_xl)` and phase offsets
/// `alpha2 ~ N(0, sigma_alpha2)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_eip<T: Real, R: Rng + ?Sized>(
    scheme: Scheme,
    mask: &SamplingMask,
    g2: &CMat<T>,
    s: &CMat<T>,
    schedule: &CovarianceSchedule<T>,
    sigma_alpha2: f64,
    trials: usize,
    rng: &mut R,
) -> Result<(T, T)> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial required".into()));
    }
    let roots = schedule.roots();
    let sd = sigma_alpha2.sqrt();
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let x = draw_codewords(&roots, rng);
        let alpha: Vec<T> = (0..schedule.len())
            .map(|_| T::lit(crate::rng::normal(rng) * sd))
            .collect();
        samples.push(masked_interference_power(scheme, mask, g2, s, &x, &alpha)?.to_f64_lossy());
    }
    let n = trials as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stderr = if trials > 1 {
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((T::lit(mean), T::lit(stderr)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{cplx, frob};
    use crate::rng::stream;
    use crate::scenario::{generate_channels, generate_waveforms};

    fn rand_psd(n: usize, seed: u64) -> CMat<f64> {
        let mut rng = stream(seed, "psd");
        let a = CMat::from_fn(n, n, |_, _| crate::rng::complex_gaussian::<f64, _>(&mut rng, 1.0));
        &a * a.adjoint()
    }

    fn rand_schedule(l: usize, n: usize, seed: u64) -> CovarianceSchedule<f64> {
        CovarianceSchedule::new((0..l).map(|k| rand_psd(n, seed * 1000 + k as u64)).collect()).unwrap()
    }

    fn rand_mat(r: usize, c: usize, seed: u64) -> CMat<f64> {
        let mut rng = stream(seed, "mat");
        CMat::from_fn(r, c, |_, _| crate::rng::complex_gaussian::<f64, _>(&mut rng, 1.0))
    }

    #[test]
    fn noise_cov_without_jitter_is_white() {
        let mut cfg = ScenarioConfig::scenario1();
        cfg.sigma_alpha2 = 0.0;
        let ch: crate::scenario::ChannelSet<f64> = generate_channels(&cfg, &mut stream(1, "c")).unwrap();
        let s = generate_waveforms::<f64, _>(&cfg, &mut stream(1, "w")).unwrap().s;
        let n = noise_covariances(&cfg, &ch.g1, &s).unwrap();
        for m in n.matrices() {
            assert!(frob(&(m - CMat::identity(4, 4) * creal(0.01))) < 1e-15);
        }
        cfg.sigma_alpha2 = 1e-3;
        let n = noise_covariances(&cfg, &ch.g1, &s).unwrap();
        for m in n.matrices() {
            let resid = m - CMat::identity(4, 4) * creal(0.01);
            assert!(crate::num::numerical_rank(&resid, 1e-8) <= 1);
        }
    }

    #[test]
    fn noise_cov_scalar_case() {
        let mut cfg = ScenarioConfig::scenario1();
        cfg.rho2 = 3.0;
        cfg.sigma_alpha2 = 0.5;
        cfg.sigma_c2 = 0.25;
        let one = CMat::from_element(1, 1, creal(1.0f64));
        let n = noise_covariances(&cfg, &one, &one).unwrap();
        assert!((n.get(0)[(0, 0)].re - (3.0 * 0.5 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn capacity_trivial_values() {
        let h = CMat::from_element(1, 1, creal(1.0f64));
        let noise = NoiseCovSchedule::white(1, 1, 1.0);
        let zero = CovarianceSchedule::zeros(1, 1);
        assert_eq!(average_capacity(&zero, &h, &noise).unwrap(), 0.0);
        let one = CovarianceSchedule::new(vec![CMat::identity(1, 1)]).unwrap();
        assert!((average_capacity(&one, &h, &noise).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn capacity_matches_determinant_oracle() {
        let h = rand_mat(2, 2, 3);
        let sched = rand_schedule(3, 2, 4);
        let noise = NoiseCovSchedule::new((0..3).map(|k| rand_psd(2, 50 + k) + CMat::identity(2, 2) * creal(0.1)).collect());
        // slow path: explicit inverse and complex determinant
        let mut acc = 0.0;
        for l in 0..3 {
            let inv = noise.get(l).clone().try_inverse().unwrap();
            let m = CMat::identity(2, 2) + inv * &h * sched.get(l) * h.adjoint();
            acc += m.determinant().norm().log2();
        }
        let oracle = acc / 3.0;
        assert!((average_capacity(&sched, &h, &noise).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn capacity_rejects_non_pd_noise() {
        let h = CMat::from_element(1, 1, creal(1.0));
        let noise = NoiseCovSchedule::new(vec![CMat::zeros(1, 1)]);
        let sched = CovarianceSchedule::zeros(1, 1);
        assert!(matches!(average_capacity(&sched, &h, &noise), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn capacity_monotone_in_psd_order() {
        let h = rand_mat(2, 3, 8);
        let sched = rand_schedule(2, 3, 9);
        let noise = NoiseCovSchedule::white(2, 2, 0.1);
        let base = average_capacity(&sched, &h, &noise).unwrap();
        let v = rand_mat(3, 1, 10);
        let bump = &v * v.adjoint() * creal(1e-3);
        let bumped = CovarianceSchedule::new(vec![sched.get(0) + &bump, sched.get(1).clone()]).unwrap();
        assert!(average_capacity(&bumped, &h, &noise).unwrap() >= base);
    }

    #[test]
    fn tip_trivial_values() {
        let g2 = CMat::<f64>::identity(3, 3);
        let sched = CovarianceSchedule::new(vec![CMat::identity(3, 3); 5]).unwrap();
        assert!((tip(&sched, &g2).unwrap() - 15.0).abs() < 1e-15);
        assert_eq!(tip(&sched, &CMat::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn tip_matches_monte_carlo() {
        let g2 = rand_mat(3, 2, 21);
        let sched = rand_schedule(1, 2, 22);
        let root = crate::num::psd_sqrt(sched.get(0));
        let mut rng = stream(23, "mc");
        let n = 20_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let z = CMat::from_fn(2, 1, |_, _| crate::rng::complex_gaussian::<f64, _>(&mut rng, 1.0));
                crate::num::frob2(&(&g2 * &root * z))
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let analytic = tip(&sched, &g2).unwrap();
        assert!((mean - analytic).abs() <= 3.0 * se, "mean {mean} analytic {analytic} se {se}");
    }

    #[test]
    fn eip1_reductions() {
        let g2 = rand_mat(4, 3, 30);
        let sched = rand_schedule(6, 3, 31);
        let ones = SamplingMask::ones(4, 6);
        let t = tip(&sched, &g2).unwrap();
        assert!((eip_scheme1(&ones, &g2, &sched).unwrap() - t).abs() <= 1e-12 * t);
        let zeros = SamplingMask::zeros(4, 6);
        assert_eq!(eip_scheme1(&zeros, &g2, &sched).unwrap(), 0.0);
        assert!(eip_scheme1(&SamplingMask::ones(4, 5), &g2, &sched).is_err());
    }

    #[test]
    fn eip1_hand_value() {
        let g2 = CMat::<f64>::identity(2, 2);
        let sched = CovarianceSchedule::new(vec![CMat::identity(2, 2)]).unwrap();
        let mask = SamplingMask::from_fn(2, 1, |i, _| i == 0);
        assert!((eip_scheme1(&mask, &g2, &sched).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matched_filter_weight_properties() {
        let s = rand_mat(3, 7, 40);
        let full = matched_filter_weights(&s, &SamplingMask::ones(5, 3)).unwrap();
        for (d, a) in full.delta.iter().zip(full.a.iter()) {
            assert!(d.iter().all(|v| (v - a).abs() < 1e-12));
        }
        let part = matched_filter_weights(&s, &SamplingMask::from_fn(5, 3, |i, j| (i + j) % 2 == 0)).unwrap();
        for (d, a) in part.delta.iter().zip(part.a.iter()) {
            assert!(d.iter().all(|&v| v >= 0.0 && v <= *a + 1e-12));
        }
    }

    #[test]
    fn eip2_full_mask_is_fmfb() {
        let s = rand_mat(3, 5, 41);
        let g2 = rand_mat(4, 2, 42);
        let sched = rand_schedule(5, 2, 43);
        let full = eip_scheme2(&SamplingMask::ones(4, 3), &s, &g2, &sched).unwrap();
        let fmfb = ip_fmfb(&s, &g2, &sched).unwrap();
        assert!((full - fmfb).abs() <= 1e-12 * fmfb);
        assert_eq!(eip_scheme2(&SamplingMask::zeros(4, 3), &s, &g2, &sched).unwrap(), 0.0);
        assert_eq!(eip_scheme2_trace_form(&SamplingMask::zeros(4, 3), &s, &g2, &sched).unwrap(), 0.0);
    }

    #[test]
    fn trace_form_scalar() {
        let g = cplx(0.3f64, -1.2);
        let g2 = CMat::from_element(1, 1, g);
        let sched = CovarianceSchedule::new(vec![CMat::from_element(1, 1, creal(2.5))]).unwrap();
        let s = CMat::from_element(1, 1, creal(1.0));
        let v = eip_scheme2_trace_form(&SamplingMask::ones(1, 1), &s, &g2, &sched).unwrap();
        assert!((v - abs2(g) * 2.5).abs() < 1e-14);
    }

    #[test]
    fn fmfb_uniform_energy_and_zero_channel() {
        // S with orthonormal rows and equal column energies: a normalized DFT block
        let (mt, l) = (2usize, 4usize);
        let s = CMat::from_fn(mt, l, |i, j| {
            let ph = 2.0 * std::f64::consts::PI * (i * j) as f64 / l as f64;
            cplx(ph.cos(), ph.sin()) / creal((l as f64).sqrt())
        });
        let g2 = rand_mat(3, 2, 50);
        let sched = rand_schedule(l, 2, 51);
        let expect = mt as f64 / l as f64 * tip(&sched, &g2).unwrap();
        assert!((ip_fmfb(&s, &g2, &sched).unwrap() - expect).abs() < 1e-12 * expect);
        assert_eq!(ip_fmfb(&s, &CMat::zeros(3, 2), &sched).unwrap(), 0.0);
    }

    #[test]
    fn generic_weights_reproduce_metrics() {
        let s = rand_mat(3, 6, 60);
        let g2 = rand_mat(4, 2, 61);
        let sched = rand_schedule(6, 2, 62);
        let m1 = SamplingMask::from_fn(4, 6, |i, j| (i * 7 + j * 3) % 4 < 2);
        let m2 = SamplingMask::from_fn(4, 3, |i, j| (i + 2 * j) % 3 != 0);
        let tipw = weight_schedule::<f64>(WeightMethod::Tip, 6, 4, None, None).unwrap();
        assert!((weighted_interference(&tipw, &g2, &sched).unwrap() - tip(&sched, &g2).unwrap()).abs() < 1e-12);
        let e1 = weight_schedule(WeightMethod::EipI, 6, 4, Some(&m1), Some(&s)).unwrap();
        assert!((weighted_interference(&e1, &g2, &sched).unwrap() - eip_scheme1(&m1, &g2, &sched).unwrap()).abs() < 1e-12);
        let all = weight_schedule(WeightMethod::EipI, 6, 4, Some(&SamplingMask::ones(4, 6)), Some(&s)).unwrap();
        assert_eq!(all.diags(), tipw.diags());
        let fm = weight_schedule(WeightMethod::IpFmfb, 6, 4, None, Some(&s)).unwrap();
        assert!((weighted_interference(&fm, &g2, &sched).unwrap() - ip_fmfb(&s, &g2, &sched).unwrap()).abs() < 1e-12);
        let e2 = weight_schedule(WeightMethod::EipII, 6, 4, Some(&m2), Some(&s)).unwrap();
        let direct = eip_scheme2(&m2, &s, &g2, &sched).unwrap();
        assert!((weighted_interference(&e2, &g2, &sched).unwrap() - direct).abs() <= 1e-12 * direct);
        assert!(weight_schedule::<f64>(WeightMethod::EipI, 6, 4, None, Some(&s)).is_err());
        assert!(weight_schedule::<f64>(WeightMethod::EipII, 6, 4, None, Some(&s)).is_err());
    }

    #[test]
    fn mismatched_index_sets() {
        let (map, lc) = radar_to_comm_symbols(4, 1.0, 1.0).unwrap();
        assert_eq!((map, lc), (vec![0, 1, 2, 3], 4));
        // radar twice as fast: two radar samples per comm symbol
        let (map, lc) = radar_to_comm_symbols(4, 2.0, 1.0).unwrap();
        assert_eq!((map, lc), (vec![0, 0, 1, 1], 2));
        // radar half as fast: every second comm symbol is sampled
        let (map, lc) = radar_to_comm_symbols(4, 1.0, 2.0).unwrap();
        assert_eq!((map, lc), (vec![1, 3, 5, 7], 8));
    }

    #[test]
    fn schedule_rejects_non_hermitian_and_clips() {
        let bad = CMat::from_row_slice(2, 2, &[creal(1.0), creal(2.0), creal(0.0), creal(1.0)]);
        assert!(CovarianceSchedule::new(vec![bad]).is_err());
        let neg = CMat::from_diagonal(&DVector::from_vec(vec![creal(1.0), creal(-1e-12)]));
        let s = CovarianceSchedule::new(vec![neg]).unwrap();
        assert!(s.min_eigenvalue() >= 0.0);
        let very_neg = CMat::from_diagonal(&DVector::from_vec(vec![creal(1.0), creal(-1e-3)]));
        assert!(CovarianceSchedule::new(vec![very_neg]).is_err());
    }

    #[test]
    fn scheme1_realization_identity() {
        let g2 = rand_mat(4, 3, 70);
        let x = rand_mat(3, 5, 71);
        let s = rand_mat(2, 5, 72);
        let mask = SamplingMask::from_fn(4, 5, |i, j| (i + j) % 3 == 1);
        let alpha = [0.3, -0.2, 1.1, 0.0, 2.0];
        let with = masked_interference_power(Scheme::SchemeI, &mask, &g2, &s, &x, &alpha).unwrap();
        let mut direct = 0.0;
        for l in 0..5 {
            let v = &g2 * x.column(l);
            for m in 0..4 {
                if mask.get(m, l) {
                    direct += abs2(v[m]);
                }
            }
        }
        assert!((with - direct).abs() < 1e-10);
    }

    #[test]
    fn empirical_zero_schedule() {
        let g2 = rand_mat(4, 3, 80);
        let s = rand_mat(2, 5, 81);
        let mask = SamplingMask::ones(4, 5);
        let (m, se) = empirical_eip(Scheme::SchemeI, &mask, &g2, &s, &CovarianceSchedule::zeros(5, 3), 1e-3, 50, &mut stream(1, "e"))
            .unwrap();
        assert_eq!((m, se), (0.0, 0.0));
    }
}
