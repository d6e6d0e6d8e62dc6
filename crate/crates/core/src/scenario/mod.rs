//! Random and deterministic inputs of a coexistence experiment, and synthesis
//! of the signals seen by both receivers.

mod config;
mod mask;

pub use config::{ScenarioConfig, ScenarioFile, Scheme, Target};
pub use mask::{generate_sampling_mask, generate_sampling_mask_with, MaskCoverage, SamplingMask};

use nalgebra::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{abs2, cplx, creal, frob2, CMat, Real};
use crate::rng::{complex_gaussian, normal};

/// Communication channel and both interference channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    /// `M_rC x M_tC` communication channel.
    pub h: CMat<T>,
    /// `M_rC x M_tR`, radar TX to communication RX.
    pub g1: CMat<T>,
    /// `M_rR x M_tC`, communication TX to radar RX.
    pub g2: CMat<T>,
}

/// Radar waveform matrix `S` (`M_tR x L`) with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformMatrix<T: Real> {
    pub s: CMat<T>,
}

impl<T: Real> WaveformMatrix<T> {
    /// Column energies `a_l = s(l)^H s(l)`.
    pub fn column_energies(&self) -> Vec<T> {
        self.s
            .column_iter()
            .map(|c| c.iter().fold(T::zero(), |acc, z| acc + abs2(*z)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetResponse<T: Real> {
    /// `M_rR x M_tR` target response.
    pub d: CMat<T>,
    pub targets: Vec<Target>,
}

/// Per-symbol carrier phase offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule<T: Real> {
    /// Radar carrier vs. communication receiver.
    pub alpha1: Vec<T>,
    /// Communication transmitter vs. radar receiver.
    pub alpha2: Vec<T>,
}

impl<T: Real> PhaseSchedule<T> {
    pub fn zeros(l: usize) -> Self {
        Self {
            alpha1: vec![T::zero(); l],
            alpha2: vec![T::zero(); l],
        }
    }

    fn unit_diag(alpha: &[T]) -> CMat<T> {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            alpha.len(),
            alpha.iter().map(|&a| cplx(a.cos(), a.sin())),
        ))
    }

    pub fn lambda1(&self) -> CMat<T> {
        Self::unit_diag(&self.alpha1)
    }

    pub fn lambda2(&self) -> CMat<T> {
        Self::unit_diag(&self.alpha2)
    }

    /// First-order residual of imperfect cancellation, `diag(j alpha_1l)`.
    pub fn lambda_alpha(&self) -> CMat<T> {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.alpha1.len(),
            self.alpha1.iter().map(|&a| cplx(T::zero(), a)),
        ))
    }
}

fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat<T> {
    // column-major fill keeps the draw order fixed
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_gaussian(rng, var);
        }
    }
    m
}

pub fn generate_channels<T: Real, R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ChannelSet<T>> {
    cfg.validate()?;
    let h = gaussian_matrix(rng, cfg.m_rc, cfg.m_tc, 1.0);
    let g1 = gaussian_matrix(rng, cfg.m_rc, cfg.m_tr, cfg.sigma1_2);
    let g2 = gaussian_matrix(rng, cfg.m_rr, cfg.m_tc, cfg.sigma2_2);
    Ok(ChannelSet { h, g1, g2 })
}

/// Gaussian waveforms orthonormalized by a QR factorization of `G^H`.
pub fn generate_waveforms<T: Real, R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<WaveformMatrix<T>> {
    if cfg.l < cfg.m_tr {
        return Err(Error::Config(format!(
            "L = {} < M_tR = {}: orthonormal waveform rows impossible",
            cfg.l, cfg.m_tr
        )));
    }
    let g: CMat<T> = gaussian_matrix(rng, cfg.m_tr, cfg.l, 1.0);
    let q = g.adjoint().qr().q();
    Ok(WaveformMatrix { s: q.adjoint() })
}

/// Half-wavelength ULA steering vector `[1, e^{j pi sin(theta)}, ...]`.
pub fn steering_vector<T: Real>(n: usize, angle_deg: f64) -> nalgebra::DVector<Complex<T>> {
    let phase = std::f64::consts::PI * angle_deg.to_radians().sin();
    nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|k| {
            let ph = phase * k as f64;
            cplx(T::lit(ph.cos()), T::lit(ph.sin()))
        }),
    )
}

pub fn generate_target_response<T: Real>(cfg: &ScenarioConfig) -> Result<TargetResponse<T>> {
    if cfg.targets.is_empty() {
        return Err(Error::Config("target list is empty".into()));
    }
    let mut d = CMat::zeros(cfg.m_rr, cfg.m_tr);
    for t in &cfg.targets {
        if !(t.angle_deg > -90.0 && t.angle_deg < 90.0) {
            return Err(Error::Config(format!("target angle {} outside (-90, 90)", t.angle_deg)));
        }
        let ar = steering_vector::<T>(cfg.m_rr, t.angle_deg);
        let at = steering_vector::<T>(cfg.m_tr, t.angle_deg);
        let beta = cplx(T::lit(t.beta_re), T::lit(t.beta_im));
        d += (ar * at.transpose()) * beta;
    }
    Ok(TargetResponse {
        d,
        targets: cfg.targets.clone(),
    })
}

pub fn generate_phase_offsets<T: Real, R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> PhaseSchedule<T> {
    let sd = cfg.sigma_alpha2.sqrt();
    let draw = |rng: &mut R| -> Vec<T> { (0..cfg.l).map(|_| T::lit(normal(rng) * sd)).collect() };
    let alpha1 = draw(rng);
    let alpha2 = draw(rng);
    PhaseSchedule { alpha1, alpha2 }
}

/// Radar noise variance: `sigma_R2`, or derived from `snr_dB` against the
/// mean per-entry power of the noiseless return `gamma rho D S`.
pub fn radar_noise_variance<T: Real>(cfg: &ScenarioConfig, d: &CMat<T>, s: &CMat<T>) -> f64 {
    match cfg.snr_db {
        Some(snr) => {
            let amp = cfg.gamma() * cfg.rho();
            let ds = d * s;
            let p = amp * amp * frob2(&ds).to_f64_lossy() / (ds.nrows() * ds.ncols()).max(1) as f64;
            p / 10f64.powf(snr / 10.0)
        }
        None => cfg.sigma_r2,
    }
}

fn check_dims<T: Real>(what: &str, m: &CMat<T>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Masked radar data matrix.
///
/// Scheme I: `Omega o (gamma rho D S + G2 X Lambda2 + W_R)`;
/// Scheme II: `Omega o (gamma rho D S S^H + G2 X Lambda2 S^H + W_R S^H)`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_radar_rx<T: Real, R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    channels: &ChannelSet<T>,
    d: &CMat<T>,
    s: &CMat<T>,
    x: &CMat<T>,
    phases: &PhaseSchedule<T>,
    mask: &SamplingMask,
    rng: &mut R,
) -> Result<CMat<T>> {
    let l = s.ncols();
    check_dims("D", d, cfg.m_rr, cfg.m_tr)?;
    check_dims("S", s, cfg.m_tr, l)?;
    check_dims("X", x, cfg.m_tc, l)?;
    check_dims("G2", &channels.g2, cfg.m_rr, cfg.m_tc)?;
    if phases.alpha2.len() != l {
        return Err(Error::Dimension(format!("{} phases for {l} symbols", phases.alpha2.len())));
    }
    let amp = creal(T::lit(cfg.gamma() * cfg.rho()));
    let var = radar_noise_variance(cfg, d, s);
    let w: CMat<T> = gaussian_matrix(rng, cfg.m_rr, l, var);
    let y = (d * s) * amp + &channels.g2 * x * phases.lambda2() + w;
    let data = match cfg.scheme {
        Scheme::SchemeI => y,
        Scheme::SchemeII => y * s.adjoint(),
    };
    mask.apply(&data)
}

/// Communication receive matrix after radar cancellation:
/// `H X + rho G1 S Lambda_alpha + W_C`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_comm_rx<T: Real, R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    h: &CMat<T>,
    g1: &CMat<T>,
    s: &CMat<T>,
    x: &CMat<T>,
    phases: &PhaseSchedule<T>,
    rng: &mut R,
) -> Result<CMat<T>> {
    let l = s.ncols();
    check_dims("H", h, cfg.m_rc, cfg.m_tc)?;
    check_dims("G1", g1, cfg.m_rc, cfg.m_tr)?;
    check_dims("S", s, cfg.m_tr, l)?;
    check_dims("X", x, cfg.m_tc, l)?;
    if phases.alpha1.len() != l {
        return Err(Error::Dimension(format!("{} phases for {l} symbols", phases.alpha1.len())));
    }
    let rho = creal(T::lit(cfg.rho()));
    let w: CMat<T> = gaussian_matrix(rng, cfg.m_rc, l, cfg.sigma_c2);
    Ok(h * x + g1 * s * phases.lambda_alpha() * rho + w)
}

/// Every random input of one scenario realization, drawn from named streams
/// of the config seed.
#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub cfg: ScenarioConfig,
    pub channels: ChannelSet<T>,
    pub waveforms: WaveformMatrix<T>,
    pub target: TargetResponse<T>,
    pub mask: SamplingMask,
    pub phases: PhaseSchedule<T>,
}

impl<T: Real> Scenario<T> {
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self> {
        Self::generate_with(cfg, MaskCoverage::Full)
    }

    pub fn generate_with(cfg: &ScenarioConfig, coverage: MaskCoverage) -> Result<Self> {
        use crate::rng::stream;
        cfg.validate()?;
        let channels = generate_channels(cfg, &mut stream(cfg.seed, "channels"))?;
        let waveforms = generate_waveforms(cfg, &mut stream(cfg.seed, "waveforms"))?;
        let target = generate_target_response(cfg)?;
        let mask = generate_sampling_mask_with(cfg, &mut stream(cfg.seed, "mask"), coverage)?;
        let phases = generate_phase_offsets(cfg, &mut stream(cfg.seed, "phases"));
        Ok(Self {
            cfg: cfg.clone(),
            channels,
            waveforms,
            target,
            mask,
            phases,
        })
    }
}

/// Draw codewords `x(l) = R_xl^{1/2} z`, `z ~ CN(0, I)`.
pub fn draw_codewords<T: Real, R: Rng + ?Sized>(roots: &[CMat<T>], rng: &mut R) -> CMat<T> {
    let l = roots.len();
    let n = roots.first().map_or(0, |r| r.nrows());
    let mut x = CMat::zeros(n, l);
    for (k, root) in roots.iter().enumerate() {
        let z: CMat<T> = gaussian_matrix(rng, n, 1, 1.0);
        x.set_column(k, &(root * z).column(0));
    }
    x
}
