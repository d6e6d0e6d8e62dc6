use nalgebra::DMatrix;
use rand::Rng;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::num::{CMat, Real};

const MAX_DRAWS: usize = 200_000;

/// Binary sampling matrix. `1` marks an acquired entry of the data matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    omega: DMatrix<u8>,
    ones_count: usize,
}

/// How strictly the mask generator enforces row/column coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskCoverage {
    /// Every row and every column holds at least one sample; an error if
    /// the ones count cannot achieve that.
    #[default]
    Full,
    /// Rows (columns) are required to be covered only when there are at
    /// least as many ones as rows (columns).
    Relaxed,
    /// Plain uniform placement.
    None,
}

impl SamplingMask {
    pub fn from_matrix(omega: DMatrix<u8>) -> Result<Self> {
        if omega.iter().any(|&v| v > 1) {
            return Err(Error::Invalid("mask entries must be 0 or 1".into()));
        }
        let ones_count = omega.iter().filter(|&&v| v == 1).count();
        Ok(Self { omega, ones_count })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let omega = DMatrix::from_fn(rows, cols, |i, j| u8::from(f(i, j)));
        Self::from_matrix(omega).expect("binary by construction")
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| true)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| false)
    }

    pub fn nrows(&self) -> usize {
        self.omega.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.omega.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.omega.shape()
    }

    pub fn ones_count(&self) -> usize {
        self.ones_count
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.omega[(i, j)] == 1
    }

    pub fn matrix(&self) -> &DMatrix<u8> {
        &self.omega
    }

    pub fn to_real<T: Real>(&self) -> DMatrix<T> {
        self.omega.map(|v| if v == 1 { T::one() } else { T::zero() })
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.nrows())
            .map(|i| self.omega.row(i).iter().map(|&v| v as usize).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.ncols())
            .map(|j| self.omega.column(j).iter().map(|&v| v as usize).sum())
            .collect()
    }

    pub fn rows_covered(&self) -> bool {
        self.row_sums().iter().all(|&s| s > 0)
    }

    pub fn cols_covered(&self) -> bool {
        self.col_sums().iter().all(|&s| s > 0)
    }

    /// Hadamard product with a data matrix of the same shape.
    pub fn apply<T: Real>(&self, data: &CMat<T>) -> Result<CMat<T>> {
        if data.shape() != self.shape() {
            return Err(Error::Dimension(format!(
                "mask is {:?}, data is {:?}",
                self.shape(),
                data.shape()
            )));
        }
        Ok(CMat::from_fn(data.nrows(), data.ncols(), |i, j| {
            if self.get(i, j) {
                data[(i, j)]
            } else {
                nalgebra::Complex::new(T::zero(), T::zero())
            }
        }))
    }

    /// Column `m` moves to position `dest[m]`.
    pub fn permute_cols(&self, dest: &[usize]) -> Self {
        assert_eq!(dest.len(), self.ncols());
        let mut out = self.omega.clone();
        for (m, &to) in dest.iter().enumerate() {
            out.set_column(to, &self.omega.column(m));
        }
        Self { omega: out, ones_count: self.ones_count }
    }

    /// Row `m` moves to position `dest[m]`.
    pub fn permute_rows(&self, dest: &[usize]) -> Self {
        assert_eq!(dest.len(), self.nrows());
        let mut out = self.omega.clone();
        for (m, &to) in dest.iter().enumerate() {
            out.set_row(to, &self.omega.row(m));
        }
        Self { omega: out, ones_count: self.ones_count }
    }
}

/// Number of ones for sub-sampling rate `p` over `entries` cells.
pub(crate) fn ones_for_rate(p: f64, entries: usize) -> usize {
    ((p * entries as f64) + 1e-9).floor() as usize
}

pub fn generate_sampling_mask<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<SamplingMask> {
    generate_sampling_mask_with(cfg, rng, MaskCoverage::Full)
}

/// `floor(p * #entries)` ones at uniformly random positions, redrawn until
/// the coverage policy holds.
pub fn generate_sampling_mask_with<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
    coverage: MaskCoverage,
) -> Result<SamplingMask> {
    let (rows, cols) = cfg.mask_shape();
    let entries = rows * cols;
    let ones = ones_for_rate(cfg.p, entries).min(entries);
    let (need_rows, need_cols) = match coverage {
        MaskCoverage::Full => {
            if ones < rows.max(cols) {
                return Err(Error::CoverageUnsatisfiable { ones, rows, cols });
            }
            (true, true)
        }
        MaskCoverage::Relaxed => (ones >= rows, ones >= cols),
        MaskCoverage::None => (false, false),
    };
    for _ in 0..MAX_DRAWS {
        let picks = rand::seq::index::sample(rng, entries, ones);
        let mut omega = DMatrix::<u8>::zeros(rows, cols);
        for idx in picks.iter() {
            // row-major linear index
            omega[(idx / cols, idx % cols)] = 1;
        }
        let mask = SamplingMask { omega, ones_count: ones };
        if (!need_rows || mask.rows_covered()) && (!need_cols || mask.cols_covered()) {
            return Ok(mask);
        }
    }
    Err(Error::CoverageExhausted(MAX_DRAWS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::scenario::Scheme;

    #[test]
    fn full_rate_gives_all_ones() {
        let mut c = ScenarioConfig::scenario1();
        c.p = 1.0;
        let m = generate_sampling_mask(&c, &mut stream(1, "mask")).unwrap();
        assert_eq!(m, SamplingMask::ones(8, 32));
    }

    #[test]
    fn half_rate_count_and_coverage() {
        let c = ScenarioConfig::scenario1();
        let m = generate_sampling_mask(&c, &mut stream(1, "mask")).unwrap();
        assert_eq!(m.ones_count(), 128);
        assert_eq!(m.matrix().iter().filter(|&&v| v == 1).count(), 128);
        assert!(m.rows_covered() && m.cols_covered());
        let again = generate_sampling_mask(&c, &mut stream(1, "mask")).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn low_rate_scheme1_still_covered() {
        let mut c = ScenarioConfig::scenario1();
        c.p = 0.2;
        let m = generate_sampling_mask(&c, &mut stream(4, "mask")).unwrap();
        assert_eq!(m.ones_count(), 51);
        assert!(m.cols_covered() && m.rows_covered());
    }

    #[test]
    fn unsatisfiable_coverage_errors_and_relaxes() {
        let mut c = ScenarioConfig::scenario1();
        c.scheme = Scheme::SchemeII;
        c.p = 0.2; // 6 ones over an 8x4 mask
        assert_eq!(
            generate_sampling_mask(&c, &mut stream(1, "mask")),
            Err(Error::CoverageUnsatisfiable { ones: 6, rows: 8, cols: 4 })
        );
        let m = generate_sampling_mask_with(&c, &mut stream(1, "mask"), MaskCoverage::Relaxed).unwrap();
        assert_eq!(m.ones_count(), 6);
        assert!(m.cols_covered());
    }

    #[test]
    fn permutations_preserve_counts() {
        let m = SamplingMask::from_fn(3, 4, |i, j| (i + 2 * j) % 3 == 0);
        let p = m.permute_cols(&[2, 0, 3, 1]).permute_rows(&[1, 2, 0]);
        assert_eq!(p.ones_count(), m.ones_count());
        let mut a = m.row_sums();
        let mut b = p.row_sums();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(p.get(1, 2), m.get(0, 0));
    }
}
