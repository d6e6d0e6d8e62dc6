//! Scalar abstraction and the small set of complex linear-algebra helpers the
//! rest of the crate leans on.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar the crate is generic over (`f32` or `f64`).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn epsilon() -> Self;

    /// Smallest positive normal value.
    fn tiny() -> Self;
}

impl Real for f32 {
    fn epsilon() -> Self {
        f32::EPSILON
    }

    fn tiny() -> Self {
        f32::MIN_POSITIVE
    }
}

impl Real for f64 {
    fn epsilon() -> Self {
        f64::EPSILON
    }

    fn tiny() -> Self {
        f64::MIN_POSITIVE
    }
}

pub type C<T> = Complex<T>;
pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;
pub type RMat<T> = DMatrix<T>;
pub type RVec<T> = DVector<T>;

pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `|z|^2`
pub fn abs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Real part of the trace.
pub fn trace_re<T: Real>(m: &CMat<T>) -> T {
    (0..m.nrows().min(m.ncols())).fold(T::zero(), |acc, i| acc + m[(i, i)].re)
}

pub fn frob2<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + abs2(*z))
}

pub fn frob<T: Real>(m: &CMat<T>) -> T {
    frob2(m).sqrt()
}

/// Symmetrize `(M + M^H) / 2`.
pub fn hermitian_part<T: Real>(m: &CMat<T>) -> CMat<T> {
    let half = T::lit(0.5);
    (m + m.adjoint()).map(|z| z * half)
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMat<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn new(m: &CMat<T>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: CMat::zeros(0, 0),
            };
        }
        let eig = hermitian_part(m).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    /// Rebuild `V f(Λ) V^H`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> CMat<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = creal(f(self.values[j]));
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Principal square root of a PSD matrix; negative eigenvalues clip to zero.
pub fn psd_sqrt<T: Real>(m: &CMat<T>) -> CMat<T> {
    HermitianEigen::new(m).apply(|v| if v > T::zero() { v.sqrt() } else { T::zero() })
}

/// `M^{-1/2}` for a Hermitian PD matrix with eigenvalue floor
/// `1e-14 * max eigenvalue`. Returns `None` if the matrix is not PD.
pub fn inv_sqrt<T: Real>(m: &CMat<T>) -> Option<CMat<T>> {
    let eig = HermitianEigen::new(m);
    let floor = T::lit(1e-14) * eig.max().abs();
    if eig.min() <= floor || eig.max() <= T::zero() {
        return None;
    }
    Some(eig.apply(|v| T::one() / v.sqrt()))
}

/// `log2 det(M)` for Hermitian PD `M`.
pub fn log2_det_pd<T: Real>(m: &CMat<T>) -> Option<T> {
    let chol = hermitian_part(m).cholesky()?;
    let l = chol.l();
    let mut acc = T::zero();
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.ln();
    }
    Some(T::lit(2.0) * acc / T::lit(std::f64::consts::LN_2))
}

/// Thin SVD `m = U diag(values) V^H` with `k = min(rows, cols)` triplets,
/// values descending. Columns of `U` and `V` paired with a zero singular value
/// are zero.
#[derive(Debug, Clone)]
pub struct Svd<T: Real> {
    pub u: CMat<T>,
    pub values: Vec<T>,
    pub v: CMat<T>,
}

impl<T: Real> Svd<T> {
    /// One-sided Jacobi. nalgebra's complex bidiagonal SVD returns wrong
    /// factors on some rank-deficient inputs, so it is not used here.
    pub fn new(m: &CMat<T>) -> Self {
        if m.nrows() < m.ncols() {
            let t = Self::new(&m.adjoint());
            return Svd { u: t.v, values: t.values, v: t.u };
        }
        let (rows, n) = m.shape();
        // Gram eigenvectors as a starting basis leave only a sweep or two of
        // rotations; Jacobi then fixes whatever the eigen solver got wrong.
        let mut v = gram_basis(m).unwrap_or_else(|| CMat::identity(n, n));
        let mut a = m * &v;
        let tol = T::epsilon() * T::lit(rows.max(1) as f64);
        let floor = T::epsilon() * T::epsilon() * frob2(m);
        let col_norm2 = |x: &[C<T>]| x.iter().fold(T::zero(), |s, z| s + abs2(*z));
        for _sweep in 0..80 {
            let mut rotated = false;
            let mut norms2: Vec<T> = a.as_slice().chunks(rows).map(col_norm2).collect();
            for p in 0..n {
                for q in p + 1..n {
                    let (alpha, beta) = (norms2[p], norms2[q]);
                    let (ap, aq) = column_pair(a.as_mut_slice(), rows, p, q);
                    let gamma = ap.iter().zip(aq.iter()).fold(C::new(T::zero(), T::zero()), |s, (x, y)| s + x.conj() * y);
                    let g = abs2(gamma).sqrt();
                    if g <= tol * (alpha * beta).sqrt() || g <= floor || g <= T::tiny() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma.conj() * creal(T::one() / g);
                    let zeta = (beta - alpha) / (T::lit(2.0) * g);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    rotate(ap, aq, c, s, phase);
                    let (vp, vq) = column_pair(v.as_mut_slice(), n, p, q);
                    rotate(vp, vq, c, s, phase);
                    norms2[p] = alpha - t * g;
                    norms2[q] = beta + t * g;
                }
            }
            if !rotated {
                break;
            }
        }
        let norms: Vec<T> = (0..n).map(|j| a.column(j).iter().fold(T::zero(), |s, z| s + abs2(*z)).sqrt()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
        let top = order.first().map(|&i| norms[i]).unwrap_or(T::zero());
        let mut u = CMat::zeros(rows, n);
        let mut vs = CMat::zeros(n, n);
        let mut values = Vec::with_capacity(n);
        for (dst, &j) in order.iter().enumerate() {
            let s = norms[j];
            if s > T::tiny() && s > top * T::epsilon() * T::epsilon() {
                u.set_column(dst, &(a.column(j) * creal(T::one() / s)));
                vs.set_column(dst, &v.column(j));
                values.push(s);
            } else {
                values.push(T::zero());
            }
        }
        Svd { u, values, v: vs }
    }

    pub fn recompose(&self) -> CMat<T> {
        let mut out = CMat::zeros(self.u.nrows(), self.v.nrows());
        for (i, &s) in self.values.iter().enumerate() {
            if s > T::zero() {
                out += self.u.column(i) * self.v.column(i).adjoint() * creal(s);
            }
        }
        out
    }
}

fn column_pair<T: Real>(data: &mut [C<T>], rows: usize, p: usize, q: usize) -> (&mut [C<T>], &mut [C<T>]) {
    let (head, tail) = data.split_at_mut(q * rows);
    (&mut head[p * rows..(p + 1) * rows], &mut tail[..rows])
}

fn rotate<T: Real>(xp: &mut [C<T>], xq: &mut [C<T>], c: T, s: T, phase: C<T>) {
    for (x, y) in xp.iter_mut().zip(xq.iter_mut()) {
        let (a, b) = (*x, *y * phase);
        *x = a * creal(c) - b * creal(s);
        *y = a * creal(s) + b * creal(c);
    }
}

/// Eigenvectors of `m^H m`, largest first, if they come out unitary.
fn gram_basis<T: Real>(m: &CMat<T>) -> Option<CMat<T>> {
    let n = m.ncols();
    let eig = HermitianEigen::new(&(m.adjoint() * m));
    let mut v = CMat::zeros(n, n);
    for j in 0..n {
        v.set_column(j, &eig.vectors.column(n - 1 - j));
    }
    let err = frob(&(v.adjoint() * &v - CMat::identity(n, n)));
    (err.is_finite() && err <= T::lit(1e-6)).then_some(v)
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(m: &CMat<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    Svd::new(m).values
}

/// Numerical rank with tolerance relative to the largest singular value.
pub fn numerical_rank<T: Real>(m: &CMat<T>, rel_tol: T) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > T::zero() => sv.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

pub fn to_complex<T: Real>(m: &RMat<T>) -> CMat<T> {
    m.map(creal)
}

/// Elementwise `|S_ij|^2`.
pub fn modulus_sq<T: Real>(m: &CMat<T>) -> RMat<T> {
    m.map(abs2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(a: &CMat<f64>) -> CMat<f64> {
        a * a.adjoint()
    }

    #[test]
    fn sqrt_squares_back() {
        let a = CMat::<f64>::from_fn(3, 3, |i, j| cplx((i + 2 * j) as f64 * 0.3, (i as f64) - 0.5 * j as f64));
        let p = herm(&a) + CMat::identity(3, 3);
        let r = psd_sqrt(&p);
        assert!(frob(&(&r * &r - &p)) < 1e-10);
        let ri = inv_sqrt(&p).unwrap();
        assert!(frob(&(&ri * &p * &ri - CMat::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let v = CMat::<f64>::from_column_slice(2, 1, &[creal(1.0), creal(2.0)]);
        assert!(inv_sqrt(&herm(&v)).is_none());
    }

    #[test]
    fn log2det_matches_eigen_sum() {
        let a = CMat::<f64>::from_fn(3, 3, |i, j| cplx((i * j) as f64 + 0.1, (i as f64) - (j as f64)));
        let p = herm(&a) + CMat::identity(3, 3);
        let eig = HermitianEigen::new(&p);
        let expect: f64 = eig.values.iter().map(|v| v.log2()).sum();
        assert!((log2_det_pd(&p).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn svd_recomposes_rank_deficient() {
        let mut rng = crate::rng::stream(5, "svd");
        for trial in 0..200 {
            let (m, n) = [(8, 32), (32, 8), (32, 32), (6, 9), (9, 6)][trial % 5];
            let k = 1 + trial % 4;
            let a = CMat::<f64>::from_fn(m, k, |_, _| crate::rng::complex_gaussian::<f64, _>(&mut rng, 1.0));
            let b = CMat::<f64>::from_fn(k, n, |_, _| crate::rng::complex_gaussian::<f64, _>(&mut rng, 1.0));
            let x = (&a * &b).map(|z| z * [1.0, 0.5, 0.25][trial % 3]);
            let svd = Svd::new(&x);
            assert!(frob(&(&x - svd.recompose())) <= 1e-11 * frob(&x));
            assert_eq!(svd.values.iter().filter(|&&s| s > 1e-9 * svd.values[0]).count(), k);
            assert!(svd.values.windows(2).all(|w| w[0] >= w[1]));
            let r = svd.u.columns(0, k).into_owned();
            assert!(frob(&(r.adjoint() * &r - CMat::<f64>::identity(k, k))) < 1e-10);
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let x = CMat::<f64>::from_diagonal(&CVec::from_vec(vec![creal(1.0), creal(-3.0), creal(2.0)]));
        let svd = Svd::new(&x);
        assert_eq!(svd.values.len(), 3);
        for (got, want) in svd.values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_sorted_ascending() {
        let d = CMat::<f64>::from_diagonal(&CVec::from_vec(vec![creal(3.0), creal(-1.0), creal(2.0)]));
        let e = HermitianEigen::new(&d);
        assert_eq!(e.values.len(), 3);
        assert!((e.values[0] + 1.0).abs() < 1e-12 && (e.values[2] - 3.0).abs() < 1e-12);
    }
}
