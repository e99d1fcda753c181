//! Fixed-size numerical kernels.
//!
//! Everything here works on tiny stack matrices (2×2, 3×3, 4×4), so the
//! eigen- and singular-value routines are plain cyclic Jacobi iterations:
//! deterministic, accurate for small eigenvalues, and free of any
//! general-purpose LAPACK machinery.

use nalgebra::{Complex, Matrix2, Matrix3, Matrix4, SMatrix, SVector, Vector3, Vector4};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Eigenvalues above `-PSD_CLAMP` are treated as zero when taking square roots.
pub const PSD_CLAMP: f64 = 1e-10;

/// Hermiticity tolerance for [`Mat4Herm`].
pub const HERM_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Real symmetric 3×3 matrix, stored as its upper triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3Sym {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl Mat3Sym {
    pub fn new(xx: f64, xy: f64, xz: f64, yy: f64, yz: f64, zz: f64) -> Self {
        Self { xx, xy, xz, yy, yz, zz }
    }

    pub fn zeros() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, 0.0, 0.0, b, 0.0, c)
    }

    /// Takes the symmetric part `(m + mᵀ)/2`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let s = |i: usize, j: usize| 0.5 * (m[(i, j)] + m[(j, i)]);
        Self::new(s(0, 0), s(0, 1), s(0, 2), s(1, 1), s(1, 2), s(2, 2))
    }

    /// `v vᵀ`
    pub fn outer(v: &Vector3<f64>) -> Self {
        Self::new(
            v.x * v.x,
            v.x * v.y,
            v.x * v.z,
            v.y * v.y,
            v.y * v.z,
            v.z * v.z,
        )
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.xx, self.xy, self.xz, //
            self.xy, self.yy, self.yz, //
            self.xz, self.yz, self.zz,
        )
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn determinant(&self) -> f64 {
        self.to_matrix().determinant()
    }

    /// `vᵀ M v`
    pub fn quadratic_form(&self, v: &Vector3<f64>) -> f64 {
        v.dot(&(self.to_matrix() * v))
    }

    /// `R M Rᵀ`
    pub fn conjugate(&self, r: &Matrix3<f64>) -> Self {
        Self::from_matrix(&(r * self.to_matrix() * r.transpose()))
    }
}

/// 4×4 complex matrix validated to be Hermitian within [`HERM_TOL`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4Herm(Matrix4<C64>);

impl Mat4Herm {
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        let dev = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > HERM_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self((m + m.adjoint()).scale(0.5)))
    }

    /// Wraps `m` after replacing it with its Hermitian part, without checking.
    pub fn hermitian_part(m: &Matrix4<C64>) -> Self {
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix4<C64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant().re
    }
}

/// Eigen-decomposition with eigenvalues sorted descending and eigenvectors
/// stored as matrix columns.
#[derive(Clone, Copy, Debug)]
pub struct SymEigen3 {
    pub values: Vector3<f64>,
    pub vectors: Matrix3<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct HermEigen<const N: usize> {
    pub values: SVector<f64, N>,
    pub vectors: SMatrix<C64, N, N>,
}

/// `m = U diag(s) Vᵀ` with `s` non-negative and descending.
#[derive(Clone, Copy, Debug)]
pub struct Svd<const N: usize> {
    pub u: SMatrix<f64, N, N>,
    pub singular: SVector<f64, N>,
    pub v: SMatrix<f64, N, N>,
}

impl<const N: usize> Svd<N> {
    pub fn recompose(&self) -> SMatrix<f64, N, N> {
        self.u * SMatrix::<f64, N, N>::from_diagonal(&self.singular) * self.v.transpose()
    }

    /// Number of singular values above `cutoff`.
    pub fn rank(&self, cutoff: f64) -> usize {
        self.singular.iter().filter(|&&s| s > cutoff).count()
    }
}

pub type Svd3 = Svd<3>;
pub type Svd4 = Svd<4>;

pub fn eig_sym3(m: &Mat3Sym) -> SymEigen3 {
    let (values, vectors) = jacobi_sym(&m.to_matrix());
    SymEigen3 { values, vectors }
}

/// Eigenvalues of a Hermitian 4×4 matrix, descending.
pub fn eig_herm4(m: &Mat4Herm) -> Vector4<f64> {
    jacobi_herm(m.matrix()).values
}

pub fn eigh_herm4(m: &Mat4Herm) -> HermEigen<4> {
    jacobi_herm(m.matrix())
}

pub fn eigh_herm2(m: &Matrix2<C64>) -> HermEigen<2> {
    jacobi_herm(&(m + m.adjoint()).scale(0.5))
}

pub fn svd3(m: &Matrix3<f64>) -> Svd3 {
    svd_jacobi(m)
}

pub fn svd4(m: &Matrix4<f64>) -> Svd4 {
    svd_jacobi(m)
}

/// Principal square root of a positive semidefinite matrix.
pub trait PsdSqrt: Sized {
    fn sqrt_psd(&self) -> Result<Self>;
}

impl PsdSqrt for Mat3Sym {
    fn sqrt_psd(&self) -> Result<Self> {
        let e = eig_sym3(self);
        let min = e.values.min();
        if min < -PSD_CLAMP {
            return Err(Error::NotPsd(min));
        }
        let root = e.values.map(|q| q.max(0.0).sqrt());
        Ok(Mat3Sym::from_matrix(
            &(e.vectors * Matrix3::from_diagonal(&root) * e.vectors.transpose()),
        ))
    }
}

impl PsdSqrt for Matrix2<C64> {
    fn sqrt_psd(&self) -> Result<Self> {
        let e = eigh_herm2(self);
        let min = e.values.min();
        if min < -PSD_CLAMP {
            return Err(Error::NotPsd(min));
        }
        let root = e.values.map(|q| C64::new(q.max(0.0).sqrt(), 0.0));
        Ok(e.vectors * Matrix2::from_diagonal(&root) * e.vectors.adjoint())
    }
}

pub fn sqrt_psd<M: PsdSqrt>(m: &M) -> Result<M> {
    m.sqrt_psd()
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix, inverting only
/// eigenvalues above `cutoff`.
pub fn pinv_sym3(m: &Mat3Sym, cutoff: f64) -> Mat3Sym {
    let e = eig_sym3(m);
    let inv = e.values.map(|q| if q > cutoff { 1.0 / q } else { 0.0 });
    Mat3Sym::from_matrix(&(e.vectors * Matrix3::from_diagonal(&inv) * e.vectors.transpose()))
}

/// A unit vector orthogonal to `v`, chosen deterministically.
pub fn perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let a = v.abs();
    let axis = if a.x <= a.y && a.x <= a.z {
        Vector3::x()
    } else if a.y <= a.z {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let p = v.cross(&axis);
    let n = p.norm();
    if n == 0.0 {
        return Vector3::x();
    }
    sign_normalize(p / n)
}

/// Flips `v` so that its first component with magnitude above 1e-12 is positive.
pub fn sign_normalize<const N: usize>(v: SVector<f64, N>) -> SVector<f64, N> {
    match v.iter().find(|x| x.abs() > 1e-12) {
        Some(&x) if x < 0.0 => -v,
        _ => v,
    }
}

fn phase_normalize<const N: usize>(v: SVector<C64, N>) -> SVector<C64, N> {
    match v.iter().find(|z| z.norm() > 1e-12) {
        Some(z) => {
            let phase = z.conj() / z.norm();
            v.map(|w| w * phase)
        }
        None => v,
    }
}

fn descending_order(values: &[f64], tie_key: impl Fn(usize, usize) -> std::cmp::Ordering) -> Vec<usize> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // insertion sort; the tolerance-based comparator is not a total order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (idx[j - 1], idx[j]);
            let swap = if (values[a] - values[b]).abs() <= 1e-12 * scale {
                tie_key(a, b) == std::cmp::Ordering::Less
            } else {
                values[a] < values[b]
            };
            if !swap {
                break;
            }
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    idx
}

fn lex_cmp<const N: usize>(a: &SVector<f64, N>, b: &SVector<f64, N>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).abs() > 1e-12 {
            return x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal);
        }
    }
    std::cmp::Ordering::Equal
}

/// Rotation `(c, s)` that annihilates the `(p, q)` entry of a real symmetric
/// 2×2 block `[app apq; apq aqq]` under `Jᵀ A J`.
fn jacobi_rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64) {
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    (c, t * c)
}

fn off_norm<T: nalgebra::ComplexField<RealField = f64>, const N: usize>(a: &SMatrix<T, N, N>) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        for j in 0..N {
            if i != j {
                s += a[(i, j)].clone().modulus_squared();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi for real symmetric matrices.
pub fn jacobi_sym<const N: usize>(m: &SMatrix<f64, N, N>) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = SMatrix::<f64, N, N>::identity();
    let scale = a.norm();
    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_norm(&a) <= 1e-17 * scale {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let (c, s) = jacobi_rotation(a[(p, p)], a[(q, q)], apq);
                    let mut j = SMatrix::<f64, N, N>::identity();
                    j[(p, p)] = c;
                    j[(p, q)] = s;
                    j[(q, p)] = -s;
                    j[(q, q)] = c;
                    a = j.transpose() * a * j;
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    v *= j;
                }
            }
        }
    }
    let raw: Vec<f64> = (0..N).map(|i| a[(i, i)]).collect();
    let cols: Vec<SVector<f64, N>> = (0..N).map(|i| sign_normalize(v.column(i).into_owned())).collect();
    let order = descending_order(&raw, |i, j| lex_cmp(&cols[i], &cols[j]));
    let values = SVector::<f64, N>::from_iterator(order.iter().map(|&i| raw[i]));
    let mut vectors = SMatrix::<f64, N, N>::zeros();
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &cols[i]);
    }
    (values, vectors)
}

/// Cyclic Jacobi for complex Hermitian matrices. Each pivot is first made
/// real by a diagonal phase and then eliminated by a real rotation.
pub fn jacobi_herm<const N: usize>(m: &SMatrix<C64, N, N>) -> HermEigen<N> {
    let mut a = *m;
    let mut v = SMatrix::<C64, N, N>::identity();
    let scale = a.norm();
    let zero = C64::new(0.0, 0.0);
    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_norm(&a) <= 1e-17 * scale {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= 1e-300 {
                        continue;
                    }
                    let phase = apq.conj() / mag;
                    let (c, s) = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, mag);
                    let mut u = SMatrix::<C64, N, N>::identity();
                    u[(p, p)] = C64::new(c, 0.0);
                    u[(p, q)] = C64::new(s, 0.0);
                    u[(q, p)] = phase * (-s);
                    u[(q, q)] = phase * c;
                    a = u.adjoint() * a * u;
                    a[(p, q)] = zero;
                    a[(q, p)] = zero;
                    v *= u;
                }
            }
        }
    }
    let raw: Vec<f64> = (0..N).map(|i| a[(i, i)].re).collect();
    let cols: Vec<SVector<C64, N>> = (0..N).map(|i| phase_normalize(v.column(i).into_owned())).collect();
    let re_cols: Vec<SVector<f64, N>> = cols.iter().map(|c| c.map(|z| z.re)).collect();
    let order = descending_order(&raw, |i, j| lex_cmp(&re_cols[i], &re_cols[j]));
    let values = SVector::<f64, N>::from_iterator(order.iter().map(|&i| raw[i]));
    let mut vectors = SMatrix::<C64, N, N>::zeros();
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &cols[i]);
    }
    HermEigen { values, vectors }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd_jacobi<const N: usize>(m: &SMatrix<f64, N, N>) -> Svd<N> {
    let mut w = *m;
    let mut v = SMatrix::<f64, N, N>::identity();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..N {
            for q in (p + 1)..N {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..N {
                    let (wp, wq) = (w[(k, p)], w[(k, q)]);
                    w[(k, p)] = c * wp - s * wq;
                    w[(k, q)] = s * wp + c * wq;
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..N).map(|j| w.column(j).norm()).collect();
    let order = descending_order(&norms, |_, _| std::cmp::Ordering::Equal);
    let singular = SVector::<f64, N>::from_iterator(order.iter().map(|&j| norms[j]));
    let mut u = SMatrix::<f64, N, N>::zeros();
    let mut vv = SMatrix::<f64, N, N>::zeros();
    // columns at roundoff level carry no direction; complete them instead
    let tiny = norms.iter().fold(0.0f64, |a, &b| a.max(b)) * 1e-12;
    let mut filled = Vec::with_capacity(N);
    for (k, &j) in order.iter().enumerate() {
        vv.set_column(k, &v.column(j));
        if norms[j] > tiny && norms[j] > 0.0 {
            u.set_column(k, &(w.column(j) / norms[j]));
            filled.push(k);
        }
    }
    // small columns lose orthogonality to rounding; re-orthonormalize in order
    for (i, &k) in filled.iter().enumerate() {
        let mut col = u.column(k).into_owned();
        for &f in &filled[..i] {
            let prev = u.column(f).into_owned();
            col -= prev * prev.dot(&col);
        }
        u.set_column(k, &col.normalize());
    }
    // complete U for zero singular values
    for k in 0..N {
        if filled.contains(&k) {
            continue;
        }
        for e in 0..N {
            let mut cand = SVector::<f64, N>::zeros();
            cand[e] = 1.0;
            for _ in 0..2 {
                for &f in &filled {
                    let col = u.column(f).into_owned();
                    cand -= col * col.dot(&cand);
                }
            }
            let n = cand.norm();
            if n > 1e-6 {
                u.set_column(k, &(cand / n));
                filled.push(k);
                break;
            }
        }
    }
    Svd { u, singular, v: vv }
}

/// Rotation by `angle` about the unit vector `axis` (Rodrigues).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

/// Result of [`nelder_mead`].
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Adaptive Nelder–Mead simplex minimization.
///
/// `step` sets the initial simplex edge along each coordinate. Stops after
/// `max_iter` iterations or once both the spread of function values and the
/// simplex diameter fall below `tol`.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> Minimum {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        if spread.abs() <= tol && diameter <= tol {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / nf).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };

        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-beta);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-gamma);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(gamma);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = (0..n).map(|k| pts[0][k] + delta * (pts[i][k] - pts[0][k])).collect();
            vals[i] = eval(&p);
            pts[i] = p;
        }
    }
    let best = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    Minimum { x: pts[best].clone(), value: vals[best], evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut impl Rng) -> Mat3Sym {
        let mut r = || rng.random_range(-1.0..1.0);
        Mat3Sym::new(r(), r(), r(), r(), r(), r())
    }

    fn max_abs<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> f64 {
        m.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = eig_sym3(&Mat3Sym::identity());
        assert_eq!(e.values, Vector3::new(1.0, 1.0, 1.0));
        assert_abs_diff_eq!(e.vectors, Matrix3::identity(), epsilon = 1e-15);

        let e = eig_sym3(&Mat3Sym::diag(1.0, 4.0, 0.0));
        assert_eq!(e.values, Vector3::new(4.0, 1.0, 0.0));
        assert_eq!(e.vectors.column(0).into_owned(), Vector3::y());
        assert_eq!(e.vectors.column(1).into_owned(), Vector3::x());
        assert_eq!(e.vectors.column(2).into_owned(), Vector3::z());
    }

    #[test]
    fn eig_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let m = random_sym(&mut rng);
            let e = eig_sym3(&m);
            let back = e.vectors * Matrix3::from_diagonal(&e.values) * e.vectors.transpose();
            assert!(max_abs(&(back - m.to_matrix())) < 1e-10);
            assert!(max_abs(&(e.vectors.transpose() * e.vectors - Matrix3::identity())) < 1e-12);
            assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
            for k in 0..3 {
                let v = e.vectors.column(k);
                assert!((m.to_matrix() * v - v * e.values[k]).norm() < 1e-10);
            }
            // independent oracle
            let mut oracle: Vec<f64> = m.to_matrix().symmetric_eigenvalues().iter().copied().collect();
            oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for k in 0..3 {
                assert!((oracle[k] - e.values[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sqrt_psd_cases() {
        assert_eq!(Mat3Sym::identity().sqrt_psd().unwrap(), Mat3Sym::identity());
        let r = Mat3Sym::diag(4.0, 1.0, 0.0).sqrt_psd().unwrap();
        assert_abs_diff_eq!(r.to_matrix(), Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 0.0)), epsilon = 1e-15);
        assert!(matches!(Mat3Sym::diag(1.0, -1e-6, 0.0).sqrt_psd(), Err(Error::NotPsd(_))));
        // clamp absorbs tiny negative noise
        assert!(Mat3Sym::diag(1.0, -1e-11, 0.0).sqrt_psd().is_ok());
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let g = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let m = Mat3Sym::from_matrix(&(g * g.transpose()));
            let r = m.sqrt_psd().unwrap().to_matrix();
            assert!(max_abs(&(r * r - m.to_matrix())) < 1e-9);
            assert!(r.symmetric_eigenvalues().min() > -1e-12);
        }
    }

    #[test]
    fn sqrt_psd_herm2() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let g = Matrix2::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let m = g * g.adjoint();
            let r = m.sqrt_psd().unwrap();
            assert!((r * r - m).norm() < 1e-9);
            assert!((r - r.adjoint()).norm() < 1e-12);
        }
    }

    #[test]
    fn svd_cases() {
        let s = svd3(&Matrix3::zeros());
        assert_eq!(s.singular, Vector3::zeros());
        assert_abs_diff_eq!(s.u.transpose() * s.u, Matrix3::identity(), epsilon = 1e-15);

        let m = Matrix3::from_diagonal(&Vector3::new(-9.0 / 20.0, -3.0 / 10.0, -3.0 / 10.0));
        let s = svd3(&m);
        assert_abs_diff_eq!(s.singular, Vector3::new(0.45, 0.3, 0.3), epsilon = 1e-15);
        assert!(max_abs(&(s.recompose() - m)) < 1e-15);
    }

    #[test]
    fn svd_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for i in 0..2000 {
            let mut m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if i % 3 == 0 {
                // rank deficient
                let c = m.column(0) + m.column(1) * 0.5;
                m.set_column(2, &c);
            }
            let s = svd3(&m);
            assert!(max_abs(&(s.recompose() - m)) < 1e-10);
            assert!(max_abs(&(s.u.transpose() * s.u - Matrix3::identity())) < 1e-12);
            assert!(max_abs(&(s.v.transpose() * s.v - Matrix3::identity())) < 1e-12);
            assert!(s.singular[0] >= s.singular[1] && s.singular[1] >= s.singular[2] && s.singular[2] >= 0.0);
            let oracle = m.svd(false, false).singular_values;
            let mut o: Vec<f64> = oracle.iter().copied().collect();
            o.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for k in 0..3 {
                assert!((o[k] - s.singular[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_rank_one_has_orthogonal_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..500 {
            let x = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let y = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let m = x * y.transpose();
            let s = svd3(&m);
            assert!(max_abs(&(s.recompose() - m)) < 1e-12);
            assert!(max_abs(&(s.u.transpose() * s.u - Matrix3::identity())) < 1e-12);
            assert!(max_abs(&(s.v.transpose() * s.v - Matrix3::identity())) < 1e-12);
        }
    }

    #[test]
    fn svd4_rank() {
        let a = Vector4::new(1.0, 0.2, -0.3, 0.5);
        let b = Vector4::new(1.0, -0.4, 0.1, 0.0);
        let m = a * b.transpose() + b * a.transpose();
        let s = svd4(&m);
        assert_eq!(s.rank(1e-8), 2);
        assert!(max_abs(&(s.recompose() - m)) < 1e-12);
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn herm4_simple_spectra() {
        let mixed = Mat4Herm::new(Matrix4::identity().map(|z: C64| z * 0.25)).unwrap();
        assert_abs_diff_eq!(eig_herm4(&mixed), Vector4::repeat(0.25), epsilon = 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = Vector4::new(c(h), c(0.0), c(0.0), c(h));
        let bell = Mat4Herm::new(psi * psi.adjoint()).unwrap();
        assert_abs_diff_eq!(eig_herm4(&bell), Vector4::new(1.0, 0.0, 0.0, 0.0), epsilon = 1e-14);

        // partial transpose of |Φ+><Φ+| is the swap operator / 2
        let mut swap = Matrix4::<C64>::zeros();
        swap[(0, 0)] = c(0.5);
        swap[(3, 3)] = c(0.5);
        swap[(1, 2)] = c(0.5);
        swap[(2, 1)] = c(0.5);
        let e = eig_herm4(&Mat4Herm::new(swap).unwrap());
        assert_abs_diff_eq!(e, Vector4::new(0.5, 0.5, 0.5, -0.5), epsilon = 1e-14);
    }

    #[test]
    fn herm4_random_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..2000 {
            let g = Matrix4::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let m = Mat4Herm::hermitian_part(&g);
            let e = eigh_herm4(&m);
            assert!((e.values.sum() - m.trace()).abs() < 1e-10);
            for k in 0..4 {
                let shifted = m.matrix() - Matrix4::identity() * c(e.values[k]);
                assert!(shifted.determinant().norm() < 1e-9);
                let v = e.vectors.column(k);
                assert!((m.matrix() * v - v * c(e.values[k])).norm() < 1e-10);
            }
            assert!((e.vectors.adjoint() * e.vectors - Matrix4::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_validation() {
        let mut m = Matrix4::<C64>::identity();
        m[(0, 1)] = C64::new(0.0, 1e-6);
        assert!(matches!(Mat4Herm::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn perpendicular_is_orthogonal_unit() {
        for v in [Vector3::x(), Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.0, 0.0, -2.0)] {
            let p = perpendicular(&v);
            assert!(p.dot(&v).abs() < 1e-15);
            assert!((p.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], 0.5, 5000, 1e-12);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }
}
