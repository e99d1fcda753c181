//! Minkowski-space view of single-qubit operators and local filters.
//!
//! A Hermitian 2×2 operator `½ Σ X_μ σ_μ` is identified with the 4-vector
//! `X = (X₀, x)`; it is positive exactly when `X` lies in the forward light
//! cone. Invertible local filters act on Θ as proper orthochronous Lorentz
//! transformations.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::numerics::C64;
use crate::qstate::{assemble_theta, kron, upsilon, ThetaMatrix};

/// Beyond this Bloch length Bob's marginal counts as pure.
pub const PRODUCT_CUTOFF: f64 = 1.0 - 1e-9;
pub const LIGHT_CONE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinkowskiVector {
    pub x0: f64,
    pub x: Vector3<f64>,
}

impl MinkowskiVector {
    pub fn new(x0: f64, x: Vector3<f64>) -> Self {
        Self { x0, x }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], Vector3::new(v[1], v[2], v[3]))
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x0, self.x.x, self.x.y, self.x.z)
    }

    /// Rank-one projector onto the pure state with Bloch vector `v`.
    pub fn projector(v: &Vector3<f64>) -> Self {
        Self::new(1.0, *v)
    }

    /// The operator `½ Σ X_μ σ_μ`.
    pub fn operator(&self) -> Matrix2<C64> {
        let c = |r: f64| C64::new(0.5 * r, 0.0);
        let i = C64::new(0.0, 0.5);
        Matrix2::new(
            c(self.x0 + self.x.z),
            c(self.x.x) - i * self.x.y,
            c(self.x.x) + i * self.x.y,
            c(self.x0 - self.x.z),
        )
    }

    pub fn minkowski_norm_sq(&self) -> f64 {
        self.x0 * self.x0 - self.x.norm_squared()
    }
}

pub fn is_positive(x: &MinkowskiVector) -> bool {
    x.x0 >= -LIGHT_CONE_TOL && x.minkowski_norm_sq() >= -LIGHT_CONE_TOL
}

pub fn minkowski_metric() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, -1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostMatrix(Matrix4<f64>);

impl BoostMatrix {
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn gamma(&self) -> f64 {
        self.0[(0, 0)]
    }
}

/// `1/√(1 − b²)`
pub fn gamma(b: &Vector3<f64>) -> f64 {
    1.0 / (1.0 - b.norm_squared()).sqrt()
}

/// `I + (γ−1)/b² · b bᵀ`, using `(γ−1)/b² = γ²/(γ+1)` to avoid the 0/0 at b = 0.
fn boost_spatial(b: &Vector3<f64>, g: f64) -> Matrix3<f64> {
    Matrix3::identity() + b * b.transpose() * (g * g / (g + 1.0))
}

/// `L_b = [[γ, −γbᵀ], [−γb, I + (γ−1)/b² bbᵀ]]`
pub fn boost(b: &Vector3<f64>) -> Result<BoostMatrix> {
    let nb = b.norm();
    if nb >= 1.0 - LIGHT_CONE_TOL {
        return Err(Error::Superluminal(nb));
    }
    let g = gamma(b);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = g;
    let s = boost_spatial(b, g);
    for i in 0..3 {
        m[(0, i + 1)] = -g * b[i];
        m[(i + 1, 0)] = -g * b[i];
        for j in 0..3 {
            m[(i + 1, j + 1)] = s[(i, j)];
        }
    }
    Ok(BoostMatrix(m))
}

/// The filtered state with Bob's marginal maximally mixed, `Θ' = γ Θ L_b`.
///
/// Computed in product form: `a' = γ²(a − Tb)`, `T' = γ(T − abᵀ)(I + γ²/(γ+1) bbᵀ)`.
pub fn canonical_state(theta: &ThetaMatrix) -> Result<ThetaMatrix> {
    let b = theta.b();
    let nb = b.norm();
    if nb >= PRODUCT_CUTOFF {
        return Err(Error::ProductState(nb));
    }
    let (a, t) = (theta.a(), theta.t());
    let g = gamma(&b);
    let a_p = (a - t * b) * (g * g);
    let t_p = (t - a * b.transpose()) * boost_spatial(&b, g) * g;
    Ok(ThetaMatrix::from_matrix_unchecked(assemble_theta(&a_p, &Vector3::zeros(), &t_p)))
}

/// `Λ = Υ (S ⊗ S*) Υ† / |det S|`
pub fn slocc_to_lorentz(s: &Matrix2<C64>) -> Result<Matrix4<f64>> {
    let det = s.determinant().norm();
    if det < 1e-12 {
        return Err(Error::Singular(det));
    }
    let u = upsilon();
    let lam = u * kron(s, &s.conjugate()) * u.adjoint() / C64::new(det, 0.0);
    let imag = lam.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if imag > 1e-10 * lam.norm().max(1.0) {
        return Err(Error::InternalInconsistency(format!(
            "Lorentz image has imaginary part {imag:e}"
        )));
    }
    Ok(lam.map(|z| z.re))
}

/// `Θ' = Λ_A Θ Λ_Bᵀ`, renormalized so that `Θ'₀₀ = 1`.
pub fn apply_local_filters(theta: &ThetaMatrix, la: &Matrix4<f64>, lb: &Matrix4<f64>) -> ThetaMatrix {
    let m = la * theta.matrix() * lb.transpose();
    ThetaMatrix::from_matrix_unchecked(m / m[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{random_density, to_theta, DensityMatrix};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn positivity_examples() {
        assert!(is_positive(&MinkowskiVector::new(1.0, Vector3::zeros())));
        assert!(is_positive(&MinkowskiVector::new(1.0, Vector3::x())));
        assert!(!is_positive(&MinkowskiVector::new(1.0, Vector3::new(1.1, 0.0, 0.0))));
        assert!(!is_positive(&MinkowskiVector::new(-1.0, Vector3::zeros())));
    }

    #[test]
    fn boost_examples() {
        assert_eq!(*boost(&Vector3::zeros()).unwrap().matrix(), Matrix4::identity());
        let l = boost(&Vector3::new(0.0, 0.0, 0.6)).unwrap();
        assert!((l.gamma() - 1.25).abs() < 1e-15);
        let eta = minkowski_metric();
        assert!((l.matrix().transpose() * eta * l.matrix() - eta).abs().max() < 1e-12);
        assert!(matches!(boost(&Vector3::x()), Err(Error::Superluminal(_))));
    }

    #[test]
    fn canonical_state_examples() {
        let mm = to_theta(&DensityMatrix::maximally_mixed());
        assert_eq!(canonical_state(&mm).unwrap(), mm);

        let plus = Vector3::x();
        let rho = DensityMatrix::mixture(&[
            (0.5, DensityMatrix::product(&Vector3::z(), &Vector3::z()).unwrap()),
            (0.5, DensityMatrix::product(&-Vector3::z(), &plus).unwrap()),
        ])
        .unwrap();
        let theta = to_theta(&rho);
        let c = canonical_state(&theta).unwrap();
        assert!(c.b().norm() < 1e-10);
        assert!((c.matrix()[(0, 0)] - 1.0).abs() < 1e-10);

        // full product γΘL_b as an oracle for the product form
        let l = boost(&theta.b()).unwrap();
        let full = theta.matrix() * l.matrix() * l.gamma();
        assert!((full - c.matrix()).abs().max() < 1e-12);

        let pure_b = to_theta(&DensityMatrix::product(&Vector3::x(), &Vector3::z()).unwrap());
        assert!(matches!(canonical_state(&pure_b), Err(Error::ProductState(_))));
    }

    #[test]
    fn canonical_state_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 0..200 {
            let theta = to_theta(&random_density(k % 4 + 1, &mut rng));
            let once = canonical_state(&theta).unwrap();
            let twice = canonical_state(&once).unwrap();
            assert!((once.matrix() - twice.matrix()).abs().max() < 1e-10);
        }
    }

    #[test]
    fn boost_preserves_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eta = minkowski_metric();
        for _ in 0..1000 {
            let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if v.norm() >= 0.999 {
                continue;
            }
            let l = boost(&v).unwrap();
            assert!((l.matrix().transpose() * eta * l.matrix() - eta).abs().max() < 1e-10 * l.gamma().powi(2));
            assert!(l.gamma() >= 1.0);
            // boosting Bob's marginal direction removes it
            let y = l.matrix() * Vector4::new(1.0, v.x, v.y, v.z);
            assert!(Vector3::new(y[1], y[2], y[3]).norm() < 1e-10 * l.gamma());
        }
    }

    #[test]
    fn positivity_matches_operator_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            let x = MinkowskiVector::new(rng.random_range(-1.0..2.0), Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let op = x.operator();
            let tr = op.trace().re;
            let det = op.determinant().re;
            let min_eig = 0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt();
            assert_eq!(is_positive(&x), min_eig >= -1e-12, "{x:?}");
        }
    }

    fn random_s(rng: &mut impl Rng) -> Matrix2<C64> {
        Matrix2::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn slocc_lorentz_properties() {
        assert_abs_diff_eq!(slocc_to_lorentz(&Matrix2::identity()).unwrap(), Matrix4::identity(), epsilon = 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = Matrix2::new(C64::new(h, 0.0), C64::new(0.0, h), C64::new(0.0, h), C64::new(h, 0.0));
        let l = slocc_to_lorentz(&u).unwrap();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-12);
        for i in 1..4 {
            assert!(l[(0, i)].abs() < 1e-12 && l[(i, 0)].abs() < 1e-12);
        }
        assert!(matches!(slocc_to_lorentz(&Matrix2::zeros()), Err(Error::Singular(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let l = slocc_to_lorentz(&random_s(&mut rng)).unwrap();
            assert!((l.determinant() - 1.0).abs() < 1e-9);
            assert!(l[(0, 0)] >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn bob_filter_is_the_boost_up_to_rotation() {
        let b = Vector3::new(0.0, 0.0, 0.6);
        // S = (2ρ_B)^{-1/2}, diagonal for b along z
        let s = Matrix2::new(
            C64::new(1.0 / 1.6f64.sqrt(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0 / 0.4f64.sqrt(), 0.0),
        );
        let lam = slocc_to_lorentz(&s).unwrap();
        let l = boost(&b).unwrap();
        assert!((lam - l.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn theta_transformation_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 0..1000 {
            let (sa, sb) = (random_s(&mut rng), random_s(&mut rng));
            let rho = random_density(k % 4 + 1, &mut rng);
            let op = kron(&sa, &sb);
            let m = op * rho.matrix() * op.adjoint();
            let m = m / m.trace();
            let direct = to_theta(&DensityMatrix::new(m).unwrap());
            let law = apply_local_filters(
                &to_theta(&rho),
                &slocc_to_lorentz(&sa).unwrap(),
                &slocc_to_lorentz(&sb).unwrap(),
            );
            assert!((direct.matrix() - law.matrix()).abs().max() < 1e-9);
        }
    }
}
