//! Two-qubit states in density-matrix and Pauli-basis (Θ) form.
//!
//! Basis order is |00⟩, |01⟩, |10⟩, |11⟩ with Alice as the first factor, so
//! the composite index of |ij⟩ is `2i + j`.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{eig_herm4, Mat4Herm, C64};

pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
/// Looser positivity tolerance used when building a state from Θ.
pub const THETA_PSD_TOL: f64 = 1e-8;
pub const BLOCH_TOL: f64 = 1e-9;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Pauli matrix σ_μ with σ₀ = 𝟙.
pub fn pauli(mu: usize) -> Matrix2<C64> {
    let (o, z, i) = (c(1.0), c(0.0), C64::new(0.0, 1.0));
    match mu {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -i, i, z),
        3 => Matrix2::new(o, z, z, -o),
        _ => panic!("Pauli index {mu} out of range"),
    }
}

pub fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, s| a[(r / 2, s / 2)] * b[(r % 2, s % 2)])
}

/// Single-qubit state ½(𝟙 + r·σ).
pub fn qubit(r: &Vector3<f64>) -> Matrix2<C64> {
    (pauli(0) + pauli(1) * c(r.x) + pauli(2) * c(r.y) + pauli(3) * c(r.z)) * c(0.5)
}

/// Bloch vector of a 2×2 operator, `tr(m σ_i)`.
pub fn bloch(m: &Matrix2<C64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| (m * pauli(i + 1)).trace().re)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Mat4Herm);

impl DensityMatrix {
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        let h = Mat4Herm::new(m).map_err(|e| Error::InvalidState(format!("Hermiticity violated: {e}")))?;
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {tr}, must be 1 within {TRACE_TOL:e}"
            )));
        }
        let min = eig_herm4(&h).min();
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "positivity violated: eigenvalue {min:e} below -{PSD_TOL:e}"
            )));
        }
        Ok(Self(h))
    }

    pub(crate) fn from_herm_unchecked(h: Mat4Herm) -> Self {
        Self(h)
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat4Herm::hermitian_part(&Matrix4::identity().scale(0.25).map(c)))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &Vector4<C64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi.unscale(n);
        Ok(Self(Mat4Herm::hermitian_part(&(v * v.adjoint()))))
    }

    /// `ρ(α) ⊗ ρ(β)` from two Bloch vectors.
    pub fn product(alpha: &Vector3<f64>, beta: &Vector3<f64>) -> Result<Self> {
        Self::new(kron(&qubit(alpha), &qubit(beta)))
    }

    /// Convex mixture `Σ wᵢ ρᵢ`.
    pub fn mixture(terms: &[(f64, DensityMatrix)]) -> Result<Self> {
        let m = terms
            .iter()
            .fold(Matrix4::zeros(), |acc, (w, r)| acc + r.matrix() * c(*w));
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        self.0.matrix()
    }

    pub fn herm(&self) -> &Mat4Herm {
        &self.0
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vector4<f64> {
        eig_herm4(&self.0)
    }

    pub fn purity(&self) -> f64 {
        (self.matrix() * self.matrix()).trace().re
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn reduced_a(&self) -> Matrix2<C64> {
        let m = self.matrix();
        Matrix2::from_fn(|i, k| m[(2 * i, 2 * k)] + m[(2 * i + 1, 2 * k + 1)])
    }

    pub fn reduced_b(&self) -> Matrix2<C64> {
        let m = self.matrix();
        Matrix2::from_fn(|j, l| m[(j, l)] + m[(2 + j, 2 + l)])
    }

    pub fn partial_transpose_b(&self) -> Mat4Herm {
        Mat4Herm::hermitian_part(&partial_transpose_b(self.matrix()))
    }

    /// Largest absolute entry difference.
    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        (self.matrix() - other.matrix())
            .iter()
            .fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Real 4×4 Pauli-basis matrix `Θ_μν = tr(ρ σ_μ⊗σ_ν)` with blocks
/// `(1, bᵀ; a, T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaMatrix(Matrix4<f64>);

impl ThetaMatrix {
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        if (m[(0, 0)] - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "Θ₀₀ is {}, must be 1 within {TRACE_TOL:e}",
                m[(0, 0)]
            )));
        }
        let theta = Self(m);
        let (na, nb) = (theta.a().norm(), theta.b().norm());
        if na > 1.0 + BLOCH_TOL {
            return Err(Error::InvalidState(format!("|a| = {na} exceeds 1")));
        }
        if nb > 1.0 + BLOCH_TOL {
            return Err(Error::InvalidState(format!("|b| = {nb} exceeds 1")));
        }
        Ok(theta)
    }

    pub fn from_blocks(a: &Vector3<f64>, b: &Vector3<f64>, t: &Matrix3<f64>) -> Result<Self> {
        Self::new(assemble_theta(a, b, t))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix4<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Alice's Bloch vector.
    pub fn a(&self) -> Vector3<f64> {
        Vector3::new(self.0[(1, 0)], self.0[(2, 0)], self.0[(3, 0)])
    }

    /// Bob's Bloch vector.
    pub fn b(&self) -> Vector3<f64> {
        Vector3::new(self.0[(0, 1)], self.0[(0, 2)], self.0[(0, 3)])
    }

    /// Correlation matrix `T_ij = tr(ρ σ_i⊗σ_j)`.
    pub fn t(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(1, 1).into_owned()
    }

    /// Exchanges the roles of Alice and Bob.
    pub fn swap_parties(&self) -> Self {
        Self(self.0.transpose())
    }
}

pub(crate) fn assemble_theta(a: &Vector3<f64>, b: &Vector3<f64>, t: &Matrix3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(0, 0)] = 1.0;
    for i in 0..3 {
        m[(0, i + 1)] = b[i];
        m[(i + 1, 0)] = a[i];
        for j in 0..3 {
            m[(i + 1, j + 1)] = t[(i, j)];
        }
    }
    m
}

pub fn to_theta(rho: &DensityMatrix) -> ThetaMatrix {
    let paulis: [Matrix2<C64>; 4] = [pauli(0), pauli(1), pauli(2), pauli(3)];
    let m = Matrix4::from_fn(|mu, nu| (rho.matrix() * kron(&paulis[mu], &paulis[nu])).trace().re);
    ThetaMatrix(m)
}

/// `ρ = ¼ Σ Θ_μν σ_μ⊗σ_ν` without any positivity check.
pub fn theta_to_matrix(theta: &ThetaMatrix) -> Matrix4<C64> {
    let mut m = Matrix4::<C64>::zeros();
    for mu in 0..4 {
        for nu in 0..4 {
            let w = theta.0[(mu, nu)];
            if w != 0.0 {
                m += kron(&pauli(mu), &pauli(nu)) * c(0.25 * w);
            }
        }
    }
    m
}

pub fn from_theta(theta: &ThetaMatrix) -> Result<DensityMatrix> {
    let h = Mat4Herm::hermitian_part(&theta_to_matrix(theta));
    let min = eig_herm4(&h).min();
    if min < -THETA_PSD_TOL {
        return Err(Error::NotPhysical(min));
    }
    Ok(DensityMatrix::from_herm_unchecked(h))
}

/// Transposes Bob's indices: `(ij; kl) → (il; kj)`.
pub fn partial_transpose_b(m: &Matrix4<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, s| {
        let (i, l) = (r / 2, r % 2);
        let (k, j) = (s / 2, s % 2);
        m[(2 * i + j, 2 * k + l)]
    })
}

/// Realignment `R_(ij),(kl) = m_(ik),(jl)`.
pub fn reshuffle(m: &Matrix4<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, s| {
        let (i, j) = (r / 2, r % 2);
        let (k, l) = (s / 2, s % 2);
        m[(2 * i + k, 2 * j + l)]
    })
}

/// The unitary Υ with `Θ = 2 Υ ρ^R Υᵀ`.
pub fn upsilon() -> Matrix4<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (o, z, i) = (c(h), c(0.0), C64::new(0.0, h));
    Matrix4::new(
        o, z, z, o, //
        z, o, o, z, //
        z, i, -i, z, //
        o, z, z, -o,
    )
}

/// Θ computed through the reshuffled matrix, independent of the trace route.
pub fn theta_via_reshuffle(rho: &DensityMatrix) -> Matrix4<f64> {
    let u = upsilon();
    (u * reshuffle(rho.matrix()) * u.transpose() * c(2.0)).map(|z| z.re)
}

/// `|det M − det M^{T_B} + det((M^{T_B})^R)|`, which vanishes for every 4×4 `M`.
pub fn det_reshuffle_identity_check(m: &Matrix4<C64>) -> f64 {
    let pt = partial_transpose_b(m);
    (m.determinant() - pt.determinant() + reshuffle(&pt).determinant()).norm()
}

/// Ginibre-induced random state of the given rank: `ρ = GG†/tr(GG†)` with
/// `G` a 4×rank matrix of standard complex Gaussians.
pub fn random_density<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> DensityMatrix {
    assert!((1..=4).contains(&rank), "rank must be in 1..=4");
    let mut g = Matrix4::<C64>::zeros();
    for r in 0..4 {
        for k in 0..rank {
            g[(r, k)] = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    let m = g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_herm_unchecked(Mat4Herm::hermitian_part(&m.unscale(tr)))
}

pub fn random_density_seeded(rank: usize, seed: u64) -> DensityMatrix {
    use rand::SeedableRng;
    random_density(rank, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
}
