//! Steering ellipsoids, their volumes and shape classes.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lorentz::{canonical_state, PRODUCT_CUTOFF};
use crate::numerics::{sign_normalize, svd3, Mat3Sym};
use crate::qstate::{reshuffle, to_theta, DensityMatrix, ThetaMatrix};

/// Semiaxes above this count toward the dimension.
pub const RANK_TOL: f64 = 1e-7;

/// Volume of the Werner ellipsoid at the separability threshold, `4π/81`.
pub const CRITICAL_VOLUME: f64 = 4.0 * PI / 81.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteeringEllipsoid {
    pub center: Vector3<f64>,
    /// Descending.
    pub semiaxes: Vector3<f64>,
    /// Columns are the axis directions matching `semiaxes`.
    pub axes: Matrix3<f64>,
    pub dimension: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Point,
    Needle,
    Pancake,
    Obese,
}

impl Shape {
    pub fn from_dimension(d: usize) -> Self {
        match d {
            0 => Shape::Point,
            1 => Shape::Needle,
            2 => Shape::Pancake,
            _ => Shape::Obese,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Shape::Point => "point",
            Shape::Needle => "needle",
            Shape::Pancake => "pancake",
            Shape::Obese => "obese",
        }
    }
}

impl SteeringEllipsoid {
    pub fn point(center: Vector3<f64>) -> Self {
        Self {
            center,
            semiaxes: Vector3::zeros(),
            axes: Matrix3::identity(),
            dimension: 0,
        }
    }

    pub fn shape(&self) -> Shape {
        Shape::from_dimension(self.dimension)
    }

    /// Ellipsoid matrix `Q = F diag(s²) Fᵀ`.
    pub fn q(&self) -> Mat3Sym {
        let s2 = self.semiaxes.component_mul(&self.semiaxes);
        Mat3Sym::from_matrix(&(self.axes * Matrix3::from_diagonal(&s2) * self.axes.transpose()))
    }

    /// Orthonormal basis of the ellipsoid's span (first `dimension` axes).
    pub fn span(&self) -> Vec<Vector3<f64>> {
        (0..self.dimension).map(|k| self.axes.column(k).into_owned()).collect()
    }

    /// Affine normalizer: coordinates of `p − c` along the span axes, each
    /// divided by its semiaxis, together with the distance of `p` from the
    /// ellipsoid's affine span.
    pub fn normalize(&self, p: &Vector3<f64>) -> (Vec<f64>, f64) {
        let d = p - self.center;
        let mut rest = d;
        let mut u = Vec::with_capacity(self.dimension);
        for (k, f) in self.span().iter().enumerate() {
            let x = f.dot(&d);
            rest -= f * x;
            u.push(x / self.semiaxes[k]);
        }
        (u, rest.norm())
    }

    /// Inverse of [`normalize`](Self::normalize) on the span.
    pub fn denormalize(&self, u: &[f64]) -> Vector3<f64> {
        self.span()
            .iter()
            .zip(u)
            .enumerate()
            .fold(self.center, |acc, (k, (f, x))| acc + f * (x * self.semiaxes[k]))
    }

    /// `|𝒜(p)|² − 1` and the off-span distance; a point is inside when the
    /// first is ≤ 0 and the second vanishes.
    pub fn membership(&self, p: &Vector3<f64>) -> (f64, f64) {
        let (u, off) = self.normalize(p);
        (u.iter().map(|x| x * x).sum::<f64>() - 1.0, off)
    }

    /// Support function `max_{x∈E} u·x = u·c + √(uᵀQu)`.
    pub fn support(&self, u: &Vector3<f64>) -> f64 {
        u.dot(&self.center) + self.q().quadratic_form(u).max(0.0).sqrt()
    }

    /// Point `c + Σ_k u_k s_k f_k` for coordinates on the span.
    pub fn surface_point(&self, u: &[f64]) -> Vector3<f64> {
        self.denormalize(u)
    }
}

fn dimension_of(s: &Vector3<f64>) -> usize {
    s.iter().filter(|&&x| x > RANK_TOL).count()
}

/// Alice's ellipsoid matrix and center directly from
/// `Q_A = (T − abᵀ)(I + bbᵀ/(1−b²))(Tᵀ − baᵀ)/(1−b²)`, `c_A = (a − Tb)/(1−b²)`.
///
/// For a pure Bob marginal the ellipsoid is the point `a`.
pub fn q_matrix_a(theta: &ThetaMatrix) -> (Vector3<f64>, Mat3Sym) {
    let (a, b, t) = (theta.a(), theta.b(), theta.t());
    if b.norm() >= PRODUCT_CUTOFF {
        return (a, Mat3Sym::zeros());
    }
    let k = 1.0 / (1.0 - b.norm_squared());
    let m = t - a * b.transpose();
    let q = m * (Matrix3::identity() + b * b.transpose() * k) * m.transpose() * k;
    ((a - t * b) * k, Mat3Sym::from_matrix(&q))
}

/// Alice's steering ellipsoid.
///
/// Semiaxes and frame come from the singular value decomposition of the
/// canonical correlation matrix `T'`, whose Gram matrix is `Q_A`; this keeps
/// small semiaxes at full relative precision.
pub fn ellipsoid_a(theta: &ThetaMatrix) -> SteeringEllipsoid {
    let canon = match canonical_state(theta) {
        Ok(c) => c,
        Err(_) => return SteeringEllipsoid::point(theta.a()),
    };
    let svd = svd3(&canon.t());
    let mut axes = svd.u;
    for k in 0..3 {
        let col = sign_normalize(axes.column(k).into_owned());
        axes.set_column(k, &col);
    }
    SteeringEllipsoid {
        center: canon.a(),
        semiaxes: svd.singular,
        axes,
        dimension: dimension_of(&svd.singular),
    }
}

/// Bob's steering ellipsoid, obtained by exchanging the parties.
pub fn ellipsoid_b(theta: &ThetaMatrix) -> SteeringEllipsoid {
    ellipsoid_a(&theta.swap_parties())
}

/// `V = (4π/3) s₁s₂s₃`
pub fn volume(e: &SteeringEllipsoid) -> f64 {
    4.0 * PI / 3.0 * e.semiaxes.iter().product::<f64>()
}

/// `V_A = (64π/3) |det ρ − det ρ^{T_B}| / (1 − b²)²`
pub fn volume_from_rho(rho: &DensityMatrix) -> Result<f64> {
    let b = to_theta(rho).b();
    volume_formula(rho, b.norm())
}

/// Bob's volume by the same determinant formula, with `a` in place of `b`.
pub fn volume_b_from_rho(rho: &DensityMatrix) -> Result<f64> {
    let a = to_theta(rho).a();
    volume_formula(rho, a.norm())
}

fn volume_formula(rho: &DensityMatrix, marginal: f64) -> Result<f64> {
    if marginal >= PRODUCT_CUTOFF {
        return Err(Error::ProductState(marginal));
    }
    let w = 1.0 - marginal * marginal;
    Ok(64.0 * PI / 3.0 * determinant_gap(rho) / (w * w))
}

/// `|det ρ − det ρ^{T_B}|`, evaluated as `|det((ρ^{T_B})^R)|`.
///
/// The two determinants nearly cancel for low-rank `Θ`; the reshuffled
/// matrix then has low rank itself and its determinant carries no
/// cancellation error.
pub fn determinant_gap(rho: &DensityMatrix) -> f64 {
    reshuffle(rho.partial_transpose_b().matrix()).determinant().norm()
}

/// `|V_B − (1−b²)²/(1−a²)² V_A|` with both volumes from the ellipsoids.
pub fn volume_ratio_check(theta: &ThetaMatrix) -> f64 {
    let va = volume(&ellipsoid_a(theta));
    let vb = volume(&ellipsoid_b(theta));
    let (a2, b2) = (theta.a().norm_squared(), theta.b().norm_squared());
    (vb - (1.0 - b2).powi(2) / (1.0 - a2).powi(2) * va).abs()
}

pub fn is_obese(e: &SteeringEllipsoid) -> bool {
    e.semiaxes[2] > RANK_TOL
}
