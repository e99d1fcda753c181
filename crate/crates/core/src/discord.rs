//! Zero-discord geometry, numeric discord, concurrence and the skew family.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{Matrix3, Matrix4, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{ellipsoid_a, ellipsoid_b, SteeringEllipsoid};
use crate::error::{Error, Result};
use crate::numerics::{eig_herm4, eigh_herm4, nelder_mead, Mat4Herm, C64};
use crate::qstate::{from_theta, kron, pauli, to_theta, DensityMatrix, ThetaMatrix};
use crate::steering::DEGENERACY_BAND;

/// Distance below which a needle's supporting line counts as passing
/// through the origin, and the tolerance of the Bob-side length relation.
pub const RADIAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

/// Correlation matrix of the skew family at `angle = 0`.
pub const SKEW_BASE: [f64; 3] = [-9.0 / 20.0, -3.0 / 10.0, -3.0 / 10.0];

/// `Θ` with `a = (0,0,½)`, `b = 0` and `T(θ) = R_y(θ) T R_y(θ)ᵀ`.
pub fn theta_family_theta(angle: f64) -> ThetaMatrix {
    let (s, c) = angle.sin_cos();
    let r = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
    let t = r * Matrix3::from_diagonal(&SKEW_BASE.into()) * r.transpose();
    ThetaMatrix::from_blocks(&Vector3::new(0.0, 0.0, 0.5), &Vector3::zeros(), &t).expect("skew family is physical")
}

pub fn theta_family(angle: f64) -> DensityMatrix {
    from_theta(&theta_family_theta(angle)).expect("skew family is physical")
}

fn distance_to_line(e: &SteeringEllipsoid) -> f64 {
    let f = e.axes.column(0);
    (e.center - f * f.dot(&e.center)).norm()
}

/// Zero discord for Alice: `E_A` is a point or a segment of a diameter.
pub fn zero_discord_a(theta: &ThetaMatrix) -> bool {
    let e = ellipsoid_a(theta);
    match e.dimension {
        0 => true,
        1 => distance_to_line(&e) < RADIAL_TOL,
        _ => false,
    }
}

/// Margin of the Bob zero-discord relation `|b| s_A = |c_A − a|` on a
/// one-dimensional `E_A`; `None` for other dimensions.
fn bob_length_margin(theta: &ThetaMatrix) -> Option<f64> {
    let e = ellipsoid_a(theta);
    (e.dimension == 1).then(|| (theta.b().norm() * e.semiaxes[0] - (e.center - theta.a()).norm()).abs())
}

/// Zero discord for Bob, decided both from Alice's needle (length relation)
/// and from Bob's ellipsoid (segment of a diameter).
pub fn zero_discord_b(theta: &ThetaMatrix) -> Result<bool> {
    let ea = ellipsoid_a(theta);
    let eb = ellipsoid_b(theta);
    let (by_a, margin_a) = match ea.dimension {
        0 => (true, f64::INFINITY),
        1 => {
            let m = bob_length_margin(theta).expect("needle");
            (m < RADIAL_TOL, (m - RADIAL_TOL).abs())
        }
        _ => (false, ea.semiaxes[1]),
    };
    let (by_b, margin_b) = match eb.dimension {
        0 => (true, f64::INFINITY),
        1 => {
            let m = distance_to_line(&eb);
            (m < RADIAL_TOL, (m - RADIAL_TOL).abs())
        }
        _ => (false, eb.semiaxes[1]),
    };
    if by_a != by_b && margin_a.min(margin_b) > DEGENERACY_BAND.1 {
        return Err(Error::InternalInconsistency(format!(
            "zero-discord tests for B disagree (Alice-side margin {margin_a:e}, Bob-side margin {margin_b:e})"
        )));
    }
    Ok(by_a)
}

/// `p|e⟩⟨e|⊗β₀ + (1−p)|ē⟩⟨ē|⊗β₁` with `|e⟩` the pure state along `axis`:
/// zero discord for Alice.
pub fn zero_discord_state_a(p: f64, axis: &Vector3<f64>, beta0: &Vector3<f64>, beta1: &Vector3<f64>) -> Result<DensityMatrix> {
    let n = axis.normalize();
    DensityMatrix::mixture(&[
        (p, DensityMatrix::product(&n, beta0)?),
        (1.0 - p, DensityMatrix::product(&-n, beta1)?),
    ])
}

/// Mirror image of [`zero_discord_state_a`]: zero discord for Bob.
pub fn zero_discord_state_b(p: f64, axis: &Vector3<f64>, alpha0: &Vector3<f64>, alpha1: &Vector3<f64>) -> Result<DensityMatrix> {
    let n = axis.normalize();
    DensityMatrix::mixture(&[
        (p, DensityMatrix::product(alpha0, &n)?),
        (1.0 - p, DensityMatrix::product(alpha1, &-n)?),
    ])
}

/// Wootters concurrence.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let yy = kron(&pauli(2), &pauli(2));
    let flipped = yy * m.conjugate() * yy;
    let root = psd_sqrt4(m);
    let r = Mat4Herm::hermitian_part(&(root * flipped * root));
    let mut l: Vec<f64> = eig_herm4(&r).iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0)
}

fn psd_sqrt4(m: &Matrix4<C64>) -> Matrix4<C64> {
    let e = eigh_herm4(&Mat4Herm::hermitian_part(m));
    let d = Matrix4::from_diagonal(&e.values.map(|x| C64::new(x.max(0.0).sqrt(), 0.0)));
    e.vectors * d * e.vectors.adjoint()
}

fn binary_entropy(p: f64) -> f64 {
    [p, 1.0 - p]
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Entropy in bits of a qubit with Bloch vector length `r`.
pub fn qubit_entropy(r: f64) -> f64 {
    binary_entropy((1.0 + r.min(1.0)) / 2.0)
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues().iter().filter(|&&x| x > 1e-15).map(|&x| -x * x.log2()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscordOptions {
    /// Azimuthal grid points over `[0, 2π)`.
    pub phi_steps: usize,
    /// Polar grid points over `[0, π/2]`, poles included.
    pub theta_steps: usize,
    pub refine: bool,
}

impl Default for DiscordOptions {
    fn default() -> Self {
        Self {
            phi_steps: 64,
            theta_steps: 32,
            refine: true,
        }
    }
}

fn axis(polar: f64, azimuth: f64) -> Vector3<f64> {
    let (st, ct) = polar.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Conditional entropy of Bob after Alice measures along `n`.
fn conditional_entropy(a: &Vector3<f64>, b: &Vector3<f64>, t: &Matrix3<f64>, n: &Vector3<f64>) -> f64 {
    let an = a.dot(n);
    let tn = t.transpose() * n;
    [1.0, -1.0]
        .iter()
        .map(|&s| {
            let w = 1.0 + s * an;
            if w <= 1e-15 {
                0.0
            } else {
                0.5 * w * qubit_entropy(((b + tn * s) / w).norm())
            }
        })
        .sum()
}

/// Discord with projective measurements on `party`, minimized over a polar
/// grid of measurement axes and optionally refined with Nelder–Mead from the
/// best grid cell. Doubling `phi_steps` and `theta_steps − 1` nests the grid,
/// so the unrefined value never increases with resolution.
pub fn discord_numeric(rho: &DensityMatrix, party: Party, opts: &DiscordOptions) -> f64 {
    let theta = match party {
        Party::A => to_theta(rho),
        Party::B => to_theta(rho).swap_parties(),
    };
    let (a, b, t) = (theta.a(), theta.b(), theta.t());
    let base = qubit_entropy(a.norm()) - von_neumann_entropy(rho);

    let nt = opts.theta_steps.max(2);
    let np = opts.phi_steps.max(1);
    let cells: Vec<(f64, f64)> = (0..nt)
        .flat_map(|i| {
            let polar = FRAC_PI_2 * i as f64 / (nt - 1) as f64;
            (0..np).map(move |j| (polar, TAU * j as f64 / np as f64))
        })
        .collect();
    let (value, best) = cells
        .par_iter()
        .map(|&(p, q)| (conditional_entropy(&a, &b, &t, &axis(p, q)), (p, q)))
        .reduce(
            || (f64::INFINITY, (0.0, 0.0)),
            |x, y| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
        );
    let mut cond = value;
    if opts.refine {
        let step = FRAC_PI_2 / (nt - 1) as f64;
        let m = nelder_mead(
            |x| conditional_entropy(&a, &b, &t, &axis(x[0], x[1])),
            &[best.0, best.1],
            step,
            400,
            1e-14,
        );
        cond = cond.min(m.value);
    }
    (base + cond).max(0.0)
}
