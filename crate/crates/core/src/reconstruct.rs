//! Rebuilding a two-qubit state from `(Q_A, c_A, a, b)`.
//!
//! The canonical state has `b̃ = 0`, `ã = c_A` and `T̃ = √Q_A O` for an
//! orthogonal `O`. Undoing Bob's filter gives
//! `T = c_A bᵀ + √Q_A O K`, `K_kj = tr(√ρ_B σ_k √ρ_B σ_j)`, and the
//! reduced state of Alice forces `O b = (√Q_A)⁻¹(a − c_A)`. `O` is fixed up
//! to rotations about `b`, which act as Bob unitaries commuting with `ρ_B`.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::ellipsoid::q_matrix_a;
use crate::error::{Error, Result};
use crate::numerics::{axis_angle, eig_sym3, perpendicular, sign_normalize, svd3, Mat3Sym, PsdSqrt, C64, PSD_CLAMP};
use crate::qstate::{from_theta, pauli, qubit, DensityMatrix, ThetaMatrix};

/// Square-root eigenvalues of `Q_A` below this count as kernel.
pub const SQRT_RANK_TOL: f64 = 1e-7;
pub const COMPATIBILITY_TOL: f64 = 1e-8;
pub const LENGTH_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricData {
    #[serde(rename = "Q", with = "mat3_rows")]
    pub q: Mat3Sym,
    pub c: Vector3<f64>,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

mod mat3_rows {
    use crate::numerics::Mat3Sym;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(q: &Mat3Sym, s: S) -> Result<S::Ok, S::Error> {
        let m = q.to_matrix();
        let rows: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat3Sym, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(Mat3Sym::from_matrix(&nalgebra::Matrix3::from_fn(|i, j| rows[i][j])))
    }
}

impl GeometricData {
    /// Largest absolute difference over all four components.
    pub fn distance(&self, other: &GeometricData) -> f64 {
        let q = (self.q.to_matrix() - other.q.to_matrix()).amax();
        q.max((self.c - other.c).amax())
            .max((self.a - other.a).amax())
            .max((self.b - other.b).amax())
    }
}

pub fn extract_geometry(theta: &ThetaMatrix) -> GeometricData {
    let (c, q) = q_matrix_a(theta);
    GeometricData { q, c, a: theta.a(), b: theta.b() }
}

/// State with `b̃ = 0`, `ã = c` and `T̃ = √Q O`.
pub fn canonical_from_geometry(q: &Mat3Sym, c: &Vector3<f64>, o: &Matrix3<f64>) -> Result<DensityMatrix> {
    let root = q.sqrt_psd()?.to_matrix();
    let theta = ThetaMatrix::from_blocks(c, &Vector3::zeros(), &(root * o)).map_err(|_| Error::NotPhysical(f64::NAN))?;
    from_theta(&theta)
}

/// Minimal rotation taking `b` to `target`, about `b × target`. Antiparallel
/// pairs rotate by π about `perpendicular(b)`.
pub fn solve_rotation_m(b: &Vector3<f64>, target: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let (nb, nt) = (b.norm(), target.norm());
    if (nb - nt).abs() > LENGTH_TOL {
        return Err(Error::LengthMismatch(nb, nt));
    }
    let cross = b.cross(target);
    let dot = b.dot(target);
    if cross.norm() <= 1e-15 * nb * nt {
        if dot >= 0.0 {
            return Ok(Matrix3::identity());
        }
        return Ok(axis_angle(&perpendicular(b), std::f64::consts::PI));
    }
    Ok(axis_angle(&cross, cross.norm().atan2(dot)))
}

/// `K_kj = tr(√ρ_B σ_k √ρ_B σ_j)` for `k, j = 1..3`.
fn bob_filter_matrix(b: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let root: Matrix2<C64> = qubit(b).sqrt_psd()?;
    Ok(Matrix3::from_fn(|k, j| (root * pauli(k + 1) * root * pauli(j + 1)).trace().re))
}

/// Reflection fixing `b`; `−I` when `b = 0`.
fn reflection_fixing(b: &Vector3<f64>) -> Matrix3<f64> {
    if b.norm() == 0.0 {
        return -Matrix3::identity();
    }
    let w = perpendicular(b);
    Matrix3::identity() - w * w.transpose() * 2.0
}

/// `√Q` with roots below [`SQRT_RANK_TOL`] set to zero, so rounding noise in
/// the null space of a degenerate `Q` is not amplified.
fn truncated_root(q: &Mat3Sym) -> Matrix3<f64> {
    let e = eig_sym3(q);
    let roots = e.values.map(|x| if x > SQRT_RANK_TOL * SQRT_RANK_TOL { x.sqrt() } else { 0.0 });
    e.vectors * Matrix3::from_diagonal(&roots) * e.vectors.transpose()
}

/// Orthogonal matrices `O` with `O b = (√Q)⁺(a − c) + k`, in the order they
/// are tried: proper rotations first, kernel sign `+` before `−`.
fn candidates(g: &GeometricData) -> Result<Vec<Matrix3<f64>>> {
    let e = eig_sym3(&g.q);
    let roots = e.values.map(|x| x.max(0.0).sqrt());
    let rank = roots.iter().filter(|&&s| s > SQRT_RANK_TOL).count();
    let d = g.a - g.c;
    let mut target = Vector3::zeros();
    let mut off = d;
    for k in 0..rank {
        let v = e.vectors.column(k);
        let along = v.dot(&d);
        target += v * (along / roots[k]);
        off -= v * along;
    }
    if off.norm() > COMPATIBILITY_TOL {
        return Err(Error::Incompatible(format!(
            "a − c has a component {:e} outside the ellipsoid's span",
            off.norm()
        )));
    }
    let nb = g.b.norm();
    if nb == 0.0 {
        if d.norm() > COMPATIBILITY_TOL {
            return Err(Error::Incompatible("b = 0 requires a = c".into()));
        }
        return Ok(vec![Matrix3::identity(), -Matrix3::identity()]);
    }
    let nt = target.norm();
    if nt > nb + LENGTH_TOL {
        return Err(Error::Incompatible(format!("(√Q)⁺(a − c) has length {nt}, longer than |b| = {nb}")));
    }
    let kernel: Vec<Vector3<f64>> = if rank < 3 {
        let k = (nb * nb - nt * nt).max(0.0).sqrt();
        let dir = sign_normalize(e.vectors.column(rank).into_owned());
        vec![target + dir * k, target - dir * k]
    } else {
        vec![target]
    };
    let reflect = reflection_fixing(&g.b);
    let mut out = Vec::with_capacity(4);
    for det in [false, true] {
        for t in &kernel {
            let m = solve_rotation_m(&g.b, t).map_err(|_| Error::Incompatible(format!("|b| = {nb} and |O b| = {} differ", t.norm())))?;
            out.push(if det { m * reflect } else { m });
        }
    }
    Ok(out)
}

/// State with geometry `g`, with Bob's residual rotation about `b` fixed to
/// the identity. The first physical candidate for `O` wins.
pub fn reconstruct_state(g: &GeometricData) -> Result<DensityMatrix> {
    let min = eig_sym3(&g.q).values.min();
    if min < -PSD_CLAMP {
        return Err(Error::NotPsd(min));
    }
    let root = truncated_root(&g.q);
    let k = bob_filter_matrix(&g.b)?;
    let mut last = Error::NotPhysical(f64::NAN);
    for o in candidates(g)? {
        let t = g.c * g.b.transpose() + root * o * k;
        let theta = match ThetaMatrix::from_blocks(&g.a, &g.b, &t) {
            Ok(theta) => theta,
            Err(e) => {
                last = e;
                continue;
            }
        };
        match from_theta(&theta) {
            Ok(rho) => return Ok(rho),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Best Bob-side orthogonal map `R` with `R b = b` taking `θ` towards `other`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeFit {
    pub rotation: Matrix3<f64>,
    /// Largest entry of `|Θ diag(1, R) − Θ_other|`.
    pub residual: f64,
}

/// Fits `T R ≈ T_other` over rotations (`proper`) or reflections fixing `b`.
/// For `b = 0` every orthogonal matrix of the requested determinant is allowed.
pub fn bob_gauge_fit(theta: &ThetaMatrix, other: &ThetaMatrix, proper: bool) -> GaugeFit {
    let (t, u) = (theta.t(), other.t());
    let b = theta.b();
    let rotation = if b.norm() < 1e-12 {
        let s = svd3(&(t.transpose() * u));
        let mut left = s.u;
        if ((left * s.v.transpose()).determinant() > 0.0) != proper {
            left.column_mut(2).neg_mut();
        }
        left * s.v.transpose()
    } else {
        let n = b.normalize();
        let e1 = perpendicular(&n);
        let e2 = n.cross(&e1);
        let basis = Matrix3::from_columns(&[e1, e2, n]);
        let (x, y) = (t * basis, u * basis);
        let m = x.columns(0, 2).transpose() * y.columns(0, 2);
        let plane = if proper {
            let phi = (m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)]);
            Matrix2::new(phi.cos(), -phi.sin(), phi.sin(), phi.cos())
        } else {
            let phi = (m[(0, 1)] + m[(1, 0)]).atan2(m[(0, 0)] - m[(1, 1)]);
            Matrix2::new(phi.cos(), phi.sin(), phi.sin(), -phi.cos())
        };
        let mut r = Matrix3::zeros();
        r.fixed_view_mut::<2, 2>(0, 0).copy_from(&plane);
        r[(2, 2)] = 1.0;
        basis * r * basis.transpose()
    };
    let residual = (t * rotation - u)
        .amax()
        .max((theta.a() - other.a()).amax())
        .max((theta.b() - other.b()).amax());
    GaugeFit { rotation, residual }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::{ellipsoid_a, volume};
    use crate::lorentz::canonical_state;
    use crate::qstate::{random_density, to_theta};
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, UnitSphere};

    fn example_state() -> DensityMatrix {
        let plus = Vector3::x();
        DensityMatrix::mixture(&[
            (0.5, DensityMatrix::product(&Vector3::z(), &Vector3::z()).unwrap()),
            (0.5, DensityMatrix::product(&-Vector3::z(), &plus).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn rotation_examples() {
        let b = Vector3::new(0.3, -0.2, 0.5);
        assert_eq!(solve_rotation_m(&b, &b).unwrap(), Matrix3::identity());
        let m = solve_rotation_m(&(Vector3::x() * 0.7), &(Vector3::y() * 0.7)).unwrap();
        assert!((m - axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2)).amax() < 1e-15);
        let anti = solve_rotation_m(&b, &-b).unwrap();
        assert!((anti * b + b).norm() < 1e-12);
        assert!((anti.determinant() - 1.0).abs() < 1e-12);
        assert!(matches!(solve_rotation_m(&b, &(b * 2.0)), Err(Error::LengthMismatch(..))));
    }

    #[test]
    fn random_rotations_hit_their_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..1000 {
            let r: f64 = rng.random_range(0.0..1.0);
            let b = Vector3::from(UnitSphere.sample(&mut rng)) * r;
            let t = Vector3::from(UnitSphere.sample(&mut rng)) * r;
            let m = solve_rotation_m(&b, &t).unwrap();
            assert!((m * b - t).norm() < 1e-9);
            assert!((m.transpose() * m - Matrix3::identity()).amax() < 1e-12);
            // the axis is orthogonal to both vectors
            let axis = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
            assert!(axis.dot(&b).abs() < 1e-9 && axis.dot(&t).abs() < 1e-9);
        }
    }

    #[test]
    fn canonical_examples() {
        let r = Vector3::new(0.1, -0.4, 0.3);
        let rho = canonical_from_geometry(&Mat3Sym::zeros(), &r, &Matrix3::identity()).unwrap();
        let expected = DensityMatrix::product(&r, &Vector3::zeros()).unwrap();
        assert!(rho.distance(&expected) < 1e-15);

        let p = 0.4;
        let q = Mat3Sym::diag(p * p, p * p, p * p);
        let w = canonical_from_geometry(&q, &Vector3::zeros(), &-Matrix3::identity()).unwrap();
        let e = ellipsoid_a(&to_theta(&w));
        assert!((e.semiaxes - Vector3::repeat(p)).norm() < 1e-12);

        // Q = I with O = +I is the partial transpose of the singlet
        assert!(matches!(
            canonical_from_geometry(&Mat3Sym::identity(), &Vector3::zeros(), &Matrix3::identity()),
            Err(Error::NotPhysical(_))
        ));
    }

    #[test]
    fn canonical_round_trip_with_polar_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..500 {
            let theta = canonical_state(&to_theta(&random_density(rng.random_range(1..=4), &mut rng))).unwrap();
            let g = extract_geometry(&theta);
            let s = svd3(&theta.t());
            let o = s.u * s.v.transpose();
            let rebuilt = to_theta(&canonical_from_geometry(&g.q, &g.c, &o).unwrap());
            let tt = |m: &Matrix3<f64>| m * m.transpose();
            assert!((tt(&rebuilt.t()) - tt(&theta.t())).amax() < 1e-10);
            assert!((rebuilt.matrix() - theta.matrix()).amax() < 1e-9);
        }
    }

    #[test]
    fn round_trip_preserves_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for k in 0..2000 {
            let rho = random_density(k % 4 + 1, &mut rng);
            let g = extract_geometry(&to_theta(&rho));
            let rebuilt = reconstruct_state(&g).unwrap();
            assert!(extract_geometry(&to_theta(&rebuilt)).distance(&g) < 1e-8, "state {k}");
        }
    }

    #[test]
    fn degenerate_geometries_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let sphere = |rng: &mut ChaCha8Rng| Vector3::from(UnitSphere.sample(rng));
        for n in 1..=3 {
            for _ in 0..200 {
                let terms: Vec<(f64, DensityMatrix)> = (0..n)
                    .map(|_| {
                        let a = sphere(&mut rng) * rng.random_range(0.0..1.0);
                        let b = sphere(&mut rng) * rng.random_range(0.0..1.0);
                        (1.0 / n as f64, DensityMatrix::product(&a, &b).unwrap())
                    })
                    .collect();
                let rho = DensityMatrix::mixture(&terms).unwrap();
                let g = extract_geometry(&to_theta(&rho));
                let rebuilt = reconstruct_state(&g).unwrap();
                assert!(extract_geometry(&to_theta(&rebuilt)).distance(&g) < 1e-8);
            }
        }
    }

    #[test]
    fn example_state_matches_up_to_bob_unitary() {
        let rho = example_state();
        let theta = to_theta(&rho);
        let rebuilt = to_theta(&reconstruct_state(&extract_geometry(&theta)).unwrap());
        let fit = bob_gauge_fit(&theta, &rebuilt, true);
        assert!(fit.residual < 1e-8, "{}", fit.residual);
        assert!((fit.rotation * theta.b() - theta.b()).norm() < 1e-12);
    }

    #[test]
    fn gauge_rotation_is_a_bob_unitary_commuting_with_rho_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let mut proper = 0;
        for _ in 0..300 {
            let rho = random_density(rng.random_range(1..=4), &mut rng);
            let theta = to_theta(&rho);
            let rebuilt = reconstruct_state(&extract_geometry(&theta)).unwrap();
            let fit = bob_gauge_fit(&theta, &to_theta(&rebuilt), true);
            if fit.residual > 1e-8 {
                // the only other possibility is a reflection fixing b
                assert!(bob_gauge_fit(&theta, &to_theta(&rebuilt), false).residual < 1e-8);
                continue;
            }
            proper += 1;
            // rotation by φ about n̂ is conjugation by exp(−iφ n̂·σ/2)
            let r = fit.rotation;
            let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
            let phi = (axis.norm() / 2.0).atan2((r.trace() - 1.0) / 2.0);
            let n = if axis.norm() > 1e-14 { axis.normalize() } else { Vector3::z() };
            let generator = pauli(1) * C64::new(n.x, 0.0) + pauli(2) * C64::new(n.y, 0.0) + pauli(3) * C64::new(n.z, 0.0);
            let u: Matrix2<C64> = Matrix2::identity() * C64::new((phi / 2.0).cos(), 0.0) - generator * C64::new(0.0, (phi / 2.0).sin());
            let rho_b = rho.reduced_b();
            assert!((u * rho_b * u.adjoint() - rho_b).camax() < 1e-9);
            let big = crate::qstate::kron(&Matrix2::identity(), &u);
            let conj: Matrix4<C64> = big.adjoint() * rho.matrix() * big;
            assert!((conj - rebuilt.matrix()).camax() < 1e-8);
        }
        assert!(proper > 250);
    }

    #[test]
    fn incompatible_geometry_is_rejected() {
        let g = GeometricData {
            q: Mat3Sym::diag(0.04, 0.0, 0.0),
            c: Vector3::zeros(),
            a: Vector3::new(0.0, 0.3, 0.0),
            b: Vector3::new(0.0, 0.0, 0.5),
        };
        assert!(matches!(reconstruct_state(&g), Err(Error::Incompatible(_))));
        let g = GeometricData { b: Vector3::zeros(), a: Vector3::new(0.1, 0.0, 0.0), q: Mat3Sym::diag(0.04, 0.04, 0.04), ..g };
        assert!(matches!(reconstruct_state(&g), Err(Error::Incompatible(_))));
    }

    #[test]
    fn b_zero_reduces_to_canonical() {
        let theta = canonical_state(&to_theta(&random_density(3, &mut ChaCha8Rng::seed_from_u64(65)))).unwrap();
        let g = extract_geometry(&theta);
        let rho = reconstruct_state(&g).unwrap();
        let canon = canonical_from_geometry(&g.q, &g.c, &Matrix3::identity());
        match canon {
            Ok(c) => assert!(c.distance(&rho) < 1e-12),
            Err(_) => {
                let c = canonical_from_geometry(&g.q, &g.c, &-Matrix3::identity()).unwrap();
                assert!(c.distance(&rho) < 1e-12);
            }
        }
        assert!((volume(&ellipsoid_a(&to_theta(&rho))) - volume(&ellipsoid_a(&theta))).abs() < 1e-10);
    }

    #[test]
    fn json_shape() {
        let g = extract_geometry(&to_theta(&example_state()));
        let v = serde_json::to_value(g).unwrap();
        assert!(v["Q"][0].is_array() && v["c"].as_array().unwrap().len() == 3);
        let back: GeometricData = serde_json::from_value(v).unwrap();
        assert!(back.distance(&g) < 1e-15);
    }
}
