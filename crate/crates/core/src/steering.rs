//! The steering map `Y = ½ΘX`, the complete-steering conditions, and a Monte
//! Carlo check of the ellipsoid against sampled projective measurements.

use nalgebra::{Matrix3, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::Serialize;

use crate::ellipsoid::{ellipsoid_a, ellipsoid_b, SteeringEllipsoid};
use crate::error::{Error, Result};
use crate::lorentz::{boost, canonical_state, is_positive, MinkowskiVector, PRODUCT_CUTOFF};
use crate::numerics::{svd3, svd4};
use crate::qstate::ThetaMatrix;

pub const ZERO_PROBABILITY: f64 = 1e-12;
/// Singular values of Θ at or below this span its kernel.
pub const KERNEL_CUTOFF: f64 = 1e-8;
pub const COND_TOL: f64 = 1e-7;
pub const COND3_TOL: f64 = 1e-9;
/// Margins inside this open interval mark a state as numerically degenerate.
pub const DEGENERACY_BAND: (f64, f64) = (1e-9, 1e-5);
pub const SURFACE_TOL: f64 = 1e-8;
pub const MAX_POVM_ELEMENTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteeringOutcome {
    pub probability: f64,
    /// `None` for a zero-probability outcome.
    pub bloch: Option<Vector3<f64>>,
}

/// Alice's (unnormalized) conditional state when Bob obtains the outcome
/// associated with `element`.
pub fn steer(theta: &ThetaMatrix, element: &MinkowskiVector) -> Result<SteeringOutcome> {
    if !is_positive(element) {
        return Err(Error::NotPositive);
    }
    let y = theta.matrix() * element.to_vector() * 0.5;
    let p = y[0];
    let bloch = (p > ZERO_PROBABILITY).then(|| Vector3::new(y[1], y[2], y[3]) / p);
    Ok(SteeringOutcome { probability: p, bloch })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<MinkowskiVector>,
}

impl Povm {
    pub fn new(elements: Vec<MinkowskiVector>) -> Result<Self> {
        if elements.iter().any(|e| !is_positive(e)) {
            return Err(Error::NotPositive);
        }
        let sum = elements.iter().fold(Vector4::zeros(), |acc, e| acc + e.to_vector());
        let dev = (sum - Vector4::new(2.0, 0.0, 0.0, 0.0)).abs().max();
        if dev > 1e-10 {
            return Err(Error::BadDecomposition(format!(
                "elements sum to {sum:?}, not the identity (deviation {dev:e})"
            )));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[MinkowskiVector] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompletenessReport {
    pub complete: bool,
    pub cond3: bool,
    pub cond4: bool,
    pub cond6: bool,
    /// Norm of the projection of (1,0,0,0) onto ker Θ.
    pub kernel_margin: f64,
    /// Distance from the origin to the affine span of Bob's ellipsoid.
    pub span_margin: f64,
    /// Distance of `a` from the affine span of Alice's ellipsoid.
    pub scaled_offspan: f64,
    /// `|b² − |𝒜(a)|²|`
    pub scaled_margin: f64,
    /// Some margin or rank-deciding singular value is numerically ambiguous.
    pub degenerate: bool,
}

fn in_band(x: f64) -> bool {
    x > DEGENERACY_BAND.0 && x < DEGENERACY_BAND.1
}

/// Evaluates complete-steering conditions 3, 4 and 6 independently.
///
/// * cond 6: `(1,0,0,0)` is orthogonal to `ker Θ`;
/// * cond 4: the affine span of Bob's ellipsoid contains the origin;
/// * cond 3: `a` lies on Alice's ellipsoid shrunk by `|b|` about its center.
///
/// The three are equivalent; a disagreement outside the degeneracy band is
/// reported as [`Error::InternalInconsistency`].
pub fn complete_steering_check(theta: &ThetaMatrix) -> Result<CompletenessReport> {
    let b = theta.b();
    if b.norm() >= PRODUCT_CUTOFF {
        return Err(Error::ProductState(b.norm()));
    }

    let svd = svd4(theta.matrix());
    let mut proj = Vector4::zeros();
    let mut degenerate = false;
    for k in 0..4 {
        let s = svd.singular[k];
        degenerate |= in_band(s);
        if s <= KERNEL_CUTOFF {
            let v = svd.v.column(k);
            proj += v * v[0];
        }
    }
    let kernel_margin = proj.norm();

    let eb = ellipsoid_b(theta);
    let span_margin = eb.normalize(&Vector3::zeros()).1;

    let ea = ellipsoid_a(theta);
    let (u, scaled_offspan) = ea.normalize(&theta.a());
    let scaled_margin = (b.norm_squared() - u.iter().map(|x| x * x).sum::<f64>()).abs();
    for e in [&ea, &eb] {
        degenerate |= e.semiaxes.iter().any(|&s| in_band(s));
    }

    let cond6 = kernel_margin <= COND_TOL;
    let cond4 = span_margin <= COND_TOL;
    let cond3 = scaled_offspan <= COND_TOL && scaled_margin <= COND3_TOL;
    degenerate |= [kernel_margin, span_margin, scaled_offspan, scaled_margin]
        .into_iter()
        .any(in_band);

    let report = CompletenessReport {
        complete: cond6,
        cond3,
        cond4,
        cond6,
        kernel_margin,
        span_margin,
        scaled_offspan,
        scaled_margin,
        degenerate,
    };
    if !(cond3 == cond4 && cond4 == cond6) && !degenerate {
        return Err(Error::InternalInconsistency(format!(
            "complete-steering conditions disagree: {report:?}"
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Steerability {
    Povm(Povm),
    Unreachable { condition: String },
}

/// Builds a measurement for Bob that steers Alice to the ensemble
/// `{(pᵢ, yᵢ)}`, or reports why none exists.
///
/// Works in the canonical frame: each target is pulled back through the
/// canonical correlation matrix `cᵢ = T'⁺(yᵢ − a')`, the part of `b` in
/// `ker T'` is distributed over the elements within their light-cone budget,
/// and the resulting elements `2pᵢ(1, cᵢ + kᵢ)` are boosted back by `γL_b`.
pub fn steer_to_decomposition(theta: &ThetaMatrix, targets: &[(f64, Vector3<f64>)]) -> Result<Steerability> {
    let targets: Vec<(f64, Vector3<f64>)> = targets.iter().copied().filter(|(w, _)| *w != 0.0).collect();
    if targets.is_empty() || targets.len() > MAX_POVM_ELEMENTS {
        return Err(Error::BadDecomposition(format!(
            "need between 1 and {MAX_POVM_ELEMENTS} targets, got {}",
            targets.len()
        )));
    }
    if let Some((w, _)) = targets.iter().find(|(w, _)| *w < 0.0) {
        return Err(Error::BadDecomposition(format!("negative weight {w}")));
    }
    let total: f64 = targets.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::BadDecomposition(format!("weights sum to {total}")));
    }
    let a = theta.a();
    let mean = targets.iter().fold(Vector3::zeros(), |acc, (w, y)| acc + y * *w);
    if (mean - a).norm() > 1e-9 {
        return Err(Error::BadDecomposition(format!(
            "targets average to {mean:?}, not Alice's Bloch vector {a:?}"
        )));
    }

    let ea = ellipsoid_a(theta);
    for (_, y) in &targets {
        let (excess, off) = ea.membership(y);
        if off > SURFACE_TOL || (ea.dimension > 0 && excess > 2.0 * SURFACE_TOL) {
            return Err(Error::BadDecomposition(format!("target {y:?} lies outside the steering ellipsoid")));
        }
    }

    let b = theta.b();
    if b.norm() >= PRODUCT_CUTOFF {
        // every element steers to a; any resolution of the identity works
        let elements = targets
            .iter()
            .map(|(w, _)| MinkowskiVector::new(2.0 * w, Vector3::zeros()))
            .collect();
        return Ok(Steerability::Povm(Povm::new(elements)?));
    }

    let canon = canonical_state(theta)?;
    let (a_p, t_p) = (canon.a(), canon.t());
    let svd = svd3(&t_p);
    let mut pinv = Matrix3::zeros();
    let mut kernel = Matrix3::zeros();
    for k in 0..3 {
        let (u, v) = (svd.u.column(k), svd.v.column(k));
        if svd.singular[k] > crate::ellipsoid::RANK_TOL {
            pinv += v * u.transpose() / svd.singular[k];
        } else {
            kernel += v * v.transpose();
        }
    }

    let mut pulled = Vec::with_capacity(targets.len());
    let mut budget = 0.0;
    for (w, y) in &targets {
        let mut c = pinv * (y - a_p);
        let n = c.norm();
        if n > 1.0 + SURFACE_TOL {
            return Err(Error::BadDecomposition(format!("target {y:?} lies outside the steering ellipsoid")));
        }
        if n >= 1.0 - SURFACE_TOL {
            c /= n;
        }
        let room = (1.0 - c.norm_squared()).max(0.0).sqrt();
        budget += w * room;
        pulled.push((*w, c, room));
    }

    let v = kernel * b;
    if v.norm() > budget + SURFACE_TOL {
        return Ok(Steerability::Unreachable {
            condition: format!(
                "cond6: kernel component of b ({:.3e}) exceeds the light-cone budget ({budget:.3e})",
                v.norm()
            ),
        });
    }
    let scale = if v.norm() > 0.0 && budget > 0.0 { v.norm().min(budget) / budget } else { 0.0 };
    let dir = if v.norm() > 0.0 { v / v.norm() } else { Vector3::zeros() };

    let l = boost(&b)?;
    let g = l.gamma();
    let mut elements = Vec::with_capacity(pulled.len());
    for (w, c, room) in &pulled {
        let x = c + dir * (room * scale);
        let canon_el = Vector4::new(1.0, x.x, x.y, x.z) * (2.0 * w);
        let el = l.matrix() * canon_el * g;
        elements.push(MinkowskiVector::from_vector(&el));
    }
    // absorb rounding in the identity sum into the largest element
    let sum = elements.iter().fold(Vector4::zeros(), |acc, e| acc + e.to_vector());
    let fix = Vector4::new(2.0, 0.0, 0.0, 0.0) - sum;
    if fix.abs().max() > 1e-9 {
        return Err(Error::InternalInconsistency(format!("POVM sum deviates by {fix:?}")));
    }
    if let Some(big) = elements.iter_mut().max_by(|p, q| p.x0.total_cmp(&q.x0)) {
        *big = MinkowskiVector::from_vector(&(big.to_vector() + fix));
    }
    for e in elements.iter_mut() {
        // boundary elements may leave the cone by rounding
        let excess = e.x.norm() - e.x0;
        if excess > 0.0 && excess < 1e-9 {
            e.x0 += excess;
        }
    }
    let povm = Povm::new(elements).map_err(|e| Error::InternalInconsistency(format!("constructed POVM invalid: {e}")))?;
    for (el, (w, y)) in povm.elements().iter().zip(&targets) {
        let out = steer(theta, el)?;
        let ok = (out.probability - w).abs() < 1e-9 && out.bloch.is_some_and(|z| (z - y).norm() < 1e-9);
        if !ok {
            return Err(Error::InternalInconsistency(format!(
                "element {el:?} steers to {out:?}, expected ({w}, {y:?})"
            )));
        }
    }
    Ok(Steerability::Povm(povm))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HullReport {
    pub samples: usize,
    /// Largest ellipsoid-equation excess `max(|𝒜(y)|² − 1, off-span distance)`.
    pub max_violation: f64,
    /// Largest `||𝒜(y)|² − 1|`; projectors land on the surface only for
    /// full-dimensional ellipsoids, so this is reported for those alone.
    pub surface_deviation: Option<f64>,
    /// Hausdorff-style gap between the hull of the samples and the ellipsoid,
    /// `max_u [h_E(u) − max_i u·yᵢ]` over directions in the ellipsoid's span.
    pub coverage_gap: f64,
    pub min_corner: [f64; 3],
    pub max_corner: [f64; 3],
}

pub const HULL_DIRECTIONS: usize = 1000;

/// Steers with `n` random projectors and checks every outcome against the
/// analytic ellipsoid.
///
/// Projector directions are uniform in Bob's canonical frame and mapped back
/// through the boost `L_b` (which keeps them projectors); uniform directions
/// in the original frame crowd into a small cap of `E_A` when `|b| → 1`.
/// Directions are drawn sequentially from `seed`; evaluation runs in
/// parallel with order-insensitive reductions, so the report does not depend
/// on the thread count.
pub fn mc_hull_oracle(theta: &ThetaMatrix, n: usize, seed: u64) -> HullReport {
    let n = n.max(10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = theta.b();
    let lb = if b.norm() < PRODUCT_CUTOFF { boost(&b).ok() } else { None };
    let dirs: Vec<Vector3<f64>> = (0..n)
        .map(|_| {
            let v = Vector3::from(UnitSphere.sample(&mut rng));
            match &lb {
                Some(l) => {
                    let x = l.matrix() * Vector4::new(1.0, v.x, v.y, v.z);
                    Vector3::new(x[1], x[2], x[3]) / x[0]
                }
                None => v,
            }
        })
        .collect();
    let e = ellipsoid_a(theta);

    let points: Vec<Vector3<f64>> = dirs
        .par_iter()
        .filter_map(|v| {
            steer(theta, &MinkowskiVector::projector(v))
                .ok()
                .and_then(|o| o.bloch)
        })
        .collect();

    let max_violation = points
        .par_iter()
        .map(|y| {
            let (excess, off) = e.membership(y);
            if e.dimension == 0 {
                (y - e.center).norm()
            } else {
                excess.max(off)
            }
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    let surface_deviation = (e.dimension == 3).then(|| {
        points
            .par_iter()
            .map(|y| e.membership(y).0.abs())
            .reduce(|| 0.0, f64::max)
    });

    let probes = span_directions(&e, &mut rng);
    let coverage_gap = probes
        .par_iter()
        .map(|u| {
            let reach = points.iter().map(|y| u.dot(y)).fold(f64::NEG_INFINITY, f64::max);
            e.support(u) - reach
        })
        .reduce(|| 0.0, f64::max);

    let mut min_corner = [f64::INFINITY; 3];
    let mut max_corner = [f64::NEG_INFINITY; 3];
    for y in &points {
        for k in 0..3 {
            min_corner[k] = min_corner[k].min(y[k]);
            max_corner[k] = max_corner[k].max(y[k]);
        }
    }

    HullReport {
        samples: points.len(),
        max_violation,
        surface_deviation,
        coverage_gap,
        min_corner,
        max_corner,
    }
}

fn span_directions(e: &SteeringEllipsoid, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let span = e.span();
    match span.len() {
        0 => Vec::new(),
        1 => vec![span[0], -span[0]],
        2 => (0..HULL_DIRECTIONS)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / HULL_DIRECTIONS as f64;
                span[0] * t.cos() + span[1] * t.sin()
            })
            .collect(),
        _ => (0..HULL_DIRECTIONS).map(|_| Vector3::from(UnitSphere.sample(rng))).collect(),
    }
}
