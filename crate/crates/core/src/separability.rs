//! Entanglement decisions and explicit separable decompositions.
//!
//! A state is separable exactly when Alice's steering ellipsoid of the
//! canonical state fits inside a simplex inscribed in the Bloch ball whose
//! facets touch the ellipsoid. The vertices of such a simplex become Alice's
//! product-state Bloch vectors; Bob's pure states are read off from the
//! tangency points.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitCircle, UnitSphere};
use serde::Serialize;

use crate::ellipsoid::{ellipsoid_a, SteeringEllipsoid};
use crate::error::{Error, Result};
use crate::lorentz::{canonical_state, PRODUCT_CUTOFF};
use crate::numerics::{eig_sym3, nelder_mead, svd3, svd4, Mat3Sym, PsdSqrt};
use crate::qstate::{bloch, from_theta, kron, qubit, to_theta, DensityMatrix, ThetaMatrix};

pub const PPT_EIG_TOL: f64 = 1e-10;
pub const PPT_DET_TOL: f64 = 1e-12;
/// Eigenvalue magnitude above which the determinant and eigenvalue routes
/// of the PPT test must agree.
pub const PPT_AGREEMENT_BAND: f64 = 1e-8;
/// Inside `|criterion| < CRITERION_BAND` the geometric test defers to PPT.
pub const CRITERION_BAND: f64 = 1e-9;
pub const THETA_RANK_CUTOFF: f64 = 1e-8;
pub const TANGENCY_TOL: f64 = 1e-8;
pub const VERTEX_TOL: f64 = 1e-9;
pub const RECONSTRUCTION_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PptReport {
    pub entangled: bool,
    pub min_eigenvalue: f64,
    pub determinant: f64,
}

/// Partial-transpose test, evaluated through both the smallest eigenvalue
/// and the determinant of `ρ^{T_B}`.
pub fn ppt_report(rho: &DensityMatrix) -> Result<PptReport> {
    let pt = rho.partial_transpose_b();
    let min_eigenvalue = crate::numerics::eig_herm4(&pt).min();
    let determinant = pt.determinant();
    let by_eig = min_eigenvalue < -PPT_EIG_TOL;
    let by_det = determinant < -PPT_DET_TOL;
    if by_eig != by_det && min_eigenvalue.abs() > PPT_AGREEMENT_BAND {
        return Err(Error::InternalInconsistency(format!(
            "PPT determinant {determinant:e} and eigenvalue {min_eigenvalue:e} disagree"
        )));
    }
    Ok(PptReport {
        entangled: by_eig,
        min_eigenvalue,
        determinant,
    })
}

pub fn is_entangled_ppt(rho: &DensityMatrix) -> Result<bool> {
    Ok(ppt_report(rho)?.entangled)
}

/// Left-hand side of the geometric entanglement criterion for a canonical
/// ellipsoid with center `c` and matrix `Q`:
///
/// `|c|⁴ − 2|c|²(1 − tr Q + 2 n̂ᵀQn̂) + h(Q)`,
/// `h(Q) = 1 − 8 det√Q + 2 tr(Q²) − (tr Q)² − 2 tr Q`,
///
/// negative exactly for entangled states. With `c = |c| n̂` the skew term is
/// `cᵀQc`, so no direction is needed at `c = 0`.
pub fn entanglement_criterion(c: &Vector3<f64>, q: &Mat3Sym) -> f64 {
    let e = eig_sym3(q);
    let det_sqrt: f64 = e.values.iter().map(|x| x.max(0.0).sqrt()).product();
    let qm = q.to_matrix();
    let tr = qm.trace();
    let tr_sq = (qm * qm).trace();
    let h = 1.0 - 8.0 * det_sqrt + 2.0 * tr_sq - tr * tr - 2.0 * tr;
    let c2 = c.norm_squared();
    c2 * c2 - 2.0 * c2 * (1.0 - tr) - 4.0 * q.quadratic_form(c) + h
}

pub fn is_entangled_geometric(c: &Vector3<f64>, q: &Mat3Sym) -> bool {
    entanglement_criterion(c, q) < 0.0
}

/// Geometric decision with PPT arbitration inside `|criterion| < band`.
pub fn classify_entanglement(rho: &DensityMatrix, band: f64) -> Result<bool> {
    let theta = to_theta(rho);
    if theta.b().norm() >= PRODUCT_CUTOFF {
        return Ok(false);
    }
    let e = ellipsoid_a(&theta);
    let value = entanglement_criterion(&e.center, &e.q());
    if value.abs() < band {
        return is_entangled_ppt(rho);
    }
    Ok(value < 0.0)
}

/// Decisions for `(c, Q)` and `(Rc, RQRᵀ)`.
pub fn rotation_invariance_check(c: &Vector3<f64>, q: &Mat3Sym, r: &Matrix3<f64>) -> (bool, bool) {
    (is_entangled_geometric(c, q), is_entangled_geometric(&(r * c), &q.conjugate(r)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProductTerm {
    pub p: f64,
    pub alice_bloch: [f64; 3],
    pub bob_bloch: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductDecomposition {
    pub terms: Vec<ProductTerm>,
    /// Largest entry of `|Σ pᵢ αᵢ⊗βᵢ − ρ|`.
    pub residual: f64,
}

impl ProductDecomposition {
    pub fn assemble(terms: &[ProductTerm]) -> nalgebra::Matrix4<crate::numerics::C64> {
        terms.iter().fold(nalgebra::Matrix4::zeros(), |acc, t| {
            let m = kron(&qubit(&t.alice_bloch.into()), &qubit(&t.bob_bloch.into()));
            acc + m * crate::numerics::C64::new(t.p, 0.0)
        })
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(Self::assemble(&self.terms))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A simplex whose facets touch an ellipsoid; facet `i` is the one opposite
/// vertex `i` and touches at `tangency[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentSimplex {
    pub vertices: Vec<Vector3<f64>>,
    pub tangency: Vec<Vector3<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangencyResidual {
    /// Weights from the barycentric coordinates of the insphere center.
    pub weights: Vec<f64>,
    /// `|Σ pᵢ tᵢ|` with barycentric weights.
    pub barycentric: f64,
    /// `|Σ pᵢ tᵢ|` with weights proportional to facet areas (lengths in 2D).
    pub facet_ratio: f64,
    /// Largest difference between the two weight sets.
    pub weight_gap: f64,
}

/// Coordinates of `points` in an orthonormal basis of their linear span,
/// which must have dimension `dim`.
fn in_plane(points: &[Vector3<f64>], extra: &[Vector3<f64>], dim: usize) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let basis: Vec<Vector3<f64>> = if dim == 3 {
        vec![Vector3::x(), Vector3::y(), Vector3::z()]
    } else {
        let m = Matrix3::from_columns(&points.iter().take(3).copied().chain(std::iter::repeat(Vector3::zeros())).take(3).collect::<Vec<_>>());
        let s = svd3(&m);
        (0..dim).map(|k| s.u.column(k).into_owned()).collect()
    };
    let coords = |v: &Vector3<f64>| DVector::from_iterator(dim, basis.iter().map(|b| b.dot(v)));
    (points.iter().map(coords).collect(), extra.iter().map(coords).collect())
}

/// Barycentric coordinates of the origin with respect to `vertices`.
fn barycentric_origin(vertices: &[DVector<f64>]) -> Option<DVector<f64>> {
    let n = vertices.len();
    let mut m = DMatrix::zeros(n, n);
    for (j, v) in vertices.iter().enumerate() {
        for k in 0..n - 1 {
            m[(k, j)] = v[k];
        }
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    m.lu().solve(&rhs)
}

/// Verifies the weight identity `Σ pᵢ tᵢ = 0` for a simplex circumscribing
/// the unit sphere (or circle, for a triangle in a plane through the origin).
pub fn barycentric_tangency_check(simplex: &TangentSimplex) -> Result<TangencyResidual> {
    let n = simplex.vertices.len();
    if !(3..=4).contains(&n) || simplex.tangency.len() != n {
        return Err(Error::NotTangent(format!(
            "need 3 or 4 vertices with one tangency point each, got {n} and {}",
            simplex.tangency.len()
        )));
    }
    for (i, t) in simplex.tangency.iter().enumerate() {
        if (t.norm() - 1.0).abs() > TANGENCY_TOL {
            return Err(Error::NotTangent(format!("tangency point {i} has norm {}", t.norm())));
        }
        for (j, v) in simplex.vertices.iter().enumerate() {
            if i != j && (t.dot(v) - 1.0).abs() > TANGENCY_TOL {
                return Err(Error::NotTangent(format!(
                    "facet {i} does not touch the unit sphere at its tangency point (vertex {j})"
                )));
            }
        }
    }
    let (verts, tans) = in_plane(&simplex.vertices, &simplex.tangency, n - 1);
    let p = barycentric_origin(&verts).ok_or_else(|| Error::NotTangent("degenerate simplex".into()))?;

    let facets: Vec<f64> = (0..n)
        .map(|i| {
            let others: Vec<&Vector3<f64>> = (0..n).filter(|&j| j != i).map(|j| &simplex.vertices[j]).collect();
            if n == 4 {
                0.5 * (others[1] - others[0]).cross(&(others[2] - others[0])).norm()
            } else {
                (others[1] - others[0]).norm()
            }
        })
        .collect();
    let total: f64 = facets.iter().sum();
    let q: Vec<f64> = facets.iter().map(|f| f / total).collect();

    let weighted = |w: &[f64]| {
        tans.iter()
            .zip(w)
            .fold(DVector::zeros(n - 1), |acc: DVector<f64>, (t, wi)| acc + t * *wi)
            .norm()
    };
    let pv: Vec<f64> = p.iter().copied().collect();
    Ok(TangencyResidual {
        barycentric: weighted(&pv),
        facet_ratio: weighted(&q),
        weight_gap: pv.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        weights: pv,
    })
}

/// Simplex circumscribing the unit sphere of dimension `normals[0].len()`,
/// with facet `i` tangent at the unit normal `normals[i]`. Returns vertices
/// and the barycentric weights of the origin, or `None` if the normals do
/// not enclose the origin.
fn simplex_from_normals(normals: &[DVector<f64>]) -> Option<(Vec<DVector<f64>>, DVector<f64>)> {
    let n = normals.len();
    let k = n - 1;
    let mut vertices = Vec::with_capacity(n);
    for i in 0..n {
        let mut a = DMatrix::zeros(k, k);
        for (row, j) in (0..n).filter(|&j| j != i).enumerate() {
            for c in 0..k {
                a[(row, c)] = normals[j][c];
            }
        }
        let v = a.lu().solve(&DVector::from_element(k, 1.0))?;
        if v.iter().any(|x| !x.is_finite()) {
            return None;
        }
        vertices.push(v);
    }
    let p = barycentric_origin(&vertices)?;
    if p.iter().any(|&x| x.is_nan() || x <= 0.0) {
        return None;
    }
    Some((vertices, p))
}

/// Random simplex circumscribing the unit sphere (`dim = 3`) or circle
/// (`dim = 2`, embedded in the xy-plane), built from random tangent planes.
pub fn random_tangent_simplex<R: Rng + ?Sized>(dim: usize, max_vertex_norm: f64, rng: &mut R) -> TangentSimplex {
    loop {
        let normals: Vec<DVector<f64>> = (0..=dim)
            .map(|_| {
                if dim == 3 {
                    DVector::from_row_slice(&UnitSphere.sample(rng))
                } else {
                    DVector::from_row_slice(&UnitCircle.sample(rng))
                }
            })
            .collect();
        if let Some((verts, _)) = simplex_from_normals(&normals) {
            if verts.iter().all(|v| v.norm() <= max_vertex_norm) {
                let embed = |v: &DVector<f64>| Vector3::from_fn(|i, _| if i < dim { v[i] } else { 0.0 });
                return TangentSimplex {
                    vertices: verts.iter().map(embed).collect(),
                    tangency: normals.iter().map(embed).collect(),
                };
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub seed: u64,
    /// Nelder–Mead iterations per restart.
    pub iterations: usize,
    pub restarts: usize,
    /// Accepted reconstruction residual.
    pub tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            iterations: 500,
            restarts: 8,
            tolerance: RECONSTRUCTION_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimplexChoice {
    Auto(SearchOptions),
    /// Simplex in Bloch coordinates, tangent to Alice's canonical ellipsoid.
    Given(TangentSimplex),
}

/// Unit normals, normalized-frame vertices and weights of a simplex around
/// the canonical ellipsoid.
struct Nested {
    normals: Vec<DVector<f64>>,
    vertices: Vec<DVector<f64>>,
    weights: DVector<f64>,
}

/// Maps normalized coordinates on the ellipsoid's span to Bloch space.
fn to_bloch(e: &SteeringEllipsoid, w: &DVector<f64>) -> Vector3<f64> {
    let u: Vec<f64> = w.iter().copied().collect();
    e.denormalize(&u)
}

fn unit_rows(x: &[f64], dim: usize) -> Option<Vec<DVector<f64>>> {
    x.chunks(dim)
        .map(|c| {
            let v = DVector::from_row_slice(c);
            let n = v.norm();
            (n > 1e-12).then(|| v / n)
        })
        .collect()
}

/// Largest Bloch norm among the vertices, or a large penalty when the
/// normals do not form a simplex around the ellipsoid.
fn vertex_objective(e: &SteeringEllipsoid, x: &[f64]) -> f64 {
    let dim = e.dimension;
    let Some(normals) = unit_rows(x, dim) else { return 10.0 };
    match simplex_from_normals(&normals) {
        Some((verts, _)) => verts.iter().map(|w| to_bloch(e, w).norm()).fold(0.0, f64::max),
        None => 10.0,
    }
}

/// Shrink-wrap search for a tangent simplex inscribed in the Bloch ball.
///
/// Each restart starts from a regular simplex in a random orientation, mapped
/// into the ellipsoid's normalized frame, and minimizes the largest vertex
/// norm with Nelder–Mead. Odd restarts polish the best configuration so far.
fn search_simplex(e: &SteeringEllipsoid, opts: &SearchOptions) -> Result<Nested> {
    let dim = e.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let regular: Vec<Vec<f64>> = if dim == 3 {
        let s = 1.0 / 3f64.sqrt();
        vec![vec![s, s, s], vec![s, -s, -s], vec![-s, s, -s], vec![-s, -s, s]]
    } else {
        (0..3)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 3.0;
                vec![t.cos(), t.sin()]
            })
            .collect()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..opts.restarts.max(1) {
        let x0 = match (&best, restart % 2) {
            (Some((x, _)), 1) => x.clone(),
            _ => {
                let r = random_orthogonal(dim, &mut rng);
                regular
                    .iter()
                    .flat_map(|d| {
                        let rd = &r * DVector::from_row_slice(d);
                        // toward the ellipsoid point whose normal is rd
                        let n = DVector::from_iterator(dim, (0..dim).map(|k| rd[k] * e.semiaxes[k]));
                        let n = &n / n.norm();
                        n.iter().copied().collect::<Vec<_>>()
                    })
                    .collect()
            }
        };
        let m = nelder_mead(|x| vertex_objective(e, x), &x0, 0.05, opts.iterations, 1e-13);
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
        if best.as_ref().is_some_and(|(_, v)| *v <= 1.0) {
            break;
        }
    }
    let (x, value) = best.expect("at least one restart");
    if value > 1.0 {
        return Err(Error::SimplexNotFound { best: value });
    }
    let normals = unit_rows(&x, dim).ok_or(Error::SimplexNotFound { best: value })?;
    let (vertices, weights) = simplex_from_normals(&normals).ok_or(Error::SimplexNotFound { best: value })?;
    Ok(Nested { normals, vertices, weights })
}

fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    if dim == 2 {
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        return DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    }
    let a = Vector3::from(UnitSphere.sample(rng));
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = crate::numerics::axis_angle(&a, angle);
    DMatrix::from_iterator(3, 3, r.iter().copied())
}

/// Converts a simplex given in Bloch coordinates into the normalized frame
/// of the ellipsoid and checks tangency there.
fn nested_from_given(e: &SteeringEllipsoid, s: &TangentSimplex) -> Result<Nested> {
    let dim = e.dimension;
    if s.vertices.len() != dim + 1 || s.tangency.len() != dim + 1 {
        return Err(Error::NotTangent(format!(
            "a {dim}-dimensional ellipsoid needs {} vertices and tangency points",
            dim + 1
        )));
    }
    for (i, v) in s.vertices.iter().enumerate() {
        if v.norm() > 1.0 + VERTEX_TOL {
            return Err(Error::NotTangent(format!("vertex {i} lies outside the Bloch ball")));
        }
    }
    let project = |p: &Vector3<f64>, what: &str| -> Result<DVector<f64>> {
        let (u, off) = e.normalize(p);
        if off > TANGENCY_TOL {
            return Err(Error::NotTangent(format!("{what} lies off the ellipsoid's span")));
        }
        Ok(DVector::from_vec(u))
    };
    let normals = s
        .tangency
        .iter()
        .map(|t| project(t, "tangency point"))
        .collect::<Result<Vec<_>>>()?;
    let vertices = s.vertices.iter().map(|v| project(v, "vertex")).collect::<Result<Vec<_>>>()?;
    for (i, t) in normals.iter().enumerate() {
        if (t.norm() - 1.0).abs() > TANGENCY_TOL {
            return Err(Error::NotTangent(format!("tangency point {i} is not on the ellipsoid")));
        }
        for (j, v) in vertices.iter().enumerate() {
            if i != j && (t.dot(v) - 1.0).abs() > TANGENCY_TOL {
                return Err(Error::NotTangent(format!("facet {i} is not tangent at its point (vertex {j})")));
            }
        }
    }
    let weights = barycentric_origin(&vertices).ok_or_else(|| Error::NotTangent("degenerate simplex".into()))?;
    if weights.iter().any(|&p| p < 0.0) {
        return Err(Error::NotTangent("ellipsoid center lies outside the simplex".into()));
    }
    Ok(Nested { normals, vertices, weights })
}

/// Separable decomposition with `rank(Θ)` product terms.
///
/// The canonical state is decomposed from a tangent simplex (vertices give
/// Alice's states, Bob's Bloch vectors are minus the tangency normals in the
/// normalized frame, aligned to `T'` by an orthogonal Procrustes fit) and the
/// terms are mapped back through Bob's filter `√(2ρ_B)`.
pub fn decompose_separable(theta: &ThetaMatrix, choice: &SimplexChoice) -> Result<ProductDecomposition> {
    let rho = from_theta(theta)?;
    if is_entangled_ppt(&rho)? {
        return Err(Error::NotSeparable);
    }
    let tolerance = match choice {
        SimplexChoice::Auto(o) => o.tolerance,
        SimplexChoice::Given(_) => RECONSTRUCTION_TOL,
    };
    let b = theta.b();
    let e = ellipsoid_a(theta);

    let terms = if e.dimension == 0 || b.norm() >= PRODUCT_CUTOFF {
        vec![ProductTerm {
            p: 1.0,
            alice_bloch: theta.a().into(),
            bob_bloch: b.into(),
        }]
    } else {
        let nested = match (e.dimension, choice) {
            (1, _) => {
                let normals = vec![DVector::from_element(1, -1.0), DVector::from_element(1, 1.0)];
                let vertices = vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)];
                Nested { normals, vertices, weights: DVector::from_element(2, 0.5) }
            }
            (_, SimplexChoice::Given(s)) => nested_from_given(&e, s)?,
            (_, SimplexChoice::Auto(o)) => search_simplex(&e, o)?,
        };
        canonical_terms(theta, &e, &nested)?
    };

    let residual = (ProductDecomposition::assemble(&terms) - rho.matrix())
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()));
    if residual > tolerance {
        return Err(Error::InternalInconsistency(format!(
            "decomposition reconstructs the state only to {residual:e}"
        )));
    }
    Ok(ProductDecomposition { terms, residual })
}

fn canonical_terms(theta: &ThetaMatrix, e: &SteeringEllipsoid, nested: &Nested) -> Result<Vec<ProductTerm>> {
    let alice: Vec<Vector3<f64>> = nested.vertices.iter().map(|w| to_bloch(e, w)).collect();
    let embed = |n: &DVector<f64>| Vector3::from_fn(|i, _| if i < n.len() { -n[i] } else { 0.0 });
    let mut bob: Vec<Vector3<f64>> = nested.normals.iter().map(embed).collect();
    let p: Vec<f64> = nested.weights.iter().copied().collect();

    // align Bob's frame: find orthogonal W with T_c W = T'
    let target = canonical_state(theta)?.t();
    let tc = alice
        .iter()
        .zip(&bob)
        .zip(&p)
        .fold(Matrix3::zeros(), |acc, ((r, beta), w)| acc + r * beta.transpose() * *w);
    let svd = svd3(&(tc.transpose() * target));
    let w = svd.u * svd.v.transpose();
    for beta in bob.iter_mut() {
        *beta = w.transpose() * *beta;
    }

    // undo Bob's filter: ρ = (𝟙⊗√(2ρ_B)) ρ̃ (𝟙⊗√(2ρ_B))
    let root = (qubit(&theta.b()) * crate::numerics::C64::new(2.0, 0.0)).sqrt_psd()?;
    let terms = alice
        .iter()
        .zip(&bob)
        .zip(&p)
        .map(|((r, beta), pi)| {
            let m: Matrix2<_> = root * qubit(beta) * root;
            let tr = m.trace().re;
            ProductTerm {
                p: pi * tr,
                alice_bloch: (*r).into(),
                bob_bloch: (bloch(&m) / tr).into(),
            }
        })
        .collect();
    Ok(terms)
}

/// Smallest number of product states in a separable decomposition, `rank Θ`.
pub fn minimal_product_count(theta: &ThetaMatrix) -> Result<usize> {
    if is_entangled_ppt(&from_theta(theta)?)? {
        return Err(Error::NotSeparable);
    }
    Ok(svd4(theta.matrix()).rank(THETA_RANK_CUTOFF))
}
