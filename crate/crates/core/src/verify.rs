//! Oracle suite: every closed-form result checked against an independent
//! route on a batch of states.

use rayon::prelude::*;
use serde::Serialize;

use crate::ellipsoid::{ellipsoid_a, ellipsoid_b, volume, volume_from_rho};
use crate::lorentz::PRODUCT_CUTOFF;
use crate::qstate::{det_reshuffle_identity_check, theta_via_reshuffle, to_theta, DensityMatrix};
use crate::reconstruct::{extract_geometry, reconstruct_state};
use crate::separability::{entanglement_criterion, is_entangled_ppt, CRITERION_BAND};
use crate::steering::{complete_steering_check, mc_hull_oracle};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub hull_samples: usize,
    pub seed: u64,
    /// Replaces every check's tolerance.
    pub tol: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            hull_samples: 1000,
            seed: 0,
            tol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    /// Largest residual seen (a count for decision checks).
    pub worst: f64,
    pub tolerance: f64,
    pub failures: usize,
    /// States for which the check does not apply.
    pub skipped: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub states: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// One residual per check, `None` when the check does not apply.
type Row = [Option<f64>; 7];

const CHECKS: [(&str, f64); 7] = [
    ("criterion_vs_ppt", 0.0),
    ("volume_determinant_vs_semiaxes", 1e-6),
    ("volume_ratio_identity", 1e-8),
    ("det_reshuffle_identity", 1e-9),
    ("steering_conditions", 0.0),
    ("reconstruction_round_trip", 1e-8),
    ("steering_hull_membership", 1e-6),
];

fn residuals(rho: &DensityMatrix, index: usize, opts: &VerifyOptions) -> Row {
    let theta = to_theta(rho);
    let (a, b) = (theta.a().norm(), theta.b().norm());
    let ea = ellipsoid_a(&theta);

    let criterion = entanglement_criterion(&ea.center, &ea.q());
    let decision = (criterion.abs() >= CRITERION_BAND && b < PRODUCT_CUTOFF).then(|| match is_entangled_ppt(rho) {
        Ok(ppt) => f64::from(u8::from(ppt != (criterion < 0.0))),
        Err(_) => 1.0,
    });

    let va = volume(&ea);
    let vol = volume_from_rho(rho).ok().map(|v| (v - va).abs() / va.max(1e-12));
    let ratio = (a < PRODUCT_CUTOFF && b < PRODUCT_CUTOFF)
        .then(|| (volume(&ellipsoid_b(&theta)) * (1.0 - a * a).powi(2) - va * (1.0 - b * b).powi(2)).abs());

    let reshuffle = det_reshuffle_identity_check(rho.matrix()).max((theta_via_reshuffle(rho) - theta.matrix()).amax());

    let conditions = if complete_steering_check(&theta).is_ok() { 0.0 } else { 1.0 };

    let g = extract_geometry(&theta);
    let round_trip = match reconstruct_state(&g) {
        Ok(r) => extract_geometry(&to_theta(&r)).distance(&g),
        Err(_) => f64::INFINITY,
    };

    let hull = mc_hull_oracle(&theta, opts.hull_samples, opts.seed.wrapping_add(index as u64)).max_violation;

    [decision, vol, ratio, Some(reshuffle), Some(conditions), Some(round_trip), Some(hull)]
}

pub fn verify_states(states: &[DensityMatrix], opts: &VerifyOptions) -> VerifyReport {
    let rows: Vec<Row> = states.par_iter().enumerate().map(|(i, rho)| residuals(rho, i, opts)).collect();
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .enumerate()
        .map(|(k, &(name, default))| {
            let tolerance = opts.tol.unwrap_or(default);
            let mut r = CheckResult { name, worst: 0.0, tolerance, failures: 0, skipped: 0 };
            for row in &rows {
                match row[k] {
                    None => r.skipped += 1,
                    Some(x) => {
                        r.worst = r.worst.max(x);
                        if x.is_nan() || x > tolerance {
                            r.failures += 1;
                        }
                    }
                }
            }
            r
        })
        .collect();
    let passed = checks.iter().all(CheckResult::passed);
    VerifyReport { states: states.len(), checks, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::C64;
    use crate::qstate::random_density_seeded;
    use nalgebra::Vector4;

    #[test]
    fn random_batch_passes() {
        let states: Vec<DensityMatrix> = (0..200).map(|k| random_density_seeded(k % 4 + 1, k as u64)).collect();
        let report = verify_states(&states, &VerifyOptions { hull_samples: 200, ..Default::default() });
        assert!(report.passed, "{report:#?}");
        assert_eq!(report.checks.len(), 7);
    }

    #[test]
    fn bell_state_passes() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let bell = DensityMatrix::pure(&Vector4::new(z, C64::new(s, 0.0), C64::new(-s, 0.0), z)).unwrap();
        assert!(verify_states(&[bell], &VerifyOptions::default()).passed);
    }

    #[test]
    fn impossible_tolerance_fails() {
        let states = vec![random_density_seeded(4, 1)];
        let report = verify_states(&states, &VerifyOptions { tol: Some(-1.0), ..Default::default() });
        assert!(!report.passed);
    }
}
