//! Randomized checks of the closed-form block-matrix norm identities.
//!
//! * `[[a, b], [b, a]]` has norm `max(‖a+b‖, ‖a−b‖)`;
//! * `[[a, −b], [b, a]]` has norm `max(‖a+ib‖, ‖a−ib‖)`;
//! * for unitary `v`, `‖t_x‖² = ½(2 + s² + s√(s²+4))` with `s = ‖x‖`;
//! * in an operator system, `‖s_x‖ = 1 + ‖x‖` and `‖r_x‖ = √(1 + ‖x‖²)`;
//! * for a coisometry `u`, `‖[u_n x]‖² = 1 + ‖x‖²`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gadgets::{build_r, build_row, build_s, build_t};
use crate::matcore::{block, op_norm, rand_cmat, RngStream};
use crate::opspace::{LevelElement, SpaceRep};
use crate::scalar::C;

const PAIR_TOL: f64 = 1e-9;
const GADGET_TOL: f64 = 1e-8;
const SPOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulaOptions {
    /// Random `(a, b)` pairs for the two 2×2 block identities.
    pub pair_trials: usize,
    /// Random elements per space and level for the gadget identities.
    pub element_trials: usize,
    pub seed: u64,
    /// Flips one sign in the first block identity; the suite must then fail.
    pub inject_sign_bug: bool,
}

impl Default for FormulaOptions {
    fn default() -> Self {
        Self { pair_trials: 200, element_trials: 100, seed: crate::DEFAULT_SEED, inject_sign_bug: false }
    }
}

impl FormulaOptions {
    /// Uses `n` trials for every suite.
    pub fn with_trials(mut self, n: usize) -> Self {
        self.pair_trials = n;
        self.element_trials = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub identity: String,
    pub trials: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

fn suite(name: &str, identity: &str, trials: usize, max_deviation: f64, tolerance: f64) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        identity: identity.into(),
        trials,
        max_deviation,
        tolerance,
        passed: max_deviation.is_finite() && max_deviation <= tolerance,
    }
}

/// Gaussian element rescaled to a norm drawn uniformly from `[0, max_norm]`.
fn random_element(space: &SpaceRep<f64>, n: usize, max_norm: f64, rng: &mut RngStream) -> Result<LevelElement<f64>> {
    let x = LevelElement::random(n, n, space.dim(), rng);
    let target = max_norm * rng.uniform();
    Ok(x.scale_real(target / space.norm(&x)?))
}

fn unit_element(space: &SpaceRep<f64>, n: usize, rng: &mut RngStream) -> Result<LevelElement<f64>> {
    let x = LevelElement::random(n, n, space.dim(), rng);
    Ok(x.scale_real(1.0 / space.norm(&x)?))
}

/// `½(2 + s² + s√(s²+4))`.
pub fn t_gadget_norm_sq(s: f64) -> f64 {
    0.5 * (2.0 + s * s + s * (s * s + 4.0).sqrt())
}

fn symmetric_pairs(opts: &FormulaOptions) -> Result<SuiteResult> {
    let mut rng = RngStream::child(opts.seed, &[1]);
    let mut worst = 0.0f64;
    for _ in 0..opts.pair_trials {
        let a = rand_cmat::<f64>(3, 3, &mut rng);
        let b = rand_cmat::<f64>(3, 3, &mut rng);
        let lower_left = if opts.inject_sign_bug { -&b } else { b.clone() };
        let lhs = op_norm(&block(&[vec![a.clone(), b.clone()], vec![lower_left, a.clone()]])?)?;
        let rhs = op_norm(&(&a + &b))?.max(op_norm(&(&a - &b))?);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(suite("symmetric-block", "‖[[a,b],[b,a]]‖ = max(‖a+b‖, ‖a−b‖)", opts.pair_trials, worst, PAIR_TOL))
}

fn rotation_pairs(opts: &FormulaOptions) -> Result<SuiteResult> {
    let mut rng = RngStream::child(opts.seed, &[2]);
    let mut worst = 0.0f64;
    for _ in 0..opts.pair_trials {
        let a = rand_cmat::<f64>(3, 3, &mut rng);
        let b = rand_cmat::<f64>(3, 3, &mut rng);
        let lhs = op_norm(&block(&[vec![a.clone(), -&b], vec![b.clone(), a.clone()]])?)?;
        let ib = b.scale(C::new(0.0, 1.0));
        let rhs = op_norm(&(&a + &ib))?.max(op_norm(&(&a - &ib))?);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(suite("rotation-block", "‖[[a,−b],[b,a]]‖ = max(‖a+ib‖, ‖a−ib‖)", opts.pair_trials, worst, PAIR_TOL))
}

fn t_gadget_suite(opts: &FormulaOptions) -> Result<Vec<SuiteResult>> {
    let spaces = [
        ("M2", SpaceRep::<f64>::full_matrix(2)?),
        ("M3", SpaceRep::full_matrix(3)?),
        ("upper-triangular-M2", SpaceRep::upper_triangular(2)?),
    ];
    let mut out = Vec::new();
    for (si, (label, space)) in spaces.iter().enumerate() {
        let v = space.unit().expect("unital").to_vec();
        let mut worst = 0.0f64;
        for n in 1..=2usize {
            let mut rng = RngStream::child(opts.seed, &[3, si as u64, n as u64]);
            for _ in 0..opts.element_trials {
                let x = random_element(space, n, 2.0, &mut rng)?;
                let s = space.norm(&x)?;
                let t = op_norm(&build_t(space, &v, &x)?)?;
                worst = worst.max((t * t - t_gadget_norm_sq(s)).abs());
            }
        }
        out.push(suite(
            &format!("t-gadget/{label}"),
            "‖t_x‖² = ½(2 + ‖x‖² + ‖x‖√(‖x‖²+4))",
            2 * opts.element_trials,
            worst,
            GADGET_TOL,
        ));
    }
    let space = &spaces[0].1;
    let mut rng = RngStream::child(opts.seed, &[3, 99]);
    let x = unit_element(space, 1, &mut rng)?;
    let t = op_norm(&build_t(space, space.unit().expect("unital"), &x)?)?;
    out.push(suite(
        "t-gadget/unit-norm-spot",
        "‖x‖ = 1 ⇒ ‖t_x‖² = (3+√5)/2",
        1,
        (t * t - (3.0 + 5f64.sqrt()) / 2.0).abs(),
        SPOT_TOL,
    ));
    Ok(out)
}

fn system_suites(opts: &FormulaOptions) -> Result<Vec<SuiteResult>> {
    let mut out = Vec::new();
    for d in [2usize, 3] {
        let space = SpaceRep::<f64>::full_matrix(d)?;
        let v = space.unit().expect("unital").to_vec();
        let (mut ws, mut wr) = (0.0f64, 0.0f64);
        for n in 1..=2usize {
            let mut rng = RngStream::child(opts.seed, &[4, d as u64, n as u64]);
            for _ in 0..opts.element_trials {
                let x = random_element(&space, n, 2.0, &mut rng)?;
                let s = space.norm(&x)?;
                ws = ws.max((op_norm(&build_s(&space, &v, &x)?)? - (1.0 + s)).abs());
                wr = wr.max((op_norm(&build_r(&space, &v, &x)?)? - (1.0 + s * s).sqrt()).abs());
            }
        }
        let trials = 2 * opts.element_trials;
        out.push(suite(&format!("s-gadget/M{d}"), "‖s_x‖ = 1 + ‖x‖", trials, ws, GADGET_TOL));
        out.push(suite(&format!("r-gadget/M{d}"), "‖r_x‖ = √(1 + ‖x‖²)", trials, wr, GADGET_TOL));
    }
    Ok(out)
}

fn row_suite(opts: &FormulaOptions) -> Result<SuiteResult> {
    let space = SpaceRep::<f64>::full_matrix(2)?;
    let u = space.unit().expect("unital").to_vec();
    let mut worst = 0.0f64;
    for n in 1..=2usize {
        let mut rng = RngStream::child(opts.seed, &[5, n as u64]);
        for _ in 0..opts.pair_trials {
            let x = unit_element(&space, n, &mut rng)?;
            let r = op_norm(&build_row(&space, &u, &x)?)?;
            worst = worst.max((r * r - 2.0).abs());
        }
    }
    Ok(suite("row/M2", "‖x‖ = 1 ⇒ ‖[u_n x]‖² = 2", 2 * opts.pair_trials, worst, GADGET_TOL))
}

/// Runs every suite. Suites are independent and each derives its own
/// random stream from the seed, so adding trials to one leaves the others
/// unchanged.
pub fn verify_formulas(opts: &FormulaOptions) -> Result<FormulaReport> {
    let mut suites = vec![symmetric_pairs(opts)?, rotation_pairs(opts)?];
    suites.extend(t_gadget_suite(opts)?);
    suites.extend(system_suites(opts)?);
    suites.push(row_suite(opts)?);
    let passed = suites.iter().all(|s| s.passed);
    Ok(FormulaReport { seed: opts.seed, suites, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(t_gadget_norm_sq(0.0), 1.0);
        assert!((t_gadget_norm_sq(1.0) - 2.618_034_0).abs() < 1e-7);
    }

    #[test]
    fn default_run_passes() {
        let report = verify_formulas(&FormulaOptions::default().with_trials(20)).unwrap();
        for s in &report.suites {
            assert!(s.passed, "{} deviated by {:e}", s.name, s.max_deviation);
        }
        assert!(report.passed);
    }

    #[test]
    fn injected_bug_is_detected() {
        let opts = FormulaOptions { inject_sign_bug: true, ..FormulaOptions::default().with_trials(10) };
        let report = verify_formulas(&opts).unwrap();
        assert!(!report.passed);
        assert!(!report.suites[0].passed);
        assert!(report.suites[1..].iter().all(|s| s.passed));
    }

    #[test]
    fn deterministic_for_seed() {
        let opts = FormulaOptions { seed: 7, ..FormulaOptions::default().with_trials(5) };
        assert_eq!(verify_formulas(&opts).unwrap(), verify_formulas(&opts).unwrap());
    }
}
