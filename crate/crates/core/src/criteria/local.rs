//! Positivity and adjoint tests for single ambient matrices.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gadgets::build_adjoint_block;
use crate::matcore::{op_norm, CMat};
use crate::scalar::C;

use super::{require_contraction, Aux, CheckReport, CriterionId, Witness, C64};
use crate::witness::SearchConfig;

const GOLDEN_ITERS: usize = 80;
const T_GRID_MIN: usize = 161;

/// `‖1 − z x‖ − 1`.
pub fn positivity_excess(x: &CMat<f64>, z: C64) -> Result<f64> {
    if x.rows() != x.cols() {
        return Err(Error::Shape(format!("positivity needs a square matrix, got {:?}", x.shape())));
    }
    Ok(op_norm(&(&CMat::identity(x.rows()) - &x.scale(z)))? - 1.0)
}

/// `‖[[t, x], [−z, t]]‖ − √(1+t²)`.
pub fn adjoint_violation(x: &CMat<f64>, z: &CMat<f64>, t: f64) -> Result<f64> {
    Ok(op_norm(&build_adjoint_block(x, z, t)?)? - (1.0 + t * t).sqrt())
}

/// Maximizes `f` on `[a, b]` by golden-section search; returns the better
/// of the bracket result and `(x0, f(x0))`.
fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, x0: f64, f0: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let (xm, fm) = if fc > fd { (c, fc) } else { (d, fd) };
    if fm > f0 {
        (xm, fm)
    } else {
        (x0, f0)
    }
}

fn circle_point(theta: f64) -> C64 {
    C::new(1.0 - theta.cos(), -theta.sin())
}

/// Samples `max ‖1 − zx‖` on the circle `|1 − z| = 1` and refines around the
/// best sample. The maximum over the disk is attained on this circle since
/// `z ↦ ‖1 − zx‖` is subharmonic.
pub fn check_positive(x: &CMat<f64>, cfg: &SearchConfig) -> Result<CheckReport> {
    require_contraction(x)?;
    positivity_excess(x, C::new(0.0, 0.0))?;
    let n = cfg.circle_samples;
    let f = |theta: f64| positivity_excess(x, circle_point(theta)).unwrap_or(f64::NAN);
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..n {
        let theta = 2.0 * PI * i as f64 / n as f64;
        let v = f(theta);
        if v > best.1 {
            best = (theta, v);
        }
    }
    let h = 2.0 * PI / n as f64;
    let (theta, _) = golden_max(f, best.0 - h, best.0 + h, best.0, best.1);
    let mut report = CheckReport::new(CriterionId::Positive, cfg);
    report.levels_checked = vec![1];
    let z = circle_point(theta);
    let v = positivity_excess(x, z)?;
    report.conclude(v, (n + 2 * GOLDEN_ITERS + 2) as u64);
    report.witness = Some(
        Witness { level: 1, ..Witness::default() }
            .with_aux("z", Aux::Complex([z.re, z.im]))
            .with_aux("theta", Aux::Real(theta))
            .with_aux("max_norm", Aux::Real(1.0 + v)),
    );
    Ok(report)
}

/// Evaluates `‖[[t, x], [−z, t]]‖ ≤ √(1+t²)` on a grid of `t ∈ [−t_max, t_max]`
/// with golden-section refinement around the worst grid point.
pub fn check_adjoint(x: &CMat<f64>, z: &CMat<f64>, cfg: &SearchConfig) -> Result<CheckReport> {
    require_contraction(x)?;
    require_contraction(z)?;
    build_adjoint_block(x, z, 0.0)?;
    let n = T_GRID_MIN.max(cfg.circle_samples / 4) | 1;
    let tm = cfg.t_max;
    let f = |t: f64| adjoint_violation(x, z, t).unwrap_or(f64::NAN);
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..n {
        let t = -tm + 2.0 * tm * i as f64 / (n - 1) as f64;
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let h = 2.0 * tm / (n - 1) as f64;
    let (t, _) = golden_max(f, (best.0 - h).max(-tm), (best.0 + h).min(tm), best.0, best.1);
    let v = adjoint_violation(x, z, t)?;
    let mut report = CheckReport::new(CriterionId::Adjoint, cfg);
    report.levels_checked = vec![1];
    report.conclude(v, (n + 2 * GOLDEN_ITERS + 2) as u64);
    report.witness = Some(Witness { level: 1, ..Witness::default() }.with_aux("t", Aux::Real(t)));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Verdict;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> CMat<f64> {
        CMat::from_real_rows(rows).unwrap()
    }

    #[test]
    fn positivity_examples() {
        let cfg = SearchConfig::default();
        let r = check_positive(&m(&[&[0.5, 0.0], &[0.0, 0.25]]), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
        // |1 − zλ| ≤ 1 on the circle: the oracle over 10^4 points agrees
        let oracle = (0..10_000)
            .map(|i| {
                let z = circle_point(2.0 * PI * i as f64 / 1e4);
                [0.5f64, 0.25].iter().map(|l| (C::new(1.0, 0.0) - z * *l).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(1.0 - r.margin, oracle, epsilon = 1e-6);

        let r = check_positive(&CMat::zeros(2, 2), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
        assert_eq!(r.margin, 0.0);

        let r = check_positive(&m(&[&[-0.5, 0.0], &[0.0, -0.5]]), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let z = r.witness.unwrap().complex("z").unwrap();
        assert!((z - C::new(2.0, 0.0)).norm() < 1e-6);
        assert_abs_diff_eq!(r.margin, -1.0, epsilon = 1e-12);

        assert!(matches!(check_positive(&m(&[&[2.0]]), &cfg), Err(Error::NotContraction(_))));
    }

    #[test]
    fn adjoint_examples() {
        let cfg = SearchConfig::default();
        let e12 = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e21 = m(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let r = check_adjoint(&e12, &e21, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
        let r = check_adjoint(&CMat::zeros(2, 2), &CMat::zeros(2, 2), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
        let r = check_adjoint(&e12, &(-&e21), &cfg).unwrap();
        let t = r.witness.as_ref().unwrap().real("t").unwrap();
        assert_abs_diff_eq!(-r.margin, adjoint_violation(&e12, &(-&e21), t).unwrap(), epsilon = 1e-12);
        assert_eq!(r.verdict, Verdict::Violated);
    }
}
