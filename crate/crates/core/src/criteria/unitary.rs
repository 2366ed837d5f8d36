//! Unitaries, coisometries, isometries and operator systems.

use crate::error::{Error, Result};
use crate::gadgets::{build_column, build_four_rotation, build_r, build_row, build_s, t_element};
use crate::matcore::op_norm;
use crate::opspace::{LevelElement, SpaceRep};
use crate::scalar::i_pow;
use crate::witness::{maximize_violation, GridShape, SearchConfig, SearchDomain, SearchResult};

use super::{radius_sweep, require_unit_ball, search_report, CheckReport, CriterionId, C64, LEVEL1_QUALIFIER};

const ZERO_NORM: f64 = 1e-12;

fn levels(cfg: &SearchConfig) -> Vec<usize> {
    (1..=cfg.max_level).collect()
}

fn to_nan(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

fn four_rotation_max_at(space: &SpaceRep<f64>, v: &[C64], x: &LevelElement<f64>, lambda: f64) -> Result<f64> {
    let base = LevelElement::diagonal(x.rows(), v).scale_real(lambda);
    let mut best = 0.0f64;
    for k in 0..4 {
        best = best.max(space.norm(&base.add(&x.scale(i_pow(k))))?);
    }
    Ok(best)
}

/// `√(1+‖x‖) − max_k ‖v_n + i^k x‖`.
pub fn four_rotation_violation(space: &SpaceRep<f64>, v: &[C64], x: &LevelElement<f64>) -> Result<f64> {
    build_four_rotation(space, v, x, 0)?;
    let n = space.norm(x)?;
    Ok((1.0 + n).sqrt() - four_rotation_max_at(space, v, x, 1.0)?)
}

/// `max_k ‖λ v_n + i^k x‖ − √(λ² + λ‖x‖)`; at `x = λy` this is `λ` times the
/// unscaled slack at `y`.
pub fn four_rotation_scaled_slack(space: &SpaceRep<f64>, v: &[C64], x: &LevelElement<f64>, lambda: f64) -> Result<f64> {
    let n = space.norm(x)?;
    Ok(four_rotation_max_at(space, v, x, lambda)? - (lambda * lambda + lambda * n).sqrt())
}

/// `√(1+‖x‖) − ‖t^v_x‖`.
pub fn t_gadget_violation(space: &SpaceRep<f64>, v: &[C64], x: &LevelElement<f64>) -> Result<f64> {
    let n = space.norm(x)?;
    Ok((1.0 + n).sqrt() - space.norm(&t_element(space, v, x)?)?)
}

/// `‖[[λv_n, x], [0, λv_n]]‖ − √(λ² + λ‖x‖)`.
pub fn t_gadget_scaled_slack(space: &SpaceRep<f64>, v: &[C64], x: &LevelElement<f64>, lambda: f64) -> Result<f64> {
    let n = space.norm(x)?;
    let scaled: Vec<C64> = v.iter().map(|z| z * lambda).collect();
    Ok(space.norm(&t_element(space, &scaled, x)?)? - (lambda * lambda + lambda * n).sqrt())
}

fn normalized(space: &SpaceRep<f64>, x: &LevelElement<f64>) -> Result<Option<LevelElement<f64>>> {
    let n = space.norm(x)?;
    Ok((n > ZERO_NORM).then(|| x.scale_real(1.0 / n)))
}

/// `|‖[u_n x̂]‖ − √2|` with `x̂ = x/‖x‖` (zero at `x = 0`).
pub fn row_deviation(space: &SpaceRep<f64>, u: &[C64], x: &LevelElement<f64>) -> Result<f64> {
    match normalized(space, x)? {
        Some(xh) => Ok((op_norm(&build_row(space, u, &xh)?)? - 2f64.sqrt()).abs()),
        None => Ok(0.0),
    }
}

/// `|‖[u_n ; x̂]‖ − √2|` with `x̂ = x/‖x‖` (zero at `x = 0`).
pub fn column_deviation(space: &SpaceRep<f64>, u: &[C64], x: &LevelElement<f64>) -> Result<f64> {
    match normalized(space, x)? {
        Some(xh) => Ok((op_norm(&build_column(space, u, &xh)?)? - 2f64.sqrt()).abs()),
        None => Ok(0.0),
    }
}

/// `|‖r^v_x‖ − √(1+‖x‖²)|`.
pub fn r_gadget_deviation(space: &SpaceRep<f64>, v: &[C64], x: &LevelElement<f64>) -> Result<f64> {
    let n = space.norm(x)?;
    Ok((op_norm(&build_r(space, v, x)?)? - (1.0 + n * n).sqrt()).abs())
}

/// `|‖s^v_x‖ − (1+‖x‖)|`.
pub fn s_gadget_deviation(space: &SpaceRep<f64>, v: &[C64], x: &LevelElement<f64>) -> Result<f64> {
    let n = space.norm(x)?;
    Ok((op_norm(&build_s(space, v, x)?)? - (1.0 + n)).abs())
}

fn require_embedded(space: &SpaceRep<f64>, criterion: CriterionId, cfg: &SearchConfig) -> Option<CheckReport> {
    (!space.is_embedded())
        .then(|| CheckReport::unsupported(criterion, cfg, "the norm of this space is only available at level 1"))
}

/// Searches `x` with `‖x‖ ≤ r` over the radius sweep and all levels for
/// `√(1+‖x‖) > max_k ‖u_n + i^k x‖`. On level-1 oracle spaces only level 1 is
/// searched and the report is qualified accordingly.
pub fn check_unitary_four_rotation(space: &SpaceRep<f64>, u: &[C64], cfg: &SearchConfig) -> Result<CheckReport> {
    require_unit_ball(space, u)?;
    let (levels, qualifier) =
        if space.is_embedded() { (levels(cfg), None) } else { (vec![1], Some(LEVEL1_QUALIFIER.to_string())) };
    let objective =
        |x: &LevelElement<f64>, n: f64| to_nan(four_rotation_max_at(space, u, x, 1.0).map(|m| (1.0 + n).sqrt() - m));
    let mut report = search_report(
        CriterionId::UnitaryFourRotation,
        space,
        cfg,
        &levels,
        GridShape::square,
        &radius_sweep(cfg),
        &objective,
    );
    if let Some(w) = report.witness.as_mut() {
        let x = w.element()?;
        let k = (0..4u32)
            .map(|k| (k, to_nan(space.norm(&LevelElement::diagonal(x.rows(), u).add(&x.scale(i_pow(k)))))))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
            .0;
        w.aux.insert("k".into(), super::Aux::Int(k as i64));
        w.aux.insert("norm_x".into(), super::Aux::Real(space.norm(&x)?));
    }
    report.qualifier = qualifier;
    Ok(report)
}

/// Searches for `‖t^v_x‖ < √(1+‖x‖)`; needs an embedded space.
pub fn check_unitary_t_gadget(space: &SpaceRep<f64>, v: &[C64], cfg: &SearchConfig) -> Result<CheckReport> {
    if let Some(r) = require_embedded(space, CriterionId::UnitaryTGadget, cfg) {
        return Ok(r);
    }
    require_unit_ball(space, v)?;
    let objective = |x: &LevelElement<f64>, n: f64| {
        to_nan(t_element(space, v, x).and_then(|t| space.norm(&t)).map(|t| (1.0 + n).sqrt() - t))
    };
    Ok(search_report(
        CriterionId::UnitaryTGadget,
        space,
        cfg,
        &levels(cfg),
        GridShape::square,
        &radius_sweep(cfg),
        &objective,
    ))
}

/// Deviation of an equality criterion at one point.
type Deviation = fn(&SpaceRep<f64>, &[C64], &LevelElement<f64>) -> Result<f64>;

fn equality_search(
    criterion: CriterionId,
    space: &SpaceRep<f64>,
    u: &[C64],
    cfg: &SearchConfig,
    deviation: Deviation,
) -> Result<CheckReport> {
    if let Some(r) = require_embedded(space, criterion, cfg) {
        return Ok(r);
    }
    require_unit_ball(space, u)?;
    let objective = |x: &LevelElement<f64>, _: f64| to_nan(deviation(space, u, x));
    Ok(search_report(criterion, space, cfg, &levels(cfg), GridShape::square, &[1.0], &objective))
}

/// Searches norm-one `x` for `‖[u_n x]‖ ≠ √2`.
pub fn check_coisometry(space: &SpaceRep<f64>, u: &[C64], cfg: &SearchConfig) -> Result<CheckReport> {
    equality_search(CriterionId::Coisometry, space, u, cfg, row_deviation)
}

/// Searches norm-one `x` for `‖[u_n ; x]‖ ≠ √2`.
pub fn check_isometry(space: &SpaceRep<f64>, u: &[C64], cfg: &SearchConfig) -> Result<CheckReport> {
    equality_search(CriterionId::Isometry, space, u, cfg, column_deviation)
}

fn require_selfadjoint(space: &SpaceRep<f64>, v: &[C64]) -> Result<()> {
    let x = LevelElement::scalar(v);
    let vs = space.apply_involution(&x)?;
    let d = op_norm(&space.realize(&vs.sub(&x)))?;
    if d > 1e-10 {
        return Err(Error::NotSelfAdjoint(d));
    }
    Ok(())
}

/// Searches for `‖r^v_x‖ ≠ √(1+‖x‖²)` over the radius sweep and all levels.
pub fn check_operator_system(space: &SpaceRep<f64>, v: &[C64], cfg: &SearchConfig) -> Result<CheckReport> {
    if space.involution().is_none() {
        return Err(Error::MissingInvolution);
    }
    if let Some(r) = require_embedded(space, CriterionId::OperatorSystem, cfg) {
        return Ok(r);
    }
    require_unit_ball(space, v)?;
    require_selfadjoint(space, v)?;
    let objective = |x: &LevelElement<f64>, n: f64| {
        to_nan(build_r(space, v, x).and_then(|r| op_norm(&r)).map(|r| (r - (1.0 + n * n).sqrt()).abs()))
    };
    Ok(search_report(
        CriterionId::OperatorSystem,
        space,
        cfg,
        &levels(cfg),
        GridShape::square,
        &radius_sweep(cfg),
        &objective,
    ))
}

/// Largest `|‖s^v_x‖ − (1+‖x‖)|` found over the radius sweep and levels.
///
/// Whether this equality alone singles out operator systems is open, so the
/// result is returned raw, without a verdict.
pub fn explore_s_gadget(space: &SpaceRep<f64>, v: &[C64], cfg: &SearchConfig) -> Result<SearchResult> {
    if space.involution().is_none() {
        return Err(Error::MissingInvolution);
    }
    if !space.is_embedded() {
        return Err(Error::UnsupportedLevel(2));
    }
    require_unit_ball(space, v)?;
    let objective = |x: &LevelElement<f64>, n: f64| {
        to_nan(build_s(space, v, x).and_then(|s| op_norm(&s)).map(|s| (s - (1.0 + n)).abs()))
    };
    let mut out: Option<SearchResult> = None;
    for n in levels(cfg) {
        let domain = SearchDomain::new(GridShape::square(n), radius_sweep(cfg));
        let res = maximize_violation(&objective, space, &domain, cfg, &[0x5, n as u64]);
        out = Some(match out {
            None => res,
            Some(acc) => acc.merge(res),
        });
    }
    Ok(out.expect("max_level is positive"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::CMat;
    use crate::scalar::c;
    use approx::assert_abs_diff_eq;

    fn quick() -> SearchConfig {
        SearchConfig { restarts: 8, ascent_steps: 60, ..SearchConfig::default() }
    }

    fn twisted() -> SpaceRep<f64> {
        let sigma = CMat::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        SpaceRep::new(2, 2, vec![sigma, CMat::unit(2, 2, 1, 1)]).unwrap().with_adjoint_involution().unwrap()
    }

    #[test]
    fn four_rotation_spot_value() {
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let u = space.unit().unwrap().to_vec();
        let x = LevelElement::scalar(&[c(0.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let slack = -four_rotation_violation(&space, &u, &x).unwrap();
        assert_abs_diff_eq!(slack, (0.3 + 4.09f64.sqrt()) / 2.0 - 1.3f64.sqrt(), epsilon = 1e-12);
        assert!((slack - 0.0210).abs() < 1e-4);
    }

    #[test]
    fn scaled_slack_is_homogeneous() {
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let u = space.unit().unwrap().to_vec();
        let mut rng = crate::matcore::RngStream::new(3, 3);
        for _ in 0..10 {
            let y = LevelElement::random(2, 2, 4, &mut rng);
            let lambda = 1.0 - rng.uniform();
            let x = y.scale_real(lambda);
            let unscaled = -four_rotation_violation(&space, &u, &y).unwrap();
            let scaled = four_rotation_scaled_slack(&space, &u, &x, lambda).unwrap() / lambda;
            assert_abs_diff_eq!(scaled, unscaled, epsilon = 1e-9);
            let t_unscaled = -t_gadget_violation(&space, &u, &y).unwrap();
            let t_scaled = t_gadget_scaled_slack(&space, &u, &x, lambda).unwrap() / lambda;
            assert_abs_diff_eq!(t_scaled, t_unscaled, epsilon = 1e-9);
        }
    }

    #[test]
    fn full_matrix_holds() {
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let u = space.unit().unwrap().to_vec();
        let cfg = quick();
        for r in [
            check_unitary_four_rotation(&space, &u, &cfg).unwrap(),
            check_unitary_t_gadget(&space, &u, &cfg).unwrap(),
            check_coisometry(&space, &u, &cfg).unwrap(),
            check_isometry(&space, &u, &cfg).unwrap(),
            check_operator_system(&space, &u, &cfg).unwrap(),
        ] {
            assert_eq!(r.verdict, super::super::Verdict::HoldsWithinBudget, "{:?}", r.criterion);
            assert!(r.margin >= -cfg.tolerance);
            assert_eq!(r.levels_checked, vec![1, 2]);
        }
    }

    #[test]
    fn twisted_space_is_not_an_operator_system() {
        let space = twisted();
        let v = [c(1.0, 0.0), c(0.0, 0.0)];
        let r = check_operator_system(&space, &v, &quick()).unwrap();
        assert_eq!(r.verdict, super::super::Verdict::Violated);
        let x = r.witness.as_ref().unwrap().element().unwrap();
        assert_abs_diff_eq!(-r.margin, r_gadget_deviation(&space, &v, &x).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn preconditions() {
        let space = twisted();
        assert!(check_operator_system(&space, &[c(0.0, 0.0), c(1.0, 0.0)], &quick()).is_ok());
        let nonsym = SpaceRep::<f64>::upper_triangular(2).unwrap();
        let u = nonsym.unit().unwrap().to_vec();
        assert!(matches!(check_operator_system(&nonsym, &u, &quick()), Err(Error::MissingInvolution)));
        let full = SpaceRep::<f64>::full_matrix(2).unwrap();
        let iu = vec![c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)];
        assert!(matches!(check_operator_system(&full, &iu, &quick()), Err(Error::NotSelfAdjoint(_))));
        let big = vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert!(matches!(check_unitary_four_rotation(&full, &big, &quick()), Err(Error::UnitTooLarge(_))));
    }

    #[test]
    fn s_gadget_hook_runs() {
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let u = space.unit().unwrap().to_vec();
        let res = explore_s_gadget(&space, &u, &SearchConfig { restarts: 2, ascent_steps: 10, ..quick() }).unwrap();
        assert!(res.best_value < 1e-8);
    }
}
