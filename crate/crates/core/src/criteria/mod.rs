//! Metric characterizations as decision procedures.
//!
//! Conditions quantified over all of `M_n(X)` are searched with
//! [`crate::witness`]; the rest are evaluated on grids or on basis pairs.
//! Every check returns a [`CheckReport`]. A violation means a point where
//! the stated norm condition fails by more than the tolerance, and the
//! report's `margin` is minus the largest violation seen.

mod algebra;
mod local;
mod unitary;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{op_norm, CMat};
use crate::opspace::{LevelElement, SpaceRep};
use crate::scalar::C;
use crate::witness::{refine_witness, GridShape, RestartTrace, SearchConfig, SearchDomain, SearchResult};

pub use algebra::{
    algebra_product_tensor, check_algebra_product, check_cstar_among_systems, check_left_multiplier_map,
    check_mult_closed, check_multiplier, cstar_deviation, left_multiplier_violation, mult_row_defect,
    multiplication_tensor, CstarOptions, MultiplierSide,
};
pub use local::{adjoint_violation, check_adjoint, check_positive, positivity_excess};
pub use unitary::{
    check_coisometry, check_isometry, check_operator_system, check_unitary_four_rotation, check_unitary_t_gadget,
    column_deviation, explore_s_gadget, four_rotation_scaled_slack, four_rotation_violation, r_gadget_deviation,
    row_deviation, s_gadget_deviation, t_gadget_scaled_slack, t_gadget_violation,
};

pub use crate::C64;

/// Qualifier attached to reports on level-1 oracle spaces.
pub const LEVEL1_QUALIFIER: &str = "level-1 necessary condition";
/// Agreement threshold for re-evaluating a stored witness.
pub const REPRODUCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    HoldsWithinBudget,
    Violated,
    Inconclusive,
    UnsupportedLevel,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::HoldsWithinBudget => "HOLDS_WITHIN_BUDGET",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::UnsupportedLevel => "UNSUPPORTED_LEVEL",
        }
    }

    /// Verdict for a largest violation `v` found with `samples` evaluations.
    pub fn from_violation(v: f64, samples: usize, tolerance: f64) -> Verdict {
        if samples == 0 {
            Verdict::Inconclusive
        } else if v > tolerance {
            Verdict::Violated
        } else {
            Verdict::HoldsWithinBudget
        }
    }

    /// Conjunction: a violation dominates, then missing evidence.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (UnsupportedLevel, _) | (_, UnsupportedLevel) => UnsupportedLevel,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => HoldsWithinBudget,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionId {
    UnitaryFourRotation,
    UnitaryTGadget,
    Coisometry,
    Isometry,
    OperatorSystem,
    Positive,
    Adjoint,
    MultClosed,
    MultiplierLeft,
    MultiplierRight,
    MultiplierQuasi,
    LeftMultiplierMap,
    AlgebraProduct,
    CstarAmongSystems,
}

impl CriterionId {
    pub const ALL: [CriterionId; 14] = [
        CriterionId::UnitaryFourRotation,
        CriterionId::UnitaryTGadget,
        CriterionId::Coisometry,
        CriterionId::Isometry,
        CriterionId::OperatorSystem,
        CriterionId::Positive,
        CriterionId::Adjoint,
        CriterionId::MultClosed,
        CriterionId::MultiplierLeft,
        CriterionId::MultiplierRight,
        CriterionId::MultiplierQuasi,
        CriterionId::LeftMultiplierMap,
        CriterionId::AlgebraProduct,
        CriterionId::CstarAmongSystems,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::UnitaryFourRotation => "unitary-four-rotation",
            CriterionId::UnitaryTGadget => "unitary-t-gadget",
            CriterionId::Coisometry => "coisometry",
            CriterionId::Isometry => "isometry",
            CriterionId::OperatorSystem => "operator-system",
            CriterionId::Positive => "positive",
            CriterionId::Adjoint => "adjoint",
            CriterionId::MultClosed => "mult-closed",
            CriterionId::MultiplierLeft => "multiplier-left",
            CriterionId::MultiplierRight => "multiplier-right",
            CriterionId::MultiplierQuasi => "multiplier-quasi",
            CriterionId::LeftMultiplierMap => "left-multiplier-map",
            CriterionId::AlgebraProduct => "algebra-product",
            CriterionId::CstarAmongSystems => "cstar-among-systems",
        }
    }

    /// Stable numeric tag mixed into random stream keys.
    pub(crate) fn tag(self) -> u64 {
        Self::ALL.iter().position(|c| *c == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|c| c.as_str() == s).ok_or_else(|| Error::UnknownCriterion(s.to_string()))
    }
}

/// Auxiliary witness data: scalars such as `z`, `t`, `k`, and matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aux {
    Real(f64),
    Int(i64),
    Complex([f64; 2]),
    Text(String),
    Matrix { rows: usize, cols: usize, entries: Vec<[f64; 2]> },
    Vector(Vec<[f64; 2]>),
}

impl Aux {
    pub fn matrix(m: &CMat<f64>) -> Aux {
        Aux::Matrix { rows: m.rows(), cols: m.cols(), entries: m.row_major().iter().map(|z| [z.re, z.im]).collect() }
    }

    pub fn vector(v: &[C64]) -> Aux {
        Aux::Vector(v.iter().map(|z| [z.re, z.im]).collect())
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Aux::Real(v) => Some(*v),
            Aux::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_complex(&self) -> Option<C64> {
        match self {
            Aux::Complex([re, im]) => Some(C::new(*re, *im)),
            Aux::Real(v) => Some(C::new(*v, 0.0)),
            _ => None,
        }
    }

    pub fn as_cmat(&self) -> Option<CMat<f64>> {
        match self {
            Aux::Matrix { rows, cols, entries } => {
                CMat::from_row_major(*rows, *cols, entries.iter().map(|z| C::new(z[0], z[1])).collect()).ok()
            }
            _ => None,
        }
    }
}

/// A point at which a criterion was evaluated: an optional grid over `X`
/// plus named auxiliary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Witness {
    pub level: usize,
    /// `rows × cols` grid of coefficient vectors; empty when the check has
    /// no grid argument.
    pub coeffs: Vec<Vec<Vec<[f64; 2]>>>,
    pub aux: BTreeMap<String, Aux>,
}

impl Witness {
    pub fn from_element(x: &LevelElement<f64>) -> Witness {
        let coeffs = (0..x.rows())
            .map(|i| (0..x.cols()).map(|j| x.cell(i, j).iter().map(|z| [z.re, z.im]).collect()).collect())
            .collect();
        Witness { level: x.cols(), coeffs, aux: BTreeMap::new() }
    }

    pub fn with_aux(mut self, key: &str, value: Aux) -> Witness {
        self.aux.insert(key.to_string(), value);
        self
    }

    pub fn element(&self) -> Result<LevelElement<f64>> {
        let rows = self.coeffs.len();
        let cols = self.coeffs.first().map_or(0, |r| r.len());
        if self.coeffs.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged witness grid".into()));
        }
        let cells = self.coeffs.iter().flatten().map(|c| c.iter().map(|z| C::new(z[0], z[1])).collect()).collect();
        LevelElement::from_cells(rows, cols, cells)
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        self.aux.get(key).and_then(Aux::as_real).ok_or_else(|| missing(key))
    }

    pub fn complex(&self, key: &str) -> Result<C64> {
        self.aux.get(key).and_then(Aux::as_complex).ok_or_else(|| missing(key))
    }

    pub fn matrix(&self, key: &str) -> Result<CMat<f64>> {
        self.aux.get(key).and_then(Aux::as_cmat).ok_or_else(|| missing(key))
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        match self.aux.get(key) {
            Some(Aux::Text(s)) => Ok(s),
            _ => Err(missing(key)),
        }
    }
}

fn missing(key: &str) -> Error {
    Error::InvalidInput(format!("witness has no usable `{key}` entry"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub verdict: Verdict,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    pub restarts: Vec<RestartTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub criterion: CriterionId,
    pub verdict: Verdict,
    /// Minus the largest violation found (or the smallest slack observed).
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub samples: u64,
    pub levels_checked: Vec<usize>,
    pub config: SearchConfig,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_checks: Vec<SubCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<LevelTrace>>,
}

impl CheckReport {
    pub(crate) fn new(criterion: CriterionId, cfg: &SearchConfig) -> CheckReport {
        CheckReport {
            criterion,
            verdict: Verdict::Inconclusive,
            margin: 0.0,
            witness: None,
            samples: 0,
            levels_checked: Vec::new(),
            config: cfg.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            qualifier: None,
            notes: Vec::new(),
            sub_checks: Vec::new(),
            trace: None,
        }
    }

    /// Report for a check the space's norm mode cannot evaluate.
    pub(crate) fn unsupported(criterion: CriterionId, cfg: &SearchConfig, why: &str) -> CheckReport {
        let mut r = CheckReport::new(criterion, cfg);
        r.verdict = Verdict::UnsupportedLevel;
        r.notes.push(why.to_string());
        r
    }

    /// Sets verdict and margin from the largest violation and sample count.
    pub(crate) fn conclude(&mut self, violation: f64, samples: u64) {
        self.samples = samples;
        self.verdict = Verdict::from_violation(violation, samples as usize, self.config.tolerance);
        self.margin = if samples == 0 {
            self.notes.push("no evaluations were made; nothing to conclude".into());
            0.0
        } else {
            -violation
        };
    }
}

/// Inputs a check may need beyond the space itself.
#[derive(Debug, Clone)]
pub struct CheckRequest {
    pub criterion: CriterionId,
    /// Coefficients of the distinguished element; defaults to the space's unit.
    pub unit: Option<Vec<C64>>,
    /// Ambient matrix argument: `x` for positivity and adjoint, `w` for the
    /// multiplier checks.
    pub element: Option<CMat<f64>>,
    /// Second ambient matrix: `z` for the adjoint check.
    pub partner: Option<CMat<f64>>,
    /// Coefficient matrix of a linear map `X → X`.
    pub map: Option<DMatrix<C64>>,
    /// Bilinear map as `tensor[i][j] = coeffs(m(B_i, B_j))`.
    pub tensor: Option<Vec<Vec<Vec<C64>>>>,
    pub cstar: CstarOptions,
    /// Keep per-restart search traces in the report.
    pub keep_trace: bool,
}

impl CheckRequest {
    pub fn new(criterion: CriterionId) -> CheckRequest {
        CheckRequest {
            criterion,
            unit: None,
            element: None,
            partner: None,
            map: None,
            tensor: None,
            cstar: CstarOptions::default(),
            keep_trace: false,
        }
    }

    pub fn with_unit(mut self, unit: Vec<C64>) -> Self {
        self.unit = Some(unit);
        self
    }

    pub fn with_element(mut self, m: CMat<f64>) -> Self {
        self.element = Some(m);
        self
    }

    pub fn with_partner(mut self, m: CMat<f64>) -> Self {
        self.partner = Some(m);
        self
    }

    pub fn with_map(mut self, t: DMatrix<C64>) -> Self {
        self.map = Some(t);
        self
    }

    pub fn with_tensor(mut self, m: Vec<Vec<Vec<C64>>>) -> Self {
        self.tensor = Some(m);
        self
    }

    fn unit_or_space(&self, space: &SpaceRep<f64>) -> Result<Vec<C64>> {
        match (&self.unit, space.unit()) {
            (Some(u), _) => Ok(u.clone()),
            (None, Some(u)) => Ok(u.to_vec()),
            (None, None) => Err(Error::MissingUnit),
        }
    }

    fn need_element(&self) -> Result<&CMat<f64>> {
        self.element
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("{} needs an element argument", self.criterion)))
    }
}

/// Runs the requested check.
pub fn run_check(space: &SpaceRep<f64>, req: &CheckRequest, cfg: &SearchConfig) -> Result<CheckReport> {
    cfg.validate(space.p(), space.q())?;
    let mut report = match req.criterion {
        CriterionId::UnitaryFourRotation => check_unitary_four_rotation(space, &req.unit_or_space(space)?, cfg)?,
        CriterionId::UnitaryTGadget => check_unitary_t_gadget(space, &req.unit_or_space(space)?, cfg)?,
        CriterionId::Coisometry => check_coisometry(space, &req.unit_or_space(space)?, cfg)?,
        CriterionId::Isometry => check_isometry(space, &req.unit_or_space(space)?, cfg)?,
        CriterionId::OperatorSystem => check_operator_system(space, &req.unit_or_space(space)?, cfg)?,
        CriterionId::Positive => check_positive(req.need_element()?, cfg)?,
        CriterionId::Adjoint => {
            let z =
                req.partner.as_ref().ok_or_else(|| Error::InvalidInput("adjoint needs a partner argument z".into()))?;
            check_adjoint(req.need_element()?, z, cfg)?
        }
        CriterionId::MultClosed => check_mult_closed(space, cfg)?,
        CriterionId::MultiplierLeft => check_multiplier(space, req.need_element()?, MultiplierSide::Left, cfg)?,
        CriterionId::MultiplierRight => check_multiplier(space, req.need_element()?, MultiplierSide::Right, cfg)?,
        CriterionId::MultiplierQuasi => check_multiplier(space, req.need_element()?, MultiplierSide::Quasi, cfg)?,
        CriterionId::LeftMultiplierMap => {
            let t = req.map.as_ref().ok_or_else(|| Error::InvalidInput("left-multiplier-map needs a map".into()))?;
            check_left_multiplier_map(space, t, cfg)?
        }
        CriterionId::AlgebraProduct => {
            let m = match &req.tensor {
                Some(m) => m.clone(),
                None => multiplication_tensor(space)?,
            };
            check_algebra_product(space, &req.unit_or_space(space)?, &m, cfg)?
        }
        CriterionId::CstarAmongSystems => check_cstar_among_systems(space, &req.cstar, cfg)?,
    };
    if !req.keep_trace {
        report.trace = None;
    }
    Ok(report)
}

/// Re-evaluates the criterion at the report's stored witness and returns the
/// resulting margin. Reports without a witness are rejected.
pub fn reevaluate(space: &SpaceRep<f64>, req: &CheckRequest, report: &CheckReport) -> Result<f64> {
    let w = report.witness.as_ref().ok_or_else(|| Error::InvalidInput("report carries no witness".into()))?;
    let req = CheckRequest { criterion: report.criterion, ..req.clone() };
    Ok(-violation_at(space, &req, w)?)
}

/// Violation of the requested criterion at a given witness.
pub fn violation_at(space: &SpaceRep<f64>, req: &CheckRequest, w: &Witness) -> Result<f64> {
    let v = match req.criterion {
        CriterionId::UnitaryFourRotation => four_rotation_violation(space, &req.unit_or_space(space)?, &w.element()?)?,
        CriterionId::UnitaryTGadget => t_gadget_violation(space, &req.unit_or_space(space)?, &w.element()?)?,
        CriterionId::Coisometry => row_deviation(space, &req.unit_or_space(space)?, &w.element()?)?,
        CriterionId::Isometry => column_deviation(space, &req.unit_or_space(space)?, &w.element()?)?,
        CriterionId::OperatorSystem => r_gadget_deviation(space, &req.unit_or_space(space)?, &w.element()?)?,
        CriterionId::Positive => positivity_excess(req.need_element()?, w.complex("z")?)?,
        CriterionId::Adjoint => {
            let z = req.partner.as_ref().ok_or_else(|| Error::InvalidInput("missing partner".into()))?;
            adjoint_violation(req.need_element()?, z, w.real("t")?)?
        }
        CriterionId::LeftMultiplierMap => {
            let t = req.map.as_ref().ok_or_else(|| Error::InvalidInput("missing map".into()))?;
            left_multiplier_violation(space, t, &w.element()?)?
        }
        CriterionId::MultClosed
        | CriterionId::MultiplierLeft
        | CriterionId::MultiplierRight
        | CriterionId::MultiplierQuasi => algebra::reevaluate_product(space, w)?,
        CriterionId::AlgebraProduct => algebra::reevaluate_algebra_product(space, &req.unit_or_space(space)?, req, w)?,
        CriterionId::CstarAmongSystems => cstar_deviation(space, w)?,
    };
    Ok(v)
}

/// Default radius sweep: `{0.1, 0.25, 0.5, radius, 1}` sorted, deduplicated.
pub fn radius_sweep(cfg: &SearchConfig) -> Vec<f64> {
    let mut r = vec![0.1, 0.25, 0.5, cfg.radius, 1.0];
    r.sort_by(|a, b| a.total_cmp(b));
    r.dedup();
    r
}

pub(crate) fn require_unit_ball(space: &SpaceRep<f64>, v: &[C64]) -> Result<()> {
    if v.len() != space.dim() {
        return Err(Error::Shape(format!("{} coefficients for a {}-dimensional space", v.len(), space.dim())));
    }
    let n = space.element_norm(v)?;
    if n > 1.0 + 1e-10 {
        return Err(Error::UnitTooLarge(n));
    }
    Ok(())
}

pub(crate) fn require_contraction(m: &CMat<f64>) -> Result<()> {
    let n = op_norm(m)?;
    if n > 1.0 + 1e-10 {
        return Err(Error::NotContraction(n));
    }
    Ok(())
}

/// Searches levels `1..=max_level` (or only level 1), merging in level
/// order, then polishes a violating point with [`refine_witness`].
pub(crate) fn search_report<F>(
    criterion: CriterionId,
    space: &SpaceRep<f64>,
    cfg: &SearchConfig,
    levels: &[usize],
    shape: impl Fn(usize) -> GridShape,
    radii: &[f64],
    objective: &F,
) -> CheckReport
where
    F: Fn(&LevelElement<f64>, f64) -> f64 + Sync,
{
    let mut report = CheckReport::new(criterion, cfg);
    let mut best: Option<(SearchResult, f64)> = None;
    let mut traces = Vec::new();
    let mut evaluations = 0;
    for &n in levels {
        let domain = SearchDomain::new(shape(n), radii.to_vec());
        let res = crate::witness::maximize_violation(objective, space, &domain, cfg, &[criterion.tag(), n as u64]);
        evaluations += res.evaluations;
        traces.push(LevelTrace { level: n, restarts: res.trace.clone() });
        let better = match &best {
            None => res.best_point.is_some(),
            Some((b, _)) => res.best_value > b.best_value,
        };
        if better {
            let r = radii.iter().copied().fold(0.0, f64::max);
            best = Some((res, r));
        }
    }
    report.levels_checked = levels.to_vec();
    report.trace = Some(traces);
    let samples = if best.is_some() { evaluations } else { 0 };
    let Some((res, radius)) = best else {
        report.conclude(f64::NEG_INFINITY, 0);
        return report;
    };
    let mut value = res.best_value;
    let mut point = res.best_point.expect("best point present");
    if value > cfg.tolerance {
        let refined = refine_witness(objective, space, &point, radius, cfg);
        if let Some(p) = refined.best_point {
            if refined.best_value >= value {
                point = p;
            }
        }
        // store the value the witness reproduces from scratch
        let n = space.norm(&point).unwrap_or(f64::NAN);
        value = objective(&point, n);
        report.witness = Some(Witness::from_element(&point));
    }
    report.conclude(value, samples);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_ids_round_trip() {
        for c in CriterionId::ALL {
            assert_eq!(c.as_str().parse::<CriterionId>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
        assert!(matches!("unknown-criterion".parse::<CriterionId>(), Err(Error::UnknownCriterion(_))));
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(Verdict::from_violation(0.5, 0, 1e-6), Verdict::Inconclusive);
        assert_eq!(Verdict::from_violation(2e-6, 3, 1e-6), Verdict::Violated);
        assert_eq!(Verdict::from_violation(1e-6, 3, 1e-6), Verdict::HoldsWithinBudget);
        assert_eq!(Verdict::from_violation(-0.3, 3, 1e-6), Verdict::HoldsWithinBudget);
        assert_eq!(serde_json::to_string(&Verdict::HoldsWithinBudget).unwrap(), "\"HOLDS_WITHIN_BUDGET\"");
        assert_eq!(Verdict::HoldsWithinBudget.and(Verdict::Violated), Verdict::Violated);
    }

    #[test]
    fn sweep_contains_configured_radius() {
        let cfg = SearchConfig { radius: 0.7, ..SearchConfig::default() };
        assert_eq!(radius_sweep(&cfg), vec![0.1, 0.25, 0.5, 0.7, 1.0]);
        assert_eq!(radius_sweep(&SearchConfig::default()), vec![0.1, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn witness_grid_round_trip() {
        let mut rng = crate::matcore::RngStream::new(1, 1);
        let x = LevelElement::random(2, 3, 4, &mut rng);
        let w = Witness::from_element(&x).with_aux("k", Aux::Int(2));
        let back: Witness = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back.element().unwrap(), x);
        assert_eq!(back.real("k").unwrap(), 2.0);
    }
}
