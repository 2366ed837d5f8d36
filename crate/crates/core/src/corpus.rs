//! Example spaces with the verdicts they are known to produce.
//!
//! Every entry runs under the default [`SearchConfig`] and pinned seed; a
//! verdict that drifts from its expectation fails regression.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{run_check, violation_at, CheckReport, CheckRequest, CriterionId, Verdict, Witness, C64};
use crate::error::{Error, Result};
use crate::matcore::CMat;
use crate::opspace::{Level1Oracle, LevelElement, SpaceRep};
use crate::scalar::C;
use crate::witness::SearchConfig;

/// Tolerance used by the finite `ℓ¹₂` model, whose norm is within about
/// `2π²/M²` of the true one on the unit ball.
pub const L1_MODEL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Expectation {
    pub request: CheckRequest,
    pub verdict: Verdict,
}

/// A known witness whose violation is reported alongside the searches.
#[derive(Debug, Clone)]
pub struct PinnedWitness {
    pub label: String,
    pub request: CheckRequest,
    pub witness: Witness,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub description: String,
    pub space: SpaceRep<f64>,
    pub expectations: Vec<Expectation>,
    pub pinned: Vec<PinnedWitness>,
    /// Replaces the configured tolerance for this entry only.
    pub tolerance: Option<f64>,
}

impl CorpusEntry {
    fn new(name: &str, description: &str, space: SpaceRep<f64>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            space,
            expectations: Vec::new(),
            pinned: Vec::new(),
            tolerance: None,
        }
    }

    fn expect(mut self, criterion: CriterionId, verdict: Verdict) -> Self {
        self.expectations.push(Expectation { request: CheckRequest::new(criterion), verdict });
        self
    }

    fn expect_request(mut self, request: CheckRequest, verdict: Verdict) -> Self {
        self.expectations.push(Expectation { request, verdict });
        self
    }

    fn pin(mut self, label: &str, criterion: CriterionId, coeffs: &[C64]) -> Self {
        let witness = Witness::from_element(&LevelElement::scalar(coeffs));
        self.pinned.push(PinnedWitness { label: label.into(), request: CheckRequest::new(criterion), witness });
        self
    }

    /// Expected verdict per criterion (the first expectation wins when a
    /// criterion is listed more than once).
    pub fn expected(&self) -> BTreeMap<CriterionId, Verdict> {
        let mut m = BTreeMap::new();
        for e in &self.expectations {
            m.entry(e.request.criterion).or_insert(e.verdict);
        }
        m
    }

    pub fn config(&self, base: &SearchConfig) -> SearchConfig {
        match self.tolerance {
            Some(t) => SearchConfig { tolerance: t, ..base.clone() },
            None => base.clone(),
        }
    }

    /// Space-definition JSON that reloads to this entry's space.
    pub fn space_json(&self) -> String {
        serde_json::to_string_pretty(&self.space.to_def()).expect("space definitions serialize")
    }
}

fn re(x: f64) -> C64 {
    C::new(x, 0.0)
}

fn real_vec(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| re(x)).collect()
}

fn e1(n: usize) -> Vec<C64> {
    let mut v = vec![re(0.0); n];
    v[0] = re(1.0);
    v
}

fn unit_checks(entry: CorpusEntry, verdict: Verdict) -> CorpusEntry {
    entry
        .expect(CriterionId::UnitaryFourRotation, verdict)
        .expect(CriterionId::UnitaryTGadget, verdict)
        .expect(CriterionId::Coisometry, verdict)
        .expect(CriterionId::Isometry, verdict)
}

/// Diagonal `N × N` matrices with the vector of ones as unit.
pub fn build_linf(n: usize) -> Result<CorpusEntry> {
    let space = SpaceRep::diagonal(n)?.with_unit(real_vec(&vec![1.0; n]))?;
    let entry = CorpusEntry::new(&format!("linf_{n}"), "diagonal matrices, unit = vector of ones", space);
    Ok(unit_checks(entry, Verdict::HoldsWithinBudget)
        .expect(CriterionId::OperatorSystem, Verdict::HoldsWithinBudget)
        .expect(CriterionId::MultClosed, Verdict::HoldsWithinBudget))
}

/// Diagonal `N × N` matrices (`N ≥ 2`) with `u = e₁`, which is not unitary.
pub fn build_linf_e1(n: usize) -> Result<CorpusEntry> {
    if n < 2 {
        return Err(Error::InvalidInput("e1 is unitary in the scalars; use N >= 2".into()));
    }
    let space = SpaceRep::diagonal(n)?.with_unit(e1(n))?;
    let entry = CorpusEntry::new(&format!("linf_{n}_e1"), "diagonal matrices, u = first standard basis vector", space);
    let mut e2 = vec![re(0.0); n];
    e2[1] = re(1.0);
    Ok(unit_checks(entry, Verdict::Violated).expect(CriterionId::MultClosed, Verdict::HoldsWithinBudget).pin(
        "x = e2",
        CriterionId::UnitaryFourRotation,
        &e2,
    ))
}

fn trace_norm_space(basis: Vec<CMat<f64>>, unit: Vec<C64>) -> Result<SpaceRep<f64>> {
    SpaceRep::new(2, 2, basis)?.with_level1_oracle(Level1Oracle::TraceNorm)?.with_unit(unit)
}

/// `M₂` with the trace norm and `u = diag(α, 1−α)`.
pub fn build_trace_class_2(alpha: f64) -> Result<CorpusEntry> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let basis = (0..4).map(|r| CMat::unit(2, 2, r / 2, r % 2)).collect();
    let space = trace_norm_space(basis, real_vec(&[alpha, 0.0, 0.0, 1.0 - alpha]))?;
    Ok(CorpusEntry::new("trace_class_2", "2x2 matrices with the trace norm, u = diag(a, 1-a)", space)
        .expect(CriterionId::UnitaryFourRotation, Verdict::Violated)
        .expect(CriterionId::UnitaryTGadget, Verdict::UnsupportedLevel)
        .pin("x = 0.25 E21", CriterionId::UnitaryFourRotation, &real_vec(&[0.0, 0.0, 0.25, 0.0])))
}

/// Lower-triangular `2 × 2` matrices with the trace norm, `u = diag(0.6, 0.4)`.
pub fn build_lower_triangular_l12() -> Result<CorpusEntry> {
    let basis = vec![CMat::unit(2, 2, 0, 0), CMat::unit(2, 2, 1, 0), CMat::unit(2, 2, 1, 1)];
    let space = trace_norm_space(basis, real_vec(&[0.6, 0.0, 0.4]))?;
    Ok(CorpusEntry::new("lower_triangular_L12", "lower-triangular 2x2 matrices with the trace norm", space)
        .expect(CriterionId::UnitaryFourRotation, Verdict::Violated)
        .pin("x = 0.25 E21", CriterionId::UnitaryFourRotation, &real_vec(&[0.0, 0.25, 0.0])))
}

/// `span{I, E₂₁}` with the trace norm and `u = I/2`.
pub fn build_lower_triangular_repeated_diag() -> Result<CorpusEntry> {
    let basis = vec![CMat::identity(2), CMat::unit(2, 2, 1, 0)];
    let space = trace_norm_space(basis, real_vec(&[0.5, 0.0]))?;
    Ok(CorpusEntry::new(
        "lower_triangular_repeated_diag",
        "lower-triangular 2x2 matrices with equal diagonal entries, trace norm",
        space,
    )
    .expect(CriterionId::UnitaryFourRotation, Verdict::Violated))
}

/// Diagonal of the trace-class `2 × 2` matrices, a copy of `ℓ¹₂`, `u = E₁₁`.
pub fn build_diagonal_l1_2() -> Result<CorpusEntry> {
    let basis = vec![CMat::unit(2, 2, 0, 0), CMat::unit(2, 2, 1, 1)];
    let space = trace_norm_space(basis, e1(2))?;
    Ok(CorpusEntry::new("diagonal_l1_2", "diagonal 2x2 matrices with the trace norm", space)
        .expect(CriterionId::UnitaryFourRotation, Verdict::HoldsWithinBudget))
}

/// Embedded model of `ℓ¹₂`: `span{I, diag(ω⁰, …, ω^{M−1})}` with
/// `ω = e^{2πi/M}`, where `‖(a, b)‖ = max_j |a + bωʲ|`.
pub fn build_l1_2_model(m: usize) -> Result<CorpusEntry> {
    if m == 0 {
        return Err(Error::InvalidInput("root count must be positive".into()));
    }
    let roots: Vec<C64> = (0..m).map(|j| C::from_polar(1.0, 2.0 * PI * j as f64 / m as f64)).collect();
    let space = SpaceRep::new(m, m, vec![CMat::identity(m), CMat::diag(&roots)])?.with_unit(e1(2))?;
    let mut entry = CorpusEntry::new(&format!("l1_2_model_{m}"), "diagonal root-of-unity model of l1_2", space)
        .expect(CriterionId::UnitaryFourRotation, Verdict::HoldsWithinBudget)
        .expect(CriterionId::UnitaryTGadget, Verdict::HoldsWithinBudget);
    entry.tolerance = Some(L1_MODEL_TOLERANCE);
    Ok(entry)
}

/// First column of `M₂` as `2 × 1` matrices, `u = e₁`.
pub fn build_column_h2() -> Result<CorpusEntry> {
    let space = SpaceRep::new(2, 1, vec![CMat::unit(2, 1, 0, 0), CMat::unit(2, 1, 1, 0)])?.with_unit(e1(2))?;
    Ok(CorpusEntry::new("column_H2", "2-dimensional column Hilbert space, u = e1", space)
        .expect(CriterionId::Isometry, Verdict::HoldsWithinBudget)
        .expect(CriterionId::Coisometry, Verdict::Violated)
        .expect(CriterionId::UnitaryFourRotation, Verdict::Violated)
        .expect(CriterionId::UnitaryTGadget, Verdict::Violated)
        .pin("x = e2", CriterionId::Coisometry, &real_vec(&[0.0, 1.0])))
}

/// `{x ∈ M₂ : x₁₁ = 0, x₁₂ = x₂₁}` with `u = E₁₂ + E₂₁`.
pub fn build_twisted_selfadjoint() -> Result<CorpusEntry> {
    let sigma = CMat::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])?;
    let space =
        SpaceRep::new(2, 2, vec![sigma, CMat::unit(2, 2, 1, 1)])?.with_adjoint_involution()?.with_unit(e1(2))?;
    let entry =
        CorpusEntry::new("twisted_selfadjoint", "symmetric 2x2 matrices with zero (1,1) entry, u = E12 + E21", space);
    Ok(unit_checks(entry, Verdict::HoldsWithinBudget).expect(CriterionId::OperatorSystem, Verdict::Violated))
}

/// Upper-triangular `d × d` matrices with unit `I`.
pub fn build_upper_triangular(d: usize) -> Result<CorpusEntry> {
    let space = SpaceRep::upper_triangular(d)?;
    let entry = CorpusEntry::new(&format!("upper_triangular_{d}"), "upper-triangular matrices, unit = identity", space);
    let e11 = CMat::unit(d, d, 0, 0);
    Ok(unit_checks(entry, Verdict::HoldsWithinBudget)
        .expect(CriterionId::MultClosed, Verdict::HoldsWithinBudget)
        .expect(CriterionId::AlgebraProduct, Verdict::HoldsWithinBudget)
        .expect_request(CheckRequest::new(CriterionId::MultiplierLeft).with_element(e11), Verdict::HoldsWithinBudget))
}

/// `M_d` with the adjoint involution and unit `I`.
pub fn build_full_matrix(d: usize) -> Result<CorpusEntry> {
    let space = SpaceRep::full_matrix(d)?;
    let k = d * d;
    let x = CMat::diag(&(0..d).map(|i| re(0.5 / (i + 1) as f64)).collect::<Vec<_>>());
    let entry = CorpusEntry::new(&format!("full_matrix_{d}"), "all d x d matrices", space);
    let mut entry = unit_checks(entry, Verdict::HoldsWithinBudget)
        .expect(CriterionId::OperatorSystem, Verdict::HoldsWithinBudget)
        .expect(CriterionId::MultClosed, Verdict::HoldsWithinBudget)
        .expect(CriterionId::AlgebraProduct, Verdict::HoldsWithinBudget)
        .expect(CriterionId::CstarAmongSystems, Verdict::HoldsWithinBudget)
        .expect_request(CheckRequest::new(CriterionId::Positive).with_element(x), Verdict::HoldsWithinBudget)
        .expect_request(
            CheckRequest::new(CriterionId::LeftMultiplierMap).with_map(DMatrix::identity(k, k)),
            Verdict::HoldsWithinBudget,
        );
    if d >= 2 {
        let (e12, e21) = (CMat::unit(d, d, 0, 1), CMat::unit(d, d, 1, 0));
        entry = entry.expect_request(
            CheckRequest::new(CriterionId::Adjoint).with_element(e12).with_partner(e21),
            Verdict::HoldsWithinBudget,
        );
    }
    Ok(entry)
}

/// `span{E₁₂, E₂₁} ⊂ M₂` with `u = E₁₂ + E₂₁`.
pub fn build_non_algebra_span() -> Result<CorpusEntry> {
    let space = SpaceRep::new(2, 2, vec![CMat::unit(2, 2, 0, 1), CMat::unit(2, 2, 1, 0)])?
        .with_adjoint_involution()?
        .with_unit(real_vec(&[1.0, 1.0]))?;
    Ok(CorpusEntry::new("non_algebra_span", "span of E12 and E21, u = E12 + E21", space)
        .expect(CriterionId::UnitaryFourRotation, Verdict::HoldsWithinBudget)
        .expect(CriterionId::MultClosed, Verdict::Violated)
        .expect_request(
            CheckRequest::new(CriterionId::MultiplierQuasi).with_element(CMat::identity(2)),
            Verdict::Violated,
        ))
}

/// The regression corpus in its fixed order.
pub fn default_corpus() -> Result<Vec<CorpusEntry>> {
    Ok(vec![
        build_linf(3)?,
        build_linf_e1(3)?,
        build_linf(1)?,
        build_trace_class_2(0.6)?,
        build_lower_triangular_l12()?,
        build_lower_triangular_repeated_diag()?,
        build_diagonal_l1_2()?,
        build_l1_2_model(64)?,
        build_column_h2()?,
        build_twisted_selfadjoint()?,
        build_upper_triangular(2)?,
        build_full_matrix(2)?,
        build_non_algebra_span()?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub criterion: CriterionId,
    pub expected: Verdict,
    pub verdict: Verdict,
    pub margin: f64,
    pub matches: bool,
    pub report: CheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedValue {
    pub label: String,
    pub criterion: CriterionId,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResult {
    pub name: String,
    pub description: String,
    pub tolerance: f64,
    pub outcomes: Vec<Outcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pinned: Vec<PinnedValue>,
    /// Set when the entry could not be run at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EntryResult {
    pub fn all_match(&self) -> bool {
        self.error.is_none() && self.outcomes.iter().all(|o| o.matches)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub seed: u64,
    pub entries: Vec<EntryResult>,
    pub all_match: bool,
}

pub fn run_entry(entry: &CorpusEntry, base: &SearchConfig) -> EntryResult {
    let cfg = entry.config(base);
    let mut result = EntryResult {
        name: entry.name.clone(),
        description: entry.description.clone(),
        tolerance: cfg.tolerance,
        outcomes: Vec::new(),
        pinned: Vec::new(),
        error: None,
    };
    for p in &entry.pinned {
        match violation_at(&entry.space, &p.request, &p.witness) {
            Ok(v) => {
                result.pinned.push(PinnedValue { label: p.label.clone(), criterion: p.request.criterion, violation: v })
            }
            Err(err) => {
                result.error = Some(format!("pinned witness {}: {err}", p.label));
                return result;
            }
        }
    }
    for e in &entry.expectations {
        match run_check(&entry.space, &e.request, &cfg) {
            Ok(mut report) => {
                if entry.tolerance.is_some() {
                    report.notes.push(format!("entry-local tolerance {:e}", cfg.tolerance));
                }
                result.outcomes.push(Outcome {
                    criterion: e.request.criterion,
                    expected: e.verdict,
                    verdict: report.verdict,
                    margin: report.margin,
                    matches: report.verdict == e.verdict,
                    report,
                });
            }
            Err(err) => {
                result.error = Some(format!("{}: {err}", e.request.criterion));
                break;
            }
        }
    }
    result
}

/// Runs the entries in parallel; results keep the input order.
pub fn run_corpus(entries: &[CorpusEntry], cfg: &SearchConfig) -> CorpusReport {
    let results: Vec<EntryResult> = entries.par_iter().map(|e| run_entry(e, cfg)).collect();
    let all_match = results.iter().all(EntryResult::all_match);
    CorpusReport { seed: cfg.seed, entries: results, all_match }
}

/// Writes `<name>.json` space definitions for every entry into `dir`.
pub fn emit_space_definitions(entries: &[CorpusEntry], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for e in entries {
        std::fs::write(dir.join(format!("{}.json", e.name)), e.space_json())?;
    }
    Ok(())
}
