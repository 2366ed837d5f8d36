//! Products, multipliers and C*-algebras among operator systems.
//!
//! The products here are taken in the ambient matrix algebra. Membership is
//! decided exactly by projection residuals; the block-row norm equalities
//! are evaluated alongside as an independent metric path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gadgets::{build_m_pm, build_mult_row, completing_b, Sign};
use crate::matcore::{dagger, op_norm, rand_cmat_with_norm, stream_key, CMat, RngStream};
use crate::opspace::{LevelElement, SpaceRep};
use crate::scalar::C;
use crate::witness::{GridShape, SearchConfig};

use super::unitary::check_coisometry;
use super::{search_report, Aux, CheckReport, CheckRequest, CriterionId, SubCheck, Verdict, Witness, C64};

const RANDOM_PAIRS: usize = 8;
const RANDOM_MULTIPLIER_POINTS: usize = 2;
const ZERO_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierSide {
    Left,
    Right,
    Quasi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CstarOptions {
    /// Sampled `(x, y)` pairs.
    pub pairs: usize,
    /// Sampled norm-one `w ∈ M_{2m}(A)` per pair, level and sign.
    pub w_samples: usize,
    /// Added to the constructed `z`; used to confirm the test is sensitive.
    pub z_shift: Option<CMat<f64>>,
}

impl Default for CstarOptions {
    fn default() -> Self {
        Self { pairs: 20, w_samples: 16, z_shift: None }
    }
}

fn require_square_embedded(space: &SpaceRep<f64>) -> Result<usize> {
    if !space.is_embedded() {
        return Err(Error::UnsupportedLevel(1));
    }
    if space.p() != space.q() {
        return Err(Error::Shape(format!("products need a square ambient, got {}x{}", space.p(), space.q())));
    }
    Ok(space.p())
}

fn normalized_basis(space: &SpaceRep<f64>) -> Result<Vec<CMat<f64>>> {
    space.basis().iter().map(|b| Ok(b.scale_real(1.0 / op_norm(b)?))).collect()
}

fn random_unit_element(space: &SpaceRep<f64>, rng: &mut RngStream) -> Result<CMat<f64>> {
    let x = space.realize(&LevelElement::random(1, 1, space.dim(), rng));
    Ok(x.scale_real(1.0 / op_norm(&x)?))
}

/// `|‖[0 y 1 0 ; 2 x z b]‖ − ‖[2 x z b]‖|`.
pub fn mult_row_defect(x: &CMat<f64>, y: &CMat<f64>, z: &CMat<f64>, b: &CMat<f64>) -> Result<f64> {
    let (tall, row) = build_mult_row(x, y, z, b)?;
    Ok((op_norm(&tall)? - op_norm(&row)?).abs())
}

/// One `(x, y)` slot pair with the product `x·y*` it encodes.
struct SlotPair {
    x: CMat<f64>,
    y: CMat<f64>,
    label: String,
}

struct PairOutcome {
    residual: f64,
    metric: f64,
    z: CMat<f64>,
    b: CMat<f64>,
}

/// Algebraic residual of `x·y*` and the worst metric defect over the proof's
/// `b` and `b_samples` random contractions, with `z = P_A(−x·y*)`.
fn evaluate_pair(
    space: &SpaceRep<f64>,
    pair: &SlotPair,
    cfg: &SearchConfig,
    rng: &mut RngStream,
) -> Result<PairOutcome> {
    let product = &pair.x * &dagger(&pair.y);
    let residual = space.membership_residual(&product)?;
    let z = space.project(&(-&product))?;
    let proof_b = completing_b(&[&pair.x, &z])?;
    let mut best = (mult_row_defect(&pair.x, &pair.y, &z, &proof_b)?, proof_b);
    let d = space.p();
    for _ in 0..cfg.b_samples {
        let b = rand_cmat_with_norm::<f64>(d, d, rng.uniform(), rng);
        let v = mult_row_defect(&pair.x, &pair.y, &z, &b)?;
        if v > best.0 {
            best = (v, b);
        }
    }
    Ok(PairOutcome { residual, metric: best.0, z, b: best.1 })
}

fn pair_witness(pair: &SlotPair, out: &PairOutcome, mode: &str) -> Witness {
    Witness { level: 1, ..Witness::default() }
        .with_aux("x", Aux::matrix(&pair.x))
        .with_aux("y", Aux::matrix(&pair.y))
        .with_aux("z", Aux::matrix(&out.z))
        .with_aux("b", Aux::matrix(&out.b))
        .with_aux("pair", Aux::Text(pair.label.clone()))
        .with_aux("mode", Aux::Text(mode.into()))
        .with_aux("residual", Aux::Real(out.residual))
}

/// Runs both paths over `pairs`. With `metric_decides` the verdict uses the
/// larger of the two violations, otherwise only the residual.
fn product_report(
    criterion: CriterionId,
    space: &SpaceRep<f64>,
    pairs: &[SlotPair],
    metric_decides: bool,
    cfg: &SearchConfig,
) -> Result<CheckReport> {
    let mut rng = RngStream::new(stream_key(&[cfg.seed, criterion.tag()]), 0);
    let mode = if metric_decides { "residual+metric" } else { "residual" };
    let (mut alg, mut met) = (0.0f64, 0.0f64);
    let mut best: Option<(f64, Witness)> = None;
    for pair in pairs {
        let out = evaluate_pair(space, pair, cfg, &mut rng)?;
        alg = alg.max(out.residual);
        met = met.max(out.metric);
        let v = if metric_decides { out.residual.max(out.metric) } else { out.residual };
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, pair_witness(pair, &out, mode)));
        }
    }
    let mut report = CheckReport::new(criterion, cfg);
    report.levels_checked = vec![1];
    let samples = (pairs.len() * (cfg.b_samples + 2)) as u64;
    let tol = cfg.tolerance;
    let alg_verdict = Verdict::from_violation(alg, pairs.len(), tol);
    let met_verdict = Verdict::from_violation(met, pairs.len(), tol);
    report.sub_checks = vec![
        SubCheck { name: "algebraic".into(), verdict: alg_verdict, margin: -alg },
        SubCheck { name: "metric".into(), verdict: met_verdict, margin: -met },
    ];
    if alg_verdict == met_verdict {
        report.notes.push("algebraic and metric paths agree".into());
    } else {
        log::error!("{criterion}: algebraic path says {alg_verdict}, metric path says {met_verdict}");
        report.notes.push(format!("PATHS DISAGREE: algebraic {alg_verdict}, metric {met_verdict}"));
    }
    let violation = best.as_ref().map_or(0.0, |(v, _)| *v);
    report.conclude(violation, if pairs.is_empty() { 0 } else { samples });
    if report.verdict == Verdict::Violated {
        report.witness = best.map(|(_, w)| w);
    }
    Ok(report)
}

pub(super) fn reevaluate_product(space: &SpaceRep<f64>, w: &Witness) -> Result<f64> {
    let (x, y) = (w.matrix("x")?, w.matrix("y")?);
    let residual = space.membership_residual(&(&x * &dagger(&y)))?;
    if w.text("mode")? == "residual" {
        return Ok(residual);
    }
    Ok(residual.max(mult_row_defect(&x, &y, &w.matrix("z")?, &w.matrix("b")?)?))
}

/// Decides `A·A ⊆ A` by the residuals of basis products and cross-checks
/// with the block-row norm equality on basis pairs plus random pairs.
pub fn check_mult_closed(space: &SpaceRep<f64>, cfg: &SearchConfig) -> Result<CheckReport> {
    require_square_embedded(space)?;
    let basis = normalized_basis(space)?;
    let mut pairs = Vec::new();
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            pairs.push(SlotPair { x: bi.clone(), y: dagger(bj), label: format!("basis ({i}, {j})") });
        }
    }
    let mut rng = RngStream::new(stream_key(&[cfg.seed, CriterionId::MultClosed.tag()]), 1);
    for r in 0..RANDOM_PAIRS {
        let x = random_unit_element(space, &mut rng)?;
        let y = dagger(&random_unit_element(space, &mut rng)?);
        pairs.push(SlotPair { x, y, label: format!("random {r}") });
    }
    product_report(CriterionId::MultClosed, space, &pairs, true, cfg)
}

/// Decides `wA ⊆ A`, `Aw ⊆ A` or `AwA ⊆ A` on basis elements; the metric
/// path is reported for cross-validation only.
pub fn check_multiplier(
    space: &SpaceRep<f64>,
    w: &CMat<f64>,
    side: MultiplierSide,
    cfg: &SearchConfig,
) -> Result<CheckReport> {
    let d = require_square_embedded(space)?;
    if w.shape() != (d, d) {
        return Err(Error::Shape(format!("multiplier must be {d}x{d}, got {:?}", w.shape())));
    }
    let basis = normalized_basis(space)?;
    let wn = op_norm(w)?;
    let mut pairs = Vec::new();
    let criterion = match side {
        MultiplierSide::Left => {
            for (j, bj) in basis.iter().enumerate() {
                pairs.push(SlotPair { x: w.clone(), y: dagger(bj), label: format!("w·B{j}") });
            }
            CriterionId::MultiplierLeft
        }
        MultiplierSide::Right => {
            let y = if wn > ZERO_SCALE { dagger(w).scale_real(1.0 / wn) } else { CMat::zeros(d, d) };
            for (i, bi) in basis.iter().enumerate() {
                pairs.push(SlotPair { x: bi.clone(), y: y.clone(), label: format!("B{i}·w") });
            }
            CriterionId::MultiplierRight
        }
        MultiplierSide::Quasi => {
            for (i, bi) in basis.iter().enumerate() {
                for (j, bj) in basis.iter().enumerate() {
                    pairs.push(SlotPair { x: bi * w, y: dagger(bj), label: format!("B{i}·w·B{j}") });
                }
            }
            CriterionId::MultiplierQuasi
        }
    };
    product_report(criterion, space, &pairs, false, cfg)
}

fn check_map_shape(space: &SpaceRep<f64>, t: &DMatrix<C64>) -> Result<()> {
    let k = space.dim();
    if t.shape() != (k, k) {
        return Err(Error::Shape(format!("map must be {k}x{k} on coefficients, got {:?}", t.shape())));
    }
    Ok(())
}

/// `‖[T(a); b]‖ − ‖[a; b]‖` for a `2n × n` grid holding `a` over `b`.
pub fn left_multiplier_violation(space: &SpaceRep<f64>, t: &DMatrix<C64>, g: &LevelElement<f64>) -> Result<f64> {
    check_map_shape(space, t)?;
    Ok(stacked_image_norm(space, t, g)? - space.norm(g)?)
}

fn stacked_image_norm(space: &SpaceRep<f64>, t: &DMatrix<C64>, g: &LevelElement<f64>) -> Result<f64> {
    if g.rows() != 2 * g.cols() {
        return Err(Error::Shape(format!("expected a 2n x n grid, got {}x{}", g.rows(), g.cols())));
    }
    let n = g.cols();
    let a = g.sub_grid(0, 0, n, n).map_cells(t);
    let b = g.sub_grid(n, 0, n, n);
    space.norm(&a.vstack(&b))
}

/// Searches `2n × n` grids `[a; b]` for `‖[T(a); b]‖ > ‖[a; b]‖`.
pub fn check_left_multiplier_map(space: &SpaceRep<f64>, t: &DMatrix<C64>, cfg: &SearchConfig) -> Result<CheckReport> {
    if !space.is_embedded() {
        return Ok(CheckReport::unsupported(
            CriterionId::LeftMultiplierMap,
            cfg,
            "the norm of this space is only available at level 1",
        ));
    }
    check_map_shape(space, t)?;
    Ok(map_search(space, t, cfg, CriterionId::LeftMultiplierMap))
}

fn map_search(space: &SpaceRep<f64>, t: &DMatrix<C64>, cfg: &SearchConfig, criterion: CriterionId) -> CheckReport {
    let objective = |g: &LevelElement<f64>, n: f64| stacked_image_norm(space, t, g).map_or(f64::NAN, |v| v - n);
    let levels: Vec<usize> = (1..=cfg.max_level).collect();
    search_report(criterion, space, cfg, &levels, |n| GridShape { rows: 2 * n, cols: n }, &[1.0], &objective)
}

/// `tensor[i][j] = coeffs(B_i B_j)` for the ambient product, which must
/// keep the span.
pub fn multiplication_tensor(space: &SpaceRep<f64>) -> Result<Vec<Vec<Vec<C64>>>> {
    require_square_embedded(space)?;
    let b = space.basis();
    b.iter()
        .map(|bi| {
            b.iter()
                .map(|bj| {
                    let p = bi * bj;
                    let r = space.membership_residual(&p)?;
                    if r > 1e-9 * op_norm(&p)?.max(1.0) {
                        return Err(Error::InvalidInput(format!("ambient product leaves the span (residual {r:e})")));
                    }
                    space.coefficients_of(&p)
                })
                .collect()
        })
        .collect()
}

/// Tensor of `(x, y) ↦ s·f(x, y)` for the ambient product `f`, a convenience
/// for scaled or perturbed products.
pub fn algebra_product_tensor(space: &SpaceRep<f64>, scale: C64) -> Result<Vec<Vec<Vec<C64>>>> {
    let m = multiplication_tensor(space)?;
    Ok(m.into_iter().map(|r| r.into_iter().map(|c| c.into_iter().map(|z| z * scale).collect()).collect()).collect())
}

fn check_tensor(space: &SpaceRep<f64>, m: &[Vec<Vec<C64>>]) -> Result<()> {
    let k = space.dim();
    if m.len() != k || m.iter().any(|r| r.len() != k || r.iter().any(|c| c.len() != k)) {
        return Err(Error::Shape(format!("structure tensor must be {k}x{k}x{k}")));
    }
    Ok(())
}

/// Coefficient matrix of `y ↦ m(x, y)`.
fn left_map(m: &[Vec<Vec<C64>>], x: &[C64]) -> DMatrix<C64> {
    let k = x.len();
    DMatrix::from_fn(k, k, |c, j| (0..k).map(|a| x[a] * m[a][j][c]).sum())
}

fn apply(t: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    (t * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Coefficient vectors of the contractive points at which `m(x, ·)` is
/// tested: normalized basis elements, then random unit elements.
fn multiplier_points(space: &SpaceRep<f64>, cfg: &SearchConfig) -> Result<Vec<Vec<C64>>> {
    let k = space.dim();
    let mut pts = Vec::new();
    for (i, b) in space.basis().iter().enumerate() {
        let mut v = vec![C::new(0.0, 0.0); k];
        v[i] = C::new(1.0 / op_norm(b)?, 0.0);
        pts.push(v);
    }
    let mut rng = RngStream::new(stream_key(&[cfg.seed, CriterionId::AlgebraProduct.tag()]), 0);
    for _ in 0..RANDOM_MULTIPLIER_POINTS {
        let x = LevelElement::random(1, 1, k, &mut rng);
        let n = space.norm(&x)?;
        pts.push(x.coeffs().iter().map(|z| z / n).collect());
    }
    Ok(pts)
}

/// Scaled left map `m(x, ·)/‖m(x, u)‖`, or `None` when `m(x, u) = 0`.
fn scaled_left_map(space: &SpaceRep<f64>, m: &[Vec<Vec<C64>>], u: &[C64], x: &[C64]) -> Result<Option<DMatrix<C64>>> {
    let t = left_map(m, x);
    let s = space.element_norm(&apply(&t, u))?;
    Ok((s > ZERO_SCALE).then(|| t / C::new(s, 0.0)))
}

fn right_unit_residual(space: &SpaceRep<f64>, m: &[Vec<Vec<C64>>], u: &[C64], i: usize) -> Result<f64> {
    let k = space.dim();
    let bn = op_norm(&space.basis()[i])?;
    let mut e = vec![C::new(0.0, 0.0); k];
    e[i] = C::new(1.0 / bn, 0.0);
    let image = apply(&left_map(m, &e), u);
    let diff: Vec<C64> = image.iter().zip(&e).map(|(a, b)| a - b).collect();
    space.element_norm(&diff)
}

/// Checks that `u` is a coisometry, that `m(x, ·)` is a left multiplier for
/// sampled contractive `x` (normalized by `‖m(x, u)‖`, the multiplier norm
/// when `u` is a coisometry), and that `m(x, u) = x` on the basis.
pub fn check_algebra_product(
    space: &SpaceRep<f64>,
    u: &[C64],
    m: &[Vec<Vec<C64>>],
    cfg: &SearchConfig,
) -> Result<CheckReport> {
    if !space.is_embedded() {
        return Ok(CheckReport::unsupported(
            CriterionId::AlgebraProduct,
            cfg,
            "the norm of this space is only available at level 1",
        ));
    }
    check_tensor(space, m)?;
    let mut report = CheckReport::new(CriterionId::AlgebraProduct, cfg);
    let mut candidates: Vec<(f64, Witness)> = Vec::new();

    let cois = check_coisometry(space, u, cfg)?;
    report.sub_checks.push(SubCheck { name: "coisometry".into(), verdict: cois.verdict, margin: cois.margin });
    let mut samples = cois.samples;
    if let Some(w) = cois.witness {
        candidates.push((-cois.margin, w.with_aux("sub_check", Aux::Text("coisometry".into()))));
    }

    let sub_cfg = SearchConfig { restarts: (cfg.restarts / 4).max(4).min(cfg.restarts), ..cfg.clone() };
    let (mut worst, mut verdict, mut evaluated) = (f64::NEG_INFINITY, Verdict::HoldsWithinBudget, 0usize);
    for (idx, x) in multiplier_points(space, cfg)?.iter().enumerate() {
        let sub_cfg = SearchConfig { seed: stream_key(&[cfg.seed, idx as u64]), ..sub_cfg.clone() };
        let Some(t) = scaled_left_map(space, m, u, x)? else {
            if left_map(m, x).iter().any(|z| z.norm() > ZERO_SCALE) {
                report.notes.push(format!("m(x, u) = 0 but m(x, ·) ≠ 0 at point {idx}"));
                worst = worst.max(1.0);
                verdict = Verdict::Violated;
            }
            continue;
        };
        let r = map_search(space, &t, &sub_cfg, CriterionId::AlgebraProduct);
        samples += r.samples;
        if r.samples > 0 {
            evaluated += 1;
        }
        worst = worst.max(-r.margin);
        verdict = verdict.and(r.verdict);
        if let Some(w) = r.witness {
            let w = w.with_aux("sub_check", Aux::Text("left-multiplier".into())).with_aux("x", Aux::vector(x));
            candidates.push((-r.margin, w));
        }
    }
    if evaluated == 0 && verdict != Verdict::Violated {
        verdict = Verdict::Inconclusive;
    }
    report.sub_checks.push(SubCheck {
        name: "left-multiplier".into(),
        verdict,
        margin: if worst.is_finite() { -worst } else { 0.0 },
    });

    let mut unit_worst = (0.0f64, 0usize);
    for i in 0..space.dim() {
        let r = right_unit_residual(space, m, u, i)?;
        if r > unit_worst.0 {
            unit_worst = (r, i);
        }
    }
    let unit_verdict = Verdict::from_violation(unit_worst.0, space.dim(), cfg.tolerance);
    report.sub_checks.push(SubCheck { name: "right-unit".into(), verdict: unit_verdict, margin: -unit_worst.0 });
    samples += space.dim() as u64;
    if unit_verdict == Verdict::Violated {
        let w = Witness { level: 1, ..Witness::default() }
            .with_aux("sub_check", Aux::Text("right-unit".into()))
            .with_aux("basis_index", Aux::Int(unit_worst.1 as i64));
        candidates.push((unit_worst.0, w));
    }

    let verdict = report.sub_checks.iter().fold(Verdict::HoldsWithinBudget, |v, s| v.and(s.verdict));
    let margin = report.sub_checks.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    report.levels_checked = (1..=cfg.max_level).collect();
    report.samples = samples;
    report.verdict = verdict;
    report.margin = margin;
    for s in report.sub_checks.iter().filter(|s| s.verdict == Verdict::Violated) {
        report.notes.push(format!("sub-check {} failed", s.name));
    }
    if verdict == Verdict::Violated {
        report.witness = candidates
            .into_iter()
            .fold(None, |acc: Option<(f64, Witness)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            })
            .map(|(_, w)| w);
    }
    Ok(report)
}

pub(super) fn reevaluate_algebra_product(
    space: &SpaceRep<f64>,
    u: &[C64],
    req: &CheckRequest,
    w: &Witness,
) -> Result<f64> {
    let m = match &req.tensor {
        Some(m) => m.clone(),
        None => multiplication_tensor(space)?,
    };
    match w.text("sub_check")? {
        "coisometry" => super::row_deviation(space, u, &w.element()?),
        "left-multiplier" => {
            let x: Vec<C64> = match w.aux.get("x") {
                Some(Aux::Vector(v)) => v.iter().map(|z| C::new(z[0], z[1])).collect(),
                _ => return Err(Error::InvalidInput("witness has no usable `x` entry".into())),
            };
            let t = scaled_left_map(space, &m, u, &x)?.ok_or_else(|| Error::Numerical("m(x, u) = 0".into()))?;
            left_multiplier_violation(space, &t, &w.element()?)
        }
        "right-unit" => right_unit_residual(space, &m, u, w.real("basis_index")? as usize),
        other => Err(Error::InvalidInput(format!("unknown sub-check `{other}`"))),
    }
}

/// Realization of `M ⊗ I_m` for a block matrix `M` with `d × d` blocks,
/// laid out so that grid row `i·m + r` holds block row `i`.
fn amplify_blocks(mat: &CMat<f64>, d: usize, m: usize) -> CMat<f64> {
    let (br, bc) = (mat.rows() / d, mat.cols() / d);
    let mut out = CMat::zeros(mat.rows() * m, mat.cols() * m);
    for i in 0..br {
        for j in 0..bc {
            let blk = mat.sub(i * d, j * d, d, d);
            for r in 0..m {
                out.paste((i * m + r) * d, (j * m + r) * d, &blk);
            }
        }
    }
    out
}

fn sign_of(w: &Witness) -> Result<Sign> {
    match w.text("sign")? {
        "plus" => Ok(Sign::Plus),
        "minus" => Ok(Sign::Minus),
        other => Err(Error::InvalidInput(format!("unknown sign `{other}`"))),
    }
}

fn m_pm_row_deviation(space: &SpaceRep<f64>, parts: [&CMat<f64>; 4], sign: Sign, w: &LevelElement<f64>) -> Result<f64> {
    let [x, y, z, b] = parts;
    let m = w.rows() / 2;
    let mp = build_m_pm(x, y, z, b, sign)?;
    let amp = amplify_blocks(&mp, space.p(), m);
    let row = crate::matcore::block(&[vec![amp, space.realize(w)]])?;
    Ok((op_norm(&row)? - 2f64.sqrt()).abs())
}

/// `|‖[M± ⊗ I_m, w]‖ − √2|` at a stored witness.
pub fn cstar_deviation(space: &SpaceRep<f64>, w: &Witness) -> Result<f64> {
    let (x, y, z, b) = (w.matrix("x")?, w.matrix("y")?, w.matrix("z")?, w.matrix("b")?);
    m_pm_row_deviation(space, [&x, &y, &z, &b], sign_of(w)?, &w.element()?)
}

/// For sampled `(x, y)` builds `z = P_A(−x·y*)` and the completing `b`,
/// then checks `‖[M± ⊗ I_m, w]‖ = √2` for sampled norm-one `w ∈ M_{2m}(A)`.
pub fn check_cstar_among_systems(
    space: &SpaceRep<f64>,
    opts: &CstarOptions,
    cfg: &SearchConfig,
) -> Result<CheckReport> {
    let d = require_square_embedded(space)?;
    if space.involution().is_none() {
        return Err(Error::MissingInvolution);
    }
    let unit = space.unit().ok_or(Error::MissingUnit)?;
    let one = space.combine(unit);
    if one.max_abs_diff(&CMat::identity(d)) > 1e-10 {
        return Err(Error::InvalidInput("this check needs a unit realized as the identity matrix".into()));
    }
    if let Some(s) = &opts.z_shift {
        if s.shape() != (d, d) {
            return Err(Error::Shape(format!("z shift must be {d}x{d}")));
        }
    }
    let mut rng = RngStream::new(stream_key(&[cfg.seed, CriterionId::CstarAmongSystems.tag()]), 0);
    let mut worst: Option<(f64, Witness)> = None;
    let mut samples = 0u64;
    for _ in 0..opts.pairs {
        let x = random_unit_element(space, &mut rng)?.scale_real(rng.uniform());
        let y = random_unit_element(space, &mut rng)?.scale_real(rng.uniform());
        let mut z = space.project(&(-&(&x * &dagger(&y))))?;
        if let Some(s) = &opts.z_shift {
            z = &z + s;
        }
        let b = space.project(&completing_b(&[&x, &y, &z])?)?;
        let (xs, ys, zs, bs) = (x, y, z, b);
        for m in 1..=cfg.max_level {
            for _ in 0..opts.w_samples {
                let w = LevelElement::random(2 * m, 2 * m, space.dim(), &mut rng);
                let w = w.scale_real(1.0 / space.norm(&w)?);
                for sign in [Sign::Plus, Sign::Minus] {
                    let v = m_pm_row_deviation(space, [&xs, &ys, &zs, &bs], sign, &w)?;
                    samples += 1;
                    if worst.as_ref().is_none_or(|(bv, _)| v > *bv) {
                        let wit = Witness::from_element(&w)
                            .with_aux("x", Aux::matrix(&xs))
                            .with_aux("y", Aux::matrix(&ys))
                            .with_aux("z", Aux::matrix(&zs))
                            .with_aux("b", Aux::matrix(&bs))
                            .with_aux("m", Aux::Int(m as i64))
                            .with_aux("sign", Aux::Text(if sign == Sign::Plus { "plus" } else { "minus" }.into()));
                        worst = Some((v, wit));
                    }
                }
            }
        }
    }
    let mut report = CheckReport::new(CriterionId::CstarAmongSystems, cfg);
    report.levels_checked = (1..=cfg.max_level).collect();
    let v = worst.as_ref().map_or(0.0, |(v, _)| *v);
    report.conclude(v, samples);
    if report.verdict == Verdict::Violated {
        report.witness = worst.map(|(_, w)| w);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;
    use approx::assert_abs_diff_eq;

    fn span_e12_e21() -> SpaceRep<f64> {
        SpaceRep::new(2, 2, vec![CMat::unit(2, 2, 0, 1), CMat::unit(2, 2, 1, 0)]).unwrap()
    }

    fn quick() -> SearchConfig {
        SearchConfig { restarts: 8, ascent_steps: 60, ..SearchConfig::default() }
    }

    #[test]
    fn mult_closed_examples() {
        let cfg = quick();
        for space in [SpaceRep::<f64>::upper_triangular(2).unwrap(), SpaceRep::full_matrix(2).unwrap()] {
            let r = check_mult_closed(&space, &cfg).unwrap();
            assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
            assert!(r.sub_checks.iter().all(|s| s.verdict == Verdict::HoldsWithinBudget));
        }
        let space = span_e12_e21();
        let r = check_mult_closed(&space, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.sub_checks.iter().all(|s| s.verdict == Verdict::Violated));
        let w = r.witness.as_ref().unwrap();
        assert_abs_diff_eq!(w.real("residual").unwrap(), 1.0, epsilon = 1e-9);
        assert_eq!(w.matrix("x").unwrap(), CMat::unit(2, 2, 0, 1));
        assert_eq!(w.matrix("y").unwrap(), CMat::unit(2, 2, 0, 1));
        assert_abs_diff_eq!(reevaluate_product(&space, w).unwrap(), -r.margin, epsilon = 1e-12);
    }

    #[test]
    fn multiplier_examples() {
        let cfg = quick();
        let ut = SpaceRep::<f64>::upper_triangular(2).unwrap();
        let r = check_multiplier(&ut, &CMat::unit(2, 2, 0, 0), MultiplierSide::Left, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
        let r = check_multiplier(&span_e12_e21(), &CMat::identity(2), MultiplierSide::Quasi, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.notes.iter().any(|n| n.contains("agree")));
        for side in [MultiplierSide::Left, MultiplierSide::Right, MultiplierSide::Quasi] {
            let r = check_multiplier(&span_e12_e21(), &CMat::zeros(2, 2), side, &cfg).unwrap();
            assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
        }
    }

    #[test]
    fn left_multiplier_maps() {
        let cfg = quick();
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let id = DMatrix::<C64>::identity(4, 4);
        assert_eq!(check_left_multiplier_map(&space, &id, &cfg).unwrap().verdict, Verdict::HoldsWithinBudget);
        let m = multiplication_tensor(&space).unwrap();
        let e11 = left_map(&m, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(check_left_multiplier_map(&space, &e11, &cfg).unwrap().verdict, Verdict::HoldsWithinBudget);
        let two = id * C::new(2.0, 0.0);
        let r = check_left_multiplier_map(&space, &two, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        // a = b: ‖[2a; a]‖ − ‖[a; a]‖ = (√5 − √2)‖a‖
        let a = LevelElement::scalar(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let g = a.vstack(&a);
        assert_abs_diff_eq!(
            left_multiplier_violation(&space, &two, &g).unwrap(),
            5f64.sqrt() - 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn algebra_product_examples() {
        let cfg = quick();
        let ut = SpaceRep::<f64>::upper_triangular(2).unwrap();
        let u = ut.unit().unwrap().to_vec();
        let m = multiplication_tensor(&ut).unwrap();
        let r = check_algebra_product(&ut, &u, &m, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget, "{:?}", r.sub_checks);

        let m2 = algebra_product_tensor(&ut, c(2.0, 0.0)).unwrap();
        let r = check_algebra_product(&ut, &u, &m2, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let unit_sub = r.sub_checks.iter().find(|s| s.name == "right-unit").unwrap();
        assert_eq!(unit_sub.verdict, Verdict::Violated);
        assert_abs_diff_eq!(unit_sub.margin, -1.0, epsilon = 1e-12);
        assert!(r.notes.iter().any(|n| n.contains("right-unit")));

        let diag = SpaceRep::<f64>::diagonal(2).unwrap().with_unit(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let m = multiplication_tensor(&diag).unwrap();
        let r = check_algebra_product(&diag, diag.unit().unwrap(), &m, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget, "{:?}", r.sub_checks);

        assert!(matches!(multiplication_tensor(&span_e12_e21()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cstar_examples() {
        let cfg = SearchConfig::default();
        let space = SpaceRep::<f64>::full_matrix(2).unwrap();
        let opts = CstarOptions { pairs: 4, w_samples: 4, z_shift: None };
        let r = check_cstar_among_systems(&space, &opts, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsWithinBudget);
        assert!(r.margin >= -1e-6);

        let shifted = CstarOptions { z_shift: Some(CMat::identity(2).scale_real(0.3)), ..opts };
        let r = check_cstar_among_systems(&space, &shifted, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let w = r.witness.as_ref().unwrap();
        assert_abs_diff_eq!(cstar_deviation(&space, w).unwrap(), -r.margin, epsilon = 1e-12);

        // x = y = 0: M+ has orthonormal rows, appending a norm-one w gives √2
        let z = CMat::zeros(2, 2);
        let mut rng = RngStream::new(5, 5);
        let w = LevelElement::random(2, 2, 4, &mut rng);
        let w = w.scale_real(1.0 / space.norm(&w).unwrap());
        let dev = m_pm_row_deviation(&space, [&z, &z, &z, &z], Sign::Plus, &w).unwrap();
        assert!(dev < 1e-12);
    }

    #[test]
    fn amplification_layout() {
        let mut rng = RngStream::new(1, 2);
        let blk = crate::matcore::rand_cmat::<f64>(2, 4, &mut rng);
        let amp = amplify_blocks(&blk, 1, 2);
        assert_eq!(amp.shape(), (4, 8));
        assert_eq!(amp.get(1, 1), blk.get(0, 0));
        assert_eq!(amp.get(2, 6), blk.get(1, 3));
        assert_eq!(amp.get(0, 1), c(0.0, 0.0));
        assert_abs_diff_eq!(op_norm(&amp).unwrap(), op_norm(&blk).unwrap(), epsilon = 1e-12);
    }
}
