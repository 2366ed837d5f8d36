//! Structured block matrices whose norms encode the metric characterizations.
//!
//! Every constructor returns the realized ambient matrix, except
//! [`build_four_rotation`], which returns an element of `M_n(X)` so that
//! level-1 oracle spaces can evaluate it.

use std::fmt;

use crate::error::{Error, Result};
use crate::matcore::{block, hermitian_sqrt, op_norm, scalar_amplify, CMat};
use crate::opspace::{LevelElement, SpaceRep};
use crate::scalar::{i_pow, Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GadgetKind {
    TGadget,
    SGadget,
    RGadget,
    Row,
    Column,
    FourRotation,
    UeSpace,
    MPlus,
    MMinus,
    MultRow,
    AdjointBlock,
}

impl GadgetKind {
    pub const ALL: [GadgetKind; 11] = [
        GadgetKind::TGadget,
        GadgetKind::SGadget,
        GadgetKind::RGadget,
        GadgetKind::Row,
        GadgetKind::Column,
        GadgetKind::FourRotation,
        GadgetKind::UeSpace,
        GadgetKind::MPlus,
        GadgetKind::MMinus,
        GadgetKind::MultRow,
        GadgetKind::AdjointBlock,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            GadgetKind::TGadget => "T_GADGET",
            GadgetKind::SGadget => "S_GADGET",
            GadgetKind::RGadget => "R_GADGET",
            GadgetKind::Row => "ROW",
            GadgetKind::Column => "COLUMN",
            GadgetKind::FourRotation => "FOUR_ROTATION",
            GadgetKind::UeSpace => "UE_SPACE",
            GadgetKind::MPlus => "M_PLUS",
            GadgetKind::MMinus => "M_MINUS",
            GadgetKind::MultRow => "MULT_ROW",
            GadgetKind::AdjointBlock => "ADJOINT_BLOCK",
        }
    }
}

impl fmt::Display for GadgetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Sign of the second row's last three entries in `M±`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

fn require_embedded<T: Real>(space: &SpaceRep<T>) -> Result<()> {
    if space.is_embedded() {
        Ok(())
    } else {
        Err(Error::UnsupportedLevel(2))
    }
}

fn require_square<T: Real>(x: &LevelElement<T>) -> Result<usize> {
    if x.is_square() {
        Ok(x.rows())
    } else {
        Err(Error::Shape(format!("expected a square grid, got {}x{}", x.rows(), x.cols())))
    }
}

fn check_coeffs<T: Real>(space: &SpaceRep<T>, v: &[C<T>]) -> Result<()> {
    if v.len() == space.dim() {
        Ok(())
    } else {
        Err(Error::Shape(format!("{} coefficients for a {}-dimensional space", v.len(), space.dim())))
    }
}

/// Realization of `v_n = v ⊗ I_n`.
pub fn amplified<T: Real>(space: &SpaceRep<T>, v: &[C<T>], n: usize) -> CMat<T> {
    scalar_amplify(&space.combine(v), n)
}

/// `t^v_x = [[v_n, x], [0, v_n]]`.
pub fn build_t<T: Real>(space: &SpaceRep<T>, v: &[C<T>], x: &LevelElement<T>) -> Result<CMat<T>> {
    Ok(space.realize(&t_element(space, v, x)?))
}

/// `t^v_x` as an element of `M_{2n}(X)`.
pub fn t_element<T: Real>(space: &SpaceRep<T>, v: &[C<T>], x: &LevelElement<T>) -> Result<LevelElement<T>> {
    require_embedded(space)?;
    check_coeffs(space, v)?;
    let n = require_square(x)?;
    let mut t = LevelElement::zeros(2 * n, 2 * n, space.dim());
    for i in 0..n {
        t.cell_mut(i, i).copy_from_slice(v);
        t.cell_mut(n + i, n + i).copy_from_slice(v);
        for j in 0..n {
            t.cell_mut(i, n + j).copy_from_slice(x.cell(i, j));
        }
    }
    Ok(t)
}

fn build_sr<T: Real>(space: &SpaceRep<T>, v: &[C<T>], x: &LevelElement<T>, sign: T) -> Result<CMat<T>> {
    require_embedded(space)?;
    check_coeffs(space, v)?;
    let n = require_square(x)?;
    let xs = space.realize(&space.apply_involution(x)?).scale_real(sign);
    let vn = amplified(space, v, n);
    block(&[vec![vn.clone(), space.realize(x)], vec![xs, vn]])
}

/// `s^v_x = [[v_n, x], [x*, v_n]]`.
pub fn build_s<T: Real>(space: &SpaceRep<T>, v: &[C<T>], x: &LevelElement<T>) -> Result<CMat<T>> {
    build_sr(space, v, x, T::one())
}

/// `r^v_x = [[v_n, x], [-x*, v_n]]`.
pub fn build_r<T: Real>(space: &SpaceRep<T>, v: &[C<T>], x: &LevelElement<T>) -> Result<CMat<T>> {
    build_sr(space, v, x, -T::one())
}

/// Row `[u_k  x]` for a `k × m` grid `x`.
pub fn build_row<T: Real>(space: &SpaceRep<T>, u: &[C<T>], x: &LevelElement<T>) -> Result<CMat<T>> {
    require_embedded(space)?;
    check_coeffs(space, u)?;
    let uk = amplified(space, u, x.rows());
    block(&[vec![uk, space.realize(x)]])
}

/// Column `[u_k ; x]` for an `m × k` grid `x`.
pub fn build_column<T: Real>(space: &SpaceRep<T>, u: &[C<T>], x: &LevelElement<T>) -> Result<CMat<T>> {
    require_embedded(space)?;
    check_coeffs(space, u)?;
    let uk = amplified(space, u, x.cols());
    block(&[vec![uk], vec![space.realize(x)]])
}

/// `v_n + i^k x` as an element of `M_n(X)`.
pub fn build_four_rotation<T: Real>(
    space: &SpaceRep<T>,
    v: &[C<T>],
    x: &LevelElement<T>,
    k: u32,
) -> Result<LevelElement<T>> {
    check_coeffs(space, v)?;
    let n = require_square(x)?;
    if !space.is_embedded() && n != 1 {
        return Err(Error::UnsupportedLevel(n));
    }
    Ok(LevelElement::diagonal(n, v).add(&x.scale(i_pow(k))))
}

/// `max_k ‖v_n + i^k x‖` over `k = 0..3`.
pub fn four_rotation_max<T: Real>(space: &SpaceRep<T>, v: &[C<T>], x: &LevelElement<T>) -> Result<T> {
    let mut best = T::zero();
    for k in 0..4 {
        best = best.max(space.norm(&build_four_rotation(space, v, x, k)?)?);
    }
    Ok(best)
}

/// The space `𝒰_e(X) = {[[λe, x], [0, λe]]}` inside `M_{2p×2q}` with unit
/// `e ⊗ I_2` (the first basis element).
pub fn build_ue<T: Real>(space: &SpaceRep<T>, e: &[C<T>]) -> Result<SpaceRep<T>> {
    require_embedded(space)?;
    check_coeffs(space, e)?;
    let (p, q) = (space.p(), space.q());
    let em = space.combine(e);
    let zero = CMat::zeros(p, q);
    let mut basis = vec![block(&[vec![em.clone(), zero.clone()], vec![zero.clone(), em]])?];
    for b in space.basis() {
        basis.push(block(&[vec![zero.clone(), b.clone()], vec![zero.clone(), zero.clone()]])?);
    }
    let mut unit = vec![C::new(T::zero(), T::zero()); basis.len()];
    unit[0] = C::new(T::one(), T::zero());
    SpaceRep::new(2 * p, 2 * q, basis)?.with_unit(unit)
}

fn check_same_square<T: Real>(ms: &[&CMat<T>]) -> Result<usize> {
    let d = ms[0].rows();
    if ms.iter().any(|m| m.shape() != (d, d)) {
        return Err(Error::Shape("entries must be square matrices of one size".into()));
    }
    Ok(d)
}

/// Unnormalized `[y 0 1 x b z ; x b z ±y 0 ±1]`.
pub fn m_pm_unnormalized<T: Real>(x: &CMat<T>, y: &CMat<T>, z: &CMat<T>, b: &CMat<T>, sign: Sign) -> Result<CMat<T>> {
    let d = check_same_square(&[x, y, z, b])?;
    let one = CMat::identity(d);
    let zero = CMat::zeros(d, d);
    let s = match sign {
        Sign::Plus => T::one(),
        Sign::Minus => -T::one(),
    };
    block(&[
        vec![y.clone(), zero.clone(), one.clone(), x.clone(), b.clone(), z.clone()],
        vec![x.clone(), b.clone(), z.clone(), y.scale_real(s), zero, one.scale_real(s)],
    ])
}

/// `M±`: the block row above divided by its norm.
pub fn build_m_pm<T: Real>(x: &CMat<T>, y: &CMat<T>, z: &CMat<T>, b: &CMat<T>, sign: Sign) -> Result<CMat<T>> {
    let m = m_pm_unnormalized(x, y, z, b, sign)?;
    let n = op_norm(&m)?;
    if n <= T::zero() {
        return Err(Error::Numerical("M± has zero norm".into()));
    }
    Ok(m.scale_real(T::one() / n))
}

/// `√(‖Σ aa*‖·1 − Σ aa*)` for the given entries: the completing element `b`
/// that turns the `M±` and multiplication rows into scaled coisometries.
pub fn completing_b<T: Real>(entries: &[&CMat<T>]) -> Result<CMat<T>> {
    let d = check_same_square(entries)?;
    let mut g = CMat::zeros(d, d);
    for a in entries {
        g = &g + &(*a * &crate::matcore::dagger(a));
    }
    let n = op_norm(&g)?;
    hermitian_sqrt(&(&CMat::identity(d).scale_real(n) - &g))
}

/// `([0 y 1 0 ; 2·1 x z b], [2·1 x z b])`.
pub fn build_mult_row<T: Real>(x: &CMat<T>, y: &CMat<T>, z: &CMat<T>, b: &CMat<T>) -> Result<(CMat<T>, CMat<T>)> {
    let d = check_same_square(&[x, y, z, b])?;
    let one = CMat::identity(d);
    let two = one.scale_real(T::lit(2.0));
    let zero = CMat::zeros(d, d);
    let tall = block(&[vec![zero.clone(), y.clone(), one, zero], vec![two.clone(), x.clone(), z.clone(), b.clone()]])?;
    let row = block(&[vec![two, x.clone(), z.clone(), b.clone()]])?;
    Ok((tall, row))
}

/// `[[t·1, x], [−z, t·1]]`.
pub fn build_adjoint_block<T: Real>(x: &CMat<T>, z: &CMat<T>, t: T) -> Result<CMat<T>> {
    let d = check_same_square(&[x, z])?;
    let tid = CMat::identity(d).scale_real(t);
    block(&[vec![tid.clone(), x.clone()], vec![-z, tid]])
}
