//! Concrete operator spaces `X ⊆ M_{p×q}(ℂ)` given by a basis, their matrix
//! levels `M_n(X)`, membership tests and the optional involution.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{dagger, op_norm, op_norm_sparse, trace_norm, CMat, RngStream};
use crate::scalar::{cabs, Real, C};

/// Default relative rank tolerance for basis independence.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
const STRUCTURE_TOL: f64 = 1e-10;

/// Norm available on a level-1-only space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level1Oracle {
    TraceNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Norms at every level come from the ambient matrix realization.
    Embedded,
    /// Only the 1×1 level is normed, by the named function.
    Level1(Level1Oracle),
}

/// An `rows × cols` grid of coefficient vectors over a `k`-dimensional space.
///
/// Square grids are elements of `M_n(X)`; rectangular grids appear in the
/// row/column and multiplier tests.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelElement<T: Real> {
    rows: usize,
    cols: usize,
    dim: usize,
    coeffs: Vec<C<T>>,
}

impl<T: Real> LevelElement<T> {
    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        assert!(rows > 0 && cols > 0 && dim > 0, "grid dimensions must be positive");
        Self { rows, cols, dim, coeffs: vec![C::new(T::zero(), T::zero()); rows * cols * dim] }
    }

    /// Level-1 element with the given coefficients.
    pub fn scalar(coeffs: &[C<T>]) -> Self {
        Self { rows: 1, cols: 1, dim: coeffs.len(), coeffs: coeffs.to_vec() }
    }

    /// `v ⊗ I_n`: `v` on the diagonal, zero elsewhere.
    pub fn diagonal(n: usize, v: &[C<T>]) -> Self {
        let mut x = Self::zeros(n, n, v.len());
        for i in 0..n {
            x.cell_mut(i, i).copy_from_slice(v);
        }
        x
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Vec<C<T>>>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::Shape(format!("expected {rows}x{cols} cells, got {}", cells.len())));
        }
        let dim = cells[0].len();
        if dim == 0 || cells.iter().any(|c| c.len() != dim) {
            return Err(Error::Shape("cells must share a positive coefficient length".into()));
        }
        Ok(Self { rows, cols, dim, coeffs: cells.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Matrix level `n`; for rectangular grids this is the column count.
    pub fn level(&self) -> usize {
        self.cols
    }

    pub fn cell(&self, i: usize, j: usize) -> &[C<T>] {
        let at = (i * self.cols + j) * self.dim;
        &self.coeffs[at..at + self.dim]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [C<T>] {
        let at = (i * self.cols + j) * self.dim;
        &mut self.coeffs[at..at + self.dim]
    }

    pub fn coeffs(&self) -> &[C<T>] {
        &self.coeffs
    }

    pub fn cells(&self) -> Vec<Vec<C<T>>> {
        self.coeffs.chunks(self.dim).map(<[C<T>]>::to_vec).collect()
    }

    pub fn scale(&self, s: C<T>) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z *= s);
        out
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(C::new(s, T::zero()))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C<T>, C<T>) -> C<T>) -> Self {
        assert_eq!(
            (self.rows, self.cols, self.dim),
            (other.rows, other.cols, other.dim),
            "level element shape mismatch"
        );
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect();
        Self { coeffs, ..*self }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// Sub-grid of `rows × cols` cells starting at cell `(r, c)`.
    pub fn sub_grid(&self, r: usize, c: usize, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols, self.dim);
        for i in 0..rows {
            for j in 0..cols {
                out.cell_mut(i, j).copy_from_slice(self.cell(r + i, c + j));
            }
        }
        out
    }

    /// Embeds into a larger grid (zero padding on the bottom/right).
    pub fn pad(&self, rows: usize, cols: usize) -> Self {
        assert!(rows >= self.rows && cols >= self.cols, "padding must not shrink the grid");
        let mut out = Self::zeros(rows, cols, self.dim);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.cell_mut(i, j).copy_from_slice(self.cell(i, j));
            }
        }
        out
    }

    /// Stacks `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!((self.cols, self.dim), (other.cols, other.dim), "vstack shape mismatch");
        let mut coeffs = self.coeffs.clone();
        coeffs.extend_from_slice(&other.coeffs);
        Self { rows: self.rows + other.rows, cols: self.cols, dim: self.dim, coeffs }
    }

    /// Applies a coefficient map `c ↦ t·c` to every cell.
    pub fn map_cells(&self, t: &DMatrix<C<T>>) -> Self {
        assert_eq!(t.shape(), (self.dim, self.dim), "coefficient map shape mismatch");
        let mut out = self.clone();
        for cell in out.coeffs.chunks_mut(self.dim) {
            let v = nalgebra::DVector::from_column_slice(cell);
            cell.copy_from_slice((t * v).as_slice());
        }
        out
    }

    /// Real parameter vector `(re, im, re, im, …)`.
    pub fn to_params(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(|z| [z.re.as_f64(), z.im.as_f64()]).collect()
    }

    pub fn from_params(rows: usize, cols: usize, dim: usize, params: &[f64]) -> Self {
        assert_eq!(params.len(), 2 * rows * cols * dim, "parameter length mismatch");
        let coeffs = params.chunks(2).map(|p| C::new(T::lit(p[0]), T::lit(p[1]))).collect();
        Self { rows, cols, dim, coeffs }
    }

    /// Random element with standard complex Gaussian coefficients.
    pub fn random(rows: usize, cols: usize, dim: usize, rng: &mut RngStream) -> Self {
        let coeffs = (0..rows * cols * dim).map(|_| rng.complex_gaussian()).collect();
        Self { rows, cols, dim, coeffs }
    }

    /// Largest coefficient-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.coeffs.iter().zip(&other.coeffs).fold(T::zero(), |m, (a, b)| m.max(cabs(*a - *b)))
    }
}

/// A concrete operator space: a basis of `p × q` matrices plus optional
/// distinguished element and involution.
#[derive(Debug, Clone)]
pub struct SpaceRep<T: Real> {
    p: usize,
    q: usize,
    basis: Vec<CMat<T>>,
    unit: Option<Vec<C<T>>>,
    involution: Option<DMatrix<C<T>>>,
    norm_mode: NormMode,
    /// Orthonormal frame of span(basis) in row-major vectorized form (pq × k)
    /// and the triangular factor expressing the basis in that frame.
    frame: DMatrix<C<T>>,
    tri: DMatrix<C<T>>,
    /// Nonzero entries `(row, col, value)` of each basis element.
    entries: Vec<Vec<(usize, usize, C<T>)>>,
    /// Norms go through the sparse path (few nonzeros per basis element).
    sparse: bool,
}

impl<T: Real> SpaceRep<T> {
    /// Embedded space spanned by `basis`, checked for linear independence at
    /// the default relative tolerance.
    pub fn new(p: usize, q: usize, basis: Vec<CMat<T>>) -> Result<Self> {
        Self::with_rank_tol(p, q, basis, DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(p: usize, q: usize, basis: Vec<CMat<T>>, rank_tol: f64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Shape("ambient dimensions must be positive".into()));
        }
        if basis.is_empty() {
            return Err(Error::InvalidInput("basis must be non-empty".into()));
        }
        for (i, b) in basis.iter().enumerate() {
            if b.shape() != (p, q) {
                return Err(Error::Shape(format!("basis element {i} is {:?}, expected {p}x{q}", b.shape())));
            }
            if !b.is_finite() {
                return Err(Error::InvalidInput(format!("basis element {i} has non-finite entries")));
            }
        }
        let k = basis.len();
        if k > p * q {
            return Err(Error::RankDeficient { ratio: 0.0, tolerance: rank_tol });
        }
        let vecs = DMatrix::from_fn(p * q, k, |r, j| basis[j].get(r / q, r % q));
        let sv = vecs.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let ratio = if smax > T::zero() { (smin / smax).as_f64() } else { 0.0 };
        if ratio.is_nan() || ratio <= rank_tol {
            return Err(Error::RankDeficient { ratio, tolerance: rank_tol });
        }
        let qr = vecs.qr();
        let entries: Vec<Vec<_>> = basis
            .iter()
            .map(|b| {
                (0..p * q)
                    .map(|r| (r / q, r % q, b.get(r / q, r % q)))
                    .filter(|(_, _, z)| z.re != T::zero() || z.im != T::zero())
                    .collect()
            })
            .collect();
        let sparse = 2 * entries.iter().map(Vec::len).sum::<usize>() <= p * q;
        Ok(Self {
            p,
            q,
            basis,
            unit: None,
            involution: None,
            norm_mode: NormMode::Embedded,
            frame: qr.q(),
            tri: qr.r(),
            entries,
            sparse,
        })
    }

    /// Switches to a level-1 oracle norm. The unit (if any) is re-checked.
    pub fn with_level1_oracle(mut self, oracle: Level1Oracle) -> Result<Self> {
        self.norm_mode = NormMode::Level1(oracle);
        if let Some(u) = self.unit.clone() {
            self.check_unit(&u)?;
        }
        Ok(self)
    }

    /// Designates the distinguished element by its coefficients.
    pub fn with_unit(mut self, unit: Vec<C<T>>) -> Result<Self> {
        self.check_unit(&unit)?;
        self.unit = Some(unit);
        Ok(self)
    }

    fn check_unit(&self, unit: &[C<T>]) -> Result<()> {
        if unit.len() != self.dim() {
            return Err(Error::Shape(format!(
                "unit has {} coefficients, space dimension is {}",
                unit.len(),
                self.dim()
            )));
        }
        let n = self.element_norm(unit)?;
        if n > T::one() + T::lit(STRUCTURE_TOL) {
            return Err(Error::UnitTooLarge(n.as_f64()));
        }
        Ok(())
    }

    /// Installs the involution `coeffs(x*) = S · conj(coeffs(x))`.
    pub fn with_involution(mut self, s: DMatrix<C<T>>) -> Result<Self> {
        let k = self.dim();
        if s.shape() != (k, k) {
            return Err(Error::Shape(format!("involution must be {k}x{k}, got {:?}", s.shape())));
        }
        let twice = &s * s.map(|z| z.conj());
        let id = DMatrix::<C<T>>::identity(k, k);
        let dev = twice.iter().zip(id.iter()).fold(T::zero(), |m, (a, b)| m.max(cabs(*a - *b)));
        if dev > T::lit(STRUCTURE_TOL) {
            return Err(Error::NotInvolution(format!("S·conj(S) deviates from I by {:e}", dev.as_f64())));
        }
        if self.norm_mode == NormMode::Embedded {
            if self.p != self.q {
                return Err(Error::NotInvolution("adjoint realization needs a square ambient".into()));
            }
            for i in 0..k {
                let image = self.combine(s.column(i).as_slice());
                let target = dagger(&self.basis[i]);
                let scale = T::one().max(op_norm(&self.basis[i])?);
                let dev = image.max_abs_diff(&target);
                if dev > T::lit(STRUCTURE_TOL) * scale {
                    return Err(Error::NotInvolution(format!(
                        "realization of basis element {i} does not map to its adjoint (deviation {:e})",
                        dev.as_f64()
                    )));
                }
            }
        }
        self.involution = Some(s);
        Ok(self)
    }

    /// Installs the involution induced by the matrix adjoint, failing when
    /// the span is not selfadjoint.
    pub fn with_adjoint_involution(self) -> Result<Self> {
        let k = self.dim();
        let mut s = DMatrix::zeros(k, k);
        for i in 0..k {
            let adj = dagger(&self.basis[i]);
            if adj.shape() != (self.p, self.q) {
                return Err(Error::NotInvolution("adjoint realization needs a square ambient".into()));
            }
            if self.membership_residual(&adj)? > T::lit(STRUCTURE_TOL) {
                return Err(Error::NotInvolution(format!("adjoint of basis element {i} leaves the span")));
            }
            let c = self.coefficients_of(&adj)?;
            for (r, z) in c.into_iter().enumerate() {
                s[(r, i)] = z;
            }
        }
        self.with_involution(s)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Dimension `k` of the space.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMat<T>] {
        &self.basis
    }

    pub fn unit(&self) -> Option<&[C<T>]> {
        self.unit.as_deref()
    }

    pub fn involution(&self) -> Option<&DMatrix<C<T>>> {
        self.involution.as_ref()
    }

    pub fn norm_mode(&self) -> NormMode {
        self.norm_mode
    }

    pub fn is_embedded(&self) -> bool {
        self.norm_mode == NormMode::Embedded
    }

    /// `Σ cᵢ Bᵢ`.
    pub fn combine(&self, coeffs: &[C<T>]) -> CMat<T> {
        assert_eq!(coeffs.len(), self.dim(), "coefficient length mismatch");
        let mut out = CMat::zeros(self.p, self.q);
        self.scatter(&mut out, 0, 0, coeffs);
        out
    }

    /// Adds `Σ cᵢ Bᵢ` into the block of `out` at `(r0, c0)`.
    fn scatter(&self, out: &mut CMat<T>, r0: usize, c0: usize, coeffs: &[C<T>]) {
        for (c, entries) in coeffs.iter().zip(&self.entries) {
            if c.re == T::zero() && c.im == T::zero() {
                continue;
            }
            for &(r, s, z) in entries {
                let cur = out.get(r0 + r, c0 + s);
                out.set(r0 + r, c0 + s, cur + *c * z);
            }
        }
    }

    /// The `p·rows × q·cols` ambient matrix of a grid element.
    pub fn realize(&self, x: &LevelElement<T>) -> CMat<T> {
        assert_eq!(x.dim(), self.dim(), "element belongs to a space of different dimension");
        let mut out = CMat::zeros(self.p * x.rows(), self.q * x.cols());
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                self.scatter(&mut out, i * self.p, j * self.q, x.cell(i, j));
            }
        }
        out
    }

    /// Nonzero contributions `(row, col, value)` of the ambient matrix of `x`,
    /// in the order [`Self::realize`] accumulates them.
    fn triplets(&self, x: &LevelElement<T>) -> Vec<(usize, usize, C<T>)> {
        assert_eq!(x.dim(), self.dim(), "element belongs to a space of different dimension");
        let mut out = Vec::new();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let (r0, c0) = (i * self.p, j * self.q);
                for (c, entries) in x.cell(i, j).iter().zip(&self.entries) {
                    if c.re == T::zero() && c.im == T::zero() {
                        continue;
                    }
                    out.extend(entries.iter().map(|&(r, s, z)| (r0 + r, c0 + s, *c * z)));
                }
            }
        }
        out
    }

    /// Norm of a single element of `X` given by coefficients.
    pub fn element_norm(&self, coeffs: &[C<T>]) -> Result<T> {
        self.norm(&LevelElement::scalar(coeffs))
    }

    /// Matrix norm `‖x‖_n`.
    pub fn norm(&self, x: &LevelElement<T>) -> Result<T> {
        match self.norm_mode {
            NormMode::Embedded if self.sparse => {
                op_norm_sparse(self.p * x.rows(), self.q * x.cols(), &self.triplets(x))
            }
            NormMode::Embedded => op_norm(&self.realize(x)),
            NormMode::Level1(oracle) => {
                if x.rows() != 1 || x.cols() != 1 {
                    return Err(Error::UnsupportedLevel(x.rows().max(x.cols())));
                }
                match oracle {
                    Level1Oracle::TraceNorm => trace_norm(&self.realize(x)),
                }
            }
        }
    }

    fn vectorize(&self, m: &CMat<T>) -> Result<nalgebra::DVector<C<T>>> {
        if m.shape() != (self.p, self.q) {
            return Err(Error::Shape(format!("expected {}x{} matrix, got {:?}", self.p, self.q, m.shape())));
        }
        Ok(nalgebra::DVector::from_vec(m.row_major()))
    }

    /// Frobenius-orthogonal projection of `m` onto the span.
    pub fn project(&self, m: &CMat<T>) -> Result<CMat<T>> {
        let v = self.vectorize(m)?;
        let proj = &self.frame * (self.frame.adjoint() * v);
        CMat::from_row_major(self.p, self.q, proj.as_slice().to_vec())
    }

    /// Least-squares coefficients of the projection of `m` onto the span.
    pub fn coefficients_of(&self, m: &CMat<T>) -> Result<Vec<C<T>>> {
        let v = self.vectorize(m)?;
        let rhs = self.frame.adjoint() * v;
        let c = self
            .tri
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
        Ok(c.as_slice().to_vec())
    }

    /// Operator norm of `m` minus its projection onto the span.
    pub fn membership_residual(&self, m: &CMat<T>) -> Result<T> {
        op_norm(&(m - &self.project(m)?))
    }

    /// `x* = [x*_{ji}]` with each cell mapped through the involution.
    pub fn apply_involution(&self, x: &LevelElement<T>) -> Result<LevelElement<T>> {
        let s = self.involution.as_ref().ok_or(Error::MissingInvolution)?;
        let mut out = LevelElement::zeros(x.cols(), x.rows(), x.dim());
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let conj = nalgebra::DVector::from_iterator(x.dim(), x.cell(i, j).iter().map(|z| z.conj()));
                out.cell_mut(j, i).copy_from_slice((s * conj).as_slice());
            }
        }
        Ok(out)
    }

    /// Rescales `x` by `min(1, radius / ‖x‖)`.
    pub fn project_to_ball(&self, x: &LevelElement<T>, radius: T) -> Result<LevelElement<T>> {
        let n = self.norm(x)?;
        if n <= radius {
            Ok(x.clone())
        } else {
            Ok(x.scale_real(radius / n))
        }
    }

    /// `M_d` with matrix units `E_ij` (row-major order), unit `I_d` and the
    /// adjoint involution.
    pub fn full_matrix(d: usize) -> Result<Self> {
        let basis = (0..d * d).map(|r| CMat::unit(d, d, r / d, r % d)).collect();
        let unit =
            (0..d * d).map(|r| if r / d == r % d { C::new(T::one(), T::zero()) } else { C::new(T::zero(), T::zero()) });
        Self::new(d, d, basis)?.with_adjoint_involution()?.with_unit(unit.collect())
    }

    /// Upper-triangular `d × d` matrices with unit `I_d`.
    pub fn upper_triangular(d: usize) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        let basis = pairs.iter().map(|&(i, j)| CMat::unit(d, d, i, j)).collect();
        let unit = pairs.iter().map(|&(i, j)| C::new(if i == j { T::one() } else { T::zero() }, T::zero()));
        Self::new(d, d, basis)?.with_unit(unit.collect())
    }

    /// Diagonal `d × d` matrices (a copy of `ℓ∞_d`) with the adjoint
    /// involution and no unit.
    pub fn diagonal(d: usize) -> Result<Self> {
        Self::new(d, d, (0..d).map(|i| CMat::unit(d, d, i, i)).collect())?.with_adjoint_involution()
    }

    /// Serializable definition of this space.
    pub fn to_def(&self) -> SpaceDef {
        let pair = |z: &C<T>| [z.re.as_f64(), z.im.as_f64()];
        SpaceDef {
            p: self.p,
            q: self.q,
            basis: self.basis.iter().map(|b| b.row_major().iter().map(pair).collect()).collect(),
            unit: self.unit.as_ref().map(|u| u.iter().map(pair).collect()),
            involution: self.involution.as_ref().map(|s| s.row_iter().map(|r| r.iter().map(pair).collect()).collect()),
            norm_mode: match self.norm_mode {
                NormMode::Embedded => NormModeTag::Embedded,
                NormMode::Level1(_) => NormModeTag::Level1Oracle,
            },
            level1_oracle: match self.norm_mode {
                NormMode::Embedded => None,
                NormMode::Level1(o) => Some(o),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormModeTag {
    #[default]
    #[serde(rename = "embedded")]
    Embedded,
    #[serde(rename = "level1-oracle")]
    Level1Oracle,
}

/// On-disk space definition (UTF-8 JSON, row-major `[re, im]` pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDef {
    pub p: usize,
    pub q: usize,
    pub basis: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub involution: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub norm_mode: NormModeTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level1_oracle: Option<Level1Oracle>,
}

impl SpaceDef {
    pub fn into_space<T: Real>(self, rank_tol: f64) -> Result<SpaceRep<T>> {
        let cz = |z: &[f64; 2]| C::new(T::lit(z[0]), T::lit(z[1]));
        let basis = self
            .basis
            .iter()
            .map(|b| CMat::from_row_major(self.p, self.q, b.iter().map(cz).collect()))
            .collect::<Result<Vec<_>>>()?;
        let mut space = SpaceRep::with_rank_tol(self.p, self.q, basis, rank_tol)?;
        match (self.norm_mode, self.level1_oracle) {
            (NormModeTag::Embedded, None) => {}
            (NormModeTag::Embedded, Some(_)) => {
                return Err(Error::Parse("level1_oracle given for an embedded space".into()))
            }
            (NormModeTag::Level1Oracle, Some(o)) => space = space.with_level1_oracle(o)?,
            (NormModeTag::Level1Oracle, None) => {
                return Err(Error::Parse("level1-oracle mode needs a level1_oracle".into()))
            }
        }
        if let Some(s) = &self.involution {
            let k = space.dim();
            if s.len() != k || s.iter().any(|r| r.len() != k) {
                return Err(Error::Shape(format!("involution must be {k}x{k}")));
            }
            let m = DMatrix::from_fn(k, k, |i, j| cz(&s[i][j]));
            space = space.with_involution(m)?;
        }
        if let Some(u) = &self.unit {
            space = space.with_unit(u.iter().map(cz).collect())?;
        }
        Ok(space)
    }
}

/// Parses and validates a space-definition document.
pub fn load_space(document: &str) -> Result<SpaceRep<f64>> {
    load_space_with(document, DEFAULT_RANK_TOL)
}

pub fn load_space_with(document: &str, rank_tol: f64) -> Result<SpaceRep<f64>> {
    let def: SpaceDef = serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    def.into_space(rank_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;
    use approx::assert_abs_diff_eq;

    fn e(i: usize, j: usize) -> CMat<f64> {
        CMat::unit(2, 2, i, j)
    }

    fn m2() -> SpaceRep<f64> {
        SpaceRep::new(2, 2, vec![e(0, 0), e(0, 1), e(1, 0), e(1, 1)]).unwrap()
    }

    fn json_mat(m: &CMat<f64>) -> String {
        let parts: Vec<String> = m.row_major().iter().map(|z| format!("[{},{}]", z.re, z.im)).collect();
        format!("[{}]", parts.join(","))
    }

    #[test]
    fn loads_full_matrix_algebra() {
        let basis: Vec<String> = [e(0, 0), e(0, 1), e(1, 0), e(1, 1)].iter().map(json_mat).collect();
        let doc = format!(
            r#"{{"p":2,"q":2,"basis":[{}],"unit":[[1,0],[0,0],[0,0],[1,0]],"norm_mode":"embedded"}}"#,
            basis.join(",")
        );
        let space = load_space(&doc).unwrap();
        assert_eq!(space.dim(), 4);
        assert_abs_diff_eq!(space.element_norm(space.unit().unwrap()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_duplicate_basis() {
        let b = json_mat(&e(0, 0));
        let doc = format!(r#"{{"p":2,"q":2,"basis":[{b},{b}]}}"#);
        assert!(matches!(load_space(&doc), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_units() {
        let b = json_mat(&e(0, 0));
        assert!(matches!(load_space(&format!(r#"{{"p":2,"q":2,"basis":[{b}],"colour":1}}"#)), Err(Error::Parse(_))));
        let doc = format!(r#"{{"p":2,"q":2,"basis":[{b}],"unit":[[2,0]]}}"#);
        assert!(matches!(load_space(&doc), Err(Error::UnitTooLarge(_))));
        assert!(matches!(load_space("{not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn rejects_non_involution() {
        let b1 = json_mat(&e(0, 0));
        let b2 = json_mat(&e(1, 1));
        let doc = format!(r#"{{"p":2,"q":2,"basis":[{b1},{b2}],"involution":[[[0,0],[2,0]],[[1,0],[0,0]]]}}"#);
        assert!(matches!(load_space(&doc), Err(Error::NotInvolution(_))));
        // period two but not the adjoint on the realization
        let doc = format!(r#"{{"p":2,"q":2,"basis":[{b1},{b2}],"involution":[[[0,0],[1,0]],[[1,0],[0,0]]]}}"#);
        assert!(matches!(load_space(&doc), Err(Error::NotInvolution(_))));
    }

    #[test]
    fn loads_linf3() {
        let basis: Vec<String> = (0..3).map(|i| json_mat(&CMat::unit(3, 3, i, i))).collect();
        let doc = format!(r#"{{"p":3,"q":3,"basis":[{}]}}"#, basis.join(","));
        let space = load_space(&doc).unwrap();
        assert_eq!((space.p(), space.q(), space.dim()), (3, 3, 3));
        let e1 = LevelElement::scalar(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_abs_diff_eq!(space.norm(&e1).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn norm_examples() {
        let space = m2();
        let mut x = LevelElement::zeros(2, 2, 4);
        x.cell_mut(1, 0)[1] = c(1.0, 0.0);
        assert_eq!(space.realize(&x).shape(), (4, 4));
        assert_abs_diff_eq!(space.norm(&x).unwrap(), 1.0, epsilon = 1e-15);

        let s12 = m2().with_level1_oracle(Level1Oracle::TraceNorm).unwrap();
        let d = LevelElement::scalar(&[c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.4, 0.0)]);
        assert_abs_diff_eq!(s12.norm(&d).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(s12.norm(&LevelElement::zeros(2, 2, 4)), Err(Error::UnsupportedLevel(2))));
    }

    #[test]
    fn membership_examples() {
        let upper = SpaceRep::new(2, 2, vec![e(0, 0), e(0, 1), e(1, 1)]).unwrap();
        assert!(upper.membership_residual(&e(0, 0)).unwrap() < 1e-15);
        // E11 is Frobenius-orthogonal to E12 and E21
        let offdiag = SpaceRep::new(2, 2, vec![e(0, 1), e(1, 0)]).unwrap();
        assert_abs_diff_eq!(offdiag.membership_residual(&e(0, 0)).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(offdiag.membership_residual(&CMat::zeros(2, 2)).unwrap(), 0.0);
        assert!(matches!(offdiag.membership_residual(&CMat::zeros(3, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn coefficients_of_non_orthonormal_basis() {
        let b = vec![
            CMat::<f64>::from_real_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap(),
            CMat::from_real_rows(&[&[1.0, 0.0], &[1.0, 1.0]]).unwrap(),
        ];
        let space = SpaceRep::new(2, 2, b).unwrap();
        let target = [c(2.0, -1.0), c(0.5, 3.0)];
        let got = space.coefficients_of(&space.combine(&target)).unwrap();
        for (a, b) in got.iter().zip(&target) {
            assert!(cabs::<f64>(*a - *b) < 1e-12);
        }
    }

    #[test]
    fn involution_examples() {
        let space = m2().with_adjoint_involution().unwrap();
        let x = LevelElement::scalar(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let xs = space.apply_involution(&x).unwrap();
        assert_eq!(space.realize(&xs), e(1, 0));

        let mut rng = RngStream::new(1, 2);
        let y = LevelElement::random(2, 2, 4, &mut rng);
        let back = space.apply_involution(&space.apply_involution(&y).unwrap()).unwrap();
        assert!(back.max_abs_diff(&y) < 1e-10);
        assert!(space.realize(&space.apply_involution(&y).unwrap()).max_abs_diff(&dagger(&space.realize(&y))) < 1e-12);

        let h = LevelElement::scalar(&[c(1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(3.0, 0.0)]);
        assert!(space.apply_involution(&h).unwrap().max_abs_diff(&h) < 1e-12);

        assert!(matches!(m2().apply_involution(&x), Err(Error::MissingInvolution)));
    }

    #[test]
    fn ball_projection() {
        let space = m2();
        let x = LevelElement::scalar(&[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let y = space.project_to_ball(&x, 1.0).unwrap();
        assert!(y.max_abs_diff(&x.scale_real(0.5)) < 1e-15);
        assert_eq!(space.project_to_ball(&y, 1.0).unwrap(), y);
        let z = LevelElement::zeros(1, 1, 4);
        assert_eq!(space.project_to_ball(&z, 1.0).unwrap(), z);
    }

    #[test]
    fn def_round_trip() {
        let space = m2()
            .with_adjoint_involution()
            .unwrap()
            .with_unit(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
            .unwrap();
        let text = serde_json::to_string(&space.to_def()).unwrap();
        let back = load_space(&text).unwrap();
        assert_eq!(back.to_def(), space.to_def());
    }
}
