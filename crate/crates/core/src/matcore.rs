//! Dense complex matrices and the norm/assembly primitives every criterion
//! reduces to.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{cabs, is_finite_c, Real, C};

/// Dense complex rectangular matrix with positive dimensions.
#[derive(Clone, PartialEq)]
pub struct CMat<T: Real> {
    data: DMatrix<C<T>>,
}

impl<T: Real> fmt::Debug for CMat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMat {}x{} ", self.rows(), self.cols())?;
        f.debug_list()
            .entries(self.data.row_iter().map(|r| r.iter().map(|z| (z.re.as_f64(), z.im.as_f64())).collect::<Vec<_>>()))
            .finish()
    }
}

impl<T: Real> CMat<T> {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("dimensions must be positive, got {rows}x{cols}")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if !entries.iter().all(is_finite_c) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { data: DMatrix::from_row_slice(rows, cols, &entries) })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<C<T>>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), ncols, rows.concat())
    }

    /// Real-valued convenience constructor.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C<T>>> =
            rows.iter().map(|r| r.iter().map(|&x| C::new(T::lit(x), T::zero())).collect()).collect();
        Self::from_rows(&rows)
    }

    /// Wraps an nalgebra matrix after checking the invariants.
    pub fn from_matrix(data: DMatrix<C<T>>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Shape("dimensions must be positive".into()));
        }
        if !data.iter().all(is_finite_c) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "dimensions must be positive");
        Self { data: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "dimension must be positive");
        Self { data: DMatrix::identity(n, n) }
    }

    /// Matrix unit `E_{ij}` (zero-based indices).
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m.data[(i, j)] = C::new(T::one(), T::zero());
        m
    }

    /// Diagonal matrix from complex entries.
    pub fn diag(entries: &[C<T>]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, z) in entries.iter().enumerate() {
            m.data[(i, i)] = *z;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.data[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, z: C<T>) {
        self.data[(i, j)] = z;
    }

    pub fn as_matrix(&self) -> &DMatrix<C<T>> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.data
    }

    pub fn row_major(&self) -> Vec<C<T>> {
        self.data.transpose().iter().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(is_finite_c)
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self { data: self.data.map(|z| z * s) }
    }

    pub fn scale_real(&self, s: T) -> Self {
        Self { data: self.data.map(|z| C::new(z.re * s, z.im * s)) }
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self { data: self.data.map(|z| z.conj()) }
    }

    pub fn transpose(&self) -> Self {
        Self { data: self.data.transpose() }
    }

    /// Frobenius inner product `tr(self^H other)`.
    pub fn frobenius_dot(&self, other: &Self) -> C<T> {
        assert_eq!(self.shape(), other.shape(), "frobenius_dot shape mismatch");
        self.data.iter().zip(other.data.iter()).fold(C::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.re * z.re + z.im * z.im).sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data.iter().zip(other.data.iter()).fold(T::zero(), |acc, (a, b)| acc.max(cabs(*a - *b)))
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Real>(&self) -> CMat<U> {
        CMat { data: self.data.map(|z| C::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))) }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self { data: self.data.kronecker(&other.data) }
    }

    /// Copies `src` into `self` with its top-left corner at `(r, c)`.
    pub fn paste(&mut self, r: usize, c: usize, src: &Self) {
        self.data.view_mut((r, c), (src.rows(), src.cols())).copy_from(&src.data);
    }

    /// Extracts the `rows x cols` submatrix starting at `(r, c)`.
    pub fn sub(&self, r: usize, c: usize, rows: usize, cols: usize) -> Self {
        Self { data: self.data.view((r, c), (rows, cols)).into_owned() }
    }
}

impl<T: Real> Add for &CMat<T> {
    type Output = CMat<T>;
    fn add(self, rhs: Self) -> CMat<T> {
        CMat { data: &self.data + &rhs.data }
    }
}

impl<T: Real> Sub for &CMat<T> {
    type Output = CMat<T>;
    fn sub(self, rhs: Self) -> CMat<T> {
        CMat { data: &self.data - &rhs.data }
    }
}

impl<T: Real> Mul for &CMat<T> {
    type Output = CMat<T>;
    fn mul(self, rhs: Self) -> CMat<T> {
        CMat { data: &self.data * &rhs.data }
    }
}

impl<T: Real> Neg for &CMat<T> {
    type Output = CMat<T>;
    fn neg(self) -> CMat<T> {
        CMat { data: -&self.data }
    }
}

fn ensure_finite<T: Real>(m: &CMat<T>) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Nonzero positions of `m`, column by column; fails on non-finite entries.
fn nonzero_positions<T: Real>(m: &DMatrix<C<T>>) -> Result<Vec<(usize, usize)>> {
    let r = m.nrows();
    let mut nz = Vec::new();
    if r == 0 {
        return Ok(nz);
    }
    for (j, col) in m.as_slice().chunks_exact(r).enumerate() {
        for (i, z) in col.iter().enumerate() {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidInput("matrix has non-finite entries".into()));
            }
            if z.re != T::zero() || z.im != T::zero() {
                nz.push((i, j));
            }
        }
    }
    Ok(nz)
}

/// Connected components of the row/column graph of a nonzero pattern.
/// Components are numbered by their smallest vertex (rows before columns)
/// and list their rows and columns in ascending order.
struct Components {
    rows: usize,
    /// Component of each vertex (`rows` row vertices, then columns), or
    /// `usize::MAX` for empty rows and columns.
    of: Vec<usize>,
    /// Position of each vertex among the rows (or columns) of its component.
    local: Vec<usize>,
    /// `(row count, column count)` per component.
    shape: Vec<(usize, usize)>,
}

impl Components {
    fn new(r: usize, c: usize, nz: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut parent: Vec<usize> = (0..r + c).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let mut touched = vec![false; r + c];
        for (i, j) in nz {
            touched[i] = true;
            touched[r + j] = true;
            let (a, b) = (find(&mut parent, i), find(&mut parent, r + j));
            if a != b {
                parent[a] = b;
            }
        }
        let mut slot = vec![usize::MAX; r + c];
        let mut of = vec![usize::MAX; r + c];
        let mut local = vec![0; r + c];
        let mut shape: Vec<(usize, usize)> = Vec::new();
        for v in 0..r + c {
            if !touched[v] {
                continue;
            }
            let root = find(&mut parent, v);
            if slot[root] == usize::MAX {
                slot[root] = shape.len();
                shape.push((0, 0));
            }
            let k = slot[root];
            of[v] = k;
            let count = if v < r { &mut shape[k].0 } else { &mut shape[k].1 };
            local[v] = *count;
            *count += 1;
        }
        Self { rows: r, of, local, shape }
    }

    fn len(&self) -> usize {
        self.shape.len()
    }

    /// True when everything is one component covering the whole matrix.
    fn is_whole(&self, r: usize, c: usize) -> bool {
        self.len() == 1 && self.shape[0] == (r, c)
    }

    /// Row and column index lists of every component.
    fn members(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut out: Vec<(Vec<usize>, Vec<usize>)> =
            self.shape.iter().map(|&(a, b)| (Vec::with_capacity(a), Vec::with_capacity(b))).collect();
        for (v, &k) in self.of.iter().enumerate() {
            if k == usize::MAX {
                continue;
            }
            if v < self.rows {
                out[k].0.push(v);
            } else {
                out[k].1.push(v - self.rows);
            }
        }
        out
    }
}

fn svd_values<T: Real>(m: DMatrix<C<T>>) -> Vec<T> {
    m.singular_values().iter().copied().collect()
}

/// Singular values in descending order (zeros included, `min(rows, cols)`
/// of them).
pub fn singular_values<T: Real>(m: &CMat<T>) -> Result<Vec<T>> {
    let nz = nonzero_positions(&m.data)?;
    let mut out = Vec::with_capacity(m.rows().min(m.cols()));
    let comps = Components::new(m.rows(), m.cols(), nz.into_iter());
    if comps.is_whole(m.rows(), m.cols()) {
        out = svd_values(m.data.clone());
    } else {
        for (rows, cols) in comps.members() {
            let sub = m.data.select_rows(&rows).select_columns(&cols);
            out.extend(svd_values(sub));
        }
    }
    out.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    out.resize(m.rows().min(m.cols()), T::zero());
    Ok(out)
}

/// `σ_max² = (‖A‖_F² + √(‖A‖_F⁴ − 4|det A|²)) / 2` for `[[a, b], [c, d]]`.
fn norm_2x2<T: Real>([a, b, c, d]: [C<T>; 4]) -> T {
    let f = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
    let det = (a * d - b * c).norm_sqr();
    let four = T::lit(4.0);
    let disc = (f * f - four * det).max(T::zero()).sqrt();
    ((f + disc) / T::lit(2.0)).sqrt()
}

/// Largest singular value of the submatrix of `a` on one component.
fn component_norm<T: Real>(a: &DMatrix<C<T>>, rows: &[usize], cols: &[usize]) -> T {
    if rows.len() == 2 && cols.len() == 2 {
        norm_2x2([a[(rows[0], cols[0])], a[(rows[0], cols[1])], a[(rows[1], cols[0])], a[(rows[1], cols[1])]])
    } else if rows.len() == 1 || cols.len() == 1 {
        // vector: the norm is the Euclidean length
        let mut s = T::zero();
        for &i in rows {
            for &j in cols {
                let z = a[(i, j)];
                s += z.re * z.re + z.im * z.im;
            }
        }
        s.sqrt()
    } else {
        svd_values(a.select_rows(rows).select_columns(cols))[0]
    }
}

/// Largest singular value of a dense row-major `rows x cols` block.
fn block_norm<T: Real>(rows: usize, cols: usize, b: &[C<T>]) -> T {
    if rows == 2 && cols == 2 {
        norm_2x2([b[0], b[1], b[2], b[3]])
    } else if rows == 1 || cols == 1 {
        b.iter().fold(T::zero(), |s, z| s + z.re * z.re + z.im * z.im).sqrt()
    } else {
        svd_values(DMatrix::from_row_slice(rows, cols, b))[0]
    }
}

/// Operator norm: the largest singular value.
pub fn op_norm<T: Real>(m: &CMat<T>) -> Result<T> {
    let nz = nonzero_positions(&m.data)?;
    let comps = Components::new(m.rows(), m.cols(), nz.into_iter());
    if comps.is_whole(m.rows(), m.cols()) {
        return Ok(svd_values(m.data.clone())[0]);
    }
    Ok(comps.members().iter().fold(T::zero(), |best, (rows, cols)| best.max(component_norm(&m.data, rows, cols))))
}

/// Operator norm of the `rows x cols` matrix `Σ z E_{ij}` over the given
/// entries (repeated positions add up). Agrees with [`op_norm`] on the dense
/// matrix up to rounding, without building it.
pub fn op_norm_sparse<T: Real>(rows: usize, cols: usize, entries: &[(usize, usize, C<T>)]) -> Result<T> {
    for &(i, j, z) in entries {
        if i >= rows || j >= cols {
            return Err(Error::Shape(format!("entry ({i}, {j}) outside {rows}x{cols}")));
        }
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
    }
    let live = |&&(_, _, z): &&(usize, usize, C<T>)| z.re != T::zero() || z.im != T::zero();
    let comps = Components::new(rows, cols, entries.iter().filter(live).map(|&(i, j, _)| (i, j)));
    // dense row-major block per component, laid out back to back
    let mut offset = Vec::with_capacity(comps.len() + 1);
    offset.push(0);
    for &(a, b) in &comps.shape {
        offset.push(offset[offset.len() - 1] + a * b);
    }
    let zero = C::new(T::zero(), T::zero());
    let mut buf = vec![zero; offset[comps.len()]];
    for &(i, j, z) in entries.iter().filter(live) {
        let k = comps.of[i];
        let width = comps.shape[k].1;
        buf[offset[k] + comps.local[i] * width + comps.local[rows + j]] += z;
    }
    let mut best = T::zero();
    for (k, &(a, b)) in comps.shape.iter().enumerate() {
        best = best.max(block_norm(a, b, &buf[offset[k]..offset[k + 1]]));
    }
    Ok(best)
}

/// Trace (nuclear) norm: the sum of singular values.
pub fn trace_norm<T: Real>(m: &CMat<T>) -> Result<T> {
    Ok(singular_values(m)?.into_iter().fold(T::zero(), |a, s| a + s))
}

/// Conjugate transpose.
pub fn dagger<T: Real>(m: &CMat<T>) -> CMat<T> {
    CMat { data: m.data.adjoint() }
}

/// Assembles a grid of blocks into one matrix.
pub fn block<T: Real>(blocks: &[Vec<CMat<T>>]) -> Result<CMat<T>> {
    if blocks.is_empty() || blocks[0].is_empty() {
        return Err(Error::Shape("empty block grid".into()));
    }
    let ncols = blocks[0].len();
    if blocks.iter().any(|row| row.len() != ncols) {
        return Err(Error::Shape("block grid rows have different lengths".into()));
    }
    let heights: Vec<usize> = blocks.iter().map(|row| row[0].rows()).collect();
    let widths: Vec<usize> = blocks[0].iter().map(CMat::cols).collect();
    for (bi, row) in blocks.iter().enumerate() {
        for (bj, b) in row.iter().enumerate() {
            if b.rows() != heights[bi] || b.cols() != widths[bj] {
                return Err(Error::Shape(format!(
                    "block ({bi},{bj}) is {}x{}, expected {}x{}",
                    b.rows(),
                    b.cols(),
                    heights[bi],
                    widths[bj]
                )));
            }
        }
    }
    let mut out = CMat::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r = 0;
    for (bi, row) in blocks.iter().enumerate() {
        let mut c = 0;
        for (bj, b) in row.iter().enumerate() {
            out.paste(r, c, b);
            c += widths[bj];
        }
        r += heights[bi];
    }
    Ok(out)
}

/// Block-diagonal matrix with `n` copies of `m` (`m ⊗ I_n` in cell terms).
pub fn scalar_amplify<T: Real>(m: &CMat<T>, n: usize) -> CMat<T> {
    assert!(n > 0, "amplification level must be positive");
    if n == 1 {
        return m.clone();
    }
    CMat::<T>::identity(n).kron(m)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues down to `-1e-10 · max(1, ‖m‖)` are clamped to zero; anything
/// more negative is a numerical error.
pub fn hermitian_sqrt<T: Real>(m: &CMat<T>) -> Result<CMat<T>> {
    if m.rows() != m.cols() {
        return Err(Error::Shape("square root needs a square matrix".into()));
    }
    ensure_finite(m)?;
    let herm = m.max_abs_diff(&dagger(m));
    let scale = T::one().max(op_norm(m)?);
    if herm > T::lit(1e-10) * scale {
        return Err(Error::Numerical(format!("matrix is not Hermitian (deviation {:e})", herm.as_f64())));
    }
    let sym = (&m.data + m.data.adjoint()).map(|z| z * C::new(T::lit(0.5), T::zero()));
    let eig = SymmetricEigen::new(sym);
    let floor = -T::lit(1e-10) * scale;
    let mut roots = Vec::with_capacity(m.rows());
    for &lam in eig.eigenvalues.iter() {
        if lam < floor {
            return Err(Error::Numerical(format!("negative eigenvalue {:e} under square root", lam.as_f64())));
        }
        roots.push(C::new(lam.max(T::zero()).sqrt(), T::zero()));
    }
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(roots));
    Ok(CMat { data: q * d * q.adjoint() })
}

/// Value-semantic, counter-based random stream.
///
/// `(seed, stream)` pins the whole sequence, so restarts running on any
/// thread reproduce bit-identical draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Independent child stream keyed by `key`.
    pub fn child(seed: u64, key: &[u64]) -> Self {
        Self::new(seed, stream_key(key))
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Standard complex Gaussian, `E|z|^2 = 1`.
    pub fn complex_gaussian<T: Real>(&mut self) -> C<T> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = (self.normal(), self.normal());
        C::new(T::lit(a * s), T::lit(b * s))
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a tuple of identifiers into one stream id.
pub fn stream_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Matrix with independent standard complex Gaussian entries.
pub fn rand_cmat<T: Real>(rows: usize, cols: usize, rng: &mut RngStream) -> CMat<T> {
    assert!(rows > 0 && cols > 0, "dimensions must be positive");
    let entries: Vec<C<T>> = (0..rows * cols).map(|_| rng.complex_gaussian()).collect();
    CMat { data: DMatrix::from_row_slice(rows, cols, &entries) }
}

/// Random matrix rescaled to operator norm `norm`.
pub fn rand_cmat_with_norm<T: Real>(rows: usize, cols: usize, norm: T, rng: &mut RngStream) -> CMat<T> {
    let m = rand_cmat::<T>(rows, cols, rng);
    let n = op_norm(&m).expect("gaussian matrix is finite");
    m.scale_real(norm / n)
}
