//! Third-order sparse tensors in coordinate form and the MTTKRP kernels.
//!
//! Entries are kept sorted by `(j, k, l)`; per-mode groupings of the observed
//! index set are built once at construction so that every kernel can walk the
//! entries of one target-mode slice at a time.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::CoupledModel;

/// Largest number of cells `dense_reconstruct` will materialize by default.
pub const DEFAULT_DENSE_CAP: usize = 10_000_000;

/// One of the three tensor modes. Mode one is the mode coupled to the side matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Parses the 1-based mode number used on the command line.
    pub fn from_number(n: usize) -> Result<Mode> {
        match n {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            _ => Err(Error::InvalidArgument(format!("mode {n} out of range 1..=3"))),
        }
    }

    #[inline]
    fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    /// The two remaining axes as `(inner, outer)`: `inner` indexes the `b`
    /// operand of the Khatri-Rao product, `outer` the `a` operand.
    #[inline]
    fn others(self) -> (usize, usize) {
        match self {
            Mode::One => (1, 2),
            Mode::Two => (0, 2),
            Mode::Three => (0, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ModeIndex {
    /// `ptr[t]..ptr[t + 1]` is the range of `order` holding slice `t`.
    ptr: Vec<usize>,
    order: Vec<u32>,
}

impl ModeIndex {
    fn build(indices: &[[u32; 3]], axis: usize, dim: usize) -> Self {
        let mut counts = vec![0usize; dim + 1];
        for idx in indices {
            counts[idx[axis] as usize + 1] += 1;
        }
        for t in 0..dim {
            counts[t + 1] += counts[t];
        }
        let ptr = counts.clone();
        let mut next = counts;
        let mut order = vec![0u32; indices.len()];
        // Stable counting sort: within a slice, entries keep canonical order.
        for (e, idx) in indices.iter().enumerate() {
            let t = idx[axis] as usize;
            order[next[t]] = e as u32;
            next[t] += 1;
        }
        Self { ptr, order }
    }

    #[inline]
    fn slice(&self, t: usize) -> &[u32] {
        &self.order[self.ptr[t]..self.ptr[t + 1]]
    }
}

/// Sparse third-order tensor `X` of shape `(J, K, L)` with observed index set Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor3 {
    dims: (usize, usize, usize),
    indices: Vec<[u32; 3]>,
    values: Vec<f64>,
    groups: [ModeIndex; 3],
}

impl SparseTensor3 {
    /// Builds a tensor from `(j, k, l, value)` entries in any order.
    ///
    /// Fails on an empty entry list, an index outside `dims`, a repeated
    /// triple or a non-finite value.
    pub fn new(dims: (usize, usize, usize), entries: Vec<(usize, usize, usize, f64)>) -> Result<Self> {
        let (jd, kd, ld) = dims;
        if jd == 0 || kd == 0 || ld == 0 {
            return Err(Error::Dimension(format!("mode lengths must be positive, got {dims:?}")));
        }
        if jd > u32::MAX as usize || kd > u32::MAX as usize || ld > u32::MAX as usize {
            return Err(Error::Dimension(format!("mode length too large: {dims:?}")));
        }
        if entries.is_empty() {
            return Err(Error::EmptyTensor);
        }
        let mut entries = entries;
        for &(j, k, l, v) in &entries {
            if j >= jd || k >= kd || l >= ld {
                return Err(Error::IndexOutOfBounds { j, k, l, dims });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
        }
        entries.sort_unstable_by_key(|e| (e.0, e.1, e.2));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1, w[0].2) == (w[1].0, w[1].1, w[1].2) {
                return Err(Error::DuplicateEntry {
                    j: w[0].0,
                    k: w[0].1,
                    l: w[0].2,
                    line: None,
                });
            }
        }
        let indices: Vec<[u32; 3]> = entries
            .iter()
            .map(|&(j, k, l, _)| [j as u32, k as u32, l as u32])
            .collect();
        let values = entries.iter().map(|e| e.3).collect();
        let groups = [
            ModeIndex::build(&indices, 0, jd),
            ModeIndex::build(&indices, 1, kd),
            ModeIndex::build(&indices, 2, ld),
        ];
        Ok(Self {
            dims,
            indices,
            values,
            groups,
        })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn dim(&self, mode: Mode) -> usize {
        match mode {
            Mode::One => self.dims.0,
            Mode::Two => self.dims.1,
            Mode::Three => self.dims.2,
        }
    }

    /// |Ω|
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        let (j, k, l) = self.dims;
        self.nnz() as f64 / (j as f64 * k as f64 * l as f64)
    }

    /// Entries in canonical `(j, k, l)` order.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = (usize, usize, usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(i, &v)| (i[0] as usize, i[1] as usize, i[2] as usize, v))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Squared norm over the observed entries.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Set of observed `(j, k, l)` triples.
    pub fn index_set(&self) -> HashSet<(usize, usize, usize)> {
        self.entries().map(|(j, k, l, _)| (j, k, l)).collect()
    }

    /// Observed entries whose index along `mode` equals `t`, as entry ids.
    pub(crate) fn slice_entries(&self, mode: Mode, t: usize) -> impl Iterator<Item = (&[u32; 3], f64)> {
        self.groups[mode.axis()]
            .slice(t)
            .iter()
            .map(move |&e| (&self.indices[e as usize], self.values[e as usize]))
    }

    /// Materializes the tensor densely, unobserved cells set to zero.
    pub fn to_dense(&self, cap: usize) -> Result<DenseTensor3> {
        let mut d = DenseTensor3::zeros(self.dims, cap)?;
        for (j, k, l, v) in self.entries() {
            d.set(j, k, l, v);
        }
        Ok(d)
    }

    fn check_operands(&self, a_rows: usize, b_rows: usize, ranks: (usize, usize), mode: Mode) -> Result<()> {
        if ranks.0 != ranks.1 {
            return Err(Error::Dimension(format!("rank mismatch {} vs {}", ranks.0, ranks.1)));
        }
        let (inner, outer) = mode.others();
        let dims = [self.dims.0, self.dims.1, self.dims.2];
        if a_rows != dims[outer] || b_rows != dims[inner] {
            return Err(Error::Dimension(format!(
                "mode-{} MTTKRP expects operands with {} and {} rows, got {a_rows} and {b_rows}",
                mode.axis() + 1,
                dims[outer],
                dims[inner]
            )));
        }
        Ok(())
    }
}

/// Matricized tensor times Khatri-Rao product `X_(n) (a ⊙ b)`.
///
/// Operand order follows the mode: mode one takes `(W, V)`, mode two
/// `(W, U1)`, mode three `(V, U1)`. Only the observed entries are visited.
pub fn mttkrp(x: &SparseTensor3, a: &Matrix, b: &Matrix, mode: Mode) -> Result<Matrix> {
    x.check_operands(a.rows(), b.rows(), (a.cols(), b.cols()), mode)?;
    let rank = a.cols();
    let (inner, outer) = mode.others();
    let mut out = Matrix::zeros(x.dim(mode), rank);
    for t in 0..x.dim(mode) {
        let out_row = out.row_mut(t);
        for (idx, v) in x.slice_entries(mode, t) {
            let a_row = a.row(idx[outer] as usize);
            let b_row = b.row(idx[inner] as usize);
            for ((o, &av), &bv) in out_row.iter_mut().zip(a_row).zip(b_row) {
                *o += v * av * bv;
            }
        }
    }
    Ok(out)
}

/// A single column of [`mttkrp`]: `m[t] = Σ x · a_col[outer] · b_col[inner]`
/// over the observed entries of slice `t`.
pub fn mttkrp_column(x: &SparseTensor3, a_col: &[f64], b_col: &[f64], mode: Mode) -> Result<Vec<f64>> {
    x.check_operands(a_col.len(), b_col.len(), (1, 1), mode)?;
    let (inner, outer) = mode.others();
    let out = (0..x.dim(mode))
        .map(|t| {
            x.slice_entries(mode, t)
                .map(|(idx, v)| v * a_col[idx[outer] as usize] * b_col[idx[inner] as usize])
                .sum()
        })
        .collect();
    Ok(out)
}

/// Dense third-order array, row-major in `(j, k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(dims: (usize, usize, usize), cap: usize) -> Result<Self> {
        let cells = dims
            .0
            .checked_mul(dims.1)
            .and_then(|c| c.checked_mul(dims.2))
            .unwrap_or(usize::MAX);
        if cells > cap {
            return Err(Error::SizeCap { cells, cap });
        }
        Ok(Self {
            dims,
            data: vec![0.0; cells],
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.data[(j * self.dims.1 + k) * self.dims.2 + l]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, l: usize, v: f64) {
        self.data[(j * self.dims.1 + k) * self.dims.2 + l] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Full CP reconstruction `Σ_r u1[:, r] ∘ v[:, r] ∘ w[:, r]`, capped at
/// [`DEFAULT_DENSE_CAP`] cells.
pub fn dense_reconstruct(model: &CoupledModel) -> Result<DenseTensor3> {
    dense_reconstruct_capped(model, DEFAULT_DENSE_CAP)
}

pub fn dense_reconstruct_capped(model: &CoupledModel, cap: usize) -> Result<DenseTensor3> {
    let (u1, v, w) = (model.u1(), model.v(), model.w());
    let mut out = DenseTensor3::zeros((u1.rows(), v.rows(), w.rows()), cap)?;
    let rank = model.rank();
    let mut uv = vec![0.0; rank];
    for j in 0..u1.rows() {
        for k in 0..v.rows() {
            for (r, s) in uv.iter_mut().enumerate() {
                *s = u1.get(j, r) * v.get(k, r);
            }
            for l in 0..w.rows() {
                let cell = uv.iter().zip(w.row(l)).map(|(a, b)| a * b).sum();
                out.set(j, k, l, cell);
            }
        }
    }
    Ok(out)
}
