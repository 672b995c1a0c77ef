//! The coupled nonnegative objective, its per-factor gradients and Hessian
//! diagonals, the projected single-element update and the L2,1 penalty.
//!
//! `objective` is the plain squared-error sum over every tensor cell plus the
//! side-matrix residual. The gradients returned here are those of [`loss`],
//! which is half of that value, so `g` and `h` carry no factor of two.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{gram, hadamard, FactorMatrix, Matrix, SideMatrix};
use crate::tensor::{mttkrp, Mode, SparseTensor3};

/// Added to every Hessian diagonal before dividing by it.
pub const HESSIAN_DAMPING: f64 = 1e-12;

/// Identifies one of the four factor matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    /// Mode-one factor shared by the tensor and the side matrix.
    U1,
    V,
    W,
    /// Side-matrix column factor.
    U2,
}

impl Factor {
    /// Update order used by every solver.
    pub const ALL: [Factor; 4] = [Factor::U1, Factor::V, Factor::W, Factor::U2];

    pub fn index(self) -> usize {
        match self {
            Factor::U1 => 0,
            Factor::V => 1,
            Factor::W => 2,
            Factor::U2 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::U1 => "u1",
            Factor::V => "v",
            Factor::W => "w",
            Factor::U2 => "u2",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u1" => Ok(Factor::U1),
            "v" => Ok(Factor::V),
            "w" => Ok(Factor::W),
            "u2" => Ok(Factor::U2),
            _ => Err(Error::InvalidArgument(format!("unknown factor {s:?}"))),
        }
    }
}

/// The four nonnegative factor matrices of a coupled factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledModel {
    factors: [FactorMatrix; 4],
}

impl CoupledModel {
    /// Fails unless all four matrices share one rank and hold finite
    /// nonnegative values.
    pub fn new(u1: FactorMatrix, v: FactorMatrix, w: FactorMatrix, u2: FactorMatrix) -> Result<Self> {
        let rank = u1.cols();
        for (f, m) in Factor::ALL.iter().zip([&u1, &v, &w, &u2]) {
            if m.cols() != rank {
                return Err(Error::Dimension(format!(
                    "factor {f} has rank {}, expected {rank}",
                    m.cols()
                )));
            }
            if !m.is_finite() {
                return Err(Error::InvalidArgument(format!("factor {f} holds non-finite values")));
            }
            if !m.is_nonnegative() {
                return Err(Error::InvalidArgument(format!("factor {f} holds negative values")));
            }
        }
        Ok(Self {
            factors: [u1, v, w, u2],
        })
    }

    /// Factors drawn uniformly from `[0, scale)` for mode lengths `(J, K, L, M)`.
    pub fn random<R: Rng + ?Sized>(dims: (usize, usize, usize, usize), rank: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = |rows: usize| {
            let data = (0..rows * rank).map(|_| rng.random::<f64>() * scale).collect();
            Matrix::from_vec(rows, rank, data).expect("sized buffer")
        };
        let u1 = draw(dims.0);
        let v = draw(dims.1);
        let w = draw(dims.2);
        let u2 = draw(dims.3);
        Self {
            factors: [u1, v, w, u2],
        }
    }

    pub fn zeros(dims: (usize, usize, usize, usize), rank: usize) -> Self {
        Self {
            factors: [
                Matrix::zeros(dims.0, rank),
                Matrix::zeros(dims.1, rank),
                Matrix::zeros(dims.2, rank),
                Matrix::zeros(dims.3, rank),
            ],
        }
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    /// `(J, K, L, M)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.factors[0].rows(),
            self.factors[1].rows(),
            self.factors[2].rows(),
            self.factors[3].rows(),
        )
    }

    pub fn u1(&self) -> &FactorMatrix {
        &self.factors[0]
    }

    pub fn v(&self) -> &FactorMatrix {
        &self.factors[1]
    }

    pub fn w(&self) -> &FactorMatrix {
        &self.factors[2]
    }

    pub fn u2(&self) -> &FactorMatrix {
        &self.factors[3]
    }

    pub fn factor(&self, f: Factor) -> &FactorMatrix {
        &self.factors[f.index()]
    }

    /// Mutable access for in-place solver updates. Callers keep the entries
    /// nonnegative.
    pub fn factor_mut(&mut self, f: Factor) -> &mut FactorMatrix {
        &mut self.factors[f.index()]
    }

    pub fn into_factors(self) -> [FactorMatrix; 4] {
        self.factors
    }

    pub fn is_nonnegative(&self) -> bool {
        self.factors.iter().all(Matrix::is_nonnegative)
    }

    /// Model prediction for one tensor cell.
    pub fn predict(&self, j: usize, k: usize, l: usize) -> f64 {
        let (u, v, w) = (self.u1().row(j), self.v().row(k), self.w().row(l));
        u.iter().zip(v).zip(w).map(|((a, b), c)| a * b * c).sum()
    }

    /// Checks that the model fits tensor `x` and side matrix `y`.
    pub fn check_data(&self, x: &SparseTensor3, y: &SideMatrix) -> Result<()> {
        let (j, k, l) = x.dims();
        let (mj, mk, ml, mm) = self.dims();
        if y.rows() != j {
            return Err(Error::Dimension(format!(
                "side matrix has {} rows but the tensor's first mode has length {j}",
                y.rows()
            )));
        }
        if (mj, mk, ml, mm) != (j, k, l, y.cols()) {
            return Err(Error::Dimension(format!(
                "model dims {:?} do not match data dims {:?}",
                (mj, mk, ml, mm),
                (j, k, l, y.cols())
            )));
        }
        Ok(())
    }
}

/// Gradient and Hessian diagonal of [`loss`] with respect to one factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradState {
    pub target: Factor,
    pub g: Matrix,
    pub h: Vec<f64>,
}

/// L2,1 regularization weight and the zero-row guard of its reweighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScPenalty {
    lambda: f64,
    epsilon: f64,
}

impl ScPenalty {
    pub const DEFAULT_EPSILON: f64 = 1e-9;

    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { lambda, epsilon })
    }

    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, Self::DEFAULT_EPSILON)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Normal-equation form of the subproblem for one factor `F` with the other
/// three held fixed: `loss = ½ tr(F H Fᵀ) − tr(Fᵀ B) + const`, so the
/// gradient is `F H − B` and the Hessian diagonal is `diag(H)`.
#[derive(Debug, Clone)]
pub struct FactorSystem {
    pub target: Factor,
    /// `B`: MTTKRP plus, for the coupled factors, the side-matrix product.
    pub rhs: Matrix,
    /// `H`, an `R × R` symmetric positive semidefinite matrix.
    pub hess: Matrix,
}

impl FactorSystem {
    /// Assembles `B` and `H` for `target` from the current model.
    pub fn build(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel, target: Factor) -> Result<Self> {
        m.check_data(x, y)?;
        let grams = [gram(m.u1()), gram(m.v()), gram(m.w()), gram(m.u2())];
        Self::build_with_grams(x, y, m, target, &grams)
    }

    /// As [`FactorSystem::build`], reusing precomputed Gram matrices of the four
    /// factors (indexed by [`Factor::index`]). Dimensions are not re-checked.
    pub fn build_with_grams(
        x: &SparseTensor3,
        y: &SideMatrix,
        m: &CoupledModel,
        target: Factor,
        grams: &[Matrix; 4],
    ) -> Result<Self> {
        let (rhs, hess) = match target {
            Factor::U1 => {
                let mut b = mttkrp(x, m.w(), m.v(), Mode::One)?;
                b.add_assign(&y.matmul(m.u2())?)?;
                let mut h = hadamard(&grams[1], &grams[2])?;
                h.add_assign(&grams[3])?;
                (b, h)
            }
            Factor::V => (mttkrp(x, m.w(), m.u1(), Mode::Two)?, hadamard(&grams[0], &grams[2])?),
            Factor::W => (mttkrp(x, m.v(), m.u1(), Mode::Three)?, hadamard(&grams[0], &grams[1])?),
            Factor::U2 => (y.t_matmul(m.u1())?, grams[0].clone()),
        };
        Ok(Self { target, rhs, hess })
    }

    pub fn hessian_diagonal(&self) -> Vec<f64> {
        (0..self.hess.rows()).map(|r| self.hess.get(r, r)).collect()
    }

    /// `F H − B`.
    pub fn gradient(&self, f: &FactorMatrix) -> Matrix {
        let mut g = f.matmul(&self.hess).expect("factor rank matches system");
        for (gv, bv) in g.as_mut_slice().iter_mut().zip(self.rhs.as_slice()) {
            *gv -= bv;
        }
        g
    }

    /// Column `r` of [`FactorSystem::gradient`], written into `out`.
    pub fn column_gradient(&self, f: &FactorMatrix, r: usize, out: &mut [f64]) {
        let rank = self.hess.rows();
        // H is symmetric, so row r serves as column r.
        let h_col = self.hess.row(r);
        let rows = f.as_slice().chunks_exact(rank);
        let rhs = self.rhs.as_slice().chunks_exact(rank);
        for ((o, row), b) in out.iter_mut().zip(rows).zip(rhs) {
            let s: f64 = row.iter().zip(h_col).map(|(a, h)| a * h).sum();
            *o = s - b[r];
        }
    }

    pub fn grad_state(&self, f: &FactorMatrix) -> GradState {
        GradState {
            target: self.target,
            g: self.gradient(f),
            h: self.hessian_diagonal(),
        }
    }
}

/// Squared residual of the tensor part over all `J·K·L` cells, with
/// unobserved cells counted as zeros.
///
/// Uses `‖X‖² − 2⟨X, X̂⟩_Ω + ‖X̂‖²` with `‖X̂‖² = 1ᵀ(U1ᵀU1 ∗ VᵀV ∗ WᵀW)1`.
pub fn tensor_residual_sq(x: &SparseTensor3, m: &CoupledModel) -> f64 {
    let cross: f64 = x.entries().map(|(j, k, l, v)| v * m.predict(j, k, l)).sum();
    let g = hadamard(&hadamard(&gram(m.u1()), &gram(m.v())).unwrap(), &gram(m.w())).unwrap();
    clamp_rounding(x.norm_sq() - 2.0 * cross + g.sum())
}

/// `‖Y − U1 U2ᵀ‖²`, expanded the same way.
pub fn matrix_residual_sq(y: &SideMatrix, m: &CoupledModel) -> f64 {
    let yu2 = y.matmul(m.u2()).expect("side matrix columns match u2 rows");
    let cross: f64 = m.u1().as_slice().iter().zip(yu2.as_slice()).map(|(a, b)| a * b).sum();
    let g = hadamard(&gram(m.u1()), &gram(m.u2())).unwrap();
    clamp_rounding(y.frobenius_sq() - 2.0 * cross + g.sum())
}

/// Clips the small negative values the expansion can produce by rounding.
/// NaN passes through so callers can detect it.
#[inline]
fn clamp_rounding(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

/// `‖X − ⟦U1, V, W⟧‖² + ‖Y − U1 U2ᵀ‖²`.
pub fn objective(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel) -> Result<f64> {
    m.check_data(x, y)?;
    Ok(tensor_residual_sq(x, m) + matrix_residual_sq(y, m))
}

/// [`objective`] plus `λ` times the L2,1 norms of all four factors.
pub fn objective_sc(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel, p: &ScPenalty) -> Result<f64> {
    let base = objective(x, y, m)?;
    if p.lambda == 0.0 {
        return Ok(base);
    }
    let penalty: f64 = Factor::ALL.iter().map(|&f| l21_norm(m.factor(f))).sum();
    Ok(base + p.lambda * penalty)
}

/// Half of [`objective`]; the gradients below are exact derivatives of this.
pub fn loss(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel) -> Result<f64> {
    Ok(0.5 * objective(x, y, m)?)
}

/// Half of [`objective_sc`].
pub fn loss_sc(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel, p: &ScPenalty) -> Result<f64> {
    Ok(0.5 * objective_sc(x, y, m, p)?)
}

/// Sum of the Euclidean norms of the rows.
pub fn l21_norm(a: &FactorMatrix) -> f64 {
    (0..a.rows()).map(|j| row_norm(a.row(j))).sum()
}

#[inline]
fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `G = −X₁(W⊙V) + U1(VᵀV ∗ WᵀW) + U1 U2ᵀU2 − Y U2`, `h = diag(VᵀV ∗ WᵀW + U2ᵀU2)`.
pub fn grad_u1(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel) -> Result<GradState> {
    Ok(FactorSystem::build(x, y, m, Factor::U1)?.grad_state(m.u1()))
}

/// `G = −X₂(W⊙U1) + V(U1ᵀU1 ∗ WᵀW)`; the side matrix does not involve V.
pub fn grad_v(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel) -> Result<GradState> {
    Ok(FactorSystem::build(x, y, m, Factor::V)?.grad_state(m.v()))
}

/// `G = −X₃(V⊙U1) + W(U1ᵀU1 ∗ VᵀV)`.
pub fn grad_w(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel) -> Result<GradState> {
    Ok(FactorSystem::build(x, y, m, Factor::W)?.grad_state(m.w()))
}

/// `G = U2(U1ᵀU1) − YᵀU1`, `h = diag(U1ᵀU1)`.
pub fn grad_u2(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel) -> Result<GradState> {
    Ok(FactorSystem::build(x, y, m, Factor::U2)?.grad_state(m.u2()))
}

/// Gradient state for any factor.
pub fn grad(x: &SparseTensor3, y: &SideMatrix, m: &CoupledModel, target: Factor) -> Result<GradState> {
    Ok(FactorSystem::build(x, y, m, target)?.grad_state(m.factor(target)))
}

/// Projected Newton step for one element: `max(0, value − g/h) − value`,
/// with `h` damped by [`HESSIAN_DAMPING`]. `value + step` is never negative.
#[inline]
pub fn cd_delta(value: f64, g: f64, h: f64) -> Result<f64> {
    let h = h + HESSIAN_DAMPING;
    if !(h > 0.0) {
        return Err(Error::Numerical {
            iter: 0,
            msg: format!("non-positive Hessian diagonal {h}"),
        });
    }
    Ok((value - g / h).max(0.0) - value)
}

/// Row weights `1 / (2·max(‖a_j‖, ε))` of the quadratic majorizer of the
/// L2,1 norm at `a`.
pub fn sc_reweight(a: &FactorMatrix, p: &ScPenalty) -> Vec<f64> {
    (0..a.rows())
        .map(|j| 1.0 / (2.0 * row_norm(a.row(j)).max(p.epsilon)))
        .collect()
}

/// Adds the L2,1 term `λ q_j a_jr` to the gradient and returns the per-row
/// Hessian increments `λ q_j`.
pub fn fold_sc(state: &mut GradState, a: &FactorMatrix, p: &ScPenalty) -> Vec<f64> {
    let q = sc_reweight(a, p);
    let mut extra = Vec::with_capacity(q.len());
    for (j, &qj) in q.iter().enumerate() {
        let w = p.lambda * qj;
        for (g, &v) in state.g.row_mut(j).iter_mut().zip(a.row(j)) {
            *g += w * v;
        }
        extra.push(w);
    }
    extra
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::dense_reconstruct;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(
        seed: u64,
        dims: (usize, usize, usize, usize),
        rank: usize,
    ) -> (SparseTensor3, Matrix, CoupledModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for j in 0..dims.0 {
            for k in 0..dims.1 {
                for l in 0..dims.2 {
                    if rng.random::<f64>() < 0.4 {
                        entries.push((j, k, l, rng.random::<f64>()));
                    }
                }
            }
        }
        entries.push((0, 0, 0, 0.5));
        entries.dedup_by(|a, b| (a.0, a.1, a.2) == (b.0, b.1, b.2));
        let entries: Vec<_> = {
            let mut seen = std::collections::HashSet::new();
            entries.into_iter().filter(|e| seen.insert((e.0, e.1, e.2))).collect()
        };
        let x = SparseTensor3::new((dims.0, dims.1, dims.2), entries).unwrap();
        let y = Matrix::from_vec(dims.0, dims.3, (0..dims.0 * dims.3).map(|_| rng.random()).collect()).unwrap();
        let m = CoupledModel::random(dims, rank, 1.0, &mut rng);
        (x, y, m)
    }

    fn exact_instance(seed: u64) -> (SparseTensor3, Matrix, CoupledModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CoupledModel::random((4, 3, 5, 2), 2, 1.0, &mut rng);
        let d = dense_reconstruct(&m).unwrap();
        let mut entries = Vec::new();
        for j in 0..4 {
            for k in 0..3 {
                for l in 0..5 {
                    entries.push((j, k, l, d.get(j, k, l)));
                }
            }
        }
        let x = SparseTensor3::new((4, 3, 5), entries).unwrap();
        let y = m.u1().matmul(&m.u2().transpose()).unwrap();
        (x, y, m)
    }

    fn dense_objective(x: &SparseTensor3, y: &Matrix, m: &CoupledModel) -> f64 {
        let xd = x.to_dense(1 << 20).unwrap();
        let xh = dense_reconstruct(m).unwrap();
        let t: f64 = xd
            .as_slice()
            .iter()
            .zip(xh.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let yh = m.u1().matmul(&m.u2().transpose()).unwrap();
        let s: f64 = y
            .as_slice()
            .iter()
            .zip(yh.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        t + s
    }

    #[test]
    fn objective_all_zero() {
        let x = SparseTensor3::new((2, 2, 2), vec![(0, 0, 0, 0.0)]).unwrap();
        let y = Matrix::zeros(2, 3);
        let m = CoupledModel::zeros((2, 2, 2, 3), 2);
        assert_eq!(objective(&x, &y, &m).unwrap(), 0.0);
        let p = ScPenalty::with_lambda(2.0).unwrap();
        assert_eq!(objective_sc(&x, &y, &m, &p).unwrap(), 0.0);
    }

    #[test]
    fn objective_exact_model() {
        let (x, y, m) = exact_instance(1);
        assert!(objective(&x, &y, &m).unwrap() <= 1e-10);
    }

    #[test]
    fn objective_matches_dense() {
        for seed in 0..5 {
            let (x, y, m) = random_instance(seed, (4, 5, 3, 6), 3);
            let got = objective(&x, &y, &m).unwrap();
            let want = dense_objective(&x, &y, &m);
            assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn objective_dimension_mismatch() {
        let (x, _, m) = random_instance(0, (4, 5, 3, 6), 2);
        assert!(objective(&x, &Matrix::zeros(3, 6), &m).is_err());
        assert!(objective(&x, &Matrix::zeros(4, 5), &m).is_err());
    }

    #[test]
    fn objective_sc_composition() {
        let (x, y, m) = random_instance(3, (3, 4, 2, 3), 2);
        let p0 = ScPenalty::with_lambda(0.0).unwrap();
        assert_eq!(objective_sc(&x, &y, &m, &p0).unwrap(), objective(&x, &y, &m).unwrap());
        let p = ScPenalty::with_lambda(0.7).unwrap();
        let mut l21 = 0.0;
        for f in Factor::ALL {
            let a = m.factor(f);
            for j in 0..a.rows() {
                l21 += (0..a.cols()).map(|r| a.get(j, r).powi(2)).sum::<f64>().sqrt();
            }
        }
        let want = objective(&x, &y, &m).unwrap() + 0.7 * l21;
        assert!((objective_sc(&x, &y, &m, &p).unwrap() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn l21_examples() {
        assert_eq!(l21_norm(&Matrix::identity(2)), 2.0);
        assert_eq!(l21_norm(&Matrix::from_rows(&[[3.0, 4.0]]).unwrap()), 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Matrix::from_vec(6, 3, (0..18).map(|_| rng.random()).collect()).unwrap();
        let mut want = 0.0;
        for j in 0..6 {
            let mut s = 0.0;
            for r in 0..3 {
                s += a.get(j, r) * a.get(j, r);
            }
            want += s.sqrt();
        }
        assert!((l21_norm(&a) - want).abs() < 1e-14);
    }

    #[test]
    fn zero_model_gradients_vanish() {
        let (x, y, _) = random_instance(4, (3, 4, 2, 3), 2);
        let m = CoupledModel::zeros((3, 4, 2, 3), 2);
        for f in Factor::ALL {
            let s = grad(&x, &y, &m, f).unwrap();
            assert!(s.g.as_slice().iter().all(|&v| v == 0.0), "{f}");
            assert!(s.h.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn exact_model_is_fixed_point() {
        let (x, y, m) = exact_instance(2);
        for f in Factor::ALL {
            let s = grad(&x, &y, &m, f).unwrap();
            let a = m.factor(f);
            for j in 0..a.rows() {
                for r in 0..a.cols() {
                    let d = cd_delta(a.get(j, r), s.g.get(j, r), s.h[r]).unwrap();
                    assert!(d.abs() <= 1e-8, "{f} ({j},{r}) step {d}");
                }
            }
        }
    }

    fn fd_check(seed: u64, penalty: Option<ScPenalty>) {
        let (x, y, m) = random_instance(seed, (5, 4, 3, 4), 3);
        let f_at = |mm: &CoupledModel| match &penalty {
            Some(p) => loss_sc(&x, &y, mm, p).unwrap(),
            None => loss(&x, &y, mm).unwrap(),
        };
        for f in Factor::ALL {
            let mut s = grad(&x, &y, &m, f).unwrap();
            if let Some(p) = &penalty {
                fold_sc(&mut s, m.factor(f), p);
            }
            let a = m.factor(f).clone();
            let mut num = Matrix::zeros(a.rows(), a.cols());
            let step = 1e-4;
            for j in 0..a.rows() {
                for r in 0..a.cols() {
                    let mut plus = m.clone();
                    plus.factor_mut(f).set(j, r, a.get(j, r) + step);
                    let mut minus = m.clone();
                    minus.factor_mut(f).set(j, r, a.get(j, r) - step);
                    num.set(j, r, (f_at(&plus) - f_at(&minus)) / (2.0 * step));
                }
            }
            let mut diff = num.clone();
            diff.scale(-1.0);
            diff.add_assign(&s.g).unwrap();
            let rel = diff.frobenius() / s.g.frobenius().max(1e-12);
            assert!(rel <= 1e-5, "{f}: rel err {rel}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 10..14 {
            fd_check(seed, None);
        }
    }

    #[test]
    fn sc_gradients_match_finite_differences() {
        fd_check(20, Some(ScPenalty::with_lambda(0.3).unwrap()));
    }

    #[test]
    fn u1_gradient_is_sum_of_parts() {
        let (x, y, m) = random_instance(5, (4, 3, 3, 2), 2);
        let full = grad_u1(&x, &y, &m).unwrap();
        // tensor part alone: zero side matrix and zero u2
        let mut no_side = m.clone();
        *no_side.factor_mut(Factor::U2) = Matrix::zeros(2, 2);
        let t = grad_u1(&x, &Matrix::zeros(4, 2), &no_side).unwrap();
        let side = m
            .u1()
            .matmul(&gram(m.u2()))
            .unwrap()
            .as_slice()
            .iter()
            .zip(y.matmul(m.u2()).unwrap().as_slice())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>();
        for (i, &gv) in full.g.as_slice().iter().enumerate() {
            assert!((gv - (t.g.as_slice()[i] + side[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn cd_delta_examples() {
        assert_eq!(cd_delta(1.0, 0.0, 2.0).unwrap(), 0.0);
        assert_eq!(cd_delta(1.0, 4.0, 2.0).unwrap(), -1.0);
        assert!((cd_delta(2.0, -3.0, 1.5).unwrap() - 2.0).abs() < 1e-11);
        assert!(cd_delta(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn sc_reweight_examples() {
        let p = ScPenalty::with_lambda(1.0).unwrap();
        let q = sc_reweight(&Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap(), &p);
        assert!((q[0] - 0.1).abs() < 1e-15);
        assert_eq!(q[1], 1.0 / 2e-9);
        assert!(ScPenalty::new(-1.0, 1e-9).is_err());
        assert!(ScPenalty::new(1.0, 0.0).is_err());
    }

    #[test]
    fn sc_reweight_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = Matrix::from_vec(5, 3, (0..15).map(|_| rng.random()).collect()).unwrap();
        let p = ScPenalty::with_lambda(1.0).unwrap();
        let q = sc_reweight(&a, &p);
        for j in 0..5 {
            let n = (0..3).map(|r| a.get(j, r).powi(2)).sum::<f64>().sqrt();
            assert!((q[j] - 1.0 / (2.0 * n)).abs() <= 1e-12 * q[j]);
        }
    }

    #[test]
    fn model_rejects_bad_factors() {
        let ok = Matrix::zeros(2, 2);
        assert!(CoupledModel::new(ok.clone(), ok.clone(), Matrix::zeros(2, 3), ok.clone()).is_err());
        let neg = Matrix::from_rows(&[[-1.0, 0.0]]).unwrap();
        assert!(CoupledModel::new(ok.clone(), ok.clone(), neg, ok).is_err());
    }
}
