//! Projected alternating least squares baseline: each factor is set to the
//! unconstrained block minimizer `B (H + ridge·I)⁻¹`, then clipped at zero.
//! The clipping can raise the objective; the trace records it as is.

use nalgebra::DMatrix;

use super::{drive, Fit, SolverConfig, ALS_RIDGE};
use crate::error::{Error, Result};
use crate::matrix::{FactorMatrix, SideMatrix};
use crate::model::CoupledModel;
use crate::model::{Factor, FactorSystem};
use crate::tensor::SparseTensor3;

pub fn fit_als(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig) -> Result<Fit> {
    run(x, y, cfg, None)
}

pub(crate) fn run(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig, init: Option<CoupledModel>) -> Result<Fit> {
    drive(x, y, cfg, init, None, "als", |ws, stats| {
        for f in Factor::ALL {
            let system = stats.time_mttkrp(|| FactorSystem::build_with_grams(x, y, &ws.model, f, &ws.grams))?;
            solve_projected(&system, ws.model.factor_mut(f))?;
            let n = (ws.model.factor(f).rows() * ws.model.rank()) as u64;
            stats.counters.record(f, n, 0);
            ws.refresh_gram(f);
        }
        Ok(())
    })
}

fn solve_projected(system: &FactorSystem, f: &mut FactorMatrix) -> Result<()> {
    let rank = system.hess.rows();
    let rows = system.rhs.rows();
    let mut h = DMatrix::from_row_slice(rank, rank, system.hess.as_slice());
    for r in 0..rank {
        h[(r, r)] += ALS_RIDGE;
    }
    let chol = h.cholesky().ok_or_else(|| Error::Numerical {
        iter: 0,
        msg: format!("normal equations for {} are not positive definite", system.target),
    })?;
    // The row-major J×R right-hand side is the column-major R×J matrix Bᵀ;
    // solving H Z = Bᵀ gives Z = (B H⁻¹)ᵀ, again row-major B H⁻¹.
    let rhs_t = DMatrix::from_column_slice(rank, rows, system.rhs.as_slice());
    let solved = chol.solve(&rhs_t);
    for (dst, &src) in f.as_mut_slice().iter_mut().zip(solved.as_slice()) {
        *dst = if src.is_finite() { src.max(0.0) } else { src };
    }
    if !f.is_finite() {
        return Err(Error::Numerical {
            iter: 0,
            msg: format!("non-finite ALS solution for {}", system.target),
        });
    }
    Ok(())
}
