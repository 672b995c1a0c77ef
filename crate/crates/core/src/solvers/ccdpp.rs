//! CCD++ baseline: rank-one column updates cycling through all four factors,
//! every element of the column updated, with the column gradient recomputed
//! from a column-wise MTTKRP each time.

use super::{drive, Fit, IterStats, SolverConfig, Workspace};
use crate::error::Result;
use crate::matrix::SideMatrix;
use crate::model::{cd_delta, CoupledModel, Factor};
use crate::tensor::{mttkrp_column, Mode, SparseTensor3};

pub fn fit_ccdpp(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig) -> Result<Fit> {
    run(x, y, cfg, None)
}

pub(crate) fn run(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig, init: Option<CoupledModel>) -> Result<Fit> {
    drive(x, y, cfg, init, None, "ccdpp", |ws, stats| {
        for r in 0..cfg.rank {
            for _ in 0..cfg.ccd_inner_iters {
                for f in Factor::ALL {
                    update_column(x, y, ws, f, r, stats)?;
                }
            }
        }
        Ok(())
    })
}

/// `Y · col` for a `J × M` side matrix and a length-`M` column.
fn side_times(y: &SideMatrix, col: &[f64]) -> Vec<f64> {
    (0..y.rows())
        .map(|j| y.row(j).iter().zip(col).map(|(a, b)| a * b).sum())
        .collect()
}

/// `Yᵀ · col` for a length-`J` column.
fn side_t_times(y: &SideMatrix, col: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.cols()];
    for (j, &c) in col.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(y.row(j)) {
            *o += v * c;
        }
    }
    out
}

fn update_column(
    x: &SparseTensor3,
    y: &SideMatrix,
    ws: &mut Workspace,
    target: Factor,
    r: usize,
    stats: &mut IterStats,
) -> Result<()> {
    let m = &ws.model;
    let g = &ws.grams;
    let rank = m.rank();
    let gram_row = |f: Factor| g[f.index()].row(r);

    let rhs = stats.time_mttkrp(|| -> Result<Vec<f64>> {
        Ok(match target {
            Factor::U1 => {
                let mut b = mttkrp_column(x, &m.w().column(r), &m.v().column(r), Mode::One)?;
                for (bv, sv) in b.iter_mut().zip(side_times(y, &m.u2().column(r))) {
                    *bv += sv;
                }
                b
            }
            Factor::V => mttkrp_column(x, &m.w().column(r), &m.u1().column(r), Mode::Two)?,
            Factor::W => mttkrp_column(x, &m.v().column(r), &m.u1().column(r), Mode::Three)?,
            Factor::U2 => side_t_times(y, &m.u1().column(r)),
        })
    })?;

    let hess_row: Vec<f64> = match target {
        Factor::U1 => (0..rank)
            .map(|s| gram_row(Factor::V)[s] * gram_row(Factor::W)[s] + gram_row(Factor::U2)[s])
            .collect(),
        Factor::V => (0..rank)
            .map(|s| gram_row(Factor::U1)[s] * gram_row(Factor::W)[s])
            .collect(),
        Factor::W => (0..rank)
            .map(|s| gram_row(Factor::U1)[s] * gram_row(Factor::V)[s])
            .collect(),
        Factor::U2 => gram_row(Factor::U1).to_vec(),
    };
    let h = hess_row[r];

    let f = ws.model.factor_mut(target);
    let rows = f.rows();
    for (j, b) in rhs.iter().enumerate() {
        let row = f.row(j);
        let grad: f64 = row.iter().zip(&hess_row).map(|(a, c)| a * c).sum::<f64>() - b;
        let u = row[r];
        let step = cd_delta(u, grad, h)?;
        f.set(j, r, u + step);
    }
    stats.counters.record(target, rows as u64, rows as u64);

    // Only row and column r of this factor's Gram matrix changed.
    let f = ws.model.factor(target);
    let gm = &mut ws.grams[target.index()];
    for s in 0..rank {
        let v: f64 = (0..rows).map(|j| f.get(j, r) * f.get(j, s)).sum();
        gm.set(r, s, v);
        gm.set(s, r, v);
    }
    Ok(())
}
