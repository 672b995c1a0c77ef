//! Greedy coordinate descent baseline: per row, repeatedly update the element
//! with the largest attainable objective decrease, refreshing the whole row's
//! gradient after every update.

use super::cutcd::hessian_extra;
use super::{drive, Counters, Fit, SolverConfig, GCD_IMPORTANCE_FLOOR};
use crate::error::Result;
use crate::matrix::{FactorMatrix, SideMatrix};
use crate::model::{cd_delta, CoupledModel, Factor, FactorSystem, ScPenalty};
use crate::tensor::SparseTensor3;

pub fn fit_gcd(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig) -> Result<Fit> {
    run(x, y, cfg, None)
}

pub(crate) fn run(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig, init: Option<CoupledModel>) -> Result<Fit> {
    let max_inner = cfg.gcd_inner();
    drive(x, y, cfg, init, None, "gcd", |ws, stats| {
        for f in Factor::ALL {
            let system = stats.time_mttkrp(|| FactorSystem::build_with_grams(x, y, &ws.model, f, &ws.grams))?;
            gcd_pass(&system, ws.model.factor_mut(f), max_inner, None, &mut stats.counters)?;
            ws.refresh_gram(f);
        }
        Ok(())
    })
}

/// One GCD pass over `target`, updating `m` in place.
pub fn gcd_update_factor(
    x: &SparseTensor3,
    y: &SideMatrix,
    m: &mut CoupledModel,
    target: Factor,
    cfg: &SolverConfig,
    counters: &mut Counters,
) -> Result<()> {
    let system = FactorSystem::build(x, y, m, target)?;
    let extra = if cfg.lambda > 0.0 {
        Some(hessian_extra(m.factor(target), &ScPenalty::with_lambda(cfg.lambda)?))
    } else {
        None
    };
    gcd_pass(
        &system,
        m.factor_mut(target),
        cfg.gcd_inner(),
        extra.as_deref(),
        counters,
    )
}

/// Projected step and the objective decrease it achieves,
/// `−(g·δ + ½·h·δ²)`, which is never negative.
#[inline]
fn step_and_gain(u: f64, g: f64, h: f64) -> Result<(f64, f64)> {
    let step = cd_delta(u, g, h)?;
    Ok((step, -(g * step + 0.5 * h * step * step)))
}

fn gcd_pass(
    system: &FactorSystem,
    f: &mut FactorMatrix,
    max_inner: usize,
    sc_extra: Option<&[f64]>,
    counters: &mut Counters,
) -> Result<()> {
    let rank = f.cols();
    let mut g = system.gradient(f);
    let hdiag = system.hessian_diagonal();
    let mut steps = vec![0.0; rank];
    let mut gains = vec![0.0; rank];
    let mut h = vec![0.0; rank];

    for j in 0..f.rows() {
        let extra = sc_extra.map_or(0.0, |e| e[j]);
        if extra != 0.0 {
            for (gv, &uv) in g.row_mut(j).iter_mut().zip(f.row(j)) {
                *gv += extra * uv;
            }
        }
        for (hs, &d) in h.iter_mut().zip(&hdiag) {
            *hs = d + extra;
        }
        for s in 0..rank {
            (steps[s], gains[s]) = step_and_gain(f.get(j, s), g.get(j, s), h[s])?;
        }
        for _ in 0..max_inner {
            let (best, gain) =
                gains.iter().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (s, &v)| if v > acc.1 { (s, v) } else { acc },
                );
            if !(gain > GCD_IMPORTANCE_FLOOR) {
                break;
            }
            let step = steps[best];
            let u = f.get(j, best);
            f.set(j, best, u + step);

            let h_row = system.hess.row(best);
            let g_row = g.row_mut(j);
            for s in 0..rank {
                g_row[s] += h_row[s] * step;
            }
            g_row[best] += extra * step;
            counters.record(system.target, 1, rank as u64);

            for s in 0..rank {
                (steps[s], gains[s]) = step_and_gain(f.get(j, s), g.get(j, s), h[s])?;
            }
        }
    }
    Ok(())
}
