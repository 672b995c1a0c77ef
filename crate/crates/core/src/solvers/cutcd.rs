//! Cut-off coordinate descent: column-wise element selection by normalized
//! importance and a mean (or fixed) cut-off.

use super::selection::{importance, normalize_in_place, select_into, ColumnSelection, SelectionMask};
use super::{drive, Counters, CutoffRule, Fit, SolverConfig};
use crate::error::Result;
use crate::matrix::{FactorMatrix, SideMatrix};
use crate::model::{cd_delta, sc_reweight, CoupledModel, Factor, FactorSystem, ScPenalty};
use crate::tensor::SparseTensor3;

/// Runs one Cut-CD pass over `target`, updating `m` in place.
///
/// The L2,1 majorizer is applied when `cfg.lambda > 0`. The returned mask
/// carries each column's normalized importances alongside the selection.
pub fn cutcd_update_factor(
    x: &SparseTensor3,
    y: &SideMatrix,
    m: &mut CoupledModel,
    target: Factor,
    cfg: &SolverConfig,
    counters: &mut Counters,
) -> Result<SelectionMask> {
    let system = FactorSystem::build(x, y, m, target)?;
    let penalty = sc_penalty(cfg)?;
    let extra = penalty.map(|p| hessian_extra(m.factor(target), &p));
    cutcd_pass(
        &system,
        m.factor_mut(target),
        cfg.cutoff_rule,
        extra.as_deref(),
        counters,
        true,
    )
}

pub fn fit_cutcd(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig) -> Result<Fit> {
    run(x, y, cfg, None, None, "cutcd")
}

/// Cut-CD on the L2,1-regularized objective. With `cfg.lambda == 0` this is
/// exactly [`fit_cutcd`].
pub fn fit_cutcd_sc(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig) -> Result<Fit> {
    run(x, y, cfg, None, sc_penalty(cfg)?, "cutcd-sc")
}

pub(crate) fn sc_penalty(cfg: &SolverConfig) -> Result<Option<ScPenalty>> {
    if cfg.lambda > 0.0 {
        Ok(Some(ScPenalty::with_lambda(cfg.lambda)?))
    } else {
        Ok(None)
    }
}

/// Per-row curvature `λ q_j` of the L2,1 majorizer anchored at `a`.
pub(crate) fn hessian_extra(a: &FactorMatrix, p: &ScPenalty) -> Vec<f64> {
    sc_reweight(a, p).into_iter().map(|q| p.lambda() * q).collect()
}

pub(crate) fn run(
    x: &SparseTensor3,
    y: &SideMatrix,
    cfg: &SolverConfig,
    init: Option<CoupledModel>,
    penalty: Option<ScPenalty>,
    label: &str,
) -> Result<Fit> {
    drive(x, y, cfg, init, penalty, label, |ws, stats| {
        for f in Factor::ALL {
            let system = stats.time_mttkrp(|| FactorSystem::build_with_grams(x, y, &ws.model, f, &ws.grams))?;
            let extra = penalty.map(|p| hessian_extra(ws.model.factor(f), &p));
            cutcd_pass(
                &system,
                ws.model.factor_mut(f),
                cfg.cutoff_rule,
                extra.as_deref(),
                &mut stats.counters,
                false,
            )?;
            ws.refresh_gram(f);
        }
        Ok(())
    })
}

/// Column-by-column selection and update of one factor.
///
/// Each column's gradient `g_{*r} = F H_{*r} − B_{*r}` is formed from the
/// current factor when the column is reached, so updates made to earlier
/// columns in the same pass are reflected. Within a column the rows are
/// decoupled, and after updating `(j, r)` only `g_jr` itself changes.
///
/// Elements are scored by the importance of their projected step
/// `δ = cd_delta(u, g, h)`, which is the objective decrease that step buys.
pub(crate) fn cutcd_pass(
    system: &FactorSystem,
    f: &mut FactorMatrix,
    rule: CutoffRule,
    sc_extra: Option<&[f64]>,
    counters: &mut Counters,
    record: bool,
) -> Result<SelectionMask> {
    let rows = f.rows();
    let rank = f.cols();
    let mut g = vec![0.0; rows];
    let mut n = vec![0.0; rows];
    let mut step = vec![0.0; rows];
    let mut selected = Vec::with_capacity(rows);
    let mut columns = Vec::with_capacity(if record { rank } else { 0 });
    let extra_at = |j: usize| sc_extra.map_or(0.0, |e| e[j]);

    for r in 0..rank {
        system.column_gradient(f, r, &mut g);
        if let Some(extra) = sc_extra {
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += extra[j] * f.get(j, r);
            }
        }
        let h_r = system.hess.get(r, r);
        for j in 0..rows {
            let h = h_r + extra_at(j);
            step[j] = cd_delta(f.get(j, r), g[j], h)?;
            n[j] = importance(step[j], g[j], h);
        }
        normalize_in_place(&mut n);
        select_into(&n, rule, &mut selected);

        for &j in &selected {
            f.set(j, r, f.get(j, r) + step[j]);
            g[j] += (h_r + extra_at(j)) * step[j];
        }
        let count = selected.len() as u64;
        counters.record(system.target, count, count);

        if record {
            columns.push(ColumnSelection {
                selected: selected.clone(),
                normalized: n.clone(),
            });
        }
    }
    Ok(SelectionMask {
        target: system.target,
        columns,
    })
}
