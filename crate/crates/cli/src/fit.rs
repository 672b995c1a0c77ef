use cutcd::io::{load_matrix, load_tensor, save_model, write_trace};
use cutcd::{fit, SolverConfig, SolverKind};
use log::info;

use crate::args::{FitArgs, SolverArgs};
use crate::fail::{Failure, Outcome};

/// Validated solver configuration; the L2,1 weight is reserved for cutcd-sc.
pub fn config(kind: SolverKind, a: &SolverArgs) -> Result<SolverConfig, Failure> {
    if a.lambda != 0.0 && kind != SolverKind::CutCdSc {
        return Err(Failure::usage(format!("--lambda applies to cutcd-sc only, not {kind}")));
    }
    let cfg = SolverConfig {
        rank: a.rank,
        max_iters: a.max_iters,
        tol: a.tol,
        seed: a.seed,
        cutoff_rule: a.cutoff,
        lambda: a.lambda,
        ccd_inner_iters: a.ccd_inner,
        gcd_max_inner: a.gcd_max_inner,
        init_scale: a.init_scale,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes the factors as `u1.txt`, `v.txt`, `w.txt`, `u2.txt` and the
/// per-iteration record as `trace.csv`.
pub fn run(a: &FitArgs) -> Outcome {
    let cfg = config(a.solver, &a.solver_args)?;
    let x = load_tensor(&a.tensor).map_err(Failure::usage)?;
    let y = load_matrix(&a.matrix).map_err(Failure::usage)?;
    info!("fit {} on {} entries, rank {}", a.solver, x.nnz(), cfg.rank);

    let result = fit(a.solver, &x, &y, &cfg)?;
    save_model(&result.model, &a.out)?;
    write_trace(&result.traces, a.out.join("trace.csv"))?;

    let last = result.final_trace();
    let wall: f64 = result.traces.iter().map(|t| t.wall_seconds).sum();
    println!("solver={}", a.solver);
    println!("iters={}", last.iter);
    println!("objective={:e}", last.objective);
    println!("nrv={:e}", last.nrv);
    println!("wall_seconds={wall:e}");
    println!("out={}", a.out.display());
    Ok(())
}
