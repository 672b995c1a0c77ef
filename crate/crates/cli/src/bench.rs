use std::fs;

use cutcd::{fit, synth_generate, SolverConfig, SolverKind, SynthData, SynthSpec};
use log::{info, warn};

use crate::args::{BenchArgs, Vary};
use crate::fail::{exit_code, Failure, Outcome};

pub const HEADER: [&str; 8] = [
    "solver",
    "varied_value",
    "repeat",
    "wall_seconds",
    "final_nrv",
    "element_updates",
    "gradient_updates",
    "status",
];

/// Runs every (value, solver, repeat) cell on one instance per value and
/// writes `bench.csv`. Failed cells keep their row with an error status.
pub fn run(a: &BenchArgs) -> Outcome {
    if a.repeats == 0 {
        return Err(Failure::usage("--repeats must be >= 1"));
    }
    if a.lambda != 0.0 && !a.solvers.contains(&SolverKind::CutCdSc) {
        return Err(Failure::usage("--lambda applies to cutcd-sc only"));
    }
    for &v in &a.values {
        if a.vary != Vary::Density && !(v >= 1.0 && v.fract() == 0.0) {
            return Err(Failure::usage(format!("{v} is not a positive integer")));
        }
    }
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("bench.csv");
    let mut out = csv::Writer::from_path(&path)?;
    out.write_record(HEADER)?;

    let (mut rows, mut failed) = (0usize, 0usize);
    for &value in &a.values {
        let (spec, rank) = cell_spec(a, value);
        let data = synth_generate(&spec);
        for &kind in &a.solvers {
            for repeat in 0..a.repeats {
                let cfg = SolverConfig {
                    rank,
                    max_iters: a.max_iters,
                    tol: a.tol,
                    seed: a.seed + repeat as u64,
                    lambda: if kind == SolverKind::CutCdSc { a.lambda } else { 0.0 },
                    ..SolverConfig::default()
                };
                let row = run_cell(kind, data.as_ref(), &cfg);
                if row.status != "ok" {
                    warn!("{kind} at {value} repeat {repeat}: {}", row.status);
                    failed += 1;
                }
                out.write_record([
                    kind.name().to_string(),
                    value.to_string(),
                    repeat.to_string(),
                    row.wall_seconds,
                    row.final_nrv,
                    row.element_updates,
                    row.gradient_updates,
                    row.status,
                ])?;
                rows += 1;
                info!("bench {kind} {value} #{repeat} done");
            }
        }
    }
    out.flush()?;
    println!("rows={rows}");
    println!("failed={failed}");
    println!("out={}", path.display());
    Ok(())
}

fn cell_spec(a: &BenchArgs, value: f64) -> (SynthSpec, usize) {
    let mut spec = SynthSpec {
        mode_lengths: a.dims,
        density: a.density,
        rank: a.rank,
        value_mode: a.mode,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    match a.vary {
        Vary::Mode => {
            let n = value as usize;
            spec.mode_lengths = (n, n, n, a.dims.3);
        }
        Vary::Density => spec.density = value,
        Vary::Rank => spec.rank = value as usize,
    }
    let rank = spec.rank;
    (spec, rank)
}

struct Row {
    wall_seconds: String,
    final_nrv: String,
    element_updates: String,
    gradient_updates: String,
    status: String,
}

fn run_cell(kind: SolverKind, data: Result<&SynthData, &cutcd::Error>, cfg: &SolverConfig) -> Row {
    let failed = |status: String| Row {
        wall_seconds: String::new(),
        final_nrv: String::new(),
        element_updates: String::new(),
        gradient_updates: String::new(),
        status,
    };
    let data = match data {
        Ok(d) => d,
        Err(e) => return failed(format!("error: {e}")),
    };
    match fit(kind, &data.tensor, &data.matrix, cfg) {
        Ok(f) => {
            let iters = &f.traces[1..];
            Row {
                wall_seconds: format!("{:e}", iters.iter().map(|t| t.wall_seconds).sum::<f64>()),
                final_nrv: format!("{:e}", f.final_trace().nrv),
                element_updates: iters.iter().map(|t| t.element_updates).sum::<u64>().to_string(),
                gradient_updates: iters.iter().map(|t| t.gradient_updates).sum::<u64>().to_string(),
                status: "ok".into(),
            }
        }
        Err(e) if exit_code(&e) == crate::fail::NUMERICAL => failed(format!("numerical: {e}")),
        Err(e) => failed(format!("error: {e}")),
    }
}
