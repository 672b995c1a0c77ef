use std::fs::File;
use std::io::{BufWriter, Write};

use cutcd::io::{load_matrix, load_model, load_tensor};
use cutcd::{nrv, objective, pattern_distinctiveness, precision_recall_f1, rmse, TestSet};
use serde_json::{json, Value};

use crate::args::{EvalArgs, Metric};
use crate::fail::{Failure, Outcome};

/// Prints one `key=value` line per figure and writes one JSON object per
/// metric.
pub fn run(a: &EvalArgs) -> Outcome {
    let x = load_tensor(&a.tensor).map_err(Failure::usage)?;
    let model = load_model(&a.model).map_err(Failure::usage)?;
    let test = match &a.test {
        Some(p) => {
            let t = TestSet::from_tensor(&load_tensor(p).map_err(Failure::usage)?);
            t.check_disjoint(&x).map_err(Failure::usage)?;
            Some(t)
        }
        None => None,
    };
    let metrics = if a.metrics.is_empty() {
        let mut m = vec![Metric::Nrv];
        if test.is_some() {
            m.extend([Metric::Rmse, Metric::Prf1]);
        }
        if model.rank() >= 2 {
            m.push(Metric::Pd);
        }
        m
    } else {
        a.metrics.clone()
    };
    let need_test = |name: &str| {
        test.as_ref()
            .ok_or_else(|| Failure::usage(format!("{name} needs --test")))
    };

    let mut records: Vec<Value> = Vec::new();
    let report = |key: &str, v: f64| println!("{key}={v:e}");
    if let Some(p) = &a.matrix {
        let y = load_matrix(p).map_err(Failure::usage)?;
        let f = objective(&x, &y, &model).map_err(Failure::usage)?;
        report("objective", f);
        records.push(json!({ "metric": "objective", "value": f }));
    }
    for metric in metrics {
        match metric {
            Metric::Nrv => {
                let v = nrv(&x, &model).map_err(Failure::usage)?;
                report("nrv", v);
                records.push(json!({ "metric": "nrv", "value": v }));
            }
            Metric::Rmse => {
                let v = rmse(need_test("rmse")?, &model).map_err(Failure::usage)?;
                report("rmse", v);
                records.push(json!({ "metric": "rmse", "value": v }));
            }
            Metric::Prf1 => {
                let s = precision_recall_f1(&x, need_test("prf1")?, &model, a.top_n).map_err(Failure::usage)?;
                report("precision", s.precision);
                report("recall", s.recall);
                report("f1", s.f1);
                println!("users={}", s.users);
                records.push(json!({
                    "metric": "prf1",
                    "top_n": a.top_n,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "users": s.users,
                    "hits": s.hits,
                    "retrieved": s.retrieved,
                    "relevant": s.relevant,
                }));
            }
            Metric::Pd => {
                let v = pattern_distinctiveness(model.factor(a.pd_factor)).map_err(Failure::usage)?;
                report("pd", v);
                records.push(json!({ "metric": "pd", "factor": a.pd_factor.name(), "value": v }));
            }
        }
    }

    let path = a.json.clone().unwrap_or_else(|| a.model.join("eval.jsonl"));
    let mut out = BufWriter::new(File::create(&path)?);
    for r in &records {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    println!("json={}", path.display());
    Ok(())
}
