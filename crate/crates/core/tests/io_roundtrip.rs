use std::fs;

use cutcd::io::{
    load_matrix, load_model, load_tensor, read_trace, save_matrix, save_model, save_tensor, write_trace, TRACE_HEADER,
};
use cutcd::*;

fn instance() -> SynthData {
    synth_generate(&SynthSpec {
        mode_lengths: (7, 6, 5, 4),
        density: 0.3,
        rank: 2,
        value_mode: ValueMode::Planted,
        noise_sigma: 0.01,
        seed: 3,
    })
    .unwrap()
}

#[test]
fn tensor_matrix_and_model_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let data = instance();
    let tp = dir.path().join("x.coo");
    let mp = dir.path().join("y.txt");
    save_tensor(&data.tensor, &tp).unwrap();
    save_matrix(&data.matrix, &mp).unwrap();
    assert_eq!(load_tensor(&tp).unwrap(), data.tensor);
    assert_eq!(load_matrix(&mp).unwrap(), data.matrix);

    let truth = data.planted.unwrap();
    let md = dir.path().join("model");
    fs::create_dir(&md).unwrap();
    save_model(&truth, &md).unwrap();
    for name in ["u1.txt", "v.txt", "w.txt", "u2.txt"] {
        assert!(md.join(name).is_file());
    }
    assert_eq!(load_model(&md).unwrap(), truth);
}

#[test]
fn fit_trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = instance();
    let cfg = SolverConfig {
        max_iters: 4,
        tol: 0.0,
        ..SolverConfig::with_rank(2)
    };
    let fit = fit_gcd(&data.tensor, &data.matrix, &cfg).unwrap();
    let path = dir.path().join("trace.csv");
    write_trace(&fit.traces, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_HEADER);
    assert_eq!(text.lines().count(), fit.traces.len() + 1);
    assert_eq!(read_trace(&path).unwrap(), fit.traces);
}

#[test]
fn refit_from_loaded_files_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = instance();
    save_tensor(&data.tensor, dir.path().join("x.coo")).unwrap();
    save_matrix(&data.matrix, dir.path().join("y.txt")).unwrap();
    let x = load_tensor(dir.path().join("x.coo")).unwrap();
    let y = load_matrix(dir.path().join("y.txt")).unwrap();
    let cfg = SolverConfig {
        max_iters: 5,
        tol: 0.0,
        ..SolverConfig::with_rank(2)
    };
    let a = fit_cutcd(&data.tensor, &data.matrix, &cfg).unwrap();
    let b = fit_cutcd(&x, &y, &cfg).unwrap();
    assert_eq!(a.model, b.model);
}

#[test]
fn missing_and_malformed_files_report_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_tensor(dir.path().join("nope.coo")), Err(Error::Io(_))));
    let bad = dir.path().join("bad.coo");
    fs::write(&bad, "%dims 2 2 2\n0 0 0 1.0\n0 0 9 1.0\n").unwrap();
    assert!(load_tensor(&bad).is_err());
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert!(load_model(&empty).is_err());
}
