use std::fs;

use cutcd::io::{save_matrix, save_model, save_tensor};
use cutcd::{synth_generate, train_test_split, SparseTensor3, SynthSpec};
use log::info;

use crate::args::SynthArgs;
use crate::fail::{Failure, Outcome};

/// Writes `tensor.coo`, `matrix.txt`, `truth/` for planted data and
/// `test.coo` when a holdout is requested.
pub fn run(a: &SynthArgs) -> Outcome {
    let spec = SynthSpec {
        mode_lengths: a.dims,
        density: a.density,
        rank: a.rank,
        value_mode: a.mode,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    let data = synth_generate(&spec).map_err(Failure::usage)?;
    fs::create_dir_all(&a.out)?;

    let (train, test) = match a.holdout {
        Some(frac) => {
            let (train, test) = train_test_split(&data.tensor, frac, a.seed).map_err(Failure::usage)?;
            (
                train,
                Some(SparseTensor3::new(data.tensor.dims(), test.entries().to_vec())?),
            )
        }
        None => (data.tensor, None),
    };
    save_tensor(&train, a.out.join("tensor.coo"))?;
    save_matrix(&data.matrix, a.out.join("matrix.txt"))?;
    if let Some(test) = &test {
        save_tensor(test, a.out.join("test.coo"))?;
    }
    if let Some(truth) = &data.planted {
        save_model(truth, a.out.join("truth"))?;
    }
    info!("synth wrote {}", a.out.display());

    let (j, k, l, m) = a.dims;
    println!("dims={j},{k},{l},{m}");
    println!("mode={}", a.mode);
    println!("nnz={}", train.nnz());
    if let Some(test) = &test {
        println!("test_nnz={}", test.nnz());
    }
    println!("seed={}", a.seed);
    println!("out={}", a.out.display());
    Ok(())
}
