//! Synthetic coupled datasets and train/test splitting.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SideMatrix};
use crate::metrics::TestSet;
use crate::model::CoupledModel;
use crate::tensor::SparseTensor3;

/// Below this density distinct triples are drawn by rejection, above it by
/// Floyd's algorithm.
const REJECTION_DENSITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueMode {
    /// Values and side matrix generated from random nonnegative factors.
    Planted,
    /// Values and side matrix uniform in `(0, 1]`.
    Random,
}

impl FromStr for ValueMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planted" => Ok(ValueMode::Planted),
            "random" => Ok(ValueMode::Random),
            _ => Err(Error::InvalidArgument(format!("unknown value mode {s:?}"))),
        }
    }
}

impl fmt::Display for ValueMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueMode::Planted => "planted",
            ValueMode::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// `(J, K, L, M)`
    pub mode_lengths: (usize, usize, usize, usize),
    pub density: f64,
    /// Rank of the planted factors.
    pub rank: usize,
    pub value_mode: ValueMode,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn cells(&self) -> u64 {
        let (j, k, l, _) = self.mode_lengths;
        j as u64 * k as u64 * l as u64
    }

    /// `⌈density · J·K·L⌉`, tolerant of the representation error in `density`.
    pub fn entry_count(&self) -> u64 {
        entry_count(self.density, self.cells())
    }

    pub fn validate(&self) -> Result<()> {
        let (j, k, l, m) = self.mode_lengths;
        if j == 0 || k == 0 || l == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "mode lengths must be positive, got {:?}",
                self.mode_lengths
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if self.density * self.cells() as f64 <= 0.0 || self.entry_count() == 0 {
            return Err(Error::InvalidArgument("density yields no entries".into()));
        }
        if self.value_mode == ValueMode::Planted && self.rank == 0 {
            return Err(Error::InvalidArgument("planted data needs rank >= 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        if self.noise_sigma > 0.0 && self.value_mode != ValueMode::Planted {
            return Err(Error::InvalidArgument("noise applies to planted data only".into()));
        }
        Ok(())
    }
}

fn entry_count(density: f64, cells: u64) -> u64 {
    let raw = density * cells as f64;
    ((raw * (1.0 - 1e-12)).ceil() as u64).clamp(1, cells)
}

/// A generated dataset; `planted` holds the generating factors in planted mode.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub tensor: SparseTensor3,
    pub matrix: SideMatrix,
    pub planted: Option<CoupledModel>,
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let (j, k, l, m) = spec.mode_lengths;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.value_mode {
        ValueMode::Random => {
            let cells = sample_cells((j, k, l), spec.entry_count(), &mut rng);
            let entries = cells
                .into_iter()
                .map(|(a, b, c)| (a, b, c, 1.0 - rng.random::<f64>()))
                .collect();
            let tensor = SparseTensor3::new((j, k, l), entries)?;
            let data = (0..j * m).map(|_| 1.0 - rng.random::<f64>()).collect();
            let matrix = Matrix::from_vec(j, m, data)?;
            Ok(SynthData {
                tensor,
                matrix,
                planted: None,
            })
        }
        ValueMode::Planted => {
            let model = CoupledModel::random(spec.mode_lengths, spec.rank, 1.0, &mut rng);
            let (tensor, matrix) = sample_from_model(&model, spec.density, spec.noise_sigma, &mut rng)?;
            Ok(SynthData {
                tensor,
                matrix,
                planted: Some(model),
            })
        }
    }
}

/// Samples `⌈density·J·K·L⌉` distinct cells, sets each to the model's
/// prediction plus Gaussian noise, and builds the side matrix `U1 U2ᵀ`.
pub fn sample_from_model<R: Rng + ?Sized>(
    model: &CoupledModel,
    density: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<(SparseTensor3, SideMatrix)> {
    let (j, k, l, _) = model.dims();
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density {density} outside (0, 1]")));
    }
    let noise =
        Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(format!("noise sigma {noise_sigma}: {e}")))?;
    let count = entry_count(density, j as u64 * k as u64 * l as u64);
    let cells = sample_cells((j, k, l), count, rng);
    let entries = cells
        .into_iter()
        .map(|(a, b, c)| {
            let mut v = model.predict(a, b, c);
            if noise_sigma > 0.0 {
                v += noise.sample(rng);
            }
            (a, b, c, v)
        })
        .collect();
    let tensor = SparseTensor3::new((j, k, l), entries)?;
    let matrix = model.u1().matmul(&model.u2().transpose())?;
    Ok((tensor, matrix))
}

/// `count` distinct cells drawn uniformly, returned in canonical order.
fn sample_cells<R: Rng + ?Sized>(dims: (usize, usize, usize), count: u64, rng: &mut R) -> Vec<(usize, usize, usize)> {
    let total = dims.0 as u64 * dims.1 as u64 * dims.2 as u64;
    debug_assert!(count <= total);
    let mut chosen: HashSet<u64> = HashSet::with_capacity(count as usize);
    if (count as f64) < REJECTION_DENSITY_LIMIT * total as f64 {
        while (chosen.len() as u64) < count {
            chosen.insert(rng.random_range(0..total));
        }
    } else {
        // Floyd: one draw per chosen element, no rejection.
        for i in (total - count)..total {
            let t = rng.random_range(0..=i);
            if !chosen.insert(t) {
                chosen.insert(i);
            }
        }
    }
    let mut linear: Vec<u64> = chosen.into_iter().collect();
    linear.sort_unstable();
    let (kl, l) = (dims.1 as u64 * dims.2 as u64, dims.2 as u64);
    linear
        .into_iter()
        .map(|c| ((c / kl) as usize, ((c % kl) / l) as usize, (c % l) as usize))
        .collect()
}

/// Uniform random partition of the observed entries; `round(fraction·|Ω|)`
/// entries (at least one, at most `|Ω| − 1`) are held out.
pub fn train_test_split(x: &SparseTensor3, holdout_fraction: f64, seed: u64) -> Result<(SparseTensor3, TestSet)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {holdout_fraction} outside (0, 1)"
        )));
    }
    let n = x.nnz();
    if n < 2 {
        return Err(Error::InvalidArgument("splitting needs at least two entries".into()));
    }
    let n_test = ((holdout_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (i, e) in x.entries().enumerate() {
        if is_test[i] {
            test.push(e);
        } else {
            train.push(e);
        }
    }
    Ok((SparseTensor3::new(x.dims(), train)?, TestSet::new(test)))
}
