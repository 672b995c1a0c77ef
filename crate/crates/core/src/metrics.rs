//! Evaluation measures: approximation error, held-out RMSE, top-N
//! recommendation quality and pattern distinctiveness.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::matrix::FactorMatrix;
use crate::model::{tensor_residual_sq, CoupledModel};
use crate::tensor::{Mode, SparseTensor3};

/// Held-out tensor entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    entries: Vec<(usize, usize, usize, f64)>,
}

impl TestSet {
    pub fn new(entries: Vec<(usize, usize, usize, f64)>) -> Self {
        Self { entries }
    }

    pub fn from_tensor(x: &SparseTensor3) -> Self {
        Self::new(x.entries().collect())
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails if any held-out triple is also observed in `train`.
    pub fn check_disjoint(&self, train: &SparseTensor3) -> Result<()> {
        let seen = train.index_set();
        match self.entries.iter().find(|e| seen.contains(&(e.0, e.1, e.2))) {
            Some(&(j, k, l, _)) => Err(Error::DuplicateEntry { j, k, l, line: None }),
            None => Ok(()),
        }
    }
}

fn check_model_fits(x: &SparseTensor3, m: &CoupledModel) -> Result<()> {
    let (j, k, l, _) = m.dims();
    if (j, k, l) != x.dims() {
        return Err(Error::Dimension(format!(
            "model dims {:?} vs tensor dims {:?}",
            (j, k, l),
            x.dims()
        )));
    }
    Ok(())
}

/// Normalized residual `‖X − X̂‖² / ‖X‖²` over all cells, unobserved cells
/// taken as zero.
pub fn nrv(x: &SparseTensor3, m: &CoupledModel) -> Result<f64> {
    check_model_fits(x, m)?;
    let norm = x.norm_sq();
    if norm == 0.0 {
        return Err(Error::UndefinedMetric("NRV of a tensor with zero norm".into()));
    }
    Ok(tensor_residual_sq(x, m) / norm)
}

pub fn rmse(test: &TestSet, m: &CoupledModel) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::UndefinedMetric("RMSE of an empty test set".into()));
    }
    let (jd, kd, ld, _) = m.dims();
    let mut sum = 0.0;
    for &(j, k, l, v) in &test.entries {
        if j >= jd || k >= kd || l >= ld {
            return Err(Error::IndexOutOfBounds {
                j,
                k,
                l,
                dims: (jd, kd, ld),
            });
        }
        let d = v - m.predict(j, k, l);
        sum += d * d;
    }
    Ok((sum / test.len() as f64).sqrt())
}

/// Micro-averaged top-N recommendation quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendationScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Users that contributed to the averages.
    pub users: usize,
    pub hits: usize,
    pub retrieved: usize,
    pub relevant: usize,
}

/// Top-N evaluation with mode one as users and `(k, l)` cells as items.
///
/// For each user with held-out entries, every `(k, l)` not observed for that
/// user in `train` is a candidate; the `top_n` highest predictions (ties by
/// ascending `(k, l)`) are retrieved and held-out cells are relevant. Counts
/// are summed over users before dividing. Users without candidates are
/// skipped.
pub fn precision_recall_f1(
    train: &SparseTensor3,
    test: &TestSet,
    m: &CoupledModel,
    top_n: usize,
) -> Result<RecommendationScores> {
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be >= 1".into()));
    }
    if test.is_empty() {
        return Err(Error::UndefinedMetric(
            "recommendation metrics on an empty test set".into(),
        ));
    }
    check_model_fits(train, m)?;
    let (_, kd, ld) = train.dims();

    let mut relevant: HashMap<usize, HashSet<(usize, usize)>> = HashMap::new();
    for &(j, k, l, _) in test.entries() {
        relevant.entry(j).or_default().insert((k, l));
    }
    let mut users: Vec<usize> = relevant.keys().copied().collect();
    users.sort_unstable();

    let rank = m.rank();
    let mut observed = vec![false; kd * ld];
    let mut uv = vec![0.0; rank];
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(kd * ld);
    let (mut hits, mut retrieved, mut rel_total, mut counted) = (0usize, 0usize, 0usize, 0usize);

    for j in users {
        observed.iter_mut().for_each(|o| *o = false);
        for (idx, _) in train.slice_entries(Mode::One, j) {
            observed[idx[1] as usize * ld + idx[2] as usize] = true;
        }
        candidates.clear();
        for k in 0..kd {
            for (r, s) in uv.iter_mut().enumerate() {
                *s = m.u1().get(j, r) * m.v().get(k, r);
            }
            for l in 0..ld {
                let cell = k * ld + l;
                if observed[cell] {
                    continue;
                }
                let score: f64 = uv.iter().zip(m.w().row(l)).map(|(a, b)| a * b).sum();
                candidates.push((score, cell));
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        let n = top_n.min(candidates.len());
        if n < candidates.len() {
            candidates.select_nth_unstable_by(n - 1, by_rank);
        }
        let rel = &relevant[&j];
        hits += candidates[..n]
            .iter()
            .filter(|(_, cell)| rel.contains(&(cell / ld, cell % ld)))
            .count();
        retrieved += n;
        rel_total += rel.len();
        counted += 1;
    }

    let precision = if retrieved > 0 {
        hits as f64 / retrieved as f64
    } else {
        0.0
    };
    let recall = if rel_total > 0 {
        hits as f64 / rel_total as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(RecommendationScores {
        precision,
        recall,
        f1,
        users: counted,
        hits,
        retrieved,
        relevant: rel_total,
    })
}

/// Mean cosine similarity over all pairs of columns; zero columns count as
/// zero vectors. Lower means more distinct patterns.
pub fn pattern_distinctiveness(w: &FactorMatrix) -> Result<f64> {
    let rank = w.cols();
    if rank < 2 {
        return Err(Error::UndefinedMetric(format!(
            "pattern distinctiveness needs at least two columns, got {rank}"
        )));
    }
    let cols: Vec<Vec<f64>> = (0..rank)
        .map(|r| {
            let mut c = w.column(r);
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                c.iter_mut().for_each(|v| *v /= n);
            }
            c
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for q in 0..rank {
        for r in q + 1..rank {
            total += cols[q].iter().zip(&cols[r]).map(|(a, b)| a * b).sum::<f64>();
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::tensor::dense_reconstruct;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(seed: u64) -> (SparseTensor3, CoupledModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CoupledModel::random((3, 4, 5, 2), 2, 1.0, &mut rng);
        let d = dense_reconstruct(&m).unwrap();
        let mut e = Vec::new();
        for j in 0..3 {
            for k in 0..4 {
                for l in 0..5 {
                    if rng.random::<f64>() < 0.6 {
                        e.push((j, k, l, d.get(j, k, l)));
                    }
                }
            }
        }
        (SparseTensor3::new((3, 4, 5), e).unwrap(), m)
    }

    #[test]
    fn nrv_zero_and_exact_models() {
        let (x, m) = planted(1);
        let zero = CoupledModel::zeros((3, 4, 5, 2), 2);
        assert_eq!(nrv(&x, &zero).unwrap(), 1.0);

        // fully observed exact model
        let d = dense_reconstruct(&m).unwrap();
        let mut e = Vec::new();
        for j in 0..3 {
            for k in 0..4 {
                for l in 0..5 {
                    e.push((j, k, l, d.get(j, k, l)));
                }
            }
        }
        let full = SparseTensor3::new((3, 4, 5), e).unwrap();
        assert!(nrv(&full, &m).unwrap() <= 1e-10);
    }

    #[test]
    fn nrv_matches_dense_residual() {
        let (x, _) = planted(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = CoupledModel::random((3, 4, 5, 2), 3, 1.0, &mut rng);
        let xd = x.to_dense(1000).unwrap();
        let xh = dense_reconstruct(&m).unwrap();
        let num: f64 = xd
            .as_slice()
            .iter()
            .zip(xh.as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let den: f64 = xd.as_slice().iter().map(|a| a * a).sum();
        assert!((nrv(&x, &m).unwrap() - num / den).abs() <= 1e-12 * (num / den));
    }

    #[test]
    fn nrv_zero_norm_is_undefined() {
        let x = SparseTensor3::new((1, 1, 1), vec![(0, 0, 0, 0.0)]).unwrap();
        let m = CoupledModel::zeros((1, 1, 1, 1), 1);
        assert!(matches!(nrv(&x, &m), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn rmse_examples() {
        let (x, m) = planted(4);
        let exact = TestSet::from_tensor(&x);
        assert!(rmse(&exact, &m).unwrap() < 1e-12);

        let zero = CoupledModel::zeros((3, 4, 5, 2), 2);
        assert_eq!(rmse(&TestSet::new(vec![(0, 0, 0, 2.0)]), &zero).unwrap(), 2.0);
        assert!(rmse(&TestSet::new(vec![]), &zero).is_err());
    }

    #[test]
    fn rmse_matches_loop_and_ignores_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = CoupledModel::random((3, 4, 5, 2), 2, 1.0, &mut rng);
        let entries: Vec<_> = (0..20).map(|i| (i % 3, i % 4, i % 5, rng.random::<f64>())).collect();
        let mut sum = 0.0;
        for &(j, k, l, v) in &entries {
            let mut p = 0.0;
            for r in 0..2 {
                p += m.u1().get(j, r) * m.v().get(k, r) * m.w().get(l, r);
            }
            sum += (v - p) * (v - p);
        }
        let want = (sum / 20.0).sqrt();
        let mut rev = entries.clone();
        rev.reverse();
        assert!((rmse(&TestSet::new(entries), &m).unwrap() - want).abs() < 1e-14);
        assert!((rmse(&TestSet::new(rev), &m).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn pd_examples() {
        let orth = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(pattern_distinctiveness(&orth).unwrap(), 0.0);
        let dup = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        assert!((pattern_distinctiveness(&dup).unwrap() - 1.0).abs() < 1e-15);
        assert!(pattern_distinctiveness(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn pd_matches_pairwise_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = Matrix::from_vec(7, 3, (0..21).map(|_| rng.random()).collect()).unwrap();
        let mut sims = Vec::new();
        for q in 0..3 {
            for r in (q + 1)..3 {
                let (mut dot, mut nq, mut nr) = (0.0, 0.0, 0.0);
                for i in 0..7 {
                    dot += w.get(i, q) * w.get(i, r);
                    nq += w.get(i, q) * w.get(i, q);
                    nr += w.get(i, r) * w.get(i, r);
                }
                sims.push(dot / (nq.sqrt() * nr.sqrt()));
            }
        }
        let want = sims.iter().sum::<f64>() / 3.0;
        let got = pattern_distinctiveness(&w).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn recommendation_edge_cases() {
        let train = SparseTensor3::new((2, 2, 2), vec![(0, 0, 0, 1.0), (1, 1, 1, 1.0)]).unwrap();
        let m = CoupledModel::zeros((2, 2, 2, 1), 1);
        let test = TestSet::new(vec![(0, 1, 1, 1.0)]);
        assert!(precision_recall_f1(&train, &test, &m, 0).is_err());
        assert!(precision_recall_f1(&train, &TestSet::new(vec![]), &m, 1).is_err());
        // all scores tie at 0; ascending (k, l) picks (0, 1), not the relevant (1, 1)
        let s = precision_recall_f1(&train, &test, &m, 1).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn disjointness_check() {
        let train = SparseTensor3::new((2, 2, 2), vec![(0, 0, 0, 1.0)]).unwrap();
        assert!(TestSet::new(vec![(0, 0, 0, 2.0)]).check_disjoint(&train).is_err());
        assert!(TestSet::new(vec![(0, 0, 1, 2.0)]).check_disjoint(&train).is_ok());
    }
}
