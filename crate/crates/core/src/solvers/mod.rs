//! Factorization solvers and the shared iteration driver.
//!
//! Every solver updates the factors in the order `U1, V, W, U2` within an
//! outer iteration and records one [`IterTrace`] per iteration, plus an
//! initial record (iteration 0) for the random starting point.

mod als;
mod ccdpp;
mod cutcd;
mod gcd;
mod selection;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{gram, Matrix, SideMatrix};
use crate::metrics;
use crate::model::{objective, objective_sc, CoupledModel, Factor, ScPenalty};
use crate::tensor::SparseTensor3;

pub use als::fit_als;
pub use ccdpp::fit_ccdpp;
pub use cutcd::{cutcd_update_factor, fit_cutcd, fit_cutcd_sc};
pub use gcd::{fit_gcd, gcd_update_factor};
pub use selection::{importance_column, normalize_column, select_cutoff, ColumnSelection, SelectionMask};

/// Stop a greedy row once the best attainable decrease falls to this level.
pub const GCD_IMPORTANCE_FLOOR: f64 = 1e-12;

/// Ridge added to the normal equations of the ALS baseline.
pub const ALS_RIDGE: f64 = 1e-10;

/// Threshold rule applied to a column's normalized importances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffRule {
    /// Cut-off at the column mean.
    Mean,
    /// Cut-off at a fixed level in `[0, 1]`.
    Fixed(f64),
}

impl FromStr for CutoffRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mean" {
            return Ok(CutoffRule::Mean);
        }
        if let Some(c) = s.strip_prefix("fixed:") {
            let c: f64 = c
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad cut-off value in {s:?}")))?;
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidArgument(format!("fixed cut-off {c} outside [0, 1]")));
            }
            return Ok(CutoffRule::Fixed(c));
        }
        Err(Error::InvalidArgument(format!("unknown cut-off rule {s:?}")))
    }
}

impl fmt::Display for CutoffRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutoffRule::Mean => f.write_str("mean"),
            CutoffRule::Fixed(c) => write!(f, "fixed:{c}"),
        }
    }
}

/// Available solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    CutCd,
    CutCdSc,
    Gcd,
    CcdPp,
    Als,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::CutCd,
        SolverKind::CutCdSc,
        SolverKind::Gcd,
        SolverKind::CcdPp,
        SolverKind::Als,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::CutCd => "cutcd",
            SolverKind::CutCdSc => "cutcd-sc",
            SolverKind::Gcd => "gcd",
            SolverKind::CcdPp => "ccdpp",
            SolverKind::Als => "als",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown solver {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Relative objective change below which iteration stops; 0 disables.
    pub tol: f64,
    pub seed: u64,
    pub cutoff_rule: CutoffRule,
    /// L2,1 weight; only the sparse Cut-CD variant reads it.
    pub lambda: f64,
    pub ccd_inner_iters: usize,
    /// Greedy updates allowed per row in GCD; `None` means the rank.
    pub gcd_max_inner: Option<usize>,
    /// Initial factors are uniform in `[0, init_scale)`.
    pub init_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank: 10,
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
            cutoff_rule: CutoffRule::Mean,
            lambda: 0.0,
            ccd_inner_iters: 1,
            gcd_max_inner: None,
            init_scale: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_rank(rank: usize) -> Self {
        Self {
            rank,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.rank == 0 {
            return bad("rank must be >= 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be >= 0, got {}", self.tol));
        }
        if let CutoffRule::Fixed(c) = self.cutoff_rule {
            if !(0.0..=1.0).contains(&c) {
                return bad(format!("fixed cut-off {c} outside [0, 1]"));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.ccd_inner_iters == 0 {
            return bad("ccd_inner_iters must be >= 1".into());
        }
        if self.gcd_max_inner == Some(0) {
            return bad("gcd_max_inner must be >= 1".into());
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be > 0, got {}", self.init_scale));
        }
        Ok(())
    }

    pub(crate) fn gcd_inner(&self) -> usize {
        self.gcd_max_inner.unwrap_or(self.rank)
    }
}

/// Element and gradient update counts, per factor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub element_updates: [u64; 4],
    pub gradient_updates: [u64; 4],
}

impl Counters {
    pub fn total_elements(&self) -> u64 {
        self.element_updates.iter().sum()
    }

    pub fn total_gradients(&self) -> u64 {
        self.gradient_updates.iter().sum()
    }

    #[inline]
    pub(crate) fn record(&mut self, f: Factor, elements: u64, gradients: u64) {
        self.element_updates[f.index()] += elements;
        self.gradient_updates[f.index()] += gradients;
    }
}

/// One row of a solver's convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterTrace {
    pub iter: usize,
    /// Objective being minimized (with the L2,1 term for the sparse variant).
    pub objective: f64,
    pub nrv: f64,
    /// Solver time of this iteration, excluding objective and NRV evaluation.
    pub wall_seconds: f64,
    /// Part of `wall_seconds` spent in MTTKRP and side-matrix products.
    pub mttkrp_seconds: f64,
    /// Remainder of `wall_seconds`: element updates and bookkeeping.
    pub update_seconds: f64,
    pub element_updates: u64,
    pub gradient_updates: u64,
    pub per_factor: Counters,
}

/// A fitted model and its per-iteration trace.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: CoupledModel,
    pub traces: Vec<IterTrace>,
}

impl Fit {
    pub fn final_trace(&self) -> &IterTrace {
        self.traces.last().expect("trace holds the initial record")
    }
}

/// Runs the named solver.
pub fn fit(kind: SolverKind, x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig) -> Result<Fit> {
    match kind {
        SolverKind::CutCd => fit_cutcd(x, y, cfg),
        SolverKind::CutCdSc => fit_cutcd_sc(x, y, cfg),
        SolverKind::Gcd => fit_gcd(x, y, cfg),
        SolverKind::CcdPp => fit_ccdpp(x, y, cfg),
        SolverKind::Als => fit_als(x, y, cfg),
    }
}

/// Runs the named solver starting from `init` instead of a random model.
/// `init` must match the data's shapes and `cfg.rank`.
pub fn fit_from(
    kind: SolverKind,
    x: &SparseTensor3,
    y: &SideMatrix,
    cfg: &SolverConfig,
    init: CoupledModel,
) -> Result<Fit> {
    let init = Some(init);
    match kind {
        SolverKind::CutCd => cutcd::run(x, y, cfg, init, None, "cutcd"),
        SolverKind::CutCdSc => cutcd::run(x, y, cfg, init, cutcd::sc_penalty(cfg)?, "cutcd-sc"),
        SolverKind::Gcd => gcd::run(x, y, cfg, init),
        SolverKind::CcdPp => ccdpp::run(x, y, cfg, init),
        SolverKind::Als => als::run(x, y, cfg, init),
    }
}

/// Work accounting for one outer iteration.
#[derive(Debug, Default)]
pub(crate) struct IterStats {
    pub counters: Counters,
    pub mttkrp: Duration,
}

impl IterStats {
    /// Runs `f`, charging its time to the MTTKRP timer.
    #[inline]
    pub fn time_mttkrp<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.mttkrp += t.elapsed();
        out
    }
}

/// State shared by the solver loops: the model and the Gram matrices of its
/// four factors, kept current as factors change.
pub(crate) struct Workspace {
    pub model: CoupledModel,
    pub grams: [Matrix; 4],
}

impl Workspace {
    fn new(model: CoupledModel) -> Self {
        let grams = Factor::ALL.map(|f| gram(model.factor(f)));
        Self { model, grams }
    }

    pub fn refresh_gram(&mut self, f: Factor) {
        self.grams[f.index()] = gram(self.model.factor(f));
    }
}

pub(crate) fn initial_model(x: &SparseTensor3, y: &SideMatrix, cfg: &SolverConfig) -> Result<CoupledModel> {
    cfg.validate()?;
    let (j, k, l) = x.dims();
    if y.rows() != j {
        return Err(Error::Dimension(format!(
            "side matrix has {} rows but the tensor's first mode has length {j}",
            y.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(CoupledModel::random(
        (j, k, l, y.cols()),
        cfg.rank,
        cfg.init_scale,
        &mut rng,
    ))
}

/// Outer loop shared by all solvers: records the trace, checks for
/// non-finite objectives and applies the stopping rule.
pub(crate) fn drive<F>(
    x: &SparseTensor3,
    y: &SideMatrix,
    cfg: &SolverConfig,
    init: Option<CoupledModel>,
    penalty: Option<ScPenalty>,
    label: &str,
    mut iterate: F,
) -> Result<Fit>
where
    F: FnMut(&mut Workspace, &mut IterStats) -> Result<()>,
{
    let model = match init {
        Some(m) => {
            cfg.validate()?;
            m.check_data(x, y)?;
            if m.rank() != cfg.rank {
                return Err(Error::Dimension(format!(
                    "initial model has rank {} but the configuration asks for {}",
                    m.rank(),
                    cfg.rank
                )));
            }
            m
        }
        None => initial_model(x, y, cfg)?,
    };
    let eval = |m: &CoupledModel| -> Result<f64> {
        match &penalty {
            Some(p) => objective_sc(x, y, m, p),
            None => objective(x, y, m),
        }
    };
    let nrv_of = |m: &CoupledModel| metrics::nrv(x, m).unwrap_or(f64::NAN);

    let mut ws = Workspace::new(model);
    let f0 = eval(&ws.model)?;
    if !f0.is_finite() {
        return Err(Error::Numerical {
            iter: 0,
            msg: format!("initial objective is {f0}"),
        });
    }
    let mut traces = vec![IterTrace {
        iter: 0,
        objective: f0,
        nrv: nrv_of(&ws.model),
        wall_seconds: 0.0,
        mttkrp_seconds: 0.0,
        update_seconds: 0.0,
        element_updates: 0,
        gradient_updates: 0,
        per_factor: Counters::default(),
    }];
    let mut prev = f0;
    for iter in 1..=cfg.max_iters {
        let mut stats = IterStats::default();
        let start = Instant::now();
        iterate(&mut ws, &mut stats).map_err(|e| match e {
            Error::Numerical { msg, .. } => Error::Numerical { iter, msg },
            other => other,
        })?;
        let wall = start.elapsed().as_secs_f64();
        let f = eval(&ws.model)?;
        if !f.is_finite() {
            return Err(Error::Numerical {
                iter,
                msg: format!("objective is {f}"),
            });
        }
        let mttkrp = stats.mttkrp.as_secs_f64();
        traces.push(IterTrace {
            iter,
            objective: f,
            nrv: nrv_of(&ws.model),
            wall_seconds: wall,
            mttkrp_seconds: mttkrp,
            update_seconds: (wall - mttkrp).max(0.0),
            element_updates: stats.counters.total_elements(),
            gradient_updates: stats.counters.total_gradients(),
            per_factor: stats.counters,
        });
        log::debug!(
            "{label} iter {iter}: objective {f:.6e} elements {}",
            stats.counters.total_elements()
        );
        if f > prev + 1e-9 && label != "als" {
            log::info!("{label} iter {iter}: objective rose from {prev:e} to {f:e}");
        }
        let rel = (prev - f).abs() / prev.max(1e-30);
        prev = f;
        if rel < cfg.tol {
            break;
        }
    }
    Ok(Fit {
        model: ws.model,
        traces,
    })
}
