//! Randomized Kaczmarz (RK) and its variants for unregularized least
//! squares: tail-averaged RK (TARK), TARK with a doubling burn-in,
//! underrelaxed RK (RKU) and averaged RK (RKA).
//!
//! Runners take a [`RowOracle`], a starting point and a final time `t`.
//! An RK-type run with final time `t` performs `t − 1` steps and so
//! accesses `t − 1` rows.

mod averager;
mod bounds;

pub use averager::{doubling_burn_in, AveragingMode, CompensatedSum, TailAverager};
pub use bounds::{bound_theorem1, bound_theorem2, bound_theorem3};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rows::RowOracle;
use crate::sampling::RngStream;

/// Receives snapshots of the current estimate during a run.
pub trait TraceSink {
    /// Smallest row-access count still of interest, `None` when done.
    fn next_checkpoint(&self) -> Option<u64>;

    /// Called once `rows` reaches or passes `next_checkpoint()`.
    fn record(&mut self, rows: u64, estimate: &[f64]);
}

/// Sink that records nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoTrace;

impl TraceSink for NoTrace {
    fn next_checkpoint(&self) -> Option<u64> {
        None
    }

    fn record(&mut self, _rows: u64, _estimate: &[f64]) {}
}

/// Stores snapshots at a sorted grid of row counts.
#[derive(Clone, Debug, Default)]
pub struct CheckpointRecorder {
    grid: Vec<u64>,
    cursor: usize,
    snapshots: Vec<(u64, Vec<f64>)>,
}

impl CheckpointRecorder {
    pub fn new(mut grid: Vec<u64>) -> Self {
        grid.sort_unstable();
        grid.dedup();
        Self {
            grid,
            cursor: 0,
            snapshots: Vec::new(),
        }
    }

    pub fn snapshots(&self) -> &[(u64, Vec<f64>)] {
        &self.snapshots
    }

    pub fn into_snapshots(self) -> Vec<(u64, Vec<f64>)> {
        self.snapshots
    }
}

impl TraceSink for CheckpointRecorder {
    fn next_checkpoint(&self) -> Option<u64> {
        self.grid.get(self.cursor).copied()
    }

    fn record(&mut self, rows: u64, estimate: &[f64]) {
        while self.cursor < self.grid.len() && self.grid[self.cursor] <= rows {
            self.cursor += 1;
        }
        if self.snapshots.last().map(|(r, _)| *r) != Some(rows) {
            self.snapshots.push((rows, estimate.to_vec()));
        }
    }
}

/// Calls a closure after every row access.
pub struct EveryStep<F>(pub F);

impl<F: FnMut(u64, &[f64])> TraceSink for EveryStep<F> {
    fn next_checkpoint(&self) -> Option<u64> {
        Some(0)
    }

    fn record(&mut self, rows: u64, estimate: &[f64]) {
        (self.0)(rows, estimate)
    }
}

#[inline]
fn due(trace: &dyn TraceSink, rows: u64) -> bool {
    matches!(trace.next_checkpoint(), Some(c) if c <= rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk,
    Tark,
    TarkDoubling,
    Rku,
    Rka,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk => "rk",
            Method::Tark => "tark",
            Method::TarkDoubling => "tark_doubling",
            Method::Rku => "rku",
            Method::Rka => "rka",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rk" => Ok(Method::Rk),
            "tark" => Ok(Method::Tark),
            "tark_doubling" => Ok(Method::TarkDoubling),
            "rku" => Ok(Method::Rku),
            "rka" => Ok(Method::Rka),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Method plus hyperparameters for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Final time; the run accesses `t − 1` rows.
    pub t: u64,
    /// Burn-in; `None` means `⌊t/4⌋`.
    pub t_b: Option<u64>,
    /// RKU relaxation; `None` means `1/√(t − 1)`.
    pub omega: Option<f64>,
    /// RKA thread count.
    pub q: u64,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(method: Method, t: u64, seed: u64) -> Self {
        Self {
            method,
            t,
            t_b: None,
            omega: None,
            q: 1,
            seed,
        }
    }

    pub fn burn_in(&self) -> u64 {
        self.t_b.unwrap_or(self.t / 4)
    }

    pub fn omega(&self) -> f64 {
        self.omega
            .unwrap_or_else(|| 1.0 / ((self.t.saturating_sub(1)).max(1) as f64).sqrt())
    }

    pub fn rows_accessed(&self) -> u64 {
        self.t.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 1 {
            return Err(Error::InvalidParameter("t must be at least 1".into()));
        }
        match self.method {
            Method::Tark if self.burn_in() >= self.t => Err(Error::InvalidParameter(format!(
                "burn-in {} must be below t = {}",
                self.burn_in(),
                self.t
            ))),
            Method::TarkDoubling if self.t < 2 => Err(Error::InvalidParameter(
                "doubling burn-in needs t >= 2".into(),
            )),
            Method::Rku => {
                let w = self.omega();
                if w > 0.0 && w <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("omega {w} outside (0, 1]")))
                }
            }
            Method::Rka => {
                if self.q == 0 {
                    return Err(Error::InvalidParameter("q must be at least 1".into()));
                }
                if self.rows_accessed() % self.q != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "row budget {} is not a multiple of q = {}",
                        self.rows_accessed(),
                        self.q
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Runs `config` from `x0` with a stream seeded from `config.seed`.
pub fn solve<O: RowOracle + ?Sized>(
    config: &SolverConfig,
    oracle: &O,
    x0: &[f64],
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = RngStream::new(config.seed);
    match config.method {
        Method::Rk => run_rk(oracle, x0, config.t, &mut rng, trace),
        Method::Tark => run_tark(oracle, x0, config.burn_in(), config.t, &mut rng, trace),
        Method::TarkDoubling => run_tark_doubling(oracle, x0, config.t, &mut rng, trace),
        Method::Rku => run_rku(oracle, x0, config.t, config.omega(), &mut rng, trace),
        Method::Rka => run_rka(
            oracle,
            x0,
            config.rows_accessed() / config.q,
            config.q,
            &mut rng,
            trace,
        ),
    }
}

/// `x ← x + ω (b − aᵀx)/‖a‖² a`
#[inline]
pub(crate) fn relaxed_project(x: &mut [f64], row: &[f64], b: f64, sq_norm: f64, omega: f64) {
    let coef = omega * ((b - dot(row, x)) / sq_norm);
    for (xi, ai) in x.iter_mut().zip(row) {
        *xi += coef * ai;
    }
}

/// One RK projection onto `{x : rowᵀx = b_i}`.
pub fn rk_step(x: &[f64], row: &[f64], b_i: f64) -> Result<Vec<f64>> {
    if x.len() != row.len() {
        return Err(Error::Dimension(format!(
            "iterate has length {} but row has length {}",
            x.len(),
            row.len()
        )));
    }
    let sq = dot(row, row);
    if sq == 0.0 {
        return Err(Error::InvalidParameter("zero row in projection".into()));
    }
    if !sq.is_finite() || !b_i.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut out = x.to_vec();
    relaxed_project(&mut out, row, b_i, sq, 1.0);
    Ok(out)
}

pub(crate) fn check_start<O: RowOracle + ?Sized>(oracle: &O, x0: &[f64]) -> Result<()> {
    if x0.len() != oracle.dim() {
        return Err(Error::Dimension(format!(
            "x0 has length {} but rows have length {}",
            x0.len(),
            oracle.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// RK with final time `t`: iterates `x_1 .. x_{t−1}`, returns `x_{t−1}`.
pub fn run_rk<O: RowOracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    t: u64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    run_rku_schedule(oracle, x0, t, |_| 1.0, rng, trace)
}

/// RK with a constant relaxation `ω ∈ (0, 1]`.
pub fn run_rku<O: RowOracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    t: u64,
    omega: f64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidParameter(format!("omega {omega} outside (0, 1]")));
    }
    run_rku_schedule(oracle, x0, t, |_| omega, rng, trace)
}

/// RK whose step `s` (0-based) uses relaxation `schedule(s)`.
pub fn run_rku_schedule<O, F>(
    oracle: &O,
    x0: &[f64],
    t: u64,
    schedule: F,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>>
where
    O: RowOracle + ?Sized,
    F: Fn(u64) -> f64,
{
    check_start(oracle, x0)?;
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; oracle.dim()];
    if due(trace, 0) {
        trace.record(0, &x);
    }
    for s in 0..t.saturating_sub(1) {
        let row = oracle.draw(rng, &mut scratch);
        relaxed_project(&mut x, row.features, row.response, row.sq_norm, schedule(s));
        if due(trace, s + 1) {
            trace.record(s + 1, &x);
        }
    }
    Ok(x)
}

fn run_averaged<O: RowOracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    t: u64,
    mode: AveragingMode,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    check_start(oracle, x0)?;
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; oracle.dim()];
    let mut avg = TailAverager::new(mode, x.len());
    avg.push(&x);
    let snapshot = |avg: &TailAverager, x: &[f64]| avg.estimate().unwrap_or_else(|| x.to_vec());
    if due(trace, 0) {
        trace.record(0, &snapshot(&avg, &x));
    }
    for s in 0..t - 1 {
        let row = oracle.draw(rng, &mut scratch);
        relaxed_project(&mut x, row.features, row.response, row.sq_norm, 1.0);
        avg.push(&x);
        if due(trace, s + 1) {
            trace.record(s + 1, &snapshot(&avg, &x));
        }
    }
    Ok(avg.estimate().expect("tail is nonempty when t_b < t"))
}

/// TARK: mean of the RK iterates `x_{t_b} .. x_{t−1}`.
pub fn run_tark<O: RowOracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    t_b: u64,
    t: u64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    if t_b >= t {
        return Err(Error::InvalidParameter(format!(
            "burn-in {t_b} must be below t = {t}"
        )));
    }
    run_averaged(oracle, x0, t, AveragingMode::FixedBurnIn(t_b), rng, trace)
}

/// TARK with burn-in `2^{⌊log₂ t⌋ − 1}`, keeping two running sums.
pub fn run_tark_doubling<O: RowOracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    t: u64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    if t < 2 {
        return Err(Error::InvalidParameter("doubling burn-in needs t >= 2".into()));
    }
    run_averaged(oracle, x0, t, AveragingMode::Doubling, rng, trace)
}

/// RKA: `t_outer` outer steps, each averaging `q` one-step RK updates
/// taken from the same iterate. Accesses `t_outer · q` rows.
pub fn run_rka<O: RowOracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    t_outer: u64,
    q: u64,
    rng: &mut RngStream,
    trace: &mut dyn TraceSink,
) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    check_start(oracle, x0)?;
    let d = oracle.dim();
    let mut x = x0.to_vec();
    let mut scratch = vec![0.0; d];
    let mut update = vec![0.0; d];
    let qf = q as f64;
    if due(trace, 0) {
        trace.record(0, &x);
    }
    for k in 0..t_outer {
        update.iter_mut().for_each(|u| *u = 0.0);
        for _ in 0..q {
            let row = oracle.draw(rng, &mut scratch);
            let coef = (row.response - dot(row.features, &x)) / row.sq_norm;
            for (u, a) in update.iter_mut().zip(row.features) {
                *u += coef * a;
            }
        }
        for (xi, u) in x.iter_mut().zip(&update) {
            *xi += u / qf;
        }
        let rows = (k + 1) * q;
        if due(trace, rows) {
            trace.record(rows, &x);
        }
    }
    Ok(x)
}
