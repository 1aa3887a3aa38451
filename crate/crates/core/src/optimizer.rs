//! The hierarchical-trisection optimizer: per iteration it sweeps the
//! superset views `Psi_k` from coarse to fine, divides each superset's
//! best cell when that cell beats every coarser winner of the sweep, and
//! evaluates the two fresh child centers (the middle child inherits).
//!
//! The same loop drives plain black-box optimization and, through the
//! [`Driver`] hooks, the policy-search planner.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geometry::{CellRef, DepthLedger, Domain};
use crate::objectives::error_metric;

/// Default adaptive width schedule.
pub const DEFAULT_W_SCHEDULE: [u32; 6] = [3, 4, 5, 6, 8, 30];

/// Local-bias width policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WMode {
    /// Constant width; `Fixed(1)` reduces the optimizer to plain
    /// depth-by-depth selection.
    Fixed(u32),
    /// Width walks an ordered schedule: one step up after an iteration
    /// that progressed, one step down otherwise, clamped to the ends.
    Adaptive(Vec<u32>),
}

impl Default for WMode {
    fn default() -> Self {
        WMode::Adaptive(DEFAULT_W_SCHEDULE.to_vec())
    }
}

/// Depth-cap schedule limiting how fine divided cells may get after `n`
/// divisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmaxSchedule {
    /// `h_max(n) = sqrt(n) - w`
    SqrtMinusW,
    /// `h_max(n) = w * sqrt(n) - w`
    WSqrtMinusW,
}

/// Depth cap after `n` divisions (the division counter starts at 1, so
/// `n >= 1`). Callers floor after dividing by `w`.
pub fn hmax(n: u64, w: u32, schedule: HmaxSchedule) -> f64 {
    let root = (n as f64).sqrt();
    match schedule {
        HmaxSchedule::SqrtMinusW => root - w as f64,
        HmaxSchedule::WSqrtMinusW => w as f64 * root - w as f64,
    }
}

/// Next 1-based index into the adaptive schedule: up on progress, down
/// otherwise, clamped to `[1, len]`.
pub fn adapt_w(j: usize, progressed: bool, len: usize) -> usize {
    debug_assert!((1..=len).contains(&j));
    if progressed {
        (j + 1).min(len)
    } else {
        j.saturating_sub(1).max(1)
    }
}

/// Divide only when the candidate strictly beats every coarser winner of
/// the current sweep.
pub fn division_gate(candidate_value: f64, val_max: f64) -> bool {
    candidate_value > val_max
}

/// Best cell of the superset `Psi_k`: maximum stored value, ties broken
/// by smaller depth, then smaller id. `None` when the superset is empty.
pub fn select_candidate(ledger: &DepthLedger, k: u32) -> Option<CellRef> {
    let mut best: Option<(CellRef, f64)> = None;
    // Scan order is (depth asc, id asc), so keeping the first strict
    // maximum realizes the tie-break.
    for (at, cell) in ledger.superset_members(k) {
        match best {
            Some((_, best_val)) if cell.value() <= best_val => {}
            _ => best = Some((at, cell.value())),
        }
    }
    best.map(|(at, _)| at)
}

/// Error target against a known optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetError {
    pub f_star: f64,
    pub tolerance: f64,
}

/// When to stop. At least one budget (evaluations, divisions, or wall
/// clock) must be set; the error target alone cannot bound a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopCondition {
    pub max_evals: Option<u64>,
    pub max_divisions: Option<u64>,
    pub target: Option<TargetError>,
    pub max_wall: Option<Duration>,
}

impl StopCondition {
    pub fn max_evals(n: u64) -> Self {
        Self {
            max_evals: Some(n),
            ..Self::default()
        }
    }

    pub fn max_divisions(n: u64) -> Self {
        Self {
            max_divisions: Some(n),
            ..Self::default()
        }
    }
}

/// Why a run returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TargetMet,
    EvalBudget,
    DivisionBudget,
    WallClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub w_mode: WMode,
    pub hmax_schedule: HmaxSchedule,
    pub stop: StopCondition,
}

impl OptimizerConfig {
    pub fn new(w_mode: WMode, hmax_schedule: HmaxSchedule, stop: StopCondition) -> Self {
        Self {
            w_mode,
            hmax_schedule,
            stop,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match &self.w_mode {
            WMode::Fixed(w) if *w >= 1 => {}
            WMode::Fixed(w) => {
                return Err(Error::InvalidConfig(format!("fixed w must be >= 1, got {w}")))
            }
            WMode::Adaptive(schedule) => {
                if schedule.is_empty() || schedule.iter().any(|&w| w == 0) {
                    return Err(Error::InvalidConfig(
                        "adaptive schedule must be non-empty and strictly positive".into(),
                    ));
                }
            }
        }
        if self.stop.max_evals.is_none()
            && self.stop.max_divisions.is_none()
            && self.stop.max_wall.is_none()
        {
            return Err(Error::InvalidConfig(
                "stopping condition needs an evaluation, division, or wall-clock budget".into(),
            ));
        }
        Ok(())
    }
}

/// One division event. `m_steps` is the cumulative simulated-step count
/// for planner runs (0 for plain objectives).
#[derive(Debug, Clone, PartialEq)]
pub struct DivisionRecord {
    pub n: u64,
    pub evals: u64,
    pub iteration: u64,
    pub k: u32,
    pub cell_id: u64,
    pub depth: u32,
    pub cell_value: f64,
    pub left_value: f64,
    pub right_value: f64,
    pub best_value: f64,
    pub w: u32,
    pub m_steps: u64,
    pub wall_ms: f64,
}

/// Per-iteration summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub divisions: u64,
    pub n: u64,
    pub evals: u64,
    pub best_value: f64,
    pub w: u32,
}

/// Outcome of a run: incumbent, counters, and the full trace.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best_point: Vec<f64>,
    pub best_unit_point: Vec<f64>,
    pub best_value: f64,
    pub n: u64,
    pub evals: u64,
    pub stop: StopReason,
    pub iterations: Vec<IterationRecord>,
    pub divisions: Vec<DivisionRecord>,
}

/// Evaluation hook the engine drives. Plain optimization only needs
/// `evaluate`; the planner also maintains its incumbent after each full
/// division and rewrites stored values at iteration end.
pub(crate) trait Driver {
    fn evaluate(&mut self, unit: &[f64], original: &[f64]) -> Result<f64>;
    fn on_root(&mut self, _value: f64) {}
    fn on_division(&mut self, _left: f64, _center: f64, _right: f64) {}
    fn on_iteration_end(&mut self, _ledger: &mut DepthLedger) {}
    /// Cumulative auxiliary step counter (planner rollout steps).
    fn steps(&self) -> u64 {
        0
    }
}

struct ClosureDriver<F> {
    f: F,
}

impl<F: FnMut(&[f64]) -> f64> Driver for ClosureDriver<F> {
    fn evaluate(&mut self, _unit: &[f64], original: &[f64]) -> Result<f64> {
        let value = (self.f)(original);
        if !value.is_finite() {
            return Err(Error::NonFiniteValue {
                point: original.to_vec(),
                value,
            });
        }
        Ok(value)
    }
}

/// Run the optimizer on a plain objective over `domain`.
pub fn run<F>(objective: F, domain: &Domain, config: &OptimizerConfig) -> Result<RunResult>
where
    F: FnMut(&[f64]) -> f64,
{
    run_engine(domain, config, &mut ClosureDriver { f: objective })
}

pub(crate) fn k_bound(alg_n: u64, h_upper: u32, h_plus: u32, w: u32, schedule: HmaxSchedule) -> i64 {
    let capped = hmax(alg_n, w, schedule).min(h_upper as f64);
    let floored = (capped / w as f64).floor() as i64;
    floored.max(h_plus as i64)
}

pub(crate) fn run_engine<D: Driver>(
    domain: &Domain,
    config: &OptimizerConfig,
    driver: &mut D,
) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let dim = domain.dim();

    let (mut w_index, schedule): (usize, Vec<u32>) = match &config.w_mode {
        WMode::Fixed(w) => (1, vec![*w]),
        WMode::Adaptive(s) => (1, s.clone()),
    };
    let adaptive = matches!(config.w_mode, WMode::Adaptive(_));

    // Evaluate the center of the normalized domain.
    let root_unit = vec![0.5; dim];
    let root_point = domain.denormalize(&root_unit)?;
    let root_value = driver.evaluate(&root_unit, &root_point)?;
    driver.on_root(root_value);

    let mut ledger = DepthLedger::with_root(dim, root_value, schedule[w_index - 1]);
    let mut n: u64 = 0; // divisions performed
    let mut alg_n: u64 = 1; // division counter feeding h_max, seeded at 1
    let mut evals: u64 = 1;
    let mut h_upper: u32 = 0;
    let mut best_value = root_value;
    let mut best_unit = root_unit;
    let mut best_point = root_point;
    let mut prev_iter_best = root_value;
    let mut prev_val_max = f64::NEG_INFINITY;
    let mut iterations = Vec::new();
    let mut divisions = Vec::new();

    let stop_check = |n: u64, evals: u64, best: f64, start: Instant| -> Option<StopReason> {
        if let Some(t) = config.stop.target {
            if error_metric(t.f_star, best) < t.tolerance {
                return Some(StopReason::TargetMet);
            }
        }
        if config.stop.max_evals.is_some_and(|m| evals >= m) {
            return Some(StopReason::EvalBudget);
        }
        if config.stop.max_divisions.is_some_and(|m| n >= m) {
            return Some(StopReason::DivisionBudget);
        }
        if config.stop.max_wall.is_some_and(|m| start.elapsed() >= m) {
            return Some(StopReason::WallClock);
        }
        None
    };

    let mut stop = stop_check(n, evals, best_value, start);
    let mut iteration: u64 = 0;

    while stop.is_none() {
        iteration += 1;
        let w = ledger.w();
        let mut val_max = f64::NEG_INFINITY;
        let mut iter_evals_max = f64::NEG_INFINITY;
        let mut h_plus = h_upper;
        let mut divisions_this_iter: u64 = 0;
        let mut k: u32 = 0;

        // The bound is re-evaluated every step: divisions advance the
        // counter and may raise h_upper, and the first division zeroes
        // h_plus.
        while (k as i64) <= k_bound(alg_n, h_upper, h_plus, w, config.hmax_schedule) {
            if let Some(at) = select_candidate(&ledger, k) {
                let cell_value = ledger.cell(at).value();
                if division_gate(cell_value, val_max) {
                    val_max = cell_value;
                    h_plus = 0;
                    let parent = ledger.take(at);
                    h_upper = h_upper.max(parent.depth() + 1);
                    alg_n += 1;
                    n += 1;

                    let refs = ledger.divide(&parent);
                    let mut side_values = [0.0; 2];
                    for (slot, &child) in [refs[0], refs[2]].iter().enumerate() {
                        let unit = ledger.cell(child).center().to_vec();
                        let point = domain.denormalize(&unit)?;
                        let value = driver.evaluate(&unit, &point)?;
                        ledger.cell_mut(child).set_value(value);
                        evals += 1;
                        side_values[slot] = value;
                        iter_evals_max = iter_evals_max.max(value);
                        if value > best_value {
                            best_value = value;
                            best_unit = unit;
                            best_point = point;
                        }
                    }
                    driver.on_division(side_values[0], parent.value(), side_values[1]);

                    divisions.push(DivisionRecord {
                        n,
                        evals,
                        iteration,
                        k,
                        cell_id: parent.id(),
                        depth: parent.depth(),
                        cell_value,
                        left_value: side_values[0],
                        right_value: side_values[1],
                        best_value,
                        w,
                        m_steps: driver.steps(),
                        wall_ms: start.elapsed().as_secs_f64() * 1e3,
                    });
                    divisions_this_iter += 1;

                    stop = stop_check(n, evals, best_value, start);
                    if stop.is_some() {
                        break;
                    }
                }
            }
            k += 1;
        }

        log::trace!(
            "iteration {iteration}: w={w} divisions={divisions_this_iter} n={n} best={best_value}"
        );

        if stop.is_none() {
            driver.on_iteration_end(&mut ledger);
        }
        iterations.push(IterationRecord {
            iteration,
            divisions: divisions_this_iter,
            n,
            evals,
            best_value,
            w,
        });
        if stop.is_none() && adaptive {
            let progressed = match std::env::var("LOGOOPT_PROGRESS").as_deref() {
                Ok("valmax") => val_max > prev_val_max,
                Ok("eps") => best_value > prev_iter_best + 1e-9 * prev_iter_best.abs().max(1e-12),
                Ok("eps4") => best_value > prev_iter_best + 1e-4 * prev_iter_best.abs().max(1e-12),
                Ok("newevals") => iter_evals_max >= prev_iter_best,
                _ => best_value > prev_iter_best,
            };
            w_index = adapt_w(w_index, progressed, schedule.len());
            ledger.set_w(schedule[w_index - 1]);
        }
        prev_iter_best = best_value;
        prev_val_max = val_max;
    }

    Ok(RunResult {
        best_point,
        best_unit_point: best_unit,
        best_value,
        n,
        evals,
        stop: stop.expect("loop exits only with a stop reason"),
        iterations,
        divisions,
    })
}
