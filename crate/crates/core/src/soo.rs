//! Simultaneous optimistic optimization: the depth-by-depth special case,
//! implemented directly over the plain depth sets `psi_h` rather than
//! through superset views. Kept as its own loop so the width-1 optimizer
//! can be checked against it trace-for-trace.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{CellRef, DepthLedger, Domain};
use crate::objectives::error_metric;
use crate::optimizer::{
    hmax, DivisionRecord, HmaxSchedule, IterationRecord, RunResult, StopCondition, StopReason,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SooConfig {
    pub hmax_schedule: HmaxSchedule,
    pub stop: StopCondition,
}

impl SooConfig {
    pub fn new(hmax_schedule: HmaxSchedule, stop: StopCondition) -> Self {
        Self {
            hmax_schedule,
            stop,
        }
    }
}

/// Best cell within the single depth set `psi_h` (maximum value, ties to
/// the smaller id).
fn best_in_depth_set(ledger: &DepthLedger, h: u32) -> Option<CellRef> {
    let mut best: Option<(usize, f64)> = None;
    for (index, cell) in ledger.depth_set(h).iter().enumerate() {
        match best {
            Some((_, v)) if cell.value() <= v => {}
            _ => best = Some((index, cell.value())),
        }
    }
    best.map(|(index, _)| CellRef { depth: h, index })
}

/// Run SOO on a plain objective over `domain`.
///
/// Per iteration, depths are scanned from coarse to fine; the best cell
/// of each non-empty `psi_h` is divided when its center value strictly
/// beats every division made earlier in the sweep. The depth cap
/// `h_max(n)` limits the sweep once a division has occurred; before the
/// first one, the sweep extends to the deepest occupied set so that every
/// iteration divides at least one cell.
pub fn run<F>(mut objective: F, domain: &Domain, config: &SooConfig) -> Result<RunResult>
where
    F: FnMut(&[f64]) -> f64,
{
    if config.stop.max_evals.is_none()
        && config.stop.max_divisions.is_none()
        && config.stop.max_wall.is_none()
    {
        return Err(Error::InvalidConfig(
            "stopping condition needs an evaluation, division, or wall-clock budget".into(),
        ));
    }
    let start = Instant::now();
    let dim = domain.dim();

    let mut eval = |unit: &[f64]| -> Result<(Vec<f64>, f64)> {
        let point = domain.denormalize(unit)?;
        let value = objective(&point);
        if !value.is_finite() {
            return Err(Error::NonFiniteValue {
                point: point.clone(),
                value,
            });
        }
        Ok((point, value))
    };

    let (root_point, root_value) = eval(&vec![0.5; dim])?;
    let mut ledger = DepthLedger::with_root(dim, root_value, 1);
    let mut n: u64 = 0;
    let mut alg_n: u64 = 1;
    let mut evals: u64 = 1;
    let mut h_upper: u32 = 0;
    let mut best_value = root_value;
    let mut best_unit = vec![0.5; dim];
    let mut best_point = root_point;
    let mut iterations = Vec::new();
    let mut divisions = Vec::new();

    let stop_check = |n: u64, evals: u64, best: f64| -> Option<StopReason> {
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

    let mut stop = stop_check(n, evals, best_value);
    let mut iteration: u64 = 0;

    while stop.is_none() {
        iteration += 1;
        let mut val_max = f64::NEG_INFINITY;
        let mut h_plus = h_upper;
        let mut divisions_this_iter: u64 = 0;
        let mut h: u32 = 0;

        loop {
            let cap = hmax(alg_n, 1, config.hmax_schedule).min(h_upper as f64);
            let bound = (cap.floor() as i64).max(h_plus as i64);
            if (h as i64) > bound {
                break;
            }
            if let Some(at) = best_in_depth_set(&ledger, h) {
                let cell_value = ledger.cell(at).value();
                if cell_value > val_max {
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
                        let (point, value) = eval(&unit)?;
                        ledger.cell_mut(child).set_value(value);
                        evals += 1;
                        side_values[slot] = value;
                        if value > best_value {
                            best_value = value;
                            best_unit = unit;
                            best_point = point;
                        }
                    }

                    divisions.push(DivisionRecord {
                        n,
                        evals,
                        iteration,
                        k: h,
                        cell_id: parent.id(),
                        depth: parent.depth(),
                        cell_value,
                        left_value: side_values[0],
                        right_value: side_values[1],
                        best_value,
                        w: 1,
                        m_steps: 0,
                        wall_ms: start.elapsed().as_secs_f64() * 1e3,
                    });
                    divisions_this_iter += 1;

                    stop = stop_check(n, evals, best_value);
                    if stop.is_some() {
                        break;
                    }
                }
            }
            h += 1;
        }

        iterations.push(IterationRecord {
            iteration,
            divisions: divisions_this_iter,
            n,
            evals,
            best_value,
            w: 1,
        });
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives;
    use crate::optimizer::{self, OptimizerConfig, WMode};

    /// The width-1 optimizer and this implementation must emit identical
    /// division events.
    #[test]
    fn width_one_equivalence_on_sin1() {
        let spec = objectives::lookup("sin1").unwrap();
        let stop = StopCondition::max_divisions(500);
        let soo_result = run(
            |x| spec.evaluate(x),
            spec.domain(),
            &SooConfig::new(HmaxSchedule::WSqrtMinusW, stop.clone()),
        )
        .unwrap();
        let logo_result = optimizer::run(
            |x| spec.evaluate(x),
            spec.domain(),
            &OptimizerConfig::new(WMode::Fixed(1), HmaxSchedule::WSqrtMinusW, stop),
        )
        .unwrap();
        assert_eq!(soo_result.divisions.len(), logo_result.divisions.len());
        for (a, b) in soo_result.divisions.iter().zip(&logo_result.divisions) {
            assert_eq!(a.cell_id, b.cell_id);
            assert_eq!(a.depth, b.depth);
            assert_eq!(a.k, b.k);
            assert_eq!(a.cell_value.to_bits(), b.cell_value.to_bits());
            assert_eq!(a.left_value.to_bits(), b.left_value.to_bits());
            assert_eq!(a.right_value.to_bits(), b.right_value.to_bits());
            assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        }
        assert_eq!(soo_result.best_value.to_bits(), logo_result.best_value.to_bits());
    }

    #[test]
    fn every_iteration_divides_at_least_once() {
        let spec = objectives::lookup("sin2").unwrap();
        let result = run(
            |x| spec.evaluate(x),
            spec.domain(),
            &SooConfig::new(HmaxSchedule::WSqrtMinusW, StopCondition::max_divisions(200)),
        )
        .unwrap();
        for it in &result.iterations {
            assert!(it.divisions >= 1);
        }
        assert_eq!(result.evals, 2 * result.n + 1);
    }
}
