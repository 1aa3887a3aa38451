//! Master/worker runtime: the master owns Select, Divide, and Group;
//! workers own Evaluate. Fresh cells enter the ledger with their parent's
//! center value standing in (the root with a declared worst value), so
//! the master keeps selecting while rollouts are still in flight; each
//! provisional is overwritten bit-exactly when its worker commits.
//!
//! Communication is two ordered in-process streams (tasks down, results
//! up). The master applies commits in dispatch order, which makes a run
//! a pure function of its configuration — including worker count — and
//! makes a single-worker run reproduce the serial planner exactly.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::time::Instant;

use crossbeam_channel::{unbounded, RecvTimeoutError};

use crate::error::{Error, Result};
use crate::geometry::{DepthLedger, Domain};
use crate::objectives::error_metric;
use crate::optimizer::{
    division_gate, k_bound, select_candidate, DivisionRecord, IterationRecord, OptimizerConfig,
    RunResult, StopReason, WMode,
};
use crate::planner::{evaluate_policy_pruned, DeterministicMdp, PolicySpace};

/// Worker-count and seeding knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelConfig {
    pub workers: usize,
    /// Provisional value of the root before its evaluation commits; the
    /// declared worst value, `-inf` when no such bound is known.
    pub worst_value: f64,
}

impl ParallelConfig {
    pub fn new(workers: usize) -> Self {
        Self {
            workers,
            worst_value: f64::NEG_INFINITY,
        }
    }
}

/// One evaluation order sent to a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub task_id: u64,
    /// Cell the task was created for (its center point).
    pub cell_id: u64,
    pub unit: Vec<f64>,
    pub point: Vec<f64>,
    /// Value standing in for the point until the commit.
    pub provisional: f64,
    /// Pruning threshold `v_plus - L` snapshotted at creation, so both
    /// children of one division share the threshold their division saw.
    pub cutoff: f64,
}

/// A finished evaluation travelling back up.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerResult {
    pub task_id: u64,
    pub value: f64,
    pub steps: u64,
    pub pruned: bool,
}

/// Per-task log row kept for offline recomputation.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLogRow {
    pub task_id: u64,
    pub cell_id: u64,
    pub point: Vec<f64>,
    pub provisional: f64,
    pub cutoff: f64,
    pub value: f64,
    pub steps: u64,
    pub pruned: bool,
}

/// Parallel run output; `result` mirrors the serial layout.
#[derive(Debug, Clone)]
pub struct ParallelOutcome {
    pub result: RunResult,
    pub v_plus: f64,
    pub total_steps: u64,
    pub max_eval_steps: u64,
    pub task_log: Vec<TaskLogRow>,
}

/// What workers run. Implementations must be pure: the same point and
/// cutoff always produce the same value.
pub trait WorkerEval: Send + Sync {
    /// Returns (value, simulated steps, pruned).
    fn evaluate(&self, point: &[f64], cutoff: f64) -> Result<(f64, u64, bool)>;
}

/// Policy rollout on a deterministic MDP, cut at `cutoff`.
pub struct MdpEval {
    pub mdp: DeterministicMdp,
    pub space: PolicySpace,
}

impl WorkerEval for MdpEval {
    fn evaluate(&self, point: &[f64], cutoff: f64) -> Result<(f64, u64, bool)> {
        let policy = self.space.instantiate(point);
        let out = evaluate_policy_pruned(&self.mdp, &policy, cutoff, 0.0)?;
        Ok((out.value, out.steps_used, out.pruned))
    }
}

/// Plain objective; the cutoff is ignored and every call counts one step.
pub struct FnEval<F>(pub F);

impl<F> WorkerEval for FnEval<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn evaluate(&self, point: &[f64], _cutoff: f64) -> Result<(f64, u64, bool)> {
        let value = (self.0)(point);
        if !value.is_finite() {
            return Err(Error::NonFiniteValue {
                point: point.to_vec(),
                value,
            });
        }
        Ok((value, 1, false))
    }
}

/// Parallel planner run over a policy space.
pub fn plogo_op_run(
    mdp: &DeterministicMdp,
    space: &PolicySpace,
    config: &OptimizerConfig,
    l: f64,
    par: &ParallelConfig,
) -> Result<ParallelOutcome> {
    let eval = MdpEval {
        mdp: mdp.clone(),
        space: space.clone(),
    };
    run_parallel(&eval, space.domain(), config, l, par)
}

/// Generic master/worker run of `eval` over `domain`.
pub fn run_parallel(
    eval: &dyn WorkerEval,
    domain: &Domain,
    config: &OptimizerConfig,
    l: f64,
    par: &ParallelConfig,
) -> Result<ParallelOutcome> {
    if par.workers == 0 {
        return Err(Error::InvalidConfig("worker count must be at least 1".into()));
    }
    if l.is_nan() || l < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "pruning margin must satisfy L >= 0, got {l}"
        )));
    }
    let mut master = Master::new(domain.clone(), config.clone(), l, par.worst_value)?;

    std::thread::scope(|scope| {
        let (task_tx, task_rx) = unbounded::<EvalTask>();
        let (result_tx, result_rx) = unbounded::<Result<WorkerResult>>();

        for _ in 0..par.workers {
            let rx = task_rx.clone();
            let tx = result_tx.clone();
            scope.spawn(move || {
                while let Ok(task) = rx.recv() {
                    let sent = match eval.evaluate(&task.point, task.cutoff) {
                        Ok((value, steps, pruned)) => tx.send(Ok(WorkerResult {
                            task_id: task.task_id,
                            value,
                            steps,
                            pruned,
                        })),
                        Err(e) => {
                            let _ = tx.send(Err(e));
                            break;
                        }
                    };
                    if sent.is_err() {
                        break;
                    }
                }
            });
        }
        drop(task_rx);
        drop(result_tx);

        let run = (|| -> Result<()> {
            loop {
                for task in master.fill(par.workers)? {
                    // A send can only fail once every worker has died, and
                    // that surfaces as an error result below.
                    let _ = task_tx.send(task);
                }
                if master.in_flight == 0 {
                    return Ok(());
                }
                let msg = if master.wall_budget().is_some() {
                    match result_rx.recv_timeout(std::time::Duration::from_millis(2)) {
                        Ok(msg) => msg,
                        Err(RecvTimeoutError::Timeout) => {
                            master.check_wall();
                            continue;
                        }
                        Err(RecvTimeoutError::Disconnected) => {
                            return Err(Error::Protocol("workers exited early".into()))
                        }
                    }
                } else {
                    result_rx
                        .recv()
                        .map_err(|_| Error::Protocol("workers exited early".into()))?
                };
                master.receive(msg?)?;
            }
        })();
        drop(task_tx); // lets idle workers exit
        run
    })?;

    master.into_outcome()
}

enum Advance {
    Divided,
    Stalled,
}

/// The selection state machine. Kept free of any channel so the commit
/// protocol and the single-worker equivalence can be driven directly.
struct Master {
    domain: Domain,
    config: OptimizerConfig,
    schedule: Vec<u32>,
    adaptive: bool,
    w_index: usize,
    l: f64,

    ledger: DepthLedger,
    start: Instant,

    // Sweep cursor.
    iteration: u64,
    k: u32,
    val_max: f64,
    h_plus: u32,
    divisions_this_iter: u64,

    // Counters mirroring the serial loop.
    n: u64,
    alg_n: u64,
    h_upper: u32,
    commits: u64,
    total_steps: u64,
    max_eval_steps: u64,
    v_plus: f64,
    best_value: f64,
    best_unit: Vec<f64>,
    best_point: Vec<f64>,
    prev_iter_best: f64,
    stop: Option<StopReason>,

    // Task plumbing.
    next_task_id: u64,
    next_commit: u64,
    in_flight: usize,
    pending: VecDeque<EvalTask>,
    reorder: BTreeMap<u64, WorkerResult>,
    /// task id -> cell currently holding that task's center.
    open_tasks: HashMap<u64, u64>,
    /// Inverse of `open_tasks` for retargeting on division.
    cell_task: HashMap<u64, u64>,
    task_info: HashMap<u64, TaskInfo>,
    /// task id -> (division record slot, side 0 = left / 1 = right).
    task_meta: HashMap<u64, (usize, u8)>,

    divisions: Vec<DivisionRecord>,
    open_records: HashMap<usize, OpenRecord>,
    iterations: Vec<IterationRecord>,
    task_log: Vec<TaskLogRow>,
}

struct TaskInfo {
    cell_id: u64,
    unit: Vec<f64>,
    point: Vec<f64>,
    provisional: f64,
    cutoff: f64,
}

struct OpenRecord {
    record: DivisionRecord,
    left: Option<f64>,
    right: Option<f64>,
}

impl Master {
    fn new(domain: Domain, config: OptimizerConfig, l: f64, worst_value: f64) -> Result<Self> {
        config.validate()?;
        let (schedule, adaptive) = match &config.w_mode {
            WMode::Fixed(w) => (vec![*w], false),
            WMode::Adaptive(s) => (s.clone(), true),
        };
        let dim = domain.dim();
        let root_unit = vec![0.5; dim];
        let root_point = domain.denormalize(&root_unit)?;
        let ledger = DepthLedger::with_root(dim, worst_value, schedule[0]);

        let mut master = Self {
            domain,
            config,
            schedule,
            adaptive,
            w_index: 1,
            l,
            ledger,
            start: Instant::now(),
            iteration: 1,
            k: 0,
            val_max: f64::NEG_INFINITY,
            h_plus: 0,
            divisions_this_iter: 0,
            n: 0,
            alg_n: 1,
            h_upper: 0,
            commits: 0,
            total_steps: 0,
            max_eval_steps: 0,
            v_plus: f64::NEG_INFINITY,
            best_value: f64::NEG_INFINITY,
            best_unit: root_unit.clone(),
            best_point: root_point.clone(),
            prev_iter_best: f64::NEG_INFINITY,
            stop: None,
            next_task_id: 0,
            next_commit: 0,
            in_flight: 0,
            pending: VecDeque::new(),
            reorder: BTreeMap::new(),
            open_tasks: HashMap::new(),
            cell_task: HashMap::new(),
            task_info: HashMap::new(),
            task_meta: HashMap::new(),
            divisions: Vec::new(),
            open_records: HashMap::new(),
            iterations: Vec::new(),
            task_log: Vec::new(),
        };
        master.enqueue_task(0, root_unit, root_point, worst_value);
        Ok(master)
    }

    fn wall_budget(&self) -> Option<std::time::Duration> {
        self.config.stop.max_wall
    }

    fn check_wall(&mut self) {
        if self.stop.is_none()
            && self
                .wall_budget()
                .is_some_and(|m| self.start.elapsed() >= m)
        {
            self.stop = Some(StopReason::WallClock);
        }
    }

    fn enqueue_task(&mut self, cell_id: u64, unit: Vec<f64>, point: Vec<f64>, provisional: f64) {
        let task_id = self.next_task_id;
        self.next_task_id += 1;
        let cutoff = self.v_plus - self.l;
        self.open_tasks.insert(task_id, cell_id);
        self.cell_task.insert(cell_id, task_id);
        self.task_info.insert(
            task_id,
            TaskInfo {
                cell_id,
                unit: unit.clone(),
                point: point.clone(),
                provisional,
                cutoff,
            },
        );
        self.pending.push_back(EvalTask {
            task_id,
            cell_id,
            unit,
            point,
            provisional,
            cutoff,
        });
    }

    /// Pop work for idle workers, running Select+Divide cycles whenever
    /// the queue runs dry. The queue always drains before a new Select,
    /// and keeps draining after a stop: children of performed divisions
    /// are owed their evaluation just as in the serial loop.
    fn fill(&mut self, workers: usize) -> Result<Vec<EvalTask>> {
        self.check_wall();
        let mut batch = Vec::new();
        while self.in_flight + batch.len() < workers {
            if let Some(task) = self.pending.pop_front() {
                batch.push(task);
                continue;
            }
            if self.stop.is_some() {
                break;
            }
            match self.advance_sweep()? {
                Advance::Divided => {}
                Advance::Stalled => break,
            }
        }
        self.in_flight += batch.len();
        Ok(batch)
    }

    /// Run the selection sweep until one division enqueues its two child
    /// tasks, or until nothing can be divided before more commits land.
    fn advance_sweep(&mut self) -> Result<Advance> {
        loop {
            let bound = k_bound(
                self.alg_n,
                self.h_upper,
                self.h_plus,
                self.ledger.w(),
                self.config.hmax_schedule,
            );
            if (self.k as i64) > bound {
                if self.divisions_this_iter == 0 {
                    // Every live value is still provisional-worst; retry
                    // this iteration once results commit.
                    self.k = 0;
                    self.val_max = f64::NEG_INFINITY;
                    self.h_plus = self.h_upper;
                    return Ok(Advance::Stalled);
                }
                self.end_iteration();
                continue;
            }
            if let Some(at) = select_candidate(&self.ledger, self.k) {
                let cell_value = self.ledger.cell(at).value();
                if division_gate(cell_value, self.val_max) {
                    self.divide_at(at, cell_value)?;
                    self.k += 1;
                    return Ok(Advance::Divided);
                }
            }
            self.k += 1;
        }
    }

    fn divide_at(&mut self, at: crate::geometry::CellRef, cell_value: f64) -> Result<()> {
        self.val_max = cell_value;
        self.h_plus = 0;
        let parent = self.ledger.take(at);
        self.h_upper = self.h_upper.max(parent.depth() + 1);
        self.alg_n += 1;
        self.n += 1;
        self.divisions_this_iter += 1;

        let refs = self.ledger.divide(&parent);
        let mid_id = self.ledger.cell(refs[1]).id();
        // The parent's own evaluation may still be in flight; its center
        // now lives in the middle child, so retarget the open task.
        if let Some(task) = self.cell_task.remove(&parent.id()) {
            self.open_tasks.insert(task, mid_id);
            self.cell_task.insert(mid_id, task);
        }

        let record_slot = self.divisions.len() + self.open_records.len();
        self.open_records.insert(
            record_slot,
            OpenRecord {
                record: DivisionRecord {
                    n: self.n,
                    evals: 0,
                    iteration: self.iteration,
                    k: self.k,
                    cell_id: parent.id(),
                    depth: parent.depth(),
                    cell_value,
                    left_value: f64::NAN,
                    right_value: f64::NAN,
                    best_value: f64::NAN,
                    w: self.ledger.w(),
                    m_steps: 0,
                    wall_ms: 0.0,
                },
                left: None,
                right: None,
            },
        );

        for (side, &child) in [refs[0], refs[2]].iter().enumerate() {
            let cell = self.ledger.cell(child);
            let (cell_id, unit) = (cell.id(), cell.center().to_vec());
            let point = self.domain.denormalize(&unit)?;
            let task_id = self.next_task_id;
            self.task_meta.insert(task_id, (record_slot, side as u8));
            self.enqueue_task(cell_id, unit, point, parent.value());
        }

        if self.config.stop.max_divisions.is_some_and(|m| self.n >= m) {
            self.stop.get_or_insert(StopReason::DivisionBudget);
        }
        Ok(())
    }

    fn end_iteration(&mut self) {
        let floor = self.v_plus - self.l;
        for cell in self.ledger.cells_mut() {
            if cell.value() < floor {
                cell.set_value(floor);
            }
        }
        self.iterations.push(IterationRecord {
            iteration: self.iteration,
            divisions: self.divisions_this_iter,
            n: self.n,
            evals: self.commits,
            best_value: self.best_value,
            w: self.ledger.w(),
        });
        if self.adaptive {
            // Strict, as in the serial loop: a tie steps the width down.
            let progressed = self.best_value > self.prev_iter_best;
            self.w_index = crate::optimizer::adapt_w(self.w_index, progressed, self.schedule.len());
            self.ledger.set_w(self.schedule[self.w_index - 1]);
        }
        self.prev_iter_best = self.best_value;
        self.iteration += 1;
        self.k = 0;
        self.val_max = f64::NEG_INFINITY;
        self.h_plus = self.h_upper;
        self.divisions_this_iter = 0;
    }

    /// Park a result until its turn, then apply every consecutive commit.
    fn receive(&mut self, result: WorkerResult) -> Result<()> {
        if result.task_id >= self.next_task_id
            || (result.task_id < self.next_commit && !self.reorder.contains_key(&result.task_id))
        {
            return Err(Error::Protocol(format!(
                "commit for unknown or already-committed task {}",
                result.task_id
            )));
        }
        if self.reorder.insert(result.task_id, result).is_some() {
            return Err(Error::Protocol("double commit for one task id".into()));
        }
        while let Some(result) = self.reorder.remove(&self.next_commit) {
            self.commit(result)?;
            self.next_commit += 1;
        }
        Ok(())
    }

    fn commit(&mut self, result: WorkerResult) -> Result<()> {
        let cell_id = self
            .open_tasks
            .remove(&result.task_id)
            .ok_or_else(|| Error::Protocol(format!("no open task {}", result.task_id)))?;
        self.cell_task.remove(&cell_id);
        let info = self
            .task_info
            .remove(&result.task_id)
            .expect("open task always has info");
        self.in_flight -= 1;
        self.commits += 1;
        self.total_steps += result.steps;
        self.max_eval_steps = self.max_eval_steps.max(result.steps);

        // The provisional value (or an iteration-end floor written over
        // it) gives way to the true value, bit-exactly.
        if let Some(at) = self.ledger.find_by_id(cell_id) {
            self.ledger.cell_mut(at).set_value(result.value);
        }
        if result.value > self.v_plus {
            self.v_plus = result.value;
        }
        if result.value > self.best_value {
            self.best_value = result.value;
            self.best_unit = info.unit.clone();
            self.best_point = info.point.clone();
        }

        self.task_log.push(TaskLogRow {
            task_id: result.task_id,
            cell_id: info.cell_id,
            point: info.point,
            provisional: info.provisional,
            cutoff: info.cutoff,
            value: result.value,
            steps: result.steps,
            pruned: result.pruned,
        });

        if let Some((slot, side)) = self.task_meta.remove(&result.task_id) {
            let open = self
                .open_records
                .get_mut(&slot)
                .expect("record slot open until both sides commit");
            if side == 0 {
                open.left = Some(result.value);
            } else {
                open.right = Some(result.value);
            }
            if let (Some(left), Some(right)) = (open.left, open.right) {
                let mut open = self.open_records.remove(&slot).unwrap();
                open.record.left_value = left;
                open.record.right_value = right;
                open.record.evals = self.commits;
                open.record.best_value = self.best_value;
                open.record.m_steps = self.total_steps;
                open.record.wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
                self.divisions.push(open.record);
            }
        }

        // Mirror the serial check order: at the division boundary the
        // target beats the budgets, so reaching it upgrades a budget stop
        // the sweep recorded eagerly.
        if let Some(t) = self.config.stop.target {
            if matches!(
                self.stop,
                None | Some(StopReason::EvalBudget) | Some(StopReason::DivisionBudget)
            ) && error_metric(t.f_star, self.best_value) < t.tolerance
            {
                self.stop = Some(StopReason::TargetMet);
            }
        }
        if self.stop.is_none() && self.config.stop.max_evals.is_some_and(|m| self.commits >= m) {
            self.stop = Some(StopReason::EvalBudget);
        }
        Ok(())
    }

    fn into_outcome(mut self) -> Result<ParallelOutcome> {
        self.divisions.sort_by_key(|d| d.n);
        let stop = self.stop.ok_or_else(|| {
            Error::Protocol("run drained without reaching a stopping condition".into())
        })?;
        Ok(ParallelOutcome {
            result: RunResult {
                best_point: self.best_point,
                best_unit_point: self.best_unit,
                best_value: self.best_value,
                n: self.n,
                evals: self.commits,
                stop,
                iterations: self.iterations,
                divisions: self.divisions,
            },
            v_plus: self.v_plus,
            total_steps: self.total_steps,
            max_eval_steps: self.max_eval_steps,
            task_log: self.task_log,
        })
    }
}
