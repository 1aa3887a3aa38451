//! Iteration-level trace of one adaptive run, for eyeballing the width
//! trajectory.

use logoopt::objectives::{self, error_metric};
use logoopt::optimizer::{self, HmaxSchedule, OptimizerConfig, StopCondition, TargetError, WMode};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "branin".into());
    let spec = objectives::lookup(&name).unwrap();
    let stop = StopCondition {
        max_evals: Some(700),
        target: Some(TargetError {
            f_star: spec.f_star(),
            tolerance: 1e-4,
        }),
        ..StopCondition::default()
    };
    let r = optimizer::run(
        |x| spec.evaluate(x),
        spec.domain(),
        &OptimizerConfig::new(WMode::default(), HmaxSchedule::WSqrtMinusW, stop),
    )
    .unwrap();
    for it in &r.iterations {
        println!(
            "it {:>4}  w {:>2}  div {:>3}  n {:>4}  N {:>4}  err {:.3e}",
            it.iteration,
            it.w,
            it.divisions,
            it.n,
            it.evals,
            error_metric(spec.f_star(), it.best_value)
        );
    }
    println!("stop: {:?} evals {}", r.stop, r.evals);
}
