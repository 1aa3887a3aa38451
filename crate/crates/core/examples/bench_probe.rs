//! Quick benchmark sweep: evaluations needed to reach a 1e-4 error on
//! every registered objective, for the adaptive and width-1 settings.

use logoopt::objectives::{self, error_metric};
use logoopt::optimizer::{self, HmaxSchedule, OptimizerConfig, StopCondition, TargetError, WMode};
use logoopt::soo::{self, SooConfig};

fn main() {
    println!("{:<14}{:>10}{:>10}", "objective", "adaptive", "soo");
    for name in objectives::OBJECTIVE_NAMES {
        let spec = objectives::lookup(name).unwrap();
        let budget = if spec.dim() >= 10 { 8000 } else { 4000 };
        let stop = StopCondition {
            max_evals: Some(budget),
            target: Some(TargetError {
                f_star: spec.f_star(),
                tolerance: 1e-4,
            }),
            ..StopCondition::default()
        };

        let adaptive = optimizer::run(
            |x| spec.evaluate(x),
            spec.domain(),
            &OptimizerConfig::new(WMode::default(), HmaxSchedule::WSqrtMinusW, stop.clone()),
        )
        .unwrap();
        let soo = soo::run(
            |x| spec.evaluate(x),
            spec.domain(),
            &SooConfig::new(HmaxSchedule::WSqrtMinusW, stop),
        )
        .unwrap();

        let fmt = |r: &logoopt::RunResult| {
            if error_metric(spec.f_star(), r.best_value) < 1e-4 {
                format!("{}", r.evals)
            } else {
                format!(">{} ({:.1e})", r.evals, error_metric(spec.f_star(), r.best_value))
            }
        };
        println!("{:<14}{:>10}{:>10}", name, fmt(&adaptive), fmt(&soo));
    }
}
