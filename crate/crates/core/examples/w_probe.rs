//! Fixed-width sweep on the benchmarks that are most width-sensitive.

use logoopt::objectives::{self, error_metric};
use logoopt::optimizer::{self, HmaxSchedule, OptimizerConfig, StopCondition, TargetError, WMode};

fn main() {
    for name in ["peaks", "branin", "hartman3", "sin1"] {
        let spec = objectives::lookup(name).unwrap();
        print!("{name:<10}");
        for w in [1u32, 2, 3, 4, 5, 6, 8, 30] {
            let stop = StopCondition {
                max_evals: Some(4000),
                target: Some(TargetError {
                    f_star: spec.f_star(),
                    tolerance: 1e-4,
                }),
                ..StopCondition::default()
            };
            let r = optimizer::run(
                |x| spec.evaluate(x),
                spec.domain(),
                &OptimizerConfig::new(WMode::Fixed(w), HmaxSchedule::WSqrtMinusW, stop),
            )
            .unwrap();
            if error_metric(spec.f_star(), r.best_value) < 1e-4 {
                print!("  w{w}:{}", r.evals);
            } else {
                print!("  w{w}:>4000");
            }
        }
        println!();
    }
}
