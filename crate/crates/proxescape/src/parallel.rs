//! Multi-seed execution. Runs share nothing but the immutable operator and
//! schedule, so seed-level parallelism is safe; with the `parallel` feature
//! disabled `run_many` degrades to the sequential loop with identical output.

use crate::driver::{run, RunResult, ScheduleParams, StationarityMode};
use crate::steps::StepOperator;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn run_many_sequential(
    op: &StepOperator,
    x0: &[f64],
    params: &ScheduleParams,
    seeds: &[u64],
    mode: StationarityMode,
) -> Vec<RunResult> {
    seeds
        .iter()
        .map(|&seed| run(op, x0, params, seed, mode))
        .collect()
}

#[cfg(feature = "parallel")]
pub fn run_many(
    op: &StepOperator,
    x0: &[f64],
    params: &ScheduleParams,
    seeds: &[u64],
    mode: StationarityMode,
) -> Vec<RunResult> {
    seeds
        .par_iter()
        .map(|&seed| run(op, x0, params, seed, mode))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_many(
    op: &StepOperator,
    x0: &[f64],
    params: &ScheduleParams,
    seeds: &[u64],
    mode: StationarityMode,
) -> Vec<RunResult> {
    run_many_sequential(op, x0, params, seeds, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_circle_abs;

    #[test]
    fn parallel_matches_sequential_bit_exactly() {
        let p = make_circle_abs(2);
        let params = p
            .schedule()
            .unwrap()
            .with_overrides(None, None, None, None, Some(40))
            .unwrap();
        let op = p.step_operator(params.eta, 1e-10).unwrap();
        let seeds: Vec<u64> = (0..6).collect();
        let a = run_many(&op, &p.recommended.start, &params, &seeds, StationarityMode::GradientMapping);
        let b = run_many_sequential(
            &op,
            &p.recommended.start,
            &params,
            &seeds,
            StationarityMode::GradientMapping,
        );
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            let (ta, tb) = (ra.as_ref().unwrap(), rb.as_ref().unwrap());
            assert_eq!(ta.perturbation_count, tb.perturbation_count);
            for (pa, pb) in ta.points.iter().zip(&tb.points) {
                assert_eq!(pa.x, pb.x);
                assert_eq!(pa.f_lambda.to_bits(), pb.f_lambda.to_bits());
            }
        }
    }
}
