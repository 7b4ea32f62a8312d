//! Uniform random search baseline.

use crate::domain::{BoxDomain, ObjectiveSense, RecordKind};
use crate::engine::{guarded_eval, Archive, Budget, Objective, OptimizationResult, StopReason, DEFAULT_MAX_CONSECUTIVE_FAILURES};
use crate::error::Result;
use crate::rng::RngStream;

/// Evaluates independent uniform draws from the box until the budget runs
/// out. Integer dimensions are drawn uniformly over their integers; log-scale
/// hyperparameters are uniform in the exponent because the box holds the
/// exponent.
pub fn random_search(
    objective: &dyn Objective,
    domain: &BoxDomain,
    sense: ObjectiveSense,
    budget: &Budget,
    stream: &RngStream,
) -> Result<OptimizationResult> {
    budget.validate(1)?;
    let mut rng = stream.rng();
    let mut archive = Archive::new(domain.clone(), sense, DEFAULT_MAX_CONSECUTIVE_FAILURES);
    loop {
        if budget.max_evaluations.is_some_and(|m| archive.len() >= m) {
            return archive.into_result(StopReason::EvalsExhausted);
        }
        if budget.max_wallclock.is_some_and(|t| archive.elapsed() >= t) {
            return archive.into_result(StopReason::TimeExhausted);
        }
        let x = domain.sample_uniform(&mut rng);
        let outcome = guarded_eval(objective, &x);
        archive.ingest(x, outcome, RecordKind::Search, None, 0)?;
        if archive.target_reached(budget.target_value) {
            return archive.into_result(StopReason::TargetReached);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::{HpoSpace, ParamSpec, ParamValue};

    #[test]
    fn log_dimension_uniform_in_exponent() {
        let space = HpoSpace::new(vec![ParamSpec::log10("lr", -4.0, -1.0)], vec![], Default::default()).unwrap();
        let d = space.to_domain().unwrap();
        let mut rng = RngStream::new(3, "rs").rng();
        let mut decoded: Vec<f64> = (0..100_000)
            .map(|_| match space.decode(&d.sample_uniform(&mut rng)).unwrap()["lr"] {
                ParamValue::Real(v) => v,
                ref other => panic!("{other:?}"),
            })
            .collect();
        decoded.sort_by(f64::total_cmp);
        let median = decoded[decoded.len() / 2];
        let want = 10f64.powf(-2.5);
        assert!((median / want - 1.0).abs() < 0.1, "{median}");
    }

    #[test]
    fn budget_one_and_determinism() {
        let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
        let f = |x: &[f64]| x[0] + x[1];
        let one = random_search(&f, &d, ObjectiveSense::Minimize, &Budget::evaluations(1), &RngStream::new(1, "rs")).unwrap();
        assert_eq!(one.evaluations.len(), 1);
        let a = random_search(&f, &d, ObjectiveSense::Minimize, &Budget::evaluations(20), &RngStream::new(1, "rs")).unwrap();
        let b = random_search(&f, &d, ObjectiveSense::Minimize, &Budget::evaluations(20), &RngStream::new(1, "rs")).unwrap();
        let key = |r: &OptimizationResult| r.evaluations.iter().map(|e| (e.point.clone(), e.value)).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
        assert_eq!(a.evaluations[0].point, one.evaluations[0].point);
    }

    #[test]
    fn integer_dims_snapped() {
        let d = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 5.0], vec![1]).unwrap();
        let f = |x: &[f64]| x[0];
        let r = random_search(&f, &d, ObjectiveSense::Maximize, &Budget::evaluations(50), &RngStream::new(2, "rs")).unwrap();
        assert!(r.evaluations.iter().all(|e| e.point[1].fract() == 0.0));
    }
}
