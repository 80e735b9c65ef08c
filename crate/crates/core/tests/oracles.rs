//! Super Learner invariants on random tasks and truth agreement across
//! oracle methods.

use nalgebra::DMatrix;
use proptest::prelude::*;
use tlearn::simulation::{oracle_truth, scenario, Target, TruthMethod, SCENARIO_NAMES};
use tlearn::super_learner::{fit_super_learner, Loss, SuperLearnerConfig};
use tlearn::{Inputs, LearnerSpec};

fn roster() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::Mean,
        LearnerSpec::ols(),
        LearnerSpec::poly2(),
        LearnerSpec::lasso(0.1),
        LearnerSpec::knn(5),
        LearnerSpec::cart(2),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn super_learner_invariants(
        n in 30usize..80,
        coef in prop::collection::vec(-2.0f64..2.0, 3),
        noise in prop::collection::vec(-1.0f64..1.0, 80),
        xs in prop::collection::vec(-3.0f64..3.0, 160),
        seed in any::<u64>(),
    ) {
        let w = DMatrix::from_fn(n, 2, |i, j| xs[2 * i + j]);
        let y: Vec<f64> = (0..n)
            .map(|i| coef[0] + coef[1] * w[(i, 0)] + coef[2] * w[(i, 1)].powi(2) + noise[i])
            .collect();
        let fit = fit_super_learner(&roster(), Inputs::new(&w, None), &y, &SuperLearnerConfig::new(Loss::SquaredError, seed))
            .unwrap();
        prop_assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(fit.weights.iter().all(|&x| x >= 0.0));
        let best = fit.cv_risks.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(fit.ensemble_risk <= best + 1e-8);
        prop_assert_eq!(fit.cv_risks[fit.discrete_winner], best);
    }
}

#[test]
fn truths_agree_across_methods_for_every_scenario() {
    for name in SCENARIO_NAMES {
        let sc = scenario(name).unwrap();
        for target in Target::ALL {
            let reports: Vec<_> = TruthMethod::ALL
                .iter()
                .filter_map(|&m| oracle_truth(&sc.dgp, target, m, 2024).ok())
                .collect();
            assert!(reports.len() >= 2, "{name} {target:?}");
            for a in &reports {
                for b in &reports {
                    assert!(a.agrees_with(b, 3.0), "{name} {target:?}: {a:?} vs {b:?}");
                }
            }
        }
    }
}
