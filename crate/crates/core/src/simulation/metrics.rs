use serde::Serialize;

use super::{EstimatorId, McResult, McRow};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub estimator: EstimatorId,
    pub psi0: f64,
    pub n: usize,
    /// Successful repetitions; failed ones are excluded from every column.
    pub reps: usize,
    pub failures: usize,
    pub mean_psi: f64,
    pub bias: f64,
    /// Divisor is the number of repetitions.
    pub variance: f64,
    pub mse: f64,
    /// `sqrt(variance / reps)`, the Monte Carlo standard error of `mean_psi`.
    pub mc_se: f64,
    pub coverage: Option<f64>,
    pub mean_ci_width: Option<f64>,
    pub skewness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub scenario: String,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn get(&self, id: EstimatorId) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.estimator == id)
    }
}

/// Performance of one estimator's rows against `psi0`.
pub fn metrics_for(rows: &[&McRow], id: EstimatorId, psi0: f64, n: usize) -> MetricsRow {
    let ok: Vec<&McRow> = rows.iter().copied().filter(|r| !r.failed()).collect();
    let psi: Vec<f64> = ok.iter().filter_map(|r| r.psi).collect();
    let reps = psi.len();
    let mean_psi = if reps > 0 { stats::mean(&psi) } else { f64::NAN };
    let variance = if reps > 0 {
        stats::population_variance(&psi)
    } else {
        f64::NAN
    };
    let mse = if reps > 0 {
        psi.iter().map(|p| (p - psi0).powi(2)).sum::<f64>() / reps as f64
    } else {
        f64::NAN
    };
    let cis: Vec<(f64, f64)> = ok.iter().filter_map(|r| r.ci).collect();
    let (coverage, mean_ci_width) = if cis.is_empty() {
        (None, None)
    } else {
        let k = cis.len() as f64;
        let hit = cis.iter().filter(|(lo, hi)| *lo <= psi0 && psi0 <= *hi).count() as f64;
        (Some(hit / k), Some(cis.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / k))
    };
    MetricsRow {
        estimator: id,
        psi0,
        n,
        reps,
        failures: rows.len() - ok.len(),
        mean_psi,
        bias: mean_psi - psi0,
        variance,
        mse,
        mc_se: (variance / reps as f64).sqrt(),
        coverage,
        mean_ci_width,
        skewness: if reps > 0 { stats::skewness(&psi) } else { f64::NAN },
    }
}

/// One row per estimator, against the truths stored in `mc`.
pub fn compute_metrics(mc: &McResult) -> MetricsTable {
    let rows = mc
        .truths
        .iter()
        .map(|&(id, psi0)| {
            let mine: Vec<&McRow> = mc.rows.iter().filter(|r| r.estimator == id).collect();
            metrics_for(&mine, id, psi0, mc.n)
        })
        .collect();
    MetricsTable {
        scenario: mc.scenario.clone(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(psi: f64, ci: Option<(f64, f64)>) -> McRow {
        McRow {
            rep: 0,
            estimator: EstimatorId::Tmle,
            psi: Some(psi),
            ci,
            covered: None,
            converged: true,
            error: None,
        }
    }

    #[test]
    fn exact_estimates() {
        let rows = [row(1.5, Some((1.5, 1.5))), row(1.5, Some((1.5, 1.5)))];
        let refs: Vec<&McRow> = rows.iter().collect();
        let m = metrics_for(&refs, EstimatorId::Tmle, 1.5, 10);
        assert_eq!((m.bias, m.variance, m.mse), (0.0, 0.0, 0.0));
        assert_eq!(m.coverage, Some(1.0));
        assert_eq!(m.mean_ci_width, Some(0.0));
    }

    #[test]
    fn hand_arithmetic() {
        let rows = [row(0.0, None), row(2.0, None)];
        let refs: Vec<&McRow> = rows.iter().collect();
        let m = metrics_for(&refs, EstimatorId::Sl, 0.0, 10);
        assert_eq!((m.bias, m.variance, m.mse), (1.0, 1.0, 2.0));
        assert_eq!(m.coverage, None);
    }

    #[test]
    fn failures_are_excluded() {
        let mut bad = row(0.0, None);
        bad.psi = None;
        bad.error = Some("boom".into());
        let rows = [row(1.0, Some((0.0, 2.0))), bad];
        let refs: Vec<&McRow> = rows.iter().collect();
        let m = metrics_for(&refs, EstimatorId::Tmle, 0.5, 10);
        assert_eq!((m.reps, m.failures), (1, 1));
        assert_eq!(m.coverage, Some(1.0));
    }

    proptest! {
        #[test]
        fn mse_is_bias_squared_plus_variance(psi in prop::collection::vec(-10.0f64..10.0, 1..60), psi0 in -5.0f64..5.0) {
            let rows: Vec<McRow> = psi.iter().map(|&p| row(p, Some((p - 1.0, p + 1.0)))).collect();
            let refs: Vec<&McRow> = rows.iter().collect();
            let m = metrics_for(&refs, EstimatorId::Tmle, psi0, 10);
            prop_assert!((m.mse - (m.bias * m.bias + m.variance)).abs() <= 1e-10 * (1.0 + m.mse));
            let c = m.coverage.unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
