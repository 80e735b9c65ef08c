//! True estimand values under a [`DgpSpec`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DgpSpec, Target};
use crate::error::{Error, Result};
use crate::rng::{open_uniform, substream};

pub const QUADRATURE_INTERVALS: usize = 10_000;
pub const MC_ORACLE_DRAWS: usize = 10_000_000;
const MC_CHUNK: usize = 100_000;
const QUADRATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMethod {
    Analytic,
    Quadrature,
    McOracle,
}

impl TruthMethod {
    pub const ALL: [TruthMethod; 3] = [TruthMethod::Analytic, TruthMethod::Quadrature, TruthMethod::McOracle];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthReport {
    pub dgp: String,
    pub estimand: Target,
    pub psi0: f64,
    pub method: TruthMethod,
    /// Quadrature sub-intervals over all segments.
    pub nodes: Option<usize>,
    pub oracle_n: Option<usize>,
    pub seed: Option<u64>,
    /// Standard error (Monte Carlo) or error estimate (quadrature); zero
    /// for closed forms.
    pub se: f64,
}

impl TruthReport {
    /// Agreement within `k` combined standard errors.
    pub fn agrees_with(&self, other: &TruthReport, k: f64) -> bool {
        (self.psi0 - other.psi0).abs() <= k * (self.se * self.se + other.se * other.se).sqrt()
    }
}

/// `E f(W)` integrand whose mean is the estimand.
pub fn integrand(spec: &DgpSpec, target: Target, w: f64) -> f64 {
    let tau = spec.tau0.eval(w);
    match target {
        Target::Ate => tau,
        Target::Par => (1.0 - spec.g0(w)) * tau,
        Target::MeanOutcome => spec.m0.eval(w) + spec.g0(w) * tau,
        Target::OptimalRuleContrast => tau * (f64::from(u8::from(tau >= 0.0)) - spec.g0(w)),
    }
}

/// Sign changes of `tau0` strictly inside the support.
fn tau_roots(spec: &DgpSpec) -> Vec<f64> {
    if spec.tau0.is_zero() {
        return Vec::new();
    }
    let steps = 100_000;
    let (lo, hi) = (spec.w_lo, spec.w_hi);
    let at = |k: usize| lo + (hi - lo) * k as f64 / steps as f64;
    let mut roots = Vec::new();
    for k in 0..steps {
        let (a, b) = (at(k), at(k + 1));
        let (fa, fb) = (spec.tau0.eval(a), spec.tau0.eval(b));
        if fa == 0.0 && k > 0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut l, mut r) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                if (spec.tau0.eval(m) < 0.0) == (spec.tau0.eval(l) < 0.0) {
                    l = m;
                } else {
                    r = m;
                }
            }
            roots.push(0.5 * (l + r));
        }
    }
    roots
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        let x = a + h * k as f64;
        s += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

fn analytic(spec: &DgpSpec, target: Target) -> Result<f64> {
    let (lo, hi) = (spec.w_lo, spec.w_hi);
    let unsupported = || {
        Err(Error::UnsupportedEstimand(format!(
            "no closed form for {} on {}",
            target.name(),
            spec.name
        )))
    };
    let tau_mean = spec.tau0.uniform_mean(lo, hi);
    if target == Target::Ate {
        return Ok(tau_mean);
    }
    if !spec.propensity_is_constant() {
        return unsupported();
    }
    let g = spec.g0(lo);
    match target {
        Target::Par => Ok((1.0 - g) * tau_mean),
        Target::MeanOutcome => Ok(spec.m0.uniform_mean(lo, hi) + g * tau_mean),
        Target::OptimalRuleContrast => {
            // closed form only for affine tau0: mean of its positive part
            if spec.tau0.degree() > 1 {
                return unsupported();
            }
            let c = spec.tau0.0.first().copied().unwrap_or(0.0);
            let b = spec.tau0.0.get(1).copied().unwrap_or(0.0);
            let positive_part = if b == 0.0 {
                c.max(0.0)
            } else {
                let r = (-c / b).clamp(lo, hi);
                let (s, e) = if b > 0.0 { (r, hi) } else { (lo, r) };
                (c * (e - s) + 0.5 * b * (e * e - s * s)) / (hi - lo)
            };
            Ok(positive_part - g * tau_mean)
        }
        Target::Ate => unreachable!(),
    }
}

fn quadrature(spec: &DgpSpec, target: Target) -> (f64, f64, usize) {
    let mut breaks = vec![spec.w_lo];
    breaks.extend(tau_roots(spec));
    breaks.push(spec.w_hi);
    let f = |w: f64| integrand(spec, target, w);
    let (mut fine, mut coarse) = (0.0, 0.0);
    for seg in breaks.windows(2) {
        fine += simpson(&f, seg[0], seg[1], QUADRATURE_INTERVALS);
        coarse += simpson(&f, seg[0], seg[1], QUADRATURE_INTERVALS / 2);
    }
    let width = spec.w_hi - spec.w_lo;
    let err = (fine - coarse).abs() / 15.0 / width + QUADRATURE_FLOOR;
    (fine / width, err, QUADRATURE_INTERVALS * (breaks.len() - 1))
}

fn mc_oracle(spec: &DgpSpec, target: Target, seed: u64) -> (f64, f64) {
    let chunks = MC_ORACLE_DRAWS / MC_CHUNK;
    let sums: Vec<(f64, f64)> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..MC_CHUNK {
                let w = spec.w_lo + (spec.w_hi - spec.w_lo) * open_uniform(&mut rng);
                let v = integrand(spec, target, w);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let n = MC_ORACLE_DRAWS as f64;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// True value of `target` under `spec` by the requested method. The Monte
/// Carlo oracle averages the integrand over `1e7` draws of `W` from the
/// given seed.
pub fn oracle_truth(spec: &DgpSpec, target: Target, method: TruthMethod, seed: u64) -> Result<TruthReport> {
    let mut report = TruthReport {
        dgp: spec.name.clone(),
        estimand: target,
        psi0: 0.0,
        method,
        nodes: None,
        oracle_n: None,
        seed: None,
        se: 0.0,
    };
    match method {
        TruthMethod::Analytic => report.psi0 = analytic(spec, target)?,
        TruthMethod::Quadrature => {
            let (v, err, nodes) = quadrature(spec, target);
            report.psi0 = v;
            report.se = err;
            report.nodes = Some(nodes);
        }
        TruthMethod::McOracle => {
            let (v, se) = mc_oracle(spec, target, seed);
            report.psi0 = v;
            report.se = se;
            report.oracle_n = Some(MC_ORACLE_DRAWS);
            report.seed = Some(seed);
        }
    }
    Ok(report)
}

/// Analytic value where available, quadrature otherwise.
pub fn best_truth(spec: &DgpSpec, target: Target) -> TruthReport {
    oracle_truth(spec, target, TruthMethod::Analytic, 0)
        .or_else(|_| oracle_truth(spec, target, TruthMethod::Quadrature, 0))
        .expect("quadrature supports every target")
}
