//! Comparison reports between an estimate file and an oracle file.
//!
//! Pass policy per element: |estimate - oracle| <= max(c * SE, abs_floor),
//! with SE = 0 when the estimate file carries no standard errors.

use serde::{Deserialize, Serialize};

use crate::io::{nested_to_chi, nested_to_se, ChoiResultFile};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TolerancePolicy {
    /// Multiplier on the per-element standard error.
    pub c: f64,
    /// Absolute floor below which deviations always pass.
    pub abs_floor: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            c: 4.0,
            abs_floor: 0.03,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementReport {
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub error: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub kind: String,
    pub k_max: usize,
    pub policy: TolerancePolicy,
    pub n_elements: usize,
    pub n_fail: usize,
    pub max_error: f64,
    /// Largest error / SE ratio over elements with nonzero SE.
    pub max_error_over_se: f64,
    pub pass: bool,
    pub elements: Vec<ElementReport>,
}

/// Element-by-element comparison of two Choi result files.
pub fn compare_choi(
    estimate: &ChoiResultFile,
    oracle: &ChoiResultFile,
    policy: TolerancePolicy,
) -> CliResult<CompareReport> {
    if estimate.k_max != oracle.k_max {
        return Err(CliError::Config(format!(
            "shape mismatch: estimate k_max = {}, oracle k_max = {}",
            estimate.k_max, oracle.k_max
        )));
    }
    let d = estimate.k_max + 1;
    let est = nested_to_chi(&estimate.chi)?;
    let ora = nested_to_chi(&oracle.chi)?;
    let se = estimate
        .std_error
        .as_ref()
        .map(|s| nested_to_se(s))
        .unwrap_or_else(|| vec![0.0; d * d * d * d]);

    let mut elements = Vec::with_capacity(d * d * d * d);
    let mut max_error = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut n_fail = 0;
    for k in 0..d {
        for m in 0..d {
            for l in 0..d {
                for n in 0..d {
                    let idx = ((k * d + m) * d + l) * d + n;
                    let error = (est.get(k, m, l, n) - ora.get(k, m, l, n)).norm();
                    let tolerance = (policy.c * se[idx]).max(policy.abs_floor);
                    let pass = error <= tolerance;
                    if !pass {
                        n_fail += 1;
                    }
                    max_error = max_error.max(error);
                    if se[idx] > 0.0 {
                        max_ratio = max_ratio.max(error / se[idx]);
                    }
                    elements.push(ElementReport {
                        k,
                        m,
                        l,
                        n,
                        error,
                        std_error: se[idx],
                        tolerance,
                        pass,
                    });
                }
            }
        }
    }
    Ok(CompareReport {
        kind: "compare-report".to_string(),
        k_max: estimate.k_max,
        policy,
        n_elements: elements.len(),
        n_fail,
        max_error,
        max_error_over_se: max_ratio,
        pass: n_fail == 0,
        elements,
    })
}
