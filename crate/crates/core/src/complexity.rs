//! Graphlet-structural complexity of call graphs.
//!
//! The complexity of one version is the frequency-weighted mean cyclomatic
//! number of its graphlet classes; with several sizes active, each size is
//! weighted within itself and the non-degenerate sizes are averaged with equal
//! weight. The series complexity is the mean over versions.

use serde::Serialize;

use crate::graphlets::{FrequencyReport, GraphletClass};

pub const FORMULA: &str =
    "cg_cx = mean over sizes k of sum_c (rel_freq_percent(c)/100) * (arcs(c) - k + 2); ecg_cx = mean of cg_cx over versions";
pub const ABSOLUTE_FORMULA: &str =
    "cg_cx = sum over sizes k and classes c of count(c) * (arcs(c) - k + 2); ecg_cx = mean of cg_cx over versions";

pub fn cyclomatic(class: &GraphletClass) -> i64 {
    class.cyclomatic()
}

/// How class frequencies weight cyclomatic numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Weighting {
    #[default]
    Relative,
    AbsoluteCount,
}

impl Weighting {
    pub fn formula(self) -> &'static str {
        match self {
            Weighting::Relative => FORMULA,
            Weighting::AbsoluteCount => ABSOLUTE_FORMULA,
        }
    }
}

/// One size's distribution in one version.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeFrequencies<'a> {
    pub size: usize,
    /// `(class, rel_freq_percent, count)` for classes present.
    pub classes: Vec<(&'a GraphletClass, f64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VersionComplexity {
    pub value: f64,
    pub degenerate: bool,
}

pub fn cg_cx(per_size: &[SizeFrequencies<'_>], weighting: Weighting) -> VersionComplexity {
    let active: Vec<&SizeFrequencies<'_>> = per_size
        .iter()
        .filter(|s| s.classes.iter().any(|&(_, f, c)| f > 0.0 || c > 0))
        .collect();
    if active.is_empty() {
        return VersionComplexity {
            value: 0.0,
            degenerate: true,
        };
    }
    let value = match weighting {
        Weighting::Relative => {
            active
                .iter()
                .map(|s| {
                    s.classes
                        .iter()
                        .map(|&(class, f, _)| f / 100.0 * cyclomatic(class) as f64)
                        .sum::<f64>()
                })
                .sum::<f64>()
                / active.len() as f64
        }
        Weighting::AbsoluteCount => active
            .iter()
            .flat_map(|s| &s.classes)
            .map(|&(class, _, c)| c as f64 * cyclomatic(class) as f64)
            .sum(),
    };
    VersionComplexity {
        value,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub versions: Vec<String>,
    pub per_version: Vec<VersionComplexity>,
    pub ecg_cx: f64,
    pub sizes_used: Vec<usize>,
    pub weighting: Weighting,
}

impl ComplexityReport {
    pub fn formula(&self) -> &'static str {
        self.weighting.formula()
    }
}

/// Mean of the per-version values.
pub fn aggregate(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn ecg_cx(freqs: &FrequencyReport, weighting: Weighting) -> ComplexityReport {
    let per_version: Vec<VersionComplexity> = (0..freqs.versions.len())
        .map(|v| {
            let per_size: Vec<SizeFrequencies<'_>> = freqs
                .sizes
                .iter()
                .map(|&k| SizeFrequencies {
                    size: k,
                    classes: freqs
                        .of_size(k)
                        .map(|s| (&s.class, s.per_version[v].rel_freq_percent, s.per_version[v].count))
                        .filter(|&(_, _, c)| c > 0)
                        .collect(),
                })
                .collect();
            cg_cx(&per_size, weighting)
        })
        .collect();
    let values: Vec<f64> = per_version.iter().map(|c| c.value).collect();
    ComplexityReport {
        versions: freqs.versions.clone(),
        ecg_cx: aggregate(&values),
        per_version,
        sizes_used: freqs.sizes.clone(),
        weighting,
    }
}
