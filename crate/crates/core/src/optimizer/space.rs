use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::OptimizerError;
use crate::formulation::Formulation;

/// Default limit on the number of enumerated candidates.
pub const MAX_CANDIDATES: usize = 1_000_000;

/// Grid values are snapped to this resolution so that `start + i * step` prints cleanly.
const SNAP_PER_UNIT: f64 = 1e9;

/// One swept reagent: values `start, start + step, ...` up to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ParameterRange {
    pub fn new(name: impl Into<String>, start: f64, stop: f64, step: f64) -> Self {
        Self { name: name.into(), start, stop, step }
    }

    /// Number of grid points, tolerant of floating-point error in the range arithmetic.
    pub fn count(&self) -> Result<usize, OptimizerError> {
        let (a, b, h) = (self.start, self.stop, self.step);
        if !(h > 0.0) || !a.is_finite() || !b.is_finite() || !h.is_finite() {
            return Err(OptimizerError::InvalidParameter(format!("`{}`: step must be positive and finite", self.name)));
        }
        if b < a {
            return Err(OptimizerError::EmptySpace);
        }
        Ok(((b - a) / h + 1e-9).floor() as usize + 1)
    }

    pub fn value(&self, i: usize) -> f64 {
        let v = self.start + i as f64 * self.step;
        (v * SNAP_PER_UNIT).round() / SNAP_PER_UNIT
    }

    fn last(&self, count: usize) -> f64 {
        self.value(count - 1)
    }

    /// Grid index of `v`, if `v` lies on the grid.
    fn index_of(&self, v: f64, count: usize) -> Option<usize> {
        let k = ((v - self.start) / self.step).round();
        if k < 0.0 || k as usize >= count {
            return None;
        }
        let k = k as usize;
        ((self.value(k) - v).abs() <= 1e-6 * self.step.max(1e-12)).then_some(k)
    }
}

/// Discrete Cartesian grid of formulations and the set already measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct SearchSpace {
    parameters: Vec<ParameterRange>,
    counts: Vec<usize>,
    measured: BTreeSet<usize>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    parameters: Vec<ParameterRange>,
    #[serde(default)]
    measured: BTreeSet<usize>,
}

impl TryFrom<SpaceRepr> for SearchSpace {
    type Error = OptimizerError;
    fn try_from(r: SpaceRepr) -> Result<Self, Self::Error> {
        let mut s = build_search_space(r.parameters)?;
        if r.measured.iter().any(|&i| i >= s.len()) {
            return Err(OptimizerError::InvalidParameter("measured index outside the space".into()));
        }
        s.measured = r.measured;
        Ok(s)
    }
}

impl From<SearchSpace> for SpaceRepr {
    fn from(s: SearchSpace) -> Self {
        Self { parameters: s.parameters, measured: s.measured }
    }
}

/// Enumerates the full grid, at most [`MAX_CANDIDATES`] points.
pub fn build_search_space(parameters: Vec<ParameterRange>) -> Result<SearchSpace, OptimizerError> {
    build_search_space_limited(parameters, MAX_CANDIDATES)
}

pub fn build_search_space_limited(
    parameters: Vec<ParameterRange>,
    limit: usize,
) -> Result<SearchSpace, OptimizerError> {
    if parameters.is_empty() {
        return Err(OptimizerError::EmptySpace);
    }
    let mut names = BTreeSet::new();
    for p in &parameters {
        if !names.insert(p.name.as_str()) {
            return Err(OptimizerError::InvalidParameter(format!("`{}` listed twice", p.name)));
        }
    }
    let counts = parameters.iter().map(ParameterRange::count).collect::<Result<Vec<_>, _>>()?;
    let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
    match total {
        Some(n) if n <= limit => {}
        _ => return Err(OptimizerError::SpaceTooLarge { count: total.map_or(f64::INFINITY, |n| n as f64), limit }),
    }
    Ok(SearchSpace { parameters, counts, measured: BTreeSet::new() })
}

impl SearchSpace {
    pub fn parameters(&self) -> &[ParameterRange] {
        &self.parameters
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-parameter grid indices of candidate `i`; the first parameter varies slowest.
    pub fn grid_index(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (k, &c) in self.counts.iter().enumerate().rev() {
            out[k] = i % c;
            i /= c;
        }
        out
    }

    pub fn values(&self, i: usize) -> Vec<f64> {
        self.grid_index(i).iter().zip(&self.parameters).map(|(&k, p)| p.value(k)).collect()
    }

    pub fn formulation(&self, i: usize) -> Formulation {
        self.parameters.iter().map(|p| p.name.clone()).zip(self.values(i)).collect()
    }

    /// Candidate `i` mapped into the unit cube; single-valued parameters map to 0.
    pub fn unit_point(&self, i: usize) -> Vec<f64> {
        self.grid_index(i)
            .iter()
            .zip(&self.counts)
            .map(|(&k, &c)| if c > 1 { k as f64 / (c - 1) as f64 } else { 0.0 })
            .collect()
    }

    /// Index of the candidate equal to `f`, which must name exactly the swept parameters.
    pub fn index_of(&self, f: &Formulation) -> Option<usize> {
        let swept = f.components().filter(|(n, _)| self.parameters.iter().any(|p| p.name == *n)).count();
        if swept != self.dim() || f.len() != self.dim() {
            return None;
        }
        let mut idx = 0;
        for (p, &c) in self.parameters.iter().zip(&self.counts) {
            let k = p.index_of(f.get(&p.name), c)?;
            idx = idx * c + k;
        }
        Some(idx)
    }

    pub fn is_measured(&self, i: usize) -> bool {
        self.measured.contains(&i)
    }

    pub fn measured(&self) -> &BTreeSet<usize> {
        &self.measured
    }

    pub fn mark_measured(&mut self, i: usize) -> bool {
        self.measured.insert(i)
    }

    pub fn unmark(&mut self, i: usize) {
        self.measured.remove(&i);
    }

    pub fn unmeasured(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| !self.measured.contains(i)).collect()
    }

    /// Largest value of each parameter on the grid.
    pub fn upper_values(&self) -> Vec<f64> {
        self.parameters.iter().zip(&self.counts).map(|(p, &c)| p.last(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_lexicographic() {
        let s =
            build_search_space(vec![ParameterRange::new("a", 0.0, 1.0, 1.0), ParameterRange::new("b", 0.0, 0.2, 0.1)])
                .unwrap();
        let v: Vec<Vec<f64>> = (0..s.len()).map(|i| s.values(i)).collect();
        assert_eq!(v, [[0.0, 0.0], [0.0, 0.1], [0.0, 0.2], [1.0, 0.0], [1.0, 0.1], [1.0, 0.2]]);
        for i in 0..s.len() {
            assert_eq!(s.index_of(&s.formulation(i)), Some(i));
        }
        assert_eq!(s.index_of(&Formulation::new().with("a", 0.0).with("b", 0.15)), None);
        assert_eq!(s.index_of(&Formulation::new().with("a", 0.0)), None);
    }

    #[test]
    fn errors() {
        assert_eq!(build_search_space(vec![]), Err(OptimizerError::EmptySpace));
        assert!(build_search_space(vec![ParameterRange::new("a", 0.0, 1.0, 0.0)]).is_err());
        assert!(matches!(
            build_search_space_limited(vec![ParameterRange::new("a", 0.0, 99.0, 1.0); 1], 10),
            Err(OptimizerError::SpaceTooLarge { .. })
        ));
        assert_eq!(build_search_space(vec![ParameterRange::new("a", 2.0, 1.0, 1.0)]), Err(OptimizerError::EmptySpace));
    }

    #[test]
    fn serde_rebuilds_grid() {
        let mut s = build_search_space(vec![ParameterRange::new("ethanol", 0.0, 50.0, 0.5)]).unwrap();
        s.mark_measured(7);
        let j = serde_json::to_string(&s).unwrap();
        let back: SearchSpace = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.len(), 101);
    }
}
