//! Objective functions evaluated on rollout traces: developmental loss against
//! a target, time-lagged action/sensor mutual information (empowerment), and
//! action-entropy alternatives.
//!
//! All information quantities are plug-in (histogram) estimates in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nca::{GridState, RolloutTrace};
use crate::shapes::TargetShape;

/// Whether larger or smaller values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ObjectiveKind {
    /// Mean alive-mask distance to the target over updates `n0+1..=n1`.
    Loss { n0: usize, n1: usize },
    /// Mutual information between actions and sensor readings `k` updates
    /// later, optionally keeping only each cell's last `crop_last` pairs.
    Empowerment { k: usize, crop_last: Option<usize> },
    LocalActionEntropyMin,
    LocalActionEntropyMax,
    GlobalActionEntropyMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub goal: Goal,
}

impl ObjectiveSpec {
    pub fn loss(n0: usize, n1: usize) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::Loss { n0, n1 },
            goal: Goal::Minimize,
        }
    }

    pub fn empowerment(k: usize, crop_last: Option<usize>) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::Empowerment { k, crop_last },
            goal: Goal::Maximize,
        }
    }

    pub fn local_entropy_min() -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::LocalActionEntropyMin,
            goal: Goal::Minimize,
        }
    }

    pub fn local_entropy_max() -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::LocalActionEntropyMax,
            goal: Goal::Maximize,
        }
    }

    pub fn global_entropy_min() -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::GlobalActionEntropyMin,
            goal: Goal::Minimize,
        }
    }

    /// Checks the window/horizon against a rollout of `steps` updates.
    pub fn validate(&self, steps: usize) -> Result<()> {
        match self.kind {
            ObjectiveKind::Loss { n0, n1 } if !(n0 < n1 && n1 <= steps) => {
                Err(Error::InvalidLossWindow { n0, n1, steps })
            }
            ObjectiveKind::Empowerment { k, .. } if k == 0 || k >= steps => {
                Err(Error::InvalidHorizon { k, steps })
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, trace: &RolloutTrace, target: &TargetShape) -> Result<f64> {
        Ok(match self.kind {
            ObjectiveKind::Loss { n0, n1 } => loss(trace, target, n0, n1)?,
            ObjectiveKind::Empowerment { k, crop_last } => empowerment(trace, k, crop_last)?,
            ObjectiveKind::LocalActionEntropyMin | ObjectiveKind::LocalActionEntropyMax => {
                local_action_entropy(trace).value
            }
            ObjectiveKind::GlobalActionEntropyMin => global_action_entropy(trace).value,
        })
    }

    pub fn label(&self) -> String {
        match self.kind {
            ObjectiveKind::Loss { n0, n1 } => format!("loss({n0},{n1})"),
            ObjectiveKind::Empowerment { k, crop_last: None } => format!("empowerment(k={k})"),
            ObjectiveKind::Empowerment { k, crop_last: Some(c) } => {
                format!("empowerment(k={k},crop={c})")
            }
            ObjectiveKind::LocalActionEntropyMin => "local_entropy_min".into(),
            ObjectiveKind::LocalActionEntropyMax => "local_entropy_max".into(),
            ObjectiveKind::GlobalActionEntropyMin => "global_entropy_min".into(),
        }
    }
}

/// A value that may have been computed on a degenerate input (no data), in
/// which case it is reported as 0 with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub value: f64,
    pub degenerate: bool,
}

/// Fraction of cells whose alive flag differs from the target.
pub fn mask_distance(grid: &GridState, target: &TargetShape) -> Result<f64> {
    if grid.size() != target.size() {
        return Err(Error::ShapeMismatch {
            expected: target.size(),
            actual: grid.size(),
        });
    }
    let differing = grid
        .alive_mask()
        .iter()
        .zip(target.mask())
        .filter(|(a, t)| a != t)
        .count();
    Ok(differing as f64 / (grid.size() * grid.size()) as f64)
}

/// Developmental loss: the mask distance averaged over the states after
/// updates `n0+1..=n1`.
pub fn loss(trace: &RolloutTrace, target: &TargetShape, n0: usize, n1: usize) -> Result<f64> {
    let grids = trace.grids().ok_or(Error::MissingGrids)?;
    if !(n0 < n1 && n1 <= trace.steps()) {
        return Err(Error::InvalidLossWindow {
            n0,
            n1,
            steps: trace.steps(),
        });
    }
    let mut total = 0.0;
    for grid in &grids[n0 + 1..=n1] {
        total += mask_distance(grid, target)?;
    }
    Ok(total / (n1 - n0) as f64)
}

/// Pooled (action, sensor) pairs for one horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorActionPairs {
    pub k: usize,
    /// `(action at n, sensor at n + k)`.
    pub pairs: Vec<(u8, u8)>,
}

impl SensorActionPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Pairs each cell's action at update `n` with its sensor reading at
/// `n + k`, for every `n` in `1..=N-k` where the cell ran at both updates.
/// With `crop_last = Some(c)` only each cell's `c` latest pairs are kept.
pub fn build_pairs(trace: &RolloutTrace, k: usize, crop_last: Option<usize>) -> Result<SensorActionPairs> {
    let steps = trace.steps();
    if k == 0 || k >= steps {
        return Err(Error::InvalidHorizon { k, steps });
    }
    let m = trace.grid_size();
    let mut pairs = Vec::new();
    let mut cell_pairs = Vec::with_capacity(steps);
    for row in 0..m {
        for col in 0..m {
            cell_pairs.clear();
            for n in 1..=steps - k {
                let (Some(a), Some(s)) = (
                    trace.cell_step(n, row, col).action(),
                    trace.cell_step(n + k, row, col).sensor(),
                ) else {
                    continue;
                };
                cell_pairs.push((a, s));
            }
            let skip = crop_last.map_or(0, |c| cell_pairs.len().saturating_sub(c));
            pairs.extend_from_slice(&cell_pairs[skip..]);
        }
    }
    Ok(SensorActionPairs { k, pairs })
}

/// Plug-in mutual information (bits) of the empirical joint distribution.
pub fn mutual_information(pairs: &SensorActionPairs) -> Result<f64> {
    mutual_information_of(&pairs.pairs)
}

pub(crate) fn mutual_information_of(pairs: &[(u8, u8)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut codes: Vec<u16> = pairs
        .iter()
        .map(|&(a, s)| (u16::from(a) << 8) | u16::from(s))
        .collect();
    codes.sort_unstable();
    let mut count_a = [0u64; 256];
    let mut count_s = [0u64; 256];
    for &(a, s) in pairs {
        count_a[usize::from(a)] += 1;
        count_s[usize::from(s)] += 1;
    }
    let n = pairs.len() as f64;
    let mut mi = 0.0;
    for run in codes.chunk_by(|x, y| x == y) {
        let c = run.len() as f64;
        let code = run[0];
        let ca = count_a[usize::from(code >> 8)] as f64;
        let cs = count_s[usize::from(code & 0xff)] as f64;
        mi += c * (c * n / (ca * cs)).log2();
    }
    Ok((mi / n).max(0.0))
}

/// Shannon entropy (bits) of a symbol multiset; 0 for an empty one.
pub fn entropy<I: IntoIterator<Item = u8>>(symbols: I) -> f64 {
    let mut counts = [0u64; 256];
    let mut n = 0u64;
    for s in symbols {
        counts[usize::from(s)] += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Time-lagged empowerment at horizon `k`. Empty pair sets and pair sets with
/// a constant action or sensor score exactly 0.
pub fn empowerment(trace: &RolloutTrace, k: usize, crop_last: Option<usize>) -> Result<f64> {
    let pairs = build_pairs(trace, k, crop_last)?;
    let Some(&(a0, s0)) = pairs.pairs.first() else {
        return Ok(0.0);
    };
    if pairs.pairs.iter().all(|&(a, _)| a == a0) || pairs.pairs.iter().all(|&(_, s)| s == s0) {
        return Ok(0.0);
    }
    mutual_information(&pairs)
}

/// Mean over cells of the entropy of each cell's own actions.
pub fn local_action_entropy(trace: &RolloutTrace) -> Measurement {
    let m = trace.grid_size();
    let mut total = 0.0;
    let mut cells = 0usize;
    let mut actions = Vec::with_capacity(trace.steps());
    for row in 0..m {
        for col in 0..m {
            actions.clear();
            actions.extend((1..=trace.steps()).filter_map(|n| trace.cell_step(n, row, col).action()));
            if !actions.is_empty() {
                total += entropy(actions.iter().copied());
                cells += 1;
            }
        }
    }
    if cells == 0 {
        return Measurement {
            value: 0.0,
            degenerate: true,
        };
    }
    Measurement {
        value: total / cells as f64,
        degenerate: false,
    }
}

/// Entropy of all actions of all cells pooled together.
pub fn global_action_entropy(trace: &RolloutTrace) -> Measurement {
    let actions: Vec<u8> = trace.cell_steps().iter().filter_map(|c| c.action()).collect();
    Measurement {
        value: entropy(actions.iter().copied()),
        degenerate: actions.is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nca::{rollout, CellStep, Genome, Reading, RolloutParams};
    use crate::shapes::square_target;

    fn pairs(v: &[(u8, u8)]) -> SensorActionPairs {
        SensorActionPairs { k: 1, pairs: v.to_vec() }
    }

    /// Trace where every listed cell runs at every step with the given
    /// per-step (action, sensor) values.
    fn synthetic(m: usize, steps: usize, cells: &[((u16, u16), Vec<(u8, u8)>)]) -> RolloutTrace {
        let mut recs = Vec::new();
        for ((r, c), series) in cells {
            for (i, &(a, s)) in series.iter().enumerate() {
                recs.push(CellStep {
                    row: *r,
                    col: *c,
                    step: i as u32 + 1,
                    reading: Some(Reading { action: a, sensor: s }),
                });
            }
        }
        RolloutTrace::from_records(m, steps, recs, None).unwrap()
    }

    #[test]
    fn mi_basic_cases() {
        assert!((mutual_information(&pairs(&[(0, 0), (1, 1)])).unwrap() - 1.0).abs() < 1e-12);
        let indep = pairs(&[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert!(mutual_information(&indep).unwrap().abs() < 1e-12);
        assert!(matches!(mutual_information(&pairs(&[])), Err(Error::EmptyDistribution)));
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy([7u8; 10]), 0.0);
        assert!((entropy([0u8, 255, 0, 255]) - 1.0).abs() < 1e-12);
        assert!((entropy(0..=255u8) - 8.0).abs() < 1e-12);
        assert_eq!(entropy(std::iter::empty()), 0.0);
    }

    #[test]
    fn pair_counts_for_always_alive_cell() {
        let series: Vec<(u8, u8)> = (0..50).map(|i| (i as u8, (i * 3) as u8)).collect();
        let t = synthetic(3, 50, &[((1, 1), series)]);
        assert_eq!(build_pairs(&t, 1, None).unwrap().len(), 49);
        assert_eq!(build_pairs(&t, 45, None).unwrap().len(), 5);
        let cropped = build_pairs(&t, 1, Some(5)).unwrap();
        assert_eq!(cropped.len(), 5);
        // last five: actions at n = 45..=49 paired with sensors at 46..=50
        assert_eq!(cropped.pairs[0], (44, (45 * 3) as u8));
        assert_eq!(cropped.pairs[4], (48, (49 * 3) as u8));
        assert!(matches!(build_pairs(&t, 0, None), Err(Error::InvalidHorizon { .. })));
        assert!(matches!(build_pairs(&t, 50, None), Err(Error::InvalidHorizon { .. })));
    }

    #[test]
    fn pairs_need_both_endpoints_executed() {
        // cell alive at steps 1..=3 only, k = 2: only n = 1 qualifies
        let t = synthetic(3, 6, &[((0, 0), vec![(1, 0), (2, 0), (3, 9)])]);
        assert_eq!(build_pairs(&t, 2, None).unwrap().pairs, vec![(1, 9)]);
    }

    #[test]
    fn constant_actions_have_no_empowerment() {
        let series: Vec<(u8, u8)> = (0..10).map(|i| (128, i as u8)).collect();
        let t = synthetic(3, 10, &[((0, 0), series.clone()), ((2, 2), series)]);
        assert_eq!(empowerment(&t, 1, None).unwrap(), 0.0);
        let none = synthetic(3, 10, &[]);
        assert_eq!(empowerment(&none, 1, None).unwrap(), 0.0);
    }

    #[test]
    fn identity_channel_carries_eight_bits() {
        // every cell senses at n+1 exactly what it emitted at n
        let m = 16;
        let steps = 3;
        let mut cells = Vec::new();
        for r in 0..m {
            for c in 0..m {
                let a0 = (r * m + c) as u8;
                let a1 = a0.wrapping_add(77);
                cells.push(((r as u16, c as u16), vec![(a0, 0), (a1, a0), (a0, a1)]));
            }
        }
        let t = synthetic(m, steps, &cells);
        assert!((empowerment(&t, 1, None).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn local_and_global_entropy_differ() {
        let a: Vec<(u8, u8)> = vec![(0, 0); 8];
        let b: Vec<(u8, u8)> = vec![(255, 0); 8];
        let t = synthetic(3, 8, &[((0, 0), a), ((2, 2), b)]);
        assert_eq!(local_action_entropy(&t).value, 0.0);
        assert!((global_action_entropy(&t).value - 1.0).abs() < 1e-12);

        let alt: Vec<(u8, u8)> = [0u8, 255, 0, 255].iter().map(|&x| (x, 0)).collect();
        let t = synthetic(3, 4, &[((1, 1), alt)]);
        assert!((local_action_entropy(&t).value - 1.0).abs() < 1e-12);

        let empty = synthetic(3, 4, &[]);
        assert!(local_action_entropy(&empty).degenerate);
        assert!(global_action_entropy(&empty).degenerate);
    }

    #[test]
    fn loss_anchors() {
        let target = square_target(25, 12).unwrap();
        let params = RolloutParams::new(25, 50);
        let frozen = rollout(&Genome::zeros(0), &params, true).unwrap();
        assert!((loss(&frozen, &target, 0, 50).unwrap() - 143.0 / 625.0).abs() < 1e-12);
        assert!(matches!(loss(&frozen, &target, 10, 10), Err(Error::InvalidLossWindow { .. })));
        assert!(matches!(loss(&frozen, &target, 0, 51), Err(Error::InvalidLossWindow { .. })));
        let no_grids = rollout(&Genome::zeros(0), &params, false).unwrap();
        assert!(matches!(loss(&no_grids, &target, 0, 50), Err(Error::MissingGrids)));
        let other = square_target(27, 12).unwrap();
        assert!(matches!(loss(&frozen, &other, 0, 50), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(ObjectiveSpec::loss(0, 50).validate(50).is_ok());
        assert!(ObjectiveSpec::loss(25, 51).validate(50).is_err());
        assert!(ObjectiveSpec::empowerment(49, None).validate(50).is_ok());
        assert!(ObjectiveSpec::empowerment(50, None).validate(50).is_err());
        assert_eq!(ObjectiveSpec::empowerment(1, None).goal, Goal::Maximize);
        assert_eq!(ObjectiveSpec::local_entropy_max().goal, Goal::Maximize);
        assert_eq!(ObjectiveSpec::global_entropy_min().goal, Goal::Minimize);
    }
}
