//! Post-hoc analysis of evolved automata: behaviour past the evolved horizon,
//! morphology of the final state, and the rank-sum test used to compare
//! variants.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::nca::{rollout, Genome, GridState, RolloutParams, RolloutTrace};
use crate::objectives::{mask_distance, Measurement};
use crate::shapes::TargetShape;

/// Mask distance to `target` after every update `1..=N_evolved + N_extra`.
pub fn extended_loss_series(
    genome: &Genome,
    params: &RolloutParams,
    extra_steps: usize,
    target: &TargetShape,
) -> Result<Vec<(usize, f64)>> {
    let extended = params.with_steps(params.steps + extra_steps);
    let trace = rollout(genome, &extended, true)?;
    let grids = trace.grids().ok_or(Error::MissingGrids)?;
    grids
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, g)| Ok((n, mask_distance(g, target)?)))
        .collect()
}

/// Least-squares slope of loss against step over `from..=to`.
pub fn stability_slope(series: &[(usize, f64)], from: usize, to: usize) -> Result<f64> {
    let window: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, _)| (from..=to).contains(n))
        .map(|&(n, l)| (n as f64, l))
        .collect();
    if from >= to || window.len() < 2 {
        return Err(Error::DegenerateWindow { from, to });
    }
    let len = window.len() as f64;
    let mean_x = window.iter().map(|p| p.0).sum::<f64>() / len;
    let mean_y = window.iter().map(|p| p.1).sum::<f64>() / len;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &window {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateWindow { from, to });
    }
    Ok(sxy / sxx)
}

/// Alive-mask distance between the state after `2N` updates and after `N`.
pub fn instability(genome: &Genome, params: &RolloutParams) -> Result<f64> {
    let n = params.steps;
    let trace = rollout(genome, &params.with_steps(2 * n), true)?;
    let grids = trace.grids().ok_or(Error::MissingGrids)?;
    Ok(mask_difference(&grids[n], &grids[2 * n]))
}

/// Fraction of cells whose alive flags differ between two grids.
pub fn mask_difference(a: &GridState, b: &GridState) -> f64 {
    let differing = a
        .alive_mask()
        .iter()
        .zip(b.alive_mask())
        .filter(|(x, y)| x != y)
        .count();
    differing as f64 / a.alive_mask().len() as f64
}

/// Per-cell alive/dead switches after each cell's first live state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transiency {
    /// Mean switches over cells that were ever alive.
    pub mean: Measurement,
    /// Total switches over all cells.
    pub total: usize,
    pub ever_alive: usize,
}

pub fn transiency(trace: &RolloutTrace) -> Result<Transiency> {
    let grids = trace.grids().ok_or(Error::MissingGrids)?;
    let cells = trace.grid_size() * trace.grid_size();
    let mut total = 0usize;
    let mut ever_alive = 0usize;
    for idx in 0..cells {
        let mut states = grids.iter().map(|g| g.alive_mask()[idx]);
        if states.by_ref().find(|&a| a).is_none() {
            continue;
        }
        ever_alive += 1;
        let mut previous = true;
        for state in states {
            if state != previous {
                total += 1;
                previous = state;
            }
        }
    }
    let mean = if ever_alive == 0 {
        Measurement {
            value: 0.0,
            degenerate: true,
        }
    } else {
        Measurement {
            value: total as f64 / ever_alive as f64,
            degenerate: false,
        }
    };
    Ok(Transiency {
        mean,
        total,
        ever_alive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Up, down, left, right.
    #[default]
    Four,
    /// Four plus diagonals.
    Eight,
}

/// Number of connected components of live cells.
pub fn connected_components(grid: &GridState, connectivity: Connectivity) -> usize {
    let m = grid.size();
    let alive = grid.alive_mask();
    let mut seen = vec![false; m * m];
    let mut stack = Vec::new();
    let mut components = 0;
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    for start in 0..m * m {
        if !alive[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / m, idx % m);
            for &(dr, dc) in offsets {
                let (Some(nr), Some(nc)) = (r.checked_add_signed(dr), c.checked_add_signed(dc)) else {
                    continue;
                };
                if nr >= m || nc >= m {
                    continue;
                }
                let n = nr * m + nc;
                if alive[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
    }
    components
}

/// Share of live cells on the outermost ring of the grid; 0 with no live cells.
pub fn boundary_proportion(grid: &GridState) -> f64 {
    let m = grid.size();
    let (mut edge, mut alive) = (0usize, 0usize);
    for r in 0..m {
        for c in 0..m {
            if grid.alive(r, c) {
                alive += 1;
                if r == 0 || c == 0 || r == m - 1 || c == m - 1 {
                    edge += 1;
                }
            }
        }
    }
    if alive == 0 {
        0.0
    } else {
        edge as f64 / alive as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Sample `a` tends to be smaller than `b`.
    Less,
    /// Sample `a` tends to be larger than `b`.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Mann-Whitney U of the first sample: pairs with `a > b`, ties counting 1/2.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney U) test.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<RankSum> {
    rank_sum_test_with(a, b, Alternative::TwoSided)
}

/// Rank-sum test with midranks for ties, tie-corrected variance, a 0.5
/// continuity correction and a normal approximation for the p-value.
pub fn rank_sum_test_with(a: &[f64], b: &[f64], alternative: Alternative) -> Result<RankSum> {
    for s in [a, b] {
        if s.len() < 3 {
            return Err(Error::SampleTooSmall(s.len()));
        }
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += midrank * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mean = n1 * n2 / 2.0;
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        // every value tied
        return Ok(RankSum {
            u,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let sd = variance.sqrt();
    let normal = Normal::standard();
    let (z, p) = match alternative {
        Alternative::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            (z * (u - mean).signum(), (2.0 * normal.sf(z)).min(1.0))
        }
        Alternative::Greater => {
            let z = (u - mean - 0.5) / sd;
            (z, normal.sf(z))
        }
        Alternative::Less => {
            let z = (u - mean + 0.5) / sd;
            (z, normal.cdf(z))
        }
    };
    Ok(RankSum { u, z, p_value: p })
}

/// Per-comparison significance level under a Bonferroni correction.
pub fn bonferroni_alpha(alpha: f64, comparisons: usize) -> f64 {
    alpha / comparisons.max(1) as f64
}

/// Mean with a normal-approximation 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

pub fn mean_ci95(values: &[f64]) -> MeanCi {
    if values.is_empty() {
        return MeanCi {
            mean: f64::NAN,
            low: f64::NAN,
            high: f64::NAN,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MeanCi {
            mean,
            low: mean,
            high: mean,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.959_963_984_540_054 * (var / n).sqrt();
    MeanCi {
        mean,
        low: mean - half,
        high: mean + half,
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}
