//! Two-channel neural cellular automaton.
//!
//! Each cell carries a live/dead flag and an 8-bit signal. Every live cell runs
//! the same single-layer network on its Von Neumann neighbourhood, sets its own
//! signal, and may replicate itself into any of its four neighbours. Cells are
//! visited in row-major order and the grid is updated in place, so a cell sees
//! neighbours that were already rewritten earlier in the same pass.

mod export;
mod genome;

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::{ascii_render, write_frames, write_pbm, write_pgm};
pub use genome::{Genome, NUM_INPUTS, NUM_OUTPUTS, NUM_PARAMS};

/// Neighbour order used for inputs and replication bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    fn offset(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }
}

/// What a replication bit of `false` does to the neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathRule {
    /// A cleared bit leaves the neighbour untouched; cells never die.
    LiteralReplicate,
    /// Every neighbour is written: set bit copies the cell, cleared bit kills.
    #[default]
    OverwriteAlways,
}

/// Order in which cells within one update read and write the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSchedule {
    /// Single in-place row-major pass.
    #[default]
    Raster,
    /// All live cells read the previous grid; writes are applied to a copy in
    /// row-major order.
    DoubleBuffered,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    size: usize,
    alive: Vec<bool>,
    signal: Vec<u8>,
}

impl GridState {
    /// An `size`x`size` grid with no live cells.
    pub fn empty(size: usize) -> Result<Self> {
        if size < 3 {
            return Err(Error::InvalidDimension(size));
        }
        Ok(GridState {
            size,
            alive: vec![false; size * size],
            signal: vec![0; size * size],
        })
    }

    /// Builds a grid from row-major alive flags and signals. Dead cells have
    /// their signal forced to 0.
    pub fn from_parts(size: usize, alive: Vec<bool>, signal: Vec<u8>) -> Result<Self> {
        if size < 3 {
            return Err(Error::InvalidDimension(size));
        }
        if alive.len() != size * size || signal.len() != size * size {
            return Err(Error::ShapeMismatch {
                expected: size,
                actual: (alive.len().min(signal.len()) as f64).sqrt() as usize,
            });
        }
        let mut grid = GridState {
            size,
            alive,
            signal,
        };
        grid.clear_dead_signals();
        Ok(grid)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn center(&self) -> (usize, usize) {
        (self.size / 2, self.size / 2)
    }

    pub fn alive(&self, row: usize, col: usize) -> bool {
        self.alive[row * self.size + col]
    }

    pub fn signal(&self, row: usize, col: usize) -> u8 {
        self.signal[row * self.size + col]
    }

    /// Sets a cell. Killing a cell also zeroes its signal.
    pub fn set(&mut self, row: usize, col: usize, alive: bool, signal: u8) {
        let idx = row * self.size + col;
        self.alive[idx] = alive;
        self.signal[idx] = if alive { signal } else { 0 };
    }

    pub fn alive_mask(&self) -> &[bool] {
        &self.alive
    }

    pub fn signals(&self) -> &[u8] {
        &self.signal
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    fn neighbor(&self, row: usize, col: usize, dir: Direction) -> Option<usize> {
        let (dr, dc) = dir.offset();
        let r = row.checked_add_signed(dr)?;
        let c = col.checked_add_signed(dc)?;
        (r < self.size && c < self.size).then(|| r * self.size + c)
    }

    fn clear_dead_signals(&mut self) {
        for (s, &a) in self.signal.iter_mut().zip(&self.alive) {
            if !a {
                *s = 0;
            }
        }
    }
}

/// The starting grid: one live cell with zero signal at the centre.
pub fn new_seed_grid(size: usize) -> Result<GridState> {
    let mut grid = GridState::empty(size)?;
    let (r, c) = grid.center();
    grid.set(r, c, true, 0);
    Ok(grid)
}

/// Network inputs for the cell at (`row`, `col`):
/// `[alive up, down, left, right, self, signal up, down, left, right, self]`,
/// with alive flags as 0/1 and signals scaled to [0, 1]. Cells beyond the
/// edge read as dead with zero signal.
pub fn cell_inputs(grid: &GridState, row: usize, col: usize) -> [f64; NUM_INPUTS] {
    let mut inputs = [0.0; NUM_INPUTS];
    for (d, dir) in Direction::ALL.into_iter().enumerate() {
        if let Some(idx) = grid.neighbor(row, col, dir) {
            inputs[d] = if grid.alive[idx] { 1.0 } else { 0.0 };
            inputs[5 + d] = f64::from(grid.signal[idx]) / 255.0;
        }
    }
    let idx = row * grid.size + col;
    inputs[4] = if grid.alive[idx] { 1.0 } else { 0.0 };
    inputs[9] = f64::from(grid.signal[idx]) / 255.0;
    inputs
}

/// Sensor reading: mean of the five raw signals in the neighbourhood
/// (self included), rounded half up.
pub fn cell_sensor(grid: &GridState, row: usize, col: usize) -> u8 {
    let mut sum = u32::from(grid.signal(row, col));
    for dir in Direction::ALL {
        if let Some(idx) = grid.neighbor(row, col, dir) {
            sum += u32::from(grid.signal[idx]);
        }
    }
    // floor(sum / 5 + 1/2)
    ((2 * sum + 5) / 10) as u8
}

/// Output of one network evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellAction {
    /// Replicate bits in [`Direction::ALL`] order.
    pub replicate: [bool; 4],
    pub new_signal: u8,
}

/// Evaluates the network: bit `d` fires when its pre-activation is positive,
/// and the signal output is `floor(256 * logistic(z))` clamped to 255.
pub fn network_forward(genome: &Genome, inputs: &[f64; NUM_INPUTS]) -> Result<CellAction> {
    genome.validate()?;
    Ok(forward(genome, inputs))
}

fn forward(genome: &Genome, inputs: &[f64; NUM_INPUTS]) -> CellAction {
    let mut z = genome.bias;
    for (zo, row) in z.iter_mut().zip(&genome.weights) {
        for (w, x) in row.iter().zip(inputs) {
            *zo += w * x;
        }
    }
    let sigma = 1.0 / (1.0 + (-z[4]).exp());
    let new_signal = (256.0 * sigma).floor().clamp(0.0, 255.0) as u8;
    CellAction {
        replicate: [z[0] > 0.0, z[1] > 0.0, z[2] > 0.0, z[3] > 0.0],
        new_signal,
    }
}

/// Sensor and action of a cell that ran its network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Reading {
    pub action: u8,
    pub sensor: u8,
}

/// One cell at one update. `reading` is present exactly when the cell was
/// alive at its visitation and ran its network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellStep {
    pub row: u16,
    pub col: u16,
    pub step: u32,
    pub reading: Option<Reading>,
}

impl CellStep {
    pub fn executed(&self) -> bool {
        self.reading.is_some()
    }

    pub fn action(&self) -> Option<u8> {
        self.reading.map(|r| r.action)
    }

    pub fn sensor(&self) -> Option<u8> {
        self.reading.map(|r| r.sensor)
    }
}

/// Applies one update to `grid` and returns the new state together with a
/// record for every cell (row-major).
pub fn step(grid: &GridState, genome: &Genome, death_rule: DeathRule) -> Result<(GridState, Vec<CellStep>)> {
    step_with(grid, genome, death_rule, UpdateSchedule::Raster, 1)
}

/// [`step`] with an explicit schedule; `step_index` is stored in the records.
pub fn step_with(
    grid: &GridState,
    genome: &Genome,
    death_rule: DeathRule,
    schedule: UpdateSchedule,
    step_index: u32,
) -> Result<(GridState, Vec<CellStep>)> {
    genome.validate()?;
    let mut next = grid.clone();
    let mut records = Vec::with_capacity(grid.size * grid.size);
    advance(&mut next, genome, death_rule, schedule, step_index, &mut records);
    Ok((next, records))
}

fn advance(
    grid: &mut GridState,
    genome: &Genome,
    death_rule: DeathRule,
    schedule: UpdateSchedule,
    step_index: u32,
    records: &mut Vec<CellStep>,
) {
    let size = grid.size;
    let previous = match schedule {
        UpdateSchedule::Raster => None,
        UpdateSchedule::DoubleBuffered => Some(grid.clone()),
    };
    for row in 0..size {
        for col in 0..size {
            let idx = row * size + col;
            let view = previous.as_ref().unwrap_or(grid);
            let mut record = CellStep {
                row: row as u16,
                col: col as u16,
                step: step_index,
                reading: None,
            };
            if !view.alive[idx] {
                records.push(record);
                continue;
            }
            let sensor = cell_sensor(view, row, col);
            let action = forward(genome, &cell_inputs(view, row, col));
            record.reading = Some(Reading {
                action: action.new_signal,
                sensor,
            });
            records.push(record);

            grid.signal[idx] = action.new_signal;
            for (dir, fire) in Direction::ALL.into_iter().zip(action.replicate) {
                let Some(target) = grid.neighbor(row, col, dir) else {
                    continue;
                };
                if fire {
                    grid.alive[target] = true;
                    grid.signal[target] = action.new_signal;
                } else if death_rule == DeathRule::OverwriteAlways {
                    grid.alive[target] = false;
                    grid.signal[target] = 0;
                }
            }
        }
    }
    grid.clear_dead_signals();
}

/// Simulation settings shared by every rollout in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RolloutParams {
    pub grid_size: usize,
    pub steps: usize,
    pub death_rule: DeathRule,
    pub schedule: UpdateSchedule,
}

impl RolloutParams {
    pub fn new(grid_size: usize, steps: usize) -> Self {
        RolloutParams {
            grid_size,
            steps,
            death_rule: DeathRule::default(),
            schedule: UpdateSchedule::default(),
        }
    }

    pub fn with_death_rule(mut self, rule: DeathRule) -> Self {
        self.death_rule = rule;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }
}

/// Everything recorded during a rollout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RolloutTrace {
    grid_size: usize,
    steps: usize,
    /// Indexed by `(step - 1) * M * M + row * M + col`.
    cell_steps: Vec<CellStep>,
    /// Index 0 is the seed, index `n` the state after update `n`.
    grids: Option<Vec<GridState>>,
}

impl RolloutTrace {
    /// Assembles a trace from explicit records. Records may be given in any
    /// order; missing (cell, step) slots are filled as not executed.
    pub fn from_records(
        grid_size: usize,
        steps: usize,
        records: impl IntoIterator<Item = CellStep>,
        grids: Option<Vec<GridState>>,
    ) -> Result<Self> {
        if grid_size < 3 {
            return Err(Error::InvalidDimension(grid_size));
        }
        if steps == 0 {
            return Err(Error::InvalidSteps(steps));
        }
        let cells = grid_size * grid_size;
        let mut cell_steps: Vec<CellStep> = (0..steps * cells)
            .map(|i| CellStep {
                row: ((i % cells) / grid_size) as u16,
                col: (i % grid_size) as u16,
                step: (i / cells + 1) as u32,
                reading: None,
            })
            .collect();
        for rec in records {
            let (r, c, n) = (rec.row as usize, rec.col as usize, rec.step as usize);
            if r >= grid_size || c >= grid_size || n == 0 || n > steps {
                return Err(Error::ShapeMismatch {
                    expected: grid_size,
                    actual: r.max(c) + 1,
                });
            }
            cell_steps[(n - 1) * cells + r * grid_size + c] = rec;
        }
        if let Some(g) = &grids {
            if g.len() != steps + 1 {
                return Err(Error::InvalidSteps(g.len().saturating_sub(1)));
            }
            if let Some(bad) = g.iter().find(|g| g.size != grid_size) {
                return Err(Error::ShapeMismatch {
                    expected: grid_size,
                    actual: bad.size,
                });
            }
        }
        Ok(RolloutTrace {
            grid_size,
            steps,
            cell_steps,
            grids,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn cell_steps(&self) -> &[CellStep] {
        &self.cell_steps
    }

    /// Record for one cell at update `step` (1-based).
    pub fn cell_step(&self, step: usize, row: usize, col: usize) -> &CellStep {
        let m = self.grid_size;
        &self.cell_steps[(step - 1) * m * m + row * m + col]
    }

    pub fn grids(&self) -> Option<&[GridState]> {
        self.grids.as_deref()
    }

    /// Stable 64-bit fingerprint of the whole trace.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

/// Runs `params.steps` updates from the seed grid.
pub fn rollout(genome: &Genome, params: &RolloutParams, record_grids: bool) -> Result<RolloutTrace> {
    genome.validate()?;
    if params.steps == 0 {
        return Err(Error::InvalidSteps(0));
    }
    let mut grid = new_seed_grid(params.grid_size)?;
    let cells = params.grid_size * params.grid_size;
    let mut cell_steps = Vec::with_capacity(cells * params.steps);
    let mut grids = record_grids.then(|| {
        let mut v = Vec::with_capacity(params.steps + 1);
        v.push(grid.clone());
        v
    });
    for n in 1..=params.steps {
        advance(
            &mut grid,
            genome,
            params.death_rule,
            params.schedule,
            n as u32,
            &mut cell_steps,
        );
        if let Some(g) = grids.as_mut() {
            g.push(grid.clone());
        }
    }
    Ok(RolloutTrace {
        grid_size: params.grid_size,
        steps: params.steps,
        cell_steps,
        grids,
    })
}
