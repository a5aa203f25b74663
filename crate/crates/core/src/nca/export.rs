//! Plain-text frame export (PBM P1 for the alive channel, PGM P2 for signals)
//! and a terminal rendering.

use std::fs;
use std::path::{Path, PathBuf};

use super::GridState;
use crate::error::{Error, Result};

pub fn pbm_string(grid: &GridState) -> String {
    let m = grid.size();
    let mut out = format!("P1\n{m} {m}\n");
    for row in grid.alive_mask().chunks(m) {
        let line: Vec<&str> = row.iter().map(|&a| if a { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn pgm_string(grid: &GridState) -> String {
    let m = grid.size();
    let mut out = format!("P2\n{m} {m}\n255\n");
    for row in grid.signals().chunks(m) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_pbm(grid: &GridState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pbm_string(grid)).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(grid: &GridState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pgm_string(grid)).map_err(|e| Error::io(path, e))
}

/// Writes `frame_%04d.pbm` and `frame_%04d.pgm` for every grid into `dir`.
pub fn write_frames(grids: &[GridState], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(grids.len() * 2);
    for (n, grid) in grids.iter().enumerate() {
        let pbm = dir.join(format!("frame_{n:04}.pbm"));
        let pgm = dir.join(format!("frame_{n:04}.pgm"));
        write_pbm(grid, &pbm)?;
        write_pgm(grid, &pgm)?;
        written.push(pbm);
        written.push(pgm);
    }
    Ok(written)
}

/// `.` for dead cells; live cells shaded by signal from `:` (low) to `@` (high).
pub fn ascii_render(grid: &GridState) -> String {
    const SHADES: &[u8] = b":-=+*#%@";
    let m = grid.size();
    let mut out = String::with_capacity(m * (m + 1));
    for r in 0..m {
        for c in 0..m {
            let ch = if grid.alive(r, c) {
                SHADES[usize::from(grid.signal(r, c)) * SHADES.len() / 256] as char
            } else {
                '.'
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}
