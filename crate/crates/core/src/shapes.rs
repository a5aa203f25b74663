//! Target masks the automaton is asked to grow into and hold.
//!
//! Built-in generators always contain the seed cell `(M/2, M/2)`. Files are
//! either a plain grid of `0`/`1` characters (one row per line) or a PBM P1
//! image.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TargetShape {
    size: usize,
    mask: Vec<bool>,
    name: String,
}

impl TargetShape {
    /// Wraps a row-major mask, checking that it is non-empty and that it
    /// covers the seed cell unless `allow_seed_outside` is set.
    pub fn from_mask(size: usize, mask: Vec<bool>, name: impl Into<String>, allow_seed_outside: bool) -> Result<Self> {
        if mask.len() != size * size {
            return Err(Error::TargetDimension(format!(
                "{} cells do not form a {size}x{size} grid",
                mask.len()
            )));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptyMask);
        }
        let shape = TargetShape {
            size,
            mask,
            name: name.into(),
        };
        let c = size / 2;
        if !shape.contains(c, c) {
            if allow_seed_outside {
                log::warn!("target `{}` does not cover the seed cell ({c}, {c})", shape.name);
            } else {
                return Err(Error::SeedOutsideMask(c));
            }
        }
        Ok(shape)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.size + col]
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Text-grid rendering, one line of `0`/`1` per row.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.size * (self.size + 1));
        for row in self.mask.chunks(self.size) {
            out.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().is_some_and(|e| e == "pbm") {
            let mut s = format!("P1\n{0} {0}\n", self.size);
            for row in self.mask.chunks(self.size) {
                let cells: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
                s.push_str(&cells.join(" "));
                s.push('\n');
            }
            s
        } else {
            self.to_text()
        };
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn blank(size: usize) -> Result<Vec<bool>> {
    if size < 3 {
        return Err(Error::InvalidDimension(size));
    }
    Ok(vec![false; size * size])
}

/// Axis-aligned square whose top-left corner sits at `(M - side) / 2`
/// (rounded down) on both axes.
pub fn square_target(size: usize, side: usize) -> Result<TargetShape> {
    if side == 0 || side > size {
        return Err(Error::InvalidShape(format!(
            "square side {side} must be in 1..={size}"
        )));
    }
    let mut mask = blank(size)?;
    let offset = (size - side) / 2;
    for r in offset..offset + side {
        for c in offset..offset + side {
            mask[r * size + c] = true;
        }
    }
    TargetShape::from_mask(size, mask, format!("square:{side}"), false)
}

/// Upward-pointing isosceles triangle. Its `(base + 1) / 2` rows widen by two
/// cells per row; the base row lies on the seed row, centred on the seed
/// column.
pub fn triangle_target(size: usize, base: usize) -> Result<TargetShape> {
    if base.is_multiple_of(2) {
        return Err(Error::InvalidShape(format!(
            "triangle base {base} must be odd"
        )));
    }
    if base > size {
        return Err(Error::InvalidShape(format!(
            "triangle base {base} exceeds grid size {size}"
        )));
    }
    let mut mask = blank(size)?;
    let c = size / 2;
    let rows = base.div_ceil(2);
    for r in 0..rows {
        let row = c + r + 1 - rows;
        for col in c - r..=c + r {
            mask[row * size + col] = true;
        }
    }
    TargetShape::from_mask(size, mask, format!("triangle:{base}"), false)
}

/// Both diagonals through the seed, one cell thick, `arm` cells each way.
pub fn x_target(size: usize, arm: usize) -> Result<TargetShape> {
    let mut mask = blank(size)?;
    let c = size / 2;
    if arm > c || c + arm >= size {
        return Err(Error::InvalidShape(format!(
            "x arm {arm} does not fit a {size}x{size} grid"
        )));
    }
    for d in 0..=arm {
        for (r, col) in [(c - d, c - d), (c - d, c + d), (c + d, c - d), (c + d, c + d)] {
            mask[r * size + col] = true;
        }
    }
    TargetShape::from_mask(size, mask, format!("x:{arm}"), false)
}

/// Loads a text grid or PBM (P1) target, requiring it to be `size`x`size`
/// when `expected_size` is given.
pub fn load_target(path: impl AsRef<Path>, expected_size: Option<usize>, allow_seed_outside: bool) -> Result<TargetShape> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (size, mask) = if text.trim_start().starts_with("P1") {
        parse_pbm(&text)?
    } else {
        parse_text_grid(&text)?
    };
    if let Some(expected) = expected_size {
        if expected != size {
            return Err(Error::ShapeMismatch {
                expected,
                actual: size,
            });
        }
    }
    let name = format!("file:{}", path.display());
    TargetShape::from_mask(size, mask, name, allow_seed_outside)
}

fn parse_text_grid(text: &str) -> Result<(usize, Vec<bool>)> {
    let rows: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let size = rows.len();
    let mut mask = Vec::with_capacity(size * size);
    for (i, row) in rows.iter().enumerate() {
        if row.chars().count() != size {
            return Err(Error::TargetDimension(format!(
                "row {} has {} cells, expected {size}",
                i + 1,
                row.chars().count()
            )));
        }
        for ch in row.chars() {
            match ch {
                '0' => mask.push(false),
                '1' => mask.push(true),
                other => {
                    return Err(Error::Parse {
                        what: "target grid",
                        line: i + 1,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
    }
    if size < 3 {
        return Err(Error::TargetDimension(format!("{size} rows is below the 3x3 minimum")));
    }
    Ok((size, mask))
}

fn parse_pbm(text: &str) -> Result<(usize, Vec<bool>)> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content.split_whitespace() {
            tokens.push((i + 1, tok));
        }
    }
    let parse_err = |line: usize, message: String| Error::Parse {
        what: "PBM",
        line,
        message,
    };
    let mut it = tokens.into_iter();
    match it.next() {
        Some((_, "P1")) => {}
        other => return Err(parse_err(other.map_or(1, |t| t.0), "missing P1 magic".into())),
    }
    let mut dim = |name: &str| -> Result<usize> {
        let (line, tok) = it
            .next()
            .ok_or_else(|| parse_err(0, format!("missing {name}")))?;
        tok.parse()
            .map_err(|_| parse_err(line, format!("bad {name} {tok:?}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    if width != height {
        return Err(Error::TargetDimension(format!("{width}x{height} image")));
    }
    // P1 pixels may be packed without separators.
    let mut mask = Vec::with_capacity(width * height);
    for (line, tok) in it {
        for ch in tok.chars() {
            match ch {
                '0' => mask.push(false),
                '1' => mask.push(true),
                other => return Err(parse_err(line, format!("unexpected character {other:?}"))),
            }
        }
    }
    if mask.len() != width * height {
        return Err(Error::TargetDimension(format!(
            "expected {} pixels, found {}",
            width * height,
            mask.len()
        )));
    }
    if width < 3 {
        return Err(Error::TargetDimension(format!("{width}x{width} is below the 3x3 minimum")));
    }
    Ok((width, mask))
}

/// Parsed form of the `--target` flag: `square:12`, `triangle:13`, `x:5`, or
/// `file:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TargetSpec {
    Square(usize),
    Triangle(usize),
    X(usize),
    File(String),
}

impl TargetSpec {
    pub fn build(&self, size: usize) -> Result<TargetShape> {
        match self {
            TargetSpec::Square(side) => square_target(size, *side),
            TargetSpec::Triangle(base) => triangle_target(size, *base),
            TargetSpec::X(arm) => x_target(size, *arm),
            TargetSpec::File(path) => load_target(path, Some(size), false),
        }
    }

    /// Resolves a relative file path against `base`.
    pub fn resolved_against(&self, base: &Path) -> TargetSpec {
        match self {
            TargetSpec::File(p) if Path::new(p).is_relative() => {
                TargetSpec::File(base.join(p).to_string_lossy().into_owned())
            }
            other => other.clone(),
        }
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Square(n) => write!(f, "square:{n}"),
            TargetSpec::Triangle(n) => write!(f, "triangle:{n}"),
            TargetSpec::X(n) => write!(f, "x:{n}"),
            TargetSpec::File(p) => write!(f, "file:{p}"),
        }
    }
}

impl FromStr for TargetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidShape(format!("target spec {s:?} is not <kind>:<arg>")))?;
        let num = || {
            arg.parse::<usize>()
                .map_err(|_| Error::InvalidShape(format!("target spec {s:?}: {arg:?} is not a size")))
        };
        match kind {
            "square" => Ok(TargetSpec::Square(num()?)),
            "triangle" => Ok(TargetSpec::Triangle(num()?)),
            "x" => Ok(TargetSpec::X(num()?)),
            "file" if !arg.is_empty() => Ok(TargetSpec::File(arg.to_string())),
            _ => Err(Error::InvalidShape(format!("unknown target spec {s:?}"))),
        }
    }
}

impl TryFrom<String> for TargetSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TargetSpec> for String {
    fn from(t: TargetSpec) -> String {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(t: &TargetShape) -> Vec<(usize, usize)> {
        let m = t.size();
        (0..m * m).filter(|&i| t.mask()[i]).map(|i| (i / m, i % m)).collect()
    }

    #[test]
    fn square_placement() {
        let t = square_target(25, 12).unwrap();
        assert_eq!(t.cell_count(), 144);
        let c = cells(&t);
        assert_eq!(c.first(), Some(&(6, 6)));
        assert_eq!(c.last(), Some(&(17, 17)));

        assert_eq!(square_target(3, 3).unwrap().cell_count(), 9);

        let big = square_target(50, 24).unwrap();
        assert_eq!(big.cell_count(), 576);
        assert!(big.contains(13, 13) && big.contains(36, 36));
        assert!(!big.contains(12, 13) && !big.contains(37, 36));

        assert!(square_target(25, 26).is_err());
        assert!(square_target(25, 0).is_err());
    }

    #[test]
    fn triangle_rows() {
        let t = triangle_target(25, 13).unwrap();
        assert_eq!(t.cell_count(), 49);
        for r in 0..25 {
            let width = (0..25).filter(|&c| t.contains(r, c)).count();
            let expected = if (6..=12).contains(&r) { 2 * (r - 6) + 1 } else { 0 };
            assert_eq!(width, expected, "row {r}");
        }
        assert!(t.contains(12, 6) && t.contains(12, 18) && t.contains(6, 12));

        let one = triangle_target(25, 1).unwrap();
        assert_eq!(cells(&one), vec![(12, 12)]);
        assert!(triangle_target(25, 12).is_err());
        assert!(triangle_target(11, 13).is_err());
        // widest base that fits an even grid
        assert!(triangle_target(10, 9).is_ok());
    }

    #[test]
    fn x_shape() {
        assert_eq!(cells(&x_target(25, 0).unwrap()), vec![(12, 12)]);
        let t = x_target(25, 5).unwrap();
        assert_eq!(t.cell_count(), 21);
        // 90 degree rotation about the seed maps (r, c) -> (c, 2s - r)
        for (r, c) in cells(&t) {
            assert!(t.contains(c, 24 - r));
        }
        assert!(x_target(25, 12).is_ok());
        assert!(x_target(25, 13).is_err());
        assert!(x_target(10, 5).is_err());
    }

    #[test]
    fn seed_outside_needs_override() {
        let mut mask = vec![false; 9];
        mask[0] = true;
        assert!(matches!(
            TargetShape::from_mask(3, mask.clone(), "corner", false),
            Err(Error::SeedOutsideMask(1))
        ));
        assert!(TargetShape::from_mask(3, mask, "corner", true).is_ok());
    }

    #[test]
    fn text_and_pbm_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dot.txt");
        fs::write(&p, "000\n010\n000\n").unwrap();
        let t = load_target(&p, None, false).unwrap();
        assert_eq!(cells(&t), vec![(1, 1)]);

        fs::write(&p, "000\n000\n000\n").unwrap();
        assert!(matches!(load_target(&p, None, false), Err(Error::EmptyMask)));

        fs::write(&p, "000\n01\n000\n").unwrap();
        assert!(matches!(load_target(&p, None, false), Err(Error::TargetDimension(_))));

        fs::write(&p, "000\n0x0\n000\n").unwrap();
        assert!(matches!(load_target(&p, None, false), Err(Error::Parse { line: 2, .. })));

        fs::write(&p, "000\n010\n000\n").unwrap();
        assert!(matches!(load_target(&p, Some(25), false), Err(Error::ShapeMismatch { .. })));

        let pbm = dir.path().join("dot.pbm");
        fs::write(&pbm, "P1\n# comment\n3 3\n0 0 0\n0 1 1\n000\n").unwrap();
        let t = load_target(&pbm, Some(3), false).unwrap();
        assert_eq!(cells(&t), vec![(1, 1), (1, 2)]);

        fs::write(&pbm, "P1\n3 2\n000\n010\n").unwrap();
        assert!(matches!(load_target(&pbm, None, false), Err(Error::TargetDimension(_))));
    }

    #[test]
    fn save_reload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sq = square_target(25, 12).unwrap();
        for name in ["sq.txt", "sq.pbm"] {
            let p = dir.path().join(name);
            sq.save(&p).unwrap();
            let back = load_target(&p, Some(25), false).unwrap();
            assert_eq!(back.mask(), sq.mask());
        }
    }

    #[test]
    fn target_spec_parsing() {
        assert_eq!("square:12".parse::<TargetSpec>().unwrap(), TargetSpec::Square(12));
        assert_eq!("triangle:13".parse::<TargetSpec>().unwrap(), TargetSpec::Triangle(13));
        assert_eq!("x:5".parse::<TargetSpec>().unwrap(), TargetSpec::X(5));
        assert_eq!(
            "file:data/biped.txt".parse::<TargetSpec>().unwrap(),
            TargetSpec::File("data/biped.txt".into())
        );
        for bad in ["square", "circle:4", "square:-1", "file:"] {
            assert!(bad.parse::<TargetSpec>().is_err(), "{bad}");
        }
        let json = serde_json::to_string(&TargetSpec::X(5)).unwrap();
        assert_eq!(json, "\"x:5\"");
    }
}
