//! Rasters, regions, colors and locations.
//!
//! A [`Raster`] is the dense rectangular grid exchanged with task files; a
//! [`Region`] is the sparse pixel set the DSL computes on. Conversion between
//! the two is lossless for every valid raster.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length limit for rasters.
pub const MAX_SIDE: usize = 30;

/// One of the ten categorical cell values. There is no ordering semantics
/// between colors; the derived `Ord` exists only to give containers a
/// deterministic layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Color {
    Black = 0,
    Blue = 1,
    Red = 2,
    Green = 3,
    Yellow = 4,
    Grey = 5,
    Fuchsia = 6,
    Orange = 7,
    Teal = 8,
    Brown = 9,
}

impl Color {
    pub const ALL: [Color; 10] = [
        Color::Black,
        Color::Blue,
        Color::Red,
        Color::Green,
        Color::Yellow,
        Color::Grey,
        Color::Fuchsia,
        Color::Orange,
        Color::Teal,
        Color::Brown,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Color, GridError> {
        Color::ALL
            .get(code as usize)
            .copied()
            .ok_or(GridError::BadColor(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Black => "Black",
            Color::Blue => "Blue",
            Color::Red => "Red",
            Color::Green => "Green",
            Color::Yellow => "Yellow",
            Color::Grey => "Grey",
            Color::Fuchsia => "Fuchsia",
            Color::Orange => "Orange",
            Color::Teal => "Teal",
            Color::Brown => "Brown",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A grid position. Row grows downward, column rightward, origin top-left.
/// Components are unbounded; bounds are enforced only when rasterizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Loc {
    pub row: i64,
    pub col: i64,
}

impl Loc {
    pub fn new(row: i64, col: i64) -> Loc {
        Loc { row, col }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

impl std::ops::Add for Loc {
    type Output = Loc;
    fn add(self, rhs: Loc) -> Loc {
        Loc::new(self.row + rhs.row, self.col + rhs.col)
    }
}

impl std::ops::Sub for Loc {
    type Output = Loc;
    fn sub(self, rhs: Loc) -> Loc {
        Loc::new(self.row - rhs.row, self.col - rhs.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("pixel {0} is outside the {MAX_SIDE}x{MAX_SIDE} canvas")]
    OutOfCanvas(Loc),
    #[error("raster dimensions {height}x{width} out of range 1..={MAX_SIDE}")]
    BadDimensions { height: usize, width: usize },
    #[error("cell value {0} is not a color code")]
    BadColor(u8),
    #[error("expected {expected} cells, got {got}")]
    CellCount { expected: usize, got: usize },
}

/// Dense rectangular grid of colors, row-major, 1..=30 per side.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Raster {
    height: usize,
    width: usize,
    cells: Vec<Color>,
}

impl Raster {
    pub fn new(height: usize, width: usize, cells: Vec<Color>) -> Result<Raster, GridError> {
        if height == 0 || width == 0 || height > MAX_SIDE || width > MAX_SIDE {
            return Err(GridError::BadDimensions { height, width });
        }
        if cells.len() != height * width {
            return Err(GridError::CellCount {
                expected: height * width,
                got: cells.len(),
            });
        }
        Ok(Raster {
            height,
            width,
            cells,
        })
    }

    /// Builds a raster from rows of raw color codes, validating range.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Raster, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(GridError::BadDimensions { height, width });
        }
        let mut cells = Vec::with_capacity(height * width);
        for row in rows {
            for &code in row {
                cells.push(Color::from_code(code)?);
            }
        }
        Raster::new(height, width, cells)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> Color {
        self.cells[row * self.width + col]
    }

    pub fn cells(&self) -> &[Color] {
        &self.cells
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Color]> {
        self.cells.chunks(self.width)
    }

    pub fn to_code_rows(&self) -> Vec<Vec<u8>> {
        self.rows()
            .map(|r| r.iter().map(|c| c.code()).collect())
            .collect()
    }

    /// One pixel per cell, black included, in canonical row-major order.
    pub fn to_region(&self) -> Region {
        let mut pixels = BTreeMap::new();
        for row in 0..self.height {
            for col in 0..self.width {
                pixels.insert(Loc::new(row as i64, col as i64), self.get(row, col));
            }
        }
        Region { pixels }
    }
}

/// Sparse set of colored pixels keyed by position. Iteration order is
/// row-major by (row, col), which is the canonical order everywhere.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Region {
    pixels: BTreeMap<Loc, Color>,
}

impl Region {
    pub fn empty() -> Region {
        Region::default()
    }

    /// Collects pixels; at duplicate positions the last write wins.
    pub fn from_pixels<I: IntoIterator<Item = (Loc, Color)>>(iter: I) -> Region {
        Region {
            pixels: iter.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn color_at(&self, loc: Loc) -> Option<Color> {
        self.pixels.get(&loc).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Loc, Color)> + '_ {
        self.pixels.iter().map(|(l, c)| (*l, *c))
    }

    pub fn insert(&mut self, loc: Loc, color: Color) {
        self.pixels.insert(loc, color);
    }

    /// Top-left and bottom-right corners of the minimal enclosing
    /// rectangle, inclusive.
    pub fn bounding_box(&self) -> Result<(Loc, Loc), GridError> {
        if self.pixels.is_empty() {
            return Err(GridError::EmptyRegion);
        }
        let mut min_row = i64::MAX;
        let mut max_row = i64::MIN;
        let mut min_col = i64::MAX;
        let mut max_col = i64::MIN;
        for loc in self.pixels.keys() {
            min_row = min_row.min(loc.row);
            max_row = max_row.max(loc.row);
            min_col = min_col.min(loc.col);
            max_col = max_col.max(loc.col);
        }
        Ok((Loc::new(min_row, min_col), Loc::new(max_row, max_col)))
    }

    /// Rasterizes onto a canvas spanning the origin through the furthest
    /// pixel. Unoccupied cells become black. Fails on the empty region and
    /// on any pixel outside the canvas bounds; degenerate programs must not
    /// pass for solutions by silent clipping.
    pub fn to_raster(&self) -> Result<Raster, GridError> {
        if self.pixels.is_empty() {
            return Err(GridError::EmptyRegion);
        }
        let mut max_row = 0i64;
        let mut max_col = 0i64;
        for loc in self.pixels.keys() {
            if loc.row < 0 || loc.col < 0 || loc.row >= MAX_SIDE as i64 || loc.col >= MAX_SIDE as i64
            {
                return Err(GridError::OutOfCanvas(*loc));
            }
            max_row = max_row.max(loc.row);
            max_col = max_col.max(loc.col);
        }
        let height = (max_row + 1) as usize;
        let width = (max_col + 1) as usize;
        let mut cells = vec![Color::Black; height * width];
        for (loc, color) in &self.pixels {
            cells[loc.row as usize * width + loc.col as usize] = *color;
        }
        Raster::new(height, width, cells)
    }
}

impl FromIterator<(Loc, Color)> for Region {
    fn from_iter<I: IntoIterator<Item = (Loc, Color)>>(iter: I) -> Region {
        Region::from_pixels(iter)
    }
}
