use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::GridError;
use crate::geom::{Bounds, Point};

/// Static world raster. Row 0 is the top of the map; the center of cell
/// `(col, row)` is at `((col + 0.5) * res, (height - row - 0.5) * res)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<f64>,
}

/// Occupancy at or above which a cell (or footprint) counts as blocked.
pub const OCCUPIED_THRESHOLD: f64 = 0.5;

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, cells: Vec<f64>) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::Invalid("zero-sized grid".into()));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(GridError::Invalid(format!("resolution {resolution} must be positive")));
        }
        if cells.len() != width * height {
            return Err(GridError::Invalid(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(GridError::Invalid(format!("cell value {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            resolution,
            cells,
        })
    }

    /// An all-free grid.
    pub fn free(width: usize, height: usize, resolution: f64) -> Result<Self, GridError> {
        Self::new(width, height, resolution, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(Point::new(0.0, 0.0), Point::new(self.width_m(), self.height_m()))
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        assert!((0.0..=1.0).contains(&value), "occupancy must lie in [0, 1]");
        self.cells[row * self.width + col] = value;
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            (col as f64 + 0.5) * self.resolution,
            (self.height as f64 - row as f64 - 0.5) * self.resolution,
        )
    }

    /// Cell containing a world position, `None` outside the map.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if !self.bounds().contains(&p) {
            return None;
        }
        let col = ((p.x / self.resolution).floor() as usize).min(self.width - 1);
        let from_bottom = ((p.y / self.resolution).floor() as usize).min(self.height - 1);
        Some((col, self.height - 1 - from_bottom))
    }

    /// Maximum occupancy over cells whose centers lie within `robot_radius`
    /// of `position`. Positions off the map count as certain collision.
    pub fn static_risk(&self, position: Point, robot_radius: f64) -> f64 {
        if !self.bounds().contains(&position) {
            return 1.0;
        }
        let res = self.resolution;
        let r_sq = robot_radius * robot_radius;
        // Columns whose centers may fall inside the disc.
        let col_lo = ((position.x - robot_radius) / res - 0.5).ceil().max(0.0) as usize;
        let col_hi = ((position.x + robot_radius) / res - 0.5).floor();
        let y_lo = ((position.y - robot_radius) / res - 0.5).ceil().max(0.0) as usize;
        let y_hi = ((position.y + robot_radius) / res - 0.5).floor();
        if col_hi < 0.0 || y_hi < 0.0 {
            return 0.0;
        }
        let col_hi = (col_hi as usize).min(self.width - 1);
        let y_hi = (y_hi as usize).min(self.height - 1);
        let mut worst: f64 = 0.0;
        for yi in y_lo..=y_hi {
            let cy = (yi as f64 + 0.5) * res;
            let dy = cy - position.y;
            let row = self.height - 1 - yi;
            let base = row * self.width;
            for col in col_lo..=col_hi {
                let value = self.cells[base + col];
                if value <= worst {
                    continue;
                }
                let dx = (col as f64 + 0.5) * res - position.x;
                if dx * dx + dy * dy <= r_sq {
                    worst = value;
                    if worst >= 1.0 {
                        return worst;
                    }
                }
            }
        }
        worst
    }

    /// True when the robot footprint at `position` is clear of static obstacles.
    pub fn footprint_free(&self, position: Point, robot_radius: f64) -> bool {
        self.static_risk(position, robot_radius) < OCCUPIED_THRESHOLD
    }

    /// True iff the footprint is free at samples spaced at most half a cell
    /// apart along the segment `a -> b` (both endpoints included). The
    /// result does not depend on the order of `a` and `b`.
    pub fn segment_free(&self, a: Point, b: Point, robot_radius: f64) -> bool {
        let (a, b) = if (a.x, a.y) <= (b.x, b.y) { (a, b) } else { (b, a) };
        let spacing = self.resolution / 2.0;
        let samples = (a.distance(&b) / spacing).ceil().max(1.0) as usize;
        (0..=samples).all(|i| self.footprint_free(a.lerp(&b, i as f64 / samples as f64), robot_radius))
    }

    /// Parses the text grid format: a `<width> <height> <resolution>` header
    /// followed by `height` rows of `#` (occupied) and `.` (free).
    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or(GridError::Header { line: 1 })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let header_err = GridError::Header { line: 1 };
        if fields.len() != 3 {
            return Err(header_err);
        }
        let width: usize = fields[0].parse().map_err(|_| header_err.clone())?;
        let height: usize = fields[1].parse().map_err(|_| header_err.clone())?;
        let resolution: f64 = fields[2].parse().map_err(|_| header_err.clone())?;
        if width == 0 || height == 0 || !(resolution.is_finite() && resolution > 0.0) {
            return Err(header_err);
        }

        let mut cells = Vec::with_capacity(width * height);
        let mut rows = 0;
        let mut last_line = 1;
        for (line, row) in lines {
            last_line = line;
            if rows == height {
                if row.trim().is_empty() {
                    continue;
                }
                return Err(GridError::RowCount {
                    line,
                    expected: height,
                    found: rows + 1,
                });
            }
            let found = row.chars().count();
            if found != width {
                return Err(GridError::RowLength {
                    line,
                    expected: width,
                    found,
                });
            }
            for (column, ch) in row.chars().enumerate() {
                cells.push(match ch {
                    '#' => 1.0,
                    '.' => 0.0,
                    _ => {
                        return Err(GridError::IllegalChar {
                            line,
                            column: column + 1,
                            ch,
                        })
                    }
                });
            }
            rows += 1;
        }
        if rows != height {
            return Err(GridError::RowCount {
                line: last_line,
                expected: height,
                found: rows,
            });
        }
        Self::new(width, height, resolution, cells)
    }

    /// Serializes to the text format; cells at or above 0.5 become `#`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * (self.height + 1) + 32);
        let _ = writeln!(out, "{} {} {}", self.width, self.height, self.resolution);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|&c| if c >= OCCUPIED_THRESHOLD { '#' } else { '.' }));
            out.push('\n');
        }
        out
    }
}
