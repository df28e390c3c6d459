//! Receptive-field sensor arrays.
//!
//! A grid of cells covers a rectangle of the world; a point stimulus excites
//! each cell through a bilinear hat profile peaking at 1 on the cell center
//! and falling to 0 one cell pitch away. Centers span the rectangle edge to
//! edge, so anywhere strictly inside the grid exactly the four surrounding
//! cells respond and their activations sum to 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid of `nx * ny` cells covering the rectangle [x0, x1] x [y0, y1].
/// An axis with a single cell carries no positional information and always
/// contributes factor 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl GridSpec {
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config("sensor grid needs at least one cell".into()));
        }
        if self.nx > 1 && !(self.x1 > self.x0) {
            return Err(Error::Config(
                "sensor grid x-extent must be positive when nx > 1".into(),
            ));
        }
        if self.ny > 1 && !(self.y1 > self.y0) {
            return Err(Error::Config(
                "sensor grid y-extent must be positive when ny > 1".into(),
            ));
        }
        Ok(())
    }

    /// Cell activations for a point stimulus, row-major over (iy, ix).
    pub fn activations(&self, px: f64, py: f64) -> Vec<f64> {
        let hx = axis_hats(self.nx, self.x0, self.x1, px);
        let hy = axis_hats(self.ny, self.y0, self.y1, py);
        let mut out = Vec::with_capacity(self.cells());
        for wy in &hy {
            for wx in &hx {
                out.push(wx * wy);
            }
        }
        out
    }
}

/// Per-cell hat weights along one axis. Cell centers sit at
/// `lo + i * (hi - lo) / (n - 1)`.
fn axis_hats(n: usize, lo: f64, hi: f64, p: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let pitch = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let center = lo + i as f64 * pitch;
            (1.0 - ((p - center) / pitch).abs()).max(0.0)
        })
        .collect()
}

/// Object layer plus agent layer; total signal count is the sum of both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub object: GridSpec,
    pub agent: GridSpec,
}

impl SensorConfig {
    /// Fast preset: 8x8 object cells over the field, 16 agent cells along
    /// the line of motion. 80 signals total.
    pub fn desk(field_x: (f64, f64), field_y: (f64, f64), agent_x: f64) -> Self {
        SensorConfig {
            object: GridSpec {
                nx: 8,
                ny: 8,
                x0: field_x.0,
                x1: field_x.1,
                y0: field_y.0,
                y1: field_y.1,
            },
            agent: GridSpec {
                nx: 1,
                ny: 16,
                x0: agent_x,
                x1: agent_x,
                y0: field_y.0,
                y1: field_y.1,
            },
        }
    }

    /// Full-scale preset: 41x16 object cells (656 signals) plus 11x16 agent
    /// cells (176 signals), 832 in total.
    pub fn full_scale(field_x: (f64, f64), field_y: (f64, f64), agent_x: f64) -> Self {
        SensorConfig {
            object: GridSpec {
                nx: 41,
                ny: 16,
                x0: field_x.0,
                x1: field_x.1,
                y0: field_y.0,
                y1: field_y.1,
            },
            agent: GridSpec {
                nx: 11,
                ny: 16,
                x0: agent_x - 0.2,
                x1: agent_x + 0.2,
                y0: field_y.0,
                y1: field_y.1,
            },
        }
    }

    pub fn total_signals(&self) -> usize {
        self.object.cells() + self.agent.cells()
    }

    pub fn validate(&self) -> Result<()> {
        self.object.validate()?;
        self.agent.validate()
    }
}
