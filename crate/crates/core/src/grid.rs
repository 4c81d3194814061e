//! Spatial grids: axial line (uniform or smoothly graded) and the
//! half-offset cylindrical `(x, r)` grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_AXIAL_POINTS: usize = 16;
pub const MIN_RADIAL_POINTS: usize = 8;

/// Axial grid. Both end nodes carry Dirichlet zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x: Vec<f64>,
    /// Trapezoid quadrature weights.
    w: Vec<f64>,
    uniform: bool,
}

impl Grid1D {
    /// `n_x` equally spaced nodes on `[x_min, x_max]`.
    pub fn uniform(x_min: f64, x_max: f64, n_x: usize) -> Result<Self> {
        if n_x < MIN_AXIAL_POINTS {
            return Err(Error::Config(format!(
                "axial grid needs at least {MIN_AXIAL_POINTS} points, got {n_x}"
            )));
        }
        if !(x_max > x_min) {
            return Err(Error::Config(format!("empty axial range [{x_min:e}, {x_max:e}]")));
        }
        let dx = (x_max - x_min) / (n_x - 1) as f64;
        let x = (0..n_x)
            .map(|i| if i + 1 == n_x { x_max } else { x_min + dx * i as f64 })
            .collect();
        Ok(Self::from_nodes_unchecked(x, true))
    }

    /// Uniform grid with spacing no larger than `dx_max`.
    pub fn with_spacing(x_min: f64, x_max: f64, dx_max: f64) -> Result<Self> {
        if !(dx_max > 0.0) {
            return Err(Error::Config(format!("grid spacing must be > 0, got {dx_max:e}")));
        }
        let n = ((x_max - x_min) / dx_max).ceil() as usize + 1;
        Self::uniform(x_min, x_max, n.max(MIN_AXIAL_POINTS))
    }

    /// Graded grid following a target spacing `h(x)`.
    ///
    /// The target is first limited so that the spacing changes by at most a
    /// fraction `growth` per unit length (`|h'| ≤ growth`), which keeps the
    /// three-point stencil second order. Nodes are then placed at equal steps
    /// of `s(x) = ∫ dx / h(x)`.
    pub fn graded<F: Fn(f64) -> f64>(x_min: f64, x_max: f64, growth: f64, target: F) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::Config(format!("empty axial range [{x_min:e}, {x_max:e}]")));
        }
        if !(growth > 0.0) {
            return Err(Error::Config("grading rate must be positive".into()));
        }
        // Sample the target on a fine auxiliary mesh.
        let mut h_min = f64::INFINITY;
        let probe = 20_000;
        for i in 0..=probe {
            let x = x_min + (x_max - x_min) * i as f64 / probe as f64;
            h_min = h_min.min(target(x));
        }
        if !(h_min > 0.0) {
            return Err(Error::Config("target spacing must be positive".into()));
        }
        let m = (((x_max - x_min) / (0.25 * h_min)).ceil() as usize).clamp(1000, 20_000_000);
        let step = (x_max - x_min) / m as f64;
        let mut h: Vec<f64> = (0..=m).map(|i| target(x_min + step * i as f64)).collect();
        // Lipschitz envelope: h_i = min_j (t_j + growth |x_i - x_j|), two sweeps.
        for i in 1..=m {
            h[i] = h[i].min(h[i - 1] + growth * step);
        }
        for i in (0..m).rev() {
            h[i] = h[i].min(h[i + 1] + growth * step);
        }
        // s(x) by trapezoid rule.
        let mut s = vec![0.0; m + 1];
        for i in 1..=m {
            s[i] = s[i - 1] + 0.5 * step * (1.0 / h[i - 1] + 1.0 / h[i]);
        }
        let n_cells = s[m].ceil().max((MIN_AXIAL_POINTS - 1) as f64) as usize;
        let mut x = Vec::with_capacity(n_cells + 1);
        x.push(x_min);
        let mut j = 0;
        for c in 1..n_cells {
            let target_s = s[m] * c as f64 / n_cells as f64;
            while s[j + 1] < target_s {
                j += 1;
            }
            let frac = (target_s - s[j]) / (s[j + 1] - s[j]);
            x.push(x_min + step * (j as f64 + frac));
        }
        x.push(x_max);
        Ok(Self::from_nodes_unchecked(x, false))
    }

    /// Grid from explicit strictly increasing nodes.
    pub fn from_nodes(x: Vec<f64>) -> Result<Self> {
        if x.len() < MIN_AXIAL_POINTS {
            return Err(Error::Config(format!(
                "axial grid needs at least {MIN_AXIAL_POINTS} points, got {}",
                x.len()
            )));
        }
        if x.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Config("axial nodes must be strictly increasing".into()));
        }
        Ok(Self::from_nodes_unchecked(x, false))
    }

    fn from_nodes_unchecked(x: Vec<f64>, uniform: bool) -> Self {
        let n = x.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let d = x[i + 1] - x[i];
            w[i] += 0.5 * d;
            w[i + 1] += 0.5 * d;
        }
        Grid1D { x, w, uniform }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Spacing for uniform grids.
    pub fn dx(&self) -> Option<f64> {
        self.uniform.then(|| (self.x_max() - self.x_min()) / (self.len() - 1) as f64)
    }

    pub fn min_spacing(&self) -> f64 {
        self.x.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.x.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max)
    }

    /// Local spacing around node `i` (mean of adjacent cells).
    pub fn spacing_at(&self, i: usize) -> f64 {
        let n = self.len();
        if i == 0 {
            self.x[1] - self.x[0]
        } else if i + 1 == n {
            self.x[n - 1] - self.x[n - 2]
        } else {
            0.5 * (self.x[i + 1] - self.x[i - 1])
        }
    }

    /// Index of the cell containing `x` (clamped).
    pub fn locate(&self, x: f64) -> usize {
        match self.x.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.len() - 2),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }
}

/// Radial half-offset grid: nodes at `r_j = (j + 1/2) dr`, Dirichlet zero
/// at `r = r_max = (n_r + 1/2) dr`, Neumann symmetry at the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n_r: usize,
    pub dr: f64,
}

impl RadialGrid {
    pub fn new(r_max: f64, n_r: usize) -> Result<Self> {
        if n_r < MIN_RADIAL_POINTS {
            return Err(Error::Config(format!(
                "radial grid needs at least {MIN_RADIAL_POINTS} points, got {n_r}"
            )));
        }
        if !(r_max > 0.0) {
            return Err(Error::Config(format!("r_max must be > 0, got {r_max:e}")));
        }
        Ok(RadialGrid {
            r_max,
            n_r,
            dr: r_max / (n_r as f64 + 0.5),
        })
    }

    pub fn r(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr
    }

    /// Annular area element `2π r_j dr`.
    pub fn weight(&self, j: usize) -> f64 {
        2.0 * PI * self.r(j) * self.dr
    }
}

/// Cylindrical `(x, r)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCyl {
    pub axial: Grid1D,
    pub radial: RadialGrid,
}

/// Either geometry, as seen by the field and propagators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    Line(Grid1D),
    Cylinder(GridCyl),
}

impl Grid {
    pub fn axial(&self) -> &Grid1D {
        match self {
            Grid::Line(g) => g,
            Grid::Cylinder(c) => &c.axial,
        }
    }

    pub fn radial(&self) -> Option<&RadialGrid> {
        match self {
            Grid::Line(_) => None,
            Grid::Cylinder(c) => Some(&c.radial),
        }
    }

    pub fn n_x(&self) -> usize {
        self.axial().len()
    }

    /// Radial node count; 1 for the line geometry.
    pub fn n_r(&self) -> usize {
        self.radial().map_or(1, |r| r.n_r)
    }

    pub fn len(&self) -> usize {
        self.n_x() * self.n_r()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_cylindrical(&self) -> bool {
        matches!(self, Grid::Cylinder(_))
    }

    pub fn r(&self, j: usize) -> f64 {
        self.radial().map_or(0.0, |r| r.r(j))
    }

    pub fn radial_weight(&self, j: usize) -> f64 {
        self.radial().map_or(1.0, |r| r.weight(j))
    }

    /// Quadrature weights in storage order (`x` major, `r` minor).
    pub fn weights(&self) -> Vec<f64> {
        let wx = self.axial().weights();
        let n_r = self.n_r();
        let wr: Vec<f64> = (0..n_r).map(|j| self.radial_weight(j)).collect();
        let mut out = Vec::with_capacity(self.len());
        for &a in wx {
            for &b in &wr {
                out.push(a * b);
            }
        }
        out
    }
}
