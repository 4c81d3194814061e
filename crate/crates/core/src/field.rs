//! Wavefunction storage, initial states, phase imprinting and observables.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Grid1D};
use crate::params::{DerivedParams, HBAR};
use crate::Complex64;

/// Complex field on a [`Grid`], stored `x`-major (`index = i * n_r + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    /// Simulation time, s.
    pub time: f64,
}

/// Observables of a field at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub time: f64,
    /// Total atom number.
    pub norm: f64,
    /// Atoms with `x < x_b`.
    pub n_left: f64,
    pub com_x: f64,
    /// Centre-of-mass velocity (finite difference, filled by the propagator).
    pub com_v: f64,
    pub rms_x: f64,
    /// Peak density: m⁻¹ in 1D, m⁻³ in cylindrical geometry.
    pub peak_density: f64,
}

impl WaveField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        WaveField {
            grid,
            psi: vec![Complex64::new(0.0, 0.0); n],
            time: 0.0,
        }
    }

    pub fn n_x(&self) -> usize {
        self.grid.n_x()
    }

    pub fn n_r(&self) -> usize {
        self.grid.n_r()
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.psi[i * self.n_r() + j]
    }

    /// Density integrated over the transverse plane, atoms per metre.
    pub fn line_density(&self) -> Vec<f64> {
        let n_r = self.n_r();
        let wr: Vec<f64> = (0..n_r).map(|j| self.grid.radial_weight(j)).collect();
        self.psi
            .chunks_exact(n_r)
            .map(|row| row.iter().zip(&wr).map(|(p, w)| p.norm_sqr() * w).sum())
            .collect()
    }

    /// Density on the node row closest to the axis (the whole field in 1D).
    pub fn axis_density(&self) -> Vec<f64> {
        let n_r = self.n_r();
        self.psi.iter().step_by(n_r).map(|p| p.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        let wx = self.grid.axial().weights();
        self.line_density().iter().zip(wx).map(|(n, w)| n * w).sum()
    }

    /// Scale to exactly `target` atoms.
    pub fn normalize_to(&mut self, target: f64) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain(format!("cannot normalise a field of norm {n:e}")));
        }
        let s = (target / n).sqrt();
        self.psi.iter_mut().for_each(|p| *p *= s);
        Ok(())
    }

    /// Multiply by `exp(i m v x / ħ)`.
    pub fn kick(&mut self, v: f64, mass: f64) -> Result<()> {
        if v == 0.0 {
            return Ok(());
        }
        let k = mass * v / HBAR;
        let h = self.grid.axial().max_spacing();
        if (k * h).abs() >= std::f64::consts::PI {
            return Err(Error::Config(format!(
                "velocity kick {v:e} m/s is not resolvable: k*dx = {:.3} >= pi",
                (k * h).abs()
            )));
        }
        let n_r = self.n_r();
        let xs = self.grid.axial().nodes().to_vec();
        for (row, &x) in self.psi.chunks_exact_mut(n_r).zip(&xs) {
            let phase = Complex64::from_polar(1.0, k * x);
            row.iter_mut().for_each(|p| *p *= phase);
        }
        Ok(())
    }

    /// Observables with the reflection plane at `x_b`.
    pub fn measure(&self, x_b: f64) -> Observables {
        let xs = self.grid.axial().nodes();
        let wx = self.grid.axial().weights();
        let line = self.line_density();
        let norm: f64 = line.iter().zip(wx).map(|(n, w)| n * w).sum();
        let (mut m1, mut m2) = (0.0, 0.0);
        for ((n, w), x) in line.iter().zip(wx).zip(xs) {
            m1 += n * w * x;
        }
        let com = if norm > 0.0 { m1 / norm } else { 0.0 };
        for ((n, w), x) in line.iter().zip(wx).zip(xs) {
            m2 += n * w * (x - com) * (x - com);
        }
        let rms = if norm > 0.0 { (m2 / norm).sqrt() } else { 0.0 };
        let peak = self.psi.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
        Observables {
            time: self.time,
            norm,
            n_left: cumulative_left(xs, &line, x_b).min(norm),
            com_x: com,
            com_v: 0.0,
            rms_x: rms,
            peak_density: peak,
        }
    }

    /// Full width at half maximum of the line density, m.
    pub fn fwhm_x(&self) -> f64 {
        fwhm(self.grid.axial().nodes(), &self.line_density())
    }
}

/// `∫_{x_0}^{x_b}` of the piecewise-linear interpolant of `n` (trapezoid rule
/// with a partial last cell).
pub fn cumulative_left(xs: &[f64], n: &[f64], x_b: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() - 1 {
        let (a, b) = (xs[i], xs[i + 1]);
        if x_b <= a {
            break;
        }
        if x_b >= b {
            acc += 0.5 * (n[i] + n[i + 1]) * (b - a);
        } else {
            let t = (x_b - a) / (b - a);
            let nb = n[i] + t * (n[i + 1] - n[i]);
            acc += 0.5 * (n[i] + nb) * (x_b - a);
            break;
        }
    }
    acc
}

/// FWHM of a single-peaked profile by linear interpolation of the crossings.
pub fn fwhm(xs: &[f64], n: &[f64]) -> f64 {
    let (imax, &peak) = n
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty profile");
    let half = 0.5 * peak;
    let mut left = xs[0];
    for i in (0..imax).rev() {
        if n[i] < half {
            left = xs[i] + (half - n[i]) / (n[i + 1] - n[i]) * (xs[i + 1] - xs[i]);
            break;
        }
    }
    let mut right = xs[xs.len() - 1];
    for i in imax + 1..n.len() {
        if n[i] < half {
            right = xs[i - 1] + (n[i - 1] - half) / (n[i - 1] - n[i]) * (xs[i] - xs[i - 1]);
            break;
        }
    }
    right - left
}

/// Exact 1D bright soliton `sqrt(N/2ξ) sech((x − x_c)/ξ)`, renormalised to N.
pub fn init_sech_soliton(grid: &Grid1D, derived: &DerivedParams, n: f64, x_center: f64) -> Result<WaveField> {
    let xi = derived
        .xi
        .ok_or_else(|| Error::Config("soliton width undefined (no nonlinearity)".into()))?;
    if x_center - 10.0 * xi < grid.x_min() || x_center + 10.0 * xi > grid.x_max() {
        return Err(Error::Config(format!(
            "grid [{:e}, {:e}] does not span 20 xi = {:e} m around {x_center:e}",
            grid.x_min(),
            grid.x_max(),
            20.0 * xi
        )));
    }
    let lo = grid.locate(x_center - 10.0 * xi);
    let hi = grid.locate(x_center + 10.0 * xi) + 1;
    let h = grid.nodes()[lo..=hi].windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
    if h > xi / 10.0 {
        return Err(Error::Config(format!(
            "grid spacing {h:e} m too coarse for xi = {xi:e} m (need <= xi/10)"
        )));
    }
    let amp = (n / (2.0 * xi)).sqrt();
    let psi = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 || i + 1 == grid.len() {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(amp / ((x - x_center) / xi).cosh(), 0.0)
            }
        })
        .collect();
    let mut field = WaveField {
        grid: Grid::Line(grid.clone()),
        psi,
        time: 0.0,
    };
    let raw = field.norm();
    if ((raw - n) / n).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "discrete soliton norm {raw} deviates from N = {n} by more than 1e-6 relative"
        )));
    }
    field.normalize_to(n)?;
    Ok(field)
}

/// Gaussian density widths (standard deviations): axial `sigma_x` and, in
/// each transverse Cartesian direction, `sigma_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWidths {
    pub sigma_x: f64,
    pub sigma_r: f64,
}

/// Normalised Gaussian trial state with the given density widths.
pub fn init_gaussian_trial(grid: &Grid, widths: GaussianWidths, n: f64, x_center: f64) -> Result<WaveField> {
    let ax = grid.axial();
    if !(widths.sigma_x > 0.0) || (grid.is_cylindrical() && !(widths.sigma_r > 0.0)) {
        return Err(Error::Config("Gaussian widths must be positive".into()));
    }
    if x_center - 4.0 * widths.sigma_x < ax.x_min() || x_center + 4.0 * widths.sigma_x > ax.x_max() {
        return Err(Error::Config("grid does not contain +-4 sigma_x of the trial state".into()));
    }
    let h = ax.spacing_at(ax.locate(x_center));
    if widths.sigma_x < 2.0 * h {
        return Err(Error::Config(format!(
            "sigma_x = {:e} m not resolved by local spacing {h:e} m",
            widths.sigma_x
        )));
    }
    if let Some(rad) = grid.radial() {
        if widths.sigma_r < 2.0 * rad.dr || 3.0 * widths.sigma_r > rad.r_max {
            return Err(Error::Config(format!(
                "sigma_r = {:e} m not resolved by dr = {:e} m / r_max = {:e} m",
                widths.sigma_r, rad.dr, rad.r_max
            )));
        }
    }
    let n_x = grid.n_x();
    let n_r = grid.n_r();
    let mut psi = Vec::with_capacity(grid.len());
    for (i, &x) in ax.nodes().iter().enumerate() {
        let ex = -(x - x_center).powi(2) / (4.0 * widths.sigma_x.powi(2));
        for j in 0..n_r {
            let r = grid.r(j);
            let er = if grid.is_cylindrical() {
                -r * r / (4.0 * widths.sigma_r.powi(2))
            } else {
                0.0
            };
            let v = if i == 0 || i + 1 == n_x { 0.0 } else { (ex + er).exp() };
            psi.push(Complex64::new(v, 0.0));
        }
    }
    let mut f = WaveField {
        grid: grid.clone(),
        psi,
        time: 0.0,
    };
    f.normalize_to(n)?;
    Ok(f)
}

/// Phase-imprint a copy of `field` with velocity `v`.
pub fn apply_velocity_kick(field: &WaveField, v: f64, mass: f64) -> Result<WaveField> {
    let mut out = field.clone();
    out.kick(v, mass)?;
    Ok(out)
}

/// Write the density as CSV: `x_m,density` (1D) or `x_m,r_m,density`.
pub fn write_density_csv<W: Write>(field: &WaveField, mut w: W) -> Result<()> {
    let xs = field.grid.axial().nodes();
    let n_r = field.n_r();
    if field.grid.is_cylindrical() {
        writeln!(w, "x_m,r_m,density")?;
        for (i, &x) in xs.iter().enumerate() {
            for j in 0..n_r {
                writeln!(w, "{:e},{:e},{:e}", x, field.grid.r(j), field.at(i, j).norm_sqr())?;
            }
        }
    } else {
        writeln!(w, "x_m,density")?;
        for (i, &x) in xs.iter().enumerate() {
            writeln!(w, "{:e},{:e}", x, field.psi[i].norm_sqr())?;
        }
    }
    Ok(())
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SQR1";

/// Header of a raw snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub n_x: u64,
    pub n_r: u64,
    /// Axial spacing; 0 for graded grids.
    pub dx: f64,
    /// Radial spacing; 0 in 1D.
    pub dr: f64,
    pub time: f64,
}

/// Raw little-endian snapshot: magic, `n_x`, `n_r` (u64), `dx`, `dr`, `t`
/// (f64), then `(re, im)` f64 pairs in storage order.
pub fn write_snapshot<W: Write>(field: &WaveField, mut w: W) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(field.n_x() as u64).to_le_bytes())?;
    w.write_all(&(field.n_r() as u64).to_le_bytes())?;
    w.write_all(&field.grid.axial().dx().unwrap_or(0.0).to_le_bytes())?;
    w.write_all(&field.grid.radial().map_or(0.0, |r| r.dr).to_le_bytes())?;
    w.write_all(&field.time.to_le_bytes())?;
    for p in &field.psi {
        w.write_all(&p.re.to_le_bytes())?;
        w.write_all(&p.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(SnapshotHeader, Vec<Complex64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Schema("snapshot magic mismatch".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let n_x = next_u64(&mut r)?;
    let n_r = next_u64(&mut r)?;
    let dx = f64::from_bits(next_u64(&mut r)?);
    let dr = f64::from_bits(next_u64(&mut r)?);
    let time = f64::from_bits(next_u64(&mut r)?);
    let count = (n_x * n_r) as usize;
    let mut psi = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64::from_bits(next_u64(&mut r)?);
        let im = f64::from_bits(next_u64(&mut r)?);
        psi.push(Complex64::new(re, im));
    }
    Ok((SnapshotHeader { n_x, n_r, dx, dr, time }, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridCyl, RadialGrid};
    use crate::params::{derive_params, Species, TrapConfig, NC_JILA};
    use proptest::prelude::*;

    fn jila(n: f64) -> DerivedParams {
        derive_params(&Species::rb85(), &TrapConfig::jila(), n, Some(NC_JILA)).unwrap()
    }

    fn line(xmin: f64, xmax: f64, n: usize) -> Grid1D {
        Grid1D::uniform(xmin, xmax, n).unwrap()
    }

    #[test]
    fn soliton_peak_and_norm() {
        let d = jila(1750.0);
        let xi = d.xi.unwrap();
        let g = line(-100e-6, 100e-6, 4001);
        let f = init_sech_soliton(&g, &d, 1750.0, 0.0).unwrap();
        assert!((f.norm() - 1750.0).abs() < 1e-9);
        let peak = f.measure(0.0).peak_density;
        assert!(((peak - 1750.0 / (2.0 * xi)) / peak).abs() < 1e-6);
    }

    #[test]
    fn soliton_fwhm() {
        // sech² half maximum at x = ξ·arccosh(√2)
        let d = jila(1750.0);
        let xi = d.xi.unwrap();
        let analytic = 2.0 * xi * 2f64.sqrt().acosh();
        assert!((analytic - 1.7627 * xi).abs() < 1e-4 * xi);
        assert!((analytic - 11.42e-6).abs() < 0.01e-6);
        let g = line(-100e-6, 100e-6, 8001);
        let f = init_sech_soliton(&g, &d, 1750.0, 0.0).unwrap();
        assert!(((f.fwhm_x() - analytic) / analytic).abs() < 1e-3);
    }

    #[test]
    fn soliton_grid_checks() {
        let d = jila(1750.0);
        assert!(init_sech_soliton(&line(-30e-6, 30e-6, 4001), &d, 1750.0, 0.0).is_err());
        assert!(init_sech_soliton(&line(-100e-6, 100e-6, 201), &d, 1750.0, 0.0).is_err());
        let mut flat = d.clone();
        flat.xi = None;
        assert!(init_sech_soliton(&line(-100e-6, 100e-6, 4001), &flat, 1750.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let g = Grid::Line(line(-50e-6, 50e-6, 2001));
        let w = GaussianWidths { sigma_x: 4e-6, sigma_r: 0.0 };
        let f = init_gaussian_trial(&g, w, 500.0, 3e-6).unwrap();
        let o = f.measure(0.0);
        assert!((o.norm - 500.0).abs() < 1e-9);
        assert!((o.com_x - 3e-6).abs() < 1e-12);
        assert!(((o.rms_x - 4e-6) / 4e-6).abs() < 1e-6);
        assert!(init_gaussian_trial(&g, GaussianWidths { sigma_x: 0.05e-6, sigma_r: 0.0 }, 1.0, 0.0).is_err());
    }

    #[test]
    fn kick_edge_cases() {
        let d = jila(1750.0);
        let g = line(-100e-6, 100e-6, 2001);
        let f = init_sech_soliton(&g, &d, 1750.0, 0.0).unwrap();
        let m = Species::rb85().mass;
        assert_eq!(apply_velocity_kick(&f, 0.0, m).unwrap(), f);
        assert!(apply_velocity_kick(&f, 1.0, m).is_err());
    }

    #[test]
    fn left_count_limits() {
        let d = jila(1750.0);
        let g = line(-100e-6, 100e-6, 4001);
        let f = init_sech_soliton(&g, &d, 1750.0, 0.0).unwrap();
        let o = f.measure(0.0);
        assert!((o.n_left - 875.0).abs() < 1e-6);
        assert!((f.measure(100e-6).n_left - o.norm).abs() < 1e-9);
        assert_eq!(f.measure(-200e-6).n_left, 0.0);
    }

    #[test]
    fn cylindrical_norm_matches_line_norm() {
        // separable sech × radial oscillator ground state
        let d = jila(1750.0);
        let xi = d.xi.unwrap();
        let lr = d.l_r;
        let ax = line(-80e-6, 80e-6, 1601);
        let rad = RadialGrid::new(8.0 * lr, 160).unwrap();
        let grid = Grid::Cylinder(GridCyl { axial: ax.clone(), radial: rad.clone() });
        let mut f = WaveField::zeros(grid);
        let amp = (1750.0 / (2.0 * xi)).sqrt();
        let rad_amp = 1.0 / (std::f64::consts::PI.sqrt() * lr);
        let n_x = ax.len();
        for (i, &x) in ax.nodes().iter().enumerate() {
            for j in 0..rad.n_r {
                let r = rad.r(j);
                let v = if i == 0 || i + 1 == n_x {
                    0.0
                } else {
                    amp / (x / xi).cosh() * rad_amp * (-r * r / (2.0 * lr * lr)).exp()
                };
                f.psi[i * rad.n_r + j] = Complex64::new(v, 0.0);
            }
        }
        let line_f = init_sech_soliton(&ax, &d, 1750.0, 0.0).unwrap();
        // midpoint radial quadrature is second order in dr
        assert!(((f.norm() - line_f.norm()) / line_f.norm()).abs() < 1e-3, "{} vs {}", f.norm(), line_f.norm());
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::Line(line(-1.0, 1.0, 16));
        let mut f = WaveField::zeros(g);
        f.psi[3] = Complex64::new(1.5, -2.0);
        f.time = 0.25;
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SQR1");
        assert_eq!(buf.len(), 4 + 5 * 8 + 16 * 16);
        let (h, psi) = read_snapshot(&buf[..]).unwrap();
        assert_eq!(h.n_x, 16);
        assert_eq!(h.n_r, 1);
        assert_eq!(h.time, 0.25);
        assert_eq!(psi, f.psi);
    }

    proptest! {
        #[test]
        fn kick_preserves_density(v in -2e-3f64..2e-3) {
            let d = jila(1750.0);
            let g = line(-100e-6, 100e-6, 2001);
            let f = init_sech_soliton(&g, &d, 1750.0, -10e-6).unwrap();
            let k = apply_velocity_kick(&f, v, Species::rb85().mass).unwrap();
            let (a, b) = (f.measure(5e-6), k.measure(5e-6));
            prop_assert!((a.norm - b.norm).abs() <= 1e-12 * a.norm);
            prop_assert!((a.n_left - b.n_left).abs() <= 1e-12 * a.norm);
            prop_assert!((a.com_x - b.com_x).abs() <= 1e-18);
            prop_assert!((a.rms_x - b.rms_x).abs() <= 1e-12 * a.rms_x);
            prop_assert!((a.peak_density - b.peak_density).abs() <= 1e-12 * a.peak_density);
        }

        #[test]
        fn left_count_monotone(a in -100e-6f64..100e-6, b in -100e-6f64..100e-6) {
            let d = jila(1750.0);
            let g = line(-100e-6, 100e-6, 1001);
            let f = init_sech_soliton(&g, &d, 1750.0, 0.0).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (nl, nh) = (f.measure(lo).n_left, f.measure(hi).n_left);
            prop_assert!(nl <= nh);
            prop_assert!(nl >= 0.0 && nh <= f.norm() * (1.0 + 1e-12));
        }
    }
}
