//! Time evolution of the Gross-Pitaevskii equation.
//!
//! Real time uses Crank-Nicolson with a predictor-corrector nonlinearity. In
//! cylindrical geometry the step is a locally one-dimensional product of an
//! axial and a radial Crank-Nicolson factor whose order alternates every
//! step. The separable part of the potential goes entirely into the direction
//! it depends on; the interaction energy is split evenly.
//!
//! Ground states are found by a preconditioned imaginary-time gradient flow
//! whose fixed point is the exact discrete stationary state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Observables, WaveField};
use crate::grid::Grid;
use crate::linalg::solve_tridiagonal;
use crate::params::HBAR;
use crate::potentials::PotentialStack;
use crate::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Time stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    /// Requested step, s. The effective step divides `t_end` evenly.
    pub dt: f64,
    pub t_end: f64,
    /// Record observables every `stride` steps.
    pub stride: usize,
}

impl TimeConfig {
    pub fn new(dt: f64, t_end: f64, stride: usize) -> Result<Self> {
        let t = TimeConfig { dt, t_end, stride };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be > 0, got {:e}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end must be >= 0, got {:e}", self.t_end)));
        }
        if self.stride == 0 {
            return Err(Error::Config("observer stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }

    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            n => self.t_end / n as f64,
        }
    }
}

/// Step bound `0.05 ħ / E` for the dynamical energy scale `E` of a run
/// (kinetic energy of the launch, chemical potential, interaction energy).
pub fn accuracy_dt(e_dyn: f64) -> f64 {
    0.05 * HBAR / e_dyn.abs().max(f64::MIN_POSITIVE)
}

/// Energy decomposition of a field, J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.interaction
    }

    /// Chemical potential `(E_kin + E_pot + 2 E_int) / N`.
    pub fn chemical_potential(&self, norm: f64) -> f64 {
        (self.kinetic + self.potential + 2.0 * self.interaction) / norm
    }
}

/// Discretised single-particle operator and interaction strength on a grid.
///
/// The axial stencil is the weighted three-point Laplacian of a (possibly
/// graded) line; the radial stencil is the conservative half-offset form of
/// `(1/r) d/dr (r d/dr)`. Both are symmetric in the quadrature inner product.
#[derive(Debug, Clone)]
pub struct Operator {
    grid: Grid,
    n_x: usize,
    n_r: usize,
    kappa: f64,
    ax_lo: Vec<f64>,
    ax_up: Vec<f64>,
    ax_edge: Vec<f64>,
    wx: Vec<f64>,
    r_lo: Vec<f64>,
    r_up: Vec<f64>,
    wr: Vec<f64>,
    /// `2π r_{j+1/2} / dr` for the radial kinetic energy sum.
    r_edge: Vec<f64>,
    vx: Vec<Complex64>,
    vr: Vec<f64>,
    g: f64,
}

impl Operator {
    /// `g` is the 1D coupling on a line grid and the 3D coupling on a cylinder.
    pub fn new(grid: &Grid, stack: &PotentialStack, mass: f64, g: f64) -> Result<Self> {
        stack.validate()?;
        if !(mass > 0.0) {
            return Err(Error::Config("mass must be positive".into()));
        }
        let kappa = HBAR * HBAR / (2.0 * mass);
        let xs = grid.axial().nodes();
        let n_x = xs.len();
        let n_r = grid.n_r();
        let mut ax_lo = vec![0.0; n_x];
        let mut ax_up = vec![0.0; n_x];
        for i in 1..n_x - 1 {
            let dm = xs[i] - xs[i - 1];
            let dp = xs[i + 1] - xs[i];
            let w = 0.5 * (dm + dp);
            ax_lo[i] = kappa / (w * dm);
            ax_up[i] = kappa / (w * dp);
        }
        let ax_edge = xs.windows(2).map(|p| kappa / (p[1] - p[0])).collect();
        let wx = grid.axial().weights().to_vec();

        let (mut r_lo, mut r_up, mut r_edge) = (vec![0.0; n_r], vec![0.0; n_r], vec![0.0; n_r]);
        let wr: Vec<f64> = (0..n_r).map(|j| grid.radial_weight(j)).collect();
        if let Some(rad) = grid.radial() {
            let dr = rad.dr;
            for j in 0..n_r {
                let r = rad.r(j);
                let rm = j as f64 * dr;
                let rp = (j as f64 + 1.0) * dr;
                r_lo[j] = kappa * rm / (r * dr * dr);
                r_up[j] = kappa * rp / (r * dr * dr);
                r_edge[j] = 2.0 * std::f64::consts::PI * rp / dr;
            }
        }

        let vx: Vec<Complex64> = xs.iter().map(|&x| stack.sample(x, 0.0)).collect();
        let mut vr = vec![0.0; n_r];
        if grid.is_cylindrical() {
            let x0 = xs[n_x / 2];
            let base = stack.sample(x0, 0.0).re;
            for (j, v) in vr.iter_mut().enumerate() {
                *v = stack.sample(x0, grid.r(j)).re - base;
            }
            // the split into V(x) + V(r) must be exact
            let scale = vr.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for &i in &[1, n_x / 3, 2 * n_x / 3, n_x - 2] {
                for &j in &[0, n_r / 2, n_r - 1] {
                    let full = stack.sample(xs[i], grid.r(j));
                    let split = vx[i] + vr[j];
                    let tol = 1e-9 * (scale + full.norm());
                    if (full - split).norm() > tol {
                        return Err(Error::Config(
                            "cylindrical potential must be a sum of axial and radial parts".into(),
                        ));
                    }
                }
            }
        }
        Ok(Operator {
            grid: grid.clone(),
            n_x,
            n_r,
            kappa,
            ax_lo,
            ax_up,
            ax_edge,
            wx,
            r_lo,
            r_up,
            wr,
            r_edge,
            vx,
            vr,
            g,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    pub fn has_absorber(&self) -> bool {
        self.vx.iter().any(|v| v.im != 0.0)
    }

    fn cylindrical(&self) -> bool {
        self.n_r > 1 || self.grid.is_cylindrical()
    }

    pub fn norm(&self, psi: &[Complex64]) -> f64 {
        let mut s = 0.0;
        for (i, row) in psi.chunks_exact(self.n_r).enumerate() {
            let line: f64 = row.iter().zip(&self.wr).map(|(p, w)| p.norm_sqr() * w).sum();
            s += line * self.wx[i];
        }
        s
    }

    /// Discrete energy functional (real part of the potential).
    pub fn energy(&self, psi: &[Complex64]) -> Energy {
        let nr = self.n_r;
        let mut kin = 0.0;
        for i in 0..self.n_x - 1 {
            let mut line = 0.0;
            for j in 0..nr {
                line += (psi[(i + 1) * nr + j] - psi[i * nr + j]).norm_sqr() * self.wr[j];
            }
            kin += self.ax_edge[i] * line;
        }
        if self.cylindrical() {
            for i in 0..self.n_x {
                let mut line = 0.0;
                for j in 0..nr {
                    let next = if j + 1 < nr { psi[i * nr + j + 1] } else { ZERO };
                    line += self.r_edge[j] * (next - psi[i * nr + j]).norm_sqr();
                }
                kin += self.kappa * self.wx[i] * line;
            }
        }
        let (mut pot, mut int) = (0.0, 0.0);
        for i in 0..self.n_x {
            for j in 0..nr {
                let n = psi[i * nr + j].norm_sqr();
                let w = self.wx[i] * self.wr[j];
                pot += w * (self.vx[i].re + self.vr[j]) * n;
                int += w * 0.5 * self.g * n * n;
            }
        }
        Energy {
            kinetic: kin,
            potential: pot,
            interaction: int,
        }
    }

    /// `out = H ψ` with the real part of the potential and density `|ψ|²`.
    fn apply_h(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let nr = self.n_r;
        out.iter_mut().for_each(|o| *o = ZERO);
        for i in 1..self.n_x - 1 {
            for j in 0..nr {
                let k = i * nr + j;
                let p = psi[k];
                let mut h = (self.ax_lo[i] + self.ax_up[i]) * p
                    - self.ax_lo[i] * psi[k - nr]
                    - self.ax_up[i] * psi[k + nr];
                if self.cylindrical() {
                    let prev = if j > 0 { psi[k - 1] } else { ZERO };
                    let next = if j + 1 < nr { psi[k + 1] } else { ZERO };
                    h += (self.r_lo[j] + self.r_up[j]) * p - self.r_lo[j] * prev - self.r_up[j] * next;
                }
                h += (self.vx[i].re + self.vr[j] + self.g * p.norm_sqr()) * p;
                out[k] = h;
            }
        }
    }

    /// Weighted inner product `Σ w a* b`.
    fn dot(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let nr = self.n_r;
        let mut s = ZERO;
        for i in 0..self.n_x {
            for j in 0..nr {
                let k = i * nr + j;
                s += a[k].conj() * b[k] * (self.wx[i] * self.wr[j]);
            }
        }
        s
    }

    /// Lowest eigenvalue of the radial operator `T_r + V(r)`.
    pub fn radial_zero_point(&self) -> f64 {
        if !self.cylindrical() {
            return 0.0;
        }
        let n = self.n_r;
        let vmin = self.vr.iter().cloned().fold(f64::INFINITY, f64::min);
        let lo: Vec<f64> = (0..n).map(|j| -self.r_lo[j]).collect();
        let up: Vec<f64> = (0..n).map(|j| -self.r_up[j]).collect();
        let di: Vec<f64> = (0..n).map(|j| self.r_lo[j] + self.r_up[j] + self.vr[j] - vmin).collect();
        let mut u = vec![1.0; n];
        let mut scr = vec![0.0; n];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let mut x = u.clone();
            if solve_tridiagonal(&lo, &di, &up, &mut x, &mut scr).is_err() {
                break;
            }
            let num: f64 = (0..n).map(|j| self.wr[j] * u[j] * u[j]).sum();
            let den: f64 = (0..n).map(|j| self.wr[j] * u[j] * x[j]).sum();
            let next = num / den;
            let nx: f64 = (0..n).map(|j| self.wr[j] * x[j] * x[j]).sum::<f64>().sqrt();
            u = x.iter().map(|v| v / nx).collect();
            if ((next - lambda) / next).abs() < 1e-13 {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda + vmin
    }
}

/// Scratch space for the tridiagonal sweeps.
#[derive(Debug, Clone)]
struct Work {
    lo: Vec<Complex64>,
    di: Vec<Complex64>,
    up: Vec<Complex64>,
    rhs: Vec<Complex64>,
    scr: Vec<Complex64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work {
            lo: vec![ZERO; n],
            di: vec![ZERO; n],
            up: vec![ZERO; n],
            rhs: vec![ZERO; n],
            scr: vec![ZERO; n],
        }
    }
}

/// Solve `(1 + c A) ψ' = (1 − c A) ψ` (or `= ψ` when `explicit` is false)
/// along the axial row `j`, with `A = T_x + base[i] + nl·dens`.
#[allow(clippy::too_many_arguments)]
fn sweep_axial(
    op: &Operator,
    w: &mut Work,
    psi: &mut [Complex64],
    j: usize,
    c: Complex64,
    explicit: bool,
    base: &[Complex64],
    nl: f64,
    dens: &[f64],
) -> Result<()> {
    let nr = op.n_r;
    let m = op.n_x - 2;
    for k in 0..m {
        let i = k + 1;
        let idx = i * nr + j;
        let (cl, cu) = (op.ax_lo[i], op.ax_up[i]);
        let d = base[i] + nl * dens[idx] + (cl + cu);
        w.lo[k] = -c * cl;
        w.di[k] = ONE + c * d;
        w.up[k] = -c * cu;
        let p = psi[idx];
        w.rhs[k] = if explicit {
            p - c * (d * p - cl * psi[idx - nr] - cu * psi[idx + nr])
        } else {
            p
        };
    }
    solve_tridiagonal(&w.lo[..m], &w.di[..m], &w.up[..m], &mut w.rhs[..m], &mut w.scr[..m])?;
    for k in 0..m {
        psi[(k + 1) * nr + j] = w.rhs[k];
    }
    Ok(())
}

/// Radial counterpart of [`sweep_axial`] on axial node `i`.
#[allow(clippy::too_many_arguments)]
fn sweep_radial(
    op: &Operator,
    w: &mut Work,
    psi: &mut [Complex64],
    i: usize,
    c: Complex64,
    explicit: bool,
    base: &[Complex64],
    nl: f64,
    dens: &[f64],
) -> Result<()> {
    let nr = op.n_r;
    let row = i * nr;
    for j in 0..nr {
        let (cl, cu) = (op.r_lo[j], op.r_up[j]);
        let d = base[j] + nl * dens[row + j] + (cl + cu);
        w.lo[j] = -c * cl;
        w.di[j] = ONE + c * d;
        w.up[j] = -c * cu;
        let p = psi[row + j];
        w.rhs[j] = if explicit {
            let prev = if j > 0 { psi[row + j - 1] } else { ZERO };
            let next = if j + 1 < nr { psi[row + j + 1] } else { ZERO };
            p - c * (d * p - cl * prev - cu * next)
        } else {
            p
        };
    }
    solve_tridiagonal(&w.lo[..nr], &w.di[..nr], &w.up[..nr], &mut w.rhs[..nr], &mut w.scr[..nr])?;
    psi[row..row + nr].copy_from_slice(&w.rhs[..nr]);
    Ok(())
}

/// How the stepper removes the global phase rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnergyShift {
    None,
    /// Chemical potential of the field at the first step.
    Auto,
    Fixed(f64),
}

/// Real-time stepper state.
#[derive(Debug, Clone)]
pub struct Stepper {
    op: Operator,
    dt: f64,
    shift: EnergyShift,
    base_x: Vec<Complex64>,
    base_r: Vec<Complex64>,
    shift_value: Option<f64>,
    absorbed: f64,
    steps: usize,
    work: Work,
    dens0: Vec<f64>,
    dens1: Vec<f64>,
    trial: Vec<Complex64>,
    peak0: Option<f64>,
    /// Abort when the peak density grows beyond this factor.
    pub collapse_factor: f64,
}

impl Stepper {
    pub fn new(grid: &Grid, stack: &PotentialStack, mass: f64, g: f64, dt: f64) -> Result<Self> {
        Self::from_operator(Operator::new(grid, stack, mass, g)?, dt)
    }

    pub fn from_operator(op: Operator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {dt:e}")));
        }
        let n = op.grid.len();
        let work = Work::new(op.n_x.max(op.n_r));
        Ok(Stepper {
            base_x: vec![ZERO; op.n_x],
            base_r: vec![ZERO; op.n_r],
            op,
            dt,
            shift: EnergyShift::Auto,
            shift_value: None,
            absorbed: 0.0,
            steps: 0,
            work,
            dens0: vec![0.0; n],
            dens1: vec![0.0; n],
            trial: vec![ZERO; n],
            peak0: None,
            collapse_factor: 10.0,
        })
    }

    pub fn with_energy_shift(mut self, shift: EnergyShift) -> Self {
        self.shift = shift;
        self.shift_value = None;
        self
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
    }

    /// Norm removed by the imaginary potential so far.
    pub fn absorbed(&self) -> f64 {
        self.absorbed
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    fn prepare(&mut self, psi: &[Complex64]) {
        if self.shift_value.is_some() {
            return;
        }
        let e = match self.shift {
            EnergyShift::None => 0.0,
            EnergyShift::Fixed(e) => e,
            EnergyShift::Auto => {
                let n = self.op.norm(psi);
                if n > 0.0 {
                    self.op.energy(psi).chemical_potential(n)
                } else {
                    0.0
                }
            }
        };
        let (sx, sr) = if self.op.cylindrical() {
            let sr = self.op.radial_zero_point();
            (e - sr, sr)
        } else {
            (e, 0.0)
        };
        for (b, v) in self.base_x.iter_mut().zip(&self.op.vx) {
            *b = v - sx;
        }
        for (b, v) in self.base_r.iter_mut().zip(&self.op.vr) {
            *b = Complex64::new(v - sr, 0.0);
        }
        self.shift_value = Some(e);
        self.peak0 = Some(psi.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max));
    }

    /// One locally one-dimensional Crank-Nicolson pass with frozen density.
    fn pass(&mut self, psi: &mut [Complex64], use_avg: bool) -> Result<()> {
        let c = Complex64::new(0.0, self.dt / (2.0 * HBAR));
        let op = &self.op;
        let dens = if use_avg { &self.dens1 } else { &self.dens0 };
        if !op.cylindrical() {
            return sweep_axial(op, &mut self.work, psi, 0, c, true, &self.base_x, op.g, dens);
        }
        let nl = 0.5 * op.g;
        let x_first = self.steps % 2 == 0;
        for pass in 0..2 {
            if (pass == 0) == x_first {
                for j in 0..op.n_r {
                    sweep_axial(op, &mut self.work, psi, j, c, true, &self.base_x, nl, dens)?;
                }
            } else {
                for i in 1..op.n_x - 1 {
                    sweep_radial(op, &mut self.work, psi, i, c, true, &self.base_r, nl, dens)?;
                }
            }
        }
        Ok(())
    }

    /// Advance `field` by one step.
    pub fn step(&mut self, field: &mut WaveField) -> Result<()> {
        self.prepare(&field.psi);
        let before = self.op.norm(&field.psi);
        for (d, p) in self.dens0.iter_mut().zip(&field.psi) {
            *d = p.norm_sqr();
        }
        let mut trial = std::mem::take(&mut self.trial);
        trial.copy_from_slice(&field.psi);
        let res = self.pass(&mut trial, false);
        let res = res.and_then(|_| {
            for ((a, d0), p) in self.dens1.iter_mut().zip(&self.dens0).zip(&trial) {
                *a = 0.5 * (d0 + p.norm_sqr());
            }
            self.pass(&mut field.psi, true)
        });
        self.trial = trial;
        res.map_err(|e| Error::NumericalBlowup {
            step: self.steps,
            detail: e.to_string(),
        })?;
        let after = self.op.norm(&field.psi);
        if !after.is_finite() {
            return Err(Error::NumericalBlowup {
                step: self.steps,
                detail: "non-finite norm".into(),
            });
        }
        self.absorbed += (before - after).max(0.0);
        self.steps += 1;
        field.time += self.dt;
        if let Some(p0) = self.peak0 {
            let peak = field.psi.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
            if p0 > 0.0 && peak > self.collapse_factor * p0 {
                return Err(Error::CollapseGuard(format!(
                    "peak density grew by {:.2}x at t = {:e} s (step {})",
                    peak / p0,
                    field.time,
                    self.steps
                )));
            }
        }
        Ok(())
    }
}

/// Observer verdict after each recorded sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Result of [`propagate`].
#[derive(Debug, Clone)]
pub struct Propagation {
    pub field: WaveField,
    pub records: Vec<Observables>,
    pub absorbed: f64,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Mean velocity from the probability current, m/s.
pub fn current_velocity(field: &WaveField, mass: f64) -> f64 {
    let nr = field.n_r();
    let mut s = 0.0;
    for i in 0..field.n_x() - 1 {
        for j in 0..nr {
            let a = field.psi[i * nr + j];
            let b = field.psi[(i + 1) * nr + j];
            s += (a.conj() * b).im * field.grid.radial_weight(j);
        }
    }
    let n = field.norm();
    if n > 0.0 {
        HBAR / mass * s / n
    } else {
        0.0
    }
}

/// Step `field` to `time.t_end`, recording observables (reflection plane
/// `x_b`) every `stride` steps. The observer may stop the run early.
pub fn propagate<F>(
    field: WaveField,
    stepper: &mut Stepper,
    time: &TimeConfig,
    x_b: f64,
    mass: f64,
    mut observer: F,
) -> Result<Propagation>
where
    F: FnMut(&Observables, &WaveField) -> Control,
{
    time.validate()?;
    let n_steps = time.steps();
    stepper.set_dt(time.effective_dt());
    let mut field = field;
    let mut records = Vec::with_capacity(n_steps / time.stride + 1);
    let mut first = field.measure(x_b);
    first.com_v = current_velocity(&field, mass);
    let mut stopped = observer(&first, &field) == Control::Stop;
    records.push(first);
    let mut taken = 0;
    while !stopped && taken < n_steps {
        stepper.step(&mut field)?;
        taken += 1;
        if taken % time.stride == 0 {
            let mut o = field.measure(x_b);
            let prev = records.last().expect("first record");
            o.com_v = (o.com_x - prev.com_x) / (o.time - prev.time);
            stopped = observer(&o, &field) == Control::Stop;
            records.push(o);
        }
    }
    Ok(Propagation {
        field,
        records,
        absorbed: stepper.absorbed(),
        steps: taken,
        stopped_early: stopped && taken < n_steps,
    })
}

/// Ground-state relaxation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateOptions {
    /// Relative energy change per iteration that counts as converged.
    pub tolerance: f64,
    /// Required `‖(H − μ)ψ‖ / (|μ| ‖ψ‖)` at convergence.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// Skip the collapse guard for attractive 3D runs.
    pub allow_supercritical: bool,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            tolerance: 1e-10,
            residual_tolerance: 1e-7,
            max_iterations: 20_000,
            allow_supercritical: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub iterations: usize,
    /// Total energy, J.
    pub energy: f64,
    /// Chemical potential, J.
    pub mu: f64,
    pub energy_history: Vec<f64>,
    pub converged: bool,
    /// `‖(H − μ)ψ‖ / (|μ| ‖ψ‖)` at the end.
    pub residual: f64,
}

/// Relax `trial` to the lowest stationary state with `n_target` atoms.
///
/// `n_c` is the critical number for the collapse guard (attractive
/// cylindrical runs only).
pub fn ground_state(
    trial: WaveField,
    stack: &PotentialStack,
    mass: f64,
    g: f64,
    n_target: f64,
    n_c: Option<f64>,
    opts: &GroundStateOptions,
) -> Result<(WaveField, GroundStateReport)> {
    if !(n_target > 0.0) {
        return Err(Error::Domain(format!("atom number must be positive, got {n_target}")));
    }
    if g < 0.0 && trial.grid.is_cylindrical() && !opts.allow_supercritical {
        if let Some(nc) = n_c {
            if n_target >= nc {
                return Err(Error::CollapseGuard(format!(
                    "N = {n_target} >= N_c = {nc}: an attractive condensate collapses above the critical number"
                )));
            }
        }
    }
    let op = Operator::new(&trial.grid, stack, mass, g)?;
    let mut field = trial;
    field.normalize_to(n_target)?;
    let n = field.psi.len();
    let nr = op.n_r;

    // preconditioner diagonals, shifted to be non-negative
    let vx_min = op.vx.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let vr_min = op.vr.iter().cloned().fold(f64::INFINITY, f64::min);
    let pre_x: Vec<Complex64> = op.vx.iter().map(|v| Complex64::new(v.re - vx_min, 0.0)).collect();
    let pre_r: Vec<Complex64> = op.vr.iter().map(|v| Complex64::new(v - vr_min, 0.0)).collect();
    let zeros = vec![0.0; n];

    let e0 = op.energy(&field.psi);
    let e_char = (e0.kinetic.abs() + e0.potential.abs() + e0.interaction.abs()) / n_target;
    // the product preconditioner stalls low modes when a·E ≫ 1
    let a_max = if op.cylindrical() { 1.0 / e_char } else { 1e3 / e_char };
    let mut a = 1.0 / e_char;
    let mut energy = e0.total();
    let mut history = vec![energy];
    let mut work = Work::new(op.n_x.max(op.n_r));
    let mut hpsi = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    let mut cand = vec![ZERO; n];
    let mut converged = false;
    let mut iterations = 0;
    let mut mu = 0.0;

    while iterations < opts.max_iterations {
        op.apply_h(&field.psi, &mut hpsi);
        mu = op.dot(&field.psi, &hpsi).re / op.norm(&field.psi);
        for k in 0..n {
            z[k] = hpsi[k] - mu * field.psi[k];
        }
        let residual = (op.norm(&z) / n_target).sqrt() / mu.abs().max(f64::MIN_POSITIVE);
        if converged && residual < opts.residual_tolerance {
            break;
        }
        z.iter_mut().take(nr).for_each(|v| *v = ZERO);
        z.iter_mut().skip(n - nr).for_each(|v| *v = ZERO);
        let c = Complex64::new(a, 0.0);
        for j in 0..nr {
            sweep_axial(&op, &mut work, &mut z, j, c, false, &pre_x, 0.0, &zeros)?;
        }
        if op.cylindrical() {
            for i in 1..op.n_x - 1 {
                sweep_radial(&op, &mut work, &mut z, i, c, false, &pre_r, 0.0, &zeros)?;
            }
        }
        for k in 0..n {
            cand[k] = field.psi[k] - a * z[k];
        }
        let nc = op.norm(&cand);
        let s = (n_target / nc).sqrt();
        cand.iter_mut().for_each(|p| *p *= s);
        let e_new = op.energy(&cand).total();
        if e_new <= energy + 1e-13 * energy.abs() {
            iterations += 1;
            let rel = ((e_new - energy) / e_new).abs();
            std::mem::swap(&mut field.psi, &mut cand);
            energy = e_new;
            history.push(e_new);
            a = (a * 1.5).min(a_max);
            converged = rel < opts.tolerance;
        } else {
            // the preconditioner depends on the step size, so retry from scratch
            a *= 0.5;
            if a * e_char < 1e-12 {
                log::warn!("ground state: step size underflow after {iterations} iterations");
                break;
            }
        }
    }
    op.apply_h(&field.psi, &mut hpsi);
    let nrm = op.norm(&field.psi);
    mu = if nrm > 0.0 { op.dot(&field.psi, &hpsi).re / nrm } else { mu };
    for k in 0..n {
        z[k] = hpsi[k] - mu * field.psi[k];
    }
    let residual = (op.norm(&z) / nrm).sqrt() / mu.abs().max(f64::MIN_POSITIVE);
    converged = converged && residual < opts.residual_tolerance;
    if !converged {
        log::warn!("ground state not converged after {iterations} iterations (residual {residual:e})");
    }
    field.time = 0.0;
    Ok((
        field,
        GroundStateReport {
            iterations,
            energy,
            mu,
            energy_history: history,
            converged,
            residual,
        },
    ))
}
