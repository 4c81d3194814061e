//! Scenario catalogue, reflection measurement and velocity scans.
//!
//! Every scenario starts with the cloud centred at `x = 0` and the scattering
//! plane (step centre or surface) at `x = Δx`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{cumulative_left, init_gaussian_trial, init_sech_soliton, GaussianWidths, Observables, WaveField};
use crate::grid::{Grid, Grid1D, GridCyl, RadialGrid};
use crate::params::{derive_params, DerivedParams, Species, TrapConfig, HBAR, NC_JILA};
use crate::planewave::PlaneWaveSetup;
use crate::potentials::{
    CasimirPolderSurface, Harmonic, PotentialStack, PotentialTerm, Sponge, TanhStep, CP_CUTOFF,
};
use crate::propagator::{ground_state, propagate, Control, GroundStateOptions, Stepper, TimeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Line,
    Cylinder,
}

/// Interaction model on a line grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// `g_1D` of the radial ground state; ψ normalised to the atom number.
    Waveguide,
    /// 3D `g` acting on a volume density; the norm is atoms per unit area.
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Exact 1D bright soliton.
    Sech,
    /// Imaginary-time ground state of the trap.
    GroundState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Launch {
    /// Phase imprint `exp(i m v x / ħ)` at t = 0.
    Kick,
    /// Trap centre moved onto the scattering plane at t = 0.
    TrapDisplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum Normalization {
    Atoms,
    /// Scale the ground state to this peak density, m⁻³.
    PeakDensity(f64),
}

/// What sits at the scattering plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Scatterer {
    Tanh { v0: f64, sigma: f64 },
    /// Casimir-Polder surface of the species with the given absorber slope.
    Surface { v_im: f64 },
    /// Purely imaginary ramp starting at the plane.
    Absorber { slope: f64 },
    None,
}

impl Scatterer {
    /// Potential terms with the plane at `plane`.
    pub fn stack(&self, species: &Species, plane: f64) -> Result<PotentialStack> {
        let mut s = PotentialStack::new();
        match *self {
            Scatterer::Tanh { v0, sigma } => s.push(PotentialTerm::Tanh(TanhStep::new(v0, sigma, plane)?)),
            Scatterer::Surface { v_im } => {
                let mut cp = CasimirPolderSurface::silicon(species, plane);
                cp.v_im = v_im;
                cp.validate()?;
                s.push(PotentialTerm::CasimirPolder(cp));
            }
            Scatterer::Absorber { slope } => s.push(PotentialTerm::Sponge(Sponge {
                start: plane,
                end: plane + 1e-6,
                strength: slope * 1e-6,
            })),
            Scatterer::None => {}
        }
        Ok(s)
    }
}

/// Imaginary ramp at the far end of the grid, behind the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpongeSpec {
    pub width: f64,
    pub strength: f64,
}

/// Grid construction relative to the scattering plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Distance from `x_min` to the plane, m.
    pub behind: f64,
    /// Distance from the plane to `x_max`, m.
    pub beyond: f64,
    /// Spacing cap, m.
    pub dx_max: f64,
    /// Target `k h` against the local wave number.
    pub kh: f64,
    /// Maximum relative spacing change per node.
    pub growth: f64,
    /// Radial extent, m (cylinder only).
    pub r_max: f64,
    pub n_r: usize,
    pub sponge: Option<SpongeSpec>,
}

/// Settling rule for the reflection measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleSpec {
    /// Allowed `|dN_L/dt|` as a fraction of N0 per millisecond.
    pub rate: f64,
    /// Quiet period, s.
    pub window: f64,
}

impl Default for SettleSpec {
    fn default() -> Self {
        SettleSpec { rate: 1e-3, window: 5e-3 }
    }
}

/// Complete description of one reflection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub geometry: Geometry,
    pub coupling: Coupling,
    pub species: Species,
    pub trap: TrapConfig,
    pub n_atoms: f64,
    pub n_c: Option<f64>,
    pub normalization: Normalization,
    pub initial: InitialState,
    pub launch: Launch,
    /// Incident speed, m/s (kick speed, or ω_x Δx for trap launches).
    pub v: f64,
    /// Plane position Δx, m. Trap launches default to `v / ω_x`.
    pub distance: Option<f64>,
    /// Smallest allowed trap displacement, m.
    pub min_distance: f64,
    pub scatterer: Scatterer,
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    pub record_interval: f64,
    /// Measurement plane sits this far in front of the scattering plane, m.
    pub x_b_offset: f64,
    pub settle: SettleSpec,
    pub remove_trap_at_closest_approach: bool,
    pub stop_when_settled: bool,
}

impl ScenarioSpec {
    pub fn with_velocity(&self, v: f64) -> Self {
        let mut s = self.clone();
        s.v = v;
        if s.launch == Launch::TrapDisplacement {
            s.distance = None;
        }
        s
    }

    pub fn derived(&self) -> Result<DerivedParams> {
        derive_params(&self.species, &self.trap, self.n_atoms, self.n_c)
    }

    /// Scattering-plane position Δx.
    pub fn plane(&self) -> Result<f64> {
        match (self.launch, self.distance) {
            (_, Some(d)) => Ok(d),
            (Launch::TrapDisplacement, None) => {
                let wx = self.trap.omega_x();
                if !(wx > 0.0) {
                    return Err(Error::Config("trap-displacement launch needs an axial trap (lambda > 0)".into()));
                }
                Ok(self.v / wx)
            }
            (Launch::Kick, None) => Err(Error::Config("kick launch needs an explicit surface distance".into())),
        }
    }

    pub fn x_b(&self) -> Result<f64> {
        Ok(self.plane()? - self.x_b_offset)
    }

    pub fn validate(&self) -> Result<()> {
        self.species.validate()?;
        self.trap.validate()?;
        if !(self.n_atoms > 0.0) {
            return Err(Error::Config(format!("atom number must be positive, got {}", self.n_atoms)));
        }
        if !(self.v >= 0.0) || !self.v.is_finite() {
            return Err(Error::Config(format!("incident speed must be >= 0, got {:e}", self.v)));
        }
        match self.launch {
            Launch::Kick if self.trap.omega_x() != 0.0 => {
                return Err(Error::Config("kick launch requires an axially untrapped cloud (lambda = 0)".into()))
            }
            Launch::TrapDisplacement => {
                if !(self.trap.omega_x() > 0.0) {
                    return Err(Error::Config("trap-displacement launch requires an axial trap (lambda > 0)".into()));
                }
                let d = self.plane()?;
                if d < self.min_distance {
                    return Err(Error::Config(format!(
                        "trap displacement {d:e} m is below the cloud's longitudinal radius {:e} m; \
                         the initial state would already touch the surface",
                        self.min_distance
                    )));
                }
            }
            _ => {}
        }
        if self.initial == InitialState::Sech && self.geometry != Geometry::Line {
            return Err(Error::Config("sech initial state is one-dimensional".into()));
        }
        if !(self.x_b_offset >= 0.0) {
            return Err(Error::Config("x_b offset must be >= 0".into()));
        }
        if !(self.record_interval > 0.0) {
            return Err(Error::Config("record interval must be > 0".into()));
        }
        TimeConfig::new(self.dt, self.t_end, 1)?;
        let g = &self.grid;
        if !(g.behind > 0.0 && g.beyond > 0.0 && g.dx_max > 0.0 && g.kh > 0.0 && g.growth > 0.0) {
            return Err(Error::Config("grid extents, spacing, kh and growth must be positive".into()));
        }
        Ok(())
    }

    /// Relax every resolution knob by `factor` (> 1 is coarser).
    pub fn coarsened(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.grid.dx_max *= factor;
        s.grid.kh = (s.grid.kh * factor).min(1.2);
        s.grid.n_r = ((s.grid.n_r as f64 / factor).round() as usize).max(crate::grid::MIN_RADIAL_POINTS);
        s.dt *= factor;
        s
    }

    /// Coupling constant seen by the propagator.
    fn coupling_value(&self, d: &DerivedParams) -> f64 {
        match (self.geometry, self.coupling) {
            (Geometry::Line, Coupling::Waveguide) => d.g1d,
            _ => d.g,
        }
    }

    fn harmonic(&self, center: f64) -> Option<PotentialTerm> {
        let mut h = Harmonic::from_trap(&self.trap, &self.species);
        h.center_x = center;
        let wanted = match self.geometry {
            Geometry::Line => h.omega_x > 0.0,
            Geometry::Cylinder => true,
        };
        if self.geometry == Geometry::Line {
            h.omega_r = 0.0;
        }
        wanted.then_some(PotentialTerm::Harmonic(h))
    }

    /// Grid for this scenario.
    pub fn build_grid(&self) -> Result<Grid> {
        let plane = self.plane()?;
        let g = &self.grid;
        let (x_min, x_max) = (plane - g.behind, plane + g.beyond);
        let scat = self.scatterer.stack(&self.species, plane)?;
        let m = self.species.mass;
        let e_in = self.species.kinetic_energy(self.v.max(1e-6));
        let axial = match self.scatterer {
            Scatterer::Surface { .. } => {
                let target = |x: f64| {
                    let v = scat.sample(x, 0.0).re.abs();
                    let k = (2.0 * m * (v + e_in)).sqrt() / HBAR;
                    (g.kh / k).min(g.dx_max)
                };
                Grid1D::graded(x_min, x_max, g.growth, target)?
            }
            _ => {
                let vmax = match self.scatterer {
                    Scatterer::Tanh { v0, .. } => v0.abs(),
                    _ => 0.0,
                };
                let k = (2.0 * m * (vmax + e_in)).sqrt() / HBAR;
                Grid1D::with_spacing(x_min, x_max, (g.kh / k).min(g.dx_max))?
            }
        };
        Ok(match self.geometry {
            Geometry::Line => Grid::Line(axial),
            Geometry::Cylinder => Grid::Cylinder(GridCyl {
                axial,
                radial: RadialGrid::new(g.r_max, g.n_r)?,
            }),
        })
    }

    /// Potential during the run: scatterer, launched trap, edge sponge.
    pub fn run_stack(&self) -> Result<PotentialStack> {
        let plane = self.plane()?;
        let mut s = self.scatterer.stack(&self.species, plane)?;
        let center = match self.launch {
            Launch::TrapDisplacement => plane,
            Launch::Kick => 0.0,
        };
        if let Some(h) = self.harmonic(center) {
            s.push(h);
        }
        if let Some(sp) = self.grid.sponge {
            let end = plane + self.grid.beyond;
            s.push(PotentialTerm::Sponge(Sponge {
                start: end - sp.width,
                end,
                strength: sp.strength,
            }));
        }
        Ok(s)
    }
}

/// Prepared initial state of a scenario (before launch).
#[derive(Debug, Clone)]
pub struct InitialCloud {
    pub field: WaveField,
    pub derived: DerivedParams,
    pub coupling: f64,
    pub ground_state: Option<crate::propagator::GroundStateReport>,
}

/// Build the t = 0 state on the scenario grid, before any launch.
pub fn prepare_initial(spec: &ScenarioSpec) -> Result<InitialCloud> {
    spec.validate()?;
    let derived = spec.derived()?;
    let g = spec.coupling_value(&derived);
    let grid = spec.build_grid()?;
    let m = spec.species.mass;
    match spec.initial {
        InitialState::Sech => {
            let field = init_sech_soliton(grid.axial(), &derived, spec.n_atoms, 0.0)?;
            Ok(InitialCloud {
                field,
                derived,
                coupling: g,
                ground_state: None,
            })
        }
        InitialState::GroundState => {
            let mut stack = PotentialStack::new();
            if let Some(h) = spec.harmonic(0.0) {
                stack.push(h);
            }
            let wx = spec.trap.omega_x();
            let l_x = if wx > 0.0 { (HBAR / (m * wx)).sqrt() } else { f64::INFINITY };
            let sigma_x = if g < 0.0 {
                // attractive: about the sech² width, never wider than the trap
                let xi = derived.xi.unwrap_or(l_x);
                (0.9 * xi).min(l_x / 2f64.sqrt())
            } else if g > 0.0 && wx > 0.0 {
                let n0 = match spec.normalization {
                    Normalization::PeakDensity(n0) => n0,
                    Normalization::Atoms => spec.n_atoms / (2.0 * l_x),
                };
                let mu = g * n0;
                (2.0 * mu / (m * wx * wx)).sqrt() / 5f64.sqrt()
            } else {
                l_x / 2f64.sqrt()
            };
            let widths = GaussianWidths {
                sigma_x,
                sigma_r: derived.l_r / 2f64.sqrt(),
            };
            let opts = GroundStateOptions::default();
            let mut n = spec.n_atoms;
            let mut out = None;
            for _ in 0..40 {
                let trial = init_gaussian_trial(&grid, clip_widths(&grid, widths), n, 0.0)?;
                let (gs, rep) = ground_state(trial, &stack, m, g, n, spec.n_c, &opts)?;
                let peak = gs.measure(0.0).peak_density;
                match spec.normalization {
                    Normalization::Atoms => {
                        out = Some((gs, rep));
                        break;
                    }
                    Normalization::PeakDensity(n0) => {
                        let ratio = n0 / peak;
                        out = Some((gs, rep));
                        if (ratio - 1.0).abs() < 1e-5 {
                            break;
                        }
                        // Thomas-Fermi scaling N ∝ n0^{3/2}
                        n *= ratio.powf(1.5);
                    }
                }
            }
            let (field, rep) = out.expect("at least one iteration");
            Ok(InitialCloud {
                field,
                derived,
                coupling: g,
                ground_state: Some(rep),
            })
        }
    }
}

fn clip_widths(grid: &Grid, w: GaussianWidths) -> GaussianWidths {
    let ax = grid.axial();
    let span = (ax.x_max().min(-ax.x_min())) / 4.0;
    let mut out = w;
    out.sigma_x = w.sigma_x.min(0.95 * span);
    if let Some(r) = grid.radial() {
        out.sigma_r = w.sigma_r.min(r.r_max / 3.2).max(2.5 * r.dr);
    }
    out
}

/// Online form of the settling rule: closest approach is the record with
/// the smallest `|com − plane|`; settling is the start of the first run of
/// records after it whose `|dN_L/dt|` stays below the threshold for the
/// whole window while at most `NEAR_FRACTION` of the atoms sit within
/// `NEAR_WIDTH` of the measurement plane. The occupancy check keeps a slow
/// packet that turns around on top of `x_b` (zero flux, full density) from
/// counting as settled.
pub const NEAR_WIDTH: f64 = 5e-6;
pub const NEAR_FRACTION: f64 = 1e-2;

/// Atoms within `NEAR_WIDTH` of `x_b`.
pub fn atoms_near(field: &WaveField, x_b: f64) -> f64 {
    let xs = field.grid.axial().nodes();
    let n = field.line_density();
    cumulative_left(xs, &n, x_b + NEAR_WIDTH) - cumulative_left(xs, &n, x_b - NEAR_WIDTH)
}

#[derive(Debug, Clone)]
pub struct SettlingTracker {
    plane: f64,
    threshold: f64,
    near_limit: f64,
    window: f64,
    best: f64,
    t_ca: Option<f64>,
    prev: Option<Observables>,
    quiet: Option<(f64, f64)>,
    settled: Option<(f64, f64)>,
}

impl SettlingTracker {
    pub fn new(plane: f64, n0: f64, spec: &SettleSpec) -> Self {
        SettlingTracker {
            plane,
            threshold: spec.rate * n0 / 1e-3,
            near_limit: NEAR_FRACTION * n0,
            window: spec.window,
            best: f64::INFINITY,
            t_ca: None,
            prev: None,
            quiet: None,
            settled: None,
        }
    }

    /// Feed one record with the atom number near `x_b`; returns true once
    /// settled.
    pub fn push(&mut self, o: &Observables, near: f64) -> bool {
        if self.settled.is_some() {
            return true;
        }
        let d = (o.com_x - self.plane).abs();
        if d < self.best {
            self.best = d;
            self.t_ca = Some(o.time);
            self.quiet = None;
        } else if let (Some(p), Some(t_ca)) = (self.prev, self.t_ca) {
            let rate = (o.n_left - p.n_left).abs() / (o.time - p.time);
            if rate < self.threshold && near <= self.near_limit {
                if self.quiet.is_none() && p.time > t_ca {
                    self.quiet = Some((p.time, p.n_left));
                }
                if let Some((t0, _)) = self.quiet {
                    if o.time - t0 >= self.window * (1.0 - 1e-9) {
                        self.settled = self.quiet;
                    }
                }
            } else {
                self.quiet = None;
            }
        }
        self.prev = Some(*o);
        self.settled.is_some()
    }

    pub fn closest_approach(&self) -> Option<f64> {
        self.t_ca
    }

    /// Distance of the latest record beyond the closest approach, m.
    pub fn receded(&self) -> f64 {
        self.prev.map_or(0.0, |p| (p.com_x - self.plane).abs() - self.best)
    }

    /// `(t*, N_L(t*))` once settled.
    pub fn settled(&self) -> Option<(f64, f64)> {
        self.settled
    }
}

/// Result of the reflection measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub r: f64,
    pub t_closest: f64,
    pub t_settled: f64,
}

/// `R = N_L(t*) / N0` from a record stream. `near` holds the atom number
/// near `x_b` per record; an empty slice skips the occupancy check.
pub fn measure_reflection(
    records: &[Observables],
    near: &[f64],
    plane: f64,
    n0: f64,
    settle: &SettleSpec,
) -> Result<Reflection> {
    let mut tr = SettlingTracker::new(plane, n0, settle);
    for (k, o) in records.iter().enumerate() {
        if tr.push(o, near.get(k).copied().unwrap_or(0.0)) {
            let (t, nl) = tr.settled().expect("settled");
            return Ok(Reflection {
                r: (nl / n0).clamp(0.0, 1.0),
                t_closest: tr.closest_approach().unwrap_or(0.0),
                t_settled: t,
            });
        }
    }
    let partial = records.last().map_or(0.0, |o| (o.n_left / n0).clamp(0.0, 1.0));
    Err(Error::Unsettled {
        partial_r: partial,
        t_end: records.last().map_or(0.0, |o| o.time),
    })
}

/// Axial positions of density nodes on the axis: minima below `1e-3` of
/// the peak between two maxima above `0.1` of the peak.
pub fn detect_density_nodes(field: &WaveField) -> Vec<f64> {
    let n = field.axis_density();
    let xs = field.grid.axial().nodes();
    let peak = n.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return vec![];
    }
    let mut nodes = vec![];
    let mut last_max: Option<usize> = None;
    let mut min_since = (f64::INFINITY, 0usize);
    for i in 1..n.len() - 1 {
        if n[i] < min_since.0 {
            min_since = (n[i], i);
        }
        let is_max = n[i] >= n[i - 1] && n[i] > n[i + 1] && n[i] > 0.1 * peak;
        if is_max {
            if last_max.is_some() && min_since.0 < 1e-3 * peak {
                nodes.push(xs[min_since.1]);
            }
            last_max = Some(i);
            min_since = (f64::INFINITY, i);
        }
    }
    nodes
}

/// Outcome of one scenario run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub v: f64,
    pub plane: f64,
    pub x_b: f64,
    pub n0: f64,
    pub records: Vec<Observables>,
    /// Reflected fraction (partial when not settled).
    pub r: f64,
    /// Fraction beyond the measurement plane at the measurement time.
    pub transmitted: f64,
    /// Fraction removed by the surface absorber.
    pub absorbed: f64,
    pub closest_approach: Option<f64>,
    pub settled_at: Option<f64>,
    pub settled: bool,
    /// Largest axial node count seen up to settling.
    pub max_nodes: usize,
    pub node_detected: bool,
    pub initial_peak_density: f64,
    pub peak_amplification: f64,
    /// Centre-of-mass speed extrapolated to the trap centre from the last
    /// loss-free record, m/s.
    pub arrival_speed: f64,
    pub steps: usize,
    #[serde(skip)]
    pub final_state: Option<WaveField>,
}

impl RunRecord {
    pub fn require_settled(&self) -> Result<f64> {
        if self.settled {
            Ok(self.r)
        } else {
            Err(Error::Unsettled {
                partial_r: self.r,
                t_end: self.records.last().map_or(0.0, |o| o.time),
            })
        }
    }
}

/// Run a scenario to settling (or `t_end`).
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunRecord> {
    let cloud = prepare_initial(spec)?;
    run_from(spec, cloud)
}

/// Run a scenario from an already prepared initial cloud.
pub fn run_from(spec: &ScenarioSpec, cloud: InitialCloud) -> Result<RunRecord> {
    let m = spec.species.mass;
    let plane = spec.plane()?;
    let x_b = spec.x_b()?;
    let mut field = cloud.field;
    if spec.launch == Launch::Kick {
        field.kick(spec.v, m)?;
    }
    let n0 = field.norm();
    let peak0 = field.measure(x_b).peak_density;
    let mut stack = spec.run_stack()?;
    let dt = spec.dt;
    let stride = ((spec.record_interval / dt).round() as usize).max(1);
    let mut tracker = SettlingTracker::new(plane, n0, &spec.settle);
    let mut max_nodes = 0usize;
    let mut peak_max = peak0;
    let mut records: Vec<Observables> = Vec::new();
    let mut steps = 0;
    let mut absorbed_total = 0.0;
    let mut surface_absorbed = 0.0;
    let mut t0 = 0.0;
    let mut phase_trap_removed = false;
    let has_surface = matches!(spec.scatterer, Scatterer::Surface { .. } | Scatterer::Absorber { .. });

    loop {
        let mut stepper = Stepper::new(&field.grid, &stack, m, cloud.coupling, dt)?;
        let remaining = spec.t_end - t0;
        let time = TimeConfig::new(dt, remaining.max(0.0), stride)?;
        let removing = spec.remove_trap_at_closest_approach && !phase_trap_removed && spec.launch == Launch::TrapDisplacement;
        let mut first = true;
        let run = propagate(field, &mut stepper, &time, x_b, m, |o, f| {
            if first && !records.is_empty() {
                first = false;
                return Control::Continue;
            }
            first = false;
            let settled = tracker.push(o, atoms_near(f, x_b));
            if !settled {
                peak_max = peak_max.max(o.peak_density);
                max_nodes = max_nodes.max(detect_density_nodes(f).len());
            }
            if settled && spec.stop_when_settled {
                return Control::Stop;
            }
            if removing && tracker.closest_approach().is_some() && tracker.receded() > 1e-6 {
                return Control::Stop;
            }
            Control::Continue
        })?;
        let mut recs = run.records;
        if !records.is_empty() {
            recs.remove(0);
        }
        records.extend(recs);
        steps += run.steps;
        absorbed_total += run.absorbed;
        if has_surface {
            surface_absorbed += run.absorbed;
        }
        field = run.field;
        t0 = field.time;
        if removing && run.stopped_early && tracker.settled().is_none() {
            for h in stack.harmonics_mut() {
                h.omega_x = 0.0;
            }
            phase_trap_removed = true;
            continue;
        }
        break;
    }

    // velocities with consistent time origin across phases
    for k in 1..records.len() {
        let (a, b) = (records[k - 1], records[k]);
        records[k].com_v = (b.com_x - a.com_x) / (b.time - a.time);
    }
    let t_ca = tracker.closest_approach();
    // speed the centre of mass would reach at the trap centre, from the
    // last record before any atoms are lost (exact for harmonic motion)
    let (wx, center) = match spec.launch {
        Launch::TrapDisplacement => (spec.trap.omega_x(), plane),
        Launch::Kick => (0.0, 0.0),
    };
    let arrival_speed = records
        .iter()
        .take_while(|o| o.norm >= (1.0 - 1e-3) * n0 && t_ca.is_none_or(|t| o.time <= t))
        .last()
        .map_or(0.0, |o| (o.com_v.powi(2) + (wx * (o.com_x - center)).powi(2)).sqrt());
    let (settled, r, t_meas) = match tracker.settled() {
        Some((t, nl)) => (true, (nl / n0).clamp(0.0, 1.0), t),
        None => {
            let last = records.last().expect("records");
            (false, (last.n_left / n0).clamp(0.0, 1.0), last.time)
        }
    };
    let at = records
        .iter()
        .find(|o| o.time >= t_meas - 1e-12)
        .copied()
        .unwrap_or(*records.last().expect("records"));
    // absorbed fraction at the measurement time, from the norm deficit
    let lost_at = (n0 - at.norm).max(0.0) / n0;
    let _ = absorbed_total;
    let (absorbed, transmitted) = if has_surface {
        (lost_at, ((at.norm - at.n_left) / n0).max(0.0))
    } else {
        // edge sponges only swallow transmitted atoms
        (0.0, ((n0 - at.n_left) / n0).max(0.0))
    };
    let _ = surface_absorbed;
    Ok(RunRecord {
        name: spec.name.clone(),
        v: spec.v,
        plane,
        x_b,
        n0,
        records,
        r,
        transmitted,
        absorbed,
        closest_approach: t_ca,
        settled_at: settled.then_some(t_meas),
        settled,
        max_nodes,
        node_detected: max_nodes > 0,
        initial_peak_density: peak0,
        peak_amplification: peak_max / peak0,
        arrival_speed,
        steps,
        final_state: Some(field),
    })
}

/// One velocity of a scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub family: Option<String>,
    pub v: f64,
    pub r_gpe: f64,
    pub r_planewave: f64,
    pub settled: bool,
    pub error: Option<String>,
    /// The run failed with a numerical blow-up rather than bad input.
    pub numerical_failure: bool,
    pub record: Option<RunRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    pub fn family(&self, name: &str) -> impl Iterator<Item = &ScanRow> {
        let name = name.to_string();
        self.rows.iter().filter(move |r| r.family.as_deref() == Some(name.as_str()))
    }

    pub fn all_settled(&self) -> bool {
        self.rows.iter().all(|r| r.settled && r.error.is_none())
    }
}

/// Plane-wave reference for a scenario's scatterer, as a function of speed.
pub fn planewave_reference(spec: &ScenarioSpec, v: f64) -> Result<f64> {
    let s = spec.with_velocity(v);
    let plane = s.plane()?;
    let stack = s.scatterer.stack(&s.species, plane)?;
    if stack.is_empty() || matches!(s.scatterer, Scatterer::Absorber { .. }) {
        return Ok(0.0);
    }
    let far = match s.scatterer {
        Scatterer::Surface { .. } => 3e-3,
        _ => s.grid.behind.max(s.grid.beyond),
    };
    let setup = PlaneWaveSetup::for_stack(stack, plane - far, plane + far);
    Ok(setup.reflection(v, &s.species)?.r)
}

fn sorted_velocities(vs: &[f64]) -> Result<Vec<f64>> {
    if vs.is_empty() {
        return Err(Error::Config("velocity list is empty".into()));
    }
    if vs.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Config("velocities must be positive".into()));
    }
    let mut v = vs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    Ok(v)
}

/// Independent runs per velocity on a pool of `workers` threads; rows come
/// back ordered by velocity. Per-run failures are recorded on their row.
pub fn scan_velocity(template: &ScenarioSpec, vs: &[f64], workers: usize) -> Result<ScanResult> {
    scan_families(&[(None, template.clone())], vs, workers)
}

/// Scan several scenario families over the same velocities.
pub fn scan_families(families: &[(Option<String>, ScenarioSpec)], vs: &[f64], workers: usize) -> Result<ScanResult> {
    let vs = sorted_velocities(vs)?;
    let jobs: Vec<(Option<String>, ScenarioSpec)> = families
        .iter()
        .flat_map(|(f, s)| vs.iter().map(move |&v| (f.clone(), s.with_velocity(v))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows = pool.install(|| {
        jobs.par_iter()
            .map(|(family, spec)| {
                let r_pw = planewave_reference(spec, spec.v).unwrap_or(f64::NAN);
                match run_scenario(spec) {
                    Ok(rec) => ScanRow {
                        family: family.clone(),
                        v: spec.v,
                        r_gpe: rec.r,
                        r_planewave: r_pw,
                        settled: rec.settled,
                        error: None,
                        numerical_failure: false,
                        record: Some(rec),
                    },
                    Err(e) => {
                        log::error!("{} at v = {:e} m/s failed: {e}", spec.name, spec.v);
                        ScanRow {
                            family: family.clone(),
                            v: spec.v,
                            r_gpe: f64::NAN,
                            r_planewave: r_pw,
                            settled: false,
                            numerical_failure: matches!(e, Error::NumericalBlowup { .. } | Error::Singular(_)),
                            error: Some(e.to_string()),
                            record: None,
                        }
                    }
                }
            })
            .collect()
    });
    Ok(ScanResult { rows })
}

/// Na-23 repulsive 1D comparison over `vs`.
pub fn run_na_repulsive(vs: &[f64], workers: usize) -> Result<ScanResult> {
    scan_velocity(&na_repulsive(), vs, workers)
}

/// CSV `[family,]v_mps,R_gpe,R_planewave`.
pub fn write_scan_csv<W: Write>(scan: &ScanResult, mut w: W) -> Result<()> {
    let families = scan.rows.iter().any(|r| r.family.is_some());
    if families {
        writeln!(w, "family,v_mps,R_gpe,R_planewave")?;
    } else {
        writeln!(w, "v_mps,R_gpe,R_planewave")?;
    }
    for r in &scan.rows {
        if families {
            write!(w, "{},", r.family.as_deref().unwrap_or(""))?;
        }
        writeln!(w, "{:e},{:e},{:e}", r.v, r.r_gpe, r.r_planewave)?;
    }
    Ok(())
}

/// CSV `t_s,norm,N_left,com_x_m,rms_x_m,peak_density`.
pub fn write_observables_csv<W: Write>(records: &[Observables], mut w: W) -> Result<()> {
    writeln!(w, "t_s,norm,N_left,com_x_m,rms_x_m,peak_density")?;
    for o in records {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            o.time, o.norm, o.n_left, o.com_x, o.rms_x, o.peak_density
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// presets

/// Absorber slope used in the preset surface runs, J/m. The cloud crosses
/// the absorbing layer at several cm/s, so the slope must be large enough to
/// remove the atoms within the micron-thick layer.
pub const PRESET_ABSORBER_SLOPE: f64 = 2e-23;

/// 1D soliton against a tanh step (N = 1750, JILA waveguide).
pub fn tanh_step(v0: f64, sigma_over_xi: f64) -> ScenarioSpec {
    let sp = Species::rb85();
    let trap = TrapConfig::jila().without_axial();
    let xi = derive_params(&sp, &trap, 1750.0, Some(NC_JILA))
        .ok()
        .and_then(|d| d.xi)
        .unwrap_or(6.48e-6);
    let x_b_offset = 5e-6;
    ScenarioSpec {
        name: format!("tanh V0={v0:e} sigma/xi={sigma_over_xi}"),
        geometry: Geometry::Line,
        coupling: Coupling::Waveguide,
        species: sp,
        trap,
        n_atoms: 1750.0,
        n_c: Some(NC_JILA),
        normalization: Normalization::Atoms,
        initial: InitialState::Sech,
        launch: Launch::Kick,
        v: 0.1e-3,
        distance: Some(x_b_offset + 6.0 * xi),
        min_distance: 0.0,
        scatterer: Scatterer::Tanh {
            v0,
            sigma: sigma_over_xi * xi,
        },
        grid: GridSpec {
            behind: 300e-6,
            beyond: 100e-6,
            dx_max: (xi / 20.0).min(0.1e-6),
            kh: 2.0 * PI / 10.0,
            growth: 0.05,
            r_max: 0.0,
            n_r: 0,
            sponge: Some(SpongeSpec {
                width: 40e-6,
                strength: 1e-31,
            }),
        },
        dt: 10e-6,
        t_end: 3.0,
        record_interval: 0.2e-3,
        x_b_offset,
        settle: SettleSpec::default(),
        remove_trap_at_closest_approach: false,
        stop_when_settled: true,
    }
}

/// Soliton A: N = 2000, radial confinement only, launched by a phase kick
/// from 15 μm in front of the surface.
pub fn soliton_a() -> ScenarioSpec {
    let sp = Species::rb85();
    let trap = TrapConfig::jila().without_axial();
    let l_r = crate::params::oscillator_length(sp.mass, trap.omega_r);
    ScenarioSpec {
        name: "soliton A".into(),
        geometry: Geometry::Cylinder,
        coupling: Coupling::Waveguide,
        species: sp,
        trap,
        n_atoms: 2000.0,
        n_c: Some(NC_JILA),
        normalization: Normalization::Atoms,
        initial: InitialState::GroundState,
        launch: Launch::Kick,
        v: 0.1e-3,
        distance: Some(15e-6),
        min_distance: 0.0,
        scatterer: Scatterer::Surface {
            v_im: PRESET_ABSORBER_SLOPE,
        },
        grid: GridSpec {
            behind: 75e-6,
            beyond: 1e-6,
            dx_max: 0.2e-6,
            kh: 0.7,
            growth: 0.05,
            r_max: 5.0 * l_r,
            n_r: 32,
            sponge: None,
        },
        dt: 5e-6,
        t_end: 0.6,
        record_interval: 0.2e-3,
        x_b_offset: 5e-6,
        settle: SettleSpec::default(),
        remove_trap_at_closest_approach: false,
        stop_when_settled: true,
    }
}

/// Soliton B: N = 1500 in a 3D trap (ω_x = 2π × 6.8 Hz, λ = 0.4), launched
/// by displacing the trap onto the surface.
pub fn soliton_b() -> ScenarioSpec {
    let sp = Species::rb85();
    let wx = 2.0 * PI * 6.8;
    let trap = TrapConfig::new(wx / 0.4, 0.4).expect("valid trap");
    let l_r = crate::params::oscillator_length(sp.mass, trap.omega_r);
    ScenarioSpec {
        name: "soliton B".into(),
        n_atoms: 1500.0,
        trap,
        launch: Launch::TrapDisplacement,
        distance: None,
        min_distance: 5e-6,
        v: 0.6e-3,
        remove_trap_at_closest_approach: true,
        grid: GridSpec {
            r_max: 5.0 * l_r,
            ..soliton_a().grid
        },
        ..soliton_a()
    }
}

/// Na-23 repulsive condensate in the planar 1D model, trap launch.
pub fn na_repulsive() -> ScenarioSpec {
    let sp = Species::na23();
    let trap = TrapConfig::na_mit();
    ScenarioSpec {
        name: "Na-23 repulsive".into(),
        geometry: Geometry::Line,
        coupling: Coupling::Planar,
        species: sp,
        trap,
        n_atoms: 1.0e14,
        n_c: None,
        normalization: Normalization::PeakDensity(2.2e18),
        initial: InitialState::GroundState,
        launch: Launch::TrapDisplacement,
        v: 1e-3,
        distance: None,
        min_distance: 0.0,
        scatterer: Scatterer::Surface {
            v_im: PRESET_ABSORBER_SLOPE,
        },
        grid: GridSpec {
            behind: 160e-6,
            beyond: 1e-6,
            dx_max: 0.1e-6,
            kh: 0.7,
            growth: 0.05,
            r_max: 0.0,
            n_r: 0,
            sponge: None,
        },
        dt: 5e-6,
        t_end: 0.6,
        record_interval: 0.2e-3,
        x_b_offset: 5e-6,
        settle: SettleSpec::default(),
        remove_trap_at_closest_approach: true,
        stop_when_settled: true,
    }
}

/// A named study: one or more scenario families and a velocity list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub families: Vec<(Option<String>, ScenarioSpec)>,
    pub velocities: Vec<f64>,
}

pub const PRESET_NAMES: &[&str] = &["fig2b", "fig3", "fig5-solitonA", "fig5-solitonB", "fig5-inset-na"];

pub fn preset(name: &str) -> Result<Preset> {
    let mm = |v: &[f64]| v.iter().map(|x| x * 1e-3).collect::<Vec<_>>();
    let fam = |label: &str, s: ScenarioSpec| (Some(label.to_string()), s);
    let p = match name {
        "fig2b" => Preset {
            name: name.into(),
            families: [0.0, 0.1, 0.25, 1.0]
                .iter()
                .map(|&s| fam(&format!("sigma/xi={s}"), tanh_step(-1e-31, s)))
                .collect(),
            velocities: mm(&[0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0]),
        },
        "fig3" => Preset {
            name: name.into(),
            families: [0.0, 0.1, 1.0]
                .iter()
                .map(|&s| fam(&format!("sigma/xi={s}"), tanh_step(1e-31, s)))
                .collect(),
            velocities: mm(&[0.6, 0.8, 0.9, 1.0, 1.1, 1.15, 1.2, 1.25, 1.3, 1.4, 1.6, 2.0]),
        },
        "fig5-solitonA" => Preset {
            name: name.into(),
            families: vec![(None, soliton_a())],
            velocities: mm(&[0.1, 0.2, 0.4, 0.6, 0.9, 1.3]),
        },
        "fig5-solitonB" => Preset {
            name: name.into(),
            families: vec![(None, soliton_b())],
            velocities: mm(&[0.4, 0.6, 0.9, 1.3]),
        },
        "fig5-inset-na" => Preset {
            name: name.into(),
            families: vec![(None, na_repulsive())],
            velocities: mm(&[0.1, 0.2, 0.5, 1.0, 2.0, 3.0]),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown scenario preset '{other}' (known: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

/// Classical surface-plane stand-off used for diagnostics: the cutoff.
pub fn surface_cutoff(plane: f64) -> f64 {
    plane - CP_CUTOFF
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: f64, nl: f64, com: f64) -> Observables {
        Observables {
            time: t,
            norm: 1.0,
            n_left: nl,
            com_x: com,
            com_v: 0.0,
            rms_x: 0.0,
            peak_density: 0.0,
        }
    }

    #[test]
    fn settling_waits_for_closest_approach() {
        // approach until t = 10 ms, then N_L drops and stays at 0.4
        let mut recs = vec![];
        for k in 0..400 {
            let t = k as f64 * 1e-4;
            let com = -(10e-3 - t).abs() * 1e-3;
            let nl = if t < 10e-3 { 1.0 } else { 0.4 + 0.6 * (-(t - 10e-3) / 1e-3).exp() };
            recs.push(obs(t, nl, com));
        }
        let r = measure_reflection(&recs, &[], 0.0, 1.0, &SettleSpec::default()).unwrap();
        assert!((r.t_closest - 10e-3).abs() < 1e-9);
        assert!(r.t_settled > r.t_closest);
        assert!((r.r - 0.4).abs() < 0.01);
    }

    #[test]
    fn unsettled_reports_partial() {
        let recs: Vec<_> = (0..50).map(|k| obs(k as f64 * 1e-4, 1.0 - k as f64 * 0.01, -1e-6 + k as f64 * 1e-8)).collect();
        match measure_reflection(&recs, &[], 0.0, 1.0, &SettleSpec::default()) {
            Err(Error::Unsettled { partial_r, .. }) => assert!((partial_r - 0.51).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_nodes_in_single_peak() {
        let g = Grid1D::uniform(-50e-6, 50e-6, 1001).unwrap();
        let d = derive_params(&Species::rb85(), &TrapConfig::jila(), 1750.0, None).unwrap();
        let mut d2 = d.clone();
        d2.xi = Some(4e-6);
        let f = init_sech_soliton(&g, &d2, 1750.0, 0.0).unwrap();
        assert!(detect_density_nodes(&f).is_empty());
        // two separated solitons have a node between them
        let mut two = f.clone();
        for (i, &x) in g.nodes().iter().enumerate() {
            let a = (1.0 / ((x + 20e-6) / 4e-6).cosh()) + (1.0 / ((x - 20e-6) / 4e-6).cosh());
            two.psi[i] = crate::Complex64::new(a, 0.0);
        }
        let nodes = detect_density_nodes(&two);
        assert_eq!(nodes.len(), 1);
        assert!(nodes[0].abs() < 0.2e-6);
    }

    #[test]
    fn preset_catalogue() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert!(!p.velocities.is_empty());
            for (_, s) in &p.families {
                s.with_velocity(p.velocities[p.velocities.len() - 1]).validate().unwrap();
            }
        }
        assert!(preset("nope").is_err());
        assert_eq!(preset("fig2b").unwrap().families.len(), 4);
    }

    #[test]
    fn launch_constraints() {
        let mut b = soliton_b();
        b.v = 0.1e-3; // Δx = 2.3 μm < 5 μm
        assert!(matches!(b.validate(), Err(Error::Config(_))));
        let mut a = soliton_a();
        a.trap = TrapConfig::jila();
        assert!(a.validate().is_err());
        let b = soliton_b().with_velocity(0.64e-3);
        let dx = b.plane().unwrap();
        assert!((dx - 0.64e-3 / (2.0 * PI * 6.8)).abs() < 1e-12);
    }

    #[test]
    fn scan_rejects_bad_velocities() {
        assert!(scan_velocity(&tanh_step(-1e-31, 0.0), &[], 1).is_err());
        assert!(scan_velocity(&tanh_step(-1e-31, 0.0), &[-1.0], 1).is_err());
    }
}
