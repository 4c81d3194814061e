//! Non-interacting single-atom scattering: closed-form hard step,
//! piecewise-constant transfer matrices, the stepwise product rule and the
//! low-energy asymptote.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::sqrt_upper;
use crate::params::{Species, HBAR};
use crate::potentials::{PotentialStack, PotentialTerm};
use crate::Complex64;

/// Piecewise-constant potential: `values[0]` left of `breaks[0]`,
/// `values[k]` on `(breaks[k-1], breaks[k])`, the last value to the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePotential {
    pub breaks: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl PiecewisePotential {
    pub fn new(breaks: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::Domain(format!(
                "{} breakpoints need {} values, got {}",
                breaks.len(),
                breaks.len() + 1,
                values.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        Ok(PiecewisePotential { breaks, values })
    }

    /// A single uniform region.
    pub fn uniform(v: Complex64) -> Self {
        PiecewisePotential {
            breaks: vec![],
            values: vec![v],
        }
    }

    pub fn intervals(&self) -> usize {
        self.values.len()
    }

    /// Split interval `k` at `x` without changing any value.
    pub fn split(&mut self, x: f64) {
        let k = self.breaks.partition_point(|&b| b < x);
        if self.breaks.get(k) == Some(&x) {
            return;
        }
        self.breaks.insert(k, x);
        let v = self.values[k];
        self.values.insert(k, v);
    }

    fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }
}

/// What happens to the wave beyond the last breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Free outgoing wave counted as transmission.
    Transmitting,
    /// Purely inward wave into the surface; its flux counts as adsorbed.
    OutgoingAtSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub r: f64,
    pub t: f64,
    pub a: f64,
    pub k_in: f64,
    pub k_out: Complex64,
}

/// Local wave number `sqrt(2m(E − V))/ħ` with `Im k ≥ 0`.
pub fn wave_number(mass: f64, e: f64, v: Complex64) -> Complex64 {
    sqrt_upper(Complex64::new(2.0 * mass * (e - v.re), -2.0 * mass * v.im)) / HBAR
}

/// Closed-form reflection from a semi-infinite step of height `v0`.
pub fn reflection_hard_step(e: f64, v0: f64, species: &Species) -> Result<ScatteringResult> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("energy must be > 0, got {e:e}")));
    }
    let k1 = wave_number(species.mass, e, Complex64::new(0.0, 0.0));
    let k2 = wave_number(species.mass, e, Complex64::new(v0, 0.0));
    if k2.re == 0.0 {
        return Ok(ScatteringResult {
            r: 1.0,
            t: 0.0,
            a: 0.0,
            k_in: k1.re,
            k_out: k2,
        });
    }
    let r = ((k1 - k2) / (k1 + k2)).norm_sqr();
    Ok(ScatteringResult {
        r,
        t: 1.0 - r,
        a: 0.0,
        k_in: k1.re,
        k_out: k2,
    })
}

/// Generic piecewise-constant scattering kernel.
pub mod transfer {
    use num_complex::Complex;

    use crate::num::Real;

    /// Stable `tan z` for `Im z ≥ 0`.
    fn tan_upper<T: Real>(z: Complex<T>) -> Complex<T> {
        let i = Complex::new(T::zero(), T::one());
        let e = (i * z * T::lit(2.0)).exp();
        -i * (e - T::one()) / (e + T::one())
    }

    /// `ln cos z` for `Im z ≥ 0`.
    fn ln_cos_upper<T: Real>(z: Complex<T>) -> Complex<T> {
        let i = Complex::new(T::zero(), T::one());
        let e = (i * z * T::lit(2.0)).exp();
        -i * z + ((e + T::one()) / T::lit(2.0)).ln()
    }

    /// Amplitudes for a wave incident from the left on regions with wave
    /// numbers `k` (`k[0]` incident side, `k[n-1]` final side) separated by
    /// interior regions of widths `widths` (`widths.len() == k.len() − 2`).
    ///
    /// The 2×2 transfer matrix of each region acts on `(ψ, ψ')`; it is
    /// applied here in projective form on `y = ψ'/ψ`, with the amplitude
    /// tracked logarithmically so evanescent regions cannot overflow.
    /// Returns `(r, ln|t|)`, the reflection amplitude and the log modulus of
    /// the transmission amplitude.
    pub fn amplitudes<T: Real>(k: &[Complex<T>], widths: &[T]) -> (Complex<T>, T) {
        let n = k.len();
        debug_assert!(n >= 1 && widths.len() + 2 == n.max(2));
        let i = Complex::new(T::zero(), T::one());
        if n == 1 {
            return (Complex::new(T::zero(), T::zero()), T::zero());
        }
        // ψ = 1, ψ' = i k_out at the last breakpoint
        let mut y = i * k[n - 1];
        let mut ln_psi = Complex::new(T::zero(), T::zero());
        for idx in (1..n - 1).rev() {
            let kk = k[idx];
            let z = kk * widths[idx - 1];
            if kk.norm() == T::zero() {
                // linear solution ψ(x − L) = ψ − L ψ'
                let f = Complex::new(T::one(), T::zero()) - y * widths[idx - 1];
                ln_psi = ln_psi + f.ln();
                y = y / f;
                continue;
            }
            let tz = tan_upper(z);
            let f = Complex::new(T::one(), T::zero()) - y / kk * tz;
            ln_psi = ln_psi + ln_cos_upper(z) + f.ln();
            y = (kk * tz + y) / f;
        }
        let k0 = k[0];
        let r = (i * k0 - y) / (i * k0 + y);
        // ψ(b₀) = 1 + r when the incident amplitude is 1
        let ln_t = -ln_psi.re + (Complex::new(T::one(), T::zero()) + r).norm().ln();
        (r, ln_t)
    }
}

/// Transfer-matrix scattering of a particle of kinetic energy `e` (far left).
pub fn reflection_transfer_matrix(
    pw: &PiecewisePotential,
    e: f64,
    species: &Species,
    boundary: Boundary,
) -> Result<ScatteringResult> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("energy must be > 0, got {e:e}")));
    }
    let m = species.mass;
    let k: Vec<Complex64> = pw.values.iter().map(|&v| wave_number(m, e, v)).collect();
    let widths: Vec<f64> = pw.breaks.windows(2).map(|w| w[1] - w[0]).collect();
    let k_in = k[0].re;
    let k_out = *k.last().expect("at least one interval");
    if k_in == 0.0 {
        return Err(Error::Domain("incident region is classically forbidden".into()));
    }
    let (r_amp, ln_t) = transfer::amplitudes(&k, &widths);
    if !r_amp.re.is_finite() || !r_amp.im.is_finite() {
        return Err(Error::Instability(format!(
            "non-finite reflection amplitude over {} intervals; refine the discretisation",
            pw.intervals()
        )));
    }
    let r = r_amp.norm_sqr().min(1.0);
    let flux = if k_out.re > 0.0 {
        (2.0 * ln_t).exp() * k_out.re / k_in
    } else {
        0.0
    };
    let (t, a) = match boundary {
        Boundary::Transmitting => {
            let t = flux.min(1.0 - r).max(0.0);
            let a = if pw.is_real() { 0.0 } else { (1.0 - r - t).max(0.0) };
            (t, a)
        }
        Boundary::OutgoingAtSurface => (0.0, 1.0 - r),
    };
    if pw.is_real() && boundary == Boundary::Transmitting && (r + flux - 1.0).abs() > 1e-8 {
        log::debug!("flux imbalance {:e} over {} intervals", r + flux - 1.0, pw.intervals());
    }
    Ok(ScatteringResult { r, t, a, k_in, k_out })
}

/// The stepwise rule: reflections of successive interfaces combined as
/// `R = 1 − ∏ (1 − R_j)`, ignoring interference between interfaces.
pub fn reflection_product_approx(pw: &PiecewisePotential, e: f64, species: &Species) -> Result<ScatteringResult> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("energy must be > 0, got {e:e}")));
    }
    let m = species.mass;
    let k: Vec<Complex64> = pw.values.iter().map(|&v| wave_number(m, e, v)).collect();
    let mut t = 1.0;
    for w in k.windows(2) {
        let (k1, k2) = (w[0], w[1]);
        let rj = if k2.re == 0.0 || k1.re == 0.0 {
            1.0
        } else {
            ((k1 - k2) / (k1 + k2)).norm_sqr()
        };
        t *= 1.0 - rj;
    }
    Ok(ScatteringResult {
        r: 1.0 - t,
        t,
        a: 0.0,
        k_in: k[0].re,
        k_out: *k.last().expect("at least one interval"),
    })
}

/// `max(0, 1 − 2β₄k)`.
pub fn low_energy_asymptote(k: f64, beta4: f64) -> f64 {
    (1.0 - 2.0 * beta4 * k).max(0.0)
}

/// Discretisation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizeRule {
    /// Interval width as a fraction of the local `1/k`.
    pub per_wavelength: f64,
    /// Upper bound on interval width, m.
    pub max_width: f64,
    /// Terms weaker than this fraction of `E` are dropped on the vacuum side.
    pub truncate: f64,
}

impl Default for DiscretizeRule {
    fn default() -> Self {
        DiscretizeRule {
            per_wavelength: 1.0 / 20.0,
            max_width: 0.1e-6,
            truncate: 1e-4,
        }
    }
}

impl DiscretizeRule {
    pub fn refined(self, factor: f64) -> Self {
        DiscretizeRule {
            per_wavelength: self.per_wavelength / factor,
            max_width: self.max_width / factor,
            ..self
        }
    }
}

fn piecewise_constant_only(stack: &PotentialStack) -> bool {
    stack.terms.iter().all(|t| match t {
        PotentialTerm::Tanh(s) => s.sigma == 0.0,
        PotentialTerm::Uniform { .. } => true,
        _ => false,
    })
}

/// Approximate the stack on `[x_min, x_max]` (sampled on axis) by constant
/// intervals. Sharp steps become exact breakpoints. With a Casimir-Polder
/// surface and [`Boundary::OutgoingAtSurface`], the range ends at the cutoff
/// plane and the last region carries the cutoff value; the vacuum side
/// starts where `|V|` first exceeds `truncate · E`.
pub fn discretize(
    stack: &PotentialStack,
    x_min: f64,
    x_max: f64,
    e: f64,
    mass: f64,
    rule: &DiscretizeRule,
    boundary: Boundary,
) -> Result<PiecewisePotential> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("energy must be > 0, got {e:e}")));
    }
    if !(x_max > x_min) {
        return Err(Error::Domain(format!("empty range [{x_min:e}, {x_max:e}]")));
    }
    let sample = |x: f64| stack.sample(x, 0.0);
    if piecewise_constant_only(stack) {
        let mut breaks: Vec<f64> = stack
            .terms
            .iter()
            .filter_map(|t| match t {
                PotentialTerm::Tanh(s) if s.v0 != 0.0 => Some(s.x0),
                _ => None,
            })
            .collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let mut values = Vec::with_capacity(breaks.len() + 1);
        for k in 0..=breaks.len() {
            let x = match (k, breaks.len()) {
                (_, 0) => 0.0,
                (0, _) => breaks[0] - 1.0,
                (k, n) if k == n => breaks[n - 1] + 1.0,
                (k, _) => 0.5 * (breaks[k - 1] + breaks[k]),
            };
            values.push(sample(x));
        }
        return PiecewisePotential::new(breaks, values);
    }

    let (mut lo, mut hi) = (x_min, x_max);
    // asymptotic value on the far side, before trimming
    let v_far = sample(x_max);
    let surface = stack.surface().copied();
    if boundary == Boundary::OutgoingAtSurface {
        let cp = surface.ok_or_else(|| Error::Domain("outgoing-at-surface boundary needs a surface term".into()))?;
        hi = hi.min(cp.cutoff_x());
    }
    // trim the negligible vacuum side
    let thresh = rule.truncate * e;
    let probes = 20_000;
    let step = (hi - lo) / probes as f64;
    let first = (0..=probes).map(|i| lo + i as f64 * step).find(|&x| sample(x).norm() > thresh);
    match first {
        Some(x) => lo = (x - step).max(lo),
        None => return Ok(PiecewisePotential::uniform(sample(lo))),
    }
    if boundary == Boundary::Transmitting {
        let last = (0..=probes).rev().map(|i| lo + i as f64 * (hi - lo) / probes as f64).find(|&x| {
            let v = sample(x);
            (v - sample(hi)).norm() > thresh
        });
        if let Some(x) = last {
            hi = (x + (hi - lo) / probes as f64).min(hi);
        }
    }

    let k_floor = (2.0 * mass * e).sqrt() / HBAR;
    let width_at = |x: f64| {
        let k = wave_number(mass, e, sample(x)).norm().max(k_floor);
        (rule.per_wavelength / k).min(rule.max_width)
    };
    let mut breaks = vec![lo];
    let mut values = vec![sample(lo - 1e-3 * step.max(f64::MIN_POSITIVE))];
    let mut x = lo;
    while x < hi {
        // width from the finer end of the interval
        let mut h = width_at(x);
        let h2 = width_at((x + h).min(hi));
        h = h.min(h2);
        let next = if x + h >= hi || hi - (x + h) < 1e-3 * h { hi } else { x + h };
        values.push(sample(0.5 * (x + next)));
        breaks.push(next);
        x = next;
    }
    let tail = match boundary {
        Boundary::OutgoingAtSurface => {
            let cp = surface.expect("checked above");
            Complex64::new(cp.v_cp(cp.delta), 0.0)
        }
        Boundary::Transmitting => v_far,
    };
    values.push(tail);
    PiecewisePotential::new(breaks, values)
}

/// One row of a plane-wave velocity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveRow {
    pub v: f64,
    pub k: f64,
    pub result: ScatteringResult,
}

/// Plane-wave definition of a stack: range and boundary handling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSetup {
    pub stack: PotentialStack,
    pub x_min: f64,
    pub x_max: f64,
    pub boundary: Boundary,
    pub rule: DiscretizeRule,
}

impl PlaneWaveSetup {
    /// Surface boundary when the stack has a surface, transmitting otherwise.
    pub fn for_stack(stack: PotentialStack, x_min: f64, x_max: f64) -> Self {
        let boundary = if stack.surface().is_some() {
            Boundary::OutgoingAtSurface
        } else {
            Boundary::Transmitting
        };
        PlaneWaveSetup {
            stack,
            x_min,
            x_max,
            boundary,
            rule: DiscretizeRule::default(),
        }
    }

    pub fn reflection(&self, v: f64, species: &Species) -> Result<ScatteringResult> {
        let e = species.kinetic_energy(v);
        let pw = discretize(&self.stack, self.x_min, self.x_max, e, species.mass, &self.rule, self.boundary)?;
        reflection_transfer_matrix(&pw, e, species, self.boundary)
    }

    pub fn scan(&self, velocities: &[f64], species: &Species) -> Result<Vec<PlaneWaveRow>> {
        velocities
            .iter()
            .map(|&v| {
                Ok(PlaneWaveRow {
                    v,
                    k: species.wave_number(v),
                    result: self.reflection(v, species)?,
                })
            })
            .collect()
    }
}

/// CSV `v_mps,k_per_m,R,T,A`.
pub fn write_planewave_csv<W: Write>(rows: &[PlaneWaveRow], mut w: W) -> Result<()> {
    writeln!(w, "v_mps,k_per_m,R,T,A")?;
    for r in rows {
        writeln!(w, "{:e},{:e},{:e},{:e},{:e}", r.v, r.k, r.result.r, r.result.t, r.result.a)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{CasimirPolderSurface, TanhStep};
    use proptest::prelude::*;

    fn rb() -> Species {
        Species::rb85()
    }

    fn tanh(v0: f64, sigma: f64) -> PotentialStack {
        PotentialStack::new().with(PotentialTerm::Tanh(TanhStep::new(v0, sigma, 0.0).unwrap()))
    }

    #[test]
    fn hard_step_closed_form() {
        let sp = rb();
        let e = sp.kinetic_energy(0.1e-3);
        assert_eq!(reflection_hard_step(e, 0.0, &sp).unwrap().r, 0.0);
        assert_eq!(reflection_hard_step(e, 2.0 * e, &sp).unwrap().r, 1.0);
        let r = reflection_hard_step(e, -1e-31, &sp).unwrap().r;
        assert!((r - 0.715).abs() < 0.001, "{r}");
        assert!(reflection_hard_step(0.0, 1.0, &sp).is_err());
    }

    #[test]
    fn hard_tanh_is_two_intervals() {
        let sp = rb();
        let e = sp.kinetic_energy(0.3e-3);
        let pw = discretize(&tanh(-1e-31, 0.0), -1e-4, 1e-4, e, sp.mass, &DiscretizeRule::default(), Boundary::Transmitting).unwrap();
        assert_eq!(pw.intervals(), 2);
        let tm = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap();
        let pa = reflection_product_approx(&pw, e, &sp).unwrap();
        let hs = reflection_hard_step(e, -1e-31, &sp).unwrap();
        assert!((tm.r - hs.r).abs() < 1e-12);
        assert!((pa.r - tm.r).abs() < 1e-12);
    }

    #[test]
    fn uniform_is_one_interval() {
        let sp = rb();
        let e = sp.kinetic_energy(1e-3);
        let st = PotentialStack::new().with(PotentialTerm::Uniform { value: -1e-32 });
        let pw = discretize(&st, -1e-5, 1e-5, e, sp.mass, &DiscretizeRule::default(), Boundary::Transmitting).unwrap();
        assert_eq!(pw.intervals(), 1);
        assert_eq!(pw.values[0].re, -1e-32);
        assert_eq!(reflection_product_approx(&pw, e, &sp).unwrap().r, 0.0);
    }

    #[test]
    fn smooth_step_few_percent() {
        let sp = rb();
        let xi = 6.478e-6;
        let e = sp.kinetic_energy(0.1e-3);
        let pw = discretize(&tanh(-1e-31, xi), -60e-6, 60e-6, e, sp.mass, &DiscretizeRule::default(), Boundary::Transmitting).unwrap();
        let r = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap();
        assert!(r.r <= 0.05, "{}", r.r);
        assert!((r.r + r.t - 1.0).abs() < 1e-10);
    }

    #[test]
    fn positive_step_total_reflection_below_threshold() {
        let sp = rb();
        let v0 = 1e-31;
        let vc = (2.0 * v0 / sp.mass).sqrt();
        for f in [0.2, 0.5, 0.9, 0.999] {
            let e = sp.kinetic_energy(f * vc);
            assert_eq!(reflection_hard_step(e, v0, &sp).unwrap().r, 1.0);
        }
        let above = reflection_hard_step(sp.kinetic_energy(1.001 * vc), v0, &sp).unwrap().r;
        assert!(above < 0.95);
    }

    #[test]
    fn smooth_step_reflects_just_below_threshold() {
        let sp = rb();
        let v0 = 1e-31;
        let vc = (2.0 * v0 / sp.mass).sqrt();
        for sigma in [0.65e-6, 6.5e-6] {
            let setup = PlaneWaveSetup::for_stack(tanh(v0, sigma), -300e-6, 300e-6);
            let r = setup.reflection(0.999999 * vc, &sp).unwrap().r;
            assert!((1.0 - r).abs() < 1e-12, "sigma {sigma:e}: R = {r}");
        }
    }

    #[test]
    fn barrier_tunnelling_stays_finite() {
        let sp = rb();
        let e = sp.kinetic_energy(0.1e-3);
        let pw = PiecewisePotential::new(vec![0.0, 50e-6], vec![0.0.into(), 1e-30.into(), 0.0.into()]).unwrap();
        let r = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);
        assert!(r.t >= 0.0 && r.t < 1e-100);
    }

    #[test]
    fn surface_reflection_and_asymptote() {
        let sp = rb();
        let cp = CasimirPolderSurface::silicon(&sp, 0.0);
        let setup = PlaneWaveSetup::for_stack(PotentialStack::new().with(PotentialTerm::CasimirPolder(cp)), -2e-3, 0.0);
        let r = setup.reflection(0.1e-3, &sp).unwrap();
        assert!((r.r + r.a - 1.0).abs() < 1e-12);
        assert!(r.r > 0.4 && r.r < 0.6, "{}", r.r);
        assert_eq!(low_energy_asymptote(0.0, 1.5e-6), 1.0);
        assert_eq!(low_energy_asymptote(0.25, 1.0), 0.5);
        let k = sp.wave_number(0.1e-3);
        assert!((k - 1.34e5).abs() < 0.01e5);
        assert!((low_energy_asymptote(k, 1.519e-6) - 0.59).abs() < 0.01);
    }

    #[test]
    fn refinement_converges() {
        let sp = rb();
        let e = sp.kinetic_energy(0.1e-3);
        let st = tanh(-1e-31, 0.25 * 6.478e-6);
        let rule = DiscretizeRule::default();
        let a = discretize(&st, -60e-6, 60e-6, e, sp.mass, &rule, Boundary::Transmitting).unwrap();
        let b = discretize(&st, -60e-6, 60e-6, e, sp.mass, &rule.refined(2.0), Boundary::Transmitting).unwrap();
        let ra = reflection_transfer_matrix(&a, e, &sp, Boundary::Transmitting).unwrap().r;
        let rb_ = reflection_transfer_matrix(&b, e, &sp, Boundary::Transmitting).unwrap().r;
        assert!((ra - rb_).abs() < 1e-4, "{ra} {rb_}");
        assert!(b.intervals() > a.intervals());
    }

    proptest! {
        #[test]
        fn flux_conserved_real(vals in proptest::collection::vec(-2e-31f64..2e-31, 2..12), v in 0.05e-3f64..5e-3) {
            let sp = rb();
            let n = vals.len();
            let breaks: Vec<f64> = (0..n - 1).map(|i| i as f64 * 0.7e-6).collect();
            let mut values: Vec<Complex64> = vals.iter().map(|&x| x.into()).collect();
            values[0] = 0.0.into();
            let e = sp.kinetic_energy(v);
            let pw = PiecewisePotential::new(breaks, values).unwrap();
            let res = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap();
            prop_assert!(res.r >= 0.0 && res.r <= 1.0);
            if res.k_out.re > 0.0 {
                let (_, ln_t) = transfer::amplitudes(
                    &pw.values.iter().map(|&x| wave_number(sp.mass, e, x)).collect::<Vec<_>>(),
                    &pw.breaks.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>(),
                );
                let flux = (2.0 * ln_t).exp() * res.k_out.re / res.k_in;
                prop_assert!((res.r + flux - 1.0).abs() < 1e-10, "{} {}", res.r, flux);
            }
        }

        #[test]
        fn splitting_is_invariant(v in 0.05e-3f64..5e-3, at in 0.01f64..0.99) {
            let sp = rb();
            let e = sp.kinetic_energy(v);
            let mut pw = PiecewisePotential::new(
                vec![0.0, 2e-6, 3e-6],
                vec![0.0.into(), (-5e-32).into(), 3e-32.into(), (-1e-31).into()],
            ).unwrap();
            let before = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap().r;
            pw.split(2e-6 * at);
            let after = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap().r;
            prop_assert!((before - after).abs() < 1e-10);
        }

        #[test]
        fn two_interval_matches_closed_form(v in 0.05e-3f64..5e-3, v0 in -3e-31f64..3e-31) {
            let sp = rb();
            let e = sp.kinetic_energy(v);
            let pw = PiecewisePotential::new(vec![0.0], vec![0.0.into(), v0.into()]).unwrap();
            let tm = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap().r;
            let hs = reflection_hard_step(e, v0, &sp).unwrap().r;
            prop_assert!((tm - hs).abs() < 1e-10);
        }
    }
}
