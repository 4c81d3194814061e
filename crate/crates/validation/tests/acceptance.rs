//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use qreflect::experiments::*;
use qreflect::field::{init_gaussian_trial, init_sech_soliton, GaussianWidths, WaveField};
use qreflect::grid::{Grid, Grid1D};
use qreflect::params::{
    classical_critical_speed, derive_params, low_energy_beta4, Species, TrapConfig, HBAR, NC_JILA,
};
use qreflect::planewave::{
    low_energy_asymptote, reflection_transfer_matrix, Boundary, PiecewisePotential, PlaneWaveSetup,
};
use qreflect::potentials::{CasimirPolderSurface, PotentialStack, PotentialTerm};
use qreflect::propagator::{ground_state, propagate, Control, GroundStateOptions, Stepper, TimeConfig};
use qreflect::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Runs are shared between criteria.
#[derive(Default)]
struct Cache {
    runs: BTreeMap<String, RunRecord>,
}

impl Cache {
    fn run(&mut self, key: &str, spec: &ScenarioSpec) -> RunRecord {
        if let Some(r) = self.runs.get(key) {
            return r.clone();
        }
        let t = Instant::now();
        let rec = run_scenario(spec).unwrap_or_else(|e| panic!("{key}: {e}"));
        eprintln!(
            "  [{key}] R = {:.4} settled = {} ({:.0} s)",
            rec.r,
            rec.settled,
            t.elapsed().as_secs_f64()
        );
        self.runs.insert(key.to_string(), rec.clone());
        rec
    }
}

fn mm(v: f64) -> f64 {
    v * 1e-3
}

fn tanh(v0: f64, s: f64, v_mm: f64) -> (String, ScenarioSpec) {
    (
        format!("tanh {v0:e} {s} {v_mm}"),
        tanh_step(v0, s).with_velocity(mm(v_mm)),
    )
}

fn c1_hard_step_oracle() -> Outcome {
    let t = Instant::now();
    let sp = Species::rb85();
    let v0 = -1e-31;
    let pw = PiecewisePotential::new(vec![0.0], vec![Complex64::new(0.0, 0.0), Complex64::new(v0, 0.0)]).unwrap();
    let mut worst: f64 = 0.0;
    let n = 400;
    for i in 0..n {
        let v = 0.05e-3 * (100f64).powf(i as f64 / (n - 1) as f64);
        let e = 0.5 * sp.mass * v * v;
        let k1 = (2.0 * sp.mass * e).sqrt() / HBAR;
        let k2 = (2.0 * sp.mass * (e - v0)).sqrt() / HBAR;
        let exact = ((k1 - k2) / (k1 + k2)).powi(2);
        let r = reflection_transfer_matrix(&pw, e, &sp, Boundary::Transmitting).unwrap().r;
        worst = worst.max((r - exact).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs < 1.0,
        format!("max |R - R_exact| = {worst:.2e} over {n} speeds in [0.05, 5] mm/s, {secs:.3} s"),
    )
}

fn c2_negative_step_anchors(cache: &mut Cache) -> Outcome {
    let checks = [(0.0, 0.75, 0.85), (0.25, 0.35, 0.45), (1.0, 0.0, 0.05)];
    let mut pass = true;
    let mut parts = vec![];
    for (s, lo, hi) in checks {
        let (k, spec) = tanh(-1e-31, s, 0.1);
        let rec = cache.run(&k, &spec);
        let ok = rec.settled && rec.r >= lo && rec.r <= hi;
        pass &= ok;
        parts.push(format!("sigma/xi={s}: R={:.4} in [{lo}, {hi}] {}", rec.r, if ok { "ok" } else { "no" }));
    }
    outcome(pass, parts.join("; "))
}

fn c3_planewave_agreement(cache: &mut Cache) -> Outcome {
    let mut pass = true;
    let mut worst = (0.0, String::new());
    let mut low = vec![];
    for s in [0.0, 0.1, 0.25, 1.0] {
        for v in [0.5, 1.0, 2.0, 5.0] {
            let (k, spec) = tanh(-1e-31, s, v);
            let rec = cache.run(&k, &spec);
            let pw = planewave_reference(&spec, spec.v).unwrap();
            let d = (rec.r - pw).abs();
            pass &= rec.settled && d <= 0.02;
            if d > worst.0 {
                worst = (d, format!("sigma/xi={s} v={v} mm/s"));
            }
        }
        let (k, spec) = tanh(-1e-31, s, 0.1);
        let rec = cache.run(&k, &spec);
        let pw = planewave_reference(&spec, spec.v).unwrap();
        let ok = rec.r >= pw;
        pass &= ok;
        low.push(format!("sigma/xi={s}: {:.4} vs {:.4}{}", rec.r, pw, if ok { "" } else { " (below)" }));
    }
    outcome(
        pass,
        format!(
            "v >= 0.5 mm/s: max |dR| = {:.4} at {}; v = 0.1 mm/s R_gpe vs R_pw: {}",
            worst.0,
            worst.1,
            low.join(", ")
        ),
    )
}

/// Speed where R first drops through `level`: bracketed on the sampled
/// curve, then bisected with further runs.
fn crossing(cache: &mut Cache, v0: f64, s: f64, vs_mm: &[f64], rs: &[f64], level: f64) -> Option<f64> {
    let i = (1..vs_mm.len()).find(|&i| rs[i - 1] >= level && rs[i] < level)?;
    let (mut a, mut b) = (vs_mm[i - 1], vs_mm[i]);
    let (mut ra, mut rb) = (rs[i - 1], rs[i]);
    for _ in 0..BISECTIONS {
        let m = 0.5 * (a + b);
        let (k, spec) = tanh(v0, s, m);
        let rm = cache.run(&k, &spec).r;
        if rm >= level {
            (a, ra) = (m, rm);
        } else {
            (b, rb) = (m, rm);
        }
    }
    Some(mm(a + (ra - level) / (ra - rb) * (b - a)))
}

const BISECTIONS: usize = 5;

fn c4_positive_step(cache: &mut Cache) -> Outcome {
    let sp = Species::rb85();
    let v0 = 1e-31;
    let v_c = classical_critical_speed(v0, &sp).unwrap();
    let mut pass = true;
    let mut parts = vec![];

    // plane wave: unity below v_c, sudden drop above
    for s in [0.0, 0.1, 1.0] {
        let spec = tanh_step(v0, s);
        let mut below: f64 = 0.0;
        for f in [0.1, 0.5, 0.9, 0.99, 0.999999] {
            below = below.max((1.0 - planewave_reference(&spec, f * v_c).unwrap()).abs());
        }
        let above = planewave_reference(&spec, 1.01 * v_c).unwrap();
        let ok = below < 1e-12 && above <= 0.8;
        pass &= ok;
        parts.push(format!("pw sigma/xi={s}: max|1-R| below v_c {below:.1e}, R(1.01 v_c)={above:.3}"));
    }

    let vs_mm = [0.9, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.4, 1.5, 1.7];
    let mut widths = vec![];
    for s in [0.0, 0.1, 1.0] {
        let rs: Vec<f64> = vs_mm
            .iter()
            .map(|&v| {
                let (k, spec) = tanh(v0, s, v);
                cache.run(&k, &spec).r
            })
            .collect();
        let centre = crossing(cache, v0, s, &vs_mm, &rs, 0.5);
        let hi = crossing(cache, v0, s, &vs_mm, &rs, 0.9);
        let lo = crossing(cache, v0, s, &vs_mm, &rs, 0.1);
        let width = match (hi, lo) {
            (Some(h), Some(l)) => l - h,
            _ => f64::NAN,
        };
        let off = centre.map_or(f64::INFINITY, |c| (c / v_c - 1.0).abs());
        pass &= off < 0.05;
        widths.push(width);
        parts.push(format!(
            "gpe sigma/xi={s}: centre {:.3} mm/s ({:+.1}% of v_c), 90-10 width {:.3} mm/s",
            centre.unwrap_or(f64::NAN) * 1e3,
            centre.map_or(f64::NAN, |c| (c / v_c - 1.0) * 100.0),
            width * 1e3
        ));
        if s == 0.0 {
            // smooth: intermediate values between full and no reflection
            let mid = rs.iter().filter(|r| **r > 0.1 && **r < 0.9).count();
            pass &= mid >= 2;
        }
    }
    pass &= widths[0] > widths[2] && widths[1] >= widths[2];
    parts.push(format!("v_c = {:.4} mm/s", v_c * 1e3));
    outcome(pass, parts.join("; "))
}

fn c5_soliton_integrity() -> Outcome {
    let t = Instant::now();
    let sp = Species::rb85();
    let d = derive_params(&sp, &TrapConfig::jila(), 1750.0, Some(NC_JILA)).unwrap();
    let g = Grid1D::uniform(-140e-6, 180e-6, 6401).unwrap();
    let mut f = init_sech_soliton(&g, &d, 1750.0, -60e-6).unwrap();
    f.kick(1e-3, sp.mass).unwrap();
    let o0 = f.measure(0.0);
    let mut st = Stepper::new(&f.grid, &PotentialStack::new(), sp.mass, d.g1d, 5e-6).unwrap();
    let tc = TimeConfig::new(5e-6, 100e-3, 20000).unwrap();
    let run = propagate(f, &mut st, &tc, 0.0, sp.mass, |_, _| Control::Continue).unwrap();
    let o = run.field.measure(0.0);
    let dn = ((o.norm - o0.norm) / o0.norm).abs();
    let dw = ((o.rms_x - o0.rms_x) / o0.rms_x).abs();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        dn <= 1e-8 && dw <= 0.01 && secs < 60.0,
        format!("100 ms at 1 mm/s: |dN/N| = {dn:.1e}, |dRMS/RMS| = {dw:.1e}, {secs:.1} s"),
    )
}

fn c6_ground_state_oracle() -> Outcome {
    let t = Instant::now();
    let sp = Species::rb85();
    let d = derive_params(&sp, &TrapConfig::jila(), 1750.0, Some(NC_JILA)).unwrap();
    let g = Grid1D::uniform(-150e-6, 150e-6, 6001).unwrap();
    let trial = init_gaussian_trial(
        &Grid::Line(g.clone()),
        GaussianWidths {
            sigma_x: 8e-6,
            sigma_r: 0.0,
        },
        1750.0,
        0.0,
    )
    .unwrap();
    let (gs, rep) = ground_state(
        trial,
        &PotentialStack::new(),
        sp.mass,
        d.g1d,
        1750.0,
        None,
        &GroundStateOptions::default(),
    )
    .unwrap();
    let exact = init_sech_soliton(&g, &d, 1750.0, 0.0).unwrap();
    let mut diff = WaveField::zeros(gs.grid.clone());
    diff.psi = gs.psi.iter().zip(&exact.psi).map(|(a, b)| Complex64::new(a.norm(), 0.0) - b).collect();
    let l2 = (diff.norm() / exact.norm()).sqrt();
    // peak density of N/(2ξ) sech²(x/ξ)
    let xi_fit = 1750.0 / (2.0 * gs.measure(0.0).peak_density);
    let xi_off = (xi_fit / 6.4e-6 - 1.0).abs();
    let monotone = rep.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs());
    outcome(
        rep.converged && l2 < 1e-3 && xi_off <= 0.01 && monotone,
        format!(
            "L2 = {l2:.1e}, xi = {:.3} um ({:+.2}% vs 6.4 um), energy monotone = {monotone}, {:.1} s",
            xi_fit * 1e6,
            (xi_fit / 6.4e-6 - 1.0) * 100.0,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn c7_surface_headline(cache: &mut Cache) -> Outcome {
    let rec = cache.run("A 0.1", &soliton_a().with_velocity(mm(0.1)));
    let ok = rec.settled
        && (rec.r - 0.48).abs() <= 0.05
        && (rec.absorbed - 0.5).abs() <= 0.10
        && rec.peak_amplification <= 1.5;
    outcome(
        ok,
        format!(
            "soliton A at 0.1 mm/s: R = {:.4}, lost = {:.3}, peak amplification = {:.3}",
            rec.r, rec.absorbed, rec.peak_amplification
        ),
    )
}

fn c8_nodes(cache: &mut Cache) -> Outcome {
    let slow = cache.run("A 0.1", &soliton_a().with_velocity(mm(0.1)));
    let fast = cache.run("A 0.4", &soliton_a().with_velocity(mm(0.4)));
    outcome(
        fast.max_nodes >= 1 && slow.max_nodes == 0,
        format!("nodes at 0.4 mm/s: {}, at 0.1 mm/s: {}", fast.max_nodes, slow.max_nodes),
    )
}

fn c9_a_vs_b(cache: &mut Cache) -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for v in [0.25, 0.4, 0.64, 0.9, 1.3] {
        let a = cache.run(&format!("A {v}"), &soliton_a().with_velocity(mm(v)));
        let b = cache.run(&format!("B {v}"), &soliton_b().with_velocity(mm(v)));
        let d = (a.r - b.r).abs();
        pass &= a.settled && b.settled && d <= 0.05;
        parts.push(format!("{v}: {:.3}/{:.3}", a.r, b.r));
    }
    let spec = soliton_b().with_velocity(mm(0.64));
    let b = cache.run("B 0.64", &spec);
    let expect = spec.trap.omega_x() * spec.plane().unwrap();
    let off = b.arrival_speed / expect - 1.0;
    pass &= off.abs() <= 0.05;
    outcome(
        pass,
        format!(
            "R_A/R_B by v (mm/s): {}; B arrival {:.4} mm/s vs omega_x dx = {:.4} mm/s ({:+.1}%)",
            parts.join(", "),
            b.arrival_speed * 1e3,
            expect * 1e3,
            off * 100.0
        ),
    )
}

fn c10_repulsive(cache: &mut Cache) -> Outcome {
    let vs = [0.1, 0.2, 0.5, 1.0, 2.0, 3.0];
    let mut rs = vec![];
    let mut pws = vec![];
    for v in vs {
        let spec = na_repulsive().with_velocity(mm(v));
        let rec = cache.run(&format!("Na {v}"), &spec);
        rs.push(rec.r);
        pws.push(planewave_reference(&spec, spec.v).unwrap());
    }
    let low_ok = rs[..2].iter().all(|r| (r - 0.45).abs() <= 0.05);
    let below_pw = rs[0] < pws[0] - 0.2;
    let pairs: Vec<String> = vs.iter().zip(&rs).map(|(v, r)| format!("{v}:{r:.3}")).collect();
    outcome(
        low_ok && below_pw,
        format!(
            "R by v (mm/s): {}; plane wave at 0.1 mm/s = {:.3}",
            pairs.join(", "),
            pws[0]
        ),
    )
}

fn c11_low_energy_law() -> Outcome {
    let sp = Species::rb85();
    let beta4 = low_energy_beta4(&sp).unwrap();
    let stack = PotentialStack::new().with(PotentialTerm::CasimirPolder(CasimirPolderSurface::silicon(&sp, 0.0)));
    let setup = PlaneWaveSetup::for_stack(stack, -3e-3, 0.0);
    let mut worst = (0.0, 0.0);
    for bk in [0.002, 0.005, 0.01, 0.02, 0.035, 0.049] {
        let k = bk / beta4;
        let v = HBAR * k / sp.mass;
        let r = setup.reflection(v, &sp).unwrap().r;
        let law = low_energy_asymptote(k, beta4);
        let rel = ((r - law) / law).abs();
        if rel > worst.0 {
            worst = (rel, bk);
        }
    }
    outcome(
        worst.0 <= 0.05,
        format!(
            "max relative deviation from 1 - 2 beta4 k = {:.2}% at beta4 k = {}",
            worst.0 * 100.0,
            worst.1
        ),
    )
}

fn c12_determinism(cache: &mut Cache) -> Outcome {
    let spec = tanh_step(-1e-31, 0.0).with_velocity(mm(0.2));
    let a = run_scenario(&spec).unwrap();
    let b = run_scenario(&spec).unwrap();
    let csv = |r: &RunRecord| {
        let mut out = Vec::new();
        write_observables_csv(&r.records, &mut out).unwrap();
        out
    };
    let identical = csv(&a) == csv(&b) && a.r.to_bits() == b.r.to_bits();
    let mut half = spec.clone();
    half.dt /= 2.0;
    let h = cache.run("tanh half-dt 0.2", &half);
    let d = (a.r - h.r).abs();
    outcome(
        identical && d < 1e-3,
        format!(
            "repeat runs byte-identical = {identical}; R(dt) = {:.5} ({} steps), R(dt/2) = {:.5} ({} steps), |dR| = {d:.1e}",
            a.r, a.steps, h.r, h.steps
        ),
    )
}

fn main() {
    let mut cache = Cache::default();
    let t0 = Instant::now();
    let mut results: Vec<(u32, Outcome)> = vec![];
    let mut record = |n: u32, o: Outcome| {
        println!("criterion {n:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };
    record(1, c1_hard_step_oracle());
    record(5, c5_soliton_integrity());
    record(6, c6_ground_state_oracle());
    record(11, c11_low_energy_law());
    record(2, c2_negative_step_anchors(&mut cache));
    record(3, c3_planewave_agreement(&mut cache));
    record(4, c4_positive_step(&mut cache));
    record(12, c12_determinism(&mut cache));
    record(7, c7_surface_headline(&mut cache));
    record(8, c8_nodes(&mut cache));
    record(9, c9_a_vs_b(&mut cache));
    record(10, c10_repulsive(&mut cache));

    results.sort_by_key(|(n, _)| *n);
    println!();
    println!("acceptance summary ({:.0} s):", t0.elapsed().as_secs_f64());
    for (n, o) in &results {
        println!("criterion {n:>2}: {}", if o.pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
