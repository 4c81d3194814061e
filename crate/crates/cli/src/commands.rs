use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qreflect::experiments::{
    prepare_initial, scan_families, write_observables_csv, write_scan_csv, Preset,
    RunRecord, ScanResult,
};
use qreflect::field::{write_density_csv, write_snapshot};
use qreflect::params::{classical_critical_speed, derive_params, Species};
use qreflect::planewave::{write_planewave_csv, PlaneWaveSetup};
use qreflect::potentials::{CasimirPolderSurface, PotentialStack, PotentialTerm, TanhStep};

use crate::config::{write_resolved, Overrides, RunConfig};
use crate::error::CliError;
use crate::{ParamsArgs, PlaneWaveArgs, RunArgs};

fn load(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run_config(a: &RunArgs) -> Result<RunConfig, CliError> {
    let mut c = load(&a.config)?;
    if a.preset.is_some() {
        c.preset = a.preset.clone();
        c.scenario = None;
    }
    if a.family.is_some() {
        c.family = a.family.clone();
    }
    if a.out.is_some() {
        c.out = a.out.clone();
    }
    if a.workers.is_some() {
        c.workers = a.workers;
    }
    if a.velocities.is_some() {
        c.velocities = a.velocities.clone();
    }
    c.overrides.merge(&Overrides {
        v: a.v,
        dt: a.dt,
        t_end: a.t_end,
        dx_max: a.dx_max,
        kh: a.kh,
        n_r: a.n_r,
        atoms: a.atoms,
        coarse: a.coarse,
    });
    Ok(c)
}

fn out_dir(c: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = c.out_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn single(p: &Preset) -> Result<&qreflect::experiments::ScenarioSpec, CliError> {
    match p.families.as_slice() {
        [(_, s)] => Ok(s),
        many => Err(CliError::Config(format!(
            "preset '{}' has {} families; pick one with --family ({})",
            p.name,
            many.len(),
            many.iter()
                .filter_map(|(l, _)| l.as_deref())
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn params(a: &ParamsArgs) -> Result<(), CliError> {
    let mut c = load(&a.config)?;
    if a.preset.is_some() {
        c.parameters.preset = a.preset.clone();
    }
    let mut set = c.parameter_set()?;
    if let Some(w) = a.omega_r {
        set.trap.omega_r = w;
    }
    if let Some(l) = a.lambda {
        set.trap.lambda_ratio = l;
    }
    if a.n_c.is_some() {
        set.n_c = a.n_c;
    }
    let atoms = a.atoms.or(c.parameters.atoms).unwrap_or(1750.0);
    if !(atoms > 0.0) {
        return Err(CliError::Config(format!("--atoms must be positive, got {atoms}")));
    }
    set.trap.validate().map_err(CliError::engine("params"))?;
    let d = derive_params(&set.species, &set.trap, atoms, set.n_c).map_err(CliError::engine("params"))?;

    let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| format!("{v:e}"));
    let rows: Vec<(&str, String, &str)> = vec![
        ("species", set.species.name.clone(), ""),
        ("mass", format!("{:e}", set.species.mass), "kg"),
        ("a_s", format!("{:e}", set.species.a_s), "m"),
        ("lambda_a", format!("{:e}", set.species.lambda_a), "m"),
        ("c4", format!("{:e}", set.species.c4), "J m^4"),
        ("omega_r", format!("{:e}", set.trap.omega_r), "rad/s"),
        ("omega_x", format!("{:e}", set.trap.omega_x()), "rad/s"),
        ("n_atoms", format!("{:e}", atoms), ""),
        ("n_c", opt(set.n_c), ""),
        ("g", format!("{:e}", d.g), "J m^3"),
        ("g1d", format!("{:e}", d.g1d), "J m"),
        ("l_r", format!("{:e}", d.l_r), "m"),
        ("xi", opt(d.xi), "m"),
        ("mu", opt(d.mu), "J"),
        ("beta4", opt(d.beta4), "m"),
    ];
    let mut csv = String::from("quantity,value,unit\n");
    for (k, v, u) in &rows {
        csv.push_str(&format!("{k},{v},{u}\n"));
    }
    if a.csv {
        print!("{csv}");
    } else {
        for (k, v, u) in &rows {
            println!("{k:<10} {v:>24} {u}");
        }
        if let Some(xi) = d.xi {
            println!("soliton width xi = {:.3} um", xi * 1e6);
        }
    }
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("params.csv"), csv)?;
    }
    Ok(())
}

pub fn groundstate(a: &RunArgs) -> Result<(), CliError> {
    let c = run_config(a)?;
    let p = c.resolve()?;
    let spec = single(&p)?;
    let dir = out_dir(&c)?;
    write_resolved(&dir, &p)?;
    let cloud = prepare_initial(spec).map_err(CliError::engine("groundstate"))?;
    write_density_csv(&cloud.field, create(&dir.join("groundstate.csv"))?)?;
    write_snapshot(&cloud.field, create(&dir.join("groundstate.bin"))?)?;
    let o = cloud.field.measure(spec.x_b()?);
    println!("norm            {:e}", o.norm);
    println!("peak_density    {:e}", o.peak_density);
    println!("rms_x_m         {:e}", o.rms_x);
    if let Some(rep) = &cloud.ground_state {
        println!("iterations      {}", rep.iterations);
        println!("energy_J        {:e}", rep.energy);
        println!("mu_J            {:e}", rep.mu);
        println!("residual        {:e}", rep.residual);
        println!("converged       {}", rep.converged);
        let mut w = create(&dir.join("energy_history.csv"))?;
        writeln!(w, "iteration,energy_J")?;
        for (k, e) in rep.energy_history.iter().enumerate() {
            writeln!(w, "{k},{e:e}")?;
        }
        if !rep.converged {
            return Err(CliError::Unsettled(format!(
                "ground state did not converge in {} iterations (residual {:e})",
                rep.iterations, rep.residual
            )));
        }
    }
    Ok(())
}

fn write_reflection(rec: &RunRecord, path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "v_mps,R,transmitted,absorbed,t_closest_s,t_settled_s,settled,nodes,peak_amplification,arrival_speed_mps")?;
    writeln!(
        w,
        "{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
        rec.v,
        rec.r,
        rec.transmitted,
        rec.absorbed,
        rec.closest_approach.unwrap_or(f64::NAN),
        rec.settled_at.unwrap_or(f64::NAN),
        rec.settled,
        rec.max_nodes,
        rec.peak_amplification,
        rec.arrival_speed
    )?;
    Ok(())
}

pub fn simulate(a: &RunArgs) -> Result<(), CliError> {
    let c = run_config(a)?;
    let p = c.resolve()?;
    let spec = single(&p)?.clone();
    let dir = out_dir(&c)?;
    write_resolved(&dir, &p)?;
    let cloud = prepare_initial(&spec).map_err(CliError::engine("simulate"))?;
    let rec = qreflect::experiments::run_from(&spec, cloud.clone());
    let rec = match rec {
        Ok(r) => r,
        Err(e) => {
            fs::write(
                dir.join("status.txt"),
                format!("status = failed\nerror = {e}\ntimestamp = {}\n", timestamp()),
            )?;
            return Err(CliError::engine("simulate")(e));
        }
    };
    write_observables_csv(&rec.records, create(&dir.join("observables.csv"))?)?;
    write_reflection(&rec, &dir.join("reflection.csv"))?;
    if a.snapshot {
        write_density_csv(&cloud.field, create(&dir.join("initial_density.csv"))?)?;
        write_snapshot(&cloud.field, create(&dir.join("initial.bin"))?)?;
        if let Some(f) = &rec.final_state {
            write_density_csv(f, create(&dir.join("final_density.csv"))?)?;
            write_snapshot(f, create(&dir.join("final.bin"))?)?;
        }
    }
    let status = if rec.settled { "ok" } else { "unsettled" };
    fs::write(
        dir.join("status.txt"),
        format!(
            "status = {status}\nv_mps = {:e}\nR = {:e}\nsettled = {}\ntimestamp = {}\n",
            rec.v,
            rec.r,
            rec.settled,
            timestamp()
        ),
    )?;
    println!("R = {:.4} (transmitted {:.4}, absorbed {:.4})", rec.r, rec.transmitted, rec.absorbed);
    if !rec.settled {
        return Err(CliError::Unsettled(format!(
            "run did not settle before t_end; partial R = {:.4} flagged in status.txt",
            rec.r
        )));
    }
    Ok(())
}

fn write_scan_outputs(dir: &Path, scan: &ScanResult) -> Result<(), CliError> {
    write_scan_csv(scan, create(&dir.join("scan.csv"))?)?;
    let runs = dir.join("runs");
    fs::create_dir_all(&runs)?;
    let mut status = String::new();
    let overall = if scan.rows.iter().any(|r| r.error.is_some()) {
        "failed"
    } else if scan.all_settled() {
        "ok"
    } else {
        "unsettled"
    };
    status.push_str(&format!("status = {overall}\ntimestamp = {}\n", timestamp()));
    for (k, row) in scan.rows.iter().enumerate() {
        let run_dir = runs.join(format!("{k:03}"));
        fs::create_dir_all(&run_dir)?;
        if let Some(rec) = &row.record {
            write_observables_csv(&rec.records, create(&run_dir.join("observables.csv"))?)?;
            write_reflection(rec, &run_dir.join("reflection.csv"))?;
        }
        status.push_str(&format!(
            "run {k:03} family={} v_mps={:e} settled={} error={}\n",
            row.family.as_deref().unwrap_or("-"),
            row.v,
            row.settled,
            row.error.as_deref().unwrap_or("-")
        ));
    }
    fs::write(dir.join("status.txt"), status)?;
    Ok(())
}

pub fn scan(a: &RunArgs) -> Result<(), CliError> {
    let c = run_config(a)?;
    let p = c.resolve()?;
    let dir = out_dir(&c)?;
    write_resolved(&dir, &p)?;
    let workers = c.workers.unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let scan = scan_families(&p.families, &p.velocities, workers).map_err(CliError::engine("scan"))?;
    write_scan_outputs(&dir, &scan)?;
    for r in &scan.rows {
        println!(
            "{:<14} v = {:e} m/s  R_gpe = {:.4}  R_planewave = {:.4}{}",
            r.family.as_deref().unwrap_or(&p.name),
            r.v,
            r.r_gpe,
            r.r_planewave,
            if r.settled { "" } else { "  (unsettled)" }
        );
    }
    if scan.rows.iter().any(|r| r.numerical_failure) {
        return Err(CliError::Engine {
            module: "scan",
            source: qreflect::Error::NumericalBlowup {
                step: 0,
                detail: "one or more runs blew up; see status.txt".into(),
            },
        });
    }
    if let Some(r) = scan.rows.iter().find(|r| r.error.is_some()) {
        return Err(CliError::Config(format!(
            "run at v = {:e} m/s failed: {}",
            r.v,
            r.error.as_deref().unwrap_or("")
        )));
    }
    if !scan.all_settled() {
        return Err(CliError::Unsettled("some runs did not settle; see status.txt".into()));
    }
    Ok(())
}

pub fn planewave(a: &PlaneWaveArgs) -> Result<(), CliError> {
    let mut c = load(&a.config)?;
    if a.preset.is_some() {
        c.parameters.preset = a.preset.clone();
    }
    let set = c.parameter_set()?;
    let species: Species = set.species.clone();
    let mut stack = PotentialStack::new();
    let (x_min, x_max) = if a.surface {
        stack.push(PotentialTerm::CasimirPolder(CasimirPolderSurface::silicon(&species, 0.0)));
        (-3e-3, 0.0)
    } else {
        let v0 = a
            .step
            .ok_or_else(|| CliError::Usage("planewave needs --step <V0> or --surface".into()))?;
        let sigma = match (a.sigma, a.sigma_xi) {
            (Some(s), _) => s,
            (None, Some(f)) => {
                let atoms = a.atoms.or(c.parameters.atoms).unwrap_or(1750.0);
                let d = derive_params(&species, &set.trap, atoms, set.n_c).map_err(CliError::engine("params"))?;
                let xi = d
                    .xi
                    .ok_or_else(|| CliError::Config("soliton width undefined for this species".into()))?;
                f * xi
            }
            (None, None) => 0.0,
        };
        let step = TanhStep::new(v0, sigma, 0.0).map_err(CliError::engine("potentials"))?;
        stack.push(PotentialTerm::Tanh(step));
        let span = (400.0 * sigma).max(50e-6);
        (-span, span)
    };
    let setup = PlaneWaveSetup::for_stack(stack, x_min, x_max);
    let velocities: Vec<f64> = match (a.v, a.v_min, a.v_max) {
        (Some(v), _, _) => vec![v],
        (None, Some(lo), Some(hi)) if lo > 0.0 && hi > lo && a.points >= 2 => (0..a.points)
            .map(|k| lo * (hi / lo).powf(k as f64 / (a.points - 1) as f64))
            .collect(),
        _ => return Err(CliError::Usage("give --v, or --v-min and --v-max with --points >= 2".into())),
    };
    let rows = setup.scan(&velocities, &species).map_err(CliError::engine("planewave"))?;
    if rows.len() == 1 {
        println!("R = {:e}", rows[0].result.r);
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        write_planewave_csv(&rows, create(&dir.join("planewave.csv"))?)?;
    } else if rows.len() > 1 {
        write_planewave_csv(&rows, std::io::stdout().lock())?;
    }
    if let (Some(v0), false) = (a.step, a.surface) {
        if v0 > 0.0 {
            let vc = classical_critical_speed(v0, &species).map_err(CliError::engine("params"))?;
            eprintln!("classical critical speed v_c = {vc:e} m/s");
        }
    }
    Ok(())
}
