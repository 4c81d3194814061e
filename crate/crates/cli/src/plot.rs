use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::CliError;
use crate::PlotArgs;

/// Rows of a scan dataset grouped by family, in file order.
#[derive(Debug, Default, PartialEq)]
pub struct Dataset {
    pub families: Vec<String>,
    pub rows: BTreeMap<String, Vec<(f64, f64, f64)>>,
}

pub fn read_scan(text: &str) -> Result<Dataset, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CliError::Config("schema: scan.csv is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::Config(format!("schema: scan.csv lacks column '{name}'")))
    };
    let (iv, ig, ip) = (find("v_mps")?, find("R_gpe")?, find("R_planewave")?);
    let ifam = cols.iter().position(|c| *c == "family");
    let mut ds = Dataset::default();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(CliError::Config(format!("schema: scan.csv row {} has {} fields", n + 2, f.len())));
        }
        let num = |i: usize| {
            f[i].parse::<f64>()
                .map_err(|_| CliError::Config(format!("schema: scan.csv row {}: '{}' is not a number", n + 2, f[i])))
        };
        let fam = ifam.map_or_else(String::new, |i| f[i].to_string());
        if !ds.rows.contains_key(&fam) {
            ds.families.push(fam.clone());
        }
        ds.rows.entry(fam).or_default().push((num(iv)?, num(ig)?, num(ip)?));
    }
    if ds.families.is_empty() {
        return Err(CliError::Config("schema: scan.csv has no data rows".into()));
    }
    Ok(ds)
}

/// Classical threshold speed recorded in a resolved config, if the
/// scatterer is a positive step.
fn critical_speed(dir: &Path) -> Option<f64> {
    let text = fs::read_to_string(dir.join("resolved_config.toml")).ok()?;
    let v: toml::Table = toml::from_str(&text).ok()?;
    let fam = v.get("family")?.as_array()?.first()?;
    let sc = fam.get("scenario")?;
    let scat = sc.get("scatterer")?;
    if scat.get("type")?.as_str()? != "tanh" {
        return None;
    }
    let v0 = scat.get("v0")?.as_float()?;
    let mass = sc.get("species")?.get("mass")?.as_float()?;
    (v0 > 0.0).then(|| (2.0 * v0 / mass).sqrt())
}

/// Gnuplot script: points for the GPE column, lines for the plane-wave
/// column, one pair per family.
pub fn script(ds: &Dataset, v_c: Option<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set xlabel 'v (mm/s)'");
    let _ = writeln!(s, "set ylabel 'R'");
    let _ = writeln!(s, "set yrange [0:1.05]");
    let _ = writeln!(s, "set key top right");
    if let Some(vc) = v_c {
        let _ = writeln!(s, "set arrow from {0},0 to {0},1.05 nohead dashtype 3", vc * 1e3);
        let _ = writeln!(s, "set label 'v_c' at {},1.0", vc * 1e3);
    }
    for (k, fam) in ds.families.iter().enumerate() {
        let _ = writeln!(s, "$data{k} << EOD");
        for (v, g, p) in &ds.rows[fam] {
            let _ = writeln!(s, "{:e},{:e},{:e}", v * 1e3, g, p);
        }
        let _ = writeln!(s, "EOD");
    }
    let mut parts = vec![];
    for (k, fam) in ds.families.iter().enumerate() {
        let label = if fam.is_empty() { String::new() } else { format!(" {fam}") };
        parts.push(format!(
            "$data{k} using 1:2 with points pt {} lc {} title 'GPE{label}'",
            k + 5,
            k + 1
        ));
        parts.push(format!(
            "$data{k} using 1:3 with lines lc {} title 'plane wave{label}'",
            k + 1
        ));
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

pub fn plot(a: &PlotArgs) -> Result<(), CliError> {
    let csv = a.dataset.join("scan.csv");
    let text = fs::read_to_string(&csv)
        .map_err(|e| CliError::Config(format!("dataset {}: {e}", csv.display())))?;
    let ds = read_scan(&text)?;
    let out = a.out.clone().unwrap_or_else(|| a.dataset.join("plot.gp"));
    fs::write(&out, script(&ds, critical_speed(&a.dataset)))?;
    println!("wrote {}", out.display());
    println!("render with: gnuplot -p {}", out.display());
    Ok(())
}
