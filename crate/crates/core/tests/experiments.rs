use qreflect::experiments::*;
use qreflect::params::{classical_critical_speed, Species};

#[test]
fn free_soliton_is_fully_transmitted() {
    let mut s = tanh_step(-1e-31, 0.0).with_velocity(1e-3);
    s.scatterer = Scatterer::None;
    let rec = run_scenario(&s).unwrap();
    assert!(rec.settled);
    // the settling threshold leaves the tail still crossing x_b uncounted
    assert!(rec.r < 5e-3, "R = {}", rec.r);
    assert!((rec.r + rec.transmitted + rec.absorbed - 1.0).abs() < 1e-6);
}

#[test]
fn slow_soliton_bounces_off_positive_step() {
    let v_c = classical_critical_speed(1e-31, &Species::rb85()).unwrap();
    let s = tanh_step(1e-31, 0.0).with_velocity(0.5 * v_c);
    let rec = run_scenario(&s).unwrap();
    assert!(rec.settled);
    assert!(rec.r >= 0.99, "R = {}", rec.r);
    assert_eq!(rec.absorbed, 0.0);
}

#[test]
fn surface_run_bookkeeping() {
    let s = soliton_a().with_velocity(0.9e-3).coarsened(2.0);
    let rec = run_scenario(&s).unwrap();
    assert!(rec.settled);
    assert!(rec.absorbed > 0.5);
    assert!((0.0..=1.0).contains(&rec.r));
    assert!((rec.r + rec.transmitted + rec.absorbed - 1.0).abs() < 1e-6);
    let t_ca = rec.closest_approach.unwrap();
    assert!(rec.settled_at.unwrap() > t_ca);
}

#[test]
fn trap_launch_arrives_at_omega_dx() {
    let s = soliton_b().with_velocity(0.64e-3).coarsened(2.0);
    let dx = s.plane().unwrap();
    assert!((dx - 15e-6).abs() < 0.1e-6);
    let rec = run_scenario(&s).unwrap();
    let expect = s.trap.omega_x() * dx;
    assert!(
        (rec.arrival_speed / expect - 1.0).abs() < 0.05,
        "arrival {:e} vs {expect:e}",
        rec.arrival_speed
    );
}

#[test]
fn sodium_cloud_normalised_to_peak_density() {
    let s = na_repulsive().with_velocity(1e-3);
    let cloud = prepare_initial(&s).unwrap();
    let peak = cloud.field.measure(0.0).peak_density;
    assert!((peak / 2.2e18 - 1.0).abs() < 0.01, "peak {peak:e}");
    assert!(cloud.ground_state.unwrap().converged);
}

#[test]
fn scan_rows_ordered_and_worker_independent() {
    let s = tanh_step(-1e-31, 1.0);
    let vs = [3e-3, 2e-3];
    let one = scan_velocity(&s, &vs, 1).unwrap();
    let two = scan_velocity(&s, &vs, 2).unwrap();
    let v: Vec<f64> = one.rows.iter().map(|r| r.v).collect();
    assert_eq!(v, vec![2e-3, 3e-3]);
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_scan_csv(&one, &mut a).unwrap();
    write_scan_csv(&two, &mut b).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("v_mps,R_gpe,R_planewave\n"));
}

#[test]
fn per_run_failures_are_collected() {
    let fam = vec![
        (Some("ok".to_string()), tanh_step(-1e-31, 1.0)),
        (Some("bad".to_string()), {
            let mut s = tanh_step(-1e-31, 1.0);
            s.n_atoms = 5000.0; // above the collapse threshold
            s
        }),
    ];
    let scan = scan_families(&fam, &[3e-3], 1).unwrap();
    assert_eq!(scan.rows.len(), 2);
    assert!(scan.family("ok").all(|r| r.error.is_none() && r.settled));
    let bad: Vec<_> = scan.family("bad").collect();
    assert!(bad[0].error.is_some() || bad[0].settled);
}
