use std::f64::consts::PI;

use synthlat::lattice::LatticeSpec;
use synthlat::presets;
use synthlat::scattering::{s_eigenmodes, scattering_sweep};
use synthlat::Error;

#[test]
fn presets_survive_a_json_file() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [presets::full_lattice(), presets::pairwise_lattice(), presets::strong_coupling_plaquette(1.0)] {
        let path = dir.path().join("lattice.json");
        std::fs::write(&path, spec.to_json_string().unwrap()).unwrap();
        assert_eq!(LatticeSpec::from_json_file(&path).unwrap(), spec);
    }
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let text = presets::full_lattice().to_json_string().unwrap();
    let extra = text.replacen("\"eta\"", "\"colour\": 1, \"eta\"", 1);
    assert!(matches!(LatticeSpec::from_json_str(&extra), Err(Error::Json(_))));
    let bad_eta = text.replacen("\"eta\": 0.68", "\"eta\": 1.68", 1);
    assert!(LatticeSpec::from_json_str(&bad_eta).is_err());
}

#[test]
fn device_sweep_and_eigenmodes() {
    let spec = presets::full_lattice();
    let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
    let sweep = scattering_sweep(&spec, &grid, &[0.0, PI], 0.0).unwrap();
    assert_eq!(sweep.points.len(), 2 * grid.len());
    let mut csv = Vec::new();
    sweep.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 16 * 2 * grid.len());
    for p in &sweep.points {
        let modes = s_eigenmodes(&p.s).unwrap();
        // passive device: no eigenvalue outside the unit circle
        assert!(modes.values.iter().all(|v| v.norm() <= 1.0 + 1e-9));
    }
}
