//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! when any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use synthlat::creutz::{
    band_structure, brillouin_grid, check_symmetry, evolve_state, ladder_hamiltonian, plaquette_hamiltonian,
    plaquette_spectrum, position_expectation, position_time_average, wannier_center, zak_phase, Band,
    Boundary, CreutzParams, PlaquetteNode, PlaquetteState, SymmetryKind, POSITION_PERIOD,
};
use synthlat::fit::{estimate_scale_factors, fit_global, FitParams, LmOptions};
use synthlat::lattice::{beta_from_g, build_coupling_matrix};
use synthlat::presets;
use synthlat::scattering::{analytic_plaquette_s, reciprocity_defect, s_eigenmodes, scattering_at, scattering_sweep};
use synthlat::traces::synthesize_traces;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut multiplicity_ok = true;
    for beta in [0.1, 0.5, 1.0, 2.0] {
        let spec = presets::strong_coupling_plaquette(beta);
        let probes = spec.probe_frequencies(0.0).expect("frame");
        let m = build_coupling_matrix(&spec, &probes, 0.0, 0.0).expect("matrix");
        let s = scattering_at(&m, &spec.etas()).expect("scattering");
        let exact = analytic_plaquette_s(beta);
        worst = worst.max((&s.entries - &exact.entries).iter().map(|z| z.norm()).fold(0.0, f64::max));
        let modes = s_eigenmodes(&s).expect("eigenmodes");
        let unit = modes
            .values
            .iter()
            .filter(|v| (*v - Complex64::new(1.0, 0.0)).norm() <= 1e-10)
            .count();
        multiplicity_ok &= unit == 2;
    }
    outcome(
        worst <= 1e-10 && multiplicity_ok,
        format!("max elementwise error {worst:.2e}, unit eigenvalue twice: {multiplicity_ok}"),
    )
}

fn criterion_2() -> Outcome {
    let bands = band_structure(&CreutzParams::strong_coupling(), &brillouin_grid(1001)).expect("bands");
    let worst = bands
        .iter()
        .map(|[lo, hi]| (lo + 2.0).abs().max((hi - 2.0).abs()))
        .fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("max |E -/+ 2| = {worst:.2e} over 1001 k"))
}

fn criterion_3() -> Outcome {
    let grid = brillouin_grid(1000);
    let sc = CreutzParams::strong_coupling();
    let worst = SymmetryKind::ALL
        .iter()
        .map(|&k| check_symmetry(&sc, k, &grid).expect("symmetry"))
        .fold(0.0, f64::max);
    let no_flux = CreutzParams::new(1.0, 0.0, 1.0, 0.0).expect("params");
    let broken = check_symmetry(&no_flux, SymmetryKind::ChargeConjugation, &grid).expect("symmetry");
    outcome(
        worst <= 1e-12 && broken > 0.1,
        format!("max violation at flux pi {worst:.2e}; particle-hole violation at zero flux {broken:.3}"),
    )
}

fn criterion_4() -> Outcome {
    let chi = PlaquetteState::chi();
    let worst = (0..=2000)
        .map(|i| {
            let t = FRAC_PI_2 * i as f64 / 2000.0;
            (position_expectation(&evolve_state(&chi, t)) - (3.0 - (4.0 * t).cos()) / 2.0).abs()
        })
        .fold(0.0, f64::max);
    let avg_chi = position_time_average(&chi, POSITION_PERIOD);
    let avg_a1 = position_time_average(&PlaquetteState::site(PlaquetteNode::A1), POSITION_PERIOD);
    outcome(
        worst <= 1e-9 && (avg_chi - 1.5).abs() <= 1e-6 && (avg_a1 - 1.25).abs() <= 1e-6,
        format!("pointwise error {worst:.2e}; averages {avg_chi:.9} and {avg_a1:.9}"),
    )
}

fn criterion_5() -> Outcome {
    let h = plaquette_hamiltonian();
    let residual = [PlaquetteState::zero_mode_left(), PlaquetteState::zero_mode_right()]
        .iter()
        .map(|s| (h * s.amplitudes()).norm())
        .fold(0.0, f64::max);
    let spectrum = plaquette_spectrum();
    let spec_err = spectrum
        .iter()
        .zip([-2.0, 0.0, 0.0, 2.0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        residual <= 1e-12 && spec_err <= 1e-12,
        format!("zero-mode residual {residual:.2e}; spectrum error {spec_err:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let cells = 10;
    let centers_exact = (1..cells).all(|n| wannier_center(cells, n).expect("center") == n as f64 + 0.5);
    let zak = zak_phase(&CreutzParams::strong_coupling(), Band::Lower, 1000).expect("zak");
    let consistent = ((zak / (2.0 * PI)) - 0.5).abs() <= 1e-6;
    outcome(
        centers_exact && (zak - PI).abs() <= 1e-6 && consistent,
        format!("centers at n + 1/2: {centers_exact}; lower-band Zak phase {zak:.9}"),
    )
}

fn criterion_7() -> Outcome {
    let spec = presets::full_lattice();
    let truth = FitParams::from_spec(&spec, 0.4)
        .with_scale(presets::SCALE_FACTORS.iter().map(|r| r.to_vec()).collect())
        .expect("truth");
    let grid: Vec<f64> = (0..401).map(|i| -12.0 + 24.0 * i as f64 / 400.0).collect();
    let phases = [0.0, FRAC_PI_4, FRAC_PI_2, PI];
    let ts = match synthesize_traces(&spec, &truth, &grid, &phases, 0.02, 2024) {
        Ok(ts) => ts,
        Err(e) => return outcome(false, format!("synthesis failed: {e}")),
    };
    let mut init = FitParams::from_spec(&presets::pairwise_lattice(), 0.0);
    init.scale = estimate_scale_factors(&spec, &ts, &init).expect("scale estimate");
    let fit = match fit_global(&spec, &ts, &init, &LmOptions::default()) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("fit failed: {e}")),
    };
    let p = fit.result().params();
    let d = spec.dim();
    let nu_err = (0..d).map(|i| (p.nu[i] - truth.nu[i]).abs() * 1e6).fold(0.0, f64::max);
    let kappa_err = (0..d).map(|i| (p.kappa[i] / truth.kappa[i] - 1.0).abs()).fold(0.0, f64::max);
    let eta_err = (0..d).map(|i| (p.eta[i] - truth.eta[i]).abs()).fold(0.0, f64::max);
    let beta_err = (0..truth.beta.len())
        .map(|i| (p.beta[i] / truth.beta[i] - 1.0).abs())
        .fold(0.0, f64::max);
    let phi_err = (p.phi_off - truth.phi_off).abs();
    let mut c_err = 0.0f64;
    for n in 0..d {
        for m in 0..d {
            c_err = c_err.max((p.scale[n][m] / truth.scale[n][m] - 1.0).abs());
        }
    }
    let pass = fit.stage2.parameters.len() == 29
        && nu_err <= 10.0
        && kappa_err <= 0.02
        && beta_err <= 0.01
        && eta_err <= 0.02
        && phi_err <= 0.01
        && c_err <= 0.05;
    outcome(
        pass,
        format!(
            "nu {nu_err:.2} kHz, kappa {:.3}%, beta {:.3}%, eta {eta_err:.4}, phi_off {phi_err:.2e} rad, C {:.3}%",
            kappa_err * 100.0,
            beta_err * 100.0,
            c_err * 100.0
        ),
    )
}

fn criterion_8() -> Outcome {
    let spec = presets::full_lattice();
    let grid: Vec<f64> = (0..=600).map(|i| -15.0 + 0.05 * i as f64).collect();
    let sweep = scattering_sweep(&spec, &grid, &[FRAC_PI_2, 0.0], 0.0).expect("sweep");
    let b = spec.mode_index("b").expect("b");
    let c = spec.mode_index("c").expect("c");
    let asym = sweep
        .slice(0)
        .iter()
        .map(|p| (p.s.get(b, c).norm() - p.s.get(c, b).norm()).abs())
        .fold(0.0, f64::max);
    let defect = sweep.slice(1).iter().map(|p| reciprocity_defect(&p.s)).fold(0.0, f64::max);
    outcome(
        asym > 0.01 && defect <= 1e-10,
        format!("max ||S_bc| - |S_cb|| at pi/2 = {asym:.4}; reciprocity defect at 0 = {defect:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let k = presets::FULL_KAPPA_MHZ;
    let idx = |l: &str| presets::LABELS.iter().position(|&x| x == l).expect("label");
    let worst = presets::LINKS
        .iter()
        .enumerate()
        .map(|(i, &(n, m))| {
            let beta = beta_from_g(presets::FULL_G_MHZ[i], k[idx(n)], k[idx(m)]).expect("beta");
            (beta - presets::FULL_BETA[i]).abs()
        })
        .fold(0.0, f64::max);
    outcome(worst <= 2e-4, format!("max |beta - table| = {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = CreutzParams::new(
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(-PI..PI),
        )
        .expect("params");
        for cells in [4usize, 8, 16] {
            let h: DMatrix<Complex64> = ladder_hamiltonian(&p, cells, Boundary::Periodic);
            let mut exact: Vec<f64> = DVector::from(h.symmetric_eigen().eigenvalues).iter().copied().collect();
            exact.sort_by(f64::total_cmp);
            let mut bloch: Vec<f64> = band_structure(&p, &brillouin_grid(cells))
                .expect("bands")
                .into_iter()
                .flatten()
                .collect();
            bloch.sort_by(f64::total_cmp);
            worst = exact.iter().zip(&bloch).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        }
    }
    outcome(worst <= 1e-10, format!("max eigenvalue mismatch {worst:.2e} over 20 draws, N = 4, 8, 16"))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("analytic plaquette scattering", criterion_1, Duration::from_secs(1)),
        ("flat bands", criterion_2, Duration::from_secs(1)),
        ("symmetry class", criterion_3, Duration::from_secs(1)),
        ("polarization dynamics", criterion_4, Duration::from_secs(1)),
        ("zero modes", criterion_5, Duration::from_secs(1)),
        ("Wannier center and Zak phase", criterion_6, Duration::from_secs(5)),
        ("global fit round trip", criterion_7, Duration::from_secs(300)),
        ("nonreciprocity", criterion_8, Duration::from_secs(5)),
        ("beta definition", criterion_9, Duration::from_secs(1)),
        ("Bloch vs real-space ladder", criterion_10, Duration::from_secs(10)),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *budget;
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {} [{:.3} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
