use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use synthlat::creutz::{
    band_structure, brillouin_grid, evolve_state, position_expectation, position_time_average,
    symmetry_deviation_at, CreutzParams, PlaquetteNode, PlaquetteState, SymmetryKind,
};
use synthlat::fit::{estimate_scale_factors, fit_global, FitParams, LmOptions};
use synthlat::lattice::LatticeSpec;
use synthlat::numfmt::fmt_sig;
use synthlat::presets;
use synthlat::scattering::{analytic_plaquette_s, s_eigenmodes, scattering_sweep};
use synthlat::traces::{
    db_to_linear, normalize_background, read_traces, remove_slope_with_window, synthesize_traces, write_traces_to,
    TraceKind, TraceSet, Units, DEFAULT_SLOPE_WINDOW,
};

use crate::{
    BandsArgs, CliError, CliResult, Common, EvolveArgs, FitArgs, GridArgs, PlaquetteArgs, Preset, SimulateArgs,
    StateName, SynthArgs,
};

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `body` behind an optional `# generated_unix=` line.
fn write_output(common: &Common, body: &[u8]) -> CliResult<()> {
    let mut bytes = Vec::with_capacity(body.len() + 32);
    if !common.no_timestamp {
        bytes.extend_from_slice(format!("# generated_unix={}\n", timestamp()).as_bytes());
    }
    bytes.extend_from_slice(body);
    std::fs::write(&common.out, bytes)?;
    Ok(())
}

fn load_lattice(path: &Path) -> CliResult<LatticeSpec> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("lattice file {} does not exist", path.display())));
    }
    Ok(LatticeSpec::from_json_file(path)?)
}

fn load_traces(path: &Path) -> CliResult<TraceSet> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("trace file {} does not exist", path.display())));
    }
    Ok(read_traces(path)?)
}

fn detuning_grid(grid: &GridArgs) -> CliResult<Vec<f64>> {
    if grid.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    if !(grid.span.is_finite() && grid.span > 0.0) {
        return Err(CliError::Usage("--span must be positive".into()));
    }
    let n = grid.points - 1;
    Ok((0..=n)
        .map(|i| -grid.span + 2.0 * grid.span * i as f64 / n as f64)
        .collect())
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let spec = match (a.preset, &a.config) {
        (Some(Preset::Full), _) => presets::full_lattice(),
        (Some(Preset::Pairwise), _) => presets::pairwise_lattice(),
        (Some(Preset::Plaquette), _) => presets::strong_coupling_plaquette(1.0),
        (None, Some(path)) => load_lattice(path)?,
        (None, None) => return Err(CliError::Usage("simulate needs --config or --preset".into())),
    };
    let grid = detuning_grid(&a.grid)?;
    let sweep = scattering_sweep(&spec, &grid, &a.grid.phases, a.grid.phi_offset)?;
    let mut body = Vec::new();
    sweep.write_csv(&mut body)?;
    write_output(&a.common, &body)?;
    println!(
        "wrote {} points x {} elements to {}",
        sweep.points.len(),
        spec.dim() * spec.dim(),
        a.common.out.display()
    );
    Ok(())
}

fn scale_matrix(spec: &LatticeSpec, scale: Option<&str>) -> CliResult<Vec<Vec<f64>>> {
    let dim = spec.dim();
    let device = || presets::SCALE_FACTORS.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    match scale {
        None if dim == 4 => Ok(device()),
        None => Ok(vec![vec![1.0; dim]; dim]),
        Some("device") if dim == 4 => Ok(device()),
        Some("device") => Err(CliError::Usage("--scale device needs a four-mode lattice".into())),
        Some(s) => {
            if let Ok(c) = s.parse::<f64>() {
                return Ok(vec![vec![c; dim]; dim]);
            }
            let path = Path::new(s);
            if !path.is_file() {
                return Err(CliError::Usage(format!("--scale {s:?} is neither a number nor a file")));
            }
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| CliError::Lib(e.into()))
        }
    }
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let spec = load_lattice(&a.config)?;
    if !(a.noise.is_finite() && a.noise >= 0.0) {
        return Err(CliError::Usage("--noise must be nonnegative".into()));
    }
    let grid = detuning_grid(&a.grid)?;
    let fp = FitParams::from_spec(&spec, a.grid.phi_offset).with_scale(scale_matrix(&spec, a.scale.as_deref())?)?;
    let ts = synthesize_traces(&spec, &fp, &grid, &a.grid.phases, a.noise, a.seed)?;
    let mut body = Vec::new();
    write_traces_to(&ts, &mut body)?;
    write_output(&a.common, &body)?;
    println!("wrote {} traces to {}", ts.len(), a.common.out.display());
    Ok(())
}

/// dB conversion, optional background division and optional slope removal.
fn preprocess(ts: &TraceSet, background: Option<&TraceSet>, remove_slope: bool) -> CliResult<TraceSet> {
    let linear = ts.try_map(|t| if t.units == Units::Db { db_to_linear(t) } else { Ok(t.clone()) })?;
    let normalized = match background {
        None => linear,
        Some(bg) => {
            let bg = bg.try_map(|t| if t.units == Units::Db { db_to_linear(t) } else { Ok(t.clone()) })?;
            linear.try_map(|t| {
                let b = bg.get(&t.out, &t.inp, t.loop_phase).ok_or_else(|| {
                    synthlat::Error::InvalidArgument(format!(
                        "no background trace for {} at phase {}",
                        t.element(),
                        t.loop_phase
                    ))
                })?;
                normalize_background(t, b)
            })?
        }
    };
    if !remove_slope {
        return Ok(normalized);
    }
    Ok(normalized.try_map(|t| {
        if t.kind() == TraceKind::Reflection {
            remove_slope_with_window(t, t.slope_window.unwrap_or(DEFAULT_SLOPE_WINDOW))
        } else {
            Ok(t.clone())
        }
    })?)
}

pub fn fit(a: FitArgs) -> CliResult<()> {
    let spec = load_lattice(&a.config)?;
    let init_spec = match &a.init {
        Some(path) => load_lattice(path)?,
        None => spec.clone(),
    };
    let raw = load_traces(&a.traces)?;
    let background = match &a.background {
        Some(path) => Some(load_traces(path)?),
        None => None,
    };
    let ts = preprocess(&raw, background.as_ref(), a.remove_slope)?;

    let init = FitParams::from_spec(&init_spec, a.phi_offset);
    init.check_against(&spec)?;
    let scale = estimate_scale_factors(&spec, &ts, &init)?;
    let init = init.with_scale(scale)?;
    let opts = LmOptions {
        max_iterations: a.max_iterations,
        ..LmOptions::default()
    };
    let report = fit_global(&spec, &ts, &init, &opts)?;

    let mut json = serde_json::to_value(&report).map_err(|e| CliError::Lib(e.into()))?;
    if !a.common.no_timestamp {
        if let Some(obj) = json.as_object_mut() {
            obj.insert("generated_unix".into(), timestamp().into());
        }
    }
    let mut body = serde_json::to_string_pretty(&json).map_err(|e| CliError::Lib(e.into()))?;
    body.push('\n');
    std::fs::write(&a.common.out, body)?;
    let result = report.result();
    println!(
        "fit {} parameters ({} free) to {} points: residual norm {}, {} iterations",
        result.parameters.len(),
        result.num_free(),
        result.points,
        fmt_sig(result.residual_norm),
        report.stage1.iterations + result.iterations
    );
    Ok(())
}

fn creutz_params(a: &BandsArgs) -> CliResult<CreutzParams> {
    if a.k < 2 {
        return Err(CliError::Usage("--k must be at least 2".into()));
    }
    Ok(CreutzParams::new(a.td, a.tv, a.th, a.phi)?)
}

pub fn bands(a: BandsArgs) -> CliResult<()> {
    let p = creutz_params(&a)?;
    let grid = brillouin_grid(a.k);
    let energies = band_structure(&p, &grid)?;
    let mut body = String::from("k,E_lower,E_upper\n");
    for (k, [lo, hi]) in grid.iter().zip(&energies) {
        let _ = writeln!(body, "{},{},{}", fmt_sig(*k), fmt_sig(*lo), fmt_sig(*hi));
    }
    write_output(&a.common, body.as_bytes())?;
    println!("wrote {} quasimomenta to {}", grid.len(), a.common.out.display());
    Ok(())
}

pub fn symmetry(a: BandsArgs) -> CliResult<()> {
    let p = creutz_params(&a)?;
    let grid = brillouin_grid(a.k);
    let mut body = String::from("k_rad,tr,c,s\n");
    let mut worst = [0.0f64; 3];
    for &k in &grid {
        let _ = write!(body, "{}", fmt_sig(k));
        for (w, kind) in worst.iter_mut().zip(SymmetryKind::ALL) {
            let d = symmetry_deviation_at(&p, kind, k);
            *w = w.max(d);
            let _ = write!(body, ",{}", fmt_sig(d));
        }
        body.push('\n');
    }
    write_output(&a.common, body.as_bytes())?;
    for (w, kind) in worst.iter().zip(SymmetryKind::ALL) {
        println!("{}: max deviation {}", kind.short_name(), fmt_sig(*w));
    }
    Ok(())
}

fn initial_state(name: StateName) -> PlaquetteState {
    match name {
        StateName::Chi => PlaquetteState::chi(),
        StateName::A1 => PlaquetteState::site(PlaquetteNode::A1),
        StateName::B1 => PlaquetteState::site(PlaquetteNode::B1),
        StateName::A2 => PlaquetteState::site(PlaquetteNode::A2),
        StateName::B2 => PlaquetteState::site(PlaquetteNode::B2),
        StateName::ZeroLeft => PlaquetteState::zero_mode_left(),
        StateName::ZeroRight => PlaquetteState::zero_mode_right(),
        StateName::Upper => PlaquetteState::upper(),
        StateName::Lower => PlaquetteState::lower(),
    }
}

pub fn evolve(a: EvolveArgs) -> CliResult<()> {
    if a.steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    if !(a.tmax.is_finite() && a.tmax > 0.0) {
        return Err(CliError::Usage("--tmax must be positive".into()));
    }
    let state = initial_state(a.state);
    let mut body = String::from("t,m,m_time_avg\n");
    let mut last = 0.0;
    for i in 0..=a.steps {
        let t = a.tmax * i as f64 / a.steps as f64;
        let m = position_expectation(&evolve_state(&state, t));
        last = position_time_average(&state, t);
        let _ = writeln!(body, "{},{},{}", fmt_sig(t), fmt_sig(m), fmt_sig(last));
    }
    write_output(&a.common, body.as_bytes())?;
    println!("time average over [0, {}]: {}", fmt_sig(a.tmax), fmt_sig(last));
    Ok(())
}

pub fn plaquette(a: PlaquetteArgs) -> CliResult<()> {
    if !(a.beta.is_finite() && a.beta > 0.0) {
        return Err(CliError::Usage("--beta must be positive".into()));
    }
    let s = analytic_plaquette_s(a.beta);
    let modes = s_eigenmodes(&s)?;
    let labels = presets::LABELS;
    let mut body = String::from("index,re,im,mag");
    for l in labels {
        let _ = write!(body, ",{l}_re,{l}_im");
    }
    body.push('\n');
    for (i, (v, vec)) in modes.values.iter().zip(&modes.vectors).enumerate() {
        let _ = write!(body, "{i},{},{},{}", fmt_sig(v.re), fmt_sig(v.im), fmt_sig(v.norm()));
        for z in vec.iter() {
            let _ = write!(body, ",{},{}", fmt_sig(z.re), fmt_sig(z.im));
        }
        body.push('\n');
    }
    write_output(&a.common, body.as_bytes())?;
    let unit = modes.values.iter().filter(|v| (**v - 1.0).norm() <= 1e-10).count();
    println!("{} eigenvalues, {unit} equal to 1", modes.values.len());
    Ok(())
}
