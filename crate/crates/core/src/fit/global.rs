use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::creutz::wrap_angle;
use crate::error::{Error, Result};
use crate::fit::lm::{damped_least_squares, LmOptions, StopReason};
use crate::fit::model::{model_trace_values, FitProblem, TraceTarget};
use crate::fit::params::{FitParams, FreezeMask, ParamKind};
use crate::lattice::{beta_from_g, LatticeSpec, MHZ_PER_GHZ};
use crate::traces::TraceSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    /// Standard error; absent for frozen parameters.
    pub sigma: Option<f64>,
    pub frozen: bool,
}

/// Outcome of one least-squares run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<ParamEstimate>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub points: usize,
    #[serde(skip)]
    pub params: Option<FitParams>,
    /// Covariance of the free parameters in physical units, in parameter order.
    #[serde(skip)]
    pub covariance: Vec<Vec<f64>>,
}

impl FitResult {
    pub fn params(&self) -> &FitParams {
        self.params.as_ref().expect("fit result carries its parameters")
    }

    pub fn get(&self, name: &str) -> Option<&ParamEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn num_free(&self) -> usize {
        self.parameters.iter().filter(|p| !p.frozen).count()
    }
}

/// Names of the frozen parameters of each stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenNames {
    pub stage1: Vec<String>,
    pub stage2: Vec<String>,
}

/// Both stages of the global fit plus the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFit {
    pub stage1: FitResult,
    pub stage2: FitResult,
    pub frozen: FrozenNames,
    pub options: LmOptions,
}

impl GlobalFit {
    pub fn result(&self) -> &FitResult {
        &self.stage2
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Physical parameters for the internal coordinates `u`, with frozen
/// entries copied from `init` so they stay bit-exact.
fn params_at(init: &FitParams, u: &[f64], mask: &FreezeMask) -> Result<FitParams> {
    let mut values = init.with_internal(u)?.to_vec();
    for (v, (init_v, &frozen)) in values.iter_mut().zip(init.to_vec().into_iter().zip(&mask.frozen)) {
        if frozen {
            *v = init_v;
        }
    }
    init.with_vec(&values)
}

/// Runs damped least squares on `problem` from `init` with `mask`.
pub fn run_stage(
    problem: &FitProblem,
    init: &FitParams,
    mask: &FreezeMask,
    opts: &LmOptions,
    stage: &str,
) -> Result<FitResult> {
    init.check_against(&problem.spec)?;
    mask.validate(init.num_params())?;
    let names = init.names(&problem.spec);
    let residual = |u: &[f64]| problem.residuals(&params_at(init, u, mask)?);
    let sol = damped_least_squares(residual, &init.to_internal(), &mask.frozen, &names, opts)?;
    if !sol.converged {
        return Err(Error::FitNonConvergence {
            stage: stage.to_string(),
            iterations: sol.iterations,
            residual_norm: sol.residual_norm,
        });
    }
    let mut params = params_at(init, &sol.x, mask)?;
    if !mask.frozen[params.layout().iter().position(|(k, _)| *k == ParamKind::PhiOff).expect("phi_off")] {
        params.phi_off = wrap_angle(params.phi_off);
        if params.phi_off <= -PI {
            params.phi_off += 2.0 * PI;
        }
    }
    let deriv = params.internal_derivatives();
    let k = sol.free.len();
    let covariance: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| deriv[sol.free[a]] * sol.covariance[(a, b)] * deriv[sol.free[b]])
                .collect()
        })
        .collect();
    let values = params.to_vec();
    let parameters = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let sigma = sol
                .free
                .iter()
                .position(|&f| f == i)
                .map(|c| covariance[c][c].max(0.0).sqrt());
            ParamEstimate {
                name,
                value: values[i],
                sigma,
                frozen: mask.frozen[i],
            }
        })
        .collect();
    Ok(FitResult {
        parameters,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
        converged: sol.converged,
        stop: sol.stop,
        points: problem.num_points(),
        params: Some(params),
        covariance,
    })
}

/// Mask freezing the scale factors of elements without data.
pub fn unobserved_scales(problem: &FitProblem, fp: &FitParams) -> FreezeMask {
    let dim = fp.dim();
    FreezeMask {
        frozen: fp
            .layout()
            .into_iter()
            .map(|(kind, i)| kind == ParamKind::Scale && !problem.has_element(i / dim, i % dim))
            .collect(),
    }
}

fn combine(a: &FreezeMask, b: &FreezeMask) -> FreezeMask {
    FreezeMask {
        frozen: a.frozen.iter().zip(&b.frozen).map(|(x, y)| *x || *y).collect(),
    }
}

fn frozen_names(names: &[String], mask: &FreezeMask) -> Vec<String> {
    names
        .iter()
        .zip(&mask.frozen)
        .filter(|(_, f)| **f)
        .map(|(n, _)| n.clone())
        .collect()
}

/// Two-stage fit: first couplings, phase offset and scale factors with the
/// mode parameters held at `init`, then every parameter from that result.
pub fn fit_global(spec: &LatticeSpec, ts: &TraceSet, init: &FitParams, opts: &LmOptions) -> Result<GlobalFit> {
    init.check_against(spec)?;
    let problem = FitProblem::new(spec, ts)?;
    let base = unobserved_scales(&problem, init);
    let stage1_mask = combine(&base, &FreezeMask::modes_frozen(init));
    let stage1 = run_stage(&problem, init, &stage1_mask, opts, "stage1")?;
    let stage2 = run_stage(&problem, stage1.params(), &base, opts, "stage2")?;
    let names = init.names(spec);
    Ok(GlobalFit {
        frozen: FrozenNames {
            stage1: frozen_names(&names, &stage1_mask),
            stage2: frozen_names(&names, &base),
        },
        stage1,
        stage2,
        options: opts.clone(),
    })
}

/// Scale factors from the ratio of peak signal above the noise floor in the
/// data to the peak unscaled model transmission at `fp`.
pub fn estimate_scale_factors(spec: &LatticeSpec, ts: &TraceSet, fp: &FitParams) -> Result<Vec<Vec<f64>>> {
    fp.check_against(spec)?;
    let problem = FitProblem::new(spec, ts)?;
    let dim = spec.dim();
    let mut unit = fp.clone();
    unit.scale = (0..dim).map(|_| vec![1.0; dim]).collect();
    let model = model_trace_values(spec, &unit, &problem.targets)?;
    let mut scale = fp.scale.clone();
    for n in 0..dim {
        for m in 0..dim {
            if n == m {
                continue;
            }
            let signal = |v: f64| (v * v - 1.0).max(0.0).sqrt();
            let mut data_peak = 0.0f64;
            let mut model_peak = 0.0f64;
            for ((t, d), mv) in problem.targets.iter().zip(&problem.data).zip(&model) {
                if (t.out, t.inp) == (n, m) {
                    data_peak = d.iter().map(|v| signal(*v)).fold(data_peak, f64::max);
                    model_peak = mv.iter().map(|v| signal(*v)).fold(model_peak, f64::max);
                }
            }
            if data_peak > 0.0 && model_peak > 0.0 {
                scale[n][m] = data_peak / model_peak;
            }
        }
    }
    Ok(scale)
}

/// Estimates of one link from pairwise-coupled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseFit {
    pub nu: [f64; 2],
    pub kappa: [f64; 2],
    pub eta: [f64; 2],
    pub beta: f64,
    pub fit: FitResult,
}

struct DipSummary {
    /// Centre frequency (GHz): the dip, or the midpoint of a split pair.
    center: f64,
    /// Splitting of a resolved pair in MHz.
    splitting: Option<f64>,
    width_mhz: f64,
    depth_floor: f64,
}

fn smooth(values: &[f64], half: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn summarize_dips(freq: &[f64], values: &[f64]) -> Option<DipSummary> {
    let n = values.len();
    if n < 5 {
        return None;
    }
    let v = smooth(values, 2);
    let mut sorted = v.clone();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[n / 2].max(sorted[(3 * n) / 4]);
    let global = sorted[0];
    let depth = baseline - global;
    if depth <= 0.0 {
        return None;
    }
    let reach = (n / 100).max(2);
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach + 1).min(n);
            v[lo..hi].iter().all(|&x| v[i] <= x) && baseline - v[i] >= 0.3 * depth
        })
        .collect();
    minima.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    minima.dedup_by(|a, b| a.abs_diff(*b) <= reach);
    let deepest = minima[0];
    let half = global + 0.5 * depth;
    let mut lo = deepest;
    while lo > 0 && v[lo] < half {
        lo -= 1;
    }
    let mut hi = deepest;
    while hi + 1 < n && v[hi] < half {
        hi += 1;
    }
    let step = (freq[n - 1] - freq[0]) / (n - 1) as f64;
    let width_mhz = ((freq[hi] - freq[lo]).max(2.0 * step)) * MHZ_PER_GHZ;
    let second = minima
        .iter()
        .skip(1)
        .find(|&&i| freq[i].max(freq[deepest]) - freq[i].min(freq[deepest]) > 0.5 * width_mhz / MHZ_PER_GHZ);
    Some(match second {
        Some(&j) => DipSummary {
            center: 0.5 * (freq[deepest] + freq[j]),
            splitting: Some((freq[deepest] - freq[j]).abs() * MHZ_PER_GHZ),
            width_mhz,
            depth_floor: values[deepest].min(values[j]).max(0.0),
        },
        None => DipSummary {
            center: freq[deepest],
            splitting: None,
            width_mhz,
            depth_floor: values[deepest].max(0.0),
        },
    })
}

/// Fits a two-mode lattice with one link to its reflection and transmission
/// traces.
///
/// Initial frequencies, linewidths and the coupling come from the reflection
/// dips (a split pair gives the coupling from its spacing). Both coupling
/// regimes consistent with each dip depth are tried and the better fit is
/// kept. The phase offset has no effect on a single link and stays frozen.
pub fn pairwise_fit(spec: &LatticeSpec, ts: &TraceSet, opts: &LmOptions) -> Result<PairwiseFit> {
    if spec.dim() != 2 || spec.couplings.len() != 1 {
        return Err(Error::InvalidArgument(
            "pairwise fit needs two modes and one link".into(),
        ));
    }
    let labels = spec.labels();
    let ts = ts.restrict(&labels);
    let problem = FitProblem::new(spec, &ts)?;
    let mut dips = Vec::with_capacity(2);
    for n in 0..2 {
        let idx = problem
            .targets
            .iter()
            .position(|t| t.out == n && t.inp == n)
            .ok_or_else(|| Error::InvalidArgument(format!("no reflection trace for mode {}", labels[n])))?;
        let d = summarize_dips(&problem.targets[idx].freq_ghz, &problem.data[idx]).ok_or_else(|| {
            Error::InvalidArgument(format!("reflection trace of mode {} shows no resonance", labels[n]))
        })?;
        dips.push(d);
    }
    let kappa = [dips[0].width_mhz, dips[1].width_mhz];
    let splits: Vec<f64> = dips.iter().filter_map(|d| d.splitting).collect();
    let beta = if splits.is_empty() {
        0.05
    } else {
        let g = splits.iter().sum::<f64>() / splits.len() as f64;
        beta_from_g(g, kappa[0], kappa[1])?.max(0.05)
    };

    let mut base = FitParams::from_spec(spec, 0.0);
    base.nu = vec![dips[0].center, dips[1].center];
    base.kappa = kappa.to_vec();
    base.beta = vec![beta];
    let regimes = |d: &DipSummary| {
        let v = d.depth_floor.min(0.9);
        [(0.5 * (1.0 + v)).clamp(0.05, 0.95), (0.5 * (1.0 - v)).clamp(0.05, 0.95)]
    };
    let mut mask = unobserved_scales(&problem, &base);
    mask.freeze_kind(&base, ParamKind::PhiOff);

    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for ea in regimes(&dips[0]) {
        for eb in regimes(&dips[1]) {
            let mut init = base.clone();
            init.eta = vec![ea, eb];
            init.scale = estimate_scale_factors(spec, &ts, &init)?;
            match run_stage(&problem, &init, &mask, opts, "pairwise") {
                Ok(r) => {
                    if best.as_ref().is_none_or(|b| r.residual_norm < b.residual_norm) {
                        best = Some(r);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    let fit = match (best, last_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one start is tried"),
    };
    let p = fit.params();
    Ok(PairwiseFit {
        nu: [p.nu[0], p.nu[1]],
        kappa: [p.kappa[0], p.kappa[1]],
        eta: [p.eta[0], p.eta[1]],
        beta: p.beta[0],
        fit,
    })
}

/// Frequencies (GHz) of the reflection minima of element (n, n) over a grid,
/// deepest first; used to read off mode splittings.
pub fn reflection_minima(spec: &LatticeSpec, fp: &FitParams, n: usize, freq_ghz: &[f64], loop_phase: f64) -> Result<Vec<f64>> {
    let target = TraceTarget {
        out: n,
        inp: n,
        loop_phase,
        freq_ghz: freq_ghz.to_vec(),
    };
    let v = model_trace_values(spec, fp, &[target])?.remove(0);
    let mut minima: Vec<usize> = (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1])
        .collect();
    minima.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    Ok(minima.into_iter().map(|i| freq_ghz[i]).collect())
}
