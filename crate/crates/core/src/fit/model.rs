use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::FitParams;
use crate::lattice::{build_coupling_matrix, LatticeSpec, MHZ_PER_GHZ};
use crate::scattering::scattering_at;
use crate::traces::{noise_floor_model, TraceSet, Units};

/// One trace to evaluate: element (out, in) by mode index, loop phase, and
/// absolute probe frequencies at the input node.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTarget {
    pub out: usize,
    pub inp: usize,
    pub loop_phase: f64,
    pub freq_ghz: Vec<f64>,
}

/// Model magnitude of every target: |S_nn| for reflection and the noise-floor
/// combination with scale C_nm for transmission.
///
/// A probe at frequency f on input m drives mode k at f + frame[k] - frame[m].
/// Targets sharing input, phase and grid reuse one scattering matrix per
/// point.
pub fn model_trace_values(spec: &LatticeSpec, fp: &FitParams, targets: &[TraceTarget]) -> Result<Vec<Vec<f64>>> {
    let current = fp.apply(spec);
    let frame = current.frame_frequencies()?;
    let eta = &fp.eta;
    let dim = spec.dim();
    for t in targets {
        if t.out >= dim || t.inp >= dim {
            return Err(Error::InvalidArgument(format!(
                "element ({}, {}) outside a {dim}-mode lattice",
                t.out, t.inp
            )));
        }
    }

    // group targets that can share scattering matrices
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        match groups.iter_mut().find(|(lead, _)| {
            let l = &targets[*lead];
            l.inp == t.inp && l.loop_phase.to_bits() == t.loop_phase.to_bits() && l.freq_ghz == t.freq_ghz
        }) {
            Some((_, members)) => members.push(i),
            None => groups.push((i, vec![i])),
        }
    }

    let evaluated = groups
        .par_iter()
        .map(|(lead, members)| {
            let lead = &targets[*lead];
            let m = lead.inp;
            let mut columns = vec![Vec::with_capacity(lead.freq_ghz.len()); members.len()];
            let mut probes = vec![0.0; dim];
            for &f in &lead.freq_ghz {
                for (k, p) in probes.iter_mut().enumerate() {
                    *p = f + (frame[k] - frame[m]);
                }
                let mut cm = build_coupling_matrix(&current, &probes, lead.loop_phase, fp.phi_off)?;
                cm.delta_mhz = (f - frame[m]) * MHZ_PER_GHZ;
                let s = scattering_at(&cm, eta)?;
                for (col, &i) in columns.iter_mut().zip(members) {
                    let n = targets[i].out;
                    let mag = s.get(n, m).norm();
                    col.push(if n == m { mag } else { noise_floor_model(mag, fp.scale[n][m]) });
                }
            }
            Ok(members.iter().copied().zip(columns).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = vec![Vec::new(); targets.len()];
    for (i, col) in evaluated.into_iter().flatten() {
        out[i] = col;
    }
    Ok(out)
}

/// Model value of element (out, inp) at input-frame detuning `delta_mhz`.
pub fn model_magnitude(
    spec: &LatticeSpec,
    fp: &FitParams,
    element: (usize, usize),
    delta_mhz: f64,
    loop_phase: f64,
) -> Result<f64> {
    fp.check_against(spec)?;
    let frame = fp.apply(spec).frame_frequencies()?;
    let (out, inp) = element;
    if inp >= frame.len() {
        return Err(Error::InvalidArgument(format!("input node {inp} out of range")));
    }
    let target = TraceTarget {
        out,
        inp,
        loop_phase,
        freq_ghz: vec![frame[inp] + delta_mhz / MHZ_PER_GHZ],
    };
    Ok(model_trace_values(spec, fp, &[target])?[0][0])
}

/// Traces matched to a lattice, ordered by element row-major (in mode order)
/// then by loop phase.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub spec: LatticeSpec,
    pub targets: Vec<TraceTarget>,
    pub data: Vec<Vec<f64>>,
}

impl FitProblem {
    pub fn new(spec: &LatticeSpec, ts: &TraceSet) -> Result<Self> {
        if ts.is_empty() {
            return Err(Error::InvalidArgument("no traces to fit".into()));
        }
        let mut rows = Vec::with_capacity(ts.len());
        for t in ts.iter() {
            if t.units != Units::Linear {
                return Err(Error::InvalidState(format!(
                    "trace {} is in dB; convert to linear units first",
                    t.element()
                )));
            }
            let out = spec
                .mode_index(&t.out)
                .ok_or_else(|| Error::InvalidArgument(format!("trace node {} is not in the lattice", t.out)))?;
            let inp = spec
                .mode_index(&t.inp)
                .ok_or_else(|| Error::InvalidArgument(format!("trace node {} is not in the lattice", t.inp)))?;
            rows.push((
                TraceTarget {
                    out,
                    inp,
                    loop_phase: t.loop_phase,
                    freq_ghz: t.freq_ghz.clone(),
                },
                t.values.clone(),
            ));
        }
        rows.sort_by(|a, b| {
            (a.0.out, a.0.inp)
                .cmp(&(b.0.out, b.0.inp))
                .then(a.0.loop_phase.total_cmp(&b.0.loop_phase))
        });
        let (targets, data) = rows.into_iter().unzip();
        Ok(Self {
            spec: spec.clone(),
            targets,
            data,
        })
    }

    pub fn num_points(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    /// Whether any trace covers element (out, inp).
    pub fn has_element(&self, out: usize, inp: usize) -> bool {
        self.targets.iter().any(|t| t.out == out && t.inp == inp)
    }

    /// Model minus data over every point, in problem order.
    pub fn residuals(&self, fp: &FitParams) -> Result<Vec<f64>> {
        let model = model_trace_values(&self.spec, fp, &self.targets)?;
        let mut out = Vec::with_capacity(self.num_points());
        for (m, d) in model.iter().zip(&self.data) {
            out.extend(m.iter().zip(d).map(|(a, b)| a - b));
        }
        Ok(out)
    }
}

/// Residual vector of `fp` against a trace set.
pub fn assemble_residuals(spec: &LatticeSpec, fp: &FitParams, ts: &TraceSet) -> Result<Vec<f64>> {
    fp.check_against(spec)?;
    FitProblem::new(spec, ts)?.residuals(fp)
}
