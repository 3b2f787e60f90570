//! Measured or synthetic scattering-magnitude traces: data model,
//! background preprocessing, synthetic generation and the CSV file format.
//!
//! File layout, one block per trace:
//!
//! ```text
//! # element=S_ab
//! # phi_rad=0.785398163397
//! # units=linear
//! freq_GHz,value
//! 4.15800000000,0.998741220031
//! ...
//! ```
//!
//! Optional lines: `# provenance=...` and `# generated_unix=...` before the
//! first block, `# slope_window=W` inside a block.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{model_trace_values, FitParams, TraceTarget};
use crate::lattice::{LatticeSpec, MHZ_PER_GHZ};
use crate::numfmt::fmt_sig;
use crate::scattering::element_name;

/// Endpoint window (points) used by [`remove_slope`].
pub const DEFAULT_SLOPE_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[serde(rename = "dB")]
    Db,
    Linear,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Db => "dB",
            Units::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Reflection,
    Transmission,
}

/// Magnitude of one scattering element against probe frequency at one loop
/// phase. The frequency axis is the probe frequency at the input node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub out: String,
    pub inp: String,
    pub loop_phase: f64,
    pub freq_ghz: Vec<f64>,
    pub values: Vec<f64>,
    pub units: Units,
    /// Endpoint window of an applied slope removal.
    pub slope_window: Option<usize>,
}

impl Trace {
    pub fn new(
        out: impl Into<String>,
        inp: impl Into<String>,
        loop_phase: f64,
        freq_ghz: Vec<f64>,
        values: Vec<f64>,
        units: Units,
    ) -> Result<Self> {
        let t = Self {
            out: out.into(),
            inp: inp.into(),
            loop_phase,
            freq_ghz,
            values,
            units,
            slope_window: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.out.is_empty() || self.inp.is_empty() {
            return Err(Error::InvalidArgument("trace node label is empty".into()));
        }
        if !self.loop_phase.is_finite() {
            return Err(Error::InvalidArgument("trace loop phase is not finite".into()));
        }
        if self.freq_ghz.is_empty() {
            return Err(Error::InvalidArgument(format!("trace {} is empty", self.element())));
        }
        if self.freq_ghz.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.freq_ghz.len(),
                got: self.values.len(),
            });
        }
        if self.freq_ghz.iter().any(|f| !f.is_finite()) || self.freq_ghz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "trace {}: frequency grid must be finite and strictly increasing",
                self.element()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "trace {}: values must be finite",
                self.element()
            )));
        }
        Ok(())
    }

    pub fn element(&self) -> String {
        element_name(&self.out, &self.inp)
    }

    pub fn kind(&self) -> TraceKind {
        if self.out == self.inp {
            TraceKind::Reflection
        } else {
            TraceKind::Transmission
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn key(&self) -> TraceKey {
        TraceKey {
            out: self.out.clone(),
            inp: self.inp.clone(),
            loop_phase: self.loop_phase,
        }
    }
}

/// (output node, input node, loop phase), ordered by labels then phase.
#[derive(Debug, Clone)]
pub struct TraceKey {
    pub out: String,
    pub inp: String,
    pub loop_phase: f64,
}

impl PartialEq for TraceKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TraceKey {}

impl PartialOrd for TraceKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TraceKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.out
            .cmp(&other.out)
            .then_with(|| self.inp.cmp(&other.inp))
            .then_with(|| self.loop_phase.total_cmp(&other.loop_phase))
    }
}

impl fmt::Display for TraceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at phi = {}", element_name(&self.out, &self.inp), self.loop_phase)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceSet {
    traces: BTreeMap<TraceKey, Trace>,
    pub provenance: String,
}

impl TraceSet {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self {
            traces: BTreeMap::new(),
            provenance: provenance.into(),
        }
    }

    /// Adds a trace; keys must be unique and every trace of one element must
    /// have the same length.
    pub fn insert(&mut self, trace: Trace) -> Result<()> {
        trace.validate()?;
        let key = trace.key();
        if self.traces.contains_key(&key) {
            return Err(Error::InvalidArgument(format!("duplicate trace {key}")));
        }
        if let Some(other) = self
            .traces
            .values()
            .find(|t| t.out == trace.out && t.inp == trace.inp && t.len() != trace.len())
        {
            return Err(Error::GridMismatch(format!(
                "traces of {} have {} and {} points",
                trace.element(),
                other.len(),
                trace.len()
            )));
        }
        self.traces.insert(key, trace);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn get(&self, out: &str, inp: &str, loop_phase: f64) -> Option<&Trace> {
        self.traces.get(&TraceKey {
            out: out.to_string(),
            inp: inp.to_string(),
            loop_phase,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trace> {
        self.traces.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &TraceKey> {
        self.traces.keys()
    }

    pub fn total_points(&self) -> usize {
        self.traces.values().map(Trace::len).sum()
    }

    /// Distinct loop phases, ascending.
    pub fn phases(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.traces.keys().map(|k| k.loop_phase).collect();
        p.sort_by(f64::total_cmp);
        p.dedup();
        p
    }

    /// Applies `f` to every trace, keeping the keys.
    pub fn try_map(&self, f: impl Fn(&Trace) -> Result<Trace>) -> Result<TraceSet> {
        let mut out = TraceSet::new(self.provenance.clone());
        for t in self.traces.values() {
            out.insert(f(t)?)?;
        }
        Ok(out)
    }

    /// Subset whose nodes all belong to `labels`.
    pub fn restrict(&self, labels: &[&str]) -> TraceSet {
        let mut out = TraceSet::new(self.provenance.clone());
        for t in self.traces.values() {
            if labels.contains(&t.out.as_str()) && labels.contains(&t.inp.as_str()) {
                out.traces.insert(t.key(), t.clone());
            }
        }
        out
    }
}

/// 20 log10 magnitudes to linear magnitudes.
pub fn db_to_linear(t: &Trace) -> Result<Trace> {
    if t.units != Units::Db {
        return Err(Error::InvalidState(format!("trace {} is already linear", t.element())));
    }
    let mut out = t.clone();
    out.values = t.values.iter().map(|v| 10f64.powf(v / 20.0)).collect();
    out.units = Units::Linear;
    Ok(out)
}

/// Pointwise division by a recorded background on the same grid. For
/// transmission the background is the noise floor, so the result is in units
/// of the noise amplitude.
pub fn normalize_background(t: &Trace, background: &Trace) -> Result<Trace> {
    if t.units != Units::Linear || background.units != Units::Linear {
        return Err(Error::InvalidState(
            "background normalization needs linear traces".into(),
        ));
    }
    if t.freq_ghz != background.freq_ghz {
        return Err(Error::GridMismatch(format!(
            "trace {} and its background use different frequency grids",
            t.element()
        )));
    }
    if let Some((index, &value)) = background.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositiveBackground { index, value });
    }
    let mut out = t.clone();
    out.values = t.values.iter().zip(&background.values).map(|(v, b)| v / b).collect();
    Ok(out)
}

/// [`remove_slope_with_window`] with the default window.
pub fn remove_slope(t: &Trace) -> Result<Trace> {
    remove_slope_with_window(t, DEFAULT_SLOPE_WINDOW)
}

/// Divides a reflection trace by the line through the mean of its first `w`
/// points and the mean of its last `w` points.
pub fn remove_slope_with_window(t: &Trace, w: usize) -> Result<Trace> {
    if t.kind() != TraceKind::Reflection {
        return Err(Error::InvalidState(format!(
            "slope removal applies to reflection traces, got {}",
            t.element()
        )));
    }
    if t.units != Units::Linear {
        return Err(Error::InvalidState("slope removal needs a linear trace".into()));
    }
    if w == 0 || t.len() < 2 * w {
        return Err(Error::InvalidArgument(format!(
            "slope window {w} needs at least {} points, trace has {}",
            2 * w,
            t.len()
        )));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let n = t.len();
    let (x0, y0) = (mean(&t.freq_ghz[..w]), mean(&t.values[..w]));
    let (x1, y1) = (mean(&t.freq_ghz[n - w..]), mean(&t.values[n - w..]));
    let slope = (y1 - y0) / (x1 - x0);
    let line: Vec<f64> = t.freq_ghz.iter().map(|f| y0 + slope * (f - x0)).collect();
    if let Some((i, l)) = line.iter().enumerate().find(|(_, l)| !(**l > 0.0)) {
        return Err(Error::DegenerateBackground(format!(
            "fitted line reaches {l} at {} GHz",
            t.freq_ghz[i]
        )));
    }
    let mut out = t.clone();
    out.values = t.values.iter().zip(&line).map(|(v, l)| v / l).collect();
    out.slope_window = Some(w);
    Ok(out)
}

/// Transmission magnitude seen above a unit noise floor: signal and noise
/// powers add.
pub fn noise_floor_model(model_mag: f64, scale: f64) -> f64 {
    (scale * model_mag).hypot(1.0)
}

/// Generates every element of `spec` at each loop phase.
///
/// Element (n, m) is sampled at input-frame detunings `delta_grid_mhz`, i.e.
/// at absolute probe frequencies `frame[m] + delta`. Values come from the
/// same model the fit evaluates, plus independent Gaussian noise of standard
/// deviation `noise_sigma` drawn in key order from a seeded stream.
pub fn synthesize_traces(
    spec: &LatticeSpec,
    fp: &FitParams,
    delta_grid_mhz: &[f64],
    phases: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<TraceSet> {
    fp.check_against(spec)?;
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {noise_sigma}"
        )));
    }
    if delta_grid_mhz.is_empty() || phases.is_empty() {
        return Err(Error::InvalidArgument("synthesis grids must be nonempty".into()));
    }
    let truth = fp.apply(spec);
    let frame = truth.frame_frequencies()?;
    let labels = spec.labels();
    let dim = spec.dim();
    let mut targets = Vec::with_capacity(dim * dim * phases.len());
    for n in 0..dim {
        for m in 0..dim {
            for &phi in phases {
                let freq: Vec<f64> = delta_grid_mhz.iter().map(|d| frame[m] + d / MHZ_PER_GHZ).collect();
                targets.push(TraceTarget {
                    out: n,
                    inp: m,
                    loop_phase: phi,
                    freq_ghz: freq,
                });
            }
        }
    }
    let values = model_trace_values(spec, fp, &targets)?;
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = TraceSet::new(format!("synthetic seed={seed} noise_sigma={noise_sigma}"));
    for (target, mut vals) in targets.into_iter().zip(values) {
        if noise_sigma > 0.0 {
            for v in vals.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        set.insert(Trace::new(
            labels[target.out],
            labels[target.inp],
            target.loop_phase,
            target.freq_ghz,
            vals,
            Units::Linear,
        )?)?;
    }
    Ok(set)
}

/// Splits an element name `S_ab` or `S_out,in` into node labels.
pub fn parse_element(name: &str) -> Option<(String, String)> {
    let body = name.strip_prefix("S_")?;
    if let Some((out, inp)) = body.split_once(',') {
        if out.is_empty() || inp.is_empty() {
            return None;
        }
        return Some((out.to_string(), inp.to_string()));
    }
    let chars: Vec<char> = body.chars().collect();
    if chars.len() == 2 {
        Some((chars[0].to_string(), chars[1].to_string()))
    } else {
        None
    }
}

pub fn write_traces_to<W: Write>(ts: &TraceSet, mut out: W) -> Result<()> {
    if !ts.provenance.is_empty() {
        writeln!(out, "# provenance={}", ts.provenance.replace('\n', " "))?;
    }
    for t in ts.iter() {
        writeln!(out, "# element={}", t.element())?;
        writeln!(out, "# phi_rad={}", fmt_sig(t.loop_phase))?;
        writeln!(out, "# units={}", t.units.as_str())?;
        if let Some(w) = t.slope_window {
            writeln!(out, "# slope_window={w}")?;
        }
        writeln!(out, "freq_GHz,value")?;
        for (f, v) in t.freq_ghz.iter().zip(&t.values) {
            writeln!(out, "{},{}", fmt_sig(*f), fmt_sig(*v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_traces(ts: &TraceSet, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_traces_to(ts, &mut w)?;
    w.flush()?;
    Ok(())
}

struct Block {
    start: usize,
    element: Option<(String, String)>,
    phi: Option<f64>,
    units: Option<Units>,
    slope_window: Option<usize>,
    header_seen: bool,
    freq: Vec<f64>,
    values: Vec<f64>,
}

impl Block {
    fn new(start: usize) -> Self {
        Self {
            start,
            element: None,
            phi: None,
            units: None,
            slope_window: None,
            header_seen: false,
            freq: Vec::new(),
            values: Vec::new(),
        }
    }

    fn finish(self, set: &mut TraceSet) -> Result<()> {
        let line = self.start;
        let (out, inp) = self.element.expect("block starts with element");
        let phi = self.phi.ok_or_else(|| Error::parse(line, "block is missing the phi_rad header"))?;
        let units = self.units.ok_or_else(|| Error::parse(line, "block is missing the units header"))?;
        if !self.header_seen {
            return Err(Error::parse(line, "block is missing the freq_GHz,value header"));
        }
        if self.freq.is_empty() {
            return Err(Error::parse(line, "block has no data rows"));
        }
        let mut trace = Trace {
            out,
            inp,
            loop_phase: phi,
            freq_ghz: self.freq,
            values: self.values,
            units,
            slope_window: self.slope_window,
        };
        trace.slope_window = self.slope_window;
        set.insert(trace).map_err(|e| Error::parse(line, e.to_string()))
    }
}

/// Parses the trace file format; every error carries its line number.
pub fn read_traces_from<R: BufRead>(input: R) -> Result<TraceSet> {
    let mut set = TraceSet::new(String::new());
    let mut block: Option<Block> = None;
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            let (key, value) = meta
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("malformed header line {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "provenance" | "generated_unix" => {
                    if block.is_some() {
                        return Err(Error::parse(lineno, format!("{key} must precede the first block")));
                    }
                    if key == "provenance" {
                        set.provenance = value.to_string();
                    }
                }
                "element" => {
                    if let Some(b) = block.take() {
                        b.finish(&mut set)?;
                    }
                    let mut b = Block::new(lineno);
                    b.element = Some(
                        parse_element(value)
                            .ok_or_else(|| Error::parse(lineno, format!("bad element name {value:?}")))?,
                    );
                    block = Some(b);
                }
                "phi_rad" | "units" | "slope_window" => {
                    let b = block
                        .as_mut()
                        .ok_or_else(|| Error::parse(lineno, format!("{key} before any element header")))?;
                    if b.header_seen {
                        return Err(Error::parse(lineno, format!("{key} after the column header")));
                    }
                    match key {
                        "phi_rad" => {
                            let phi: f64 = value
                                .parse()
                                .map_err(|_| Error::parse(lineno, format!("bad phi_rad value {value:?}")))?;
                            if !phi.is_finite() {
                                return Err(Error::parse(lineno, "phi_rad is not finite"));
                            }
                            b.phi = Some(phi);
                        }
                        "units" => {
                            b.units = Some(match value {
                                "dB" => Units::Db,
                                "linear" => Units::Linear,
                                _ => return Err(Error::parse(lineno, format!("unknown units {value:?}"))),
                            });
                        }
                        _ => {
                            let w: usize = value
                                .parse()
                                .map_err(|_| Error::parse(lineno, format!("bad slope_window {value:?}")))?;
                            b.slope_window = Some(w);
                        }
                    }
                }
                _ => return Err(Error::parse(lineno, format!("unknown header key {key:?}"))),
            }
            continue;
        }
        let b = block
            .as_mut()
            .ok_or_else(|| Error::parse(lineno, "data before any element header"))?;
        if !b.header_seen {
            if line.trim() != "freq_GHz,value" {
                return Err(Error::parse(lineno, format!("expected column header freq_GHz,value, got {line:?}")));
            }
            if b.phi.is_none() {
                return Err(Error::parse(lineno, "block is missing the phi_rad header"));
            }
            if b.units.is_none() {
                return Err(Error::parse(lineno, "block is missing the units header"));
            }
            b.header_seen = true;
            continue;
        }
        let mut fields = line.split(',');
        let (Some(f), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(lineno, format!("expected two columns, got {line:?}")));
        };
        let f: f64 = f
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad frequency {f:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad value {v:?}")))?;
        if !f.is_finite() || !v.is_finite() {
            return Err(Error::parse(lineno, "non-finite number"));
        }
        if b.freq.last().is_some_and(|&last| f <= last) {
            return Err(Error::parse(lineno, format!("frequency {f} does not increase")));
        }
        b.freq.push(f);
        b.values.push(v);
    }
    if let Some(b) = block {
        b.finish(&mut set)?;
    }
    if set.is_empty() {
        return Err(Error::parse(0, "file contains no traces"));
    }
    Ok(set)
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<TraceSet> {
    let file = std::fs::File::open(path)?;
    read_traces_from(BufReader::new(file))
}
