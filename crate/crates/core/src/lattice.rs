//! Lattice data model: cavity modes (nodes), parametric couplings (links) and
//! the complex coupling matrix of the steady-state equations of motion.
//!
//! Units follow the device tables: mode frequencies in GHz, linewidths in MHz.
//! The normalized detuning divides a MHz offset by a MHz linewidth, so no
//! factor of 2π ever appears.

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MHz per GHz.
pub const MHZ_PER_GHZ: f64 = 1.0e3;

/// Largest allowed mismatch between a pump frequency and the difference of
/// the two mode frequencies it connects, in GHz (1 MHz).
pub const PUMP_TOL_GHZ: f64 = 1.0e-3;

/// One lattice node: a cavity mode coupled to the measurement port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeParams {
    pub label: String,
    /// Resonance frequency in GHz.
    #[serde(rename = "nu_GHz")]
    pub nu: f64,
    /// Total linewidth in MHz.
    #[serde(rename = "kappa_MHz")]
    pub kappa: f64,
    /// External coupling efficiency, kappa_ext / kappa.
    pub eta: f64,
}

impl ModeParams {
    pub fn new(label: impl Into<String>, nu: f64, kappa: f64, eta: f64) -> Result<Self> {
        let mode = Self {
            label: label.into(),
            nu,
            kappa,
            eta,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.is_empty() {
            return Err(Error::InvalidArgument("mode label is empty".into()));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mode {}: frequency must be positive, got {}",
                self.label, self.nu
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mode {}: linewidth must be positive, got {}",
                self.label, self.kappa
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidArgument(format!(
                "mode {}: coupling efficiency must lie in [0, 1], got {}",
                self.label, self.eta
            )));
        }
        Ok(())
    }

    /// External (port) loss rate in MHz.
    pub fn kappa_ext(&self) -> f64 {
        self.eta * self.kappa
    }

    /// Internal loss rate in MHz.
    pub fn kappa_int(&self) -> f64 {
        (1.0 - self.eta) * self.kappa
    }
}

/// One parametric link between two modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub from: String,
    pub to: String,
    /// Normalized coupling magnitude |g| / (2 sqrt(kappa_n kappa_m)).
    pub beta: f64,
    /// Static link phase in radians.
    #[serde(rename = "phase_rad", default)]
    pub phase: f64,
    /// Pump frequency in GHz; when present it fixes the frequency offset
    /// between the rotating frames of the two modes.
    #[serde(
        rename = "pump_nu_GHz",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub pump_nu: Option<f64>,
    #[serde(default)]
    pub carries_loop_phase: bool,
}

impl CouplingSpec {
    pub fn new(from: impl Into<String>, to: impl Into<String>, beta: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            beta,
            phase: 0.0,
            pump_nu: None,
            carries_loop_phase: false,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_pump(mut self, pump_nu: f64) -> Self {
        self.pump_nu = Some(pump_nu);
        self
    }

    pub fn with_loop_phase(mut self) -> Self {
        self.carries_loop_phase = true;
        self
    }
}

/// The coupling graph: nodes plus links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub modes: Vec<ModeParams>,
    pub couplings: Vec<CouplingSpec>,
}

impl LatticeSpec {
    pub fn new(modes: Vec<ModeParams>, couplings: Vec<CouplingSpec>) -> Result<Self> {
        let spec = Self { modes, couplings };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_index(&self, label: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.modes.iter().map(|m| m.label.as_str()).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eta).collect()
    }

    /// Index pair of every coupling, in declaration order.
    pub fn coupling_indices(&self) -> Vec<(usize, usize)> {
        self.couplings
            .iter()
            .map(|c| {
                (
                    self.mode_index(&c.from).expect("validated"),
                    self.mode_index(&c.to).expect("validated"),
                )
            })
            .collect()
    }

    /// Index of the link that receives the swept loop phase: the flagged link,
    /// or the first declared link when none is flagged.
    pub fn loop_link(&self) -> Option<usize> {
        self.couplings
            .iter()
            .position(|c| c.carries_loop_phase)
            .or(if self.couplings.is_empty() { None } else { Some(0) })
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidLattice("lattice has no modes".into()));
        }
        let mut seen = HashSet::new();
        for mode in &self.modes {
            mode.validate()?;
            if !seen.insert(mode.label.as_str()) {
                return Err(Error::InvalidLattice(format!(
                    "duplicate mode label {}",
                    mode.label
                )));
            }
        }
        let mut pairs = HashSet::new();
        let mut loop_flags = 0;
        for c in &self.couplings {
            let n = self.mode_index(&c.from).ok_or_else(|| {
                Error::InvalidLattice(format!("coupling references unknown mode {}", c.from))
            })?;
            let m = self.mode_index(&c.to).ok_or_else(|| {
                Error::InvalidLattice(format!("coupling references unknown mode {}", c.to))
            })?;
            if n == m {
                return Err(Error::InvalidLattice(format!(
                    "coupling {}-{} connects a mode to itself",
                    c.from, c.to
                )));
            }
            if !pairs.insert((n.min(m), n.max(m))) {
                return Err(Error::InvalidLattice(format!(
                    "duplicate coupling for pair {}-{}",
                    c.from, c.to
                )));
            }
            if !(c.beta.is_finite() && c.beta >= 0.0) {
                return Err(Error::InvalidLattice(format!(
                    "coupling {}-{}: beta must be nonnegative, got {}",
                    c.from, c.to, c.beta
                )));
            }
            if !c.phase.is_finite() {
                return Err(Error::InvalidLattice(format!(
                    "coupling {}-{}: phase is not finite",
                    c.from, c.to
                )));
            }
            if let Some(pump) = c.pump_nu {
                let split = (self.modes[m].nu - self.modes[n].nu).abs();
                if !pump.is_finite() || (pump - split).abs() > PUMP_TOL_GHZ {
                    return Err(Error::InvalidLattice(format!(
                        "coupling {}-{}: pump frequency {pump} GHz differs from the mode splitting {split} GHz by more than 1 MHz",
                        c.from, c.to
                    )));
                }
            }
            if c.carries_loop_phase {
                loop_flags += 1;
            }
        }
        if loop_flags > 1 {
            return Err(Error::InvalidLattice(
                "more than one coupling carries the loop phase".into(),
            ));
        }
        self.frame_frequencies().map(|_| ())
    }

    /// Frequencies (GHz) of each mode's rotating frame.
    ///
    /// A probe at frame detuning `delta` drives mode `n` at `frame[n] + delta`.
    /// Within each connected component the first mode anchors its own
    /// resonance; every link shifts the frame by its pump frequency (or by the
    /// nominal mode splitting when no pump is given), the higher mode on top.
    pub fn frame_frequencies(&self) -> Result<Vec<f64>> {
        let dim = self.dim();
        let mut frame: Vec<Option<f64>> = vec![None; dim];
        let links = self.coupling_indices();
        for root in 0..dim {
            if frame[root].is_some() {
                continue;
            }
            frame[root] = Some(self.modes[root].nu);
            let mut queue = VecDeque::from([root]);
            while let Some(n) = queue.pop_front() {
                let f_n = frame[n].expect("visited");
                for (c, &(i, j)) in self.couplings.iter().zip(&links) {
                    let other = if i == n {
                        j
                    } else if j == n {
                        i
                    } else {
                        continue;
                    };
                    let step = c
                        .pump_nu
                        .unwrap_or_else(|| (self.modes[other].nu - self.modes[n].nu).abs());
                    let f_other = if self.modes[other].nu >= self.modes[n].nu {
                        f_n + step
                    } else {
                        f_n - step
                    };
                    match frame[other] {
                        None => {
                            frame[other] = Some(f_other);
                            queue.push_back(other);
                        }
                        Some(existing) if (existing - f_other).abs() > PUMP_TOL_GHZ => {
                            return Err(Error::InvalidLattice(format!(
                                "pump frequencies around the loop through {} do not close (mismatch {} GHz)",
                                self.modes[other].label,
                                existing - f_other
                            )));
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        Ok(frame.into_iter().map(|f| f.expect("all visited")).collect())
    }

    /// Per-mode probe frequencies (GHz) at a common frame detuning in MHz.
    pub fn probe_frequencies(&self, delta_mhz: f64) -> Result<Vec<f64>> {
        Ok(self
            .frame_frequencies()?
            .into_iter()
            .map(|f| f + delta_mhz / MHZ_PER_GHZ)
            .collect())
    }
}

/// Normalized detuning (probe - nu) / kappa + i/2 of one mode.
pub fn normalized_detuning(mode: &ModeParams, probe_nu: f64) -> Result<Complex64> {
    if !probe_nu.is_finite() || !mode.nu.is_finite() || !mode.kappa.is_finite() {
        return Err(Error::InvalidArgument(
            "normalized detuning needs finite frequencies".into(),
        ));
    }
    if mode.kappa <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "linewidth must be positive, got {}",
            mode.kappa
        )));
    }
    Ok(Complex64::new(
        (probe_nu - mode.nu) * MHZ_PER_GHZ / mode.kappa,
        0.5,
    ))
}

/// Normalized coupling g / (2 sqrt(kappa_n kappa_m)), all rates in MHz.
pub fn beta_from_g(g_mag: f64, kappa_n: f64, kappa_m: f64) -> Result<f64> {
    if !(kappa_n > 0.0 && kappa_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "linewidths must be positive, got {kappa_n} and {kappa_m}"
        )));
    }
    if !(g_mag.is_finite() && g_mag >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coupling magnitude must be nonnegative, got {g_mag}"
        )));
    }
    Ok(g_mag / (2.0 * (kappa_n * kappa_m).sqrt()))
}

/// Inverse of [`beta_from_g`].
pub fn g_from_beta(beta: f64, kappa_n: f64, kappa_m: f64) -> f64 {
    2.0 * beta * (kappa_n * kappa_m).sqrt()
}

/// Matrix of the steady-state equations of motion: normalized detunings on
/// the diagonal, normalized complex couplings off the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub entries: DMatrix<Complex64>,
    /// Frame detuning of the probe in MHz (as seen by the first mode).
    pub delta_mhz: f64,
    /// Swept loop phase in radians, without the offset.
    pub loop_phase: f64,
}

impl CouplingMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Builds the coupling matrix for one probe setting.
///
/// `probe_nu_per_mode` holds the frequency (GHz) at which each mode is
/// driven. The swept `loop_phase` plus `phi_offset` is added to the phase of
/// the designated loop link only.
pub fn build_coupling_matrix(
    spec: &LatticeSpec,
    probe_nu_per_mode: &[f64],
    loop_phase: f64,
    phi_offset: f64,
) -> Result<CouplingMatrix> {
    let dim = spec.dim();
    if probe_nu_per_mode.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: probe_nu_per_mode.len(),
        });
    }
    if !loop_phase.is_finite() || !phi_offset.is_finite() {
        return Err(Error::InvalidArgument("loop phase is not finite".into()));
    }
    let mut entries = DMatrix::<Complex64>::zeros(dim, dim);
    for (n, (mode, &probe)) in spec.modes.iter().zip(probe_nu_per_mode).enumerate() {
        entries[(n, n)] = normalized_detuning(mode, probe)?;
    }
    let loop_link = spec.loop_link();
    for (idx, c) in spec.couplings.iter().enumerate() {
        let n = spec.mode_index(&c.from).ok_or_else(|| {
            Error::InvalidLattice(format!("coupling references unknown mode {}", c.from))
        })?;
        let m = spec.mode_index(&c.to).ok_or_else(|| {
            Error::InvalidLattice(format!("coupling references unknown mode {}", c.to))
        })?;
        if n == m {
            return Err(Error::InvalidLattice(format!(
                "coupling {}-{} connects a mode to itself",
                c.from, c.to
            )));
        }
        if entries[(n, m)] != Complex64::new(0.0, 0.0) || entries[(m, n)] != Complex64::new(0.0, 0.0)
        {
            return Err(Error::InvalidLattice(format!(
                "duplicate coupling for pair {}-{}",
                c.from, c.to
            )));
        }
        let mut phase = c.phase;
        if Some(idx) == loop_link {
            phase += loop_phase + phi_offset;
        }
        let value = Complex64::from_polar(c.beta, phase);
        entries[(n, m)] = value;
        entries[(m, n)] = value.conj();
    }
    let delta_mhz = (probe_nu_per_mode[0] - spec.frame_frequencies()?[0]) * MHZ_PER_GHZ;
    Ok(CouplingMatrix {
        entries,
        delta_mhz,
        loop_phase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mode_a() -> ModeParams {
        ModeParams::new("a", 4.1589, 1.0147, 0.68).unwrap()
    }

    #[test]
    fn detuning_on_resonance_and_one_linewidth_off() {
        let a = mode_a();
        assert_eq!(
            normalized_detuning(&a, a.nu).unwrap(),
            Complex64::new(0.0, 0.5)
        );
        let d = normalized_detuning(&a, a.nu + a.kappa / MHZ_PER_GHZ).unwrap();
        assert_relative_eq!(d.re, 1.0, epsilon = 1e-10);
        assert_eq!(d.im, 0.5);
    }

    #[test]
    fn detuning_of_mode_a_one_megahertz_above() {
        // 1.0 MHz / 1.0147 MHz
        let d = normalized_detuning(&mode_a(), 4.1599).unwrap();
        assert!((d.re - 0.985_512_959_5).abs() < 1e-8, "{}", d.re);
        assert!((d.re - 0.98552).abs() < 1e-5);
        assert_eq!(d.im, 0.5);
    }

    #[test]
    fn detuning_rejects_non_finite_probe() {
        assert!(matches!(
            normalized_detuning(&mode_a(), f64::NAN),
            Err(Error::InvalidArgument(_))
        ));
        assert!(normalized_detuning(&mode_a(), f64::INFINITY).is_err());
    }

    #[test]
    fn beta_examples() {
        assert!((beta_from_g(2.9077, 1.0147, 2.9161).unwrap() - 0.8452).abs() < 1e-4);
        assert_eq!(beta_from_g(0.0, 1.0, 2.0).unwrap(), 0.0);
        let (kn, km) = (1.3f64, 4.7);
        assert_relative_eq!(
            beta_from_g(2.0 * (kn * km).sqrt(), kn, km).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(beta_from_g(1.0, 0.0, 1.0).is_err());
        assert!(beta_from_g(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn uncoupled_matrix_is_diagonal_half_i() {
        let spec = LatticeSpec::new(
            vec![
                ModeParams::new("a", 4.0, 1.0, 1.0).unwrap(),
                ModeParams::new("b", 5.0, 2.0, 0.5).unwrap(),
                ModeParams::new("c", 6.0, 3.0, 0.2).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let m = build_coupling_matrix(&spec, &[4.0, 5.0, 6.0], 0.3, 0.0).unwrap();
        assert_eq!(
            m.entries,
            DMatrix::from_diagonal_element(3, 3, Complex64::new(0.0, 0.5))
        );
    }

    #[test]
    fn two_mode_matrix_by_hand() {
        let spec = LatticeSpec::new(
            vec![
                ModeParams::new("a", 4.0, 1.0, 1.0).unwrap(),
                ModeParams::new("b", 5.0, 1.0, 1.0).unwrap(),
            ],
            vec![CouplingSpec::new("a", "b", 0.5)],
        )
        .unwrap();
        let m = build_coupling_matrix(&spec, &[4.0, 5.0], 0.0, 0.0).unwrap();
        let half = Complex64::new(0.5, 0.0);
        let diag = Complex64::new(0.0, 0.5);
        assert_eq!(m.entries, DMatrix::from_row_slice(2, 2, &[diag, half, half, diag]));
    }

    #[test]
    fn loop_phase_lands_on_the_a_c_link() {
        let spec = presets::full_lattice();
        let probes = spec.probe_frequencies(0.0).unwrap();
        let m = build_coupling_matrix(&spec, &probes, PI, 0.0).unwrap();
        let ac = m.entries[(0, 2)];
        assert_relative_eq!(ac.re, -0.8452, epsilon = 1e-12);
        assert!(ac.im.abs() < 1e-12);
        assert_eq!(m.entries[(2, 0)], ac.conj());
        // other links keep their real value
        assert_eq!(m.entries[(0, 3)], Complex64::new(0.8601, 0.0));
        for n in 0..4 {
            assert_eq!(m.entries[(n, n)].im, 0.5);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let a = ModeParams::new("a", 4.0, 1.0, 1.0).unwrap();
        let b = ModeParams::new("b", 5.0, 1.0, 1.0).unwrap();
        assert!(LatticeSpec::new(vec![a.clone(), a.clone()], vec![]).is_err());
        assert!(LatticeSpec::new(
            vec![a.clone(), b.clone()],
            vec![CouplingSpec::new("a", "b", 0.1), CouplingSpec::new("b", "a", 0.1)]
        )
        .is_err());
        assert!(LatticeSpec::new(
            vec![a.clone(), b.clone()],
            vec![CouplingSpec::new("a", "z", 0.1)]
        )
        .is_err());
        // 2 MHz pump mismatch
        assert!(LatticeSpec::new(
            vec![a.clone(), b.clone()],
            vec![CouplingSpec::new("a", "b", 0.1).with_pump(1.002)]
        )
        .is_err());
        assert!(LatticeSpec::new(
            vec![a.clone(), b.clone()],
            vec![CouplingSpec::new("a", "b", 0.1).with_pump(1.0005)]
        )
        .is_ok());
        assert!(ModeParams::new("x", 4.0, 0.0, 0.5).is_err());
        assert!(ModeParams::new("x", 4.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = presets::full_lattice();
        assert!(matches!(
            build_coupling_matrix(&spec, &[4.0, 5.0], 0.0, 0.0),
            Err(Error::DimensionMismatch { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn json_config_round_trip_and_strictness() {
        let spec = presets::full_lattice();
        let text = spec.to_json_string().unwrap();
        assert!(text.contains("\"nu_GHz\""));
        assert!(text.contains("\"pump_nu_GHz\""));
        assert_eq!(LatticeSpec::from_json_str(&text).unwrap(), spec);
        let bad = r#"{"modes":[{"label":"a","nu_GHz":4.0,"kappa_MHz":1.0,"eta":0.5,"q":1}],"couplings":[]}"#;
        assert!(LatticeSpec::from_json_str(bad).is_err());
    }

    #[test]
    fn frame_follows_pumps() {
        let spec = presets::full_lattice();
        let frame = spec.frame_frequencies().unwrap();
        assert_eq!(frame[0], 4.1589);
        assert_relative_eq!(frame[2], 4.1589 + 3.3136, epsilon = 1e-12);
        assert_relative_eq!(frame[3], 4.1589 + 5.3223, epsilon = 1e-12);
        assert_relative_eq!(frame[1], 4.1589 + 3.3136 - 1.3733, epsilon = 1e-12);
    }

    fn arb_spec() -> impl Strategy<Value = LatticeSpec> {
        (
            prop::collection::vec((0.2f64..5.0, 0.0f64..1.0), 4),
            prop::collection::vec((0.0f64..2.0, -PI..PI), 4),
        )
            .prop_map(|(modes, links)| {
                let labels = ["a", "b", "c", "d"];
                let modes = modes
                    .iter()
                    .enumerate()
                    .map(|(i, &(kappa, eta))| {
                        ModeParams::new(labels[i], 4.0 + 1.5 * i as f64, kappa, eta).unwrap()
                    })
                    .collect();
                let pairs = [("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")];
                let couplings = pairs
                    .iter()
                    .zip(links)
                    .map(|(&(f, t), (beta, phase))| CouplingSpec::new(f, t, beta).with_phase(phase))
                    .collect();
                LatticeSpec::new(modes, couplings).unwrap()
            })
    }

    proptest! {
        #[test]
        fn off_diagonal_part_is_hermitian(spec in arb_spec(), delta in -20.0f64..20.0, phi in -10.0f64..10.0) {
            let probes = spec.probe_frequencies(delta).unwrap();
            let m = build_coupling_matrix(&spec, &probes, phi, 0.17).unwrap();
            for n in 0..4 {
                prop_assert_eq!(m.entries[(n, n)].im, 0.5);
                for k in 0..4 {
                    if n != k {
                        prop_assert_eq!(m.entries[(n, k)], m.entries[(k, n)].conj());
                    }
                }
            }
        }

        #[test]
        fn loop_phase_is_two_pi_periodic(spec in arb_spec(), delta in -20.0f64..20.0, phi in -10.0f64..10.0) {
            let probes = spec.probe_frequencies(delta).unwrap();
            let m1 = build_coupling_matrix(&spec, &probes, phi, 0.0).unwrap();
            let m2 = build_coupling_matrix(&spec, &probes, phi + 2.0 * PI, 0.0).unwrap();
            prop_assert!((m1.entries - m2.entries).iter().all(|z| z.norm() < 1e-12));
        }

        #[test]
        fn beta_g_round_trip(beta in 0.0f64..10.0, kn in 0.01f64..100.0, km in 0.01f64..100.0) {
            let back = beta_from_g(g_from_beta(beta, kn, km), kn, km).unwrap();
            prop_assert!((back - beta).abs() <= 1e-12 * beta.max(f64::MIN_POSITIVE));
        }
    }
}
