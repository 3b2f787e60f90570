use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

/// Lower bound applied to beta before the log transform.
pub const BETA_FLOOR: f64 = 1.0e-6;

/// Coupling efficiencies are clamped this far inside [0, 1] before the
/// logistic transform.
pub const ETA_MARGIN: f64 = 1.0e-9;

/// Every adjustable quantity of the scattering model over a fixed topology.
///
/// `scale` is the square matrix of transmission scale factors (row = output
/// node); its diagonal is fixed at 1 and is not a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    /// GHz.
    pub nu: Vec<f64>,
    /// MHz.
    pub kappa: Vec<f64>,
    pub eta: Vec<f64>,
    /// One entry per link, in declaration order.
    pub beta: Vec<f64>,
    /// Radians, added to the loop link together with the swept loop phase.
    pub phi_off: f64,
    pub scale: Vec<Vec<f64>>,
}

/// Which block a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Nu,
    Kappa,
    Eta,
    Beta,
    PhiOff,
    Scale,
}

impl FitParams {
    /// Mode and link values taken from `spec`, unit scale factors.
    pub fn from_spec(spec: &LatticeSpec, phi_off: f64) -> Self {
        let dim = spec.dim();
        Self {
            nu: spec.modes.iter().map(|m| m.nu).collect(),
            kappa: spec.modes.iter().map(|m| m.kappa).collect(),
            eta: spec.modes.iter().map(|m| m.eta).collect(),
            beta: spec.couplings.iter().map(|c| c.beta).collect(),
            phi_off,
            scale: vec![vec![1.0; dim]; dim],
        }
    }

    pub fn with_scale(mut self, scale: Vec<Vec<f64>>) -> Result<Self> {
        self.scale = scale;
        for (n, row) in self.scale.iter_mut().enumerate() {
            if let Some(c) = row.get_mut(n) {
                *c = 1.0;
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn num_links(&self) -> usize {
        self.beta.len()
    }

    /// 3 per mode, 1 per link, the phase offset and every off-diagonal scale.
    pub fn num_params(&self) -> usize {
        let d = self.dim();
        3 * d + self.num_links() + 1 + d * (d - 1)
    }

    /// Checks lengths against `spec` and the parameter bounds.
    pub fn check_against(&self, spec: &LatticeSpec) -> Result<()> {
        if self.dim() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: self.dim(),
            });
        }
        if self.num_links() != spec.couplings.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.couplings.len(),
                got: self.num_links(),
            });
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.kappa.len() != d || self.eta.len() != d {
            return Err(Error::InvalidArgument(
                "per-mode parameter vectors differ in length".into(),
            ));
        }
        if self.scale.len() != d || self.scale.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "scale factors must form a {d}x{d} matrix"
            )));
        }
        if self.nu.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("frequencies must be positive".into()));
        }
        if self.kappa.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("linewidths must be positive".into()));
        }
        if self.eta.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "coupling efficiencies must lie in [0, 1]".into(),
            ));
        }
        if self.beta.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("beta must be nonnegative".into()));
        }
        if !self.phi_off.is_finite() {
            return Err(Error::InvalidArgument("phase offset is not finite".into()));
        }
        for (n, row) in self.scale.iter().enumerate() {
            for (m, &c) in row.iter().enumerate() {
                if n == m {
                    if c != 1.0 {
                        return Err(Error::InvalidArgument(
                            "diagonal scale factors are fixed at 1".into(),
                        ));
                    }
                } else if !(c.is_finite() && c > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "scale factor ({n}, {m}) must be positive, got {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy of `spec` carrying these mode and link values. No validation, so
    /// it is cheap enough for the residual loop.
    pub fn apply(&self, spec: &LatticeSpec) -> LatticeSpec {
        let mut out = spec.clone();
        for (i, mode) in out.modes.iter_mut().enumerate() {
            mode.nu = self.nu[i];
            mode.kappa = self.kappa[i];
            mode.eta = self.eta[i];
        }
        for (c, &b) in out.couplings.iter_mut().zip(&self.beta) {
            c.beta = b;
        }
        out
    }

    /// Block and in-block position of every parameter, in vector order:
    /// nu, kappa, eta (per mode), beta (per link), phi_off, then the
    /// off-diagonal scales row-major.
    pub fn layout(&self) -> Vec<(ParamKind, usize)> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.num_params());
        for kind in [ParamKind::Nu, ParamKind::Kappa, ParamKind::Eta] {
            out.extend((0..d).map(|i| (kind, i)));
        }
        out.extend((0..self.num_links()).map(|i| (ParamKind::Beta, i)));
        out.push((ParamKind::PhiOff, 0));
        for n in 0..d {
            for m in 0..d {
                if n != m {
                    out.push((ParamKind::Scale, n * d + m));
                }
            }
        }
        out
    }

    /// Parameter names such as `nu_a`, `beta_ac`, `phi_off`, `C_ab`.
    pub fn names(&self, spec: &LatticeSpec) -> Vec<String> {
        let labels = spec.labels();
        let d = self.dim();
        let join = |x: &str, y: &str| {
            if x.chars().count() == 1 && y.chars().count() == 1 {
                format!("{x}{y}")
            } else {
                format!("{x},{y}")
            }
        };
        self.layout()
            .into_iter()
            .map(|(kind, i)| match kind {
                ParamKind::Nu => format!("nu_{}", labels[i]),
                ParamKind::Kappa => format!("kappa_{}", labels[i]),
                ParamKind::Eta => format!("eta_{}", labels[i]),
                ParamKind::Beta => {
                    let c = &spec.couplings[i];
                    format!("beta_{}", join(&c.from, &c.to))
                }
                ParamKind::PhiOff => "phi_off".to_string(),
                ParamKind::Scale => format!("C_{}", join(labels[i / d], labels[i % d])),
            })
            .collect()
    }

    /// Physical values in vector order.
    pub fn to_vec(&self) -> Vec<f64> {
        let d = self.dim();
        self.layout()
            .into_iter()
            .map(|(kind, i)| match kind {
                ParamKind::Nu => self.nu[i],
                ParamKind::Kappa => self.kappa[i],
                ParamKind::Eta => self.eta[i],
                ParamKind::Beta => self.beta[i],
                ParamKind::PhiOff => self.phi_off,
                ParamKind::Scale => self.scale[i / d][i % d],
            })
            .collect()
    }

    /// Inverse of [`FitParams::to_vec`] using `self` for the shape.
    pub fn with_vec(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: values.len(),
            });
        }
        let d = self.dim();
        let mut out = self.clone();
        for ((kind, i), &v) in self.layout().into_iter().zip(values) {
            match kind {
                ParamKind::Nu => out.nu[i] = v,
                ParamKind::Kappa => out.kappa[i] = v,
                ParamKind::Eta => out.eta[i] = v,
                ParamKind::Beta => out.beta[i] = v,
                ParamKind::PhiOff => out.phi_off = v,
                ParamKind::Scale => out.scale[i / d][i % d] = v,
            }
        }
        Ok(out)
    }

    /// Unconstrained coordinates used by the optimizer.
    pub fn to_internal(&self) -> Vec<f64> {
        self.layout()
            .into_iter()
            .zip(self.to_vec())
            .map(|((kind, _), v)| to_internal(kind, v))
            .collect()
    }

    pub fn with_internal(&self, u: &[f64]) -> Result<Self> {
        let values: Vec<f64> = self
            .layout()
            .into_iter()
            .zip(u)
            .map(|((kind, _), &x)| from_internal(kind, x))
            .collect();
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: u.len(),
            });
        }
        self.with_vec(&values)
    }

    /// d(physical)/d(internal) at the current values.
    pub fn internal_derivatives(&self) -> Vec<f64> {
        self.layout()
            .into_iter()
            .zip(self.to_vec())
            .map(|((kind, _), v)| match kind {
                ParamKind::Nu | ParamKind::PhiOff => 1.0,
                ParamKind::Kappa | ParamKind::Scale => v,
                ParamKind::Beta => v.max(BETA_FLOOR),
                ParamKind::Eta => {
                    let e = v.clamp(ETA_MARGIN, 1.0 - ETA_MARGIN);
                    e * (1.0 - e)
                }
            })
            .collect()
    }
}

fn to_internal(kind: ParamKind, v: f64) -> f64 {
    match kind {
        ParamKind::Nu | ParamKind::PhiOff => v,
        ParamKind::Kappa | ParamKind::Scale => v.ln(),
        ParamKind::Beta => v.max(BETA_FLOOR).ln(),
        ParamKind::Eta => {
            let e = v.clamp(ETA_MARGIN, 1.0 - ETA_MARGIN);
            (e / (1.0 - e)).ln()
        }
    }
}

fn from_internal(kind: ParamKind, x: f64) -> f64 {
    match kind {
        ParamKind::Nu | ParamKind::PhiOff => x,
        ParamKind::Kappa | ParamKind::Scale | ParamKind::Beta => x.exp(),
        ParamKind::Eta => 1.0 / (1.0 + (-x).exp()),
    }
}

/// Per-parameter freeze flags; `true` means the parameter is held fixed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeMask {
    pub frozen: Vec<bool>,
}

impl FreezeMask {
    pub fn all_free(n: usize) -> Self {
        Self {
            frozen: vec![false; n],
        }
    }

    /// Mode frequencies, linewidths and efficiencies frozen.
    pub fn modes_frozen(fp: &FitParams) -> Self {
        Self {
            frozen: fp
                .layout()
                .into_iter()
                .map(|(k, _)| matches!(k, ParamKind::Nu | ParamKind::Kappa | ParamKind::Eta))
                .collect(),
        }
    }

    pub fn freeze_kind(&mut self, fp: &FitParams, kind: ParamKind) {
        for (flag, (k, _)) in self.frozen.iter_mut().zip(fp.layout()) {
            if k == kind {
                *flag = true;
            }
        }
    }

    pub fn num_free(&self) -> usize {
        self.frozen.iter().filter(|f| !**f).count()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.frozen.len()).filter(|&i| !self.frozen[i]).collect()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.frozen.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.frozen.len(),
            });
        }
        if self.num_free() == 0 {
            return Err(Error::InvalidArgument("every parameter is frozen".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn table_one() -> FitParams {
        FitParams::from_spec(&presets::full_lattice(), 0.4)
            .with_scale(presets::SCALE_FACTORS.iter().map(|r| r.to_vec()).collect())
            .unwrap()
    }

    #[test]
    fn device_has_29_parameters() {
        let fp = table_one();
        assert_eq!(fp.num_params(), 29);
        let names = fp.names(&presets::full_lattice());
        assert_eq!(names.len(), 29);
        assert_eq!(names[0], "nu_a");
        assert_eq!(names[12], "beta_ac");
        assert_eq!(names[16], "phi_off");
        assert_eq!(names[17], "C_ab");
        assert_eq!(names[28], "C_dc");
    }

    #[test]
    fn vector_round_trip() {
        let fp = table_one();
        let back = fp.with_vec(&fp.to_vec()).unwrap();
        assert_eq!(back, fp);
        assert!(fp.with_vec(&[1.0]).is_err());
    }

    #[test]
    fn internal_round_trip() {
        let fp = table_one();
        let back = fp.with_internal(&fp.to_internal()).unwrap();
        for (a, b) in back.to_vec().iter().zip(fp.to_vec()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn beta_floor_and_eta_clamp() {
        let mut fp = table_one();
        fp.beta[0] = 0.0;
        fp.eta[0] = 1.0;
        let back = fp.with_internal(&fp.to_internal()).unwrap();
        assert!((back.beta[0] - BETA_FLOOR).abs() < 1e-18);
        assert!(back.eta[0] < 1.0 && back.eta[0] > 1.0 - 2.0 * ETA_MARGIN);
    }

    #[test]
    fn validation() {
        let mut fp = table_one();
        fp.scale[0][0] = 2.0;
        assert!(fp.validate().is_err());
        let mut fp = table_one();
        fp.kappa[1] = -1.0;
        assert!(fp.validate().is_err());
        let mut fp = table_one();
        fp.scale[1][2] = 0.0;
        assert!(fp.validate().is_err());
        assert!(table_one().check_against(&presets::pairwise_link(0)).is_err());
    }

    #[test]
    fn stage_one_mask() {
        let fp = table_one();
        let mask = FreezeMask::modes_frozen(&fp);
        assert_eq!(mask.num_free(), 17);
        assert!(mask.frozen[..12].iter().all(|f| *f));
        assert!(FreezeMask { frozen: vec![true; 29] }.validate(29).is_err());
    }

    #[test]
    fn apply_keeps_topology() {
        let mut fp = table_one();
        fp.beta[2] = 0.5;
        fp.nu[3] = 9.5;
        let spec = fp.apply(&presets::full_lattice());
        assert_eq!(spec.couplings[2].beta, 0.5);
        assert_eq!(spec.modes[3].nu, 9.5);
        assert_eq!(spec.couplings[0].pump_nu, presets::full_lattice().couplings[0].pump_nu);
    }

    proptest! {
        #[test]
        fn transforms_invert(k in 0.01f64..100.0, e in 0.001f64..0.999, b in 1e-5f64..10.0, c in 0.01f64..100.0) {
            let mut fp = table_one();
            fp.kappa[0] = k;
            fp.eta[1] = e;
            fp.beta[2] = b;
            fp.scale[0][1] = c;
            let back = fp.with_internal(&fp.to_internal()).unwrap();
            prop_assert!((back.kappa[0] - k).abs() <= 1e-12 * k);
            prop_assert!((back.eta[1] - e).abs() <= 1e-12);
            prop_assert!((back.beta[2] - b).abs() <= 1e-12 * b);
            prop_assert!((back.scale[0][1] - c).abs() <= 1e-12 * c);
        }
    }
}
