//! Parameter sets of the four-mode parametric-cavity device (nodes a, b, c,
//! d; links a-c, a-d, b-c, b-d) and the ideal strong-coupling plaquette.

use crate::lattice::{CouplingSpec, LatticeSpec, ModeParams};

pub const LABELS: [&str; 4] = ["a", "b", "c", "d"];

/// Links of the plaquette, in parameter order.
pub const LINKS: [(&str, &str); 4] = [("a", "c"), ("a", "d"), ("b", "c"), ("b", "d")];

/// Pump frequencies (GHz) of the four links.
pub const PUMP_NU_GHZ: [f64; 4] = [3.3136, 5.3223, 1.3733, 3.382];

/// Full-lattice mode frequencies (GHz).
pub const FULL_NU_GHZ: [f64; 4] = [4.1589, 6.0992, 7.4726, 9.4806];
/// Full-lattice linewidths (MHz).
pub const FULL_KAPPA_MHZ: [f64; 4] = [1.0147, 1.6533, 2.9161, 4.5858];
pub const FULL_ETA: [f64; 4] = [0.68, 0.74, 0.88, 0.76];
pub const FULL_BETA: [f64; 4] = [0.8452, 0.8601, 0.7964, 1.0252];

/// Coupling magnitudes |g|/2π (MHz) of the four links.
pub const FULL_G_MHZ: [f64; 4] = [2.9077, 3.7107, 3.4973, 5.6458];
/// External loss rates (MHz).
pub const FULL_KAPPA_EXT_MHZ: [f64; 4] = [0.690, 1.223, 2.566, 3.485];

/// Pairwise (one pump at a time) estimates, used as initial guesses.
pub const PAIRWISE_NU_GHZ: [f64; 4] = [4.1578, 6.0979, 7.4719, 9.4802];
pub const PAIRWISE_KAPPA_MHZ: [f64; 4] = [1.0745, 1.6298, 2.8179, 4.1049];
pub const PAIRWISE_ETA: [f64; 4] = [0.46, 0.62, 0.86, 0.74];
pub const PAIRWISE_G_MHZ: [f64; 4] = [2.9795, 3.1395, 3.6815, 4.6560];
pub const PAIRWISE_BETA: [f64; 4] = [0.8561, 0.7474, 0.8589, 0.9000];

/// Transmission scale factors C_nm, row = output node n, column = input
/// node m. Diagonal entries are 1 by definition.
pub const SCALE_FACTORS: [[f64; 4]; 4] = [
    [1.0, 19.1, 20.1, 20.1],
    [5.8, 1.0, 9.5, 10.3],
    [8.4, 12.8, 1.0, 14.3],
    [4.3, 7.2, 7.2, 1.0],
];

fn device_lattice(nu: &[f64; 4], kappa: &[f64; 4], eta: &[f64; 4], beta: &[f64; 4]) -> LatticeSpec {
    let modes = (0..4)
        .map(|i| ModeParams::new(LABELS[i], nu[i], kappa[i], eta[i]).expect("valid preset"))
        .collect();
    let couplings = LINKS
        .iter()
        .zip(beta)
        .zip(PUMP_NU_GHZ)
        .enumerate()
        .map(|(i, ((&(from, to), &b), pump))| {
            let c = CouplingSpec::new(from, to, b).with_pump(pump);
            if i == 0 {
                c.with_loop_phase()
            } else {
                c
            }
        })
        .collect();
    LatticeSpec::new(modes, couplings).expect("valid preset")
}

/// The reconstructed full four-node lattice.
pub fn full_lattice() -> LatticeSpec {
    device_lattice(&FULL_NU_GHZ, &FULL_KAPPA_MHZ, &FULL_ETA, &FULL_BETA)
}

/// The lattice assembled from the pairwise estimates.
pub fn pairwise_lattice() -> LatticeSpec {
    device_lattice(
        &PAIRWISE_NU_GHZ,
        &PAIRWISE_KAPPA_MHZ,
        &PAIRWISE_ETA,
        &PAIRWISE_BETA,
    )
}

/// Two-mode lattice of a single link taken from the pairwise estimates.
pub fn pairwise_link(link: usize) -> LatticeSpec {
    let (from, to) = LINKS[link];
    let idx = |l: &str| LABELS.iter().position(|&x| x == l).expect("known label");
    let (n, m) = (idx(from), idx(to));
    let modes = [n, m]
        .iter()
        .map(|&i| {
            ModeParams::new(
                LABELS[i],
                PAIRWISE_NU_GHZ[i],
                PAIRWISE_KAPPA_MHZ[i],
                PAIRWISE_ETA[i],
            )
            .expect("valid preset")
        })
        .collect();
    let coupling = CouplingSpec::new(from, to, PAIRWISE_BETA[link])
        .with_pump(PUMP_NU_GHZ[link])
        .with_loop_phase();
    LatticeSpec::new(modes, vec![coupling]).expect("valid preset")
}

/// The strong-coupling plaquette: equal linewidths, no internal loss and
/// equal real couplings on all four links.
pub fn strong_coupling_plaquette(beta: f64) -> LatticeSpec {
    let modes = LABELS
        .iter()
        .enumerate()
        .map(|(i, &l)| ModeParams::new(l, 5.0 + i as f64, 1.0, 1.0).expect("valid preset"))
        .collect();
    let couplings = LINKS
        .iter()
        .enumerate()
        .map(|(i, &(from, to))| {
            let c = CouplingSpec::new(from, to, beta);
            if i == 0 {
                c.with_loop_phase()
            } else {
                c
            }
        })
        .collect();
    LatticeSpec::new(modes, couplings).expect("valid preset")
}
