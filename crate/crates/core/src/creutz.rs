//! Creutz ladder: Bloch bands, discrete symmetries, Wannier centers, the
//! Zak phase, and single-excitation dynamics on one plaquette.
//!
//! Ladder Hamiltonian (hbar = 1):
//!
//! ```text
//! H = -sum_n [ t_d (b_n^+ a_{n+1} + a_n^+ b_{n+1})
//!            + t_v/2 (b_n^+ a_n + a_{n+1}^+ b_{n+1})
//!            + t_h e^{i phi/2} (a_{n+1}^+ a_n + b_n^+ b_{n+1}) ] + h.c.
//! ```
//!
//! Orbitals are ordered (a, b) within a cell and cells are numbered from 1,
//! so the single plaquette basis is (a1, b1, a2, b2).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Hopping rates and loop phase per plaquette.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreutzParams {
    pub t_d: f64,
    pub t_v: f64,
    pub t_h: f64,
    pub phi: f64,
}

impl CreutzParams {
    pub fn new(t_d: f64, t_v: f64, t_h: f64, phi: f64) -> Result<Self> {
        let p = Self { t_d, t_v, t_h, phi };
        p.validate()?;
        Ok(p)
    }

    /// Flat-band point t_d = t_h = 1, t_v = 0, phi = pi.
    pub fn strong_coupling() -> Self {
        Self {
            t_d: 1.0,
            t_v: 0.0,
            t_h: 1.0,
            phi: PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.t_d, self.t_v, self.t_h];
        if rates.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "hopping rates must be nonnegative, got {rates:?}"
            )));
        }
        if !self.phi.is_finite() {
            return Err(Error::InvalidArgument("loop phase is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochHamiltonian {
    pub k: f64,
    pub h: Matrix2<Complex64>,
}

/// Momentum-space Hamiltonian over the (a, b) orbitals, both placed at the
/// cell origin (periodic gauge).
pub fn bloch_hamiltonian(p: &CreutzParams, k: f64) -> BlochHamiltonian {
    let aa = -2.0 * p.t_h * (k - p.phi / 2.0).cos();
    let bb = -2.0 * p.t_h * (k + p.phi / 2.0).cos();
    let ab = -(2.0 * p.t_d * k.cos() + p.t_v);
    BlochHamiltonian {
        k,
        h: Matrix2::new(
            Complex64::new(aa, 0.0),
            Complex64::new(ab, 0.0),
            Complex64::new(ab, 0.0),
            Complex64::new(bb, 0.0),
        ),
    }
}

/// Eigenvalues of a 2x2 Hermitian matrix, ascending.
fn hermitian_2x2_eigenvalues(h: &Matrix2<Complex64>) -> [f64; 2] {
    let (p, r) = (h[(0, 0)].re, h[(1, 1)].re);
    let mean = 0.5 * (p + r);
    let radius = (0.25 * (p - r) * (p - r) + h[(0, 1)].norm_sqr()).sqrt();
    [mean - radius, mean + radius]
}

/// Normalized eigenvector of a 2x2 Hermitian matrix for eigenvalue `lambda`.
fn hermitian_2x2_eigenvector(h: &Matrix2<Complex64>, lambda: f64) -> [Complex64; 2] {
    // rows of (h - lambda) are orthogonal to the eigenvector
    let r0 = [h[(0, 0)] - lambda, h[(0, 1)]];
    let r1 = [h[(1, 0)], h[(1, 1)] - lambda];
    let row = if r0[0].norm_sqr() + r0[1].norm_sqr() >= r1[0].norm_sqr() + r1[1].norm_sqr() {
        r0
    } else {
        r1
    };
    let v = [-row[1], row[0]];
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if norm == 0.0 {
        // h is proportional to the identity
        return [ONE, ZERO];
    }
    [v[0] / norm, v[1] / norm]
}

fn check_k_grid(k_grid: &[f64]) -> Result<()> {
    if k_grid.is_empty() {
        return Err(Error::InvalidArgument("k grid is empty".into()));
    }
    if let Some(k) = k_grid
        .iter()
        .find(|k| !k.is_finite() || **k <= -PI || **k > PI + 1e-12)
    {
        return Err(Error::InvalidArgument(format!(
            "quasimomentum {k} outside (-pi, pi]"
        )));
    }
    Ok(())
}

/// Uniform grid of `n` points over (-pi, pi], ending at pi.
pub fn brillouin_grid(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|j| -PI + 2.0 * PI * j as f64 / n as f64)
        .collect()
}

/// Lower and upper band energy at every k.
pub fn band_structure(p: &CreutzParams, k_grid: &[f64]) -> Result<Vec<[f64; 2]>> {
    p.validate()?;
    check_k_grid(k_grid)?;
    Ok(k_grid
        .iter()
        .map(|&k| hermitian_2x2_eigenvalues(&bloch_hamiltonian(p, k).h))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryKind {
    /// sigma_x h_k sigma_x = h_{-k}
    TimeReversal,
    /// sigma_z h_k sigma_z = -h_{-k}
    ChargeConjugation,
    /// sigma_y h_k sigma_y = -h_k
    Chiral,
}

impl SymmetryKind {
    pub const ALL: [SymmetryKind; 3] = [
        SymmetryKind::TimeReversal,
        SymmetryKind::ChargeConjugation,
        SymmetryKind::Chiral,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            SymmetryKind::TimeReversal => "TR",
            SymmetryKind::ChargeConjugation => "C",
            SymmetryKind::Chiral => "S",
        }
    }
}

fn pauli_x() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

fn pauli_y() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

fn pauli_z() -> Matrix2<Complex64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Operator-norm violation of one symmetry relation at a single k.
pub fn symmetry_deviation_at(p: &CreutzParams, kind: SymmetryKind, k: f64) -> f64 {
    let h = bloch_hamiltonian(p, k).h;
    let h_minus = bloch_hamiltonian(p, -k).h;
    let diff = match kind {
        SymmetryKind::TimeReversal => pauli_x() * h * pauli_x() - h_minus,
        SymmetryKind::ChargeConjugation => pauli_z() * h * pauli_z() + h_minus,
        SymmetryKind::Chiral => pauli_y() * h * pauli_y() + h,
    };
    // diff is Hermitian: its operator norm is its largest |eigenvalue|
    let [lo, hi] = hermitian_2x2_eigenvalues(&diff);
    lo.abs().max(hi.abs())
}

/// Largest violation of a symmetry relation over a k grid closed under k -> -k.
pub fn check_symmetry(p: &CreutzParams, kind: SymmetryKind, k_grid: &[f64]) -> Result<f64> {
    p.validate()?;
    check_k_grid(k_grid)?;
    for &k in k_grid {
        let has_partner = k_grid
            .iter()
            .any(|&q| wrap_angle(k + q).abs() < 1e-12 || (wrap_angle(k + q).abs() - 2.0 * PI).abs() < 1e-12);
        if !has_partner {
            return Err(Error::InvalidArgument(format!(
                "k grid is not symmetric: {k} has no partner at {}",
                -k
            )));
        }
    }
    Ok(k_grid
        .iter()
        .map(|&k| symmetry_deviation_at(p, kind, k))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Single-particle ladder Hamiltonian over `cells` cells, basis
/// (a_1, b_1, a_2, b_2, ...). Open ladders keep every term whose sites exist.
pub fn ladder_hamiltonian(p: &CreutzParams, cells: usize, boundary: Boundary) -> DMatrix<Complex64> {
    let dim = 2 * cells;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let a = |n: usize| 2 * (n % cells);
    let b = |n: usize| 2 * (n % cells) + 1;
    // adds -c x_i^+ x_j + h.c.
    let mut hop = |i: usize, j: usize, c: Complex64| {
        h[(i, j)] -= c;
        h[(j, i)] -= c.conj();
    };
    let horizontal = Complex64::from_polar(p.t_h, p.phi / 2.0);
    let bonds = match boundary {
        Boundary::Open => cells.saturating_sub(1),
        Boundary::Periodic => cells,
    };
    for n in 0..bonds {
        hop(b(n), a(n + 1), Complex64::new(p.t_d, 0.0));
        hop(a(n), b(n + 1), Complex64::new(p.t_d, 0.0));
        hop(a(n + 1), a(n), horizontal);
        hop(b(n), b(n + 1), horizontal);
    }
    // each rung collects t_v/2 from b_n^+ a_n and t_v/2 from a_n^+ b_n
    for n in 0..cells {
        hop(b(n), a(n), Complex64::new(p.t_v, 0.0));
    }
    h
}

/// Single-particle ket of the lower flat-band Wannier state centred between
/// cells `n` and `n + 1` of an open ladder of `cells` cells.
///
/// The amplitudes match the strong-coupling ladder in the orientation of
/// [`plaquette_hamiltonian`], i.e. [`ladder_hamiltonian`] at
/// `t_d = t_h = 1, t_v = 0, phi = -pi` (flux pi).
pub fn lower_wannier_state(cells: usize, n: usize) -> Result<DVector<Complex64>> {
    if cells < 2 || n < 1 || n >= cells {
        return Err(Error::InvalidArgument(format!(
            "Wannier index {n} outside 1..={} for a ladder of {cells} cells",
            cells.saturating_sub(1)
        )));
    }
    let e = Complex64::from_polar(0.5, FRAC_PI_4);
    let mut v = DVector::<Complex64>::zeros(2 * cells);
    let a = |cell: usize| 2 * (cell - 1);
    let b = |cell: usize| 2 * (cell - 1) + 1;
    v[a(n + 1)] = -e.conj();
    v[b(n)] = -e.conj();
    v[a(n)] = -e;
    v[b(n + 1)] = -e;
    Ok(v)
}

/// Strong-coupling ladder in the orientation of the Wannier kets.
pub fn wannier_ladder_params() -> CreutzParams {
    CreutzParams {
        phi: -PI,
        ..CreutzParams::strong_coupling()
    }
}

/// Expectation of the cell position operator sum_n n (a_n^+ a_n + b_n^+ b_n)
/// in a ladder state (cells numbered from 1).
pub fn ladder_position(state: &DVector<Complex64>) -> f64 {
    let norm = state.norm_squared();
    state
        .iter()
        .enumerate()
        .map(|(i, z)| (i / 2 + 1) as f64 * z.norm_sqr())
        .sum::<f64>()
        / norm
}

/// Position expectation of the lower-band Wannier state between cells `n`
/// and `n + 1` of an open ladder with `cells` cells.
pub fn wannier_center(cells: usize, n: usize) -> Result<f64> {
    Ok(ladder_position(&lower_wannier_state(cells, n)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Lower,
    Upper,
}

/// Smallest band gap tolerated by [`zak_phase`].
pub const MIN_GAP: f64 = 1.0e-9;

/// Zak phase of one band from a discrete Wilson loop over `k_points` uniform
/// momenta, in (-pi, pi].
pub fn zak_phase(p: &CreutzParams, band: Band, k_points: usize) -> Result<f64> {
    p.validate()?;
    if k_points < 100 {
        return Err(Error::InvalidArgument(format!(
            "Wilson loop needs at least 100 k points, got {k_points}"
        )));
    }
    let states: Vec<[Complex64; 2]> = (0..k_points)
        .map(|j| {
            let k = -PI + 2.0 * PI * j as f64 / k_points as f64;
            let h = bloch_hamiltonian(p, k).h;
            let [lo, hi] = hermitian_2x2_eigenvalues(&h);
            if hi - lo < MIN_GAP {
                return Err(Error::DegenerateBand { gap: hi - lo, k });
            }
            let lambda = match band {
                Band::Lower => lo,
                Band::Upper => hi,
            };
            Ok(hermitian_2x2_eigenvector(&h, lambda))
        })
        .collect::<Result<_>>()?;
    let mut product = ONE;
    for j in 0..k_points {
        let u = &states[j];
        let w = &states[(j + 1) % k_points];
        let overlap = u[0].conj() * w[0] + u[1].conj() * w[1];
        product *= overlap / overlap.norm();
    }
    let phase = -product.arg();
    Ok(if phase <= -PI + 1e-12 { PI } else { wrap_angle(phase) })
}

/// The four plaquette sites in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaquetteNode {
    A1 = 0,
    B1 = 1,
    A2 = 2,
    B2 = 3,
}

impl PlaquetteNode {
    pub const ALL: [PlaquetteNode; 4] = [
        PlaquetteNode::A1,
        PlaquetteNode::B1,
        PlaquetteNode::A2,
        PlaquetteNode::B2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Rung (cell) number, 1 or 2.
    pub fn cell(self) -> usize {
        self.index() / 2 + 1
    }
}

/// Single-plaquette Hamiltonian
/// `-(b1^+ a2 + a1^+ b2 + i a1^+ a2 + i b2^+ b1 + h.c.)` over (a1, b1, a2, b2).
pub fn plaquette_hamiltonian() -> Matrix4<Complex64> {
    use PlaquetteNode::*;
    let mut h = Matrix4::<Complex64>::zeros();
    let mut term = |i: PlaquetteNode, j: PlaquetteNode, c: Complex64| {
        h[(i.index(), j.index())] -= c;
        h[(j.index(), i.index())] -= c.conj();
    };
    term(B1, A2, ONE);
    term(A1, B2, ONE);
    term(A1, A2, I);
    term(B2, B1, I);
    h
}

struct PlaquetteEigen {
    values: [f64; 4],
    vectors: Matrix4<Complex64>,
}

fn plaquette_eigen() -> &'static PlaquetteEigen {
    static EIGEN: OnceLock<PlaquetteEigen> = OnceLock::new();
    EIGEN.get_or_init(|| {
        let eig = SymmetricEigen::new(plaquette_hamiltonian());
        PlaquetteEigen {
            values: [
                eig.eigenvalues[0],
                eig.eigenvalues[1],
                eig.eigenvalues[2],
                eig.eigenvalues[3],
            ],
            vectors: eig.eigenvectors,
        }
    })
}

/// Plaquette spectrum, ascending.
pub fn plaquette_spectrum() -> [f64; 4] {
    let mut values = plaquette_eigen().values;
    values.sort_by(f64::total_cmp);
    values
}

/// Normalized single-excitation state on the plaquette.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaquetteState {
    amplitudes: Vector4<Complex64>,
}

impl PlaquetteState {
    /// Normalizes `amplitudes`; fails for the zero vector.
    pub fn new(amplitudes: Vector4<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidArgument(
                "state amplitudes must be finite and nonzero".into(),
            ));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn amplitudes(&self) -> &Vector4<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, node: PlaquetteNode) -> Complex64 {
        self.amplitudes[node.index()]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// |<self|other>|^2
    pub fn fidelity(&self, other: &PlaquetteState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }

    pub fn site(node: PlaquetteNode) -> Self {
        let mut amplitudes = Vector4::zeros();
        amplitudes[node.index()] = ONE;
        Self { amplitudes }
    }

    /// Left-edge superposition of the +2 and -2 eigenstates orthogonal to the
    /// left zero mode: (|a1> - i|b1>)/sqrt 2.
    pub fn chi() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: Vector4::new(Complex64::new(s, 0.0), Complex64::new(0.0, -s), ZERO, ZERO),
        }
    }

    /// Zero mode on the left rung. The ket carries the complex-conjugate
    /// coefficients of its mode operator (e^{i pi/4} a1 + e^{-i pi/4} b1)/sqrt 2.
    pub fn zero_mode_left() -> Self {
        let e = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, FRAC_PI_4);
        Self {
            amplitudes: Vector4::new(e.conj(), e, ZERO, ZERO),
        }
    }

    /// Zero mode on the right rung, mode operator
    /// (e^{-i pi/4} a2 + e^{i pi/4} b2)/sqrt 2.
    pub fn zero_mode_right() -> Self {
        let e = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, FRAC_PI_4);
        Self {
            amplitudes: Vector4::new(ZERO, ZERO, e, e.conj()),
        }
    }

    /// Eigenstate at energy +2.
    pub fn upper() -> Self {
        let e = Complex64::from_polar(0.5, FRAC_PI_4);
        Self {
            amplitudes: Vector4::new(e.conj(), -e, e, -e.conj()),
        }
    }

    /// Eigenstate at energy -2.
    pub fn lower() -> Self {
        let e = Complex64::from_polar(0.5, FRAC_PI_4);
        Self {
            amplitudes: Vector4::new(e, e.conj(), e.conj(), e),
        }
    }
}

/// Applies exp(-i H t) with the plaquette Hamiltonian.
pub fn evolve_state(s: &PlaquetteState, t: f64) -> PlaquetteState {
    let eig = plaquette_eigen();
    let coeffs = eig.vectors.adjoint() * s.amplitudes;
    let phased = Vector4::from_fn(|j, _| coeffs[j] * Complex64::from_polar(1.0, -eig.values[j] * t));
    PlaquetteState {
        amplitudes: eig.vectors * phased,
    }
}

/// Position operator diag(1, 1, 2, 2) over (a1, b1, a2, b2).
pub fn position_expectation(s: &PlaquetteState) -> f64 {
    PlaquetteNode::ALL
        .iter()
        .map(|&node| node.cell() as f64 * s.amplitude(node).norm_sqr())
        .sum::<f64>()
        / s.amplitudes.norm_squared()
}

/// Period of the position oscillations, pi/2.
pub const POSITION_PERIOD: f64 = FRAC_PI_2;

/// Exact time average of the position expectation of `s(t)` over `[0, window]`.
///
/// Integrates the spectral expansion term by term, so the result carries no
/// quadrature error.
pub fn position_time_average(s: &PlaquetteState, window: f64) -> f64 {
    let eig = plaquette_eigen();
    let c = eig.vectors.adjoint() * s.amplitudes;
    let m = Matrix4::<Complex64>::from_diagonal(&Vector4::new(ONE, ONE, 2.0 * ONE, 2.0 * ONE));
    let m_eig = eig.vectors.adjoint() * m * eig.vectors;
    let mut total = ZERO;
    for j in 0..4 {
        for k in 0..4 {
            let omega = eig.values[j] - eig.values[k];
            let avg = if window == 0.0 || (omega * window).abs() < 1e-12 {
                ONE
            } else {
                (Complex64::from_polar(1.0, omega * window) - ONE) / (I * omega * window)
            };
            total += c[j].conj() * c[k] * m_eig[(j, k)] * avg;
        }
    }
    total.re / s.amplitudes.norm_squared()
}

/// Largest probability of finding an excitation started on `start` at
/// `target`, over the given times.
pub fn caging_check(start: PlaquetteNode, target: PlaquetteNode, t_grid: &[f64]) -> Result<f64> {
    if start == target {
        return Err(Error::InvalidArgument(
            "start and target nodes must differ".into(),
        ));
    }
    let psi0 = PlaquetteState::site(start);
    Ok(t_grid
        .iter()
        .map(|&t| evolve_state(&psi0, t).amplitude(target).norm_sqr())
        .fold(0.0, f64::max))
}
