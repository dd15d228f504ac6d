//! Transmon and fluxonium readout circuits shunted by the spin-dependent
//! ASQ Josephson network: spin-conditioned circuit spectra, dressed
//! resonator frequencies, avoided-crossing scans, and the joint-readout
//! frequency ladder.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, SpinConfiguration};
use crate::coupling::effective_total_ej;
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::num::{as_f64, c, wrap_angle, Float};

pub const DEFAULT_CHARGE_BASIS: usize = 41;
pub const DEFAULT_OSCILLATOR_BASIS: usize = 120;
/// Circuit eigenstates kept when tensoring with the resonator.
pub const CIRCUIT_STATES: usize = 8;
/// Levels reported per spectrum.
const REPORT_LEVELS: usize = 12;
/// Convergence demand on f_01 when the basis is doubled, GHz.
const F01_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 3;
const BRANCH_OVERLAP_MIN: f64 = 0.4;

fn num_zero<T: Float>() -> T {
    T::zero()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitKind {
    Transmon,
    Fluxonium,
}

/// Readout circuit built around the coupling junction. The junction energy
/// and the ASQ potential both come from the [`ChainConfig`]; this struct
/// holds only the circuit-side parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutCircuit<T: Float = f64> {
    pub kind: CircuitKind,
    /// Charging energy, GHz.
    pub e_c: T,
    /// Inductive energy of the fluxonium shunt, GHz. Fluxonium only.
    #[serde(default)]
    pub e_l: Option<T>,
    /// Reduced flux 2 pi Phi / Phi_0 through the fluxonium loop, radians.
    #[serde(default = "num_zero")]
    pub loop_flux: T,
    /// Offset charge on the transmon island, Cooper-pair units.
    #[serde(default = "num_zero")]
    pub n_g: T,
    /// Basis truncation; None picks the kind default (41 charge states,
    /// 120 oscillator states).
    #[serde(default)]
    pub basis_size: Option<usize>,
}

impl<T: Float> ReadoutCircuit<T> {
    pub fn transmon(e_c: T, n_g: T) -> Result<Self> {
        let circuit = Self {
            kind: CircuitKind::Transmon,
            e_c,
            e_l: None,
            loop_flux: T::zero(),
            n_g,
            basis_size: None,
        };
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn fluxonium(e_c: T, e_l: T, loop_flux: T) -> Result<Self> {
        let circuit = Self {
            kind: CircuitKind::Fluxonium,
            e_c,
            e_l: Some(e_l),
            loop_flux,
            n_g: T::zero(),
            basis_size: None,
        };
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn with_basis_size(mut self, basis_size: usize) -> Result<Self> {
        self.basis_size = Some(basis_size);
        self.validate()?;
        Ok(self)
    }

    pub fn with_loop_flux(mut self, loop_flux: T) -> Self {
        self.loop_flux = loop_flux;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_c > T::zero()) {
            return Err(Error::InvalidParameter("e_c must be > 0".into()));
        }
        match self.kind {
            CircuitKind::Transmon => {
                if self.e_l.is_some() {
                    return Err(Error::InvalidParameter(
                        "e_l is a fluxonium parameter".into(),
                    ));
                }
                if self.loop_flux != T::zero() {
                    return Err(Error::InvalidParameter(
                        "loop_flux is a fluxonium parameter".into(),
                    ));
                }
            }
            CircuitKind::Fluxonium => {
                match self.e_l {
                    Some(e_l) if e_l > T::zero() => {}
                    _ => {
                        return Err(Error::InvalidParameter(
                            "fluxonium requires e_l > 0".into(),
                        ))
                    }
                }
                if self.n_g != T::zero() {
                    return Err(Error::InvalidParameter(
                        "n_g is a transmon parameter".into(),
                    ));
                }
            }
        }
        if let Some(b) = self.basis_size {
            if b < 20 {
                return Err(Error::InvalidParameter(format!(
                    "basis_size must be >= 20, got {b}"
                )));
            }
        }
        Ok(())
    }

    /// Resolved basis dimension. Transmon dimensions are forced odd so the
    /// charge grid is symmetric about n = 0.
    pub fn dim(&self) -> usize {
        match self.kind {
            CircuitKind::Transmon => self.basis_size.unwrap_or(DEFAULT_CHARGE_BASIS) | 1,
            CircuitKind::Fluxonium => self.basis_size.unwrap_or(DEFAULT_OSCILLATOR_BASIS),
        }
    }
}

/// Readout resonator coupled to the circuit charge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSpec<T: Float = f64> {
    /// Bare frequency, GHz.
    pub f_bare: T,
    /// Charge coupling strength, GHz.
    pub g: T,
    /// Photon-number truncation.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    5
}

impl<T: Float> ResonatorSpec<T> {
    pub fn new(f_bare: T, g: T) -> Result<Self> {
        let spec = Self { f_bare, g, levels: default_levels() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_bare > T::zero()) {
            return Err(Error::InvalidParameter("f_bare must be > 0".into()));
        }
        if !(self.g >= T::zero()) {
            return Err(Error::InvalidParameter("g must be >= 0".into()));
        }
        if self.levels < 3 {
            return Err(Error::InvalidParameter("resonator needs >= 3 levels".into()));
        }
        Ok(())
    }
}

/// Circuit spectrum for one fixed spin assignment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinBranchSpectrum<T: Float = f64> {
    pub spins: SpinConfiguration,
    /// Ascending eigenfrequencies, GHz.
    pub levels: Vec<T>,
    /// Transitions f_{0->k} for k >= 1, GHz.
    pub transitions: Vec<T>,
}

/// Half the complex hopping generated by the whole junction network for a
/// fixed spin assignment: w = (C - E_J) / 2 with
/// C = sum_l (E_J,l + i s_l E_SO,l) e^{i phi_l}. The scalar potential is
/// U(phi) = E_J + 2 Re(w e^{i phi}), and w is exactly the e^{i phi}
/// hopping coefficient in charge-type bases.
fn hopping_amplitude<T: Float>(
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
) -> Result<Complex<T>> {
    let n = config.n();
    if spins.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: spins.n() });
    }
    for (l, asq) in config.asqs.iter().enumerate() {
        if !asq.zeeman_aligned() {
            return Err(Error::MisalignedZeeman { index: l, theta: as_f64(asq.theta) });
        }
    }
    let phases = config.phases();
    let mut z = Complex::new(-config.e_j_coupling, T::zero());
    for l in 0..n {
        let (sin, cos) = phases[l].sin_cos();
        let a = &config.asqs[l];
        z = z + Complex::new(a.e_j, spins.s::<T>(l) * a.e_so) * Complex::new(cos, sin);
    }
    Ok(z * c::<T>(0.5))
}

/// Classical Josephson potential of the full network at common phase `phi`
/// for a fixed spin assignment (GHz): E_J (1 - cos phi) +
/// sum_l [E_J,l cos(phi + phi_l) - s_l E_SO,l sin(phi + phi_l)].
pub fn josephson_potential<T: Float>(
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    phi: T,
) -> Result<T> {
    let w = hopping_amplitude(config, spins)?;
    Ok(config.e_j_coupling + c::<T>(2.0) * (w.re * phi.cos() - w.im * phi.sin()))
}

fn transmon_hamiltonian<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    dim: usize,
) -> Result<DMatrix<Complex<T>>> {
    let w = hopping_amplitude(config, spins)?;
    let half_span = ((dim - 1) / 2) as f64;
    let four_ec = c::<T>(4.0) * circuit.e_c;
    let mut h = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let n = c::<T>(k as f64 - half_span) - circuit.n_g;
        h[(k, k)] = Complex::new(four_ec * n * n + config.e_j_coupling, T::zero());
    }
    for k in 0..dim - 1 {
        // e^{i phi} raises the charge by one Cooper pair
        h[(k + 1, k)] = w;
        h[(k, k + 1)] = w.conj();
    }
    Ok(h)
}

/// Generalized Laguerre polynomial L_k^(alpha)(x) by upward recurrence.
fn laguerre<T: Float>(k: usize, alpha: usize, x: T) -> T {
    let a = c::<T>(alpha as f64);
    let mut prev = T::one();
    if k == 0 {
        return prev;
    }
    let mut cur = T::one() + a - x;
    for j in 1..k {
        let jf = c::<T>(j as f64);
        let next =
            ((c::<T>(2.0) * jf + T::one() + a - x) * cur - (jf + a) * prev) / (jf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Matrix of e^{i lambda (a + a^dag)} in the number basis; complex symmetric.
fn displacement<T: Float>(lambda: T, dim: usize) -> DMatrix<Complex<T>> {
    let x = lambda * lambda;
    let pref = (-x * c::<T>(0.5)).exp();
    let mut d = DMatrix::zeros(dim, dim);
    for m in 0..dim {
        for n in 0..=m {
            let diff = m - n;
            // lambda^diff sqrt(n!/m!)
            let mut scale = T::one();
            for t in (n + 1)..=m {
                scale = scale * lambda / c::<T>(t as f64).sqrt();
            }
            let mag = pref * scale * laguerre(n, diff, x);
            let entry = match diff % 4 {
                0 => Complex::new(mag, T::zero()),
                1 => Complex::new(T::zero(), mag),
                2 => Complex::new(-mag, T::zero()),
                _ => Complex::new(T::zero(), -mag),
            };
            d[(m, n)] = entry;
            d[(n, m)] = entry;
        }
    }
    d
}

fn fluxonium_hamiltonian<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    dim: usize,
) -> Result<DMatrix<Complex<T>>> {
    let e_l = circuit
        .e_l
        .ok_or_else(|| Error::InvalidParameter("fluxonium requires e_l".into()))?;
    let w = hopping_amplitude(config, spins)?;
    let f_osc = (c::<T>(8.0) * e_l * circuit.e_c).sqrt();
    let phi_z = (c::<T>(2.0) * circuit.e_c / e_l).sqrt().sqrt();
    // phase referenced to the inductive minimum: phi = loop_flux + dphi,
    // so the quadratic part is exactly f_osc (a^dag a + 1/2) and every
    // junction harmonic picks up e^{i loop_flux}
    let (s_ext, c_ext) = circuit.loop_flux.sin_cos();
    let wp = w * Complex::new(c_ext, s_ext);
    let d = displacement(phi_z, dim);
    let mut h = DMatrix::zeros(dim, dim);
    for m in 0..dim {
        h[(m, m)] = Complex::new(
            f_osc * (c::<T>(m as f64) + c::<T>(0.5)) + config.e_j_coupling,
            T::zero(),
        );
    }
    for r in 0..dim {
        for col in 0..dim {
            let v = wp * d[(r, col)];
            h[(r, col)] = h[(r, col)] + v + v.conj();
        }
    }
    Ok(h)
}

fn circuit_hamiltonian<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    dim: usize,
) -> Result<DMatrix<Complex<T>>> {
    circuit.validate()?;
    match circuit.kind {
        CircuitKind::Transmon => transmon_hamiltonian(circuit, config, spins, dim),
        CircuitKind::Fluxonium => fluxonium_hamiltonian(circuit, config, spins, dim),
    }
}

fn sorted_eigenvalues<T: Float>(h: &DMatrix<Complex<T>>) -> Vec<T> {
    let mut vals: Vec<T> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    vals
}

fn levels_at<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    dim: usize,
) -> Result<Vec<T>> {
    let h = circuit_hamiltonian(circuit, config, spins, dim)?;
    let mut vals = sorted_eigenvalues(&h);
    vals.truncate(REPORT_LEVELS.min(dim));
    Ok(vals)
}

/// Levels with the convergence contract: the basis is doubled until f_01
/// moves by less than 1 kHz, starting from the circuit's own size.
fn converged_levels<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
) -> Result<Vec<T>> {
    let tol = c::<T>(F01_TOL);
    let mut dim = circuit.dim();
    let mut prev = levels_at(circuit, config, spins, dim)?;
    for _ in 0..MAX_DOUBLINGS {
        let next_dim = match circuit.kind {
            CircuitKind::Transmon => (dim * 2) | 1,
            CircuitKind::Fluxonium => dim * 2,
        };
        let next = levels_at(circuit, config, spins, next_dim)?;
        let drift = ((next[1] - next[0]) - (prev[1] - prev[0])).abs();
        if drift < tol {
            return Ok(next);
        }
        prev = next;
        dim = next_dim;
    }
    Err(Error::NonConvergence(format!(
        "f_01 still moving after basis doubling to {dim}"
    )))
}

fn spectrum_from_levels<T: Float>(spins: &SpinConfiguration, levels: Vec<T>) -> SpinBranchSpectrum<T> {
    let transitions = levels[1..].iter().map(|&l| l - levels[0]).collect();
    SpinBranchSpectrum { spins: spins.clone(), levels, transitions }
}

/// Spin-conditioned transmon spectrum (charge basis, convergence checked by
/// basis doubling).
pub fn transmon_levels<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
) -> Result<SpinBranchSpectrum<T>> {
    if circuit.kind != CircuitKind::Transmon {
        return Err(Error::InvalidParameter("transmon_levels needs a transmon circuit".into()));
    }
    Ok(spectrum_from_levels(spins, converged_levels(circuit, config, spins)?))
}

/// Spin-conditioned fluxonium spectrum (oscillator basis with
/// displacement-operator junction harmonics, convergence checked by basis
/// doubling).
pub fn fluxonium_levels<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
) -> Result<SpinBranchSpectrum<T>> {
    if circuit.kind != CircuitKind::Fluxonium {
        return Err(Error::InvalidParameter(
            "fluxonium_levels needs a fluxonium circuit".into(),
        ));
    }
    Ok(spectrum_from_levels(spins, converged_levels(circuit, config, spins)?))
}

/// Independent validation path: dense uniform phase-grid discretization with
/// a five-point kinetic stencil. Transmon grids are periodic over one phase
/// period and require n_g = 0; fluxonium grids are hard-walled and sized
/// from the oscillator length. Slow at large grids; intended for
/// cross-checking the basis solvers.
pub fn phase_grid_levels<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    count: usize,
    grid_points: usize,
) -> Result<Vec<T>> {
    circuit.validate()?;
    if count == 0 {
        return Err(Error::InvalidParameter("need at least one level".into()));
    }
    if grid_points < 64 {
        return Err(Error::InvalidParameter("grid too coarse to trust".into()));
    }
    let w = hopping_amplitude(config, spins)?;
    let potential = |phi: T| -> T {
        let mut u = config.e_j_coupling + c::<T>(2.0) * (w.re * phi.cos() - w.im * phi.sin());
        if circuit.kind == CircuitKind::Fluxonium {
            let e_l = circuit.e_l.expect("validated fluxonium");
            let d = phi - circuit.loop_flux;
            u += c::<T>(0.5) * e_l * d * d;
        }
        u
    };

    let g = grid_points;
    let (step, grid): (T, Vec<T>) = match circuit.kind {
        CircuitKind::Transmon => {
            if circuit.n_g != T::zero() {
                return Err(Error::InvalidParameter(
                    "phase-grid oracle supports n_g = 0 only".into(),
                ));
            }
            let step = T::two_pi() / c::<T>(g as f64);
            (step, (0..g).map(|j| -T::pi() + step * c::<T>(j as f64)).collect())
        }
        CircuitKind::Fluxonium => {
            let e_l = circuit.e_l.expect("validated fluxonium");
            let phi_z = (c::<T>(2.0) * circuit.e_c / e_l).sqrt().sqrt();
            let quanta = 2 * count.max(REPORT_LEVELS) + 40;
            let span = phi_z * c::<T>((2 * quanta + 1) as f64).sqrt() + T::two_pi();
            let step = c::<T>(2.0) * span / c::<T>((g - 1) as f64);
            (
                step,
                (0..g)
                    .map(|j| circuit.loop_flux - span + step * c::<T>(j as f64))
                    .collect(),
            )
        }
    };

    // five-point second-derivative stencil for -4 E_c d^2/dphi^2
    let h2 = step * step;
    let k0 = c::<T>(10.0) * circuit.e_c / h2;
    let k1 = -c::<T>(16.0 / 3.0) * circuit.e_c / h2;
    let k2 = circuit.e_c / (c::<T>(3.0) * h2);
    let periodic = circuit.kind == CircuitKind::Transmon;
    let mut h = DMatrix::<T>::zeros(g, g);
    for j in 0..g {
        h[(j, j)] = k0 + potential(grid[j]);
        for (off, coeff) in [(1usize, k1), (2usize, k2)] {
            let up = j + off;
            if up < g {
                h[(j, up)] += coeff;
                h[(up, j)] += coeff;
            } else if periodic {
                let wrapped = up - g;
                h[(j, wrapped)] += coeff;
                h[(wrapped, j)] += coeff;
            }
        }
    }
    let mut vals: Vec<T> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    vals.truncate(count);
    Ok(vals)
}

/// Charge operator in the circuit's raw basis.
fn charge_operator<T: Float>(circuit: &ReadoutCircuit<T>, dim: usize) -> DMatrix<Complex<T>> {
    let mut n_op = DMatrix::zeros(dim, dim);
    match circuit.kind {
        CircuitKind::Transmon => {
            let half_span = ((dim - 1) / 2) as f64;
            for k in 0..dim {
                n_op[(k, k)] = Complex::new(c::<T>(k as f64 - half_span), T::zero());
            }
        }
        CircuitKind::Fluxonium => {
            let e_l = circuit.e_l.expect("validated fluxonium");
            let phi_z = (c::<T>(2.0) * circuit.e_c / e_l).sqrt().sqrt();
            let n_z = T::one() / (c::<T>(2.0) * phi_z);
            // n = i n_z (a^dag - a)
            for m in 0..dim - 1 {
                let amp = n_z * c::<T>((m + 1) as f64).sqrt();
                n_op[(m + 1, m)] = Complex::new(T::zero(), amp);
                n_op[(m, m + 1)] = Complex::new(T::zero(), -amp);
            }
        }
    }
    n_op
}

struct DressedSystem<T: Float> {
    /// Sorted circuit eigenvalues (all of them, before truncation to K).
    circuit_levels: Vec<T>,
    /// Sorted product-space eigenvalues.
    levels: Vec<T>,
    /// Product-space eigenvectors, columns sorted to match `levels`. Basis
    /// index is circuit_state * photon_levels + photons.
    vectors: DMatrix<Complex<T>>,
}

fn dressed_system<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    resonator: &ResonatorSpec<T>,
) -> Result<DressedSystem<T>> {
    resonator.validate()?;
    let dim = circuit.dim();
    let h = circuit_hamiltonian(circuit, config, spins, dim)?;
    let (circuit_levels, circuit_vecs) = hermitian_eigen(&h);
    let k = CIRCUIT_STATES.min(dim);
    let n_op = charge_operator(circuit, dim);
    // n projected onto the kept eigenstates, v_a^dag n v_b
    let mut n_eig: DMatrix<Complex<T>> = DMatrix::zeros(k, k);
    for b in 0..k {
        let mut nv = vec![Complex::new(T::zero(), T::zero()); dim];
        for r in 0..dim {
            let mut acc = Complex::new(T::zero(), T::zero());
            for s in 0..dim {
                acc = acc + n_op[(r, s)] * circuit_vecs[(s, b)];
            }
            nv[r] = acc;
        }
        for a in 0..k {
            let mut acc = Complex::new(T::zero(), T::zero());
            for r in 0..dim {
                acc = acc + circuit_vecs[(r, a)].conj() * nv[r];
            }
            n_eig[(a, b)] = acc;
        }
    }

    let p = resonator.levels;
    let big = k * p;
    let mut ht: DMatrix<Complex<T>> = DMatrix::zeros(big, big);
    for ci in 0..k {
        for ph in 0..p {
            let r = ci * p + ph;
            ht[(r, r)] = Complex::new(
                circuit_levels[ci] - circuit_levels[0]
                    + resonator.f_bare * c::<T>(ph as f64),
                T::zero(),
            );
        }
    }
    for ci in 0..k {
        for cj in 0..k {
            let gn = n_eig[(ci, cj)] * resonator.g;
            for ph in 0..p {
                for qh in 0..p {
                    if ph.abs_diff(qh) == 1 {
                        let amp = c::<T>(ph.max(qh) as f64).sqrt();
                        let r = ci * p + ph;
                        let col = cj * p + qh;
                        ht[(r, col)] = ht[(r, col)] + gn * amp;
                    }
                }
            }
        }
    }
    let (levels, vectors) = hermitian_eigen(&ht);
    Ok(DressedSystem { circuit_levels, levels, vectors })
}

fn overlap_with_basis<T: Float>(sys: &DressedSystem<T>, column: usize, basis_index: usize) -> T {
    let v = sys.vectors[(basis_index, column)];
    v.re * v.re + v.im * v.im
}

fn best_column_for_basis<T: Float>(sys: &DressedSystem<T>, basis_index: usize) -> (usize, T) {
    let mut best = (0usize, T::zero());
    for col in 0..sys.levels.len() {
        let o = overlap_with_basis(sys, col, basis_index);
        if o > best.1 {
            best = (col, o);
        }
    }
    best
}

/// Dressed resonator frequency plus the diagnostics behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DressedDetail<T: Float = f64> {
    /// Dressed 0-to-1-photon transition of the resonator-like branch, GHz.
    pub freq: T,
    /// freq - f_bare, GHz.
    pub shift: T,
    /// Smaller of the two bare-state overlaps used for branch identification.
    pub branch_overlap: T,
    /// Distance of f_bare from the nearest circuit transition out of the
    /// ground state, GHz.
    pub min_detuning: T,
    /// True when min_detuning < 5 g, where the dispersive picture thins out.
    pub near_resonance: bool,
}

/// Dressed resonator frequency for one spin configuration: diagonalizes the
/// circuit (truncated to its lowest [`CIRCUIT_STATES`] eigenstates) coupled
/// to the resonator through the charge operator, and returns the transition
/// of the branch adiabatically connected to the bare one-photon state.
pub fn dressed_resonator_detail<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    resonator: &ResonatorSpec<T>,
) -> Result<DressedDetail<T>> {
    let sys = dressed_system(circuit, config, spins, resonator)?;
    let (col0, o0) = best_column_for_basis(&sys, 0);
    let (col1, o1) = best_column_for_basis(&sys, 1);
    let branch_overlap = o0.min(o1);
    if branch_overlap < c::<T>(BRANCH_OVERLAP_MIN) || col0 == col1 {
        return Err(Error::BranchIdentification {
            overlap: as_f64(branch_overlap),
            threshold: BRANCH_OVERLAP_MIN,
        });
    }
    let freq = sys.levels[col1] - sys.levels[col0];
    let min_detuning = sys.circuit_levels[1..]
        .iter()
        .map(|&e| ((e - sys.circuit_levels[0]) - resonator.f_bare).abs())
        .fold(T::max_value().unwrap_or_else(T::one), |m, d| m.min(d));
    Ok(DressedDetail {
        freq,
        shift: freq - resonator.f_bare,
        branch_overlap,
        min_detuning,
        near_resonance: min_detuning < c::<T>(5.0) * resonator.g,
    })
}

pub fn dressed_resonator_freq<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
    resonator: &ResonatorSpec<T>,
) -> Result<T> {
    dressed_resonator_detail(circuit, config, spins, resonator).map(|d| d.freq)
}

/// One flux point of an avoided-crossing scan. ON columns use the supplied
/// chain; OFF columns use the same chain with the target qubit moved a
/// quarter flux quantum off its setpoint (compensated downstream).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AvoidedCrossingRow<T: Float = f64> {
    /// Fluxonium loop phase, radians.
    pub loop_flux: T,
    pub f01_on_up: T,
    pub f01_on_down: T,
    pub f02_on_up: T,
    pub f02_on_down: T,
    pub fr_on_up: T,
    pub fr_on_down: T,
    pub fr_off_up: T,
    pub fr_off_down: T,
    /// Worst overlap with the bare one-photon product state across the four
    /// dressed branches at this point.
    pub min_bare_overlap: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AvoidedCrossingSetpoint<T: Float = f64> {
    /// Refined loop phase where the OFF-state resonator pulls balance,
    /// radians. Not a grid row.
    pub loop_flux: T,
    /// |f_r(up) - f_r(down)| with the target ON, GHz.
    pub on_contrast: T,
    /// Same with the target OFF, GHz. Bisected below [`SETPOINT_BALANCE_TOL`].
    pub off_contrast: T,
    /// Worst bare one-photon overlap across the four branches there.
    pub min_bare_overlap: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AvoidedCrossingScan<T: Float = f64> {
    pub rows: Vec<AvoidedCrossingRow<T>>,
    /// Balance point maximizing ON-state contrast among sign changes of the
    /// OFF-state split, subject to every branch staying at least
    /// [`SETPOINT_OVERLAP_MIN`] bare. None when no balance point qualifies
    /// (notably at g = 0, where nothing pulls and there is no sign change).
    pub setpoint: Option<AvoidedCrossingSetpoint<T>>,
}

/// Residual OFF-state split accepted at a refined setpoint, GHz.
pub const SETPOINT_BALANCE_TOL: f64 = 1e-6;
/// Hybridization bound at the setpoint: every identified branch must keep
/// at least this much bare one-photon weight.
pub const SETPOINT_OVERLAP_MIN: f64 = 0.9;
/// Endpoint identifications must be at least this bare for a sign change
/// between grid rows to count as a balance bracket.
const BRACKET_OVERLAP_MIN: f64 = 0.6;

/// Resonator-branch transition of a dressed system, identified per point by
/// maximum overlap with the bare zero- and one-photon states. Returns
/// (frequency, worse of the two overlaps); no threshold enforced.
fn identify<T: Float>(sys: &DressedSystem<T>) -> (T, T) {
    let (col0, o0) = best_column_for_basis(sys, 0);
    let (col1, o1) = best_column_for_basis(sys, 1);
    (sys.levels[col1] - sys.levels[col0], o0.min(o1))
}

/// Sweeps the fluxonium loop flux across `loop_flux_range` (radians),
/// recording bare circuit transitions and dressed resonator branches for
/// both spin states of `target`, with the target ON (as configured) and
/// moved OFF. Branches are identified at each point by maximum bare-state
/// overlap; rows inside an anticrossing report whichever branch is more
/// photon-like, with the overlap column saying how bare it still is.
///
/// The suggested setpoint is not a grid row: wherever the OFF-state split
/// f_r(up) - f_r(down) changes sign between rows, the zero is bisected.
/// Such balance points sit between the spin-resolved anticrossings, where
/// the two OFF branches pull the resonator equally while the ON branches
/// still resolve the spin. Candidates keeping all four branches mostly bare
/// compete on ON-state contrast.
pub fn avoided_crossing_scan<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    resonator: &ResonatorSpec<T>,
    target: usize,
    loop_flux_range: (T, T),
    points: usize,
) -> Result<AvoidedCrossingScan<T>> {
    if circuit.kind != CircuitKind::Fluxonium {
        return Err(Error::InvalidParameter(
            "avoided-crossing readout needs a fluxonium circuit".into(),
        ));
    }
    circuit.validate()?;
    let n = config.n();
    if target >= n {
        return Err(Error::InvalidParameter(format!(
            "target {target} out of range for {n} qubits"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidParameter("scan needs at least two points".into()));
    }
    if loop_flux_range.0 == loop_flux_range.1 {
        return Err(Error::InvalidParameter("scan range is empty".into()));
    }

    let mut off_fluxes = config.fluxes.clone();
    off_fluxes[target] += c::<T>(0.25);
    if target + 1 < n {
        off_fluxes[target + 1] -= c::<T>(0.25);
    }
    let off_config = config.with_fluxes(off_fluxes)?;

    let spins_up = SpinConfiguration::all_up(n);
    let mut down_signs = vec![1i8; n];
    down_signs[target] = -1;
    let spins_down = SpinConfiguration::new(down_signs)?;

    // OFF-state split and identification quality at one flux point
    let off_balance = |phi: T| -> Result<(T, T)> {
        let swept = circuit.with_loop_flux(phi);
        let up = dressed_system(&swept, &off_config, &spins_up, resonator)?;
        let down = dressed_system(&swept, &off_config, &spins_down, resonator)?;
        let (fu, ou) = identify(&up);
        let (fd, od) = identify(&down);
        Ok((fu - fd, ou.min(od)))
    };

    let step = (loop_flux_range.1 - loop_flux_range.0) / c::<T>((points - 1) as f64);
    let mut rows = Vec::with_capacity(points);
    let mut off_quality = Vec::with_capacity(points);
    for i in 0..points {
        let phi = loop_flux_range.0 + step * c::<T>(i as f64);
        let swept = circuit.with_loop_flux(phi);
        let sys_on_up = dressed_system(&swept, config, &spins_up, resonator)?;
        let sys_on_down = dressed_system(&swept, config, &spins_down, resonator)?;
        let sys_off_up = dressed_system(&swept, &off_config, &spins_up, resonator)?;
        let sys_off_down = dressed_system(&swept, &off_config, &spins_down, resonator)?;
        let (fr_on_up, o1) = identify(&sys_on_up);
        let (fr_on_down, o2) = identify(&sys_on_down);
        let (fr_off_up, o3) = identify(&sys_off_up);
        let (fr_off_down, o4) = identify(&sys_off_down);
        off_quality.push(o3.min(o4));
        rows.push(AvoidedCrossingRow {
            loop_flux: phi,
            f01_on_up: sys_on_up.circuit_levels[1] - sys_on_up.circuit_levels[0],
            f01_on_down: sys_on_down.circuit_levels[1] - sys_on_down.circuit_levels[0],
            f02_on_up: sys_on_up.circuit_levels[2] - sys_on_up.circuit_levels[0],
            f02_on_down: sys_on_down.circuit_levels[2] - sys_on_down.circuit_levels[0],
            fr_on_up,
            fr_on_down,
            fr_off_up,
            fr_off_down,
            min_bare_overlap: o1.min(o2).min(o3).min(o4),
        });
    }

    let balance_tol = c::<T>(SETPOINT_BALANCE_TOL);
    let mut setpoint: Option<AvoidedCrossingSetpoint<T>> = None;
    for i in 0..points - 1 {
        let da = rows[i].fr_off_up - rows[i].fr_off_down;
        let db = rows[i + 1].fr_off_up - rows[i + 1].fr_off_down;
        if !(da * db < T::zero()) {
            continue;
        }
        if off_quality[i] < c::<T>(BRACKET_OVERLAP_MIN)
            || off_quality[i + 1] < c::<T>(BRACKET_OVERLAP_MIN)
        {
            // sign flip inside an anticrossing core, not a trusted bracket
            continue;
        }
        let (mut a, mut fa) = (rows[i].loop_flux, da);
        let mut b = rows[i + 1].loop_flux;
        let mut best = (a + b) / c::<T>(2.0);
        let mut residual = T::max_value().unwrap_or_else(T::one);
        for _ in 0..80 {
            let m = (a + b) / c::<T>(2.0);
            let (dm, _) = off_balance(m)?;
            if dm.abs() < residual {
                residual = dm.abs();
                best = m;
            }
            if residual < balance_tol / c::<T>(10.0) {
                break;
            }
            if dm * fa < T::zero() {
                b = m;
            } else {
                a = m;
                fa = dm;
            }
        }
        // the split is only piecewise continuous under per-point
        // identification, so a bracket can close on a jump instead of a
        // zero; such candidates keep a finite residual and drop here
        if residual > balance_tol {
            continue;
        }
        let swept = circuit.with_loop_flux(best);
        let (fr_on_up, o1) = identify(&dressed_system(&swept, config, &spins_up, resonator)?);
        let (fr_on_down, o2) = identify(&dressed_system(&swept, config, &spins_down, resonator)?);
        let (_, o3) = identify(&dressed_system(&swept, &off_config, &spins_up, resonator)?);
        let (_, o4) = identify(&dressed_system(&swept, &off_config, &spins_down, resonator)?);
        let overlap = o1.min(o2).min(o3).min(o4);
        if overlap < c::<T>(SETPOINT_OVERLAP_MIN) {
            continue;
        }
        let on = (fr_on_up - fr_on_down).abs();
        if setpoint.as_ref().map_or(true, |s| on > s.on_contrast) {
            setpoint = Some(AvoidedCrossingSetpoint {
                loop_flux: best,
                on_contrast: on,
                off_contrast: residual,
                min_bare_overlap: overlap,
            });
        }
    }
    Ok(AvoidedCrossingScan { rows, setpoint })
}

/// Dressed resonator frequencies for joint readout, one per total up-spin
/// count (N+1 entries; the all-down entry comes first). Requires every
/// qubit parked at the +pi/2 OFF setpoint, where the network inductance
/// depends on the spins only through their sum, and E_SO values within
/// `e_so_rel_tol` of each other. When the E_SO values are exactly identical
/// the permutation degeneracy is verified on sampled alternative
/// configurations to 1 kHz.
pub fn joint_readout_ladder<T: Float>(
    circuit: &ReadoutCircuit<T>,
    config: &ChainConfig<T>,
    resonator: &ResonatorSpec<T>,
    e_so_rel_tol: T,
) -> Result<Vec<T>> {
    let n = config.n();
    if n > 10 {
        return Err(Error::QubitCapExceeded { n, cap: 10 });
    }
    let eff = effective_total_ej(config, None)?;
    let phases = config.phases();
    for (l, &phi) in phases.iter().enumerate() {
        let miss = wrap_angle(phi - eff.phase_offset - T::frac_pi_2()).abs();
        if miss > c::<T>(1e-9) {
            return Err(Error::InvalidParameter(format!(
                "qubit {l} is {:.3e} rad away from the +pi/2 OFF setpoint",
                as_f64(miss)
            )));
        }
    }
    let e_so_max = config.asqs.iter().map(|a| a.e_so).fold(T::zero(), |m, v| m.max(v));
    let e_so_min = config
        .asqs
        .iter()
        .map(|a| a.e_so)
        .fold(T::max_value().unwrap_or_else(T::one), |m, v| m.min(v));
    if e_so_max > T::zero() && (e_so_max - e_so_min) > e_so_rel_tol * e_so_max {
        return Err(Error::InvalidParameter(
            "joint readout requires near-identical e_so across the chain".into(),
        ));
    }
    let identical = config.asqs.iter().all(|a| a.e_so == config.asqs[0].e_so);

    let mut by_count: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for mask in 0..1usize << n {
        let spins = SpinConfiguration::from_index(n, mask);
        by_count[spins.up_count()].push(mask);
    }
    let mut ladder = Vec::with_capacity(n + 1);
    for count in 0..=n {
        let members = &by_count[count];
        let rep = members[0];
        let f_rep = dressed_resonator_freq(
            circuit,
            config,
            &SpinConfiguration::from_index(n, rep),
            resonator,
        )?;
        if identical {
            for &alt in members.iter().skip(1).take(2) {
                let f_alt = dressed_resonator_freq(
                    circuit,
                    config,
                    &SpinConfiguration::from_index(n, alt),
                    resonator,
                )?;
                if (f_alt - f_rep).abs() > c::<T>(1e-6) {
                    return Err(Error::DegeneracyViolation {
                        up_count: count,
                        a: as_f64(f_rep),
                        b: as_f64(f_alt),
                    });
                }
            }
        }
        ladder.push(f_rep);
    }
    Ok(ladder)
}
