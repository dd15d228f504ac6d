//! Single-qubit Andreev Hamiltonians, supercurrent operators, and the
//! many-body spin Hamiltonian assembled from a coupling report.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::chain::{AsqParams, ChainConfig};
use crate::constants::{FLUX_QUANTUM, PLANCK};
use crate::coupling::CouplingReport;
use crate::error::{Error, Result};
use crate::num::{as_f64, c, Float};

/// Dense Hermitian operator on an n-qubit register. Construction checks
/// hermiticity so downstream eigensolvers can assume it.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinOperatorMatrix<T: Float = f64> {
    mat: DMatrix<Complex<T>>,
}

impl<T: Float> SpinOperatorMatrix<T> {
    /// Wraps a matrix, requiring a power-of-two dimension and hermiticity to
    /// within 1e-12 relative to the largest element.
    pub fn from_matrix(mat: DMatrix<Complex<T>>) -> Result<Self> {
        let dim = mat.nrows();
        if mat.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: mat.ncols() });
        }
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "operator dimension {dim} is not a power of two >= 2"
            )));
        }
        let mut scale = T::zero();
        let mut dev = T::zero();
        for r in 0..dim {
            for col in 0..dim {
                let a = mat[(r, col)];
                let b = mat[(col, r)];
                let mag = (a.re * a.re + a.im * a.im).sqrt();
                scale = scale.max(mag);
                let dr = a.re - b.re;
                let di = a.im + b.im;
                dev = dev.max((dr * dr + di * di).sqrt());
            }
        }
        if dev > c::<T>(1e-12) * scale.max(T::one()) {
            return Err(Error::NotHermitian { deviation: as_f64(dev) });
        }
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.mat.nrows().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex<T>> {
        self.mat
    }

    /// Real eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<T> {
        let mut vals: Vec<T> = self.mat.symmetric_eigenvalues().iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
        vals
    }
}

/// Two-level Hamiltonian of one ASQ at total phase drop `phi` (GHz):
///
/// H = E_J cos(phi) - E_SO sin(phi) sigma_z
///   + E_Z (cos(theta) sigma_z + sin(theta) sigma_x) / 2.
pub fn asq_hamiltonian<T: Float>(asq: &AsqParams<T>, phi: T) -> SpinOperatorMatrix<T> {
    let half = c::<T>(0.5);
    let common = asq.e_j * phi.cos();
    let zz = -asq.e_so * phi.sin() + half * asq.e_z * asq.theta.cos();
    let xx = half * asq.e_z * asq.theta.sin();
    let mat = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex::new(common + zz, T::zero()),
            Complex::new(xx, T::zero()),
            Complex::new(xx, T::zero()),
            Complex::new(common - zz, T::zero()),
        ],
    );
    SpinOperatorMatrix::from_matrix(mat).expect("construction is Hermitian")
}

// GHz-energy to amps: 2 pi h 1e9 / Phi_0 = 4 pi e 1e9
fn current_scale<T: Float>() -> T {
    c::<T>(2.0 * std::f64::consts::PI * PLANCK * 1e9 / FLUX_QUANTUM)
}

/// Spin-polarized supercurrent amplitude I_s = (2 pi / Phi_0) E_SO cos(phi) h,
/// in amps for E_SO in GHz. Positive spin carries +I_s/2.
pub fn spin_current<T: Float>(asq: &AsqParams<T>, phi: T) -> T {
    current_scale::<T>() * asq.e_so * phi.cos()
}

/// Ordinary (spin-independent) supercurrent I_0 = (pi / Phi_0) E_J sin(phi) h,
/// in amps for E_J in GHz.
pub fn junction_current<T: Float>(asq: &AsqParams<T>, phi: T) -> T {
    current_scale::<T>() * c::<T>(0.5) * asq.e_j * phi.sin()
}

/// Current operator of one ASQ, diag(I_0 + I_s/2, I_0 - I_s/2) in amps.
/// Requires an aligned Zeeman field (theta = 0): a transverse field mixes the
/// spin branches and the diagonal form no longer holds.
pub fn current_operator<T: Float>(asq: &AsqParams<T>, phi: T) -> Result<DMatrix<T>> {
    if asq.theta != T::zero() {
        return Err(Error::MisalignedZeeman { index: 0, theta: as_f64(asq.theta) });
    }
    let i0 = junction_current(asq, phi);
    let is = spin_current(asq, phi);
    let half = c::<T>(0.5);
    Ok(DMatrix::from_row_slice(
        2,
        2,
        &[i0 + half * is, T::zero(), T::zero(), i0 - half * is],
    ))
}

/// Longitudinal coupling J sigma_z sigma_z rewritten in the local eigenbases
/// of two qubits whose Zeeman axes are tilted by theta_1 and theta_2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotatedCoupling<T: Float = f64> {
    pub j_zz: T,
    pub j_xz: T,
    pub j_zx: T,
    pub j_xx: T,
}

pub fn rotate_coupling<T: Float>(theta_1: T, theta_2: T, j: T) -> RotatedCoupling<T> {
    let (s1, c1) = theta_1.sin_cos();
    let (s2, c2) = theta_2.sin_cos();
    RotatedCoupling { j_zz: j * c1 * c2, j_xz: j * s1 * c2, j_zx: j * c1 * s2, j_xx: j * s1 * s2 }
}

#[derive(Clone, Copy)]
enum Axis {
    Z,
    X,
}

/// Adds coeff * product of sigma_(axis) over `ops` (qubit indices distinct)
/// to a dense matrix. Qubit 0 is the most significant bit; bit value 0 means
/// spin up (+1 under sigma_z).
fn add_pauli_product<T: Float>(
    mat: &mut DMatrix<Complex<T>>,
    n: usize,
    coeff: T,
    ops: &[(usize, Axis)],
) {
    if coeff == T::zero() {
        return;
    }
    let dim = 1usize << n;
    let bit = |q: usize| 1usize << (n - 1 - q);
    let mut flip = 0usize;
    for &(q, axis) in ops {
        if matches!(axis, Axis::X) {
            flip |= bit(q);
        }
    }
    for b in 0..dim {
        let mut sign = T::one();
        for &(q, axis) in ops {
            if matches!(axis, Axis::Z) && b & bit(q) != 0 {
                sign = -sign;
            }
        }
        let r = b ^ flip;
        mat[(r, b)] = mat[(r, b)] + Complex::new(coeff * sign, T::zero());
    }
}

pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Builds the dense effective spin Hamiltonian from a coupling report:
///
/// H = sum_i E_i sigma_z_i / 2 + sum_{i<j} J_ij A_i A_j / 2
///   + sum_{i<j<k} J_ijk A_i A_j A_k / 2,
///
/// where A_l = cos(theta_l) sigma_z + sin(theta_l) sigma_x accounts for each
/// qubit's Zeeman tilt (single-qubit energies are already quoted in the local
/// eigenbasis). Refuses more than [`DEFAULT_QUBIT_CAP`] qubits.
pub fn build_spin_hamiltonian<T: Float>(
    config: &ChainConfig<T>,
    report: &CouplingReport<T>,
) -> Result<SpinOperatorMatrix<T>> {
    build_spin_hamiltonian_with_cap(config, report, DEFAULT_QUBIT_CAP)
}

/// As [`build_spin_hamiltonian`] with an explicit qubit cap.
pub fn build_spin_hamiltonian_with_cap<T: Float>(
    config: &ChainConfig<T>,
    report: &CouplingReport<T>,
    cap: usize,
) -> Result<SpinOperatorMatrix<T>> {
    let n = config.n();
    if report.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: report.n() });
    }
    if n > cap {
        return Err(Error::QubitCapExceeded { n, cap });
    }
    let dim = 1usize << n;
    let half = c::<T>(0.5);
    let mut mat: DMatrix<Complex<T>> = DMatrix::zeros(dim, dim);

    let axes: Vec<(T, T)> = config.asqs.iter().map(|a| a.theta.sin_cos()).collect();
    let weight = |q: usize, axis: Axis| match axis {
        Axis::Z => axes[q].1,
        Axis::X => axes[q].0,
    };

    for (i, &e) in report.energies.iter().enumerate() {
        add_pauli_product(&mut mat, n, half * e, &[(i, Axis::Z)]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let j_ij = report.pair(i, j);
            if j_ij == T::zero() {
                continue;
            }
            for ai in [Axis::Z, Axis::X] {
                for aj in [Axis::Z, Axis::X] {
                    let coeff = half * j_ij * weight(i, ai) * weight(j, aj);
                    add_pauli_product(&mut mat, n, coeff, &[(i, ai), (j, aj)]);
                }
            }
        }
    }
    for t in &report.triples {
        if t.value == T::zero() {
            continue;
        }
        for ai in [Axis::Z, Axis::X] {
            for aj in [Axis::Z, Axis::X] {
                for ak in [Axis::Z, Axis::X] {
                    let coeff = half
                        * t.value
                        * weight(t.i, ai)
                        * weight(t.j, aj)
                        * weight(t.k, ak);
                    add_pauli_product(&mut mat, n, coeff, &[(t.i, ai), (t.j, aj), (t.k, ak)]);
                }
            }
        }
    }
    SpinOperatorMatrix::from_matrix(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{coupling_report, ReportOrder, TripleCoupling};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn re(m: &SpinOperatorMatrix, r: usize, c: usize) -> f64 {
        m.matrix()[(r, c)].re
    }

    #[test]
    fn single_qubit_hamiltonian_reference_points() {
        // phi = pi/2 leaves only the spin-orbit splitting
        let asq = AsqParams::josephson(0.0, 0.3).unwrap();
        let h = asq_hamiltonian(&asq, FRAC_PI_2);
        assert_relative_eq!(re(&h, 0, 0), -0.3, max_relative = 1e-14);
        assert_relative_eq!(re(&h, 1, 1), 0.3, max_relative = 1e-14);
        assert_abs_diff_eq!(re(&h, 0, 1), 0.0);

        // phi = 0: pure junction energy, no splitting
        let h = asq_hamiltonian(&asq, 0.0);
        assert_abs_diff_eq!(re(&h, 0, 0), 0.0);
        assert_abs_diff_eq!(re(&h, 1, 1), 0.0);

        // aligned Zeeman adds +-E_Z/2 on the diagonal
        let asq = AsqParams::new(1.0, 0.3, 0.8, 0.0).unwrap();
        let h = asq_hamiltonian(&asq, 0.0);
        assert_relative_eq!(re(&h, 0, 0), 1.0 + 0.4, max_relative = 1e-14);
        assert_relative_eq!(re(&h, 1, 1), 1.0 - 0.4, max_relative = 1e-14);

        // transverse Zeeman fills the off-diagonal
        let asq = AsqParams::new(0.0, 0.0, 0.8, FRAC_PI_2).unwrap();
        let h = asq_hamiltonian(&asq, 0.3);
        assert_relative_eq!(re(&h, 0, 1), 0.4, max_relative = 1e-12);
        assert_abs_diff_eq!(re(&h, 0, 0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn spin_current_magnitude_and_zeros() {
        let asq = AsqParams::josephson(0.0, 0.3).unwrap();
        let i_s = spin_current(&asq, 0.0);
        assert_relative_eq!(i_s, 6.04e-10, max_relative = 1e-3);
        assert!(spin_current(&asq, FRAC_PI_2).abs() < 1e-24);
        assert!(spin_current(&asq, -FRAC_PI_2).abs() < 1e-24);
        assert_relative_eq!(spin_current(&asq, PI), -i_s, max_relative = 1e-12);
    }

    #[test]
    fn junction_current_is_sinusoidal_and_half_weighted() {
        let asq = AsqParams::josephson(2.0, 0.0).unwrap();
        assert_abs_diff_eq!(junction_current(&asq, 0.0), 0.0);
        let peak = junction_current(&asq, FRAC_PI_2);
        let kappa_half = PI * crate::constants::PLANCK * 1e9 / crate::constants::FLUX_QUANTUM;
        assert_relative_eq!(peak, 2.0 * kappa_half, max_relative = 1e-12);
        assert_abs_diff_eq!(junction_current(&asq, PI), 0.0, epsilon = 1e-19);
    }

    #[test]
    fn current_operator_matches_phase_derivative_of_hamiltonian() {
        // I = -(pi / Phi_0) h dH/dphi, checked by central differences
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kappa = PI * crate::constants::PLANCK * 1e9 / crate::constants::FLUX_QUANTUM;
        for _ in 0..20 {
            let asq = AsqParams::new(
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..0.5),
                rng.gen_range(0.0..0.3),
                0.0,
            )
            .unwrap();
            let phi = rng.gen_range(-PI..PI);
            let op = current_operator(&asq, phi).unwrap();
            let d = 1e-6;
            let hp = asq_hamiltonian(&asq, phi + d);
            let hm = asq_hamiltonian(&asq, phi - d);
            for r in 0..2 {
                for c in 0..2 {
                    let fd = -kappa * (hp.matrix()[(r, c)].re - hm.matrix()[(r, c)].re)
                        / (2.0 * d);
                    assert_abs_diff_eq!(op[(r, c)], fd, epsilon = 1e-17);
                }
            }
        }
    }

    #[test]
    fn current_operator_rejects_transverse_field() {
        let asq = AsqParams::new(0.0, 0.3, 0.5, 0.4).unwrap();
        assert!(matches!(
            current_operator(&asq, 0.0),
            Err(Error::MisalignedZeeman { .. })
        ));
    }

    #[test]
    fn spin_current_extremal_at_on_phases() {
        let asq = AsqParams::josephson(0.0, 0.3).unwrap();
        let d = 1e-7;
        for phi in [0.0, PI] {
            let slope = (spin_current(&asq, phi + d) - spin_current(&asq, phi - d)) / (2.0 * d);
            assert_abs_diff_eq!(slope, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_reference_angles() {
        let j = -0.006;
        let r = rotate_coupling(0.0, 0.0, j);
        assert_abs_diff_eq!(r.j_zz, j);
        assert_abs_diff_eq!(r.j_xz, 0.0);
        assert_abs_diff_eq!(r.j_zx, 0.0);
        assert_abs_diff_eq!(r.j_xx, 0.0);

        let r = rotate_coupling(FRAC_PI_2, FRAC_PI_2, j);
        assert_abs_diff_eq!(r.j_xx, j, epsilon = 1e-17);
        assert_abs_diff_eq!(r.j_zz, 0.0, epsilon = 1e-17);

        let r = rotate_coupling(FRAC_PI_2, 0.0, j);
        assert_abs_diff_eq!(r.j_xz, j, epsilon = 1e-17);
        assert_abs_diff_eq!(r.j_zx, 0.0, epsilon = 1e-17);
    }

    #[test]
    fn rotation_preserves_total_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let t1 = rng.gen_range(0.0..PI);
            let t2 = rng.gen_range(0.0..PI);
            let j = rng.gen_range(-0.01..0.01f64);
            let r = rotate_coupling(t1, t2, j);
            let total = r.j_zz * r.j_zz + r.j_xz * r.j_xz + r.j_zx * r.j_zx + r.j_xx * r.j_xx;
            assert_relative_eq!(total, j * j, max_relative = 1e-12);
            // rank-1 structure: the tilt factorizes per qubit
            assert_abs_diff_eq!(r.j_zz * r.j_xx - r.j_xz * r.j_zx, 0.0, epsilon = 1e-18);
        }
    }

    fn report_from(
        energies: Vec<f64>,
        pair_list: &[(usize, usize, f64)],
        triple_list: &[(usize, usize, usize, f64)],
    ) -> CouplingReport {
        let n = energies.len();
        let mut pairs = DMatrix::zeros(n, n);
        for &(i, j, v) in pair_list {
            pairs[(i, j)] = v;
            pairs[(j, i)] = v;
        }
        let triples = triple_list
            .iter()
            .map(|&(i, j, k, value)| TripleCoupling {
                i,
                j,
                k,
                value,
                via_magnitude: None,
                via_phase: None,
            })
            .collect();
        CouplingReport::from_parts(0.0, energies, pairs, triples, ReportOrder::WithTriples)
            .unwrap()
    }

    fn chain_with_thetas(thetas: &[f64]) -> ChainConfig {
        ChainConfig::new(
            30.0,
            thetas
                .iter()
                .map(|&t| AsqParams::new(0.0, 0.3, 0.0, t).unwrap())
                .collect(),
            vec![0.0; thetas.len()],
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_single_qubit_energy() {
        let cfg = chain_with_thetas(&[0.0]);
        let report = report_from(vec![5.0], &[], &[]);
        let h = build_spin_hamiltonian(&cfg, &report).unwrap();
        assert_abs_diff_eq!(re(&h, 0, 0), 2.5);
        assert_abs_diff_eq!(re(&h, 1, 1), -2.5);
        assert_abs_diff_eq!(re(&h, 0, 1), 0.0);
    }

    #[test]
    fn hamiltonian_pure_zz_pair() {
        let cfg = chain_with_thetas(&[0.0, 0.0]);
        let report = report_from(vec![0.0, 0.0], &[(0, 1, -0.006)], &[]);
        let h = build_spin_hamiltonian(&cfg, &report).unwrap();
        for (idx, want) in [(0, -0.003), (1, 0.003), (2, 0.003), (3, -0.003)] {
            assert_abs_diff_eq!(re(&h, idx, idx), want, epsilon = 1e-18);
        }
    }

    #[test]
    fn hamiltonian_tilted_pair_becomes_xx() {
        let cfg = chain_with_thetas(&[FRAC_PI_2, FRAC_PI_2]);
        let j = -0.006;
        let report = report_from(vec![0.0, 0.0], &[(0, 1, j)], &[]);
        let h = build_spin_hamiltonian(&cfg, &report).unwrap();
        for idx in 0..4 {
            assert_abs_diff_eq!(re(&h, idx, idx), 0.0, epsilon = 1e-18);
        }
        // sigma_x sigma_x / 2 couples |00> with |11> and |01> with |10>
        assert_abs_diff_eq!(re(&h, 0, 3), 0.5 * j, epsilon = 1e-18);
        assert_abs_diff_eq!(re(&h, 1, 2), 0.5 * j, epsilon = 1e-18);
        assert_abs_diff_eq!(re(&h, 0, 1), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn hamiltonian_tilt_preserves_pair_spectrum() {
        // with no single-qubit energies, local frame tilts cannot move the
        // eigenvalues of J A_1 A_2 / 2
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let t1 = rng.gen_range(0.0..PI);
            let t2 = rng.gen_range(0.0..PI);
            let j = rng.gen_range(-0.01..0.01f64);
            let tilted = chain_with_thetas(&[t1, t2]);
            let flat = chain_with_thetas(&[0.0, 0.0]);
            let report = report_from(vec![0.0, 0.0], &[(0, 1, j)], &[]);
            let ev_tilted = build_spin_hamiltonian(&tilted, &report).unwrap().eigenvalues();
            let ev_flat = build_spin_hamiltonian(&flat, &report).unwrap().eigenvalues();
            for (a, b) in ev_tilted.iter().zip(ev_flat.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hamiltonian_matches_explicit_rotation() {
        // building with tilted axes equals conjugating the aligned
        // Hamiltonian by per-qubit y rotations
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let t1 = rng.gen_range(0.0..PI);
            let t2 = rng.gen_range(0.0..PI);
            let j = rng.gen_range(-0.01..0.01f64);
            let report = report_from(vec![0.0, 0.0], &[(0, 1, j)], &[]);
            let h_tilt = build_spin_hamiltonian(&chain_with_thetas(&[t1, t2]), &report)
                .unwrap()
                .into_matrix();
            let h_flat = build_spin_hamiltonian(&chain_with_thetas(&[0.0, 0.0]), &report)
                .unwrap()
                .into_matrix();
            let ry = |t: f64| {
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        Complex::new((t / 2.0).cos(), 0.0),
                        Complex::new(-(t / 2.0).sin(), 0.0),
                        Complex::new((t / 2.0).sin(), 0.0),
                        Complex::new((t / 2.0).cos(), 0.0),
                    ],
                )
            };
            let u = ry(t1).kronecker(&ry(t2));
            let rotated = &u * &h_flat * u.adjoint();
            for r in 0..4 {
                for c in 0..4 {
                    assert_abs_diff_eq!(h_tilt[(r, c)].re, rotated[(r, c)].re, epsilon = 1e-14);
                    assert_abs_diff_eq!(h_tilt[(r, c)].im, rotated[(r, c)].im, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_triple_term_diagonal() {
        let cfg = chain_with_thetas(&[0.0, 0.0, 0.0]);
        let t = 6e-5;
        let report = report_from(vec![0.0; 3], &[], &[(0, 1, 2, t)]);
        let h = build_spin_hamiltonian(&cfg, &report).unwrap();
        // s0 s1 s2 * t / 2 on the diagonal, bit 0 high means spin down
        for idx in 0..8usize {
            let sign: f64 = (0..3)
                .map(|q| if idx & (1 << (2 - q)) == 0 { 1.0 } else { -1.0 })
                .product();
            assert_abs_diff_eq!(re(&h, idx, idx), 0.5 * t * sign, epsilon = 1e-18);
        }
    }

    #[test]
    fn hamiltonian_matches_full_report_pipeline() {
        // diagonal of the assembled Hamiltonian against the model energy
        // formula, using a real perturbative report
        let cfg = ChainConfig::new(
            30.0,
            vec![AsqParams::josephson(0.0, 0.3).unwrap(); 3],
            vec![0.0, 0.1, 0.27],
        )
        .unwrap();
        let report = coupling_report(&cfg, true).unwrap();
        let h = build_spin_hamiltonian(&cfg, &report).unwrap();
        for idx in 0..8usize {
            let s: Vec<f64> =
                (0..3).map(|q| if idx & (1 << (2 - q)) == 0 { 1.0 } else { -1.0 }).collect();
            let mut want = 0.0;
            for i in 0..3 {
                want += 0.5 * report.energies[i] * s[i];
            }
            for i in 0..3 {
                for j in (i + 1)..3 {
                    want += 0.5 * report.pair(i, j) * s[i] * s[j];
                }
            }
            want += 0.5 * report.triple(0, 1, 2) * s[0] * s[1] * s[2];
            assert_relative_eq!(re(&h, idx, idx), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn hamiltonian_respects_qubit_cap() {
        let cfg = chain_with_thetas(&[0.0; 4]);
        let report = report_from(vec![0.0; 4], &[], &[]);
        assert!(matches!(
            build_spin_hamiltonian_with_cap(&cfg, &report, 3),
            Err(Error::QubitCapExceeded { n: 4, cap: 3 })
        ));
    }

    #[test]
    fn operator_wrapper_rejects_bad_matrices() {
        let not_square = DMatrix::<Complex<f64>>::zeros(2, 3);
        assert!(SpinOperatorMatrix::from_matrix(not_square).is_err());
        let not_pow2 = DMatrix::<Complex<f64>>::zeros(3, 3);
        assert!(SpinOperatorMatrix::from_matrix(not_pow2).is_err());
        let mut skew = DMatrix::<Complex<f64>>::zeros(2, 2);
        skew[(0, 1)] = Complex::new(1.0, 0.0);
        assert!(matches!(
            SpinOperatorMatrix::from_matrix(skew),
            Err(Error::NotHermitian { .. })
        ));
    }
}
