//! Effective total Josephson energy, perturbative qubit-qubit couplings, and
//! the brute-force classical oracle that validates them.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, SpinConfiguration};
use crate::error::{Error, Result};
use crate::flux::FluxPlan;
use crate::num::{as_f64, c, frac, Float};

/// Polar form of the effective total Josephson energy of the parallel
/// network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveEj<T: Float = f64> {
    /// |E~|, GHz.
    pub magnitude: T,
    /// arg(E~), radians in (-pi, pi]. Shifts every ON/OFF phase setpoint.
    pub phase_offset: T,
}

/// E~ = E_J + sum_l E_J,l e^{i phi_l}, optionally including the
/// spin-dependent contribution sum_l s_l E_SO,l e^{i(pi/2 + phi_l)}.
///
/// Errors when |E~| falls below 1e-6 E_J: the perturbative coupling formulas
/// divide by it.
pub fn effective_total_ej<T: Float>(
    config: &ChainConfig<T>,
    spins: Option<&SpinConfiguration>,
) -> Result<EffectiveEj<T>> {
    if let Some(s) = spins {
        if s.n() != config.n() {
            return Err(Error::DimensionMismatch { expected: config.n(), got: s.n() });
        }
    }
    let phases = config.phases();
    let mut z = Complex::new(config.e_j_coupling, T::zero());
    for (l, asq) in config.asqs.iter().enumerate() {
        let (sin, cos) = phases[l].sin_cos();
        z = z + Complex::new(cos, sin) * asq.e_j;
        if let Some(s) = spins {
            // e^{i(pi/2 + phi)} = i e^{i phi}
            z = z + Complex::new(-sin, cos) * (asq.e_so * s.s::<T>(l));
        }
    }
    let magnitude = (z.re * z.re + z.im * z.im).sqrt();
    // scale against every junction in the network so a zero coupling
    // junction still gets a meaningful degeneracy threshold
    let scale = config
        .asqs
        .iter()
        .fold(config.e_j_coupling, |a, q| a + q.e_j + q.e_so);
    let threshold = c::<T>(1e-6) * scale;
    if magnitude <= threshold {
        return Err(Error::DegenerateEffectiveEj {
            magnitude: as_f64(magnitude),
            threshold: as_f64(threshold),
        });
    }
    Ok(EffectiveEj { magnitude, phase_offset: z.im.atan2(z.re) })
}

/// First-order longitudinal coupling between qubits i and j (GHz):
/// J_ij = -2 E_SO,i E_SO,j / |E~| cos(phi_i - phi_E~) cos(phi_j - phi_E~),
/// with E~ the spin-independent effective energy.
pub fn pairwise_coupling<T: Float>(config: &ChainConfig<T>, i: usize, j: usize) -> Result<T> {
    let n = config.n();
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!(
            "pair ({i}, {j}) out of range for {n} qubits"
        )));
    }
    if i == j {
        return Err(Error::InvalidParameter("pair indices must differ".into()));
    }
    let eff = effective_total_ej(config, None)?;
    let phases = config.phases();
    Ok(pair_coupling_from(config, &phases, &eff, i, j))
}

fn pair_coupling_from<T: Float>(
    config: &ChainConfig<T>,
    phases: &[T],
    eff: &EffectiveEj<T>,
    i: usize,
    j: usize,
) -> T {
    let two = c::<T>(2.0);
    -two * config.asqs[i].e_so * config.asqs[j].e_so / eff.magnitude
        * (phases[i] - eff.phase_offset).cos()
        * (phases[j] - eff.phase_offset).cos()
}

/// Whether a report carries only the first-order pair terms or also the
/// second-order three-body corrections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportOrder {
    FirstOrder,
    WithTriples,
}

/// One three-body coupling J_ijk (GHz). When computed perturbatively the two
/// mechanisms are stored separately: `via_magnitude` comes from expanding the
/// state dependence of |E~| inside a pair term, `via_phase` from the state
/// dependence of the phase offset. `value` is always their sum (or the
/// directly extracted coefficient, for table-derived reports).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleCoupling<T: Float = f64> {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: T,
    pub via_magnitude: Option<T>,
    pub via_phase: Option<T>,
}

/// Effective diagonal spin model: E(s) = constant + sum_i E_i s_i / 2
/// + sum_{i<j} J_ij s_i s_j / 2 + sum_{i<j<k} J_ijk s_i s_j s_k / 2.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport<T: Float = f64> {
    /// Spin-independent energy offset (GHz). Zero for perturbative reports;
    /// populated by table extraction.
    pub constant: T,
    /// Single-qubit energies E_i (GHz).
    pub energies: Vec<T>,
    pairs: DMatrix<T>,
    /// Three-body couplings, canonical index order i < j < k.
    pub triples: Vec<TripleCoupling<T>>,
    pub order: ReportOrder,
}

impl<T: Float> CouplingReport<T> {
    /// Assembles a report from raw coefficients, enforcing the structural
    /// invariants (symmetric pair matrix with zero diagonal, canonical
    /// distinct triple indices).
    pub fn from_parts(
        constant: T,
        energies: Vec<T>,
        pairs: DMatrix<T>,
        triples: Vec<TripleCoupling<T>>,
        order: ReportOrder,
    ) -> Result<Self> {
        let n = energies.len();
        if pairs.nrows() != n || pairs.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: pairs.nrows() });
        }
        let scale = pairs.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        let tol = c::<T>(1e-12) * scale;
        for i in 0..n {
            if pairs[(i, i)] != T::zero() {
                return Err(Error::InvalidParameter("pair matrix diagonal must be zero".into()));
            }
            for j in 0..i {
                if (pairs[(i, j)] - pairs[(j, i)]).abs() > tol {
                    return Err(Error::InvalidParameter("pair matrix must be symmetric".into()));
                }
            }
        }
        for t in &triples {
            if !(t.i < t.j && t.j < t.k && t.k < n) {
                return Err(Error::InvalidParameter(
                    "triple indices must be distinct, ascending, and in range".into(),
                ));
            }
        }
        Ok(Self { constant, energies, pairs, triples, order })
    }

    pub fn n(&self) -> usize {
        self.energies.len()
    }

    /// Pairwise coupling J_ij; symmetric, zero on the diagonal.
    pub fn pair(&self, i: usize, j: usize) -> T {
        self.pairs[(i, j)]
    }

    pub fn pair_matrix(&self) -> &DMatrix<T> {
        &self.pairs
    }

    /// Three-body coupling for canonical (ascending) indices, zero if absent.
    pub fn triple(&self, i: usize, j: usize, k: usize) -> T {
        self.triples
            .iter()
            .find(|t| (t.i, t.j, t.k) == (i, j, k))
            .map_or(T::zero(), |t| t.value)
    }
}

/// Builds the effective spin model for a chain: single-qubit energies
/// E_i = -2 E_SO,i sin(phi_i) + E_Z,i cos(theta_i), all pairwise couplings,
/// and (iff `with_triples`) the second-order three-body corrections.
pub fn coupling_report<T: Float>(
    config: &ChainConfig<T>,
    with_triples: bool,
) -> Result<CouplingReport<T>> {
    let n = config.n();
    let eff = effective_total_ej(config, None)?;
    let phases = config.phases();
    let two = c::<T>(2.0);

    let energies: Vec<T> = (0..n)
        .map(|i| {
            let a = &config.asqs[i];
            -two * a.e_so * phases[i].sin() + a.e_z * a.theta.cos()
        })
        .collect();

    let mut pairs = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pair_coupling_from(config, &phases, &eff, i, j);
            pairs[(i, j)] = v;
            pairs[(j, i)] = v;
        }
    }

    let mut triples = Vec::new();
    if with_triples {
        for i in 0..n {
            let (si, ci) = (phases[i] - eff.phase_offset).sin_cos();
            for j in (i + 1)..n {
                let (sj, cj) = (phases[j] - eff.phase_offset).sin_cos();
                for k in (j + 1)..n {
                    let (sk, ck) = (phases[k] - eff.phase_offset).sin_cos();
                    let amp = two * config.asqs[i].e_so * config.asqs[j].e_so
                        * config.asqs[k].e_so
                        / (eff.magnitude * eff.magnitude);
                    // state-dependent |E~| inside the (i, j) pair term,
                    // expanded to first order in qubit k's contribution
                    let via_magnitude = amp * ci * cj * sk;
                    // state-dependent phase offset tilting the (i, j) pair,
                    // to first order in qubits i and j
                    let via_phase = amp * (si * cj + ci * sj) * ck;
                    triples.push(TripleCoupling {
                        i,
                        j,
                        k,
                        value: via_magnitude + via_phase,
                        via_magnitude: Some(via_magnitude),
                        via_phase: Some(via_phase),
                    });
                }
            }
        }
    }

    CouplingReport::from_parts(
        T::zero(),
        energies,
        pairs,
        triples,
        if with_triples { ReportOrder::WithTriples } else { ReportOrder::FirstOrder },
    )
}

/// Location and value of the classical potential minimum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialMinimum<T: Float = f64> {
    /// Minimizing common phase, radians.
    pub phi: T,
    /// U at the minimum, GHz.
    pub energy: T,
}

/// Ground-state energy of the classical Josephson potential for a fixed
/// spin assignment:
///
/// U_s(phi) = E_J (1 - cos phi)
///          + sum_l [E_J,l cos(phi + phi_l) - s_l E_SO,l sin(phi + phi_l)]
///          + sum_l s_l E_Z,l cos(theta_l) / 2,
///
/// minimized over phi. Serves as the independent oracle for the perturbative
/// coupling formulas; requires aligned Zeeman fields (the diagonal-energy
/// picture breaks otherwise).
pub fn classical_energy_oracle<T: Float>(
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
) -> Result<T> {
    classical_energy_minimum(config, spins).map(|m| m.energy)
}

/// As [`classical_energy_oracle`], also reporting the minimizing phase.
pub fn classical_energy_minimum<T: Float>(
    config: &ChainConfig<T>,
    spins: &SpinConfiguration,
) -> Result<PotentialMinimum<T>> {
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
    let e_j = config.e_j_coupling;
    let half = c::<T>(0.5);

    let zeeman: T = (0..n)
        .map(|l| half * spins.s::<T>(l) * config.asqs[l].e_z * config.asqs[l].theta.cos())
        .fold(T::zero(), |a, b| a + b);

    let u = |phi: T| -> T {
        let mut v = e_j * (T::one() - phi.cos()) + zeeman;
        for l in 0..n {
            let a = &config.asqs[l];
            let arg = phi + phases[l];
            v += a.e_j * arg.cos() - spins.s::<T>(l) * a.e_so * arg.sin();
        }
        v
    };
    let du = |phi: T| -> T {
        let mut v = e_j * phi.sin();
        for l in 0..n {
            let a = &config.asqs[l];
            let arg = phi + phases[l];
            v -= a.e_j * arg.sin() + spins.s::<T>(l) * a.e_so * arg.cos();
        }
        v
    };
    let ddu = |phi: T| -> T {
        let mut v = e_j * phi.cos();
        for l in 0..n {
            let a = &config.asqs[l];
            let arg = phi + phases[l];
            v += -a.e_j * arg.cos() + spins.s::<T>(l) * a.e_so * arg.sin();
        }
        v
    };

    // amplitude of the (exactly sinusoidal) phi dependence, for tolerances
    let amp = {
        let mut zr = -e_j;
        let mut zi = T::zero();
        for l in 0..n {
            let (sin, cos) = phases[l].sin_cos();
            let a = &config.asqs[l];
            let so = spins.s::<T>(l) * a.e_so;
            zr += a.e_j * cos - so * sin;
            zi += a.e_j * sin + so * cos;
        }
        (zr * zr + zi * zi).sqrt()
    };
    if amp == T::zero() {
        // flat potential; every phase is a minimum
        return Ok(PotentialMinimum { phi: T::zero(), energy: u(T::zero()) });
    }

    // scan the period for descending-to-ascending derivative sign changes;
    // more than one would mean the well structure is not junction-dominated
    let grid = 128usize;
    let step = T::two_pi() / c::<T>(grid as f64);
    let mut brackets: Vec<(T, T)> = Vec::new();
    let mut prev_phi = -T::pi();
    let mut prev_d = du(prev_phi);
    for k in 1..=grid {
        let phi = -T::pi() + step * c::<T>(k as f64);
        let d = du(phi);
        if prev_d < T::zero() && d >= T::zero() {
            brackets.push((prev_phi, phi));
        }
        prev_phi = phi;
        prev_d = d;
    }
    if brackets.len() > 1 {
        return Err(Error::MultipleMinima);
    }
    // seed at the arg-min of the potential linearized about phi = 0, then
    // make sure the bracket straddles the sign change
    let (mut lo, mut hi) = match brackets.first() {
        Some(&b) => b,
        None => return Err(Error::NonConvergence("no potential minimum bracket found".into())),
    };
    let curvature0 = ddu(T::zero());
    if curvature0 > T::zero() {
        let seed = -du(T::zero()) / curvature0;
        if seed > lo && seed < hi {
            if du(seed) < T::zero() {
                lo = seed;
            } else {
                hi = seed;
            }
        }
    }

    let tol = c::<T>(1e-12).max(amp * T::default_epsilon() * c::<T>(64.0));
    let mut mid = (lo + hi) * c::<T>(0.5);
    for _ in 0..200 {
        mid = (lo + hi) * c::<T>(0.5);
        let d = du(mid);
        if d.abs() <= tol {
            break;
        }
        if d < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if du(mid).abs() > tol {
        return Err(Error::NonConvergence(format!(
            "potential derivative {:.3e} above tolerance {:.3e}",
            as_f64(du(mid).abs()),
            as_f64(tol)
        )));
    }
    if !(ddu(mid) > T::zero()) {
        return Err(Error::MultipleMinima);
    }
    Ok(PotentialMinimum { phi: mid, energy: u(mid) })
}

/// Oracle energies for every spin configuration, indexed per
/// [`SpinConfiguration::index`].
pub fn oracle_energy_table<T: Float>(config: &ChainConfig<T>) -> Result<Vec<T>> {
    let n = config.n();
    (0..1usize << n)
        .map(|idx| classical_energy_oracle(config, &SpinConfiguration::from_index(n, idx)))
        .collect()
}

/// Inverts a full diagonal energy table into model coefficients:
/// E(s) = c0 + sum_i E_i s_i / 2 + sum_{i<j} J_ij s_i s_j / 2 + ... (exact
/// for the provided table; orders above three are discarded).
///
/// `energies[idx]` must hold the energy of `SpinConfiguration::from_index(n,
/// idx)` for all 2^n configurations.
pub fn extract_couplings_walsh<T: Float>(n: usize, energies: &[T]) -> Result<CouplingReport<T>> {
    let dim = 1usize << n;
    if energies.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: energies.len() });
    }
    // in-place Walsh-Hadamard transform: x[mask] = sum_b (-1)^popcount(mask & b) E[b]
    let mut x = energies.to_vec();
    let mut len = 1usize;
    while len < dim {
        let mut i = 0;
        while i < dim {
            for j in i..i + len {
                let a = x[j];
                let b = x[j + len];
                x[j] = a + b;
                x[j + len] = a - b;
            }
            i += 2 * len;
        }
        len <<= 1;
    }
    let scale = c::<T>(1.0 / dim as f64);
    let coeff = |mask: usize| x[mask] * scale;
    let bit = |i: usize| 1usize << (n - 1 - i);

    let two = c::<T>(2.0);
    let constant = coeff(0);
    let single: Vec<T> = (0..n).map(|i| two * coeff(bit(i))).collect();
    let mut pairs = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = two * coeff(bit(i) | bit(j));
            pairs[(i, j)] = v;
            pairs[(j, i)] = v;
        }
    }
    let mut triples = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                triples.push(TripleCoupling {
                    i,
                    j,
                    k,
                    value: two * coeff(bit(i) | bit(j) | bit(k)),
                    via_magnitude: None,
                    via_phase: None,
                });
            }
        }
    }
    CouplingReport::from_parts(constant, single, pairs, triples, ReportOrder::WithTriples)
}

/// Which setpoint class each qubit of a pair sits at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    OnOn,
    OnOff,
    OffOff,
}

impl std::fmt::Display for PairClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairClass::OnOn => "on_on",
            PairClass::OnOff => "on_off",
            PairClass::OffOff => "off_off",
        })
    }
}

/// One Monte Carlo draw of one pair coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrosstalkSample<T: Float = f64> {
    pub sample: usize,
    pub i: usize,
    pub j: usize,
    pub class: PairClass,
    /// Signed coupling under the perturbed fluxes, GHz.
    pub j_ghz: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassSummary<T: Float = f64> {
    pub count: usize,
    pub median: Option<T>,
    pub max: Option<T>,
}

/// Flux-offset Monte Carlo results: |J| per pair class, per-draw rows, and
/// per-class summaries.
#[derive(Clone, Debug)]
pub struct FluxNoiseStats<T: Float = f64> {
    pub on_on: Vec<T>,
    pub on_off: Vec<T>,
    pub off_off: Vec<T>,
    pub rows: Vec<CrosstalkSample<T>>,
    pub summary_on_on: ClassSummary<T>,
    pub summary_on_off: ClassSummary<T>,
    pub summary_off_off: ClassSummary<T>,
}

fn summarize<T: Float>(values: &[T]) -> ClassSummary<T> {
    if values.is_empty() {
        return ClassSummary { count: 0, median: None, max: None };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("couplings must be comparable"));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) * c::<T>(0.5)
    };
    ClassSummary { count: sorted.len(), median: Some(median), max: sorted.last().copied() }
}

/// Perturbs every loop flux of a plan by independent uniform offsets in
/// [-delta, +delta] (units of the flux quantum) and recomputes all pairwise
/// couplings, classifying each pair by the plan's ON/OFF tags.
///
/// Sample k draws from a ChaCha8 stream with `set_stream(k)` under `seed`,
/// so individual samples are reproducible regardless of the sample count.
pub fn crosstalk_monte_carlo<T: Float>(
    config: &ChainConfig<T>,
    plan: &FluxPlan<T>,
    delta: T,
    samples: usize,
    seed: u64,
) -> Result<FluxNoiseStats<T>> {
    let n = config.n();
    if plan.fluxes.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: plan.fluxes.len() });
    }
    if !(delta >= T::zero()) {
        return Err(Error::InvalidParameter("delta must be >= 0".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let on: Vec<bool> = plan
        .targets
        .iter()
        .map(|t| {
            if t.is_free() {
                Err(Error::InvalidParameter(
                    "plan has free phase targets; crosstalk classes are undefined".into(),
                ))
            } else {
                Ok(t.is_on())
            }
        })
        .collect::<Result<_>>()?;

    let mut stats = FluxNoiseStats {
        on_on: Vec::new(),
        on_off: Vec::new(),
        off_off: Vec::new(),
        rows: Vec::with_capacity(samples * n * (n - 1) / 2),
        summary_on_on: ClassSummary { count: 0, median: None, max: None },
        summary_on_off: ClassSummary { count: 0, median: None, max: None },
        summary_off_off: ClassSummary { count: 0, median: None, max: None },
    };
    let unit = Uniform::new_inclusive(-1.0f64, 1.0f64);
    for sample in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample as u64);
        let fluxes: Vec<T> = plan
            .fluxes
            .iter()
            .map(|&f| frac(f + delta * c::<T>(unit.sample(&mut rng))))
            .collect();
        let perturbed = config.with_fluxes(fluxes)?;
        let eff = effective_total_ej(&perturbed, None)?;
        let phases = perturbed.phases();
        for i in 0..n {
            for j in (i + 1)..n {
                let jij = pair_coupling_from(&perturbed, &phases, &eff, i, j);
                let class = match (on[i], on[j]) {
                    (true, true) => PairClass::OnOn,
                    (false, false) => PairClass::OffOff,
                    _ => PairClass::OnOff,
                };
                match class {
                    PairClass::OnOn => stats.on_on.push(jij.abs()),
                    PairClass::OnOff => stats.on_off.push(jij.abs()),
                    PairClass::OffOff => stats.off_off.push(jij.abs()),
                }
                stats.rows.push(CrosstalkSample { sample, i, j, class, j_ghz: jij });
            }
        }
    }
    stats.summary_on_on = summarize(&stats.on_on);
    stats.summary_on_off = summarize(&stats.on_off);
    stats.summary_off_off = summarize(&stats.off_off);
    Ok(stats)
}
