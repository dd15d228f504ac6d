//! Loop-flux planning: translating per-qubit ON/OFF intents into loop fluxes
//! and coil currents.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::ChainConfig;
use crate::coupling::effective_total_ej;
use crate::error::{Error, Result};
use crate::num::{as_f64, c, frac, wrap_angle, Float};

/// Intended phase setpoint for one qubit, relative to the effective-energy
/// phase offset. ON qubits sit at a coupling extremum, OFF qubits at a zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseTarget {
    /// phi - phi_E~ = 0
    OnZero,
    /// phi - phi_E~ = pi
    OnPi,
    /// phi - phi_E~ = +pi/2
    OffPlus,
    /// phi - phi_E~ = -pi/2
    OffMinus,
    /// unconstrained
    Free,
}

impl PhaseTarget {
    /// Target angle relative to the effective phase offset; None for Free.
    pub fn angle<T: Float>(self) -> Option<T> {
        match self {
            PhaseTarget::OnZero => Some(T::zero()),
            PhaseTarget::OnPi => Some(T::pi()),
            PhaseTarget::OffPlus => Some(T::frac_pi_2()),
            PhaseTarget::OffMinus => Some(-T::frac_pi_2()),
            PhaseTarget::Free => None,
        }
    }

    pub fn is_on(self) -> bool {
        matches!(self, PhaseTarget::OnZero | PhaseTarget::OnPi)
    }

    pub fn is_off(self) -> bool {
        matches!(self, PhaseTarget::OffPlus | PhaseTarget::OffMinus)
    }

    pub fn is_free(self) -> bool {
        matches!(self, PhaseTarget::Free)
    }
}

impl std::fmt::Display for PhaseTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhaseTarget::OnZero => "on-0",
            PhaseTarget::OnPi => "on-pi",
            PhaseTarget::OffPlus => "off-plus",
            PhaseTarget::OffMinus => "off-minus",
            PhaseTarget::Free => "free",
        })
    }
}

/// A resolved flux assignment for the whole chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxPlan<T: Float = f64> {
    pub targets: Vec<PhaseTarget>,
    /// Loop fluxes in units of the flux quantum, each in [0, 1).
    pub fluxes: Vec<T>,
    /// Effective-energy phase offset the fluxes were solved against.
    pub phase_offset_used: T,
    /// False only if the self-consistency iteration hit its cap.
    pub converged: bool,
}

impl<T: Float> FluxPlan<T> {
    pub fn n(&self) -> usize {
        self.fluxes.len()
    }

    /// Cumulative phases produced by this plan's fluxes.
    pub fn phases(&self) -> Vec<T> {
        crate::chain::cumulative_phases(&self.fluxes)
    }

    /// Verifies that every non-free qubit sits within `tol` radians of its
    /// target angle (relative to `phase_offset`).
    pub fn check_targets(&self, phase_offset: T, tol: T) -> Result<()> {
        let phases = self.phases();
        for (i, (&t, &phi)) in self.targets.iter().zip(phases.iter()).enumerate() {
            let Some(want) = t.angle::<T>() else { continue };
            let err = wrap_angle(phi - phase_offset - want).abs();
            // wrap_angle maps the pi target to -pi when overshooting by eps
            let err = err.min((T::two_pi() - err).abs());
            if err > tol {
                return Err(Error::InvalidParameter(format!(
                    "qubit {i} misses target {t} by {:.3e} rad",
                    as_f64(err)
                )));
            }
        }
        Ok(())
    }
}

/// Loop fluxes realizing absolute phase targets `angle + offset` per qubit.
/// All targets must be non-free.
fn fluxes_for_targets<T: Float>(targets: &[PhaseTarget], offset: T) -> Vec<T> {
    let two_pi = T::two_pi();
    let mut prev = T::zero();
    targets
        .iter()
        .map(|t| {
            let a = t.angle::<T>().expect("free targets have no flux assignment") + offset;
            let f = frac((a - prev) / two_pi);
            prev = a;
            f
        })
        .collect()
}

/// ON/OFF tags for operating a selected subset: selected qubits go ON at
/// phase zero, the rest alternate OFF signs so idle couplings stay balanced.
/// The alternation restarts after every selected qubit.
pub fn selective_tags(n: usize, selected: &[usize]) -> Vec<PhaseTarget> {
    let mut tags = vec![PhaseTarget::OffPlus; n];
    let mut k = 0usize;
    for (i, tag) in tags.iter_mut().enumerate() {
        if selected.contains(&i) {
            *tag = PhaseTarget::OnZero;
            k = 0;
        } else {
            *tag = if k % 2 == 0 { PhaseTarget::OffPlus } else { PhaseTarget::OffMinus };
            k += 1;
        }
    }
    tags
}

/// Solves targets to fluxes, iterating because the effective-energy phase
/// offset itself depends on the fluxes whenever any E_J,i is nonzero.
fn solve_targets<T: Float>(config: &ChainConfig<T>, targets: Vec<PhaseTarget>) -> Result<FluxPlan<T>> {
    let n = config.n();
    if targets.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: targets.len() });
    }
    if config.asqs.iter().all(|a| a.e_j == T::zero()) {
        // offset is identically zero; one direct solve
        let fluxes = fluxes_for_targets(&targets, T::zero());
        return Ok(FluxPlan { targets, fluxes, phase_offset_used: T::zero(), converged: true });
    }
    let tol = c::<T>(1e-12);
    let mut offset = T::zero();
    let mut fluxes = fluxes_for_targets(&targets, offset);
    for _ in 0..100 {
        let trial = config.with_fluxes(fluxes.clone())?;
        let next_offset = effective_total_ej(&trial, None)?.phase_offset;
        let next = fluxes_for_targets(&targets, next_offset);
        // compare on the flux circle
        let delta = fluxes
            .iter()
            .zip(next.iter())
            .map(|(&a, &b)| (frac(a - b + c::<T>(0.5)) - c::<T>(0.5)).abs())
            .fold(T::zero(), |m, d| m.max(d));
        fluxes = next;
        offset = next_offset;
        if delta < tol {
            return Ok(FluxPlan { targets, fluxes, phase_offset_used: offset, converged: true });
        }
    }
    Ok(FluxPlan { targets, fluxes, phase_offset_used: offset, converged: false })
}

/// Parks every qubit OFF with alternating signs: phases +pi/2, -pi/2, ...
/// relative to a zero offset, i.e. fluxes [1/4, 1/2, 1/2, ...].
pub fn plan_idle<T: Float>(n: usize) -> Result<FluxPlan<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one qubit".into()));
    }
    let targets: Vec<PhaseTarget> = (0..n)
        .map(|i| if i % 2 == 0 { PhaseTarget::OffPlus } else { PhaseTarget::OffMinus })
        .collect();
    let fluxes = fluxes_for_targets(&targets, T::zero());
    Ok(FluxPlan { targets, fluxes, phase_offset_used: T::zero(), converged: true })
}

/// Turns exactly qubits i and j ON (phase zero) and parks the rest OFF,
/// self-consistently with the effective phase offset of `config`.
pub fn plan_pair<T: Float>(config: &ChainConfig<T>, i: usize, j: usize) -> Result<FluxPlan<T>> {
    let n = config.n();
    if i == j {
        return Err(Error::InvalidParameter("pair indices must differ".into()));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!(
            "pair ({i}, {j}) out of range for {n} qubits"
        )));
    }
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    solve_targets(config, selective_tags(n, &[a, b]))
}

/// Global coupling layouts that leave every qubit ON.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllToAllVariant {
    /// All phases 0: every pair coupling has the same sign.
    Uniform,
    /// Phases alternate 0, pi: pair couplings alternate sign with the
    /// index distance.
    Alternating,
}

/// All-to-all layouts need no chain parameters: the assignments below hold
/// the ON condition for any offset-free chain (all E_J,i = 0). Chains with
/// junction-energy asymmetry should re-solve via [`plan_pair`]-style planning.
pub fn plan_all_to_all<T: Float>(n: usize, variant: AllToAllVariant) -> Result<FluxPlan<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("all-to-all needs at least two qubits".into()));
    }
    let targets: Vec<PhaseTarget> = match variant {
        AllToAllVariant::Uniform => vec![PhaseTarget::OnZero; n],
        AllToAllVariant::Alternating => (0..n)
            .map(|i| if i % 2 == 0 { PhaseTarget::OnZero } else { PhaseTarget::OnPi })
            .collect(),
    };
    let fluxes = fluxes_for_targets(&targets, T::zero());
    Ok(FluxPlan { targets, fluxes, phase_offset_used: T::zero(), converged: true })
}

/// Which qubit state the readout plan prepares for contrast measurements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutPlanMode {
    /// Target qubit ON, everyone else OFF (maximum target dispersion).
    OnTarget,
    /// Target qubit OFF, everyone else ON at phase zero (blind spot check).
    OffTarget,
}

/// Flux plan for single-qubit dispersive readout of `target`.
pub fn plan_readout<T: Float>(
    config: &ChainConfig<T>,
    target: usize,
    mode: ReadoutPlanMode,
) -> Result<FluxPlan<T>> {
    let n = config.n();
    if target >= n {
        return Err(Error::InvalidParameter(format!(
            "target {target} out of range for {n} qubits"
        )));
    }
    let targets = match mode {
        ReadoutPlanMode::OnTarget => selective_tags(n, &[target]),
        ReadoutPlanMode::OffTarget => {
            let mut tags = vec![PhaseTarget::OnZero; n];
            tags[target] = PhaseTarget::OffPlus;
            tags
        }
    };
    solve_targets(config, targets)
}

/// Linear coil model: fluxes = mutual * currents + offsets, fluxes in units
/// of the flux quantum, currents in microamps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasModel<T: Float = f64> {
    /// Mutual inductance matrix, flux quanta per microamp. Row i gives the
    /// couplings of every coil into loop i.
    pub mutual: Vec<Vec<T>>,
    /// Stray flux per loop, flux quanta.
    pub offsets: Vec<T>,
}

impl<T: Float> BiasModel<T> {
    pub fn new(mutual: Vec<Vec<T>>, offsets: Vec<T>) -> Result<Self> {
        let n = offsets.len();
        if mutual.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mutual.len() });
        }
        for row in &mutual {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
        }
        let finite = mutual.iter().flatten().chain(offsets.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("bias model entries must be finite".into()));
        }
        Ok(Self { mutual, offsets })
    }

    /// Identity mutuals (1 flux quantum per microamp), zero offsets.
    pub fn identity(n: usize) -> Self {
        let mut mutual = vec![vec![T::zero(); n]; n];
        for (i, row) in mutual.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Self { mutual, offsets: vec![T::zero(); n] }
    }

    pub fn n(&self) -> usize {
        self.offsets.len()
    }

    pub fn matrix(&self) -> DMatrix<T> {
        let n = self.n();
        DMatrix::from_fn(n, n, |r, c| self.mutual[r][c])
    }

    /// Fluxes produced by a current vector (not reduced mod 1).
    pub fn apply(&self, currents: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        if currents.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: currents.len() });
        }
        Ok((0..n)
            .map(|i| {
                self.mutual[i]
                    .iter()
                    .zip(currents.iter())
                    .map(|(&m, &c)| m * c)
                    .fold(self.offsets[i], |a, b| a + b)
            })
            .collect())
    }
}

/// Coil currents (microamps) realizing a plan's fluxes under a bias model,
/// by solving mutual * I + offsets = fluxes.
pub fn currents_for_plan<T: Float>(plan: &FluxPlan<T>, bias: &BiasModel<T>) -> Result<Vec<T>> {
    let n = plan.n();
    if bias.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bias.n() });
    }
    let m = bias.matrix();
    let rhs = DVector::from_fn(n, |i, _| plan.fluxes[i] - bias.offsets[i]);
    let solved = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("bias mutual matrix is singular".into()))?;
    Ok(solved.iter().copied().collect())
}
