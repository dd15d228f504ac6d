//! Simulation and planning toolkit for chains of Andreev spin qubits (ASQs)
//! connected in parallel to a common coupling Josephson junction.
//!
//! The crate computes effective spin-spin couplings from circuit parameters
//! and loop fluxes, plans flux configurations (idle, selective pair,
//! all-to-all, readout), predicts transmon/fluxonium readout spectra with a
//! dispersively coupled resonator, simulates gate and Ising dynamics, and
//! simulates the sequential device tune-up against a virtual device.
//!
//! Everything numeric is generic over the scalar type via [`num::Float`]
//! (with `f64` defaults); concrete aliases live at the crate root.
//!
//! Conventions used throughout: energies are frequencies in GHz (E/h),
//! times are ns, currents are microamps, fluxes are in units of the flux
//! quantum, phases and angles are radians, and tensor products order qubit 0
//! as the most significant factor with spin up mapped to bit 0.

pub mod chain;
pub mod constants;
pub mod coupling;
pub mod cqed;
pub mod dynamics;
pub mod error;
pub mod flux;
mod linalg;
pub mod num;
pub mod spin;
pub mod tuneup;

pub use chain::{cumulative_phases, AsqParams, ChainConfig, SpinConfiguration};
pub use cqed::{
    avoided_crossing_scan, dressed_resonator_detail, dressed_resonator_freq, fluxonium_levels,
    joint_readout_ladder, josephson_potential, phase_grid_levels, transmon_levels,
    AvoidedCrossingRow, AvoidedCrossingScan, AvoidedCrossingSetpoint, CircuitKind, DressedDetail,
    ReadoutCircuit, ResonatorSpec, SpinBranchSpectrum,
};
pub use coupling::{
    classical_energy_minimum, classical_energy_oracle, coupling_report, crosstalk_monte_carlo,
    effective_total_ej, extract_couplings_walsh, oracle_energy_table, pairwise_coupling,
    CouplingReport, EffectiveEj, FluxNoiseStats, PairClass, ReportOrder, TripleCoupling,
};
pub use dynamics::{
    cphase_gate, cphase_gate_with_spectators, evolve, ising_quench, max_qubits,
    partitioning_report, spectator_infidelity, GateResult, PulseSchedule, PulseSegment,
    QuenchSeries, SpectatorTreatment, SpectatorVariant, DYNAMICS_QUBIT_CAP,
};
pub use error::{Error, Result};
pub use flux::{
    currents_for_plan, plan_all_to_all, plan_idle, plan_pair, plan_readout, selective_tags,
    AllToAllVariant, BiasModel, FluxPlan, PhaseTarget, ReadoutPlanMode,
};
pub use spin::{
    asq_hamiltonian, build_spin_hamiltonian, build_spin_hamiltonian_with_cap, current_operator,
    junction_current, rotate_coupling, spin_current, RotatedCoupling, SpinOperatorMatrix,
};
pub use tuneup::{
    calibrate_qubit, estimate_coupling_ej, run_tuneup, Calibration, ComparisonRow,
    QubitCalibration, VirtualDevice,
};

/// Single-precision aliases.
pub type AsqParams32 = AsqParams<f32>;
pub type ChainConfig32 = ChainConfig<f32>;
pub type CouplingReport32 = CouplingReport<f32>;
pub type FluxPlan32 = FluxPlan<f32>;
