//! Circuit parameter types: per-qubit energies, the chain configuration, and
//! the flux-to-phase relation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{as_f64, c, frac, wrap_angle, Float};

/// Per-qubit circuit parameters. All energies are stated as frequencies
/// (GHz, i.e. E/h); `theta` is the angle between the Zeeman field and the
/// zero-field spin direction, radians in [0, pi].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsqParams<T: Float = f64> {
    /// Spin-independent Josephson energy of the qubit junction, GHz.
    #[serde(default = "zero")]
    pub e_j: T,
    /// Spin-dependent Josephson energy, GHz.
    #[serde(default = "zero")]
    pub e_so: T,
    /// Zeeman energy magnitude, GHz.
    #[serde(default = "zero")]
    pub e_z: T,
    /// Zeeman misalignment angle, radians.
    #[serde(default = "zero")]
    pub theta: T,
}

fn zero<T: Float>() -> T {
    T::zero()
}

impl<T: Float> Default for AsqParams<T> {
    fn default() -> Self {
        Self { e_j: T::zero(), e_so: T::zero(), e_z: T::zero(), theta: T::zero() }
    }
}

impl<T: Float> AsqParams<T> {
    /// Builds a parameter set, normalizing `theta` into [0, pi].
    ///
    /// Angles outside [0, pi] describe the same field direction up to a
    /// mirror of the transverse axis, so they are folded rather than
    /// rejected.
    pub fn new(e_j: T, e_so: T, e_z: T, theta: T) -> Result<Self> {
        for (name, v) in [("e_j", e_j), ("e_so", e_so), ("e_z", e_z)] {
            if !(v >= T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= 0, got {}",
                    as_f64(v)
                )));
            }
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        let mut t = theta - T::two_pi() * (theta / T::two_pi()).floor();
        if t > T::pi() {
            t = T::two_pi() - t;
        }
        Ok(Self { e_j, e_so, e_z, theta: t })
    }

    /// Convenience constructor for a qubit with only Josephson terms.
    pub fn josephson(e_j: T, e_so: T) -> Result<Self> {
        Self::new(e_j, e_so, T::zero(), T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_j >= T::zero() && self.e_so >= T::zero() && self.e_z >= T::zero()) {
            return Err(Error::InvalidParameter("energies must be >= 0".into()));
        }
        if !(self.theta >= T::zero() && self.theta <= T::pi()) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, pi], got {}",
                as_f64(self.theta)
            )));
        }
        Ok(())
    }

    /// True when the Zeeman term commutes with sigma-z (theta = 0 or pi, or
    /// no field at all).
    pub fn zeeman_aligned(&self) -> bool {
        self.e_z == T::zero() || self.theta == T::zero() || self.theta == T::pi()
    }
}

/// The full chain: a coupling junction shunting N qubits, plus the N loop
/// fluxes (units of the flux quantum, stored modulo 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig<T: Float = f64> {
    /// Coupling-junction Josephson energy, GHz. Must be positive.
    pub e_j_coupling: T,
    /// Per-qubit parameters, ordered along the chain.
    pub asqs: Vec<AsqParams<T>>,
    /// Loop fluxes Phi_i in units of Phi_0, one per qubit.
    pub fluxes: Vec<T>,
}

impl<T: Float> ChainConfig<T> {
    pub fn new(e_j_coupling: T, asqs: Vec<AsqParams<T>>, fluxes: Vec<T>) -> Result<Self> {
        let mut cfg = Self { e_j_coupling, asqs, fluxes };
        cfg.fluxes = cfg.fluxes.iter().map(|&f| frac(f)).collect();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        // zero is legal (pure-inductor or oscillator studies); negative is not
        if !(self.e_j_coupling >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "e_j_coupling must be >= 0, got {}",
                as_f64(self.e_j_coupling)
            )));
        }
        if self.asqs.is_empty() {
            return Err(Error::InvalidParameter("chain needs at least one qubit".into()));
        }
        if self.asqs.len() != self.fluxes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.asqs.len(),
                got: self.fluxes.len(),
            });
        }
        for asq in &self.asqs {
            asq.validate()?;
        }
        if self.fluxes.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("fluxes must be finite".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.asqs.len()
    }

    /// Cumulative phase drops across the qubits, radians in (-pi, pi].
    pub fn phases(&self) -> Vec<T> {
        cumulative_phases(&self.fluxes)
    }

    /// Same chain with a different flux vector (stored modulo 1).
    pub fn with_fluxes(&self, fluxes: Vec<T>) -> Result<Self> {
        Self::new(self.e_j_coupling, self.asqs.clone(), fluxes)
    }
}

/// Phase drop across qubit i from the loop fluxes: 2 pi times the running
/// flux sum, wrapped into (-pi, pi].
pub fn cumulative_phases<T: Float>(fluxes: &[T]) -> Vec<T> {
    let mut sum = T::zero();
    fluxes
        .iter()
        .map(|&f| {
            sum += f;
            // wrap the flux sum first so long chains never lose precision
            // to a large multiple of 2 pi
            wrap_angle(T::two_pi() * (sum - sum.round()))
        })
        .collect()
}

/// A classical spin assignment: +1 / -1 for each qubit's sigma-z eigenvalue.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfiguration {
    pub signs: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("spin signs must be +1 or -1".into()));
        }
        Ok(Self { signs })
    }

    pub fn all_up(n: usize) -> Self {
        Self { signs: vec![1; n] }
    }

    pub fn all_down(n: usize) -> Self {
        Self { signs: vec![-1; n] }
    }

    /// Decodes a basis-state index. Qubit 0 is the most significant bit and
    /// a 0 bit means spin +1 (up), matching the tensor-product ordering used
    /// by every operator in this crate.
    pub fn from_index(n: usize, index: usize) -> Self {
        let signs = (0..n)
            .map(|i| if index >> (n - 1 - i) & 1 == 0 { 1 } else { -1 })
            .collect();
        Self { signs }
    }

    /// Inverse of [`SpinConfiguration::from_index`].
    pub fn index(&self) -> usize {
        self.signs
            .iter()
            .fold(0usize, |acc, &s| (acc << 1) | usize::from(s < 0))
    }

    pub fn n(&self) -> usize {
        self.signs.len()
    }

    pub fn up_count(&self) -> usize {
        self.signs.iter().filter(|&&s| s > 0).count()
    }

    /// The sign as a scalar.
    pub fn s<T: Float>(&self, i: usize) -> T {
        c(f64::from(self.signs[i]))
    }
}
