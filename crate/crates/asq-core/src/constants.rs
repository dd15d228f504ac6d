//! Physical constants (SI, 2019 exact values).

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// Superconducting flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * E_CHARGE);

/// Converts an energy stated as a frequency in GHz into joules.
pub fn ghz_to_joule(f_ghz: f64) -> f64 {
    PLANCK * f_ghz * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_value() {
        // h/2e = 2.0678e-15 Wb
        assert!((FLUX_QUANTUM - 2.067_833_848e-15).abs() < 1e-24);
    }
}
