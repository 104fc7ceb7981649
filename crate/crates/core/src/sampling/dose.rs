use crate::error::{Error, Result};

/// Electron-exposure budget, proxied by dwell time times probe count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoseBudget {
    /// `reference_dwell * reference_m`, in microsecond-pixels.
    pub budget: f64,
    pub reference_dwell: f64,
    pub reference_m: usize,
}

impl DoseBudget {
    pub fn new(reference_dwell: f64, reference_m: usize) -> Result<Self> {
        let budget = reference_dwell * reference_m as f64;
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dose budget must be positive, got {reference_dwell} us x {reference_m}"
            )));
        }
        Ok(Self {
            budget,
            reference_dwell,
            reference_m,
        })
    }
}

/// Dwell time that spends the whole budget on `m` probe positions.
///
/// `m` is real-valued so a nominal count `ratio * N` can be used as well as
/// the integer size of a concrete plan.
pub fn constrained_dwell(budget: &DoseBudget, m: f64) -> Result<f64> {
    if !(m >= 1.0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cannot spread a dose budget over {m} positions"
        )));
    }
    Ok(budget.budget / m)
}
