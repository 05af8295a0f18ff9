use crate::error::{Error, Result};
use crate::operators::{eigvalsh, hermiticity_defect, is_finite, op_norm, outer, CMatrix, CVector};

/// A pure state vector or a density matrix on C^d.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(CVector),
    Mixed(CMatrix),
}

impl QuantumState {
    pub fn pure(v: CVector) -> Result<Self> {
        if v.is_empty() || v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self::Pure(v))
    }

    /// Validates Hermiticity, positivity and finiteness. The trace is not
    /// forced to one, since non-selective maps may shrink it.
    pub fn mixed(rho: CMatrix) -> Result<Self> {
        validate_density(&rho, None)?;
        Ok(Self::Mixed(rho))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Mixed(r) => r.nrows(),
        }
    }

    /// Squared norm for pure states, trace for mixed ones.
    pub fn weight(&self) -> f64 {
        match self {
            Self::Pure(v) => v.norm_squared(),
            Self::Mixed(r) => r.trace().re,
        }
    }

    pub fn density(&self) -> CMatrix {
        match self {
            Self::Pure(v) => outer(v, v),
            Self::Mixed(r) => r.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&CVector> {
        match self {
            Self::Pure(v) => Some(v),
            Self::Mixed(_) => None,
        }
    }
}

impl From<CVector> for QuantumState {
    fn from(v: CVector) -> Self {
        Self::Pure(v)
    }
}

/// Checks the density-matrix contract: finite, square, Hermitian to 1e-12
/// (relative), smallest eigenvalue above -1e-9, and trace within 1e-10 of
/// `trace` when given.
pub fn validate_density(rho: &CMatrix, trace: Option<f64>) -> Result<()> {
    if rho.nrows() != rho.ncols() || rho.is_empty() {
        return Err(Error::InvalidDensityMatrix(format!(
            "shape {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if !is_finite(rho) {
        return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
    }
    let scale = op_norm(rho).max(1.0);
    let herm = hermiticity_defect(rho);
    if herm > 1e-12 * scale {
        return Err(Error::InvalidDensityMatrix(format!(
            "Hermiticity defect {herm:e}"
        )));
    }
    let min = eigvalsh(rho)[0];
    if min < -1e-9 {
        return Err(Error::InvalidDensityMatrix(format!(
            "negative eigenvalue {min:e}"
        )));
    }
    if let Some(t) = trace {
        let tr = rho.trace().re;
        if (tr - t).abs() > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != {t}")));
        }
    }
    Ok(())
}
