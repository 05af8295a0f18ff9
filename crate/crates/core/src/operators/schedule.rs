use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{hermiticity_defect, op_norm, CMatrix};
use crate::error::{Error, Result};

type MatrixFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

/// Uniform time grid on [0, T] with N steps. Points are computed from the
/// integer index, so `t(N) == T` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParam {
                name: "T".into(),
                reason: format!("total time must be positive, got {horizon}"),
            });
        }
        if steps == 0 {
            return Err(Error::InvalidParam {
                name: "N".into(),
                reason: "step count must be at least 1".into(),
            });
        }
        Ok(Self { horizon, steps })
    }

    /// Grid with step closest to `dt` that divides T evenly.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParam {
                name: "dt".into(),
                reason: format!("step must be positive, got {dt}"),
            });
        }
        Self::new(horizon, ((horizon / dt).round() as usize).max(1))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        (k as f64 / self.steps as f64) * self.horizon
    }

    /// Midpoint of step k, i.e. (t_k + t_{k+1}) / 2.
    pub fn midpoint(&self, k: usize) -> f64 {
        ((k as f64 + 0.5) / self.steps as f64) * self.horizon
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.t(k))
    }

    /// Same horizon, `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            horizon: self.horizon,
            steps: self.steps * factor.max(1),
        }
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        ((t / self.horizon) * self.steps as f64)
            .round()
            .clamp(0.0, self.steps as f64) as usize
    }
}

/// A time-dependent operator H(t) on [0, T], optionally carrying an analytic
/// derivative. Cheap to clone; all closures are shared.
#[derive(Clone)]
pub struct OperatorSchedule {
    dim: usize,
    horizon: f64,
    hermitian: bool,
    eval: MatrixFn,
    derivative: Option<MatrixFn>,
}

impl fmt::Debug for OperatorSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSchedule")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("hermitian", &self.hermitian)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl OperatorSchedule {
    pub fn new(
        dim: usize,
        horizon: f64,
        hermitian: bool,
        eval: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            horizon,
            hermitian,
            eval: Arc::new(eval),
            derivative: None,
        }
    }

    pub fn with_derivative(
        mut self,
        derivative: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    /// Time-independent schedule; its derivative is zero.
    pub fn constant(h: CMatrix, horizon: f64) -> Self {
        let d = h.nrows();
        let herm = hermiticity_defect(&h) <= 1e-12 * op_norm(&h).max(1.0);
        let zero = CMatrix::zeros(d, d);
        Self::new(d, horizon, herm, move |_| h.clone()).with_derivative(move |_| zero.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn eval(&self, t: f64) -> CMatrix {
        (self.eval)(t)
    }

    /// dH/dt: the analytic callback when present, otherwise a central
    /// difference with step 1e-5 T (one-sided near the ends of [0, T]).
    pub fn derivative(&self, t: f64) -> CMatrix {
        if let Some(d) = &self.derivative {
            return d(t);
        }
        let h = 1e-5 * self.horizon;
        if t - h < 0.0 {
            (self.eval(t + h) * num_complex::Complex64::new(4.0, 0.0) - self.eval(t + 2.0 * h) - self.eval(t) * num_complex::Complex64::new(3.0, 0.0))
                / num_complex::Complex64::new(2.0 * h, 0.0)
        } else if t + h > self.horizon {
            (self.eval(t) * num_complex::Complex64::new(3.0, 0.0) - self.eval(t - h) * num_complex::Complex64::new(4.0, 0.0) + self.eval(t - 2.0 * h))
                / num_complex::Complex64::new(2.0 * h, 0.0)
        } else {
            (self.eval(t + h) - self.eval(t - h)) / num_complex::Complex64::new(2.0 * h, 0.0)
        }
    }

    /// Pointwise sum of two schedules on the same horizon.
    pub fn plus(&self, other: &OperatorSchedule) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let (a, b) = (self.eval.clone(), other.eval.clone());
        let mut out = Self::new(
            self.dim,
            self.horizon,
            self.hermitian && other.hermitian,
            move |t| a(t) + b(t),
        );
        if let (Some(da), Some(db)) = (self.derivative.clone(), other.derivative.clone()) {
            out = out.with_derivative(move |t| da(t) + db(t));
        }
        Ok(out)
    }

    /// Largest relative Hermiticity defect over the grid points.
    pub fn max_hermiticity_defect(&self, grid: &TimeGrid) -> f64 {
        grid.points()
            .map(|t| {
                let h = self.eval(t);
                hermiticity_defect(&h) / op_norm(&h).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}
