//! Concrete H(t) testbeds: a rotating qubit, a Landau-Zener sweep, a
//! rotating spin-1 (three levels) and a ramped transverse-field Ising chain.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{identity, kron, re, sigma_x, sigma_z, CMatrix, OperatorSchedule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    RotatingQubit,
    LandauZener,
    ThreeLevel,
    Tfim,
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotating-qubit" => Ok(Self::RotatingQubit),
            "landau-zener" => Ok(Self::LandauZener),
            "three-level" => Ok(Self::ThreeLevel),
            "tfim" => Ok(Self::Tfim),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RotatingQubit => "rotating-qubit",
            Self::LandauZener => "landau-zener",
            Self::ThreeLevel => "three-level",
            Self::Tfim => "tfim",
        })
    }
}

/// Model name plus numeric parameters.
///
/// | model          | parameters                                  |
/// |----------------|---------------------------------------------|
/// | rotating-qubit | `omega`, `T`                                |
/// | landau-zener   | `v`, `Delta`, `T`                           |
/// | three-level    | `omega`, `T`                                |
/// | tfim           | `L`, `J`, `h0`, `h1`, `T`, optional `shape` |
///
/// `shape` selects the field ramp of the Ising chain: 0 for linear,
/// 1 for sin^2 (vanishing ramp velocity at both ends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn rotating_qubit(omega: f64, horizon: f64) -> Self {
        Self::new("rotating-qubit").with("omega", omega).with("T", horizon)
    }

    pub fn landau_zener(v: f64, delta: f64, horizon: f64) -> Self {
        Self::new("landau-zener")
            .with("v", v)
            .with("Delta", delta)
            .with("T", horizon)
    }

    pub fn three_level(omega: f64, horizon: f64) -> Self {
        Self::new("three-level").with("omega", omega).with("T", horizon)
    }

    pub fn tfim(spins: usize, j: f64, h0: f64, h1: f64, horizon: f64) -> Self {
        Self::new("tfim")
            .with("L", spins as f64)
            .with("J", j)
            .with("h0", h0)
            .with("h1", h1)
            .with("T", horizon)
    }

    pub fn model(&self) -> Result<ModelName> {
        self.name.parse()
    }

    pub fn param(&self, key: &str) -> Result<f64> {
        let v = *self
            .params
            .get(key)
            .ok_or_else(|| Error::MissingParam(key.to_string()))?;
        if !v.is_finite() {
            return Err(Error::InvalidParam {
                name: key.to_string(),
                reason: "must be finite".into(),
            });
        }
        Ok(v)
    }

    pub fn horizon(&self) -> Result<f64> {
        let t = self.param("T")?;
        if t <= 0.0 {
            return Err(Error::InvalidParam {
                name: "T".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(t)
    }

    /// Hilbert-space dimension of the model.
    pub fn dim(&self) -> Result<usize> {
        Ok(match self.model()? {
            ModelName::RotatingQubit | ModelName::LandauZener => 2,
            ModelName::ThreeLevel => 3,
            ModelName::Tfim => 1 << tfim_spins(self)?,
        })
    }
}

fn tfim_spins(spec: &ModelSpec) -> Result<usize> {
    let l = spec.param("L")?;
    if l.fract() != 0.0 || !(1.0..=6.0).contains(&l) {
        return Err(Error::InvalidParam {
            name: "L".into(),
            reason: format!("spin count must be an integer in 1..=6, got {l}"),
        });
    }
    Ok(l as usize)
}

/// Spin-1 operators S_z, S_x.
fn spin_one() -> (CMatrix, CMatrix) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sz = super::diag(&[1.0, 0.0, -1.0]);
    let sx = CMatrix::from_row_slice(
        3,
        3,
        &[re(0.0), re(s), re(0.0), re(s), re(0.0), re(s), re(0.0), re(s), re(0.0)],
    );
    (sz, sx)
}

/// Single-site operator `op` on site `i` of an L-site chain.
fn site_op(op: &CMatrix, i: usize, spins: usize) -> CMatrix {
    (0..spins).fold(CMatrix::identity(1, 1), |acc, k| {
        if k == i {
            kron(&acc, op)
        } else {
            kron(&acc, &identity(2))
        }
    })
}

/// Build the schedule H(t) for a named model, with an analytic derivative.
pub fn model_hamiltonian(spec: &ModelSpec) -> Result<OperatorSchedule> {
    let model = spec.model()?;
    let horizon = spec.horizon()?;
    match model {
        ModelName::RotatingQubit => {
            let omega = spec.param("omega")?;
            let rate = PI / (2.0 * horizon);
            let (sx, sz) = (sigma_x(), sigma_z());
            let (sx2, sz2) = (sx.clone(), sz.clone());
            Ok(OperatorSchedule::new(2, horizon, true, move |t| {
                let th = rate * t;
                (&sz * re(th.cos()) + &sx * re(th.sin())) * re(omega / 2.0)
            })
            .with_derivative(move |t| {
                let th = rate * t;
                (&sz2 * re(-th.sin()) + &sx2 * re(th.cos())) * re(omega * rate / 2.0)
            }))
        }
        ModelName::LandauZener => {
            let v = spec.param("v")?;
            let delta = spec.param("Delta")?;
            let (sx, sz) = (sigma_x(), sigma_z());
            let sz2 = sz.clone();
            Ok(OperatorSchedule::new(2, horizon, true, move |t| {
                &sz * re(v * (t - horizon / 2.0) / 2.0) + &sx * re(delta / 2.0)
            })
            .with_derivative(move |_| &sz2 * re(v / 2.0)))
        }
        ModelName::ThreeLevel => {
            let omega = spec.param("omega")?;
            let rate = PI / (2.0 * horizon);
            let (sz, sx) = spin_one();
            let (sz2, sx2) = (sz.clone(), sx.clone());
            Ok(OperatorSchedule::new(3, horizon, true, move |t| {
                let th = rate * t;
                (&sz * re(th.cos()) + &sx * re(th.sin())) * re(omega)
            })
            .with_derivative(move |t| {
                let th = rate * t;
                (&sz2 * re(-th.sin()) + &sx2 * re(th.cos())) * re(omega * rate)
            }))
        }
        ModelName::Tfim => {
            let spins = tfim_spins(spec)?;
            let j = spec.param("J")?;
            let h0 = spec.param("h0")?;
            let h1 = spec.param("h1")?;
            let shape = spec.params.get("shape").copied().unwrap_or(0.0);
            if shape != 0.0 && shape != 1.0 {
                return Err(Error::InvalidParam {
                    name: "shape".into(),
                    reason: "expected 0 (linear) or 1 (sin^2)".into(),
                });
            }
            let dim = 1usize << spins;
            let mut zz = CMatrix::zeros(dim, dim);
            for i in 0..spins.saturating_sub(1) {
                zz += site_op(&sigma_z(), i, spins) * site_op(&sigma_z(), i + 1, spins);
            }
            let mut xs = CMatrix::zeros(dim, dim);
            for i in 0..spins {
                xs += site_op(&sigma_x(), i, spins);
            }
            let coupling = zz * re(-j);
            let xs2 = xs.clone();
            let ramp = move |t: f64| -> (f64, f64) {
                let s = t / horizon;
                if shape == 0.0 {
                    (s, 1.0 / horizon)
                } else {
                    let a = PI * s / 2.0;
                    (a.sin().powi(2), PI / (2.0 * horizon) * (2.0 * a).sin())
                }
            };
            Ok(OperatorSchedule::new(dim, horizon, true, move |t| {
                let field = h0 + (h1 - h0) * ramp(t).0;
                &coupling - &xs * re(field)
            })
            .with_derivative(move |t| &xs2 * re(-(h1 - h0) * ramp(t).1)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{hermiticity_defect, op_norm, TimeGrid};

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) {
        let d = op_norm(&(a - b));
        assert!(d <= tol, "deviation {d:e}");
    }

    #[test]
    fn rotating_qubit_endpoints() {
        let h = model_hamiltonian(&ModelSpec::rotating_qubit(1.0, 1.0)).unwrap();
        close(&h.eval(0.0), &(sigma_z() * re(0.5)), 1e-15);
        close(&h.eval(1.0), &(sigma_x() * re(0.5)), 1e-15);
    }

    #[test]
    fn landau_zener_crossing() {
        let h = model_hamiltonian(&ModelSpec::landau_zener(2.0, 1.0, 10.0)).unwrap();
        close(&h.eval(5.0), &(sigma_x() * re(0.5)), 1e-15);
    }

    #[test]
    fn unknown_model_and_missing_param() {
        assert!(matches!(
            model_hamiltonian(&ModelSpec::new("harmonic").with("T", 1.0)),
            Err(Error::UnknownModel(_))
        ));
        assert!(matches!(
            model_hamiltonian(&ModelSpec::new("landau-zener").with("v", 1.0).with("T", 1.0)),
            Err(Error::MissingParam(p)) if p == "Delta"
        ));
    }

    #[test]
    fn tfim_dimension_limit() {
        assert!(model_hamiltonian(&ModelSpec::tfim(7, 1.0, 0.5, 2.0, 1.0)).is_err());
        let h = model_hamiltonian(&ModelSpec::tfim(6, 1.0, 0.5, 2.0, 1.0)).unwrap();
        assert_eq!(h.dim(), 64);
    }

    fn all_models() -> Vec<ModelSpec> {
        vec![
            ModelSpec::rotating_qubit(1.3, 2.0),
            ModelSpec::landau_zener(2.0, 1.0, 10.0),
            ModelSpec::three_level(0.8, 1.5),
            ModelSpec::tfim(3, 1.0, 0.3, 1.7, 2.0),
            ModelSpec::tfim(3, 1.0, 0.3, 1.7, 2.0).with("shape", 1.0),
        ]
    }

    #[test]
    fn schedules_are_hermitian_on_grid() {
        for spec in all_models() {
            let h = model_hamiltonian(&spec).unwrap();
            let grid = TimeGrid::new(h.horizon(), 50).unwrap();
            for t in grid.points() {
                let m = h.eval(t);
                assert!(hermiticity_defect(&m) <= 1e-12 * op_norm(&m));
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_central_differences() {
        for spec in all_models() {
            let h = model_hamiltonian(&spec).unwrap();
            let step = 1e-5;
            let grid = TimeGrid::new(h.horizon(), 20).unwrap();
            for k in 1..grid.steps() {
                let t = grid.t(k);
                let fd = (h.eval(t + step) - h.eval(t - step)) / re(2.0 * step);
                let an = h.derivative(t);
                let scale = op_norm(&an).max(1e-3);
                assert!(
                    op_norm(&(fd - &an)) / scale <= 1e-6,
                    "{} at t = {t}",
                    spec.name
                );
            }
        }
    }
}
