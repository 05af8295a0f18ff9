//! Parameter sweeps and log-log slope fits.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Protocol, ScenarioConfig, SweepAxis, SweepSpec};
use super::protocols::run_protocol;
use super::table::{Cell, Record, Table};
use crate::error::{Error, Result};

/// Least-squares line through (log x, log y).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Root mean square residual of the reported fit.
    pub rms: f64,
    pub points_used: usize,
    /// Largest axis value, when dropped as outside the asymptotic regime.
    pub excluded: Option<f64>,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, Vec<f64>) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (intercept + slope * a)).collect();
    let ssr: f64 = resid.iter().map(|r| r * r).sum();
    let stderr = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr, resid)
}

fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
}

/// Log-space residual floor for the exclusion test, so that an exact power
/// law with rounding noise never loses a point.
const RESIDUAL_FLOOR: f64 = 1e-6;

/// Fits log y = a + s log x over at least four points. With five or more
/// points the largest-x point is checked against a fit of the others and
/// dropped when its residual exceeds three times that fit's RMS residual.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 4 {
        return Err(Error::FitDegenerate(format!("{} points, need at least 4", x.len())));
    }
    if let Some((a, b)) = x
        .iter()
        .zip(y)
        .find(|(a, b)| !(**a > 0.0 && **b > 0.0) || !a.is_finite() || !b.is_finite())
    {
        return Err(Error::FitDegenerate(format!("non-positive point ({a}, {b})")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    if lx.iter().all(|v| *v == lx[0]) {
        return Err(Error::FitDegenerate("all axis values equal".into()));
    }
    let top = (0..x.len())
        .max_by(|&a, &b| x[a].total_cmp(&x[b]))
        .expect("non-empty");
    if x.len() > 4 {
        let keep: Vec<usize> = (0..x.len()).filter(|&i| i != top).collect();
        let kx: Vec<f64> = keep.iter().map(|&i| lx[i]).collect();
        let ky: Vec<f64> = keep.iter().map(|&i| ly[i]).collect();
        if kx.iter().any(|v| *v != kx[0]) {
            let (slope, intercept, stderr, resid) = least_squares(&kx, &ky);
            let r = rms(&resid);
            let off = ly[top] - (intercept + slope * lx[top]);
            if off.abs() > 3.0 * r.max(RESIDUAL_FLOOR) {
                return Ok(SlopeFit {
                    slope,
                    stderr,
                    intercept,
                    rms: r,
                    points_used: keep.len(),
                    excluded: Some(x[top]),
                });
            }
        }
    }
    let (slope, intercept, stderr, resid) = least_squares(&lx, &ly);
    Ok(SlopeFit {
        slope,
        stderr,
        intercept,
        rms: rms(&resid),
        points_used: x.len(),
        excluded: None,
    })
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub metric: String,
    pub values: Vec<f64>,
    pub metrics: Vec<f64>,
    /// One row per point: axis value, then every summary field.
    pub rows: Table,
    pub fit: SlopeFit,
}

impl SweepResult {
    pub fn summary(&self) -> Record {
        let mut r = Record::new()
            .with("axis", self.axis.name())
            .with("metric", self.metric.as_str())
            .with("slope", self.fit.slope)
            .with("stderr", self.fit.stderr)
            .with("intercept", self.fit.intercept)
            .with("rms", self.fit.rms)
            .with("points_used", self.fit.points_used);
        r.push(
            "excluded",
            match self.fit.excluded {
                Some(v) => Cell::Num(v),
                None => Cell::Text(String::new()),
            },
        );
        r
    }
}

/// Summary field fitted when the sweep does not name one.
pub fn default_metric(protocol: Protocol, axis: SweepAxis) -> Result<&'static str> {
    Ok(match (protocol, axis) {
        (Protocol::Strobe, SweepAxis::Dt) => "mean_leak",
        (Protocol::Cap, SweepAxis::Kappa) => "leak_fraction",
        (Protocol::Cap, SweepAxis::Dt) => "leak_fraction",
        (Protocol::Sme, SweepAxis::Kappa) => "target_loss",
        (Protocol::Sme, SweepAxis::M) => "max_trace_distance",
        (Protocol::Sme, SweepAxis::Dt) => "target_loss",
        (Protocol::Cd, SweepAxis::Dt) => "infidelity",
        _ => return Err(Error::ConfigInvalid("sweep.axis".into())),
    })
}

/// `cfg` with the axis parameter set to `v`.
pub fn at_point(cfg: &ScenarioConfig, axis: SweepAxis, v: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    c.sweep = None;
    match (c.protocol()?, axis) {
        (_, SweepAxis::Dt) => c = c.with_dt(v),
        (Protocol::Sme, SweepAxis::Kappa) => c.sme.kappa = Some(v),
        (Protocol::Cap, SweepAxis::Kappa) => c.cap.kappa = Some(v),
        (Protocol::Sme, SweepAxis::M) => {
            if v.fract() != 0.0 || v < 1.0 {
                return Err(Error::ConfigInvalid("sweep.values".into()));
            }
            c.sme.trajectories = v as usize;
        }
        _ => return Err(Error::ConfigInvalid("sweep.axis".into())),
    }
    Ok(c)
}

/// Runs every point (in parallel) and fits log(metric) against log(axis).
pub fn sweep(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepResult> {
    let protocol = cfg.protocol()?;
    if protocol == Protocol::Identities {
        return Err(Error::ConfigInvalid("protocol".into()));
    }
    if spec.values.len() < 4 {
        return Err(Error::ConfigInvalid("sweep.values".into()));
    }
    if let Some(v) = spec.values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::FitDegenerate(format!("axis value {v} is not positive")));
    }
    let metric = match &spec.metric {
        Some(m) => m.clone(),
        None => default_metric(protocol, spec.axis)?.to_string(),
    };
    let points: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|&v| at_point(cfg, spec.axis, v))
        .collect::<Result<_>>()?;
    let summaries: Vec<Record> = points
        .par_iter()
        .map(|c| run_protocol(c).map(|r| r.summary))
        .collect::<Result<_>>()?;
    let metrics: Vec<f64> = summaries
        .iter()
        .map(|s| s.number(&metric).ok_or_else(|| Error::ConfigInvalid("sweep.metric".into())))
        .collect::<Result<_>>()?;
    let records: Vec<Record> = spec
        .values
        .iter()
        .zip(&summaries)
        .zip(&metrics)
        .map(|((&v, s), &m)| {
            let mut r = Record::new().with(spec.axis.name(), v).with("metric", m);
            for (k, c) in &s.0 {
                if k != spec.axis.name() {
                    r.push(k, c.clone());
                }
            }
            r
        })
        .collect();
    let rows = Table::from_records(&records)?;
    let fit = fit_loglog(&spec.values, &metrics)?;
    Ok(SweepResult {
        axis: spec.axis,
        metric,
        values: spec.values.clone(),
        metrics,
        rows,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ModelSpec;

    #[test]
    fn exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(f.points_used, 5);
        assert_eq!(f.excluded, None);
    }

    #[test]
    fn outlier_at_largest_value_is_dropped() {
        let x: Vec<f64> = (0..12).map(|k| 2f64.powi(k)).collect();
        let mut y: Vec<f64> = x.iter().map(|v| v * v * (1.0 + 1e-3 * (v.ln()).sin())).collect();
        *y.last_mut().unwrap() *= 1.5;
        let f = fit_loglog(&x, &y).unwrap();
        assert_eq!(f.excluded, Some(2048.0));
        assert_eq!(f.points_used, 11);
        assert!((f.slope - 2.0).abs() < 0.01);
        // the same deviation in the middle is kept
        let mut y2: Vec<f64> = x.iter().map(|v| v * v * (1.0 + 1e-3 * (v.ln()).sin())).collect();
        y2[5] *= 1.5;
        assert_eq!(fit_loglog(&x, &y2).unwrap().excluded, None);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Err(Error::FitDegenerate(_))));
        assert!(matches!(
            fit_loglog(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 4.0]),
            Err(Error::FitDegenerate(_))
        ));
        assert!(matches!(
            fit_loglog(&[2.0, 2.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]),
            Err(Error::FitDegenerate(_))
        ));
    }

    #[test]
    fn strobe_static_leak_is_quadratic() {
        // H = sigma_x, P = |0><0|: leak per step sin^2 dt
        let mut cfg = ScenarioConfig::new(Protocol::Strobe)
            .with_model(ModelSpec::landau_zener(0.0, 2.0, 1.0))
            .with_steps(10);
        cfg.family = crate::harness::config::FamilyChoice::Computational;
        let spec = SweepSpec {
            axis: SweepAxis::Dt,
            values: vec![0.01, 0.02, 0.05, 0.1],
            metric: None,
        };
        let r = sweep(&cfg, &spec).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows.columns()[0], "dt");
        assert!((r.fit.slope - 2.0).abs() < 0.1, "{:?}", r.fit);
    }

    #[test]
    fn zero_kappa_row_is_degenerate() {
        let mut cfg = ScenarioConfig::new(Protocol::Sme)
            .with_model(ModelSpec::rotating_qubit(1.0, 1.0))
            .with_steps(100);
        cfg.sme.kappa = Some(1.0);
        let spec = SweepSpec {
            axis: SweepAxis::Kappa,
            values: vec![0.0, 1.0, 2.0, 4.0],
            metric: None,
        };
        assert!(matches!(sweep(&cfg, &spec), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn cap_leak_fraction_slope() {
        let mut cfg = ScenarioConfig::new(Protocol::Cap)
            .with_model(ModelSpec::rotating_qubit(1.0, 1.0))
            .with_steps(1000);
        cfg.cap.kappa = Some(1.0);
        let spec = SweepSpec {
            axis: SweepAxis::Kappa,
            values: vec![10.0, 31.6, 100.0, 316.0, 1000.0],
            metric: None,
        };
        let r = sweep(&cfg, &spec).unwrap();
        assert!((r.fit.slope + 1.0).abs() < 0.1, "{:?}", r.fit);
        assert_eq!(r.summary().get("metric"), Some(&Cell::Text("leak_fraction".into())));
    }
}
