//! A scenario built in code, swept over kappa, fitted on log-log axes and
//! exported as CSV.

use zeno_sta::harness::config::CapParams;
use zeno_sta::harness::{sweep, Format, Protocol, ScenarioConfig, SweepAxis, SweepSpec};
use zeno_sta::operators::ModelSpec;

fn main() -> zeno_sta::Result<()> {
    let mut cfg = ScenarioConfig::new(Protocol::Cap)
        .with_model(ModelSpec::rotating_qubit(1.0, 1.0))
        .with_steps(1000);
    cfg.cap = CapParams {
        kappa: Some(10.0),
        ..CapParams::default()
    };
    let spec = SweepSpec {
        axis: SweepAxis::Kappa,
        values: vec![10.0, 30.0, 100.0, 300.0, 1000.0],
        metric: None,
    };
    let r = sweep(&cfg, &spec)?;
    r.rows.write(Format::Csv, std::io::stdout())?;
    println!("{}", serde_json::to_string_pretty(&r.summary())?);
    println!("scenario:\n{}", cfg.to_json()?);
    Ok(())
}
