//! Drives the command-line front end in-process, the same way the
//! `zeno-sta` binary does.

use zeno_sta::harness::cli::main_with_args;

fn main() {
    let dir = std::env::temp_dir().join("zeno-sta-example");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("strobe.json");
    std::fs::write(
        &config,
        r#"{
  "protocol": "strobe",
  "model": { "name": "rotating-qubit", "params": { "omega": 1.0, "T": 1.0 } },
  "grid": { "steps": 20 },
  "oracle": { "order": 4 }
}"#,
    )
    .unwrap();
    let out = dir.join("strobe.csv");
    let code = main_with_args([
        "zeno-sta",
        "strobe",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    println!("exit {code}");
    print!("{}", std::fs::read_to_string(&out).unwrap());

    let code = main_with_args(["zeno-sta", "cap"]);
    println!("exit {code} (cap needs a kappa)");
}
