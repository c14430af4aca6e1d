use std::fs;
use std::process::{Command, Output};

fn realtraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_realtraj")).args(args).env_remove("REALTRAJ_OUT_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const GENERATE: &str = r#"
[model]
preset = "driven_tla"

[detector]
kind = "ideal_jump"
efficiency = 1.0

[run]
mode = "generate"
dt = 0.001
t_final = 2.0
master_seed = 3

[output]
record = "rec.csv"
"#;

#[test]
fn bandwidth_from_dimensionless_inputs() {
    let o = realtraj(&["bandwidth", "--gamma", "1.5", "--noise", "0.1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("bandwidth = 4.5e0"), "{}", stdout(&o));
    let o = realtraj(&["bandwidth", "--gamma", "1.5", "--noise", "2"]);
    assert!(stdout(&o).contains("bandwidth = none"));
}

#[test]
fn bandwidth_from_physical_inputs() {
    let o = realtraj(&[
        "bandwidth",
        "--resistance",
        "1e5",
        "--capacitance",
        "1e-12",
        "--temperature",
        "300",
        "--lo-power",
        "1e-3",
        "--wavelength",
        "1.064e-6",
        "--efficiency",
        "0.9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("gamma = ") && out.contains("noise_power = "), "{out}");
}

#[test]
fn run_generate_filter_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let gen_dir = dir.path().join("gen");
    let filt_dir = dir.path().join("filt");
    let gen = dir.path().join("gen.toml");
    let filt = dir.path().join("filt.toml");
    fs::write(&gen, GENERATE).unwrap();
    fs::write(&filt, GENERATE.replace("\"generate\"", "\"filter\"")).unwrap();

    let o = realtraj(&["validate", gen.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("2000 steps"));

    let o = realtraj(&["run", gen.to_str().unwrap(), "--out-dir", gen_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = Command::new(env!("CARGO_BIN_EXE_realtraj"))
        .args(["run", filt.to_str().unwrap()])
        .env("REALTRAJ_OUT_DIR", &filt_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report = dir.path().join("cmp.csv");
    let o = realtraj(&[
        "compare",
        gen_dir.join("trajectory.csv").to_str().unwrap(),
        filt_dir.join("trajectory.csv").to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.0);
    assert!(fs::read_to_string(report).unwrap().starts_with("t,trace_distance"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, GENERATE.replace("t_final = 2.0", "t_final = 2.0005")).unwrap();
    let o = realtraj(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 12"));

    let o = realtraj(&["compare", "/nonexistent/a.csv", "/nonexistent/b.csv"]);
    assert_eq!(o.status.code(), Some(3));

    // a voltage grid far too narrow for the amplifier noise trips the boundary guard
    let leak = dir.path().join("leak.toml");
    fs::write(
        &leak,
        GENERATE
            .replace(
                "kind = \"ideal_jump\"\nefficiency = 1.0",
                "kind = \"receiver\"\nefficiency = 1.0\nfilter_rate = 1.0\nnoise_power = 0.5\ncells = 40\nv_max = 0.5",
            )
            .replace("preset = \"driven_tla\"", "preset = \"tla\"")
            .replace("dt = 0.001", "dt = 0.0001"),
    )
    .unwrap();
    let o = realtraj(&["run", leak.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
