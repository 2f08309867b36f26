//! End-to-end tests of the `modenet` binary: exit codes, output determinism,
//! and the sweep-to-fit round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_modenet")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("modenet-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const DEVICE: &str = r#"
[device]
cavity_freqs_hz = [6.528e9, 6.733e9]
cavity_linewidths_hz = [1.3e6, 2.0e6]
cavity_efficiencies = [0.99, 0.98]
mech_freqs_hz = [6.7e6, 9.4e6]
mech_linewidths_hz = [15.0, 19.0]
vacuum_couplings_hz = [[50.0, 40.0], [60.0, 20.0]]
bath_occupations = [439.0, 998.0]

[[drives]]
cavity = 1
mech = 1
detuning_hz = 21.945e3
coupling_hz = 103.0e3

[[drives]]
cavity = 1
mech = 2
detuning_hz = -5.201e3
coupling_hz = 45.6e3

[[drives]]
cavity = 2
mech = 1
detuning_hz = 21.945e3
coupling_hz = 127.7e3

[[drives]]
cavity = 2
mech = 2
detuning_hz = -5.201e3
coupling_hz = 56.6e3
"#;

struct Row {
    offset: f64,
    phase: f64,
    port_out: String,
    value: f64,
}

fn parse_rows(path: &Path) -> Vec<Row> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (c_off, c_ph, c_out, c_val) = (
        col("offset_hz"),
        col("phase_deg"),
        col("port_out"),
        col("value"),
    );
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            Row {
                offset: f[c_off].parse().unwrap(),
                phase: f[c_ph].parse().unwrap(),
                port_out: f[c_out].to_string(),
                value: f[c_val].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn spectrum_reaches_isolator_performance_and_is_deterministic() {
    let dir = workdir("spectrum");
    let config = format!(
        "{DEVICE}
[sweep]
offsets_hz = {{ start = -40.0e3, stop = 40.0e3, points = 41 }}
phases_deg = [40.0]
ports = [[\"a2\", \"a1\"], [\"a1\", \"a2\"]]
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(&dir, &["spectrum", "--config", "run.toml"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let rows = parse_rows(&dir.join("spectrum.csv"));
    assert_eq!(rows.len(), 41 * 2);
    let center_fwd = rows
        .iter()
        .find(|r| r.offset == 0.0 && r.port_out == "a2")
        .unwrap()
        .value;
    let center_rev = rows
        .iter()
        .find(|r| r.offset == 0.0 && r.port_out == "a1")
        .unwrap()
        .value;
    let insertion_loss_db = -10.0 * center_fwd.log10();
    let isolation_db = -10.0 * center_rev.log10();
    assert!(
        insertion_loss_db <= 1.6,
        "insertion loss {insertion_loss_db} dB"
    );
    assert!(isolation_db >= 20.0, "isolation {isolation_db} dB");

    // identical invocation gives byte-identical output
    let out2 = run_in(
        &dir,
        &["spectrum", "--config", "run.toml", "--out", "again.csv"],
    );
    assert!(out2.status.success());
    assert_eq!(
        fs::read(dir.join("spectrum.csv")).unwrap(),
        fs::read(dir.join("again.csv")).unwrap()
    );
}

#[test]
fn spectrum_single_point_grid_gives_one_row_per_pair() {
    let dir = workdir("single");
    let config = format!(
        "{DEVICE}
[sweep]
offsets_hz = [0.0]
phases_deg = [40.0]
ports = [[\"a2\", \"a1\"]]
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(&dir, &["spectrum", "--config", "run.toml"]);
    assert!(out.status.success());
    assert_eq!(parse_rows(&dir.join("spectrum.csv")).len(), 1);
}

#[test]
fn sweep_grid_shape_and_phase_transposition() {
    let dir = workdir("sweep");
    let config = format!(
        "{DEVICE}
[sweep]
offsets_hz = [-2.0e3, 2.0e3]
phases_deg = [40.0, -40.0]
ports = [[\"a2\", \"a1\"], [\"a1\", \"a2\"]]
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(&dir, &["sweep", "--config", "run.toml"]);
    assert!(out.status.success());
    let rows = parse_rows(&dir.join("sweep.csv"));
    // 2 offsets x 2 phases x 2 pairs, i.e. 4 rows per port pair
    assert_eq!(rows.len(), 8);
    assert_eq!(rows.iter().filter(|r| r.port_out == "a2").count(), 4);
    // S(-phi) is the transpose of S(phi): swapped ports match across phases
    for offset in [-2.0e3, 2.0e3] {
        let value = |phase: f64, out_port: &str| {
            rows.iter()
                .find(|r| r.phase == phase && r.offset == offset && r.port_out == out_port)
                .unwrap()
                .value
        };
        let rel = (value(40.0, "a2") - value(-40.0, "a1")).abs() / value(40.0, "a2");
        assert!(rel < 1e-9, "transpose mismatch {rel}");
    }
}

#[test]
fn sweep_flags_failed_points_as_nan() {
    let dir = workdir("nan");
    // a razor-thin mechanical line makes the far-detuned point numerically
    // unusable while the on-resonance point stays fine; cross couplings are
    // zeroed so the network is the bare loop
    let config = r#"
[device]
cavity_freqs_hz = [6.528e9, 6.733e9]
cavity_linewidths_hz = [1.3e6, 2.0e6]
cavity_efficiencies = [0.99, 0.98]
mech_freqs_hz = [6.7e6, 9.4e6]
mech_linewidths_hz = [1.0e-8, 19.0]
vacuum_couplings_hz = [[50.0, 0.0], [0.0, 20.0]]

[[drives]]
cavity = 1
mech = 1
coupling_hz = 1.0e-3

[[drives]]
cavity = 1
mech = 2
coupling_hz = 0.0

[[drives]]
cavity = 2
mech = 1
coupling_hz = 0.0

[[drives]]
cavity = 2
mech = 2
coupling_hz = 1.0e3

[sweep]
offsets_hz = [0.0, 1.0e6]
phases_deg = [0.0]
ports = [["a2", "a1"]]
"#;
    fs::write(dir.join("run.toml"), config).unwrap();
    let out = run_in(&dir, &["sweep", "--config", "run.toml"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(text.contains("# failed_points = 1"), "{text}");
    assert!(text.contains("NaN"), "{text}");
}

#[test]
fn design_reports_both_branches_and_the_closed_forms() {
    let dir = workdir("design");
    let config = "
[design]
c3 = 4.72
c4 = 4.72
eta1 = 0.99
eta2 = 0.98
gamma3_hz = 7.5e3
gamma4_hz = 1.6e3
";
    fs::write(dir.join("run.toml"), config).unwrap();
    let out = run_in(&dir, &["design", "--config", "run.toml"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.join("design.csv")).unwrap();
    // closed-form optimum sits at 38 degrees for this cooperativity
    let closed: f64 = text
        .lines()
        .find(|l| l.starts_with("# closed_form_phase_deg"))
        .and_then(|l| l.split('=').nth(1))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((closed - 38.0).abs() < 0.1, "closed-form phase {closed}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("forward"));
    assert!(stdout.contains("reverse"));
    // numeric optimum lands near the closed form at this cooperativity
    let forward_phase: f64 = parse_field(&text, "forward", 1).parse().unwrap();
    let reverse_phase: f64 = parse_field(&text, "reverse", 1).parse().unwrap();
    assert!(
        (forward_phase - 38.0).abs() < 4.0,
        "numeric phase {forward_phase}"
    );
    assert!((forward_phase + reverse_phase).abs() < 1e-9);
}

fn parse_field(csv: &str, row_key: &str, column: usize) -> String {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .find(|l| l.starts_with(row_key))
        .unwrap()
        .split(',')
        .nth(column)
        .unwrap()
        .to_string()
}

#[test]
fn design_with_nonpositive_cooperativity_is_a_config_error() {
    let dir = workdir("design-bad");
    let config = "
[design]
c3 = -1.0
c4 = 4.72
gamma3_hz = 7.5e3
gamma4_hz = 1.6e3
";
    fs::write(dir.join("run.toml"), config).unwrap();
    let out = run_in(&dir, &["design", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_drives_section_is_a_config_error() {
    let dir = workdir("nodrives");
    let config = "
[device]
cavity_freqs_hz = [6.528e9, 6.733e9]
cavity_linewidths_hz = [1.3e6, 2.0e6]
cavity_efficiencies = [0.99, 0.98]
mech_freqs_hz = [6.7e6, 9.4e6]
mech_linewidths_hz = [15.0, 19.0]
vacuum_couplings_hz = [[50.0, 40.0], [60.0, 20.0]]

[sweep]
offsets_hz = [0.0]
phases_deg = [0.0]
ports = [[\"a2\", \"a1\"]]
";
    fs::write(dir.join("run.toml"), config).unwrap();
    let out = run_in(&dir, &["spectrum", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = workdir("unknown-key");
    let config = "
[design]
c3 = 1.0
c4 = 1.0
gamma3_hz = 1.0e3
gamma4_hz = 1.0e3
surprise = true
";
    fs::write(dir.join("run.toml"), config).unwrap();
    let out = run_in(&dir, &["design", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn noise_with_cold_baths_sits_at_the_floor_and_swaps_ports() {
    let dir = workdir("noise");
    // the port-swap identity needs cavity-symmetric parameters
    let symmetric_device = r#"
[device]
cavity_freqs_hz = [6.528e9, 6.733e9]
cavity_linewidths_hz = [1.5e6, 1.5e6]
cavity_efficiencies = [0.98, 0.98]
mech_freqs_hz = [6.7e6, 9.4e6]
mech_linewidths_hz = [15.0, 19.0]
vacuum_couplings_hz = [[50.0, 40.0], [50.0, 40.0]]
bath_occupations = [439.0, 998.0]

[[drives]]
cavity = 1
mech = 1
detuning_hz = 21.945e3
coupling_hz = 103.0e3

[[drives]]
cavity = 1
mech = 2
detuning_hz = -5.201e3
coupling_hz = 45.6e3

[[drives]]
cavity = 2
mech = 1
detuning_hz = 21.945e3
coupling_hz = 103.0e3

[[drives]]
cavity = 2
mech = 2
detuning_hz = -5.201e3
coupling_hz = 45.6e3
"#;
    let config = format!(
        "{symmetric_device}
[sweep]
offsets_hz = [-3.0e3, 0.0, 3.0e3]
phases_deg = [40.0, -40.0]
ports = [[\"a2\", \"a1\"]]

[noise]
ports = [\"a1\", \"a2\"]
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(&dir, &["noise", "--config", "run.toml"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.join("noise.csv")).unwrap();
    let rows: Vec<(f64, f64, String, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("offset"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].to_string(),
                f[3].parse().unwrap(),
            )
        })
        .collect();
    // hot baths: the isolated port carries quanta, and flipping the phase
    // swaps the roles of the two ports
    let q = |phase: f64, port: &str, offset: f64| {
        rows.iter()
            .find(|(o, p, pt, _)| *o == offset && *p == phase && pt == port)
            .unwrap()
            .3
    };
    for offset in [-3.0e3, 0.0, 3.0e3] {
        assert!((q(40.0, "a1", offset) - q(-40.0, "a2", offset)).abs() < 1e-9);
        assert!((q(40.0, "a2", offset) - q(-40.0, "a1", offset)).abs() < 1e-9);
    }
    assert!(
        q(40.0, "a1", 0.0) > 1.0,
        "isolated port should carry thermal quanta"
    );

    // zero baths: device-referred noise vanishes everywhere
    let cold = config.replace(
        "[noise]\nports = [\"a1\", \"a2\"]",
        "[noise]\nports = [\"a1\", \"a2\"]\nbath_occupations = [0.0, 0.0]",
    );
    fs::write(dir.join("cold.toml"), &cold).unwrap();
    let out = run_in(
        &dir,
        &["noise", "--config", "cold.toml", "--out", "cold.csv"],
    );
    assert!(out.status.success());
    let cold_text = fs::read_to_string(dir.join("cold.csv")).unwrap();
    for line in cold_text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("offset"))
    {
        let value: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(value, 0.0);
    }
}

#[test]
fn reduce_prints_the_network_size_and_effective_parameters() {
    let dir = workdir("reduce");
    let config = format!(
        "{DEVICE}
[reduce]
depth = 1
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(&dir, &["reduce", "--config", "run.toml"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("10 modes, 16 couplings"), "{stdout}");
    assert!(stdout.contains("effective mechanical linewidths"));
    let text = fs::read_to_string(dir.join("reduce.csv")).unwrap();
    assert_eq!(text.matches("\nmode,").count(), 10);
    assert_eq!(text.matches("\ncoupling,").count(), 16);
    assert_eq!(text.matches("\nelimination,").count(), 6);

    // a deeper expansion grows the network and reports linewidth convergence
    let deeper = config.replace("depth = 1", "depth = 2");
    fs::write(dir.join("deep.toml"), &deeper).unwrap();
    let out = run_in(
        &dir,
        &["reduce", "--config", "deep.toml", "--out", "deep.csv"],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let n_modes: usize = stdout
        .lines()
        .find(|l| l.contains("modes,"))
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        n_modes > 10,
        "depth 2 should grow the network, got {n_modes}"
    );
    let deep_text = fs::read_to_string(dir.join("deep.csv")).unwrap();
    assert!(deep_text.contains("gamma1_eff_shift_depth1_to_2_hz"));
}

#[test]
fn fit_round_trips_sweep_output() {
    let dir = workdir("fit");
    let sweep_config = format!(
        "{DEVICE}
[sweep]
offsets_hz = {{ start = -20.0e3, stop = 20.0e3, points = 9 }}
phases_deg = {{ start = -150.0, stop = 150.0, points = 7 }}
ports = [[\"a2\", \"a1\"], [\"a1\", \"a2\"]]
"
    );
    fs::write(dir.join("sweep.toml"), &sweep_config).unwrap();
    let out = run_in(
        &dir,
        &["sweep", "--config", "sweep.toml", "--out", "data.csv"],
    );
    assert!(out.status.success());

    // fit two couplings back from the sweep, starting 10% off
    let fit_config = format!(
        "{DEVICE}
[fit]
data = \"data.csv\"

[[fit.free]]
field = \"drive_coupling\"
cavity = 1
mech = 1
initial = 113.0e3
min = 50.0e3
max = 200.0e3

[[fit.free]]
field = \"drive_coupling\"
cavity = 2
mech = 2
initial = 51.0e3
min = 20.0e3
max = 120.0e3
"
    );
    fs::write(dir.join("fit.toml"), &fit_config).unwrap();
    let out = run_in(&dir, &["fit", "--config", "fit.toml"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.join("fit.csv")).unwrap();
    let g11: f64 = parse_field(&text, "scattering,drive_coupling[1][1]", 2)
        .parse()
        .unwrap();
    let g22: f64 = parse_field(&text, "scattering,drive_coupling[2][2]", 2)
        .parse()
        .unwrap();
    assert!((g11 - 103.0e3).abs() / 103.0e3 < 0.01, "g11 = {g11}");
    assert!((g22 - 56.6e3).abs() / 56.6e3 < 0.01, "g22 = {g22}");
}

#[test]
fn fit_rejects_malformed_data_with_exit_two() {
    let dir = workdir("fit-bad");
    fs::write(dir.join("data.csv"), "definitely,not\na,data,file\n").unwrap();
    let config = format!(
        "{DEVICE}
[fit]
data = \"data.csv\"

[[fit.free]]
field = \"drive_coupling\"
cavity = 1
mech = 1
min = 1.0e3
max = 1.0e6
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(&dir, &["fit", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn underdetermined_fit_exits_three() {
    let dir = workdir("fit-under");
    fs::write(
        dir.join("data.csv"),
        "offset_hz,phase_deg,port_out,port_in,value\n0.0,40.0,a2,a1,0.5\n100.0,40.0,a2,a1,0.5\n",
    )
    .unwrap();
    let config = format!(
        "{DEVICE}
[fit]
data = \"data.csv\"

[[fit.free]]
field = \"drive_coupling\"
cavity = 1
mech = 1
min = 1.0e3
max = 1.0e6

[[fit.free]]
field = \"drive_coupling\"
cavity = 1
mech = 2
min = 1.0e3
max = 1.0e6

[[fit.free]]
field = \"drive_coupling\"
cavity = 2
mech = 1
min = 1.0e3
max = 1.0e6
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(&dir, &["fit", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn json_output_is_valid_and_carries_the_rows() {
    let dir = workdir("json");
    let config = format!(
        "{DEVICE}
[sweep]
offsets_hz = [0.0]
phases_deg = [40.0]
ports = [[\"a2\", \"a1\"]]
"
    );
    fs::write(dir.join("run.toml"), &config).unwrap();
    let out = run_in(
        &dir,
        &["spectrum", "--config", "run.toml", "--format", "json"],
    );
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(doc["command"], "spectrum");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 1);
    assert!(doc["rows"][0]["value"].as_f64().unwrap() > 0.5);
}
