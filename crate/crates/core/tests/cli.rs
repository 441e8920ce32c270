use std::path::Path;
use std::process::{Command, Output};

fn uansim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uansim")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = uansim(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv_text: &str) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv_text.as_bytes());
    let header = r.headers().unwrap().clone();
    (header, r.records().map(Result::unwrap).collect())
}

fn column<'a>(header: &csv::StringRecord, row: &'a csv::StringRecord, name: &str) -> &'a str {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    &row[i]
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_prints_one_metrics_row() {
    let (header, data) = rows(&ok(&["run", "string21"]));
    assert_eq!(data.len(), 1);
    for name in ["scenario", "seed", "mode", "generated", "delivered", "delivery_ratio", "delay_mean", "collisions", "energy_j"] {
        assert!(header.iter().any(|h| h == name), "{name}");
    }
    assert_eq!(column(&header, &data[0], "scenario"), "string21");
    assert_eq!(column(&header, &data[0], "delivery_ratio"), "1");
}

#[test]
fn run_writes_metrics_and_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("m.csv");
    let trace = dir.path().join("t.jsonl");
    let stdout = ok(&["run", "cluster5", "--seed", "9", "--metrics", path(&metrics), "--trace", path(&trace)]);
    assert!(stdout.is_empty());
    let (header, data) = rows(&std::fs::read_to_string(&metrics).unwrap());
    assert_eq!(column(&header, &data[0], "seed"), "9");
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert!(lines.lines().count() > 100);
    for l in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v.get("t").is_some() && v.get("event").is_some() && v.get("node").is_some());
    }
}

#[test]
fn overrides_change_the_run() {
    let (header, data) = rows(&ok(&["run", "string21", "--set", "phy.mode=qam16"]));
    assert_eq!(column(&header, &data[0], "mode"), "qam16");
}

#[test]
fn sweep_emits_a_row_per_value() {
    let (header, data) = rows(&ok(&["sweep", "string21", "--param", "phy.mode", "--values", "bpsk", "qpsk", "qam64"]));
    assert_eq!(&header[0], "phy.mode");
    let delays: Vec<f64> = data.iter().map(|r| column(&header, r, "delay_mean").parse().unwrap()).collect();
    assert_eq!(data.iter().map(|r| r[0].to_string()).collect::<Vec<_>>(), ["bpsk", "qpsk", "qam64"]);
    assert!(delays.windows(2).all(|w| w[1] < w[0]), "{delays:?}");
}

#[test]
fn ber_sweep_covers_the_requested_grid() {
    let (header, data) = rows(&ok(&["ber-sweep", "--mode", "qpsk", "--from", "0", "--to", "10", "--step", "2"]));
    assert_eq!(data.len(), 6);
    let ber: Vec<f64> = data.iter().map(|r| column(&header, r, "ber").parse().unwrap()).collect();
    assert!(ber.windows(2).all(|w| w[1] < w[0]));
    let (_, all) = rows(&ok(&["ber-sweep", "--to", "1"]));
    assert_eq!(all.len(), 10, "five modes times two points");
    let (h, mc) = rows(&ok(&["ber-sweep", "--method", "mmse", "--from", "10", "--to", "10", "--trials", "500"]));
    assert_eq!(mc.len(), 1);
    assert_eq!(column(&h, &mc[0], "bits").parse::<u64>().unwrap() > 0, true);
}

#[test]
fn table1_lists_every_kind() {
    let (header, data) = rows(&ok(&["table1"]));
    assert_eq!(data.len(), 14);
    assert!(header.len() >= 3);
}

#[test]
fn trajectory_samples_a_glider() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ug.toml");
    std::fs::write(
        &cfg,
        "start = [0.0, 0.0, 10.0]\nduration = 100.0\ndt = 10.0\n[mobility]\nmodel = \"ug\"\nspeed = 1.0\n\
         heading = [1.0, 0.0]\ndepth_min = 10.0\ndepth_max = 50.0\nopening_angle = 60.0\n",
    )
    .unwrap();
    let (header, data) = rows(&ok(&["trajectory", path(&cfg)]));
    assert_eq!(header.iter().collect::<Vec<_>>(), ["t", "x", "y", "z"]);
    assert_eq!(data.len(), 11);
    for r in &data {
        let z: f64 = r[3].parse().unwrap();
        assert!((10.0 - 1e-9..=50.0 + 1e-9).contains(&z));
    }
}

#[test]
fn env_replays_an_action_script() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("a.txt");
    std::fs::write(&script, "# hover then move\n0,0,0\n1,3,5\n\n2,2,2\n").unwrap();
    let a = ok(&["env", "datacollect3x25", "--actions", path(&script), "--seed", "3"]);
    let b = ok(&["env", "datacollect3x25", "--actions", path(&script), "--seed", "3"]);
    assert_eq!(a, b);
    let (header, data) = rows(&a);
    assert_eq!(data.len(), 3);
    assert!(header.iter().any(|h| h == "reward_101"));
    let obs = column(&header, &data[2], "observation").split(' ').count();
    assert_eq!(obs, 3 * 41);
    std::fs::write(&script, "0,0\n").unwrap();
    assert!(!uansim(&["env", "datacollect3x25", "--actions", path(&script)]).status.success());
}

#[test]
fn gen_table_writes_a_grid() {
    let (header, data) = rows(&ok(&["gen-table", "--max-range", "1000", "--range-step", "500"]));
    assert_eq!(header.iter().collect::<Vec<_>>(), ["range_m", "tx_depth_m", "rx_depth_m", "tl_db", "delay_s"]);
    let ranges: std::collections::BTreeSet<String> = data.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(ranges.len(), 3);
}

#[test]
fn scenarios_lists_the_bundled_set() {
    let list = ok(&["scenarios"]);
    for name in ["cluster5", "string21", "datacollect3x25"] {
        assert!(list.lines().any(|l| l.trim() == name), "{name}");
        ok(&["run", name, "--set", "duration=20.0"]);
    }
}

#[test]
fn bad_configuration_fails_with_its_key() {
    let cases: [(&[&str], &str); 4] = [
        (&["run", "cluster5", "--set", "phy.mode=32qam"], "phy.mode"),
        (&["run", "cluster5", "--set", "mac.bogus=1"], "mac"),
        (&["run", "cluster5", "--set", "duration=-1.0"], "duration"),
        (&["run", "no-such-scenario"], "no-such-scenario"),
    ];
    for (args, key) in cases {
        let out = uansim(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(key), "{args:?}: {err}");
    }
}
