use std::path::Path;
use std::process::{Command, Output};

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solenoid-lab")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_constant_table(dir: &Path, k: usize) {
    let mut text = format!("d,K,provenance\n2,{k},generated\nindex,value\n");
    for i in 0..=k {
        text.push_str(&format!("{i},1\n"));
    }
    std::fs::write(dir.join("one.csv"), text).unwrap();
}

#[test]
fn generate_rejects_nonpositive_recursion() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["generate", "--a1", "1", "--evens", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NonPositive(3)"));
}

#[test]
fn verify_matching_on_constant_table() {
    let dir = tempfile::tempdir().unwrap();
    write_constant_table(dir.path(), 63);
    let report = stdout(&lab(dir.path(), &["verify-matching", "--table", "one.csv"]));
    let parsed: toml::Table = report.parse().unwrap();
    assert_eq!(parsed["max_residual"].as_float(), Some(0.0));
    let residuals = parsed["residuals"].as_array().unwrap();
    assert_eq!(residuals.len(), 31);
    assert!(residuals.iter().all(|r| r.as_float() == Some(0.0)));
}

#[test]
fn extract_trig_at_depth_14() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["-o", "t.csv", "extract", "--eps", "0.05", "--depth", "14"]);
    let report: toml::Table = stdout(&o).parse().unwrap();
    assert!(report["decay_rate"].as_float().unwrap() < 0.9);
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(table.lines().skip(3).count(), 64);
}

#[test]
fn artifacts_feed_downstream_commands() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&lab(dir.path(), &["-o", "t.csv", "--report", "r.toml", "extract", "--eps", "0.02", "--depth", "10", "--max-index", "1022"]));
    let first = stdout(&lab(dir.path(), &["holder", "--table", "t.csv"]));
    // Re-importing and re-exporting reproduces the file byte for byte.
    let table = std::fs::read(dir.path().join("t.csv")).unwrap();
    let t = solenoid_lab::formats::read_table(&table[..]).unwrap();
    let mut again = Vec::new();
    solenoid_lab::formats::write_table(&mut again, &t).unwrap();
    assert_eq!(again, table);
    std::fs::write(dir.path().join("t2.csv"), again).unwrap();
    assert_eq!(stdout(&lab(dir.path(), &["holder", "--table", "t2.csv"])), first);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "depth = 8\n[map]\neps = [0.05]\n").unwrap();
    let from_config: toml::Table = stdout(&lab(dir.path(), &["--config", "run.toml", "-o", "a.csv", "extract"])).parse().unwrap();
    assert_eq!(from_config["depth"].as_integer(), Some(8));
    let overridden: toml::Table =
        stdout(&lab(dir.path(), &["--config", "run.toml", "-o", "b.csv", "extract", "--depth", "9"])).parse().unwrap();
    assert_eq!(overridden["depth"].as_integer(), Some(9));
    std::fs::write(dir.path().join("bad.toml"), "dpeth = 8\n").unwrap();
    assert_eq!(lab(dir.path(), &["--config", "bad.toml", "extract"]).status.code(), Some(1));
}

#[test]
fn cap_needs_explicit_override() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["extract", "--depth", "21"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
    let o = lab(dir.path(), &["--cap", "1024", "-o", "t.csv", "extract", "--depth", "10", "--max-index", "20"]);
    stdout(&o);
}

#[test]
fn numerical_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("d,K,provenance\n2,62,generated\nindex,value\n");
    for i in 0..=62 {
        text.push_str(&format!("{i},{}\n", if i % 3 == 0 { 2.0 } else { 0.5 }));
    }
    std::fs::write(dir.path().join("rough.csv"), text).unwrap();
    let o = lab(dir.path(), &["realize", "--table", "rough.csv", "--via-map"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: realize_map: Inconsistent"));
}

#[test]
fn table1_linear_map() {
    let dir = tempfile::tempdir().unwrap();
    let report: toml::Table = stdout(&lab(dir.path(), &["table1", "--depth", "10"])).parse().unwrap();
    assert_eq!(report["solenoid"]["constant_table"].as_bool(), Some(true));
    assert_eq!(report["ratio"]["verdict"].as_str(), Some("affine"));
    assert_eq!(report["guard_fired"].as_bool(), Some(false));
}
