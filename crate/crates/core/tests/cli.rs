//! End-to-end checks of the command line binary: artifact layout, config
//! echo round trips, checksum manifests, exit codes, and thread-count
//! determinism.

use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::{Command, Output};

fn aokr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aokr"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(args: &[&str]) {
    let out = aokr(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn csv_lines(path: &Path) -> Vec<String> {
    read(path).lines().map(str::to_string).collect()
}

#[test]
fn evolve_writes_one_distribution_file_per_kick() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "evolve",
        "--kicks",
        "6",
        "--phi-d",
        "0.8",
        "--period",
        "TT",
        "--out",
        out.to_str().unwrap(),
    ]);

    let mut dist_files: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("distribution_kick_"))
        .collect();
    dist_files.sort();
    let expect: Vec<String> = (1..=6)
        .map(|k| format!("distribution_kick_{k:02}.csv"))
        .collect();
    assert_eq!(dist_files, expect);
    for k in 1..=6 {
        assert!(out.join(format!("orders_kick_{k:02}.csv")).is_file());
    }

    // Summary covers the unkicked packet too, one row per recorded slot.
    let summary = csv_lines(&out.join("summary.csv"));
    assert_eq!(summary[0], "kick,time_us,energy_Erec,norm");
    assert_eq!(summary.len(), 1 + 7);
    assert!(summary[1].starts_with("0,0.000000,"));
    assert!(summary[7].starts_with("6,"));
}

#[test]
fn evolve_without_kicks_writes_only_the_initial_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(&["evolve", "--kicks", "0", "--out", out.to_str().unwrap()]);
    assert!(out.join("distribution_kick_00.csv").is_file());
    let extra = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("distribution_kick_") && n != "distribution_kick_00.csv")
        .count();
    assert_eq!(extra, 0);
}

#[test]
fn manifest_checksums_match_the_file_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "evolve",
        "--kicks",
        "2",
        "--json",
        "--out",
        out.to_str().unwrap(),
    ]);

    let manifest = csv_lines(&out.join("manifest.csv"));
    assert_eq!(manifest[0], "file,sha256");
    // Every artifact except the manifest itself is listed exactly once.
    let mut on_disk: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.csv")
        .collect();
    on_disk.sort();
    let listed: Vec<String> = manifest[1..]
        .iter()
        .map(|row| row.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(listed, on_disk);

    for row in &manifest[1..] {
        let (name, digest) = row.split_once(',').unwrap();
        let bytes = std::fs::read(out.join(name)).unwrap();
        let actual: String = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(digest, actual, "checksum mismatch for {name}");
    }

    // The JSON summary parses and matches the CSV row count.
    let json: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 3);
}

#[test]
fn config_echo_reloads_as_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run_ok(&[
        "evolve",
        "--kicks",
        "2",
        "--phi-d",
        "2.0",
        "--period",
        "TT/2",
        "--beta",
        "0.25",
        "--out",
        first.to_str().unwrap(),
    ]);
    let echo = first.join("config_resolved.toml");

    // Feeding the echo back reproduces the same physics byte for byte.
    let second = dir.path().join("second");
    run_ok(&[
        "evolve",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(
        read(&first.join("summary.csv")),
        read(&second.join("summary.csv"))
    );
    assert_eq!(
        read(&first.join("distribution_kick_02.csv")),
        read(&second.join("distribution_kick_02.csv"))
    );
}

#[test]
fn file_config_drives_a_scan_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scan.toml");
    std::fs::write(
        &config,
        r#"
        [schedule]
        phi_d = 1.5
        kicks = 2

        [scan]
        axis = "beta"
        from = 0.0
        to = 1.0
        steps = 4

        [output]
        json = true
        "#,
    )
    .unwrap();
    let out = dir.path().join("scan-out");
    run_ok(&[
        "scan",
        "--config",
        config.to_str().unwrap(),
        "--period",
        "TT/2",
        "--steps",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);

    let scan = csv_lines(&out.join("scan.csv"));
    assert_eq!(scan[0], "axis,value,energy_Erec,uncertainty_Erec");
    // The flag's 8 points beat the file's 4; the half-open grid ends at 7/8.
    assert_eq!(scan.len(), 1 + 8);
    assert!(scan[1].starts_with("beta,0.000000000000e0,"));
    assert!(scan[8].starts_with("beta,8.750000000000e-1,"));
    // json = true came from the file.
    assert!(out.join("scan.json").is_file());
    // A half-Talbot beta sweep gets the closed-form overlay.
    let overlay = csv_lines(&out.join("oracle_overlay.csv"));
    assert_eq!(overlay[0], "beta,energy_Erec");
    assert_eq!(overlay.len(), 1 + 8);
}

#[test]
fn overlay_is_absent_away_from_half_talbot_periods() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "scan",
        "--axis",
        "beta",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "4",
        "--period",
        "40us",
        "--kicks",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(out.join("scan.csv").is_file());
    assert!(!out.join("oracle_overlay.csv").exists());
}

#[test]
fn oracle_antiresonance_example_returns_to_site_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "oracle",
        "--l",
        "1",
        "--beta",
        "0",
        "--kicks",
        "2",
        "--phi-d",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    for row in &csv_lines(&out.join("populations.csv"))[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        let site: i64 = fields[0].parse().unwrap();
        let population: f64 = fields[2].parse().unwrap();
        if site == 0 {
            assert!((population - 1.0).abs() < 1e-12);
        } else {
            assert!(population.abs() < 1e-12);
        }
    }
    // Two kicks at the antiresonance bring the energy back down.
    let energies = csv_lines(&out.join("energies.csv"));
    assert_eq!(energies[0], "kicks,energy_Erec");
    let last: f64 = energies[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!(last.abs() < 1e-12);
}

#[test]
fn oracle_fraction_table_lists_reduced_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(&["oracle", "--fractions", "6", "--out", out.to_str().unwrap()]);
    let rows = csv_lines(&out.join("fractional_times.csv"));
    assert_eq!(rows[0], "numerator,denominator,time_us");
    assert_eq!(rows.len(), 1 + 12);
    // No populations were requested, so none are written.
    assert!(!out.join("populations.csv").exists());
}

#[test]
fn exit_codes_separate_error_classes() {
    let dir = tempfile::tempdir().unwrap();

    // Config class: unparseable config file.
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[schedule\n").unwrap();
    let out = aokr(&["evolve", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Config class: unknown keys are rejected, not ignored.
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[schedule]\nphid = 1.5\n").unwrap();
    let out = aokr(&["evolve", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Domain class: the closed form rejects periods off the half-Talbot
    // ladder and says where it is valid.
    let run = dir.path().join("oracle");
    let out = aokr(&["oracle", "--period", "40us", "--out", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("half the Talbot time"), "stderr: {stderr}");

    // Physics abort: momentum reaching the grid cutoff is a hard stop.
    let cut = dir.path().join("cut");
    let out = aokr(&[
        "evolve",
        "--grid-points",
        "64",
        "--grid-periods",
        "16",
        "--sigma-w",
        "2",
        "--phi-d",
        "3",
        "--kicks",
        "2",
        "--out",
        cut.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // I/O class: the output directory cannot be created below a file.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let under_file = blocker.join("sub");
    let out = aokr(&["evolve", "--kicks", "0", "--out", under_file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    // Flag conflicts are caught by the parser.
    let out = aokr(&["evolve", "--period", "TT", "--kbar", "4pi"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_output_is_identical_for_every_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("threads-{threads}"));
        run_ok(&[
            "scan",
            "--axis",
            "period",
            "--from",
            "30us",
            "--to",
            "36us",
            "--step",
            "1us",
            "--kicks",
            "2",
            "--phi-d",
            "2.5",
            "--ensemble-sigma",
            "0.18",
            "--ensemble-samples",
            "9",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        outputs.push(std::fs::read(out.join("scan.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
