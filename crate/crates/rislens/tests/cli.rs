use std::path::Path;
use std::process::Command;

const SMALL: &str = "\
ris_rows=12
ris_cols=12
num_pilots=24
grid_theta_bins=20
grid_phi_bins=40
grid_d_bins=40
d_max_m=3
profile=random,positional
prior_sigma_m=0.1
distances_m=0.4,1.2
trials=3
profile_realizations=2
snr_extent_m=1
snr_points=5
seed=11
";

fn rislens(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rislens"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_to(dir: &Path, cmd: &str, name: &str, extra: &[&str]) -> String {
    let config = dir.join("run.cfg");
    std::fs::write(&config, SMALL).unwrap();
    let out = dir.join(name);
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let status = rislens(&args);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn peb_csv_has_schema_and_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "peb", "peb.csv", &[]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "distance_m,profile,sigma_m,peb_m,prior_peb_m");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("4e-1,random,1e-1,"));
    assert!(lines[4].starts_with("1.2e0,positional,1e-1,"));
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        let peb: f64 = fields[3].parse().unwrap();
        assert!(peb > 0.0);
        assert_eq!(fields[4], "1.7320508075688773e-1");
    }
}

#[test]
fn rmse_csv_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_to(dir.path(), "rmse", "a.csv", &[]);
    let b = run_to(dir.path(), "rmse", "b.csv", &[]);
    let c = run_to(dir.path(), "rmse", "c.csv", &["--seed", "12"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let header = a.lines().next().unwrap();
    assert_eq!(
        header,
        "distance_m,profile,sigma_m,trials,rmse_m,rmse_theta_rad,rmse_phi_rad,rmse_d_m,outlier_rate,stderr_m"
    );
    for line in a.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[3], "3");
        let rate: f64 = fields[8].parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }
}

#[test]
fn snr_map_covers_each_profile() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "snr-map", "snr.csv", &[]);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 25);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], f[1]);
        assert!(f[4].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "trials=2\nwidgets=3\n").unwrap();
    let out = rislens(&["peb", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("widgets"), "{err}");

    let missing = rislens(&["rmse", "--config", dir.path().join("nope.cfg").to_str().unwrap()]);
    assert!(!missing.status.success());
}
