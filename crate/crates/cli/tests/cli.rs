//! End-to-end runs of the `smrlmt` binary: validating relation files,
//! crawling the built-in fixture, driving a campaign, and rendering the
//! resulting report.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smrl_core::fixture::{serve, FixtureHandle, SiteConfig, Vuln};
use smrl_core::TargetConfig;
use tempfile::TempDir;

fn smrlmt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smrlmt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn catalog_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../catalog")
}

/// Serves the fixture and writes a matching target configuration file,
/// returning the handle, the config path, and the scratch directory.
fn fixture_setup(site: SiteConfig) -> (FixtureHandle, PathBuf, TempDir) {
    let handle = serve(site, 0, 0).expect("fixture binds");
    let mut config =
        TargetConfig::for_tests(&format!("https://127.0.0.1:{}/", handle.secure_port));
    config.insecure_port = handle.insecure_port;
    config.secure_port = handle.secure_port;
    config.paths.views = 4;
    let dir = TempDir::new().expect("tempdir");
    let path = dir.path().join("target.toml");
    std::fs::write(&path, toml::to_string(&config).expect("config serializes"))
        .expect("config written");
    (handle, path, dir)
}

#[test]
fn check_accepts_the_shipped_catalog() {
    let dir = TempDir::new().expect("tempdir");
    let files: Vec<String> = std::fs::read_dir(catalog_dir())
        .expect("catalog dir")
        .map(|e| e.expect("entry").path().display().to_string())
        .collect();
    assert!(!files.is_empty());
    let mut args = vec!["check"];
    args.extend(files.iter().map(String::as_str));
    let out = smrlmt(dir.path(), &args);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).is_empty());
    assert!(stderr(&out).is_empty());
}

#[test]
fn check_rejects_broken_relation_files() {
    let dir = TempDir::new().expect("tempdir");
    let truncated = dir.path().join("truncated.smrl");
    std::fs::write(&truncated, "MR Broken {").expect("written");
    let out = smrlmt(dir.path(), &["check", "truncated.smrl"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("truncated.smrl"));

    let misuse = dir.path().join("misuse.smrl");
    std::fs::write(
        &misuse,
        "package p;\nMR Misuse { EQUAL(Input(1), frobnicate(Input(1))); }\n",
    )
    .expect("written");
    let out = smrlmt(dir.path(), &["check", "misuse.smrl"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("misuse.smrl"), "{}", stderr(&out));
}

#[test]
fn crawl_test_report_roundtrip_finds_the_seeded_flaw() {
    let (_handle, target, dir) = fixture_setup(SiteConfig::with_vulns(&[Vuln::V1]));
    let target = target.display().to_string();

    let out = smrlmt(dir.path(), &["crawl", "--target", &target, "--out", "pool"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("input sequences"), "{}", stdout(&out));

    // A pool directory is never reused.
    let again = smrlmt(dir.path(), &["crawl", "--target", &target, "--out", "pool"]);
    assert_eq!(exit_code(&again), 2);

    let out = smrlmt(
        dir.path(),
        &[
            "--verbose",
            "test",
            "--pool",
            "pool",
            "--relations",
            "OTG_AUTHZ_002",
            "--report",
            "campaign.json",
        ],
    );
    assert_eq!(exit_code(&out), 1, "stderr: {}", stderr(&out));
    let summary = stdout(&out);
    assert!(summary.contains("owasp.OTG_AUTHZ_002"), "{summary}");
    assert!(summary.contains("total reported failures: 2"), "{summary}");
    let transcript = dir.path().join("smrl-test-transcript.log");
    assert!(transcript.exists());
    assert!(std::fs::metadata(&transcript).expect("metadata").len() > 0);

    let raw = std::fs::read_to_string(dir.path().join("campaign.json")).expect("report");
    let parsed: serde_json::Value = serde_json::from_str(&raw).expect("valid JSON");
    assert_eq!(parsed["seed"], 42);

    let out = smrlmt(dir.path(), &["report", "campaign.json"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("total reported failures: 2"));

    let out = smrlmt(
        dir.path(),
        &["test", "--pool", "pool", "--relations", "NO_SUCH_RELATION"],
    );
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("NO_SUCH_RELATION"));
}

#[test]
fn patched_fixture_passes_the_full_catalog_with_a_script() {
    let (_handle, target, dir) = fixture_setup(SiteConfig::patched());
    let target = target.display().to_string();

    let script = dir.path().join("stats.script");
    std::fs::write(&script, "user tester\nvisit /\nsubmit\nvisit /stats\n")
        .expect("script written");

    let out = smrlmt(
        dir.path(),
        &[
            "crawl",
            "--target",
            &target,
            "--out",
            "pool",
            "--script",
            "stats.script",
        ],
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("18 input sequences"), "{}", stdout(&out));

    let out = smrlmt(dir.path(), &["test", "--pool", "pool"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let summary = stdout(&out);
    assert!(summary.contains("total reported failures: 0"), "{summary}");
    for name in ["OTG_AUTHN_001", "OTG_AUTHZ_001", "OTG_AUTHZ_002", "OTG_SESS_003"] {
        assert!(summary.contains(name), "{summary}");
    }
}

#[test]
fn catalog_list_names_shipped_and_planned_relations() {
    let dir = TempDir::new().expect("tempdir");
    let out = smrlmt(dir.path(), &["catalog", "list"]);
    assert_eq!(exit_code(&out), 0);
    let listing = stdout(&out);
    assert!(listing.contains("owasp.OTG_AUTHZ_002"));
    assert!(listing.contains("otg_sess_003.smrl"));
    assert!(listing.contains("OTG_SESS_008"));
}
