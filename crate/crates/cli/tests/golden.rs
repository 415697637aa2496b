//! `--help` output of every subcommand against files in tests/golden.
//! Run with `UPDATE_GOLDEN=1` to rewrite them after an intentional change.

use std::path::PathBuf;
use std::process::Command;

const SUBCOMMANDS: [&str; 6] = ["", "simulate", "fit", "classify", "evaluate", "effort-map"];

fn help(sub: &str) -> String {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vmsfish"));
    if !sub.is_empty() {
        cmd.arg(sub);
    }
    let out = cmd.arg("--help").env_remove("COLUMNS").output().unwrap();
    assert!(out.status.success(), "{sub} --help failed");
    String::from_utf8(out.stdout).unwrap()
}

fn golden_path(sub: &str) -> PathBuf {
    let name = if sub.is_empty() { "vmsfish" } else { sub };
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.help.txt"))
}

#[test]
fn help_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for sub in SUBCOMMANDS {
        let actual = help(sub);
        let path = golden_path(sub);
        if update {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &actual).unwrap();
            continue;
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}; run with UPDATE_GOLDEN=1", path.display()));
        assert_eq!(actual, expected, "help of `{sub}` differs from {}", path.display());
    }
}

#[test]
fn help_documents_every_flag() {
    let global = ["--config", "--seed", "--jobs", "--quiet"];
    let flags: [(&str, &[&str]); 5] = [
        ("simulate", &["--scenario", "--vessels", "--trips", "--intervals", "--out", "--truth"]),
        (
            "fit",
            &["--input", "--method", "--grouping", "--out-dir", "--k", "--variant", "--lo", "--hi", "--rho-mode", "--max-iter", "--tol", "--restarts", "--min-variance", "--trip-gap-hours", "--max-gap-hours", "--reported-speed"],
        ),
        ("classify", &["--input", "--models", "--out", "--variant", "--decode", "--trip-gap-hours", "--max-gap-hours", "--reported-speed"]),
        ("evaluate", &["--input", "--truth", "--methods", "--grouping", "--k-range", "--out", "--no-wall-time", "--k", "--variant", "--lo", "--hi"]),
        ("effort-map", &["--input", "--classified", "--cell", "--cell-lon", "--bbox", "--out", "--meta"]),
    ];
    for (sub, names) in flags {
        let text = help(sub);
        for flag in names.iter().chain(&global) {
            assert!(text.contains(flag), "`{sub} --help` does not mention {flag}");
        }
    }
}
