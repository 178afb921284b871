use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gasjitter"))
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn scenario_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let file = scenarios().join("greedy_vs_optimal.toml");
    let mut outputs = Vec::new();
    for run_dir in ["a", "b"] {
        let out_dir = tmp.path().join(run_dir);
        let out = run(&[
            "scenario",
            "--scenario",
            file.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push(read_dir_sorted(&out_dir.join("greedy_vs_optimal")));
    }
    assert!(outputs[0].iter().any(|(n, _)| n == "trajectories.csv"));
    assert!(outputs[0].iter().any(|(n, _)| n == "comparison.csv"));
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn scenario_without_transforms_matches_the_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let network = scenarios().join("networks/cascade.toml");
    let sc = tmp.path().join("plain.toml");
    fs::write(
        &sc,
        format!(
            "name = \"plain\"\nnetwork = {:?}\nmethod = \"sp\"\n",
            network.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&[
        "scenario",
        "--scenario",
        sc.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manual = tmp.path().join("manual");
    let out = run(&[
        "dispatch",
        "--network",
        network.to_str().unwrap(),
        "--method",
        "sp",
        "--out-dir",
        manual.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&[
        "jitter",
        "--network",
        network.to_str().unwrap(),
        "--method",
        "sp",
        "--out-dir",
        manual.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in [
        "dispatch_compressors.csv",
        "dispatch_nodes.csv",
        "jitter.csv",
        "jitter_mainline.csv",
    ] {
        // Only the run name in the metadata may differ.
        let body = |p: PathBuf| {
            fs::read_to_string(p)
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with("# scenario:"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(
            body(tmp.path().join("plain").join(name)),
            body(manual.join(name)),
            "{name}"
        );
    }
}

#[test]
fn bad_network_reports_its_line_and_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let net = tmp.path().join("bad.toml");
    fs::write(
        &net,
        "[network]\nslack = \"A\"\nslack_pressure = \"5 MPa\"\n\n[[nodes]]\nid = \"A\"\ninjection = 1.0\n\n[[pipes]]\nid = \"P\"\nfrom = \"A\"\nto = \"Q\"\nlength = \"1 km\"\ndiameter = \"0.5 m\"\n",
    )
    .unwrap();
    let out = run(&[
        "steady",
        "--network",
        net.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("line 12") && err.contains("`Q`"), "{err}");
}

#[test]
fn scenario_failures_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.toml");
    fs::write(&missing, "name = \"m\"\nnetwork = \"nowhere.toml\"\n").unwrap();
    let out = run(&[
        "scenario",
        "--scenario",
        missing.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("load stage failed"),
        "{}",
        stderr(&out)
    );

    // Doubling every flow leaves no feasible dispatch on the cascade.
    let network = scenarios().join("networks/cascade.toml");
    let heavy = tmp.path().join("heavy.toml");
    fs::write(
        &heavy,
        format!(
            "name = \"heavy\"\nnetwork = {:?}\nmethod = \"sp\"\n\n[[transforms]]\nkind = \"scale\"\nfactor = 2.0\n",
            network.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&[
        "scenario",
        "--scenario",
        heavy.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("dispatch stage failed"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = run(&["steady", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}
