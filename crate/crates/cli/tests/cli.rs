use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::thread;
use std::time::Duration;

use vistacheck_core::bridge::{session_label, AgentConfig, SessionRegistry, Transport};
use vistacheck_core::criticality::{VistaContext, VistaKind};
use vistacheck_core::dynamics::presets;
use vistacheck_core::oracle::{Verdict, VerdictRecord};
use vistacheck_core::sim::PolicyKind;
use vistacheck_core::sweep::{run_case, sweep, SweepSpec};

const BIN: &str = env!("CARGO_BIN_EXE_vistacheck");

fn vistacheck(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("VISTACHECK_OUTPUT_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_manifest(dir: &Path, body: &str) -> String {
    let path = dir.join("manifest.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// Every file in `dir`, by name, with its contents.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn ad_table_prints_the_braking_row() {
    let o = vistacheck(&["ad-table", "--preset", "apollo-like", "--speeds", "0,5,10,15,20"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let b: Vec<f64> =
        text.lines().find(|l| l.starts_with("B,")).unwrap().split(',').skip(1).map(|x| x.parse().unwrap()).collect();
    for (got, want) in b.iter().zip([0.0, 6.1, 17.3, 31.7, 50.0]) {
        assert!((got - want).abs() <= 0.1 + 1e-9, "{got} vs {want}");
    }
    assert!(text.starts_with("quantity,0,5,10,15,20\n"));
}

#[test]
fn criticals_prints_lane_change_values() {
    let o = vistacheck(&["criticals", "--kind", "lane-change", "--preset", "apollo-like", "--ve", "20"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (x_f, x_a) = (v["criticals"]["x_f"].as_f64().unwrap(), v["criticals"]["x_a"].as_f64().unwrap());
    assert!((x_f - 50.0).abs() <= 0.3 && (x_a - 74.5).abs() <= 0.3, "{v}");
}

#[test]
fn validation_problems_exit_with_one() {
    for args in [
        &["ad-table", "--preset", "nonexistent"][..],
        &["criticals", "--kind", "roundabout", "--ve", "5"],
        &["criticals", "--kind", "lane-change", "--ve", "0"],
        &["sweep", "--manifest", "/nonexistent/manifest.toml"],
        &["no-such-command"],
    ] {
        let o = vistacheck(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(vistacheck(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_manifest_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(tmp.path(), "preset = \"apollo-like\"\nspeed_limit = 30\n");
    let o = vistacheck(&["sweep", "--manifest", &m, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_lists_the_coarse_cases() {
    let o = vistacheck(&["gen", "--kind", "crossing-light", "--preset", "apollo-like"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    // Nine front distances for each of the five light-crossing speeds.
    assert_eq!(lines.len(), 45);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(first.get("x_a").is_none());
}

#[test]
fn run_writes_trace_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = vistacheck(&[
        "run",
        "--kind",
        "merging",
        "--ve",
        "10",
        "--xa",
        "160",
        "--xf",
        "80",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("PS"));
    let record: VerdictRecord = serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(record.verdict, Verdict::SafeProgress);
    assert!(fs::read_to_string(out.join("trace.jsonl")).unwrap().lines().count() > 10);
}

#[test]
fn sweeping_twice_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(
        tmp.path(),
        "kinds = [\"merging\", \"crossing-light\"]\npreset = \"apollo-like\"\n[grid]\nspeeds = [10.0]\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let one = vistacheck(&["sweep", "--manifest", &m, "--out", a.to_str().unwrap(), "--threads", "1"]);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    let many = vistacheck(&["sweep", "--manifest", &m, "--out", b.to_str().unwrap(), "--threads", "8"]);
    assert!(many.status.success());
    let files = snapshot(&a);
    assert_eq!(files, snapshot(&b));
    let names: BTreeSet<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    for n in
        ["verdicts.jsonl", "manifest.json", "merging-10.csv", "crossing-light-10.svg", "summary.txt", "findings.json"]
    {
        assert!(names.contains(n), "{n} missing from {names:?}");
    }
    assert!(!names.contains("verdicts.partial.jsonl"));

    // Rerunning into the same directory reuses everything and changes nothing.
    let again = vistacheck(&["sweep", "--manifest", &m, "--out", a.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(snapshot(&a), files);

    let report = vistacheck(&["report", "--dir", a.to_str().unwrap(), "--reference", b.to_str().unwrap()]);
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    assert!(stdout(&report).contains("0 findings against the reference"));
}

#[test]
fn sweep_refuses_results_of_another_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let m = write_manifest(tmp.path(), "kinds = [\"crossing-light\"]\n[grid]\nspeeds = [10.0]\n");
    assert!(vistacheck(&["sweep", "--manifest", &m, "--out", out.to_str().unwrap()]).status.success());
    let m = write_manifest(tmp.path(), "kinds = [\"crossing-light\"]\n[grid]\nspeeds = [15.0]\n");
    assert_eq!(vistacheck(&["sweep", "--manifest", &m, "--out", out.to_str().unwrap()]).status.code(), Some(1));
    assert!(vistacheck(&["sweep", "--manifest", &m, "--out", out.to_str().unwrap(), "--fresh"]).status.success());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let m =
        write_manifest(tmp.path(), "kinds = [\"crossing-light\"]\noutput_dir = \"ignored\"\n[grid]\nspeeds = [5.0]\n");
    let target = tmp.path().join("from-env");
    let o = Command::new(BIN)
        .args(["sweep", "--manifest", &m])
        .current_dir(tmp.path())
        .env("VISTACHECK_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(target.join("verdicts.jsonl").is_file());
    assert!(!tmp.path().join("ignored").exists());
}

fn stdio_agent() -> AgentConfig {
    AgentConfig::new(Transport::Stdio { command: vec![BIN.to_string(), "serve-example-agent".to_string()] })
}

fn merging_spec(policy: PolicyKind) -> SweepSpec {
    let mut s =
        SweepSpec::standard(VistaContext::standard(VistaKind::Merging), "apollo-like", presets::apollo_like(), policy);
    s.grid.speeds = vec![10.0];
    s
}

#[test]
fn stdio_agent_reproduces_the_in_process_sweep() {
    let local = sweep(&merging_spec(PolicyKind::WorstCaseSafe), &[], 4, &|_| {}).unwrap();
    let remote = sweep(&merging_spec(PolicyKind::External(stdio_agent())), &[], 4, &|_| {}).unwrap();
    assert_eq!(remote, local);
}

#[test]
fn stdio_agent_from_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_manifest(
        tmp.path(),
        &format!(
            "kinds = [\"crossing-light\"]\n[grid]\nspeeds = [10.0]\n[policy]\npolicy = \"external\"\n\
             [policy.transport]\ntransport = \"stdio\"\ncommand = [{:?}, \"serve-example-agent\"]\n",
            BIN
        ),
    );
    let ext = tmp.path().join("ext");
    let o = vistacheck(&["sweep", "--manifest", &m, "--out", ext.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let wcs = write_manifest(tmp.path(), "kinds = [\"crossing-light\"]\n[grid]\nspeeds = [10.0]\n");
    let local = tmp.path().join("local");
    assert!(vistacheck(&["sweep", "--manifest", &wcs, "--out", local.to_str().unwrap()]).status.success());
    for name in ["verdicts.jsonl", "crossing-light-10.csv"] {
        assert_eq!(fs::read(ext.join(name)).unwrap(), fs::read(local.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn killing_agents_mid_sweep_fails_only_the_cases_in_flight() {
    let registry = SessionRegistry::new();
    let mut agent = stdio_agent();
    agent.registry = Some(registry.clone());
    let spec = merging_spec(PolicyKind::External(agent));

    let killer = {
        let registry = registry.clone();
        thread::spawn(move || {
            while registry.started() < 20 {
                thread::sleep(Duration::from_millis(1));
            }
            registry.kill_all()
        })
    };
    let records = sweep(&spec, &[], 4, &|_| {}).unwrap();
    let killed: BTreeSet<String> = killer.join().unwrap().into_iter().collect();

    let failed: Vec<&VerdictRecord> = records.iter().filter(|r| r.verdict == Verdict::SoftwareFailure).collect();
    assert!(!failed.is_empty(), "no case was in flight");
    for r in &failed {
        assert!(killed.contains(&session_label(&spec.scenario(&r.case))), "{:?} failed without being killed", r.case);
    }
    for r in records.iter().filter(|r| r.verdict != Verdict::SoftwareFailure) {
        let local = run_case(&merging_spec(PolicyKind::WorstCaseSafe).scenario(&r.case)).unwrap();
        assert_eq!(r.verdict, local.verdict, "{:?}", r.case);
    }
}
