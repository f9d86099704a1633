//! Drives the perf backends against a stand-in `perf` script so the command
//! line, output parsing and error mapping are exercised without hardware
//! counters or privileges.

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use leakscope::collector::{collect, open_session_with, SessionOptions, TargetSpec};
use leakscope::{build_event_set, evaluate, Correction, Error, EventSet};

/// Writes a fake `perf` that parses `stat -x , -o FILE -e EVENTS [-p PID] -- CMD...`,
/// runs CMD, and reports CMD's stdout (a number) as the count of every event.
/// `extra` is spliced in before the report is written.
fn fake_perf(dir: &Path, extra: &str) -> PathBuf {
    let script = format!(
        r##"#!/bin/sh
out=""; events=""
[ "$1" = "stat" ] || exit 129
shift
while [ $# -gt 0 ]; do
  case "$1" in
    -o) out="$2"; shift 2 ;;
    -e) events="$2"; shift 2 ;;
    -x) shift 2 ;;
    -p) shift 2 ;;
    --) shift; break ;;
    *) shift ;;
  esac
done
value=$("$@")
status=$?
[ -n "$value" ] || value=1000
{extra}
echo "# started on today" > "$out"
echo "" >> "$out"
for e in $(echo "$events" | tr ',' ' '); do
  echo "$value,,$e,1000,100.00,," >> "$out"
done
exit $status
"##
    );
    let path = dir.join("perf");
    std::fs::write(&path, script).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn opts(perf: PathBuf) -> SessionOptions {
    SessionOptions {
        perf_path: Some(perf),
        skip_probe: false,
    }
}

fn events() -> EventSet {
    build_event_set(&["cache-misses", "branches"], 8).unwrap()
}

fn sh(cmd: &str) -> Vec<String> {
    vec!["sh".into(), "-c".into(), cmd.into()]
}

#[test]
fn spawn_counts_whole_command_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let perf = fake_perf(dir.path(), "");
    let target = TargetSpec::Spawn { command: sh("echo 7{label}") };
    let mut s = open_session_with(&target, &events(), &opts(perf)).unwrap();
    assert_eq!(s.backend_id(), "perf-spawn");
    let sample = s.measure_once("3").unwrap();
    assert_eq!(sample.counts["cache-misses"], 73);
    assert_eq!(sample.counts["branches"], 73);

    let ms = collect(&mut s, &[("1", 3), ("2", 3)]).unwrap();
    assert_eq!(ms.counts("1", "cache-misses"), vec![71, 71, 71]);
    assert_eq!(ms.metadata.backend, "perf-spawn");
    assert!(ms.metadata.timestamp.is_some());
    assert!(ms.metadata.host.is_some());
    // constant but different footprints are maximal leakage
    let report = evaluate(&ms, 0.05, Correction::None).unwrap();
    assert!(report.alarm);
}

#[test]
fn spawn_target_failure() {
    let dir = tempfile::tempdir().unwrap();
    let perf = fake_perf(dir.path(), "");
    let target = TargetSpec::Spawn { command: sh("echo 5; exit 3") };
    let mut s = open_session_with(&target, &events(), &opts(perf)).unwrap();
    let err = s.measure_once("a").unwrap_err();
    assert!(matches!(err, Error::TargetFailed(_)), "{err:?}");
}

#[test]
fn not_counted_is_a_counter_read_error() {
    let dir = tempfile::tempdir().unwrap();
    let perf = fake_perf(dir.path(), r#"value="<not counted>""#);
    let target = TargetSpec::Spawn { command: sh("echo 5") };
    let mut s = open_session_with(
        &target,
        &events(),
        &SessionOptions {
            perf_path: Some(perf.clone()),
            skip_probe: true,
        },
    )
    .unwrap();
    assert!(matches!(s.measure_once("a"), Err(Error::CounterReadError(_))));
    // the probe turns the same condition into an unavailable backend
    let err = open_session_with(&target, &events(), &opts(perf)).unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)), "{err:?}");
}

#[test]
fn permission_problems_are_reported_as_such() {
    let dir = tempfile::tempdir().unwrap();
    let perf = fake_perf(
        dir.path(),
        r#"echo "Error: Access to performance monitoring and observability operations is limited." >&2
echo "Consider adjusting /proc/sys/kernel/perf_event_paranoid setting" >&2
exit 255"#,
    );
    let target = TargetSpec::Spawn { command: sh("echo 5") };
    let err = open_session_with(&target, &events(), &opts(perf)).unwrap_err();
    match err {
        Error::PermissionDenied(msg) => assert!(msg.contains("privilege")),
        other => panic!("expected PermissionDenied, got {other:?}"),
    }
}

#[test]
fn attach_uses_fixed_windows() {
    let dir = tempfile::tempdir().unwrap();
    // `sleep` prints nothing, so the fake reports its default count
    let perf = fake_perf(dir.path(), "");
    let target = TargetSpec::Attach {
        pid: std::process::id(),
        window_ms: 20,
    };
    let mut s = open_session_with(&target, &events(), &opts(perf)).unwrap();
    assert_eq!(s.backend_id(), "perf-attach");
    let sample = s.measure_once("idle").unwrap();
    assert_eq!(sample.counts["branches"], 1000);
}

#[test]
fn missing_perf_binary() {
    let target = TargetSpec::Spawn { command: sh("true") };
    let err = open_session_with(&target, &events(), &opts("/nonexistent/perf".into())).unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)));
}
