use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use faime_cli::commands::{cmd_osc_send, cmd_run, cmd_train, cmd_validate, parse_arg, RunOptions};
use faime_core::osc::{OscMessage, OscPacket, OscValue};
use faime_core::transport::Endpoint;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn capture(f: impl FnOnce(&mut Vec<u8>, &mut Vec<u8>) -> i32) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = f(&mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// Copy the demo theralmin config into `dir` with `edit` applied.
fn theralmin_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("theralmin.json")).unwrap())
            .unwrap();
    edit(&mut cfg);
    std::fs::copy(
        configs().join("gesture_model.json"),
        dir.join("gesture_model.json"),
    )
    .unwrap();
    let path = dir.join("device.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn validate_shipped_configs() {
    for name in ["theralmin.json", "emotiwatch.json"] {
        let (code, out, err) = capture(|o, e| cmd_validate(&configs().join(name), o, e));
        assert_eq!(code, 0, "{name}: {err}");
        assert!(out.contains("status: ok"));
    }
}

#[test]
fn validate_reports_bad_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = theralmin_config(dir.path(), |c| c["codes"] = serde_json::json!(["1a", "1c"]));
    let (code, out, err) = capture(|o, e| cmd_validate(&path, o, e));
    assert_eq!(code, 1);
    assert!(err.contains("invalid taxonomy code \"1c\""), "{err}");
    assert!(out.contains("violations: 1"));
}

#[test]
fn validate_reports_bad_throttle_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = theralmin_config(dir.path(), |c| {
        c["throttle"] = serde_json::json!(0.0);
    });
    assert_eq!(capture(|o, e| cmd_validate(&path, o, e)).0, 1);
    let path = theralmin_config(dir.path(), |c| {
        c["theralmin"]["f_min"] = serde_json::json!(5000.0);
    });
    assert_eq!(capture(|o, e| cmd_validate(&path, o, e)).0, 1);
}

#[test]
fn validate_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        capture(|o, e| cmd_validate(&dir.path().join("nope.json"), o, e)).0,
        2
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{").unwrap();
    assert_eq!(capture(|o, e| cmd_validate(&bad, o, e)).0, 2);
    let path = theralmin_config(dir.path(), |c| {
        c["model"] = serde_json::json!("missing.json")
    });
    assert_eq!(capture(|o, e| cmd_validate(&path, o, e)).0, 2);
}

#[test]
fn run_empty_replay() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let sink = Endpoint::open("127.0.0.1:0").unwrap();
    let target = sink.local_addr().unwrap().to_string();
    let opts = RunOptions {
        config: &configs().join("theralmin.json"),
        replay: Some(&empty),
        target: Some(&target),
        ws_port: None,
    };
    let (code, out, _) = capture(|o, e| cmd_run(&opts, o, e));
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "events_in: 0"));
    assert!(out.lines().any(|l| l == "events_out: 0"));
    assert!(sink.poll(Duration::from_millis(20)).is_empty());
}

#[test]
fn run_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = theralmin_config(dir.path(), |c| c["codes"] = serde_json::json!(["7a"]));
    let missing = dir.path().join("missing.jsonl");
    let opts = RunOptions {
        config: &config,
        replay: Some(&missing),
        target: None,
        ws_port: None,
    };
    assert_eq!(capture(|o, e| cmd_run(&opts, o, e)).0, 1);
    let good = configs().join("theralmin.json");
    let opts = RunOptions {
        config: &good,
        ..opts
    };
    assert_eq!(capture(|o, e| cmd_run(&opts, o, e)).0, 2);

    let unsorted = dir.path().join("unsorted.jsonl");
    std::fs::write(
        &unsorted,
        "{\"kind\":\"stimulus\",\"channel\":\"pitch\",\"value\":0.1,\"t_us\":9}\n\
         {\"kind\":\"stimulus\",\"channel\":\"pitch\",\"value\":0.1,\"t_us\":3}\n",
    )
    .unwrap();
    let opts = RunOptions {
        replay: Some(&unsorted),
        ..opts
    };
    assert_eq!(capture(|o, e| cmd_run(&opts, o, e)).0, 2);
}

#[test]
fn live_bind_failure_exits_3() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let status = Command::new(env!("CARGO_BIN_EXE_faime"))
        .args([
            "run",
            "--live",
            "--ws-port",
            &port,
            "--target",
            "127.0.0.1:9",
        ])
        .arg(configs().join("theralmin.json"))
        .output()
        .unwrap();
    assert_eq!(
        status.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
}

#[test]
fn train_writes_mean() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("samples.jsonl");
    std::fs::write(
        &data,
        "{\"label\":\"A\",\"features\":[0,0]}\n{\"label\":\"A\",\"features\":[0,2]}\n",
    )
    .unwrap();
    let model = dir.path().join("model.json");
    let (code, out, err) = capture(|o, e| cmd_train(&data, 1.0, &model, o, e));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("classes: 1"));
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(written["centroids"]["A"], serde_json::json!([0.0, 1.0]));
    assert_eq!(written["dim"], 2);
    assert_eq!(written["background_label"], "background");
}

#[test]
fn train_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let empty = write("empty.jsonl", "");
    assert_eq!(capture(|o, e| cmd_train(&empty, 1.0, &model, o, e)).0, 1);
    let ok = write("ok.jsonl", "{\"label\":\"A\",\"features\":[1]}\n");
    assert_eq!(capture(|o, e| cmd_train(&ok, 0.0, &model, o, e)).0, 1);
    assert_eq!(capture(|o, e| cmd_train(&ok, -1.0, &model, o, e)).0, 1);
    let mixed = write(
        "mixed.jsonl",
        "{\"label\":\"A\",\"features\":[0,0]}\n{\"label\":\"B\",\"features\":[0]}\n",
    );
    assert_eq!(capture(|o, e| cmd_train(&mixed, 1.0, &model, o, e)).0, 1);
    let garbage = write("garbage.jsonl", "{\"label\":\n");
    assert_eq!(capture(|o, e| cmd_train(&garbage, 1.0, &model, o, e)).0, 2);
    assert!(!model.exists());
}

fn send_and_receive(address: &str, args: &[&str]) -> Vec<u8> {
    let sink = std::net::UdpSocket::bind("127.0.0.1:0").unwrap();
    sink.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
    let target = sink.local_addr().unwrap().to_string();
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let (code, out, err) = capture(|o, e| cmd_osc_send(address, &args, Some(&target), o, e));
    assert_eq!(code, 0, "{err}");
    let mut buf = [0u8; 1024];
    let n = sink.recv(&mut buf).unwrap();
    assert!(out.contains(&format!("bytes: {n}")));
    buf[..n].to_vec()
}

#[test]
fn osc_send_golden_datagrams() {
    assert_eq!(
        send_and_receive("/a", &[]),
        [0x2f, 0x61, 0, 0, 0x2c, 0, 0, 0]
    );
    let mut note = b"/theralmin/note\0,ff\0".to_vec();
    note.extend_from_slice(&[0x43, 0xdc, 0, 0, 0x3f, 0, 0, 0]);
    assert_eq!(
        send_and_receive("/theralmin/note", &["f:440", "f:0.5"]),
        note
    );
    assert_eq!(send_and_receive("/s", &["s:hi"]), b"/s\0\0,s\0\0hi\0\0");
}

#[test]
fn osc_send_errors() {
    let args = vec!["x:1".to_owned()];
    assert_eq!(
        capture(|o, e| cmd_osc_send("/a", &args, Some("127.0.0.1:9"), o, e)).0,
        1
    );
    assert_eq!(
        capture(|o, e| cmd_osc_send("nope", &[], Some("127.0.0.1:9"), o, e)).0,
        1
    );
    assert_eq!(
        capture(|o, e| cmd_osc_send("/a", &[], Some("not a host"), o, e)).0,
        2
    );
}

#[test]
fn arg_tokens() {
    assert_eq!(parse_arg("i:-3").unwrap(), OscValue::Int(-3));
    assert_eq!(parse_arg("f:0.5").unwrap(), OscValue::Float(0.5));
    assert_eq!(parse_arg("s:a:b").unwrap(), OscValue::Str("a:b".into()));
    assert!(parse_arg("i:1.5").is_err());
    assert!(parse_arg("5").is_err());
}

#[test]
fn binary_osc_send_negative_int() {
    let sink = Endpoint::open("127.0.0.1:0").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_faime"))
        .args([
            "osc-send",
            "/n",
            "i:-7",
            "--target",
            &sink.local_addr().unwrap().to_string(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let got = sink.poll(Duration::from_secs(2));
    assert_eq!(got.len(), 1);
    assert_eq!(
        got[0].0,
        OscPacket::from(OscMessage::new("/n", vec![OscValue::Int(-7)]))
    );
}
