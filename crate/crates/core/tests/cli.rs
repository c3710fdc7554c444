//! The `netflip` binary as a separate process.

use std::path::Path;
use std::process::{Command, Output};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use num_bigint::BigUint;
use serde_json::Value;

use netflip::exploit::{encode_ssh_rsa, RsaPublicKey};

fn netflip(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netflip"));
    cmd.args(args).env_remove("NETFLIP_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(netflip(&[], &[]).status.code(), Some(2));
    assert_eq!(netflip(&["rates", "--bogus"], &[]).status.code(), Some(2));
    assert_eq!(netflip(&["rates"], &[]).status.code(), Some(0));
    // a malformed value is a usage error, a missing input a runtime error
    assert_eq!(
        netflip(&["rates", "--bandwidth", "lots"], &[])
            .status
            .code(),
        Some(2)
    );
    let o = netflip(&["analyze", "ocsp", "--in", "/nonexistent/index.txt"], &[]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "invalid_input");
    assert!(o.stdout.is_empty());
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("env.toml");
    std::fs::write(&path, "seed = 99\n[policy]\nkind = \"closed\"\n").unwrap();
    let v = json(&netflip(
        &["classify", "--json"],
        &[("NETFLIP_CONFIG", &path)],
    ));
    assert_eq!(v["seed"], 99);
    assert_eq!(v["results"]["kind"], "closed");

    // an explicit --config wins over the environment
    let other = dir.path().join("open.toml");
    std::fs::write(&other, "[policy]\nkind = \"open\"\n").unwrap();
    let o = netflip(
        &["classify", "--config", other.to_str().unwrap()],
        &[("NETFLIP_CONFIG", &path)],
    );
    assert_eq!(stdout(&o).trim(), "verdict: open");
}

#[test]
fn classify_writes_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let o = netflip(
        &[
            "classify",
            "--policy",
            "adaptive",
            "--csv",
            csv.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "verdict: adaptive");
    let v = json(&netflip(
        &["classify", "--policy", "adaptive", "--json"],
        &[],
    ));
    let curve = v["results"]["evidence"]["single_curve"].as_array().unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,latency"));
    for (line, p) in lines.zip(curve) {
        assert_eq!(line, format!("{},{}", p["n"], p["latency"]));
    }
    assert_eq!(text.lines().count(), curve.len() + 1);
}

#[test]
fn simulate_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let flips = dir.path().join("flips.csv");
    let o = netflip(
        &[
            "simulate",
            "--policy",
            "closed",
            "--duration",
            "0.2",
            "--out",
            out.to_str().unwrap(),
            "--flips-csv",
            flips.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "simulate");
    assert_eq!(report["config_digest"].as_str().unwrap().len(), 64);
    let n = report["results"]["flips"].as_array().unwrap().len();
    let csv = std::fs::read_to_string(&flips).unwrap();
    assert_eq!(csv.lines().count(), n + 1);
}

#[test]
fn failed_run_leaves_no_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[cache]\nways = 2\ncat_ways = 3\n").unwrap();
    let o = netflip(
        &[
            "simulate",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("cache.cat_ways"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn analyze_dns_zone() {
    let dir = tempfile::tempdir().unwrap();
    let zone = dir.path().join("zone.txt");
    std::fs::write(
        &zone,
        "; zone\ndomain.com A 192.0.2.1\ndomain.com MX 10 mail.domain.com\n",
    )
    .unwrap();
    let csv = dir.path().join("dns.csv");
    let v = json(&netflip(
        &[
            "analyze",
            "dns",
            "--in",
            zone.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--json",
        ],
        &[],
    ));
    let candidates = v["results"]["candidates"].as_array().unwrap();
    assert!(candidates
        .iter()
        .any(|c| c["field"] == "name" && c["candidate"]["flipped"] == "dnmain.com"));
    assert!(candidates
        .iter()
        .any(|c| c["field"] == "mx_host" && c["candidate"]["flipped"] == "mail.dnmain.com"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), candidates.len() + 1);
}

#[test]
fn analyze_ocsp_index() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("index.txt");
    std::fs::write(
        &db,
        "R\t301231235959Z\t240101000000Z\t1A\tunknown\t/CN=a\n\
         V\t301231235959Z\t\t1B\tunknown\t/CN=b\n",
    )
    .unwrap();
    let v = json(&netflip(
        &["analyze", "ocsp", "--in", db.to_str().unwrap(), "--json"],
        &[],
    ));
    let scan = &v["results"]["scan"];
    assert_eq!(scan["records"], 2);
    assert_eq!(scan["exploitable"].as_array().unwrap().len(), 1);
    assert_eq!(scan["exploitable"][0]["candidate"]["offset"], 0);
    let bytes = std::fs::metadata(&db).unwrap().len() as f64;
    assert_eq!(scan["probability"].as_f64().unwrap(), 1.0 / (8.0 * bytes));
    // 1A -> 1B collides with the valid record; only other hex flips count
    let serials = v["results"]["serial_flips"].as_array().unwrap();
    assert!(serials.iter().all(|s| s["candidate"]["flipped"] != "1B"));
    assert!(!serials.is_empty());
}

#[test]
fn analyze_rsa_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    // 61 * 53 = 3233
    let key = RsaPublicKey::new(BigUint::from(3233u32), BigUint::from(7u32)).unwrap();
    let blob = encode_ssh_rsa(&key);
    let before = dir.path().join("before");
    let after = dir.path().join("after");
    std::fs::write(
        &before,
        format!("ssh-rsa {} alice\n", STANDARD.encode(&blob)),
    )
    .unwrap();
    let mut flipped = blob.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 0b10;
    std::fs::write(
        &after,
        format!("ssh-rsa {} alice\n", STANDARD.encode(&flipped)),
    )
    .unwrap();

    let v = json(&netflip(
        &[
            "analyze",
            "rsa",
            "--in",
            after.to_str().unwrap(),
            "--before",
            before.to_str().unwrap(),
            "--json",
        ],
        &[],
    ));
    assert_eq!(v["results"]["changed"][0]["modulus_bit"], 1);
    let outcome = &v["results"]["keys"][0]["outcomes"][0];
    // 3233 ^ 2 = 3235 = 5 * 647, lambda = lcm(4, 646) = 1292, 7 * 923 = 1 mod 1292
    assert_eq!(outcome["n_flipped"], "3235");
    assert_eq!(outcome["d"], "923");
    assert_eq!(outcome["outcome"], "recovered");

    // without a snapshot a small key is analysed at every bit
    let csv = dir.path().join("rsa.csv");
    let o = netflip(
        &[
            "analyze",
            "rsa",
            "--in",
            before.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("keys: 1"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 12 + 1);
}

#[test]
fn banks_and_sweep_summaries() {
    let o = netflip(&["banks", "-k", "8"], &[]);
    assert!(stdout(&o).starts_with("P(collision | k=8, banks=32) = 0.614"));
    let v = json(&netflip(&["sweep", "--duration", "0.07", "--json"], &[]));
    assert_eq!(v["command"], "sweep");
    assert_eq!(v["results"].as_array().unwrap().len(), 12);
}
