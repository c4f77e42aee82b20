use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqc"))
        .args(args)
        .env_remove("RQC_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rqc(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn write_circuit(dir: &TempDir, topology: &str, cycles: &str, seed: &str) -> String {
    let p = path(dir, &format!("{topology}-{cycles}-{seed}.txt"));
    ok(&[
        "generate",
        "--topology",
        topology,
        "--cycles",
        cycles,
        "--seed",
        seed,
        "-o",
        &p,
    ]);
    p
}

#[test]
fn generate_is_byte_identical() {
    let a = ok(&[
        "generate",
        "--topology",
        "grid4x4",
        "--cycles",
        "12",
        "--seed",
        "7",
    ]);
    let b = ok(&[
        "generate",
        "--topology",
        "grid4x4",
        "--cycles",
        "12",
        "--seed",
        "7",
    ]);
    assert_eq!(a, b);
    assert!(a.starts_with("qubits 16 cycles 12 seed 7\n"));
    let c = ok(&[
        "generate",
        "--topology",
        "grid4x4",
        "--cycles",
        "12",
        "--seed",
        "8",
    ]);
    assert_ne!(a, c);
}

#[test]
fn config_file_and_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.cfg");
    std::fs::write(&cfg, "# run\nseed = 8\n").unwrap();
    let base = ["generate", "--topology", "grid3x3", "--cycles", "4"];
    let seed8 = ok(&[&base[..], &["--seed", "8"]].concat());
    let seed9 = ok(&[&base[..], &["--seed", "9"]].concat());
    assert_eq!(ok(&[&base[..], &["--config", &cfg]].concat()), seed8);
    // flags beat the file
    assert_eq!(
        ok(&[&base[..], &["--config", &cfg, "--seed", "9"]].concat()),
        seed9
    );
    // the environment variable names the default file
    let out = Command::new(env!("CARGO_BIN_EXE_rqc"))
        .args(base)
        .env("RQC_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), seed8);

    std::fs::write(&cfg, "seed = eight\n").unwrap();
    let out = rqc(&[&base[..], &["--config", &cfg]].concat());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "format");
}

#[test]
fn order_reports_power_of_two_slices() {
    let dir = TempDir::new().unwrap();
    let circuit = write_circuit(&dir, "grid4x4", "12", "7");
    let plan = path(&dir, "plan.txt");
    for maxsize in ["28", "8"] {
        let out = ok(&[
            "order",
            "--circuit",
            &circuit,
            "--maxsize",
            maxsize,
            "--candidates",
            "100",
            "--plan-out",
            &plan,
        ]);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        let n = v["n_slices"].as_u64().unwrap();
        assert!(n.is_power_of_two(), "{out}");
        assert!(v["max_intermediate_log2"].as_u64().unwrap() <= maxsize.parse().unwrap());
        assert!(v["flops"].as_u64().unwrap() > 0);
    }
    assert!(std::fs::read_to_string(&plan)
        .unwrap()
        .starts_with("maxsize 8\n"));
    // same config, same plan
    let again = path(&dir, "again.txt");
    ok(&[
        "order",
        "--circuit",
        &circuit,
        "--maxsize",
        "8",
        "--plan-out",
        &again,
    ]);
    assert_eq!(
        std::fs::read(&plan).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn verify_sixteen_qubits() {
    let out = ok(&["verify", "--qubits", "16", "--cycles", "10"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 18);
    assert!(lines[0].starts_with("bitstring"));
    let last = lines.last().unwrap();
    let err: f64 = last.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(err <= 1e-5, "{last}");
}

#[test]
fn amplitude_with_stored_plan_matches_fresh_order() {
    let dir = TempDir::new().unwrap();
    let circuit = write_circuit(&dir, "grid3x3", "8", "3");
    let plan = path(&dir, "plan.txt");
    ok(&[
        "order",
        "--circuit",
        &circuit,
        "--open",
        "7,8",
        "--maxsize",
        "6",
        "--plan-out",
        &plan,
    ]);
    let fixed = [
        "amplitude",
        "--circuit",
        &circuit,
        "--open",
        "7,8",
        "--fixed",
        "0110100",
    ];
    let with_plan = ok(&[&fixed[..], &["--plan", &plan]].concat());
    let fresh = ok(&fixed);
    let parse = |s: &str| -> Vec<(String, f64, f64)> {
        s.lines()
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                (
                    v["bitstring"].as_str().unwrap().to_string(),
                    v["re"].as_f64().unwrap(),
                    v["im"].as_f64().unwrap(),
                )
            })
            .collect()
    };
    let (a, b) = (parse(&with_plan), parse(&fresh));
    assert_eq!(a.len(), 4);
    assert_eq!(a[1].0, "011010001");
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() < 1e-6 && (x.2 - y.2).abs() < 1e-6);
    }
    // bitstring-file mode reports the same values
    let bits = path(&dir, "bits.txt");
    std::fs::write(&bits, "011010001\n011010011\n").unwrap();
    let by_file = parse(&ok(&[
        "amplitude",
        "--circuit",
        &circuit,
        "--bitstrings",
        &bits,
    ]));
    assert_eq!(by_file[0].0, a[1].0);
    assert!((by_file[0].1 - a[1].1).abs() < 1e-6);
    assert!((by_file[1].1 - a[3].1).abs() < 1e-6);
}

#[test]
fn sample_then_xeb() {
    let dir = TempDir::new().unwrap();
    let circuit = write_circuit(&dir, "grid3x3", "10", "5");
    let bits = path(&dir, "bits.txt");
    let stats = path(&dir, "stats.json");
    ok(&[
        "sample",
        "--circuit",
        &circuit,
        "--count",
        "3000",
        "--seed",
        "2",
        "-o",
        &bits,
        "--stats-out",
        &stats,
    ]);
    let text = std::fs::read_to_string(&bits).unwrap();
    assert_eq!(text.lines().count(), 3000);
    assert!(text.lines().all(|l| l.len() == 9));
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(s["accepted"], 3000);

    let hist = path(&dir, "hist.csv");
    let report = ok(&[
        "xeb",
        "--circuit",
        &circuit,
        "--bitstrings",
        &bits,
        "--histogram-out",
        &hist,
    ]);
    let r: serde_json::Value = serde_json::from_str(report.trim()).unwrap();
    assert_eq!(r["n_samples"], 3000);
    assert!(r["fidelity"].as_f64().unwrap() > 0.5);
    assert!(r["stderr"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("bin_left,bin_right,count,model_density\n"));
    assert_eq!(csv.lines().count(), 41);

    // diluted to zero fidelity the score drops to noise
    let diluted = path(&dir, "diluted.txt");
    ok(&[
        "sample",
        "--circuit",
        &circuit,
        "--count",
        "3000",
        "--fidelity",
        "0",
        "-o",
        &diluted,
    ]);
    let r: serde_json::Value =
        serde_json::from_str(ok(&["xeb", "--circuit", &circuit, "--bitstrings", &diluted]).trim())
            .unwrap();
    let (f, se) = (
        r["fidelity"].as_f64().unwrap(),
        r["stderr"].as_f64().unwrap(),
    );
    assert!(f.abs() < 4.0 * se, "{f} {se}");
}

#[test]
fn exit_codes_and_error_json() {
    let dir = TempDir::new().unwrap();
    let out = rqc(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");

    let out = rqc(&["generate", "--topology", "moebius", "--cycles", "3"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = path(&dir, "bad.txt");
    std::fs::write(&bad, "qubits two\n").unwrap();
    let out = rqc(&["order", "--circuit", &bad]);
    assert_eq!(out.status.code(), Some(3));
    let v = error_json(&out);
    assert_eq!(v["error"], "format");
    assert_eq!(v["exit_code"], 3);

    let out = rqc(&["verify", "--qubits", "30", "--cycles", "2"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "resource");

    let circuit = write_circuit(&dir, "grid3x3", "6", "1");
    let out = rqc(&[
        "amplitude",
        "--circuit",
        &circuit,
        "--fixed",
        "000000000",
        "--memory-limit",
        "16",
    ]);
    assert_eq!(out.status.code(), Some(4));

    let bits = path(&dir, "bits.txt");
    std::fs::write(&bits, "0101\n01\n").unwrap();
    let out = rqc(&["xeb", "--circuit", &circuit, "--bitstrings", &bits]);
    assert_eq!(out.status.code(), Some(3));

    let out = rqc(&[
        "generate",
        "--topology",
        "grid3x3",
        "--cycles",
        "3",
        "--candidates",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new(&path(&dir, "never")).exists());
}

#[test]
fn workers_do_not_change_output() {
    let dir = TempDir::new().unwrap();
    let circuit = write_circuit(&dir, "grid4x3", "8", "9");
    let base = [
        "amplitude",
        "--circuit",
        &circuit,
        "--open",
        "10,11",
        "--fixed",
        "0101010101",
        "--maxsize",
        "6",
    ];
    let one = ok(&[&base[..], &["--workers", "1"]].concat());
    let three = ok(&[&base[..], &["--workers", "3"]].concat());
    assert_eq!(one, three);
}
