//! End-to-end checks of the `progrom` binary: command wiring, file layout,
//! config validation, and the train/chain equivalence contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use progrom::column::{DEFAULT_LATENT_DIM, DEFAULT_PROJECTOR_DIM};
use progrom::io;
use progrom::progressive::{attach_child, InitMode};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_progrom"))
}

fn run_ok(args: &[&str], cwd: &Path) -> Output {
    let out = bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary spawns");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

fn run_err(args: &[&str], cwd: &Path) -> serde_json::Value {
    let out = bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary spawns");
    assert!(
        !out.status.success(),
        "command {:?} unexpectedly succeeded",
        args
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.trim()).unwrap_or_else(|e| {
        panic!("stderr is not one JSON object ({e}): {stderr}");
    })
}

const GEN_TOML: &str = "problem = \"transport_velocity\"\nm_train = 4\nm_test = 2\nseed = 42\n\n[overrides]\nnx = 24\nny = 16\ntau = 0.05\n";

const TRAIN_HYPER: &str =
    "latent_dim = 8\nprojector_dim = 32\n\n[train]\nepochs = 3\nbatch_outer = 16\nbatch_inner = 16\neta_max = 1e-3\n";

fn write_gen_bundle(dir: &Path) -> PathBuf {
    fs::write(dir.join("gen.toml"), GEN_TOML).unwrap();
    run_ok(
        &["generate", "--config", "gen.toml", "--out", "bundle"],
        dir,
    );
    dir.join("bundle")
}

#[test]
fn generate_writes_a_loadable_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = write_gen_bundle(tmp.path());
    let set = io::read_bundle(&bundle).unwrap();
    assert_eq!(set.dof(), 24 * 16);
    assert_eq!(set.train_samples().count(), 4);
    assert_eq!(set.test_samples().count(), 2);
    // The resolved config is itself a valid config for the same command.
    run_ok(
        &[
            "generate",
            "--config",
            "bundle/resolved_config.toml",
            "--out",
            "bundle_again",
        ],
        tmp.path(),
    );
    let a = fs::read(bundle.join("data.bin")).unwrap();
    let b = fs::read(tmp.path().join("bundle_again/data.bin")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_equals_chain_with_no_parents() {
    let tmp = tempfile::tempdir().unwrap();
    write_gen_bundle(tmp.path());
    fs::write(
        tmp.path().join("train.toml"),
        format!("data = \"bundle\"\nseed = 7\n{TRAIN_HYPER}"),
    )
    .unwrap();
    run_ok(&["train", "--config", "train.toml", "--out", "a"], tmp.path());
    run_ok(&["chain", "--config", "train.toml", "--out", "b"], tmp.path());
    let a = fs::read_to_string(tmp.path().join("a/losses.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/losses.csv")).unwrap();
    assert_eq!(a, b, "train and 0-parent chain must produce identical losses");
    assert!(a.starts_with("epoch,train_ae,val_ae,train_bt,val_bt\n"));
    assert_eq!(a.lines().count(), 4, "header plus one row per epoch");

    // Bitwise-identical checkpoints too, not just loss curves.
    let wa = fs::read(tmp.path().join("a/checkpoint/columns/0/weights.bin")).unwrap();
    let wb = fs::read(tmp.path().join("b/checkpoint/columns/0/weights.bin")).unwrap();
    assert_eq!(wa, wb);
}

#[test]
fn train_rejects_configs_that_list_parents() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("train.toml"),
        "data = \"bundle\"\nparents = [\"p\"]\nseed = 7\n",
    )
    .unwrap();
    let err = run_err(&["train", "--config", "train.toml", "--out", "x"], tmp.path());
    assert_eq!(err["error"], "cli");
    assert!(err["message"].as_str().unwrap().contains("chain"));
}

#[test]
fn seed_flag_overrides_config_and_lands_in_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    write_gen_bundle(tmp.path());
    fs::write(
        tmp.path().join("train.toml"),
        format!("data = \"bundle\"\nseed = 7\n{TRAIN_HYPER}"),
    )
    .unwrap();
    run_ok(
        &[
            "train", "--config", "train.toml", "--out", "s9", "--seed", "9",
        ],
        tmp.path(),
    );
    let resolved = fs::read_to_string(tmp.path().join("s9/resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 9"), "resolved: {resolved}");

    // Same seed through the config file gives the same artifacts.
    fs::write(
        tmp.path().join("train9.toml"),
        format!("data = \"bundle\"\nseed = 9\n{TRAIN_HYPER}"),
    )
    .unwrap();
    run_ok(&["train", "--config", "train9.toml", "--out", "c9"], tmp.path());
    let a = fs::read_to_string(tmp.path().join("s9/losses.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("c9/losses.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_config_keys_fail_with_json_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "problem = \"transport_velocity\"\nm_train = 2\nseed = 1\nmtest = 9\n").unwrap();
    let err = run_err(&["generate", "--config", "bad.toml", "--out", "x"], tmp.path());
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("mtest"), "message should name the bad key: {msg}");
}

#[test]
fn eval_writes_report_and_per_mu_table() {
    let tmp = tempfile::tempdir().unwrap();
    write_gen_bundle(tmp.path());
    fs::write(
        tmp.path().join("train.toml"),
        format!("data = \"bundle\"\nseed = 7\n{TRAIN_HYPER}"),
    )
    .unwrap();
    run_ok(&["train", "--config", "train.toml", "--out", "m"], tmp.path());
    fs::write(
        tmp.path().join("eval.toml"),
        "data = \"bundle\"\ncheckpoint = \"m/checkpoint\"\n",
    )
    .unwrap();
    run_ok(&["eval", "--config", "eval.toml", "--out", "e"], tmp.path());

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("e/eval.json")).unwrap()).unwrap();
    assert!(report["avg_mae"].as_f64().unwrap().is_finite());
    assert_eq!(report["per_mu_mae"].as_array().unwrap().len(), 2);

    let csv = fs::read_to_string(tmp.path().join("e/eval_per_mu.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("mu_0,mae"));
    assert_eq!(lines.count(), 2, "one row per test sample");
}

#[test]
fn corrupted_checkpoint_is_rejected_with_digest_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_gen_bundle(tmp.path());
    fs::write(
        tmp.path().join("train.toml"),
        format!("data = \"bundle\"\nseed = 7\n{TRAIN_HYPER}"),
    )
    .unwrap();
    run_ok(&["train", "--config", "train.toml", "--out", "m"], tmp.path());

    let weights = tmp.path().join("m/checkpoint/columns/0/weights.bin");
    let mut bytes = fs::read(&weights).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&weights, bytes).unwrap();

    let err = run_err(&["inspect", "--ckpt", "m/checkpoint"], tmp.path());
    assert_eq!(err["error"], "digest_mismatch");
}

#[test]
fn sweep_demo_emits_nine_rows() {
    let tmp = tempfile::tempdir().unwrap();
    write_gen_bundle(tmp.path());

    // Two tiny parents so the parent sets {0, 1, 2} all resolve.
    for (seed, out) in [(11, "p1"), (12, "p2")] {
        fs::write(
            tmp.path().join(format!("{out}.toml")),
            format!("data = \"bundle\"\nseed = {seed}\n{TRAIN_HYPER}"),
        )
        .unwrap();
        run_ok(
            &["train", "--config", &format!("{out}.toml"), "--out", out],
            tmp.path(),
        );
    }

    fs::write(
        tmp.path().join("sweep.toml"),
        "problem = \"transport_velocity\"\n\
         m_values = [3]\n\
         m_test = 2\n\
         data_seed = 5\n\
         parent_sets = [[], [\"p1/checkpoint\"], [\"p1/checkpoint\", \"p2/checkpoint\"]]\n\
         seeds = [1, 2, 3]\n\
         latent_dim = 8\n\
         projector_dim = 32\n\n\
         [overrides]\nnx = 24\nny = 16\ntau = 0.05\n\n\
         [train]\nepochs = 2\nbatch_outer = 16\nbatch_inner = 16\neta_max = 1e-3\n",
    )
    .unwrap();
    run_ok(&["sweep", "--config", "sweep.toml", "--out", "sw"], tmp.path());

    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "parents,m,seed,avg_mae,std_mae,wall_s");
    assert_eq!(lines.len(), 1 + 9, "3 parent sets x 1 m x 3 seeds");
    let parents: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(parents, ["0", "0", "0", "1", "1", "1", "2", "2", "2"]);
}

#[test]
fn inspect_reports_reference_encoder_count() {
    // Architecture 1503 -> five halvings -> 16 carries 1,504,376 encoder
    // parameters; pin the published number end to end through a stored
    // checkpoint.
    let tmp = tempfile::tempdir().unwrap();
    let stack = attach_child(
        Vec::new(),
        1503,
        DEFAULT_LATENT_DIM,
        DEFAULT_PROJECTOR_DIM,
        0,
        InitMode::Scratch,
    )
    .unwrap();
    io::write_stack(&tmp.path().join("ckpt"), &stack, None).unwrap();

    let out = run_ok(&["inspect", "--ckpt", "ckpt"], tmp.path());
    let counts: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("inspect prints JSON");
    assert_eq!(counts["columns"][0]["encoder"], 1_504_376);
    assert_eq!(counts["columns"][0]["decoder"], 1_505_863);
    assert_eq!(counts["gates"]["total"], 0);
}
