use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"
seed = 1

[data]
n_source = 12
n_target = 6

[gen]
frames = 16
height = 8
width = 8
jitter_max = 1.5

[train]
epochs = 2
batch_size = 4
target_shots = 2

[train.clip]
segments = 2
clip_len = 4

[eval]
exemplars = 3
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_coreda"))
            .current_dir(self.dir.path())
            .env("RUST_LOG", "warn")
            .args(["--config", "run.toml"])
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn generated(config: &str) -> Self {
        let ws = Self::new(config);
        ws.ok(&["gen"]);
        ws
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tsv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

#[test]
fn default_gen_writes_full_sets_without_target_labels() {
    let ws = Workspace::new("");
    ws.ok(&["gen", "--seed", "5"]);
    let src = json(&ws.path("data/source.manifest.json"));
    let tgt = json(&ws.path("data/target.manifest.json"));
    assert_eq!(src["samples"].as_array().unwrap().len(), 120);
    assert_eq!(tgt["samples"].as_array().unwrap().len(), 60);
    assert!(tgt["samples"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e.get("label").is_none()));
    assert!(src["samples"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e["label"].is_f64()));
    assert_eq!(
        json(&ws.path("data/target.labels.json"))["labels"]
            .as_object()
            .unwrap()
            .len(),
        60
    );

    let first: Vec<Vec<u8>> = ["source.blob", "target.blob", "target.manifest.json"]
        .iter()
        .map(|f| fs::read(ws.path(&format!("data/{f}"))).unwrap())
        .collect();
    ws.ok(&["gen", "--seed", "5"]);
    for (f, before) in ["source.blob", "target.blob", "target.manifest.json"]
        .iter()
        .zip(first)
    {
        assert_eq!(
            fs::read(ws.path(&format!("data/{f}"))).unwrap(),
            before,
            "{f}"
        );
    }
}

#[test]
fn bad_input_exits_with_code_two() {
    let ws = Workspace::new("[train]\nepoch = 3\n");
    let out = ws.run(&["gen"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));

    let ws = Workspace::new(TINY);
    assert_eq!(code(&ws.run(&["train"])), 2, "training without data");
    assert_eq!(
        code(&ws.run(&["eval"])),
        2,
        "evaluating without a checkpoint"
    );
    assert_eq!(code(&ws.run(&["gen", "--profile", "huge"])), 2);
    assert_eq!(code(&ws.run(&["frobnicate"])), 2);
}

#[test]
fn training_writes_checkpoint_and_log() {
    let ws = Workspace::generated(TINY);
    ws.ok(&["train"]);
    assert!(ws.path("runs/coreda/model.ckpt").is_file());
    let log = fs::read_to_string(ws.path("runs/coreda/train_log.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = log
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["mode"], "coreda");
    assert!(lines[0]["target_forward_passes"].as_u64().unwrap() > 0);
    assert_eq!(lines[2]["epoch"], 1);

    ws.ok(&["train", "--no-cons-t", "--out", "runs/no_t"]);
    let header = fs::read_to_string(ws.path("runs/no_t/train_log.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(header.lines().next().unwrap()).unwrap();
    assert_eq!(header["target_forward_passes"], 0);
    assert_eq!(header["config"]["ablation"]["disable_cons_t"], true);
}

#[test]
fn every_ablation_row_runs() {
    let ws = Workspace::generated(TINY);
    let rows: [&[&str]; 7] = [
        &["--mode", "source-only"],
        &[],
        &["--no-sup-rel"],
        &["--no-sup-abs"],
        &["--no-cons-s"],
        &["--no-cons-t"],
        &["--no-stopgrad"],
    ];
    for (i, flags) in rows.iter().enumerate() {
        let out = format!("runs/row{i}");
        let mut args = vec!["train", "--out", out.as_str()];
        args.extend_from_slice(flags);
        ws.ok(&args);
        ws.ok(&["eval", "--run", &out]);
        let report = json(&ws.path(&format!("{out}/eval_target.json")));
        assert_eq!(report["n"], 6);
    }
    ws.ok(&["eval", "--run", "runs/row1", "--no-bg-mix"]);
}

#[test]
fn eval_options_behave() {
    let ws = Workspace::generated(TINY);
    ws.ok(&["train"]);
    let rows = |args: &[&str]| {
        let mut all = vec!["eval"];
        all.extend_from_slice(args);
        ws.ok(&all);
        tsv_rows(&ws.path("runs/coreda/eval_target.tsv"))
    };

    assert_eq!(rows(&["--lambda", "0"]), rows(&["--no-bg-mix"]));
    assert_eq!(rows(&["--workers", "3"]), rows(&[]));

    for m in ["1", "10"] {
        let table = rows(&["--M", m]);
        assert_eq!(table.len(), 6);
        for r in &table {
            let recon: Vec<f64> = r[3..].iter().map(|v| v.parse().unwrap()).collect();
            assert_eq!(recon.len(), m.parse::<usize>().unwrap());
            let mean = recon.iter().sum::<f64>() / recon.len() as f64;
            assert!((mean - r[2].parse::<f64>().unwrap()).abs() < 1e-9);
        }
        let report = json(&ws.path("runs/coreda/eval_target.json"));
        assert!(report["scc"]["value"].as_f64().unwrap().abs() <= 1.0);
    }
    assert_eq!(code(&ws.run(&["eval", "--M", "13"])), 2);

    ws.ok(&["eval", "--split", "source"]);
    assert_eq!(json(&ws.path("runs/coreda/eval_source.json"))["n"], 12);
}

#[test]
fn mismatched_checkpoint_exits_with_code_two() {
    let ws = Workspace::generated(TINY);
    ws.ok(&["train"]);
    fs::write(ws.path("wide.toml"), format!("{TINY}\n[encoder]\nd = 16\n")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_coreda"))
        .current_dir(ws.dir.path())
        .args(["--config", "wide.toml", "eval"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration conflict"));
}

#[test]
fn diverging_training_exits_with_code_three() {
    let ws = Workspace::generated(&TINY.replace(
        "epochs = 2",
        "epochs = 4\nlr_encoder = 1e200\nlr_heads = 1e200",
    ));
    let out = ws.run(&["train"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn semi_supervised_shots_are_left_out_of_evaluation() {
    let ws = Workspace::generated(TINY);
    ws.ok(&["train", "--mode", "semi-sup"]);
    let shots: Vec<String> =
        serde_json::from_value(json(&ws.path("runs/semi-sup/shots.json"))).unwrap();
    assert_eq!(shots.len(), 2);
    ws.ok(&["eval", "--run", "runs/semi-sup"]);
    let ids: Vec<String> = tsv_rows(&ws.path("runs/semi-sup/eval_target.tsv"))
        .into_iter()
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(ids.len(), 4);
    assert!(shots.iter().all(|s| !ids.contains(s)));
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let ws = Workspace::generated(TINY);
    ws.ok(&["train", "--out", "runs/full"]);
    fs::write(
        ws.path("short.toml"),
        TINY.replace("epochs = 2", "epochs = 1"),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_coreda"))
        .current_dir(ws.dir.path())
        .args(["--config", "short.toml", "train", "--out", "runs/split"])
        .output()
        .unwrap();
    assert!(out.status.success());
    ws.ok(&["train", "--out", "runs/split", "--resume"]);
    assert_eq!(
        fs::read(ws.path("runs/full/model.ckpt")).unwrap(),
        fs::read(ws.path("runs/split/model.ckpt")).unwrap()
    );
}

#[test]
fn gradcheck_reports_every_case() {
    let ws = Workspace::new("");
    let report = ws.ok(&["gradcheck", "--json", "gc.json"]);
    for op in ["matmul", "silu", "detach", "train_step"] {
        assert!(
            report
                .lines()
                .any(|l| l.starts_with(op) && l.contains("max rel err")),
            "{op} missing"
        );
    }
    assert!(report.trim_end().ends_with("PASS"));
    assert_eq!(
        json(&ws.path("gc.json"))["cases"].as_array().unwrap().len(),
        20
    );

    let out = ws.run(&["gradcheck", "--corrupt", "matmul"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout)
        .trim_end()
        .ends_with("FAIL"));
}
