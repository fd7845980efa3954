use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use redact_core::cli::{corpus_summary, RunConfig};
use redact_core::data::load_corpus;
use redact_core::evaluation::{evaluate_corpus, parse_kv, to_kv};
use redact_core::inference::DeidOptions;
use redact_core::model::{Checkpoint, ModelConfig};
use redact_core::text::Vocabulary;

fn redact(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_redact"));
    c.args(args).env_remove("REDACT_SEED");
    if let Some(s) = seed_env {
        c.env("REDACT_SEED", s);
    }
    c.output().expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "
seed = 1

[synth]
n_documents = 12
sentences_per_doc = [1, 3]
";

#[test]
fn example_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for f in ["example.toml", "desk.toml"] {
        let cfg = RunConfig::load(&root.join(f)).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
    let ex = RunConfig::load(&root.join("example.toml")).unwrap();
    assert_eq!(ex.model, ModelConfig::default());
    assert_eq!(ex.seed, Some(7));
}

#[test]
fn gen_is_deterministic_and_recounted_by_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let report = ok(&redact(&["gen", "--config", s(&cfg), "--out", s(&a)], None));
    ok(&redact(&["gen", "--config", s(&cfg), "--out", s(&b)], None));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(report.starts_with("documents=12 "));
    assert_eq!(ok(&redact(&["inspect", "--corpus", s(&a)], None)), report);
    assert_eq!(corpus_summary(&load_corpus(&a).unwrap()), report);
}

#[test]
fn empty_corpus_generation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[synth]\nn_documents = 0\n").unwrap();
    let out = dir.path().join("c.jsonl");
    let report = ok(&redact(&["gen", "--config", s(&cfg), "--out", s(&out)], None));
    assert_eq!(fs::read(&out).unwrap(), b"");
    assert!(report.starts_with("documents=0 tokens=0 phi_tokens=0 phi_spans=0"));
    assert!(report.lines().skip(1).all(|l| l.ends_with("phi_tokens=0")));
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let gen = |name: &str, flag: Option<&str>, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["gen", "--config", s(&cfg), "--out", s(&out)];
        if let Some(f) = flag {
            args.extend(["--seed", f]);
        }
        ok(&redact(&args, env));
        fs::read(out).unwrap()
    };
    let file1 = gen("f1", None, None);
    let flag1 = gen("g1", Some("1"), None);
    let env2 = gen("e2", None, Some("2"));
    let flag2 = gen("g2", Some("2"), None);
    let flag3_env2 = gen("g3e2", Some("3"), Some("2"));
    let flag3 = gen("g3", Some("3"), None);
    assert_eq!(file1, flag1);
    assert_eq!(env2, flag2);
    assert_ne!(env2, file1);
    assert_eq!(flag3_env2, flag3);
    let bad = redact(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("x"))], Some("seven"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_and_io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[model]\nd_modle = 3\n").unwrap();
    let o = redact(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("c"))], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("d_modle"));

    fs::write(&cfg, "[paths]\ncheckpoint = \"m.ckpt\"\n").unwrap();
    let o = redact(&["train", "--config", s(&cfg)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("paths.corpus"));

    let o = redact(&["gen"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("paths.corpus"));

    let o = redact(&["gen", "--out", s(&dir.path().join("missing/dir/c.jsonl"))], None);
    assert_eq!(o.status.code(), Some(3));

    fs::write(&cfg, "[paths]\ncorpus = \"nope.jsonl\"\ncheckpoint = \"m.ckpt\"\n").unwrap();
    assert_eq!(redact(&["train", "--config", s(&cfg)], None).status.code(), Some(3));
    assert_eq!(
        redact(&["inspect", "--corpus", s(&dir.path().join("nope"))], None).status.code(),
        Some(3)
    );
    assert_eq!(redact(&["train", "--config", s(&dir.path().join("nope.toml"))], None).status.code(), Some(3));
}

/// Eight short documents, a tiny model, validation on the training split.
const TOY: &str = "
seed = 3

[paths]
corpus = \"corpus.jsonl\"
checkpoint = \"model.ckpt\"
metrics_log = \"metrics.log\"

[synth]
n_documents = 8
sentences_per_doc = [1, 2]
phi_density = 0.2

[split]
train_fraction = 1.0
validation_fraction = 0.0

[model]
d_model = 16
n_heads = 2
n_enc_layers = 1
n_dec_layers = 1
d_ff = 32
max_len = 64
dropout_rate = 0.0

[training]
learning_rate = 0.01
batch_size = 8
max_epochs = 150
patience = 25
";

struct Toy {
    _dir: tempfile::TempDir,
    root: PathBuf,
    train_stdout: String,
}

impl Toy {
    fn path(&self, f: &str) -> PathBuf {
        self.root.join(f)
    }
}

fn trained_toy() -> Toy {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    fs::write(root.join("run.toml"), TOY).unwrap();
    let cfg = root.join("run.toml");
    ok(&redact(&["gen", "--config", s(&cfg)], None));
    let train_stdout = ok(&redact(&["train", "--config", s(&cfg)], None));
    Toy {
        _dir: dir,
        root,
        train_stdout,
    }
}

#[test]
fn toy_pipeline_end_to_end() {
    let t = trained_toy();
    assert!(t.train_stdout.contains("validation: precision="));
    let log = fs::read_to_string(t.path("metrics.log")).unwrap();
    assert!(!log.is_empty());

    // same seed, same log
    let again = tempfile::tempdir().unwrap();
    fs::write(again.path().join("run.toml"), TOY).unwrap();
    fs::copy(t.path("corpus.jsonl"), again.path().join("corpus.jsonl")).unwrap();
    ok(&redact(&["train", "--config", s(&again.path().join("run.toml"))], None));
    assert_eq!(fs::read_to_string(again.path().join("metrics.log")).unwrap(), log);
    assert_eq!(fs::read(again.path().join("model.ckpt")).unwrap(), fs::read(t.path("model.ckpt")).unwrap());

    let ck = t.path("model.ckpt");
    let corpus = t.path("corpus.jsonl");

    // memorised corpus: everything recalled, reference row shown
    let kv_ck = t.path("ck.kv");
    let report = ok(&redact(&["eval", "--corpus", s(&corpus), "--checkpoint", s(&ck), "--kv-out", s(&kv_ck)], None));
    assert!(report.contains("Proposed Method [reference (not reproduced)]"));
    assert!(report.contains("98.12") && report.contains("98.91") && report.contains("98.51"));
    let parsed = parse_kv(&fs::read_to_string(&kv_ck).unwrap()).unwrap();
    assert_eq!(parsed.recall(), Some(1.0), "{report}");

    // the dump equals the library evaluation
    let checkpoint = Checkpoint::load(&ck).unwrap();
    let vocab = Vocabulary::load(&t.path("vocab.txt")).unwrap();
    let docs = load_corpus(&corpus).unwrap();
    let lib = evaluate_corpus(&checkpoint.params, &vocab, &docs, &DeidOptions::default()).unwrap();
    assert_eq!(parsed, lib.report);
    assert_eq!(fs::read_to_string(&kv_ck).unwrap(), to_kv(&lib.report));

    // deid then eval of its sidecar reproduces the numbers exactly
    let (out, spans, kv_side) = (t.path("out.txt"), t.path("spans.tsv"), t.path("side.kv"));
    let summary = ok(&redact(
        &["deid", "--checkpoint", s(&ck), "--in", s(&corpus), "--out", s(&out), "--spans-out", s(&spans)],
        None,
    ));
    assert!(summary.contains("alphabet_violations=0"));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), docs.len());
    ok(&redact(&["eval", "--corpus", s(&corpus), "--predictions", s(&spans), "--kv-out", s(&kv_side)], None));
    assert_eq!(fs::read_to_string(&kv_side).unwrap(), fs::read_to_string(&kv_ck).unwrap());

    // plain-text input, and an empty file
    let plain = t.path("plain.txt");
    fs::write(&plain, format!("{}\n{}\n", docs[0].text, docs[1].text)).unwrap();
    let plain_out = t.path("plain.out");
    ok(&redact(&["deid", "--checkpoint", s(&ck), "--in", s(&plain), "--out", s(&plain_out)], None));
    let redacted: Vec<String> = fs::read_to_string(&plain_out).unwrap().lines().map(String::from).collect();
    let from_corpus: Vec<String> = fs::read_to_string(&out).unwrap().lines().take(2).map(String::from).collect();
    assert_eq!(redacted, from_corpus);
    let empty = t.path("empty.txt");
    fs::write(&empty, "").unwrap();
    let empty_out = t.path("empty.out");
    ok(&redact(&["deid", "--checkpoint", s(&ck), "--in", s(&empty), "--out", s(&empty_out)], None));
    assert_eq!(fs::read(&empty_out).unwrap(), b"");

    // inputs are not mutated
    assert_eq!(load_corpus(&corpus).unwrap(), docs);

    // inspect reports count_params of the stored config
    let info = ok(&redact(&["inspect", "--checkpoint", s(&ck)], None));
    let n = checkpoint.params.config().count_params();
    assert!(info.contains(&format!("parameters={n}\n")), "{info}");
    assert!(info.contains(&format!("vocab_hash={}", vocab.content_hash())));

    // vocabulary mismatch
    let other = t.path("other_vocab.txt");
    Vocabulary::from_texts(["some other words"], 1, vocab.scheme()).unwrap().save(&other).unwrap();
    let o = redact(
        &["deid", "--checkpoint", s(&ck), "--vocab", s(&other), "--in", s(&plain), "--out", s(&plain_out)],
        None,
    );
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));

    // truncated checkpoint
    let bytes = fs::read(&ck).unwrap();
    let cut = t.path("cut.ckpt");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let o = redact(&["inspect", "--checkpoint", s(&cut)], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).to_lowercase().contains("corrupt"), "{}", stderr(&o));
}
