use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DIALOGUES: &str = r#"{"dialogue_id": "d1", "turns": [{"speaker": "seeker", "text": "hi there"}, {"speaker": "recommender", "text": "what do you like", "behavior": "experience_inquiry"}, {"speaker": "seeker", "text": "sci-fi mostly"}, {"speaker": "recommender", "text": "I loved Arrival", "behavior": "personal_opinion", "is_recommendation": true, "accepted": true}]}
{"dialogue_id": "d2", "turns": [{"speaker": "recommender", "text": "hello, can I help", "behavior": "offer_help"}, {"speaker": "seeker", "text": "a comedy please"}, {"speaker": "recommender", "text": "so you want something funny", "behavior": "rephrase_preference"}, {"speaker": "seeker", "text": "yes"}, {"speaker": "recommender", "text": "try Airplane", "behavior": "credibility", "is_recommendation": true}]}
"#;

const RESPONSES: &str = r#"{"dialogue_id": "d1", "turn_index": 2, "system": "sysA", "text": "what films do you enjoy", "behavior": "experience_inquiry"}
{"dialogue_id": "d1", "turn_index": 4, "system": "sysA", "text": "Arrival is great", "behavior": "credibility"}
{"dialogue_id": "d2", "turn_index": 1, "system": "sysA", "text": "hi how can I help", "behavior": "offer_help"}
{"dialogue_id": "d2", "turn_index": 3, "system": "sysA", "text": "a funny movie then", "behavior": "rephrase_preference"}
{"dialogue_id": "d2", "turn_index": 5, "system": "sysA", "text": "Airplane is a classic", "behavior": "credibility"}
{"dialogue_id": "d1", "turn_index": 2, "system": "sysB", "text": "I like movies", "behavior": "personal_opinion"}
{"dialogue_id": "d1", "turn_index": 4, "system": "sysB", "text": "watch Arrival", "behavior": "credibility"}
{"dialogue_id": "d2", "turn_index": 1, "system": "sysB", "text": "hello", "behavior": "acknowledgment"}
{"dialogue_id": "d2", "turn_index": 3, "system": "sysB", "text": "ok", "behavior": "acknowledgment"}
{"dialogue_id": "d2", "turn_index": 5, "system": "sysB", "text": "Airplane", "behavior": "credibility"}
"#;

const PREFERENCES: &str = r#"{"instance_id": "d1#2", "system_a": "sysA", "system_b": "sysB", "verdict": "a_better"}
{"instance_id": "d1#4", "system_a": "sysA", "system_b": "sysB", "verdict": "same"}
{"instance_id": "d2#3", "system_a": "sysA", "system_b": "sysB", "verdict": "a_better"}
{"instance_id": "d2#5", "system_a": "sysA", "system_b": "sysB", "verdict": "b_better"}
"#;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("d.jsonl"), DIALOGUES).unwrap();
        fs::write(dir.path().join("r.jsonl"), RESPONSES).unwrap();
        fs::write(dir.path().join("p.jsonl"), PREFERENCES).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn corpus(&self) -> Vec<String> {
        vec!["--dialogues".into(), self.arg("d.jsonl"), "--responses".into(), self.arg("r.jsonl")]
    }
}

fn run<S: AsRef<str>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_behalign"))
        .args(args.iter().map(AsRef::as_ref))
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn with(base: Vec<String>, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    v.extend(base);
    v
}

#[test]
fn ba_happy_path() {
    let f = Fixture::new();
    let o = run(&with(f.corpus(), &["ba", "--system", "sysA"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["command"], "ba");
    assert_eq!(v["config"]["system"], "sysA");
    assert_eq!(v["config"]["seed"], 42);
    // Scored turns d1#2, d1#4, d2#3, d2#5; sysA misses only d1#4.
    assert_eq!(v["result"]["aggregate"], 0.75);
    assert_eq!(v["result"]["n_scored"], 4);
    assert_eq!(v["result"]["n_first_turn"], 1);
    let inputs = v["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    for i in inputs {
        let h = i["sha256"].as_str().unwrap();
        assert_eq!(h.len(), 64);
        assert!(h.bytes().all(|b| b.is_ascii_hexdigit()));
    }

    let o = run(&with(f.corpus(), &["ba", "--system", "sysA", "--mode", "paper_literal"]));
    assert_eq!(json(&o)["result"]["aggregate"], 0.6);
}

#[test]
fn input_hash_tracks_content() {
    let f = Fixture::new();
    let args = with(f.corpus(), &["ba", "--system", "sysB"]);
    let before = json(&run(&args))["inputs"][1]["sha256"].clone();
    fs::write(f.path("r.jsonl"), format!("{RESPONSES}\n")).unwrap();
    let after = json(&run(&args))["inputs"][1]["sha256"].clone();
    assert_ne!(before, after);
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["ba", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&run(&["--help"])), 0);
    let o = run(&["--version"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_required_input_is_usage_error() {
    let f = Fixture::new();
    let o = run(&with(f.corpus(), &["ba"]));
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--system"), "{}", stderr(&o));
}

#[test]
fn corrupted_label_reports_line() {
    let f = Fixture::new();
    let bad = DIALOGUES.replacen("\"rephrase_preference\"", "\"rephrase_prefrence\"", 1);
    fs::write(f.path("d.jsonl"), bad).unwrap();
    let o = run(&["validate", "--dialogues", &f.arg("d.jsonl")]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("line 2") && err.contains("rephrase_prefrence"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn validate_cross_checks_preferences() {
    let f = Fixture::new();
    let mut args = with(f.corpus(), &["validate"]);
    args.extend(["--preferences".into(), f.arg("p.jsonl")]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["result"]["instances"], 5);
    assert_eq!(v["result"]["preferences"], 4);

    fs::write(f.path("p.jsonl"), PREFERENCES.replace("d2#5", "d9#5")).unwrap();
    let o = run(&args);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("d9#5"));
}

#[test]
fn config_precedence() {
    let f = Fixture::new();
    fs::write(f.path("c.toml"), "bleu_k = 4\nseed = 9\nsystem = \"sysB\"\n").unwrap();
    let show = |extra: &[&str]| {
        let mut a = vec!["--config".to_string(), f.arg("c.toml"), "--show-config".into()];
        a.extend(extra.iter().map(|s| s.to_string()));
        let o = run(&a);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        stdout(&o)
    };
    let file_only = show(&["textmetrics"]);
    assert!(file_only.contains("bleu_k = 4") && file_only.contains("seed = 9"));
    let set = show(&["--set", "bleu_k=2", "textmetrics"]);
    assert!(set.contains("bleu_k = 2"), "{set}");
    let flag = show(&["--set", "bleu_k=2", "textmetrics", "--bleu-k", "3", "--seed", "5"]);
    assert!(flag.contains("bleu_k = 3") && flag.contains("seed = 5"), "{flag}");

    // The resolved config is a loadable config with the same resolution.
    fs::write(f.path("resolved.toml"), &flag).unwrap();
    let o = run(&["--config", &f.arg("resolved.toml"), "--show-config", "textmetrics"]);
    assert_eq!(stdout(&o), flag);
}

#[test]
fn empty_config_gives_defaults() {
    let f = Fixture::new();
    fs::write(f.path("empty.toml"), "").unwrap();
    let a = run(&["--config", &f.arg("empty.toml"), "--show-config", "stats"]);
    let b = run(&["--show-config", "stats"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("seed = 42"));
}

#[test]
fn bad_config_keys_and_types() {
    let f = Fixture::new();
    fs::write(f.path("c.toml"), "bleu_kay = 4\n").unwrap();
    let o = run(&["--config", &f.arg("c.toml"), "stats"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bleu_kay"), "{}", stderr(&o));

    let o = run(&["--set", "epochs=ten", "--show-config", "stats"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("epochs") && err.contains("usize"), "{err}");
}

#[test]
fn reports_are_byte_deterministic() {
    let f = Fixture::new();
    for format in ["json", "csv", "markdown"] {
        let mut args = with(f.corpus(), &["--format", format, "agreement", "--b", "300"]);
        args.extend(["--preferences".into(), f.arg("p.jsonl")]);
        let a = run(&args);
        assert_eq!(code(&a), 0, "{}", stderr(&a));
        let b = run(&args);
        assert_eq!(a.stdout, b.stdout, "{format}");
    }
}

#[test]
fn out_flag_writes_file() {
    let f = Fixture::new();
    let out = f.path("report.csv");
    let o = run(&with(
        f.corpus(),
        &["--format", "csv", "--out", out.to_str().unwrap(), "ba", "--system", "sysB"],
    ));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# behalign "));
    assert!(text.contains("system,mode,ba,n_scored,n_first_turn\nsysB,scored_turns,0.25,4,1\n"), "{text}");
}

fn write_pairs(path: &Path, n: usize) {
    let mut s = String::new();
    for i in 0..n {
        let (b, label) = if i % 2 == 0 {
            ("have you seen", "same_behavior")
        } else {
            ("I recommend", "different_behavior")
        };
        s.push_str(&format!(
            "{{\"text_a\": \"{b} film {i}\", \"text_b\": \"{b} movie {i}\", \"label\": \"{label}\", \"source\": \"original\"}}\n"
        ));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn training_pipeline_and_divergence() {
    let f = Fixture::new();
    write_pairs(&f.path("pairs.jsonl"), 40);
    let model = f.arg("model.json");
    let base = [
        "--set", "dim_log2=10", "train-pairs", "--pairs", &f.arg("pairs.jsonl"), "--model", &model,
    ];
    let o = run(&base);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["outputs"][0]["role"], "model");
    assert_eq!(v["result"]["training_set_kind"], "original");

    let mut args = with(f.corpus(), &["--set", "dim_log2=10", "implicit-ba", "--system", "sysA"]);
    args.extend(["--model".into(), model.clone()]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["result"]["implicit"]["n_scored"], 4);

    let o = run(&["--set", "dim_log2=10", "cross-validate", "--pairs", &f.arg("pairs.jsonl"), "--folds", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["result"]["folds"].as_array().unwrap().len(), 4);

    let mut diverge = vec!["--set", "learning_rate=1e300"];
    diverge.extend(base);
    let o = run(&diverge);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}
