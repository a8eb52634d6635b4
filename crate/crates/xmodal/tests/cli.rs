//! End-to-end checks of the command-line binary: exit codes, dependency
//! ordering, idempotent re-runs, and output conventions.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xmodal"))
}

fn run(root: &Path, args: &[&str]) -> Output {
    bin().arg("--root").arg(root).args(args).output().expect("spawn xmodal")
}

fn assert_exit(out: &Output, code: i32, what: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{what}: expected exit {code}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Small fully prepared workspace (fixture, corpus, tokens, topic model,
/// spectrograms), built once and then treated as read-only.
fn prepared_root() -> &'static Path {
    static ROOT: OnceLock<PathBuf> = OnceLock::new();
    ROOT.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir").keep();
        for args in [
            vec!["make-synthetic", "--tracks", "8", "--clusters", "2", "--seed", "5"],
            vec!["ingest", dir.join("metadata.jsonl").to_str().unwrap()],
            vec!["textprep"],
            vec!["lsi-fit"],
            vec!["dsp-extract"],
        ] {
            let out = run(&dir, &args.iter().map(|s| *s).collect::<Vec<_>>());
            assert_exit(&out, 0, &format!("setup step {args:?}"));
        }
        dir
    })
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["--set", "no.such.key=1", "textprep"], "unknown config key"),
        (vec!["--workers", "0", "textprep"], "zero workers"),
        (vec!["--set", "broken", "textprep"], "--set without '='"),
        (vec!["train"], "train without a seed"),
        (vec!["make-synthetic", "--tracks", "5", "--clusters", "3"], "too few tracks"),
    ];
    for (args, what) in cases {
        let out = run(dir.path(), &args);
        assert_exit(&out, 2, what);
        assert!(stderr(&out).starts_with("error: "), "{what}: stderr {:?}", stderr(&out));
    }
    // clap's own parse failures use the same exit code
    let out = bin().arg("no-such-command").output().unwrap();
    assert_exit(&out, 2, "unknown subcommand");
}

#[test]
fn missing_dependencies_exit_3_and_name_the_stage_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["textprep"], "ingest"),
        (vec!["lsi-fit"], "ingest"),
        (vec!["train", "--seed", "1"], "ingest"),
        (vec!["embed"], "train"),
        (vec!["evaluate"], "ingest"),
        (vec!["report"], "ingest"),
        (vec!["topics"], "lsi-fit"),
    ];
    for (args, hint) in cases {
        let out = run(dir.path(), &args);
        assert_exit(&out, 3, &format!("{args:?} on an empty workspace"));
        let msg = stderr(&out);
        assert!(
            msg.contains("missing dependency") && msg.contains(hint),
            "{args:?}: expected a hint naming `{hint}`, got {msg:?}"
        );
    }
}

#[test]
fn dependency_order_is_reported_stage_by_stage() {
    // a workspace that has a corpus but nothing else: each later stage
    // should name the next missing prerequisite, not a generic failure
    let dir = tempfile::tempdir().unwrap();
    let src = prepared_root();
    let out = run(dir.path(), &["ingest", src.join("metadata.jsonl").to_str().unwrap()]);
    assert_exit(&out, 0, "ingest");
    // audio paths in the corpus are relative to the fixture root
    let audio = format!("paths.audio_dir={}", src.display());

    let out = run(dir.path(), &["lsi-fit"]);
    assert_exit(&out, 3, "lsi-fit without tokens");
    assert!(stderr(&out).contains("textprep"), "lsi-fit hint: {:?}", stderr(&out));

    let out = run(dir.path(), &["--set", &audio, "train", "--seed", "1"]);
    assert_exit(&out, 3, "train without topic model");
    assert!(stderr(&out).contains("lsi-fit"), "train hint: {:?}", stderr(&out));

    let out = run(dir.path(), &["textprep"]);
    assert_exit(&out, 0, "textprep");
    let out = run(dir.path(), &["lsi-fit"]);
    assert_exit(&out, 0, "lsi-fit");

    let out = run(dir.path(), &["--set", &audio, "train", "--seed", "1"]);
    assert_exit(&out, 3, "train without spectrograms");
    assert!(stderr(&out).contains("dsp-extract"), "train hint: {:?}", stderr(&out));
}

#[test]
fn data_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("dup.jsonl");
    fs::write(
        &meta,
        concat!(
            "{\"record_id\":\"a\",\"collection_id\":\"c\",\"title\":\"x\"}\n",
            "{\"record_id\":\"a\",\"collection_id\":\"c\",\"title\":\"y\"}\n"
        ),
    )
    .unwrap();
    let out = run(dir.path(), &["ingest", meta.to_str().unwrap()]);
    assert_exit(&out, 4, "duplicate record ids");

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json}\n").unwrap();
    let out = run(dir.path(), &["ingest", bad.to_str().unwrap()]);
    assert_exit(&out, 4, "malformed jsonl");
    assert!(stderr(&out).contains("line 1"), "line number in {:?}", stderr(&out));

    let out = run(dir.path(), &["ingest", dir.path().join("absent.jsonl").to_str().unwrap()]);
    assert_exit(&out, 4, "missing input file");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let src = prepared_root();
    let meta = src.join("metadata.jsonl");
    for _ in 0..2 {
        let out = run(dir.path(), &["ingest", meta.to_str().unwrap()]);
        assert_exit(&out, 0, "ingest");
    }
    let first = fs::read(dir.path().join("build/corpus.xmc")).unwrap();
    let out = run(dir.path(), &["textprep"]);
    assert_exit(&out, 0, "textprep");
    let tokens1 = fs::read(dir.path().join("build/tokens.txt")).unwrap();
    let out = run(dir.path(), &["textprep"]);
    assert_exit(&out, 0, "textprep again");
    assert_eq!(first, fs::read(dir.path().join("build/corpus.xmc")).unwrap());
    assert_eq!(tokens1, fs::read(dir.path().join("build/tokens.txt")).unwrap());
}

#[test]
fn stage_output_is_line_oriented_key_value() {
    let dir = tempfile::tempdir().unwrap();
    let src = prepared_root();
    let out = run(dir.path(), &["ingest", src.join("metadata.jsonl").to_str().unwrap()]);
    let text = stdout(&out);
    assert!(
        text.starts_with("ingested records=8 collections=2"),
        "ingest stdout: {text:?}"
    );
}

#[test]
fn topics_prints_k_terms_by_descending_magnitude() {
    let out = run(prepared_root(), &["topics", "--topic", "0", "--k", "4"]);
    assert_exit(&out, 0, "topics");
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 4, "expected 4 lines: {lines:?}");
    let mut last = f64::INFINITY;
    for line in &lines {
        let (term, weight) = line.split_once(' ').expect("term<space>weight");
        assert!(!term.is_empty());
        let w: f64 = weight.parse().expect("parseable weight");
        assert!(w.abs() <= last, "weights not sorted by magnitude: {lines:?}");
        last = w.abs();
    }

    let out = run(prepared_root(), &["topics", "--topic", "999"]);
    assert_exit(&out, 2, "out-of-range topic");
}

#[test]
fn evaluate_without_stores_names_the_producing_stages() {
    let dir = tempfile::tempdir().unwrap();
    let src = prepared_root();
    let out = run(dir.path(), &["ingest", src.join("metadata.jsonl").to_str().unwrap()]);
    assert_exit(&out, 0, "ingest");
    fs::write(dir.path().join("terms.txt"), "bronze\n").unwrap();
    let out = run(dir.path(), &["evaluate"]);
    assert_exit(&out, 3, "evaluate without stores");
    let msg = stderr(&out);
    assert!(
        msg.contains("baseline-extract") || msg.contains("embed"),
        "hint should name a store-producing stage: {msg:?}"
    );
}
