use std::fs;
use std::path::Path;

use swarmdyn::synth::SynthConfig;
use swarmdyn_cli::{record_path, run, RunRecord};

fn sw(args: &[&str]) -> i32 {
    run(std::iter::once("swarmdyn").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(path: &Path) {
    let cfg = SynthConfig::standard(false);
    fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

#[test]
fn missing_bundle_is_a_usage_error() {
    assert_eq!(sw(&["learn", "--out", "/tmp/never.json"]), 1);
    assert_eq!(sw(&["no-such-command"]), 1);
    assert_eq!(sw(&["--help"]), 0);
}

#[test]
fn malformed_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"frames": 3, "typo": 1}"#).unwrap();
    let out = dir.path().join("b");
    assert_eq!(sw(&["gen", "--config", p(&cfg), "--out", p(&out)]), 1);
    assert_eq!(sw(&["features", "--bundle", p(&dir.path().join("absent")), "--out", p(&out)]), 1);
    assert_eq!(sw(&["gen", "--preset", "same", "--out", p(&out)]), 0);
    assert_eq!(sw(&["features", "--bundle", p(&out), "--bins", "0", "--out", p(&dir.path().join("f.json"))]), 1);
    assert_eq!(sw(&["learn", "--bundle", p(&out), "--eps=-1", "--out", p(&dir.path().join("m.json"))]), 1);
    assert_eq!(sw(&["--threads", "0", "gen", "--preset", "same", "--out", p(&out)]), 1);
}

#[test]
fn gen_learn_residuals_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("synth.json");
    write_config(&cfg);
    let bundle = d.join("s1");
    assert_eq!(sw(&["gen", "--config", p(&cfg), "--out", p(&bundle)]), 0);
    assert!(bundle.join("manifest.json").exists());
    assert!(bundle.join("run.json").exists());

    let feats = d.join("features.json");
    assert_eq!(sw(&["features", "--bundle", p(&bundle), "--bins", "4", "--out", p(&feats)]), 0);
    let nbrs = d.join("nbrs.json");
    assert_eq!(sw(&["neighborhoods", "--bundle", p(&bundle), "--wt", "3", "--out", p(&nbrs)]), 0);

    let learn = |out: &Path| {
        sw(&[
            "--threads", "2", "learn", "--bundle", p(&bundle), "--features", p(&feats), "--wt", "3", "--eps", "1e-3",
            "--kmax", "5", "--jmax", "5", "--constraint", "none", "--init", "prev", "--out", p(out),
        ])
    };
    let m1 = d.join("model.json");
    let m2 = d.join("again.json");
    assert_eq!(learn(&m1), 0);
    assert_eq!(learn(&m2), 0);
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    let diag = fs::read_to_string(d.join("model.diagnostics.csv")).unwrap();
    assert!(diag.starts_with("outer,iteration,objective,delta,sigma_s,sigma_t\n"));
    assert!(diag.lines().count() >= 2);

    let zeta = d.join("zeta.csv");
    let svg = d.join("zeta.svg");
    assert_eq!(sw(&["residuals", "--model", p(&m1), "--features", p(&feats), "--out", p(&zeta), "--svg", p(&svg)]), 0);
    let rows = fs::read_to_string(&zeta).unwrap().lines().count() - 1;
    assert_eq!(rows, 24);
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));

    let dm = d.join("dm.csv");
    assert_eq!(sw(&["distmat", "--model", p(&m1), "--out", p(&dm)]), 0);
    let labels = d.join("labels.csv");
    assert_eq!(sw(&["cluster", "--distances", p(&dm), "--k", "2", "--out", p(&labels)]), 0);
    assert_eq!(fs::read_to_string(&labels).unwrap().lines().count(), 9);
    let mds = d.join("mds.csv");
    let mds_svg = d.join("mds.svg");
    assert_eq!(
        sw(&["mds", "--distances", p(&dm), "--dim", "2", "--out", p(&mds), "--svg", p(&mds_svg), "--labels", p(&labels)]),
        0
    );
    assert!(fs::read_to_string(&mds).unwrap().starts_with("label,x1,x2\n"));

    let hold = d.join("holdout.json");
    assert_eq!(
        sw(&["holdout", "--bundle", p(&bundle), "--features", p(&feats), "--first", "21", "--last", "25", "--kmax", "5", "--out", p(&hold)]),
        0
    );
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(&hold).unwrap()).unwrap();
    assert!(rep["ratio"].as_f64().unwrap().is_finite());

    let train_labels = d.join("train.csv");
    fs::write(&train_labels, "element,label\n0,leaf\n4,square\n").unwrap();
    let pred = d.join("pred.csv");
    assert_eq!(
        sw(&["classify", "--train", p(&m1), "--train-labels", p(&train_labels), "--test", p(&m1), "--out", p(&pred)]),
        0
    );
    let pred = fs::read_to_string(&pred).unwrap();
    assert!(pred.contains("\n0,leaf\n") && pred.contains("\n4,square\n"));
}

#[test]
fn run_record_replays_to_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    assert_eq!(sw(&["gen", "--preset", "opposite", "--seed", "7", "--out", p(&bundle)]), 0);
    let feats = dir.path().join("f.json");
    assert_eq!(sw(&["features", "--bundle", p(&bundle), "--bins", "4", "--out", p(&feats)]), 0);
    let record = record_path(&feats, false);
    let first = fs::read(&feats).unwrap();
    let rec: RunRecord = serde_json::from_slice(&fs::read(&record).unwrap()).unwrap();
    assert_eq!(rec.tool, "swarmdyn");
    let gen: RunRecord = serde_json::from_slice(&fs::read(bundle.join("run.json")).unwrap()).unwrap();
    assert_eq!(gen.seed, Some(7));
    fs::remove_file(&feats).unwrap();
    assert_eq!(sw(&["replay", p(&record)]), 0);
    assert_eq!(fs::read(&feats).unwrap(), first);

    let bad = dir.path().join("bad.run.json");
    fs::write(&bad, r#"{"tool":"swarmdyn","version":"0","core_version":"0","seed":null,"config":{"subcommand":"features","bundle":"b","bins":3,"out":"x","extra":1},"resolved":null}"#).unwrap();
    assert_eq!(sw(&["replay", p(&bad)]), 1);
}

#[test]
fn learning_from_segments_via_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    assert_eq!(sw(&["gen", "--preset", "same", "--out", p(&bundle)]), 0);
    let model = dir.path().join("m.json");
    assert_eq!(
        sw(&["learn", "--bundle", p(&bundle), "--segments", "--bins", "4", "--kmax", "3", "--jmax", "1", "--tau", "0.5", "--lambda", "0.5", "--motion-threshold", "0.5", "--out", p(&model)]),
        0
    );
    let m: swarmdyn::SwarmModel = serde_json::from_slice(&fs::read(&model).unwrap()).unwrap();
    assert_eq!(m.layout.chains().len(), 8);
}
