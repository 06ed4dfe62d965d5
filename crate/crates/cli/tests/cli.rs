//! Command-line behaviour: pipeline handoffs between subcommands, exit
//! codes, and the config-file precedence rule.

use std::process::Command;

use approx::assert_abs_diff_eq;

use rkhs_meta::io::{load_model, read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv};
use rkhs_meta::{generate_dataset, GFunctionSpec};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rkhs-meta")
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(n: usize, d: usize, seed: u64) -> Self {
        let spec = GFunctionSpec::canonical(d, seed).expect("spec");
        let train = generate_dataset(&spec, n, 0).expect("train");
        let test = generate_dataset(&spec, n, 1).expect("test");
        let dir = tempfile::tempdir().expect("tempdir");
        write_matrix_csv(&dir.path().join("x.csv"), train.x()).unwrap();
        write_vector_csv(&dir.path().join("y.csv"), train.y()).unwrap();
        write_matrix_csv(&dir.path().join("xt.csv"), test.x()).unwrap();
        write_vector_csv(&dir.path().join("yt.csv"), test.y()).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }
}

#[test]
fn pipeline_gram_tune_predict_sobol() {
    let fx = Fixture::new(30, 3, 5);

    // gram cache
    let status = Command::new(bin())
        .args([
            "gram", "--x", &fx.path("x.csv"), "--kernel", "matern", "--dmax", "2", "--out",
            &fx.path("gram.bin"),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // tune reusing the cache
    let status = Command::new(bin())
        .args([
            "tune", "--x", &fx.path("x.csv"), "--y", &fx.path("y.csv"), "--xtest",
            &fx.path("xt.csv"), "--ytest", &fx.path("yt.csv"), "--kernel", "matern", "--dmax",
            "2", "--frc", "4,8", "--gamma", "0.1,0", "--gram", &fx.path("gram.bin"), "--out-dir",
            &fx.path("out"),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // predict at the training points from the saved model
    let status = Command::new(bin())
        .args([
            "predict", "--model", &fx.path("out/best_model.json"), "--xtest", &fx.path("x.csv"),
            "--out", &fx.path("yhat.csv"),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let yhat = read_vector_csv(fx.dir.path().join("yhat.csv").as_path(), false).unwrap();
    let doc = load_model(fx.dir.path().join("out/best_model.json").as_path()).unwrap();
    let (model, _groups, _x) = doc.into_parts().unwrap();
    // prediction at the training points tracks the stored fitted values up
    // to the correction-epsilon gap
    for (a, b) in yhat.iter().zip(model.fitted.iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-4);
    }

    // sobol from the saved model
    let status = Command::new(bin())
        .args([
            "sobol", "--model", &fx.path("out/best_model.json"), "--out", &fx.path("sobol.csv"),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(fx.path("sobol.csv")).unwrap();
    assert!(text.starts_with("group,cardinality,index"));
    assert!(text.contains("variable,total"));
}

#[test]
fn fit_emits_full_grid_path() {
    let fx = Fixture::new(24, 2, 9);
    let status = Command::new(bin())
        .args([
            "fit", "--x", &fx.path("x.csv"), "--y", &fx.path("y.csv"), "--kernel", "brownian",
            "--dmax", "2", "--frc", "4,8,16", "--gamma", "0", "--out", &fx.path("path.json"),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc = rkhs_meta::io::load_path(fx.dir.path().join("path.json").as_path()).unwrap();
    assert_eq!(doc.entries.len(), 3);
    let path = doc.into_fit_path().unwrap();
    assert_eq!(path.mus.len(), 3);
    assert!(path.entries.iter().all(|e| e.gamma == 0.0));
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let fx = Fixture::new(10, 2, 1);

    // missing input file -> io error (3)
    let out = Command::new(bin())
        .args([
            "gram", "--x", &fx.path("missing.csv"), "--kernel", "matern", "--dmax", "1", "--out",
            &fx.path("g.bin"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("machine-readable error record");
    assert_eq!(err["error"], "io");

    // malformed CSV -> parse error (4)
    std::fs::write(fx.dir.path().join("bad.csv"), "0.1,oops\n").unwrap();
    let out = Command::new(bin())
        .args([
            "gram", "--x", &fx.path("bad.csv"), "--kernel", "matern", "--dmax", "1", "--out",
            &fx.path("g.bin"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // invalid dmax -> invalid argument (2)
    let out = Command::new(bin())
        .args([
            "gram", "--x", &fx.path("x.csv"), "--kernel", "matern", "--dmax", "9", "--out",
            &fx.path("g.bin"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // unknown kernel -> invalid argument (2)
    let out = Command::new(bin())
        .args([
            "gram", "--x", &fx.path("x.csv"), "--kernel", "cubic", "--dmax", "1", "--out",
            &fx.path("g.bin"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // truncated model document -> parse error (4)
    std::fs::write(fx.dir.path().join("trunc.json"), "{\"schema_version\": 1").unwrap();
    let out = Command::new(bin())
        .args([
            "sobol", "--model", &fx.path("trunc.json"), "--out", &fx.path("s.csv"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let fx = Fixture::new(20, 2, 3);
    std::fs::write(
        fx.dir.path().join("cfg.toml"),
        "[defaults]\nkernel = \"brownian\"\ndmax = 2\nfrc = [4.0, 8.0]\ngamma = [0.0]\n",
    )
    .unwrap();

    // kernel/dmax/grids all come from the config file
    let status = Command::new(bin())
        .args([
            "--config", &fx.path("cfg.toml"), "fit", "--x", &fx.path("x.csv"), "--y",
            &fx.path("y.csv"), "--out", &fx.path("p1.json"),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc = rkhs_meta::io::load_path(fx.dir.path().join("p1.json").as_path()).unwrap();
    assert_eq!(doc.entries[0].model.kernel, rkhs_meta::KernelKind::Brownian);

    // an explicit flag overrides the file
    let status = Command::new(bin())
        .args([
            "--config", &fx.path("cfg.toml"), "fit", "--x", &fx.path("x.csv"), "--y",
            &fx.path("y.csv"), "--kernel", "linear", "--out", &fx.path("p2.json"),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let doc = rkhs_meta::io::load_path(fx.dir.path().join("p2.json").as_path()).unwrap();
    assert_eq!(doc.entries[0].model.kernel, rkhs_meta::KernelKind::Linear);

    // with no config and no flag the required setting is reported (2)
    let out = Command::new(bin())
        .args(["fit", "--x", &fx.path("x.csv"), "--y", &fx.path("y.csv"), "--out", &fx.path("p3.json")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn qmax_not_found_is_reported_not_fatal() {
    let fx = Fixture::new(16, 2, 21);
    // qmax larger than vMax can never be reached
    let out = Command::new(bin())
        .args([
            "qmax", "--x", &fx.path("x.csv"), "--y", &fx.path("y.csv"), "--kernel", "matern",
            "--dmax", "1", "--gamma", "0.1,0", "--qmax", "50", "--rat", "20", "--num", "3",
            "--out-dir", &fx.path("q"),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fx.path("q/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["found"], false);
    let probes = std::fs::read_to_string(fx.path("q/probes.csv")).unwrap();
    assert_eq!(probes.lines().count(), 4); // header + num probes
}

#[test]
fn gram_cache_reuse_gives_identical_results() {
    let fx = Fixture::new(25, 2, 33);
    let run_fit = |use_cache: bool, out: &str| {
        let mut args = vec![
            "fit".to_string(), "--x".into(), fx.path("x.csv"), "--y".into(), fx.path("y.csv"),
            "--kernel".into(), "gaussian".into(), "--dmax".into(), "2".into(), "--frc".into(),
            "8".into(), "--gamma".into(), "0".into(), "--out".into(), fx.path(out),
        ];
        if use_cache {
            args.push("--gram".into());
            args.push(fx.path("cache.bin"));
        }
        let status = Command::new(bin()).args(&args).status().unwrap();
        assert!(status.success());
    };
    run_fit(true, "a.json"); // computes and writes the cache
    run_fit(true, "b.json"); // loads the cache
    run_fit(false, "c.json"); // no cache at all
    let a = std::fs::read(fx.path("a.json")).unwrap();
    let b = std::fs::read(fx.path("b.json")).unwrap();
    let c = std::fs::read(fx.path("c.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let _ = read_matrix_csv(fx.dir.path().join("x.csv").as_path(), false).unwrap();
}
