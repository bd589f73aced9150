use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rangenull::io::{load_png, read_raw, save_png, write_raw};
use rangenull::pooling::{pool_down, pool_up};
use rangenull::rng::SeededRng;
use rangenull::tensor::{ImageTensor, Shape};
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rangenull"));
    cmd.env_remove("RANGENULL_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        Work {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }
}

fn random_png(path: &Path, shape: Shape, seed: u64) -> ImageTensor {
    let t = SeededRng::new(seed).uniform_tensor(shape, 0.0, 1.0);
    save_png(&t, path).unwrap();
    load_png(path).unwrap()
}

#[test]
fn degrade_dimensions_and_errors() {
    let w = Work::new();
    random_png(&w.path("in.png"), Shape::new(3, 256, 256), 1);
    let out = run(&[
        "degrade",
        "--input",
        &w.s("in.png"),
        "--output",
        &w.s("lr.png"),
        "--scale",
        "8",
        "--filter",
        "box",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        load_png(w.path("lr.png")).unwrap().shape(),
        Shape::new(3, 32, 32)
    );

    let bad = run(&[
        "degrade",
        "--input",
        &w.s("in.png"),
        "--output",
        &w.s("x.png"),
        "--scale",
        "3",
    ]);
    assert_eq!(bad.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("not divisible"));
}

#[test]
fn degrade_unit_scale_is_quantize() {
    let w = Work::new();
    let t = SeededRng::new(2).uniform_tensor(Shape::new(1, 16, 16), 0.0, 1.0);
    write_raw(&t, w.path("in.pdt")).unwrap();
    save_png(&t, w.path("in.png")).unwrap();
    for filter in ["box", "bilinear", "bicubic"] {
        let out = run(&[
            "degrade",
            "--input",
            &w.s("in.png"),
            "--output",
            &w.s("o.png"),
            "--scale",
            "1",
            "--filter",
            filter,
        ]);
        assert!(out.status.success());
        assert_eq!(load_png(w.path("o.png")).unwrap(), t.quantize());
    }
    // PDT1 in, PDT1 out
    let out = run(&[
        "degrade",
        "--input",
        &w.s("in.pdt"),
        "--output",
        &w.s("o.pdt"),
        "--scale",
        "2",
        "--filter",
        "bicubic",
        "--antialias",
    ]);
    assert!(out.status.success());
    assert_eq!(
        read_raw(w.path("o.pdt")).unwrap().shape(),
        Shape::new(1, 8, 8)
    );
}

#[test]
fn pd_reports_exact_consistency() {
    let w = Work::new();
    let lr = SeededRng::new(3).uniform_tensor(Shape::new(3, 32, 32), 0.0, 1.0);
    write_raw(&lr, w.path("lr.pdt")).unwrap();
    for predictor in ["nearest", "bilinear", "bicubic"] {
        let out = run(&[
            "pd",
            "--lr",
            &w.s("lr.pdt"),
            "--output",
            &w.s("sr.pdt"),
            "--scale",
            "8",
            "--predictor",
            predictor,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report = &json_lines(&out)[0];
        assert!(report["max_abs"].as_f64().unwrap() <= 1e-12);
        assert_eq!(
            read_raw(w.path("sr.pdt")).unwrap().shape(),
            Shape::new(3, 256, 256)
        );
    }
}

#[test]
fn pd_with_consistent_raw_keeps_it() {
    let w = Work::new();
    let raw = SeededRng::new(4).uniform_tensor(Shape::new(1, 16, 16), 0.0, 1.0);
    write_raw(&raw, w.path("raw.pdt")).unwrap();
    write_raw(&pool_down(&raw, 4).unwrap(), w.path("lr.pdt")).unwrap();
    let out = run(&[
        "pd",
        "--lr",
        &w.s("lr.pdt"),
        "--raw",
        &w.s("raw.pdt"),
        "--output",
        &w.s("sr.pdt"),
        "--scale",
        "4",
    ]);
    assert!(out.status.success());
    let sr = read_raw(w.path("sr.pdt")).unwrap();
    assert!(sr.max_abs_diff(&raw).unwrap() <= 1e-12);

    let wrong = run(&[
        "pd",
        "--lr",
        &w.s("lr.pdt"),
        "--raw",
        &w.s("raw.pdt"),
        "--output",
        &w.s("x.pdt"),
        "--scale",
        "2",
    ]);
    assert_eq!(wrong.status.code(), Some(3));
}

#[test]
fn verify_exact_vs_quantized() {
    let w = Work::new();
    let lr = SeededRng::new(5).uniform_tensor(Shape::new(3, 8, 8), 0.0, 1.0);
    write_raw(&lr, w.path("lr.pdt")).unwrap();
    let out = run(&[
        "pd",
        "--lr",
        &w.s("lr.pdt"),
        "--output",
        &w.s("sr.pdt"),
        "--png",
        &w.s("sr.png"),
        "--scale",
        "4",
        "--predictor",
        "bicubic",
    ]);
    assert!(out.status.success());
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 2);
    assert!(lines[1]["quantized"]["psnr"].as_f64().unwrap() < 240.0);

    let exact = json_lines(&run(&[
        "verify",
        "--lr",
        &w.s("lr.pdt"),
        "--sr",
        &w.s("sr.pdt"),
        "--scale",
        "4",
    ]));
    assert!(exact[0]["psnr"].as_f64().unwrap() >= 240.0);

    let png = json_lines(&run(&[
        "verify",
        "--lr",
        &w.s("lr.pdt"),
        "--sr",
        &w.s("sr.png"),
        "--scale",
        "4",
    ]));
    let png_psnr = png[0]["psnr"].as_f64().unwrap();
    assert!(png_psnr.is_finite() && png_psnr < exact[0]["psnr"].as_f64().unwrap());

    let q = json_lines(&run(&[
        "verify",
        "--lr",
        &w.s("lr.pdt"),
        "--sr",
        &w.s("sr.pdt"),
        "--scale",
        "4",
        "--quantize",
    ]));
    assert_eq!(q[0]["psnr"], png[0]["psnr"]);

    write_raw(&pool_up(&lr, 4).unwrap(), w.path("up.pdt")).unwrap();
    let capped = json_lines(&run(&[
        "verify",
        "--lr",
        &w.s("lr.pdt"),
        "--sr",
        &w.s("up.pdt"),
        "--scale",
        "4",
    ]));
    assert_eq!(capped[0]["psnr"].as_f64().unwrap(), 300.0);
}

#[test]
fn errmap_zero_and_gain_monotone() {
    let w = Work::new();
    let gt = random_png(&w.path("gt.png"), Shape::new(3, 12, 12), 6);
    let sr = random_png(&w.path("sr.png"), Shape::new(3, 12, 12), 7);
    assert_ne!(gt, sr);
    let out = run(&[
        "errmap",
        "--gt",
        &w.s("gt.png"),
        "--sr",
        &w.s("gt.png"),
        "--output",
        &w.s("zero.png"),
    ]);
    assert!(out.status.success());
    assert_eq!(load_png(w.path("zero.png")).unwrap().max_abs(), 0.0);

    run(&[
        "errmap",
        "--gt",
        &w.s("gt.png"),
        "--sr",
        &w.s("sr.png"),
        "--output",
        &w.s("g5.png"),
    ]);
    run(&[
        "errmap",
        "--gt",
        &w.s("gt.png"),
        "--sr",
        &w.s("sr.png"),
        "--output",
        &w.s("g10.png"),
        "--gain",
        "10",
    ]);
    let (g5, g10) = (
        load_png(w.path("g5.png")).unwrap(),
        load_png(w.path("g10.png")).unwrap(),
    );
    assert!(g5.data().iter().zip(g10.data()).all(|(a, b)| a <= b));
    assert!(g5 != g10);
}

#[test]
fn table1_reproducible_and_validated() {
    let args = [
        "table1",
        "--count",
        "5",
        "--size",
        "64",
        "--scale",
        "8",
        "--seed",
        "11",
        "--no-timing",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = &json_lines(&a)[0];
    assert!(v["mean_psnr"].as_f64().unwrap() >= 240.0);
    assert!(v.get("mean_ms").is_none());

    let mut par = args.to_vec();
    par.push("--parallel");
    assert_eq!(run(&par).stdout, a.stdout);

    assert_eq!(run(&["table1", "--count", "0"]).status.code(), Some(3));
}

#[test]
fn seed_from_environment() {
    let base = [
        "table1",
        "--count",
        "2",
        "--size",
        "16",
        "--scale",
        "4",
        "--no-timing",
    ];
    let from_env = bin()
        .args(base)
        .env("RANGENULL_SEED", "9")
        .output()
        .unwrap();
    let mut explicit = base.to_vec();
    explicit.extend(["--seed", "9"]);
    let explicit = run(&explicit);
    assert_eq!(from_env.stdout, explicit.stdout);
    assert_eq!(json_lines(&from_env)[0]["seed"], 9);
    assert_eq!(json_lines(&run(&base))[0]["seed"], 0);
}

#[test]
fn bench_emits_result() {
    let out = run(&["bench", "--size", "64", "--scale", "8", "--iterations", "1"]);
    assert!(out.status.success());
    let v = &json_lines(&out)[0];
    assert_eq!(v["op_name"], "pd");
    assert_eq!(v["iterations"], 1);
    assert_eq!(v["p50_ms"], v["p95_ms"]);
    assert_eq!(v["p50_ms"], v["mean_ms"]);
    assert_eq!(
        run(&["bench", "--iterations", "0", "--size", "64"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["pd", "--scale", "two"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn colorize_commands() {
    let w = Work::new();
    let mut rng = SeededRng::new(12);
    let gray = rng.uniform_tensor(Shape::new(1, 6, 6), 0.0, 1.0);
    let raw = rng.uniform_tensor(Shape::new(3, 6, 6), 0.0, 1.0);
    write_raw(&gray, w.path("g.pdt")).unwrap();
    write_raw(&raw, w.path("raw.pdt")).unwrap();

    let out = run(&[
        "colorize",
        "pd",
        "--gray",
        &w.s("g.pdt"),
        "--raw",
        &w.s("raw.pdt"),
        "--output",
        &w.s("c.pdt"),
    ]);
    assert!(out.status.success());
    assert!(json_lines(&out)[0]["max_abs"].as_f64().unwrap() <= 1e-12);

    let listing = run(&[
        "colorize",
        "pd",
        "--gray",
        &w.s("g.pdt"),
        "--raw",
        &w.s("raw.pdt"),
        "--output",
        &w.s("l.pdt"),
        "--listing",
    ]);
    assert!(json_lines(&listing)[0]["max_abs"].as_f64().unwrap() > 1e-3);

    assert!(run(&[
        "colorize",
        "color",
        "--input",
        &w.s("g.pdt"),
        "--output",
        &w.s("gc.pdt")
    ])
    .status
    .success());
    assert!(run(&[
        "colorize",
        "gray",
        "--input",
        &w.s("gc.pdt"),
        "--output",
        &w.s("gg.pdt")
    ])
    .status
    .success());
    assert!(
        read_raw(w.path("gg.pdt"))
            .unwrap()
            .max_abs_diff(&gray)
            .unwrap()
            <= 1e-15
    );

    let bad = run(&[
        "colorize",
        "gray",
        "--input",
        &w.s("g.pdt"),
        "--output",
        &w.s("x.pdt"),
    ]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn cs_commands() {
    let w = Work::new();
    let out = run(&[
        "cs",
        "build",
        "--block",
        "4",
        "--ratio",
        "0.25",
        "--seed",
        "3",
        "--output",
        &w.s("op.pdm"),
    ]);
    assert!(out.status.success());
    let info = &json_lines(&out)[0];
    assert_eq!(info["q"], 4);
    assert!(info["orthonormality_error"].as_f64().unwrap() <= 1e-8);

    let mut rng = SeededRng::new(13);
    let x = rng.uniform_tensor(Shape::new(3, 8, 8), 0.0, 1.0);
    let raw = rng.uniform_tensor(Shape::new(3, 8, 8), 0.0, 1.0);
    write_raw(&x, w.path("x.pdt")).unwrap();
    write_raw(&raw, w.path("raw.pdt")).unwrap();
    assert!(run(&[
        "cs",
        "measure",
        "--op",
        &w.s("op.pdm"),
        "--input",
        &w.s("x.pdt"),
        "--output",
        &w.s("m.pdt")
    ])
    .status
    .success());
    assert_eq!(
        read_raw(w.path("m.pdt")).unwrap().shape(),
        Shape::new(12, 2, 2)
    );
    assert!(run(&[
        "cs",
        "pinv",
        "--op",
        &w.s("op.pdm"),
        "--input",
        &w.s("m.pdt"),
        "--output",
        &w.s("bp.pdt")
    ])
    .status
    .success());
    assert_eq!(
        read_raw(w.path("bp.pdt")).unwrap().shape(),
        Shape::new(3, 8, 8)
    );

    let pd = run(&[
        "cs",
        "pd",
        "--op",
        &w.s("op.pdm"),
        "--measurements",
        &w.s("m.pdt"),
        "--raw",
        &w.s("raw.pdt"),
        "--output",
        &w.s("rec.pdt"),
    ]);
    assert!(pd.status.success());
    assert!(json_lines(&pd)[0]["max_abs"].as_f64().unwrap() <= 1e-10);

    assert_eq!(
        run(&["cs", "build", "--ratio", "1.5", "--output", &w.s("bad.pdm")])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&[
            "cs",
            "measure",
            "--op",
            &w.s("x.pdt"),
            "--input",
            &w.s("x.pdt"),
            "--output",
            &w.s("o.pdt")
        ])
        .status
        .code(),
        Some(3)
    );
}
