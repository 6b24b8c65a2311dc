use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SAMPLE: &str = "L1 L2 L3\nL1 L2 L4 L3\nL2 L1\nL1 L2 L3\nL1 L2\nL4 L2 L3\nL2 L1 L2\nL3 L2\n";
const EPS: &str = "4.242640687119285"; // 3·√2

fn trajsan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajsan"))
        .args(args)
        .env_remove("TRAJSAN_SEED")
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn trajsan")
}

fn ok(args: &[&str]) -> String {
    let out = trajsan(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, body: &str) -> String {
        fs::write(self.path(name), body).unwrap();
        self.s(name)
    }
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn sample_run_is_deterministic() {
    let d = Dir::new();
    let input = d.write("d.txt", SAMPLE);
    for out in ["a.txt", "b.txt"] {
        ok(&["sanitize", "--input", &input, "--output", &d.s(out), "--epsilon", EPS, "--height", "3", "--seed", "11"]);
    }
    assert_eq!(read(d.path("a.txt")), read(d.path("b.txt")));
    let manifest = ok(&["sanitize", "--input", &input, "--output", &d.s("c.txt"), "--epsilon", EPS, "--height", "3", "--seed", "11"]);
    assert!(manifest.contains("records_in: 8"));
    assert!(manifest.contains("budget level 3:"));
    assert!(!manifest.contains("budget level 4:"));
}

#[test]
fn seed_comes_from_environment() {
    let d = Dir::new();
    let input = d.write("d.txt", SAMPLE);
    let run = |out: &str, seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_trajsan"));
        cmd.args(["sanitize", "--input", &input, "--output", &d.s(out), "--epsilon", "1", "--height", "3"])
            .env("RUST_LOG", "error")
            .env_remove("TRAJSAN_SEED");
        if let Some(s) = seed {
            cmd.env("TRAJSAN_SEED", s);
        }
        assert!(cmd.status().unwrap().success());
        read(d.path(out))
    };
    let flag = ok(&["sanitize", "--input", &input, "--output", &d.s("f.txt"), "--epsilon", "1", "--height", "3", "--seed", "5"]);
    assert!(flag.contains("seed: 5"));
    assert_eq!(run("e.txt", Some("5")), read(d.path("f.txt")));
    assert_eq!(run("z.txt", None), run("z0.txt", Some("0")));
}

#[test]
fn variants_share_the_tree() {
    let d = Dir::new();
    let input = d.write("d.txt", SAMPLE);
    let mut differ = false;
    for seed in 0..20 {
        let seed = seed.to_string();
        for v in ["basic", "full"] {
            ok(&[
                "sanitize", "--input", &input, "--output", &d.s(&format!("{v}.txt")), "--epsilon", "2", "--height", "3",
                "--seed", &seed, "--variant", v, "--dump-tree", &d.s(&format!("{v}.tree")),
            ]);
        }
        assert_eq!(read(d.path("basic.tree")), read(d.path("full.tree")));
        differ |= read(d.path("basic.txt")) != read(d.path("full.txt"));
    }
    assert!(differ, "inference never changed a release");
}

#[test]
fn exit_codes() {
    let d = Dir::new();
    let input = d.write("d.txt", SAMPLE);
    let out = d.s("o.txt");
    let code = |args: &[&str]| trajsan(args).status.code();

    assert_eq!(code(&["sanitize", "--input", &d.s("missing.txt"), "--output", &out, "--epsilon", "1"]), Some(1));
    let blank = d.write("blank.txt", "L1\n\nL2\n");
    assert_eq!(code(&["sanitize", "--input", &blank, "--output", &out, "--epsilon", "1"]), Some(1));
    assert_eq!(code(&["sanitize", "--input", &input, "--output", &out, "--epsilon", "0"]), Some(2));
    assert_eq!(code(&["sanitize", "--input", &input, "--output", &out, "--epsilon", "-1"]), Some(2));
    assert_eq!(code(&["sanitize", "--input", &input, "--output", &out, "--epsilon", "1", "--height", "0"]), Some(2));
    assert_eq!(code(&["sanitize", "--input", &input, "--output", &out, "--epsilon", "1", "--variant", "x"]), Some(2));
    assert_eq!(code(&["sanitize", "--input", &input, "--output", &out, "--epsilon", "1", "--threads", "0"]), Some(2));
    let small = d.write("u.txt", "L1\nL2\nL3\n");
    assert_eq!(code(&["sanitize", "--input", &input, "--output", &out, "--epsilon", "1", "--universe", &small]), Some(3));
    assert_eq!(code(&["eval-count", "--raw", &input, "--sanitized", &input, "--height", "3"]), Some(2));
    assert_eq!(code(&["eval-fsp", "--raw", &input, "--sanitized", &input, "--topk", "0"]), Some(2));
}

#[test]
fn eval_count_identity() {
    let d = Dir::new();
    let input = d.write("d.txt", SAMPLE);
    let csv = ok(&["eval-count", "--raw", &input, "--sanitized", &input, "--height", "12", "--queries-per-subset", "200"]);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("subset,max_len,queries,epsilon,height,variant,sanity,avg_relative_error")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], (i + 1).to_string());
        assert_eq!(cols[1], (3 * (i + 1)).to_string());
        assert_eq!(cols[6], "0.008");
        assert_eq!(cols[7].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn eval_count_tags_and_append() {
    let d = Dir::new();
    let input = d.write("d.txt", SAMPLE);
    let report = d.s("r.csv");
    for eps in ["0.5", "1"] {
        ok(&[
            "eval-count", "--raw", &input, "--sanitized", &input, "--height", "4", "--queries-per-subset", "10",
            "--epsilon", eps, "--variant", "basic", "--output", &report, "--append",
        ]);
    }
    let text = read(&report);
    assert_eq!(text.lines().count(), 9);
    assert_eq!(text.matches("subset,").count(), 1);
    assert!(text.lines().nth(1).unwrap().contains(",0.5,4,basic,"));
}

#[test]
fn eval_fsp_identity_and_short() {
    let d = Dir::new();
    let input = d.write("d.txt", SAMPLE);
    let csv = ok(&["eval-fsp", "--raw", &input, "--sanitized", &input, "--topk", "1,5,10,500"]);
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    for row in &rows[..3] {
        assert_eq!(row[4], row[0], "TP = k");
        assert_eq!((row[5].as_str(), row[6].as_str(), row[7].as_str()), ("0", "0", "false"));
    }
    assert_eq!(rows[3][7], "true");
}

#[test]
fn gen_flags_config_and_stats() {
    let d = Dir::new();
    let cfg = d.write(
        "gen.toml",
        "universe_size = 50\nrecords = 2000\navg_len = 4.0\nmax_len = 20\nplanted_routes = 3\nzipf_skew = 0.5\nseed = 9\n",
    );
    let a = ok(&["gen", "--output", &d.s("a.txt"), "--config", &cfg, "--universe-out", &d.s("u.txt")]);
    ok(&["gen", "--output", &d.s("b.txt"), "--config", &cfg]);
    assert_eq!(read(d.path("a.txt")), read(d.path("b.txt")));
    assert_eq!(a.matches("route: ").count(), 3);
    assert_eq!(read(d.path("u.txt")).lines().count(), 50);
    assert_eq!(read(d.path("a.txt")).lines().count(), 2000);

    // flags win over the file
    ok(&["gen", "--output", &d.s("c.txt"), "--config", &cfg, "--records", "10"]);
    assert_eq!(read(d.path("c.txt")).lines().count(), 10);

    let bad = d.write("bad.toml", "records = 10\nspeed = 3\n");
    assert_eq!(trajsan(&["gen", "--output", &d.s("x.txt"), "--config", &bad]).status.code(), Some(1));
    assert_eq!(
        trajsan(&["gen", "--output", &d.s("x.txt"), "--avg-len", "9", "--max-len", "5"]).status.code(),
        Some(2)
    );

    let hist = ok(&["stats", "--input", &d.s("a.txt"), "--universe", &d.s("u.txt")]);
    assert!(hist.starts_with("length,records\n"));
    let total: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 2000);

    let sample = d.write("d.txt", SAMPLE);
    let summary = ok(&["stats", "--input", &sample, "--output", &d.s("h.csv")]);
    assert!(summary.contains("records: 8"));
    assert!(summary.contains("distinct_locations: 4"));
    assert_eq!(read(d.path("h.csv")), "length,records\n2,3\n3,4\n4,1\n");
}

#[test]
fn thread_count_does_not_change_output() {
    let d = Dir::new();
    ok(&[
        "gen", "--output", &d.s("raw.txt"), "--universe-out", &d.s("u.txt"), "--universe-size", "60", "--records",
        "5000", "--seed", "2",
    ]);
    for t in ["1", "8"] {
        ok(&[
            "--threads", t, "sanitize", "--input", &d.s("raw.txt"), "--universe", &d.s("u.txt"), "--output",
            &d.s(&format!("s{t}.txt")), "--epsilon", "1", "--seed", "4",
        ]);
        ok(&[
            "--threads", t, "eval-count", "--raw", &d.s("raw.txt"), "--sanitized", &d.s(&format!("s{t}.txt")),
            "--universe", &d.s("u.txt"), "--height", "12", "--queries-per-subset", "500", "--output",
            &d.s(&format!("c{t}.csv")),
        ]);
    }
    assert_eq!(fs::read(d.path("s1.txt")).unwrap(), fs::read(d.path("s8.txt")).unwrap());
    assert_eq!(fs::read(d.path("c1.csv")).unwrap(), fs::read(d.path("c8.csv")).unwrap());
}
