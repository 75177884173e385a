use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

fn vlmbench() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vlmbench"));
    cmd.env_remove("VLM_HARNESS_BACKEND_URL").env_remove("RUST_LOG");
    cmd
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, backend_url: &str, extra_tasks: &str) -> std::path::PathBuf {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    let cfg = dir.join("bench.cfg");
    std::fs::write(
        &cfg,
        format!(
            "[global]\nimage_dir = {}\noutput_csv = {}\nbackend_url = {backend_url}\nretries = 0\ntimeout = 5\n\
             [task]\ncolumn = vehicles\ntype = numeric\ntask = How many vehicles are visible?\nconsensus = true\nruns = 3\n\
             [task]\ncolumn = sidewalk\ntype = boolean\ntask = Is there a sidewalk?\n{extra_tasks}",
            images.display(),
            dir.join("results.csv").display()
        ),
    )
    .unwrap();
    cfg
}

struct MockProcess {
    child: Child,
    url: String,
}

impl Drop for MockProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn spawn_mock(fixtures: &Path) -> MockProcess {
    let mut child = vlmbench()
        .args(["mock-serve", fixtures.to_str().unwrap(), "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect(&line).to_string();
    MockProcess {
        child,
        url: format!("http://{addr}"),
    }
}

#[test]
fn empty_image_dir_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "http://127.0.0.1:9", "");
    let out = vlmbench().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("0 images scheduled"), "{}", stdout(&out));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(
        csv,
        "image,vehicles,vehicles_consensus,vehicles_agreement,vehicles_runs,vehicles_truncated,sidewalk,sidewalk_truncated\n"
    );
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = vlmbench().args(["run", "does-not-exist.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does-not-exist.cfg"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = vlmbench().args(["run", "x.cfg", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_prints_normalized_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "http://127.0.0.1:9", "");
    let out = vlmbench().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("[global]\n"), "{text}");
    assert!(text.contains("backend_kind = generic"), "{text}");
    assert!(text.contains("runs = 3"), "{text}");

    // The printed form loads back to the same output.
    let again = dir.path().join("again.cfg");
    std::fs::write(&again, &text).unwrap();
    let out2 = vlmbench().arg("validate").arg(&again).output().unwrap();
    assert_eq!(stdout(&out2), text);
}

#[test]
fn validate_rejects_duplicate_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "http://127.0.0.1:9", "[task]\ncolumn = sidewalk\ntype = text\n");
    let out = vlmbench().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sidewalk"), "{}", stderr(&out));
}

#[test]
fn mock_serve_then_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures.txt");
    std::fs::write(
        &fixtures,
        "* | vehicles | * | 2 | 0 | There are 3 vehicles.\n\
         b.jpg | vehicles | 3 | 2 | 0 | 4\n\
         * | sidewalk | * | 1 | 0 | yes\n",
    )
    .unwrap();
    let mock = spawn_mock(&fixtures);
    // The config points nowhere; the environment supplies the live URL.
    let cfg = write_config(dir.path(), "http://127.0.0.1:9", "");
    for name in ["a.jpg", "b.jpg", "c.png"] {
        std::fs::write(dir.path().join("images").join(name), b"\xff\xd8fake").unwrap();
    }

    let out = vlmbench()
        .arg("run")
        .arg(&cfg)
        .env("VLM_HARNESS_BACKEND_URL", &mock.url)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("3 images scheduled"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with('[')).count(), 3, "{text}");
    assert!(text.contains("3 processed"), "{text}");
    assert!(text.contains("0 NA task cells, 0 truncated"), "{text}");

    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "a.jpg,3,3,1.00,3;3;3,0,1,0");
    assert_eq!(lines[2], "b.jpg,3,3,0.67,3;3;4,0,1,0");
    assert_eq!(lines[3], "c.png,3,3,1.00,3;3;3,0,1,0");

    let again = vlmbench()
        .arg("run")
        .arg(&cfg)
        .env("VLM_HARNESS_BACKEND_URL", &mock.url)
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert!(stdout(&again).contains("0 images scheduled"), "{}", stdout(&again));
    assert_eq!(std::fs::read_to_string(dir.path().join("results.csv")).unwrap(), csv);

    // The flag beats the environment variable: an unreachable URL turns a
    // fresh run into NA cells without failing the batch.
    let dead = vlmbench()
        .arg("run")
        .arg(&cfg)
        .args(["--fresh", "--backend-url", "http://127.0.0.1:9"])
        .env("VLM_HARNESS_BACKEND_URL", &mock.url)
        .output()
        .unwrap();
    assert_eq!(dead.status.code(), Some(0), "{}", stderr(&dead));
    assert!(stdout(&dead).contains("6 NA task cells"), "{}", stdout(&dead));
}

#[test]
fn missing_output_dir_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::create_dir(dir.path().join("images")).unwrap();
    std::fs::write(
        &cfg,
        format!(
            "[global]\nimage_dir = {}\noutput_csv = {}\nbackend_url = http://127.0.0.1:9\n[task]\ncolumn = a\ntype = text\n",
            dir.path().join("images").display(),
            dir.path().join("nope/out.csv").display()
        ),
    )
    .unwrap();
    let out = vlmbench().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn write_report_inputs(dir: &Path, results: &str) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
    let r = dir.join("results.csv");
    let t = dir.join("truth.csv");
    let c = dir.join("report.cfg");
    std::fs::write(&r, results).unwrap();
    std::fs::write(&t, "image,vehicles,sidewalk\na.jpg,3,1\nb.jpg,5,0\nc.jpg,0,1\n").unwrap();
    std::fs::write(
        &c,
        "[report]\nmodel = perfect\n[task]\ncolumn = vehicles\nkind = count\nrange = 8\n[task]\ncolumn = sidewalk\nkind = binary\n",
    )
    .unwrap();
    (r, t, c)
}

#[test]
fn report_with_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let (r, t, c) = write_report_inputs(
        dir.path(),
        "image,vehicles,vehicles_truncated,sidewalk,sidewalk_truncated\na.jpg,3,0,1,0\nb.jpg,5,0,0,0\nc.jpg,0,0,1,0\n",
    );
    let out = vlmbench().arg("report").arg(&r).arg(&t).arg(&c).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("overall proximity: 100.0"), "{}", stdout(&out));
    for f in ["metrics.csv", "ranking.csv", "report.txt"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let ranking = std::fs::read_to_string(dir.path().join("ranking.csv")).unwrap();
    assert_eq!(ranking, "rank,model,vehicles,sidewalk,mean\n1,perfect,100.0,100.0,100.0\n");
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("model,task,metric,value\n"));
    assert!(metrics.contains("perfect,sidewalk,accuracy,1\n"), "{metrics}");
}

#[test]
fn report_names_unknown_image() {
    let dir = tempfile::tempdir().unwrap();
    let (r, t, c) = write_report_inputs(
        dir.path(),
        "image,vehicles,sidewalk\na.jpg,3,1\nzz_missing.jpg,2,0\n",
    );
    let out = vlmbench().arg("report").arg(&r).arg(&t).arg(&c).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("zz_missing.jpg"), "{}", stderr(&out));
}
