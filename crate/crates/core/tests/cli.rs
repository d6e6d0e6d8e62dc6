use std::process::{Command, Output};

fn radcom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radcom")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn compare_prints_one_row_per_method() {
    let o = radcom(&["compare", "--methods", "selfish,noncoop,coop"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], radcom::harness::CSV_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("selfish,none,NaN,0,"));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let args = ["sweep", "--sweep", "C=8:12:4", "--methods", "noncoop,coop", "--seeds", "2"];
    let printed = stdout(&radcom(&args));
    let mut with_out = args.to_vec();
    let p = path.to_str().unwrap();
    with_out.extend(["--out", p]);
    assert!(radcom(&with_out).status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), printed);
    assert_eq!(printed.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(
        &path,
        "scheme = \"SchemeII\"\nmethods = [\"noncoop\", \"partial\", \"full\"]\nseeds = [4, 5]\np = 0.5\n",
    )
    .unwrap();
    let o = radcom(&["compare", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("full,none,NaN,5,"));
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(radcom(&["compare", "--methods", "greedy"]).status.code(), Some(1));
    assert_eq!(radcom(&["sweep"]).status.code(), Some(1));
    assert_eq!(radcom(&["sweep", "--sweep", "p=0.9:0.1:0.1"]).status.code(), Some(1));
    // partial belongs to Scheme II
    assert_eq!(radcom(&["compare", "--methods", "partial"]).status.code(), Some(1));
}

#[test]
fn infeasible_budget_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.toml");
    std::fs::write(&path, "P_t = 0.001\nC = 40.0\nmethods = [\"selfish\", \"coop\"]\n").unwrap();
    let o = radcom(&["compare", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.contains("NaN,NaN,NaN,NaN")));
}

#[test]
fn mc_eval_fills_error_columns() {
    let o = radcom(&["mc-eval", "--methods", "coop", "--mc-trials", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let err: f64 = row[8].parse().unwrap();
    assert!(err.is_finite() && err > 0.0);
}

#[test]
fn mask_gap_keeps_spectrum() {
    let o = radcom(&["mask-gap", "--seeds", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[..3], f[3..]);
    }
}
