use std::process::{Command, Output};

fn brwlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brwlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn profile_row() {
    let o = brwlab(&["profile", "--dist", "gaussian:0,1", "--b", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "dist,b,lambda_minus,lambda_plus,m,M,sigma_q_sq,l0");
    let row = lines.next().unwrap();
    assert!(row.starts_with("\"gaussian:0,1\",2,-1.17741002251547"), "{row}");
    assert!(row.ends_with(",1,2.3253469412254582"), "{row}");
}

#[test]
fn exit_codes() {
    let fair = brwlab(&["profile", "--dist", "twopoint:-1,1,0.5", "--b", "2"]);
    assert_eq!(fair.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&fair.stderr).contains("assumption violated"));
    assert_eq!(brwlab(&["profile", "--dist", "gaussian:0,1", "--b", "1"]).status.code(), Some(2));
    assert_eq!(brwlab(&["profile", "--dist", "cauchy:0,1", "--b", "2"]).status.code(), Some(2));
    let starved = brwlab(&[
        "offset",
        "--dist",
        "gaussian:0,1",
        "--b",
        "2",
        "--n",
        "40",
        "--seeds",
        "0..4",
        "--node-budget",
        "100",
    ]);
    assert_eq!(starved.status.code(), Some(4));
    assert_eq!(stdout(&starved).lines().count(), 5);
}

#[test]
fn offset_rows() {
    let o = brwlab(&["offset", "--dist", "gaussian:0,1", "--b", "2", "--n", "8", "--seeds", "3..=5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,n,l_n,l_n_over_cbrt_n,nodes_explored,budget_exhausted,lower_bound");
    let seeds: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["3", "4", "5"]);
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        let l_n: f64 = f[2].parse().unwrap();
        assert!((f[3].parse::<f64>().unwrap() - l_n / 2.0).abs() < 1e-12);
        assert_eq!(f[5], "0");
        assert_eq!(f[6], f[2]);
    }
}

#[test]
fn count_rows() {
    let o = brwlab(&["count", "--dist", "gaussian:0,1", "--b", "2", "--n", "5", "--seeds", "1", "--barrier-l", "1e9"]);
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1).unwrap().split(',').nth(3), Some("32"));
    let windowed = brwlab(&[
        "count",
        "--dist",
        "gaussian:0,1",
        "--b",
        "2",
        "--n",
        "64",
        "--seeds",
        "0..3",
        "--barrier-l",
        "3.0",
        "--delta",
        "0.1",
        "--inv-eps",
        "4",
    ]);
    assert_eq!(windowed.status.code(), Some(0));
    assert_eq!(stdout(&windowed).lines().count(), 4);
    let too_fine = brwlab(&[
        "count",
        "--dist",
        "gaussian:0,1",
        "--b",
        "2",
        "--n",
        "4",
        "--seeds",
        "0",
        "--barrier-l",
        "3.0",
        "--delta",
        "0.1",
        "--inv-eps",
        "8",
    ]);
    assert_eq!(too_fine.status.code(), Some(2));
}

#[test]
fn barrier_and_variational() {
    let o = brwlab(&[
        "barrier",
        "--dist",
        "gaussian:0,1",
        "--b",
        "2",
        "--l",
        "3",
        "--delta",
        "0.1",
        "--inv-eps",
        "10",
        "--l1",
        "0.5",
    ]);
    let text = stdout(&o);
    assert!(text.starts_with("k,s_k,w_k,s_closed_form\n0,0,3.1000000000000001,"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 12);
    assert!(text.lines().last().unwrap().starts_with("# K="));

    let o = brwlab(&["variational", "--c", "1", "--grid", "100"]);
    let text = stdout(&o);
    let value: f64 = text.lines().last().unwrap().strip_prefix("# value=").unwrap().parse().unwrap();
    assert!((value - 3f64.cbrt()).abs() < 0.01 * 3f64.cbrt());
}

#[test]
fn tube_rows() {
    let o = brwlab(&[
        "tube",
        "--dist",
        "gaussian:0,1",
        "--b",
        "2",
        "--tube",
        "0:-inf:inf",
        "--n",
        "10,20",
        "--samples",
        "100",
        "--seed",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("n,samples,p_hat,std_err,rate_hat,predicted_rate"));
    assert_eq!(lines[1], "10,100,1,0,0,0,0");
    assert_eq!(lines[2], "20,100,1,0,0,0,0");
    let bad =
        brwlab(&["tube", "--dist", "gaussian:0,1", "--b", "2", "--tube", "0:1:-1", "--n", "10", "--samples", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn study_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("study.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# small run\ndist = gaussian:0,1\nb = 2\nn_grid = 4, 8\ntrials_per_n = 5\nbase_seed = 1\noutput_path = {}\nworkers = 2\n",
            out.display()
        ),
    )
    .unwrap();
    let o = brwlab(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap(), stdout(&o));
    assert_eq!(std::fs::read_to_string(out.join("trials.csv")).unwrap().lines().count(), 11);

    std::fs::write(&cfg, "dist = gaussian:0,1\nb = 1\n").unwrap();
    let o = brwlab(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}
