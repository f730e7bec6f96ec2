use std::collections::HashSet;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parazeta")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty(), "diagnostics on success: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

#[test]
fn dzeta_at_one_is_the_measure() {
    let v = json_ok(&["dzeta", "--set", "realization:cantor", "--s", "1", "--delta", "1"]);
    assert!((f(&v["value"]["re"]) - 3.0).abs() < 1e-12);
    assert_eq!(f(&v["value"]["im"]), 0.0);
    assert_eq!(v["method"], "closed-form");
}

#[test]
fn eval_gen_cantor_at_one() {
    let v = json_ok(&["eval", "--expr", "gencantor:2,0.3333333333", "--s", "1+0i"]);
    let expected = 1.0 / (1.0 - 2.0 * 0.3333333333);
    assert!((f(&v["value"]["re"]) - expected).abs() <= f(&v["error_bound"]) + 1e-15);
    assert!((f(&v["value"]["re"]) - 3.0).abs() < 1e-8);
    assert_eq!(v["certified"], true);
}

#[test]
fn lengths_of_the_cantor_string() {
    let v = json_ok(&["lengths", "--expr", "cantor", "--n", "7"]);
    let rows = v["lengths"].as_array().unwrap();
    let got: Vec<(f64, u64)> = rows.iter().map(|r| (f(&r["length"]), r["multiplicity"].as_u64().unwrap())).collect();
    let expected = [(1.0 / 3.0, 1), (1.0 / 9.0, 2), (1.0 / 27.0, 4)];
    assert_eq!(got.len(), 3);
    for ((l, m), (el, em)) in got.iter().zip(expected) {
        assert!((l / el - 1.0).abs() < 1e-15 && *m == em);
    }
}

#[test]
fn construct_reports_and_rejects() {
    let v = json_ok(&["construct", "--dinf", "0.2", "--d1", "0.5", "--d", "0.5"]);
    assert_eq!((f(&v["report"]["d_par"]), f(&v["report"]["d_mer"]), f(&v["report"]["d_abs"])), (0.2, 0.5, 0.5));
    assert!(v["construction"]["extra_atom"].is_null());

    let out = run(&["construct", "--dinf", "0.5", "--d1", "0.5", "--d", "0.6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("D_inf < D_1"));

    let v = json_ok(&["construct", "--dinf", "0.2", "--d1", "0.5", "--d", "0.8"]);
    let atom = &v["construction"]["extra_atom"];
    assert_eq!(atom["m"], 2);
    assert!((f(&atom["a"]) - 2f64.powf(-1.0 / 0.8)).abs() < 1e-15);

    let v = json_ok(&["construct", "--dinf", "0.3", "--d1", "1.4", "--d", "2.6", "--ambient", "3"]);
    assert_eq!(v["set"]["case"], "union");
}

#[test]
fn exit_codes() {
    // numerical domain: on a pole, and left of the barrier
    assert_eq!(run(&["eval", "--expr", "gencantor:2,1/3", "--s", "0.6309297535714574"]).status.code(), Some(3));
    assert_eq!(run(&["eval", "--dinf", "0.2", "--d1", "0.5", "--d", "0.5", "--s", "0.1+1i"]).status.code(), Some(3));
    assert_eq!(run(&["dzeta", "--set", "realization:cantor", "--s", "0.5", "--delta", "1"]).status.code(), Some(3));
    // invalid input
    for args in [
        &["eval", "--expr", "gencantor:2,0.7", "--s", "1"][..],
        &["eval", "--expr", "cantor", "--s", "one"],
        &["scan", "--expr", "cantor", "--window", "1:0:0:1"],
        &["scan", "--expr", "cantor", "--window", "0.7:1:0:1", "--res", "1x5"],
        &["dzeta", "--set", "grill:0(realization:cantor)", "--s", "2"],
        &["dzeta", "--set", "realization:cantor", "--s", "1", "--delta", "0.1"],
        &["lengths"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
    }
}

fn parse_scan(text: &str) -> (Vec<Vec<String>>, Vec<(f64, f64)>) {
    let (grid, sing) = text.split_once("\n\nsingularities\n").expect("singularities block");
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("re,im,zeta_re,zeta_im,abs,log_abs,marker"));
    let cells = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    let mut sl = sing.lines();
    assert_eq!(sl.next(), Some("re,im,kind,k"));
    let points = sl
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap())
        })
        .collect();
    (cells, points)
}

#[test]
fn scan_marks_exactly_the_lattice() {
    let out = run(&["scan", "--dinf", "0.2", "--d1", "0.5", "--d", "0.5", "--window", "0.25:0.9:0:3", "--res", "200x200"]);
    assert!(out.status.success());
    let (cells, points) = parse_scan(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(cells.len(), 200 * 200);
    // lines D_1 = 0.5, D_2 = 0.35, D_3 = 0.275 inside the window
    assert_eq!(points.len(), 6);
    let (h_re, h_im) = (0.65 / 199.0, 3.0 / 199.0);
    let expected: HashSet<usize> = points
        .iter()
        .map(|(re, im)| ((im / h_im).round() as usize) * 200 + ((re - 0.25) / h_re).round() as usize)
        .collect();
    let marked: HashSet<usize> =
        cells.iter().enumerate().filter(|(_, c)| c[6] == "singularity-proximal").map(|(i, _)| i).collect();
    assert_eq!(marked, expected);
}

#[test]
fn scan_is_conjugate_symmetric_and_clips_the_barrier() {
    let args = ["scan", "--dinf", "0.2", "--d1", "0.5", "--d", "0.5", "--window", "0.1:1:-4:4", "--res", "21x41"];
    let out = run(&args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("barrier"));
    let (cells, _) = parse_scan(&String::from_utf8(out.stdout).unwrap());
    let value = |i: usize, j: usize| cells[j * 21 + i][2].parse::<f64>().unwrap();
    let first_re: f64 = cells[0][0].parse().unwrap();
    assert!(first_re > 0.2);
    let mut compared = 0;
    for j in 0..41 {
        for i in 0..21 {
            let (a, b) = (value(i, j), value(i, 40 - j));
            if a.is_finite() && b.is_finite() {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{i} {j}: {a} {b}");
                compared += 1;
            }
        }
    }
    assert!(compared > 700);
}

#[test]
fn scan_of_an_expression_marks_outside_cells() {
    let out = run(&["scan", "--expr", "gencantor:2,1/3", "--window", "-0.5:1:-6:6", "--res", "16x13", "--format", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 16 * 13);
    assert!(cells.iter().filter(|c| f(&c["re"]) <= 0.0).all(|c| c["marker"] == "outside-halfplane" && c["zeta_re"].is_null()));
    assert_eq!(v["singularities"].as_array().unwrap().len(), 3);
}

#[test]
fn json_expression_round_trip_is_exact() {
    let v = json_ok(&["construct", "--dinf", "0.2", "--d1", "0.5", "--d", "0.8"]);
    let expr = serde_json::to_string(&v["construction"]["expr"]).unwrap();
    let direct = run(&["eval", "--dinf", "0.2", "--d1", "0.5", "--d", "0.8", "--s", "0.9+2i"]);
    let via_json = run(&["eval", "--expr", &expr, "--s", "0.9+2i"]);
    assert!(direct.status.success());
    assert_eq!(direct.stdout, via_json.stdout);
}

#[test]
fn dim_reports_exact_and_estimate() {
    let v = json_ok(&["dim", "--expr", "gencantor:2,1/3"]);
    assert!((f(&v["exact"]["value"]) - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
    assert_eq!(v["exact"]["method"], "exact-symbolic");
    assert!((f(&v["estimate"]["value"]) - 0.631).abs() < 0.02);
    let v = json_ok(&["dim", "--dinf", "0.2", "--d1", "0.5", "--d", "0.5", "--probe"]);
    assert_eq!(f(&v["exact"]["value"]), 0.5);
    assert!((f(&v["probe"]["estimate"]) - 0.5).abs() < 0.05);
}

#[test]
fn monte_carlo_output_is_reproducible() {
    let args = ["dzeta", "--set", "grill:1(realization:cantor)", "--s", "2.2+1i", "--delta", "0.5", "--n", "20000", "--seed", "11"];
    let a = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, run(&args).stdout);
    let mut other = args;
    other[9] = "12";
    assert_ne!(a.stdout, run(&other).stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["method"], "shift-formula");
    assert_eq!(v["seed"], 11);
}
