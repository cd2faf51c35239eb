//! End-to-end tests of the file-based commands and their exit codes.

use std::fs;
use std::path::PathBuf;
use std::process::Command;
use uncoreset::cli::{cmd_bench, cmd_build, cmd_verify, write_points_jsonl, CliError, RunConfig};
use uncoreset::coresets::{CoresetKind, Method};
use uncoreset::datasets;
use uncoreset::ranges::FamilyKind;

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_fixture_files() -> (PathBuf, PathBuf) {
    let p = datasets::interleaved_ten();
    let t = datasets::interleaved_ten_odd_subset();
    let p_path = tmp("fixture_p.jsonl");
    let t_path = tmp("fixture_t.jsonl");
    fs::write(&p_path, write_points_jsonl(&p)).unwrap();
    fs::write(&t_path, write_points_jsonl(&t)).unwrap();
    (p_path, t_path)
}

#[test]
fn build_writes_coreset_and_metadata() {
    let p = datasets::random_uniform(256, 2, 1, 9);
    let input = tmp("build_in.jsonl");
    fs::write(&input, write_points_jsonl(&p)).unwrap();
    let out = tmp("build_out.jsonl");
    let cfg = RunConfig {
        input: input.clone(),
        output: Some(out.clone()),
        kind: CoresetKind::Re,
        method: Method::Discrepancy,
        family: FamilyKind::HalfLine,
        eps: 0.2,
        seed: 7,
        ..Default::default()
    };
    cmd_build(&cfg).unwrap();
    let coreset = uncoreset::cli::read_points(&out).unwrap();
    assert!(coreset.len() < p.len());
    let meta = fs::read_to_string(tmp("build_out.jsonl.meta.json")).unwrap();
    assert!(meta.contains("\"method\": \"discrepancy\""));
    assert!(meta.contains("\"seed\": 7"));

    // byte-identical on repeat
    let out2 = tmp("build_out2.jsonl");
    let cfg2 = RunConfig { output: Some(out2.clone()), ..cfg };
    cmd_build(&cfg2).unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn verify_self_copy_is_clean() {
    let p = datasets::random_uniform(64, 2, 1, 11);
    let input = tmp("self_p.jsonl");
    fs::write(&input, write_points_jsonl(&p)).unwrap();
    let report = tmp("self_report.json");
    let cfg = RunConfig {
        input: input.clone(),
        coreset: Some(input.clone()),
        output: Some(report.clone()),
        kind: CoresetKind::Re,
        family: FamilyKind::HalfLine,
        eps: 0.1,
        ..Default::default()
    };
    cmd_verify(&cfg).unwrap();
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"max_re_error\": \"0\""));
    assert!(text.contains("\"sup_rc_error\": \"0\""));
    assert!(text.contains("\"pass\": true"));
}

#[test]
fn verify_fixture_report() {
    let (p_path, t_path) = write_fixture_files();
    let report = tmp("fixture_report.json");
    let cfg = RunConfig {
        input: p_path,
        coreset: Some(t_path),
        output: Some(report.clone()),
        kind: CoresetKind::Re,
        family: FamilyKind::HalfLine,
        eps: 0.1,
        ..Default::default()
    };
    // max half-line error of the odd-id subset is exactly 0.1, so eps = 0.1
    // passes; the separating range's 0.05 row appears in the details
    cmd_verify(&cfg).unwrap();
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"max_re_error\": \"0.1\""), "{text}");
    assert!(text.contains("\"error\": \"0.05\""), "detail table holds the 1/20 range");

    // a tighter nominal eps is a guarantee violation: exit code 4, report
    // still written
    let report2 = tmp("fixture_report2.json");
    let cfg = RunConfig { eps: 0.05, output: Some(report2.clone()), ..cfg };
    let err = cmd_verify(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(fs::read_to_string(&report2).unwrap().contains("\"pass\": false"));
}

#[test]
fn verify_rejects_corrupted_coreset() {
    let p = datasets::random_uniform(32, 2, 1, 13);
    let input = tmp("corrupt_p.jsonl");
    fs::write(&input, write_points_jsonl(&p)).unwrap();
    // a coreset containing a point id the original never had
    let bad = tmp("corrupt_t.jsonl");
    fs::write(&bad, "{\"id\":999,\"locations\":[[1],[2]]}\n").unwrap();
    let cfg = RunConfig {
        input,
        coreset: Some(bad),
        kind: CoresetKind::Re,
        family: FamilyKind::HalfLine,
        eps: 0.5,
        ..Default::default()
    };
    let err = cmd_verify(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("999"), "diagnostic names the id: {err}");
}

#[test]
fn unsupported_family_dimension_is_exit_2() {
    let p = datasets::random_uniform(16, 2, 3, 15);
    let input = tmp("rect3_p.jsonl");
    fs::write(&input, write_points_jsonl(&p)).unwrap();
    let cfg = RunConfig {
        input,
        output: Some(tmp("rect3_t.jsonl")),
        kind: CoresetKind::Rc,
        method: Method::Discrepancy,
        family: FamilyKind::Rect,
        dim: 3,
        eps: 0.2,
        ..Default::default()
    };
    let err = cmd_build(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn bad_eps_is_exit_3() {
    let p = datasets::random_uniform(16, 2, 1, 16);
    let input = tmp("eps_p.jsonl");
    fs::write(&input, write_points_jsonl(&p)).unwrap();
    let cfg = RunConfig {
        input,
        output: Some(tmp("eps_t.jsonl")),
        eps: 1.5,
        ..Default::default()
    };
    let err = cmd_build(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn bench_sweep_rows_and_monotone_sizes() {
    let p = datasets::random_uniform(256, 2, 1, 17);
    let input = tmp("bench_p.jsonl");
    fs::write(&input, write_points_jsonl(&p)).unwrap();
    let out = tmp("bench.csv");
    let cfg = RunConfig {
        input: input.clone(),
        output: Some(out.clone()),
        kind: CoresetKind::Re,
        family: FamilyKind::HalfLine,
        eps_list: vec![0.4, 0.2, 0.1],
        methods: vec![Method::Sample, Method::Discrepancy],
        seed: 3,
        ..Default::default()
    };
    cmd_bench(&cfg).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6, "3 eps values x 2 methods");
    // per method, |T| must not shrink as eps decreases
    for method in ["sample", "discrepancy"] {
        let sizes: Vec<usize> = rows
            .iter()
            .filter(|r| r.split(',').nth(4) == Some(method))
            .map(|r| r.split(',').nth(6).unwrap().parse().unwrap())
            .collect();
        assert_eq!(sizes.len(), 3);
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{method}: {sizes:?}");
    }

    // an empty sweep is a parameter error
    let cfg = RunConfig { eps_list: vec![], input, output: None, ..cfg };
    assert_eq!(cmd_bench(&cfg).unwrap_err().exit_code(), 3);
}

#[test]
fn binary_respects_env_seed_override() {
    let p = datasets::random_uniform(128, 2, 1, 19);
    let input = tmp("env_p.jsonl");
    fs::write(&input, write_points_jsonl(&p)).unwrap();
    let bin = env!("CARGO_BIN_EXE_uncoreset");

    let run = |out: &PathBuf, seed_flag: &str, env_seed: Option<&str>| {
        let mut cmd = Command::new(bin);
        cmd.args([
            "build",
            "--kind",
            "re",
            "--family",
            "halfline",
            "--eps",
            "0.25",
            "--method",
            "discrepancy",
            "--seed",
            seed_flag,
        ]);
        if let Some(s) = env_seed {
            cmd.env("UNCORESET_SEED", s);
        }
        cmd.arg(&input).arg("-o").arg(out);
        let status = cmd.status().expect("binary runs");
        assert!(status.success());
    };

    let a = tmp("env_a.jsonl");
    let b = tmp("env_b.jsonl");
    let c = tmp("env_c.jsonl");
    run(&a, "0", Some("12345"));
    run(&b, "12345", None);
    run(&c, "0", None);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "env seed wins");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap(), "different seed, different subset");
}

#[test]
fn binary_reports_violation_exit_code() {
    let (p_path, t_path) = write_fixture_files();
    let bin = env!("CARGO_BIN_EXE_uncoreset");
    let status = Command::new(bin)
        .args(["verify", "--kind", "re", "--family", "halfline", "--eps", "0.01"])
        .arg(&p_path)
        .arg(&t_path)
        .arg("-o")
        .arg(tmp("violation_report.json"))
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(4));
}

#[test]
fn error_types_map_to_codes() {
    assert_eq!(CliError::Parse("".into()).exit_code(), 1);
    assert_eq!(CliError::Unsupported("".into()).exit_code(), 2);
    assert_eq!(CliError::BadParameter("".into()).exit_code(), 3);
    assert_eq!(CliError::Violation("".into()).exit_code(), 4);
}
