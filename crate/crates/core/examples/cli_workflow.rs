//! Drive the command-line workflow in process: simulate, preprocess, train a
//! tiny model and report.

use std::process::ExitCode;

fn main() -> ExitCode {
    let root = std::env::temp_dir().join("mdcsa-example-runs");
    let dir = |name: &str| root.join(name).display().to_string();
    let quick = [
        "--set", "eval.train.grid.d=[8]",
        "--set", "eval.train.grid.epochs=[2]",
        "--set", "eval.train.grid.learning_rate=[0.001]",
        "--set", "eval.train.windows_per_epoch=256",
        "--set", "eval.max_test_windows=200",
        "--set", "eval.medication=false",
    ];
    let steps: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--pairs".into(), "2".into(), "--days".into(), "1".into(), "--out".into(), dir("cohort")],
        vec!["preprocess".into(), "--input".into(), dir("cohort"), "--out".into(), dir("windows")],
        vec!["train".into(), "--input".into(), dir("windows"), "--protocol".into(), "LOO-HC".into(), "--variant".into(), "MDCSA".into(), "--out".into(), dir("train")],
        vec!["gait".into(), "--input".into(), dir("cohort"), "--out".into(), dir("gait")],
        vec!["report".into(), "--input".into(), dir("train"), dir("gait"), "--out".into(), dir("report")],
    ];
    for step in steps {
        let mut args = vec!["mdcsa".to_string(), "--seed".into(), "11".into()];
        args.extend(step);
        args.extend(quick.iter().map(|s| s.to_string()));
        println!("$ {}", args.join(" "));
        let code = mdcsa::cli::run(args);
        if code != ExitCode::SUCCESS {
            return code;
        }
    }
    ExitCode::SUCCESS
}
