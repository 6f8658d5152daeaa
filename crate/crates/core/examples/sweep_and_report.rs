//! A λ × seed grid through the sweep runner, then mean ± SE per λ and a
//! paired t-test between the two λ values.

use etl::cli::{
    cmd_report, cmd_sweep, cmd_synth, collect_runs, parse_grid, Comparison, RunConfig, SynthOptions,
};
use etl::eval::Metric;

fn main() -> etl::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| etl::Error::io(".", e))?;
    let ds = dir.path().join("dataset");
    cmd_synth(
        &SynthOptions {
            n_users: 400,
            n_items: [150, 150],
            sparsity: 0.05,
            ..SynthOptions::default()
        },
        &ds,
    )?;

    let mut base = RunConfig {
        dataset: Some(ds),
        ..RunConfig::default()
    };
    base.apply_overrides(&[
        "latent=16".into(),
        "hidden=64".into(),
        "disc_hidden=16".into(),
        "batch=32".into(),
        "lr=0.003".into(),
        "epochs=5".into(),
    ])?;
    let grid = parse_grid(&["lambda=0,1".into(), "seed=1,2,3".into()])?;
    let sweep = dir.path().join("sweep");
    let rows = cmd_sweep(&base, &grid, &sweep, 1)?;
    print!(
        "{}",
        std::fs::read_to_string(sweep.join("sweep.csv")).map_err(|e| etl::Error::io(&sweep, e))?
    );
    println!("{} runs", rows.len());

    let runs = collect_runs(&[sweep])?;
    let cmp: Comparison = "lambda=1,0".parse()?;
    let summary = cmd_report(&runs, Metric::Hr, 10, Some(&cmp), None)?;
    print!("{}", summary.to_csv());
    if let Some([a, b]) = summary.ttest {
        println!(
            "paired t-test lambda 1 vs 0: a t={:.3} p={:.3}; b t={:.3} p={:.3}",
            a.t, a.p, b.t, b.p
        );
    }
    Ok(())
}
