//! The rating-file pipeline: binarize, k-core filter, pair the domains over
//! shared users, leave-one-out split, save, reload.

use std::fmt::Write as _;

use etl::cli::cmd_prepare;
use etl::dataio::{load_dataset, SplitOptions};
use etl::numerics::Rng;

fn ratings(prefix: &str, users: usize, items: usize, rng: &mut Rng) -> String {
    let mut s = String::new();
    for u in 0..users {
        for i in 0..items {
            if rng.uniform() < 0.3 {
                let rating = 1 + rng.below(5);
                let _ = writeln!(
                    s,
                    "user{u},{prefix}{i},{rating},{}",
                    1_500_000_000 + u * 100 + i
                );
            }
        }
    }
    s
}

fn main() -> etl::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| etl::Error::io(".", e))?;
    let mut rng = Rng::seed_from(1);
    let (a, b) = (dir.path().join("movies.csv"), dir.path().join("books.csv"));
    std::fs::write(&a, ratings("m", 120, 150, &mut rng)).map_err(|e| etl::Error::io(&a, e))?;
    std::fs::write(&b, ratings("b", 140, 150, &mut rng)).map_err(|e| etl::Error::io(&b, e))?;

    let out = dir.path().join("prepared");
    let opts = SplitOptions {
        n_negatives: 99,
        min_count: 5,
        ..SplitOptions::default()
    };
    for s in cmd_prepare(&a, &b, &out, &opts)? {
        println!("{s}");
    }
    let ds = load_dataset(&out)?;
    println!(
        "reloaded {} paired users, {} train interactions",
        ds.n_users(),
        ds.train_nnz()
    );
    Ok(())
}
