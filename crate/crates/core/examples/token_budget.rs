//! Compares normalized and absolute rotary position coordinates across grid sizes, sizes
//! view batches under a token budget and packs samples into fixed-size batches.
//!
//! Usage: cargo run --release --example token_budget

use worldkit::resolution::{pack_samples, similarity_matrix, token_budget_views, view_limits, CoordMode, TokenBudget};

fn main() -> worldkit::Result<()> {
    let sizes = [8, 16, 24, 32, 48, 64];
    for mode in [CoordMode::Normalized, CoordMode::Absolute] {
        println!("{mode:?} center-patch similarity");
        for (a, row) in sizes.iter().zip(similarity_matrix(&sizes, mode)) {
            let cells: Vec<String> = row.iter().map(|s| format!("{s:6.3}")).collect();
            println!("  {a:>3} {}", cells.join(" "));
        }
    }

    let budget = TokenBudget::default();
    for (h, w) in [(518, 378), (518, 518), (280, 392)] {
        let (t, n_max) = view_limits(&budget, h, w, 14)?;
        let n = token_budget_views(&budget, h, w, 14, 0)?;
        println!("{h}x{w}: {t} tokens per view, at most {n_max} views, drew {n}");
    }

    let tokens = [9990, 4800, 18000, 7000, 12000, 3000, 999, 24000];
    let bins = pack_samples(&tokens, budget.max_tokens)?;
    for (i, b) in bins.iter().enumerate() {
        let load: u64 = b.iter().map(|&k| tokens[k]).sum();
        println!("batch {i}: samples {b:?}, {load} tokens");
    }
    Ok(())
}
