//! Resolution-independent position coordinates and token-budget batch sizing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of rotary frequency bands per axis.
pub const ROPE_BANDS: usize = 32;
/// Base of the geometric frequency schedule.
pub const ROPE_BASE: f64 = 10_000.0;
/// Default patch size in pixels.
pub const DEFAULT_PATCH: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub rows: u32,
    pub cols: u32,
    pub patch: u32,
}

impl PatchGrid {
    pub fn new(rows: u32, cols: u32, patch: u32) -> Result<PatchGrid> {
        if rows == 0 || cols == 0 || patch == 0 {
            return Err(Error::invalid(format!(
                "patch grid {rows}x{cols} with patch {patch} must be positive"
            )));
        }
        Ok(PatchGrid { rows, cols, patch })
    }

    pub fn square(n: u32) -> PatchGrid {
        PatchGrid {
            rows: n,
            cols: n,
            patch: DEFAULT_PATCH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordMode {
    Normalized,
    Absolute,
}

/// `(2i + 1) / n - 1` for `i < n`: cell centers of `n` equal bins over `(-1, 1)`.
pub fn normalized_axis(n: u32) -> Vec<f64> {
    (0..n).map(|i| (2 * i + 1) as f64 / n as f64 - 1.0).collect()
}

/// Row and column coordinates, each normalized by its own patch count.
pub fn normalized_coords(grid: &PatchGrid) -> (Vec<f64>, Vec<f64>) {
    (normalized_axis(grid.rows), normalized_axis(grid.cols))
}

/// Interleaved `(cos, sin)` of `coord * omega_b` with `omega_b = base^(-b / bands)`.
pub fn rope_encoding(coord: f64, bands: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * bands);
    for b in 0..bands {
        let omega = ROPE_BASE.powf(-(b as f64) / bands as f64);
        let (s, c) = (coord * omega).sin_cos();
        out.push(c);
        out.push(s);
    }
    out
}

/// Center patch coordinates `(row, col)` under the given mode; the center is `floor(n / 2)`.
pub fn center_coords(grid: &PatchGrid, mode: CoordMode) -> (f64, f64) {
    let (r, c) = (grid.rows / 2, grid.cols / 2);
    match mode {
        CoordMode::Absolute => (r as f64, c as f64),
        CoordMode::Normalized => (
            (2 * r + 1) as f64 / grid.rows as f64 - 1.0,
            (2 * c + 1) as f64 / grid.cols as f64 - 1.0,
        ),
    }
}

fn encode_2d(rc: (f64, f64), bands: usize) -> Vec<f64> {
    let mut v = rope_encoding(rc.0, bands);
    v.extend(rope_encoding(rc.1, bands));
    v
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Cosine similarity of the 2D encodings of both grids' center patches.
pub fn cross_resolution_similarity(a: &PatchGrid, b: &PatchGrid, mode: CoordMode) -> f64 {
    cosine(
        &encode_2d(center_coords(a, mode), ROPE_BANDS),
        &encode_2d(center_coords(b, mode), ROPE_BANDS),
    )
}

/// Pairwise similarities over square grids `sizes x sizes`, row-major.
pub fn similarity_matrix(sizes: &[u32], mode: CoordMode) -> Vec<Vec<f64>> {
    sizes
        .iter()
        .map(|&a| {
            sizes
                .iter()
                .map(|&b| cross_resolution_similarity(&PatchGrid::square(a), &PatchGrid::square(b), mode))
                .collect()
        })
        .collect()
}

/// CSV with one row per ordered grid pair and both modes.
pub fn rope_analysis_csv(sizes: &[u32]) -> String {
    let mut out = String::from("size_a,size_b,normalized,absolute\n");
    for &a in sizes {
        for &b in sizes {
            let (ga, gb) = (PatchGrid::square(a), PatchGrid::square(b));
            out.push_str(&format!(
                "{a},{b},{:.9},{:.9}\n",
                cross_resolution_similarity(&ga, &gb, CoordMode::Normalized),
                cross_resolution_similarity(&ga, &gb, CoordMode::Absolute)
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenBudget {
    pub max_tokens: u64,
    pub min_views: u64,
    pub max_views: u64,
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget {
            max_tokens: 25_000,
            min_views: 2,
            max_views: 48,
        }
    }
}

/// Tokens per view and the largest view count the budget allows.
pub fn view_limits(budget: &TokenBudget, height: u32, width: u32, patch: u32) -> Result<(u64, u64)> {
    if budget.max_tokens == 0 || budget.min_views == 0 || budget.min_views > budget.max_views {
        return Err(Error::invalid(format!("invalid token budget {budget:?}")));
    }
    if patch == 0 || height < patch || width < patch {
        return Err(Error::invalid(format!(
            "image {width}x{height} is smaller than patch {patch}"
        )));
    }
    let t = (height / patch) as u64 * (width / patch) as u64;
    let n_max = budget.max_views.min(budget.max_tokens / t);
    if n_max < budget.min_views {
        return Err(Error::Infeasible(format!(
            "{t} tokens per view allow at most {n_max} views under {} tokens, below the minimum {}",
            budget.max_tokens, budget.min_views
        )));
    }
    Ok((t, n_max))
}

/// View count drawn uniformly from `[min_views, N_max]`.
pub fn token_budget_views(budget: &TokenBudget, height: u32, width: u32, patch: u32, seed: u64) -> Result<u64> {
    let (_, n_max) = view_limits(budget, height, width, patch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rng.random_range(budget.min_views..=n_max))
}

/// First-fit-decreasing bin packing; bins hold sample indices in placement order.
pub fn pack_samples(tokens: &[u64], max_tokens: u64) -> Result<Vec<Vec<usize>>> {
    if let Some((i, t)) = tokens.iter().enumerate().find(|(_, t)| **t > max_tokens) {
        return Err(Error::invalid(format!(
            "sample {i} has {t} tokens, above the budget {max_tokens}"
        )));
    }
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.sort_by(|&a, &b| tokens[b].cmp(&tokens[a]).then(a.cmp(&b)));
    let mut bins: Vec<Vec<usize>> = Vec::new();
    let mut load: Vec<u64> = Vec::new();
    for i in order {
        match load.iter().position(|l| l + tokens[i] <= max_tokens) {
            Some(b) => {
                bins[b].push(i);
                load[b] += tokens[i];
            }
            None => {
                bins.push(vec![i]);
                load.push(tokens[i]);
            }
        }
    }
    Ok(bins)
}
