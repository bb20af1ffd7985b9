use proptest::prelude::*;

use worldkit::resolution::{
    cross_resolution_similarity, pack_samples, similarity_matrix, token_budget_views, view_limits, CoordMode,
    PatchGrid, TokenBudget,
};

/// Fewest bins by exhaustive search.
fn optimal_bins(tokens: &[u64], cap: u64) -> usize {
    fn place(i: usize, items: &[u64], cap: u64, loads: &mut Vec<u64>, best: &mut usize) {
        if loads.len() >= *best {
            return;
        }
        if i == items.len() {
            *best = loads.len();
            return;
        }
        for b in 0..loads.len() {
            if loads[b] + items[i] <= cap {
                loads[b] += items[i];
                place(i + 1, items, cap, loads, best);
                loads[b] -= items[i];
            }
        }
        loads.push(items[i]);
        place(i + 1, items, cap, loads, best);
        loads.pop();
    }
    let mut items = tokens.to_vec();
    items.sort_unstable_by(|a, b| b.cmp(a));
    let mut best = items.len().max(1);
    if items.is_empty() {
        return 0;
    }
    place(0, &items, cap, &mut Vec::new(), &mut best);
    best
}

proptest! {
    #[test]
    fn packing_is_valid_and_near_optimal(tokens in prop::collection::vec(1u64..=100, 0..9)) {
        let cap = 100;
        let bins = pack_samples(&tokens, cap).unwrap();
        let mut seen: Vec<usize> = bins.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..tokens.len()).collect::<Vec<_>>());
        prop_assert!(bins.iter().all(|b| b.iter().map(|&i| tokens[i]).sum::<u64>() <= cap));
        prop_assert!(bins.iter().all(|b| !b.is_empty()));
        let opt = optimal_bins(&tokens, cap);
        prop_assert!(bins.len() <= opt + 1, "ffd {} vs optimum {}", bins.len(), opt);
    }

    #[test]
    fn budget_never_overflows(max_tokens in 1u64..100_000, h in 14u32..2000, w in 14u32..2000, p in 1u32..=14, seed in any::<u64>()) {
        let b = TokenBudget { max_tokens, min_views: 2, max_views: 48 };
        let t = (h / p) as u64 * (w / p) as u64;
        match token_budget_views(&b, h, w, p, seed) {
            Ok(n) => {
                prop_assert!(n * t <= max_tokens && (2..=48).contains(&n));
                prop_assert_eq!(view_limits(&b, h, w, p).unwrap().0, t);
            }
            Err(_) => prop_assert!(2 * t > max_tokens),
        }
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in 1u32..80, b in 1u32..80) {
        for mode in [CoordMode::Normalized, CoordMode::Absolute] {
            let ab = cross_resolution_similarity(&PatchGrid::square(a), &PatchGrid::square(b), mode);
            let ba = cross_resolution_similarity(&PatchGrid::square(b), &PatchGrid::square(a), mode);
            prop_assert!((ab - ba).abs() < 1e-12 && (-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        }
    }
}

#[test]
fn matrix_diagonal_is_one() {
    let sizes = [8, 16, 33, 64];
    for mode in [CoordMode::Normalized, CoordMode::Absolute] {
        let m = similarity_matrix(&sizes, mode);
        for (i, row) in m.iter().enumerate() {
            assert!((row[i] - 1.0).abs() < 1e-12);
        }
    }
}
