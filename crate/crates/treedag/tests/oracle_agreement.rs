//! Compact construction and DP counting against literal-definition oracles:
//! explicit expansion, recursive pruning, and naive counting.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{explicit_unfolding, origin_share, prune_to_knt, rooted_iso};
use num::BigUint;
use treedag::analysis::{relative_influence, InfluenceMethod};
use treedag::gen::random_connected;
use treedag::tree::{build_knt_dag, expand_to_tree};

const BUDGET: u64 = 200_000;

#[test]
fn compact_dags_expand_to_definition_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for round in 0..30 {
        let g = random_connected(&mut rng, 2 + round % 9, 0.25, 3);
        for v in 0..g.n() {
            for h in 0..=3 {
                let full = explicit_unfolding(&g, v, h);
                for k in [None, Some(0), Some(1), Some(2)] {
                    let dag = build_knt_dag(&g, v, h, k).unwrap();
                    let expanded = expand_to_tree(&dag, BUDGET).unwrap();
                    let oracle = match k {
                        None => full.clone(),
                        Some(k) => prune_to_knt(&g, &full, k),
                    };
                    assert!(
                        rooted_iso(&expanded, &oracle),
                        "n={} v={v} h={h} k={k:?}: {} vs {} nodes",
                        g.n(),
                        expanded.len(),
                        oracle.len()
                    );
                }
            }
        }
    }
}

#[test]
fn influence_dp_matches_explicit_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for round in 0..25 {
        let g = random_connected(&mut rng, 2 + round % 8, 0.3, 2);
        let u = round % g.n();
        for h in 0..=3 {
            let full = explicit_unfolding(&g, u, h);
            for (method, k) in [
                (InfluenceMethod::UnfoldingTree, None),
                (InfluenceMethod::ZeroNt, Some(0)),
                (InfluenceMethod::OneNt, Some(1)),
            ] {
                let oracle_tree = match k {
                    None => full.clone(),
                    Some(k) => prune_to_knt(&g, &full, k),
                };
                for v in 0..g.n() {
                    let report = relative_influence(&g, u, v, h, method).unwrap();
                    let (num, den) = origin_share(&oracle_tree, v);
                    assert_eq!(report.numerator, BigUint::from(num), "u={u} v={v} h={h}");
                    assert_eq!(report.denominator, BigUint::from(den), "u={u} v={v} h={h}");
                }
            }
        }
    }
}
