mod support;

use deskbench::planners::{astar, octile};
use proptest::prelude::*;
use support::random_grid;

#[test]
fn astar_matches_dijkstra_on_200_grids() {
    support::check_astar_optimal(200).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_are_legal_and_no_shorter_than_octile(seed in 1000u64..100_000) {
        let (occ, grid, s, g) = random_grid(seed);
        prop_assume!(!occ[s.1][s.0]);
        if let Ok(p) = astar(&grid, s, g) {
            prop_assert!(p.cost_cells(1.0) >= octile(s, g) - 1e-9);
            for w in p.cells.windows(2) {
                let (a, b) = (w[0], w[1]);
                prop_assert!(!occ[b.1][b.0]);
                prop_assert!(a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1 && a != b);
                if a.0 != b.0 && a.1 != b.1 {
                    prop_assert!(!occ[a.1][b.0] && !occ[b.1][a.0], "corner cut at {a:?}->{b:?}");
                }
            }
        }
    }
}
