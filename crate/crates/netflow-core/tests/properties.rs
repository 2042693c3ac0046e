//! Property tests for the structural invariants, plus deterministic studies
//! of the restriction behavior of nested networks.

use netflow_core::flow::{evolve_exact, in_domain, FlowSystem};
use netflow_core::graph::{ladder_sequence, DirectedGraph};
use netflow_core::grid::{ApproxPair, GridFunction};
use netflow_core::matrices::NetworkMatrices;
use netflow_core::sparse::SparseMatrix;
use netflow_core::tk::{
    spearman_rank_correlation, tk1_resolvent_errors, tk1_semigroup_errors, ParamValue, TkExperiment,
};
use netflow_core::Complex64;
use proptest::prelude::*;

fn grid_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-100.0f64..100.0, len)
}

proptest! {
    #[test]
    fn l1_norm_homogeneity_and_triangle(
        values_f in grid_values(3 * 16),
        values_g in grid_values(3 * 16),
        alpha in -10.0f64..10.0,
    ) {
        let f = GridFunction::from_values(3, 16, values_f).unwrap();
        let g = GridFunction::from_values(3, 16, values_g).unwrap();
        let homogeneity = (f.scaled(alpha).l1_norm() - alpha.abs() * f.l1_norm()).abs();
        prop_assert!(homogeneity <= 1e-12 * (1.0 + f.l1_norm()));
        let triangle = f.add(&g).unwrap().l1_norm();
        prop_assert!(triangle <= f.l1_norm() + g.l1_norm() + 1e-12);
    }

    #[test]
    fn embed_project_contract(
        values in grid_values(4 * 8),
        choice in proptest::collection::vec(0usize..100, 4),
    ) {
        // Derive an injective map 4 -> 9 from the random choices.
        let mut taken = [false; 9];
        let mut injection = Vec::new();
        for c in choice {
            let mut slot = c % 9;
            while taken[slot] {
                slot = (slot + 1) % 9;
            }
            taken[slot] = true;
            injection.push(slot);
        }
        let pair = ApproxPair::new(4, 9, injection).unwrap();
        let f = GridFunction::from_values(4, 8, values).unwrap();
        let lifted = pair.embed(&f).unwrap();
        // Norm preservation and exact roundtrip.
        prop_assert!((lifted.l1_norm() - f.l1_norm()).abs() <= 1e-12 * (1.0 + f.l1_norm()));
        prop_assert_eq!(pair.project(&lifted).unwrap(), f);
    }

    #[test]
    fn line_graph_product_equals_rule(
        vertices in 2usize..9,
        picks in proptest::collection::vec((0usize..8, 0usize..8), 0..20),
    ) {
        let mut edges = Vec::new();
        for (t, h) in picks {
            let (t, h) = (t % vertices, h % vertices);
            if t != h && !edges.contains(&(t, h)) {
                edges.push((t, h));
            }
        }
        let graph = DirectedGraph::new(vertices, edges);
        prop_assert!(graph.validate().is_ok());
        let nm = NetworkMatrices::from_graph(&graph).unwrap();
        let m = graph.edge_count();
        let mut rule = vec![vec![0i64; m]; m];
        for i in 0..m {
            for j in 0..m {
                if graph.head(j) == graph.tail(i) {
                    rule[i][j] = 1;
                }
            }
        }
        prop_assert_eq!(nm.line_adjacency.to_dense(), rule);
        prop_assert_eq!(nm.adjacency.nnz(), graph.edge_count());
    }
}

/// Nested ladder members share their line-graph adjacency as a leading
/// principal block: the entry rule only looks at the two edges involved.
#[test]
fn ladder_line_graphs_nest_as_principal_blocks() {
    let seq = ladder_sequence(5);
    for n in 0..4 {
        let small = NetworkMatrices::from_graph(seq.graph(n)).unwrap();
        let large = NetworkMatrices::from_graph(seq.graph(n + 1)).unwrap();
        let m = seq.graph(n).edge_count();
        assert_eq!(
            large.line_adjacency.principal_block(m, m),
            small.line_adjacency
        );
    }
}

/// Trace-identity fixture: on the first ladder member with unit velocities
/// the coupling maps the all-ones head trace to the row sums (1, 1, 1, 2, 1).
#[test]
fn domain_trace_fixture_on_first_member() {
    let sys = FlowSystem::unit(ladder_sequence(1).graph(0).clone()).unwrap();
    let n = 16;
    let mut f = GridFunction::constant(5, n, 1.0);
    let row_sums = [1.0, 1.0, 1.0, 2.0, 1.0];
    for (j, &r) in row_sums.iter().enumerate() {
        f.set(j, n - 1, r);
    }
    let check = in_domain(&sys, &f, 1e-12).unwrap();
    assert_eq!(check.residual, 0.0);
    assert!(check.within_tol);
}

/// What restriction actually does for the first two ladder members: the
/// small flow agrees with the projected large flow exactly up to the first
/// return through the added cell, which closes after three unit-time hops
/// (the cell diagonal shortcuts the long path). At the matrix level the
/// third boundary power already differs on the shared block.
#[test]
fn restriction_exact_before_first_return_then_breaks() {
    let cells = 128usize;
    let sys1 = FlowSystem::unit(ladder_sequence(1).graph(0).clone()).unwrap();
    let sys2 = FlowSystem::unit(ladder_sequence(2).graph(1).clone()).unwrap();
    let pair = ApproxPair::prefix(5, 9);
    let f = GridFunction::edge_indicator(5, cells, 0, 1.0);

    let defect = |t: f64| -> f64 {
        let large = evolve_exact(&sys2, &pair.embed(&f).unwrap(), t).unwrap();
        let small = evolve_exact(&sys1, &f, t).unwrap();
        pair.project(&large).unwrap().l1_distance(&small).unwrap()
    };

    // Exact agreement through t = 2.
    for q in 0..=(2 * cells) {
        let t = q as f64 / cells as f64;
        assert!(
            defect(t) <= 1e-12,
            "unexpected defect {} at t = {}",
            defect(t),
            t
        );
    }
    // Strict discrepancy from the first cell past t = 2 onward.
    let first_breach = defect(2.0 + 1.0 / cells as f64);
    assert!(first_breach > 1e-6, "no discrepancy right after t = 2");
    assert!(defect(2.5) > 0.1);
    assert!(defect(3.0) > 0.5);

    // Matrix-level witness: the cube of the large boundary matrix feeds the
    // third shared edge from the first one; the small cube does not.
    let b1 = sys1.boundary().matrix().clone();
    let b2 = sys2.boundary().matrix().clone();
    let cube = |b: &SparseMatrix<f64>| b.matmul(&b.matmul(b));
    let (c1, c2) = (cube(&b1), cube(&b2));
    assert_eq!(c1.get(2, 0), 0.0);
    assert_eq!(c2.get(2, 0), 1.0);
    for i in 0..5 {
        for j in 0..5 {
            if (i, j) != (2, 0) {
                assert_eq!(
                    c1.get(i, j),
                    c2.get(i, j),
                    "extra mismatch at ({}, {})",
                    i,
                    j
                );
            }
        }
    }
}

/// Resolvent commutation with the embedding decays exponentially in
/// Re(lambda), at the rate set by the shortest return path through the
/// added cell. That path is e1 -> e6 -> e9 -> e3 of length 3 (the cell
/// diagonal), so the fitted rate sits near 3.
#[test]
fn resolvent_embedding_gap_decays_at_return_rate() {
    let cells = 128usize;
    let sys1 = FlowSystem::unit(ladder_sequence(1).graph(0).clone()).unwrap();
    let sys2 = FlowSystem::unit(ladder_sequence(2).graph(1).clone()).unwrap();
    let pair = ApproxPair::prefix(5, 9);
    let f = GridFunction::edge_indicator(5, cells, 0, 1.0);
    let gap = |lambda: f64| -> f64 {
        let big =
            netflow_core::resolvent::ResolventOperator::new(&sys2, Complex64::new(lambda, 0.0))
                .unwrap();
        let small =
            netflow_core::resolvent::ResolventOperator::new(&sys1, Complex64::new(lambda, 0.0))
                .unwrap();
        let through_big = pair
            .project(&big.apply_real(&pair.embed(&f).unwrap()).unwrap())
            .unwrap();
        let direct = small.apply_real(&f).unwrap();
        through_big.l1_distance(&direct).unwrap()
    };
    let (g1, g2, g4) = (gap(1.0), gap(2.0), gap(4.0));
    assert!(
        g1 > g2 && g2 > g4,
        "gaps not decaying: {} {} {}",
        g1,
        g2,
        g4
    );
    let rate_12 = (g1 / g2).ln();
    let rate_24 = (g2 / g4).ln() / 2.0;
    for rate in [rate_12, rate_24] {
        assert!(
            (2.5..=3.6).contains(&rate),
            "decay rate {} off the length-3 return path (gaps {} {} {})",
            rate,
            g1,
            g2,
            g4
        );
    }
}

/// The two error tables of the harness move together: resolvent errors and
/// semigroup sup errors are rank-correlated along the ladder.
#[test]
fn resolvent_and_semigroup_errors_co_decay() {
    let exp = TkExperiment::ladder(
        5,
        7,
        64,
        vec![0.0, 1.0, 2.0, 3.0, 5.0],
        vec![Complex64::new(2.0, 0.0)],
        42,
    )
    .unwrap();
    let resolvent = tk1_resolvent_errors(&exp).unwrap();
    let semigroup = tk1_semigroup_errors(&exp).unwrap();
    for probe in exp.probes() {
        let res_errors: Vec<f64> = exp
            .compare_indices()
            .iter()
            .map(|&n| {
                resolvent
                    .rows
                    .iter()
                    .find(|r| r.n == n && r.probe == probe.id)
                    .unwrap()
                    .error
            })
            .collect();
        let sem_sups: Vec<f64> = exp
            .compare_indices()
            .iter()
            .map(|&n| {
                semigroup
                    .semigroup_sup
                    .iter()
                    .find(|s| s.n == n && s.probe == probe.id)
                    .unwrap()
                    .sup_error
            })
            .collect();
        let rho = spearman_rank_correlation(&res_errors, &sem_sups);
        assert!(
            rho > 0.9,
            "rank correlation {} for probe {}: {:?} vs {:?}",
            rho,
            probe.id,
            res_errors,
            sem_sups
        );
    }
}

/// Uniform-on-bounded-intervals readout: the sup over the time grid is
/// attained, finite, and vanishes once the compared member contains the
/// reach of the data within the horizon.
#[test]
fn sup_errors_attained_and_finite() {
    let exp = TkExperiment::ladder(5, 8, 64, vec![0.0, 0.5, 1.0, 2.0, 3.0], vec![], 42).unwrap();
    let report = tk1_semigroup_errors(&exp).unwrap();
    assert!(report.is_finite());
    for sup in &report.semigroup_sup {
        let max_row = report
            .rows
            .iter()
            .filter(|r| r.n == sup.n && r.probe == sup.probe)
            .map(|r| r.error)
            .fold(0.0f64, f64::max);
        assert_eq!(sup.sup_error, max_row);
        // Horizon 3 with data on the first member: contained for n >= 4.
        if sup.n >= 4 {
            assert!(sup.sup_error <= 1e-12, "n = {}: {}", sup.n, sup.sup_error);
        }
    }
    // Time-zero rows measure exactly the outside mass, zero for these probes.
    for row in &report.rows {
        if row.param == ParamValue::Time(0.0) {
            assert!(row.error <= 1e-15);
        }
    }
}
