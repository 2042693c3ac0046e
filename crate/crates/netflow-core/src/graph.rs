//! Finite simple directed graphs, homomorphisms, growing sequences, and
//! direct limits.
//!
//! Vertices and edges are identified by their position in the defining
//! lists; the edge index is the edge's identity everywhere else in the
//! crate (matrices, edge functions). Indices are 0-based internally and
//! rendered 1-based in messages, matching the file formats.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Finite directed graph with stable vertex and edge indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

/// A violation of the simple-graph invariants, reported as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphViolation {
    /// Edge whose tail and head coincide.
    Loop { edge: usize, vertex: usize },
    /// Two edges with the same (tail, head) pair.
    ParallelEdge { first: usize, second: usize },
    /// Edge endpoint outside `0..vertex_count`.
    VertexOutOfRange { edge: usize, vertex: usize },
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GraphViolation::Loop { edge, vertex } => {
                write!(f, "loop at v{} (edge e{})", vertex + 1, edge + 1)
            }
            GraphViolation::ParallelEdge { first, second } => {
                write!(
                    f,
                    "parallel edge: e{} duplicates e{}",
                    second + 1,
                    first + 1
                )
            }
            GraphViolation::VertexOutOfRange { edge, vertex } => {
                write!(
                    f,
                    "edge e{} references missing vertex v{}",
                    edge + 1,
                    vertex + 1
                )
            }
        }
    }
}

/// Error wrapper for call sites that require a valid graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidGraph {
    pub violations: Vec<GraphViolation>,
}

impl fmt::Display for InvalidGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid graph:")?;
        for v in &self.violations {
            write!(f, " {};", v)?;
        }
        Ok(())
    }
}

impl DirectedGraph {
    /// Creates a graph without validating it; call [`DirectedGraph::validate`]
    /// (or inspect [`DirectedGraph::violations`]) before structural use.
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Self {
        Self {
            vertex_count,
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn tail(&self, edge: usize) -> usize {
        self.edges[edge].0
    }

    pub fn head(&self, edge: usize) -> usize {
        self.edges[edge].1
    }

    /// All invariant violations; empty means the graph is simple and well formed.
    pub fn violations(&self) -> Vec<GraphViolation> {
        let mut out = Vec::new();
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (j, &(t, h)) in self.edges.iter().enumerate() {
            if t >= self.vertex_count {
                out.push(GraphViolation::VertexOutOfRange { edge: j, vertex: t });
            }
            if h >= self.vertex_count {
                out.push(GraphViolation::VertexOutOfRange { edge: j, vertex: h });
            }
            if t == h {
                out.push(GraphViolation::Loop { edge: j, vertex: t });
                continue;
            }
            match seen.get(&(t, h)) {
                Some(&first) => out.push(GraphViolation::ParallelEdge { first, second: j }),
                None => {
                    seen.insert((t, h), j);
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn validate(&self) -> Result<(), InvalidGraph> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(InvalidGraph { violations })
        }
    }

    pub fn out_degree(&self, vertex: usize) -> usize {
        self.edges.iter().filter(|&&(t, _)| t == vertex).count()
    }

    /// Uniform local finiteness bound: the largest outgoing-edge count.
    pub fn max_out_degree(&self) -> usize {
        let mut counts = vec![0usize; self.vertex_count];
        for &(t, _) in &self.edges {
            if t < self.vertex_count {
                counts[t] += 1;
            }
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn out_edges(&self, vertex: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |&(_, &(t, _))| t == vertex)
            .map(|(j, _)| j)
    }

    pub fn in_edges(&self, vertex: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |&(_, &(_, h))| h == vertex)
            .map(|(j, _)| j)
    }

    /// Lookup table (tail, head) -> edge index. Unique on simple graphs.
    pub fn edge_lookup(&self) -> BTreeMap<(usize, usize), usize> {
        self.edges
            .iter()
            .enumerate()
            .map(|(j, &e)| (e, j))
            .collect()
    }
}

/// Malformed homomorphism input (distinct from a violation, which is data).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HomomorphismError {
    VertexMapLength { expected: usize, got: usize },
    VertexOutOfRange { source_vertex: usize, image: usize },
}

impl fmt::Display for HomomorphismError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            HomomorphismError::VertexMapLength { expected, got } => write!(
                f,
                "vertex map has length {}, source graph has {} vertices",
                got, expected
            ),
            HomomorphismError::VertexOutOfRange {
                source_vertex,
                image,
            } => write!(
                f,
                "vertex map sends v{} to missing target vertex v{}",
                source_vertex + 1,
                image + 1
            ),
        }
    }
}

/// Edge-preservation violation of a vertex map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeNotPreserved {
    pub edge: usize,
    pub image: (usize, usize),
}

impl fmt::Display for EdgeNotPreserved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "image of e{} is (v{}, v{}), not an edge of the target",
            self.edge + 1,
            self.image.0 + 1,
            self.image.1 + 1
        )
    }
}

/// Outcome of checking a vertex map between two graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomomorphismReport {
    pub injective: bool,
    pub violations: Vec<EdgeNotPreserved>,
    /// Present exactly when there are no violations; maps source edge index
    /// to the unique target edge carrying the image pair.
    pub edge_map: Option<Vec<usize>>,
}

impl HomomorphismReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Vertex map between two graphs; the edge map is derived, never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphHomomorphism {
    pub source: DirectedGraph,
    pub target: DirectedGraph,
    pub vertex_map: Vec<usize>,
}

impl GraphHomomorphism {
    pub fn new(
        source: DirectedGraph,
        target: DirectedGraph,
        vertex_map: Vec<usize>,
    ) -> Result<Self, HomomorphismError> {
        if vertex_map.len() != source.vertex_count() {
            return Err(HomomorphismError::VertexMapLength {
                expected: source.vertex_count(),
                got: vertex_map.len(),
            });
        }
        for (v, &img) in vertex_map.iter().enumerate() {
            if img >= target.vertex_count() {
                return Err(HomomorphismError::VertexOutOfRange {
                    source_vertex: v,
                    image: img,
                });
            }
        }
        Ok(Self {
            source,
            target,
            vertex_map,
        })
    }

    pub fn identity(g: &DirectedGraph) -> Self {
        Self {
            source: g.clone(),
            target: g.clone(),
            vertex_map: (0..g.vertex_count()).collect(),
        }
    }

    /// Checks edge preservation, reports injectivity, and derives the edge map.
    pub fn check(&self) -> HomomorphismReport {
        let lookup = self.target.edge_lookup();
        let mut violations = Vec::new();
        let mut edge_map = Vec::with_capacity(self.source.edge_count());
        for (j, &(t, h)) in self.source.edges().iter().enumerate() {
            let image = (self.vertex_map[t], self.vertex_map[h]);
            match lookup.get(&image) {
                Some(&k) => edge_map.push(k),
                None => violations.push(EdgeNotPreserved { edge: j, image }),
            }
        }
        let distinct: BTreeSet<usize> = self.vertex_map.iter().copied().collect();
        let injective = distinct.len() == self.vertex_map.len();
        HomomorphismReport {
            injective,
            edge_map: violations.is_empty().then_some(edge_map),
            violations,
        }
    }

    pub fn is_injective(&self) -> bool {
        self.check().injective
    }

    /// Derived edge map; `None` when the map is not a homomorphism.
    pub fn edge_map(&self) -> Option<Vec<usize>> {
        self.check().edge_map
    }

    /// Composition `outer ∘ self`; requires `self.target == outer.source`.
    pub fn then(&self, outer: &GraphHomomorphism) -> Option<GraphHomomorphism> {
        if self.target != outer.source {
            return None;
        }
        let vertex_map = self
            .vertex_map
            .iter()
            .map(|&v| outer.vertex_map[v])
            .collect();
        Some(GraphHomomorphism {
            source: self.source.clone(),
            target: outer.target.clone(),
            vertex_map,
        })
    }
}

/// Errors raised by sequence construction and the direct limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceError {
    Empty,
    LinkCountMismatch { graphs: usize, links: usize },
    LinkEndpointMismatch { index: usize },
    InvalidGraph { index: usize, details: InvalidGraph },
    LinkNotHomomorphism { index: usize, details: String },
    NonInjectiveLink { index: usize },
}

impl fmt::Display for SequenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceError::Empty => write!(f, "sequence must contain at least one graph"),
            SequenceError::LinkCountMismatch { graphs, links } => write!(
                f,
                "{} graphs need {} links, got {}",
                graphs,
                graphs - 1,
                links
            ),
            SequenceError::LinkEndpointMismatch { index } => write!(
                f,
                "link {} does not connect consecutive graphs of the sequence",
                index + 1
            ),
            SequenceError::InvalidGraph { index, details } => {
                write!(f, "graph {} is invalid: {}", index + 1, details)
            }
            SequenceError::LinkNotHomomorphism { index, details } => {
                write!(f, "link {} is not a homomorphism: {}", index + 1, details)
            }
            SequenceError::NonInjectiveLink { index } => write!(
                f,
                "link {} is not injective; growing sequences require subgraph inclusions",
                index + 1
            ),
        }
    }
}

/// A growing sequence of graphs linked by injective homomorphisms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSequence {
    graphs: Vec<DirectedGraph>,
    links: Vec<GraphHomomorphism>,
}

impl GraphSequence {
    pub fn new(
        graphs: Vec<DirectedGraph>,
        links: Vec<GraphHomomorphism>,
    ) -> Result<Self, SequenceError> {
        if graphs.is_empty() {
            return Err(SequenceError::Empty);
        }
        if links.len() + 1 != graphs.len() {
            return Err(SequenceError::LinkCountMismatch {
                graphs: graphs.len(),
                links: links.len(),
            });
        }
        for (n, link) in links.iter().enumerate() {
            if link.source != graphs[n] || link.target != graphs[n + 1] {
                return Err(SequenceError::LinkEndpointMismatch { index: n });
            }
        }
        Ok(Self { graphs, links })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graph(&self, n: usize) -> &DirectedGraph {
        &self.graphs[n]
    }

    pub fn graphs(&self) -> &[DirectedGraph] {
        &self.graphs
    }

    pub fn link(&self, n: usize) -> &GraphHomomorphism {
        &self.links[n]
    }

    /// Full validation: every graph simple, every link an injective homomorphism.
    pub fn validate(&self) -> Result<(), SequenceError> {
        for (n, g) in self.graphs.iter().enumerate() {
            g.validate()
                .map_err(|details| SequenceError::InvalidGraph { index: n, details })?;
        }
        for (n, link) in self.links.iter().enumerate() {
            let report = link.check();
            if !report.is_ok() {
                let details = report
                    .violations
                    .iter()
                    .map(|v| format!("{}", v))
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(SequenceError::LinkNotHomomorphism { index: n, details });
            }
            if !report.injective {
                return Err(SequenceError::NonInjectiveLink { index: n });
            }
        }
        Ok(())
    }

    /// Composite inclusion `G_from -> G_to` obtained by chaining links.
    pub fn inclusion(&self, from: usize, to: usize) -> Option<GraphHomomorphism> {
        if from > to || to >= self.graphs.len() {
            return None;
        }
        let mut hom = GraphHomomorphism::identity(&self.graphs[from]);
        for n in from..to {
            hom = hom.then(&self.links[n])?;
        }
        Some(hom)
    }

    /// Largest outgoing-degree bound per graph, for local-finiteness reporting.
    pub fn out_degree_bounds(&self) -> Vec<usize> {
        self.graphs
            .iter()
            .map(DirectedGraph::max_out_degree)
            .collect()
    }
}

/// The amalgamated union of a finite growing sequence together with the
/// canonical injections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectLimit {
    pub graph: DirectedGraph,
    /// `injections[n]` maps `G_n` into the limit; consecutive injections
    /// commute with the sequence links exactly.
    pub injections: Vec<GraphHomomorphism>,
    /// Local-finiteness bound of the limit, reported rather than enforced.
    pub max_out_degree: usize,
}

/// Union-find over the disjoint union of all vertex sets.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Attach the later-discovered root below the earlier one so the
            // earliest occurrence names the class.
            if ra < rb {
                self.parent[rb] = ra;
            } else {
                self.parent[ra] = rb;
            }
        }
    }
}

/// Computes the direct limit of a finite growing sequence.
///
/// Vertices related by the links are identified with a union-find; fresh
/// vertices and edges receive the next free index in discovery order, so a
/// plain inclusion chain reproduces its last graph index-for-index.
pub fn direct_limit(seq: &GraphSequence) -> Result<DirectLimit, SequenceError> {
    seq.validate()?;

    let offsets: Vec<usize> = seq
        .graphs()
        .iter()
        .scan(0usize, |acc, g| {
            let start = *acc;
            *acc += g.vertex_count();
            Some(start)
        })
        .collect();
    let total: usize = seq.graphs().iter().map(DirectedGraph::vertex_count).sum();

    let mut uf = UnionFind::new(total);
    for (n, link) in (0..seq.len().saturating_sub(1)).map(|n| (n, seq.link(n))) {
        for (v, &img) in link.vertex_map.iter().enumerate() {
            uf.union(offsets[n] + v, offsets[n + 1] + img);
        }
    }

    // Assign limit indices to representative classes in discovery order.
    let mut limit_index: BTreeMap<usize, usize> = BTreeMap::new();
    let mut vertex_maps: Vec<Vec<usize>> = Vec::with_capacity(seq.len());
    for (n, g) in seq.graphs().iter().enumerate() {
        let mut map = Vec::with_capacity(g.vertex_count());
        for v in 0..g.vertex_count() {
            let root = uf.find(offsets[n] + v);
            let next = limit_index.len();
            let idx = *limit_index.entry(root).or_insert(next);
            map.push(idx);
        }
        vertex_maps.push(map);
    }
    let limit_vertices = limit_index.len();

    let mut limit_edges: Vec<(usize, usize)> = Vec::new();
    let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (n, g) in seq.graphs().iter().enumerate() {
        for &(t, h) in g.edges() {
            let e = (vertex_maps[n][t], vertex_maps[n][h]);
            if edge_set.insert(e) {
                limit_edges.push(e);
            }
        }
    }

    let graph = DirectedGraph::new(limit_vertices, limit_edges);
    debug_assert!(graph.is_valid());

    let injections: Vec<GraphHomomorphism> = seq
        .graphs()
        .iter()
        .zip(vertex_maps)
        .map(|(g, vertex_map)| GraphHomomorphism {
            source: g.clone(),
            target: graph.clone(),
            vertex_map,
        })
        .collect();

    // The construction guarantees the commuting triangles; keep the check as
    // a cheap internal consistency assertion.
    for n in 0..seq.len().saturating_sub(1) {
        let composed = seq.link(n).then(&injections[n + 1]);
        debug_assert_eq!(
            composed.as_ref().map(|h| &h.vertex_map),
            Some(&injections[n].vertex_map)
        );
    }

    let max_out_degree = graph.max_out_degree();
    Ok(DirectLimit {
        graph,
        injections,
        max_out_degree,
    })
}

/// The growing ladder family.
///
/// The first two members are a 4-cycle with a chord and its extension by one
/// cell; each further step appends two vertices `a`, `b` and the four edges
/// `(top, a)`, `(a, b)`, `(b, bottom)`, `(a, bottom)`, where `(top, bottom)`
/// is the previous cell's right-hand vertex pair, starting from `(v2, v3)`.
pub fn ladder_sequence(n_max: usize) -> GraphSequence {
    assert!(n_max >= 1, "ladder sequence needs at least one member");
    let mut graphs = Vec::with_capacity(n_max);
    let mut edges = vec![(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)];
    let mut vertex_count = 4;
    let (mut top, mut bottom) = (1usize, 2usize);
    graphs.push(DirectedGraph::new(vertex_count, edges.clone()));
    for _ in 1..n_max {
        let a = vertex_count;
        let b = vertex_count + 1;
        vertex_count += 2;
        edges.extend_from_slice(&[(top, a), (a, b), (b, bottom), (a, bottom)]);
        top = a;
        bottom = b;
        graphs.push(DirectedGraph::new(vertex_count, edges.clone()));
    }
    let links = graphs
        .windows(2)
        .map(|pair| GraphHomomorphism {
            source: pair[0].clone(),
            target: pair[1].clone(),
            vertex_map: (0..pair[0].vertex_count()).collect(),
        })
        .collect();
    GraphSequence::new(graphs, links).expect("ladder construction is structurally sound")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ladder_g1() -> DirectedGraph {
        DirectedGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)])
    }

    pub(crate) fn ladder_g2() -> DirectedGraph {
        DirectedGraph::new(
            6,
            vec![
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 0),
                (1, 3),
                (1, 4),
                (4, 5),
                (5, 2),
                (4, 2),
            ],
        )
    }

    #[test]
    fn g1_is_valid() {
        assert!(ladder_g1().validate().is_ok());
    }

    #[test]
    fn loop_is_reported() {
        let g = DirectedGraph::new(2, vec![(0, 0)]);
        assert_eq!(
            g.violations(),
            vec![GraphViolation::Loop { edge: 0, vertex: 0 }]
        );
    }

    #[test]
    fn parallel_edge_is_reported() {
        let g = DirectedGraph::new(2, vec![(0, 1), (0, 1)]);
        assert_eq!(
            g.violations(),
            vec![GraphViolation::ParallelEdge {
                first: 0,
                second: 1
            }]
        );
    }

    #[test]
    fn out_of_range_is_reported() {
        let g = DirectedGraph::new(2, vec![(0, 2)]);
        assert_eq!(
            g.violations(),
            vec![GraphViolation::VertexOutOfRange { edge: 0, vertex: 2 }]
        );
    }

    #[test]
    fn identity_hom_checks_out() {
        let g = ladder_g1();
        let id = GraphHomomorphism::identity(&g);
        let report = id.check();
        assert!(report.is_ok());
        assert!(report.injective);
        assert_eq!(report.edge_map, Some(vec![0, 1, 2, 3, 4]));
    }

    #[test]
    fn inclusion_g1_into_g2() {
        let hom = GraphHomomorphism::new(ladder_g1(), ladder_g2(), vec![0, 1, 2, 3]).unwrap();
        let report = hom.check();
        assert!(report.is_ok());
        assert!(report.injective);
        assert_eq!(report.edge_map, Some(vec![0, 1, 2, 3, 4]));
    }

    #[test]
    fn vertex_swap_breaks_edge_preservation() {
        // v2 and v3 swapped: the image of e1 = (v1, v2) is (v1, v3).
        let g = ladder_g1();
        let hom = GraphHomomorphism::new(g.clone(), g, vec![0, 2, 1, 3]).unwrap();
        let report = hom.check();
        assert!(!report.is_ok());
        assert!(report.violations.contains(&EdgeNotPreserved {
            edge: 0,
            image: (0, 2)
        }));
        assert_eq!(report.edge_map, None);
    }

    #[test]
    fn malformed_vertex_map_is_an_error() {
        let g = ladder_g1();
        let err = GraphHomomorphism::new(g.clone(), g, vec![0, 1]).unwrap_err();
        assert_eq!(
            err,
            HomomorphismError::VertexMapLength {
                expected: 4,
                got: 2
            }
        );
    }

    #[test]
    fn limit_of_inclusion_pair_is_the_larger_graph() {
        let seq = ladder_sequence(2);
        let limit = direct_limit(&seq).unwrap();
        assert_eq!(limit.graph, ladder_g2());
        assert_eq!(limit.injections[0].vertex_map, vec![0, 1, 2, 3]);
        assert_eq!(limit.injections[1].vertex_map, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn limit_of_constant_sequence_is_the_graph() {
        let g = ladder_g1();
        let id = GraphHomomorphism::identity(&g);
        let seq = GraphSequence::new(vec![g.clone(), g.clone(), g.clone()], vec![id.clone(), id])
            .unwrap();
        let limit = direct_limit(&seq).unwrap();
        assert_eq!(limit.graph, g);
    }

    #[test]
    fn three_term_ladder_counts() {
        let seq = ladder_sequence(3);
        let limit = direct_limit(&seq).unwrap();
        assert_eq!(limit.graph.vertex_count(), 8);
        assert_eq!(limit.graph.edge_count(), 13);
        // New edges of the third cell, as 0-based pairs.
        assert_eq!(&limit.graph.edges()[9..], &[(4, 6), (6, 7), (7, 5), (6, 5)]);
    }

    #[test]
    fn ladder_members_match_hand_counts() {
        let seq = ladder_sequence(4);
        assert_eq!(seq.graph(0).vertex_count(), 4);
        assert_eq!(seq.graph(0).edge_count(), 5);
        assert_eq!(seq.graph(1), &ladder_g2());
        for (n, g) in seq.graphs().iter().enumerate() {
            assert_eq!(g.vertex_count(), 4 + 2 * n);
            assert_eq!(g.edge_count(), 5 + 4 * n);
            assert!(g.validate().is_ok());
        }
        seq.validate().unwrap();
    }

    #[test]
    fn limit_commutation_is_exact() {
        let seq = ladder_sequence(5);
        let limit = direct_limit(&seq).unwrap();
        for n in 0..seq.len() - 1 {
            let composed = seq.link(n).then(&limit.injections[n + 1]).unwrap();
            assert_eq!(composed.vertex_map, limit.injections[n].vertex_map);
        }
    }

    #[test]
    fn non_injective_link_is_rejected() {
        let g = ladder_g1();
        let collapse = GraphHomomorphism::new(g.clone(), g.clone(), vec![0, 1, 1, 3]);
        // (v1,v2)->(v1,v2) ok but (v2,v3)->(v2,v2) is a loop, so this map is
        // not even a homomorphism; build a genuinely non-injective one on a
        // graph where it works: two parallel paths collapsed.
        assert!(collapse.is_ok());
        let square = DirectedGraph::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        let hom = GraphHomomorphism::new(
            square.clone(),
            DirectedGraph::new(3, vec![(0, 1), (1, 2)]),
            vec![0, 1, 1, 2],
        )
        .unwrap();
        let report = hom.check();
        assert!(report.is_ok());
        assert!(!report.injective);
        let seq = GraphSequence::new(
            vec![square, DirectedGraph::new(3, vec![(0, 1), (1, 2)])],
            vec![hom],
        )
        .unwrap();
        assert_eq!(
            direct_limit(&seq).unwrap_err(),
            SequenceError::NonInjectiveLink { index: 0 }
        );
    }

    #[test]
    fn ladder_out_degree_bound_is_three() {
        let seq = ladder_sequence(6);
        assert!(seq.out_degree_bounds().iter().all(|&b| b <= 3));
        assert_eq!(direct_limit(&seq).unwrap().max_out_degree, 3);
    }

    /// Universality proxy: a commuting family into another cone object
    /// factors uniquely through the computed limit.
    #[test]
    fn universality_on_small_instance() {
        let seq = ladder_sequence(2);
        let limit = direct_limit(&seq).unwrap();

        // Cone: embed everything into G_3 of the ladder.
        let big = ladder_sequence(3);
        let cone0 = big.inclusion(0, 2).unwrap();
        let cone1 = big.inclusion(1, 2).unwrap();
        assert_eq!(
            seq.link(0).then(&cone1).unwrap().vertex_map,
            cone0.vertex_map
        );

        // alpha(psi_n(v)) := cone_n(v) must be well defined on all of the
        // limit; uniqueness holds because the injections cover the limit.
        let mut alpha = vec![None; limit.graph.vertex_count()];
        for (inj, cone) in limit.injections.iter().zip([&cone0, &cone1]) {
            for (v, &lv) in inj.vertex_map.iter().enumerate() {
                let image = cone.vertex_map[v];
                match alpha[lv] {
                    None => alpha[lv] = Some(image),
                    Some(existing) => assert_eq!(existing, image),
                }
            }
        }
        let alpha: Vec<usize> = alpha.into_iter().map(Option::unwrap).collect();
        let alpha_hom =
            GraphHomomorphism::new(limit.graph.clone(), big.graph(2).clone(), alpha).unwrap();
        assert!(alpha_hom.check().is_ok());
        for (inj, cone) in limit.injections.iter().zip([&cone0, &cone1]) {
            assert_eq!(inj.then(&alpha_hom).unwrap().vertex_map, cone.vertex_map);
        }
    }
}
