//! Neighbor graph construction, pruning to proper neighbors and the OSC verdict.
//!
//! Vertices are lattice isometries `h = f_𝐣⁻¹ f_𝐤`. An edge labeled `(j, k)`
//! runs from `h` to `f_j⁻¹ h f_k`; the virtual root `id` has an initial edge
//! `(j, k)` to every `f_j⁻¹ f_k`. Because all neighbor maps lie in the discrete
//! symmetry group of the lattice, the open set condition holds exactly when
//! the identity is never generated.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Ifs, Isometry};

pub const DEFAULT_MAX_CANDIDATES: usize = 250_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("neighbor graph exceeded the candidate ceiling ({count} > {limit})")]
    ComplexityExceeded { count: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OscVerdict {
    Satisfied,
    Violated,
}

impl OscVerdict {
    pub fn is_satisfied(self) -> bool {
        self == OscVerdict::Satisfied
    }
}

#[derive(Debug, Clone)]
pub struct GraphConfig {
    /// Squared-norm bound on translation parts; defaults to `(2R)²`.
    pub bound_norm: Option<i64>,
    pub max_candidates: usize,
    /// Stop building as soon as the identity shows up.
    pub stop_on_identity: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            bound_norm: None,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            stop_on_identity: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub j: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InitialEdge {
    pub j: usize,
    pub k: usize,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub struct NeighborGraph {
    m: usize,
    vertices: Vec<Isometry>,
    index: HashMap<Isometry, usize>,
    /// Sorted by `(from, j, k)`; `out_start` is the CSR offset table.
    edges: Vec<Edge>,
    out_start: Vec<usize>,
    initial: Vec<InitialEdge>,
    proper: Vec<bool>,
    pruned: bool,
    complete: bool,
    candidate_count: usize,
    verdict: OscVerdict,
    witness: Option<Vec<(usize, usize)>>,
}

impl NeighborGraph {
    pub fn num_maps(&self) -> usize {
        self.m
    }

    pub fn vertices(&self) -> &[Isometry] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: usize) -> &[Edge] {
        &self.edges[self.out_start[v]..self.out_start[v + 1]]
    }

    pub fn initial_edges(&self) -> &[InitialEdge] {
        &self.initial
    }

    pub fn index_of(&self, h: &Isometry) -> Option<usize> {
        self.index.get(h).copied()
    }

    pub fn is_proper(&self, v: usize) -> bool {
        self.proper[v]
    }

    /// Proper vertices in canonical order.
    pub fn proper_set(&self) -> Vec<Isometry> {
        self.vertices
            .iter()
            .zip(&self.proper)
            .filter(|(_, &p)| p)
            .map(|(h, _)| *h)
            .collect()
    }

    pub fn proper_count(&self) -> usize {
        self.proper.iter().filter(|&&p| p).count()
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned
    }

    /// `false` when building stopped early at the identity.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Number of vertices generated before pruning.
    pub fn candidate_count(&self) -> usize {
        self.candidate_count
    }

    pub fn verdict(&self) -> OscVerdict {
        self.verdict
    }

    /// Label path from the root to the identity, when the OSC fails.
    pub fn identity_witness(&self) -> Option<&[(usize, usize)]> {
        self.witness.as_deref()
    }

    /// Keeps only vertices from which a directed cycle is reachable.
    pub fn prune_to_proper(&self) -> NeighborGraph {
        let keep: Vec<usize> = (0..self.vertices.len()).filter(|&v| self.proper[v]).collect();
        let mut remap = vec![usize::MAX; self.vertices.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let vertices: Vec<Isometry> = keep.iter().map(|&v| self.vertices[v]).collect();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| self.proper[e.from] && self.proper[e.to])
            .map(|e| Edge {
                from: remap[e.from],
                to: remap[e.to],
                j: e.j,
                k: e.k,
            })
            .collect();
        let initial = self
            .initial
            .iter()
            .filter(|e| self.proper[e.to])
            .map(|e| InitialEdge {
                j: e.j,
                k: e.k,
                to: remap[e.to],
            })
            .collect();
        let mut g = NeighborGraph {
            m: self.m,
            index: vertices.iter().enumerate().map(|(i, h)| (*h, i)).collect(),
            proper: vec![true; vertices.len()],
            vertices,
            out_start: Vec::new(),
            edges,
            initial,
            pruned: true,
            complete: self.complete,
            candidate_count: self.candidate_count,
            verdict: self.verdict,
            witness: self.witness.clone(),
        };
        g.rebuild_offsets();
        g
    }

    fn rebuild_offsets(&mut self) {
        self.edges.sort_unstable_by_key(|e| (e.from, e.j, e.k, e.to));
        let mut out_start = vec![0usize; self.vertices.len() + 1];
        for e in &self.edges {
            out_start[e.from + 1] += 1;
        }
        for i in 0..self.vertices.len() {
            out_start[i + 1] += out_start[i];
        }
        self.out_start = out_start;
    }

    /// Graphviz rendering; the virtual root is the node `"id"`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph neighbors {\n  \"id\" [shape=point];\n");
        for (v, h) in self.vertices.iter().enumerate() {
            let style = if self.proper[v] { "" } else { ", style=dashed" };
            let _ = writeln!(s, "  \"{h}\" [shape=ellipse{style}];");
        }
        for e in &self.initial {
            let _ = writeln!(
                s,
                "  \"id\" -> \"{}\" [label=\"{},{}\"];",
                self.vertices[e.to], e.j, e.k
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [label=\"{},{}\"];",
                self.vertices[e.from], self.vertices[e.to], e.j, e.k
            );
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            nodes: self
                .vertices
                .iter()
                .zip(&self.proper)
                .map(|(h, &proper)| GraphNodeJson {
                    q: h.u.power(),
                    re: h.w.re,
                    im: h.w.im,
                    proper,
                })
                .collect(),
            edges: self.edges.clone(),
            initial: self.initial.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNodeJson {
    pub q: u8,
    pub re: i64,
    pub im: i64,
    pub proper: bool,
}

/// JSON export `{nodes, edges, initial}`; edge endpoints index into `nodes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<GraphNodeJson>,
    pub edges: Vec<Edge>,
    pub initial: Vec<InitialEdge>,
}

/// Breadth-first closure of the initial neighbor maps under all transitions,
/// discarding maps whose translation part leaves the norm bound.
pub fn build_candidate_graph(ifs: &Ifs, cfg: &GraphConfig) -> Result<NeighborGraph, GraphError> {
    let m = ifs.len();
    let bound = cfg
        .bound_norm
        .unwrap_or_else(|| ifs.bounding_radius_sq().checked_mul(4).expect("bound overflow"));

    let mut found: Vec<Isometry> = Vec::new();
    // parent vertex (None for the root) and the label used to reach it
    let mut parent: Vec<(Option<usize>, (usize, usize))> = Vec::new();
    let mut index: HashMap<Isometry, usize> = HashMap::new();
    let mut raw_edges: Vec<Edge> = Vec::new();
    let mut raw_initial: Vec<InitialEdge> = Vec::new();
    let mut queue = VecDeque::new();
    let mut identity_at: Option<usize> = None;

    let mut discover = |h: Isometry,
                        from: Option<usize>,
                        label: (usize, usize),
                        found: &mut Vec<Isometry>,
                        parent: &mut Vec<(Option<usize>, (usize, usize))>,
                        queue: &mut VecDeque<usize>|
     -> Result<Option<usize>, GraphError> {
        if h.w.norm() > bound {
            return Ok(None);
        }
        if let Some(&i) = index.get(&h) {
            return Ok(Some(i));
        }
        let i = found.len();
        if i >= cfg.max_candidates {
            return Err(GraphError::ComplexityExceeded {
                count: i + 1,
                limit: cfg.max_candidates,
            });
        }
        found.push(h);
        parent.push((from, label));
        index.insert(h, i);
        queue.push_back(i);
        Ok(Some(i))
    };

    for (j, k, h) in ifs.initial_neighbors() {
        if let Some(to) = discover(h, None, (j, k), &mut found, &mut parent, &mut queue)? {
            raw_initial.push(InitialEdge { j, k, to });
            if h.is_identity() && identity_at.is_none() {
                identity_at = Some(to);
            }
        }
    }

    let mut complete = true;
    while let Some(v) = queue.pop_front() {
        if identity_at.is_some() && cfg.stop_on_identity {
            complete = false;
            break;
        }
        let h = found[v];
        for j in 0..m {
            for k in 0..m {
                let next = ifs.neighbor_transition(&h, j, k);
                if let Some(to) =
                    discover(next, Some(v), (j, k), &mut found, &mut parent, &mut queue)?
                {
                    raw_edges.push(Edge { from: v, to, j, k });
                    if next.is_identity() && identity_at.is_none() {
                        identity_at = Some(to);
                    }
                }
            }
        }
    }

    let witness = identity_at.map(|mut v| {
        let mut path = Vec::new();
        loop {
            let (from, label) = parent[v];
            path.push(label);
            match from {
                Some(p) => v = p,
                None => break,
            }
        }
        path.reverse();
        path
    });

    // canonical vertex order
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_unstable_by_key(|&i| found[i]);
    let mut remap = vec![0usize; found.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let vertices: Vec<Isometry> = order.iter().map(|&i| found[i]).collect();
    let edges = raw_edges
        .into_iter()
        .map(|e| Edge {
            from: remap[e.from],
            to: remap[e.to],
            ..e
        })
        .collect();
    let initial = raw_initial
        .into_iter()
        .map(|e| InitialEdge {
            to: remap[e.to],
            ..e
        })
        .collect();

    let mut g = NeighborGraph {
        m,
        index: vertices.iter().enumerate().map(|(i, h)| (*h, i)).collect(),
        proper: Vec::new(),
        candidate_count: vertices.len(),
        vertices,
        edges,
        out_start: Vec::new(),
        initial,
        pruned: false,
        complete,
        verdict: if witness.is_some() {
            OscVerdict::Violated
        } else {
            OscVerdict::Satisfied
        },
        witness,
    };
    g.rebuild_offsets();
    g.proper = cycle_reachable(&g);
    Ok(g)
}

/// Marks vertices with a directed cycle reachable, by repeatedly peeling off
/// vertices whose successors have all been removed.
fn cycle_reachable(g: &NeighborGraph) -> Vec<bool> {
    let n = g.vertices.len();
    let mut out_degree: Vec<usize> = (0..n).map(|v| g.out_edges(v).len()).collect();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &g.edges {
        preds[e.to].push(e.from);
    }
    let mut alive = vec![true; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| out_degree[v] == 0).collect();
    while let Some(v) = queue.pop_front() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &p in &preds[v] {
            out_degree[p] -= 1;
            if out_degree[p] == 0 && alive[p] {
                queue.push_back(p);
            }
        }
    }
    alive
}

/// Candidate graph followed by pruning.
pub fn build_neighbor_graph(ifs: &Ifs, cfg: &GraphConfig) -> Result<NeighborGraph, GraphError> {
    Ok(build_candidate_graph(ifs, cfg)?.prune_to_proper())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OscReport {
    pub verdict: OscVerdict,
    pub identity_witness_path: Option<Vec<(usize, usize)>>,
    pub proper_count: usize,
    pub candidate_count: usize,
}

impl OscReport {
    pub fn from_graph(g: &NeighborGraph) -> Self {
        OscReport {
            verdict: g.verdict(),
            identity_witness_path: g.identity_witness().map(|w| w.to_vec()),
            proper_count: g.proper_count(),
            candidate_count: g.candidate_count(),
        }
    }
}

pub fn osc_check(ifs: &Ifs, cfg: &GraphConfig) -> Result<OscReport, GraphError> {
    let g = build_candidate_graph(ifs, cfg)?;
    Ok(OscReport::from_graph(&g))
}

/// Follows a label path from the identity via neighbor transitions.
pub fn replay_path(ifs: &Ifs, path: &[(usize, usize)]) -> Isometry {
    path.iter().fold(Isometry::IDENTITY, |h, &(j, k)| {
        ifs.neighbor_transition(&h, j, k)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{fixtures, GaussInt, Unit};

    fn iso(q: u8, re: i64, im: i64) -> Isometry {
        Isometry::new(Unit::from_power(q), GaussInt::new(re, im))
    }

    fn graph(s: &str) -> NeighborGraph {
        build_neighbor_graph(&s.parse().unwrap(), &GraphConfig::default()).unwrap()
    }

    #[test]
    fn interval_system_has_two_self_looped_translations() {
        let g = build_candidate_graph(&fixtures::INTERVAL.parse().unwrap(), &GraphConfig::default())
            .unwrap();
        assert_eq!(g.vertices(), &[iso(0, -8, 0), iso(0, 8, 0)]);
        assert_eq!(
            g.edges(),
            &[
                Edge { from: 0, to: 0, j: 0, k: 1 },
                Edge { from: 1, to: 1, j: 1, k: 0 }
            ]
        );
        assert_eq!(g.proper_count(), 2);
    }

    #[test]
    fn crossings_proper_set() {
        let g = graph(fixtures::CROSSINGS);
        let mut expected = vec![
            iso(0, -2, -1),
            iso(0, 2, 1),
            iso(3, 0, -1),
            iso(1, -1, 0),
            iso(3, -1, 1),
            iso(1, 1, 1),
            iso(2, 1, 0),
        ];
        expected.sort();
        assert_eq!(g.proper_set(), expected);
        assert_eq!(g.verdict(), OscVerdict::Satisfied);
        let s = iso(2, 1, 0);
        assert_eq!(s.inverse(), s);
    }

    #[test]
    fn gasket_proper_set() {
        let g = graph(fixtures::GASKET);
        let mut expected: Vec<Isometry> = [(2, 0), (-2, 0), (0, 2), (0, -2), (2, -2), (-2, 2)]
            .iter()
            .map(|&(a, b)| iso(0, a, b))
            .collect();
        expected.sort();
        assert_eq!(g.proper_set(), expected);
    }

    #[test]
    fn disjoint_pieces_have_no_proper_neighbors() {
        let g = graph("3,2,0;1,0,-2;3,0,1");
        assert_eq!(g.proper_count(), 0);
        assert_eq!(g.verdict(), OscVerdict::Satisfied);
        let dot = g.to_dot();
        assert_eq!(dot, "digraph neighbors {\n  \"id\" [shape=point];\n}\n");
    }

    #[test]
    fn identical_maps_violate_with_witness() {
        let sys: Ifs = "0,0,0;0,0,0;0,1,1".parse().unwrap();
        let report = osc_check(&sys, &GraphConfig::default()).unwrap();
        assert_eq!(report.verdict, OscVerdict::Violated);
        let path = report.identity_witness_path.unwrap();
        assert_eq!(path, vec![(0, 1)]);
        assert!(replay_path(&sys, &path).is_identity());
    }

    #[test]
    fn early_exit_keeps_verdict() {
        let sys: Ifs = "0,0,0;0,0,0;0,1,1".parse().unwrap();
        let cfg = GraphConfig {
            stop_on_identity: true,
            ..GraphConfig::default()
        };
        let g = build_candidate_graph(&sys, &cfg).unwrap();
        assert!(!g.is_complete());
        assert_eq!(g.verdict(), OscVerdict::Violated);
    }

    #[test]
    fn ceiling_is_enforced() {
        let cfg = GraphConfig {
            max_candidates: 3,
            ..GraphConfig::default()
        };
        let err = build_candidate_graph(&fixtures::CROSSINGS.parse().unwrap(), &cfg).unwrap_err();
        assert!(matches!(err, GraphError::ComplexityExceeded { limit: 3, .. }));
    }

    #[test]
    fn crossings_dot_has_translation_cycle() {
        let dot = graph(fixtures::CROSSINGS).to_dot();
        assert!(dot.contains("\"z-2-i\" -> \"z+2+i\" [label=\"1,2\"];"));
        assert!(dot.contains("\"z+2+i\" -> \"z-2-i\" [label=\"2,1\"];"));
        assert!(dot.contains("\"id\" -> \"-iz-i\" [label=\"0,1\"];"));
        assert_eq!(dot.matches("[shape=ellipse]").count(), 7);
    }

    #[test]
    fn gasket_dot_self_loops() {
        let g = graph(fixtures::GASKET);
        assert_eq!(g.edges().len(), 6);
        assert!(g.edges().iter().all(|e| e.from == e.to));
        let json = g.to_json();
        assert_eq!(json.nodes.len(), 6);
        assert_eq!(json.initial.len(), 6);
    }
}
