//! Neighborhood states: which proper neighbors surround a small piece `A_w`.
//!
//! The state of the empty word is the empty set. Appending symbol `j` keeps
//! the siblings `f_j⁻¹ f_k` and pushes every inherited neighbor `h` down to
//! `f_j⁻¹ h f_k`, intersected with the proper set. The neighborhoods proper
//! are the states in closed communicating classes of this transition system,
//! i.e. those that keep recurring under arbitrarily deep refinement.

use std::hash::Hash;

use rustc_hash::FxHashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NeighborGraph;
use crate::lattice::{Ifs, Isometry};
use crate::scc;

pub const DEFAULT_STATE_CEILING: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NeighborhoodError {
    #[error("neighborhood graph exceeded the state ceiling ({count} > {limit})")]
    ComplexityExceeded { count: usize, limit: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Bits(Box<[u64]>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0u64; n.div_ceil(64)].into_boxed_slice())
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

/// A set of proper neighbor maps, kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeighborhoodState {
    pub members: Vec<Isometry>,
}

impl NeighborhoodState {
    pub fn new(mut members: Vec<Isometry>) -> Self {
        members.sort();
        members.dedup();
        NeighborhoodState { members }
    }

    pub fn empty() -> Self {
        NeighborhoodState {
            members: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One refinement step computed directly from the IFS maps.
pub fn state_transition(
    state: &NeighborhoodState,
    j: usize,
    ifs: &Ifs,
    g: &NeighborGraph,
) -> NeighborhoodState {
    let m = ifs.len();
    let mut next = Vec::new();
    for k in 0..m {
        if k != j {
            next.push(ifs.neighbor_transition(&Isometry::IDENTITY, j, k));
        }
    }
    for h in &state.members {
        for k in 0..m {
            next.push(ifs.neighbor_transition(h, j, k));
        }
    }
    next.retain(|h| g.index_of(h).is_some_and(|v| g.is_proper(v)));
    NeighborhoodState::new(next)
}

#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    m: usize,
    vertices: Vec<Isometry>,
    states: Vec<Bits>,
    /// `transitions[s * m + j]`
    transitions: Vec<usize>,
    in_class: Vec<bool>,
    closed_classes: usize,
}

impl NeighborhoodGraph {
    pub const ROOT: usize = 0;

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition(&self, state: usize, j: usize) -> usize {
        self.transitions[state * self.m + j]
    }

    /// Follows a word of symbols from the root.
    pub fn follow(&self, word: &[usize]) -> usize {
        word.iter()
            .fold(Self::ROOT, |s, &j| self.transition(s, j))
    }

    pub fn state(&self, s: usize) -> NeighborhoodState {
        NeighborhoodState {
            members: self.states[s].iter().map(|v| self.vertices[v]).collect(),
        }
    }

    pub fn state_size(&self, s: usize) -> usize {
        self.states[s].count()
    }

    pub fn find_state(&self, state: &NeighborhoodState) -> Option<usize> {
        (0..self.states.len()).find(|&s| self.state(s) == *state)
    }

    pub fn is_neighborhood(&self, s: usize) -> bool {
        self.in_class[s]
    }

    pub fn neighborhood_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.states.len()).filter(|&s| self.in_class[s])
    }

    pub fn neighborhood_count(&self) -> usize {
        self.in_class.iter().filter(|&&c| c).count()
    }

    /// Largest neighborhood; the maximal number of neighbors at one piece.
    pub fn max_degree(&self) -> usize {
        self.neighborhood_states()
            .map(|s| self.state_size(s))
            .max()
            .unwrap_or(0)
    }

    /// `true` when the neighborhoods form a single closed class.
    pub fn is_irreducible(&self) -> bool {
        self.closed_classes == 1
    }

    pub fn closed_class_count(&self) -> usize {
        self.closed_classes
    }

    pub fn to_json(&self) -> NeighborhoodJson {
        NeighborhoodJson {
            states: (0..self.states.len())
                .map(|s| StateJson {
                    id: s,
                    members: self.state(s).members,
                    in_class: self.in_class[s],
                })
                .collect(),
            transitions: (0..self.states.len())
                .flat_map(|s| {
                    (0..self.m).map(move |j| TransitionJson {
                        from: s,
                        j,
                        to: self.transition(s, j),
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateJson {
    pub id: usize,
    pub members: Vec<Isometry>,
    pub in_class: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionJson {
    pub from: usize,
    pub j: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodJson {
    pub states: Vec<StateJson>,
    pub transitions: Vec<TransitionJson>,
}

/// Word storage for a state bitset; fixed arrays avoid a heap allocation
/// per state.
trait Words: Clone + Eq + Hash {
    fn zeroed() -> Self;
    fn words(&self) -> &[u64];
    fn words_mut(&mut self) -> &mut [u64];
}

impl<const W: usize> Words for [u64; W] {
    fn zeroed() -> Self {
        [0; W]
    }
    fn words(&self) -> &[u64] {
        self
    }
    fn words_mut(&mut self) -> &mut [u64] {
        self
    }
}

/// Breadth-first closure from the empty state; `transitions[s * m + j]` is
/// the successor of state `s` under symbol `j`.
fn explore<S: Words>(
    n: usize,
    initial: &[Vec<u32>],
    succ: &[Vec<u32>],
    m: usize,
    ceiling: usize,
) -> Result<(Vec<Bits>, Vec<usize>), NeighborhoodError> {
    let pad = |list: &Vec<u32>| {
        let mut w = S::zeroed();
        for &v in list {
            w.words_mut()[v as usize / 64] |= 1 << (v % 64);
        }
        w
    };
    let initial: Vec<S> = initial.iter().map(pad).collect();
    let succ: Vec<S> = succ.iter().map(pad).collect();
    let mut states = vec![S::zeroed()];
    let mut index: FxHashMap<S, usize> = FxHashMap::default();
    index.insert(states[0].clone(), 0);
    let mut transitions: Vec<usize> = Vec::new();
    let mut next: Vec<S> = initial.to_vec();
    let mut cursor = 0;
    while cursor < states.len() {
        next.clone_from_slice(&initial);
        // one pass over the members fills the successors for every symbol
        for (wi, &word) in states[cursor].words().iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let v = wi * 64 + word.trailing_zeros() as usize;
                word &= word - 1;
                for (j, acc) in next.iter_mut().enumerate() {
                    for (a, b) in acc.words_mut().iter_mut().zip(succ[v * m + j].words()) {
                        *a |= *b;
                    }
                }
            }
        }
        for acc in &next {
            let target = match index.get(acc) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    if t >= ceiling {
                        return Err(NeighborhoodError::ComplexityExceeded {
                            count: t + 1,
                            limit: ceiling,
                        });
                    }
                    index.insert(acc.clone(), t);
                    states.push(acc.clone());
                    t
                }
            };
            transitions.push(target);
        }
        cursor += 1;
    }
    let width = n.div_ceil(64);
    let states = states
        .iter()
        .map(|s| Bits(s.words()[..width].to_vec().into_boxed_slice()))
        .collect();
    Ok((states, transitions))
}

/// Fixed pseudo-random key per vertex; any fixed choice gives the same
/// states, the keys only spread fingerprints.
fn vertex_key(v: usize) -> u64 {
    let mut z = (v as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Same closure as [`explore`] with states as member lists identified by
/// an XOR fingerprint, checked exactly against the stored members; cheaper
/// than bitsets once the graph is large and states are sparse in it.
fn explore_sparse(
    n: usize,
    initial: &[Vec<u32>],
    succ: &[Vec<u32>],
    m: usize,
    ceiling: usize,
) -> Result<(Vec<Bits>, Vec<usize>), NeighborhoodError> {
    const NONE: u32 = u32::MAX;
    let keys: Vec<u64> = (0..n).map(vertex_key).collect();
    // state s is arena[offsets[s]..offsets[s + 1]], members in discovery order
    let mut arena: Vec<u32> = Vec::new();
    let mut offsets = vec![0usize, 0];
    // fingerprint -> first state with it; `chain` links states sharing one
    let mut first: FxHashMap<u64, u32> = FxHashMap::default();
    first.insert(0, 0);
    let mut chain: Vec<u32> = vec![NONE];
    let mut transitions: Vec<usize> = Vec::new();
    // stamp[v] == mark means v is already in the buffer for this (state, j)
    let mut stamp = vec![0u32; n];
    let mut mark = 0u32;
    let mut buf: Vec<u32> = Vec::new();
    let mut cursor = 0;
    while cursor + 1 < offsets.len() {
        for j in 0..m {
            mark += 1;
            buf.clear();
            let mut fp = 0u64;
            for &v in &initial[j] {
                stamp[v as usize] = mark;
                fp ^= keys[v as usize];
                buf.push(v);
            }
            for &h in &arena[offsets[cursor]..offsets[cursor + 1]] {
                for &v in &succ[h as usize * m + j] {
                    if stamp[v as usize] != mark {
                        stamp[v as usize] = mark;
                        fp ^= keys[v as usize];
                        buf.push(v);
                    }
                }
            }
            let same = |t: u32| {
                let stored = &arena[offsets[t as usize]..offsets[t as usize + 1]];
                stored.len() == buf.len() && stored.iter().all(|&v| stamp[v as usize] == mark)
            };
            let mut found = NONE;
            let head = first.get(&fp).copied();
            let mut t = head.unwrap_or(NONE);
            while t != NONE {
                if same(t) {
                    found = t;
                    break;
                }
                t = chain[t as usize];
            }
            if found == NONE {
                found = (offsets.len() - 1) as u32;
                if found as usize >= ceiling {
                    return Err(NeighborhoodError::ComplexityExceeded {
                        count: found as usize + 1,
                        limit: ceiling,
                    });
                }
                arena.extend_from_slice(&buf);
                offsets.push(arena.len());
                chain.push(head.unwrap_or(NONE));
                first.insert(fp, found);
            }
            transitions.push(found as usize);
        }
        cursor += 1;
        if mark > u32::MAX - 2 * m as u32 {
            stamp.fill(0);
            mark = 0;
        }
    }
    let states = offsets
        .windows(2)
        .map(|w| {
            let mut b = Bits::empty(n);
            for &v in &arena[w[0]..w[1]] {
                b.set(v as usize);
            }
            b
        })
        .collect();
    Ok((states, transitions))
}

/// Breadth-first closure of the refinement step from the empty state.
///
/// `g` must be the pruned neighbor graph of `ifs`.
pub fn build_neighborhood_graph(
    ifs: &Ifs,
    g: &NeighborGraph,
    ceiling: usize,
) -> Result<NeighborhoodGraph, NeighborhoodError> {
    let m = ifs.len();
    // dense indices over the proper vertices keep the bitsets short
    let mut dense = vec![usize::MAX; g.len()];
    let mut vertices = Vec::new();
    for v in (0..g.len()).filter(|&v| g.is_proper(v)) {
        dense[v] = vertices.len();
        vertices.push(g.vertices()[v]);
    }
    let n = vertices.len();
    let mut initial: Vec<Vec<u32>> = vec![Vec::new(); m];
    for e in g.initial_edges() {
        if g.is_proper(e.to) {
            initial[e.j].push(dense[e.to] as u32);
        }
    }
    // successor lists per (vertex, j)
    let mut succ: Vec<Vec<u32>> = vec![Vec::new(); n * m];
    for e in g.edges() {
        if g.is_proper(e.from) && g.is_proper(e.to) {
            succ[dense[e.from] * m + e.j].push(dense[e.to] as u32);
        }
    }

    let explored = match n.div_ceil(64) {
        0 | 1 => explore::<[u64; 1]>(n, &initial, &succ, m, ceiling),
        2 => explore::<[u64; 2]>(n, &initial, &succ, m, ceiling),
        3 | 4 => explore::<[u64; 4]>(n, &initial, &succ, m, ceiling),
        5..=8 => explore::<[u64; 8]>(n, &initial, &succ, m, ceiling),
        _ => explore_sparse(n, &initial, &succ, m, ceiling),
    };
    let (states, transitions) = explored?;

    let count = states.len();
    let comps = scc::tarjan(count, |s| transitions[s * m..(s + 1) * m].to_vec());
    let ids = scc::component_ids(count, &comps);
    let mut in_class = vec![false; count];
    let mut closed_classes = 0;
    for (c, comp) in comps.iter().enumerate() {
        let closed = comp
            .iter()
            .all(|&s| transitions[s * m..(s + 1) * m].iter().all(|&t| ids[t] == c));
        if closed {
            closed_classes += 1;
            for &s in comp {
                in_class[s] = true;
            }
        }
    }

    Ok(NeighborhoodGraph {
        m,
        vertices,
        states,
        transitions,
        in_class,
        closed_classes,
    })
}
