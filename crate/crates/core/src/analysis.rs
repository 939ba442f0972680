//! Classification parameters derived from the proper neighbor graph.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_neighbor_graph, GraphConfig, GraphError, NeighborGraph, OscVerdict};
use crate::lattice::{ratio_to_f64, GaussFraction, GaussInt, Ifs};
use crate::neighborhood::{self, NeighborhoodError, NeighborhoodGraph};
use crate::scc;
use crate::spectral::{self, NonConvergence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Neighborhood(#[from] NeighborhoodError),
    #[error(transparent)]
    Numerical(#[from] NonConvergence),
}

impl AnalysisError {
    /// Count and limit for complexity failures; `None` for numerical ones.
    pub fn complexity(&self) -> Option<(usize, usize)> {
        match self {
            AnalysisError::Graph(GraphError::ComplexityExceeded { count, limit })
            | AnalysisError::Neighborhood(NeighborhoodError::ComplexityExceeded {
                count,
                limit,
            }) => Some((*count, *limit)),
            AnalysisError::Numerical(_) => None,
        }
    }
}

/// Which pairs of first-level pieces intersect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub matrix: Vec<Vec<bool>>,
    pub connected: bool,
}

/// `A` is connected iff the piece-intersection graph on `{0..m-1}` is connected.
pub fn connectedness(g: &NeighborGraph) -> Connectivity {
    let m = g.num_maps();
    let mut matrix = vec![vec![false; m]; m];
    for e in g.initial_edges() {
        if g.is_proper(e.to) {
            matrix[e.j][e.k] = true;
        }
    }
    let mut seen = vec![false; m];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(j) = stack.pop() {
        for k in 0..m {
            if !seen[k] && (matrix[j][k] || matrix[k][j]) {
                seen[k] = true;
                stack.push(k);
            }
        }
    }
    Connectivity {
        connected: seen.iter().all(|&s| s),
        matrix,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub has_intervals: bool,
    /// Pairs `j < k` whose rotations are both `±1`.
    pub real_pairs: Vec<(usize, usize)>,
    /// The subset of `real_pairs` whose pieces intersect; each spans a segment.
    pub segment_pairs: Vec<(usize, usize)>,
}

impl IntervalReport {
    /// A real-rotation pair exists but none of them intersect.
    pub fn has_disjoint_real_pair(&self) -> bool {
        !self.real_pairs.is_empty() && self.segment_pairs.is_empty()
    }
}

/// Two maps with rotation 0 or 180 degrees generate a set on a line; it is a
/// segment exactly when their two pieces meet.
pub fn detect_intervals(ifs: &Ifs, cfg: &GraphConfig) -> Result<IntervalReport, GraphError> {
    let m = ifs.len();
    let mut real_pairs = Vec::new();
    let mut segment_pairs = Vec::new();
    for j in 0..m {
        for k in (j + 1)..m {
            if !(ifs.map(j).u.is_real() && ifs.map(k).u.is_real()) {
                continue;
            }
            real_pairs.push((j, k));
            let pair = Ifs::new(vec![*ifs.map(j), *ifs.map(k)]).expect("two maps");
            if build_neighbor_graph(&pair, cfg)?.proper_count() > 0 {
                segment_pairs.push((j, k));
            }
        }
    }
    Ok(IntervalReport {
        has_intervals: !segment_pairs.is_empty(),
        real_pairs,
        segment_pairs,
    })
}

/// Strongly connected component of the proper graph with its Perron root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpectrum {
    pub vertices: Vec<usize>,
    pub internal_edges: usize,
    pub lambda: f64,
    pub dimension: f64,
}

impl ComponentSpectrum {
    /// Has at least one internal edge, so infinite paths can stay inside it.
    pub fn is_nontrivial(&self) -> bool {
        self.internal_edges > 0
    }

    /// A single directed cycle: exactly one internal edge per vertex.
    pub fn is_simple_cycle(&self) -> bool {
        self.internal_edges == self.vertices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpectrum {
    pub lambda: f64,
    pub dimension: f64,
    /// Components in reverse topological order (sinks first).
    pub components: Vec<ComponentSpectrum>,
    #[serde(skip)]
    component_of: Vec<usize>,
    #[serde(skip)]
    successors: Vec<Vec<usize>>,
}

impl BoundarySpectrum {
    /// Components with positive dimension, largest first.
    pub fn infinite_components(&self) -> Vec<&ComponentSpectrum> {
        let mut v: Vec<_> = self
            .components
            .iter()
            .filter(|c| c.lambda > 1.0 + LAMBDA_EPS)
            .collect();
        v.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
        v
    }

    /// Largest-λ component, if any component is non-trivial.
    pub fn dominant(&self) -> Option<&ComponentSpectrum> {
        self.components
            .iter()
            .filter(|c| c.is_nontrivial())
            .max_by(|a, b| a.lambda.total_cmp(&b.lambda))
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component_of[v]
    }

    /// Successor components (excluding the component itself) in the condensation.
    pub fn component_successors(&self, c: usize) -> &[usize] {
        &self.successors[c]
    }
}

const LAMBDA_EPS: f64 = 1e-9;

/// Perron roots per component and `log₂ λ_max` as boundary dimension.
///
/// The magnification factor of every map is 2, so `d = log λ / log 2`.
pub fn boundary_dimension(g: &NeighborGraph) -> Result<BoundarySpectrum, NonConvergence> {
    let n = g.len();
    let comps = scc::tarjan(n, |v| g.out_edges(v).iter().map(|e| e.to).collect::<Vec<_>>());
    let ids = scc::component_ids(n, &comps);

    let mut components = Vec::with_capacity(comps.len());
    let mut successors = vec![Vec::new(); comps.len()];
    let mut local = vec![usize::MAX; n];
    for (c, verts) in comps.iter().enumerate() {
        for (i, &v) in verts.iter().enumerate() {
            local[v] = i;
        }
        let mut weighted: Vec<(usize, usize, u32)> = Vec::new();
        let mut internal = 0usize;
        for &v in verts {
            for e in g.out_edges(v) {
                if ids[e.to] == c {
                    internal += 1;
                    match weighted.last_mut() {
                        Some(last) if last.0 == local[v] && last.1 == local[e.to] => last.2 += 1,
                        _ => weighted.push((local[v], local[e.to], 1)),
                    }
                } else if !successors[c].contains(&ids[e.to]) {
                    successors[c].push(ids[e.to]);
                }
            }
        }
        let lambda = if internal == 0 {
            0.0
        } else if internal == verts.len() {
            1.0
        } else {
            spectral::perron_root(
                verts.len(),
                &weighted,
                spectral::DEFAULT_TOLERANCE,
                spectral::DEFAULT_MAX_ITERATIONS,
            )?
        };
        components.push(ComponentSpectrum {
            vertices: verts.clone(),
            internal_edges: internal,
            lambda,
            dimension: if lambda > 0.0 { lambda.log2().max(0.0) } else { 0.0 },
        });
    }
    let lambda = components.iter().map(|c| c.lambda).fold(0.0, f64::max);
    Ok(BoundarySpectrum {
        lambda,
        dimension: if lambda > 0.0 { lambda.log2().max(0.0) } else { 0.0 },
        components,
        component_of: ids,
        successors,
    })
}

/// Partition of the proper neighbors into finite and infinite ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteClassification {
    pub finite: Vec<bool>,
}

impl FiniteClassification {
    pub fn finite_count(&self) -> usize {
        self.finite.iter().filter(|&&f| f).count()
    }

    pub fn infinite_count(&self) -> usize {
        self.finite.len() - self.finite_count()
    }
}

/// Counts a neighbor as infinite when it reaches a component of top boundary
/// dimension, the convention of the published classification tables. With
/// `λ_max = 1` nothing is infinite.
pub fn classify_finite_neighbors(g: &NeighborGraph, spec: &BoundarySpectrum) -> FiniteClassification {
    let top = spec.lambda;
    let ncomp = spec.components.len();
    if top <= 1.0 + LAMBDA_EPS {
        return FiniteClassification {
            finite: vec![true; g.len()],
        };
    }
    let mut reaches_top = vec![false; ncomp];
    // components are stored sinks first
    for c in 0..ncomp {
        let own = spec.components[c].lambda >= top * (1.0 - LAMBDA_EPS);
        reaches_top[c] = own || spec.successors[c].iter().any(|&d| reaches_top[d]);
    }
    FiniteClassification {
        finite: (0..g.len())
            .map(|v| !reaches_top[spec.component_of[v]])
            .collect(),
    }
}

/// Neighbors `h` for which the number of length-`n` paths from `h` stays
/// bounded, i.e. `h(A) ∩ A` is a finite set: every reachable non-trivial
/// component is a simple cycle and no path joins two non-trivial components.
pub fn bounded_neighbors(g: &NeighborGraph, spec: &BoundarySpectrum) -> FiniteClassification {
    let ncomp = spec.components.len();
    let mut below_nontrivial = vec![false; ncomp];
    let mut unbounded = vec![false; ncomp];
    for c in 0..ncomp {
        let comp = &spec.components[c];
        let succ = &spec.successors[c];
        below_nontrivial[c] = succ
            .iter()
            .any(|&d| spec.components[d].is_nontrivial() || below_nontrivial[d]);
        let own_bad =
            comp.is_nontrivial() && (!comp.is_simple_cycle() || below_nontrivial[c]);
        unbounded[c] = own_bad || succ.iter().any(|&d| unbounded[d]);
    }
    FiniteClassification {
        finite: (0..g.len())
            .map(|v| !unbounded[spec.component_of[v]])
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorDimension {
    pub value: f64,
    /// Set when the OSC fails; `log₂ m` is then only an upper bound.
    pub upper_bound_only: bool,
}

/// Similarity dimension `log₂ m`; all ratios are ½.
pub fn attractor_dimension(ifs: &Ifs, osc: OscVerdict) -> AttractorDimension {
    AttractorDimension {
        value: (ifs.len() as f64).log2(),
        upper_bound_only: !osc.is_satisfied(),
    }
}

/// Mean and second central moment of the uniform self-similar measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Moments {
    pub mean_re: Ratio<i128>,
    pub mean_im: Ratio<i128>,
    pub second_moment: Ratio<i128>,
}

impl Moments {
    pub fn mean_f64(&self) -> (f64, f64) {
        (ratio_to_f64(self.mean_re), ratio_to_f64(self.mean_im))
    }

    pub fn second_moment_f64(&self) -> f64 {
        ratio_to_f64(self.second_moment)
    }
}

/// Exact moments: `μ·(2m − Σu_k) = Σv_k`, and with `d_k = f_k(μ) − μ` the
/// central second moment solves `σ² = σ²/4 + (1/m)Σ|d_k|²`.
pub fn measure_moments(ifs: &Ifs) -> Moments {
    let m = ifs.len() as i64;
    let sum_v = ifs.maps().iter().fold(GaussInt::ZERO, |acc, f| acc + f.v);
    let sum_u = ifs
        .maps()
        .iter()
        .fold(GaussInt::ZERO, |acc, f| acc + f.u.as_gauss());
    let (mr, mi) = GaussFraction {
        num: sum_v,
        den: GaussInt::new(2 * m, 0) - sum_u,
    }
    .to_ratios();

    let half = Ratio::new(1i128, 2);
    let mut spread = Ratio::from_integer(0i128);
    for f in ifs.maps() {
        let (ur, ui) = f.u.to_f64();
        let (ur, ui) = (Ratio::from_integer(ur as i128), Ratio::from_integer(ui as i128));
        let rot_re = ur * mr - ui * mi;
        let rot_im = ur * mi + ui * mr;
        let dr = (rot_re + Ratio::from_integer(f.v.re as i128)) * half - mr;
        let di = (rot_im + Ratio::from_integer(f.v.im as i128)) * half - mi;
        spread += dr * dr + di * di;
    }
    let second = spread * Ratio::new(4, 3 * m as i128);
    Moments {
        mean_re: mr,
        mean_im: mi,
        second_moment: second,
    }
}

/// One classification row; field names are the stable JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub osc: OscVerdict,
    pub connected: bool,
    pub has_intervals: bool,
    pub proper_nbs: usize,
    pub finite_nbs: usize,
    pub boundary_dim: f64,
    pub attractor_dim: f64,
    pub max_degree: usize,
    pub neighborhoods: usize,
    pub mean_re: f64,
    pub mean_im: f64,
    pub second_moment: f64,
    pub candidates: usize,
}

impl PropertyRecord {
    /// Numeric sort/filter keys; booleans and the verdict read as 0/1.
    pub const NUMERIC_FIELDS: [&'static str; 13] = [
        "osc",
        "connected",
        "has_intervals",
        "proper_nbs",
        "finite_nbs",
        "boundary_dim",
        "attractor_dim",
        "max_degree",
        "neighborhoods",
        "mean_re",
        "mean_im",
        "second_moment",
        "candidates",
    ];

    pub fn numeric_field(&self, name: &str) -> Option<f64> {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        Some(match name {
            "osc" => b(self.osc.is_satisfied()),
            "connected" => b(self.connected),
            "has_intervals" => b(self.has_intervals),
            "proper_nbs" => self.proper_nbs as f64,
            "finite_nbs" => self.finite_nbs as f64,
            "boundary_dim" => self.boundary_dim,
            "attractor_dim" => self.attractor_dim,
            "max_degree" => self.max_degree as f64,
            "neighborhoods" => self.neighborhoods as f64,
            "mean_re" => self.mean_re,
            "mean_im" => self.mean_im,
            "second_moment" => self.second_moment,
            "candidates" => self.candidates as f64,
            _ => return None,
        })
    }

    /// Compares the fields that do not depend on the chosen representative
    /// of an equivalence class (everything except the mean and the
    /// candidate count, which move with the coordinate frame).
    pub fn same_invariants(&self, other: &PropertyRecord, dim_tol: f64) -> bool {
        self.osc == other.osc
            && self.connected == other.connected
            && self.has_intervals == other.has_intervals
            && self.proper_nbs == other.proper_nbs
            && self.finite_nbs == other.finite_nbs
            && self.max_degree == other.max_degree
            && self.neighborhoods == other.neighborhoods
            && (self.boundary_dim - other.boundary_dim).abs() <= dim_tol
            && (self.attractor_dim - other.attractor_dim).abs() <= dim_tol
            && (self.second_moment - other.second_moment).abs()
                <= dim_tol * self.second_moment.abs().max(1.0)
    }

    /// Disconnected without segments: the "Cantor" label of the tables.
    pub fn is_cantor_like(&self) -> bool {
        !self.connected && !self.has_intervals
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub graph: GraphConfig,
    pub neighborhood_ceiling: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            graph: GraphConfig::default(),
            neighborhood_ceiling: neighborhood::DEFAULT_STATE_CEILING,
        }
    }
}

/// Everything computed for one system.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub record: PropertyRecord,
    pub graph: NeighborGraph,
    pub spectrum: BoundarySpectrum,
    pub connectivity: Connectivity,
    pub intervals: IntervalReport,
    pub finite: FiniteClassification,
    pub bounded: FiniteClassification,
    pub moments: Moments,
    pub attractor: AttractorDimension,
    /// Present only when the OSC holds.
    pub neighborhoods: Option<NeighborhoodGraph>,
}

impl Analysis {
    /// The neighborhood graph's closed part is not one irreducible class.
    pub fn neighborhood_class_flag(&self) -> bool {
        self.neighborhoods
            .as_ref()
            .map(|n| !n.is_irreducible())
            .unwrap_or(false)
    }
}

/// Full pipeline: neighbor graph, verdict, spectrum, neighborhoods, moments.
pub fn analyze(ifs: &Ifs, cfg: &AnalysisConfig) -> Result<Analysis, AnalysisError> {
    let graph = build_neighbor_graph(ifs, &cfg.graph)?;
    let spectrum = boundary_dimension(&graph)?;
    let connectivity = connectedness(&graph);
    let intervals = detect_intervals(ifs, &cfg.graph)?;
    let finite = classify_finite_neighbors(&graph, &spectrum);
    let bounded = bounded_neighbors(&graph, &spectrum);
    let moments = measure_moments(ifs);
    let attractor = attractor_dimension(ifs, graph.verdict());
    let neighborhoods = if graph.verdict().is_satisfied() {
        Some(neighborhood::build_neighborhood_graph(
            ifs,
            &graph,
            cfg.neighborhood_ceiling,
        )?)
    } else {
        None
    };
    let (mean_re, mean_im) = moments.mean_f64();
    let record = PropertyRecord {
        osc: graph.verdict(),
        connected: connectivity.connected,
        has_intervals: intervals.has_intervals,
        proper_nbs: graph.proper_count(),
        finite_nbs: finite.finite_count(),
        boundary_dim: spectrum.dimension,
        attractor_dim: attractor.value,
        max_degree: neighborhoods.as_ref().map_or(0, |n| n.max_degree()),
        neighborhoods: neighborhoods.as_ref().map_or(0, |n| n.neighborhood_count()),
        mean_re,
        mean_im,
        second_moment: moments.second_moment_f64(),
        candidates: graph.candidate_count(),
    };
    Ok(Analysis {
        record,
        graph,
        spectrum,
        connectivity,
        intervals,
        finite,
        bounded,
        moments,
        attractor,
        neighborhoods,
    })
}
