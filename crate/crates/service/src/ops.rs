//! Operations shared by the HTTP handlers and the command line, so both
//! produce the same bytes for the same request.

use std::fmt;
use std::str::FromStr;

use gasketlab_core::analysis::{analyze, AnalysisConfig, Connectivity, IntervalReport, PropertyRecord};
use gasketlab_core::graph::{build_candidate_graph, build_neighbor_graph, GraphConfig, GraphJson, OscVerdict};
use gasketlab_core::lattice::{fixtures, Ifs};
use gasketlab_core::neighborhood::{build_neighborhood_graph, NeighborhoodJson, DEFAULT_STATE_CEILING};
use gasketlab_core::render::{
    render_attractor_tiled, render_central_open_set, render_neighbor_overlay, ColorMode, CosStats,
    GhostStats, RasterImage, Viewport,
};
use gasketlab_search::canonical::{canonical_key, CanonicalKey};
use gasketlab_search::gate::candidate_estimate;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Accepts a fixture name (`crossings`) or the `q,a,b;q,a,b;…` text form.
pub fn resolve_ifs(input: &str) -> Result<Ifs, ServiceError> {
    let text = fixtures::lookup(input.trim()).unwrap_or(input);
    text.parse().map_err(|source| ServiceError::Parse {
        input: input.to_string(),
        source,
    })
}

/// An IFS in a request body: text, fixture name, or `[[q,a,b],…]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum IfsInput {
    Text(String),
    Triples(Ifs),
}

impl IfsInput {
    pub fn resolve(&self) -> Result<Ifs, ServiceError> {
        match self {
            IfsInput::Text(s) => resolve_ifs(s),
            IfsInput::Triples(ifs) => Ok(ifs.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphSummary {
    pub verdict: OscVerdict,
    pub candidates: usize,
    pub vertices: usize,
    pub proper: usize,
    pub edges: usize,
    pub bounded_neighbors: usize,
    /// Label pairs `(j, k)` from the root to the identity when the OSC fails.
    pub identity_witness: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentSummary {
    pub size: usize,
    pub internal_edges: usize,
    pub lambda: f64,
    pub dimension: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectrumSummary {
    pub lambda: f64,
    pub dimension: f64,
    pub components: Vec<ComponentSummary>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NeighborhoodSummary {
    pub states: usize,
    pub neighborhoods: usize,
    pub max_degree: usize,
    pub closed_classes: usize,
    pub irreducible: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub ifs: String,
    pub canonical_key: CanonicalKey,
    pub properties: PropertyRecord,
    pub graph: GraphSummary,
    pub spectrum: SpectrumSummary,
    pub neighborhoods: Option<NeighborhoodSummary>,
    pub intervals: IntervalReport,
    pub connectivity: Connectivity,
    /// The attractor dimension is only an upper bound when the OSC fails.
    pub attractor_dim_upper_bound_only: bool,
}

/// Full analysis; `max_candidates` overrides the candidate ceiling.
pub fn analysis_report(ifs: &Ifs, max_candidates: Option<usize>) -> Result<AnalysisReport, ServiceError> {
    let mut cfg = AnalysisConfig::default();
    if let Some(limit) = max_candidates {
        cfg.graph.max_candidates = limit;
    }
    let a = analyze(ifs, &cfg)
        .map_err(|e| ServiceError::from_analysis(e, candidate_estimate(ifs)))?;
    Ok(AnalysisReport {
        ifs: ifs.to_string(),
        canonical_key: canonical_key(ifs),
        graph: GraphSummary {
            verdict: a.graph.verdict(),
            candidates: a.graph.candidate_count(),
            vertices: a.graph.len(),
            proper: a.graph.proper_count(),
            edges: a.graph.edges().len(),
            bounded_neighbors: a.bounded.finite_count(),
            identity_witness: a.graph.identity_witness().map(<[_]>::to_vec),
        },
        spectrum: SpectrumSummary {
            lambda: a.spectrum.lambda,
            dimension: a.spectrum.dimension,
            components: a
                .spectrum
                .components
                .iter()
                .map(|c| ComponentSummary {
                    size: c.vertices.len(),
                    internal_edges: c.internal_edges,
                    lambda: c.lambda,
                    dimension: c.dimension,
                })
                .collect(),
        },
        neighborhoods: a.neighborhoods.as_ref().map(|n| NeighborhoodSummary {
            states: n.state_count(),
            neighborhoods: n.neighborhood_count(),
            max_degree: n.max_degree(),
            closed_classes: n.closed_class_count(),
            irreducible: n.is_irreducible(),
        }),
        intervals: a.intervals,
        connectivity: a.connectivity,
        attractor_dim_upper_bound_only: a.attractor.upper_bound_only,
        properties: a.record,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphReport {
    pub ifs: String,
    pub verdict: OscVerdict,
    pub proper: usize,
    pub candidates: usize,
    pub graph: GraphJson,
    pub dot: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighborhoods: Option<NeighborhoodJson>,
}

/// The proper neighbor graph, or every candidate when `pruned` is false.
pub fn graph_report(ifs: &Ifs, pruned: bool, with_neighborhoods: bool) -> Result<GraphReport, ServiceError> {
    let cfg = GraphConfig::default();
    let estimate = candidate_estimate(ifs);
    let build = if pruned { build_neighbor_graph } else { build_candidate_graph };
    let g = build(ifs, &cfg).map_err(|e| ServiceError::from_graph(e, estimate))?;
    let neighborhoods = if with_neighborhoods && g.verdict().is_satisfied() {
        let pruned_graph = if pruned {
            g.clone()
        } else {
            build_neighbor_graph(ifs, &cfg).map_err(|e| ServiceError::from_graph(e, estimate))?
        };
        Some(
            build_neighborhood_graph(ifs, &pruned_graph, DEFAULT_STATE_CEILING)
                .map_err(|e| ServiceError::from_neighborhoods(e, estimate))?
                .to_json(),
        )
    } else {
        None
    };
    Ok(GraphReport {
        ifs: ifs.to_string(),
        verdict: g.verdict(),
        proper: g.proper_count(),
        candidates: g.candidate_count(),
        graph: g.to_json(),
        dot: g.to_dot(),
        neighborhoods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    #[default]
    Pieces,
    Mass,
    /// Attractor over its proper neighbor copies.
    Overlay,
    /// Central open set classification.
    Cos,
}

impl FromStr for RenderMode {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pieces" => Ok(RenderMode::Pieces),
            "mass" => Ok(RenderMode::Mass),
            "overlay" => Ok(RenderMode::Overlay),
            "cos" => Ok(RenderMode::Cos),
            _ => Err(ServiceError::BadRequest(format!(
                "unknown mode {s:?} (expected pieces, mass, overlay or cos)"
            ))),
        }
    }
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderMode::Pieces => "pieces",
            RenderMode::Mass => "mass",
            RenderMode::Overlay => "overlay",
            RenderMode::Cos => "cos",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Ppm,
    Png,
}

impl ImageFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "image/x-portable-pixmap",
            ImageFormat::Png => "image/png",
        }
    }

    /// Guesses from a file extension; PPM unless it ends in `.png`.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => ImageFormat::Png,
            _ => ImageFormat::Ppm,
        }
    }
}

impl FromStr for ImageFormat {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ppm" => Ok(ImageFormat::Ppm),
            "png" => Ok(ImageFormat::Png),
            _ => Err(ServiceError::BadRequest(format!(
                "unknown format {s:?} (expected ppm or png)"
            ))),
        }
    }
}

pub const DEFAULT_PIXELS: usize = 512;
pub const DEFAULT_COS_DEPTH: u32 = 12;
/// Rows per parallel band for attractor renders.
pub const BAND_ROWS: usize = 32;

/// A render job; a missing window means the default view for the mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderRequest {
    pub ifs: String,
    pub cx: Option<f64>,
    pub cy: Option<f64>,
    pub half: Option<f64>,
    pub px: Option<usize>,
    pub py: Option<usize>,
    #[serde(default)]
    pub mode: RenderMode,
    pub depth: Option<u32>,
    #[serde(default)]
    pub format: ImageFormat,
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: RasterImage,
    pub viewport: Viewport,
    pub ghosts: Option<Vec<GhostStats>>,
    pub cos: Option<CosStats>,
}

impl RenderRequest {
    pub fn render(&self) -> Result<Rendered, ServiceError> {
        let ifs = resolve_ifs(&self.ifs)?;
        let px = self.px.unwrap_or(DEFAULT_PIXELS);
        let py = self.py.unwrap_or(px);
        let estimate = candidate_estimate(&ifs);
        let needs_graph = matches!(self.mode, RenderMode::Overlay | RenderMode::Cos);
        let graph = if needs_graph {
            Some(build_neighbor_graph(&ifs, &GraphConfig::default()).map_err(|e| ServiceError::from_graph(e, estimate))?)
        } else {
            None
        };
        let viewport = match (self.cx, self.cy, self.half) {
            (None, None, None) => {
                let default_half = match &graph {
                    Some(g) if self.mode == RenderMode::Overlay => Viewport::neighbor_view(&ifs, g, px)?.half_width,
                    _ => Viewport::full_view(&ifs, px)?.half_width,
                };
                Viewport::new(0.0, 0.0, default_half, px, py)?
            }
            (Some(cx), Some(cy), Some(half)) => Viewport::new(cx, cy, half, px, py)?,
            _ => {
                return Err(ServiceError::BadRequest(
                    "cx, cy and half must be given together".into(),
                ))
            }
        };
        let mut out = Rendered {
            image: RasterImage::new(1, 1, [0; 3]),
            viewport,
            ghosts: None,
            cos: None,
        };
        match self.mode {
            RenderMode::Pieces | RenderMode::Mass => {
                let colors = if self.mode == RenderMode::Pieces {
                    ColorMode::Pieces
                } else {
                    ColorMode::Mass
                };
                out.image = render_attractor_tiled(&ifs, &viewport, colors, BAND_ROWS)?;
            }
            RenderMode::Overlay => {
                let overlay = render_neighbor_overlay(&ifs, graph.as_ref().expect("graph built"), &viewport)?;
                out.image = overlay.image;
                out.ghosts = Some(overlay.ghosts);
            }
            RenderMode::Cos => {
                let depth = self.depth.unwrap_or(DEFAULT_COS_DEPTH);
                let (image, stats) =
                    render_central_open_set(&ifs, graph.as_ref().expect("graph built"), &viewport, depth)?;
                out.image = image;
                out.cos = Some(stats);
            }
        }
        Ok(out)
    }

    /// Encoded image bytes and their content type.
    pub fn render_bytes(&self) -> Result<(Vec<u8>, &'static str), ServiceError> {
        let r = self.render()?;
        Ok((encode(&r.image, self.format)?, self.format.content_type()))
    }
}

pub fn encode(image: &RasterImage, format: ImageFormat) -> Result<Vec<u8>, ServiceError> {
    match format {
        ImageFormat::Ppm => Ok(image.to_ppm()),
        ImageFormat::Png => {
            let mut out = Vec::new();
            PngEncoder::new(&mut out)
                .write_image(&image.data, image.width as u32, image.height as u32, ExtendedColorType::Rgb8)
                .map_err(|e| ServiceError::Internal(format!("png encoding: {e}")))?;
            Ok(out)
        }
    }
}
