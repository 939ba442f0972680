//! Deterministic rasterization of attractors, neighbor overlays and open sets.
//!
//! Piece structure is exact: the piece `f_w(A)` with `|w| = n` is contained in
//! the disk of radius `R/2ⁿ` around `f_w(0) = V/2ⁿ`, where `V` is a Gaussian
//! integer computed in `i128`. Floats only appear when a center is mapped to
//! a pixel.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NeighborGraph;
use crate::lattice::{Ifs, Isometry, Unit};

pub const MAX_DEPTH: u32 = 64;
pub const MAX_PIXELS_PER_SIDE: usize = 8192;
pub const MAX_UNION_DEPTH: u32 = 14;

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [255, 255, 255];
pub const PIECE_COLORS: [Rgb; 3] = [[255, 196, 0], [30, 90, 200], [200, 40, 40]];
pub const NEIGHBOR: Rgb = [200, 200, 200];
pub const ATTRACTOR: Rgb = [60, 60, 60];
pub const OPEN_SET: Rgb = [30, 90, 200];
pub const UNCERTAIN: Rgb = [200, 200, 200];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("invalid viewport: {0}")]
    InvalidViewport(String),
    #[error("subdivision exceeded depth {0}; the viewport is too small for this system")]
    DepthExceeded(u32),
    #[error("polygon is not simple: {0}")]
    NonSimplePolygon(String),
}

/// A window of the plane sampled on a square pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub center_re: f64,
    pub center_im: f64,
    pub half_width: f64,
    pub width: usize,
    pub height: usize,
}

impl Viewport {
    pub fn new(
        center_re: f64,
        center_im: f64,
        half_width: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RenderError> {
        if !center_re.is_finite() || !center_im.is_finite() {
            return Err(RenderError::InvalidViewport("center must be finite".into()));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(RenderError::InvalidViewport(
                "half width must be positive".into(),
            ));
        }
        for (name, n) in [("width", width), ("height", height)] {
            if n == 0 || n > MAX_PIXELS_PER_SIDE {
                return Err(RenderError::InvalidViewport(format!(
                    "{name} must be in 1..={MAX_PIXELS_PER_SIDE}"
                )));
            }
        }
        Ok(Viewport {
            center_re,
            center_im,
            half_width,
            width,
            height,
        })
    }

    /// Square window around the invariant disk `|z| ≤ R`, with a 5% margin.
    pub fn full_view(ifs: &Ifs, pixels: usize) -> Result<Self, RenderError> {
        Viewport::new(0.0, 0.0, 1.05 * ifs.bounding_radius(), pixels, pixels)
    }

    /// Square window containing the attractor and all its proper neighbor copies.
    pub fn neighbor_view(ifs: &Ifs, g: &NeighborGraph, pixels: usize) -> Result<Self, RenderError> {
        let r = ifs.bounding_radius();
        let reach = g
            .proper_set()
            .iter()
            .map(|h| {
                let (x, y) = h.w.to_f64();
                x.abs().max(y.abs())
            })
            .fold(0.0, f64::max);
        Viewport::new(0.0, 0.0, 1.05 * (reach + r), pixels, pixels)
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.half_width / self.width as f64
    }

    fn left(&self) -> f64 {
        self.center_re - self.half_width
    }

    fn top(&self) -> f64 {
        self.center_im + 0.5 * self.height as f64 * self.pixel_size()
    }

    /// Pixel containing `(x, y)`, if any.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let ps = self.pixel_size();
        let c = ((x - self.left()) / ps).floor();
        let r = ((self.top() - y) / ps).floor();
        if c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height {
            Some((c as usize, r as usize))
        } else {
            None
        }
    }

    /// Plane coordinates of a pixel center.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        let ps = self.pixel_size();
        (
            self.left() + (col as f64 + 0.5) * ps,
            self.top() - (row as f64 + 0.5) * ps,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    /// RGB triples, row-major, top row first.
    pub data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        let mut data = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        RasterImage {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, col: usize, row: usize) -> Rgb {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, col: usize, row: usize, c: Rgb) {
        let i = 3 * (row * self.width + col);
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn count(&self, c: Rgb) -> usize {
        self.data.chunks_exact(3).filter(|p| *p == c).count()
    }

    /// Row-major mask of non-background pixels.
    pub fn touched(&self) -> Vec<bool> {
        self.data.chunks_exact(3).map(|p| p != BACKGROUND).collect()
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    /// Colored by the first symbol of the address.
    Pieces,
    /// Monochrome.
    Mass,
}

impl FromStr for ColorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pieces" => Ok(ColorMode::Pieces),
            "mass" => Ok(ColorMode::Mass),
            _ => Err(format!("unknown color mode {s:?} (expected pieces or mass)")),
        }
    }
}

impl fmt::Display for ColorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorMode::Pieces => "pieces",
            ColorMode::Mass => "mass",
        })
    }
}

/// Pixel rows `rows.0..rows.1` that a traversal may write.
#[derive(Clone, Copy)]
struct Clip {
    rows: (usize, usize),
}

/// Depth-first walk over the pieces of `base(A)` that meet the clip window,
/// reporting each resolved piece as `(col, row, first symbol)` in address
/// order. Pieces are resolved once their disk is below half a pixel.
fn walk_pieces<F>(
    ifs: &Ifs,
    base: &Isometry,
    vp: &Viewport,
    clip: Clip,
    mut visit: F,
) -> Result<(), RenderError>
where
    F: FnMut(usize, usize, u8),
{
    let ps = vp.pixel_size();
    let half_px = 0.5 * ps;
    let radius = ifs.bounding_radius();
    let x_min = vp.left();
    let x_max = x_min + vp.width as f64 * ps;
    let y_max = vp.top() - clip.rows.0 as f64 * ps;
    let y_min = vp.top() - clip.rows.1 as f64 * ps;
    let (bu_re, bu_im) = base.u.to_f64();
    let (bw_re, bw_im) = base.w.to_f64();
    let maps: Vec<(Unit, i128, i128)> = ifs
        .maps()
        .iter()
        .map(|m| (m.u, m.v.re as i128, m.v.im as i128))
        .collect();

    // (rotation, numerator re, numerator im, depth, first symbol)
    let mut stack: Vec<(Unit, i128, i128, u32, u8)> = vec![(Unit::ONE, 0, 0, 0, u8::MAX)];
    while let Some((u, vr, vi, n, first)) = stack.pop() {
        let scale = (-(n as f64)).exp2();
        let (lx, ly) = (vr as f64 * scale, vi as f64 * scale);
        let cx = bu_re * lx - bu_im * ly + bw_re;
        let cy = bu_im * lx + bu_re * ly + bw_im;
        let r = radius * scale;
        // slack keeps the test monotone under rounding
        let slack = r * 1e-9 + ps * 1e-9;
        let dx = (x_min - cx).max(cx - x_max).max(0.0);
        let dy = (y_min - cy).max(cy - y_max).max(0.0);
        if dx * dx + dy * dy > (r + slack) * (r + slack) {
            continue;
        }
        if r < half_px {
            // closed pixels: a center on a grid line marks both sides, which
            // keeps footprints equivariant under lattice isometries
            let fx = (cx - x_min) / ps;
            let fy = (vp.top() - cy) / ps;
            let (c0, r0) = (fx.floor(), fy.floor());
            let cols = [c0 - 1.0, c0];
            let rows = [r0 - 1.0, r0];
            for (ci, &c) in cols.iter().enumerate() {
                if ci == 0 && c0 != fx {
                    continue;
                }
                for (ri, &row) in rows.iter().enumerate() {
                    if ri == 0 && r0 != fy {
                        continue;
                    }
                    if c < 0.0 || row < 0.0 || c >= vp.width as f64 {
                        continue;
                    }
                    let (c, row) = (c as usize, row as usize);
                    if row >= clip.rows.0 && row < clip.rows.1 {
                        visit(c, row, first);
                    }
                }
            }
            continue;
        }
        if n == MAX_DEPTH {
            return Err(RenderError::DepthExceeded(MAX_DEPTH));
        }
        for (k, &(mu, mr, mi)) in maps.iter().enumerate().rev() {
            // F∘f_k has numerator 2V + U·v_k over 2ⁿ⁺¹
            let (ur, ui) = rotate_i128(u, mr, mi);
            let f = if n == 0 { k as u8 } else { first };
            stack.push((u * mu, 2 * vr + ur, 2 * vi + ui, n + 1, f));
        }
    }
    Ok(())
}

fn rotate_i128(u: Unit, re: i128, im: i128) -> (i128, i128) {
    match u.power() {
        0 => (re, im),
        1 => (-im, re),
        2 => (-re, -im),
        _ => (im, -re),
    }
}

fn piece_color(mode: ColorMode, first: u8) -> Rgb {
    match mode {
        ColorMode::Pieces => PIECE_COLORS[first as usize % PIECE_COLORS.len()],
        ColorMode::Mass => ATTRACTOR,
    }
}

fn render_rows(
    ifs: &Ifs,
    vp: &Viewport,
    mode: ColorMode,
    rows: (usize, usize),
) -> Result<Vec<u8>, RenderError> {
    let mut band = RasterImage::new(vp.width, rows.1 - rows.0, BACKGROUND);
    walk_pieces(ifs, &Isometry::IDENTITY, vp, Clip { rows }, |c, r, first| {
        band.set(c, r - rows.0, piece_color(mode, first));
    })?;
    Ok(band.data)
}

/// Renders the attractor; later addresses paint over earlier ones.
pub fn render_attractor(ifs: &Ifs, vp: &Viewport, mode: ColorMode) -> Result<RasterImage, RenderError> {
    let data = render_rows(ifs, vp, mode, (0, vp.height))?;
    Ok(RasterImage {
        width: vp.width,
        height: vp.height,
        data,
    })
}

/// Same output as [`render_attractor`], rendered in parallel bands of
/// `band_rows` rows.
pub fn render_attractor_tiled(
    ifs: &Ifs,
    vp: &Viewport,
    mode: ColorMode,
    band_rows: usize,
) -> Result<RasterImage, RenderError> {
    let band_rows = band_rows.max(1);
    let bands: Vec<(usize, usize)> = (0..vp.height)
        .step_by(band_rows)
        .map(|r| (r, (r + band_rows).min(vp.height)))
        .collect();
    let parts: Result<Vec<Vec<u8>>, RenderError> = bands
        .par_iter()
        .map(|&rows| render_rows(ifs, vp, mode, rows))
        .collect();
    Ok(RasterImage {
        width: vp.width,
        height: vp.height,
        data: parts?.concat(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhostStats {
    pub map: Isometry,
    /// Pixels touched by `map(A)` alone.
    pub pixels: usize,
    /// Hash of the touched-pixel mask, for telling ghosts apart.
    pub footprint: u64,
}

#[derive(Debug, Clone)]
pub struct Overlay {
    pub image: RasterImage,
    pub ghosts: Vec<GhostStats>,
}

/// The attractor in dark gray on top of its proper neighbor copies `h(A)`.
pub fn render_neighbor_overlay(
    ifs: &Ifs,
    g: &NeighborGraph,
    vp: &Viewport,
) -> Result<Overlay, RenderError> {
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    let all = Clip {
        rows: (0, vp.height),
    };
    let masks: Result<Vec<(Isometry, Vec<bool>)>, RenderError> = g
        .proper_set()
        .into_par_iter()
        .map(|h| {
            let mut mask = vec![false; vp.width * vp.height];
            walk_pieces(ifs, &h, vp, all, |c, r, _| mask[r * vp.width + c] = true)?;
            Ok((h, mask))
        })
        .collect();
    let masks = masks?;

    let mut image = RasterImage::new(vp.width, vp.height, BACKGROUND);
    let mut ghosts = Vec::with_capacity(masks.len());
    for (h, mask) in &masks {
        let mut hasher = DefaultHasher::new();
        mask.hash(&mut hasher);
        let mut pixels = 0;
        for (i, _) in mask.iter().enumerate().filter(|(_, &b)| b) {
            image.set(i % vp.width, i / vp.width, NEIGHBOR);
            pixels += 1;
        }
        ghosts.push(GhostStats {
            map: *h,
            pixels,
            footprint: hasher.finish(),
        });
    }
    walk_pieces(ifs, &Isometry::IDENTITY, vp, all, |c, r, _| {
        image.set(c, r, ATTRACTOR)
    })?;
    Ok(Overlay { image, ghosts })
}

/// Certified bounds on the distance from a point to the attractor.
///
/// Every piece lies in its disk, so `|z - c| - r` bounds the distance from
/// below; the image of a fixed point of `f_0` lies in `A` and bounds it from
/// above. Pieces are refined down to `depth` with branch and bound.
fn distance_bounds(ifs: &Ifs, anchor: (f64, f64), z: (f64, f64), depth: u32) -> (f64, f64) {
    let radius = ifs.bounding_radius();
    let mut hi = f64::INFINITY;
    let mut lo = f64::INFINITY;
    let mut stack: Vec<(Unit, i128, i128, u32)> = vec![(Unit::ONE, 0, 0, 0)];
    while let Some((u, vr, vi, n)) = stack.pop() {
        let scale = (-(n as f64)).exp2();
        let (cx, cy) = (vr as f64 * scale, vi as f64 * scale);
        let r = radius * scale;
        let d = (z.0 - cx).hypot(z.1 - cy);
        let node_lo = (d - r).max(0.0);
        if node_lo >= hi {
            lo = lo.min(node_lo);
            continue;
        }
        let (ur, ui) = u.to_f64();
        let px = cx + scale * (ur * anchor.0 - ui * anchor.1);
        let py = cy + scale * (ui * anchor.0 + ur * anchor.1);
        hi = hi.min((z.0 - px).hypot(z.1 - py));
        if n == depth {
            lo = lo.min(node_lo);
            continue;
        }
        let mut kids: Vec<(f64, (Unit, i128, i128, u32))> = ifs
            .maps()
            .iter()
            .map(|m| {
                let (mr, mi) = rotate_i128(u, m.v.re as i128, m.v.im as i128);
                let (nr, ni) = (2 * vr + mr, 2 * vi + mi);
                let s = scale * 0.5;
                let dd = (z.0 - nr as f64 * s).hypot(z.1 - ni as f64 * s);
                (dd, (u * m.u, nr, ni, n + 1))
            })
            .collect();
        // nearest child last so it is explored first
        kids.sort_by(|a, b| b.0.total_cmp(&a.0));
        stack.extend(kids.into_iter().map(|(_, k)| k));
    }
    (lo.min(hi), hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    /// Certainly strictly closer to `A` than to every neighbor copy.
    Inside,
    /// Certainly at least as close to some neighbor copy.
    Outside,
    Uncertain,
}

struct CosContext {
    anchor: (f64, f64),
    inverses: Vec<Isometry>,
}

impl CosContext {
    fn new(ifs: &Ifs, g: &NeighborGraph) -> Self {
        CosContext {
            anchor: ifs.map(0).fixed_point().to_f64(),
            inverses: g.proper_set().iter().map(|h| h.inverse()).collect(),
        }
    }

    fn classify(&self, ifs: &Ifs, z: (f64, f64), depth: u32) -> PointClass {
        let (lo_a, hi_a) = distance_bounds(ifs, self.anchor, z, depth);
        let mut all_farther = true;
        for inv in &self.inverses {
            // d(z, h(A)) = d(h⁻¹z, A)
            let (ur, ui) = inv.u.to_f64();
            let (wr, wi) = inv.w.to_f64();
            let pz = (ur * z.0 - ui * z.1 + wr, ui * z.0 + ur * z.1 + wi);
            let (lo_h, hi_h) = distance_bounds(ifs, self.anchor, pz, depth);
            if hi_h <= lo_a {
                return PointClass::Outside;
            }
            if hi_a >= lo_h {
                all_farther = false;
            }
        }
        if all_farther {
            PointClass::Inside
        } else {
            PointClass::Uncertain
        }
    }
}

/// Classifies `z` against the central open set `{z : d(z,A) < d(z,h(A)) for all proper h}`.
pub fn classify_point(ifs: &Ifs, g: &NeighborGraph, z: (f64, f64), depth: u32) -> PointClass {
    CosContext::new(ifs, g).classify(ifs, z, depth)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosStats {
    pub inside: usize,
    pub outside: usize,
    pub uncertain: usize,
}

/// Pixel classification of the central open set; inside is blue, uncertain gray.
pub fn render_central_open_set(
    ifs: &Ifs,
    g: &NeighborGraph,
    vp: &Viewport,
    depth: u32,
) -> Result<(RasterImage, CosStats), RenderError> {
    if depth > MAX_DEPTH {
        return Err(RenderError::DepthExceeded(depth));
    }
    let ctx = CosContext::new(ifs, g);
    let classes: Vec<PointClass> = (0..vp.width * vp.height)
        .into_par_iter()
        .map(|i| ctx.classify(ifs, vp.pixel_center(i % vp.width, i / vp.width), depth))
        .collect();
    let mut image = RasterImage::new(vp.width, vp.height, BACKGROUND);
    let mut stats = CosStats::default();
    for (i, c) in classes.iter().enumerate() {
        let (col, row) = (i % vp.width, i / vp.width);
        match c {
            PointClass::Inside => {
                stats.inside += 1;
                image.set(col, row, OPEN_SET);
            }
            PointClass::Uncertain => {
                stats.uncertain += 1;
                image.set(col, row, UNCERTAIN);
            }
            PointClass::Outside => stats.outside += 1,
        }
    }
    Ok((image, stats))
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_meet(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Rejects polygons with fewer than three vertices, repeated consecutive
/// vertices, or crossing or touching non-adjacent edges.
pub fn check_simple_polygon(poly: &[(f64, f64)]) -> Result<(), RenderError> {
    let n = poly.len();
    if n < 3 {
        return Err(RenderError::NonSimplePolygon(
            "needs at least three vertices".into(),
        ));
    }
    if poly.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(RenderError::NonSimplePolygon(
            "vertices must be finite".into(),
        ));
    }
    for i in 0..n {
        if poly[i] == poly[(i + 1) % n] {
            return Err(RenderError::NonSimplePolygon(format!(
                "edge {i} has zero length"
            )));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_meet(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(RenderError::NonSimplePolygon(format!(
                    "edges {i} and {j} intersect"
                )));
            }
        }
    }
    if poly.iter().enumerate().all(|(i, &p)| orient(poly[0], poly[1], p) == 0.0 || i < 2) {
        return Err(RenderError::NonSimplePolygon("polygon is degenerate".into()));
    }
    Ok(())
}

fn point_in_polygon(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.1 > p.1) != (b.1 > p.1) && p.0 < (b.0 - a.0) * (p.1 - a.1) / (b.1 - a.1) + a.0 {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Fills `f_w(V)` for every word `w` of length at most `depth`.
pub fn render_open_set_union(
    ifs: &Ifs,
    polygon: &[(f64, f64)],
    vp: &Viewport,
    depth: u32,
) -> Result<RasterImage, RenderError> {
    check_simple_polygon(polygon)?;
    if depth > MAX_UNION_DEPTH {
        return Err(RenderError::DepthExceeded(depth));
    }
    let mut image = RasterImage::new(vp.width, vp.height, BACKGROUND);
    let ps = vp.pixel_size();
    let mut queue: VecDeque<(Unit, i128, i128, u32)> = VecDeque::from([(Unit::ONE, 0, 0, 0)]);
    while let Some((u, vr, vi, n)) = queue.pop_front() {
        let scale = (-(n as f64)).exp2();
        let (ur, ui) = u.to_f64();
        let mapped: Vec<(f64, f64)> = polygon
            .iter()
            .map(|&(x, y)| {
                (
                    scale * (ur * x - ui * y + vr as f64),
                    scale * (ui * x + ur * y + vi as f64),
                )
            })
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &mapped {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let col_lo = (((x0 - vp.left()) / ps).floor().max(0.0)) as usize;
        let col_hi = (((x1 - vp.left()) / ps).ceil().max(0.0) as usize).min(vp.width);
        let row_lo = (((vp.top() - y1) / ps).floor().max(0.0)) as usize;
        let row_hi = (((vp.top() - y0) / ps).ceil().max(0.0) as usize).min(vp.height);
        for row in row_lo..row_hi {
            for col in col_lo..col_hi {
                if point_in_polygon(&mapped, vp.pixel_center(col, row)) {
                    image.set(col, row, OPEN_SET);
                }
            }
        }
        if n < depth {
            for m in ifs.maps() {
                let (mr, mi) = rotate_i128(u, m.v.re as i128, m.v.im as i128);
                queue.push_back((u * m.u, 2 * vr + mr, 2 * vi + mi, n + 1));
            }
        }
    }
    Ok(image)
}

/// Number of 4-connected components of `true` cells in a row-major mask.
pub fn count_components(mask: &[bool], width: usize) -> usize {
    let height = if width == 0 { 0 } else { mask.len() / width };
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (c, r) = (i % width, i / width);
            let mut nbrs = [usize::MAX; 4];
            if c > 0 {
                nbrs[0] = i - 1;
            }
            if c + 1 < width {
                nbrs[1] = i + 1;
            }
            if r > 0 {
                nbrs[2] = i - width;
            }
            if r + 1 < height {
                nbrs[3] = i + width;
            }
            for j in nbrs.into_iter().filter(|&j| j != usize::MAX) {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_neighbor_graph, GraphConfig};
    use crate::lattice::fixtures;

    fn sys(s: &str) -> Ifs {
        s.parse().unwrap()
    }

    fn graph(ifs: &Ifs) -> NeighborGraph {
        build_neighbor_graph(ifs, &GraphConfig::default()).unwrap()
    }

    #[test]
    fn viewport_validation() {
        assert!(Viewport::new(0.0, 0.0, 0.0, 10, 10).is_err());
        assert!(Viewport::new(0.0, 0.0, -1.0, 10, 10).is_err());
        assert!(Viewport::new(f64::NAN, 0.0, 1.0, 10, 10).is_err());
        assert!(Viewport::new(0.0, 0.0, 1.0, 0, 10).is_err());
        let vp = Viewport::new(0.0, 0.0, 1.0, 4, 2).unwrap();
        assert_eq!(vp.pixel_size(), 0.5);
        assert_eq!(vp.pixel_of(-0.99, 0.49), Some((0, 0)));
        assert_eq!(vp.pixel_of(0.99, -0.49), Some((3, 1)));
        assert_eq!(vp.pixel_of(1.01, 0.0), None);
        assert_eq!(vp.pixel_center(0, 0), (-0.75, 0.25));
    }

    #[test]
    fn ppm_layout() {
        let img = RasterImage::new(2, 1, [1, 2, 3]);
        assert_eq!(img.to_ppm(), b"P6\n2 1\n255\n\x01\x02\x03\x01\x02\x03".to_vec());
    }

    #[test]
    fn gasket_is_symmetric_about_the_diagonal() {
        let ifs = sys(fixtures::GASKET);
        let n = 200;
        let vp = Viewport::new(0.0, 0.0, 1.1, n, n).unwrap();
        let img = render_attractor(&ifs, &vp, ColorMode::Mass).unwrap();
        let t = img.touched();
        assert!(t.iter().filter(|&&b| b).count() > 1000);
        // reflection across y = x in pixel coordinates
        let mut mismatched = 0;
        for row in 0..n {
            for col in 0..n {
                if t[row * n + col] != t[(n - 1 - col) * n + (n - 1 - row)] {
                    mismatched += 1;
                }
            }
        }
        assert_eq!(mismatched, 0);
    }

    #[test]
    fn crossings_shows_all_three_pieces() {
        let ifs = sys(fixtures::CROSSINGS);
        let vp = Viewport::full_view(&ifs, 160).unwrap();
        let img = render_attractor(&ifs, &vp, ColorMode::Pieces).unwrap();
        for c in PIECE_COLORS {
            assert!(img.count(c) > 0);
        }
    }

    #[test]
    fn window_off_the_attractor_is_blank() {
        let ifs = sys("0,-8,0;0,8,0");
        let vp = Viewport::new(0.0, 4.0, 1.0, 64, 64).unwrap();
        let img = render_attractor(&ifs, &vp, ColorMode::Pieces).unwrap();
        assert!(img.touched().iter().all(|&b| !b));
        let on = Viewport::new(0.0, 0.0, 1.0, 64, 64).unwrap();
        let img = render_attractor(&ifs, &on, ColorMode::Pieces).unwrap();
        assert!(img.touched().iter().any(|&b| b));
    }

    #[test]
    fn tiled_matches_serial() {
        for fx in [fixtures::GASKET, fixtures::CROSSINGS] {
            let ifs = sys(fx);
            let vp = Viewport::full_view(&ifs, 150).unwrap();
            let serial = render_attractor(&ifs, &vp, ColorMode::Pieces).unwrap();
            for band in [1, 7, 64, 500] {
                let tiled = render_attractor_tiled(&ifs, &vp, ColorMode::Pieces, band).unwrap();
                assert_eq!(serial, tiled);
            }
        }
    }

    #[test]
    fn mass_mode_ignores_map_order() {
        let ifs = sys(fixtures::FIREWORKS);
        let vp = Viewport::full_view(&ifs, 128).unwrap();
        let base = render_attractor(&ifs, &vp, ColorMode::Mass).unwrap();
        let permuted = ifs.permuted(&[2, 0, 1]);
        assert_eq!(base, render_attractor(&permuted, &vp, ColorMode::Mass).unwrap());
    }

    #[test]
    fn coarse_render_covers_downsampled_fine_render() {
        let ifs = sys(fixtures::CROSSINGS);
        let n = 100;
        let coarse = Viewport::new(0.3, -0.2, 1.7, n, n).unwrap();
        let fine = Viewport::new(0.3, -0.2, 1.7, 2 * n, 2 * n).unwrap();
        let c = render_attractor(&ifs, &coarse, ColorMode::Mass).unwrap().touched();
        let f = render_attractor(&ifs, &fine, ColorMode::Mass).unwrap().touched();
        for row in 0..n {
            for col in 0..n {
                let down = (0..4).any(|i| f[(2 * row + i / 2) * 2 * n + 2 * col + i % 2]);
                if !down {
                    continue;
                }
                let near = (row.saturating_sub(1)..(row + 2).min(n))
                    .any(|r| (col.saturating_sub(1)..(col + 2).min(n)).any(|cc| c[r * n + cc]));
                assert!(near, "pixel ({col},{row}) drifted");
            }
        }
    }

    #[test]
    fn degenerate_viewport_hits_depth_cap() {
        let ifs = sys(fixtures::GASKET);
        let vp = Viewport::new(0.0, 0.0, 1e-30, 4, 4).unwrap();
        assert_eq!(
            render_attractor(&ifs, &vp, ColorMode::Mass),
            Err(RenderError::DepthExceeded(MAX_DEPTH))
        );
    }

    #[test]
    fn crossings_overlay_has_seven_ghosts() {
        let ifs = sys(fixtures::CROSSINGS);
        let g = graph(&ifs);
        let vp = Viewport::neighbor_view(&ifs, &g, 200).unwrap();
        let ov = render_neighbor_overlay(&ifs, &g, &vp).unwrap();
        assert_eq!(ov.ghosts.len(), 7);
        assert!(ov.ghosts.iter().all(|gh| gh.pixels > 0));
        assert!(ov.image.count(NEIGHBOR) > 0);
        assert!(ov.image.count(ATTRACTOR) > 0);
    }

    #[test]
    fn inverse_ghosts_have_matching_area() {
        let ifs = sys(fixtures::CROSSINGS);
        let g = graph(&ifs);
        // dyadic grid aligned with the lattice
        let vp = Viewport::new(0.0, 0.0, 4.0, 256, 256).unwrap();
        let ov = render_neighbor_overlay(&ifs, &g, &vp).unwrap();
        for gh in &ov.ghosts {
            let inv = ov.ghosts.iter().find(|o| o.map == gh.map.inverse()).unwrap();
            let diff = gh.pixels.abs_diff(inv.pixels) as f64;
            assert!(diff <= 0.01 * gh.pixels as f64, "{} vs {}", gh.pixels, inv.pixels);
        }
    }

    #[test]
    fn overlay_without_neighbors_is_plain_attractor() {
        let ifs = sys(fixtures::GASKET);
        let empty = build_neighbor_graph(&sys("3,2,0;1,0,-2;3,0,1"), &GraphConfig::default()).unwrap();
        let vp = Viewport::full_view(&ifs, 64).unwrap();
        let ov = render_neighbor_overlay(&ifs, &empty, &vp).unwrap();
        let plain = render_attractor(&ifs, &vp, ColorMode::Mass).unwrap();
        if ov.ghosts.is_empty() {
            assert_eq!(ov.image, plain);
        }
    }

    #[test]
    fn interval_point_is_inside_central_open_set() {
        let ifs = sys(fixtures::INTERVAL);
        let g = graph(&ifs);
        assert_eq!(classify_point(&ifs, &g, (-2.0, 0.0), 10), PointClass::Inside);
        assert_eq!(classify_point(&ifs, &g, (-6.0, 0.0), 10), PointClass::Outside);
    }

    #[test]
    fn fixed_point_of_self_inverse_neighbor_is_not_inside() {
        let ifs = sys(fixtures::CROSSINGS);
        let g = graph(&ifs);
        // -z+1 is its own inverse and fixes 1/2
        assert_ne!(classify_point(&ifs, &g, (0.5, 0.0), 12), PointClass::Inside);
    }

    #[test]
    fn crossings_central_open_set_is_nonempty() {
        let ifs = sys(fixtures::CROSSINGS);
        let g = graph(&ifs);
        let vp = Viewport::full_view(&ifs, 60).unwrap();
        let (img, stats) = render_central_open_set(&ifs, &g, &vp, 8).unwrap();
        assert!(stats.inside > 0);
        assert_eq!(img.count(OPEN_SET), stats.inside);
        assert_eq!(stats.inside + stats.outside + stats.uncertain, 60 * 60);
    }

    #[test]
    fn uncertainty_shrinks_with_depth() {
        let ifs = sys(fixtures::CROSSINGS);
        let g = graph(&ifs);
        let vp = Viewport::full_view(&ifs, 40).unwrap();
        let shallow = render_central_open_set(&ifs, &g, &vp, 3).unwrap().1;
        let deep = render_central_open_set(&ifs, &g, &vp, 9).unwrap().1;
        assert!(deep.uncertain <= shallow.uncertain);
    }

    fn disk(cx: f64, cy: f64, r: f64) -> Vec<(f64, f64)> {
        (0..16)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 16.0;
                (cx + r * t.cos(), cy + r * t.sin())
            })
            .collect()
    }

    #[test]
    fn interval_union_has_separate_copies() {
        let ifs = sys(fixtures::INTERVAL);
        let vp = Viewport::new(0.0, 0.0, 4.5, 360, 60).unwrap();
        let v = disk(0.0, 0.0, 0.5);
        let d0 = render_open_set_union(&ifs, &v, &vp, 0).unwrap();
        assert_eq!(count_components(&d0.touched(), vp.width), 1);
        let d2 = render_open_set_union(&ifs, &v, &vp, 2).unwrap();
        assert_eq!(count_components(&d2.touched(), vp.width), 7);
        // the copies at level one sit at ±2
        let (c, r) = vp.pixel_of(-2.0, 0.0).unwrap();
        assert_eq!(d2.get(c, r), OPEN_SET);
    }

    #[test]
    fn non_simple_polygon_is_rejected() {
        let ifs = sys(fixtures::INTERVAL);
        let vp = Viewport::new(0.0, 0.0, 4.5, 32, 32).unwrap();
        let bowtie = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)];
        assert!(matches!(
            render_open_set_union(&ifs, &bowtie, &vp, 1),
            Err(RenderError::NonSimplePolygon(_))
        ));
        assert!(check_simple_polygon(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(check_simple_polygon(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
        assert!(check_simple_polygon(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).is_ok());
    }

    #[test]
    fn components_of_a_mask() {
        let m = [true, false, true, true, false, false, false, true, true];
        assert_eq!(count_components(&m, 3), 3);
        assert_eq!(count_components(&[], 3), 0);
    }
}
