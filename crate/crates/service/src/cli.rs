//! Command-line interface. Every subcommand except `serve` writes to the
//! given sink so it can be exercised in tests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand};
use gasketlab_search::catalog::{Catalog, CatalogHeader, CatalogQuery, RangeFilter, SortOrder};
use gasketlab_search::config::{parse_filters, SearchConfig, DEFAULT_MAX_NEIGHBORHOOD_STATES, DEFAULT_TRANSLATION_RANGE};
use gasketlab_search::engine::{Checkpoint, Clock, FixedClock, Search, SearchControl, SearchError, SystemClock};
use gasketlab_core::graph::DEFAULT_MAX_CANDIDATES;

use crate::api::{router, AppState};
use crate::error::ServiceError;
use crate::ops::{analysis_report, encode, graph_report, resolve_ifs, ImageFormat, RenderMode, RenderRequest};
use crate::session::SessionManager;
use crate::{CATALOG_ENV, DEFAULT_CATALOG};

#[derive(Debug, Parser)]
#[command(name = "gasketlab", version, about = "Neighbor graphs, fractal invariants and search for three-map lattice IFS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify one system and print its invariants.
    Analyze {
        /// `q,a,b;q,a,b;q,a,b` or a fixture name such as `crossings`.
        ifs: String,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        max_candidates: Option<usize>,
    },
    /// Print the neighbor graph as DOT or JSON.
    Graph {
        ifs: String,
        #[arg(long, default_value = "dot", value_parser = ["dot", "json"])]
        format: String,
        /// Keep candidates from which no cycle is reachable.
        #[arg(long)]
        all: bool,
        /// Include the neighborhood transition system (JSON only).
        #[arg(long)]
        neighborhoods: bool,
    },
    /// Render the attractor, its neighbor overlay or the central open set.
    Render(RenderArgs),
    /// Random-walk search appending to a JSONL catalog.
    Search(SearchArgs),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = CATALOG_ENV, default_value = DEFAULT_CATALOG)]
        catalog: PathBuf,
    },
    /// Query or audit a catalog file.
    Catalog(CatalogArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub ifs: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub cx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub cy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub half: Option<f64>,
    #[arg(long)]
    pub px: Option<usize>,
    #[arg(long)]
    pub py: Option<usize>,
    #[arg(long, default_value = "pieces")]
    pub mode: String,
    /// Subdivision depth for `--mode cos`.
    #[arg(long)]
    pub depth: Option<u32>,
    /// `ppm` or `png`; guessed from the file name when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Total steps; runs until interrupted when omitted.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_TRANSLATION_RANGE)]
    pub range: i64,
    /// Pin the first rotation to a quarter turn.
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub fix_first_rotation: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_CANDIDATES)]
    pub max_candidates: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_NEIGHBORHOOD_STATES)]
    pub max_states: usize,
    /// Comma-separated, e.g. `dropDisjoint,capPerBoundaryDim=3`.
    #[arg(long, default_value = "")]
    pub filters: String,
    #[arg(long, default_value_t = 1)]
    pub walkers: usize,
    #[arg(long)]
    pub steps_per_batch: Option<u64>,
    /// Starting system; random when omitted.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long, env = CATALOG_ENV, default_value = DEFAULT_CATALOG)]
    pub out: PathBuf,
    /// Where to write a checkpoint if the catalog cannot be written.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stamp every entry with this time instead of the clock; makes
    /// catalogs byte-reproducible.
    #[arg(long)]
    pub fixed_time: Option<String>,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    #[arg(env = CATALOG_ENV, default_value = DEFAULT_CATALOG)]
    pub file: PathBuf,
    #[arg(long)]
    pub sort: Option<String>,
    #[arg(long, default_value = "asc", value_parser = ["asc", "desc"])]
    pub order: String,
    /// Range filter `key=a..b`, `key=a..`, `key=..b` or `key=x`; repeatable.
    #[arg(long = "where", value_name = "KEY=RANGE")]
    pub filters: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Report entries violating these filters instead of listing.
    #[arg(long)]
    pub audit: Option<String>,
    #[arg(long)]
    pub json: bool,
}

impl SearchArgs {
    pub fn config(&self) -> Result<SearchConfig, ServiceError> {
        let mut cfg = SearchConfig {
            seed: self.seed,
            translation_range: self.range,
            fix_first_rotation: self.fix_first_rotation,
            max_candidates: self.max_candidates,
            max_neighborhood_states: self.max_states,
            filters: parse_filters(&self.filters)?,
            steps: self.steps,
            walkers: self.walkers,
            start: self.start.as_deref().map(resolve_ifs).transpose()?,
            ..SearchConfig::default()
        };
        if let Some(n) = self.steps_per_batch {
            cfg.steps_per_batch = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn io(e: std::io::Error) -> ServiceError {
    ServiceError::Internal(e.to_string())
}

fn json_line(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), ServiceError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| ServiceError::Internal(e.to_string()))?;
    writeln!(out).map_err(io)
}

/// Runs a subcommand other than `serve`.
pub fn run(command: Command, out: &mut dyn Write) -> Result<(), ServiceError> {
    match command {
        Command::Analyze {
            ifs,
            json,
            max_candidates,
        } => analyze(&ifs, json, max_candidates, out),
        Command::Graph {
            ifs,
            format,
            all,
            neighborhoods,
        } => {
            let report = graph_report(&resolve_ifs(&ifs)?, !all, neighborhoods)?;
            if format == "dot" {
                out.write_all(report.dot.as_bytes()).map_err(io)
            } else {
                json_line(out, &report)
            }
        }
        Command::Render(args) => render(&args, out),
        Command::Search(args) => search(&args, out),
        Command::Catalog(args) => catalog(&args, out),
        Command::Serve { .. } => Err(ServiceError::BadRequest("serve runs through serve()".into())),
    }
}

fn analyze(ifs: &str, json: bool, max_candidates: Option<usize>, out: &mut dyn Write) -> Result<(), ServiceError> {
    let r = analysis_report(&resolve_ifs(ifs)?, max_candidates)?;
    if json {
        return json_line(out, &r);
    }
    let p = &r.properties;
    let mut lines = vec![
        ("ifs", r.ifs.clone()),
        ("canonical key", r.canonical_key.to_string()),
        ("osc", format!("{:?}", p.osc).to_lowercase()),
        ("proper neighbors", p.proper_nbs.to_string()),
        ("finite neighbors", p.finite_nbs.to_string()),
        ("bounded neighbors", r.graph.bounded_neighbors.to_string()),
        ("boundary dimension", format!("{:.6}", p.boundary_dim)),
        ("boundary lambda", format!("{:.9}", r.spectrum.lambda)),
        ("attractor dimension", format!("{:.6}", p.attractor_dim)),
        ("max degree", p.max_degree.to_string()),
        ("neighborhoods", p.neighborhoods.to_string()),
        ("connected", p.connected.to_string()),
        ("line segments", p.has_intervals.to_string()),
        ("mean", format!("{:.6} {:+.6}i", p.mean_re, p.mean_im)),
        ("second moment", format!("{:.6}", p.second_moment)),
        ("candidates", p.candidates.to_string()),
    ];
    if let Some(w) = &r.graph.identity_witness {
        lines.push(("identity witness", format!("{w:?}")));
    }
    for (k, v) in lines {
        writeln!(out, "{k:<20} {v}").map_err(io)?;
    }
    Ok(())
}

pub fn render_request(args: &RenderArgs) -> Result<RenderRequest, ServiceError> {
    let format = match &args.format {
        Some(f) => f.parse()?,
        None => ImageFormat::from_path(&args.out),
    };
    Ok(RenderRequest {
        ifs: args.ifs.clone(),
        cx: args.cx,
        cy: args.cy,
        half: args.half,
        px: args.px,
        py: args.py,
        mode: args.mode.parse::<RenderMode>()?,
        depth: args.depth,
        format,
    })
}

fn render(args: &RenderArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let req = render_request(args)?;
    let r = req.render()?;
    std::fs::write(&args.out, encode(&r.image, req.format)?).map_err(io)?;
    let v = &r.viewport;
    writeln!(
        out,
        "wrote {} ({}x{}, center {} {}, half {})",
        args.out.display(),
        v.width,
        v.height,
        v.center_re,
        v.center_im,
        v.half_width
    )
    .map_err(io)?;
    if let Some(g) = &r.ghosts {
        writeln!(out, "neighbor ghosts: {}", g.len()).map_err(io)?;
    }
    if let Some(c) = &r.cos {
        writeln!(out, "inside {} outside {} uncertain {}", c.inside, c.outside, c.uncertain).map_err(io)?;
    }
    Ok(())
}

fn open_catalog(path: &Path, cfg: &SearchConfig) -> Result<Catalog, ServiceError> {
    Ok(Catalog::open_or_create(path, CatalogHeader::new(cfg))?)
}

fn search(args: &SearchArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let cfg = args.config()?;
    let mut search = match &args.resume {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io)?;
            let cp: Checkpoint = serde_json::from_str(&text)
                .map_err(|e| ServiceError::BadRequest(format!("checkpoint {}: {e}", p.display())))?;
            Search::resume(cfg.clone(), &cp)?
        }
        None => Search::new(cfg.clone())?,
    };
    let catalog = Mutex::new(open_catalog(&args.out, &cfg)?);
    let clock: Box<dyn Clock> = match &args.fixed_time {
        Some(t) => Box::new(FixedClock(t.clone())),
        None => Box::new(SystemClock),
    };
    let ctl = SearchControl::new(clock);
    let started = std::time::Instant::now();
    match search.run(&catalog, &ctl) {
        Ok(summary) => {
            let secs = started.elapsed().as_secs_f64();
            let c = ctl.counters.snapshot();
            writeln!(
                out,
                "{} steps in {secs:.1}s ({:.0}/s): {} cataloged, {} duplicates, {} filtered, {} osc failures, {} too complex, {} restarts",
                summary.steps,
                summary.steps as f64 / secs.max(1e-9),
                c.cataloged,
                c.duplicates,
                c.filtered,
                c.osc_fail,
                c.gated,
                c.restarts
            )
            .map_err(io)?;
            writeln!(out, "catalog {} holds {} entries", args.out.display(), catalog.lock().unwrap().len()).map_err(io)
        }
        Err(SearchError::Catalog { source, checkpoint }) => {
            let path = args
                .checkpoint
                .clone()
                .unwrap_or_else(|| args.out.with_extension("checkpoint.json"));
            let text = serde_json::to_string_pretty(&checkpoint).map_err(|e| ServiceError::Internal(e.to_string()))?;
            std::fs::write(&path, text).map_err(io)?;
            Err(ServiceError::Internal(format!(
                "catalog write failed ({source}); resume with --resume {}",
                path.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn catalog(args: &CatalogArgs, out: &mut dyn Write) -> Result<(), ServiceError> {
    let cat = Catalog::open(&args.file)?;
    if let Some(filters) = &args.audit {
        let bad = cat.audit(&parse_filters(filters)?);
        writeln!(out, "{} of {} entries violate {filters}", bad.len(), cat.len()).map_err(io)?;
        for id in bad {
            writeln!(out, "  id {id}").map_err(io)?;
        }
        return Ok(());
    }
    let mut query = CatalogQuery {
        sort: args.sort.clone(),
        order: if args.order == "desc" { SortOrder::Desc } else { SortOrder::Asc },
        offset: args.offset,
        limit: args.limit,
        ..CatalogQuery::default()
    };
    for f in &args.filters {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| ServiceError::BadRequest(format!("filter {f:?} is not KEY=RANGE")))?;
        query.filters.push(RangeFilter::parse(k, v)?);
    }
    let page = cat.query(&query)?;
    if args.json {
        return json_line(out, &page);
    }
    writeln!(out, "{} matching of {}", page.total, cat.len()).map_err(io)?;
    for e in &page.entries {
        let p = &e.properties;
        writeln!(
            out,
            "{:>6}  {:<28} proper {:>4} finite {:>4} dim {:.4} degree {:>3} nbhd {:>6}  {}",
            e.id,
            e.ifs.to_string(),
            p.proper_nbs,
            p.finite_nbs,
            p.boundary_dim,
            p.max_degree,
            p.neighborhoods,
            e.tags.join(",")
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Builds the service state around the catalog at `path`.
pub fn app_state(path: &Path) -> Result<Arc<AppState>, ServiceError> {
    let catalog = Arc::new(Mutex::new(open_catalog(path, &SearchConfig::default())?));
    Ok(Arc::new(AppState {
        sessions: SessionManager::new(catalog.clone(), Box::new(|| Box::new(SystemClock))),
        catalog,
    }))
}

pub async fn serve(host: &str, port: u16, catalog: &Path) -> Result<(), ServiceError> {
    let state = app_state(catalog)?;
    let listener = tokio::net::TcpListener::bind((host, port)).await.map_err(io)?;
    eprintln!(
        "serving /api on http://{} with catalog {}",
        listener.local_addr().map_err(io)?,
        catalog.display()
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(io)
}
