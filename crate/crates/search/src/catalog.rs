//! Append-only JSON-lines catalog: one header line, then one entry per line.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gasketlab_core::analysis::PropertyRecord;
use gasketlab_core::lattice::Ifs;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::CanonicalKey;
use crate::config::{Filter, SearchConfig};

pub const CATALOG_VERSION: u32 = 1;
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("catalog is missing its header line")]
    MissingHeader,
    #[error("unsupported catalog version {0}")]
    Version(u32),
    #[error("duplicate {what} {value} in catalog")]
    Duplicate { what: &'static str, value: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogHeader {
    pub version: u32,
    pub rng: String,
    pub seed: u64,
    pub config: SearchConfig,
}

impl CatalogHeader {
    pub fn new(config: &SearchConfig) -> Self {
        CatalogHeader {
            version: CATALOG_VERSION,
            rng: RNG_NAME.to_string(),
            seed: config.seed,
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: u64,
    pub ifs: Ifs,
    pub canonical_key: CanonicalKey,
    pub properties: PropertyRecord,
    /// RFC 3339 timestamp.
    pub created_at: String,
    pub tags: Vec<String>,
}

/// Descriptive labels derived from the record.
pub fn default_tags(r: &PropertyRecord) -> Vec<String> {
    let mut tags = vec![if r.connected {
        "connected"
    } else if r.has_intervals {
        "disconnected"
    } else {
        "cantor"
    }
    .to_string()];
    if r.has_intervals {
        tags.push("segments".to_string());
    }
    if r.proper_nbs > 0 && r.finite_nbs == r.proper_nbs {
        tags.push("finite-type-boundary".to_string());
    }
    tags
}

/// Boundary dimension bucket used by the per-dimension cap.
pub fn dim_bucket(dim: f64) -> i64 {
    (dim * 1e4).round() as i64
}

#[derive(Debug)]
pub struct Catalog {
    header: CatalogHeader,
    entries: Vec<CatalogEntry>,
    by_key: HashMap<CanonicalKey, usize>,
    buckets: HashMap<i64, u32>,
    path: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
}

impl Catalog {
    pub fn in_memory(header: CatalogHeader) -> Self {
        Catalog {
            header,
            entries: Vec::new(),
            by_key: HashMap::new(),
            buckets: HashMap::new(),
            path: None,
            writer: None,
        }
    }

    /// Creates or truncates `path` and writes the header line.
    pub fn create(path: impl AsRef<Path>, header: CatalogHeader) -> Result<Self, CatalogError> {
        let path = path.as_ref().to_path_buf();
        let mut writer = BufWriter::new(File::create(&path)?);
        serde_json::to_writer(&mut writer, &header)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        let mut c = Catalog::in_memory(header);
        c.path = Some(path);
        c.writer = Some(writer);
        Ok(c)
    }

    /// Loads an existing catalog and keeps it open for appends.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref().to_path_buf();
        let reader = BufReader::new(File::open(&path)?);
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (n, first) = lines.next().ok_or(CatalogError::MissingHeader)?;
        let header: CatalogHeader =
            serde_json::from_str(&first?).map_err(|source| CatalogError::Parse { line: n, source })?;
        if header.version != CATALOG_VERSION {
            return Err(CatalogError::Version(header.version));
        }
        let mut c = Catalog::in_memory(header);
        for (n, line) in lines {
            let entry: CatalogEntry =
                serde_json::from_str(&line?).map_err(|source| CatalogError::Parse { line: n, source })?;
            c.insert(entry)?;
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        c.writer = Some(BufWriter::new(file));
        c.path = Some(path);
        Ok(c)
    }

    /// Opens `path` when it exists, otherwise creates it with `header`.
    pub fn open_or_create(path: impl AsRef<Path>, header: CatalogHeader) -> Result<Self, CatalogError> {
        if path.as_ref().exists() {
            Catalog::open(path)
        } else {
            Catalog::create(path, header)
        }
    }

    fn insert(&mut self, entry: CatalogEntry) -> Result<(), CatalogError> {
        if self.by_key.contains_key(&entry.canonical_key) {
            return Err(CatalogError::Duplicate {
                what: "canonical key",
                value: entry.canonical_key.to_string(),
            });
        }
        if self.entries.last().is_some_and(|e| e.id >= entry.id) {
            return Err(CatalogError::Duplicate {
                what: "or non-increasing id",
                value: entry.id.to_string(),
            });
        }
        *self
            .buckets
            .entry(dim_bucket(entry.properties.boundary_dim))
            .or_insert(0) += 1;
        self.by_key.insert(entry.canonical_key.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    /// Writes the entry line, then records it in memory.
    pub fn append(&mut self, entry: CatalogEntry) -> Result<(), CatalogError> {
        if self.by_key.contains_key(&entry.canonical_key) {
            return Err(CatalogError::Duplicate {
                what: "canonical key",
                value: entry.canonical_key.to_string(),
            });
        }
        if let Some(w) = self.writer.as_mut() {
            serde_json::to_writer(&mut *w, &entry)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.insert(entry)
    }

    pub fn header(&self) -> &CatalogHeader {
        &self.header
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.id + 1)
    }

    pub fn get_by_key(&self, key: &CanonicalKey) -> Option<&CatalogEntry> {
        self.by_key.get(key).map(|&i| &self.entries[i])
    }

    pub fn bucket_count(&self, dim: f64) -> u32 {
        self.buckets.get(&dim_bucket(dim)).copied().unwrap_or(0)
    }

    pub fn query(&self, q: &CatalogQuery) -> Result<QueryPage, QueryError> {
        q.validate()?;
        let mut hits: Vec<&CatalogEntry> = self
            .entries
            .iter()
            .filter(|e| q.filters.iter().all(|f| f.matches(&e.properties)))
            .collect();
        if let Some(key) = &q.sort {
            // stable: ties keep catalog order
            hits.sort_by(|a, b| {
                let x = a.properties.numeric_field(key).unwrap_or(f64::NAN);
                let y = b.properties.numeric_field(key).unwrap_or(f64::NAN);
                match q.order {
                    SortOrder::Asc => x.total_cmp(&y),
                    SortOrder::Desc => y.total_cmp(&x),
                }
            });
        }
        let total = hits.len();
        let entries = hits
            .into_iter()
            .skip(q.offset)
            .take(q.limit.unwrap_or(usize::MAX))
            .cloned()
            .collect();
        Ok(QueryPage { total, entries })
    }

    /// Entries that break an active filter, including the per-dimension cap.
    pub fn audit(&self, filters: &[Filter]) -> Vec<u64> {
        let mut seen: HashMap<i64, u32> = HashMap::new();
        let mut bad = Vec::new();
        for e in &self.entries {
            let n = seen.entry(dim_bucket(e.properties.boundary_dim)).or_insert(0);
            *n += 1;
            let ok = filters.iter().all(|f| match f {
                Filter::CapPerBoundaryDim(cap) => *n <= *cap,
                f => f.admits(&e.properties),
            });
            if !ok {
                bad.push(e.id);
            }
        }
        bad
    }

    pub fn keys(&self) -> HashSet<&CanonicalKey> {
        self.by_key.keys().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    #[default]
    Asc,
    Desc,
}

/// Closed range on one numeric record field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeFilter {
    pub key: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl RangeFilter {
    /// Parses `value` as `x` (exact), `a..b`, `a..` or `..b`; booleans read as 0/1.
    pub fn parse(key: &str, value: &str) -> Result<Self, QueryError> {
        let num = |s: &str| -> Result<Option<f64>, QueryError> {
            let s = s.trim();
            match s {
                "" => Ok(None),
                "true" | "satisfied" => Ok(Some(1.0)),
                "false" | "violated" => Ok(Some(0.0)),
                _ => s.parse().map(Some).map_err(|_| QueryError::BadValue {
                    key: key.to_string(),
                    value: value.to_string(),
                }),
            }
        };
        let (min, max) = match value.split_once("..") {
            Some((a, b)) => (num(a)?, num(b)?),
            None => {
                let x = num(value)?.ok_or_else(|| QueryError::BadValue {
                    key: key.to_string(),
                    value: value.to_string(),
                })?;
                (Some(x), Some(x))
            }
        };
        let f = RangeFilter {
            key: key.to_string(),
            min,
            max,
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<(), QueryError> {
        check_key(&self.key)
    }

    pub fn matches(&self, r: &PropertyRecord) -> bool {
        let Some(x) = r.numeric_field(&self.key) else {
            return false;
        };
        self.min.is_none_or(|m| x >= m) && self.max.is_none_or(|m| x <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("unknown key {key:?}; valid keys: {}", valid.join(", "))]
    UnknownKey { key: String, valid: Vec<String> },
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
    #[error("unknown sort order {0:?} (expected asc or desc)")]
    BadOrder(String),
}

fn check_key(key: &str) -> Result<(), QueryError> {
    if PropertyRecord::NUMERIC_FIELDS.contains(&key) {
        Ok(())
    } else {
        Err(QueryError::UnknownKey {
            key: key.to_string(),
            valid: PropertyRecord::NUMERIC_FIELDS.iter().map(|s| s.to_string()).collect(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CatalogQuery {
    pub sort: Option<String>,
    pub order: SortOrder,
    pub filters: Vec<RangeFilter>,
    pub offset: usize,
    pub limit: Option<usize>,
}

impl CatalogQuery {
    /// Builds a query from `key=value` pairs such as a URL query string.
    ///
    /// `sort`, `order`, `offset` and `limit` are reserved; every other key is
    /// a range filter on a record field.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, QueryError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut q = CatalogQuery::default();
        for (k, v) in pairs {
            let bad = || QueryError::BadValue {
                key: k.to_string(),
                value: v.to_string(),
            };
            match k {
                "sort" => q.sort = Some(v.to_string()),
                "order" => {
                    q.order = match v {
                        "asc" => SortOrder::Asc,
                        "desc" => SortOrder::Desc,
                        _ => return Err(QueryError::BadOrder(v.to_string())),
                    }
                }
                "offset" => q.offset = v.parse().map_err(|_| bad())?,
                "limit" => q.limit = Some(v.parse().map_err(|_| bad())?),
                _ => q.filters.push(RangeFilter::parse(k, v)?),
            }
        }
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if let Some(s) = &self.sort {
            check_key(s)?;
        }
        self.filters.iter().try_for_each(RangeFilter::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPage {
    /// Matching entries before pagination.
    pub total: usize,
    pub entries: Vec<CatalogEntry>,
}
