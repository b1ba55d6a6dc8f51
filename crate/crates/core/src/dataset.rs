//! Dataset ingestion and emission.
//!
//! A dataset is described by a manifest: a version line, the declared
//! dimensionality, and one `path,label,split` record per bag. Each referenced
//! feature file holds one descriptor per line as comma-separated decimal
//! floats; `#` lines are comments. Bag ids are the file stems of the
//! referenced paths.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::active::MapOracle;
use crate::error::{Error, Result};
use crate::types::{FeatureVector, VideoBag};

pub const MANIFEST_VERSION_LINE: &str = "# manifest v1";
pub const FEATURES_VERSION_LINE: &str = "# features v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    Stream,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Stream => "stream",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "stream" => Ok(Split::Stream),
            other => Err(Error::invalid(
                "split",
                format!("`{other}` is not one of train, test, stream"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub bag: VideoBag,
    pub split: Split,
}

/// An in-memory dataset: uniform dimensionality plus labeled bags.
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    items: Vec<DatasetItem>,
}

impl Dataset {
    pub fn new(dim: usize, items: Vec<DatasetItem>) -> Result<Self> {
        for item in &items {
            if item.bag.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: item.bag.dim(),
                });
            }
        }
        Ok(Dataset { dim, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[DatasetItem] {
        &self.items
    }

    pub fn bags(&self) -> impl Iterator<Item = &VideoBag> {
        self.items.iter().map(|i| &i.bag)
    }

    pub fn split_bags(&self, split: Split) -> Vec<&VideoBag> {
        self.items
            .iter()
            .filter(|i| i.split == split)
            .map(|i| &i.bag)
            .collect()
    }

    pub fn has_split(&self, split: Split) -> bool {
        self.items.iter().any(|i| i.split == split)
    }

    /// Oracle over every bag that carries a stored label.
    pub fn oracle(&self) -> MapOracle {
        let mut o = MapOracle::new();
        for item in &self.items {
            if let Some(label) = item.bag.true_label() {
                o.insert(item.bag.id(), label);
            }
        }
        o
    }

    /// Loads a dataset from a manifest file.
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::data(path.display().to_string(), 0, format!("cannot read: {e}"))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let display = path.display().to_string();

        let mut dim: Option<usize> = None;
        let mut items = Vec::new();
        let mut seen_ids = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("dim") {
                let rest = rest.trim_start();
                if let Some(value) = rest.strip_prefix('=') {
                    let value = value.trim();
                    let d: usize = value.parse().map_err(|_| {
                        Error::data(&display, lineno, format!("bad dimensionality `{value}`"))
                    })?;
                    if d == 0 {
                        return Err(Error::data(&display, lineno, "dimensionality must be positive"));
                    }
                    dim = Some(d);
                    continue;
                }
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::data(
                    &display,
                    lineno,
                    format!("expected `path,label,split`, found `{line}`"),
                ));
            }
            let Some(dim) = dim else {
                return Err(Error::data(
                    &display,
                    lineno,
                    "record before the `dim = N` declaration",
                ));
            };
            validate_label(fields[1]).map_err(|reason| Error::data(&display, lineno, reason))?;
            let split: Split = fields[2]
                .parse()
                .map_err(|e: Error| Error::data(&display, lineno, e.to_string()))?;
            let rel = PathBuf::from(fields[0]);
            let file = base.join(&rel);
            let id = rel
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::data(&display, lineno, "record path has no file stem"))?
                .to_string();
            if !seen_ids.insert(id.clone()) {
                return Err(Error::data(
                    &display,
                    lineno,
                    format!("duplicate bag id `{id}`"),
                ));
            }
            let descriptors = read_feature_file(&file, dim)?;
            let bag = VideoBag::new(id, descriptors, Some(fields[1].to_string())).map_err(
                |e| Error::data(file.display().to_string(), 0, e.to_string()),
            )?;
            items.push(DatasetItem { bag, split });
        }
        let Some(dim) = dim else {
            return Err(Error::data(&display, 0, "missing `dim = N` declaration"));
        };
        Dataset::new(dim, items)
    }

    /// Writes the dataset as a manifest plus one feature file per bag under
    /// `dir/features/`. Bag ids become the file stems.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let feat_dir = dir.join("features");
        fs::create_dir_all(&feat_dir)?;
        let mut manifest = String::new();
        manifest.push_str(MANIFEST_VERSION_LINE);
        manifest.push('\n');
        let _ = writeln!(manifest, "dim = {}", self.dim);
        for item in &self.items {
            let id = item.bag.id();
            if !id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::invalid(
                    "bag id",
                    format!("`{id}` is not filesystem-safe"),
                ));
            }
            let label = item.bag.true_label().ok_or_else(|| {
                Error::invalid("dataset", format!("bag `{id}` has no label to write"))
            })?;
            validate_label(label).map_err(|r| Error::invalid("label", r))?;
            let rel = format!("features/{id}.csv");
            write_feature_file(dir.join(&rel), item.bag.descriptors())?;
            let _ = writeln!(manifest, "{rel},{label},{}", item.split);
        }
        let manifest_path = dir.join("manifest.txt");
        fs::write(&manifest_path, manifest)?;
        Ok(manifest_path)
    }
}

fn validate_label(label: &str) -> std::result::Result<(), String> {
    if label.is_empty() {
        return Err("empty label".into());
    }
    if label == "?" {
        return Err("`?` is reserved for unknown predictions".into());
    }
    if label.contains(',') || label.contains('\n') {
        return Err(format!("label `{label}` contains a separator character"));
    }
    Ok(())
}

/// Reads one feature file: one descriptor per line, comma-separated floats.
pub fn read_feature_file(path: impl AsRef<Path>, expect_dim: usize) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(&display, 0, format!("cannot read: {e}")))?;
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut coords = Vec::with_capacity(expect_dim);
        for token in line.split(',') {
            let token = token.trim();
            let v: f64 = token.parse().map_err(|_| {
                Error::data(&display, lineno, format!("non-numeric value `{token}`"))
            })?;
            coords.push(v);
        }
        if coords.len() != expect_dim {
            return Err(Error::data(
                &display,
                lineno,
                format!("expected {expect_dim} values, found {}", coords.len()),
            ));
        }
        let fv = FeatureVector::new(coords)
            .map_err(|e| Error::data(&display, lineno, e.to_string()))?;
        rows.push(fv);
    }
    if rows.is_empty() {
        return Err(Error::data(&display, 0, "feature file holds no descriptors"));
    }
    Ok(rows)
}

/// Writes one feature file in the format `read_feature_file` accepts.
pub fn write_feature_file(path: impl AsRef<Path>, rows: &[FeatureVector]) -> Result<()> {
    let mut out = String::new();
    out.push_str(FEATURES_VERSION_LINE);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for c in row.as_slice() {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{c}");
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
