//! On-disk dataset layout:
//!
//! ```text
//! <dir>/manifest.json     name, format tag, per-graph root/trim/partition seed
//! <dir>/graphs/<id>.json  graph documents
//! <dir>/pairs.csv         id1,id2,ged,nged,sim,provenance
//! <dir>/splits.json       {"train": [...], "val": [...], "test": [...]}
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, and
//! `manifest.json` is written last.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetError, DatasetManifest, DerivedGraph, PairRecord, Splits};
use crate::graph::{load_graph, save_graph};

pub const MANIFEST_FORMAT: &str = "psimgnn-dataset/1";

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    format: String,
    name: String,
    graphs: Vec<GraphEntry>,
}

#[derive(Serialize, Deserialize)]
struct GraphEntry {
    id: String,
    root_id: String,
    trim_ged: u32,
    partition_seed: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> DatasetError {
    DatasetError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn graph_path(dir: &Path, id: &str) -> Result<PathBuf, DatasetError> {
    if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
        return Err(DatasetError::Invalid(format!("graph id {id:?} is not a valid file name")));
    }
    Ok(dir.join("graphs").join(format!("{id}.json")))
}

pub fn save_manifest(manifest: &DatasetManifest, dir: &Path) -> Result<(), DatasetError> {
    manifest.validate()?;
    let graphs_dir = dir.join("graphs");
    fs::create_dir_all(&graphs_dir).map_err(io_err(&graphs_dir))?;
    for g in &manifest.graphs {
        write_atomic(&graph_path(dir, g.id())?, &save_graph(&g.graph))?;
    }

    let pairs_path = dir.join("pairs.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &manifest.pairs {
        w.serialize(p).map_err(|e| format_err(&pairs_path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| format_err(&pairs_path, e))?;
    write_atomic(&pairs_path, &bytes)?;

    if let Some(s) = &manifest.splits {
        let json = serde_json::to_vec_pretty(s).expect("splits serialize");
        write_atomic(&dir.join("splits.json"), &json)?;
    }

    let doc = ManifestDoc {
        format: MANIFEST_FORMAT.to_string(),
        name: manifest.name.clone(),
        graphs: manifest
            .graphs
            .iter()
            .map(|g| GraphEntry {
                id: g.id().to_string(),
                root_id: g.root_id.clone(),
                trim_ged: g.trim_ged,
                partition_seed: g.partition_seed,
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&doc).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), &json)
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let manifest_path = dir.join("manifest.json");
    let bytes = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
    let doc: ManifestDoc = serde_json::from_slice(&bytes).map_err(|e| format_err(&manifest_path, e))?;
    if doc.format != MANIFEST_FORMAT {
        return Err(format_err(
            &manifest_path,
            format!("unsupported format {:?}, expected {MANIFEST_FORMAT:?}", doc.format),
        ));
    }

    let mut graphs = Vec::with_capacity(doc.graphs.len());
    for entry in doc.graphs {
        let path = graph_path(dir, &entry.id)?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let graph = load_graph(&bytes).map_err(|e| format_err(&path, e))?;
        if graph.id() != entry.id {
            return Err(format_err(&path, format!("id {:?} does not match {:?}", graph.id(), entry.id)));
        }
        graphs.push(DerivedGraph {
            graph,
            root_id: entry.root_id,
            trim_ged: entry.trim_ged,
            partition_seed: entry.partition_seed,
        });
    }

    let pairs_path = dir.join("pairs.csv");
    let mut reader = csv::Reader::from_path(&pairs_path).map_err(|e| format_err(&pairs_path, e))?;
    let pairs = reader
        .deserialize::<PairRecord>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format_err(&pairs_path, e))?;

    let splits_path = dir.join("splits.json");
    let splits = match fs::read(&splits_path) {
        Ok(bytes) => Some(serde_json::from_slice::<Splits>(&bytes).map_err(|e| format_err(&splits_path, e))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(&splits_path)(e)),
    };

    let manifest = DatasetManifest {
        name: doc.name,
        graphs,
        pairs,
        splits,
    };
    manifest.validate()?;
    Ok(manifest)
}
