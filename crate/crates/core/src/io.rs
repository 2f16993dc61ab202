//! File formats: embedding CSV with a JSON sidecar, ensemble archives,
//! uncertainty reports and plain result tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbedResult, LossSpec};
use crate::ensemble::{EmbeddingEnsemble, EnsembleInfo, EnsembleSource};
use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::psychophysics::PsychoResult;
use crate::uncertainty::{folded_average_uncertainty, DimensionScan, DistanceStats, PointStats};

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::File {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            line: 0,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}

/// Full round-trip precision: 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_embedding(x: &Embedding) -> String {
    let mut out = String::new();
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_embedding(text: &str) -> Result<Embedding> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: r + 1,
            message: e.to_string(),
        })?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|e| Error::ParseCell {
                    row: r + 1,
                    column: c + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Embedding::from_rows(&rows)
}

pub fn write_embedding(path: impl AsRef<Path>, x: &Embedding) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_embedding(x)).map_err(file_err(path))
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<Embedding> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    parse_embedding(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub n: usize,
    pub d: usize,
    pub loss: LossSpec,
    pub final_loss: f64,
    pub iterations: usize,
    pub seed: u64,
    pub converged: bool,
}

impl EmbeddingMeta {
    pub fn from_result(res: &EmbedResult, loss: LossSpec) -> Self {
        Self {
            n: res.embedding.n(),
            d: res.embedding.dim(),
            loss,
            final_loss: res.loss,
            iterations: res.iterations,
            seed: res.seed,
            converged: res.converged,
        }
    }
}

/// Sidecar path: `points.csv` → `points.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the embedding CSV and its JSON metadata sidecar.
pub fn write_embed_result(path: impl AsRef<Path>, res: &EmbedResult, loss: LossSpec) -> Result<()> {
    let path = path.as_ref();
    write_embedding(path, &res.embedding)?;
    write_json(sidecar_path(path), &EmbeddingMeta::from_result(res, loss))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(file_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EnsembleManifest {
    source: EnsembleSource,
    b: usize,
    n: usize,
    d: usize,
    aligned: bool,
    info: EnsembleInfo,
}

pub fn member_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("member_{k}.csv"))
}

/// Writes `member_<k>.csv` for each member plus `ensemble.json`.
pub fn write_ensemble(dir: impl AsRef<Path>, ens: &EmbeddingEnsemble) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(file_err(dir))?;
    for (k, m) in ens.members().iter().enumerate() {
        write_embedding(member_path(dir, k), m)?;
    }
    write_json(
        dir.join("ensemble.json"),
        &EnsembleManifest {
            source: ens.source,
            b: ens.len(),
            n: ens.n(),
            d: ens.dim(),
            aligned: ens.aligned,
            info: ens.info.clone(),
        },
    )
}

pub fn read_ensemble(dir: impl AsRef<Path>) -> Result<EmbeddingEnsemble> {
    let dir = dir.as_ref();
    let manifest: EnsembleManifest = read_json(dir.join("ensemble.json"))?;
    let members = (0..manifest.b)
        .map(|k| read_embedding(member_path(dir, k)))
        .collect::<Result<Vec<_>>>()?;
    let mut ens = EmbeddingEnsemble::new(members, manifest.source, manifest.aligned)?;
    if ens.n() != manifest.n || ens.dim() != manifest.d {
        return Err(Error::Shape(format!(
            "archive declares {}x{} members, found {}x{}",
            manifest.n,
            manifest.d,
            ens.n(),
            ens.dim()
        )));
    }
    ens.info = manifest.info;
    Ok(ens)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub n: usize,
    pub rho_bar: Vec<f64>,
    pub sigma_bar: Vec<f64>,
    pub point_means: Option<Vec<f64>>,
    pub point_covariances: Option<Vec<Vec<f64>>>,
    pub folded_average: f64,
    pub scan: Option<DimensionScan>,
}

impl UncertaintyReport {
    pub fn new(
        stats: &DistanceStats,
        points: Option<&PointStats>,
        scan: Option<DimensionScan>,
    ) -> Result<Self> {
        Ok(Self {
            n: stats.n(),
            rho_bar: stats.rho_bar().to_vec(),
            sigma_bar: stats.sigma_bar().to_vec(),
            point_means: points.map(|p| p.means.as_slice().to_vec()),
            point_covariances: points.map(|p| p.covariances.clone()),
            folded_average: folded_average_uncertainty(stats)?,
            scan,
        })
    }
}

/// A plain CSV table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(&self.header).map_err(|e| csv_err(path, e))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(file_err(path))
    }
}

/// One row per stimulus per lengthscale.
pub fn psycho_table(results: &[PsychoResult], seed: u64) -> Table {
    let mut t = Table::new(&["stimulus", "mean", "std", "lengthscale", "seed"]);
    for res in results {
        for ((s, m), sd) in res.stimuli.iter().zip(&res.mean).zip(&res.std) {
            t.push(vec![
                s.to_string(),
                m.to_string(),
                sd.to_string(),
                res.lengthscale.to_string(),
                seed.to_string(),
            ]);
        }
    }
    t
}
