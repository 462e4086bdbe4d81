//! Paired `(Ĝ, G)` angular-delay datasets for offline denoiser training.
//!
//! A dataset is a directory holding `manifest.json` and, per chunk,
//! `chunk-NNNNN.noisy.ctns` / `chunk-NNNNN.clean.ctns` tensors of shape
//! `[samples, atoms, K]`. Sample `i` is trial `i` of the master seed, so an
//! interrupted export resumes by skipping the chunks already on disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::container::{read_header, read_tensor, write_sidecar, write_tensor, Tensor};
use crate::harness::pipeline::{run_trial, EstimationSetup};
use crate::harness::seeds::{derive_seed, Purpose};
use crate::linalg::CMat;
use crate::recovery::{AngularDelayGrid, DftConvention};

pub const DATASET_FORMAT: &str = "irs-chanest-dataset";
pub const DATASET_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

pub fn producer() -> String {
    format!("irs-chanest {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkEntry {
    pub noisy: String,
    pub clean: String,
    pub first: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub producer: String,
    pub count: usize,
    pub chunk_size: usize,
    /// Angular rows (`grid_rx · grid_tx`).
    pub rows: usize,
    /// Delay columns (`K`).
    pub delays: usize,
    pub grid_shape: (usize, usize),
    pub convention: DftConvention,
    pub master_seed: u64,
    pub setup: EstimationSetup,
    pub chunks: Vec<ChunkEntry>,
}

#[derive(Serialize)]
struct ChunkMeta<'a> {
    producer: String,
    first: usize,
    len: usize,
    kind: &'a str,
    snr_db: f64,
    paths: usize,
    master_seed: u64,
    channel_seeds: Vec<u64>,
}

/// One training pair with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub index: usize,
    pub noisy: AngularDelayGrid,
    pub clean: AngularDelayGrid,
    pub snr_db: f64,
    pub channel_seed: u64,
}

fn stack(grids: &[CMat]) -> Tensor {
    let (rows, cols) = grids.first().map_or((0, 0), |g| g.shape());
    let mut data = Vec::with_capacity(grids.len() * rows * cols);
    for g in grids {
        for r in 0..rows {
            data.extend(g.row(r).iter().copied());
        }
    }
    Tensor {
        shape: vec![grids.len(), rows, cols],
        data,
    }
}

/// Splits a `[n, rows, cols]` tensor back into matrices.
pub fn unstack(t: &Tensor) -> Result<Vec<CMat>> {
    let [n, rows, cols] = t.shape[..] else {
        return Err(Error::format(
            "shape",
            format!("expected 3 dimensions, got {:?}", t.shape),
        ));
    };
    Ok((0..n)
        .map(|s| {
            let base = s * rows * cols;
            CMat::from_row_slice(rows, cols, &t.data[base..base + rows * cols])
        })
        .collect())
}

pub fn grids_to_tensor(grids: &[AngularDelayGrid]) -> Tensor {
    let mats: Vec<CMat> = grids.iter().map(|g| g.matrix.clone()).collect();
    stack(&mats)
}

fn chunk_is_complete(path: &Path, expected: &[usize]) -> bool {
    read_header(path).is_ok_and(|h| h.shape == expected)
}

/// Generates `count` pairs into `dir`, writing `chunk_size` samples per file.
pub fn export_dataset(
    setup: &EstimationSetup,
    count: usize,
    chunk_size: usize,
    master_seed: u64,
    dir: &Path,
) -> Result<DatasetManifest> {
    if count == 0 || chunk_size == 0 {
        return Err(Error::Config(
            "count and chunk size must be positive".into(),
        ));
    }
    setup.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dict = setup.dictionary()?;
    let rows = dict.atoms();
    let delays = setup.scenario.subcarriers;

    let mut chunks = Vec::new();
    for (c, first) in (0..count).step_by(chunk_size).enumerate() {
        let len = chunk_size.min(count - first);
        let entry = ChunkEntry {
            noisy: format!("chunk-{c:05}.noisy.ctns"),
            clean: format!("chunk-{c:05}.clean.ctns"),
            first,
            len,
        };
        let noisy_path = dir.join(&entry.noisy);
        let clean_path = dir.join(&entry.clean);
        let shape = [len, rows, delays];
        if chunk_is_complete(&noisy_path, &shape) && chunk_is_complete(&clean_path, &shape) {
            chunks.push(entry);
            continue;
        }

        let pairs = (first..first + len)
            .into_par_iter()
            .map(|i| {
                let out = run_trial(setup, &dict, master_seed, i as u64)?;
                Ok((out.noisy_grid().matrix, out.clean_grid(&dict).matrix))
            })
            .collect::<Result<Vec<_>>>()?;
        let (noisy, clean): (Vec<CMat>, Vec<CMat>) = pairs.into_iter().unzip();

        let seeds: Vec<u64> = (first..first + len)
            .map(|i| derive_seed(master_seed, i as u64, Purpose::Channel))
            .collect();
        for (path, mats, kind) in [
            (&clean_path, &clean, "clean"),
            (&noisy_path, &noisy, "noisy"),
        ] {
            write_sidecar(
                path,
                &ChunkMeta {
                    producer: producer(),
                    first,
                    len,
                    kind,
                    snr_db: setup.sounding.snr_db,
                    paths: setup.scenario.paths,
                    master_seed,
                    channel_seeds: seeds.clone(),
                },
            )?;
            // tensor last: its presence marks the chunk as done
            write_tensor(path, &stack(mats))?;
        }
        chunks.push(entry);
    }

    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        producer: producer(),
        count,
        chunk_size,
        rows,
        delays,
        grid_shape: dict.grid_shape(),
        convention: DftConvention::Unitary,
        master_seed,
        setup: setup.clone(),
        chunks,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format("manifest", e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

/// Lazily iterates the pairs of a dataset directory.
pub struct DatasetReader {
    dir: PathBuf,
    manifest: DatasetManifest,
    chunk: usize,
    buffered: std::vec::IntoIter<SamplePair>,
}

impl DatasetReader {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    fn load_chunk(&self, entry: &ChunkEntry) -> Result<Vec<SamplePair>> {
        let expected = vec![entry.len, self.manifest.rows, self.manifest.delays];
        let load = |name: &str| -> Result<Vec<CMat>> {
            let t = read_tensor(&self.dir.join(name))?;
            if t.shape != expected {
                return Err(Error::format(
                    "shape",
                    format!("{name}: expected {expected:?}, found {:?}", t.shape),
                ));
            }
            unstack(&t)
        };
        let noisy = load(&entry.noisy)?;
        let clean = load(&entry.clean)?;
        let convention = self.manifest.convention;
        Ok(noisy
            .into_iter()
            .zip(clean)
            .enumerate()
            .map(|(i, (n, c))| {
                let index = entry.first + i;
                SamplePair {
                    index,
                    noisy: AngularDelayGrid {
                        matrix: n,
                        convention,
                    },
                    clean: AngularDelayGrid {
                        matrix: c,
                        convention,
                    },
                    snr_db: self.manifest.setup.sounding.snr_db,
                    channel_seed: derive_seed(
                        self.manifest.master_seed,
                        index as u64,
                        Purpose::Channel,
                    ),
                }
            })
            .collect())
    }
}

impl Iterator for DatasetReader {
    type Item = Result<SamplePair>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(pair) = self.buffered.next() {
                return Some(Ok(pair));
            }
            let entry = self.manifest.chunks.get(self.chunk)?.clone();
            self.chunk += 1;
            match self.load_chunk(&entry) {
                Ok(pairs) => self.buffered = pairs.into_iter(),
                Err(e) => {
                    // stop after reporting
                    self.chunk = self.manifest.chunks.len();
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Opens a dataset directory, validating its manifest.
pub fn import_dataset(dir: &Path) -> Result<DatasetReader> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::format("manifest", e.to_string()))?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::format(
            "format",
            format!("unexpected format `{}`", manifest.format),
        ));
    }
    if manifest.version != DATASET_VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported dataset version {}", manifest.version),
        ));
    }
    let listed: usize = manifest.chunks.iter().map(|c| c.len).sum();
    if listed != manifest.count {
        return Err(Error::format(
            "count",
            format!(
                "manifest lists {listed} samples but declares {}",
                manifest.count
            ),
        ));
    }
    Ok(DatasetReader {
        dir: dir.to_path_buf(),
        manifest,
        chunk: 0,
        buffered: Vec::new().into_iter(),
    })
}
