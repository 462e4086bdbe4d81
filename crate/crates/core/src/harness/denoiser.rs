//! Bridge to the external CV-DnCNN denoiser.
//!
//! The denoiser runs out of process. It is invoked as
//! `<command...> denoise --weights W --input IN --output OUT`, where `IN` and
//! `OUT` are tensor containers of shape `[n, atoms, K]` holding `Ĝ` and the
//! enhanced `G^e = Ĝ − F(Ĝ)`.
//!
//! Weight files start with the magic `CVDNCNNW`, a little-endian `u32` byte
//! length, and a JSON header describing the network; the payload follows and
//! is opaque here.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::container::{read_tensor, write_sidecar, write_tensor};
use crate::harness::dataset::{grids_to_tensor, producer, unstack};
use crate::recovery::AngularDelayGrid;

pub const WEIGHTS_MAGIC: &[u8; 8] = b"CVDNCNNW";
const MAX_HEADER: u32 = 1 << 20;

/// Maps a batch of noisy grids `Ĝ` to enhanced grids `G^e`.
pub trait Denoiser: Sync {
    fn denoise(&self, batch: &[AngularDelayGrid]) -> Result<Vec<AngularDelayGrid>>;
}

impl<F> Denoiser for F
where
    F: Fn(&[AngularDelayGrid]) -> Result<Vec<AngularDelayGrid>> + Sync,
{
    fn denoise(&self, batch: &[AngularDelayGrid]) -> Result<Vec<AngularDelayGrid>> {
        self(batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    ComplexWhitening,
    PerComponent,
}

/// Network description stored at the head of a weight file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub depth: usize,
    pub width: usize,
    pub kernel: usize,
    pub normalization: Normalization,
    pub io_channels: usize,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl WeightsHeader {
    pub fn validate(&self) -> Result<()> {
        if self.io_channels != 1 {
            return Err(Error::format(
                "io_channels",
                format!("expected 1 complex channel, found {}", self.io_channels),
            ));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::format(
                "kernel",
                format!("kernel {} cannot preserve shape", self.kernel),
            ));
        }
        if self.depth < 2 {
            return Err(Error::format(
                "depth",
                format!("depth {} is too shallow", self.depth),
            ));
        }
        if self.width == 0 {
            return Err(Error::format("width", "zero feature maps"));
        }
        Ok(())
    }

    /// Reads and validates the header of a weight file.
    pub fn read(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)
            .map_err(|e| Error::io(path, e))?;
        if &magic != WEIGHTS_MAGIC {
            return Err(Error::format("magic", "not a CV-DnCNN weight file"));
        }
        let mut len = [0u8; 4];
        file.read_exact(&mut len).map_err(|e| Error::io(path, e))?;
        let len = u32::from_le_bytes(len);
        if len > MAX_HEADER {
            return Err(Error::format("header_len", format!("{len} bytes")));
        }
        let mut json = vec![0u8; len as usize];
        file.read_exact(&mut json).map_err(|e| Error::io(path, e))?;
        let header: WeightsHeader =
            serde_json::from_slice(&json).map_err(|e| Error::format("header", e.to_string()))?;
        header.validate()?;
        Ok(header)
    }

    /// Serializes the header the way [`WeightsHeader::read`] expects.
    pub fn to_bytes(&self) -> Vec<u8> {
        let json = serde_json::to_vec(self).expect("header serializes");
        let mut out = WEIGHTS_MAGIC.to_vec();
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out
    }
}

/// Runs the denoiser's command-line entry point on container files.
#[derive(Debug, Clone)]
pub struct ExternalDenoiser {
    command: Vec<String>,
    weights: PathBuf,
    scratch: PathBuf,
    pub header: WeightsHeader,
}

impl ExternalDenoiser {
    /// `command` is the program followed by any fixed leading arguments.
    pub fn new(command: Vec<String>, weights: PathBuf, scratch: PathBuf) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::Denoiser("empty denoiser command".into()));
        }
        let header = WeightsHeader::read(&weights)?;
        std::fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        Ok(Self {
            command,
            weights,
            scratch,
            header,
        })
    }
}

#[derive(Serialize)]
struct BatchMeta {
    producer: String,
    role: &'static str,
    convention: crate::recovery::DftConvention,
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&self, batch: &[AngularDelayGrid]) -> Result<Vec<AngularDelayGrid>> {
        let Some(first) = batch.first() else {
            return Ok(Vec::new());
        };
        if batch.iter().any(|g| g.shape() != first.shape()) {
            return Err(Error::Shape("denoiser batch mixes grid shapes".into()));
        }
        let tag = std::process::id();
        let input = self.scratch.join(format!("denoise-{tag}.in.ctns"));
        let output = self.scratch.join(format!("denoise-{tag}.out.ctns"));
        let tensor = grids_to_tensor(batch);
        write_sidecar(
            &input,
            &BatchMeta {
                producer: producer(),
                role: "noisy",
                convention: first.convention,
            },
        )?;
        write_tensor(&input, &tensor)?;
        let _ = std::fs::remove_file(&output);

        let result = Command::new(&self.command[0])
            .args(&self.command[1..])
            .arg("denoise")
            .arg("--weights")
            .arg(&self.weights)
            .arg("--input")
            .arg(&input)
            .arg("--output")
            .arg(&output)
            .output()
            .map_err(|e| Error::Denoiser(format!("failed to launch `{}`: {e}", self.command[0])))?;
        if !result.status.success() {
            return Err(Error::Denoiser(format!(
                "`{}` exited with {}: {}",
                self.command.join(" "),
                result.status,
                String::from_utf8_lossy(&result.stderr).trim()
            )));
        }
        let out = read_tensor(&output)?;
        if out.shape != tensor.shape {
            return Err(Error::format(
                "shape",
                format!(
                    "denoiser returned {:?} for input {:?}",
                    out.shape, tensor.shape
                ),
            ));
        }
        let _ = std::fs::remove_file(&input);
        let _ = std::fs::remove_file(&output);
        Ok(unstack(&out)?
            .into_iter()
            .map(|matrix| AngularDelayGrid {
                matrix,
                convention: first.convention,
            })
            .collect())
    }
}
