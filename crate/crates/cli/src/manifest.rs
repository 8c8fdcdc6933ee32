use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub wall_clock_ms: u64,
}

/// Reader that hashes every byte it passes through.
pub(crate) struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> HashingReader<R> {
    pub(crate) fn new(inner: R) -> Self {
        HashingReader { inner, hasher: Sha256::new() }
    }

    /// Consumes whatever the parser left unread and returns the hex digest.
    pub(crate) fn finish(mut self) -> io::Result<String> {
        io::copy(&mut self, &mut io::sink())?;
        Ok(hex::encode(self.hasher.finalize()))
    }
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

pub(crate) fn digest_file(path: &Path) -> io::Result<String> {
    HashingReader::new(File::open(path)?).finish()
}

/// Collects outputs while a command runs, then writes the manifest.
pub(crate) struct ManifestBuilder {
    out_dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub(crate) fn new(out_dir: &Path, command: &str, parameters: serde_json::Value) -> Self {
        ManifestBuilder {
            out_dir: out_dir.to_owned(),
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_owned(),
                parameters,
                inputs: Vec::new(),
                outputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                wall_clock_ms: 0,
            },
        }
    }

    pub(crate) fn input(&mut self, path: &Path, sha256: String) {
        self.manifest.inputs.push(InputDigest { path: path.display().to_string(), sha256 });
    }

    /// Path for a new output file, recorded in the manifest.
    pub(crate) fn output(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_owned());
        self.out_dir.join(name)
    }

    pub(crate) fn write(mut self, file_name: &str) -> io::Result<RunManifest> {
        self.manifest.wall_clock_ms = self.started.elapsed().as_millis() as u64;
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).map_err(io::Error::from)?;
        bytes.push(b'\n');
        std::fs::write(self.out_dir.join(file_name), bytes)?;
        Ok(self.manifest)
    }
}
