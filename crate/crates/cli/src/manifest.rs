//! Sidecar manifests: every artifact `X` gets `X.manifest` recording the
//! stage, its configuration hash and the artifact digest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Sub-seed for a named stage: the first eight bytes of
/// `sha256(seed_le || label)`.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Hash over the stage name, its canonical parameter text and upstream hashes.
pub fn config_hash(stage: &str, params: &str, upstream: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update(b"\n");
    h.update(params.as_bytes());
    for u in upstream {
        h.update(b"\n");
        h.update(u.as_bytes());
    }
    hex(&h.finalize())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub artifact_sha256: String,
    pub params: String,
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "stage: {}", self.stage);
        let _ = writeln!(s, "config_hash: {}", self.config_hash);
        let _ = writeln!(s, "artifact_sha256: {}", self.artifact_sha256);
        let _ = writeln!(s, "tool_version: {}", env!("CARGO_PKG_VERSION"));
        s.push_str("params:\n");
        for line in self.params.lines() {
            let _ = writeln!(s, "  {line}");
        }
        s
    }

    fn parse(text: &str) -> Option<Self> {
        let field = |name: &str| {
            text.lines()
                .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(": ")))
                .map(str::to_string)
        };
        let params = text
            .split_once("params:\n")
            .map(|(_, p)| p.lines().map(|l| l.trim_start()).collect::<Vec<_>>().join("\n"))
            .unwrap_or_default();
        Some(Self {
            stage: field("stage")?,
            config_hash: field("config_hash")?,
            artifact_sha256: field("artifact_sha256")?,
            params,
        })
    }
}

/// Writes `bytes` to `path` and its manifest next to it.
pub fn write_artifact(
    stage: &'static str,
    path: &Path,
    bytes: &[u8],
    config_hash: &str,
    params: &str,
) -> CliResult<()> {
    let io = |e: std::io::Error| {
        CliError::new(stage, crate::error::ExitKind::Internal, format!("{}: {e}", path.display()))
    };
    std::fs::write(path, bytes).map_err(io)?;
    let m = Manifest {
        stage: stage.to_string(),
        config_hash: config_hash.to_string(),
        artifact_sha256: sha256_hex(bytes),
        params: params.to_string(),
    };
    std::fs::write(manifest_path(path), m.to_text()).map_err(io)
}

/// Reads an upstream artifact, checking that its manifest exists and its
/// digest still matches the file.
pub fn read_artifact(stage: &'static str, path: &Path) -> CliResult<(Vec<u8>, Manifest)> {
    let bytes = std::fs::read(path)
        .map_err(|_| CliError::dependency(stage, format!("{} not found", path.display())))?;
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath)
        .map_err(|_| CliError::dependency(stage, format!("{} not found", mpath.display())))?;
    let m = Manifest::parse(&text)
        .ok_or_else(|| CliError::dependency(stage, format!("{} is malformed", mpath.display())))?;
    if m.artifact_sha256 != sha256_hex(&bytes) {
        return Err(CliError::dependency(
            stage,
            format!("{} is stale: contents do not match its manifest", path.display()),
        ));
    }
    Ok((bytes, m))
}
