//! Network checkpoints.
//!
//! Layout: the magic `SDNZ1\n`; UTF-8 `key=value` lines describing the
//! network (plus optional training metadata); an empty line; then every
//! parameter as a little-endian `f32`, in the parameter vector's order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use scoredenoise_core::network::{NetworkConfig, ScoreNetworkParams};

use crate::error::{CliError, Result};
use crate::io::{read_bytes, write_atomic};

pub const MAGIC: &[u8] = b"SDNZ1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ScoreNetworkParams,
    /// Extra header entries, e.g. the training loss variant.
    pub metadata: BTreeMap<String, String>,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn split(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|t| t.trim().parse().map_err(|_| CliError::Input(format!("checkpoint: bad {key} `{v}`"))))
        .collect()
}

const CONFIG_KEYS: [&str; 4] = ["graph_k", "block_widths", "score_hidden", "param_count"];

impl Checkpoint {
    pub fn new(params: ScoreNetworkParams) -> Self {
        Checkpoint { params, metadata: BTreeMap::new() }
    }

    pub fn encode(&self) -> Vec<u8> {
        let cfg = self.params.config();
        let mut header = String::new();
        let _ = writeln!(header, "graph_k={}", cfg.graph_k);
        let _ = writeln!(header, "block_widths={}", join(&cfg.block_widths));
        let _ = writeln!(header, "score_hidden={}", join(&cfg.score_hidden));
        let _ = writeln!(header, "param_count={}", self.params.len());
        for (k, v) in &self.metadata {
            let _ = writeln!(header, "{k}={v}");
        }
        header.push('\n');
        let mut out = Vec::with_capacity(MAGIC.len() + header.len() + 4 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(header.as_bytes());
        for &v in self.params.values() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| CliError::Input(format!("checkpoint: {m}"));
        let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| bad("missing SDNZ1 magic"))?;
        let end = rest
            .windows(2)
            .position(|w| w == b"\n\n")
            .map(|p| p + 1)
            .or_else(|| rest.starts_with(b"\n").then_some(0))
            .ok_or_else(|| bad("header is not terminated by a blank line"))?;
        let header = std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))?;
        let payload = &rest[end + 1..];

        let mut entries = BTreeMap::new();
        for line in header.lines() {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(&format!("malformed header line `{line}`")))?;
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(&format!("duplicate key `{k}`")));
            }
        }
        let get = |k: &str| entries.get(k).ok_or_else(|| bad(&format!("missing `{k}`")));
        let cfg = NetworkConfig {
            graph_k: get("graph_k")?.parse().map_err(|_| bad("bad graph_k"))?,
            block_widths: split("block_widths", get("block_widths")?)?,
            score_hidden: split("score_hidden", get("score_hidden")?)?,
        };
        cfg.validate()?;
        let count: usize = get("param_count")?.parse().map_err(|_| bad("bad param_count"))?;
        if count != cfg.param_count() {
            return Err(bad(&format!("param_count {count} does not match the configuration ({})", cfg.param_count())));
        }
        if payload.len() != 4 * count {
            return Err(bad(&format!("expected {} parameter bytes, found {}", 4 * count, payload.len())));
        }
        let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        let params = ScoreNetworkParams::from_values(&cfg, values)?;
        let metadata = entries.into_iter().filter(|(k, _)| !CONFIG_KEYS.contains(&k.as_str())).collect();
        Ok(Checkpoint { params, metadata })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &ckpt.encode())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::decode(&read_bytes(path)?).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        e => e,
    })
}
