//! Binary value-function files.
//!
//! Layout:
//!
//! ```text
//! magic      4 bytes  "FTVF"
//! version    u32 LE   (currently 1)
//! header_len u32 LE
//! header     JSON (UTF-8), deterministic field order
//! payload    one f64-LE row-major block per snapshot, then the terminal
//!            (error-function) block
//! checksum   32 bytes, SHA-256 over everything before it
//! ```
//!
//! The header carries the model identity and a parameter hash; loaders verify
//! magic, version, checksum, and that the hash matches the requesting
//! configuration before any values are used.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fastrack::grid::{Grid, GridFunction};
use fastrack::hjsolver::ValueFunction;

pub const MAGIC: &[u8; 4] = b"FTVF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileHeader {
    /// Model identifier; decomposed blocks carry a `:x`-style suffix.
    pub model: String,
    pub params: BTreeMap<String, f64>,
    /// Binds the file to the exact parameters and grid that produced it.
    pub param_hash: String,
    pub error_id: String,
    pub grid_lower: Vec<f64>,
    pub grid_upper: Vec<f64>,
    pub grid_nodes: Vec<usize>,
    pub grid_periodic: Vec<bool>,
    pub times: Vec<f64>,
    pub converged: bool,
    pub truncated: bool,
    pub v_min: f64,
    pub eps: f64,
    pub alpha: Vec<f64>,
    pub trust_cells: usize,
    pub error_dims: Vec<usize>,
}

/// Hash binding a value function to its producing configuration: model name,
/// sorted parameters, grid geometry, and the error-function identifier.
pub fn parameter_hash(
    model: &str,
    params: &BTreeMap<String, f64>,
    grid_lower: &[f64],
    grid_upper: &[f64],
    grid_nodes: &[usize],
    grid_periodic: &[bool],
    error_id: &str,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.as_bytes());
    for (k, v) in params {
        hasher.update(k.as_bytes());
        hasher.update(v.to_bits().to_le_bytes());
    }
    for v in grid_lower.iter().chain(grid_upper) {
        hasher.update(v.to_bits().to_le_bytes());
    }
    for n in grid_nodes {
        hasher.update((*n as u64).to_le_bytes());
    }
    for p in grid_periodic {
        hasher.update([*p as u8]);
    }
    hasher.update(error_id.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn header_for(
    vf: &ValueFunction,
    model: &str,
    params: &BTreeMap<String, f64>,
    error_dims: &[usize],
) -> FileHeader {
    let grid = vf.grid();
    let lower: Vec<f64> = grid.dims().iter().map(|d| d.lower).collect();
    let upper: Vec<f64> = grid.dims().iter().map(|d| d.upper).collect();
    let nodes: Vec<usize> = grid.dims().iter().map(|d| d.nodes).collect();
    let periodic: Vec<bool> = grid.dims().iter().map(|d| d.periodic).collect();
    let param_hash = parameter_hash(
        model,
        params,
        &lower,
        &upper,
        &nodes,
        &periodic,
        vf.error_id(),
    );
    FileHeader {
        model: model.to_string(),
        params: params.clone(),
        param_hash,
        error_id: vf.error_id().to_string(),
        grid_lower: lower,
        grid_upper: upper,
        grid_nodes: nodes,
        grid_periodic: periodic,
        times: vf.times().to_vec(),
        converged: vf.converged(),
        truncated: vf.truncated(),
        v_min: vf.v_min(),
        eps: vf.eps_default(),
        alpha: vf.alpha().to_vec(),
        trust_cells: vf.trust_cells(),
        error_dims: error_dims.to_vec(),
    }
}

struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Write a value function (with an override for the stored slack).
pub fn write_file(path: &Path, vf: &ValueFunction, mut header: FileHeader, eps: Option<f64>) -> Result<()> {
    if let Some(eps) = eps {
        header.eps = eps;
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut w = HashingWriter {
        inner: BufWriter::new(file),
        hasher: Sha256::new(),
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let header_json = serde_json::to_vec(&header)?;
    w.write_all(&(header_json.len() as u32).to_le_bytes())?;
    w.write_all(&header_json)?;
    for snap in vf.snapshots() {
        for v in snap.values() {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    for v in vf.terminal().values() {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    let digest = w.hasher.clone().finalize();
    w.inner.write_all(&digest)?;
    w.inner.flush()?;
    Ok(())
}

fn read_exact_hashed<R: Read>(r: &mut R, hasher: &mut Sha256, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).context("truncated value-function file")?;
    hasher.update(&buf[..]);
    Ok(())
}

/// Read and verify just the header (checksum verified only by `read_file` /
/// `stream_snapshots`, which consume the payload).
pub fn read_header(path: &Path) -> Result<FileHeader> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).context("truncated file")?;
    if &magic != MAGIC {
        bail!("not a value-function file (bad magic)");
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        bail!("unsupported format version {version}");
    }
    r.read_exact(&mut word)?;
    let len = u32::from_le_bytes(word) as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header).context("truncated header")?;
    Ok(serde_json::from_slice(&header)?)
}

/// Stream the payload snapshot-by-snapshot, verifying the checksum at the
/// end; at most one snapshot buffer is resident.
pub fn stream_snapshots(
    path: &Path,
    mut on_snapshot: impl FnMut(usize, &FileHeader, &[f64]) -> Result<()>,
) -> Result<FileHeader> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut r = BufReader::new(file);
    let mut hasher = Sha256::new();

    let mut magic = [0u8; 4];
    read_exact_hashed(&mut r, &mut hasher, &mut magic)?;
    if &magic != MAGIC {
        bail!("not a value-function file (bad magic)");
    }
    let mut word = [0u8; 4];
    read_exact_hashed(&mut r, &mut hasher, &mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        bail!("unsupported format version {version}");
    }
    read_exact_hashed(&mut r, &mut hasher, &mut word)?;
    let len = u32::from_le_bytes(word) as usize;
    let mut header_bytes = vec![0u8; len];
    read_exact_hashed(&mut r, &mut hasher, &mut header_bytes)?;
    let header: FileHeader = serde_json::from_slice(&header_bytes)?;

    let nodes: usize = header.grid_nodes.iter().product();
    let mut buf = vec![0u8; nodes * 8];
    let mut values = vec![0.0f64; nodes];
    let blocks = header.times.len() + 1; // snapshots + terminal
    for k in 0..blocks {
        read_exact_hashed(&mut r, &mut hasher, &mut buf)?;
        for (i, chunk) in buf.chunks_exact(8).enumerate() {
            values[i] = f64::from_bits(u64::from_le_bytes(chunk.try_into().unwrap()));
        }
        on_snapshot(k, &header, &values)?;
    }
    let mut stored = [0u8; 32];
    r.read_exact(&mut stored).context("missing checksum")?;
    let computed = hasher.finalize();
    if stored != computed[..] {
        bail!("corrupt value-function file: checksum mismatch");
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        bail!("corrupt value-function file: trailing bytes");
    }
    Ok(header)
}

/// Load a full value function, verifying the checksum.
pub fn read_file(path: &Path) -> Result<(FileHeader, ValueFunction)> {
    let mut snaps: Vec<Vec<f64>> = Vec::new();
    let header = stream_snapshots(path, |_, _, values| {
        snaps.push(values.to_vec());
        Ok(())
    })?;
    let grid = Grid::from_bounds(
        &header.grid_lower,
        &header.grid_upper,
        &header.grid_nodes,
        &header.grid_periodic,
    )?;
    let terminal = GridFunction::new(grid.clone(), snaps.pop().unwrap())?;
    let values = snaps
        .into_iter()
        .map(|v| GridFunction::new(grid.clone(), v))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let vf = ValueFunction::from_parts(
        grid,
        header.times.clone(),
        values,
        terminal,
        header.converged,
        header.truncated,
        header.v_min,
        header.eps,
        header.alpha.clone(),
        header.trust_cells,
        header.model.clone(),
        header.error_id.clone(),
    )?;
    Ok((header, vf))
}
