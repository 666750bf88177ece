//! Model container serialization and trace CSV export.
//!
//! A container is a single binary file:
//!
//! ```text
//! magic    4 bytes  "PTMC"
//! version  u8       1
//! mlen     u64 LE   manifest length in bytes
//! manifest mlen bytes of JSON (config echo, dims, entry table)
//! payload  concatenated PTEN v1 blobs, one per entry
//! ```
//!
//! Entry offsets in the manifest are relative to the payload start. Factor
//! matrices are stored as 2-mode PTEN tensors `[rows, cols]`. The manifest
//! is serialized with a fixed field order and the entry table in a fixed
//! sequence, so identical models produce byte-identical containers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{FitConfig, FitTrace, PerTuckerModel};
use crate::error::{Error, Result};
use crate::linalg::FactorMatrix;
use crate::pten;
use crate::tensor::{Matrix, Tensor};

pub const MAGIC: [u8; 4] = *b"PTMC";
pub const VERSION: u8 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct EntryMeta {
    name: String,
    offset: u64,
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ContainerManifest {
    schema_version: u32,
    config: FitConfig,
    rho: f64,
    shared_dims: Vec<usize>,
    sample_counts: Vec<usize>,
    entries: Vec<EntryMeta>,
}

/// Store a column-orthonormal factor as a 2-mode tensor. The canonical
/// linearization of a 2-mode tensor is column-major, so this transposes the
/// row-major in-memory layout.
fn matrix_to_tensor(m: &Matrix) -> Tensor {
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            data.push(m.get(i, j));
        }
    }
    Tensor::new(vec![m.rows(), m.cols()], data).expect("valid matrix payload")
}

fn tensor_to_matrix(t: &Tensor) -> Result<Matrix> {
    if t.ndim() != 2 {
        return Err(Error::Format(format!(
            "expected a 2-mode tensor for a factor, got {} modes",
            t.ndim()
        )));
    }
    let (rows, cols) = (t.dims()[0], t.dims()[1]);
    let mut m = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m.set(i, j, t.data()[j * rows + i]);
        }
    }
    Ok(m)
}

fn pten_blob(t: &Tensor) -> Vec<u8> {
    let mut buf = Vec::new();
    pten::write_tensor(&mut buf, t).expect("in-memory write");
    buf
}

pub fn write_model<W: Write>(w: &mut W, model: &PerTuckerModel) -> Result<()> {
    let kmodes = model.num_modes();
    let sources = model.num_sources();

    let mut entries = Vec::new();
    let mut payload = Vec::new();
    let push = |name: String, blob: Vec<u8>, entries: &mut Vec<EntryMeta>, payload: &mut Vec<u8>| {
        entries.push(EntryMeta {
            name,
            offset: payload.len() as u64,
            len: blob.len() as u64,
        });
        payload.extend_from_slice(&blob);
    };

    for (k, f) in model.global_factors.iter().enumerate() {
        push(
            format!("global_factor_{}", k),
            pten_blob(&matrix_to_tensor(f.matrix())),
            &mut entries,
            &mut payload,
        );
    }
    for n in 0..sources {
        for k in 0..kmodes {
            push(
                format!("local_factor_{}_{}", n, k),
                pten_blob(&matrix_to_tensor(model.local_factors[n][k].matrix())),
                &mut entries,
                &mut payload,
            );
        }
        push(
            format!("global_core_{}", n),
            pten_blob(&model.global_cores[n]),
            &mut entries,
            &mut payload,
        );
        push(
            format!("local_core_{}", n),
            pten_blob(&model.local_cores[n]),
            &mut entries,
            &mut payload,
        );
    }

    let manifest = ContainerManifest {
        schema_version: 1,
        config: model.config.clone(),
        rho: model.rho,
        shared_dims: model.shared_dims(),
        sample_counts: model.global_cores.iter().map(|c| *c.dims().last().unwrap()).collect(),
        entries,
    };
    let manifest_bytes = serde_json::to_vec(&manifest)
        .map_err(|e| Error::Format(format!("manifest encode: {}", e)))?;

    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(manifest_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&manifest_bytes)?;
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<PerTuckerModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing container header: {}", e)))?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad container magic {:02x?}", magic)));
    }
    let mut v = [0u8; 1];
    r.read_exact(&mut v)
        .map_err(|e| Error::Format(format!("truncated container: {}", e)))?;
    if v[0] != VERSION {
        return Err(Error::Format(format!("unsupported container version {}", v[0])));
    }
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)
        .map_err(|e| Error::Format(format!("truncated container: {}", e)))?;
    let mlen = u64::from_le_bytes(len8) as usize;
    let mut manifest_bytes = vec![0u8; mlen];
    r.read_exact(&mut manifest_bytes)
        .map_err(|e| Error::Format(format!("truncated manifest: {}", e)))?;
    let manifest: ContainerManifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| Error::Format(format!("manifest decode: {}", e)))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;

    let fetch = |name: &str| -> Result<Tensor> {
        let entry = manifest
            .entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Format(format!("container is missing entry '{}'", name)))?;
        let start = entry.offset as usize;
        let end = start + entry.len as usize;
        if end > payload.len() {
            return Err(Error::Format(format!("entry '{}' overruns payload", name)));
        }
        pten::read_tensor(&mut &payload[start..end])
    };

    let kmodes = manifest.config.num_modes();
    let sources = manifest.config.num_sources();
    let mut global_factors = Vec::with_capacity(kmodes);
    for k in 0..kmodes {
        let t = fetch(&format!("global_factor_{}", k))?;
        global_factors.push(FactorMatrix::new(tensor_to_matrix(&t)?)?);
    }
    let mut local_factors = Vec::with_capacity(sources);
    let mut global_cores = Vec::with_capacity(sources);
    let mut local_cores = Vec::with_capacity(sources);
    for n in 0..sources {
        let mut per_mode = Vec::with_capacity(kmodes);
        for k in 0..kmodes {
            let t = fetch(&format!("local_factor_{}_{}", n, k))?;
            per_mode.push(FactorMatrix::new(tensor_to_matrix(&t)?)?);
        }
        local_factors.push(per_mode);
        global_cores.push(fetch(&format!("global_core_{}", n))?);
        local_cores.push(fetch(&format!("local_core_{}", n))?);
    }

    let model = PerTuckerModel {
        global_factors,
        local_factors,
        global_cores,
        local_cores,
        rho: manifest.rho,
        config: manifest.config,
    };
    // containers hold fitted artifacts; the constraint must have survived
    let res = model.orthogonality_residual();
    if res > crate::engine::ORTHOGONALITY_STATE_TOL {
        return Err(Error::Format(format!(
            "stored factors violate the orthogonality constraint (residual {:.3e})",
            res
        )));
    }
    Ok(model)
}

pub fn write_model_file<P: AsRef<Path>>(path: P, model: &PerTuckerModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn read_model_file<P: AsRef<Path>>(path: P) -> Result<PerTuckerModel> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        Error::Format(format!("cannot open {}: {}", path.display(), e))
    })?);
    read_model(&mut r)
}

/// Trace CSV: `iteration,objective,global_change_<k>,...,local_change_<n>_<k>,...`
/// with 1-based mode and source labels in the header.
pub fn write_trace_csv<W: Write>(w: &mut W, trace: &FitTrace, config: &FitConfig) -> Result<()> {
    let kmodes = config.num_modes();
    let sources = config.num_sources();
    let mut header = String::from("iteration,objective");
    for k in 0..kmodes {
        header.push_str(&format!(",global_change_{}", k + 1));
    }
    for n in 0..sources {
        for k in 0..kmodes {
            header.push_str(&format!(",local_change_{}_{}", n + 1, k + 1));
        }
    }
    writeln!(w, "{}", header)?;
    for t in 0..trace.iterations() {
        let mut line = format!("{},{:.17e}", t + 1, trace.objective[t]);
        for k in 0..kmodes {
            line.push_str(&format!(",{:.17e}", trace.global_change[t][k]));
        }
        for n in 0..sources {
            for k in 0..kmodes {
                line.push_str(&format!(",{:.17e}", trace.local_change[t][n][k]));
            }
        }
        writeln!(w, "{}", line)?;
    }
    Ok(())
}
