//! On-disk formats: system JSON, binary datasets with a CSV export, and
//! matrix-block artifacts (representation, latent model, controller) with a
//! plain-text manifest.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use lqg_latent_core::corel::{StateRepresentation, StepDiagnostics};
use lqg_latent_core::sim::{Dataset, Trajectory};
use lqg_latent_core::sysid::{Controller, LatentModel};
use lqg_latent_core::system::{LqgSystem, SystemParts};
use lqg_latent_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

pub const DATASET_MAGIC: &[u8; 8] = b"LQGDSET\0";
pub const DATASET_VERSION: u32 = 1;
const BLOCKS_HEADER: &str = "format lqg-latent-blocks 1";

fn write_file(path: &Path, bytes: &[u8]) -> HarnessResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], path: &Path, what: &str) -> HarnessResult<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(HarnessError::format(path, format!("{what}: ragged rows")));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    a: Vec<Rows>,
    b: Vec<Rows>,
    c: Vec<Rows>,
    q: Vec<Rows>,
    r: Vec<Rows>,
    process_cov: Vec<Rows>,
    obs_cov: Vec<Rows>,
    init_cov: Rows,
}

pub fn system_to_json(sys: &LqgSystem) -> String {
    let p = sys.parts();
    let conv = |v: &[Matrix]| v.iter().map(rows_of).collect::<Vec<_>>();
    let file = SystemFile {
        a: conv(&p.a),
        b: conv(&p.b),
        c: conv(&p.c),
        q: conv(&p.q),
        r: conv(&p.r),
        process_cov: conv(&p.process_cov),
        obs_cov: conv(&p.obs_cov),
        init_cov: rows_of(&p.init_cov),
    };
    // Serializing plain nested vectors of floats cannot fail.
    serde_json::to_string_pretty(&file).expect("system serializes")
}

pub fn write_system_json(path: &Path, sys: &LqgSystem) -> HarnessResult<()> {
    write_file(path, system_to_json(sys).as_bytes())
}

pub fn read_system_json(path: &Path) -> HarnessResult<LqgSystem> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let file: SystemFile = serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e.to_string()))?;
    let conv = |v: &[Rows], what: &str| {
        v.iter()
            .map(|m| matrix_from_rows(m, path, what))
            .collect::<HarnessResult<Vec<_>>>()
    };
    Ok(LqgSystem::new(SystemParts {
        a: conv(&file.a, "a")?,
        b: conv(&file.b, "b")?,
        c: conv(&file.c, "c")?,
        q: conv(&file.q, "q")?,
        r: conv(&file.r, "r")?,
        process_cov: conv(&file.process_cov, "process_cov")?,
        obs_cov: conv(&file.obs_cov, "obs_cov")?,
        init_cov: matrix_from_rows(&file.init_cov, path, "init_cov")?,
    })?)
}

/// Header of a binary dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub system_tag: String,
    pub n: u64,
    pub horizon: u64,
    pub state_dim: u64,
    pub obs_dim: u64,
    pub control_dim: u64,
    pub sigma_u: f64,
    pub master_seed: u64,
    pub version: u32,
}

/// Serializes a dataset: header, then per trajectory the little-endian f64
/// sequence `y_0, u_0, c_0, ..., y_{T-1}, u_{T-1}, c_{T-1}, y_T, c_T`.
pub fn dataset_to_bytes(ds: &Dataset, state_dim: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.system_tag.len() as u32).to_le_bytes());
    out.extend_from_slice(ds.system_tag.as_bytes());
    for v in [ds.len(), ds.horizon, state_dim, ds.obs_dim, ds.control_dim] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&ds.sigma_u.to_le_bytes());
    out.extend_from_slice(&ds.master_seed.to_le_bytes());
    let mut push = |x: f64| out.extend_from_slice(&x.to_le_bytes());
    for tr in &ds.trajectories {
        for t in 0..=ds.horizon {
            tr.observations[t].iter().for_each(|&x| push(x));
            if t < ds.horizon {
                tr.controls[t].iter().for_each(|&x| push(x));
            }
            push(tr.costs[t]);
        }
    }
    out
}

pub fn write_dataset(path: &Path, ds: &Dataset, state_dim: usize) -> HarnessResult<()> {
    write_file(path, &dataset_to_bytes(ds, state_dim))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> HarnessResult<&'a [u8]> {
        let end = self.at.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.at..end];
                self.at = end;
                Ok(s)
            }
            None => Err(HarnessError::format(self.path, "unexpected end of file")),
        }
    }
    fn u32(&mut self) -> HarnessResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> HarnessResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> HarnessResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn vector(&mut self, len: usize) -> HarnessResult<Vector> {
        let mut v = Vector::zeros(len);
        for x in v.iter_mut() {
            *x = self.f64()?;
        }
        Ok(v)
    }
}

/// Parses a dataset; loaded trajectories carry no hidden states.
pub fn dataset_from_bytes(bytes: &[u8], path: &Path) -> HarnessResult<(DatasetHeader, Dataset)> {
    let mut cur = Cursor { bytes, at: 0, path };
    if cur.take(8)? != DATASET_MAGIC {
        return Err(HarnessError::format(path, "not a dataset file"));
    }
    let version = cur.u32()?;
    if version != DATASET_VERSION {
        return Err(HarnessError::format(path, format!("unsupported version {version}")));
    }
    let tag_len = cur.u32()? as usize;
    let system_tag = String::from_utf8(cur.take(tag_len)?.to_vec())
        .map_err(|_| HarnessError::format(path, "system tag is not UTF-8"))?;
    let header = DatasetHeader {
        system_tag,
        n: cur.u64()?,
        horizon: cur.u64()?,
        state_dim: cur.u64()?,
        obs_dim: cur.u64()?,
        control_dim: cur.u64()?,
        sigma_u: cur.f64()?,
        master_seed: cur.u64()?,
        version,
    };
    let (horizon, dy, du) = (header.horizon as usize, header.obs_dim as usize, header.control_dim as usize);
    let per_traj = (horizon + 1) * (dy + 1) + horizon * du;
    let remaining = bytes.len() - cur.at;
    if remaining != header.n as usize * per_traj * 8 {
        return Err(HarnessError::format(path, "record section size does not match header"));
    }
    let mut trajectories = Vec::with_capacity(header.n as usize);
    for _ in 0..header.n {
        let mut tr = Trajectory {
            observations: Vec::with_capacity(horizon + 1),
            controls: Vec::with_capacity(horizon),
            costs: Vec::with_capacity(horizon + 1),
            states: None,
        };
        for t in 0..=horizon {
            tr.observations.push(cur.vector(dy)?);
            if t < horizon {
                tr.controls.push(cur.vector(du)?);
            }
            tr.costs.push(cur.f64()?);
        }
        trajectories.push(tr);
    }
    let ds = Dataset {
        system_tag: header.system_tag.clone(),
        sigma_u: header.sigma_u,
        master_seed: header.master_seed,
        horizon,
        obs_dim: dy,
        control_dim: du,
        trajectories,
    };
    Ok((header, ds))
}

pub fn read_dataset(path: &Path) -> HarnessResult<(DatasetHeader, Dataset)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HarnessError::io(path, e))?;
    dataset_from_bytes(&bytes, path)
}

/// Interchange export with rows `traj_id,t,kind,component_index,value`.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> HarnessResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| HarnessError::io(path, e);
    writeln!(w, "traj_id,t,kind,component_index,value").map_err(io)?;
    for (i, tr) in ds.trajectories.iter().enumerate() {
        for t in 0..=ds.horizon {
            for (j, x) in tr.observations[t].iter().enumerate() {
                writeln!(w, "{i},{t},y,{j},{x}").map_err(io)?;
            }
            if t < ds.horizon {
                for (j, x) in tr.controls[t].iter().enumerate() {
                    writeln!(w, "{i},{t},u,{j},{x}").map_err(io)?;
                }
            }
            writeln!(w, "{i},{t},c,0,{}", tr.costs[t]).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// A named, time-indexed matrix in a block artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub t: usize,
    pub matrix: Matrix,
}

/// Matrix blocks plus free-form `key value` metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockArtifact {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub blocks: Vec<Block>,
}

impl BlockArtifact {
    fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn blocks_named(&self, name: &str) -> Vec<Matrix> {
        let mut v: Vec<&Block> = self.blocks.iter().filter(|b| b.name == name).collect();
        v.sort_by_key(|b| b.t);
        v.into_iter().map(|b| b.matrix.clone()).collect()
    }
}

/// Writes `<stem>.bin` (row-major little-endian f64 blocks in manifest order)
/// and `<stem>.manifest` (one `block name t rows cols` line per block).
pub fn write_blocks(dir: &Path, stem: &str, art: &BlockArtifact) -> HarnessResult<()> {
    let mut manifest = String::new();
    manifest.push_str(BLOCKS_HEADER);
    manifest.push('\n');
    manifest.push_str(&format!("kind {}\n", art.kind));
    manifest.push_str("layout row-major little-endian f64\n");
    for (k, v) in &art.meta {
        manifest.push_str(&format!("meta {k} {v}\n"));
    }
    let mut data = Vec::new();
    for b in &art.blocks {
        manifest.push_str(&format!("block {} {} {} {}\n", b.name, b.t, b.matrix.nrows(), b.matrix.ncols()));
        for row in b.matrix.row_iter() {
            for x in row.iter() {
                data.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    write_file(&dir.join(format!("{stem}.manifest")), manifest.as_bytes())?;
    write_file(&dir.join(format!("{stem}.bin")), &data)
}

pub fn read_blocks(dir: &Path, stem: &str) -> HarnessResult<BlockArtifact> {
    let mpath = dir.join(format!("{stem}.manifest"));
    let bpath = dir.join(format!("{stem}.bin"));
    let manifest = fs::read_to_string(&mpath).map_err(|e| HarnessError::io(&mpath, e))?;
    let data = fs::read(&bpath).map_err(|e| HarnessError::io(&bpath, e))?;
    let mut lines = manifest.lines();
    if lines.next() != Some(BLOCKS_HEADER) {
        return Err(HarnessError::format(&mpath, "missing format header"));
    }
    let mut art = BlockArtifact::default();
    let mut cur = Cursor {
        bytes: &data,
        at: 0,
        path: &bpath,
    };
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["kind", kind] => art.kind = kind.to_string(),
            ["layout", ..] => {}
            ["meta", key, rest @ ..] => art.meta.push((key.to_string(), rest.join(" "))),
            ["block", name, t, rows, cols] => {
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| HarnessError::format(&mpath, format!("bad number {s:?}")))
                };
                let (t, rows, cols) = (parse(t)?, parse(rows)?, parse(cols)?);
                let mut m = Matrix::zeros(rows, cols);
                for i in 0..rows {
                    for j in 0..cols {
                        m[(i, j)] = cur.f64()?;
                    }
                }
                art.blocks.push(Block {
                    name: name.to_string(),
                    t,
                    matrix: m,
                });
            }
            [] => {}
            _ => return Err(HarnessError::format(&mpath, format!("unrecognized line {line:?}"))),
        }
    }
    if cur.at != data.len() {
        return Err(HarnessError::format(&bpath, "trailing bytes after last block"));
    }
    Ok(art)
}

fn blocks_from<'a>(name: &str, mats: &'a [Matrix]) -> impl Iterator<Item = Block> + 'a {
    let name = name.to_string();
    mats.iter().enumerate().map(move |(t, m)| Block {
        name: name.clone(),
        t,
        matrix: m.clone(),
    })
}

pub fn representation_artifact(rep: &StateRepresentation) -> BlockArtifact {
    let mut meta = vec![
        ("theta".to_string(), format!("{}", rep.threshold)),
        ("n".to_string(), rep.samples.to_string()),
    ];
    for (t, d) in rep.diagnostics.iter().enumerate() {
        meta.push((
            format!("diag_{t}"),
            format!("{} {} {} {}", d.n_hat_fro, d.b_hat, d.residual_rms, d.kept_rank),
        ));
    }
    BlockArtifact {
        kind: "representation".into(),
        meta,
        blocks: blocks_from("M", &rep.blocks)
            .chain(blocks_from("N", &rep.quadratic_forms))
            .collect(),
    }
}

pub fn representation_from_artifact(art: &BlockArtifact, path: &Path) -> HarnessResult<StateRepresentation> {
    let bad = |m: &str| HarnessError::format(path, m.to_string());
    if art.kind != "representation" {
        return Err(bad("not a representation artifact"));
    }
    let num = |key: &str| -> HarnessResult<f64> {
        art.meta(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(&format!("missing or malformed {key}")))
    };
    let blocks = art.blocks_named("M");
    let diagnostics = (0..blocks.len())
        .map(|t| {
            let raw = art.meta(&format!("diag_{t}")).ok_or_else(|| bad("missing diagnostics"))?;
            let f: Vec<f64> = raw.split_whitespace().filter_map(|x| x.parse().ok()).collect();
            if f.len() != 4 {
                return Err(bad("malformed diagnostics"));
            }
            Ok(StepDiagnostics {
                n_hat_fro: f[0],
                b_hat: f[1],
                residual_rms: f[2],
                kept_rank: f[3] as usize,
            })
        })
        .collect::<HarnessResult<Vec<_>>>()?;
    Ok(StateRepresentation {
        quadratic_forms: art.blocks_named("N"),
        blocks,
        diagnostics,
        threshold: num("theta")?,
        samples: num("n")? as usize,
    })
}

pub fn model_artifact(model: &LatentModel) -> BlockArtifact {
    BlockArtifact {
        kind: "latent_model".into(),
        meta: vec![],
        blocks: blocks_from("A", &model.a)
            .chain(blocks_from("B", &model.b))
            .chain(blocks_from("Q", &model.q))
            .chain(blocks_from("R", &model.r))
            .collect(),
    }
}

pub fn model_from_artifact(art: &BlockArtifact, path: &Path) -> HarnessResult<LatentModel> {
    if art.kind != "latent_model" {
        return Err(HarnessError::format(path, "not a latent model artifact"));
    }
    Ok(LatentModel {
        a: art.blocks_named("A"),
        b: art.blocks_named("B"),
        q: art.blocks_named("Q"),
        r: art.blocks_named("R"),
    })
}

pub fn controller_artifact(ctl: &Controller) -> BlockArtifact {
    BlockArtifact {
        kind: "controller".into(),
        meta: vec![],
        blocks: blocks_from("K", &ctl.gains).chain(blocks_from("P", &ctl.values)).collect(),
    }
}

pub fn controller_from_artifact(art: &BlockArtifact, path: &Path) -> HarnessResult<Controller> {
    if art.kind != "controller" {
        return Err(HarnessError::format(path, "not a controller artifact"));
    }
    Ok(Controller {
        gains: art.blocks_named("K"),
        values: art.blocks_named("P"),
    })
}
