//! Persistence: binary checkpoints with content hashes, run manifests,
//! deterministic resume, and the flat binary layout for container fields.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::EnergyLedger;
use crate::error::{Error, Result};
use crate::fields::ExtendedField;
use crate::grid::Grid1;
use crate::solver::fluid::{FluidState, FluidTols, MacGrid};
use crate::solver::init::InitialData;
use crate::solver::run::run_loop;
use crate::solver::{BeamState, ContactEvent, RunOutcome, SimState, Trajectory};

const CHECKPOINT_MAGIC: &[u8; 4] = b"FSCK";
const CHECKPOINT_VERSION: u32 = 1;
const FIELD_MAGIC: &[u8; 4] = b"FSFD";

fn sha_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointHeader {
    time: f64,
    nx: usize,
    nz: usize,
    length: f64,
    cum_dissipation_fluid: f64,
    cum_dissipation_beam: f64,
    config_hash: String,
}

/// Receipt of a written checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Receipt {
    pub path: PathBuf,
    pub sha256: String,
    pub time: f64,
}

fn push_array(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_array(bytes: &[u8], offset: &mut usize, n: usize) -> Result<Vec<f64>> {
    let need = n * 8;
    if *offset + need > bytes.len() {
        return Err(Error::invalid("checkpoint truncated"));
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = *offset + 8 * k;
        out.push(f64::from_le_bytes(bytes[s..s + 8].try_into().unwrap()));
    }
    *offset += need;
    Ok(out)
}

/// Serialize a simulation state to bytes (header, arrays, content hash).
fn checkpoint_bytes(
    sim: &SimState,
    cum: (f64, f64),
    config_hash: &str,
) -> Result<Vec<u8>> {
    let grid = sim.fluid.grid;
    let header = CheckpointHeader {
        time: sim.time(),
        nx: grid.nx,
        nz: grid.nz,
        length: grid.length,
        cum_dissipation_fluid: cum.0,
        cum_dissipation_beam: cum.1,
        config_hash: config_hash.to_string(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_json);
    push_array(&mut buf, &sim.beam.eta);
    push_array(&mut buf, &sim.beam.eta_dot);
    push_array(&mut buf, sim.fluid.u.as_slice().expect("standard layout"));
    push_array(&mut buf, sim.fluid.w.as_slice().expect("standard layout"));
    push_array(&mut buf, sim.fluid.p.as_slice().expect("standard layout"));
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

/// Write a checkpoint; the file name is derived from the content hash.
pub fn save_checkpoint(
    sim: &SimState,
    cum: (f64, f64),
    config_hash: &str,
    dir: &Path,
) -> Result<Receipt> {
    let bytes = checkpoint_bytes(sim, cum, config_hash)?;
    let hash = sha_hex(&bytes);
    let path = dir.join(format!("state-{}.ck", &hash[..16]));
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(&path)?;
    f.write_all(&bytes)?;
    Ok(Receipt {
        path,
        sha256: hash,
        time: sim.time(),
    })
}

/// Load and verify a checkpoint. Hash mismatches (truncation, corruption)
/// are reported as such, distinct from I/O failures.
pub fn load_checkpoint(path: &Path) -> Result<(SimState, (f64, f64), String)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 + 4 + 8 + 32 {
        return Err(Error::HashMismatch {
            expected: "a complete checkpoint".into(),
            found: format!("{} bytes", bytes.len()),
        });
    }
    let (body, stored_digest) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_digest {
        return Err(Error::HashMismatch {
            expected: sha_hex(stored_digest).chars().take(16).collect(),
            found: sha_hex(&digest).chars().take(16).collect(),
        });
    }
    if &body[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::invalid("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::invalid(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u64::from_le_bytes(body[8..16].try_into().unwrap()) as usize;
    let header: CheckpointHeader = serde_json::from_slice(&body[16..16 + hlen])?;
    let mut offset = 16 + hlen;
    let nx = header.nx;
    let nz = header.nz;
    let eta = read_array(body, &mut offset, nx)?;
    let eta_dot = read_array(body, &mut offset, nx)?;
    let u = read_array(body, &mut offset, nx * nz)?;
    let w = read_array(body, &mut offset, nx * (nz + 1))?;
    let p = read_array(body, &mut offset, nx * nz)?;

    let grid = MacGrid::new(nx, nz, header.length);
    let g1 = Grid1::new(nx, header.length);
    let beam = BeamState::new(g1, eta, eta_dot, header.time)?;
    let fluid = FluidState {
        grid,
        u: ndarray::Array2::from_shape_vec((nx, nz), u).unwrap(),
        w: ndarray::Array2::from_shape_vec((nx, nz + 1), w).unwrap(),
        p: ndarray::Array2::from_shape_vec((nx, nz), p).unwrap(),
        time: header.time,
    };
    Ok((
        SimState { beam, fluid },
        (
            header.cum_dissipation_fluid,
            header.cum_dissipation_beam,
        ),
        header.config_hash,
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Index of everything a run wrote, with enough metadata to resume it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub lambda: f64,
    pub container_height: f64,
    pub initial_energy: f64,
    pub raw_energy: f64,
    pub checkpoints: Vec<Receipt>,
    pub files: Vec<FileEntry>,
    pub events: Vec<ContactEvent>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Verify that every indexed file still exists with matching content.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for r in &self.checkpoints {
            let mut bytes = Vec::new();
            fs::File::open(dir.join(r.path.file_name().unwrap()))?.read_to_end(&mut bytes)?;
            let found = sha_hex(&bytes);
            if found != r.sha256 {
                return Err(Error::HashMismatch {
                    expected: r.sha256.chars().take(16).collect(),
                    found: found.chars().take(16).collect(),
                });
            }
        }
        for f in &self.files {
            let mut bytes = Vec::new();
            fs::File::open(dir.join(&f.path))?.read_to_end(&mut bytes)?;
            let found = sha_hex(&bytes);
            if found != f.sha256 {
                return Err(Error::HashMismatch {
                    expected: f.sha256.chars().take(16).collect(),
                    found: found.chars().take(16).collect(),
                });
            }
        }
        Ok(())
    }
}

/// Serialize the ledger as a plot-ready CSV.
pub fn ledger_csv(ledger: &EnergyLedger) -> String {
    let mut out = String::from(
        "time,fluid_kinetic,beam_kinetic,elastic,dissipation_fluid,dissipation_beam,total,residual\n",
    );
    for r in &ledger.rows {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.time,
            r.fluid_kinetic,
            r.beam_kinetic,
            r.elastic,
            r.dissipation_fluid,
            r.dissipation_beam,
            r.total,
            r.residual
        ));
    }
    out
}

/// CSV with an abscissa column and named value columns.
pub fn columns_csv(x_name: &str, x: &[f64], columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from(x_name);
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, xv) in x.iter().enumerate() {
        out.push_str(&format!("{xv:.17e}"));
        for (_, col) in columns {
            out.push_str(&format!(",{:.17e}", col[i]));
        }
        out.push('\n');
    }
    out
}

/// Persist a trajectory: checkpoints for every sample, the ledger, events,
/// and a manifest indexing it all.
pub fn save_trajectory(
    traj: &Trajectory,
    ledger: &EnergyLedger,
    dir: &Path,
    wall_clock_seconds: f64,
) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut checkpoints = Vec::new();
    for s in &traj.samples {
        let sim = SimState {
            beam: s.beam.clone(),
            fluid: s.fluid.clone(),
        };
        checkpoints.push(save_checkpoint(
            &sim,
            (s.cum_dissipation_fluid, s.cum_dissipation_beam),
            &traj.config_hash,
            dir,
        )?);
    }

    let ledger_text = ledger_csv(ledger);
    fs::write(dir.join("ledger.csv"), &ledger_text)?;
    let events_text = serde_json::to_string_pretty(&traj.events)?;
    fs::write(dir.join("events.json"), &events_text)?;
    let config_text = traj.config.to_toml();
    fs::write(dir.join("config.toml"), &config_text)?;

    let files = vec![
        FileEntry {
            role: "ledger".into(),
            path: "ledger.csv".into(),
            sha256: sha_hex(ledger_text.as_bytes()),
        },
        FileEntry {
            role: "events".into(),
            path: "events.json".into(),
            sha256: sha_hex(events_text.as_bytes()),
        },
        FileEntry {
            role: "config".into(),
            path: "config.toml".into(),
            sha256: sha_hex(config_text.as_bytes()),
        },
    ];

    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: traj.config.clone(),
        config_hash: traj.config_hash.clone(),
        lambda: traj.lambda,
        container_height: traj.container_height,
        initial_energy: traj.initial_energy,
        raw_energy: traj.raw_energy,
        checkpoints,
        files,
        events: traj.events.clone(),
        wall_clock_seconds,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Resume a persisted run from the latest checkpoint at or before `t` and
/// integrate to the configured end time. The provided config must hash to
/// the manifest's config (resuming under changed parameters is rejected).
pub fn resume(manifest: &RunManifest, dir: &Path, t: f64, config: &RunConfig) -> Result<RunOutcome> {
    if config.hash() != manifest.config_hash {
        return Err(Error::HashMismatch {
            expected: manifest.config_hash.chars().take(16).collect(),
            found: config.hash().chars().take(16).collect(),
        });
    }
    let receipt = manifest
        .checkpoints
        .iter()
        .filter(|r| r.time <= t + 1e-12)
        .max_by(|a, b| a.time.total_cmp(&b.time))
        .ok_or_else(|| Error::invalid(format!("no checkpoint at or before t = {t}")))?;
    let path = dir.join(receipt.path.file_name().unwrap());
    let (sim, cum, stored_hash) = load_checkpoint(&path)?;
    if stored_hash != manifest.config_hash {
        return Err(Error::HashMismatch {
            expected: manifest.config_hash.chars().take(16).collect(),
            found: stored_hash.chars().take(16).collect(),
        });
    }
    let data = InitialData {
        sim: sim.clone(),
        lambda: manifest.lambda,
        container_height: manifest.container_height,
        energy: manifest.initial_energy,
    };
    run_loop(
        config,
        &data,
        manifest.raw_energy,
        sim,
        cum,
        &FluidTols::default(),
    )
}

/// Flat binary layout for a container field: magic, header JSON
/// (nx, ny, length, container height, dtype), then `u1` and `u2` row major.
/// A JSON sidecar with the same header is written next to the binary file.
pub fn save_field(field: &ExtendedField, path: &Path) -> Result<String> {
    #[derive(Serialize)]
    struct FieldHeader<'a> {
        nx: usize,
        ny: usize,
        length: f64,
        container_height: f64,
        dtype: &'a str,
    }
    let header = FieldHeader {
        nx: field.grid.x.n,
        ny: field.grid.ny,
        length: field.grid.x.length,
        container_height: field.grid.m,
        dtype: "f64-le",
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_json);
    push_array(&mut buf, &field.height);
    push_array(&mut buf, field.u1.as_slice().expect("standard layout"));
    push_array(&mut buf, field.u2.as_slice().expect("standard layout"));
    fs::write(path, &buf)?;
    let sidecar = path.with_extension("json");
    fs::write(&sidecar, serde_json::to_string_pretty(&serde_json::json!({
        "nx": field.grid.x.n,
        "ny": field.grid.ny,
        "length": field.grid.x.length,
        "container_height": field.grid.m,
        "dtype": "f64-le",
        "arrays": ["height", "u1", "u2"],
    }))?)?;
    Ok(sha_hex(&buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::FluidState;

    fn sample_sim() -> SimState {
        let grid = MacGrid::new(8, 4, 1.0);
        let g1 = Grid1::new(8, 1.0);
        let mut fluid = FluidState::rest(grid);
        fluid.u[[3, 2]] = 0.12345678901234567;
        fluid.time = 0.25;
        let eta: Vec<f64> = (0..8).map(|i| 0.01 * i as f64).collect();
        let beam = BeamState::new(g1, eta, vec![0.0; 8], 0.25).unwrap();
        SimState { beam, fluid }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let sim = sample_sim();
        let receipt = save_checkpoint(&sim, (1.5, 2.5), "abc", dir.path()).unwrap();
        let (back, cum, hash) = load_checkpoint(&receipt.path).unwrap();
        assert_eq!(back.beam.eta, sim.beam.eta);
        assert_eq!(back.fluid.u, sim.fluid.u);
        assert_eq!(back.fluid.w, sim.fluid.w);
        assert_eq!(back.fluid.p, sim.fluid.p);
        assert_eq!(cum, (1.5, 2.5));
        assert_eq!(hash, "abc");
    }

    #[test]
    fn truncated_checkpoint_reports_hash_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let sim = sample_sim();
        let receipt = save_checkpoint(&sim, (0.0, 0.0), "abc", dir.path()).unwrap();
        let bytes = fs::read(&receipt.path).unwrap();
        let cut = &bytes[..bytes.len() - 7];
        let bad = dir.path().join("broken.ck");
        fs::write(&bad, cut).unwrap();
        match load_checkpoint(&bad) {
            Err(Error::HashMismatch { .. }) => {}
            other => panic!("expected hash mismatch, got {other:?}"),
        }
    }

    #[test]
    fn content_addressed_names_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let sim = sample_sim();
        let r1 = save_checkpoint(&sim, (0.0, 0.0), "abc", dir.path()).unwrap();
        let r2 = save_checkpoint(&sim, (0.0, 0.0), "abc", dir.path()).unwrap();
        assert_eq!(r1.path, r2.path);
        assert_eq!(r1.sha256, r2.sha256);
    }
}
