//! Chain persistence: newline-delimited JSON samples, a wide CSV export and
//! a JSON metadata sidecar.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HeapError, Result};
use crate::model::{ModelParams, PanelData, Variant};
use crate::sampler::Chain;

/// Sidecar metadata for one persisted chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMeta {
    pub variant: Variant,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_samples: usize,
    pub acceptance: BTreeMap<String, f64>,
    pub wall_secs: f64,
}

impl ChainMeta {
    pub fn of(chain: &Chain) -> Self {
        ChainMeta {
            variant: chain.variant,
            seed: chain.seed,
            iterations: chain.iterations,
            burn_in: chain.burn_in,
            thin: chain.thin,
            n_samples: chain.samples.len(),
            acceptance: chain.acceptance.clone(),
            wall_secs: chain.wall_secs,
        }
    }
}

/// Write samples as NDJSON (one sample per line).
pub fn write_chain_ndjson(chain: &Chain, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in &chain.samples {
        serde_json::to_writer(&mut f, s)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Write the metadata sidecar.
pub fn write_chain_meta(chain: &Chain, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, &ChainMeta::of(chain))?;
    Ok(())
}

/// Load a chain from its NDJSON samples and sidecar.
pub fn read_chain(samples_path: &Path, meta_path: &Path) -> Result<Chain> {
    let meta: ChainMeta = serde_json::from_reader(std::fs::File::open(meta_path)?)?;
    let reader = BufReader::new(std::fs::File::open(samples_path)?);
    let mut samples = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str::<ModelParams>(&line)?);
    }
    if samples.len() != meta.n_samples {
        return Err(HeapError::Manifest(format!(
            "sidecar records {} samples but file holds {}",
            meta.n_samples,
            samples.len()
        )));
    }
    Ok(Chain {
        variant: meta.variant,
        seed: meta.seed,
        iterations: meta.iterations,
        burn_in: meta.burn_in,
        thin: meta.thin,
        acceptance: meta.acceptance,
        wall_secs: meta.wall_secs,
        samples,
    })
}

/// Column headers for the wide CSV export.
pub fn csv_headers(chain: &Chain, data: &PanelData) -> Vec<String> {
    let s = &chain.samples[0];
    let mut h = Vec::new();
    for j in 0..s.alpha.len() {
        let n = data
            .w_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| j.to_string());
        h.push(format!("alpha.{n}"));
    }
    let c = s.sigma_beta.n;
    if c == 1 {
        h.push("sigma2_beta".into());
    } else {
        for i in 0..c {
            for j in 0..=i {
                h.push(format!("sigma_beta.{i}.{j}"));
            }
        }
    }
    if chain.variant.has_theta_disp() {
        h.push("theta_disp".into());
    }
    if chain.variant.has_global_heap() {
        h.push("theta_heap".into());
    }
    if chain.variant.has_gamma() {
        for j in 0..s.gamma.len() {
            h.push(format!("gamma.{j}"));
        }
    }
    if chain.variant.has_subject_heap() {
        for j in 0..s.omega.len() {
            h.push(format!("omega.{j}"));
        }
        h.push("sigma2_xi".into());
        for sub in &data.subjects {
            h.push(format!("xi.{}", sub.id));
        }
    }
    for sub in &data.subjects {
        for j in 0..data.z_dim {
            h.push(format!("beta.{}.{j}", sub.id));
        }
    }
    if chain.variant.has_latent() {
        for obs in &data.obs {
            h.push(format!(
                "x.{}.{}",
                data.subjects[obs.subject].id, obs.time_index
            ));
        }
    }
    h
}

fn csv_row(chain: &Chain, s: &ModelParams) -> Vec<String> {
    let mut r = Vec::new();
    for &a in &s.alpha {
        r.push(a.to_string());
    }
    let c = s.sigma_beta.n;
    if c == 1 {
        r.push(s.sigma_beta.at(0, 0).to_string());
    } else {
        for i in 0..c {
            for j in 0..=i {
                r.push(s.sigma_beta.at(i, j).to_string());
            }
        }
    }
    if chain.variant.has_theta_disp() {
        r.push(s.theta_disp.to_string());
    }
    if chain.variant.has_global_heap() {
        r.push(s.theta_heap.to_string());
    }
    if chain.variant.has_gamma() {
        for &g in &s.gamma {
            r.push(g.to_string());
        }
    }
    if chain.variant.has_subject_heap() {
        for &o in &s.omega {
            r.push(o.to_string());
        }
        r.push(s.sigma2_xi.to_string());
        for &xi in &s.xi {
            r.push(xi.to_string());
        }
    }
    for b in &s.beta {
        for &v in b {
            r.push(v.to_string());
        }
    }
    if chain.variant.has_latent() {
        for &x in &s.x {
            r.push(x.to_string());
        }
    }
    r
}

/// Wide CSV export (one row per kept sample), usable as trace input for
/// external plotting.
pub fn write_chain_csv(chain: &Chain, data: &PanelData, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(csv_headers(chain, data))?;
    for s in &chain.samples {
        w.write_record(csv_row(chain, s))?;
    }
    w.flush()?;
    Ok(())
}
