use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use mbmlab_core::oracle::CheckRecord;
use mbmlab_core::wavelet::{read_table, verify_kernel_pairing, write_table, KernelBank, KernelTable, SynthesisConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub const SYNTHESIS_FILES: [&str; 3] = ["kernel_synthesis_n0.bin", "kernel_synthesis_n1.bin", "kernel_synthesis_n2.bin"];
pub const DUAL_FILE: &str = "kernel_dual.bin";

/// Thetas at which the biorthogonality matrix is checked.
pub const PAIRING_THETAS: [f64; 3] = [0.3, 0.5, 0.7];
pub const PAIRING_TOL: f64 = 1e-3;
pub const MOMENT_TOL: f64 = 1e-8;

pub fn table_bytes(t: &KernelTable) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_table(t, BufWriter::new(&mut buf))?;
    Ok(buf)
}

/// Loads the tables written by `synthesize`.
pub fn load_bank(dir: &Path, config: SynthesisConfig) -> anyhow::Result<KernelBank> {
    let read = |name: &str| -> anyhow::Result<KernelTable> {
        let path = dir.join(name);
        let f = File::open(&path).with_context(|| format!("missing kernel table {} (run `mbmlab synthesize` first)", path.display()))?;
        read_table(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
    };
    let synthesis = SYNTHESIS_FILES.iter().map(|n| read(n)).collect::<anyhow::Result<Vec<_>>>()?;
    let dual = read(DUAL_FILE)?;
    if synthesis[0].dy != config.window.dy() || synthesis[0].theta != config.theta {
        anyhow::bail!("tables in {} were built with a different synthesis config", dir.display());
    }
    Ok(KernelBank::from_tables(config, synthesis, dual)?)
}

/// Uses the tables in `dir` when present, otherwise builds them.
pub fn load_or_build(dir: &Path, config: SynthesisConfig) -> anyhow::Result<Arc<KernelBank>> {
    let bank = if dir.join(DUAL_FILE).exists() { load_bank(dir, config)? } else { KernelBank::build(config)? };
    Ok(Arc::new(bank))
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingEntry {
    pub theta: f64,
    pub j: i32,
    pub k: i64,
    pub j2: i32,
    pub k2: i64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub checks: Vec<CheckRecord>,
    pub tail_constants: Vec<f64>,
    pub periodization_bounds: Vec<f64>,
    pub imag_residues: Vec<f64>,
    #[serde(skip)]
    pub matrix: Vec<PairingEntry>,
}

impl KernelSummary {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Biorthogonality over `|j| <= 2, |k| <= 4`, the dual first moment at every theta node and
/// the localisation of every table.
pub fn kernel_checks(bank: &KernelBank) -> anyhow::Result<KernelSummary> {
    let idx: Vec<(i32, i64)> = (-2..=2).flat_map(|j| (-4..=4).map(move |k| (j, k))).collect();
    let psi = &bank.synthesis[0];
    let mut jobs = Vec::new();
    for &theta in &PAIRING_THETAS {
        for &a in &idx {
            jobs.extend(idx.iter().map(|&b| (theta, a, b)));
        }
    }
    let matrix = jobs
        .par_iter()
        .map(|&(theta, a, b)| {
            let value = verify_kernel_pairing(psi, &bank.dual, theta, a, b)?;
            Ok(PairingEntry { theta, j: a.0, k: a.1, j2: b.0, k2: b.1, value })
        })
        .collect::<mbmlab_core::Result<Vec<_>>>()?;

    let mut checks = Vec::new();
    for &theta in &PAIRING_THETAS {
        let (worst, at) = matrix
            .iter()
            .filter(|e| e.theta == theta)
            .map(|e| {
                let want = if (e.j, e.k) == (e.j2, e.k2) { 1.0 } else { 0.0 };
                ((e.value - want).abs(), e)
            })
            .fold((0.0f64, None), |(w, at), (d, e)| if d > w { (d, Some(e)) } else { (w, at) });
        let params = json!({ "theta": theta, "scales": [-2, 2], "shifts": [-4, 4], "worst": at.map(|e| [e.j as i64, e.k, e.j2 as i64, e.k2]) });
        checks.push(CheckRecord::close("biorthogonality", params, worst, 0.0, PAIRING_TOL));
    }
    let dual = &bank.dual;
    let moment = (0..dual.theta.count).map(|it| dual.first_moment(it).abs()).fold(0.0f64, f64::max);
    checks.push(CheckRecord::close("dual_first_moment", json!({ "nodes": dual.theta.count }), moment, 0.0, MOMENT_TOL));

    let tables: Vec<&KernelTable> = bank.synthesis.iter().chain(std::iter::once(dual)).collect();
    for t in &tables {
        let finite = t.values.iter().all(|v| v.is_finite()) && t.tail_constant.is_finite();
        let params = json!({ "kind": t.which, "dtheta_order": t.dtheta_order, "finite": finite });
        let bound = if finite { t.periodization_bound } else { f64::INFINITY };
        checks.push(CheckRecord::close("table_localisation", params, bound, 0.0, MOMENT_TOL));
    }
    Ok(KernelSummary {
        checks,
        tail_constants: tables.iter().map(|t| t.tail_constant).collect(),
        periodization_bounds: tables.iter().map(|t| t.periodization_bound).collect(),
        imag_residues: tables.iter().map(|t| t.imag_residue).collect(),
        matrix,
    })
}
