use mbmlab_core::wavelet::{KernelBank, FORMAT_VERSION};
use serde_json::json;

use crate::config::RunConfig;
use crate::kernels::{kernel_checks, table_bytes, DUAL_FILE, SYNTHESIS_FILES};
use crate::output::{csv, num, Artifacts};
use crate::Outcome;

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    cfg.synthesis.validate()?;
    let mut out = Artifacts::new(&cfg.tables_dir())?;
    let bank = KernelBank::build(cfg.synthesis)?;
    for (name, table) in SYNTHESIS_FILES.iter().zip(&bank.synthesis) {
        out.write(name, &table_bytes(table)?)?;
    }
    out.write(DUAL_FILE, &table_bytes(&bank.dual)?)?;

    let summary = kernel_checks(&bank)?;
    let rows = summary.matrix.iter().map(|e| {
        vec![format!("{}", e.theta), e.j.to_string(), e.k.to_string(), e.j2.to_string(), e.k2.to_string(), num(e.value)]
    });
    out.write("biorthogonality.csv", csv("theta,j,k,j2,k2,value", rows).as_bytes())?;
    let pass = summary.pass();
    out.write_json(
        "synthesis_summary.json",
        &json!({ "pass": pass, "format_version": FORMAT_VERSION, "synthesis": cfg.synthesis, "kernels": summary }),
    )?;
    out.finish("synthesize", cfg, json!({ "pass": pass }))?;
    for c in &summary.checks {
        println!("{:<20} {:>12.3e}  {}", c.check, c.lhs, if c.pass { "ok" } else { "FAILED" });
    }
    Ok(if pass { Outcome::Pass } else { Outcome::Fail("kernel verification failed".into()) })
}
