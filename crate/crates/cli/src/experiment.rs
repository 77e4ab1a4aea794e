use std::sync::Arc;

use clap::ValueEnum;
use mbmlab_core::experiments::{run_dichotomy, run_dimension, run_energy};
use serde_json::json;

use crate::config::RunConfig;
use crate::kernels::load_bank;
use crate::output::{csv, num, opt, Artifacts};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Dichotomy,
    Dimension,
    Energy,
}

impl ExperimentName {
    fn label(self) -> &'static str {
        match self {
            ExperimentName::Dichotomy => "dichotomy",
            ExperimentName::Dimension => "dimension",
            ExperimentName::Energy => "energy",
        }
    }
}

pub fn run(cfg: &RunConfig, name: ExperimentName) -> anyhow::Result<Outcome> {
    let ex = &cfg.experiment;
    match name {
        ExperimentName::Dichotomy => ex.dichotomy.validate()?,
        ExperimentName::Dimension => {
            ex.dimension.simulation.validate()?;
            ex.dimension.profile.validate()?;
        }
        ExperimentName::Energy => ex.energy.validate()?,
    }
    let bank = Arc::new(load_bank(&cfg.tables_dir(), cfg.synthesis)?);
    let mut out = Artifacts::new(&cfg.out.join(name.label()))?;
    let outcome = match name {
        ExperimentName::Dichotomy => dichotomy(cfg, &bank, &mut out)?,
        ExperimentName::Dimension => dimension(cfg, &bank, &mut out)?,
        ExperimentName::Energy => energy(cfg, &bank, &mut out)?,
    };
    let pass = matches!(outcome, Outcome::Pass);
    out.finish(&format!("experiment {}", name.label()), cfg, json!({ "pass": pass }))?;
    Ok(outcome)
}

fn dichotomy(cfg: &RunConfig, bank: &Arc<mbmlab_core::wavelet::KernelBank>, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let report = run_dichotomy(bank, &cfg.experiment.dichotomy, cfg.seed)?;
    for s in &report.seeds {
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        out.write(&format!("points/seed_{:03}.csv", s.index), &buf)?;
    }
    let rows = report.seeds.iter().map(|s| {
        vec![
            s.index.to_string(),
            s.seed.to_string(),
            s.crossings.len().to_string(),
            opt(s.far_median),
            opt(s.crossing_median),
            s.separated().map(|b| b.to_string()).unwrap_or_default(),
            opt(s.truncation_rms),
        ]
    });
    out.write(
        "seeds.csv",
        csv("seed_index,seed,crossings,far_median_alpha,crossing_median_alpha,separated,truncation_rms", rows).as_bytes(),
    )?;
    let pass = report.pass();
    out.write_json(
        "summary.json",
        &json!({
            "pass": pass,
            "mode": report.config.mode,
            "h_descriptor": report.config.profile.describe(),
            "scales": report.config.scales,
            "far_median_error": report.far_median_error,
            "crossing_median_error": report.crossing_median_error,
            "tolerance": report.config.tolerance,
            "separated_seeds": report.separated_seeds,
            "seeds_with_crossings": report.seeds_with_crossings,
            "seeds": report.seeds.len(),
        }),
    )?;
    println!(
        "far |alpha - zeta| median {}  crossing |alpha - H| median {}  separated {}/{}",
        fmt(report.far_median_error),
        fmt(report.crossing_median_error),
        report.separated_seeds,
        report.seeds.len()
    );
    Ok(verdict(pass, "dichotomy criteria not met"))
}

fn dimension(cfg: &RunConfig, bank: &Arc<mbmlab_core::wavelet::KernelBank>, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let dc = &cfg.experiment.dimension;
    let (report, sets) = run_dimension(bank, dc, cfg.seed)?;
    for (i, set) in sets.iter().enumerate() {
        out.write(&format!("crossings/seed_{i:03}.csv"), csv("s", set.iter().map(|s| vec![format!("{s:.12}")])).as_bytes())?;
    }
    let rows = report.seeds.iter().map(|s| {
        vec![
            s.index.to_string(),
            s.crossings.to_string(),
            opt(s.dimension.as_ref().map(|d| d.dimension)),
            opt(s.dimension.as_ref().map(|d| d.r2)),
            num(report.bound),
        ]
    });
    out.write("dimension_table.csv", csv("seed_index,crossings,box_dimension,r2,bound", rows).as_bytes())?;
    let brownian_ok = report.brownian_median.map(|m| (m - 0.5).abs() <= 0.1);
    let pass = report.nonempty_fraction > 0.0 && report.pass == Some(true) && brownian_ok != Some(false);
    out.write_json("summary.json", &json!({ "pass": pass, "h_descriptor": dc.profile.describe(), "report": report }))?;
    println!(
        "nonempty {:.2}  median dimension {}  bound {:.4} - {}  brownian median {}",
        report.nonempty_fraction,
        fmt(report.median_dimension),
        report.bound,
        report.slack,
        fmt(report.brownian_median)
    );
    Ok(verdict(pass, "dimension criteria not met"))
}

fn energy(cfg: &RunConfig, bank: &Arc<mbmlab_core::wavelet::KernelBank>, out: &mut Artifacts) -> anyhow::Result<Outcome> {
    let ex = run_energy(bank, &cfg.experiment.energy, cfg.seed)?;
    let mass = ex.moments.iter().map(|m| {
        vec![m.n.to_string(), num(m.mean_mass), num(m.standard_error), num(ex.target), num((m.mean_mass - ex.target) / m.standard_error)]
    });
    out.write("energy_mass.csv", csv("n,mean_mass,standard_error,target,z", mass).as_bytes())?;
    let energies = ex
        .moments
        .iter()
        .flat_map(|m| m.energies.iter().map(move |&(g, e, r)| vec![m.n.to_string(), format!("{g}"), num(e), num(r)]));
    out.write("energy_gamma.csv", csv("n,gamma,mean_energy,max_ratio_to_bound", energies).as_bytes())?;
    let n_max = ex.config.ns.iter().copied().max().unwrap_or(0);
    let pass = ex.within_three_se(n_max) == Some(true);
    out.write_json("summary.json", &json!({ "pass": pass, "h_descriptor": ex.config.profile.describe(), "report": ex }))?;
    for m in &ex.moments {
        println!("n = {:<5} mean mass {:.5} +- {:.5}  target {:.5}", m.n, m.mean_mass, m.standard_error, ex.target);
    }
    Ok(verdict(pass, "energy mean misses the target"))
}

fn verdict(pass: bool, why: &str) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail(why.into())
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}
