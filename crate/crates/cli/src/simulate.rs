use std::sync::Arc;

use mbmlab_core::field::{FieldConfig, FieldEngine, TruncationBound};
use mbmlab_core::hoelder::check_conditions;
use mbmlab_core::trajectory::TrajectoryGrid;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::kernels::load_bank;
use crate::output::Artifacts;
use crate::Outcome;

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let sim = &cfg.simulate;
    let field = FieldConfig {
        j_max: sim.j_max,
        tail_tol: sim.tail_tol,
        t_bound: sim.t0.abs().max(sim.t1.abs()),
        seed: cfg.seed,
        ..FieldConfig::default()
    };
    field.validate()?;
    sim.validate(field.theta_bounds)?;
    let bank = Arc::new(load_bank(&cfg.tables_dir(), cfg.synthesis)?);
    let mut out = Artifacts::new(&cfg.out)?;

    let engine = FieldEngine::new(bank, field)?;
    let step = 2f64.powi(-(sim.step_log2 as i32));
    let (x, y) = engine.mbm_trajectories(&sim.profile, sim.t0, step, sim.len())?;
    let conditions = check_conditions(&sim.profile, (sim.t0, sim.t1));
    let extra = json!({
        "h_descriptor": sim.profile.describe(),
        "h_truncation_bound": sim.profile.truncation_bound(),
        "conditions": conditions,
        "interval": [sim.t0, sim.t1],
    });
    let h_range = sim.profile.range_on(sim.t0, sim.t1);
    write_path(&mut out, "x", &x, &extra, engine.truncation_bound_for(h_range, 0)?)?;
    write_path(&mut out, "y", &y, &extra, engine.truncation_bound_for(h_range, 1)?)?;
    if let Some(theta) = sim.theta {
        let b = engine.field_trajectory(theta, 0, sim.t0, step, sim.len())?;
        write_path(&mut out, "b_theta", &b, &extra, engine.truncation_bound_for((theta, theta), 0)?)?;
    }
    out.finish("simulate", cfg, json!({ "points": sim.len(), "step": step }))?;
    println!("wrote {} points to {}", sim.len(), cfg.out.display());
    Ok(Outcome::Pass)
}

fn write_path(
    out: &mut Artifacts,
    stem: &str,
    path: &TrajectoryGrid<f64>,
    extra: &Value,
    bound: TruncationBound,
) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    out.write(&format!("{stem}.csv"), &buf)?;
    let mut sidecar = path.sidecar();
    if let (Some(map), Some(more)) = (sidecar.as_object_mut(), extra.as_object()) {
        map.extend(more.clone());
        map.insert("truncation".into(), json!(bound));
    }
    out.write_json(&format!("{stem}.json"), &sidecar)
}
