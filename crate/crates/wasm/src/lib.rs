//! Browser demo bindings: three interactive operations over the core crate,
//! each returning a JSON string (an `{"error": ...}` object on failure) so
//! the page stays framework-free.

use barovort::exact_solutions::{rossby_dispersion, rossby_wave};
use barovort::fields::{residual, EquationParams, Grid};
use barovort::integrate::{integrate, invariant_drift, IntegratorConfig, Model};
use barovort::spectral::{enumerate_subgroups, fixed_subspace, lorenz1960, reduce_model, Subgroup, Truncation};
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

fn err_json(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Integrate the Lorenz 1960 three-component model and return the sampled
/// trajectory together with the energy/enstrophy drift.
#[wasm_bindgen]
pub fn lorenz_trajectory_json(
    k: f64,
    l: f64,
    a0: f64,
    f0: f64,
    g0: f64,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> String {
    let run = || -> barovort::Result<String> {
        let model = Model::reduced(lorenz1960(k, l)?);
        let cfg = IntegratorConfig::new(dt, t_end, stride.max(1))?;
        let traj = integrate(&model, &[a0, f0, g0], &cfg)?;
        let drift = invariant_drift(&traj, &model);
        let series: Vec<Vec<f64>> = (0..3)
            .map(|i| traj.states.iter().map(|s| s[i]).collect())
            .collect();
        Ok(json!({
            "names": traj.names,
            "times": traj.times,
            "series": series,
            "energy_initial": drift.energy_initial,
            "enstrophy_initial": drift.enstrophy_initial,
            "energy_max_rel_drift": drift.energy_max_rel_drift,
            "enstrophy_max_rel_drift": drift.enstrophy_max_rel_drift,
        })
        .to_string())
    };
    run().unwrap_or_else(err_json)
}

/// Sample the Rossby wave stream function on a grid at time `t`; also
/// reports the dispersion value and the equation residual on the default
/// verification grid.
#[wasm_bindgen]
pub fn rossby_field_json(
    amplitude: f64,
    k: f64,
    l: f64,
    beta: f64,
    t: f64,
    n: usize,
    extent: f64,
) -> String {
    let run = || -> barovort::Result<String> {
        let psi = rossby_wave(amplitude, k, l, beta)?;
        let n = n.clamp(2, 256);
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            // row-major, y decreasing so the canvas draws north up
            let y = extent * (1.0 - 2.0 * j as f64 / (n - 1) as f64);
            for i in 0..n {
                let x = extent * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
                values.push(psi.eval(&[t, x, y])?);
            }
        }
        let report = residual(
            &psi,
            &EquationParams::Cartesian { beta },
            &Grid::cartesian_default(),
        )?;
        Ok(json!({
            "n": n,
            "extent": extent,
            "values": values,
            "sigma": rossby_dispersion(k, l, beta),
            "residual_max": report.max_abs,
        })
        .to_string())
    };
    run().unwrap_or_else(err_json)
}

/// Reduce the eight-component truncation by the subgroup generated from a
/// comma-separated word list and return the model JSON plus subspace data.
#[wasm_bindgen]
pub fn reduce_model_json(words: &str, k: f64, l: f64) -> String {
    let run = || -> barovort::Result<String> {
        let subgroup = Subgroup::parse_word_list(words)?;
        let trunc = Truncation::box_pm1(k, l)?;
        let model = reduce_model(&subgroup, &trunc)?;
        Ok(json!({
            "model": model.to_json(),
            "dimension": model.dim(),
            "constraints": model.subspace.constraints,
            "elements": subgroup.elements().iter().map(|e| e.word()).collect::<Vec<_>>(),
        })
        .to_string())
    };
    run().unwrap_or_else(err_json)
}

/// The 67-row subgroup table for the chosen wavenumbers.
#[wasm_bindgen]
pub fn subgroup_table_json(k: f64, l: f64) -> String {
    let run = || -> barovort::Result<String> {
        let trunc = Truncation::box_pm1(k, l)?;
        let rows: Vec<serde_json::Value> = enumerate_subgroups()
            .iter()
            .map(|s| {
                let fs = fixed_subspace(s, &trunc)?;
                Ok(json!({
                    "generators": s.word(),
                    "order": s.order(),
                    "dimension": fs.dim(),
                }))
            })
            .collect::<barovort::Result<_>>()?;
        Ok(serde_json::Value::Array(rows).to_string())
    };
    run().unwrap_or_else(err_json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_trajectory_has_conserved_invariants() {
        let text = lorenz_trajectory_json(1.0, 2.0, 1.0, 1.0, 1.0, 1e-3, 10.0, 100);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("error").is_none(), "{}", text);
        assert_eq!(v["names"], serde_json::json!(["A", "F", "G"]));
        assert!(v["energy_max_rel_drift"].as_f64().unwrap() < 1e-8);
        assert_eq!(v["times"].as_array().unwrap().len(), 101);
    }

    #[test]
    fn rossby_field_reports_dispersion_and_residual() {
        let text = rossby_field_json(1.0, 1.0, 2.0, 1.0, 0.3, 32, 3.0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["values"].as_array().unwrap().len(), 32 * 32);
        assert!((v["sigma"].as_f64().unwrap() + 0.2).abs() < 1e-15);
        assert!(v["residual_max"].as_f64().unwrap() < 1e-12);
    }

    #[test]
    fn reduce_model_json_accepts_word_lists() {
        let text = reduce_model_json("pqe1,pqe2", 1.0, 2.0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["dimension"], 3);
        let text = reduce_model_json("zzz", 1.0, 2.0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("error").is_some());
    }

    #[test]
    fn subgroup_table_has_67_rows() {
        let text = subgroup_table_json(1.0, 2.0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 67);
    }
}
