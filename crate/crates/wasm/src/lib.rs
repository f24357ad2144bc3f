//! Browser bindings. Each export returns a complete SVG document.
//!
//! The `*_svg` functions in [`demo`] do the work and are plain Rust so they
//! can be tested natively; the `#[wasm_bindgen]` wrappers only convert
//! errors into JavaScript exceptions.

use wasm_bindgen::prelude::*;

pub mod demo {
    use taskinfo::annealing::{anneal, connected_instance, disconnected_instance};
    use taskinfo::bounds::pac_bayes_bound;
    use taskinfo::oracle::{structure_function, FamilySpec};
    use taskinfo::svg::{LinePlot, Series};
    use taskinfo::tasks::{generate_random_label_task, InputDomain};
    use taskinfo::Result;

    const DOMAIN: usize = 64;

    /// Oracle structure function of an `n`-sample random-label task over a
    /// 64-point domain, on budgets `0..=t_max` in steps of `t_max / 100`.
    pub fn structure_function_svg(n: usize, labels: usize, seed: u64, t_max: f64) -> Result<String> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(taskinfo::Error::InvalidParameter("t_max must be positive".into()));
        }
        let d = generate_random_label_task(n, InputDomain::Discrete(DOMAIN), labels, seed)?;
        let fam = FamilySpec::flat().instantiate(DOMAIN, labels)?;
        let grid: Vec<f64> = (0..=100).map(|i| t_max * i as f64 / 100.0).collect();
        let curve = structure_function(&d, &fam, &grid)?;
        let top = n as f64 * (labels as f64).ln();
        let plot = LinePlot {
            title: format!("Structure function, {n} random labels over {labels} classes"),
            x_label: "complexity budget t (nats)".into(),
            y_label: "training loss (nats)".into(),
            log_x: false,
            series: vec![
                Series::new("oracle", curve.points.iter().map(|p| (p.x, p.loss)).collect()),
                Series::new("N lnK - t", grid.iter().map(|&t| (t, (top - t).max(0.0))).collect()),
            ],
            comment: None,
        };
        Ok(plot.render())
    }

    /// Annealing on a generated grid. `connected` picks an epsilon-connected
    /// instance seeded by `seed`, otherwise the fixed stranded instance.
    pub fn anneal_svg(connected: bool, seed: u64, chain: usize, distractors: usize) -> Result<String> {
        let (g, s, start) = if connected {
            connected_instance(seed, chain, distractors)?
        } else {
            disconnected_instance()
        };
        let (end, traj) = anneal(&g, &s, start)?;
        let best = g.is_global_minimizer(end, s.final_beta());
        let plot = LinePlot {
            title: format!(
                "Annealing from node {start} ends at node {end} ({})",
                if best { "global minimum" } else { "not a global minimum" }
            ),
            x_label: "step".into(),
            y_label: "L + beta KL (nats)".into(),
            log_x: false,
            series: vec![
                Series::new("trajectory", traj.steps.iter().map(|t| (t.step as f64, t.lagrangian)).collect()),
                Series::new(
                    "global minimum",
                    traj.steps.iter().map(|t| (t.step as f64, g.min_lagrangian(t.beta))).collect(),
                ),
            ],
            comment: None,
        };
        Ok(plot.render())
    }

    /// The bound as a function of KL in `[0, kl_max]` at a fixed mean
    /// clipped training loss, for each `beta` in `betas`.
    pub fn bound_svg(train_term: f64, n: usize, delta: f64, kl_max: f64, betas: &[f64]) -> Result<String> {
        if !(kl_max > 0.0 && kl_max.is_finite()) {
            return Err(taskinfo::Error::InvalidParameter("kl_max must be positive".into()));
        }
        let series = betas
            .iter()
            .map(|&beta| {
                let pts = (0..=50)
                    .map(|i| {
                        let kl = kl_max * i as f64 / 50.0;
                        pac_bayes_bound(train_term * n as f64, kl, n, beta, delta).map(|r| (kl, r.bound))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Series::new(format!("beta = {beta}"), pts))
            })
            .collect::<Result<Vec<_>>>()?;
        let plot = LinePlot {
            title: format!("PAC-Bayes bound, n = {n}, delta = {delta}"),
            x_label: "KL to prior (nats)".into(),
            y_label: "bound on clipped test loss".into(),
            log_x: false,
            series,
            comment: None,
        };
        Ok(plot.render())
    }
}

fn js(e: taskinfo::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn structure_function_svg(n: usize, labels: usize, seed: u32, t_max: f64) -> Result<String, JsError> {
    demo::structure_function_svg(n, labels, seed as u64, t_max).map_err(js)
}

#[wasm_bindgen]
pub fn anneal_svg(connected: bool, seed: u32, chain: usize, distractors: usize) -> Result<String, JsError> {
    demo::anneal_svg(connected, seed as u64, chain, distractors).map_err(js)
}

#[wasm_bindgen]
pub fn bound_svg(train_term: f64, n: usize, delta: f64, kl_max: f64, betas: Vec<f64>) -> Result<String, JsError> {
    demo::bound_svg(train_term, n, delta, kl_max, &betas).map_err(js)
}
