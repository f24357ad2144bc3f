use std::fs;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;

use taskinfo::annealing::{
    anneal, check_epsilon_connected, connected_instance, disconnected_instance,
    effective_potential_delta, reachable_global_minimizer, static_transition_weights,
    AnnealSchedule, Connectivity, PosteriorGrid,
};
use taskinfo::bounds::{bound_validation_trial, pac_bayes_bound};
use taskinfo::distance::distance_matrix;
use taskinfo::models::Architecture;
use taskinfo::oracle::{structure_function, FamilySpec};
use taskinfo::rng::derive_seed;
use taskinfo::svg::{Heatmap, LinePlot, Series};
use taskinfo::tasks::{Dataset, InputDomain, Teacher};
use taskinfo::variational::{structure_sweep, IsotropicPrior, Sweep, VariationalConfig};

use crate::config::{
    build_tasks, AnnealConfig, BetaSweepConfig, DistanceMatrixConfig, Engine, GenTaskConfig,
    GridSource, Loaded, NetworkSettings, PacBayesConfig, StructureFnConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

fn render<F>(f: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> taskinfo::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn architecture(d: &Dataset, hidden: &[usize]) -> CliResult<Architecture> {
    let mut widths = vec![d.domain().feature_dim()];
    widths.extend(hidden);
    widths.push(d.num_labels());
    Ok(Architecture::new(widths)?)
}

/// Optimizer seeds in a config are offsets mixed with the top-level seed.
fn seeded(cfg: &VariationalConfig, seed: u64) -> VariationalConfig {
    VariationalConfig {
        seed: derive_seed(seed, cfg.seed),
        ..cfg.clone()
    }
}

fn read_file(base: &Path, path: &Path, what: &str) -> CliResult<BufReader<fs::File>> {
    let full = base.join(path);
    fs::File::open(&full)
        .map(BufReader::new)
        .map_err(|e| CliError::config(format!("cannot open {what} {}: {e}", full.display())))
}

fn sweep(d: &Dataset, betas: &[f64], net: &NetworkSettings, seed: u64) -> CliResult<Sweep> {
    let arch = architecture(d, &net.hidden)?;
    let prior = IsotropicPrior::new(net.prior_scale)?;
    Ok(structure_sweep(d, &arch, betas, &prior, &seeded(&net.posterior, seed))?)
}

pub fn structure_fn(l: &Loaded<StructureFnConfig>, out: &Path) -> CliResult<Outputs> {
    let c = &l.config;
    let d = build_tasks(std::slice::from_ref(&c.task), &l.base, c.seed)?.remove(0).1;
    let mut o = Outputs::new(out, "structure-fn", &l.hash);
    let n_lnk = d.len() as f64 * (d.num_labels() as f64).ln();
    let (curve, plot) = match c.engine {
        Engine::Oracle => {
            let grid = c.t_grid.as_deref().unwrap_or_default();
            if grid.is_empty() {
                return Err(CliError::config("the oracle engine needs a nonempty `t_grid`"));
            }
            let spec = match (&c.family, &c.family_file) {
                (Some(_), Some(_)) => return Err(CliError::config("give `family` or `family_file`, not both")),
                (Some(f), None) => f.clone(),
                (None, Some(p)) => FamilySpec::read(read_file(&l.base, p, "family file")?)?,
                (None, None) => FamilySpec::default(),
            };
            let m = match d.domain() {
                InputDomain::Discrete(m) => m,
                InputDomain::Real(_) => return Err(CliError::config("the oracle engine needs a discrete task")),
            };
            let fam = spec.instantiate(m, d.num_labels())?;
            let curve = structure_function(&d, &fam, grid)?;
            let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.x, p.loss)).collect();
            let reference: Vec<(f64, f64)> = grid.iter().map(|&t| (t, (n_lnk - t).max(0.0))).collect();
            let plot = LinePlot {
                title: format!("Structure function of {}", c.task.name),
                x_label: "complexity budget t (nats)".into(),
                y_label: "training loss (nats)".into(),
                log_x: false,
                series: vec![Series::new("oracle", pts), Series::new("N lnK - t", reference)],
                comment: Some(o.stamp().to_string()),
            };
            (curve, plot)
        }
        Engine::Variational => {
            let betas = c.betas.as_deref().unwrap_or_default();
            if betas.is_empty() {
                return Err(CliError::config("the variational engine needs a nonempty `betas`"));
            }
            let net = c
                .network
                .as_ref()
                .ok_or_else(|| CliError::config("the variational engine needs a `network` table"))?;
            let s = sweep(&d, betas, net, c.seed)?;
            let plot = LinePlot {
                title: format!("Loss against KL for {}", c.task.name),
                x_label: "KL to prior (nats)".into(),
                y_label: "expected training loss (nats)".into(),
                log_x: false,
                series: vec![Series::new("variational", s.tradeoff())],
                comment: Some(o.stamp().to_string()),
            };
            (s.to_curve()?, plot)
        }
    };
    o.table("structure.csv", render(|w| curve.write_csv(w))?);
    o.raw("structure.svg", plot.render().into_bytes());
    Ok(o)
}

pub fn beta_sweep(l: &Loaded<BetaSweepConfig>, out: &Path) -> CliResult<Outputs> {
    let c = &l.config;
    if c.betas.is_empty() {
        return Err(CliError::config("`betas` is empty"));
    }
    if c.tasks.is_empty() {
        return Err(CliError::config("`tasks` is empty"));
    }
    let tasks = build_tasks(&c.tasks, &l.base, c.seed)?;
    let sweeps = tasks
        .par_iter()
        .enumerate()
        .map(|(i, (_, d))| sweep(d, &c.betas, &c.network, derive_seed(c.seed, i as u64)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut o = Outputs::new(out, "beta-sweep", &l.hash);
    let mut transitions = String::from("task,transition_beta\n");
    let mut series = Vec::new();
    for ((name, _), s) in tasks.iter().zip(&sweeps) {
        o.table(&format!("sweep_{name}.csv"), render(|w| s.write_csv(w))?);
        let t = s.transition_beta().map(|b| b.to_string()).unwrap_or_default();
        transitions.push_str(&format!("{name},{t}\n"));
        series.push(Series::new(
            name.clone(),
            s.points.iter().map(|p| (p.beta, p.loss_per_sample)).collect(),
        ));
    }
    o.table("transitions.csv", transitions.into_bytes());
    let plot = LinePlot {
        title: "Loss per sample along the annealed sweep".into(),
        x_label: "beta".into(),
        y_label: "expected loss per sample (nats)".into(),
        log_x: true,
        series,
        comment: Some(o.stamp().to_string()),
    };
    o.raw("sweep.svg", plot.render().into_bytes());
    Ok(o)
}

pub fn distance(l: &Loaded<DistanceMatrixConfig>, out: &Path) -> CliResult<Outputs> {
    let c = &l.config;
    let tasks = build_tasks(&c.tasks, &l.base, c.seed)?;
    let mut cfg = c.distance.clone();
    cfg.posterior = seeded(&cfg.posterior, c.seed);
    let m = distance_matrix(&tasks, &cfg)?;
    let mut o = Outputs::new(out, "distance-matrix", &l.hash);
    o.table("matrix.csv", render(|w| m.write_csv(w))?);
    let mut meta = m.metadata(&l.hash);
    meta["generated_by"] = serde_json::Value::String(o.stamp().to_string());
    meta["tolerance_fraction"] = serde_json::json!(cfg.tolerance_fraction);
    let mut json = serde_json::to_vec_pretty(&meta).map_err(|e| CliError::config(e.to_string()))?;
    json.push(b'\n');
    o.raw("matrix.meta.json", json);
    let heat = Heatmap {
        title: format!("d(source -> target) at beta = {}", m.beta),
        row_labels: m.names.clone(),
        col_labels: m.names.clone(),
        values: m.values(),
        comment: Some(format!("{}; rows are targets, columns are sources", o.stamp())),
    };
    o.raw("matrix.svg", heat.render().into_bytes());
    Ok(o)
}

pub fn pac_bayes(l: &Loaded<PacBayesConfig>, out: &Path) -> CliResult<Outputs> {
    let c = &l.config;
    if c.bound.is_none() && c.validation.is_none() {
        return Err(CliError::config("give a `bound` request, a `validation` run, or both"));
    }
    let mut o = Outputs::new(out, "pac-bayes", &l.hash);
    if let Some(b) = &c.bound {
        let r = pac_bayes_bound(b.train_loss_total, b.kl, b.n, b.beta, b.delta)?;
        let body = format!(
            "train_term,kl_nats,n,beta,delta,bound\n{},{},{},{},{},{}\n",
            r.train_term, r.kl, r.n, r.beta, r.delta, r.bound
        );
        o.table("bound.csv", body.into_bytes());
    }
    if let Some(v) = &c.validation {
        let t = &v.teacher;
        let teacher = Teacher::random(t.dim, t.labels, t.teacher_seed)?;
        let generator = |s: u64| -> taskinfo::Result<(Dataset, Dataset)> {
            Ok((
                teacher.sample(t.train_n, t.noise, s)?,
                teacher.sample(t.test_n, t.noise, derive_seed(s, 1))?,
            ))
        };
        let mut widths = vec![t.dim];
        widths.extend(&v.hidden);
        widths.push(t.labels);
        let arch = Architecture::new(widths)?;
        let report = bound_validation_trial(generator, &arch, v.beta, v.delta, v.trials, &v.fit, c.seed)?;
        o.table("coverage.csv", render(|w| report.write_csv(w))?);
        let summary = format!(
            "trials,covered,coverage,nominal,below_nominal\n{},{},{},{},{}\n",
            report.rows.len(),
            report.covered(),
            report.coverage(),
            1.0 - v.delta,
            report.below_nominal() as u8
        );
        o.table("coverage_summary.csv", summary.into_bytes());
    }
    Ok(o)
}

pub fn anneal_cmd(l: &Loaded<AnnealConfig>, out: &Path) -> CliResult<Outputs> {
    let c = &l.config;
    let (grid, schedule, start, generated): (PosteriorGrid, AnnealSchedule, Option<usize>, bool) = match &c.grid {
        GridSource::File { nodes, metric } => {
            let g = PosteriorGrid::read(read_file(&l.base, nodes, "grid file")?, read_file(&l.base, metric, "metric file")?)?;
            let s = c
                .schedule
                .clone()
                .ok_or_else(|| CliError::config("a file grid needs a `schedule`"))?;
            (g, s, None, false)
        }
        GridSource::Connected { chain, distractors } => {
            let (g, s, start) = connected_instance(c.seed, *chain, *distractors)?;
            (g, c.schedule.clone().unwrap_or(s), Some(start), true)
        }
        GridSource::Disconnected => {
            let (g, s, start) = disconnected_instance();
            (g, c.schedule.clone().unwrap_or(s), Some(start), true)
        }
    };
    let start = c
        .start
        .or(start)
        .ok_or_else(|| CliError::config("a file grid needs a `start` node"))?;
    let (final_node, trajectory) = anneal(&grid, &schedule, start)?;
    let beta = schedule.final_beta();
    let connectivity = check_epsilon_connected(&grid, &schedule);
    let reachable = reachable_global_minimizer(&grid, &schedule, start)?;

    let mut o = Outputs::new(out, "anneal", &l.hash);
    o.table("trajectory.csv", render(|w| trajectory.write_csv(w))?);
    let (connected, detail) = match &connectivity {
        Connectivity::Connected { .. } => (1, String::new()),
        Connectivity::Disconnected { index, stranded } => (0, format!("index {index} node {stranded}")),
    };
    let summary = format!(
        "start,final_node,final_beta,global_minimizer,epsilon_connected,disconnection,reachable\n{start},{final_node},{beta},{},{connected},{detail},{}\n",
        grid.is_global_minimizer(final_node, beta) as u8,
        reachable as u8
    );
    o.table("summary.csv", summary.into_bytes());
    if let Some(t) = c.temperature {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::config("`temperature` must be positive"));
        }
        let weights = static_transition_weights(&grid, start, beta, t)?;
        let mut body = String::from("node_id,delta_nats,weight\n");
        for (q, w) in weights.iter().enumerate() {
            body.push_str(&format!("{q},{},{w}\n", effective_potential_delta(&grid, start, q, beta)?));
        }
        o.table("weights.csv", body.into_bytes());
    }
    if generated {
        o.headed("grid_nodes.csv", render(|w| grid.write_nodes(w))?);
        o.headed("grid_metric.csv", render(|w| grid.write_metric(w))?);
    }
    let plot = LinePlot {
        title: "Lagrangian along the annealing trajectory".into(),
        x_label: "step".into(),
        y_label: "L + beta KL (nats)".into(),
        log_x: false,
        series: vec![Series::new(
            "trajectory",
            trajectory.steps.iter().map(|s| (s.step as f64, s.lagrangian)).collect(),
        )],
        comment: Some(o.stamp().to_string()),
    };
    o.raw("trajectory.svg", plot.render().into_bytes());
    Ok(o)
}

pub fn gen_task(l: &Loaded<GenTaskConfig>, out: &Path) -> CliResult<Outputs> {
    let c = &l.config;
    if c.tasks.is_empty() {
        return Err(CliError::config("`tasks` is empty"));
    }
    let tasks = build_tasks(&c.tasks, &l.base, c.seed)?;
    let mut o = Outputs::new(out, "gen-task", &l.hash);
    for (name, d) in &tasks {
        o.headed(&format!("{name}.csv"), render(|w| d.write_csv(w))?);
    }
    Ok(o)
}
