//! Mode dispatch. Rows are computed in parallel and returned in grid order.

use advse::asymptotics::{plateau_errors, solve_large_alpha, LargeAlphaParams};
use advse::exec::{counter_seed, map_indexed};
use advse::metrics::report;
use advse::se::solve_fixed_point;
use advse::sim::{
    empirical_errors, empirical_overlaps, erm_train, fgm_train, sample_dataset, surrogate_train, Estimator, TestSampling,
    TrainerConfig,
};
use advse::{BlockFeatureModel, ExperimentParams, SolverConfig};

use crate::config::{ExperimentConfig, Mode};
use crate::output::{Metrics, Provenance, ResultRow, ZScores};

struct Task {
    alpha: f64,
    eps_t: f64,
}

fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    if cfg.mode == Mode::Asymptotic {
        return cfg.eps_t.iter().map(|&eps_t| Task { alpha: f64::INFINITY, eps_t }).collect();
    }
    let mut t = Vec::new();
    for &eps_t in &cfg.eps_t {
        for &alpha in &cfg.alpha {
            t.push(Task { alpha, eps_t });
        }
    }
    t
}

fn blank(cfg: &ExperimentConfig, prov: Provenance, task: &Task) -> ResultRow {
    let sim = prov == Provenance::Simulation;
    ResultRow {
        mode: cfg.mode.name().to_string(),
        provenance: prov,
        preset: cfg.preset.clone(),
        alpha: task.alpha,
        lambda: cfg.lambda,
        tau: cfg.tau,
        eps_t: task.eps_t,
        eps_g: cfg.eps_g,
        d: sim.then_some(cfg.d),
        seeds: sim.then_some(cfg.seeds),
        values: Metrics::default(),
        sem: Metrics::default(),
        z: ZScores::default(),
        iterations: None,
        residual: None,
        error: None,
    }
}

fn theory_row(cfg: &ExperimentConfig, model: &BlockFeatureModel, task: &Task) -> ResultRow {
    let mut row = blank(cfg, Provenance::Theory, task);
    let params = ExperimentParams::new(task.alpha, cfg.lambda, cfg.tau, task.eps_t, cfg.eps_g);
    let res = solve_fixed_point(&params, model, &SolverConfig::default())
        .and_then(|fp| report(&fp, &params, cfg.gamma).map(|r| (fp, r)));
    match res {
        Ok((fp, r)) => {
            let (o, x) = (fp.overlaps, fp.aux);
            row.values = Metrics {
                m: Some(o.m),
                q: Some(o.q),
                v: Some(o.v),
                p: Some(o.p),
                a: Some(x.a),
                f: Some(x.f),
                n: Some(x.n),
                egen: Some(r.egen),
                ebnd: Some(r.ebnd),
                eadv: Some(r.eadv),
                etrain: r.etrain,
                ltrain: r.ltrain,
                ecp: r.ecp,
            };
            row.iterations = Some(fp.iterations as f64);
            row.residual = Some(fp.residual);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn asymptotic_row(cfg: &ExperimentConfig, model: &BlockFeatureModel, task: &Task) -> ResultRow {
    let mut row = blank(cfg, Provenance::Theory, task);
    // lambda is read as the coefficient of alpha in the ridge
    let pr = LargeAlphaParams { lambda1: cfg.lambda, tau: cfg.tau, eps_t: task.eps_t, eps_g: cfg.eps_g };
    match solve_large_alpha(&pr, model, &SolverConfig::default()) {
        Ok(st) => {
            let pl = plateau_errors(&st, cfg.tau, cfg.eps_g);
            row.values = Metrics {
                m: Some(st.m0),
                q: Some(st.q0),
                v: Some(st.v0),
                p: Some(st.p0),
                a: Some(st.a0),
                f: Some(st.f0),
                n: Some(st.n0),
                egen: Some(pl.egen_inf),
                ebnd: Some(pl.ebnd_inf),
                eadv: Some(pl.eadv_inf),
                ..Metrics::default()
            };
            row.iterations = Some(st.iterations as f64);
            row.residual = Some(st.residual);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

struct SeedResult {
    cells: [Option<f64>; 13],
    iterations: f64,
    residual: f64,
}

fn train(cfg: &ExperimentConfig, data: &advse::sim::Dataset, eps_t: f64) -> advse::Result<Estimator> {
    let tc = TrainerConfig::default();
    match cfg.mode {
        Mode::Fgm => fgm_train(data, cfg.lambda, eps_t, &tc),
        Mode::Surrogate => surrogate_train(data, cfg.lambda, cfg.surrogate.0, cfg.surrogate.1, &tc),
        _ => erm_train(data, cfg.lambda, eps_t, &tc),
    }
}

/// Folds the serialized model into a seed, so different models never share
/// Gaussian draws.
pub fn model_key(model: &BlockFeatureModel) -> u64 {
    let s = serde_json::to_string(model.spec()).expect("model serializes");
    s.as_bytes().chunks(8).fold(0, |h, c| {
        let mut w = [0u8; 8];
        w[..c.len()].copy_from_slice(c);
        counter_seed(h, u64::from_le_bytes(w))
    })
}

/// Dataset seed of one run; keyed by the model and grid values rather than
/// the row index, so editing a grid leaves other rows unchanged.
pub fn run_seed(base: u64, model: u64, alpha: f64, eps_t: f64, k: usize) -> u64 {
    let s = counter_seed(counter_seed(base, model), alpha.to_bits());
    counter_seed(counter_seed(s, eps_t.to_bits()), k as u64)
}

fn one_seed(cfg: &ExperimentConfig, model: &BlockFeatureModel, task: &Task, k: usize) -> advse::Result<SeedResult> {
    let seed = run_seed(cfg.base_seed, model_key(model), task.alpha, task.eps_t, k);
    let data = sample_dataset(model, cfg.d, task.alpha, cfg.tau, seed)?;
    let est = train(cfg, &data, task.eps_t)?;
    let params = ExperimentParams::new(task.alpha, cfg.lambda, cfg.tau, task.eps_t, cfg.eps_g);
    let ov = empirical_overlaps(&est, &data);
    let e = empirical_errors(&est, &data, &params, cfg.gamma, cfg.test_size, counter_seed(seed, 1), TestSampling::LocalField)?;
    let r = e.report;
    Ok(SeedResult {
        cells: [
            Some(ov.m),
            Some(ov.q),
            None,
            Some(ov.p),
            Some(ov.a),
            Some(ov.f),
            Some(ov.n),
            Some(r.egen),
            Some(r.ebnd),
            Some(r.eadv),
            r.etrain,
            r.ltrain,
            r.ecp,
        ],
        iterations: est.iterations as f64,
        residual: est.residual,
    })
}

fn mean_sem(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn simulation_row(cfg: &ExperimentConfig, model: &BlockFeatureModel, task: &Task) -> ResultRow {
    let mut row = blank(cfg, Provenance::Simulation, task);
    let runs = map_indexed(cfg.seeds, |k| one_seed(cfg, model, task, k));
    let mut ok = Vec::with_capacity(runs.len());
    for r in runs {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        }
    }
    let mut vals = [None; 13];
    let mut sems = [None; 13];
    for i in 0..13 {
        let xs: Option<Vec<f64>> = ok.iter().map(|s| s.cells[i]).collect();
        if let Some(xs) = xs {
            let (m, s) = mean_sem(&xs);
            vals[i] = Some(m);
            sems[i] = s;
        }
    }
    row.values = metrics_from_cells(&vals);
    row.sem = metrics_from_cells(&sems);
    row.iterations = Some(ok.iter().map(|s| s.iterations).sum::<f64>() / ok.len() as f64);
    row.residual = Some(ok.iter().map(|s| s.residual).fold(0.0, f64::max));
    row
}

fn metrics_from_cells(c: &[Option<f64>; 13]) -> Metrics {
    Metrics {
        m: c[0],
        q: c[1],
        v: c[2],
        p: c[3],
        a: c[4],
        f: c[5],
        n: c[6],
        egen: c[7],
        ebnd: c[8],
        eadv: c[9],
        etrain: c[10],
        ltrain: c[11],
        ecp: c[12],
    }
}

/// `|theory - mean| / SEM`. The SEM is floored at the counting resolution
/// of the mean, so that a theory value of zero matched by all-zero counts
/// scores zero rather than NaN.
pub fn z_score(theory: Option<f64>, mean: Option<f64>, sem: Option<f64>, resolution: f64) -> Option<f64> {
    let (t, m, s) = (theory?, mean?, sem?);
    Some((t - m).abs() / s.max(resolution))
}

fn attach_z(theory: &ResultRow, sim: &mut ResultRow, cfg: &ExperimentConfig, alpha: f64) {
    if theory.failed() || sim.failed() {
        return;
    }
    let seeds = cfg.seeds as f64;
    let test_res = 1.0 / (cfg.test_size as f64 * seeds);
    let n_train = (alpha * cfg.d as f64).round().max(1.0);
    let train_res = 1.0 / (n_train * seeds);
    let (t, v, s) = (&theory.values, &sim.values, &sim.sem);
    sim.z = ZScores {
        egen: z_score(t.egen, v.egen, s.egen, test_res),
        ebnd: z_score(t.ebnd, v.ebnd, s.ebnd, test_res),
        eadv: z_score(t.eadv, v.eadv, s.eadv, test_res),
        etrain: z_score(t.etrain, v.etrain, s.etrain, train_res),
    };
}

/// Runs every grid point of `cfg`. Per-row failures are reported in the
/// row's error column.
pub fn run(cfg: &ExperimentConfig) -> Vec<ResultRow> {
    let model = match cfg.model() {
        Ok(m) => m,
        Err(e) => {
            return tasks(cfg)
                .iter()
                .map(|t| ResultRow { error: Some(e.0.clone()), ..blank(cfg, Provenance::Theory, t) })
                .collect()
        }
    };
    let ts = tasks(cfg);
    let groups = map_indexed(ts.len(), |i| {
        let t = &ts[i];
        match cfg.mode {
            Mode::Se => vec![theory_row(cfg, &model, t)],
            Mode::Asymptotic => vec![asymptotic_row(cfg, &model, t)],
            Mode::Simulate | Mode::Surrogate | Mode::Fgm => vec![simulation_row(cfg, &model, t)],
            Mode::Compare => {
                let th = theory_row(cfg, &model, t);
                let mut sim = simulation_row(cfg, &model, t);
                attach_z(&th, &mut sim, cfg, t.alpha);
                vec![th, sim]
            }
        }
    });
    groups.into_iter().flatten().collect()
}
