//! Command execution: each run produces CSV outputs plus a
//! `summary.json` echoing the exact resolved configuration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use serde_json::{json, Value};

use qvpca::factor::pc_criterion;
use qvpca::manifold::{dynamic_distance, split_manifold, DynamicConfig, PHatRule};
use qvpca::models;
use qvpca::sim::{uniform_grid, NoiseSpec};
use qvpca::{default_rank_eps, explained_qv_ratios, pca_split, qdim_estimate, reduced_operator};

use crate::config::{
    parse_lags, Command, DistanceArgs, FactorsArgs, ManifoldArgs, ModelId, NoiseId, PRouteId,
    PcaArgs, QdimArgs, SimulateArgs,
};
use crate::io::{ingest_panel, ingest_path, write_grid_csv, write_path_csv, write_table_csv};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub results: Value,
    pub outputs: Vec<String>,
    pub timings_ms: Value,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn finish(
    out_dir: &Path,
    command: &str,
    config: Value,
    results: Value,
    mut outputs: Vec<PathBuf>,
    started: Instant,
) -> Result<RunSummary, CliError> {
    let summary_path = out_dir.join("summary.json");
    outputs.push(summary_path.clone());
    let summary = RunSummary {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        results,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        timings_ms: json!({ "total": started.elapsed().as_millis() as u64 }),
    };
    let body = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(format!("summary serialization: {e}")))?;
    std::fs::write(&summary_path, body)
        .map_err(|e| CliError::Io(format!("{}: {e}", summary_path.display())))?;
    Ok(summary)
}

pub fn execute(command: &Command) -> Result<RunSummary, CliError> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Pca(a) => pca(a),
        Command::Factors(a) => factors(a),
        Command::Manifold(a) => manifold(a),
        Command::Qdim(a) => qdim(a),
        Command::Distance(a) => distance(a),
    }
}

fn noise_spec(a: &SimulateArgs) -> NoiseSpec {
    match a.noise {
        NoiseId::None => NoiseSpec::None,
        NoiseId::Sine => NoiseSpec::TimeWhiteSine {
            amplitude: a.noise_amp,
        },
    }
}

fn simulate(a: &SimulateArgs) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    if a.seed.is_empty() {
        return Err(CliError::Parse("at least one seed is required".into()));
    }
    if a.n < 1 || a.nx < 2 || !(a.t > 0.0) || !(a.b > a.a) {
        return Err(CliError::Parse("grid sizes must be positive".into()));
    }
    let t_grid = uniform_grid(0.0, a.t, a.n);
    let x_grid = uniform_grid(a.a, a.b, a.nx - 1);
    let noise = noise_spec(a);
    let mut outputs = Vec::new();
    let mut per_seed = Vec::new();
    for &seed in &a.seed {
        let dir = a.out.join(format!("seed-{seed}"));
        ensure_dir(&dir)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut files = Vec::new();
        match a.model {
            ModelId::FourFactorPath => {
                let path =
                    qvpca::euler_maruyama(&models::four_factor_path_model(), &t_grid, &mut rng)?;
                let f = dir.join("path.csv");
                write_path_csv(&f, &path)?;
                files.push(f);
            }
            ModelId::FourFactorCurve => {
                let (factors, panel) =
                    models::simulate_four_factor_panel(&t_grid, &x_grid, &noise, &mut rng)?;
                let fp = dir.join("panel.csv");
                write_grid_csv(&fp, &panel.t_grid, &panel.x_grid, &panel.values)?;
                let ff = dir.join("factors.csv");
                write_path_csv(&ff, &factors)?;
                let fphi = dir.join("phi.csv");
                write_grid_csv(&fphi, &panel.t_grid, &panel.x_grid, panel.phi.as_ref().unwrap())?;
                files.extend([fp, ff, fphi]);
            }
            ModelId::Hjm => {
                let (factors, panel) =
                    models::simulate_hjm_panel(&t_grid, &x_grid, &noise, &mut rng)?;
                let fp = dir.join("panel.csv");
                write_grid_csv(&fp, &panel.t_grid, &panel.x_grid, &panel.values)?;
                let ff = dir.join("factors.csv");
                write_path_csv(&ff, &factors)?;
                let fphi = dir.join("phi.csv");
                write_grid_csv(&fphi, &panel.t_grid, &panel.x_grid, panel.phi.as_ref().unwrap())?;
                files.extend([fp, ff, fphi]);
            }
            ModelId::SinePair => {
                let ((fx, px), (fu, pu)) =
                    models::simulate_sine_pair_panels(&t_grid, &x_grid, &noise, &mut rng)?;
                let f1 = dir.join("panel_x.csv");
                write_grid_csv(&f1, &px.t_grid, &px.x_grid, &px.values)?;
                let f2 = dir.join("panel_u.csv");
                write_grid_csv(&f2, &pu.t_grid, &pu.x_grid, &pu.values)?;
                let f3 = dir.join("factors_x.csv");
                write_path_csv(&f3, &fx)?;
                let f4 = dir.join("factors_u.csv");
                write_path_csv(&f4, &fu)?;
                files.extend([f1, f2, f3, f4]);
            }
        }
        per_seed.push(json!({
            "seed": seed,
            "dir": dir.display().to_string(),
        }));
        outputs.extend(files);
    }
    ensure_dir(&a.out)?;
    finish(
        &a.out,
        "simulate",
        serde_json::to_value(a).unwrap(),
        json!({ "runs": per_seed }),
        outputs,
        started,
    )
}

fn pca(a: &PcaArgs) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let path = ingest_path(&a.input)?;
    let eps = a.eps_rel.unwrap_or_else(|| default_rank_eps(path.n_increments()));
    let split = pca_split(&path, eps)?;
    let eta = explained_qv_ratios(&split.eigenvalues)?;
    ensure_dir(&a.out)?;
    let mut outputs = Vec::new();

    let f_eigs = a.out.join("eigenvalues.csv");
    let rows: Vec<Vec<f64>> = split
        .eigenvalues
        .iter()
        .zip(&eta)
        .enumerate()
        .map(|(i, (l, e))| vec![(i + 1) as f64, *l, *e])
        .collect();
    write_table_csv(&f_eigs, "component,eigenvalue,eta", &rows)?;
    outputs.push(f_eigs);

    let f_rot = a.out.join("rotation.csv");
    let rot_rows: Vec<Vec<f64>> = (0..split.rotation.nrows())
        .map(|i| split.rotation.row(i).iter().copied().collect())
        .collect();
    write_table_csv(
        &f_rot,
        &header_for("v", split.rotation.ncols()),
        &rot_rows,
    )?;
    outputs.push(f_rot);

    let f_j = a.out.join("jpaths.csv");
    write_path_csv(&f_j, &split.j_paths)?;
    outputs.push(f_j);

    finish(
        &a.out,
        "pca",
        serde_json::to_value(a).unwrap(),
        json!({
            "p_hat": split.p_hat,
            "eps_rel": eps,
            "eigenvalues": split.eigenvalues.as_slice(),
            "eta": eta,
        }),
        outputs,
        started,
    )
}

fn header_for(prefix: &str, n: usize) -> String {
    (1..=n)
        .map(|i| format!("{prefix}{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn factors(a: &FactorsArgs) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let panel = ingest_panel(&a.input, a.phi.as_deref())?;
    let sel = pc_criterion(&panel, a.kmax, a.penalty.to_penalty())?;
    ensure_dir(&a.out)?;
    let f_table = a.out.join("pc_table.csv");
    let rows: Vec<Vec<f64>> = sel
        .rows
        .iter()
        .map(|r| vec![r.k as f64, r.v, r.pc])
        .collect();
    write_table_csv(&f_table, "k,v,pc", &rows)?;
    finish(
        &a.out,
        "factors",
        serde_json::to_value(a).unwrap(),
        json!({
            "d_hat": sel.d_hat,
            "q": sel.q,
            "sigma2": sel.sigma2,
            "baseline": sel.baseline,
            "mean_centered": panel.phi.is_none(),
        }),
        vec![f_table],
        started,
    )
}

fn p_rule(route: PRouteId, eps_rel: Option<f64>) -> PHatRule {
    match route {
        PRouteId::Threshold => PHatRule::Threshold { eps_rel },
        // --eps-rel is a trace-relative quantity; the fourier route uses
        // its own absolute default.
        PRouteId::Fourier => PHatRule::Fourier { m: None, eps: None },
    }
}

fn manifold(a: &ManifoldArgs) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let panel = ingest_panel(&a.input, a.phi.as_deref())?;
    let d_hat = match a.d_hat {
        Some(d) => d,
        None => pc_criterion(&panel, a.kmax, a.penalty.to_penalty())?.d_hat,
    };
    let est = split_manifold(&panel, d_hat, &p_rule(a.p_route, a.eps_rel))?;
    ensure_dir(&a.out)?;
    let mut outputs = Vec::new();

    let f_theta = a.out.join("theta.csv");
    let rows: Vec<Vec<f64>> = est
        .theta
        .iter()
        .zip(&est.eta)
        .enumerate()
        .map(|(i, (th, e))| vec![(i + 1) as f64, *th, *e])
        .collect();
    write_table_csv(&f_theta, "component,theta,eta", &rows)?;
    outputs.push(f_theta);

    // Companion table for the un-rotated factors: diagonal QV entries and
    // their cumulative share, for comparison against the QV-ranked one.
    let f_fqv = a.out.join("factor_qv.csv");
    let trace = est.y_qv.trace();
    let mut acc = 0.0;
    let fqv_rows: Vec<Vec<f64>> = (0..est.d_hat)
        .map(|j| {
            acc += est.y_qv[(j, j)];
            vec![(j + 1) as f64, est.y_qv[(j, j)], acc / trace]
        })
        .collect();
    write_table_csv(&f_fqv, "factor,qv,cumulative_share", &fqv_rows)?;
    outputs.push(f_fqv);

    let f_load = a.out.join("loadings.csv");
    let mut load_rows = Vec::new();
    for (j, &x) in panel.x_grid.iter().enumerate() {
        let mut row = vec![x];
        for phi in &est.phi_hat {
            row.push(phi[j]);
        }
        for r in &est.rotated_loadings {
            row.push(r[j]);
        }
        load_rows.push(row);
    }
    let header = format!(
        "x,{},{}",
        header_for("phi_hat", est.d_hat),
        header_for("rotated", est.d_hat)
    );
    write_table_csv(&f_load, &header, &load_rows)?;
    outputs.push(f_load);

    let f_z = a.out.join("zpaths.csv");
    write_path_csv(&f_z, &est.z_paths)?;
    outputs.push(f_z);

    // The estimated volatility and drift bases as separate tables.
    for (name, basis) in [("q_basis.csv", &est.q_space), ("n_basis.csv", &est.n_space)] {
        if basis.dim() == 0 {
            continue;
        }
        let f = a.out.join(name);
        let mut rows = Vec::new();
        for (j, &x) in panel.x_grid.iter().enumerate() {
            let mut row = vec![x];
            for v in &basis.vectors {
                row.push(v[j]);
            }
            rows.push(row);
        }
        write_table_csv(&f, &format!("x,{}", header_for("b", basis.dim())), &rows)?;
        outputs.push(f);
    }

    finish(
        &a.out,
        "manifold",
        serde_json::to_value(a).unwrap(),
        json!({
            "d_hat": est.d_hat,
            "p_hat": est.p_hat,
            "dim_q": est.q_space.dim(),
            "dim_n": est.n_space.dim(),
            "theta": est.theta.as_slice(),
            "eta": est.eta,
            "hs_energy": est.hs_energy(),
            "mean_centered": est.mean_centered,
        }),
        outputs,
        started,
    )
}

fn qdim(a: &QdimArgs) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let panel = ingest_panel(&a.input, a.phi.as_deref())?;
    let n = panel.n_increments();
    let m = a.m.unwrap_or((n.max(2) - 1) / 2);
    let est = reduced_operator(&panel, m)?;
    let eps = a.eps.unwrap_or_else(|| default_rank_eps(n));
    let p_hat = if a.relative {
        qvpca::fourier::qdim_estimate_relative(&est, eps)?
    } else {
        qdim_estimate(&est, eps)?
    };
    ensure_dir(&a.out)?;
    let mut outputs = Vec::new();

    let f_eigs = a.out.join("eigenvalues.csv");
    let rows: Vec<Vec<f64>> = est
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1) as f64, *v])
        .collect();
    write_table_csv(&f_eigs, "component,eigenvalue", &rows)?;
    outputs.push(f_eigs);

    let mut est_for_funcs = est.clone();
    est_for_funcs.p_hat_eps = p_hat;
    let funcs = qvpca::eigenfunctions(&est_for_funcs, &panel)?;
    if !funcs.is_empty() {
        let f_funcs = a.out.join("eigenfunctions.csv");
        let mut rows = Vec::new();
        for (j, &x) in panel.x_grid.iter().enumerate() {
            let mut row = vec![x];
            for f in &funcs {
                row.push(f[j]);
            }
            rows.push(row);
        }
        write_table_csv(&f_funcs, &format!("x,{}", header_for("e", funcs.len())), &rows)?;
        outputs.push(f_funcs);
    }

    finish(
        &a.out,
        "qdim",
        serde_json::to_value(a).unwrap(),
        json!({
            "p_hat_eps": p_hat,
            "m": m,
            "eps": eps,
            "relative": a.relative,
            "eigenvalues_head": est.eigenvalues.iter().take(10).copied().collect::<Vec<_>>(),
        }),
        outputs,
        started,
    )
}

fn distance(a: &DistanceArgs) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let panel = ingest_panel(&a.input, a.phi.as_deref())?;
    let lags = parse_lags(&a.lags)?;
    let cfg = DynamicConfig {
        kmax: a.kmax,
        penalty: a.penalty.to_penalty(),
        d_hat: a.d_hat,
        p_rule: PHatRule::Threshold { eps_rel: None },
    };
    let series = dynamic_distance(&panel, &lags, &cfg)?;
    ensure_dir(&a.out)?;
    let f = a.out.join("distance.csv");
    let rows: Vec<Vec<f64>> = series.iter().map(|(k, d)| vec![*k as f64, *d]).collect();
    write_table_csv(&f, "lag,distance", &rows)?;
    let max_d = series.iter().map(|(_, d)| *d).fold(0.0f64, f64::max);
    finish(
        &a.out,
        "distance",
        serde_json::to_value(a).unwrap(),
        json!({
            "lags": lags,
            "max_distance": max_d,
        }),
        vec![f],
        started,
    )
}

/// Shared helper for tests: a small deterministic panel file.
pub fn write_demo_panel(path: &Path) -> Result<(), CliError> {
    let t = uniform_grid(0.0, 1.0, 2);
    let x = DVector::from_vec(vec![0.0, 1.0]);
    let values = nalgebra::DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.5, 1.5, 1.0, 2.0]);
    write_grid_csv(path, &t, &x, &values)
}
