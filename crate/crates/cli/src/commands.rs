use std::fs::File;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use transfer_knn::harness::{derive_seed, generate_data, sweep_detailed};
use transfer_knn::rates::{
    path_rates, phase_grid, theoretical_rate, PathPoint, PhaseAxes, PhaseGrid,
};
use transfer_knn::transfer::{estimate_index_with, transfer_value_with, TransferOptions};
use transfer_knn::{
    estimator::concentration_event, DistributionFamily, ExperimentConfig, IndexEstimate,
    LabeledSample, PointSet, Prediction, RateParams, RegimeReport, TrainedEstimator,
    TransferEvaluation,
};

use crate::config::{self, RatesConfig, RegularityConfig, SimulateConfig, TransferConfig};
use crate::error::CliError;
use crate::grid::{parse_assignments, parse_grid};
use crate::output::{opt, Artifact, Table};
use crate::Format;

pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Format,
}

impl Context {
    fn config_path(&self) -> Result<&Path, CliError> {
        self.config
            .as_deref()
            .ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))
    }
}

#[derive(Serialize)]
struct TransferReport {
    evaluations: Vec<TransferEvaluation>,
    index: IndexEstimate,
}

pub fn transfer(ctx: &Context, gamma_grid: Option<&str>) -> Result<Vec<Artifact>, CliError> {
    let cfg: TransferConfig = config::load(ctx.config_path()?)?;
    let grid_text = gamma_grid
        .map(str::to_string)
        .or(cfg.gamma_grid.clone())
        .ok_or_else(|| {
            CliError::Config("--gamma-grid (or config field `gamma_grid`) is required".into())
        })?;
    let grid = parse_grid("gamma-grid", &grid_text)?;
    let mut opts = TransferOptions {
        method: cfg.method,
        ..TransferOptions::default()
    };
    if let Some(draws) = cfg.mc_draws {
        opts.mc_draws = draws;
    }
    if let Some(seed) = ctx.seed {
        opts.mc_seed = seed;
    }
    let evaluations = grid
        .par_iter()
        .map(|&g| transfer_value_with(&cfg.source, &cfg.target, g, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let index = estimate_index_with(&cfg.source, &cfg.target, &grid, &opts)?;
    eprintln!(
        "gamma* in [{}, {}], estimate {}",
        index.lower_confirmed, index.upper_confirmed, index.gamma_star_hat
    );
    match ctx.format {
        Format::Json => Ok(vec![Artifact::json(
            "transfer",
            &TransferReport { evaluations, index },
        )?]),
        Format::Csv => {
            let mut t = Table::new(&["gamma", "value", "method", "error_estimate", "converged"]);
            for e in &evaluations {
                t.push(vec![
                    e.gamma.to_string(),
                    e.value.to_string(),
                    e.method.to_string(),
                    e.error_estimate.to_string(),
                    e.converged.to_string(),
                ]);
            }
            Ok(vec![Artifact::csv("transfer", &t)])
        }
    }
}

#[derive(Serialize)]
struct RatesReport {
    params: RateParams,
    report: RegimeReport,
    path: Option<Vec<PathPoint>>,
}

pub fn rates(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let cfg: RatesConfig = config::load(ctx.config_path()?)?;
    let params = RateParams {
        transfer_p: cfg.transfer_p,
        transfer_q: cfg.transfer_q,
        ..RateParams::new(cfg.gamma, cfg.s, cfg.beta, cfg.d, cfg.n, cfg.m)
    };
    let report = theoretical_rate(&params, cfg.mode)?;
    let path = match &cfg.path {
        Some(p) => {
            let lambdas = parse_grid("lambdas", &p.lambdas)?;
            Some(path_rates(
                p.sample_path,
                &lambdas,
                cfg.gamma,
                cfg.s,
                cfg.beta,
                cfg.d,
            )?)
        }
        None => None,
    };
    if ctx.format == Format::Json {
        return Ok(vec![Artifact::json(
            "rates",
            &RatesReport {
                params,
                report,
                path,
            },
        )?]);
    }
    let mut t = Table::new(&[
        "n",
        "m",
        "r_beta",
        "configuration",
        "regime",
        "window_lo",
        "window_hi",
        "rate",
        "source_exp",
        "target_exp",
        "omitted_term",
    ]);
    t.push(vec![
        params.n.to_string(),
        params.m.to_string(),
        report.r_beta.to_string(),
        report.configuration.to_string(),
        report.regime.to_string(),
        opt(report.window.map(|w| w.lo)),
        opt(report.window.map(|w| w.hi)),
        report.rate.to_string(),
        report.source_exp.to_string(),
        report.target_exp.to_string(),
        report
            .omitted_term
            .map(|d| format!("{d:?}").to_lowercase())
            .unwrap_or_default(),
    ]);
    let mut out = vec![Artifact::csv("rates", &t)];
    if let Some(points) = path {
        let mut p = Table::new(&["lambda", "n", "m", "rate", "wedge_rate", "regime"]);
        for pt in points {
            p.push(vec![
                pt.lambda.to_string(),
                pt.n.to_string(),
                pt.m.to_string(),
                pt.rate.to_string(),
                pt.wedge_rate.to_string(),
                pt.regime.to_string(),
            ]);
        }
        out.push(Artifact::csv("path", &p));
    }
    Ok(out)
}

pub struct PhaseArgs<'a> {
    pub fix: &'a str,
    pub log_n: Option<&'a str>,
    pub log_m: Option<&'a str>,
    pub gamma_grid: Option<&'a str>,
    pub s_grid: Option<&'a str>,
    pub beta: f64,
    pub d: usize,
}

pub fn phase(ctx: &Context, args: &PhaseArgs) -> Result<Vec<Artifact>, CliError> {
    if ctx.config.is_some() {
        return Err(CliError::Config(
            "phase is configured by flags only; drop --config".into(),
        ));
    }
    let fixed = parse_assignments("fix", args.fix)?;
    let get = |key: &str| fixed.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
    let keys: Vec<&str> = fixed.iter().map(|(k, _)| k.as_str()).collect();
    let need = |flag: &str, v: Option<&str>| {
        v.map(|t| parse_grid(flag, t)).unwrap_or_else(|| {
            Err(CliError::Config(format!(
                "--{flag} is required with --fix {}",
                args.fix
            )))
        })
    };
    let (axes, axis1, axis2) = match keys[..] {
        ["gamma", "s"] | ["s", "gamma"] => (
            PhaseAxes::Exponents {
                gamma: get("gamma").unwrap_or_default(),
                s: get("s").unwrap_or_default(),
            },
            need("log-n", args.log_n)?,
            need("log-m", args.log_m)?,
        ),
        ["n", "m"] | ["m", "n"] => (
            PhaseAxes::SampleSizes {
                n: get("n").unwrap_or_default(),
                m: get("m").unwrap_or_default(),
            },
            need("gamma-grid", args.gamma_grid)?,
            need("s-grid", args.s_grid)?,
        ),
        _ => {
            return Err(CliError::Config(format!(
                "--fix: expected `gamma=..,s=..` or `n=..,m=..`, got `{}`",
                args.fix
            )))
        }
    };
    let grid = phase_grid(axes, args.beta, args.d, &axis1, &axis2)?;
    phase_artifacts(ctx.format, &grid)
}

fn phase_artifacts(format: Format, grid: &PhaseGrid) -> Result<Vec<Artifact>, CliError> {
    if format == Format::Json {
        return Ok(vec![Artifact::json("phase", grid)?]);
    }
    let mut t = Table::new(&[
        "axis1",
        "axis2",
        "configuration",
        "regime",
        "source_exp",
        "target_exp",
        "rate",
    ]);
    for c in &grid.cells {
        t.push(vec![
            c.axis1.to_string(),
            c.axis2.to_string(),
            c.report.configuration.to_string(),
            c.report.regime.to_string(),
            c.report.source_exp.to_string(),
            c.report.target_exp.to_string(),
            c.report.rate.to_string(),
        ]);
    }
    let mut b = Table::new(&["name", "coef_axis1", "coef_axis2", "rhs"]);
    for l in &grid.boundaries {
        b.push(vec![
            l.name.clone(),
            l.coef_axis1.to_string(),
            l.coef_axis2.to_string(),
            l.rhs.to_string(),
        ]);
    }
    Ok(vec![
        Artifact::csv("phase", &t),
        Artifact::csv("phase_boundaries", &b),
    ])
}

/// Reads `x_1,...,x_d[,y]`. Returns the points and the labels when a `y`
/// column is present.
fn read_points(path: &Path) -> Result<(PointSet, Option<Vec<f64>>), CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let bad = |why: String| CliError::Config(format!("{}: {why}", path.display()));
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let has_y = header.iter().next_back() == Some("y");
    let d = header.len() - usize::from(has_y);
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("x_{}", j + 1) {
            return Err(bad(format!(
                "column {} is `{name}`, expected `x_{}`",
                j + 1,
                j + 1
            )));
        }
    }
    if d == 0 {
        return Err(bad("no covariate columns".into()));
    }
    let mut points = PointSet::new(d);
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let values = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        points.push(&values[..d])?;
        if has_y {
            labels.push(values[d]);
        }
    }
    Ok((points, has_y.then_some(labels)))
}

fn read_labeled(path: &Path) -> Result<LabeledSample, CliError> {
    let (points, labels) = read_points(path)?;
    let labels = labels
        .ok_or_else(|| CliError::Config(format!("{}: missing `y` column", path.display())))?;
    Ok(LabeledSample::new(points, labels)?)
}

#[derive(Serialize)]
struct PredictionRow {
    x: Vec<f64>,
    prediction: Prediction,
}

pub fn simulate(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let path = ctx.config_path()?;
    let cfg: SimulateConfig = config::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let seed = ctx.seed.unwrap_or(cfg.seed);
    let (source, target, queries) = match (&cfg.generate, &cfg.source_data, &cfg.target_data) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(CliError::Config(
                "field `generate` cannot be combined with `source_data` or `target_data`".into(),
            ))
        }
        (Some(g), None, None) => {
            let dim = g.source.dim();
            if g.target.dim() != dim {
                return Err(CliError::Config(
                    "field `generate.target`: dimension differs from source".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0));
            let source = generate_data(&g.source, &g.f_star, &g.noise, g.n, &mut rng);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 1));
            let target = generate_data(&g.target, &g.f_star, &g.noise, g.m, &mut rng);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 2));
            let queries = g.target.sample(&mut rng, g.n_test);
            (source, target, queries)
        }
        (None, src, tgt) => {
            let src = src
                .as_ref()
                .map(|p| read_labeled(&base.join(p)))
                .transpose()?;
            let tgt = tgt
                .as_ref()
                .map(|p| read_labeled(&base.join(p)))
                .transpose()?;
            let dim = match (&src, &tgt) {
                (Some(s), _) => s.dim(),
                (None, Some(t)) => t.dim(),
                (None, None) => {
                    return Err(CliError::Config(
                        "one of `generate`, `source_data` or `target_data` is required".into(),
                    ))
                }
            };
            let qpath = cfg.query_data.as_ref().ok_or_else(|| {
                CliError::Config("field `query_data` is required with data files".into())
            })?;
            let (queries, _) = read_points(&base.join(qpath))?;
            (
                src.unwrap_or_else(|| LabeledSample::empty(dim)),
                tgt.unwrap_or_else(|| LabeledSample::empty(dim)),
                queries,
            )
        }
    };
    let fitted = TrainedEstimator::fit(source, target, cfg.estimator)?;
    let predictions = fitted.predict_batch(&queries)?;
    eprintln!(
        "n = {}, m = {}, ell = {}, {} predictions",
        fitted.n(),
        fitted.m(),
        fitted.ell(),
        predictions.len()
    );
    if ctx.format == Format::Json {
        let rows: Vec<PredictionRow> = queries
            .iter()
            .zip(&predictions)
            .map(|(x, p)| PredictionRow {
                x: x.to_vec(),
                prediction: *p,
            })
            .collect();
        return Ok(vec![Artifact::json("predictions", &rows)?]);
    }
    let mut header: Vec<String> = (1..=queries.dim()).map(|j| format!("x_{j}")).collect();
    header.extend(["y_hat", "k_p", "k_q", "p_hat", "q_hat"].map(String::from));
    let mut t = Table::new(&header);
    for (x, p) in queries.iter().zip(&predictions) {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        row.extend([
            p.value.to_string(),
            p.k_p_used.to_string(),
            p.k_q_used.to_string(),
            opt(p.p_hat),
            opt(p.q_hat),
        ]);
        t.push(row);
    }
    Ok(vec![Artifact::csv("predictions", &t)])
}

pub fn sweep(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let mut cfg: ExperimentConfig = config::load(ctx.config_path()?)?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    let result = sweep_detailed(&cfg)?;
    if ctx.format == Format::Json {
        return Ok(vec![Artifact::json("sweep", &result)?]);
    }
    let mut records = Table::new(&["n", "m", "rep", "risk", "seed"]);
    for r in &result.records {
        records.push(vec![
            r.n.to_string(),
            r.m.to_string(),
            r.rep.to_string(),
            r.risk.to_string(),
            r.seed.to_string(),
        ]);
    }
    let mut agg = Table::new(&["n", "m", "mean_risk", "stderr", "q50", "q90"]);
    for e in &result.estimates {
        agg.push(vec![
            e.n.to_string(),
            e.m.to_string(),
            e.mean.to_string(),
            e.stderr.to_string(),
            e.q50.to_string(),
            e.q90.to_string(),
        ]);
    }
    Ok(vec![
        Artifact::csv("sweep_records", &records),
        Artifact::csv("sweep_aggregate", &agg),
    ])
}

/// `count` points: midpoints of a bounded support, or `[lo, lo + 10]` for an
/// unbounded one; along the diagonal in several dimensions.
fn default_grid(dist: &DistributionFamily, count: usize) -> Vec<Vec<f64>> {
    let d = dist.dim();
    let (lo, hi) = dist.support_1d().unwrap_or((0.0, f64::INFINITY));
    (0..count)
        .map(|i| {
            let t = if hi.is_finite() {
                lo + (hi - lo) * (i as f64 + 0.5) / count as f64
            } else {
                lo + 10.0 * i as f64 / (count.max(2) - 1) as f64
            };
            vec![t; d]
        })
        .collect()
}

#[derive(Serialize)]
struct ConcentrationTrial {
    trial: usize,
    seed: u64,
    holds: bool,
}

#[derive(Serialize)]
struct RegularityReport {
    local_mass: transfer_knn::distributions::LocalMassReport,
    concentration: Option<Vec<ConcentrationTrial>>,
}

pub fn check_regularity(ctx: &Context) -> Result<Vec<Artifact>, CliError> {
    let cfg: RegularityConfig = config::load(ctx.config_path()?)?;
    let dist = cfg.distribution;
    let theta = cfg
        .theta
        .or_else(|| dist.local_mass_theta())
        .ok_or_else(|| CliError::Config("field `theta` is required for this family".into()))?;
    let x_grid = cfg
        .x_grid
        .clone()
        .unwrap_or_else(|| default_grid(&dist, 50));
    if let Some(bad) = x_grid.iter().position(|x| x.len() != dist.dim()) {
        return Err(CliError::Config(format!(
            "field `x_grid[{bad}]`: expected {} coordinates",
            dist.dim()
        )));
    }
    let r_grid = cfg.r_grid.clone().unwrap_or_else(|| {
        (0..20)
            .map(|j| 10f64.powf(-3.0 + 3.0 * j as f64 / 19.0))
            .collect()
    });
    let local_mass = dist.local_mass_check(theta, &x_grid, &r_grid);
    eprintln!(
        "local mass (theta = {theta}): {} of {} cells fail, ratio in [{}, {}]",
        local_mass.failures,
        local_mass.cells.len(),
        local_mass.min_ratio,
        local_mass.max_ratio
    );
    let seed = ctx.seed.unwrap_or(cfg.seed);
    let concentration = match &cfg.concentration {
        None => None,
        Some(c) => {
            if c.n == 0 {
                return Err(CliError::Config(
                    "field `concentration.n`: must be positive".into(),
                ));
            }
            let k =
                c.k.unwrap_or(5 * (c.n as f64).ln().ceil().max(1.0) as usize);
            let h_plus = 4.0 * k as f64 / c.n as f64;
            let grid = default_grid(&dist, c.grid_points);
            let trials = (0..c.trials)
                .into_par_iter()
                .map(|trial| {
                    let s = derive_seed(seed, 0, trial);
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    concentration_event(&dist, c.n, k, h_plus, &grid, &mut rng).map(|holds| {
                        ConcentrationTrial {
                            trial,
                            seed: s,
                            holds,
                        }
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            eprintln!(
                "concentration (k = {k}): held in {} of {} trials",
                trials.iter().filter(|t| t.holds).count(),
                trials.len()
            );
            Some(trials)
        }
    };
    if ctx.format == Format::Json {
        return Ok(vec![Artifact::json(
            "regularity",
            &RegularityReport {
                local_mass,
                concentration,
            },
        )?]);
    }
    let mut header: Vec<String> = (1..=dist.dim()).map(|j| format!("x_{j}")).collect();
    header.extend(["r", "ratio", "pass"].map(String::from));
    let mut t = Table::new(&header);
    for c in &local_mass.cells {
        let mut row: Vec<String> = c.x.iter().map(f64::to_string).collect();
        row.extend([c.r.to_string(), c.ratio.to_string(), c.pass.to_string()]);
        t.push(row);
    }
    let mut out = vec![Artifact::csv("regularity", &t)];
    if let Some(trials) = concentration {
        let mut c = Table::new(&["trial", "seed", "holds"]);
        for tr in trials {
            c.push(vec![
                tr.trial.to_string(),
                tr.seed.to_string(),
                tr.holds.to_string(),
            ]);
        }
        out.push(Artifact::csv("concentration", &c));
    }
    Ok(out)
}
