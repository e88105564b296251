use serde::Serialize;
use serde_json::{json, Value};

use plane_gibbs::asymptotics::{
    besq_report, besq_terminal_values, compare_discrete_vs_sde, comparison_gap, gamma_limit_samples, gamma_report,
    laplace_exact, laplace_expectation, laplace_limit, ComparisonSetup,
};
use plane_gibbs::infinite::{
    conditional_moment_exhaustive, conditional_moment_formula, progeny_drift_check, sample_trajectory, OffspringSampler,
};
use plane_gibbs::seed::sub_seed;
use plane_gibbs::stats::Histogram;
use plane_gibbs::thermo::{convergence_table, count_inversions};
use plane_gibbs::{critical_params, EnergyModel, Error};

use crate::config::{ConvergeBlock, DiffuseBlock, GammaBlock, LaplaceBlock, MomentsBlock, SampleBlock};
use crate::CliError;

/// Rendered output of a command.
pub struct Report {
    pub csv: String,
    pub json: Value,
    /// Preferred rendering when no format is requested.
    pub text: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub test: String,
    pub param: String,
    pub statistic: f64,
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
}

impl CheckRow {
    fn checked(test: impl Into<String>, param: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        CheckRow {
            test: test.into(),
            param: param.into(),
            statistic,
            threshold: Some(threshold),
            pass: Some(statistic.abs() < threshold),
        }
    }

    fn info(test: impl Into<String>, param: impl Into<String>, statistic: f64) -> Self {
        CheckRow {
            test: test.into(),
            param: param.into(),
            statistic,
            threshold: None,
            pass: None,
        }
    }
}

/// Shortest round-trip form, in exponent notation for tiny magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn check_report(command: &str, model: &EnergyModel, seed: Option<u64>, rows: Vec<CheckRow>) -> Report {
    let passed = rows.iter().all(|r| r.pass != Some(false));
    let mut csv = String::from("test,param,statistic,threshold,pass\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.test,
            r.param,
            num(r.statistic),
            r.threshold.map(num).unwrap_or_default(),
            r.pass.map(|p| if p { "pass" } else { "fail" }).unwrap_or_default()
        ));
    }
    let mut summary = json!({ "command": command, "model": model });
    if let Some(seed) = seed {
        summary["seed"] = json!(seed);
    }
    summary["passed"] = json!(passed);
    summary["checks"] = json!(rows);
    Report {
        csv,
        json: summary,
        text: None,
        passed,
    }
}

pub fn solve(model: &EnergyModel) -> Result<Report, CliError> {
    let params = critical_params(model)?;
    let record = params.record();
    let mut csv = String::from("field,value\n");
    let mut fields = serde_json::Map::new();
    for (name, value) in &record {
        csv.push_str(&format!("{name},{}\n", num(*value)));
        fields.insert(name.clone(), json!(value));
    }
    Ok(Report {
        csv,
        json: json!({ "command": "solve", "model": model, "params": fields }),
        text: None,
        passed: true,
    })
}

pub fn converge(model: &EnergyModel, block: &ConvergeBlock) -> Result<Report, CliError> {
    let rows = convergence_table(&block.orders, block.radius, model)?;
    let inversions = count_inversions(&rows);
    let mut csv = String::from("N,n,tv_distance\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.order, r.n, num(r.tv_distance)));
    }
    let passed = inversions <= 1;
    Ok(Report {
        csv,
        json: json!({
            "command": "converge",
            "model": model,
            "rows": rows,
            "inversions": inversions,
            "passed": passed,
        }),
        text: None,
        passed,
    })
}

pub fn sample(model: &EnergyModel, block: &SampleBlock, seed: u64) -> Result<Report, CliError> {
    let params = critical_params(model)?;
    let sampler = OffspringSampler::new(&params);
    let traj = sample_trajectory(block.steps, &sampler, seed, block.stream);
    let levels: Vec<&[usize]> = traj.levels.iter().map(|g| g.parents()).collect();
    Ok(Report {
        csv: traj.sizes_csv(),
        json: json!({
            "command": "sample",
            "model": model,
            "seed": seed,
            "stream": block.stream,
            "steps": block.steps,
            "sizes": traj.sizes(),
            "levels": levels,
        }),
        text: Some(traj.to_text()),
        passed: true,
    })
}

pub fn gamma(model: &EnergyModel, block: &GammaBlock, seed: u64) -> Result<Report, CliError> {
    if block.n == 0 || block.samples < 1000 {
        return Err(Error::Domain("gamma needs n >= 1 and samples >= 1000".into()).into());
    }
    let params = critical_params(model)?;
    let scaled = gamma_limit_samples(block.n, block.samples, &params, seed);
    if let Some(path) = &block.histogram {
        let hist = Histogram::new(&scaled, 0.0, 10.0, 50);
        std::fs::write(path, hist.to_csv()).map_err(|e| CliError::Io(format!("cannot write {path}: {e}")))?;
    }
    let r = gamma_report(block.n, &scaled, &params);
    let param = format!("n={}", block.n);
    let rows = vec![
        CheckRow::checked("gamma_ks", &param, r.ks_statistic, block.ks_threshold),
        CheckRow::info("gamma_ks_p_value", &param, r.p_value),
        CheckRow::checked("gamma_mean_z", &param, (r.mean - r.expected_mean) / r.mean_std_error, 3.0),
        CheckRow::info("gamma_mean", &param, r.mean),
    ];
    Ok(check_report("gamma", model, Some(seed), rows))
}

pub fn laplace(model: &EnergyModel, block: &LaplaceBlock) -> Result<Report, CliError> {
    let params = critical_params(model)?;
    let limit = laplace_limit(block.x, &params);
    let largest = block.ns.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    for &n in &block.ns {
        let value = laplace_exact(n, block.x, &params)?;
        let param = format!("n={n}");
        rows.push(CheckRow::info("laplace_value", &param, value));
        let gap = (value - limit).abs();
        rows.push(if n == largest {
            CheckRow::checked("laplace_limit_gap", &param, gap, block.tolerance)
        } else {
            CheckRow::info("laplace_limit_gap", &param, gap)
        });
        rows.push(CheckRow::info(
            "comparison_gap_n2",
            &param,
            comparison_gap(n, block.x, &params) * (n as f64).powi(2),
        ));
    }
    for n in 1..=block.oracle_max_n {
        let err = (laplace_exact(n, block.x, &params)? - laplace_expectation(n, block.x, &params)?).abs();
        rows.push(CheckRow::checked("laplace_oracle", format!("n={n}"), err, 1e-9));
    }
    let mut report = check_report("laplace", model, None, rows);
    report.json["limit"] = json!(limit);
    Ok(report)
}

pub fn diffuse(model: &EnergyModel, block: &DiffuseBlock, seed: u64) -> Result<Report, CliError> {
    let params = critical_params(model)?;
    let z = besq_terminal_values(block.t_end, block.dt, block.paths, &params, sub_seed(seed, "besq"))?;
    let r = besq_report(block.t_end, block.dt, &z, &params);
    let param = format!("dt={}", block.dt);
    let mut rows = vec![
        CheckRow::checked("besq_mean_rel_err", &param, r.mean / r.expected_mean - 1.0, 0.01),
        CheckRow::checked("besq_variance_rel_err", &param, r.variance / r.expected_variance - 1.0, 0.03),
        CheckRow::checked("besq_ks", &param, r.ks_statistic, 0.02),
    ];
    let setup = ComparisonSetup {
        t_start: block.t_start,
        dt: block.dt,
        paths: block.compare_paths,
    };
    for c in compare_discrete_vs_sde(block.n, block.groups, setup, &params, sub_seed(seed, "compare"))? {
        let coord = c.coordinate.map_or("total".to_string(), |i| format!("V{}", i + 1));
        rows.push(CheckRow::info(
            format!("compare_ks_{coord}_t{}", c.time),
            format!("n={}", c.n),
            c.ks_distance,
        ));
    }
    let drift = progeny_drift_check(block.n, block.compare_paths, &params, sub_seed(seed, "drift"))?;
    let param = format!("n={}", block.n);
    rows.push(CheckRow::checked("group_drift_z", &param, drift.drift_z(), 3.0));
    rows.push(CheckRow::checked("group_cross_z", &param, drift.cross_z(), 3.0));
    Ok(check_report("diffuse", model, Some(seed), rows))
}

/// Largest number of offspring vectors summed by `moments`.
const MOMENT_SUM_LIMIT: f64 = 1e7;

pub fn moments(model: &EnergyModel, block: &MomentsBlock) -> Result<Report, CliError> {
    let params = critical_params(model)?;
    let cells = ((model.max_degree() + 1) as f64).powi(block.max_k as i32);
    if cells > MOMENT_SUM_LIMIT {
        return Err(Error::Resource(format!(
            "exhaustive sum over {cells:.0} offspring vectors exceeds {MOMENT_SUM_LIMIT:.0}"
        ))
        .into());
    }
    let mut rows = Vec::new();
    for k in 1..=block.max_k {
        for power in 1..=4 {
            let ex = conditional_moment_exhaustive(k, power, &params, model);
            let fo = conditional_moment_formula(k, power, &params);
            rows.push(CheckRow::checked(
                format!("moment_{power}"),
                format!("k={k}"),
                (ex - fo).abs() / fo.abs(),
                block.tolerance,
            ));
        }
    }
    Ok(check_report("moments", model, None, rows))
}
