//! Runtime scaling comparison: the active-set solver against the full-set
//! projected-gradient baseline (same projection, no active-set restriction)
//! on synthetic instances with a fixed number of planted relevant groups
//! and a growing total group count. Cells run sequentially so the wall
//! clocks are not polluted by sibling work.

use std::time::Instant;

use grouplasso::multitask::{build_multitask_problem, generate_synthetic, SynthSpec};
use grouplasso::norms::PNorm;
use grouplasso::oracle::{full_set_projected_gradient, OracleBudget};
use grouplasso::solver::fit_active_set;
use grouplasso::GlmFamily;

use crate::config::{canonical_json, config_hash, BenchConfig};
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub groups: usize,
    pub p: PNorm,
    pub method: &'static str,
    pub median_wall_ms: f64,
    pub runs: usize,
    /// ok | timeout | error:<message>
    pub status: String,
    /// Active group count of the solution (active-set rows only).
    pub active_groups: Option<usize>,
}

pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
}

fn median_ms(mut times: Vec<f64>) -> f64 {
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    }
}

pub fn run_bench(config: &BenchConfig) -> CliResult<BenchOutput> {
    config.validate()?;
    let mut rows = Vec::new();
    for &groups in &config.group_counts {
        let spec = SynthSpec {
            seed: config.seed.wrapping_add(groups as u64),
            dim: groups,
            tasks: config.tasks,
            examples_per_task: config.examples_per_task,
            relevant_frac: config.relevant_groups as f64 / groups as f64,
            share_frac: 1.0,
            test_frac: 1.0 / 6.0,
        };
        let (train, _, _) =
            generate_synthetic(&spec).map_err(|e| CliError::usage(e.to_string()))?;
        let design =
            build_multitask_problem(&train).map_err(|e| CliError::usage(e.to_string()))?;

        for &p in &config.p_values {
            // active set
            let mut cfg = config.fit.to_fit_config(config.kappa, p);
            cfg.max_wall_seconds = Some(config.timeout_seconds);
            let mut times = Vec::new();
            let mut status = "ok".to_string();
            let mut active_count = None;
            for _ in 0..config.repetitions {
                let t0 = Instant::now();
                match fit_active_set(GlmFamily::Bernoulli, &design, &cfg) {
                    Ok(fit) => {
                        times.push(t0.elapsed().as_secs_f64() * 1e3);
                        active_count = Some(fit.active_set.len());
                    }
                    Err(grouplasso::Error::Convergence { message, .. })
                        if message.contains("wall-clock") =>
                    {
                        status = "timeout".into();
                        break;
                    }
                    Err(e) => {
                        status = format!("error:{e}").replace(',', ";");
                        break;
                    }
                }
            }
            rows.push(BenchRow {
                groups,
                p,
                method: "active_set",
                median_wall_ms: if times.is_empty() { f64::NAN } else { median_ms(times.clone()) },
                runs: times.len(),
                status,
                active_groups: active_count,
            });

            // full-set baseline
            let budget = OracleBudget {
                tol: config.baseline_tol,
                max_wall_seconds: Some(config.timeout_seconds),
                ..OracleBudget::default()
            };
            let mut times = Vec::new();
            let mut status = "ok".to_string();
            for _ in 0..config.repetitions {
                let t0 = Instant::now();
                match full_set_projected_gradient(
                    GlmFamily::Bernoulli,
                    &design,
                    config.kappa,
                    p,
                    &budget,
                ) {
                    Ok(_) => times.push(t0.elapsed().as_secs_f64() * 1e3),
                    Err(grouplasso::Error::Convergence { message, .. })
                        if message.contains("wall-clock") =>
                    {
                        status = "timeout".into();
                        break;
                    }
                    Err(e) => {
                        status = format!("error:{e}").replace(',', ";");
                        break;
                    }
                }
            }
            rows.push(BenchRow {
                groups,
                p,
                method: "full_set",
                median_wall_ms: if times.is_empty() { f64::NAN } else { median_ms(times.clone()) },
                runs: times.len(),
                status,
                active_groups: None,
            });
        }
    }
    Ok(BenchOutput { rows })
}

pub fn bench_csv(config: &BenchConfig, out: &BenchOutput) -> String {
    let canonical = canonical_json(config);
    let hash = config_hash(&canonical);
    let mut s = format!("# {canonical}\n");
    s.push_str("config_hash,groups,p,method,median_wall_ms,runs,status,active_groups\n");
    for r in &out.rows {
        s.push_str(&format!(
            "{hash},{},{},{},{},{},{},{}\n",
            r.groups,
            r.p,
            r.method,
            r.median_wall_ms,
            r.runs,
            r.status,
            r.active_groups.map(|a| a.to_string()).unwrap_or_default(),
        ));
    }
    s
}
