use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use moboga::engine::{exploit, explore};
use moboga::problems::{BenchmarkProblem, BUILTIN_NAMES};
use moboga::verify::{self, FrontReport, SinusoidReport, VERIFY_SEED};
use moboga::{ObjectiveVector, ParamKind};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::record::{ConstraintInfo, Header, RecordWriter, ResultLine, RunRecord, FORMAT_VERSION};

pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub problem: Option<String>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

fn resolve_config(args: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = match (&args.config, &args.problem) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::for_problem(name),
        (None, None) => return Err(CliError::Config("give a config file or --problem".into())),
    };
    if let Some(name) = &args.problem {
        cfg.problem = name.clone();
    }
    if let Some(n) = args.iters {
        cfg.engine.max_iterations = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    cfg.seed = Some(cfg.seed.unwrap_or(0));
    Ok(cfg)
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve_config(args)?;
    let bench = cfg.build_problem()?;
    let problem = &bench.problem;
    let engine = cfg.engine_config(&problem.space)?;

    let header = Header {
        format_version: FORMAT_VERSION,
        seed: engine.seed,
        config: cfg.clone(),
        parameters: problem.space.params().to_vec(),
        objectives: problem.objectives.iter().map(|o| o.name.clone()).collect(),
        constraints: problem
            .constraints
            .iter()
            .map(|c| ConstraintInfo {
                name: c.name.clone(),
                hard: c.is_hard(),
            })
            .collect(),
    };
    let mut writer = RecordWriter::create(&args.out, header)?;
    let mut write_error = None;
    let explored = explore(problem, &engine, |o| {
        writer.observation(o).map_err(|e| {
            let msg = e.to_string();
            write_error = Some(e);
            moboga::Error::Contract(msg)
        })
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let explored = explored?;
    let pick = exploit(&explored.archive, cfg.weights.as_deref())?;
    writer.result(ResultLine {
        pof: pick.pof.clone(),
        best_index: pick.best_index,
        closeness: pick.closeness.clone(),
        stop_reason: explored.stop_reason,
        iterations_used: explored.iterations_used,
    })?;

    let out = |e: std::io::Error| CliError::Runtime(e.to_string());
    let names: Vec<&str> = problem
        .space
        .params()
        .iter()
        .map(|p| p.name.as_str())
        .chain(problem.objectives.iter().map(|o| o.name.as_str()))
        .collect();
    writeln!(
        stdout,
        "{}: {} evaluations, stopped by {:?}, {} on the front",
        cfg.problem,
        explored.iterations_used,
        explored.stop_reason,
        pick.pof.len()
    )
    .map_err(out)?;
    writeln!(
        stdout,
        "{:>6} {} {:>10}",
        "id",
        names.iter().map(|n| format!("{n:>12}")).collect::<String>(),
        "closeness"
    )
    .map_err(out)?;
    let obs = explored.archive.observations();
    for (&i, c) in pick.pof.iter().zip(&pick.closeness) {
        let o = &obs[i];
        let cells: String = o
            .candidate
            .0
            .iter()
            .map(|v| match v.as_real() {
                Some(r) => format!("{:>12}", fmt_value(r)),
                None => format!("{v:>12}"),
            })
            .chain(
                o.objectives
                    .0
                    .iter()
                    .map(|q| format!("{:>12}", fmt_value(*q))),
            )
            .collect();
        let mark = if i == pick.best_index { " *" } else { "" };
        writeln!(stdout, "{i:>6} {cells} {c:>10.6}{mark}").map_err(out)?;
    }
    let best = &obs[pick.best_index];
    let params: Vec<String> = problem
        .space
        .params()
        .iter()
        .zip(&best.candidate.0)
        .map(|(p, v)| format!("{}={v}", p.name))
        .collect();
    writeln!(
        stdout,
        "best #{}: {} -> {:?}",
        pick.best_index,
        params.join(" "),
        best.objectives.0
    )
    .map_err(out)?;
    writeln!(stdout, "record written to {}", args.out.display()).map_err(out)?;
    Ok(())
}

/// Writes the per-observation CSV for plotting.
pub fn cmd_front(record_path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let record = RunRecord::read(record_path)?;
    let (pof, best, closeness) = record.front()?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());

    let mut header = vec!["candidate_id".to_string()];
    header.extend(record.header.parameters.iter().map(|p| p.name.clone()));
    header.extend(record.header.objectives.iter().cloned());
    header.extend(["on_front", "is_best", "closeness"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;

    for o in &record.observations {
        let slot = pof.iter().position(|&i| i == o.index);
        let mut row = vec![o.index.to_string()];
        row.extend(o.candidate.iter().map(|v| v.to_string()));
        row.extend(o.objectives.iter().map(|q| q.to_string()));
        row.push(slot.is_some().to_string());
        row.push((o.index == best).to_string());
        row.push(slot.map(|s| closeness[s].to_string()).unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

fn write_points(path: &Path, names: &[String], points: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    w.write_record(names).map_err(err)?;
    for p in points {
        w.write_record(p.iter().map(|v| v.to_string()))
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn vectors(v: &[ObjectiveVector]) -> Vec<Vec<f64>> {
    v.iter().map(|o| o.0.clone()).collect()
}

fn report_front(r: &FrontReport, dir: &Path, stdout: &mut dyn Write) -> CliResult<Vec<String>> {
    let name = r.problem.name;
    let objectives: Vec<String> = r
        .problem
        .problem
        .objectives
        .iter()
        .map(|o| o.name.clone())
        .collect();
    write_points(
        &dir.join(format!("{name}-front.csv")),
        &objectives,
        &vectors(&r.front),
    )?;
    write_points(
        &dir.join(format!("{name}-oracle.csv")),
        &objectives,
        &vectors(&r.oracle),
    )?;
    let failures = r.failures();
    write_json(
        &dir.join(format!("{name}-metrics.json")),
        &json!({
            "problem": name,
            "seed": VERIFY_SEED,
            "generational_distance": r.gd,
            "oracle_diagonal": r.diagonal,
            "threshold": r.threshold,
            "hard_violations": r.hard_violations,
            "evaluations": r.result.iterations_used,
            "stop_reason": r.result.stop_reason,
            "front_size": r.front.len(),
            "oracle_size": r.oracle.len(),
            "runtime_seconds": r.elapsed.as_secs_f64(),
            "passed": failures.is_empty(),
        }),
    )?;
    writeln!(
        stdout,
        "{name}: GD {:.6} (threshold {:.6}), hard violations {}, {} evaluations, {:.2}s",
        r.gd,
        r.threshold,
        r.hard_violations,
        r.result.iterations_used,
        r.elapsed.as_secs_f64()
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(failures)
}

fn report_sinusoid(
    r: &SinusoidReport,
    dir: &Path,
    stdout: &mut dyn Write,
) -> CliResult<Vec<String>> {
    let obs = r.result.archive.observations();
    let queries: Vec<Vec<f64>> = obs
        .iter()
        .map(|o| {
            vec![
                o.iteration as f64,
                o.candidate.real(0),
                o.objectives.0[0],
                f64::from(u8::from(o.feasible)),
            ]
        })
        .collect();
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    write_points(
        &dir.join("sinusoid-1d-queries.csv"),
        &names(&["iteration", "x", "q", "feasible"]),
        &queries,
    )?;
    let best = obs
        .iter()
        .filter(|o| o.feasible)
        .min_by(|a, b| a.objectives.0[0].total_cmp(&b.objectives.0[0]))
        .map(|o| vec![vec![o.candidate.real(0), o.objectives.0[0]]])
        .unwrap_or_default();
    write_points(
        &dir.join("sinusoid-1d-front.csv"),
        &names(&["x", "q"]),
        &best,
    )?;
    write_points(
        &dir.join("sinusoid-1d-oracle.csv"),
        &names(&["x", "q"]),
        &[vec![r.grid_argmin, r.grid_min]],
    )?;
    let failures = r.failures();
    write_json(
        &dir.join("sinusoid-1d-metrics.json"),
        &json!({
            "problem": "sinusoid-1d",
            "seed": VERIFY_SEED,
            "hard_violations": r.hard_violations,
            "soft_region_queries": r.soft_queries,
            "best_feasible": r.best_feasible,
            "reference_value": r.reference_value,
            "grid_min": r.grid_min,
            "grid_argmin": r.grid_argmin,
            "evaluations": r.result.iterations_used,
            "stop_reason": r.result.stop_reason,
            "passed": failures.is_empty(),
        }),
    )?;
    writeln!(
        stdout,
        "sinusoid-1d: best feasible {:.6} (reference {:.6}, grid minimum {:.6}), hard violations {}, soft-region queries {}",
        r.best_feasible, r.reference_value, r.grid_min, r.hard_violations, r.soft_queries
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(failures)
}

pub fn cmd_verify(which: &str, out_dir: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let failures = match which {
        "binh-korn" | "constr-ex" => {
            report_front(&verify::verify_front(which, VERIFY_SEED)?, out_dir, stdout)?
        }
        "sinusoid-1d" => report_sinusoid(&verify::verify_sinusoid(VERIFY_SEED)?, out_dir, stdout)?,
        other => return Err(CliError::Config(format!("unknown reproduction `{other}`"))),
    };
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failures.join("; ")))
    }
}

pub fn cmd_problems(stdout: &mut dyn Write) -> CliResult<()> {
    for name in BUILTIN_NAMES {
        let b = BenchmarkProblem::by_name(name)?;
        let params: Vec<String> = b
            .problem
            .space
            .params()
            .iter()
            .map(|p| match &p.kind {
                ParamKind::Continuous { lo, hi } => format!("{} in [{lo}, {hi}]", p.name),
                ParamKind::Discrete { values } => format!("{} in {values:?}", p.name),
                ParamKind::Categorical { labels } => format!("{} in {labels:?}", p.name),
            })
            .collect();
        let objectives: Vec<&str> = b
            .problem
            .objectives
            .iter()
            .map(|o| o.name.as_str())
            .collect();
        let constraints: Vec<String> = b
            .problem
            .constraints
            .iter()
            .map(|c| format!("{} ({})", c.name, if c.is_hard() { "hard" } else { "soft" }))
            .collect();
        writeln!(
            stdout,
            "{name}\n  parameters:  {}\n  objectives:  {}\n  constraints: {}",
            params.join(", "),
            objectives.join(", "),
            constraints.join(", ")
        )
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}
