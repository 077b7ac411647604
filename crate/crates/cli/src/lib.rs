//! Commands behind the `blockmf` binary. Each returns a [`CommandOutcome`]
//! instead of exiting so that tests can drive them directly.

use std::path::{Path, PathBuf};

use blockmf::finite_system::{simulate, SimulationRun};
use blockmf::fixed_points::{classify_stability, find_all_fixed_points, Stability};
use blockmf::io::{descent_to_csv, fixed_points_to_json, write_atomic, write_trajectory_csv};
use blockmf::limit_system::integrate;
use blockmf::lyapunov::descent_monitor;
use blockmf::model::sample_initial_configuration;
use blockmf::verify::{run_verification, Level};
use blockmf::{EmpiricalVector, Error, ModelSpec, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DESCENT: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl CommandOutcome {
    fn ok(artifacts: Vec<PathBuf>, summary: Vec<String>) -> Self {
        Self {
            exit_code: EXIT_OK,
            artifacts,
            summary,
        }
    }

    fn error(e: &Error) -> Self {
        Self {
            exit_code: exit_code_for(e),
            artifacts: Vec::new(),
            summary: vec![format!("error: {e}")],
        }
    }
}

/// I/O failures map to 3, everything else the user supplied to 2.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INPUT,
    }
}

fn finish(result: Result<CommandOutcome, Error>) -> CommandOutcome {
    result.unwrap_or_else(|e| CommandOutcome::error(&e))
}

/// Parses `uniform`, `delta:<z>` with a 1-based state, or a JSON array: either
/// one distribution used for every class or one per class.
pub fn parse_q0(spec: &ModelSpec, text: &str) -> Result<EmpiricalVector, Error> {
    let (r, k) = (spec.r(), spec.k());
    let text = text.trim();
    if text == "uniform" {
        return Ok(spec.uniform());
    }
    if let Some(z) = text.strip_prefix("delta:") {
        let z: usize = z
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad state in q0 spec {text:?}")))?;
        if z == 0 || z > k {
            return Err(Error::InvalidArgument(format!("q0 state {z} outside 1..={k}")));
        }
        return Ok(EmpiricalVector::delta(r, k, z - 1));
    }
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("q0 is not uniform, delta:<z> or JSON: {e}")))?;
    let q = if let Ok(flat) = serde_json::from_value::<Vec<f64>>(value.clone()) {
        EmpiricalVector::repeated(r, &flat)?
    } else {
        let nested: Vec<Vec<f64>> =
            serde_json::from_value(value).map_err(|e| Error::Parse(format!("q0 must be an array of numbers or of arrays: {e}")))?;
        EmpiricalVector::from_components(&nested)?
    };
    spec.check_empirical(&q)?;
    Ok(q)
}

fn load(model_file: &Path) -> Result<ModelSpec, Error> {
    ModelSpec::from_json_file(model_file)
}

fn create_dir(out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub n_scale: f64,
    pub horizon: f64,
    pub samples: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Law the initial nodes are drawn from; uniform when absent.
    pub q0: Option<String>,
}

/// Writes `replicate_<i>.csv` for each replicate and `mean.csv`.
pub fn cmd_simulate(model_file: &Path, args: &SimulateArgs, out: &Path) -> CommandOutcome {
    finish((|| {
        let spec = load(model_file)?;
        let spec = if args.n_scale == 1.0 { spec } else { spec.scaled(args.n_scale)? };
        let nu = match &args.q0 {
            Some(s) => parse_q0(&spec, s)?,
            None => spec.uniform(),
        };
        let x0 = sample_initial_configuration(&spec, &nu, args.seed)?;
        let run = SimulationRun::uniform(args.seed, args.horizon, args.samples, args.replicates)?;
        let paths = simulate(&spec, &x0, &run)?;
        create_dir(out)?;
        let width = args.replicates.to_string().len();
        let mut artifacts = Vec::with_capacity(paths.len() + 1);
        for (i, path) in paths.iter().enumerate() {
            let file = out.join(format!("replicate_{:0width$}.csv", i + 1));
            write_trajectory_csv(&file, path)?;
            artifacts.push(file);
        }
        let file = out.join("mean.csv");
        write_trajectory_csv(&file, &Trajectory::mean(&paths))?;
        artifacts.push(file);
        Ok(CommandOutcome::ok(
            artifacts,
            vec![format!(
                "simulated {} replicates of N = {} to T = {}",
                args.replicates,
                spec.total_nodes()?,
                args.horizon
            )],
        ))
    })())
}

/// Writes `trajectory.csv` and `descent.csv`; exit 4 if `F` increased.
pub fn cmd_integrate(model_file: &Path, q0: &str, horizon: f64, dt: f64, out: &Path) -> CommandOutcome {
    finish((|| {
        let spec = load(model_file)?;
        let q0 = parse_q0(&spec, q0)?;
        let traj = integrate(&spec, &q0, horizon, dt)?;
        let monitor = descent_monitor(&spec, &traj);
        create_dir(out)?;
        let traj_file = out.join("trajectory.csv");
        let descent_file = out.join("descent.csv");
        write_trajectory_csv(&traj_file, &traj)?;
        write_atomic(&descent_file, descent_to_csv(&monitor).as_bytes())?;
        let flagged = monitor.iter().filter(|s| s.flag).count();
        let f_end = monitor.last().map_or(f64::NAN, |s| s.f);
        let mut outcome = CommandOutcome::ok(
            vec![traj_file, descent_file],
            vec![format!(
                "integrated {} steps; F(T) = {f_end:.9}; {flagged} descent violations",
                traj.len() - 1
            )],
        );
        if flagged > 0 {
            outcome.exit_code = EXIT_DESCENT;
        }
        Ok(outcome)
    })())
}

/// `"3 fixed points: 1 unstable, 2 stable"`.
pub fn fixed_point_summary(classes: &[Stability]) -> String {
    let n = classes.len();
    let mut parts = Vec::new();
    for kind in [Stability::Unstable, Stability::Marginal, Stability::Stable] {
        let m = classes.iter().filter(|&&c| c == kind).count();
        if m > 0 {
            parts.push(format!("{m} {}", kind.as_str()));
        }
    }
    let noun = if n == 1 { "fixed point" } else { "fixed points" };
    if parts.is_empty() {
        format!("{n} {noun}")
    } else {
        format!("{n} {noun}: {}", parts.join(", "))
    }
}

/// Writes `fixed_points.json`. `n_starts = 0` searches from the uniform
/// point only.
pub fn cmd_fixed_points(model_file: &Path, n_starts: usize, seed: u64, out: &Path) -> CommandOutcome {
    finish((|| {
        let spec = load(model_file)?;
        let reports = find_all_fixed_points(&spec, n_starts, seed)
            .iter()
            .map(|r| {
                let mut c = classify_stability(&spec, &r.point)?;
                c.iterations = r.iterations;
                Ok(c)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        create_dir(out)?;
        let file = out.join("fixed_points.json");
        write_atomic(&file, fixed_points_to_json(&reports).as_bytes())?;
        let classes: Vec<Stability> = reports.iter().filter_map(|r| r.classification).collect();
        let mut summary = vec![fixed_point_summary(&classes)];
        for r in &reports {
            let q: Vec<String> = r.point.as_slice().iter().map(|x| format!("{x:.6}")).collect();
            summary.push(format!(
                "  {} F = {:.9} q = ({})",
                r.classification.map_or("?", Stability::as_str),
                r.f_value,
                q.join(", ")
            ));
        }
        Ok(CommandOutcome::ok(vec![file], summary))
    })())
}

/// Runs the verification suite; exit 1 if any row fails.
pub fn cmd_verify(model_file: &Path, level: Level, out: Option<&Path>) -> CommandOutcome {
    cmd_verify_with(model_file, level, out, |_| {})
}

/// [`cmd_verify`] with a hook that may alter the model after validation.
pub fn cmd_verify_with(
    model_file: &Path,
    level: Level,
    out: Option<&Path>,
    tamper: impl FnOnce(&mut ModelSpec),
) -> CommandOutcome {
    finish((|| {
        let mut spec = load(model_file)?;
        tamper(&mut spec);
        let report = run_verification(&spec, level);
        let table = report.to_string();
        let mut artifacts = Vec::new();
        if let Some(dir) = out {
            create_dir(dir)?;
            let file = dir.join("verify.txt");
            write_atomic(&file, table.as_bytes())?;
            artifacts.push(file);
        }
        let failed = report.failures().count();
        let mut summary: Vec<String> = table.lines().map(str::to_owned).collect();
        summary.push(format!(
            "{} checks at level {}: {failed} failed",
            report.rows.len(),
            level.as_str()
        ));
        Ok(CommandOutcome {
            exit_code: if failed == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED },
            artifacts,
            summary,
        })
    })())
}

#[cfg(test)]
mod tests {
    use super::*;
    use blockmf::model::example_model;

    #[test]
    fn q0_forms() {
        let spec = example_model(4.0);
        assert_eq!(parse_q0(&spec, "uniform").unwrap(), spec.uniform());
        assert_eq!(parse_q0(&spec, "delta:2").unwrap(), EmpiricalVector::delta(2, 2, 1));
        let flat = parse_q0(&spec, "[0.7, 0.3]").unwrap();
        assert_eq!(flat.component(3), &[0.7, 0.3]);
        let nested = parse_q0(&spec, "[[1,0],[0.5,0.5],[0,1],[0.2,0.8]]").unwrap();
        assert_eq!(nested.component(2), &[0.0, 1.0]);
        assert!(parse_q0(&spec, "delta:3").is_err());
        assert!(parse_q0(&spec, "[0.7, 0.4]").is_err());
        assert!(parse_q0(&spec, "[[1,0]]").is_err());
        assert!(parse_q0(&spec, "gaussian").is_err());
    }

    #[test]
    fn summary_wording() {
        use Stability::*;
        assert_eq!(fixed_point_summary(&[Stable, Unstable, Stable]), "3 fixed points: 1 unstable, 2 stable");
        assert_eq!(fixed_point_summary(&[Stable]), "1 fixed point: 1 stable");
    }

    #[test]
    fn io_errors_map_to_three() {
        let e = Error::Io(std::io::Error::other("disk"));
        assert_eq!(exit_code_for(&e), EXIT_IO);
        assert_eq!(exit_code_for(&Error::InvalidArgument("x".into())), EXIT_INPUT);
    }
}
