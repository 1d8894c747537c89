//! The `branchlight` command line.
//!
//! Every subcommand prints `key=value` lines (or CSV) with 12 significant
//! digits. Exit status is 0 on success, 1 for bad input and 2 when a numerical
//! procedure did not converge or a check failed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::closed_form::assemble_optimal_measure;
use crate::exec::Exec;
use crate::irrigation::{tree_cost, IrrigationTree, TreeJson};
use crate::measure::{Direction, Measure};
use crate::numeric::fmt_sig;
use crate::optimizer::{self, RayFamilyConfig, RayGrid};
use crate::sunlight::{sunlight_multi, sunlight_single, LightField};
use crate::svg::{render_measure, GuideRay};
use crate::theory::alpha_zero::{alpha_zero_k, alpha_zero_verdict, MIN_ANGULAR_GRID};
use crate::theory::{run_sweeps, SweepPlan};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "BRANCHLIGHT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "branchlight", version, about = "Sunlight versus branched-transport cost for planar tree branches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sunlight captured by a measure (JSON) from direction theta0.
    Sunlight(SunlightArgs),
    /// Gilbert cost of a tree (JSON).
    Cost(CostArgs),
    /// Closed-form optimal densities on the two optimal rays.
    ClosedForm(ClosedFormArgs),
    /// Maximize the payoff over a ray family described in a JSON config.
    Optimize(OptimizeArgs),
    /// Run every positivity sweep and print a CSV table.
    CheckTheory(CheckTheoryArgs),
    /// The alpha = 0 constant K and the resulting verdict.
    AlphaZero(AlphaZeroArgs),
    /// Straight optimal stem against the same stem bent toward the light.
    Phototropism(PhototropismArgs),
}

#[derive(Debug, Args)]
struct SunlightArgs {
    #[arg(long)]
    measure: PathBuf,
    /// Light direction in radians.
    #[arg(long, required_unless_present = "field", conflicts_with = "field")]
    theta0: Option<f64>,
    /// Light field JSON `[{theta, weight}]` instead of a single direction.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CostArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    alpha: f64,
}

#[derive(Debug, Args)]
struct ClosedFormArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    theta0: f64,
    /// Cells per ray for the assembled measure.
    #[arg(long, default_value_t = 256)]
    cells: usize,
    /// Directory receiving `gamma1.csv`, `gamma0.csv` and `measure.svg`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving `densities.csv`, `report.json` and `family.svg`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckTheoryArgs {
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 100_000)]
    g_points: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AlphaZeroArgs {
    /// Uniform unit intensity on the whole circle.
    #[arg(long, conflicts_with = "field", required_unless_present = "field")]
    uniform: bool,
    #[arg(long)]
    field: Option<PathBuf>,
    /// Quadrature nodes for `--uniform`.
    #[arg(long, default_value_t = 4096)]
    nodes: usize,
    #[arg(long)]
    c: f64,
    /// Density of the witness segment.
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    /// Length of the witness segment.
    #[arg(long, default_value_t = 10.0)]
    ell: f64,
    #[arg(long, default_value_t = MIN_ANGULAR_GRID)]
    grid: usize,
}

#[derive(Debug, Args)]
struct PhototropismArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    theta0: f64,
    /// Bend angles in radians; may be repeated.
    #[arg(long = "bend", num_args = 1.., default_values_t = [std::f64::consts::PI / 12.0, std::f64::consts::PI / 6.0, std::f64::consts::FRAC_PI_4])]
    bends: Vec<f64>,
}

/// Optimizer experiment file. Omitted grid fields fall back to the defaults
/// (`cells = 256`, `length = 2c^{−1/α}`).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    alpha: f64,
    c: f64,
    theta0: f64,
    angles: Vec<f64>,
    cells: Option<usize>,
    length: Option<f64>,
    seeds: Option<Vec<u64>>,
    tolerance: Option<f64>,
    max_passes: Option<usize>,
}

impl ExperimentFile {
    fn into_config(self) -> crate::Result<RayFamilyConfig> {
        let length = self.length.unwrap_or_else(|| RayFamilyConfig::default_length(self.alpha, self.c));
        let cells = self.cells.unwrap_or(optimizer::DEFAULT_CELLS);
        let cfg = RayFamilyConfig {
            alpha: self.alpha,
            c: self.c,
            theta0: self.theta0,
            rays: self.angles.iter().map(|&angle| RayGrid { angle, length, cells }).collect(),
            seeds: self.seeds.unwrap_or_else(|| optimizer::DEFAULT_SEEDS.to_vec()),
            tolerance: self.tolerance.unwrap_or(optimizer::DEFAULT_TOLERANCE),
            max_passes: self.max_passes.unwrap_or(optimizer::DEFAULT_MAX_PASSES),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Input(anyhow::Error),
    Numerical(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e:#}");
        return 1;
    }
    let result = match cli.command {
        Command::Sunlight(a) => sunlight(a, out),
        Command::Cost(a) => cost(a, out),
        Command::ClosedForm(a) => closed_form(a, out),
        Command::Optimize(a) => optimize(a, out),
        Command::CheckTheory(a) => check_theory(a, out),
        Command::AlphaZero(a) => alpha_zero(a, out),
        Command::Phototropism(a) => phototropism(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
        Err(Failure::Numerical(msg)) => {
            let _ = writeln!(err, "numerical failure: {msg}");
            2
        }
    }
}

/// Size the global pool from `BRANCHLIGHT_THREADS` once per process.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().with_context(|| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    if n == 0 {
        anyhow::bail!("{THREADS_ENV} must be at least 1");
    }
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process finds the pool already built.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn sunlight(a: SunlightArgs, out: &mut dyn Write) -> Outcome {
    let m: Measure = read_json(&a.measure)?;
    let value = match (a.theta0, a.field) {
        (Some(t), _) => sunlight_single(&m, Direction::new(t)),
        (None, Some(path)) => {
            let field: LightField = read_json(&path)?;
            sunlight_multi(&m, &field, Exec::Parallel)
        }
        (None, None) => unreachable!("clap requires one of --theta0, --field"),
    };
    writeln!(out, "sunlight={}", fmt_sig(value))?;
    Ok(())
}

fn cost(a: CostArgs, out: &mut dyn Write) -> Outcome {
    let raw: TreeJson = read_json(&a.tree)?;
    let tree = IrrigationTree::try_from(raw)?;
    writeln!(out, "cost={}", fmt_sig(tree_cost(&tree, a.alpha)?))?;
    Ok(())
}

fn closed_form(a: ClosedFormArgs, out: &mut dyn Write) -> Outcome {
    let om = assemble_optimal_measure(a.alpha, a.c, a.theta0, a.cells)?;
    writeln!(out, "ell1={}", fmt_sig(om.ell1()))?;
    writeln!(out, "ell0={}", fmt_sig(om.ell0()))?;
    writeln!(out, "mass1={}", fmt_sig(om.gamma1.mass()))?;
    writeln!(out, "mass0={}", fmt_sig(om.gamma0.mass()))?;
    writeln!(out, "payoff1={}", fmt_sig(om.gamma1.optimal_payoff()))?;
    writeln!(out, "payoff0={}", fmt_sig(om.gamma0.optimal_payoff()))?;
    writeln!(out, "certified={}", om.certified())?;
    if let Some(dir) = a.out_dir {
        for (name, sol) in [("gamma1.csv", &om.gamma1), ("gamma0.csv", &om.gamma0)] {
            let mut buf = Vec::new();
            sol.write_csv(&mut buf)?;
            write_file(&dir, name, &buf)?;
        }
        let guides = [
            GuideRay { angle: a.theta0 + std::f64::consts::FRAC_PI_2, length: om.ell1() },
            GuideRay { angle: 0.0, length: om.ell0() },
        ];
        write_file(&dir, "measure.svg", render_measure(&om.measure, a.theta0, &guides).as_bytes())?;
    }
    Ok(())
}

fn optimize(a: OptimizeArgs, out: &mut dyn Write) -> Outcome {
    let cfg = read_json::<ExperimentFile>(&a.config)?.into_config()?;
    let result = optimizer::maximize_over_family(&cfg, Exec::Parallel)?;
    let json = serde_json::json!({
        "report": result.report,
        "best_seed": result.best_seed,
        "converged": result.converged,
        "runs": result.runs,
        "payoff_dispersion": result.payoff_dispersion,
        "density_dispersion": result.density_dispersion,
    });
    let text = serde_json::to_string_pretty(&json)?;
    writeln!(out, "{text}")?;

    if let Some(dir) = a.out_dir {
        write_file(&dir, "report.json", format!("{text}\n").as_bytes())?;
        let mut csv = String::from("ray,angle,cell,s_mid,density\n");
        for (k, (r, d)) in cfg.rays.iter().zip(&result.densities).enumerate() {
            let h = r.cell_width();
            for (i, u) in d.iter().enumerate() {
                csv.push_str(&format!(
                    "{k},{},{i},{},{}\n",
                    fmt_sig(r.angle),
                    fmt_sig((i as f64 + 0.5) * h),
                    fmt_sig(*u)
                ));
            }
        }
        write_file(&dir, "densities.csv", csv.as_bytes())?;
        let measure = cfg.measure(&result.densities)?;
        let mut guides = Vec::new();
        if let Ok(om) = assemble_optimal_measure(cfg.alpha, cfg.c, cfg.theta0, 16) {
            guides.push(GuideRay { angle: cfg.theta0 + std::f64::consts::FRAC_PI_2, length: om.ell1() });
            guides.push(GuideRay { angle: 0.0, length: om.ell0() });
        }
        write_file(&dir, "family.svg", render_measure(&measure, cfg.theta0, &guides).as_bytes())?;
    }
    if !result.converged {
        let passes: Vec<usize> = result.runs.iter().map(|r| r.passes).collect();
        return Err(Failure::Numerical(format!("optimizer did not converge (passes per seed {passes:?})")));
    }
    Ok(())
}

fn check_theory(a: CheckTheoryArgs, out: &mut dyn Write) -> Outcome {
    let plan = SweepPlan {
        gain_grid: a.grid,
        g_grid: a.g_points,
        sn_samples: a.samples,
        link_samples: a.samples,
        seed: a.seed,
        ..SweepPlan::default()
    };
    if plan.gain_grid < 2 || plan.g_grid < 1 || plan.sn_samples < 1 {
        return Err(Failure::Input(anyhow::anyhow!("grid sizes and sample counts must be positive")));
    }
    let rows = run_sweeps(&plan, Exec::Parallel);
    writeln!(out, "check,alpha,points,worst,argmin,pass")?;
    for r in &rows {
        let arg: Vec<String> = r.argmin.iter().map(|&x| fmt_sig(x)).collect();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            fmt_sig(r.alpha),
            r.points,
            fmt_sig(r.worst),
            arg.join(";"),
            if r.pass { "PASS" } else { "FAIL" }
        )?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} sweep(s) failed")));
    }
    Ok(())
}

fn alpha_zero(a: AlphaZeroArgs, out: &mut dyn Write) -> Outcome {
    let field = match a.field {
        Some(path) => read_json::<LightField>(&path)?,
        None => LightField::uniform(a.nodes, 1.0)?,
    };
    let k = alpha_zero_k(&field, a.grid)?;
    let report = alpha_zero_verdict(k.k, a.c, a.lambda, a.ell)?;
    let verdict = serde_json::to_value(report.verdict)?;
    writeln!(out, "K={}", fmt_sig(k.k))?;
    writeln!(out, "w_angle={}", fmt_sig(k.w_angle))?;
    writeln!(out, "verdict={}", verdict.as_str().unwrap_or_default())?;
    writeln!(out, "witness={}", fmt_sig(report.witness))?;
    if let Some(b) = report.upper_bound {
        writeln!(out, "upper_bound={}", fmt_sig(b))?;
    }
    Ok(())
}

fn phototropism(a: PhototropismArgs, out: &mut dyn Write) -> Outcome {
    writeln!(out, "bend,straight,bent,difference")?;
    for &bend in &a.bends {
        let r = optimizer::phototropism_compare(a.alpha, a.c, a.theta0, bend)?;
        writeln!(
            out,
            "{},{},{},{}",
            fmt_sig(r.bend_angle),
            fmt_sig(r.straight),
            fmt_sig(r.bent),
            fmt_sig(r.difference)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let mut argv = vec!["branchlight"];
        argv.extend_from_slice(args);
        let code = run_with(argv, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn closed_form_alpha_one() {
        let (code, out, _) = call(&["closed-form", "--alpha", "1", "--c", "0.5", "--theta0", "0.7853981634"]);
        assert_eq!(code, 0);
        assert!(out.lines().any(|l| l == "ell1=2.0"), "{out}");
    }

    #[test]
    fn bad_input_exits_one() {
        assert_eq!(call(&["frobnicate"]).0, 1);
        assert_eq!(call(&["cost", "--alpha", "1"]).0, 1);
        assert_eq!(call(&["cost", "--tree", "/nonexistent.json", "--alpha", "1"]).0, 1);
        assert_eq!(call(&["closed-form", "--alpha", "1.5", "--c", "1", "--theta0", "0.5"]).0, 1);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn uniform_alpha_zero() {
        let (code, out, _) = call(&["alpha-zero", "--uniform", "--c", "1"]);
        assert_eq!(code, 0);
        let k: f64 = out.lines().find_map(|l| l.strip_prefix("K=")).unwrap().parse().unwrap();
        assert!((k - 4.0).abs() < 1e-6, "{out}");
        assert!(out.contains("verdict=UNBOUNDED"));
    }
}
