use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ruinwalk::core::dists::{DistSpec, TailModel};
use ruinwalk::experiment::{evaluate, output_dir, write_outcome, Summary};
use ruinwalk::spec::{Check, ExperimentSpec};
use ruinwalk::{io, presets, Error};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "ruinwalk",
    version,
    about = "Heavy-tailed first-exceedance experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment from a JSON spec (or a preset name).
    Run {
        /// Spec file, or a preset name if no such file exists.
        spec: String,
        /// Override the spec's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Parent directory of the output folder.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled experiments.
    Presets {
        /// Print full specs as JSON.
        #[arg(long)]
        json: bool,
        /// Write each preset to <DIR>/<name>.json.
        #[arg(long, value_name = "DIR")]
        write: Option<PathBuf>,
    },
    /// Tail, integrated tail and scale function of a distribution.
    Tails {
        dist: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        x: Vec<f64>,
    },
    /// Growth-bound feasibility for f_x ~ x^-(alpha+1) and phi(x) = x^beta.
    Bound {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        cutoff: Option<u64>,
        /// Exit with 1 unless the verdict matches.
        #[arg(long)]
        expect: Option<Feasibility>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Feasibility {
    Feasible,
    Infeasible,
}

const UNEXPECTED: u8 = 1;
const USAGE: u8 = 2;

fn load_spec(arg: &str) -> Result<ExperimentSpec, Error> {
    let path = Path::new(arg);
    if !path.exists() && presets::PRESET_NAMES.contains(&arg) {
        return presets::preset(arg);
    }
    io::read_json(path)
}

fn print_summary(s: &Summary) {
    for c in &s.criteria {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let kind = if c.primary { "" } else { " (side condition)" };
        println!("  [{tag}] {}{kind}: {:.6} ({})", c.name, c.value, c.rule);
    }
    let verdict = serde_json::to_string(&s.verdict).unwrap_or_default();
    let expected = serde_json::to_string(&s.expected).unwrap_or_default();
    println!(
        "{}: verdict {verdict}, expected {expected} -> {}",
        s.name,
        if s.as_expected {
            "as expected"
        } else {
            "UNEXPECTED"
        }
    );
}

fn run(
    spec: &str,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> Result<u8, Error> {
    let mut spec = load_spec(spec)?;
    if let Some(s) = seed {
        spec.run.seed = s;
    }
    if let Some(w) = workers {
        spec.run.workers = w;
    }
    if out.is_some() {
        spec.out_dir = out;
    }
    let outcome = evaluate(&spec)?;
    let dir = output_dir(&spec);
    write_outcome(&spec, &outcome, &dir)?;
    print_summary(&outcome.summary);
    println!("results in {}", dir.display());
    Ok(if outcome.summary.as_expected {
        0
    } else {
        UNEXPECTED
    })
}

fn list(json: bool, write: Option<PathBuf>) -> Result<u8, Error> {
    let all = presets::list_presets();
    if let Some(dir) = write {
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        for p in &all {
            io::write_json(&dir.join(format!("{}.json", p.name)), p)?;
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&all)?);
    } else {
        for p in &all {
            let expect = serde_json::to_string(&p.expect)?;
            println!(
                "{:<22} expect {:<7} budget {:<12} {}",
                p.name,
                expect.trim_matches('"'),
                p.budget,
                p.description
            );
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct TailRow {
    x: f64,
    tail: f64,
    integrated_tail: Option<f64>,
    mean_excess: Option<f64>,
    scale: Option<f64>,
}

fn tails(dist: &Path, xs: &[f64]) -> Result<u8, Error> {
    let spec: DistSpec = io::read_json(dist)?;
    let model = TailModel::try_from(spec)?;
    let scale = model.scale_function().ok();
    for &x in xs {
        let row = TailRow {
            x,
            tail: model.tail(x),
            integrated_tail: model.integrated_tail(x).ok(),
            mean_excess: model.mean_excess(x).ok(),
            scale: scale.as_ref().map(|s| s.eval(x)),
        };
        println!("{}", serde_json::to_string(&row)?);
    }
    Ok(0)
}

fn bound(
    alpha: f64,
    beta: f64,
    cutoff: Option<u64>,
    expect: Option<Feasibility>,
) -> Result<u8, Error> {
    let mut spec = presets::preset("thm72-bound")?;
    spec.check = Check::GrowthBound {
        alpha,
        beta,
        cutoff,
    };
    let outcome = evaluate(&spec)?;
    let s = &outcome.summary;
    let g = s.growth.as_ref().expect("growth check reports");
    println!(
        "alpha = {alpha}, beta = {beta}: {} (last decade increment ratio {:.4}, bound holds: {})",
        if g.feasible { "feasible" } else { "infeasible" },
        g.increment_ratio,
        g.bound_holds
    );
    let got = if g.feasible {
        Feasibility::Feasible
    } else {
        Feasibility::Infeasible
    };
    Ok(match expect {
        Some(e) if e != got => UNEXPECTED,
        _ => 0,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run {
            spec,
            seed,
            workers,
            out,
        } => run(&spec, seed, workers, out),
        Cmd::Presets { json, write } => list(json, write),
        Cmd::Tails { dist, x } => tails(&dist, &x),
        Cmd::Bound {
            alpha,
            beta,
            cutoff,
            expect,
        } => bound(alpha, beta, cutoff, expect),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
    }
}
