mod manifest;
mod results;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use vistacheck_core::bridge::serve_example_agent;
use vistacheck_core::criticality::{critical_values, generate_grid, TestCase, VistaContext};
use vistacheck_core::dynamics::AdProfile;
use vistacheck_core::oracle::verdict;
use vistacheck_core::report::Format;
use vistacheck_core::sim::{run, PolicyKind, ScenarioConfig};
use vistacheck_core::sweep::sweep;

use manifest::{parse_kind, preset, Manifest};
use results::{build_grids, write_atomic, write_report, ReportOptions, ResultDir};

#[derive(Parser)]
#[command(name = "vistacheck", version, about = "Vista-based safety testing of autopilot policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print braking distance, acceleration time and reached speed as CSV.
    AdTable {
        #[arg(long, default_value = "apollo-like")]
        preset: String,
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20")]
        speeds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
        distances: Vec<f64>,
    },
    /// Print the critical values of a context at one ego speed as JSON.
    Criticals {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        ve: f64,
    },
    /// Print the coarse test cases as JSON lines.
    Gen {
        #[arg(long, conflicts_with_all = ["kind", "preset"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Simulate one case and write its trace and verdict.
    Run {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        ve: f64,
        #[arg(long)]
        xa: Option<f64>,
        #[arg(long)]
        xf: f64,
        /// worst-case-safe, overcautious or overoptimistic
        #[arg(long, default_value = "worst-case-safe")]
        policy: String,
        #[arg(long, default_value_t = 0.5)]
        factor: f64,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Run the grids of a manifest with refinement and write the results.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Discard results already in the output directory.
        #[arg(long)]
        fresh: bool,
    },
    /// Rebuild grids, summaries and findings from a sweep directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
        formats: Vec<String>,
        /// Sweep directory whose grids serve as the reference.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// List every dominated pair instead of the closest witness.
        #[arg(long)]
        all_pairs: bool,
    },
    /// Serve the worst-case-safe policy over the bridge on stdin/stdout.
    ServeExampleAgent,
}

#[derive(Args)]
struct Target {
    #[arg(long)]
    kind: String,
    #[arg(long, default_value = "apollo-like")]
    preset: String,
}

/// Failures split by exit status.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Validation(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::AdTable { preset: name, speeds, distances } => {
            let p = preset(&name).invalid()?;
            print!("{}", ad_table(&p, &speeds, &distances).invalid()?);
            Ok(())
        }
        Command::Criticals { target, ve } => {
            let (ctx, p) = resolve_target(&target).invalid()?;
            let cv = critical_values(&ctx, &p, ve).invalid()?;
            let x_e = ctx.x_e(&p, ve).invalid()?;
            let out = serde_json::json!({
                "kind": ctx.kind,
                "preset": target.preset,
                "v_e": ve,
                "x_e": x_e,
                "criticals": cv,
            });
            println!("{}", serde_json::to_string_pretty(&out).runtime()?);
            Ok(())
        }
        Command::Gen { manifest, kind, preset: preset_name } => {
            let specs = match manifest {
                Some(path) => Manifest::load(&path).invalid()?.resolve().invalid()?,
                None => {
                    let kind = kind.ok_or_else(|| anyhow!("gen needs --manifest or --kind")).invalid()?;
                    let m = Manifest {
                        kinds: vec![parse_kind(&kind).invalid()?],
                        preset: preset_name.unwrap_or_else(|| "apollo-like".into()),
                        ..toml::from_str("").expect("empty manifest parses")
                    };
                    m.resolve().invalid()?
                }
            };
            let mut out = std::io::BufWriter::new(std::io::stdout().lock());
            for spec in specs {
                let cases = generate_grid(
                    &spec.grid,
                    &spec.context,
                    &spec.ego_profile,
                    &spec.ego_profile_name,
                    &spec.arriving_profile_name,
                )
                .invalid()?;
                for c in cases {
                    let line = serde_json::to_string(&c).runtime()?;
                    if let Err(e) = writeln!(out, "{line}") {
                        return closed_pipe_ok(e);
                    }
                }
            }
            out.flush().or_else(closed_pipe_ok)
        }
        Command::Run { target, ve, xa, xf, policy, factor, out } => run_one(&target, ve, xa, xf, &policy, factor, &out),
        Command::Sweep { manifest, out, threads, fresh } => run_sweep(&manifest, out.as_deref(), threads, fresh),
        Command::Report { dir, formats, reference, all_pairs } => {
            let formats: Vec<Format> = formats.iter().map(|f| f.parse()).collect::<Result<_, _>>().invalid()?;
            report(&dir, &formats, reference.as_deref(), all_pairs)
        }
        Command::ServeExampleAgent => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            serve_example_agent(stdin.lock(), stdout.lock()).runtime()
        }
    }
}

/// A reader that stops early (`gen | head`) is not an error.
fn closed_pipe_ok(e: std::io::Error) -> Result<(), Failure> {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        Ok(())
    } else {
        Err(Failure::Runtime(e.into()))
    }
}

fn resolve_target(t: &Target) -> Result<(VistaContext, AdProfile)> {
    Ok((VistaContext::standard(parse_kind(&t.kind)?), preset(&t.preset)?))
}

fn ad_table(p: &AdProfile, speeds: &[f64], distances: &[f64]) -> Result<String> {
    let mut s = String::from("quantity");
    for v in speeds {
        let _ = write!(s, ",{v}");
    }
    s.push('\n');
    s.push('B');
    for &v in speeds {
        let _ = write!(s, ",{:.1}", p.braking_distance(v)?);
    }
    s.push('\n');
    for &d in distances {
        let mut at = format!("AT@{d}");
        let mut av = format!("AV@{d}");
        for &v in speeds {
            let (t, u) = p.accel_reach(v, d)?;
            let _ = write!(at, ",{t:.1}");
            let _ = write!(av, ",{u:.1}");
        }
        let _ = writeln!(s, "{at}\n{av}");
    }
    Ok(s)
}

fn parse_policy(name: &str, factor: f64) -> Result<PolicyKind> {
    Ok(match name {
        "worst-case-safe" => PolicyKind::WorstCaseSafe,
        "overcautious" => PolicyKind::Overcautious,
        "overoptimistic" => PolicyKind::Overoptimistic { factor },
        other => bail!("unknown policy '{other}', expected worst-case-safe, overcautious or overoptimistic"),
    })
}

fn run_one(
    target: &Target,
    ve: f64,
    xa: Option<f64>,
    xf: f64,
    policy: &str,
    factor: f64,
    out: &Path,
) -> Result<(), Failure> {
    let (ctx, p) = resolve_target(target).invalid()?;
    let case = TestCase {
        context: ctx,
        v_e: ve,
        x_e: ctx.x_e(&p, ve).invalid()?,
        x_a: xa,
        x_f: xf,
        ego_profile: target.preset.clone(),
        arriving_profile: target.preset.clone(),
    };
    let cfg = ScenarioConfig::new(case, p.clone(), p, parse_policy(policy, factor).invalid()?);
    cfg.validate().invalid()?;
    vistacheck_core::sim::init_scenario(&cfg).invalid()?;
    let dir = ResultDir::create(out).invalid()?;
    let trace = run(&cfg).runtime()?;
    let record = verdict(&trace).runtime()?;
    write_atomic(&dir.path("trace.jsonl"), &trace.to_jsonl()).runtime()?;
    write_atomic(&dir.path("verdict.json"), &(serde_json::to_string_pretty(&record).runtime()? + "\n")).runtime()?;
    let ended = trace.termination().map_or("unterminated", |t| t.as_str());
    println!("{} ({ended} after {} ticks)", record.verdict, trace.snapshots.len() - 1);
    Ok(())
}

fn run_sweep(manifest_path: &Path, out: Option<&Path>, threads: Option<usize>, fresh: bool) -> Result<(), Failure> {
    let m = Manifest::load(manifest_path).invalid()?;
    let specs = m.resolve().invalid()?;
    let threads = m.threads(threads).invalid()?;
    let dir = ResultDir::create(&m.output_dir(out)).invalid()?;
    dir.bind_specs(&specs, fresh).invalid()?;
    let records = dir.load_records().runtime()?;
    let reused = records.len();
    let log = dir.partial_writer().runtime()?;
    let mut all = Vec::new();
    for spec in &specs {
        let done = sweep(spec, &records, threads, &|r| log.append(r))
            .with_context(|| format!("sweeping {}", spec.context.kind))
            .runtime()?;
        eprintln!("{}: {} cases", spec.context.kind, done.len());
        all.extend(done);
    }
    drop(log);
    dir.finish(&all).runtime()?;
    eprintln!("{} cases ({} reused) in {}", all.len(), reused.min(all.len()), dir.root.display());
    let grids = build_grids(&specs, &all).runtime()?;
    let outcome = write_report(
        &dir.root,
        &grids,
        &ReportOptions { formats: &[Format::Csv, Format::Json, Format::Svg], all_pairs: false, reference: None },
    )
    .runtime()?;
    eprintln!("{} grids, {} rationality findings", outcome.grids, outcome.findings);
    Ok(())
}

fn report(dir: &Path, formats: &[Format], reference: Option<&Path>, all_pairs: bool) -> Result<(), Failure> {
    let load = |d: &Path| -> Result<_> {
        let rd = ResultDir::open(d)?;
        let specs = rd.load_specs()?;
        let records = rd.load_records()?;
        build_grids(&specs, &records)
    };
    let grids = load(dir).invalid()?;
    let reference_grids = reference.map(load).transpose().invalid()?;
    let outcome =
        write_report(dir, &grids, &ReportOptions { formats, all_pairs, reference: reference_grids.as_deref() })
            .runtime()?;
    println!("{} grids, {} rationality findings", outcome.grids, outcome.findings);
    if let Some(n) = outcome.reference_findings {
        println!("{n} findings against the reference");
    }
    Ok(())
}
