//! Command-line front end for the exact counting toolkit.
//!
//! Exit codes: 0 when every asserted check passes, 1 when a check fails or
//! a requested computation exceeds its cap, 2 for configuration errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lusztig_cli::cache::Cache;
use lusztig_cli::report::{OutputFormat, VerificationReport};
use lusztig_cli::scenario::{load_config, presets, select, Scenario, SuiteName};
use lusztig_cli::suites::{run_scenario, verify_suite, RunOptions};
use lusztig_core::chevalley::Twist;
use lusztig_core::counting::{
    count_geometric_cell, fit_polynomial, lusztig_cell_counts, unipotent_cell_counts, weyl_to_perm,
    ClassPredicate, PointCountSeries,
};
use lusztig_core::coxeter::{
    enumerate_group, has_full_twisted_support, CoxeterDatum, DiagramAutomorphism, WeylElement,
};
use lusztig_core::hecke::dm_sum;

#[derive(Parser)]
#[command(
    name = "lusztig",
    version,
    about = "Exact Weyl group, Hecke algebra, and point-counting checks for small groups of Lie type"
)]
struct Cli {
    /// Scenario config file (TOML); defaults to the shipped presets.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the scenario prime lists, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    primes: Option<Vec<u64>>,

    /// Override both the orbit cap and the sweep cap.
    #[arg(long, global = true)]
    cap: Option<u64>,

    /// Worker threads for the counting sweeps; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Cache directory for exact counts; the LUSZTIG_CACHE_DIR environment
    /// variable works too.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    /// Report format: text, json, or csv.
    #[arg(long, global = true, default_value = "text")]
    format: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the summed twisted Hecke coefficients for one Coxeter type.
    HeckeTable {
        /// Coxeter label, like A2 or B3.
        label: String,
        /// Use the order-two diagram flip instead of the identity twist.
        #[arg(long)]
        flip: bool,
    },
    /// One exact count at one prime.
    Count {
        /// Scenario id supplying the group and the element template.
        scenario: String,
        #[arg(long, value_enum)]
        what: CountKind,
        #[arg(long)]
        prime: u64,
        /// Weyl element as a comma separated word, or "e".
        #[arg(long)]
        w: String,
        /// Second Weyl element for unipotent cells.
        #[arg(long)]
        wprime: Option<String>,
    },
    /// Fit one counting series across the scenario's primes.
    Fit {
        scenario: String,
        #[arg(long, value_enum)]
        what: CountKind,
        #[arg(long)]
        w: String,
        #[arg(long)]
        wprime: Option<String>,
        /// Degree bound for the exact interpolation.
        #[arg(long)]
        bound: usize,
    },
    /// Run one verification suite and print its report.
    Verify {
        /// lemma33, kawanaka34, lemma41, dims21, theorem42, or hecke-props.
        suite: String,
        /// Scenario ids; defaults to every scenario listing the suite.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
    },
    /// Run every listed suite of the selected scenarios.
    Report {
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CountKind {
    /// Flags g with g^-1 h t(g) in the Bruhat cell of w.
    Lusztig,
    /// Twisted class members landing in the Bruhat cell of w.
    ClassCell,
    /// Lower unitriangular u with w'^-1 u t(w') in the Bruhat cell of w.
    UnipotentCell,
    /// Geometric class members landing in the Bruhat cell of w.
    GeometricCell,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let format: OutputFormat = cli.format.parse()?;
    let cache = Cache::from_flag_or_env(cli.cache_dir.as_deref())?;
    let scenarios: Vec<Scenario> = match &cli.config {
        Some(path) => load_config(&fs::read_to_string(path)?)?,
        None => presets(),
    };
    let opts = RunOptions {
        cache,
        primes: cli.primes.clone(),
        orbit_cap: cli.cap.map(|c| c as usize),
        sweep_cap: cli.cap.map(u128::from),
    };

    match cli.command {
        Command::HeckeTable { label, flip } => {
            let datum = CoxeterDatum::parse(&label)?;
            let twist = if flip {
                DiagramAutomorphism::flip(&datum)?
            } else {
                DiagramAutomorphism::identity(&datum)
            };
            let elements = enumerate_group(&datum, datum.order())?;
            println!(
                "summed twisted coefficients for {label} ({} twist)",
                if flip { "flip" } else { "identity" }
            );
            println!("{:<14} {:>4}  {:>5}  sum", "w", "l(w)", "full");
            for w in &elements {
                let sum = dm_sum(w, &twist)?;
                let full = has_full_twisted_support(w, &twist)?;
                println!(
                    "{:<14} {:>4}  {:>5}  {}",
                    display_word(w),
                    w.length(),
                    full,
                    sum
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Count {
            scenario,
            what,
            prime,
            w,
            wprime,
        } => {
            let sc = find_scenario(&scenarios, &scenario)?;
            let count = compute_count(sc, what, prime, &w, wprime.as_deref(), &opts)?;
            println!("{count}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit {
            scenario,
            what,
            w,
            wprime,
            bound,
        } => {
            let sc = find_scenario(&scenarios, &scenario)?;
            let primes = opts.primes.clone().unwrap_or_else(|| sc.primes.clone());
            let mut series = PointCountSeries::new(&sc.id, format!("{what:?} at w={w}"));
            for &p in &primes {
                match compute_count(sc, what, p, &w, wprime.as_deref(), &opts) {
                    Ok(c) => series.insert(p, c),
                    Err(e) => eprintln!("skipping p={p}: {e}"),
                }
            }
            let fit = fit_polynomial(&series, bound)?;
            println!("points: {}", points(&series));
            println!("fit: {fit}");
            println!(
                "degree: {}  monic: {}  integer coefficients: {}",
                match fit.degree {
                    Some(d) => d.to_string(),
                    None => "none (zero polynomial)".to_string(),
                },
                fit.is_monic,
                fit.is_integer_coefficients
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            suite,
            scenarios: ids,
        } => {
            let suite: SuiteName = suite.parse()?;
            let selected: Vec<&Scenario> = if ids.is_empty() {
                scenarios
                    .iter()
                    .filter(|s| s.suites.contains(&suite))
                    .collect()
            } else {
                select(&scenarios, &ids)?
            };
            let mut reports = Vec::new();
            for sc in selected {
                reports.push(verify_suite(suite, sc, &opts)?);
            }
            let report = VerificationReport::merge(reports);
            print!("{}", report.emit(format));
            Ok(exit_code(&report))
        }
        Command::Report {
            scenarios: ids,
            out,
        } => {
            let selected = select(&scenarios, &ids)?;
            let mut reports = Vec::new();
            for sc in selected {
                reports.push(run_scenario(sc, &opts)?);
            }
            let report = VerificationReport::merge(reports);
            let text = report.emit(format);
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(exit_code(&report))
        }
    }
}

fn exit_code(report: &VerificationReport) -> ExitCode {
    ExitCode::from(u8::try_from(report.exit_code()).unwrap_or(1))
}

fn display_word(w: &WeylElement) -> String {
    if w.is_identity() {
        "e".to_string()
    } else {
        w.to_string()
    }
}

fn find_scenario<'a>(
    scenarios: &'a [Scenario],
    id: &str,
) -> Result<&'a Scenario, Box<dyn std::error::Error>> {
    Ok(select(scenarios, &[id.to_string()])?.remove(0))
}

fn compute_count(
    sc: &Scenario,
    what: CountKind,
    p: u64,
    w: &str,
    wprime: Option<&str>,
    opts: &RunOptions,
) -> Result<u128, Box<dyn std::error::Error>> {
    let shape = sc
        .group
        .ok_or_else(|| format!("scenario '{}' has no matrix group", sc.id))?;
    let datum = sc.datum()?;
    let w = WeylElement::parse(&datum, w)?;
    let spec = shape.spec(p)?;
    let sweep_cap = opts.sweep_cap.unwrap_or(sc.sweep_cap);
    let orbit_cap = opts.orbit_cap.unwrap_or(sc.orbit_cap);
    match what {
        CountKind::Lusztig => {
            let h = sc.element_at(p)?;
            let tally = lusztig_cell_counts(&spec, &h, sweep_cap)?;
            Ok(tally.get(&weyl_to_perm(&w)).copied().unwrap_or(0))
        }
        CountKind::ClassCell => {
            let h = sc.element_at(p)?;
            let o = lusztig_core::chevalley::orbit(&h, &spec, orbit_cap)?;
            let tally = lusztig_core::counting::class_cell_counts(&o)?;
            Ok(tally.get(&weyl_to_perm(&w)).copied().unwrap_or(0))
        }
        CountKind::UnipotentCell => {
            let wprime = wprime.ok_or("unipotent cells need --wprime")?;
            let wprime = WeylElement::parse(&datum, wprime)?;
            let tally = unipotent_cell_counts(&spec, &wprime, sweep_cap)?;
            Ok(tally.get(&weyl_to_perm(&w)).copied().unwrap_or(0))
        }
        CountKind::GeometricCell => {
            if shape.twist != Twist::Untwisted {
                return Err("geometric cells need an untwisted group".into());
            }
            let h = sc.element_at(p)?;
            let pred = ClassPredicate::regular(&h, &spec)?;
            Ok(count_geometric_cell(&spec, &pred, &w)?)
        }
    }
}

fn points(series: &PointCountSeries) -> String {
    series
        .points()
        .map(|(p, c)| format!("{p}:{c}"))
        .collect::<Vec<_>>()
        .join(" ")
}
