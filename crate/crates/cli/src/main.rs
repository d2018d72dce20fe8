use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use afdm_pim::analysis::{check_full_diversity_conditions, n0_from_snr_db};
use afdm_pim::io::{format_alphabet, format_pso_log, write_alphabet};
use afdm_pim::sim::run_ber_sweep_with;
use afdm_pim::validate::{run_suites, Suite};
use afdm_pim::{
    diversity_order_in, pso_optimize, spectral_efficiency, AbepEvaluator, ConfigFile, GeometrySet, ObjectiveContext,
    PhiDomain, Preset, PsoParams, RandomSource, Scheme, DEFAULT_CAP_BITS,
};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "afdm-pim", version, about = "Pre-chirp index-modulated AFDM simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo BER sweep; CSV on stdout or to --out.
    Simulate {
        /// TOML configuration file.
        config: Option<PathBuf>,
        /// Built-in scenario instead of a configuration file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long, env = "SIM_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the theory rows of the scenario.
        #[arg(long, value_enum)]
        theory: Option<GeometryArg>,
    },
    /// Pre-chirp alphabet design by particle swarm.
    Optimize {
        config: PathBuf,
        /// TOML file with swarm parameters; defaults to the config's [pso] table.
        #[arg(long)]
        pso_params: Option<PathBuf>,
        /// Alphabet file to write; printed to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Convergence log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, env = "SIM_SEED", default_value_t = 1)]
        seed: u64,
    },
    /// Error bound, diversity order and spectral efficiency. With no
    /// selection flag all three are printed.
    Analyze {
        config: PathBuf,
        #[arg(long)]
        bound: bool,
        #[arg(long)]
        diversity: bool,
        #[arg(long)]
        se: bool,
        /// Geometry distribution. The bound defaults to the simulator's
        /// Jakes law, the rank scan to distinct placements.
        #[arg(long, value_enum)]
        geometry: Option<GeometryArg>,
        #[arg(long, value_enum, default_value_t = DomainArg::Time)]
        domain: DomainArg,
        /// Active subcarriers per group for the subcarrier-activation SE;
        /// defaults to half the group.
        #[arg(long)]
        active: Option<usize>,
    },
    /// Built-in property checks.
    Validate {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Jakes,
    Placements,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Time,
    Daft,
}

impl From<DomainArg> for PhiDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Time => PhiDomain::Time,
            DomainArg::Daft => PhiDomain::Daft,
        }
    }
}

fn geometry_set(arg: GeometryArg, file: &ConfigFile) -> Result<GeometrySet> {
    let cfg = file.config()?;
    Ok(match arg {
        GeometryArg::Jakes => GeometrySet::jakes(&cfg, file.channel.paths),
        GeometryArg::Placements => GeometrySet::placements(&cfg, file.channel.paths),
        GeometryArg::None => bail!("a geometry distribution is required"),
    })
}

fn load(path: &Path) -> Result<ConfigFile> {
    ConfigFile::load(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn simulate(
    config: Option<PathBuf>,
    preset: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    theory: Option<GeometryArg>,
) -> Result<ExitCode> {
    let mut sc = match (config, preset) {
        (Some(c), None) => load(&c)?.scenario(seed)?,
        (None, Some(p)) => {
            let mut sc = afdm_pim::preset_scenario(Preset::from_name(&p)?);
            if let Some(s) = seed {
                sc.seed = s;
            }
            sc
        }
        _ => bail!("give a configuration file or --preset"),
    };
    if let Some(t) = theory {
        sc.theory = match t {
            GeometryArg::Jakes => afdm_pim::TheoryMode::Jakes,
            GeometryArg::Placements => afdm_pim::TheoryMode::Placements,
            GeometryArg::None => afdm_pim::TheoryMode::None,
        };
    }
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)).context("installing interrupt handler")?;
    }
    let result = run_ber_sweep_with(&sc, &stop, |p| {
        eprintln!("{} {} dB: {} errors / {} bits", p.kind.as_str(), p.snr_db, p.errors, p.bits);
    })?;
    write_or_print(out.as_deref(), &result.to_csv())?;
    if result.interrupted {
        eprintln!("interrupted: partial results written");
        return Ok(ExitCode::from(130));
    }
    Ok(ExitCode::SUCCESS)
}

fn optimize(config: PathBuf, pso_params: Option<PathBuf>, out: Option<PathBuf>, log: Option<PathBuf>, seed: u64) -> Result<()> {
    let file = load(&config)?;
    let params: PsoParams = match pso_params {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => file.pso,
    };
    let ctx = ObjectiveContext::new(&file.config()?, file.channel.paths)?;
    let res = pso_optimize(&ctx, &params, &mut RandomSource::new(seed, 0).rng())?;
    if res.degenerate {
        eprintln!("no index pairs to separate: returning the single-value alphabet unchanged");
    }
    eprintln!("min-pair objective: optimized {:.6e}, uniform {:.6e}", res.fitness, res.heuristic_fitness);
    match out {
        Some(p) => write_alphabet(&p, &res.alphabet).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", format_alphabet(&res.alphabet)),
    }
    if let Some(p) = log {
        std::fs::write(&p, format_pso_log(&res.log)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn analyze(
    config: PathBuf,
    mut bound: bool,
    mut diversity: bool,
    mut se: bool,
    geometry: Option<GeometryArg>,
    domain: DomainArg,
    active: Option<usize>,
) -> Result<()> {
    if !(bound || diversity || se) {
        (bound, diversity, se) = (true, true, true);
    }
    let file = load(&config)?;
    let cfg = file.config()?;
    if se {
        let order = cfg.order();
        let a = active.unwrap_or((cfg.n_c / 2).max(1));
        if a > cfg.n_c {
            bail!("--active {a} exceeds the group size {}", cfg.n_c);
        }
        println!("se_afdm,{}", spectral_efficiency(Scheme::Afdm { order }));
        println!(
            "se_afdm_im,{}",
            spectral_efficiency(Scheme::AfdmIm {
                n: cfg.n_c,
                active: a,
                order
            })
        );
        println!("se_afdm_pim,{}", spectral_efficiency(Scheme::AfdmPim { n_c: cfg.n_c, order }));
    }
    if bound || diversity {
        let alphabet = file.alphabet()?;
        if diversity {
            let geoms = geometry_set(geometry.unwrap_or(GeometryArg::Placements), &file)?;
            let cond = check_full_diversity_conditions(&cfg, file.channel.paths);
            let r = diversity_order_in(&cfg, &alphabet, &geoms, DEFAULT_CAP_BITS, domain.into())?;
            println!("diversity_order,{}", r.mu);
            println!("paths,{}", file.channel.paths);
            println!("worst_pair,{},{}", r.worst_pair.0, r.worst_pair.1);
            let g: Vec<String> = r.worst_geometry.iter().map(|g| format!("({} {})", g.delay, g.doppler)).collect();
            println!("worst_geometry,{}", g.join(" "));
            println!("pairs_checked,{}", r.pairs_checked);
            println!("separable_cells,{}", cond.condition1);
        }
        if bound {
            let geoms = geometry_set(geometry.unwrap_or(GeometryArg::Jakes), &file)?;
            let eval = AbepEvaluator::with_domain(&cfg, &alphabet, &geoms, DEFAULT_CAP_BITS, domain.into())?;
            println!("snr_db,abep_bound");
            for &s in file.simulation.snr_db.iter().filter(|s| s.is_finite()) {
                println!("{s},{:.11e}", eval.bound(n0_from_snr_db(s)).bound);
            }
        }
    }
    Ok(())
}

fn validate(suite: &str) -> Result<ExitCode> {
    let results = run_suites(&Suite::from_name(suite)?)?;
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed} passed, {} failed", results.len() - passed);
    Ok(if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            preset,
            seed,
            out,
            theory,
        } => simulate(config, preset, seed, out, theory),
        Command::Optimize {
            config,
            pso_params,
            out,
            log,
            seed,
        } => optimize(config, pso_params, out, log, seed).map(|_| ExitCode::SUCCESS),
        Command::Analyze {
            config,
            bound,
            diversity,
            se,
            geometry,
            domain,
            active,
        } => analyze(config, bound, diversity, se, geometry, domain, active).map(|_| ExitCode::SUCCESS),
        Command::Validate { suite } => validate(&suite),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
