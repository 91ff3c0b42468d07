use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nscarleman::carleman::LemmaId;
use nscarleman_cli::commands::{run, Command};
use nscarleman_cli::config::{parse_list, RunConfig};
use nscarleman_cli::{thread_cap, CliError};

#[derive(Parser)]
#[command(name = "nscarleman", version, about = "Carleman-estimate laboratory for linearized Navier-Stokes inverse source problems")]
struct Cli {
    /// Configuration file with [domain], [weights], [carleman], ... sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated Carleman parameters.
    #[arg(long, global = true)]
    s: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Cells per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Time steps.
    #[arg(long, global = true)]
    nt: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Build and certify the weight functions.
    Weights,
    /// Solve a manufactured forward problem and check residuals.
    Forward {
        #[arg(long)]
        problem: Option<String>,
    },
    /// Sweep both sides of a Carleman estimate over s.
    Carleman {
        /// lemma1, lemma2 or lemma3.
        lemma: String,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        problem: Option<String>,
        /// `one` or `box:x0,y0,x1,y1`.
        #[arg(long)]
        g: Option<String>,
    },
    /// Ratio of source norm to observation norm over random admissible sources.
    Stability {
        #[arg(long)]
        sources: Option<usize>,
        #[arg(long)]
        m_bound: Option<f64>,
        /// Interior window `start,end` as fractions of the horizon.
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// Gradient source with vanishing observations.
    Obstruction {
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Check the two worked examples of admissible source families.
    Examples,
    /// Turn a CSV table into an SVG plot or JSON records.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "s")]
        x: String,
        /// Comma-separated columns.
        #[arg(long, default_value = "ratio")]
        y: String,
        /// svg or json.
        #[arg(long, default_value = "svg")]
        format: String,
        /// Linear axes instead of log-log.
        #[arg(long)]
        linear: bool,
    },
}

fn configure(cli: Cli) -> Result<(Command, RunConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = &cli.s {
        cfg.carleman.s = parse_list(s).map_err(|e| CliError::Config(format!("--s: {e}")))?;
    }
    if let Some(l) = cli.lambda {
        cfg.weights.lambda = l;
    }
    if let Some(n) = cli.grid {
        cfg.domain.grid = n;
    }
    if let Some(n) = cli.nt {
        cfg.domain.steps = n;
    }
    cfg.plots |= cli.plots;
    let cmd = match cli.command {
        Sub::Weights => Command::Weights,
        Sub::Forward { problem } => {
            if let Some(p) = problem {
                cfg.forward.problem = p;
            }
            Command::Forward
        }
        Sub::Carleman { lemma, m, problem, g } => {
            if let Some(m) = m {
                cfg.carleman.m = m;
            }
            if let Some(p) = problem {
                cfg.carleman.problem = p;
            }
            if let Some(g) = g {
                cfg.carleman.g = g;
            }
            Command::Carleman(LemmaId::parse(&lemma)?)
        }
        Sub::Stability { sources, m_bound, window, amplitude } => {
            let st = &mut cfg.stability;
            if let Some(n) = sources {
                st.sources = n;
            }
            if let Some(m) = m_bound {
                st.m_bound = m;
            }
            if let Some(a) = amplitude {
                st.amplitude = a;
            }
            if let Some(w) = window {
                let v = parse_list(&w).map_err(|e| CliError::Config(format!("--window: {e}")))?;
                if v.len() != 2 {
                    return Err(CliError::Config("--window takes start,end".into()));
                }
                st.window = Some((v[0], v[1]));
            }
            Command::Stability
        }
        Sub::Obstruction { amplitude, radius } => {
            if let Some(a) = amplitude {
                cfg.obstruction.amplitude = a;
            }
            if let Some(r) = radius {
                cfg.obstruction.radius = r;
            }
            Command::Obstruction
        }
        Sub::Examples => Command::Examples,
        Sub::Report { input, x, y, format, linear } => {
            let json = match format.as_str() {
                "svg" => false,
                "json" => true,
                other => return Err(CliError::Config(format!("--format must be svg or json, got '{other}'"))),
            };
            let y = y.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
            Command::Report { input, x, y, json, linear }
        }
    };
    Ok((cmd, cfg))
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    if let Some(n) = thread_cap()? {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (cmd, cfg) = configure(cli)?;
    run(&cmd, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
