//! Batch front end: `run`, `resume`, `ineq-sweep` and `validate` verbs over
//! INI config files. One experiment per process; artifacts land in the
//! configured (or overridden) output directory.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use amhd::config::{parse_config, RunConfig};
use amhd::experiment::{ineq_sweep, resume_experiment, run_experiment};

const USAGE: &str = "\
usage: amhd <verb> [paths] [flags]

verbs:
  run        <config>              integrate a configured experiment
  resume     <checkpoint> <config> continue a checkpointed run to t_end
  ineq-sweep <config>              trilinear inequality ensemble report
  validate   <config>              parse and echo the resolved config

flags:
  --output-dir <dir>   override [output] dir
  --seed-override <n>  override [init] seed
  --quiet              suppress progress output

exit status: 0 success, 1 usage or configuration error, 2 run terminated
by a dynamics guard (the manifest names the cause).";

struct Cli {
    verb: String,
    paths: Vec<PathBuf>,
    output_dir: Option<PathBuf>,
    seed_override: Option<u64>,
    quiet: bool,
}

fn parse_args(mut args: std::env::Args) -> Result<Cli, String> {
    let _ = args.next(); // program name
    let mut cli = Cli {
        verb: String::new(),
        paths: Vec::new(),
        output_dir: None,
        seed_override: None,
        quiet: false,
    };
    let mut it = args.peekable();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--quiet" => cli.quiet = true,
            "--output-dir" => {
                let v = it.next().ok_or("--output-dir needs a directory argument")?;
                cli.output_dir = Some(PathBuf::from(v));
            }
            "--seed-override" => {
                let v = it.next().ok_or("--seed-override needs an integer argument")?;
                cli.seed_override =
                    Some(v.parse().map_err(|_| format!("--seed-override: bad integer '{v}'"))?);
            }
            "-h" | "--help" => return Err(String::new()),
            other if other.starts_with('-') => return Err(format!("unknown flag '{other}'")),
            other => {
                if cli.verb.is_empty() {
                    cli.verb = other.to_string();
                } else {
                    cli.paths.push(PathBuf::from(other));
                }
            }
        }
    }
    if cli.verb.is_empty() {
        return Err(String::new());
    }
    Ok(cli)
}

fn load_config(cli: &Cli, path: &PathBuf) -> Result<RunConfig, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(dir) = &cli.output_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn one_path<'a>(cli: &'a Cli, what: &str) -> Result<&'a PathBuf, String> {
    match cli.paths.as_slice() {
        [p] => Ok(p),
        _ => Err(format!("{} takes exactly one path argument", what)),
    }
}

fn run_cli(cli: &Cli) -> Result<ExitCode, String> {
    match cli.verb.as_str() {
        "run" => {
            let cfg = load_config(cli, one_path(cli, "run")?)?;
            let art = run_experiment(&cfg, cli.quiet).map_err(|e| e.to_string())?;
            if art.termination.is_normal() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "run terminated at t = {}: {} (manifest: {})",
                    art.t_final,
                    art.termination.name(),
                    art.manifest_path.display()
                );
                Ok(ExitCode::from(2))
            }
        }
        "resume" => {
            let (ckpt, cfg_path) = match cli.paths.as_slice() {
                [a, b] => (a, b),
                _ => return Err("resume takes a checkpoint path and a config path".into()),
            };
            let cfg = load_config(cli, cfg_path)?;
            let art = resume_experiment(ckpt, &cfg, cli.quiet).map_err(|e| e.to_string())?;
            if art.termination.is_normal() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "resume terminated at t = {}: {} (manifest: {})",
                    art.t_final,
                    art.termination.name(),
                    art.manifest_path.display()
                );
                Ok(ExitCode::from(2))
            }
        }
        "ineq-sweep" => {
            let cfg = load_config(cli, one_path(cli, "ineq-sweep")?)?;
            ineq_sweep(&cfg, cli.quiet).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        "validate" => {
            let cfg = load_config(cli, one_path(cli, "validate")?)?;
            if !cli.quiet {
                println!("config ok");
                println!("  grid      n = {} {} {}", cfg.n[0], cfg.n[1], cfg.n[2]);
                println!("  box       l = {} {} {}", cfg.l[0], cfg.l[1], cfg.l[2]);
                println!(
                    "  physics   mu = {}  lambda = {}  sigma = {}  gamma = {}",
                    cfg.params.mu, cfg.params.lambda, cfg.params.sigma, cfg.params.gamma
                );
                println!(
                    "  init      preset = {}  epsilon = {}  seed = {}",
                    cfg.preset.name(),
                    cfg.epsilon,
                    cfg.seed
                );
                match cfg.dt {
                    Some(dt) => println!("  time      dt = {dt}  t_end = {}", cfg.t_end),
                    None => println!("  time      dt = (derived)  t_end = {}", cfg.t_end),
                }
                println!("  output    dir = {}", cfg.out_dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        other => Err(format!("unknown verb '{other}'")),
    }
}

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args()) {
        Ok(cli) => cli,
        Err(msg) => {
            if msg.is_empty() {
                eprintln!("{USAGE}");
            } else {
                eprintln!("error: {msg}\n\n{USAGE}");
            }
            return ExitCode::from(1);
        }
    };
    match run_cli(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
