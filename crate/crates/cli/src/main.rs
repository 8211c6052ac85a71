use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use adv_se::config::{parse_grid, preset, PRESETS, SEED_ENV};
use adv_se::output::write_rows;
use adv_se::{run, ExperimentConfig, Format, Mode, UsageError};
use advse::exec::with_jobs;
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "adv-se", version, about = "State-evolution sweeps and finite-size comparisons for adversarially trained linear classifiers")]
struct Cli {
    mode: Mode,
    /// Named parameter set; see --list-presets.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON experiment file. Flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma list or log:lo:hi:count.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "eps-t")]
    eps_t: Option<String>,
    #[arg(long = "eps-g")]
    eps_g: Option<f64>,
    /// Ridge strength; in asymptotic mode the coefficient of alpha.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long = "test-size")]
    test_size: Option<usize>,
    /// Enables the class-preserving error with this teacher-margin threshold.
    #[arg(long)]
    gamma: Option<f64>,
    /// Square-root and quadratic penalty weights for surrogate mode.
    #[arg(long, value_name = "L1,L2")]
    surrogate: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    list_presets: bool,
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

fn build(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = if let Some(path) = &cli.config {
        let s = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let mut c = ExperimentConfig::from_json(&s)?;
        c.mode = cli.mode;
        c
    } else if let Some(name) = &cli.preset {
        let p = preset(name).ok_or_else(|| Failure::Usage(format!("unknown preset '{name}'")))?;
        ExperimentConfig::from_preset(cli.mode, p)
    } else {
        return Err(Failure::Usage("one of --preset or --config is required".into()));
    };
    if let Some(s) = &cli.alpha {
        cfg.alpha = parse_grid(s)?;
    }
    if let Some(s) = &cli.eps_t {
        cfg.eps_t = parse_grid(s)?;
    }
    if let Some(v) = cli.eps_g {
        cfg.eps_g = v;
    }
    if let Some(v) = cli.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = cli.tau {
        cfg.tau = v;
    }
    if let Some(v) = cli.d {
        cfg.d = v;
    }
    if let Some(v) = cli.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = cli.test_size {
        cfg.test_size = v;
    }
    if cli.gamma.is_some() {
        cfg.gamma = cli.gamma;
    }
    if let Some(s) = &cli.surrogate {
        let w = parse_grid(s)?;
        if w.len() != 2 {
            return Err(Failure::Usage("--surrogate takes two weights".into()));
        }
        cfg.surrogate = (w[0], w[1]);
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.base_seed = s.trim().parse().map_err(|_| Failure::Usage(format!("{SEED_ENV} must be an unsigned integer")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_presets {
        for p in PRESETS {
            println!("{}", p.name);
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match build(&cli) {
        Ok(c) => c,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(3);
        }
    };
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be positive");
        return ExitCode::from(2);
    }

    let rows = with_jobs(cli.jobs, || run(&cfg));

    let written = match &cfg.out {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_rows(&mut w, &rows, cfg.format)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_rows(&mut w, &rows, cfg.format).and_then(|_| w.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(3);
    }

    let failed = rows.iter().filter(|r| r.failed()).count();
    for r in rows.iter().filter(|r| r.failed()) {
        eprintln!("warning: alpha={} eps_t={}: {}", r.alpha, r.eps_t, r.error.as_deref().unwrap_or(""));
    }
    if !rows.is_empty() && failed == rows.len() {
        eprintln!("error: every row failed");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
