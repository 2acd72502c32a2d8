mod config;
mod report;
mod suites;

use clap::Parser;
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Run a heislab verification suite and write its tables and summary.
#[derive(Parser, Debug)]
#[command(name = "heislab", version)]
struct Cli {
    /// laguerre-verify, means-compare, continuity, grid-build, sparse-verify,
    /// full-verify, weights-verify or regions
    suite: String,
    /// TOML configuration; every key has a default
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: out/<suite>)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text)?;
    cfg.resolve(cli.seed);
    cfg.validate(&cli.suite)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&cli.suite));
    let mut rep = match report::Report::new(&cli.suite, &out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("cannot create {}: {e}", out.display());
            return ExitCode::from(1);
        }
    };
    let resolved = toml::to_string(&cfg).expect("config serializes");
    if let Err(e) = std::fs::write(out.join("config.toml"), resolved) {
        eprintln!("cannot write config: {e}");
        return ExitCode::from(1);
    }
    rep.files.push("config.toml".into());
    let res = suites::run(&cli.suite, &cfg, &mut rep);
    if let Err(e) = &res {
        rep.check("suite completed", false, e.to_string());
    }
    if let Err(e) = rep.finish(&cfg) {
        eprintln!("cannot write summary: {e}");
        return ExitCode::from(1);
    }
    for a in &rep.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    if rep.passed() {
        println!("{}: {} assertions passed, output in {}", cli.suite, rep.assertions.len(), out.display());
        ExitCode::SUCCESS
    } else {
        eprintln!("{}: {} of {} assertions failed", cli.suite, rep.failures().count(), rep.assertions.len());
        for a in rep.failures() {
            eprintln!("  failed: {} ({})", a.name, a.detail);
        }
        ExitCode::from(1)
    }
}
