use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arac_core::annotatik::annotate_files;
use arac_core::store::Store;
use arac_server::{Config, ServerError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arac", version, about = "Arabic corpus and exercise platform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration file; ARAC_* variables override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ConfigArg),
    /// Merge a corpus archive into the configured storage.
    Import {
        archive: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Write the configured storage out as a corpus archive.
    Export {
        archive: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Match a taxonomy file against a text file and print one JSON line per
    /// annotation. Touches no storage.
    Annotate {
        text: PathBuf,
        taxonomy: PathBuf,
        #[arg(long)]
        strip_diacritics: bool,
        #[arg(long)]
        strip_tatweel: bool,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("arac: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), ServerError> {
    match cli.command {
        Command::Serve(c) => serve(Config::load(c.config.as_deref())?),
        Command::Import { archive, config } => {
            let store = open_store(config.config.as_deref())?;
            let report = store.import_corpus(&archive)?;
            print_json(&report)
        }
        Command::Export { archive, config } => {
            let store = open_store(config.config.as_deref())?;
            let manifest = store.export_corpus(&archive)?;
            print_json(&manifest)
        }
        Command::Annotate {
            text,
            taxonomy,
            strip_diacritics,
            strip_tatweel,
        } => {
            let norm = arac_core::NormalizationConfig {
                strip_diacritics,
                strip_tatweel,
                ..Default::default()
            };
            let mut out = std::io::stdout().lock();
            for a in annotate_files(&text, &taxonomy, &norm)? {
                serde_json::to_writer(&mut out, &a).map_err(arac_core::Error::from)?;
                writeln!(out)?;
            }
            Ok(())
        }
    }
}

fn open_store(config: Option<&Path>) -> Result<Store, ServerError> {
    let config = Config::load(config)?;
    Ok(Store::open(&config.storage)?)
}

fn print_json(value: &impl serde::Serialize) -> Result<(), ServerError> {
    let s = serde_json::to_string_pretty(value).map_err(arac_core::Error::from)?;
    println!("{s}");
    Ok(())
}

fn serve(config: Config) -> Result<(), ServerError> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let platform = arac_server::open_platform(&config)?;
        let listener = arac_server::bind(config.bind).await?;
        tracing::info!(addr = %listener.local_addr()?, storage = %config.storage.display(), "listening");
        arac_server::serve(listener, platform, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}
