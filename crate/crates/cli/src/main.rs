use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use vlmbench::backend::mock::serve_mock;
use vlmbench::BackendKind;
use vlmbench::batch::{BatchError, ImageProgress, ResultsTable};
use vlmbench::metrics::{evaluate, rank_models, ranking_csv, GroundTruth, MetricReport, MetricsError, ReportConfig};
use vlmbench::{run_batch, BackendClient, RunConfig, RunOptions};

/// Config-driven benchmark harness for vision-language models.
#[derive(Parser)]
#[command(name = "vlmbench", version)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task on every image, resuming an existing results file.
    Run(RunArgs),
    /// Score a results CSV against ground truth.
    Report {
        results: PathBuf,
        truth: PathBuf,
        config: PathBuf,
    },
    /// Check a run config and print it in normalized form.
    Validate { config: PathBuf },
    /// Serve canned replies from a fixture file on 127.0.0.1 (port 0 picks one).
    MockServe { fixtures: PathBuf, port: u16 },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overwrite the output file instead of resuming it.
    #[arg(long)]
    fresh: bool,
    /// Images processed concurrently.
    #[arg(long)]
    parallel: Option<usize>,
    /// Stop after this many scheduled images.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, env = "VLM_HARNESS_BACKEND_URL")]
    backend_url: Option<String>,
    #[arg(long)]
    backend_kind: Option<BackendKind>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout: Option<u64>,
    /// Retries after a transport failure or 5xx reply.
    #[arg(long)]
    retries: Option<u32>,
}

/// A failed command and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn runtime(e: impl Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn batch_failure(e: BatchError) -> Failure {
    match e {
        BatchError::ImageDir { .. } | BatchError::OutputDir(_) | BatchError::SchemaConflict { .. } => usage(e),
        _ => runtime(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let default_level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .init();

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start async runtime: {e}");
            return ExitCode::from(2);
        }
    };
    let result = runtime.block_on(async {
        match cli.command {
            Command::Run(args) => cmd_run(args).await,
            Command::Report { results, truth, config } => cmd_report(&results, &truth, &config),
            Command::Validate { config } => cmd_validate(&config),
            Command::MockServe { fixtures, port } => cmd_mock_serve(&fixtures, port).await,
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_run_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::from_path(&args.config).map_err(usage)?;
    if let Some(url) = &args.backend_url {
        config.backend.url.clone_from(url);
    }
    if let Some(kind) = args.backend_kind {
        config.backend.kind = kind;
    }
    if let Some(secs) = args.timeout {
        config.backend.request_timeout = Duration::from_secs(secs);
    }
    if let Some(n) = args.retries {
        config.backend.max_retries = n;
    }
    if let Some(n) = args.parallel {
        config.parallel_images = n;
    }
    config.validate().map_err(usage)?;
    Ok(config)
}

async fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let config = load_run_config(&args)?;
    let client = BackendClient::new(config.backend.clone()).map_err(runtime)?;
    let options = RunOptions {
        fresh: args.fresh,
        image_limit: args.limit,
        progress: Some(Arc::new(|p: &ImageProgress| {
            println!(
                "[{}/{}] {}: {} tasks, {} NA, {} truncated",
                p.completed, p.scheduled, p.image, p.tasks_run, p.na_tasks, p.truncated_tasks
            );
        })),
    };
    println!("output: {}", config.output_csv.display());
    let summary = tokio::select! {
        r = run_batch(&config, &client, &options) => r.map_err(batch_failure)?,
        _ = tokio::signal::ctrl_c() => {
            return Err(runtime(format!(
                "interrupted; completed rows are kept in {} and the next run resumes from there",
                config.output_csv.display()
            )));
        }
    };
    println!(
        "{} images scheduled ({} found): {} processed, {} NA task cells, {} truncated",
        summary.images_scheduled, summary.images_total, summary.images_processed, summary.na_tasks, summary.truncated_tasks
    );
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let config = RunConfig::from_path(path).map_err(usage)?;
    print!("{}", config.render());
    Ok(())
}

async fn cmd_mock_serve(fixtures: &Path, port: u16) -> Result<(), Failure> {
    let server = serve_mock(fixtures, port).await.map_err(usage)?;
    println!("listening on {}", server.addr());
    tokio::signal::ctrl_c().await.map_err(runtime)?;
    server.shutdown().await;
    Ok(())
}

fn model_report(name: &str, results: &Path, truth: &GroundTruth, cfg: &ReportConfig) -> Result<MetricReport, Failure> {
    let table = ResultsTable::read_csv(results).map_err(usage)?;
    evaluate(name, &table, truth, &cfg.tasks).map_err(|e| match e {
        MetricsError::UnknownImages(_) => usage(format!("{}: {e}", results.display())),
        _ => usage(e),
    })
}

fn cmd_report(results: &Path, truth: &Path, cfg_path: &Path) -> Result<(), Failure> {
    let cfg = ReportConfig::from_path(cfg_path).map_err(usage)?;
    let truth = GroundTruth::read_csv(truth).map_err(usage)?;
    let name = cfg.model.clone().unwrap_or_else(|| {
        results
            .file_stem()
            .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
    });
    let mut reports = vec![model_report(&name, results, &truth, &cfg)?];
    for m in &cfg.models {
        reports.push(model_report(&m.name, &m.results, &truth, &cfg)?);
    }
    let ranking = rank_models(
        &reports
            .iter()
            .map(|r| (r.model.clone(), r.proximities()))
            .collect::<Vec<_>>(),
    )
    .map_err(usage)?;

    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| {
        results
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf()
    });
    std::fs::create_dir_all(&out_dir).map_err(|e| runtime(format!("{}: {e}", out_dir.display())))?;

    let mut metrics = String::new();
    let mut text = String::new();
    for (i, r) in reports.iter().enumerate() {
        let csv = r.to_csv();
        // Keep a single header line across models.
        metrics.push_str(if i == 0 { &csv } else { csv.split_once('\n').map_or("", |(_, rest)| rest) });
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&r.render_text());
    }
    let write = |file: &str, body: &str| {
        let path = out_dir.join(file);
        std::fs::write(&path, body).map_err(|e| runtime(format!("{}: {e}", path.display())))
    };
    write("metrics.csv", &metrics)?;
    write("ranking.csv", &ranking_csv(&ranking))?;
    write("report.txt", &text)?;

    print!("{text}");
    println!("overall proximity: {:.1}", reports[0].overall_proximity * 100.0);
    println!("wrote metrics.csv, ranking.csv and report.txt to {}", out_dir.display());
    Ok(())
}
