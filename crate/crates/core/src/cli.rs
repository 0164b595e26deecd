//! Command-line driver: `info`, `render` and `serve`.
//!
//! Exit codes: 0 on success, 1 for input errors (unreadable or malformed
//! files, bad arguments, bind failures), 2 for pipeline errors (a step that
//! cannot be parsed or applied, or a derived view that cannot be rendered).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::ingest::{load_dataset, InputFormat, IngestError, Parsed, Source};
use crate::render::{export_image, AggStyle, Encoding, ImageFormat, Region, RenderOptions};
use crate::service::{self, AppState, ServiceConfig};
use crate::transform::{LogEntry, ViewChain};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_PIPELINE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "hapview", version, about = "Explore, filter, aggregate and render phased haplotype matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print dataset dimensions, meta-information counts and the parse report.
    Info {
        #[command(flatten)]
        input: InputArgs,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Apply a step pipeline and write the resulting image.
    Render {
        #[command(flatten)]
        input: InputArgs,
        /// Pipeline file: `{"steps": [...]}` as returned by the session log.
        #[arg(long)]
        pipeline: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Image format; defaults to the output extension, else PNG.
        #[arg(long, value_parser = parse_image_format)]
        format: Option<ImageFormat>,
        #[arg(long, default_value = "nucleotide")]
        encoding: Encoding,
        #[arg(long, default_value = "saturation")]
        agg_style: AggStyle,
        #[arg(long, default_value_t = 4)]
        cell_w: u32,
        #[arg(long, default_value_t = 4)]
        cell_h: u32,
        /// Draw cell grid lines (cells of at least 3 px).
        #[arg(long)]
        grid: bool,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long, env = "HAPVIEW_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory that dataset paths in requests are resolved against.
        #[arg(long, env = "HAPVIEW_DATA_ROOT", default_value = ".")]
        data_root: PathBuf,
        /// Idle session lifetime in seconds.
        #[arg(long, env = "HAPVIEW_SESSION_TTL", default_value_t = 3600)]
        session_ttl: u64,
        /// Largest request body in bytes.
        #[arg(long, env = "HAPVIEW_MAX_UPLOAD", default_value_t = 256 << 20)]
        max_upload: usize,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// VCF file, or IMPUTE2 haplotype file together with --samples.
    pub input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long)]
    pub input_format: Option<InputFormat>,
    /// IMPUTE2 sample file.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Subject meta-information table (repeatable).
    #[arg(long)]
    pub subject_meta: Vec<PathBuf>,
    /// Variant meta-information table (repeatable).
    #[arg(long)]
    pub variant_meta: Vec<PathBuf>,
}

fn parse_image_format(s: &str) -> Result<ImageFormat, String> {
    s.parse().map_err(|e: crate::render::RenderError| e.to_string())
}

impl InputArgs {
    pub fn load(&self) -> Result<Parsed, String> {
        let format = self
            .input_format
            .or_else(|| if self.samples.is_some() { Some(InputFormat::Impute2) } else { InputFormat::detect(&self.input) })
            .unwrap_or(InputFormat::Vcf);
        let source = match format {
            InputFormat::Vcf => Source::Vcf(&self.input),
            InputFormat::Impute2 => Source::Impute2 {
                haps: &self.input,
                samples: self.samples.as_deref().ok_or("IMPUTE2 input needs --samples")?,
            },
        };
        let subject: Vec<&Path> = self.subject_meta.iter().map(PathBuf::as_path).collect();
        let variant: Vec<&Path> = self.variant_meta.iter().map(PathBuf::as_path).collect();
        load_dataset(source, &subject, &variant).map_err(|e| match e {
            IngestError::Io(io) => format!("{}: {io}", self.input.display()),
            other => format!("{}: {other}", self.input.display()),
        })
    }
}

/// Pipeline failure, naming the offending step where there is one.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("pipeline is not valid JSON: {0}")]
    Syntax(String),
    #[error("step {index}: {message}")]
    Step { index: usize, message: String },
}

/// Parse `{"steps": [...]}` or a bare step array, reporting which step is
/// malformed.
pub fn parse_pipeline(text: &str) -> Result<ViewChain, PipelineError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| PipelineError::Syntax(e.to_string()))?;
    let steps = match value {
        serde_json::Value::Array(steps) => steps,
        serde_json::Value::Object(mut obj) => match obj.remove("steps") {
            Some(serde_json::Value::Array(steps)) => steps,
            _ => return Err(PipelineError::Syntax("expected a \"steps\" array".into())),
        },
        _ => return Err(PipelineError::Syntax("expected an object or an array".into())),
    };
    let steps = steps
        .into_iter()
        .enumerate()
        .map(|(index, step)| {
            serde_json::from_value::<LogEntry>(step).map_err(|e| PipelineError::Step { index, message: e.to_string() })
        })
        .collect::<Result<_, _>>()?;
    Ok(ViewChain { steps })
}

/// Parse arguments and run one command, writing to the given streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Info { input, json } => info(&input, json, out, err),
        Command::Render { input, pipeline, output, format, encoding, agg_style, cell_w, cell_h, grid } => {
            let opts = RenderOptions {
                encoding,
                agg_style,
                cell_width: cell_w,
                cell_height: cell_h,
                show_grid: grid,
                ..RenderOptions::default()
            };
            let format = format
                .or_else(|| output.extension().and_then(|e| e.to_str()).and_then(|e| e.parse().ok()))
                .unwrap_or(ImageFormat::Png);
            render(&input, pipeline.as_deref(), &output, format, &opts, out, err)
        }
        Command::Serve { bind, data_root, session_ttl, max_upload } => {
            let config = ServiceConfig { data_root, session_ttl: Duration::from_secs(session_ttl), max_upload };
            serve(bind, config, err)
        }
    }
}

fn info(input: &InputArgs, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let parsed = match input.load() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let s = parsed.summary();
    let result = if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&s).expect("summary serializes"))
    } else {
        let r = &s.parse_report;
        writeln!(
            out,
            "subjects: {}\nvariants: {}\nphased: {}\nMI columns: {}\nMI rows: {}\nrecords read: {}\nrecords retained: {}\nskipped (not SNV): {}\nmixed phasing: {}\nrenamed IDs: {}",
            s.n_subjects,
            s.n_variants,
            if s.phased { "yes" } else { "no" },
            s.mi_columns,
            s.mi_rows,
            r.records,
            r.retained,
            r.skipped_non_snv,
            if r.mixed_phase { "yes" } else { "no" },
            r.renamed_ids
        )
    };
    if result.is_err() {
        return EXIT_INPUT;
    }
    EXIT_OK
}

/// Render a pipeline over a dataset to image bytes. The service export
/// endpoint renders through the same [`export_image`] call.
pub fn render_pipeline(
    parsed: &Parsed,
    chain: &ViewChain,
    opts: &RenderOptions,
    format: ImageFormat,
) -> Result<Vec<u8>, String> {
    let (view, _) = chain.derive(&parsed.dataset).map_err(|e| e.to_string())?;
    export_image(&parsed.dataset, &view, opts, format, &Region::Full).map_err(|e| format!("render: {e}"))
}

fn render(
    input: &InputArgs,
    pipeline: Option<&Path>,
    output: &Path,
    format: ImageFormat,
    opts: &RenderOptions,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let parsed = match input.load() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let chain = match pipeline {
        None => ViewChain::default(),
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", path.display());
                    return EXIT_INPUT;
                }
            };
            match parse_pipeline(&text) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", path.display());
                    return EXIT_PIPELINE;
                }
            }
        }
    };
    let bytes = match render_pipeline(&parsed, &chain, opts, format) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_PIPELINE;
        }
    };
    if let Err(e) = fs::write(output, &bytes) {
        let _ = writeln!(err, "error: {}: {e}", output.display());
        return EXIT_INPUT;
    }
    let _ = writeln!(out, "wrote {} ({} bytes, {} steps)", output.display(), bytes.len(), chain.len());
    EXIT_OK
}

fn serve(bind: SocketAddr, config: ServiceConfig, err: &mut dyn Write) -> u8 {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start runtime: {e}");
            return EXIT_INPUT;
        }
    };
    runtime.block_on(async {
        let listener = match tokio::net::TcpListener::bind(bind).await {
            Ok(l) => l,
            Err(e) => {
                let _ = writeln!(err, "error: cannot bind {bind}: {e}");
                return EXIT_INPUT;
            }
        };
        let local = listener.local_addr().map_or_else(|_| bind.to_string(), |a| a.to_string());
        tracing::info!(address = %local, root = %config.data_root.display(), "listening");
        match service::serve(listener, AppState::new(config), shutdown_signal()).await {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_INPUT
            }
        }
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
