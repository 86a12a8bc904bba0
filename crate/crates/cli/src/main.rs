//! `mmforge` command-line front end.
//!
//! Failures print one JSON object `{"error": kind, "message": ...}` on
//! stderr and exit nonzero: 1 for runtime errors, 2 for usage errors, 3 when
//! a dataset build finished but some entries failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mmforge_core::dataset_pipeline::{
    build_dataset, randomization_for, read_spectrogram, render_png, run_pipeline, write_spectrogram, BuildOptions,
    Colormap, DatasetManifest, ProcessingParams, MANIFEST_FILE,
};
use mmforge_core::domain_randomization::{sample_plan, RandomizationConfig};
use mmforge_core::em_synthesis::write_cube;
use mmforge_core::mesh_motion::load_mesh_sequence;
use mmforge_core::radar_model::RadarFile;
use mmforge_core::scenario_text::{
    expand_grammar, llm_generate_prompts, LlmEndpoint, PromptStyle, ScenarioRequest, SynonymLexicon, TOKEN_ENV_VAR,
};
use mmforge_core::{sidecar_path, Error};

#[derive(Parser)]
#[command(name = "mmforge", version, about = "Synthetic mmWave radar data from human motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one motion into a spectrogram, plan and preview.
    Synth {
        /// Motion manifest (`motion.json`) or the directory holding it.
        #[arg(long)]
        motion: PathBuf,
        /// Radar settings; built-in defaults when omitted.
        #[arg(long)]
        radar: Option<PathBuf>,
        /// Randomization config; built-in defaults when omitted.
        #[arg(long)]
        rand: Option<PathBuf>,
        /// Processing parameters (smoothing, material, micro-Doppler).
        #[arg(long)]
        processing: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the raw IF cube (large).
        #[arg(long)]
        cube: bool,
    },
    /// Dataset operations.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Generate motion prompts from a scenario description.
    Prompts {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value_t = StyleArg::Diverse)]
        style: StyleArg,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Chat-completion base URL, e.g. http://host:8000/v1. The bearer
        /// token is read from the MMFORGE_LLM_TOKEN environment variable.
        #[arg(long)]
        llm_endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        /// Fail instead of falling back to the offline grammar.
        #[arg(long)]
        no_fallback: bool,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Render a spectrogram file as PNG.
    Plot {
        spectrogram: PathBuf,
        #[arg(long)]
        png: PathBuf,
        #[arg(long, value_enum, default_value_t = ColormapArg::Viridis)]
        colormap: ColormapArg,
    },
    /// Print the sidecar of a payload file, a JSON file, or a manifest summary.
    Inspect { file: PathBuf },
}

#[derive(Subcommand)]
enum DatasetCommand {
    Build {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        fail_fast: bool,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Template,
    Diverse,
    Complex,
}

impl From<StyleArg> for PromptStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Template => PromptStyle::Template,
            StyleArg::Diverse => PromptStyle::Diverse,
            StyleArg::Complex => PromptStyle::Complex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ColormapArg {
    Viridis,
    Gray,
}

impl From<ColormapArg> for Colormap {
    fn from(c: ColormapArg) -> Self {
        match c {
            ColormapArg::Viridis => Colormap::Viridis,
            ColormapArg::Gray => Colormap::Gray,
        }
    }
}

/// Failure reported to the user.
struct Failure {
    kind: String,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind().into(),
            message: e.to_string(),
            code: 1,
        }
    }
}

type CliResult = std::result::Result<Value, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            report(&Failure {
                kind: "usage".into(),
                message: message.lines().next().unwrap_or_default().trim_start_matches("error: ").into(),
                code: 2,
            });
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}

fn report(f: &Failure) {
    eprintln!("{}", json!({"error": f.kind, "message": f.message}));
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Synth {
            motion,
            radar,
            rand,
            processing,
            seed,
            out,
            cube,
        } => synth(&motion, radar.as_deref(), rand.as_deref(), processing.as_deref(), seed, &out, cube),
        Command::Dataset {
            command:
                DatasetCommand::Build {
                    spec,
                    out,
                    seed,
                    fail_fast,
                    threads,
                },
        } => dataset_build(&spec, &out, seed, BuildOptions { fail_fast, threads }),
        Command::Prompts {
            scenario,
            style,
            count,
            seed,
            llm_endpoint,
            model,
            no_fallback,
            lexicon,
        } => {
            let req = ScenarioRequest::new(scenario, count, style.into())?;
            let lex = match lexicon {
                Some(p) => SynonymLexicon::load(p)?,
                None => SynonymLexicon::builtin(),
            };
            let prompts = match llm_endpoint {
                Some(url) => {
                    let mut ep = LlmEndpoint {
                        base_url: url,
                        token_env: TOKEN_ENV_VAR.into(),
                        fallback_to_grammar: !no_fallback,
                        ..LlmEndpoint::default()
                    };
                    if let Some(m) = model {
                        ep.model = m;
                    }
                    llm_generate_prompts(&req, &ep, &lex, seed)?
                }
                None => expand_grammar(&req, &lex, seed)?,
            };
            for p in &prompts {
                println!("{}", serde_json::to_string(p).expect("prompt serializes"));
            }
            Ok(Value::Null)
        }
        Command::Plot {
            spectrogram,
            png,
            colormap,
        } => {
            let s = read_spectrogram(&spectrogram)?;
            render_png(&s, &png, colormap.into())?;
            Ok(json!({"png": png, "width": s.width, "height": s.height}))
        }
        Command::Inspect { file } => inspect(&file),
    }
}

fn synth(
    motion: &Path,
    radar: Option<&Path>,
    rand: Option<&Path>,
    processing: Option<&Path>,
    seed: u64,
    out: &Path,
    with_cube: bool,
) -> CliResult {
    let motion = if motion.is_dir() {
        motion.join("motion.json")
    } else {
        motion.to_path_buf()
    };
    let seq = load_mesh_sequence(&motion)?;
    let radar = match radar {
        Some(p) => RadarFile::load(p)?,
        None => RadarFile::default(),
    };
    let rand = match rand {
        Some(p) => RandomizationConfig::load(p)?,
        None => RandomizationConfig::default(),
    };
    let params: ProcessingParams = match processing {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::json(p, e))?
        }
        None => ProcessingParams::default(),
    };
    let plan = sample_plan(&randomization_for(&radar, &rand), seed, &seq.topology().segment_ids())?;
    let started = std::time::Instant::now();
    let result = run_pipeline(&seq, &radar.config, &plan, &params)?;
    let elapsed = started.elapsed().as_secs_f64();

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let spectrogram = out.join("spectrogram.f32");
    write_spectrogram(&result.db, &spectrogram)?;
    plan.save(out.join("plan.json"))?;
    render_png(&result.db, out.join("spectrogram.png"), Colormap::Viridis)?;
    let mut summary = json!({
        "spectrogram": spectrogram,
        "plan": out.join("plan.json"),
        "png": out.join("spectrogram.png"),
        "frames": result.db.height,
        "doppler_bins": result.db.width,
        "duration_s": seq.duration(),
        "facets": seq.topology().facet_count(),
        "synthesis_s": elapsed,
    });
    if with_cube {
        let path = out.join("cube.f32");
        write_cube(&result.cube, &path)?;
        summary["cube"] = json!(path);
    }
    Ok(summary)
}

fn dataset_build(spec: &Path, out: &Path, seed: u64, options: BuildOptions) -> CliResult {
    let m = build_dataset(spec, out, seed, options)?;
    if !m.errors.is_empty() {
        let ids: Vec<&str> = m.errors.iter().map(|e| e.id.as_str()).collect();
        return Err(Failure {
            kind: "entries_failed".into(),
            message: format!(
                "{} of {} entries failed ({}); see {}",
                m.errors.len(),
                m.errors.len() + m.entries.len(),
                ids.join(", "),
                out.join(MANIFEST_FILE).display()
            ),
            code: 3,
        });
    }
    Ok(json!({"manifest": out.join(MANIFEST_FILE), "entries": m.entries.len(), "errors": 0}))
}

fn inspect(file: &Path) -> CliResult {
    fs::metadata(file).map_err(|e| Error::io(file, e))?;
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or_default();
    match ext {
        "jsonl" => {
            let m = DatasetManifest::read(file)?;
            Ok(json!({
                "header": m.header,
                "entries": m.entries.len(),
                "ids": m.entries.iter().map(|e| &e.id).collect::<Vec<_>>(),
                "errors": m.errors,
            }))
        }
        "json" => read_json_value(file),
        _ => {
            let side = sidecar_path(file);
            let value = read_json_value(&side)?;
            let floats = fs::metadata(file).map_err(|e| Error::io(file, e))?.len() / 4;
            let expected = if let (Some(h), Some(w)) = (value["H"].as_u64(), value["W"].as_u64()) {
                Some(h * w)
            } else if let (Some(f), Some(c), Some(s)) =
                (value["frames"].as_u64(), value["chirps"].as_u64(), value["samples"].as_u64())
            {
                Some(2 * f * c * s)
            } else {
                None
            };
            if let Some(expected) = expected.filter(|&e| e != floats) {
                return Err(Error::SizeMismatch {
                    expected: expected as usize,
                    actual: floats as usize,
                }
                .into());
            }
            Ok(value)
        }
    }
}

fn read_json_value(path: &Path) -> CliResult {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    Ok(v)
}
