use crate::config::{params_from_args, ConfigFile, Format, RunConfig};
use crate::error::CliError;
use crate::output::{write_outcome, Constants, ErrorRecord, RunManifest, MANIFEST_FILE};
use crate::scenarios::{lookup, registry, Scenario};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "ionsim", version, about = "Run trapped-ion simulation scenarios and write data files with a run manifest")]
#[command(after_help = "Scenario parameters are passed as `--key value` after the scenario name, e.g.\n  \
    ionsim statics --species Yb-171 --f-mhz 1 --n 2\n  ionsim mz --order 2 --phi 0:6.28:0.1\n\
    Output goes to --out, else $IONSIM_OUTPUT_ROOT/<scenario>, else ionsim-out/<scenario>.")]
struct Cli {
    /// RNG seed recorded in the manifest (default 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Tabular output format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Run directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List scenarios with their parameter schemas
    List {
        /// Machine-readable catalog
        #[arg(long)]
        json: bool,
    },
    /// Run the scenario described by a TOML config file
    Run { config: PathBuf },
    #[command(external_subcommand)]
    Scenario(Vec<String>),
}

/// Everything needed to start a run; unset fields fall back to defaults.
#[derive(Debug, Clone, Default)]
pub struct Request {
    pub scenario: String,
    pub params: toml::Table,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub dir: Option<PathBuf>,
    pub outputs: Vec<String>,
    pub error: Option<CliError>,
}

pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let request = match cli.command {
        Command::List { json } => {
            print_catalog(json);
            return 0;
        }
        Command::Run { ref config } => ConfigFile::load(config).map(|f| Request {
            scenario: f.scenario,
            params: f.params,
            seed: cli.seed.or(f.seed),
            format: cli.format.or(f.format),
            output: cli.out.clone().or(f.output),
            threads: cli.threads,
        }),
        Command::Scenario(ref args) => {
            let mut req = Request { seed: cli.seed, format: cli.format, output: cli.out.clone(), threads: cli.threads, ..Default::default() };
            split_globals(&args[1..], &mut req).and_then(|rest| {
                req.scenario = args[0].clone();
                req.params = params_from_args(&rest)?;
                Ok(req)
            })
        }
    };
    let report = match request {
        Ok(req) => execute(&req),
        Err(e) => RunReport { exit_code: e.exit_code(), dir: None, outputs: Vec::new(), error: Some(e) },
    };
    match &report.error {
        None => {
            let dir = report.dir.as_deref().map(Path::display);
            println!("wrote {} file(s) and {MANIFEST_FILE} to {}", report.outputs.len(), dir.expect("successful runs have a directory"));
        }
        Some(e) => {
            let record = ErrorRecord::from(e);
            eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
        }
    }
    report.exit_code
}

/// Pull the global flags out of a scenario's trailing arguments.
fn split_globals(args: &[String], req: &mut Request) -> Result<Vec<String>, CliError> {
    let mut rest = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let (flag, inline) = match a.split_once('=') {
            Some((f, v)) => (f, Some(v.to_string())),
            None => (a.as_str(), None),
        };
        if !matches!(flag, "--seed" | "--threads" | "--format" | "--out") {
            rest.push(a.clone());
            continue;
        }
        let value = inline
            .or_else(|| it.next().cloned())
            .ok_or_else(|| CliError::schema(flag.trim_start_matches('-'), "missing value"))?;
        let bad = |what: &str| CliError::schema(flag.trim_start_matches('-'), format!("expected {what}, got `{value}`"));
        match flag {
            "--seed" => req.seed = Some(value.parse().map_err(|_| bad("a 64-bit unsigned integer"))?),
            "--threads" => req.threads = Some(value.parse().map_err(|_| bad("a thread count"))?),
            "--format" => {
                req.format = Some(match value.as_str() {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad("csv or json")),
                })
            }
            _ => req.output = Some(PathBuf::from(&value)),
        }
    }
    Ok(rest)
}

fn print_catalog(as_json: bool) {
    if as_json {
        println!("{}", serde_json::to_string_pretty(&catalog()).expect("catalog serializes"));
        return;
    }
    for s in registry() {
        println!("{}  {}", s.id, s.summary);
        for f in s.fields {
            let default = f.default.map_or("required".to_string(), |d| format!("default {d}"));
            println!("    --{:<16} {:<20} {} ({default})", f.name.replace('_', "-"), f.kind, f.help);
        }
        println!();
    }
}

pub fn catalog() -> Value {
    let entries: Vec<Value> = registry()
        .iter()
        .map(|s| {
            let params: Vec<Value> = s
                .fields
                .iter()
                .map(|f| json!({ "name": f.name, "type": f.kind, "default": f.default, "required": f.default.is_none(), "help": f.help }))
                .collect();
            json!({ "id": s.id, "summary": s.summary, "params": params })
        })
        .collect();
    Value::Array(entries)
}

fn remove_previous_outputs(dir: &Path) {
    let Ok(text) = std::fs::read_to_string(dir.join(MANIFEST_FILE)) else { return };
    let Ok(old) = serde_json::from_str::<Value>(&text) else { return };
    for name in old["outputs"].as_array().into_iter().flatten().filter_map(Value::as_str) {
        if !name.contains(['/', '\\']) {
            let _ = std::fs::remove_file(dir.join(name));
        }
    }
}

/// Validate, run and record one scenario. The manifest is written whenever a run directory
/// can be determined, including on failure.
pub fn execute(req: &Request) -> RunReport {
    let start = Instant::now();
    let scenario = lookup(&req.scenario);
    let seed = req.seed.unwrap_or(0);
    let format = req.format.unwrap_or_default();
    let dir = req.output.clone().or_else(|| scenario.map(|s| RunConfig::default_output(s.id)));

    let pool = rayon::ThreadPoolBuilder::new().num_threads(req.threads.unwrap_or(0)).build();
    let threads = pool.as_ref().map_or(1, |p| p.current_num_threads());
    let mut echo = Value::Object(Default::default());
    let mut checks = Vec::new();
    let mut outputs = Vec::new();

    let result = (|| -> Result<(), CliError> {
        let scenario: &Scenario = scenario.ok_or_else(|| {
            CliError::schema("scenario", format!("unknown scenario `{}`; `ionsim list` shows the catalog", req.scenario))
        })?;
        if req.threads == Some(0) {
            return Err(CliError::schema("threads", "must be at least 1"));
        }
        echo = scenario.validate(&req.params)?;
        let dir = dir.as_ref().expect("known scenarios have a run directory");
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
        remove_previous_outputs(dir);
        let pool = pool.map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
        let outcome = pool.install(|| scenario.run(&req.params, seed))?;
        checks = outcome.checks.clone();
        outputs = write_outcome(dir, format, &outcome)?;
        Ok(())
    })();

    let error = result.err();
    if let Some(dir) = &dir {
        if error.is_some() && std::fs::create_dir_all(dir).is_ok() {
            remove_previous_outputs(dir);
        }
        let params = if echo.as_object().is_some_and(|m| !m.is_empty()) {
            echo
        } else {
            serde_json::to_value(&req.params).unwrap_or(Value::Null)
        };
        let config = RunConfig { scenario: req.scenario.clone(), params: Default::default(), seed, output: dir.clone(), format };
        let mut config = serde_json::to_value(&config).expect("config serializes");
        config["params"] = params;
        config["threads"] = json!(threads);
        let passed = checks.iter().filter(|c| c.pass).count();
        let manifest = RunManifest {
            scenario: req.scenario.clone(),
            status: if error.is_none() { "ok" } else { "failed" },
            error: error.as_ref().map(ErrorRecord::from),
            config,
            artifact_version: format!("ionsim {}", env!("CARGO_PKG_VERSION")),
            constants: Constants::current(),
            wall_time_s: start.elapsed().as_secs_f64(),
            outputs: outputs.clone(),
            checks_passed: passed,
            checks_failed: checks.len() - passed,
            checks,
        };
        if let Err(e) = manifest.write(dir) {
            if error.is_none() {
                return RunReport { exit_code: e.exit_code(), dir: Some(dir.clone()), outputs, error: Some(e) };
            }
        }
    }
    RunReport { exit_code: error.as_ref().map_or(0, CliError::exit_code), dir, outputs, error }
}
