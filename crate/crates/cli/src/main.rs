//! `tracescope`: run the tracing pipeline over recorded or simulated event
//! streams, and inspect what a kernel backend would attach.
//!
//! Exit status: 0 clean run, 3 at least one alert, 1 usage error, 2 bad
//! input (unreadable or malformed files, unresolvable configuration).

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tracescope_core::address::Resolution;
use tracescope_core::artifacts::Artifacts;
use tracescope_core::config::{
    default_multilayer_config, parse_hooks_config, validate, FilterSpec, HookKind, HookSpec, HooksConfig,
};
use tracescope_core::dispatch::{
    CompiledFilter, Dispatcher, EventNames, EventSelection, JsonlAlertSink, PackageMap, RunSummary, TextSink,
};
use tracescope_core::event::kprobe;
use tracescope_core::signatures::{CaptureStore, DropperSignature, PrivescSignature};
use tracescope_core::source::{
    emit_probe_plan, open_replay, scenario_events, write_replay, EventSource, Scenario, ScenarioName, ThreadedSource,
    UserProbeTargets, VecSource,
};
use tracescope_core::syscalls::SyscallTable;

#[derive(Parser)]
#[command(name = "tracescope", version, about = "Multi-layer Android event tracing over replayed or simulated streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a recorded replay file.
    Replay {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the pipeline over a generated scenario.
    Simulate {
        #[arg(value_parser = scenario_name)]
        scenario: ScenarioName,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also save the generated stream as a replay file.
        #[arg(long, value_name = "FILE")]
        record: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the probe plan a kernel backend would attach, as JSON.
    Plan {
        #[command(flatten)]
        common: CommonArgs,
        /// Fail when any hook cannot be resolved.
        #[arg(long)]
        strict: bool,
    },
    /// List the configured hooks, with addresses when fixtures are given.
    ListEvents {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check a hooks configuration.
    ValidateConfig {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
    /// Attach to a live kernel (reserved; not available in this build).
    Run,
}

#[derive(Args)]
struct CommonArgs {
    /// Hooks configuration; the built-in multi-layer set when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Device artifacts directory (maps.txt, oatdump/, libs/), or "bundled".
    #[arg(long, value_name = "DIR")]
    fixtures: Option<String>,
    /// Only these hooks from the configuration, by name (comma separated).
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    events: Option<Vec<String>>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Args)]
#[group(multiple = false)]
struct FilterArgs {
    /// Trace only these uids (comma separated).
    #[arg(long, value_delimiter = ',')]
    uid: Option<Vec<u32>>,
    /// Trace only these packages (comma separated); see --packages.
    #[arg(long, value_delimiter = ',')]
    package: Option<Vec<String>>,
    /// Trace every user application (uid above 10000).
    #[arg(long)]
    all_user_apps: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// "package uid" lines mapping package names to uids.
    #[arg(long, value_name = "FILE")]
    packages: Option<PathBuf>,
    /// Save every traced file write here and rebuild the files at exit.
    #[arg(long, env = "TRACESCOPE_CAPTURE_DIR", value_name = "DIR")]
    capture_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Also write alerts as JSON lines to this file.
    #[arg(long, value_name = "FILE")]
    alerts_file: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    /// Event and alert lines.
    Text,
    /// Alerts only, one JSON object per line.
    Jsonl,
}

fn scenario_name(s: &str) -> Result<ScenarioName, String> {
    ScenarioName::from_label(s).ok_or_else(|| {
        let all: Vec<_> = ScenarioName::ALL.iter().map(|n| n.label()).collect();
        format!("expected one of {}", all.join(", "))
    })
}

const EXIT_ALERTS: u8 = 3;

/// Failure classes, mapped onto exit codes.
enum Failure {
    Usage(String),
    Input(String),
}

impl Failure {
    fn input(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Failure {
        Failure::Input(format!("{context}: {e}"))
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
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("tracescope: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("tracescope: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Replay { input, run } => {
            let config = load_config(&run.common)?;
            let src = open_replay(&input).map_err(|e| Failure::input(input.display(), e))?;
            run_pipeline(Box::new(ThreadedSource::spawn(src, 8)), &config, &run, PackageMap::new())
        }
        Command::Simulate { scenario, seed, record, run } => {
            let config = load_config(&run.common)?;
            let s = Scenario::new(scenario, seed);
            let events = scenario_events(&s, &UserProbeTargets::bundled());
            if let Some(path) = &record {
                write_replay(path, &events).map_err(|e| Failure::input(path.display(), e))?;
            }
            // the simulated device has the scenario's app installed
            let mut packages = PackageMap::new();
            packages.insert(s.package(), s.app_uid);
            run_pipeline(Box::new(VecSource::new(events)), &config, &run, packages)
        }
        Command::Plan { common, strict } => {
            let config = load_config(&common)?;
            let resolution = resolve(&config, common.fixtures.as_deref().unwrap_or("bundled"))?;
            report_issues(&resolution);
            if strict && !resolution.issues.is_empty() {
                return Err(Failure::Input(format!("{} hook(s) could not be resolved", resolution.issues.len())));
            }
            let plan = emit_probe_plan(&config, &resolution.probes);
            emit(&(plan.to_json_string() + "\n"))?;
            Ok(0)
        }
        Command::ListEvents { common } => {
            let config = load_config(&common)?;
            let resolution = match &common.fixtures {
                Some(f) => Some(resolve(&config, f)?),
                None => None,
            };
            print_event_list(&config, resolution.as_ref()).or_else(closed_pipe)?;
            Ok(0)
        }
        Command::ValidateConfig { config } => {
            let cfg = match &config {
                Some(p) => read_config(p)?,
                None => default_multilayer_config(),
            };
            let diagnostics = validate(&cfg);
            emit(&diagnostics.iter().map(|d| format!("{d}\n")).collect::<String>())?;
            if !diagnostics.is_empty() {
                return Err(Failure::Input(format!("{} problem(s) found", diagnostics.len())));
            }
            emit(&format!(
                "ok: {} hooks (api {}, uprobe {}, syscall {}, kprobe {}), filter {}\n",
                cfg.hooks.len(),
                cfg.count(HookKind::ApiCall),
                cfg.count(HookKind::Uprobe),
                cfg.count(HookKind::Syscall),
                cfg.count(HookKind::Kprobe),
                cfg.filter.mode.label(),
            ))?;
            Ok(0)
        }
        Command::Run => Err(Failure::Usage(
            "live kernel attachment is not available; use `plan` to see what would be attached".into(),
        )),
    }
}

fn read_config(path: &Path) -> Result<HooksConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(path.display(), e))?;
    parse_hooks_config(&text).map_err(|e| Failure::input(path.display(), e))
}

/// The configuration with `--events` and filter overrides applied.
fn load_config(common: &CommonArgs) -> Result<HooksConfig, Failure> {
    let mut config = match &common.config {
        Some(p) => read_config(p)?,
        None => default_multilayer_config(),
    };
    if let Some(names) = &common.events {
        let wanted: BTreeSet<&str> = names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()).collect();
        let known: BTreeSet<String> = config.hooks.iter().map(HookSpec::display_name).collect();
        if let Some(missing) = wanted.iter().find(|n| !known.contains(**n)) {
            return Err(Failure::Usage(format!("--events: {missing} is not a hook in the configuration")));
        }
        config.hooks.retain(|h| wanted.contains(h.display_name().as_str()));
    }
    let f = &common.filter;
    if let Some(uids) = &f.uid {
        config.filter = FilterSpec::uids(uids.iter().copied());
    } else if let Some(packages) = &f.package {
        config.filter = FilterSpec::packages(packages.iter().cloned());
    } else if f.all_user_apps {
        config.filter = FilterSpec::all_user_apps();
    }
    let problems = validate(&config);
    if let Some(d) = problems.first() {
        return Err(Failure::Input(format!("invalid configuration: {d}")));
    }
    Ok(config)
}

fn resolve(config: &HooksConfig, fixtures: &str) -> Result<Resolution, Failure> {
    let artifacts = if fixtures == "bundled" {
        Artifacts::bundled()
    } else {
        Artifacts::from_dir(Path::new(fixtures)).map_err(|e| Failure::Input(e.to_string()))?
    };
    artifacts.resolve(config).map_err(|e| Failure::Input(e.to_string()))
}

fn report_issues(resolution: &Resolution) {
    for issue in &resolution.issues {
        eprintln!("warning: {issue}");
    }
}

/// Writes to stdout; a reader that went away early is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).or_else(closed_pipe)
}

fn closed_pipe(e: io::Error) -> Result<(), Failure> {
    if e.kind() == io::ErrorKind::BrokenPipe {
        Ok(())
    } else {
        Err(Failure::input("stdout", e))
    }
}

fn print_event_list(config: &HooksConfig, resolution: Option<&Resolution>) -> io::Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "# kind     name  location")?;
    let table = SyscallTable::arm64();
    for hook in &config.hooks {
        let name = hook.display_name();
        let location = match hook {
            HookSpec::Syscall { name } => match table.number(name) {
                Some(nr) => format!("nr={nr}"),
                None => "nr=- (not an arm64 syscall)".into(),
            },
            HookSpec::Kprobe { function } => format!("id=0x{:x}", kprobe::id_for(function)),
            HookSpec::ApiCall { .. } | HookSpec::Uprobe { .. } => match resolution {
                None => String::new(),
                Some(r) => {
                    let addrs: Vec<String> = r
                        .probes
                        .iter()
                        .filter(|p| p.display_name == name)
                        .map(|p| format!("0x{:x}", p.address))
                        .collect();
                    if addrs.is_empty() {
                        "unresolved".into()
                    } else {
                        addrs.join(",")
                    }
                }
            },
        };
        writeln!(out, "{:<8} {name}  {location}", hook.kind().label())?;
    }
    out.flush()
}

fn run_pipeline(
    mut src: Box<dyn EventSource>,
    config: &HooksConfig,
    run: &RunArgs,
    mut packages: PackageMap,
) -> Result<u8, Failure> {
    if let Some(path) = &run.packages {
        let text = fs::read_to_string(path).map_err(|e| Failure::input(path.display(), e))?;
        packages = PackageMap::parse(&text).map_err(|e| Failure::input(path.display(), e))?;
    }
    let filter = CompiledFilter::new(&config.filter, &packages).map_err(|e| Failure::Input(e.to_string()))?;
    let resolution = resolve(config, run.common.fixtures.as_deref().unwrap_or("bundled"))?;
    report_issues(&resolution);

    let selection = EventSelection::from_config(config, &resolution.map);
    let names = EventNames::new(resolution.map).with_config(config);
    let mut d = Dispatcher::new(filter, names).with_selection(selection);
    d.add_signature(Box::new(DropperSignature::new()));
    d.add_signature(Box::new(PrivescSignature::new()));
    if let Some(dir) = &run.capture_dir {
        let store = CaptureStore::new(dir).map_err(|e| Failure::Input(e.to_string()))?;
        d.add_signature(Box::new(store));
    }

    let stdout = BufWriter::new(io::stdout());
    match run.output {
        Output::Text => d.add_sink(Box::new(TextSink::new(stdout))),
        Output::Jsonl => d.add_sink(Box::new(JsonlAlertSink::new(stdout))),
    }
    if let Some(path) = &run.alerts_file {
        let f = File::create(path).map_err(|e| Failure::input(path.display(), e))?;
        d.add_sink(Box::new(JsonlAlertSink::new(BufWriter::new(f))));
    }

    let result = d.run(src.as_mut());
    let summary = match &result {
        Ok(s) => s,
        Err(e) => &e.summary,
    };
    print_summary(summary, d.last_signature_error());
    match result {
        Err(e) => Err(Failure::input("event stream", e)),
        Ok(s) if s.sink_errors > 0 => Err(Failure::Input("failed to write output".into())),
        Ok(s) if s.total_alerts() > 0 => Ok(EXIT_ALERTS),
        Ok(_) => Ok(0),
    }
}

fn print_summary(summary: &RunSummary, last_error: Option<&str>) {
    eprintln!("{summary}");
    if let Some(e) = last_error {
        eprintln!("last signature error: {e}");
    }
}
