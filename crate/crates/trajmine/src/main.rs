use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trajmine::config::PipelineConfig;
use trajmine::pipeline;
use trajmine::synth::{self, Scenario};
use trajmine::Result;

#[derive(Parser)]
#[command(
    name = "trajmine",
    version,
    about = "Mine building-level day trajectories from passive Wi-Fi probe logs",
    after_help = "Stages communicate through files in the output directory; run them \
                  individually or chain everything with `all`. Every config key is \
                  overridable by the flag of the same name."
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// One optional flag per config key; values go through the same parser as
/// the config file.
#[derive(Args)]
struct Overrides {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Raw probe log (CSV or JSONL, `.gz` transparent).
    #[arg(long, global = true)]
    input: Option<String>,
    /// Building registry CSV.
    #[arg(long, global = true)]
    registry: Option<String>,
    /// Day-type calendar CSV.
    #[arg(long, global = true)]
    calendar: Option<String>,
    /// Artifact directory.
    #[arg(long, global = true)]
    output_dir: Option<String>,
    /// Master seed; required by synth and the k-means stages.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true)]
    tz_offset: Option<String>,
    #[arg(long, global = true)]
    coalesce_gap: Option<String>,
    /// `true` if the input is already `device,sensor,first_seen,last_seen`
    /// intervals rather than raw probes.
    #[arg(long, global = true, value_name = "BOOL")]
    pre_coalesced: Option<String>,
    #[arg(long, global = true)]
    merge_threshold: Option<String>,
    #[arg(long, global = true)]
    min_span: Option<String>,
    #[arg(long, global = true)]
    max_stay: Option<String>,
    #[arg(long, global = true)]
    k_time: Option<String>,
    #[arg(long, global = true)]
    k_person: Option<String>,
    #[arg(long, global = true)]
    restarts: Option<String>,
    #[arg(long, global = true)]
    silhouette_cap: Option<String>,
    #[arg(long, global = true)]
    dominant_threshold: Option<String>,
    /// Flow windows as `name:HH:MM-HH:MM` triples, comma separated.
    #[arg(long, global = true)]
    windows: Option<String>,
    /// `dissimilarity` or `row-vectors`.
    #[arg(long, global = true)]
    hac_input: Option<String>,
    #[arg(long, global = true)]
    cut_fraction: Option<String>,
    /// `facility`, `all`, or a comma list of building ids.
    #[arg(long, global = true)]
    time_buildings: Option<String>,
    #[arg(long, global = true)]
    person_curve_category: Option<String>,
}

impl Overrides {
    fn into_config(self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let pairs = [
            ("input", self.input),
            ("registry", self.registry),
            ("calendar", self.calendar),
            ("output_dir", self.output_dir),
            ("seed", self.seed),
            ("threads", self.threads),
            ("tz_offset", self.tz_offset),
            ("coalesce_gap", self.coalesce_gap),
            ("pre_coalesced", self.pre_coalesced),
            ("merge_threshold", self.merge_threshold),
            ("min_span", self.min_span),
            ("max_stay", self.max_stay),
            ("k_time", self.k_time),
            ("k_person", self.k_person),
            ("restarts", self.restarts),
            ("silhouette_cap", self.silhouette_cap),
            ("dominant_threshold", self.dominant_threshold),
            ("windows", self.windows),
            ("hac_input", self.hac_input),
            ("cut_fraction", self.cut_fraction),
            ("time_buildings", self.time_buildings),
            ("person_curve_category", self.person_curve_category),
        ];
        for (key, value) in pairs {
            if let Some(value) = value {
                config.set(key, &value)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic probe log with planted ground truth into
    /// `<output_dir>/synth/`.
    Synth {
        /// Scenario file; the built-in default population when omitted.
        #[arg(long, value_name = "FILE", conflicts_with = "flow")]
        scenario: Option<PathBuf>,
        /// Use the built-in commuter scenario instead of the default one.
        #[arg(long)]
        flow: bool,
        /// Override the scenario's device count.
        #[arg(long)]
        devices: Option<usize>,
        /// Override the scenario's day count.
        #[arg(long)]
        days: Option<i64>,
        /// Override the scenario's activity multiplier.
        #[arg(long)]
        activity_scale: Option<f64>,
    },
    /// Parse and coalesce the probe log into sensor-level day trajectories.
    Ingest,
    /// Merge to building level and apply the span/stay filters.
    Preprocess,
    /// Cluster each building's days by hourly visit shape.
    ClusterTime,
    /// Cluster person-days by stay-time features.
    ClusterPerson,
    /// Per flow window: transition matrices, building dendrogram, dominant
    /// directions.
    ClusterLocation,
    /// Write per-building flow reports from the dominant directions.
    Report,
    /// Run ingest through report.
    All,
}

fn build_scenario(
    scenario: Option<PathBuf>,
    flow: bool,
    devices: Option<usize>,
    days: Option<i64>,
    activity_scale: Option<f64>,
) -> Result<Scenario> {
    let mut s = match (scenario, flow) {
        (Some(path), _) => Scenario::load(&path)?,
        (None, true) => synth::flow_scenario(),
        (None, false) => synth::default_scenario(),
    };
    if let Some(n) = devices {
        s.n_devices = n;
    }
    if let Some(n) = days {
        s.n_days = n;
    }
    if let Some(a) = activity_scale {
        s.activity_scale = a;
    }
    s.validate()?;
    Ok(s)
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.overrides.into_config()?;
    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global()
            .map_err(|e| trajmine::Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth {
            scenario,
            flow,
            devices,
            days,
            activity_scale,
        } => {
            let s = build_scenario(scenario, flow, devices, days, activity_scale)?;
            pipeline::run_synth(&config, &s)
        }
        Command::Ingest => pipeline::run_ingest(&config),
        Command::Preprocess => pipeline::run_preprocess(&config),
        Command::ClusterTime => pipeline::run_cluster_time(&config),
        Command::ClusterPerson => pipeline::run_cluster_person(&config),
        Command::ClusterLocation => pipeline::run_cluster_location(&config),
        Command::Report => pipeline::run_report(&config),
        Command::All => pipeline::run_all(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
