use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use aerosim::config::{ConfigDocument, ConfigError};
use aerosim::linkbudget::{fspl_db, radio_horizon_km, received_power_dbm, snr_db, LinkBudgetParams, PathLoss};
use aerosim::radio::validate_radio as sweep_radio;
use aerosim::scenario::{self, link_from_document, MobilitySource, ScenarioConfig, ScenarioError, ValidationConfig};
use aerosim::tracegen::{generate_synthetic_flights, TraceBundle};
use aerosim::RngStream;
use rayon::prelude::*;

use crate::output::write_atomic;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("AEROSIM_THREADS") {
        let threads: usize = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("AEROSIM_THREADS: `{raw}` is not a thread count")))?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn simulate(config_path: &Path, runs: Option<u32>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let doc = ConfigDocument::load(config_path)?;
    let mut config = ScenarioConfig::from_document(&doc)?;
    if let Some(runs) = runs {
        config.runs = runs;
    }
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    config.validate()?;

    let cells: Vec<(usize, u32)> = config
        .user_counts
        .iter()
        .flat_map(|&n| (0..config.runs).map(move |r| (n, r)))
        .collect();
    let results = thread_pool()?.install(|| {
        cells
            .par_iter()
            .map(|&(n, r)| scenario::run(&config, n, r))
            .collect::<Result<Vec<_>, _>>()
    })?;

    create_dir(out)?;
    write(&out.join("runs.csv"), &scenario::runs_csv(&results))?;
    let aggregate = scenario::aggregate_csv(&scenario::aggregate(&results));
    write(&out.join("aggregate.csv"), &aggregate)?;
    if config.packet_log {
        write(&out.join("packets.csv"), &scenario::packets_csv(&results))?;
    }
    write_manifest(out, config_path, &config)?;
    print!("{aggregate}");
    Ok(())
}

// Wall-clock data lives only here, never in the result CSVs.
fn write_manifest(out: &Path, config_path: &Path, config: &ScenarioConfig) -> Result<(), CliError> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let text = format!(
        "tool = aerosim {}\nconfig = {}\nbase_seed = {}\nruns = {}\nuser_counts = {:?}\nfinished_unix_s = {started}\n",
        env!("CARGO_PKG_VERSION"),
        config_path.display(),
        config.base_seed,
        config.runs,
        config.user_counts,
    );
    write(&out.join("run-manifest.txt"), &text)
}

pub fn validate_radio(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let doc = ConfigDocument::load(config_path)?;
    let cfg = ValidationConfig::from_document(&doc)?;
    let points = sweep_radio(&cfg.radio, &cfg.distances_km, cfg.packets_per_distance, cfg.seed)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut csv = String::from("distance_km,expected_per,observed_per\n");
    for p in &points {
        csv.push_str(&format!("{},{},{}\n", p.distance_km, p.expected_per, p.observed_per));
    }
    create_dir(out)?;
    write(&out.join("validate_radio.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn gen_traces(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let doc = ConfigDocument::load(config_path)?;
    let config = ScenarioConfig::from_document(&doc)?;
    let seed = aerosim::engine::run_seed(config.base_seed, 0);
    for &n in &config.user_counts {
        let mobility = match &config.mobility {
            MobilitySource::Synthetic(corridor) => {
                let mut rng = RngStream::new(seed, "tracegen");
                generate_synthetic_flights(n, &config.oca, corridor, config.sim_end.as_secs_f64(), &mut rng)
                    .map_err(|e| CliError::Config(e.to_string()))?
            }
            MobilitySource::Files { mobility, .. } => mobility.clone(),
        };
        let bundle = TraceBundle::from_mobility(mobility, &config.oca).map_err(|e| CliError::Runtime(e.to_string()))?;
        let dir: PathBuf = out.join(format!("n{n}"));
        bundle
            .write_to_dir(&dir, n, config.payload_bytes)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let messages: usize = bundle.messages.iter().map(|m| m.len()).sum();
        println!("{}: {n} aircraft, {messages} messages", dir.display());
    }
    Ok(())
}

pub fn linkbudget(d: f64, f: f64, htx: f64, hrx: f64, params: Option<&Path>) -> Result<(), CliError> {
    let mut link = match params {
        Some(path) => link_from_document(&ConfigDocument::load(path)?)?,
        None => LinkBudgetParams::default(),
    };
    link.f_mhz = f;
    let bad = |e: aerosim::linkbudget::LinkBudgetError| CliError::Config(e.to_string());
    let horizon = radio_horizon_km(htx, hrx).map_err(bad)?;
    let loss = fspl_db(d, f, htx, hrx).map_err(bad)?;
    let p_rx = received_power_dbm(&link, loss);
    let snr = p_rx.map(|p| snr_db(&link, p));
    let show = |v: Option<f64>| v.map_or_else(|| "none".to_owned(), |v| v.to_string());
    let fspl = match loss {
        PathLoss::Finite(db) => db.to_string(),
        PathLoss::Infinite => "inf".to_owned(),
    };
    println!("d_km,f_mhz,h_tx_km,h_rx_km,horizon_km,fspl_db,p_rx_dbm,snr_db");
    println!("{d},{f},{htx},{hrx},{horizon},{fspl},{},{}", show(p_rx), show(snr));
    Ok(())
}
