//! OCA reporting scenario: `n` aircraft cross an oceanic control area and
//! report entry and exit to the ground station at its center, over idealized
//! TDMA and the table-driven radio.
//!
//! Nodes `0..n` are aircraft; node `n` is the ground station.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use thiserror::Error;

use crate::config::{ConfigDocument, ConfigError};
use crate::engine::{self, EngineError, Event, EventKind, EventQueue, Process, RngStream, SimTime};
use crate::linkbudget::{LinkBudgetParams, CALIBRATION_DISTANCE_KM, CALIBRATION_SNR_DB};
use crate::mobility::{parse_mobility_trace, MobilityError, MobilityTrace, Position};
use crate::radio::{attempt_reception, parse_snr_table, RadioConfig, RadioError, Reception, SnrPerTable};
use crate::tdma::{MacQueue, TdmaConfig, TdmaError, TdmaSchedule, TdmaScheduler};
use crate::tracegen::{generate_synthetic_flights, FlightCorridor, OcaSpec, TraceBundle, TracegenError};
use crate::traffic::{drive_app, parse_message_trace, AppConfig, Packet, TrafficError, DEFAULT_PAYLOAD_BYTES};

/// Speed of light, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Tdma(#[from] TdmaError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Tracegen(#[from] TracegenError),
}

impl ScenarioError {
    /// Problems detectable before any event executes.
    pub fn is_config(&self) -> bool {
        !matches!(self, ScenarioError::Engine(_) | ScenarioError::Radio(_))
    }
}

/// Aircraft mobility plus the traffic bound to it.
#[derive(Clone, Debug, PartialEq)]
pub enum MobilitySource {
    /// Fresh straight-line flights per run; traffic comes from their OCA crossings.
    Synthetic(FlightCorridor),
    /// Fixed traces. `apps` holds `(source node, app)` bindings.
    Files {
        mobility: MobilityTrace,
        apps: Vec<(usize, AppConfig)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub user_counts: Vec<usize>,
    pub tdma: TdmaConfig,
    pub radio: RadioConfig,
    pub oca: OcaSpec,
    pub mobility: MobilitySource,
    /// Payload of generated reports in synthetic mode.
    pub payload_bytes: u32,
    pub sim_end: SimTime,
    pub runs: u32,
    pub base_seed: u64,
    pub packet_log: bool,
}

impl ScenarioConfig {
    /// The published evaluation setup with synthetic flights.
    pub fn table1() -> Self {
        ScenarioConfig {
            user_counts: vec![100, 200, 300, 400, 500],
            tdma: TdmaConfig::default(),
            radio: RadioConfig::default(),
            oca: OcaSpec::default(),
            mobility: MobilitySource::Synthetic(FlightCorridor::default()),
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            sim_end: SimTime::from_nanos(10_000 * 1_000_000_000),
            runs: 10,
            base_seed: 1,
            packet_log: false,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.runs == 0 {
            return Err(ConfigError::new("runs must be at least 1").into());
        }
        if self.sim_end == SimTime::ZERO {
            return Err(ConfigError::new("simulation end must be positive").into());
        }
        match &self.mobility {
            MobilitySource::Synthetic(corridor) => corridor.check(&self.oca, self.sim_end.as_secs_f64())?,
            MobilitySource::Files { mobility, apps } => {
                let n = mobility.node_count();
                if self.user_counts != [n] {
                    return Err(ConfigError::new(format!(
                        "user counts {:?} do not match the {n} nodes of the mobility trace",
                        self.user_counts
                    ))
                    .into());
                }
                for (source, app) in apps {
                    if *source >= n || app.destination > n || app.destination == *source {
                        return Err(ConfigError::new(format!(
                            "binding {source} -> {} is invalid for {n} aircraft plus ground station {n}",
                            app.destination
                        ))
                        .into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_document(doc: &ConfigDocument) -> Result<Self, ScenarioError> {
        let sim_end_s: f64 = doc.required("scenario.sim_end_s")?;
        let sim_end = SimTime::from_secs_f64(sim_end_s)
            .map_err(|_| doc.error("scenario.sim_end_s", format!("invalid simulation end {sim_end_s}")))?;
        let slot_s: f64 = doc.required("tdma.slot_duration_s")?;
        let slot = SimTime::from_secs_f64(slot_s)
            .map_err(|_| doc.error("tdma.slot_duration_s", format!("invalid slot duration {slot_s}")))?;
        let tdma = TdmaConfig::new(
            slot,
            doc.required("tdma.slots_per_frame")?,
            doc.required("tdma.retransmission_attempts")?,
        )
        .map_err(|e| doc.error("tdma.slot_duration_s", e.to_string()))?;
        let radio = radio_from_document(doc, doc.required("radio.range_km")?)?;
        let oca = oca_from_document(doc)?;
        let payload_bytes = doc.or("traffic.payload_bytes", DEFAULT_PAYLOAD_BYTES)?;

        let source: String = doc.required("mobility.source")?;
        let (mobility, user_counts) = match source.as_str() {
            "synthetic" => {
                let d = FlightCorridor::default();
                let corridor = FlightCorridor {
                    altitude_km: doc.or("mobility.altitude_km", d.altitude_km)?,
                    speed_km_s: doc.or("mobility.speed_km_s", d.speed_km_s)?,
                    margin_km: doc.or("mobility.margin_km", d.margin_km)?,
                    max_offset_fraction: doc.or("mobility.max_offset_fraction", d.max_offset_fraction)?,
                };
                (MobilitySource::Synthetic(corridor), doc.required_list("scenario.user_counts")?)
            }
            "file" => {
                let path = doc.required_path("mobility.file")?;
                let mobility = parse_mobility_trace(&read(&path)?)
                    .map_err(|e| ConfigError::at(Some(&path), None, e.to_string()))?;
                let apps = read_manifest(&doc.required_path("traffic.manifest")?)?;
                let n = mobility.node_count();
                let counts = doc.optional_list("scenario.user_counts")?.unwrap_or_else(|| vec![n]);
                (MobilitySource::Files { mobility, apps }, counts)
            }
            other => {
                return Err(doc
                    .error("mobility.source", format!("unknown mobility source `{other}` (synthetic|file)"))
                    .into())
            }
        };
        let config = ScenarioConfig {
            user_counts,
            tdma,
            radio,
            oca,
            mobility,
            payload_bytes,
            sim_end,
            runs: doc.required("scenario.runs")?,
            base_seed: doc.required("scenario.base_seed")?,
            packet_log: doc.or("output.packet_log", false)?,
        };
        config.validate().map_err(|e| match e {
            ScenarioError::Config(c) if c.file.is_none() => {
                ScenarioError::Config(ConfigError::at(doc.path(), None, c.message))
            }
            ScenarioError::Tracegen(t) => ScenarioError::Config(ConfigError::at(doc.path(), None, t.to_string())),
            other => other,
        })?;
        Ok(config)
    }
}

fn read(path: &std::path::Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| ConfigError::at(Some(path), None, format!("cannot read: {e}")))
}

/// `link.*` keys over [`LinkBudgetParams::uncalibrated`]. Without
/// `link.p_tx_dbm` the transmit power is calibrated to
/// `link.calibration_snr_db` at `link.calibration_distance_km`.
pub fn link_from_document(doc: &ConfigDocument) -> Result<LinkBudgetParams, ConfigError> {
    let d = LinkBudgetParams::uncalibrated();
    let base = LinkBudgetParams {
        p_tx_dbm: 0.0,
        g_tx_dbi: doc.or("link.g_tx_dbi", d.g_tx_dbi)?,
        l_tx_db: doc.or("link.l_tx_db", d.l_tx_db)?,
        g_rx_dbi: doc.or("link.g_rx_dbi", d.g_rx_dbi)?,
        l_rx_db: doc.or("link.l_rx_db", d.l_rx_db)?,
        f_mhz: doc.or("link.f_mhz", d.f_mhz)?,
        noise_figure_db: doc.or("link.noise_figure_db", d.noise_figure_db)?,
        n0_dbm_hz: doc.or("link.n0_dbm_hz", d.n0_dbm_hz)?,
        bandwidth_hz: doc.or("link.bandwidth_hz", d.bandwidth_hz)?,
    };
    let cal_d = doc.or("link.calibration_distance_km", CALIBRATION_DISTANCE_KM)?;
    let cal_snr = doc.or("link.calibration_snr_db", CALIBRATION_SNR_DB)?;
    let params = match doc.optional::<f64>("link.p_tx_dbm")? {
        Some(p_tx_dbm) => LinkBudgetParams { p_tx_dbm, ..base },
        None => base
            .calibrated(cal_d, cal_snr)
            .map_err(|e| ConfigError::at(doc.path(), None, e.to_string()))?,
    };
    params
        .validate()
        .map_err(|e| ConfigError::at(doc.path(), None, e.to_string()))?;
    Ok(params)
}

pub fn radio_from_document(doc: &ConfigDocument, range_km: f64) -> Result<RadioConfig, ConfigError> {
    let table = match doc.optional_path("radio.snr_table")? {
        Some(path) => parse_snr_table(&read(&path)?).map_err(|e| ConfigError::at(Some(&path), None, e.to_string()))?,
        None => SnrPerTable::default(),
    };
    RadioConfig::new(range_km, table, link_from_document(doc)?)
        .map_err(|e| doc.error("radio.range_km", e.to_string()))
}

fn oca_from_document(doc: &ConfigDocument) -> Result<OcaSpec, ConfigError> {
    let d = OcaSpec::default();
    let center = match doc.optional_list::<f64>("oca.center_km")? {
        Some(c) if c.len() == 3 => Position::new(c[0], c[1], c[2]),
        Some(_) => return Err(doc.error("oca.center_km", "`oca.center_km` needs three values x,y,z")),
        None => d.center,
    };
    OcaSpec::new(center, doc.required("oca.range_km")?).map_err(|e| doc.error("oca.range_km", e.to_string()))
}

/// Reads `node,message_trace,destination,payload_bytes` rows; trace paths are
/// relative to the manifest.
pub fn read_manifest(path: &std::path::Path) -> Result<Vec<(usize, AppConfig)>, ConfigError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(std::path::Path::new(""));
    let mut apps = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| ConfigError::at(Some(path), Some(line), msg);
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let [node, trace, destination, payload] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let node: usize = node.parse().map_err(|_| err(format!("bad node index `{node}`")))?;
        let destination: usize = destination
            .parse()
            .map_err(|_| err(format!("bad destination `{destination}`")))?;
        let payload: u32 = payload.parse().map_err(|_| err(format!("bad payload size `{payload}`")))?;
        let trace_path: PathBuf = base.join(trace);
        let trace = parse_message_trace(&read(&trace_path)?)
            .map_err(|e| ConfigError::at(Some(&trace_path), None, e.to_string()))?;
        let app = AppConfig::new(destination, payload, trace).map_err(|e| err(e.to_string()))?;
        apps.push((node, app));
    }
    Ok(apps)
}

/// Radio validation sweep settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationConfig {
    pub radio: RadioConfig,
    pub distances_km: Vec<f64>,
    pub packets_per_distance: u32,
    pub seed: u64,
}

impl ValidationConfig {
    pub fn from_document(doc: &ConfigDocument) -> Result<Self, ConfigError> {
        let range = match doc.optional::<f64>("validate.range_km")? {
            Some(r) => r,
            None => doc.required("radio.range_km")?,
        };
        let distances_km: Vec<f64> = doc.required_list("validate.distances_km")?;
        if distances_km.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(doc.error("validate.distances_km", "distances must be positive"));
        }
        let packets_per_distance: u32 = doc.required("validate.packets_per_distance")?;
        if packets_per_distance == 0 {
            return Err(doc.error("validate.packets_per_distance", "need at least one packet per distance"));
        }
        Ok(ValidationConfig {
            radio: radio_from_document(doc, range)?,
            distances_km,
            packets_per_distance,
            seed: doc.or("validate.seed", 1)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Disposition {
    Delivered,
    LostChannel,
    OutOfRange,
    /// Queued or still propagating when the simulation ended.
    StillQueued,
}

impl Disposition {
    pub fn as_str(self) -> &'static str {
        match self {
            Disposition::Delivered => "delivered",
            Disposition::LostChannel => "lost_channel",
            Disposition::OutOfRange => "out_of_range",
            Disposition::StillQueued => "still_queued",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketRecord {
    pub source: usize,
    pub sequence: u64,
    pub destination: usize,
    pub created_at: SimTime,
    pub transmitted_at: Option<SimTime>,
    pub delivered_at: Option<SimTime>,
    pub disposition: Disposition,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub users: usize,
    pub run: u32,
    pub seed: u64,
    /// Indexed by node; the last entry is the ground station.
    pub sent_per_node: Vec<u64>,
    pub received_per_node: Vec<u64>,
    pub sent: u64,
    pub received: u64,
    pub lost_channel: u64,
    pub out_of_range: u64,
    pub still_queued: u64,
    /// Every created packet, ordered by creation.
    pub packets: Vec<PacketRecord>,
    pub events_executed: u64,
}

impl RunResult {
    pub fn ground_station_received(&self) -> u64 {
        self.received_per_node.last().copied().unwrap_or(0)
    }

    pub fn is_conserved(&self) -> bool {
        self.received + self.lost_channel + self.out_of_range + self.still_queued == self.sent
    }
}

struct InFlight {
    source: usize,
    sequence: u64,
    outcome: Reception,
}

/// Per-run mutable state driven by engine events.
struct World {
    users: usize,
    oca: OcaSpec,
    tdma: TdmaConfig,
    radio: RadioConfig,
    sim_end: SimTime,
    mobility: MobilityTrace,
    apps: Vec<Vec<AppConfig>>,
    macs: Vec<MacQueue>,
    scheduler: TdmaScheduler,
    schedule: Option<TdmaSchedule>,
    rng: RngStream,
    records: Vec<Vec<PacketRecord>>,
    order: Vec<(usize, u64)>,
    in_flight: Vec<InFlight>,
}

impl World {
    fn position(&self, node: usize, t: SimTime) -> Result<Position, MobilityError> {
        if node == self.users {
            Ok(self.oca.center)
        } else {
            self.mobility.position_at(node, t.as_secs_f64())
        }
    }

    fn record(&mut self, source: usize, sequence: u64) -> &mut PacketRecord {
        &mut self.records[source][sequence as usize]
    }

    fn message_due(&mut self, node: usize, app: usize, now: SimTime) -> Result<(), ScenarioError> {
        let cfg = &self.apps[node][app];
        let sequence = self.records[node].len() as u64;
        let packet = Packet {
            source: node,
            destination: cfg.destination,
            size: cfg.payload_size,
            created_at: now,
            sequence,
            app,
        };
        self.records[node].push(PacketRecord {
            source: node,
            sequence,
            destination: packet.destination,
            created_at: now,
            transmitted_at: None,
            delivered_at: None,
            disposition: Disposition::StillQueued,
        });
        self.order.push((node, sequence));
        let report = self.macs[node].enqueue(packet);
        self.scheduler.report_buffer(report)?;
        Ok(())
    }

    fn frame_start(&mut self, frame: u64, queue: &mut EventQueue) -> Result<(), ScenarioError> {
        let schedule = self.scheduler.compute_schedule(frame, self.tdma.slots_per_frame);
        for (slot, node) in schedule.assignments.iter().enumerate() {
            if let Some(node) = *node {
                queue.schedule(self.tdma.slot_start(frame, slot), EventKind::SlotStart { frame, slot, node })?;
            }
        }
        self.schedule = Some(schedule);
        let next = self.tdma.frame_start(frame + 1);
        if next <= self.sim_end {
            queue.schedule(next, EventKind::FrameStart { frame: frame + 1 })?;
        }
        Ok(())
    }

    fn slot_start(&mut self, slot: usize, node: usize, queue: &mut EventQueue) -> Result<(), ScenarioError> {
        let now = queue.now();
        if let Some(packet) = self.macs[node].dequeue_for_slot() {
            let tx = self.position(node, now)?;
            let rx = self.position(packet.destination, now)?;
            let outcome = attempt_reception(&self.radio, tx, rx, &mut self.rng)?;
            let record = self.record(packet.source, packet.sequence);
            record.transmitted_at = Some(now);
            if outcome == Reception::OutOfRange {
                record.disposition = Disposition::OutOfRange;
            } else {
                let delay_s = tx.distance(&rx) / SPEED_OF_LIGHT_KM_S;
                let arrival = now.saturating_add(SimTime::from_secs_f64(delay_s)?);
                queue.schedule(
                    arrival,
                    EventKind::ReceptionComplete {
                        transmission: self.in_flight.len(),
                    },
                )?;
                self.in_flight.push(InFlight {
                    source: packet.source,
                    sequence: packet.sequence,
                    outcome,
                });
            }
        }
        let last = self
            .schedule
            .as_ref()
            .and_then(|s| s.slots_of(node).last())
            .is_some_and(|l| l == slot);
        if last {
            let report = self.macs[node].report();
            self.scheduler.report_buffer(report)?;
        }
        Ok(())
    }

    fn reception_complete(&mut self, transmission: usize, now: SimTime) {
        let InFlight {
            source,
            sequence,
            outcome,
        } = self.in_flight[transmission];
        let record = self.record(source, sequence);
        match outcome {
            Reception::Delivered => {
                record.disposition = Disposition::Delivered;
                record.delivered_at = Some(now);
            }
            Reception::LostChannel => record.disposition = Disposition::LostChannel,
            Reception::OutOfRange => unreachable!("out-of-range packets never propagate"),
        }
    }
}

impl Process for World {
    type Error = ScenarioError;

    fn handle(&mut self, event: &Event, queue: &mut EventQueue) -> Result<(), ScenarioError> {
        match event.kind {
            EventKind::MessageDue { node, app, .. } => self.message_due(node, app, event.time),
            EventKind::FrameStart { frame } => self.frame_start(frame, queue),
            EventKind::SlotStart { slot, node, .. } => self.slot_start(slot, node, queue),
            EventKind::ReceptionComplete { transmission } => {
                self.reception_complete(transmission, event.time);
                Ok(())
            }
            EventKind::SimEnd => Ok(()),
        }
    }
}

/// A fully wired run, ready to execute.
pub struct Simulation {
    users: usize,
    run: u32,
    seed: u64,
    queue: EventQueue,
    world: World,
}

impl Simulation {
    pub fn node_count(&self) -> usize {
        self.users + 1
    }

    pub fn registered(&self) -> &[usize] {
        self.world.scheduler.registry()
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    /// Keeps every executed event for replay comparisons.
    pub fn record_events(&mut self) {
        self.queue.enable_log();
    }

    pub fn run(self) -> Result<RunResult, ScenarioError> {
        self.run_with_log().map(|(r, _)| r)
    }

    /// Runs to the end and also returns the event log if recording was on.
    pub fn run_with_log(mut self) -> Result<(RunResult, Option<Vec<Event>>), ScenarioError> {
        engine::run_until(&mut self.queue, self.world.sim_end, &mut self.world)?;
        let world = self.world;
        let nodes = self.users + 1;
        let mut sent_per_node = vec![0; nodes];
        let mut received_per_node = vec![0; nodes];
        let (mut received, mut lost_channel, mut out_of_range, mut still_queued) = (0, 0, 0, 0);
        let mut records = world.records;
        let mut packets = Vec::with_capacity(world.order.len());
        for &(source, sequence) in &world.order {
            let rec = records[source][sequence as usize].clone();
            sent_per_node[source] += 1;
            match rec.disposition {
                Disposition::Delivered => {
                    received += 1;
                    received_per_node[rec.destination] += 1;
                }
                Disposition::LostChannel => lost_channel += 1,
                Disposition::OutOfRange => out_of_range += 1,
                Disposition::StillQueued => still_queued += 1,
            }
            packets.push(rec);
        }
        records.clear();
        let result = RunResult {
            users: self.users,
            run: self.run,
            seed: self.seed,
            sent: packets.len() as u64,
            sent_per_node,
            received_per_node,
            received,
            lost_channel,
            out_of_range,
            still_queued,
            packets,
            events_executed: self.queue.executed(),
        };
        Ok((result, self.queue.take_log()))
    }
}

/// Aircraft traces and their app bindings for one `(n, run)` cell.
fn materialize(config: &ScenarioConfig, users: usize, seed: u64) -> Result<(MobilityTrace, Vec<Vec<AppConfig>>), ScenarioError> {
    let mut apps: Vec<Vec<AppConfig>> = vec![Vec::new(); users + 1];
    match &config.mobility {
        MobilitySource::Synthetic(corridor) => {
            let mut rng = RngStream::new(seed, "tracegen");
            let mobility =
                generate_synthetic_flights(users, &config.oca, corridor, config.sim_end.as_secs_f64(), &mut rng)?;
            let bundle = TraceBundle::from_mobility(mobility, &config.oca)?;
            for (node, trace) in bundle.messages.into_iter().enumerate() {
                apps[node].push(AppConfig::new(users, config.payload_bytes, trace)?);
            }
            Ok((bundle.mobility, apps))
        }
        MobilitySource::Files { mobility, apps: bindings } => {
            if mobility.node_count() != users {
                return Err(ConfigError::new(format!(
                    "mobility trace has {} nodes, scenario asks for {users}",
                    mobility.node_count()
                ))
                .into());
            }
            for (source, app) in bindings {
                apps[*source].push(app.clone());
            }
            Ok((mobility.clone(), apps))
        }
    }
}

/// Wires up run `run` with `users` aircraft: ground station at the OCA
/// center, every MAC registered, apps driven, first frame scheduled.
pub fn build_scenario(config: &ScenarioConfig, users: usize, run: u32) -> Result<Simulation, ScenarioError> {
    let seed = engine::run_seed(config.base_seed, run);
    let (mobility, apps) = materialize(config, users, seed)?;
    let mut queue = EventQueue::new();
    let mut scheduler = TdmaScheduler::new();
    let nodes = users + 1;
    for node in 0..nodes {
        scheduler.register(node)?;
    }
    for (node, node_apps) in apps.iter().enumerate() {
        for (index, app) in node_apps.iter().enumerate() {
            drive_app(app, node, index, config.sim_end, &mut queue)?;
        }
    }
    queue.schedule(SimTime::ZERO, EventKind::FrameStart { frame: 0 })?;
    let world = World {
        users,
        oca: config.oca,
        tdma: config.tdma,
        radio: config.radio.clone(),
        sim_end: config.sim_end,
        mobility,
        apps,
        macs: (0..nodes).map(MacQueue::new).collect(),
        scheduler,
        schedule: None,
        rng: RngStream::new(seed, "radio"),
        records: vec![Vec::new(); nodes],
        order: Vec::new(),
        in_flight: Vec::new(),
    };
    Ok(Simulation {
        users,
        run,
        seed,
        queue,
        world,
    })
}

/// Builds and executes a single `(n, run)` cell.
pub fn run(config: &ScenarioConfig, users: usize, run: u32) -> Result<RunResult, ScenarioError> {
    build_scenario(config, users, run)?.run()
}

/// Every `(n, run)` cell in order, sequentially.
pub fn run_sweep(config: &ScenarioConfig) -> Result<Vec<RunResult>, ScenarioError> {
    let mut out = Vec::new();
    for &n in &config.user_counts {
        for r in 0..config.runs {
            out.push(run(config, n, r)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub users: usize,
    pub runs: usize,
    pub sent_mean: f64,
    pub sent_std: f64,
    pub received_mean: f64,
    pub received_std: f64,
    /// Normal-approximation 95% half-width of the received mean; `None`
    /// when a single run makes it undefined.
    pub ci95: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation of sent/received per user count, in
/// first-seen order of user counts.
pub fn aggregate(results: &[RunResult]) -> Vec<Aggregate> {
    let mut users: Vec<usize> = Vec::new();
    for r in results {
        if !users.contains(&r.users) {
            users.push(r.users);
        }
    }
    users
        .into_iter()
        .map(|n| {
            let cell: Vec<&RunResult> = results.iter().filter(|r| r.users == n).collect();
            let sent: Vec<f64> = cell.iter().map(|r| r.sent as f64).collect();
            let received: Vec<f64> = cell.iter().map(|r| r.received as f64).collect();
            let (sent_mean, sent_std) = mean_std(&sent);
            let (received_mean, received_std) = mean_std(&received);
            let runs = cell.len();
            Aggregate {
                users: n,
                runs,
                sent_mean,
                sent_std,
                received_mean,
                received_std,
                ci95: (runs > 1).then(|| 1.96 * received_std / (runs as f64).sqrt()),
            }
        })
        .collect()
}

pub const RUNS_HEADER: &str = "run,n,seed,sent,received,lost_channel,out_of_range,still_queued";
pub const AGGREGATE_HEADER: &str = "n,sent_mean,received_mean,received_std,ci95";
pub const PACKETS_HEADER: &str = "n,run,source,sequence,destination,created_at,transmitted_at,delivered_at,disposition";

pub fn runs_csv(results: &[RunResult]) -> String {
    let mut out = format!("{RUNS_HEADER}\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.run, r.users, r.seed, r.sent, r.received, r.lost_channel, r.out_of_range, r.still_queued
        );
    }
    out
}

/// `ci95` is written as `NA` for single-run cells.
pub fn aggregate_csv(rows: &[Aggregate]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for a in rows {
        let ci = a.ci95.map_or_else(|| "NA".to_owned(), |c| c.to_string());
        let _ = writeln!(out, "{},{},{},{},{}", a.users, a.sent_mean, a.received_mean, a.received_std, ci);
    }
    out
}

pub fn packets_csv(results: &[RunResult]) -> String {
    let opt = |t: Option<SimTime>| t.map_or_else(String::new, |t| t.to_string());
    let mut out = format!("{PACKETS_HEADER}\n");
    for r in results {
        for p in &r.packets {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.users,
                r.run,
                p.source,
                p.sequence,
                p.destination,
                p.created_at,
                opt(p.transmitted_at),
                opt(p.delivered_at),
                p.disposition.as_str()
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::SnrRow;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            user_counts: vec![20],
            runs: 2,
            ..ScenarioConfig::table1()
        }
    }

    fn uniform_table(per: f64) -> SnrPerTable {
        SnrPerTable::new(vec![SnrRow {
            snr_db: 0.0,
            per,
            ber: 0.0,
        }])
        .unwrap()
    }

    #[test]
    fn node_count_includes_ground_station() {
        let sim = build_scenario(&ScenarioConfig::table1(), 100, 0).unwrap();
        assert_eq!(sim.node_count(), 101);
        assert_eq!(sim.registered().len(), 101);
        // 200 messages plus the first frame
        assert_eq!(sim.pending_events(), 201);
    }

    #[test]
    fn empty_scenario_runs_to_end() {
        let r = run(&ScenarioConfig::table1(), 0, 0).unwrap();
        assert_eq!((r.sent, r.received), (0, 0));
        // 100 000 frames plus frame 0 and the end event
        assert_eq!(r.events_executed, 100_002);
    }

    #[test]
    fn sent_is_twice_users_and_conserved() {
        let cfg = small();
        for r in run_sweep(&cfg).unwrap() {
            assert_eq!(r.sent, 40);
            assert!(r.is_conserved());
            assert_eq!(r.out_of_range + r.still_queued, 0);
            assert_eq!(r.received, r.ground_station_received());
            assert!(r.sent_per_node[..20].iter().all(|&s| s == 2));
        }
    }

    #[test]
    fn lossless_table_delivers_everything() {
        let mut cfg = small();
        cfg.radio.table = uniform_table(0.0);
        for r in run_sweep(&cfg).unwrap() {
            assert_eq!(r.received, r.sent);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cfg = ScenarioConfig {
            user_counts: vec![50],
            ..ScenarioConfig::table1()
        };
        let a = run(&cfg, 50, 0).unwrap();
        let b = run(&cfg, 50, 0).unwrap();
        assert_eq!(a, b);
        let c = run(&cfg, 50, 1).unwrap();
        assert_eq!(a.sent, c.sent);
        assert_ne!(a.packets, c.packets);
    }

    #[test]
    fn event_log_replays_identically() {
        let cfg = small();
        let log = || {
            let mut sim = build_scenario(&cfg, 20, 0).unwrap();
            sim.record_events();
            sim.run_with_log().unwrap().1.unwrap()
        };
        let (a, b) = (log(), log());
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
        assert_eq!(a.last().unwrap().kind, EventKind::SimEnd);
        assert!(a.iter().all(|e| e.time <= cfg.sim_end));
    }

    #[test]
    fn packets_go_out_in_the_next_frame() {
        let r = run(&small(), 20, 0).unwrap();
        for p in &r.packets {
            let tx = p.transmitted_at.unwrap();
            assert!(tx >= p.created_at);
            assert!(tx.as_nanos() - p.created_at.as_nanos() <= 200_000_000);
            if let Some(d) = p.delivered_at {
                // 370.4 km one-way is about 1.24 ms
                let delay = d.as_nanos() - tx.as_nanos();
                assert!((1_200_000..1_300_000).contains(&delay), "{delay}");
            }
        }
    }

    #[test]
    fn out_of_range_when_radio_range_short() {
        let mut cfg = small();
        cfg.radio.range_km = 300.0;
        let r = run(&cfg, 20, 0).unwrap();
        assert_eq!(r.out_of_range, r.sent);
        assert!(r.is_conserved());
    }

    #[test]
    fn still_queued_when_capacity_is_starved() {
        let mut cfg = small();
        // one 50 s slot per frame; at most 200 transmissions in the run
        cfg.tdma = TdmaConfig::new(SimTime::from_nanos(50_000_000_000), 1, 0).unwrap();
        cfg.user_counts = vec![400];
        let r = run(&cfg, 400, 0).unwrap();
        assert!(r.still_queued > 0);
        assert!(r.is_conserved());
    }

    #[test]
    fn aggregate_statistics() {
        let mk = |users, received| RunResult {
            users,
            run: 0,
            seed: 0,
            sent_per_node: vec![],
            received_per_node: vec![],
            sent: 10,
            received,
            lost_channel: 10 - received,
            out_of_range: 0,
            still_queued: 0,
            packets: vec![],
            events_executed: 0,
        };
        let rows = aggregate(&[mk(5, 8), mk(5, 6), mk(7, 9)]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].received_mean, 7.0);
        assert!((rows[0].received_std - 2f64.sqrt()).abs() < 1e-12);
        assert!((rows[0].ci95.unwrap() - 1.96).abs() < 1e-12);
        assert_eq!(rows[1].received_std, 0.0);
        assert_eq!(rows[1].ci95, None);
        assert!(aggregate_csv(&rows).ends_with("7,10,9,0,NA\n"));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let cfg = ScenarioConfig {
            runs: 0,
            ..ScenarioConfig::table1()
        };
        assert!(cfg.validate().unwrap_err().is_config());
        let cfg = ScenarioConfig {
            sim_end: SimTime::from_nanos(1_000_000_000),
            ..ScenarioConfig::table1()
        };
        assert!(matches!(cfg.validate(), Err(ScenarioError::Tracegen(_))));
    }
}
