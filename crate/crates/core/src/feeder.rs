//! Radial feeder model: topology ingestion, per-link routing and the
//! headroom (ampacity minus base-load current) left for EV charging.
//!
//! Lines are stored in breadth-first order from the source bus, so line `l`
//! always feeds bus `l + 1` and every ancestor of a line has a smaller index.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Phase-to-neutral voltage of the 416 V (phase-to-phase) feeder.
pub const NOMINAL_PHASE_VOLTAGE: f64 = 240.0;

pub const MINUTES_PER_DAY: usize = 1440;

/// Charger power cap in kW.
pub const CHARGER_POWER_KW: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        };
        f.write_str(s)
    }
}

/// Phase connection of a base load.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadPhase {
    Single(Phase),
    Balanced,
}

impl LoadPhase {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" | "1" => Some(LoadPhase::Single(Phase::A)),
            "B" | "2" => Some(LoadPhase::Single(Phase::B)),
            "C" | "3" => Some(LoadPhase::Single(Phase::C)),
            "ABC" | "3PH" => Some(LoadPhase::Balanced),
            _ => None,
        }
    }
}

impl fmt::Display for LoadPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadPhase::Single(p) => write!(f, "{p}"),
            LoadPhase::Balanced => f.write_str("ABC"),
        }
    }
}

/// How physical lines map onto capacity-constrained links.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseMode {
    /// One link per line; every load and charger shares one conductor.
    Single,
    /// Three links per line (`3 * line + phase`); chargers draw a balanced
    /// current on all three.
    Three,
}

impl PhaseMode {
    pub fn links_per_line(self) -> usize {
        match self {
            PhaseMode::Single => 1,
            PhaseMode::Three => 3,
        }
    }

    /// Per-conductor current of a charger drawing `power_kw` at `voltage`.
    pub fn charger_current(self, power_kw: f64, voltage: f64) -> f64 {
        power_kw * 1000.0 / (voltage * self.links_per_line() as f64)
    }

    /// Power in kW delivered by a charger drawing `current` per conductor.
    pub fn charger_power_kw(self, current: f64, voltage: f64) -> f64 {
        current * voltage * self.links_per_line() as f64 / 1000.0
    }
}

/// Line-code to ampacity lookup. Defaults to the standard table for the
/// European LV test feeder line codes.
#[derive(Clone, Debug, PartialEq)]
pub struct AmpacityTable {
    entries: Vec<(String, f64)>,
}

impl Default for AmpacityTable {
    fn default() -> Self {
        let entries = [
            ("2c_.007", 56.0),
            ("2c_.0225", 83.0),
            ("2c_16", 83.0),
            ("35_SAC_XSC", 110.0),
            ("4c_.06", 210.0),
            ("4c_.1", 560.0),
            ("4c_.35", 210.0),
            ("4c_185", 405.0),
            ("4c_70", 560.0),
            ("4c_95_SAC_XC", 180.0),
        ];
        AmpacityTable { entries: entries.iter().map(|(c, a)| (c.to_string(), *a)).collect() }
    }
}

impl AmpacityTable {
    pub fn get(&self, code: &str) -> Option<f64> {
        self.entries.iter().find(|(c, _)| c == code).map(|(_, a)| *a)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    /// Parses a `line_code,ampacity_a` table.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, fields) in csv_rows(text, path, &["line_code", "ampacity_a"])? {
            let code = fields[0].to_string();
            let amp = parse_f64(fields[1], path, lineno, "ampacity_a")?;
            if !(amp > 0.0) || !amp.is_finite() {
                return Err(Error::parse(path, lineno, format!("ampacity must be positive, got {amp}")));
            }
            if entries.iter().any(|(c, _)| *c == code) {
                return Err(Error::parse(path, lineno, format!("duplicate line code `{code}`")));
            }
            entries.push((code, amp));
        }
        Ok(AmpacityTable { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("line_code,ampacity_a\n");
        for (c, a) in &self.entries {
            out.push_str(&format!("{c},{a}\n"));
        }
        out
    }
}

/// One row of a lines file, before validation.
#[derive(Clone, Debug, PartialEq)]
pub struct LineRecord {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub phases: String,
    pub line_code: String,
    pub length_m: f64,
}

/// One row of a loads file.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadRecord {
    pub id: String,
    pub bus: String,
    pub phase: LoadPhase,
    pub shape_file: String,
}

pub fn parse_lines(text: &str, path: &Path) -> Result<Vec<LineRecord>> {
    let header = ["line_id", "from_bus", "to_bus", "phases", "line_code", "length_m"];
    csv_rows(text, path, &header)?
        .into_iter()
        .map(|(lineno, f)| {
            Ok(LineRecord {
                id: f[0].to_string(),
                from_bus: f[1].to_string(),
                to_bus: f[2].to_string(),
                phases: f[3].to_string(),
                line_code: f[4].to_string(),
                length_m: parse_f64(f[5], path, lineno, "length_m")?,
            })
        })
        .collect()
}

pub fn parse_loads(text: &str, path: &Path) -> Result<Vec<LoadRecord>> {
    let header = ["load_id", "bus", "phase", "shape_file"];
    csv_rows(text, path, &header)?
        .into_iter()
        .map(|(lineno, f)| {
            let phase = LoadPhase::parse(f[2])
                .ok_or_else(|| Error::parse(path, lineno, format!("unknown phase `{}`", f[2])))?;
            Ok(LoadRecord { id: f[0].to_string(), bus: f[1].to_string(), phase, shape_file: f[3].to_string() })
        })
        .collect()
}

/// Parses a load shape file: one non-negative kW value per minute of the day.
pub fn parse_load_shape(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut samples = Vec::with_capacity(MINUTES_PER_DAY);
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let v = parse_f64(raw, path, i + 1, "kW sample")?;
        if v < 0.0 {
            return Err(Error::parse(path, i + 1, format!("negative load sample {v}")));
        }
        samples.push(v);
    }
    if samples.len() != MINUTES_PER_DAY {
        return Err(Error::parse(
            path,
            text.lines().count(),
            format!("expected {MINUTES_PER_DAY} samples, found {}", samples.len()),
        ));
    }
    Ok(samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    /// Position in source-to-leaf (BFS) order.
    pub index: usize,
    pub id: String,
    /// Upstream end (towards the source).
    pub from_bus: String,
    pub to_bus: String,
    pub phases: String,
    pub line_code: String,
    /// Per-phase current limit in amperes.
    pub ampacity: f64,
    pub length_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChargerSite {
    pub id: usize,
    /// Load site the charger belongs to.
    pub site: String,
    pub bus: String,
    /// Maximum charging current per conductor.
    pub max_rate: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct Feeder {
    source_bus: String,
    buses: Vec<String>,
    bus_index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    lines: Vec<Line>,
    loads: Vec<LoadRecord>,
    chargers: Vec<ChargerSite>,
}

impl Feeder {
    /// Validates a radial topology rooted at `source_bus` and attaches one
    /// charger of `charger_rate` amperes to every load site.
    pub fn from_records(
        source_bus: &str,
        lines: &[LineRecord],
        codes: &AmpacityTable,
        loads: &[LoadRecord],
        charger_rate: f64,
    ) -> Result<Self> {
        if !(charger_rate > 0.0) {
            return Err(Error::Data(format!("charger rate must be positive, got {charger_rate}")));
        }

        let mut adjacency: HashMap<&str, Vec<(usize, &str)>> = HashMap::new();
        adjacency.entry(source_bus).or_default();
        for (k, rec) in lines.iter().enumerate() {
            if rec.from_bus == rec.to_bus {
                return Err(Error::Topology(format!(
                    "line {} connects bus {} to itself (cycle)",
                    rec.id, rec.from_bus
                )));
            }
            adjacency.entry(&rec.from_bus).or_default().push((k, &rec.to_bus));
            adjacency.entry(&rec.to_bus).or_default().push((k, &rec.from_bus));
        }

        let mut buses = vec![source_bus.to_string()];
        let mut bus_index = HashMap::from([(source_bus.to_string(), 0usize)]);
        let mut parent = vec![None];
        let mut via_line: Vec<Option<usize>> = vec![None];
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            let name = buses[u].clone();
            for &(k, next) in &adjacency[name.as_str()] {
                if via_line[u] == Some(k) {
                    continue;
                }
                if bus_index.contains_key(next) {
                    return Err(Error::Topology(format!(
                        "line {} closes a cycle between buses {} and {}",
                        lines[k].id, name, next
                    )));
                }
                let v = buses.len();
                buses.push(next.to_string());
                bus_index.insert(next.to_string(), v);
                parent.push(Some(u));
                via_line.push(Some(k));
                queue.push_back(v);
            }
        }
        if buses.len() < adjacency.len() {
            let mut missing: Vec<&str> = adjacency.keys().copied().filter(|b| !bus_index.contains_key(*b)).collect();
            missing.sort_unstable();
            return Err(Error::Topology(format!("bus {} is not connected to source bus {source_bus}", missing[0])));
        }

        let mut ordered = Vec::with_capacity(lines.len());
        for (b, k) in via_line.iter().enumerate().skip(1) {
            let rec = &lines[k.expect("non-source bus has a feeding line")];
            let ampacity = codes
                .get(&rec.line_code)
                .ok_or_else(|| Error::UnknownLineCode { line_id: rec.id.clone(), code: rec.line_code.clone() })?;
            ordered.push(Line {
                index: b - 1,
                id: rec.id.clone(),
                from_bus: buses[parent[b].unwrap()].clone(),
                to_bus: buses[b].clone(),
                phases: rec.phases.clone(),
                line_code: rec.line_code.clone(),
                ampacity,
                length_m: rec.length_m,
            });
        }

        let mut chargers = Vec::with_capacity(loads.len());
        for (i, load) in loads.iter().enumerate() {
            match bus_index.get(&load.bus) {
                None => {
                    return Err(Error::Topology(format!("load {} is attached to unknown bus {}", load.id, load.bus)))
                }
                Some(0) => return Err(Error::Topology(format!("load {} is attached to the source bus", load.id))),
                Some(_) => {}
            }
            chargers.push(ChargerSite {
                id: i,
                site: load.id.clone(),
                bus: load.bus.clone(),
                max_rate: charger_rate,
                weight: 1.0,
            });
        }

        Ok(Feeder {
            source_bus: source_bus.to_string(),
            buses,
            bus_index,
            parent,
            lines: ordered,
            loads: loads.to_vec(),
            chargers,
        })
    }

    pub fn source_bus(&self) -> &str {
        &self.source_bus
    }

    /// Buses in BFS order; `buses()[0]` is the source.
    pub fn buses(&self) -> &[String] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn loads(&self) -> &[LoadRecord] {
        &self.loads
    }

    pub fn chargers(&self) -> &[ChargerSite] {
        &self.chargers
    }

    pub fn bus_position(&self, bus: &str) -> Option<usize> {
        self.bus_index.get(bus).copied()
    }

    /// Lines on the path from the source to `bus`, in ascending order.
    pub fn route_to(&self, bus: &str) -> Vec<usize> {
        let mut route = Vec::new();
        let mut b = self.bus_index[bus];
        while let Some(p) = self.parent[b] {
            route.push(b - 1);
            b = p;
        }
        route.reverse();
        route
    }

    pub fn charger_route(&self, i: usize) -> Vec<usize> {
        self.route_to(&self.chargers[i].bus)
    }

    pub fn load_route(&self, i: usize) -> Vec<usize> {
        self.route_to(&self.loads[i].bus)
    }

    /// Longest charger route, in lines.
    pub fn max_route_len(&self) -> usize {
        (0..self.chargers.len()).map(|i| self.charger_route(i).len()).max().unwrap_or(0)
    }

    /// Copy with every charger capped at `rate` amperes.
    pub fn with_charger_rate(&self, rate: f64) -> Feeder {
        let mut f = self.clone();
        for c in &mut f.chargers {
            c.max_rate = rate;
        }
        f
    }

    /// Copy keeping only the chargers listed in `keep`, renumbered in the
    /// given order. Base loads are unaffected.
    pub fn with_chargers(&self, keep: &[usize]) -> Feeder {
        let mut f = self.clone();
        f.chargers = keep
            .iter()
            .enumerate()
            .map(|(new_id, &i)| ChargerSite { id: new_id, ..self.chargers[i].clone() })
            .collect();
        f
    }

    /// Keeps the first `m` lines in source-to-leaf order. Loads and chargers
    /// beyond the cut move to their nearest retained ancestor bus.
    pub fn truncated(&self, m: usize) -> Result<Feeder> {
        if m == 0 || m > self.lines.len() {
            return Err(Error::Config(format!("cannot truncate a {}-line feeder to {m} lines", self.lines.len())));
        }
        let retained = |mut b: usize| {
            while b > m {
                b = self.parent[b].expect("only the source has no parent");
            }
            b
        };
        let reattach = |bus: &str| -> Result<String> {
            let b = retained(self.bus_index[bus]);
            if b == 0 {
                return Err(Error::Topology(format!("truncating to {m} lines leaves bus {bus} at the source")));
            }
            Ok(self.buses[b].clone())
        };

        let mut f = self.clone();
        f.lines.truncate(m);
        f.buses.truncate(m + 1);
        f.parent.truncate(m + 1);
        f.bus_index = f.buses.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        for load in &mut f.loads {
            load.bus = reattach(&load.bus)?;
        }
        for c in &mut f.chargers {
            c.bus = reattach(&c.bus)?;
        }
        Ok(f)
    }

    pub fn to_lines_csv(&self) -> String {
        let mut out = String::from("line_id,from_bus,to_bus,phases,line_code,length_m\n");
        for l in &self.lines {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                l.id, l.from_bus, l.to_bus, l.phases, l.line_code, l.length_m
            ));
        }
        out
    }

    pub fn to_loads_csv(&self) -> String {
        let mut out = String::from("load_id,bus,phase,shape_file\n");
        for l in &self.loads {
            out.push_str(&format!("{},{},{},{}\n", l.id, l.bus, l.phase, l.shape_file));
        }
        out
    }
}

/// Reads a feeder from its lines/codes/loads files. The source bus is the
/// upstream end of the first line; chargers default to the balanced
/// three-phase current of a 20 kW charger at 240 V.
pub fn parse_feeder(lines_path: &Path, codes_path: Option<&Path>, loads_path: &Path) -> Result<Feeder> {
    let lines = parse_lines(&read_text(lines_path)?, lines_path)?;
    let codes = match codes_path {
        Some(p) => AmpacityTable::read(p)?,
        None => AmpacityTable::default(),
    };
    let loads = parse_loads(&read_text(loads_path)?, loads_path)?;
    let source = lines
        .first()
        .map(|l| l.from_bus.clone())
        .ok_or_else(|| Error::parse(lines_path, 1, "lines file has no lines"))?;
    let rate = PhaseMode::Three.charger_current(CHARGER_POWER_KW, NOMINAL_PHASE_VOLTAGE);
    Feeder::from_records(&source, &lines, &codes, &loads, rate)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadShape {
    pub load_id: String,
    pub bus: String,
    /// Per-minute power in kW.
    pub samples: Vec<f64>,
}

/// Base-load shapes keyed by load id.
#[derive(Clone, Debug, Default)]
pub struct LoadShapes {
    shapes: HashMap<String, LoadShape>,
}

impl LoadShapes {
    pub fn new(shapes: impl IntoIterator<Item = LoadShape>) -> Result<Self> {
        let mut map = HashMap::new();
        for s in shapes {
            if s.samples.len() != MINUTES_PER_DAY {
                return Err(Error::Data(format!(
                    "load shape {} has {} samples, expected {MINUTES_PER_DAY}",
                    s.load_id,
                    s.samples.len()
                )));
            }
            if let Some(v) = s.samples.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::Data(format!("load shape {} has sample {v}", s.load_id)));
            }
            map.insert(s.load_id.clone(), s);
        }
        Ok(LoadShapes { shapes: map })
    }

    /// Constant zero base load for every load of `feeder`.
    pub fn zeros(feeder: &Feeder) -> Self {
        Self::constant(feeder, 0.0)
    }

    pub fn constant(feeder: &Feeder, kw: f64) -> Self {
        let shapes: Vec<LoadShape> = feeder
            .loads()
            .iter()
            .map(|l| LoadShape { load_id: l.id.clone(), bus: l.bus.clone(), samples: vec![kw; MINUTES_PER_DAY] })
            .collect();
        Self::new(shapes).expect("constant non-negative shapes are valid")
    }

    pub fn get(&self, load_id: &str) -> Option<&LoadShape> {
        self.shapes.get(load_id)
    }

    /// Base power of every load of `feeder` at `minute`, in feeder load order.
    pub fn kw_at(&self, feeder: &Feeder, minute: usize) -> Result<Vec<f64>> {
        if minute >= MINUTES_PER_DAY {
            return Err(Error::Data(format!("minute {minute} outside 0..{MINUTES_PER_DAY}")));
        }
        feeder
            .loads()
            .iter()
            .map(|l| {
                self.shapes
                    .get(&l.id)
                    .map(|s| s.samples[minute])
                    .ok_or_else(|| Error::Data(format!("no load shape for load {} at bus {}", l.id, l.bus)))
            })
            .collect()
    }
}

/// Reads every load's shape file, resolved against `shapes_dir`.
pub fn read_load_shapes(feeder: &Feeder, shapes_dir: &Path) -> Result<LoadShapes> {
    let shapes = feeder
        .loads()
        .iter()
        .map(|l| {
            let path = shapes_dir.join(&l.shape_file);
            let samples = parse_load_shape(&read_text(&path)?, &path)?;
            Ok(LoadShape { load_id: l.id.clone(), bus: l.bus.clone(), samples })
        })
        .collect::<Result<Vec<_>>>()?;
    LoadShapes::new(shapes)
}

/// Link headroom at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Capacity {
    /// Ampacity minus base-load current, clamped at zero.
    pub capacity: Vec<f64>,
    pub base_current: Vec<f64>,
    pub ampacity: Vec<f64>,
    /// Links whose base load alone exceeds the ampacity.
    pub overloaded: Vec<usize>,
}

/// Precomputed mapping from base loads to the links they load, under the
/// constant-voltage model.
#[derive(Clone, Debug)]
pub struct CapacityModel {
    mode: PhaseMode,
    voltage: f64,
    ampacity: Vec<f64>,
    load_links: Vec<Vec<(usize, f64)>>,
}

impl CapacityModel {
    pub fn new(feeder: &Feeder, mode: PhaseMode, voltage: f64) -> Result<Self> {
        if !(voltage > 0.0) {
            return Err(Error::Config(format!("nominal voltage must be positive, got {voltage}")));
        }
        let per = mode.links_per_line();
        let ampacity = feeder.lines().iter().flat_map(|l| std::iter::repeat_n(l.ampacity, per)).collect();
        let load_links = (0..feeder.loads().len())
            .map(|i| {
                let route = feeder.load_route(i);
                match (mode, feeder.loads()[i].phase) {
                    (PhaseMode::Single, _) => route.iter().map(|&l| (l, 1.0)).collect(),
                    (PhaseMode::Three, LoadPhase::Single(p)) => {
                        route.iter().map(|&l| (3 * l + p.index(), 1.0)).collect()
                    }
                    (PhaseMode::Three, LoadPhase::Balanced) => {
                        route.iter().flat_map(|&l| (0..3).map(move |p| (3 * l + p, 1.0 / 3.0))).collect()
                    }
                }
            })
            .collect();
        Ok(CapacityModel { mode, voltage, ampacity, load_links })
    }

    pub fn mode(&self) -> PhaseMode {
        self.mode
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    pub fn ampacity(&self) -> &[f64] {
        &self.ampacity
    }

    /// Headroom given the base power (kW) of every load, in feeder load order.
    pub fn capacity(&self, load_kw: &[f64]) -> Capacity {
        assert_eq!(load_kw.len(), self.load_links.len(), "one power value per load");
        let mut base = vec![0.0; self.ampacity.len()];
        for (links, kw) in self.load_links.iter().zip(load_kw) {
            let amps = kw * 1000.0 / self.voltage;
            for &(l, share) in links {
                base[l] += amps * share;
            }
        }
        let mut overloaded = Vec::new();
        let capacity = self
            .ampacity
            .iter()
            .zip(&base)
            .enumerate()
            .map(|(l, (a, b))| {
                if b > a {
                    overloaded.push(l);
                }
                (a - b).max(0.0)
            })
            .collect();
        if !overloaded.is_empty() {
            log::warn!("base load alone exceeds ampacity on {} link(s)", overloaded.len());
        }
        Capacity { capacity, base_current: base, ampacity: self.ampacity.clone(), overloaded }
    }
}

/// Link capacities at `minute` of the day.
pub fn available_capacity(
    feeder: &Feeder,
    shapes: &LoadShapes,
    minute: usize,
    voltage: f64,
    mode: PhaseMode,
) -> Result<Capacity> {
    let model = CapacityModel::new(feeder, mode, voltage)?;
    Ok(model.capacity(&shapes.kw_at(feeder, minute)?))
}

/// File locations of a feeder data set.
#[derive(Clone, Debug)]
pub struct FeederFiles {
    pub lines: PathBuf,
    pub codes: Option<PathBuf>,
    pub loads: PathBuf,
    pub shapes_dir: PathBuf,
}

impl FeederFiles {
    /// Conventional layout: `lines.csv`, `codes.csv`, `loads.csv` with shape
    /// paths relative to the directory.
    pub fn in_dir(dir: &Path) -> Self {
        let codes = dir.join("codes.csv");
        FeederFiles {
            lines: dir.join("lines.csv"),
            codes: codes.exists().then_some(codes),
            loads: dir.join("loads.csv"),
            shapes_dir: dir.to_path_buf(),
        }
    }

    pub fn load(&self) -> Result<(Feeder, LoadShapes)> {
        let feeder = parse_feeder(&self.lines, self.codes.as_deref(), &self.loads)?;
        let shapes = read_load_shapes(&feeder, &self.shapes_dir)?;
        Ok((feeder, shapes))
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_f64(s: &str, path: &Path, line: usize, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(path, line, format!("invalid {what} `{s}`")))
}

/// Splits a comma-separated file with a fixed header into (line number, fields).
fn csv_rows<'a>(text: &'a str, path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let got: Vec<&str> = first.split(',').map(str::trim).collect();
    if got != header {
        return Err(Error::parse(path, 1, format!("expected header `{}`, found `{}`", header.join(","), first.trim())));
    }
    lines
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {} fields, found {}", header.len(), fields.len()),
                ));
            }
            Ok((i + 1, fields))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, from: &str, to: &str, code: &str) -> LineRecord {
        LineRecord {
            id: id.into(),
            from_bus: from.into(),
            to_bus: to.into(),
            phases: "ABC".into(),
            line_code: code.into(),
            length_m: 1.0,
        }
    }

    fn load(id: &str, bus: &str, phase: LoadPhase) -> LoadRecord {
        LoadRecord { id: id.into(), bus: bus.into(), phase, shape_file: format!("{id}.csv") }
    }

    fn chain() -> Feeder {
        let lines = [rec("l1", "S", "A", "4c_70"), rec("l2", "A", "B", "2c_.0225")];
        let loads = [load("L1", "A", LoadPhase::Single(Phase::A)), load("L2", "B", LoadPhase::Single(Phase::B))];
        Feeder::from_records("S", &lines, &AmpacityTable::default(), &loads, 10.0).unwrap()
    }

    #[test]
    fn three_bus_chain() {
        let f = chain();
        assert_eq!(f.lines().len(), 2);
        assert_eq!(f.buses(), ["S", "A", "B"]);
        assert_eq!(f.lines()[0].ampacity, 560.0);
        assert_eq!(f.lines()[1].ampacity, 83.0);
        assert_eq!(f.charger_route(0), vec![0]);
        assert_eq!(f.charger_route(1), vec![0, 1]);
    }

    #[test]
    fn lines_are_reordered_source_to_leaf() {
        let lines = [rec("l2", "B", "A", "4c_70"), rec("l1", "S", "A", "4c_70")];
        let f = Feeder::from_records("S", &lines, &AmpacityTable::default(), &[], 1.0).unwrap();
        assert_eq!(f.lines()[0].id, "l1");
        assert_eq!(f.lines()[1].id, "l2");
        assert_eq!(f.lines()[1].from_bus, "A");
        assert_eq!(f.lines()[1].to_bus, "B");
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let lines = [rec("l1", "S", "A", "4c_70"), rec("l2", "A", "A", "4c_70")];
        let err = Feeder::from_records("S", &lines, &AmpacityTable::default(), &[], 1.0).unwrap_err();
        assert!(matches!(err, Error::Topology(ref m) if m.contains("cycle")), "{err}");
    }

    #[test]
    fn cycle_detected() {
        let lines = [rec("l1", "S", "A", "4c_70"), rec("l2", "A", "B", "4c_70"), rec("l3", "B", "S", "4c_70")];
        let err = Feeder::from_records("S", &lines, &AmpacityTable::default(), &[], 1.0).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn parallel_lines_are_a_cycle() {
        let lines = [rec("l1", "S", "A", "4c_70"), rec("l2", "S", "A", "4c_70")];
        assert!(Feeder::from_records("S", &lines, &AmpacityTable::default(), &[], 1.0).is_err());
    }

    #[test]
    fn disconnected_bus() {
        let lines = [rec("l1", "S", "A", "4c_70"), rec("l2", "X", "Y", "4c_70")];
        let err = Feeder::from_records("S", &lines, &AmpacityTable::default(), &[], 1.0).unwrap_err();
        assert!(matches!(err, Error::Topology(ref m) if m.contains("not connected")), "{err}");
    }

    #[test]
    fn unknown_line_code() {
        let lines = [rec("l1", "S", "A", "nope")];
        let err = Feeder::from_records("S", &lines, &AmpacityTable::default(), &[], 1.0).unwrap_err();
        assert!(matches!(err, Error::UnknownLineCode { ref code, .. } if code == "nope"));
    }

    #[test]
    fn load_on_unknown_bus() {
        let lines = [rec("l1", "S", "A", "4c_70")];
        let loads = [load("L", "Z", LoadPhase::Balanced)];
        let err = Feeder::from_records("S", &lines, &AmpacityTable::default(), &loads, 1.0).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn parse_errors_name_file_and_line() {
        let path = Path::new("lines.csv");
        let text = "line_id,from_bus,to_bus,phases,line_code,length_m\nl1,S,A,ABC,4c_70,oops\n";
        let err = parse_lines(text, path).unwrap_err();
        assert_eq!(err.to_string(), "lines.csv:2: invalid length_m `oops`");
        let err = parse_lines("bad,header\n", path).unwrap_err();
        assert!(err.to_string().starts_with("lines.csv:1:"));
    }

    #[test]
    fn codes_file_overrides_default() {
        let codes = AmpacityTable::parse("line_code,ampacity_a\nfoo,12.5\n", Path::new("c")).unwrap();
        assert_eq!(codes.get("foo"), Some(12.5));
        assert_eq!(codes.get("4c_70"), None);
        assert!(AmpacityTable::parse("line_code,ampacity_a\nfoo,0\n", Path::new("c")).is_err());
        assert_eq!(AmpacityTable::default().get("4c_185"), Some(405.0));
    }

    #[test]
    fn load_shape_length_and_sign() {
        let ok: String = "1.5\n".repeat(MINUTES_PER_DAY);
        assert_eq!(parse_load_shape(&ok, Path::new("s")).unwrap().len(), MINUTES_PER_DAY);
        let short: String = "1.5\n".repeat(10);
        assert!(parse_load_shape(&short, Path::new("s")).is_err());
        let neg = format!("-1\n{}", "1\n".repeat(MINUTES_PER_DAY - 1));
        assert!(parse_load_shape(&neg, Path::new("s")).is_err());
    }

    #[test]
    fn zero_base_load_leaves_full_ampacity() {
        let f = chain();
        let cap = available_capacity(&f, &LoadShapes::zeros(&f), 0, 240.0, PhaseMode::Single).unwrap();
        assert_eq!(cap.capacity, vec![560.0, 83.0]);
        assert!(cap.overloaded.is_empty());
    }

    #[test]
    fn single_load_behind_83_amp_line() {
        // 2.4 kW at 240 V is 10 A.
        let lines = [rec("l1", "S", "A", "2c_16")];
        let loads = [load("L1", "A", LoadPhase::Single(Phase::A))];
        let f = Feeder::from_records("S", &lines, &AmpacityTable::default(), &loads, 1.0).unwrap();
        let shapes = LoadShapes::constant(&f, 2.4);
        let cap = available_capacity(&f, &shapes, 100, 240.0, PhaseMode::Single).unwrap();
        assert!((cap.capacity[0] - 73.0).abs() < 1e-12);
    }

    #[test]
    fn three_phase_loads_hit_their_own_phase() {
        let f = chain();
        let shapes = LoadShapes::constant(&f, 2.4);
        let cap = available_capacity(&f, &shapes, 0, 240.0, PhaseMode::Three).unwrap();
        // line 0 carries L1 (phase A) and L2 (phase B); line 1 carries L2 only.
        let expect = [550.0, 550.0, 560.0, 83.0, 73.0, 83.0];
        for (c, e) in cap.capacity.iter().zip(expect) {
            assert!((c - e).abs() < 1e-12, "{:?}", cap.capacity);
        }
    }

    #[test]
    fn overload_clamps_at_zero() {
        let f = chain();
        let shapes = LoadShapes::constant(&f, 30.0); // 125 A on the 83 A line
        let cap = available_capacity(&f, &shapes, 0, 240.0, PhaseMode::Single).unwrap();
        assert_eq!(cap.capacity[1], 0.0);
        assert_eq!(cap.overloaded, vec![1]);
    }

    #[test]
    fn missing_shape_is_a_data_error() {
        let f = chain();
        let shapes = LoadShapes::new(vec![]).unwrap();
        let err = available_capacity(&f, &shapes, 0, 240.0, PhaseMode::Single).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn truncation_reattaches_downstream_chargers() {
        let f = chain().truncated(1).unwrap();
        assert_eq!(f.lines().len(), 1);
        assert_eq!(f.chargers()[1].bus, "A");
        assert_eq!(f.loads()[1].bus, "A");
        assert_eq!(f.charger_route(1), vec![0]);
    }

    #[test]
    fn charger_current_conversion() {
        let three = PhaseMode::Three.charger_current(20.0, 240.0);
        assert!((three - 27.777_777_777_777_78).abs() < 1e-12);
        assert!((PhaseMode::Three.charger_power_kw(three, 240.0) - 20.0).abs() < 1e-12);
        assert!((PhaseMode::Single.charger_current(20.0, 240.0) - 83.333_333_333_333_33).abs() < 1e-12);
    }
}
