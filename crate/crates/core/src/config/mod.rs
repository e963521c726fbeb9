//! Settings files, scenario assembly and bundled Palu presets.

pub mod builder;
pub mod settings;

pub use builder::{build_scenario, build_scenario_explained, load_map, unknown_keys, ExplainLine, Origin};
pub use settings::{parse_settings, SettingsDoc};

use crate::error::{Error, Result};

pub const PALU_POPULATION: u64 = 381_572;
pub const NATIONAL_POPULATION: u64 = 275_773_800;
pub const NATIONAL_CARS: u64 = 17_168_862;
pub const CARS_PER_NODE: u64 = 100;

/// Simulated car nodes for a city: round(city/national * cars) cars,
/// grouped `cars_per_node` to a node and rounded up.
pub fn nodes_for_population(city_pop: u64, national_pop: u64, national_cars: u64, cars_per_node: u64) -> Result<u64> {
    if national_pop == 0 {
        return Err(Error::Domain("national population must be positive".into()));
    }
    if cars_per_node == 0 {
        return Err(Error::Domain("cars per node must be positive".into()));
    }
    let num = city_pop as u128 * national_cars as u128;
    let den = national_pop as u128;
    let cars = (2 * num + den) / (2 * den);
    let nodes = cars.div_ceil(cars_per_node as u128);
    u64::try_from(nodes).map_err(|_| Error::Domain("node count overflows".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetRouter {
    Epidemic,
    SprayAndWait,
}

impl PresetRouter {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "epidemic" => Some(Self::Epidemic),
            "snw" => Some(Self::SprayAndWait),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Epidemic => "epidemic",
            Self::SprayAndWait => "snw",
        }
    }

    fn class(self) -> &'static str {
        match self {
            Self::Epidemic => "EpidemicRouter",
            Self::SprayAndWait => "SprayAndWaitRouter",
        }
    }
}

struct Preset {
    name: &'static str,
    about: &'static str,
    speed: &'static str,
    range: &'static str,
    size: &'static str,
    buffer: &'static str,
    cars: u64,
}

const BT4: (&str, &str) = ("125k", "100");
const BT5: (&str, &str) = ("250k", "200");
const PSD: (&str, &str) = ("600k,700k", "7M");
const HVSR: (&str, &str) = ("1.6M,1.7M", "17M");
const BOTH: (&str, &str) = ("2.2M,2.4M", "24M");

const PRESETS: [Preset; 8] = [
    Preset {
        name: "bt4",
        about: "Bluetooth 4 interfaces",
        speed: BT4.0,
        range: BT4.1,
        size: BOTH.0,
        buffer: BOTH.1,
        cars: 238,
    },
    Preset {
        name: "bt5",
        about: "Bluetooth 5 interfaces",
        speed: BT5.0,
        range: BT5.1,
        size: BOTH.0,
        buffer: BOTH.1,
        cars: 238,
    },
    Preset {
        name: "msgsize-psd",
        about: "PSD image messages",
        speed: BT5.0,
        range: BT5.1,
        size: PSD.0,
        buffer: PSD.1,
        cars: 238,
    },
    Preset {
        name: "msgsize-hvsr",
        about: "HVSR image messages",
        speed: BT5.0,
        range: BT5.1,
        size: HVSR.0,
        buffer: HVSR.1,
        cars: 238,
    },
    Preset {
        name: "msgsize-both",
        about: "PSD and HVSR image messages",
        speed: BT5.0,
        range: BT5.1,
        size: BOTH.0,
        buffer: BOTH.1,
        cars: 238,
    },
    Preset {
        name: "density-50",
        about: "50 car nodes",
        speed: BT5.0,
        range: BT5.1,
        size: BOTH.0,
        buffer: BOTH.1,
        cars: 50,
    },
    Preset {
        name: "density-238",
        about: "238 car nodes",
        speed: BT5.0,
        range: BT5.1,
        size: BOTH.0,
        buffer: BOTH.1,
        cars: 238,
    },
    Preset {
        name: "density-400",
        about: "400 car nodes",
        speed: BT5.0,
        range: BT5.1,
        size: BOTH.0,
        buffer: BOTH.1,
        cars: 400,
    },
];

/// Synthetic road grid standing in for Palu: 8 km by 12 km at 200 m blocks.
pub const PALU_GRID: (usize, usize, f64) = (41, 61, 200.0);
pub const SEISMIC_STATION: (f64, f64) = (3000.0, 4000.0);
pub const BPBD_OFFICE: (f64, f64) = (4600.0, 7000.0);

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

pub fn preset_description(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.name == name).map(|p| p.about)
}

/// Settings text for a named preset.
pub fn preset_settings(name: &str, router: PresetRouter) -> Result<String> {
    let p = PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        Error::config("preset", format!("unknown preset {name:?}; try one of {}", preset_names().join(", ")))
    })?;
    let (cols, rows, spacing) = PALU_GRID;
    Ok(format!(
        "\
# Palu tsunami warning scenario: {about}, {router} routing.
# The message creation interval of 25-35 s is an assumption.

Scenario.name = palu-{name}-{router}
Scenario.seed = 1
Scenario.endTime = 1800
Scenario.updateInterval = 0.5
Scenario.nrofHostGroups = 3

Map.gridSize = {cols},{rows}
Map.gridSpacing = {spacing}

Group.router = {class}
Group.msgTtl = 1800
Group.interface.transmitSpeed = {speed}
Group.interface.transmitRange = {range}
SprayAndWaitRouter.nrofCopies = 6
SprayAndWaitRouter.binaryMode = false

# seismic station
Group1.groupID = s
Group1.nrofHosts = 1
Group1.movementModel = StationaryMovement
Group1.nodeLocation = {sx},{sy}
Group1.bufferSize = 100M

# BPBD office
Group2.groupID = b
Group2.nrofHosts = 1
Group2.movementModel = StationaryMovement
Group2.nodeLocation = {bx},{by}
Group2.bufferSize = 100M

Group3.groupID = c
Group3.nrofHosts = {cars}
Group3.movementModel = ShortestPathMapBasedMovement
Group3.speed = 2.7,13.9
Group3.waitTime = 0,120
Group3.bufferSize = {buffer}

Events.nrof = 1
Events1.interval = 25,35
Events1.size = {size}
Events1.hosts = s0
Events1.tohosts = b0
Events1.prefix = M

Report.reports = MessageStatsReport, DeliveredMessagesReport, MessageDelayReport, BufferOccupancyReport
Report.granularity = 10
",
        about = p.about,
        router = router.name(),
        class = router.class(),
        speed = p.speed,
        range = p.range,
        size = p.size,
        buffer = p.buffer,
        cars = p.cars,
        sx = SEISMIC_STATION.0,
        sy = SEISMIC_STATION.1,
        bx = BPBD_OFFICE.0,
        by = BPBD_OFFICE.1,
    ))
}
