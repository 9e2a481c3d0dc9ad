#![allow(dead_code)]

use loe_core::replay::FlightLog;
use loe_core::sim::{fly_scenario, FaultEvent, Scenario, ScenarioConfig, SensorNoiseModel, VehicleParams};

/// Seconds of flight kept after an ejection. The simulated controller has no
/// fault-tolerant mode, so past roughly half a second the vehicle tumbles far
/// outside the regime the observation model describes.
pub const POST_FAULT_WINDOW: f64 = 0.3;

pub const FLYING: [Scenario; 3] = [Scenario::Hover, Scenario::StepManeuvers, Scenario::Wind];

/// Ejection `i` of the standard corpus: scenario, failed actuator, fault
/// time, attitude and both seeds all vary with `i`.
pub fn fault_case(i: u64) -> ScenarioConfig {
    let scenario = FLYING[(i % 3) as usize];
    let actuator = (i % 4) as usize + 1;
    let fault_time = 2.0 + 0.1 * i as f64 + 0.013 * (i % 7) as f64;
    let mut cfg = ScenarioConfig::new(scenario, fault_time + POST_FAULT_WINDOW)
        .with_seed(i)
        .with_fault(FaultEvent::ejection(actuator, fault_time).unwrap());
    cfg.attitude = [0.03 * ((i % 5) as f64 - 2.0), 0.03 * ((i % 7) as f64 - 3.0)];
    cfg
}

pub fn noise(seed: u64) -> SensorNoiseModel {
    SensorNoiseModel {
        rng_seed: seed,
        ..Default::default()
    }
}

pub fn fly(cfg: &ScenarioConfig, noise_seed: u64) -> FlightLog {
    fly_scenario(cfg, &VehicleParams::default(), &noise(noise_seed)).unwrap()
}

pub fn fault_corpus(n: u64) -> Vec<(String, FlightLog)> {
    (0..n)
        .map(|i| (format!("eject-{i:02}"), fly(&fault_case(i), 1000 + i)))
        .collect()
}

/// Fault-free flights, one per flying scenario and seed.
pub fn clean_corpus(per_scenario: u64, duration: f64) -> Vec<(String, FlightLog)> {
    let mut logs = Vec::new();
    for (s, scenario) in FLYING.iter().enumerate() {
        for j in 0..per_scenario {
            let seed = 500 + 10 * s as u64 + j;
            let cfg = ScenarioConfig::new(*scenario, duration).with_seed(seed);
            logs.push((format!("clean-{}-{j}", scenario.name()), fly(&cfg, seed)));
        }
    }
    logs
}

pub mod oracle;
