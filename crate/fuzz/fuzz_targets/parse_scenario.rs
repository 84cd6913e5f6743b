#![no_main]

use dhrom::network::parse_network;
use dhrom::simulate::{FlowDriver, Scenario};
use libfuzzer_sys::fuzz_target;

const GRID: &str = include_str!("../../crates/core/tests/data/example_grid.toml");

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(scenario) = Scenario::parse(text) else { return };
    let net = parse_network(GRID).unwrap();
    if let Ok(resolved) = scenario.resolve(&net) {
        let _ = FlowDriver::new(&net, resolved);
    }
});
