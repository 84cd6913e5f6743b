#![no_main]

use dhrom::network::{parse_network, write_network};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = parse_network(text) {
        // Anything accepted must survive a write/parse round trip.
        let again = parse_network(&write_network(&net)).expect("written network parses");
        assert_eq!(again.node_count(), net.node_count());
        assert_eq!(again.pipe_count(), net.pipe_count());
    }
});
