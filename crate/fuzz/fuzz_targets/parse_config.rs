//! Fuzz the run-configuration parser: arbitrary bytes must never panic, and
//! any accepted document must survive a serialize → parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

use fracheat::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_json(text) else { return };

    // Accepted configs expose derived parameter views without panicking.
    let _ = cfg.operator_params();
    let _ = cfg.solve_params();

    // Round trip: what we serialize, we parse back to the same value.
    let json = serde_json::to_string(&cfg).expect("accepted config serializes");
    let back = RunConfig::from_json(&json).expect("own serialization parses");
    assert_eq!(cfg, back, "config round trip changed the document");
});
