//! Fuzz the report parser: arbitrary bytes must never panic, and any
//! accepted report must survive a pretty-print → parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

use fracheat::report::parse_report;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(report) = parse_report(text) else { return };

    let json = report.to_json_pretty().expect("accepted report serializes");
    let back = parse_report(&json).expect("own serialization parses");
    assert_eq!(
        report.deterministic_part().to_json_pretty().unwrap(),
        back.deterministic_part().to_json_pretty().unwrap(),
        "report round trip changed the deterministic content"
    );
});
