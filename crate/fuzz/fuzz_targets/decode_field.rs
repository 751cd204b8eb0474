//! Fuzz the field decoder: a two-byte length prefix splits the input into
//! sidecar JSON and binary payload, mirroring the `<stem>.json` +
//! `<stem>.bin` pair on disk. Neither stage may panic, and anything that
//! decodes must re-encode to the exact same bytes.

#![no_main]

use libfuzzer_sys::fuzz_target;

use fracheat::io::{decode_field_bytes, encode_field, parse_sidecar};

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let split = (u16::from_le_bytes([data[0], data[1]]) as usize) % (data.len() - 1);
    let (sidecar_bytes, payload) = data[2..].split_at(split.min(data.len() - 2));

    let Ok(sidecar) = parse_sidecar(sidecar_bytes) else { return };
    let Ok(field) = decode_field_bytes(&sidecar, payload) else { return };

    let (sidecar2, payload2) = encode_field(&field);
    assert_eq!(sidecar, sidecar2, "sidecar changed across a decode/encode trip");
    assert_eq!(payload, &payload2[..], "payload changed across a decode/encode trip");
});
