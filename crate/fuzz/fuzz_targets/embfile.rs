#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((header, payload)) = tara_core::embfile::decode_payload(data) {
        assert_eq!(payload.len() as u64, header.rows as u64 * header.dim as u64);
        assert_eq!(&header.to_bytes()[..], &data[..tara_core::embfile::HEADER_LEN]);
    }
});
