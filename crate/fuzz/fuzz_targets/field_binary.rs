#![no_main]

use libfuzzer_sys::fuzz_target;
use strichartz_core::fields::io::{decode_binary, encode_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = decode_binary(data) {
        // Anything accepted must re-encode to the same bytes.
        assert_eq!(encode_binary(&field), data);
    }
});
