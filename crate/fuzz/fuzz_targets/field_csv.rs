#![no_main]

use libfuzzer_sys::fuzz_target;
use strichartz_core::fields::io::{decode_csv, encode_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(field) = decode_csv(text) {
        let again = decode_csv(&encode_csv(&field).expect("decoded fields encode")).expect("encoded fields decode");
        assert_eq!(again.grid(), field.grid());
        assert_eq!(again.samples(), field.samples());
    }
});
