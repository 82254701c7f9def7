#![no_main]

use libfuzzer_sys::fuzz_target;
use strichartz_cli::{Command, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::parse(text) {
        for command in [Command::Constants, Command::Scan, Command::Check] {
            let _ = config.clone().resolve(command);
        }
    }
});
