#![no_main]

use clap::Parser;
use libfuzzer_sys::fuzz_target;
use meshflow_cli::Cli;

// Arguments are NUL-separated so they can contain spaces.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let args = std::iter::once("meshflow").chain(s.split('\0'));
    let _ = Cli::try_parse_from(args);
});
