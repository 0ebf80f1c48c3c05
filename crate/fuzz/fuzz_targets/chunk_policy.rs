#![no_main]

use libfuzzer_sys::fuzz_target;
use meshflow::harness::{parse_chunk, parse_grid, parse_list, parse_modes};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(policy) = parse_chunk(s) {
        assert_eq!(parse_chunk(&policy.to_string()), Ok(policy));
    }
    if let Ok((n, m)) = parse_grid(s) {
        assert!(n > 0 && m > 0);
    }
    if let Ok(items) = parse_list::<usize>(s) {
        assert!(!items.is_empty());
    }
    let _ = parse_modes(s);
});
