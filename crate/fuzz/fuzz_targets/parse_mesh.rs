#![no_main]

use libfuzzer_sys::fuzz_target;
use meshflow::mesh::text::parse_mesh;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = parse_mesh(src) {
        let text = file.to_text();
        let again = parse_mesh(&text).expect("dumped mesh reparses");
        assert_eq!(again.to_text(), text);
    }
});
