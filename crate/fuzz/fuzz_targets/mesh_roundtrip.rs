#![no_main]

use libfuzzer_sys::fuzz_target;
use meshflow::mesh::text::{parse_mesh, MeshFile};
use meshflow::Runtime;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = parse_mesh(src) else {
        return;
    };
    let mut rt = Runtime::with_workers(1);
    let loaded = file.load(&mut rt).expect("a parsed mesh always loads");
    assert_eq!(loaded.sets.len(), file.sets.len());
    let captured = MeshFile::capture_all(&rt).expect("declared entities capture");
    assert_eq!(captured.to_text(), file.to_text());
});
