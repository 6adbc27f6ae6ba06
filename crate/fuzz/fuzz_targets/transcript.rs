#![no_main]

use hetcache::simcore::parse_transcript;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lines) = parse_transcript(text) {
        for l in lines {
            assert_eq!(l.files.len(), l.subsets.len());
        }
    }
});
