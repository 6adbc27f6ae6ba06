#![no_main]

use hetcache::SystemConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = SystemConfig::from_json_str(text) else {
        return;
    };
    // accepted configs re-serialize to the same value
    let back = SystemConfig::from_json_str(&cfg.to_json()).expect("round trip parses");
    assert_eq!(back, cfg);
    assert!(cfg.cache <= cfg.total_files() as f64);
    let _ = cfg.warnings();
});
