#![no_main]

use libfuzzer_sys::fuzz_target;
use modeconn::experiments::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json_str(text) {
        let _ = cfg.validate_study();
        let _ = cfg.required_snapshots();
        for v in &cfg.variants {
            let _ = cfg.variant(v);
        }
        let back = RunConfig::from_json_str(&cfg.to_json_pretty()).expect("serialized config parses");
        assert_eq!(back.digest(), cfg.digest());
    }
});
