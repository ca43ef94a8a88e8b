#![no_main]

use libfuzzer_sys::fuzz_target;
use pfl_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_toml_str(text) else { return };
    if cfg.validate().is_err() {
        return;
    }
    let snapshot = cfg.to_toml_string().expect("valid config serializes");
    let back = ExperimentConfig::from_toml_str(&snapshot).expect("snapshot parses");
    assert_eq!(back, cfg);
});
