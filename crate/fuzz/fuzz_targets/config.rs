#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(settings) = dct_snn::config::parse_config(text) {
            let _ = dct_snn::config::RunConfig::resolve(Some(text), &Default::default());
            assert!(settings
                .keys()
                .all(|k| dct_snn::config::KEYS.iter().any(|(key, _)| key == k)));
        }
    }
});
