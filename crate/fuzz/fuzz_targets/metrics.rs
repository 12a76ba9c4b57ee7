#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let dir = std::env::temp_dir().join(format!("dct-snn-fuzz-metrics-{}", std::process::id()));
    let _ = std::fs::create_dir_all(&dir);
    let path = dir.join("metrics.csv");
    if std::fs::write(&path, data).is_ok() {
        let _ = dct_snn::train::read_metrics(&path);
    }
});
