#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = dct_snn::data::parse_cifar(data) {
        assert_eq!(ds.images.len(), ds.labels.len());
    }
});
