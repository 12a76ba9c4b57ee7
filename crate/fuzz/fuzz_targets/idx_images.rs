#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = dct_snn::data::parse_idx_images(data) {
        for img in &images {
            assert_eq!(img.pixels.len(), img.channels * img.height * img.width);
        }
    }
});
