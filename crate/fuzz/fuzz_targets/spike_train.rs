#![no_main]

use dct_snn::encoder::SpikeTrain;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(train) = SpikeTrain::from_bytes(data) {
        let again = SpikeTrain::from_bytes(&train.to_bytes()).expect("roundtrip");
        assert_eq!(again, train);
    }
});
