#![no_main]

use dct_snn::snn::Checkpoint;
use libfuzzer_sys::fuzz_target;

// Anything that parses must survive a write/read roundtrip unchanged.
fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = Checkpoint::from_bytes(data) {
        let bytes = ckpt.to_bytes();
        let again = Checkpoint::from_bytes(&bytes).expect("re-read of serialized checkpoint");
        assert_eq!(again.to_bytes(), bytes);
    }
});
