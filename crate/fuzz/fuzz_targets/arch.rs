#![no_main]

use dct_snn::snn::Architecture;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() < 3 {
        return;
    }
    let shape = [
        usize::from(data[0] % 4) + 1,
        usize::from(data[1] % 40),
        usize::from(data[2] % 40),
    ];
    if let Ok(text) = std::str::from_utf8(&data[3..]) {
        let _ = Architecture::parse(shape, text);
    }
});
