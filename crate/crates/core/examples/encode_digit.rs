//! Encodes one test digit with the 4×4 DCT encoder and prints how many
//! positive and negative spikes each timestep carries.
//!
//! Run from `crates/core`: `cargo run --release --example encode_digit [index]`

use std::path::Path;

use dct_snn::data::{load_dataset, DatasetFormat, Split};
use dct_snn::encoder::{FrequencySchedule, InputEncoder, Normalization};
use dct_snn::transforms::{build_transform, BlockSpec, TransformKind};

fn main() -> dct_snn::Result<()> {
    let index: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("index must be a number"))
        .unwrap_or(0);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/digits");
    let train = load_dataset(&dir, DatasetFormat::Idx, Split::Train)?;
    let test = load_dataset(&dir, DatasetFormat::Idx, Split::Test)?;

    let t = build_transform(TransformKind::Dct, 4, 0, None)?;
    let mut enc = InputEncoder::with_transform(t, BlockSpec::new(4, 4, 0)?, (1, 28, 28))?
        .with_normalization(Normalization::LevelShift);
    let calib: Vec<_> = train.images.iter().take(256).collect();
    enc.calibrate(&calib, &FrequencySchedule::full_cycles(4, 1)?, (6.5, 93.5))?;

    let schedule = FrequencySchedule::full_cycles(4, 2)?;
    let spikes = enc.encode(&test.images[index], &schedule, index as u64)?;
    println!("label {}", test.labels[index]);
    for t in 0..spikes.timesteps {
        let step = spikes.step(t);
        let pos = step.iter().filter(|&&s| s > 0).count();
        let neg = step.iter().filter(|&&s| s < 0).count();
        println!("t={t:2}  +{pos:4}  -{neg:4}");
    }
    Ok(())
}
