use nalgebra::DMatrix;

use crate::data::Image;
use crate::error::{Error, Result};
use crate::transforms::{
    extract_block_samples, forward_block_transform, rgb_to_ycbcr, tile_blocks, BlockBasis,
    BlockSpec, TransformKind, TransformMatrix,
};

use super::{
    calibrate_generator_thresholds, poisson_encode, spike_generate, EncodedStream,
    FrequencySchedule, SpikeGeneratorState, SpikeTrain,
};

/// Pixel scaling ahead of a transform encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `(v/255 − 0.5) / 0.5` on every plane: values in `[−1, 1]`, so the
    /// signed generator sees a roughly symmetric accumulation.
    #[default]
    LevelShift,
    /// Luma `v / 255`, chroma `(v − 128) / 255`; black is exactly zero.
    Unit,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::LevelShift => "level-shift",
            Normalization::Unit => "unit",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "level-shift" => Ok(Normalization::LevelShift),
            "unit" => Ok(Normalization::Unit),
            other => Err(Error::config(format!(
                "unknown normalization `{other}` (level-shift, unit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Transform(TransformKind),
    Poisson,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Transform(k) => k.name(),
            EncoderKind::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "poisson" {
            Ok(EncoderKind::Poisson)
        } else {
            s.parse().map(EncoderKind::Transform)
        }
    }
}

/// Image → spike train front end.
///
/// For transform encoders the image goes through colorspace conversion
/// (3-channel inputs), block transform, per-timestep basis contributions and
/// the signed spike generator. The network input is the tiled block layout,
/// which is larger than the image when blocks overlap.
#[derive(Debug, Clone)]
pub struct InputEncoder {
    kind: EncoderKind,
    spec: BlockSpec,
    image_shape: (usize, usize, usize),
    transform: Option<TransformMatrix>,
    basis: Option<BlockBasis>,
    thresholds: Option<(f64, f64)>,
    seed: u64,
    normalization: Normalization,
}

impl InputEncoder {
    pub fn with_transform(
        transform: TransformMatrix,
        spec: BlockSpec,
        image_shape: (usize, usize, usize),
    ) -> Result<Self> {
        spec.grid(image_shape.1, image_shape.2)?;
        let basis = BlockBasis::new(&transform, spec.block_size)?;
        Ok(InputEncoder {
            kind: EncoderKind::Transform(transform.kind()),
            spec,
            image_shape,
            transform: Some(transform),
            basis: Some(basis),
            thresholds: None,
            seed: 0,
            normalization: Normalization::default(),
        })
    }

    /// Poisson baseline. `spec` only records the block size for schedules.
    pub fn poisson(
        image_shape: (usize, usize, usize),
        block_size: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(InputEncoder {
            kind: EncoderKind::Poisson,
            spec: BlockSpec::tiled(block_size)?,
            image_shape,
            transform: None,
            basis: None,
            thresholds: None,
            seed,
            normalization: Normalization::default(),
        })
    }

    /// Replaces the pixel scaling; ignored by the Poisson encoder.
    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn block_spec(&self) -> &BlockSpec {
        &self.spec
    }

    pub fn transform(&self) -> Option<&TransformMatrix> {
        self.transform.as_ref()
    }

    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.image_shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn thresholds(&self) -> Option<(f64, f64)> {
        self.thresholds
    }

    pub fn set_thresholds(&mut self, theta_neg: f64, theta_pos: f64) -> Result<()> {
        SpikeGeneratorState::new(1, theta_neg, theta_pos)?;
        self.thresholds = Some((theta_neg, theta_pos));
        Ok(())
    }

    /// Shape `(channels, height, width)` the network receives.
    pub fn input_shape(&self) -> (usize, usize, usize) {
        let (c, h, w) = self.image_shape;
        match self.kind {
            EncoderKind::Poisson => (c, h, w),
            EncoderKind::Transform(_) => {
                let (th, tw) = self
                    .spec
                    .tiled_shape(h, w)
                    .expect("block spec validated at construction");
                (c, th, tw)
            }
        }
    }

    fn check_image(&self, img: &Image) -> Result<()> {
        if (img.channels, img.height, img.width) != self.image_shape {
            return Err(Error::invalid(format!(
                "image is {}x{}x{}, encoder expects {:?}",
                img.channels, img.height, img.width, self.image_shape
            )));
        }
        Ok(())
    }

    fn planes(&self, img: &Image) -> Result<Vec<DMatrix<f64>>> {
        self.check_image(img)?;
        normalized_planes(img, self.normalization)
    }

    /// Real-valued network input that the spike train approximates over a
    /// full cycle: the tiled source blocks, or raw intensities for Poisson.
    pub fn analog_input(&self, img: &Image) -> Result<Vec<f32>> {
        match self.kind {
            EncoderKind::Poisson => {
                self.check_image(img)?;
                Ok(img.pixels.iter().map(|&p| f32::from(p) / 255.0).collect())
            }
            EncoderKind::Transform(_) => {
                let mut out = Vec::new();
                for p in self.planes(img)? {
                    let tiled = tile_blocks(&p, &self.spec)?;
                    let (h, w) = tiled.shape();
                    for y in 0..h {
                        for x in 0..w {
                            out.push(tiled[(y, x)] as f32);
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Per-timestep analog contributions of `img` under `schedule`.
    pub fn stream(&self, img: &Image, schedule: &FrequencySchedule) -> Result<EncodedStream> {
        let (t, basis) = match (&self.transform, &self.basis) {
            (Some(t), Some(b)) => (t, b),
            _ => {
                return Err(Error::InvalidState(
                    "Poisson encoder has no analog stream".into(),
                ))
            }
        };
        if schedule.block_size() != self.spec.block_size {
            return Err(Error::invalid(
                "schedule block size differs from the encoder's",
            ));
        }
        let grids = self
            .planes(img)?
            .iter()
            .map(|p| forward_block_transform(p, &self.spec, t))
            .collect::<Result<Vec<_>>>()?;
        EncodedStream::new(&grids, basis, schedule)
    }

    /// Sets the generator thresholds from percentiles of the spike-free
    /// accumulation over `images`.
    pub fn calibrate(
        &mut self,
        images: &[&Image],
        schedule: &FrequencySchedule,
        percentiles: (f64, f64),
    ) -> Result<(f64, f64)> {
        if self.kind == EncoderKind::Poisson {
            return Ok((0.0, 0.0));
        }
        let streams = images
            .iter()
            .map(|img| self.stream(img, schedule))
            .collect::<Result<Vec<_>>>()?;
        let (lo, hi) = calibrate_generator_thresholds(&streams, percentiles)?;
        self.set_thresholds(lo, hi)?;
        Ok((lo, hi))
    }

    /// Full encoding of one image. `stream_index` selects the Poisson
    /// substream and is ignored by transform encoders.
    pub fn encode(
        &self,
        img: &Image,
        schedule: &FrequencySchedule,
        stream_index: u64,
    ) -> Result<SpikeTrain> {
        match self.kind {
            EncoderKind::Poisson => {
                self.check_image(img)?;
                let p: Vec<f64> = img.pixels.iter().map(|&v| f64::from(v) / 255.0).collect();
                poisson_encode(
                    &p,
                    self.image_shape,
                    schedule.total_timesteps(),
                    self.seed,
                    stream_index,
                )
            }
            EncoderKind::Transform(_) => {
                let (lo, hi) = self.thresholds.ok_or_else(|| {
                    Error::InvalidState("generator thresholds are not calibrated".into())
                })?;
                let stream = self.stream(img, schedule)?;
                let mut state = SpikeGeneratorState::new(stream.positions(), lo, hi)?;
                Ok(spike_generate(&stream, &mut state)?.0)
            }
        }
    }
}

/// Normalized planes: gray for one channel, YCbCr for three.
pub fn normalized_planes(img: &Image, normalization: Normalization) -> Result<Vec<DMatrix<f64>>> {
    let raw: Vec<DMatrix<f64>> = (0..img.channels)
        .map(|c| DMatrix::from_fn(img.height, img.width, |y, x| f64::from(img.pixel(c, y, x))))
        .collect();
    let planes = match img.channels {
        1 => raw,
        3 => rgb_to_ycbcr(&raw)?,
        c => return Err(Error::invalid(format!("unsupported channel count {c}"))),
    };
    Ok(planes
        .into_iter()
        .enumerate()
        .map(|(c, p)| match (normalization, c) {
            (Normalization::LevelShift, _) => p.map(|v| (v / 255.0 - 0.5) / 0.5),
            (Normalization::Unit, 0) => p.map(|v| v / 255.0),
            (Normalization::Unit, _) => p.map(|v| (v - 128.0) / 255.0),
        })
        .collect())
}

/// Flattened `n×n` blocks of every normalized plane, the sample set PCA
/// learns from.
pub fn block_samples(
    images: &[&Image],
    spec: &BlockSpec,
    normalization: Normalization,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for img in images {
        for plane in normalized_planes(img, normalization)? {
            out.extend(extract_block_samples(&plane, spec)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::dct_matrix_1d;

    fn gray(h: usize, w: usize, f: impl Fn(usize, usize) -> u8) -> Image {
        let pixels = (0..h * w).map(|i| f(i / w, i % w)).collect();
        Image::new(1, h, w, pixels).unwrap()
    }

    fn dct_encoder(stride: usize, pad: usize, h: usize, w: usize) -> InputEncoder {
        InputEncoder::with_transform(
            dct_matrix_1d(4).unwrap(),
            BlockSpec::new(4, stride, pad).unwrap(),
            (1, h, w),
        )
        .unwrap()
        .with_normalization(Normalization::Unit)
    }

    #[test]
    fn black_image_is_silent() {
        let mut enc = dct_encoder(4, 0, 8, 8);
        enc.set_thresholds(-0.1, 0.1).unwrap();
        let sched = FrequencySchedule::full_cycles(4, 3).unwrap();
        let s = enc.encode(&gray(8, 8, |_, _| 0), &sched, 0).unwrap();
        assert_eq!(s.timesteps, 48);
        assert_eq!(s.counts(), (0, 0));
    }

    #[test]
    fn one_cycle_input_equals_tiled_pixels() {
        let enc = dct_encoder(2, 1, 8, 8);
        let img = gray(8, 8, |y, x| (y * 30 + x * 7) as u8);
        let sched = FrequencySchedule::full_cycles(4, 1).unwrap();
        let stream = enc.stream(&img, &sched).unwrap();
        let analog = enc.analog_input(&img).unwrap();
        assert_eq!(enc.input_shape(), (1, 16, 16));
        let mut acc = vec![0.0; stream.positions()];
        for t in 0..16 {
            acc.iter_mut()
                .zip(stream.contribution(t).unwrap())
                .for_each(|(a, b)| *a += b);
        }
        for (a, b) in acc.iter().zip(&analog) {
            assert!((a - f64::from(*b)).abs() < 1e-6);
        }
    }

    #[test]
    fn uncalibrated_encode_fails() {
        let enc = dct_encoder(4, 0, 4, 4);
        let sched = FrequencySchedule::full_cycles(4, 1).unwrap();
        assert!(matches!(
            enc.encode(&gray(4, 4, |_, _| 9), &sched, 0),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn color_image_chroma_centered() {
        let enc = InputEncoder::with_transform(
            dct_matrix_1d(4).unwrap(),
            BlockSpec::tiled(4).unwrap(),
            (3, 4, 4),
        )
        .unwrap();
        let img = Image::new(3, 4, 4, vec![200; 48]).unwrap();
        let a = enc.analog_input(&img).unwrap();
        assert!((a[0] - (200.0 / 255.0 - 0.5) / 0.5).abs() < 1e-6);
        assert!(a[16].abs() < 5e-3 && a[32].abs() < 5e-3);
        let unit = enc
            .with_normalization(Normalization::Unit)
            .analog_input(&img)
            .unwrap();
        assert!((unit[0] - 200.0 / 255.0).abs() < 1e-6);
        assert!(unit[16].abs() < 1e-6);
    }

    #[test]
    fn level_shift_silences_mid_gray() {
        let mut enc = dct_encoder(4, 0, 8, 8).with_normalization(Normalization::LevelShift);
        enc.set_thresholds(-0.1, 0.1).unwrap();
        let sched = FrequencySchedule::full_cycles(4, 3).unwrap();
        assert_eq!(
            enc.encode(&gray(8, 8, |_, _| 128), &sched, 0)
                .unwrap()
                .counts(),
            (0, 0)
        );
        let black = enc.encode(&gray(8, 8, |_, _| 0), &sched, 0).unwrap();
        assert!(black.counts().1 > 0);
    }

    #[test]
    fn poisson_shape_and_values() {
        let enc = InputEncoder::poisson((1, 4, 4), 4, 3).unwrap();
        let sched = FrequencySchedule::full_cycles(4, 2).unwrap();
        let s = enc.encode(&gray(4, 4, |_, _| 255), &sched, 0).unwrap();
        assert_eq!(s.counts(), (32 * 16, 0));
    }
}
