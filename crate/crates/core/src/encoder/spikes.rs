use std::io::Write;

use crate::error::{Error, Result};

/// Ternary spike activity over `(timestep, channel, y, x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    pub timesteps: usize,
    /// `(channels, height, width)`
    pub shape: (usize, usize, usize),
    data: Vec<i8>,
}

impl SpikeTrain {
    pub fn zeros(timesteps: usize, shape: (usize, usize, usize)) -> Self {
        SpikeTrain {
            timesteps,
            shape,
            data: vec![0; timesteps * shape.0 * shape.1 * shape.2],
        }
    }

    pub fn from_data(
        timesteps: usize,
        shape: (usize, usize, usize),
        data: Vec<i8>,
    ) -> Result<Self> {
        if data.len() != timesteps * shape.0 * shape.1 * shape.2 {
            return Err(Error::invalid("spike data length does not match its shape"));
        }
        if let Some(v) = data.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::invalid(format!(
                "spike value {v} outside {{-1, 0, 1}}"
            )));
        }
        Ok(SpikeTrain {
            timesteps,
            shape,
            data,
        })
    }

    pub fn positions(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn step(&self, t: usize) -> &[i8] {
        let p = self.positions();
        &self.data[t * p..(t + 1) * p]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [i8] {
        let p = self.positions();
        &mut self.data[t * p..(t + 1) * p]
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    /// `(positive spikes, negative spikes)`.
    pub fn counts(&self) -> (usize, usize) {
        self.data.iter().fold((0, 0), |(p, n), &v| match v {
            1 => (p + 1, n),
            -1 => (p, n + 1),
            _ => (p, n),
        })
    }

    /// Flat tensor: `u32` rank (4), the dims `T, C, H, W` as little-endian
    /// `u32`, then one signed byte per entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len());
        out.extend_from_slice(&4u32.to_le_bytes());
        for d in [self.timesteps, self.shape.0, self.shape.1, self.shape.2] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend(self.data.iter().map(|&v| v as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<usize> {
            let off = i * 4;
            bytes
                .get(off..off + 4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
                .ok_or_else(|| Error::parse(off, "spike tensor header truncated"))
        };
        let rank = word(0)?;
        if rank != 4 {
            return Err(Error::parse(
                0,
                format!("spike tensor rank {rank}, expected 4"),
            ));
        }
        let dims = [word(1)?, word(2)?, word(3)?, word(4)?];
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::parse(4, "spike tensor dims overflow"))?;
        let payload = &bytes[20..];
        if payload.len() != expected {
            return Err(Error::parse(
                20,
                format!(
                    "spike payload holds {} bytes, dims require {expected}",
                    payload.len()
                ),
            ));
        }
        let data: Vec<i8> = payload.iter().map(|&b| b as i8).collect();
        if let Some(i) = data.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::parse(
                20 + i,
                format!("spike value {} outside {{-1, 0, 1}}", data[i]),
            ));
        }
        Ok(SpikeTrain {
            timesteps: dims[0],
            shape: (dims[1], dims[2], dims[3]),
            data,
        })
    }

    /// One CSV row per nonzero spike: `t,channel,y,x,value`.
    pub fn write_csv_raster<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,channel,y,x,value")?;
        let (c, h, wd) = self.shape;
        for t in 0..self.timesteps {
            for (p, &v) in self.step(t).iter().enumerate() {
                if v != 0 {
                    let (ch, rem) = (p / (h * wd), p % (h * wd));
                    debug_assert!(ch < c);
                    writeln!(w, "{t},{ch},{},{},{v}", rem / wd, rem % wd)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bytes_roundtrip(t in 1usize..5, c in 1usize..3, h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
            let n = t * c * h * w;
            let data: Vec<i8> = (0..n).map(|i| (((seed >> (i % 60)) % 3) as i8) - 1).collect();
            let s = SpikeTrain::from_data(t, (c, h, w), data).unwrap();
            prop_assert_eq!(SpikeTrain::from_bytes(&s.to_bytes()).unwrap(), s);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = SpikeTrain::from_bytes(&bytes);
        }
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let s = SpikeTrain::zeros(2, (1, 2, 2));
        let mut b = s.to_bytes();
        b.pop();
        match SpikeTrain::from_bytes(&b) {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 20);
                assert!(message.contains("7") && message.contains("8"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn raster_lists_nonzero() {
        let mut s = SpikeTrain::zeros(2, (1, 1, 2));
        s.step_mut(1)[1] = -1;
        let mut out = Vec::new();
        s.write_csv_raster(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "t,channel,y,x,value\n1,0,0,1,-1\n"
        );
    }
}
