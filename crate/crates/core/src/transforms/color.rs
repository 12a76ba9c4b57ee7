use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Full-range BT.601 (JFIF) conversion of one pixel, inputs in `[0, 255]`.
pub fn ycbcr_pixel(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    (y, cb, cr)
}

/// Converts R, G, B planes into Y, Cb, Cr planes.
pub fn rgb_to_ycbcr(planes: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    if planes.len() != 3 {
        return Err(Error::invalid(format!(
            "YCbCr conversion needs 3 channels, got {}",
            planes.len()
        )));
    }
    let (h, w) = planes[0].shape();
    if planes.iter().any(|p| p.shape() != (h, w)) {
        return Err(Error::invalid("channel planes differ in size"));
    }
    let mut out = vec![DMatrix::zeros(h, w); 3];
    for r in 0..h {
        for c in 0..w {
            let (y, cb, cr) = ycbcr_pixel(planes[0][(r, c)], planes[1][(r, c)], planes[2][(r, c)]);
            out[0][(r, c)] = y;
            out[1][(r, c)] = cb;
            out[2][(r, c)] = cr;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 && (a.2 - b.2).abs() < 1e-9
    }

    #[test]
    fn white_and_black() {
        assert!(close(
            ycbcr_pixel(255.0, 255.0, 255.0),
            (255.0, 128.0, 128.0)
        ));
        assert!(close(ycbcr_pixel(0.0, 0.0, 0.0), (0.0, 128.0, 128.0)));
    }

    #[test]
    fn gray_keeps_luma() {
        for c in [1.0, 17.0, 99.5, 200.0] {
            let (y, cb, cr) = ycbcr_pixel(c, c, c);
            assert!((y - c).abs() < 1e-9);
            assert!((cb - 128.0).abs() < 1e-9 && (cr - 128.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wrong_channel_count() {
        let p = vec![DMatrix::zeros(2, 2); 2];
        assert!(matches!(rgb_to_ycbcr(&p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn planes_convert() {
        let p = vec![
            DMatrix::from_element(2, 2, 255.0),
            DMatrix::from_element(2, 2, 0.0),
            DMatrix::from_element(2, 2, 0.0),
        ];
        let out = rgb_to_ycbcr(&p).unwrap();
        assert!((out[0][(1, 1)] - 76.245).abs() < 1e-9);
        assert!((out[2][(0, 0)] - 255.5).abs() < 1e-9);
    }
}
