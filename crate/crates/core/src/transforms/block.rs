use nalgebra::DMatrix;

use super::TransformMatrix;
use crate::encoder::zigzag_order;
use crate::error::{Error, Result};

/// Block extraction geometry: `block_size × block_size` windows taken every
/// `stride` pixels over a channel zero-padded by `padding` on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub block_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl BlockSpec {
    pub fn new(block_size: usize, stride: usize, padding: usize) -> Result<Self> {
        if block_size == 0 || stride == 0 || stride > block_size {
            return Err(Error::invalid(format!(
                "block spec needs 1 <= stride <= block size, got n={block_size} s={stride}"
            )));
        }
        Ok(BlockSpec {
            block_size,
            stride,
            padding,
        })
    }

    /// Non-overlapping blocks without padding.
    pub fn tiled(block_size: usize) -> Result<Self> {
        Self::new(block_size, block_size, 0)
    }

    /// Block grid `(rows, cols)` for an `h × w` channel.
    pub fn grid(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let axis = |len: usize, name: &str| -> Result<usize> {
            let padded = len + 2 * self.padding;
            if padded < self.block_size || !(padded - self.block_size).is_multiple_of(self.stride) {
                return Err(Error::invalid(format!(
                    "{name} {len} with padding {} is incompatible with block {} / stride {}",
                    self.padding, self.block_size, self.stride
                )));
            }
            Ok((padded - self.block_size) / self.stride + 1)
        };
        Ok((axis(h, "height")?, axis(w, "width")?))
    }

    /// Spatial size of the tiled block layout.
    pub fn tiled_shape(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (r, c) = self.grid(h, w)?;
        Ok((r * self.block_size, c * self.block_size))
    }
}

/// Pixel at padded coordinates `(py, px)`; zero outside the channel.
pub(crate) fn padded_value(channel: &DMatrix<f64>, spec: &BlockSpec, py: usize, px: usize) -> f64 {
    let (h, w) = channel.shape();
    let (y, x) = (
        py as isize - spec.padding as isize,
        px as isize - spec.padding as isize,
    );
    if y < 0 || x < 0 || y as usize >= h || x as usize >= w {
        0.0
    } else {
        channel[(y as usize, x as usize)]
    }
}

/// Per-block coefficients of one channel. Block `(r, c)` owns
/// `coeffs[(r * cols + c) * n² ..][..n²]`; within a block the layout is
/// `v * n + u` for separable transforms and the basis index otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientGrid {
    pub block_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub coeffs: Vec<f64>,
}

impl CoefficientGrid {
    pub fn block(&self, r: usize, c: usize) -> &[f64] {
        let d = self.block_size * self.block_size;
        let start = (r * self.cols + c) * d;
        &self.coeffs[start..start + d]
    }

    pub fn num_blocks(&self) -> usize {
        self.rows * self.cols
    }
}

enum Layout {
    Separable,
    Flattened,
}

fn layout(t: &TransformMatrix, n: usize) -> Result<Layout> {
    if t.dim() == n {
        Ok(Layout::Separable)
    } else if t.dim() == n * n {
        Ok(Layout::Flattened)
    } else {
        Err(Error::invalid(format!(
            "transform of dimension {} does not fit {n}x{n} blocks",
            t.dim()
        )))
    }
}

/// Forward transform of every block of `channel` on the grid of `spec`.
pub fn forward_block_transform(
    channel: &DMatrix<f64>,
    spec: &BlockSpec,
    t: &TransformMatrix,
) -> Result<CoefficientGrid> {
    let n = spec.block_size;
    let layout = layout(t, n)?;
    let (h, w) = channel.shape();
    let (rows, cols) = spec.grid(h, w)?;
    let a = t.entries();
    let d = n * n;
    let mut coeffs = vec![0.0; rows * cols * d];
    let mut block = DMatrix::<f64>::zeros(n, n);
    for br in 0..rows {
        for bc in 0..cols {
            for y in 0..n {
                for x in 0..n {
                    block[(y, x)] =
                        padded_value(channel, spec, br * spec.stride + y, bc * spec.stride + x);
                }
            }
            let out = &mut coeffs[(br * cols + bc) * d..][..d];
            match layout {
                Layout::Separable => {
                    let y = a * &block * a.transpose();
                    for v in 0..n {
                        for u in 0..n {
                            out[v * n + u] = y[(v, u)];
                        }
                    }
                }
                Layout::Flattened => {
                    for (k, o) in out.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for p in 0..d {
                            acc += a[(k, p)] * block[(p / n, p % n)];
                        }
                        *o = acc;
                    }
                }
            }
        }
    }
    Ok(CoefficientGrid {
        block_size: n,
        rows,
        cols,
        coeffs,
    })
}

/// Inverse transform of every block, laid out as a tiled map of
/// `(n·rows) × (n·cols)` pixels.
pub fn inverse_block_transform(
    grid: &CoefficientGrid,
    t: &TransformMatrix,
) -> Result<DMatrix<f64>> {
    let n = grid.block_size;
    let layout = layout(t, n)?;
    let b = t.inverse();
    let mut out = DMatrix::<f64>::zeros(grid.rows * n, grid.cols * n);
    let mut y = DMatrix::<f64>::zeros(n, n);
    for br in 0..grid.rows {
        for bc in 0..grid.cols {
            let coeffs = grid.block(br, bc);
            match layout {
                Layout::Separable => {
                    for v in 0..n {
                        for u in 0..n {
                            y[(v, u)] = coeffs[v * n + u];
                        }
                    }
                    let x = b * &y * b.transpose();
                    for r in 0..n {
                        for c in 0..n {
                            out[(br * n + r, bc * n + c)] = x[(r, c)];
                        }
                    }
                }
                Layout::Flattened => {
                    for p in 0..n * n {
                        let mut acc = 0.0;
                        for (k, coef) in coeffs.iter().enumerate() {
                            acc += b[(p, k)] * coef;
                        }
                        out[(br * n + p / n, bc * n + p % n)] = acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The padded source blocks of `channel` placed side by side, i.e. what a
/// full inverse transform reconstructs.
pub fn tile_blocks(channel: &DMatrix<f64>, spec: &BlockSpec) -> Result<DMatrix<f64>> {
    let (h, w) = channel.shape();
    let (rows, cols) = spec.grid(h, w)?;
    let n = spec.block_size;
    Ok(DMatrix::from_fn(rows * n, cols * n, |r, c| {
        let (br, y) = (r / n, r % n);
        let (bc, x) = (c / n, c % n);
        padded_value(channel, spec, br * spec.stride + y, bc * spec.stride + x)
    }))
}

/// Basis images of a transform in scheduling order, each paired with the
/// coefficient slot that weights it.
#[derive(Debug, Clone)]
pub struct BlockBasis {
    pub block_size: usize,
    /// `(coefficient index, row-major n×n basis image)`
    pub entries: Vec<(usize, Vec<f64>)>,
}

impl BlockBasis {
    /// Separable transforms are ordered by zigzag scan of `(v, u)`; flattened
    /// ones keep their row order, which is already ranked for PCA.
    pub fn new(t: &TransformMatrix, n: usize) -> Result<Self> {
        let b = t.inverse();
        let entries = match layout(t, n)? {
            Layout::Separable => zigzag_order(n)
                .into_iter()
                .map(|(v, u)| {
                    let img = (0..n * n).map(|p| b[(p / n, v)] * b[(p % n, u)]).collect();
                    (v * n + u, img)
                })
                .collect(),
            Layout::Flattened => (0..n * n)
                .map(|k| (k, (0..n * n).map(|p| b[(p, k)]).collect()))
                .collect(),
        };
        Ok(BlockBasis {
            block_size: n,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
