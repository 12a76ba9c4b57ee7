//! Dense and event-driven kernels for convolution, linear and average-pool
//! layers. Tensors are channel-major `C × H × W` slices of `f32`.

use super::arch::ConvSpec;

/// Receives one notification per multiply–accumulate executed by a dense
/// kernel. The no-op `()` sink compiles away.
pub trait MacSink {
    fn add(&mut self, count: u64);
}

impl MacSink for () {
    #[inline(always)]
    fn add(&mut self, _count: u64) {}
}

impl MacSink for u64 {
    #[inline(always)]
    fn add(&mut self, count: u64) {
        *self += count;
    }
}

#[inline]
fn valid_range(
    k: usize,
    pad: usize,
    stride: usize,
    in_len: usize,
    out_len: usize,
) -> (usize, usize) {
    // output positions o with 0 <= o*stride + k - pad < in_len
    let lo = if k >= pad {
        0
    } else {
        (pad - k).div_ceil(stride)
    };
    let hi_excl = if in_len + pad > k {
        ((in_len + pad - k - 1) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo.min(hi_excl), hi_excl)
}

/// Dense convolution, `out += W ⊛ input`. Every kernel tap counts as one MAC,
/// padding taps included.
pub fn conv_forward<S: MacSink>(
    input: &[f32],
    spec: &ConvSpec,
    weights: &[f32],
    out: &mut [f32],
    sink: &mut S,
) {
    let (ih, iw) = (spec.in_h, spec.in_w);
    let (oh, ow) = spec.out_hw();
    let k = spec.kernel;
    for co in 0..spec.c_out {
        let out_c = &mut out[co * oh * ow..(co + 1) * oh * ow];
        for ci in 0..spec.c_in {
            let in_c = &input[ci * ih * iw..(ci + 1) * ih * iw];
            for ky in 0..k {
                let (oy0, oy1) = valid_range(ky, spec.pad, spec.stride, ih, oh);
                for kx in 0..k {
                    let w = weights[((co * spec.c_in + ci) * k + ky) * k + kx];
                    sink.add((oh * ow) as u64);
                    let (ox0, ox1) = valid_range(kx, spec.pad, spec.stride, iw, ow);
                    for oy in oy0..oy1 {
                        let iy = oy * spec.stride + ky - spec.pad;
                        let row_in = &in_c[iy * iw..(iy + 1) * iw];
                        let row_out = &mut out_c[oy * ow..(oy + 1) * ow];
                        if spec.stride == 1 {
                            let off = kx as isize - spec.pad as isize;
                            let src = &row_in
                                [(ox0 as isize + off) as usize..(ox1 as isize + off) as usize];
                            for (o, &x) in row_out[ox0..ox1].iter_mut().zip(src) {
                                *o += w * x;
                            }
                        } else {
                            for ox in ox0..ox1 {
                                row_out[ox] += w * row_in[ox * spec.stride + kx - spec.pad];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Event-driven convolution: scatters each nonzero input into the outputs it
/// reaches. Same result as [`conv_forward`] up to summation order.
pub fn conv_forward_sparse(input: &[f32], spec: &ConvSpec, weights: &[f32], out: &mut [f32]) {
    let (ih, iw) = (spec.in_h, spec.in_w);
    let (oh, ow) = spec.out_hw();
    let k = spec.kernel;
    let s = spec.stride;
    let p = spec.pad;
    for ci in 0..spec.c_in {
        for iy in 0..ih {
            for ix in 0..iw {
                let v = input[(ci * ih + iy) * iw + ix];
                if v == 0.0 {
                    continue;
                }
                for ky in 0..k {
                    let ny = iy + p;
                    if ny < ky || !(ny - ky).is_multiple_of(s) {
                        continue;
                    }
                    let oy = (ny - ky) / s;
                    if oy >= oh {
                        continue;
                    }
                    for kx in 0..k {
                        let nx = ix + p;
                        if nx < kx || !(nx - kx).is_multiple_of(s) {
                            continue;
                        }
                        let ox = (nx - kx) / s;
                        if ox >= ow {
                            continue;
                        }
                        let base = oy * ow + ox;
                        let wbase = (ci * k + ky) * k + kx;
                        let wstride = spec.c_in * k * k;
                        for co in 0..spec.c_out {
                            out[co * oh * ow + base] += v * weights[co * wstride + wbase];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution backward: `grad_w += grad_out ⋆ input` and, when requested,
/// `grad_in += Wᵀ ⊛ grad_out`.
pub fn conv_backward(
    input: &[f32],
    grad_out: &[f32],
    spec: &ConvSpec,
    weights: &[f32],
    grad_w: &mut [f32],
    mut grad_in: Option<&mut [f32]>,
) {
    let (ih, iw) = (spec.in_h, spec.in_w);
    let (oh, ow) = spec.out_hw();
    let k = spec.kernel;
    for co in 0..spec.c_out {
        let g_c = &grad_out[co * oh * ow..(co + 1) * oh * ow];
        if g_c.iter().all(|&g| g == 0.0) {
            continue;
        }
        for ci in 0..spec.c_in {
            let in_off = ci * ih * iw;
            for ky in 0..k {
                let (oy0, oy1) = valid_range(ky, spec.pad, spec.stride, ih, oh);
                for kx in 0..k {
                    let widx = ((co * spec.c_in + ci) * k + ky) * k + kx;
                    let w = weights[widx];
                    let (ox0, ox1) = valid_range(kx, spec.pad, spec.stride, iw, ow);
                    let mut acc = 0.0f32;
                    for oy in oy0..oy1 {
                        let iy = oy * spec.stride + ky - spec.pad;
                        let g_row = &g_c[oy * ow..(oy + 1) * ow];
                        let row_base = in_off + iy * iw;
                        if spec.stride == 1 {
                            let start = row_base + ox0 + kx - spec.pad;
                            let x_row = &input[start..start + (ox1 - ox0)];
                            for (g, x) in g_row[ox0..ox1].iter().zip(x_row) {
                                acc += g * x;
                            }
                            if let Some(gi) = grad_in.as_deref_mut() {
                                let gi_row = &mut gi[start..start + (ox1 - ox0)];
                                for (d, g) in gi_row.iter_mut().zip(&g_row[ox0..ox1]) {
                                    *d += w * g;
                                }
                            }
                        } else {
                            for (ox, &g) in g_row.iter().enumerate().take(ox1).skip(ox0) {
                                let ii = row_base + ox * spec.stride + kx - spec.pad;
                                acc += g * input[ii];
                                if let Some(gi) = grad_in.as_deref_mut() {
                                    gi[ii] += w * g;
                                }
                            }
                        }
                    }
                    grad_w[widx] += acc;
                }
            }
        }
    }
}

/// Dense `out += W · input` with `W` stored row-major `n_out × n_in`.
pub fn linear_forward<S: MacSink>(
    input: &[f32],
    n_out: usize,
    weights: &[f32],
    out: &mut [f32],
    sink: &mut S,
) {
    let n_in = input.len();
    sink.add((n_in * n_out) as u64);
    for (o, row) in out.iter_mut().zip(weights.chunks_exact(n_in)) {
        *o += row.iter().zip(input).map(|(w, x)| w * x).sum::<f32>();
    }
}

/// `out += W · input`, touching only the nonzero inputs.
pub fn linear_forward_sparse(
    input: &[f32],
    weights: &[f32],
    out: &mut [f32],
    scratch: &mut Vec<(usize, f32)>,
) {
    let n_in = input.len();
    scratch.clear();
    scratch.extend(
        input
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v)),
    );
    for (o, row) in out.iter_mut().zip(weights.chunks_exact(n_in)) {
        let mut acc = 0.0f32;
        for &(i, v) in scratch.iter() {
            acc += row[i] * v;
        }
        *o += acc;
    }
}

/// `grad_w += grad_out ⊗ input`; `grad_in += Wᵀ · grad_out` when requested.
pub fn linear_backward(
    input: &[f32],
    grad_out: &[f32],
    weights: &[f32],
    grad_w: &mut [f32],
    mut grad_in: Option<&mut [f32]>,
) {
    let n_in = input.len();
    for (o, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let gw = &mut grad_w[o * n_in..(o + 1) * n_in];
        for (d, x) in gw.iter_mut().zip(input) {
            *d += g * x;
        }
        if let Some(gi) = grad_in.as_deref_mut() {
            let row = &weights[o * n_in..(o + 1) * n_in];
            for (d, w) in gi.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }
}

/// Non-overlapping `window × window` mean pooling.
pub fn avgpool_forward(
    input: &[f32],
    c: usize,
    h: usize,
    w: usize,
    window: usize,
    out: &mut [f32],
) {
    let (oh, ow) = (h / window, w / window);
    let scale = 1.0 / (window * window) as f32;
    out.iter_mut().for_each(|o| *o = 0.0);
    for ch in 0..c {
        for y in 0..oh * window {
            let row = &input[(ch * h + y) * w..(ch * h + y) * w + ow * window];
            let orow = &mut out[(ch * oh + y / window) * ow..(ch * oh + y / window + 1) * ow];
            for (x, v) in row.iter().enumerate() {
                orow[x / window] += v;
            }
        }
    }
    out.iter_mut().for_each(|o| *o *= scale);
}

/// Spreads each pooled gradient evenly over its window (overwrites `grad_in`).
pub fn avgpool_backward(
    grad_out: &[f32],
    c: usize,
    h: usize,
    w: usize,
    window: usize,
    grad_in: &mut [f32],
) {
    let (oh, ow) = (h / window, w / window);
    let scale = 1.0 / (window * window) as f32;
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                grad_in[(ch * h + y) * w + x] = if y / window < oh && x / window < ow {
                    grad_out[(ch * oh + y / window) * ow + x / window] * scale
                } else {
                    0.0
                };
            }
        }
    }
}
