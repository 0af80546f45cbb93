//! Vectorization-friendly inner loops shared by the layer implementations.
//!
//! Both kernels keep a fixed accumulation order so results are bit-identical
//! run to run; the lane count is chosen so LLVM can lower the inner loops to
//! fused multiply-add instructions.

use super::Float;

const LANES: usize = 16;

/// Dot product with a fixed-order lane reduction.
#[inline]
pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let chunks_a = a.chunks_exact(LANES);
    let chunks_b = b.chunks_exact(LANES);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    let mut acc = [F::ZERO; LANES];
    for (xa, xb) in chunks_a.zip(chunks_b) {
        for l in 0..LANES {
            acc[l] = xa[l].mul_add(xb[l], acc[l]);
        }
    }
    let mut tail = F::ZERO;
    for (&x, &y) in tail_a.iter().zip(tail_b) {
        tail = x.mul_add(y, tail);
    }
    let mut sum = tail;
    for lane in acc {
        sum = sum + lane;
    }
    sum
}

/// `y[i] += alpha * x[i]` over equal-length slices.
#[inline]
pub fn axpy<F: Float>(alpha: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x.iter()) {
        *yi = xi.mul_add(alpha, *yi);
    }
}

/// Copies `c` planes of `h x w` into a buffer of `h x (w + 2)` rows whose
/// first and last columns are zero, so 3-tap row kernels need no edge cases.
pub fn pad_planes<F: Float>(src: &[F], c: usize, h: usize, w: usize, out: &mut Vec<F>) {
    let pw = w + 2;
    out.clear();
    out.resize(c * h * pw, F::ZERO);
    for row in 0..c * h {
        out[row * pw + 1..][..w].copy_from_slice(&src[row * w..][..w]);
    }
}

/// `dst[x] += w3[0] src[x-1] + w3[1] src[x] + w3[2] src[x+1]` using a
/// zero-padded source row (`padded.len() == dst.len() + 2`).
#[inline]
pub fn add_3tap<F: Float>(w3: [F; 3], padded: &[F], dst: &mut [F]) {
    debug_assert_eq!(padded.len(), dst.len() + 2);
    for (d, win) in dst.iter_mut().zip(padded.windows(3)) {
        *d = w3[0].mul_add(win[0], w3[1].mul_add(win[1], w3[2].mul_add(win[2], *d)));
    }
}

/// Lane-parallel accumulator for the three column taps of a kernel row.
pub type TapAcc<F> = [[F; LANES]; 3];

pub fn tap_acc_zero<F: Float>() -> TapAcc<F> {
    [[F::ZERO; LANES]; 3]
}

/// Accumulates `sum_x g[x] * src[x + kx - 1]` for `kx = 0, 1, 2` into the
/// per-lane accumulators, using a zero-padded source row.
#[inline]
pub fn wgrad_3tap<F: Float>(g: &[F], padded: &[F], acc: &mut TapAcc<F>) {
    debug_assert_eq!(padded.len(), g.len() + 2);
    let w = g.len();
    let main = w - w % LANES;
    let mut x = 0;
    while x < main {
        for l in 0..LANES {
            let gv = g[x + l];
            acc[0][l] = gv.mul_add(padded[x + l], acc[0][l]);
            acc[1][l] = gv.mul_add(padded[x + l + 1], acc[1][l]);
            acc[2][l] = gv.mul_add(padded[x + l + 2], acc[2][l]);
        }
        x += LANES;
    }
    for t in x..w {
        let gv = g[t];
        acc[0][0] = gv.mul_add(padded[t], acc[0][0]);
        acc[1][0] = gv.mul_add(padded[t + 1], acc[1][0]);
        acc[2][0] = gv.mul_add(padded[t + 2], acc[2][0]);
    }
}

/// Fixed-order reduction of one tap accumulator.
pub fn tap_reduce<F: Float>(lanes: &[F; LANES]) -> F {
    let mut s = F::ZERO;
    for &l in lanes {
        s = s + l;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_for_odd_lengths() {
        for n in [0usize, 1, 15, 16, 17, 33, 100] {
            let a: Vec<f64> = (0..n).map(|i| (i as f64) * 0.25 - 3.0).collect();
            let b: Vec<f64> = (0..n).map(|i| 1.5 - (i as f64) * 0.125).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let fast = dot(&a, &b);
            assert!((fast - naive).abs() <= 1e-12 * (1.0 + naive.abs()), "n={n}");
        }
    }

    #[test]
    fn dot_is_deterministic() {
        let a: Vec<f32> = (0..1000).map(|i| ((i * 37) % 101) as f32 * 0.013 - 0.5).collect();
        let b: Vec<f32> = (0..1000).map(|i| ((i * 53) % 97) as f32 * 0.017 - 0.7).collect();
        assert_eq!(dot(&a, &b).to_bits(), dot(&a, &b).to_bits());
    }

    #[test]
    fn axpy_accumulates_in_place() {
        let x = [1.0f32, 2.0, 3.0];
        let mut y = [10.0f32, 20.0, 30.0];
        axpy(2.0, &x, &mut y);
        assert_eq!(y, [12.0, 24.0, 36.0]);
    }

    #[test]
    fn padding_wraps_rows_in_zero_columns() {
        let src = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = Vec::new();
        pad_planes(&src, 1, 2, 3, &mut out);
        assert_eq!(out, vec![0.0, 1.0, 2.0, 3.0, 0.0, 0.0, 4.0, 5.0, 6.0, 0.0]);
    }

    #[test]
    fn three_tap_row_matches_the_direct_stencil() {
        let w3 = [0.5f64, -1.0, 0.25];
        let src = [1.0f64, 2.0, -3.0, 4.0];
        let mut padded = Vec::new();
        pad_planes(&src, 1, 1, 4, &mut padded);
        let mut dst = vec![10.0f64; 4];
        add_3tap(w3, &padded, &mut dst);
        for x in 0..4 {
            let get = |i: isize| if (0..4).contains(&i) { src[i as usize] } else { 0.0 };
            let want = 10.0
                + w3[0] * get(x as isize - 1)
                + w3[1] * get(x as isize)
                + w3[2] * get(x as isize + 1);
            assert!((dst[x] - want).abs() < 1e-12, "x={x}: {} vs {want}", dst[x]);
        }
    }

    #[test]
    fn weight_tap_accumulator_matches_direct_sums() {
        let n = 37; // exercises the non-lane tail
        let g: Vec<f64> = (0..n).map(|i| (i as f64) * 0.1 - 1.0).collect();
        let src: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) * 0.3 - 1.5).collect();
        let mut padded = Vec::new();
        pad_planes(&src, 1, 1, n, &mut padded);
        let mut acc = tap_acc_zero();
        wgrad_3tap(&g, &padded, &mut acc);
        for kx in 0..3usize {
            let got = tap_reduce(&acc[kx]);
            let mut want = 0.0;
            for x in 0..n as isize {
                let s = x + kx as isize - 1;
                if (0..n as isize).contains(&s) {
                    want += g[x as usize] * src[s as usize];
                }
            }
            assert!((got - want).abs() < 1e-10, "kx={kx}: {got} vs {want}");
        }
    }
}
