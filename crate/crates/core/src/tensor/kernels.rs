//! im2col-based convolution kernels on single `C×H×W` planes.

use super::scalar::{gemm, MatView};
use super::Scalar;

/// Upper bound on the elements of one im2col buffer; larger problems are
/// processed in bands of output rows.
const COL_BUDGET: usize = 1 << 22;

/// Geometry of a convolution seen from its (dense) input side.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub dh: usize,
    pub dw: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Geometry {
    pub fn patch(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn in_plane(&self) -> usize {
        self.in_h * self.in_w
    }

    pub fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Output rows per band so that a band's column buffer fits the budget.
    pub fn band_rows(&self) -> usize {
        let per_row = (self.patch() * self.out_w).max(1);
        (COL_BUDGET / per_row).clamp(1, self.out_h.max(1))
    }

    fn bands(&self) -> impl Iterator<Item = (usize, usize)> {
        let step = self.band_rows();
        let out_h = self.out_h;
        (0..out_h)
            .step_by(step)
            .map(move |r0| (r0, (r0 + step).min(out_h)))
    }

    #[inline]
    fn source(&self, o: usize, k: usize, stride: usize, pad: usize, dil: usize, lim: usize) -> Option<usize> {
        let pos = (o * stride + k * dil) as isize - pad as isize;
        (pos >= 0 && (pos as usize) < lim).then_some(pos as usize)
    }

    /// Fills `cols` (patch × band pixels) for output rows `r0..r1`.
    pub fn im2col<T: Scalar>(&self, input: &[T], r0: usize, r1: usize, cols: &mut [T]) {
        let npix = (r1 - r0) * self.out_w;
        debug_assert_eq!(cols.len(), self.patch() * npix);
        for c in 0..self.channels {
            let plane = &input[c * self.in_plane()..(c + 1) * self.in_plane()];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (c * self.kh + ky) * self.kw + kx;
                    let dst = &mut cols[row * npix..(row + 1) * npix];
                    for oy in r0..r1 {
                        let line = &mut dst[(oy - r0) * self.out_w..(oy - r0 + 1) * self.out_w];
                        match self.source(oy, ky, self.sh, self.ph, self.dh, self.in_h) {
                            None => line.fill(T::zero()),
                            Some(iy) => {
                                let src = &plane[iy * self.in_w..(iy + 1) * self.in_w];
                                for (ox, v) in line.iter_mut().enumerate() {
                                    *v = match self.source(ox, kx, self.sw, self.pw, self.dw, self.in_w) {
                                        Some(ix) => src[ix],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds `cols` for output rows `r0..r1` back onto the input.
    pub fn col2im_add<T: Scalar>(&self, cols: &[T], r0: usize, r1: usize, input: &mut [T]) {
        let npix = (r1 - r0) * self.out_w;
        let in_plane = self.in_plane();
        for c in 0..self.channels {
            let plane = &mut input[c * in_plane..(c + 1) * in_plane];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (c * self.kh + ky) * self.kw + kx;
                    let src = &cols[row * npix..(row + 1) * npix];
                    for oy in r0..r1 {
                        let Some(iy) = self.source(oy, ky, self.sh, self.ph, self.dh, self.in_h) else {
                            continue;
                        };
                        let line = &src[(oy - r0) * self.out_w..(oy - r0 + 1) * self.out_w];
                        let dst = &mut plane[iy * self.in_w..(iy + 1) * self.in_w];
                        for (ox, &v) in line.iter().enumerate() {
                            if let Some(ix) = self.source(ox, kx, self.sw, self.pw, self.dw, self.in_w) {
                                dst[ix] = dst[ix] + v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `out (oc × out_plane) = W (oc × patch) · im2col(input)`.
    pub fn correlate<T: Scalar>(&self, input: &[T], weights: &[T], oc: usize, out: &mut [T]) {
        let patch = self.patch();
        let mut cols = Vec::new();
        for (r0, r1) in self.bands() {
            let npix = (r1 - r0) * self.out_w;
            cols.resize(patch * npix, T::zero());
            self.im2col(input, r0, r1, &mut cols);
            gemm(
                oc,
                patch,
                npix,
                weights,
                MatView::row_major(patch),
                &cols,
                MatView::row_major(npix),
                T::zero(),
                out,
                MatView {
                    offset: r0 * self.out_w,
                    rs: self.out_plane(),
                    cs: 1,
                },
            );
        }
    }

    /// Adjoint of [`correlate`](Self::correlate) with respect to its input:
    /// `input += col2im(Wᵀ · grad_out)`.
    pub fn correlate_adjoint<T: Scalar>(&self, grad_out: &[T], weights: &[T], oc: usize, input: &mut [T]) {
        let patch = self.patch();
        let mut cols = Vec::new();
        for (r0, r1) in self.bands() {
            let npix = (r1 - r0) * self.out_w;
            cols.resize(patch * npix, T::zero());
            gemm(
                patch,
                oc,
                npix,
                weights,
                MatView::transposed(patch),
                grad_out,
                MatView {
                    offset: r0 * self.out_w,
                    rs: self.out_plane(),
                    cs: 1,
                },
                T::zero(),
                &mut cols,
                MatView::row_major(npix),
            );
            self.col2im_add(&cols, r0, r1, input);
        }
    }

    /// `grad_w (oc × patch) += grad_out · im2col(input)ᵀ`.
    pub fn weight_grad<T: Scalar>(&self, input: &[T], grad_out: &[T], oc: usize, grad_w: &mut [T]) {
        let patch = self.patch();
        let mut cols = Vec::new();
        for (r0, r1) in self.bands() {
            let npix = (r1 - r0) * self.out_w;
            cols.resize(patch * npix, T::zero());
            self.im2col(input, r0, r1, &mut cols);
            gemm(
                oc,
                npix,
                patch,
                grad_out,
                MatView {
                    offset: r0 * self.out_w,
                    rs: self.out_plane(),
                    cs: 1,
                },
                &cols,
                MatView::transposed(npix),
                T::one(),
                grad_w,
                MatView::row_major(patch),
            );
        }
    }
}
