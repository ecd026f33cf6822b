//! Multi-dimensional complex FFT on cubic row-major arrays.
//!
//! The transform runs one axis at a time: FFT every lane of the last
//! (contiguous) axis, then rotate the axes with a 2-D transpose so the next
//! axis becomes contiguous. After `dim` rounds the axes are back in their
//! original order.
//!
//! For zero-padded convolutions most lanes are either known to be zero on
//! input or not needed on output; [`Pruning`] lets the caller skip those.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanKey = (usize, bool);
type PlanCache = Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>;

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().expect("fft plan cache poisoned");
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Which lanes may be skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pruning {
    /// Transform everything.
    None,
    /// Input is zero outside `[0, live)^dim`; skip lanes that are still all zero.
    ZeroPaddedInput { live: usize },
    /// Only `[0, live)^dim` of the output is read; skip lanes that only feed
    /// discarded entries.
    CroppedOutput { live: usize },
}

/// Unnormalized N-d DFT (forward: `exp(-2πi jk/n)`); the inverse is not scaled.
pub(crate) fn transform(
    data: &mut Vec<Complex64>,
    len: usize,
    dim: usize,
    inverse: bool,
    pruning: Pruning,
) {
    debug_assert_eq!(data.len(), len.pow(dim as u32));
    let fft = plan(len, inverse);
    let lanes = data.len() / len;
    let mut rotated = vec![Complex64::new(0.0, 0.0); data.len()];

    for round in 0..dim {
        // Axis order before this round is (0..dim) rotated left by `round`;
        // the last entry is the axis being transformed.
        let order: Vec<usize> = (0..dim).map(|p| (p + round) % dim).collect();
        let transformed_before = |axis: usize| (0..round).any(|q| (dim - 1 + q) % dim == axis);
        let skip_lane = |lane: usize| -> bool {
            let (live, check_transformed) = match pruning {
                Pruning::None => return false,
                Pruning::ZeroPaddedInput { live } => (live, false),
                Pruning::CroppedOutput { live } => (live, true),
            };
            let mut rest = lane;
            for p in (0..dim - 1).rev() {
                let digit = rest % len;
                rest /= len;
                let axis = order[p];
                if transformed_before(axis) == check_transformed && digit >= live {
                    return true;
                }
            }
            false
        };
        let skip: Vec<bool> = (0..lanes).map(skip_lane).collect();

        data.par_chunks_exact_mut(len)
            .zip(skip.par_iter())
            .for_each_init(
                || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                |scratch, (lane, &skip)| {
                    if !skip {
                        fft.process_with_scratch(lane, scratch);
                    }
                },
            );

        transpose(data, &mut rotated, len, lanes);
        std::mem::swap(data, &mut rotated);
    }
}

/// Transpose a `rows x cols` row-major matrix into `cols x rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    dst.par_chunks_mut(rows * BLOCK.min(cols))
        .enumerate()
        .for_each(|(chunk, out)| {
            let c0 = chunk * BLOCK.min(cols);
            let ncols = out.len() / rows;
            for r0 in (0..rows).step_by(BLOCK) {
                let r1 = (r0 + BLOCK).min(rows);
                for c in 0..ncols {
                    let base = c * rows;
                    for r in r0..r1 {
                        out[base + r] = src[r * cols + c0 + c];
                    }
                }
            }
        });
}

/// Signed integer frequency for index `i` of a length-`len` transform.
pub(crate) fn signed_frequency(i: usize, len: usize) -> i64 {
    if i < len / 2 {
        i as i64
    } else {
        i as i64 - len as i64
    }
}
