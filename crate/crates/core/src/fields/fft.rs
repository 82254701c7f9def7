//! Cube-shaped n-dimensional FFTs with cached plans.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanKey = (usize, bool);
type PlanCache = Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>;

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let key = (len, matches!(direction, FftDirection::Forward));
    let mut plans = PLANS
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .expect("fft plan cache poisoned");
    plans
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(len, direction))
        .clone()
}

/// Unnormalized in-place transform of a row-major cube with `n` points per
/// axis and `dim` axes.
pub(crate) fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // Last axis is contiguous.
    fft.process_with_scratch(data, &mut scratch);
    if dim == 1 {
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim - 1 {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }
}

/// Multiplies sample `j` by `(-1)^(j_1 + ... + j_dim)`.
pub(crate) fn checkerboard(data: &mut [Complex64], n: usize, dim: usize) {
    // With n even, the parity of the index sum equals the parity of the flat
    // index digits; compute it incrementally per row.
    let rows = data.len() / n;
    let mut idx = vec![0usize; dim.saturating_sub(1)];
    for r in 0..rows {
        let mut parity = idx.iter().sum::<usize>() & 1;
        let row = &mut data[r * n..(r + 1) * n];
        for v in row.iter_mut() {
            if parity == 1 {
                *v = -*v;
            }
            parity ^= 1;
        }
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
}
