//! Pruned 2D FFTs between the padded physical grid and the truncated band.
//!
//! Only the `2N + 1` band columns are transformed along `x2`; the remaining
//! columns are known to be zero (inverse) or are discarded (forward).
//! Two real fields are packed into one complex transform as `f + i g`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

#[inline]
fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

const BLOCK: usize = 32;

struct Workspace {
    full: Vec<Complex64>,
    band: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

thread_local! {
    static WORKSPACE: RefCell<Workspace> = const {
        RefCell::new(Workspace {
            full: Vec::new(),
            band: Vec::new(),
            scratch: Vec::new(),
        })
    };
}

/// Buffer of length `len` with unspecified contents.
fn sized(buf: &mut Vec<Complex64>, len: usize) -> &mut [Complex64] {
    buf.resize(len, Complex64::new(0.0, 0.0));
    &mut buf[..len]
}

/// Zeroes the entries of a length-`p` line that lie outside the band `|k| <= n`.
fn clear_outside_band(line: &mut [Complex64], n: usize) {
    let p = line.len();
    line[n + 1..p - n].fill(Complex64::new(0.0, 0.0));
}

/// Packed band coefficients `Z = F + iG` to grid values `(f, g)`.
pub(crate) fn band_to_grid(grid: &GridSpec, packed: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let p = grid.phys_n();
    let n = grid.cutoff() as i64;
    let width = grid.modes();
    let plans = plans(p);
    WORKSPACE.with_borrow_mut(|ws| {
        let scratch_len = plans.inverse.get_inplace_scratch_len();
        let scratch = sized(&mut ws.scratch, scratch_len);

        // band columns along x2, stored contiguously one per k1
        let cols = sized(&mut ws.band, width * p);
        for (c, column) in cols.chunks_exact_mut(p).enumerate() {
            clear_outside_band(column, n as usize);
            for k2 in -n..=n {
                column[wrap(k2, p)] = packed[(k2 + n) as usize * width + c];
            }
        }
        plans.inverse.process_with_scratch(cols, scratch);

        let rows = sized(&mut ws.full, p * p);
        for row in rows.chunks_exact_mut(p) {
            clear_outside_band(row, n as usize);
        }
        for ib in (0..p).step_by(BLOCK) {
            let ie = (ib + BLOCK).min(p);
            for (c, column) in cols.chunks_exact(p).enumerate() {
                let col = wrap(c as i64 - n, p);
                for i in ib..ie {
                    rows[i * p + col] = column[i];
                }
            }
        }
        plans.inverse.process_with_scratch(rows, scratch);

        let f = rows.iter().map(|z| z.re).collect();
        let g = rows.iter().map(|z| z.im).collect();
        (f, g)
    })
}

/// Grid values `(f, g)` to raw packed band coefficients `Z = FFT(f + i g) / P^2`.
pub(crate) fn grid_to_band(grid: &GridSpec, f: &[f64], g: Option<&[f64]>) -> Vec<Complex64> {
    let p = grid.phys_n();
    let n = grid.cutoff() as i64;
    let width = grid.modes();
    let plans = plans(p);
    WORKSPACE.with_borrow_mut(|ws| {
        let scratch_len = plans.forward.get_inplace_scratch_len();
        let scratch = sized(&mut ws.scratch, scratch_len);

        let rows = sized(&mut ws.full, p * p);
        match g {
            Some(g) => {
                for ((z, &re), &im) in rows.iter_mut().zip(f).zip(g) {
                    *z = Complex64::new(re, im);
                }
            }
            None => {
                for (z, &re) in rows.iter_mut().zip(f) {
                    *z = Complex64::new(re, 0.0);
                }
            }
        }
        plans.forward.process_with_scratch(rows, scratch);

        let cols = sized(&mut ws.band, width * p);
        for ib in (0..p).step_by(BLOCK) {
            let ie = (ib + BLOCK).min(p);
            for (c, column) in cols.chunks_exact_mut(p).enumerate() {
                let col = wrap(c as i64 - n, p);
                for i in ib..ie {
                    column[i] = rows[i * p + col];
                }
            }
        }
        plans.forward.process_with_scratch(cols, scratch);

        let norm = 1.0 / (p * p) as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); width * width];
        for (c, column) in cols.chunks_exact(p).enumerate() {
            for k2 in -n..=n {
                out[(k2 + n) as usize * width + c] = column[wrap(k2, p)] * norm;
            }
        }
        out
    })
}
