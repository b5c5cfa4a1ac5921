//! Characteristic-function plugin for two independent Laplace(0, 1)
//! coordinates: `Φ(z) = Π_k 1/(1 + z_k²)`.
//!
//! Build with `cargo build -p cfgen-plugin-example --release` and point an
//! `external` target at the resulting shared library.

use std::slice;

pub const DIM: usize = 2;
/// Laplace scale of every coordinate.
pub const SCALE: f64 = 1.0;

pub fn laplace_cf(z: &[f64]) -> f64 {
    z.iter().map(|t| 1.0 / (1.0 + SCALE * SCALE * t * t)).product()
}

#[no_mangle]
pub extern "C" fn cfgen_cf_abi_version() -> u32 {
    1
}

#[no_mangle]
pub extern "C" fn cfgen_cf_dim() -> usize {
    DIM
}

/// # Safety
/// `z` must point to `rows * cols` values and each output to `rows` values.
#[no_mangle]
pub unsafe extern "C" fn cfgen_cf_eval_batch(
    z: *const f64,
    rows: usize,
    cols: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> i32 {
    if cols != DIM || z.is_null() || out_re.is_null() || out_im.is_null() {
        return 1;
    }
    // SAFETY: lengths are guaranteed by the caller per the plugin ABI.
    let (z, re, im) = unsafe {
        (
            slice::from_raw_parts(z, rows * cols),
            slice::from_raw_parts_mut(out_re, rows),
            slice::from_raw_parts_mut(out_im, rows),
        )
    };
    for (i, row) in z.chunks_exact(cols).enumerate() {
        re[i] = laplace_cf(row);
        im[i] = 0.0;
    }
    0
}
