//! The specialized 3x3 isotropic-elasticity block update shared by the sequential
//! optimized integrator and the emulated kernels.

use num_traits::Float;

/// Flops in one call of [`elasticity_block_update`].
pub const BLOCK_UPDATE_FLOPS: u64 = 63;

/// Accumulates one quadrature point's contribution to the block of test DOF `a`
/// and trial DOF `b`.
///
/// `a` and `b` are physical gradients; `lw` and `mw` are the Lame parameters already
/// scaled by `det * w`. Entry `acc[3 * i + k]` belongs to test equation `i`, trial
/// equation `k`:
/// `lw a_i b_k + mw a_k b_i + mw d_ik (a . b)`.
#[inline(always)]
pub fn elasticity_block_update<T: Float>(a: [T; 3], b: [T; 3], lw: T, mw: T, acc: &mut [T; 9]) {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let md = mw * dot;
    for i in 0..3 {
        for k in 0..3 {
            let mut v = lw * a[i] * b[k] + mw * a[k] * b[i];
            if i == k {
                v = v + md;
            }
            acc[3 * i + k] = acc[3 * i + k] + v;
        }
    }
}
