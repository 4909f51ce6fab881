//! C ABI for `prismint`.
//!
//! Objects cross the boundary as opaque handles created by `*_create`/`*_load`
//! functions and released by the matching `*_free`. Every fallible call returns
//! an `int32_t` status: `PRISMINT_OK` (0), one of the negative ABI codes below,
//! or a positive library error code (the same numbers the CLI exits with). The
//! message of the most recent failure on the calling thread is available from
//! [`prismint_last_error`].
//!
//! Matrices are written in the canonical dense row-major layout, element after
//! element, each `(3 N_sh)^2` doubles long (see [`prismint_matrix_len`]).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use prismint::coefficients::{MaterialData, MaterialField};
use prismint::geometry::PrismGeometry;
use prismint::integrate::integrate_optimized;
use prismint::kernels::{run_batch, BatchOptions, Precision};
use prismint::mesh::{generate_box_mesh_seeded, Mesh};
use prismint::planner::{DeviceProfile, ExecutionPlan, KernelVariant};
use prismint::quadrature::prism_quadrature;
use prismint::shapes::tabulate_shapes;

pub const PRISMINT_OK: i32 = 0;
/// A required pointer argument was null.
pub const PRISMINT_ERR_NULL_POINTER: i32 = -1;
/// The library panicked; the handle arguments should be considered unusable.
pub const PRISMINT_ERR_PANIC: i32 = -2;
/// An output buffer was shorter than required.
pub const PRISMINT_ERR_BUFFER_TOO_SMALL: i32 = -3;
/// An enum or index argument was out of range, or a string was not UTF-8.
pub const PRISMINT_ERR_INVALID_ARGUMENT: i32 = -4;

pub const PRISMINT_VARIANT_REG_JAC: i32 = 0;
pub const PRISMINT_VARIANT_REG_NOJAC: i32 = 1;
pub const PRISMINT_VARIANT_SHM_JAC: i32 = 2;
pub const PRISMINT_VARIANT_SHM_NOJAC: i32 = 3;

pub const PRISMINT_PRECISION_F32: i32 = 0;
pub const PRISMINT_PRECISION_F64: i32 = 1;

/// Device profile handle.
pub struct PrismintProfile {
    inner: DeviceProfile,
}

/// Mesh handle.
pub struct PrismintMesh {
    inner: Mesh,
}

/// Execution plan handle.
pub struct PrismintPlan {
    inner: ExecutionPlan,
}

/// Plain-data copy of an execution plan.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrismintPlanInfo {
    pub variant: i32,
    pub p: u32,
    pub n_sh: usize,
    pub n_q: usize,
    pub work_group_size: usize,
    pub n_blocks: usize,
    pub blocks_per_thread: usize,
    pub n_parts: usize,
    pub elems_per_kernel: usize,
    pub elems_per_work_group: usize,
    pub n_work_groups: usize,
    pub shared_scratch_bytes: usize,
    pub output_bytes: usize,
    pub input_bytes_jac: usize,
    pub input_bytes_nojac: usize,
}

enum Failure {
    Lib(prismint::Error),
    Null(&'static str),
    Buffer { needed: usize, got: usize },
    Arg(String),
}

impl From<prismint::Error> for Failure {
    fn from(e: prismint::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Lib(e) => e.code(),
            Failure::Null(_) => PRISMINT_ERR_NULL_POINTER,
            Failure::Buffer { .. } => PRISMINT_ERR_BUFFER_TOO_SMALL,
            Failure::Arg(_) => PRISMINT_ERR_INVALID_ARGUMENT,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Null(what) => format!("null pointer: {what}"),
            Failure::Buffer { needed, got } => format!("output buffer holds {got} values, {needed} needed"),
            Failure::Arg(m) => m.clone(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            PRISMINT_OK
        }
        Ok(Err(failure)) => {
            set_last_error(failure.message());
            failure.code()
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PRISMINT_ERR_PANIC
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or(Failure::Null(what))
}

fn variant_from(v: i32) -> Result<KernelVariant, Failure> {
    usize::try_from(v)
        .ok()
        .and_then(|i| KernelVariant::ALL.get(i).copied())
        .ok_or_else(|| Failure::Arg(format!("unknown variant {v}")))
}

fn variant_code(v: KernelVariant) -> i32 {
    KernelVariant::ALL.iter().position(|&x| x == v).unwrap_or(0) as i32
}

fn precision_from(v: i32) -> Result<Precision, Failure> {
    match v {
        PRISMINT_PRECISION_F32 => Ok(Precision::F32),
        PRISMINT_PRECISION_F64 => Ok(Precision::F64),
        _ => Err(Failure::Arg(format!("unknown precision {v}"))),
    }
}

unsafe fn out_slice<'a>(ptr: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null("out"));
    }
    if len < needed {
        return Err(Failure::Buffer { needed, got: len });
    }
    Ok(std::slice::from_raw_parts_mut(ptr, needed))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn prismint_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length. Pass a
/// null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn prismint_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Doubles per element matrix at order `p`, or 0 for an unsupported order.
#[no_mangle]
pub extern "C" fn prismint_matrix_len(p: u32) -> usize {
    let p = p as usize;
    if prismint::check_order(p).is_err() {
        return 0;
    }
    let dim = prismint::ELASTICITY_EQS * prismint::n_shape(p);
    dim * dim
}

/// Loads a bundled profile (`"gtx580"`, `"hd5870"`) or a JSON profile file.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prismint_profile_load(name: *const c_char, out: *mut *mut PrismintProfile) -> i32 {
    guard(|| {
        if name.is_null() {
            return Err(Failure::Null("name"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Failure::Arg("profile name is not UTF-8".into()))?;
        let inner = DeviceProfile::resolve(name)?;
        *out = Box::into_raw(Box::new(PrismintProfile { inner }));
        Ok(())
    })
}

/// # Safety
/// `profile` must be null or a handle from [`prismint_profile_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prismint_profile_free(profile: *mut PrismintProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Structured box mesh of `2 nx ny nz` prisms on the unit cube.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prismint_mesh_box(
    nx: usize,
    ny: usize,
    nz: usize,
    distortion: f64,
    seed: u64,
    out: *mut *mut PrismintMesh,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let inner = generate_box_mesh_seeded(nx, ny, nz, distortion, seed)?;
        *out = Box::into_raw(Box::new(PrismintMesh { inner }));
        Ok(())
    })
}

/// Mesh from explicit vertex coordinates: 18 doubles per element (six
/// vertices, `x y z` each, bottom triangle first).
///
/// # Safety
/// `coords` must point to `18 * n_elements` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prismint_mesh_from_vertices(
    coords: *const f64,
    n_elements: usize,
    out: *mut *mut PrismintMesh,
) -> i32 {
    guard(|| {
        if coords.is_null() {
            return Err(Failure::Null("coords"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if n_elements == 0 {
            return Err(Failure::Arg("mesh needs at least one element".into()));
        }
        let flat = std::slice::from_raw_parts(coords, 18 * n_elements);
        let geoms: Vec<PrismGeometry> = flat
            .chunks_exact(18)
            .map(|c| PrismGeometry {
                vertices: std::array::from_fn(|v| [c[3 * v], c[3 * v + 1], c[3 * v + 2]]),
            })
            .collect();
        *out = Box::into_raw(Box::new(PrismintMesh {
            inner: Mesh::from_geometries(&geoms),
        }));
        Ok(())
    })
}

/// Number of elements, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn prismint_mesh_len(mesh: *const PrismintMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.len())
}

/// # Safety
/// `mesh` must be null or a mesh handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prismint_mesh_free(mesh: *mut PrismintMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Plans one kernel invocation with at most `n_elements` elements using the
/// profile's planning defaults for order `p`.
///
/// # Safety
/// `profile` must be a live profile handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prismint_plan_create(
    profile: *const PrismintProfile,
    p: u32,
    variant: i32,
    n_elements: usize,
    out: *mut *mut PrismintPlan,
) -> i32 {
    guard(|| {
        let prof = deref(profile, "profile")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let inner = prof.inner.plan(p as usize, variant_from(variant)?, n_elements)?;
        *out = Box::into_raw(Box::new(PrismintPlan { inner }));
        Ok(())
    })
}

/// # Safety
/// `plan` must be a live plan handle; `info` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prismint_plan_info(plan: *const PrismintPlan, info: *mut PrismintPlanInfo) -> i32 {
    guard(|| {
        let plan = &deref(plan, "plan")?.inner;
        if info.is_null() {
            return Err(Failure::Null("info"));
        }
        *info = PrismintPlanInfo {
            variant: variant_code(plan.variant),
            p: plan.p as u32,
            n_sh: plan.n_sh,
            n_q: plan.n_q,
            work_group_size: plan.work_group_size,
            n_blocks: plan.n_blocks,
            blocks_per_thread: plan.blocks_per_thread,
            n_parts: plan.n_parts,
            elems_per_kernel: plan.elems_per_kernel,
            elems_per_work_group: plan.elems_per_work_group,
            n_work_groups: plan.n_work_groups,
            shared_scratch_bytes: plan.shared_scratch_bytes,
            output_bytes: plan.output_bytes,
            input_bytes_jac: plan.input_bytes_jac,
            input_bytes_nojac: plan.input_bytes_nojac,
        };
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a plan handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn prismint_plan_free(plan: *mut PrismintPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Integrates every element of `mesh` with the emulated kernel `variant` and a
/// uniform isotropic material. `out` receives `n_elements * prismint_matrix_len(p)`
/// doubles; `flops` (optional) the instrumented flop count. `workers` of 0 uses
/// all cores.
///
/// # Safety
/// Handles must be live; `out` must point to `out_len` writable doubles; `flops`
/// must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prismint_integrate(
    profile: *const PrismintProfile,
    mesh: *const PrismintMesh,
    p: u32,
    variant: i32,
    young: f64,
    poisson: f64,
    precision: i32,
    workers: usize,
    out: *mut f64,
    out_len: usize,
    flops: *mut u64,
) -> i32 {
    guard(|| {
        let prof = &deref(profile, "profile")?.inner;
        let mesh = &deref(mesh, "mesh")?.inner;
        let p = p as usize;
        let v = variant_from(variant)?;
        let opts = BatchOptions {
            precision: precision_from(precision)?,
            workers: (workers > 0).then_some(workers),
        };
        prismint::check_order(p)?;
        let dst = out_slice(out, out_len, mesh.len() * prismint_matrix_len(p as u32))?;
        let mat = MaterialField::Global(MaterialData::new(young, poisson)?);
        let res = run_batch(v, &prof.device, &prof.options(p), p, mesh, &mat, opts)?;
        for (chunk, m) in dst.chunks_exact_mut(prismint_matrix_len(p as u32)).zip(&res.matrices) {
            chunk.copy_from_slice(&m.data);
        }
        if let Some(f) = flops.as_mut() {
            *f = res.flops;
        }
        Ok(())
    })
}

/// Sequential wide-precision matrix of one element, for checking kernel output.
///
/// # Safety
/// `mesh` must be live; `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn prismint_integrate_reference(
    mesh: *const PrismintMesh,
    element: usize,
    p: u32,
    young: f64,
    poisson: f64,
    out: *mut f64,
    out_len: usize,
) -> i32 {
    guard(|| {
        let mesh = &deref(mesh, "mesh")?.inner;
        if element >= mesh.len() {
            return Err(Failure::Arg(format!("element {element} out of range (mesh has {})", mesh.len())));
        }
        let p = p as usize;
        prismint::check_order(p)?;
        let dst = out_slice(out, out_len, prismint_matrix_len(p as u32))?;
        let rule = prism_quadrature(p)?;
        let shapes = tabulate_shapes(p, &rule)?;
        let mat = MaterialData::new(young, poisson)?;
        let a = integrate_optimized(&mesh.geometry(element), &mat, &shapes, &rule)
            .map_err(|e| e.with_element(element))?;
        dst.copy_from_slice(&a.data);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_codes_roundtrip() {
        for (i, v) in KernelVariant::ALL.iter().enumerate() {
            assert_eq!(variant_from(i as i32).ok(), Some(*v));
            assert_eq!(variant_code(*v), i as i32);
        }
        assert!(variant_from(4).is_err());
        assert!(variant_from(-1).is_err());
    }

    #[test]
    fn panics_become_status_codes() {
        let code = guard(|| panic!("boom"));
        assert_eq!(code, PRISMINT_ERR_PANIC);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { prismint_last_error(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(n, msg.len());
    }
}
