use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use prismint_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    unsafe { prismint_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn profile(name: &str) -> *mut PrismintProfile {
    let name = CString::new(name).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { prismint_profile_load(name.as_ptr(), &mut out) }, PRISMINT_OK, "{}", last_error());
    out
}

fn box_mesh(nx: usize, ny: usize, nz: usize) -> *mut PrismintMesh {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { prismint_mesh_box(nx, ny, nz, 0.1, 42, &mut out) }, PRISMINT_OK);
    out
}

#[test]
fn plan_info_reproduces_reference_partitioning() {
    let prof = profile("gtx580");
    let cases = [(PRISMINT_VARIANT_REG_JAC, 7, 162, 1), (PRISMINT_VARIANT_SHM_NOJAC, 7, 81, 2)];
    for (variant, p, parts, bpt) in cases {
        let mut plan = ptr::null_mut();
        assert_eq!(unsafe { prismint_plan_create(prof, p, variant, usize::MAX, &mut plan) }, PRISMINT_OK);
        let mut info = PrismintPlanInfo::default();
        assert_eq!(unsafe { prismint_plan_info(plan, &mut info) }, PRISMINT_OK);
        assert_eq!((info.variant, info.p, info.n_parts, info.blocks_per_thread), (variant, p, parts, bpt));
        assert_eq!(info.n_blocks, 288 * 288);
        assert_eq!(info.output_bytes, info.elems_per_kernel * 864 * 864 * 4);
        unsafe { prismint_plan_free(plan) };
    }
    unsafe { prismint_profile_free(prof) };
}

#[test]
fn integrate_matches_reference_for_all_variants() {
    let prof = profile("hd5870");
    let mesh = box_mesh(1, 1, 1);
    let n = unsafe { prismint_mesh_len(mesh) };
    assert_eq!(n, 2);
    let len = prismint_matrix_len(3);
    assert_eq!(len, 120 * 120);
    let mut reference = vec![0.0; n * len];
    for e in 0..n {
        let rc = unsafe {
            prismint_integrate_reference(mesh, e, 3, 2.0, 0.25, reference[e * len..].as_mut_ptr(), len)
        };
        assert_eq!(rc, PRISMINT_OK);
    }
    for variant in 0..4 {
        let mut out = vec![0.0; n * len];
        let mut flops = 0u64;
        let rc = unsafe {
            prismint_integrate(prof, mesh, 3, variant, 2.0, 0.25, PRISMINT_PRECISION_F64, 2, out.as_mut_ptr(), out.len(), &mut flops)
        };
        assert_eq!(rc, PRISMINT_OK, "{}", last_error());
        assert!(flops > 0);
        let diff: f64 = out.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm: f64 = reference.iter().map(|b| b * b).sum();
        assert!((diff / norm).sqrt() <= 1e-12, "variant {variant}");
    }
    unsafe {
        prismint_mesh_free(mesh);
        prismint_profile_free(prof);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let prof = profile("gtx580");
    let mesh = box_mesh(1, 1, 1);
    let mut buf = vec![0.0; 10];
    let call = |p, variant, young, poisson, precision, out: &mut [f64]| unsafe {
        prismint_integrate(prof, mesh, p, variant, young, poisson, precision, 1, out.as_mut_ptr(), out.len(), ptr::null_mut())
    };
    assert_eq!(call(2, 0, 1.0, 0.3, 0, &mut buf), PRISMINT_ERR_BUFFER_TOO_SMALL);
    assert!(last_error().contains("needed"));
    assert_eq!(call(9, 0, 1.0, 0.3, 0, &mut buf), 10);
    assert!(last_error().contains("order 9"));
    assert_eq!(call(2, 7, 1.0, 0.3, 0, &mut buf), PRISMINT_ERR_INVALID_ARGUMENT);
    assert_eq!(call(2, 0, 1.0, 0.3, 5, &mut buf), PRISMINT_ERR_INVALID_ARGUMENT);
    let mut big = vec![0.0; 2 * prismint_matrix_len(2)];
    assert_eq!(call(2, 0, 1.0, 0.5, 0, &mut big), 30);
    assert_eq!(call(2, 0, 1.0, 0.3, 0, &mut big), PRISMINT_OK);
    assert_eq!(last_error(), "");

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { prismint_profile_load(ptr::null(), &mut out) }, PRISMINT_ERR_NULL_POINTER);
    let bogus = CString::new("no-such-profile").unwrap();
    assert_eq!(unsafe { prismint_profile_load(bogus.as_ptr(), &mut out) }, 40);
    assert_eq!(unsafe { prismint_mesh_len(ptr::null()) }, 0);
    assert_eq!(prismint_matrix_len(0), 0);
    let mut info = PrismintPlanInfo::default();
    assert_eq!(unsafe { prismint_plan_info(ptr::null(), &mut info) }, PRISMINT_ERR_NULL_POINTER);
    unsafe {
        prismint_mesh_free(mesh);
        prismint_profile_free(prof);
        prismint_mesh_free(ptr::null_mut());
    }
}

#[test]
fn inverted_element_reports_its_index() {
    // Two unit prisms; the second has its bottom triangle wound backwards.
    let right = [0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 0., 1., 0., 1., 1.];
    let mut flipped = right;
    flipped.swap(3, 6);
    flipped.swap(4, 7);
    flipped.swap(12, 15);
    flipped.swap(13, 16);
    let coords: Vec<f64> = right.iter().chain(&flipped).copied().collect();
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { prismint_mesh_from_vertices(coords.as_ptr(), 2, &mut mesh) }, PRISMINT_OK);
    let prof = profile("gtx580");
    let len = prismint_matrix_len(1);
    let mut out = vec![0.0; 2 * len];
    let rc = unsafe {
        prismint_integrate(prof, mesh, 1, PRISMINT_VARIANT_SHM_JAC, 1.0, 0.3, PRISMINT_PRECISION_F32, 1, out.as_mut_ptr(), out.len(), ptr::null_mut())
    };
    assert_eq!(rc, 20);
    assert!(last_error().contains("element 1"), "{}", last_error());
    let rc = unsafe { prismint_integrate_reference(mesh, 1, 1, 1.0, 0.3, out.as_mut_ptr(), len) };
    assert_eq!(rc, 20);
    assert!(last_error().contains("element 1"));
    unsafe {
        prismint_mesh_free(mesh);
        prismint_profile_free(prof);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(prismint_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// `target/<profile>` next to the test executable's `deps` directory.
fn artifact_dir() -> Option<PathBuf> {
    std::env::current_exe().ok()?.parent()?.parent().map(Path::to_path_buf)
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(crate_dir().join("include/prismint.h")).unwrap();
    for sym in [
        "typedef struct PrismintProfile PrismintProfile;",
        "typedef struct PrismintMesh PrismintMesh;",
        "typedef struct PrismintPlan PrismintPlan;",
        "typedef struct PrismintPlanInfo",
        "int32_t prismint_integrate(",
        "int32_t prismint_plan_create(",
        "size_t prismint_last_error(char *buf, size_t len);",
        "#define PRISMINT_ERR_BUFFER_TOO_SMALL -3",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let lib = match artifact_dir().map(|d| d.join("libprismint_ffi.a")) {
        Some(l) if l.exists() => l,
        _ => {
            eprintln!("static library not found next to the test binary, skipping");
            return;
        }
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let tmp = std::env::temp_dir().join(format!("prismint_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&tmp)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&tmp).output().unwrap();
    let _ = std::fs::remove_file(&tmp);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
