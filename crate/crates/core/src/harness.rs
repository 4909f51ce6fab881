//! Verification suites, planner reports and the benchmark driver behind the CLI.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coefficients::{elasticity_tensor, MaterialData, MaterialField, QuadCoefficients};
use crate::error::{Error, Result};
use crate::geometry::PrismGeometry;
use crate::integrate::{integrate_generic, integrate_optimized, rigid_body_modes, ElementStiffness};
use crate::kernels::{
    flop_model, prepare_inputs, run_batch, run_kernel, run_kernel_into, BatchOptions, KernelOutput,
    KernelReal, Precision,
};
use crate::mesh::{generate_box_mesh_seeded, Mesh, DEFAULT_SEED};
use crate::planner::{
    memory_accounting, work_group_size, DeviceProfile, ExecutionPlan, KernelVariant, MemoryAccounting,
    PlanOptions,
};
use crate::quadrature::{prism_quadrature, QuadratureRule};
use crate::shapes::{tabulate_shapes, ShapeTable};
use crate::{check_order, n_quad, n_shape};

pub const VERIFY_REPORT_SCHEMA: &str = include_str!("../schemas/verify_report.schema.json");
pub const BENCH_REPORT_SCHEMA: &str = include_str!("../schemas/bench_report.schema.json");
pub const PLAN_REPORT_SCHEMA: &str = include_str!("../schemas/plan_report.schema.json");
pub const DEVICE_PROFILE_SCHEMA: &str = include_str!("../schemas/device_profile.schema.json");

/// Column order of the benchmark CSV.
pub const BENCH_CSV_COLUMNS: [&str; 18] = [
    "variant",
    "p",
    "profile",
    "precision",
    "elements",
    "invocations",
    "input_prep_s",
    "buffer_init_s",
    "compute_s",
    "output_conversion_s",
    "total_s",
    "flops",
    "flops_per_element",
    "throughput_flops_per_s",
    "input_bytes",
    "output_bytes",
    "transfer_bytes",
    "repetitions",
];

const MB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub distortion: f64,
    pub seed: u64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            nx: 4,
            ny: 4,
            nz: 4,
            distortion: 0.1,
            seed: DEFAULT_SEED,
        }
    }
}

impl MeshSpec {
    pub fn generate(&self) -> Result<Mesh> {
        generate_box_mesh_seeded(self.nx, self.ny, self.nz, self.distortion, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub orders: Vec<usize>,
    pub variants: Vec<KernelVariant>,
    /// Bundled profile name or a JSON path.
    pub profile: String,
    pub precision: Precision,
    pub material: MaterialData,
    pub occupancy_groups: Option<usize>,
    pub wg_override: Option<usize>,
    /// Worker-pool width; `None` uses every core.
    pub workers: Option<usize>,
    pub reps: usize,
    pub warmup: usize,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub dump_buffers: Option<PathBuf>,
    pub check_tables: bool,
    /// Flip the orientation of this element after generation (error-path testing).
    pub invert_element: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshSpec::default(),
            orders: vec![2, 3, 4, 5],
            variants: KernelVariant::ALL.to_vec(),
            profile: "gtx580".into(),
            precision: Precision::F32,
            material: MaterialData::default(),
            occupancy_groups: None,
            wg_override: None,
            workers: None,
            reps: 5,
            warmup: 1,
            csv: None,
            json: None,
            dump_buffers: None,
            check_tables: false,
            invert_element: None,
        }
    }
}

impl RunConfig {
    /// Checks the configuration against planner preconditions and resolves the profile.
    pub fn validate(&self) -> Result<DeviceProfile> {
        if self.orders.is_empty() {
            return Err(Error::Config("no approximation orders selected".into()));
        }
        for &p in &self.orders {
            check_order(p)?;
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no kernel variants selected".into()));
        }
        let m = &self.mesh;
        if m.nx == 0 || m.ny == 0 || m.nz == 0 {
            return Err(Error::Config(format!(
                "mesh dimensions must be positive, got {},{},{}",
                m.nx, m.ny, m.nz
            )));
        }
        if !(0.0..0.5).contains(&m.distortion) {
            return Err(Error::Config(format!(
                "distortion must lie in [0, 0.5), got {}",
                m.distortion
            )));
        }
        self.material.validate()?;
        if self.occupancy_groups == Some(0) {
            return Err(Error::Config("--occupancy must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("--workers must be positive".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("--reps must be positive".into()));
        }
        let profile = DeviceProfile::resolve(&self.profile)?;
        if let Some(wg) = self.wg_override {
            for &p in &self.orders {
                work_group_size(&profile.device, p, Some(wg))?;
            }
        }
        if let Some(e) = self.invert_element {
            let n = 2 * m.nx * m.ny * m.nz;
            if e >= n {
                return Err(Error::Config(format!("--invert-element {e} is out of range (mesh has {n} elements)")));
            }
        }
        Ok(profile)
    }

    pub fn plan_options(&self, profile: &DeviceProfile, p: usize) -> PlanOptions {
        let mut o = profile.options(p);
        if let Some(g) = self.occupancy_groups {
            o.occupancy_groups = g;
        }
        if self.wg_override.is_some() {
            o.wg_override = self.wg_override;
        }
        o
    }

    /// Generated mesh with the optional inversion applied.
    pub fn build_mesh(&self) -> Result<Mesh> {
        let mut mesh = self.mesh.generate()?;
        if let Some(e) = self.invert_element {
            let el = mesh
                .elements
                .get_mut(e)
                .ok_or_else(|| Error::Config(format!("element {e} is out of range")))?;
            el.swap(1, 2);
            el.swap(4, 5);
        }
        Ok(mesh)
    }
}

/// One verification check with its measured value and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(suite: &str, name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail: None,
        }
    }

    /// Passes on exact integer equality; `tolerance` holds the expected value.
    pub fn exact(suite: &str, name: impl Into<String>, got: u64, want: u64) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            measured: got as f64,
            tolerance: want as f64,
            passed: got == want,
            detail: Some(format!("got {got}, expected {want}")),
        }
    }

    pub fn flag(suite: &str, name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            measured: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            passed: ok,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<14} {:<48} measured {:<12.4e} limit {:.4e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub profile: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub passed: usize,
    pub failed: usize,
    pub ok: bool,
}

impl VerifyReport {
    fn new(config: RunConfig, profile: String, checks: Vec<Check>, notes: Vec<String>) -> Self {
        let passed = checks.iter().filter(|c| c.passed).count();
        let failed = checks.len() - passed;
        Self {
            config,
            profile,
            checks,
            notes,
            passed,
            failed,
            ok: failed == 0,
        }
    }

    pub fn summary(&self) -> String {
        let mut s: String = self.checks.iter().map(|c| c.line() + "\n").collect();
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        s += &format!("{} passed, {} failed\n", self.passed, self.failed);
        s
    }
}

/// Planner figures published for the two bundled device profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePlanFigures {
    pub p: usize,
    pub parts_reg: usize,
    pub parts_shm: usize,
    pub blocks_per_thread: usize,
    pub elems_per_kernel: usize,
    pub elems_per_work_group: usize,
    pub input_jac_mb: f64,
    pub input_nojac_mb: f64,
    pub output_mb: f64,
}

#[allow(clippy::too_many_arguments)]
const fn fig(
    p: usize,
    parts_reg: usize,
    parts_shm: usize,
    blocks_per_thread: usize,
    elems_per_kernel: usize,
    elems_per_work_group: usize,
    input_jac_mb: f64,
    input_nojac_mb: f64,
    output_mb: f64,
) -> ReferencePlanFigures {
    ReferencePlanFigures {
        p,
        parts_reg,
        parts_shm,
        blocks_per_thread,
        elems_per_kernel,
        elems_per_work_group,
        input_jac_mb,
        input_nojac_mb,
        output_mb,
    }
}

pub const GTX580_FIGURES: [ReferencePlanFigures; 6] = [
    fig(2, 2, 1, 2, 29056, 227, 8.87, 19.95, 323.21),
    fig(3, 4, 2, 2, 5376, 48, 1.67, 9.85, 295.31),
    fig(4, 11, 6, 2, 1904, 17, 0.67, 5.83, 367.70),
    fig(5, 32, 16, 2, 672, 6, 0.50, 3.92, 366.28),
    fig(6, 76, 38, 2, 224, 2, 0.76, 2.15, 295.44),
    fig(7, 162, 81, 2, 112, 1, 1.52, 1.80, 318.94),
];

pub const HD5870_FIGURES: [ReferencePlanFigures; 6] = [
    fig(2, 2, 1, 2, 11360, 71, 3.47, 7.80, 126.36),
    fig(3, 7, 3, 3, 2240, 14, 0.71, 4.11, 123.05),
    fig(4, 22, 8, 3, 640, 4, 0.29, 1.98, 123.60),
    fig(5, 63, 21, 3, 160, 1, 0.34, 0.99, 87.21),
    fig(6, 151, 51, 3, 80, 1, 0.72, 0.88, 105.51),
    fig(7, 324, 108, 3, 40, 1, 1.49, 0.88, 113.91),
];

/// Reference figures for a bundled profile name (`gtx580` or `hd5870`).
pub fn reference_figures(profile: &str) -> Option<&'static [ReferencePlanFigures; 6]> {
    let stem = Path::new(profile).file_stem().and_then(|s| s.to_str()).unwrap_or(profile);
    match stem {
        "gtx580" => Some(&GTX580_FIGURES),
        "hd5870" => Some(&HD5870_FIGURES),
        _ => None,
    }
}

/// Element availability under which the published per-kernel counts were produced.
///
/// For the GTX580 at p = 2 and 3 the published counts lie below the memory cap, so
/// they are treated as the number of elements available to plan for.
pub fn reference_availability(profile: &str, p: usize) -> usize {
    match (reference_figures(profile), p) {
        (Some(f), 2 | 3) if std::ptr::eq(f, &GTX580_FIGURES) => f[p - 2].elems_per_kernel,
        _ => usize::MAX,
    }
}

/// Compares planner output with the reference figures, one check per value.
pub fn check_planner_tables(profile_name: &str, profile: &DeviceProfile) -> Result<(Vec<Check>, Vec<String>)> {
    let figs = reference_figures(profile_name)
        .ok_or_else(|| Error::Config(format!("no reference planner figures for profile '{profile_name}'")))?;
    let suite = "planner_tables";
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let rel = |got: f64, want: f64| (got - want).abs() / want;
    for f in figs {
        let avail = reference_availability(profile_name, f.p);
        let reg = profile.plan(f.p, KernelVariant::REG_JAC, avail)?;
        let shm = profile.plan(f.p, KernelVariant::SHM_JAC, avail)?;
        checks.push(Check::exact(suite, format!("p={} parts REG", f.p), reg.n_parts as u64, f.parts_reg as u64));
        checks.push(Check::exact(suite, format!("p={} parts SHM", f.p), shm.n_parts as u64, f.parts_shm as u64));
        checks.push(Check::exact(
            suite,
            format!("p={} blocks per thread SHM", f.p),
            shm.blocks_per_thread as u64,
            f.blocks_per_thread as u64,
        ));
        checks.push(Check::exact(
            suite,
            format!("p={} elements per kernel", f.p),
            reg.elems_per_kernel as u64,
            f.elems_per_kernel as u64,
        ));
        checks.push(Check::exact(
            suite,
            format!("p={} elements per work-group", f.p),
            reg.elems_per_work_group as u64,
            f.elems_per_work_group as u64,
        ));
        let out_mb = reg.output_bytes as f64 / MB;
        checks.push(
            Check::at_most(suite, format!("p={} output size rel. gap", f.p), rel(out_mb, f.output_mb), 5e-3)
                .with_detail(format!("{out_mb:.2} MB vs {:.2} MB", f.output_mb)),
        );
        let acct = memory_accounting(&reg);
        notes.push(format!(
            "p={} input JAC {:.2} MB (reference {:.2}, residual {:+.2}); input NOJAC {:.2} MB (reference {:.2}, residual {:+.2})",
            f.p,
            acct.input_jac_bytes as f64 / MB,
            f.input_jac_mb,
            f.input_jac_mb - acct.input_jac_bytes as f64 / MB,
            acct.input_nojac_bytes as f64 / MB,
            f.input_nojac_mb,
            f.input_nojac_mb - acct.input_nojac_bytes as f64 / MB,
        ));
    }
    Ok((checks, notes))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Largest relative error of the order-`p` prism rule over the monomials
/// `xi1^a xi2^b xi3^c` with `a + b <= 2p` and `c <= 2p + 1`.
pub fn quadrature_exactness_error(p: usize) -> Result<f64> {
    let rule = prism_quadrature(p)?;
    let mut worst: f64 = 0.0;
    for a in 0..=2 * p {
        for b in 0..=2 * p - a {
            for c in 0..=2 * p + 1 {
                let tri = factorial(a) * factorial(b) / factorial(a + b + 2);
                let line = if c % 2 == 0 { 2.0 / (c as f64 + 1.0) } else { 0.0 };
                let exact = tri * line;
                let mut q = 0.0;
                let mut scale = 0.0;
                for (x, w) in rule.points.iter().zip(&rule.weights) {
                    let f = x.xi1.powi(a as i32) * x.xi2.powi(b as i32) * x.xi3.powi(c as i32);
                    q += w * f;
                    scale += (w * f).abs();
                }
                worst = worst.max((q - exact).abs() / exact.abs().max(scale));
            }
        }
    }
    Ok(worst)
}

/// An affine image of the reference prism (rotation, stretch, shear, offset).
pub fn affine_prism(seed: u64) -> PrismGeometry {
    let t = seed as f64 * 0.37 + 0.4;
    let (s, c) = t.sin_cos();
    let m = [
        [1.3 * c, -0.4 * s, 0.2],
        [0.9 * s, 1.1 * c, -0.1],
        [0.15, 0.25, 0.8],
    ];
    let off = [0.3, -1.0, 2.0];
    let mut g = PrismGeometry::reference();
    for v in &mut g.vertices {
        let x = *v;
        for i in 0..3 {
            v[i] = off[i] + m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2];
        }
    }
    g
}

/// Largest `||A u|| / (||A|| ||u||)` over the six rigid-body modes.
pub fn rigid_mode_residual(a: &ElementStiffness, geom: &PrismGeometry) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    rigid_body_modes(geom, a.order_p)
        .iter()
        .map(|u| norm(&a.matvec(u)) / (a.frobenius() * norm(u)))
        .fold(0.0, f64::max)
}

struct OrderFixture {
    rule: QuadratureRule,
    shapes: ShapeTable,
}

impl OrderFixture {
    fn new(p: usize) -> Result<Self> {
        let rule = prism_quadrature(p)?;
        let shapes = tabulate_shapes(p, &rule)?;
        Ok(Self { rule, shapes })
    }
}

/// Wide-precision matrices from the sparsity-aware integrator for every element.
pub fn oracle_matrices(geoms: &[PrismGeometry], mat: &MaterialField, p: usize) -> Result<Vec<ElementStiffness>> {
    crate::integrate::integrate_mesh_optimized(geoms, mat, p)
}

fn kernel_tolerances(precision: Precision) -> (f64, f64, f64) {
    // (oracle, symmetry, cross-variant)
    match precision {
        Precision::F32 => (5e-5, 1e-5, 1e-6),
        Precision::F64 => (1e-11, 1e-12, 1e-11),
    }
}

/// Runs every suite and collects the checks.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let profile = cfg.validate()?;
    let mesh = cfg.build_mesh()?;
    let geoms = mesh.geometries();
    let mat = MaterialField::Global(cfg.material);
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let (tol_oracle, tol_sym, tol_cross) = kernel_tolerances(cfg.precision);

    for &p in &cfg.orders {
        checks.push(Check::at_most(
            "quadrature",
            format!("p={p} monomial exactness"),
            quadrature_exactness_error(p)?,
            1e-12,
        ));
    }

    for &p in &cfg.orders {
        let fx = OrderFixture::new(p)?;
        let oracle = oracle_matrices(&geoms, &mat, p)?;

        // The brute-force integrator on a few elements anchors the optimized one.
        let tensor = elasticity_tensor(&cfg.material)?;
        let coeffs = QuadCoefficients::constant(tensor, fx.rule.len());
        let n_generic = geoms.len().min(2);
        let mut gen_err: f64 = 0.0;
        for (e, g) in geoms.iter().enumerate().take(n_generic) {
            let a = integrate_generic(g, &coeffs, &fx.shapes, &fx.rule, None).map_err(|err| err.with_element(e))?;
            gen_err = gen_err.max(oracle[e].rel_frobenius_diff(&a));
        }
        checks.push(
            Check::at_most("oracle", format!("p={p} optimized vs generic"), gen_err, 1e-12)
                .with_detail(format!("{n_generic} elements")),
        );
        let sym = oracle.iter().map(ElementStiffness::symmetry_error).fold(0.0, f64::max);
        checks.push(Check::at_most("symmetry", format!("p={p} wide precision"), sym, 1e-12));

        let affine = affine_prism(p as u64);
        let a = integrate_optimized(&affine, &cfg.material, &fx.shapes, &fx.rule)?;
        checks.push(Check::at_most(
            "rigid_body",
            format!("p={p} six modes on affine prism"),
            rigid_mode_residual(&a, &affine),
            1e-10,
        ));

        let mut per_variant: Vec<Vec<ElementStiffness>> = Vec::new();
        for &v in &cfg.variants {
            let opts = cfg.plan_options(&profile, p);
            let batch = run_batch(
                v,
                &profile.device,
                &opts,
                p,
                &mesh,
                &mat,
                BatchOptions {
                    precision: cfg.precision,
                    workers: cfg.workers,
                },
            )?;
            let err = batch
                .matrices
                .iter()
                .zip(&oracle)
                .map(|(k, o)| k.rel_frobenius_diff(o))
                .fold(0.0, f64::max);
            checks.push(Check::at_most("oracle", format!("p={p} {v} vs wide reference"), err, tol_oracle));
            let sym = batch.matrices.iter().map(ElementStiffness::symmetry_error).fold(0.0, f64::max);
            checks.push(Check::at_most("symmetry", format!("p={p} {v} {}", cfg.precision), sym, tol_sym));
            checks.push(Check::flag(
                "coverage",
                format!("p={p} {v} write-once blocks"),
                batch.coverage_exact,
                format!("{} invocations", batch.invocations),
            ));
            per_variant.push(batch.matrices);
        }
        for i in 1..per_variant.len() {
            let err = per_variant[i]
                .iter()
                .zip(&per_variant[0])
                .map(|(a, b)| a.rel_frobenius_diff(b))
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                "agreement",
                format!("p={p} {} vs {}", cfg.variants[i], cfg.variants[0]),
                err,
                tol_cross,
            ));
        }

        // Determinism, counters and coverage on the first invocation of each variant.
        for &v in &cfg.variants {
            let opts = cfg.plan_options(&profile, p);
            let plan = crate::planner::plan_execution(&profile.device, p, v, geoms.len(), &opts)?;
            let n = plan.elems_per_kernel;
            let mats = vec![cfg.material; n];
            let (same, flops_ok) = match cfg.precision {
                Precision::F32 => determinism_probe::<f32>(&plan, &geoms[..n], &mats, &fx, cfg.workers)?,
                Precision::F64 => determinism_probe::<f64>(&plan, &geoms[..n], &mats, &fx, cfg.workers)?,
            };
            checks.push(Check::flag(
                "determinism",
                format!("p={p} {v} 1 worker vs pool"),
                same,
                "bitwise comparison of output buffers",
            ));
            checks.push(Check::flag("flops", format!("p={p} {v} counter = model"), flops_ok, "exact"));
        }
    }

    if cfg.check_tables {
        let (c, n) = check_planner_tables(&cfg.profile, &profile)?;
        checks.extend(c);
        notes.extend(n);
    }

    if let Some(dir) = &cfg.dump_buffers {
        let p = cfg.orders[0];
        let v = cfg.variants[0];
        dump_invocation(&profile, cfg, p, v, &geoms, dir)?;
        notes.push(format!("buffers for p={p} {v} written to {}", dir.display()));
    }

    Ok(VerifyReport::new(cfg.clone(), profile.device.name.clone(), checks, notes))
}

fn determinism_probe<T: KernelReal>(
    plan: &ExecutionPlan,
    geoms: &[PrismGeometry],
    mats: &[MaterialData],
    fx: &OrderFixture,
    workers: Option<usize>,
) -> Result<(bool, bool)> {
    let inputs = prepare_inputs::<T>(plan, geoms, mats, &fx.rule, &fx.shapes)?;
    let a = run_kernel(plan.variant, &inputs, Some(1), false)?;
    let b = run_kernel(plan.variant, &inputs, workers, false)?;
    let same = a.flop_counter == b.flop_counter
        && a.stiffness.iter().zip(&b.stiffness).all(|(x, y)| x.wide().to_bits() == y.wide().to_bits());
    Ok((same, a.flop_counter == flop_model(plan.variant, plan)?))
}

fn dump_invocation(
    profile: &DeviceProfile,
    cfg: &RunConfig,
    p: usize,
    v: KernelVariant,
    geoms: &[PrismGeometry],
    dir: &Path,
) -> Result<()> {
    let fx = OrderFixture::new(p)?;
    let plan = crate::planner::plan_execution(&profile.device, p, v, geoms.len(), &cfg.plan_options(profile, p))?;
    let n = plan.elems_per_kernel;
    let mats = vec![cfg.material; n];
    let inputs = prepare_inputs::<f32>(&plan, &geoms[..n], &mats, &fx.rule, &fx.shapes)?;
    inputs.dump(dir)?;
    let out = run_kernel(v, &inputs, cfg.workers, false)?;
    crate::kernels::write_f32_buffer(&dir.join("stiffness.bin"), &out.stiffness)
}

/// Planner output plus memory accounting, as printed by `plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub profile: String,
    pub plan: ExecutionPlan,
    pub memory: MemoryAccounting,
}

pub fn plan_report(profile: &DeviceProfile, p: usize, variant: KernelVariant, n_elements: usize, opts: &PlanOptions) -> Result<PlanReport> {
    let plan = crate::planner::plan_execution(&profile.device, p, variant, n_elements, opts)?;
    Ok(PlanReport {
        profile: profile.device.name.clone(),
        memory: memory_accounting(&plan),
        plan,
    })
}

/// One benchmark row: the repetition with the median total time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: String,
    pub p: usize,
    pub profile: String,
    pub precision: Precision,
    pub elements: usize,
    pub invocations: usize,
    pub input_prep_s: f64,
    pub buffer_init_s: f64,
    pub compute_s: f64,
    pub output_conversion_s: f64,
    pub total_s: f64,
    pub flops: u64,
    pub flops_per_element: u64,
    pub throughput_flops_per_s: f64,
    pub input_bytes: usize,
    pub output_bytes: usize,
    pub transfer_bytes: usize,
    pub repetitions: usize,
}

impl BenchRow {
    pub fn phase_sum(&self) -> f64 {
        self.input_prep_s + self.buffer_init_s + self.compute_s + self.output_conversion_s
    }

    fn csv_record(&self) -> Vec<String> {
        vec![
            self.variant.clone(),
            self.p.to_string(),
            self.profile.clone(),
            self.precision.to_string(),
            self.elements.to_string(),
            self.invocations.to_string(),
            format!("{:.9}", self.input_prep_s),
            format!("{:.9}", self.buffer_init_s),
            format!("{:.9}", self.compute_s),
            format!("{:.9}", self.output_conversion_s),
            format!("{:.9}", self.total_s),
            self.flops.to_string(),
            self.flops_per_element.to_string(),
            format!("{:.6e}", self.throughput_flops_per_s),
            self.input_bytes.to_string(),
            self.output_bytes.to_string(),
            self.transfer_bytes.to_string(),
            self.repetitions.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: RunConfig,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(BENCH_CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plot-ready `variant,p,metric,value` rows.
    pub fn write_long_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["variant", "p", "metric", "value"])?;
        for r in &self.rows {
            let rec = r.csv_record();
            for (k, col) in BENCH_CSV_COLUMNS.iter().enumerate().skip(4) {
                w.write_record([r.variant.as_str(), &r.p.to_string(), col, &rec[k]])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<10} {:>2} {:>8} {:>12} {:>12} {:>16} {:>10}\n",
            "variant", "p", "elements", "compute [s]", "total [s]", "flops/element", "GFlop/s"
        );
        for r in &self.rows {
            s += &format!(
                "{:<10} {:>2} {:>8} {:>12.6} {:>12.6} {:>16} {:>10.3}\n",
                r.variant,
                r.p,
                r.elements,
                r.compute_s,
                r.total_s,
                r.flops_per_element,
                r.throughput_flops_per_s / 1e9
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Timing {
    prep: f64,
    init: f64,
    compute: f64,
    convert: f64,
    total: f64,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn bench_once<T: KernelReal>(
    profile: &DeviceProfile,
    opts: &PlanOptions,
    p: usize,
    v: KernelVariant,
    geoms: &[PrismGeometry],
    mat: MaterialData,
    workers: Option<usize>,
) -> Result<(Timing, u64, usize, usize, usize)> {
    let start = Instant::now();
    let mut t = Timing::default();
    let tp = Instant::now();
    let fx = OrderFixture::new(p)?;
    t.prep += secs(tp);
    let (mut flops, mut invocations, mut in_bytes, mut out_bytes) = (0, 0, 0, 0);
    let mut done = 0;
    let mut sink = 0.0;
    while done < geoms.len() {
        let tp = Instant::now();
        let plan = crate::planner::plan_execution(&profile.device, p, v, geoms.len() - done, opts)?;
        let n = plan.elems_per_kernel;
        let mats = vec![mat; n];
        let inputs = prepare_inputs::<T>(&plan, &geoms[done..done + n], &mats, &fx.rule, &fx.shapes)?;
        t.prep += secs(tp);

        let ti = Instant::now();
        let mut out = KernelOutput::<T>::allocate(&plan, false);
        t.init += secs(ti);

        let tc = Instant::now();
        run_kernel_into(v, &inputs, &mut out, workers)?;
        t.compute += secs(tc);

        flops += out.flop_counter;
        invocations += 1;
        in_bytes += inputs.input_bytes();
        out_bytes += out.output_bytes();
        done += n;

        // Buffer release counts as output handling.
        let to = Instant::now();
        let mats_out = out.elements(&plan);
        sink += mats_out.last().map_or(0.0, |m| m.data[0]);
        drop((mats_out, out, inputs, mats, plan));
        t.convert += secs(to);
    }
    std::hint::black_box(sink);
    t.total = secs(start);
    Ok((t, flops, invocations, in_bytes, out_bytes))
}

/// Warmup plus timed repetitions for every (variant, p) of the configuration.
pub fn bench(cfg: &RunConfig) -> Result<BenchReport> {
    let profile = cfg.validate()?;
    let mesh = cfg.build_mesh()?;
    let geoms = mesh.geometries();
    let mut rows = Vec::new();
    for &v in &cfg.variants {
        for &p in &cfg.orders {
            let opts = cfg.plan_options(&profile, p);
            let mut runs = Vec::new();
            for rep in 0..cfg.warmup + cfg.reps {
                let r = match cfg.precision {
                    Precision::F32 => bench_once::<f32>(&profile, &opts, p, v, &geoms, cfg.material, cfg.workers)?,
                    Precision::F64 => bench_once::<f64>(&profile, &opts, p, v, &geoms, cfg.material, cfg.workers)?,
                };
                if rep >= cfg.warmup {
                    runs.push(r);
                }
            }
            runs.sort_by(|a, b| a.0.total.total_cmp(&b.0.total));
            let (t, flops, invocations, in_bytes, out_bytes) = runs[runs.len() / 2];
            rows.push(BenchRow {
                variant: v.to_string(),
                p,
                profile: profile.device.name.clone(),
                precision: cfg.precision,
                elements: geoms.len(),
                invocations,
                input_prep_s: t.prep,
                buffer_init_s: t.init,
                compute_s: t.compute,
                output_conversion_s: t.convert,
                total_s: t.total,
                flops,
                flops_per_element: flops / geoms.len() as u64,
                throughput_flops_per_s: flops as f64 / t.compute.max(f64::MIN_POSITIVE),
                input_bytes: in_bytes,
                output_bytes: out_bytes,
                transfer_bytes: in_bytes + out_bytes,
                repetitions: cfg.reps,
            });
        }
    }
    Ok(BenchReport {
        config: cfg.clone(),
        rows,
    })
}

/// Sizes of Table-style quantities for order `p`: points and weights, shape values
/// per point, all shape values, and matrix blocks.
pub fn sizing_row(p: usize) -> [usize; 4] {
    let (nq, nsh) = (n_quad(p), n_shape(p));
    [4 * nq, 4 * nsh, 4 * nsh * nq, nsh * nsh]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> RunConfig {
        RunConfig {
            mesh: MeshSpec {
                nx: 1,
                ny: 1,
                nz: 2,
                distortion: 0.1,
                seed: 7,
            },
            orders: vec![2],
            workers: Some(2),
            reps: 2,
            warmup: 0,
            ..RunConfig::default()
        }
    }

    #[test]
    fn verify_small_config_passes() {
        let report = verify(&tiny_cfg()).unwrap();
        assert!(report.ok, "{}", report.summary());
        assert!(report.checks.iter().any(|c| c.suite == "determinism"));
    }

    #[test]
    fn config_errors_are_early() {
        let mut c = tiny_cfg();
        c.orders = vec![9];
        assert!(matches!(c.validate(), Err(Error::OrderOutOfRange(9))));
        let mut c = tiny_cfg();
        c.wg_override = Some(100);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = tiny_cfg();
        c.profile = "nonexistent".into();
        assert!(c.validate().is_err());
        let mut c = tiny_cfg();
        c.material.poisson_nu = 0.5;
        assert!(matches!(c.validate(), Err(Error::IncompressibleMaterial)));
    }

    #[test]
    fn inverted_element_is_identified() {
        let mut c = tiny_cfg();
        c.invert_element = Some(3);
        match verify(&c) {
            Err(Error::InvertedElement { element, .. }) => assert_eq!(element, Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bench_rows_are_consistent() {
        let mut c = tiny_cfg();
        c.variants = vec![KernelVariant::REG_JAC, KernelVariant::SHM_NOJAC];
        let r = bench(&c).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert!((row.throughput_flops_per_s * row.compute_s - row.flops as f64).abs() <= 1e-6 * row.flops as f64);
            assert!(row.phase_sum() <= row.total_s * 1.0001);
        }
    }

    #[test]
    fn sizing_rows() {
        assert_eq!(sizing_row(7), [1344, 1152, 387072, 82944]);
        assert_eq!(sizing_row(1), [24, 24, 144, 36]);
    }
}
