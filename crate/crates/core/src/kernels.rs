//! Deterministic emulation of the four data-parallel integration kernels.
//!
//! A work-group integrates whole elements. For every element it loops over the
//! parts of the stiffness matrix; within a part it walks the quadrature points,
//! each point passing through the same phases: stage the point data (and derive
//! or read the Jacobian terms), barrier, compute physical gradients for all shape
//! functions, barrier, let every thread update its block(s). At the end of a part
//! each thread flushes its blocks to the output buffer.
//!
//! Threads of a group run as an ordered loop between barriers; independent
//! work-groups run on a rayon pool and own disjoint slices of the output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{elasticity_block_update, BLOCK_UPDATE_FLOPS};
use crate::coefficients::{MaterialData, MaterialField};
use crate::error::{Error, Result};
use crate::geometry::{precompute_all_jacobian_terms, PrismGeometry, JACOBIAN_RECORD_LEN};
use crate::integrate::{ElementStiffness, PSI_FLOPS_PER_DOF};
use crate::mesh::Mesh;
use crate::planner::{
    memory_accounting, plan_execution, DeviceSpec, ExecutionPlan, KernelVariant, PlanOptions,
    DEVICE_REAL_BYTES, EXEC_PARAMS_LEN,
};
use crate::quadrature::{prism_quadrature, QuadratureRule};
use crate::shapes::{tabulate_shapes, ShapeTable, N_DERIV};
use crate::ELASTICITY_EQS;

/// Lame parameters from `(E, nu)`: `mu` 3 flops, `lambda` 5 more reusing `1 + nu`.
pub const MATERIAL_FLOPS: u64 = 8;

/// Jacobian matrix from vertex coordinates (62) plus cofactor inversion (42).
pub const JACOBIAN_FLOPS: u64 = 104;

/// `det * w`, then `lambda` and `mu` scaled by it.
pub const SCALING_FLOPS: u64 = 3;

const GEOMETRY_LEN: usize = 18;
const MATERIAL_LEN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// 32-bit arithmetic everywhere.
    #[default]
    F32,
    /// 64-bit arithmetic; used as a diagnostic.
    F64,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "single" => Ok(Precision::F32),
            "f64" | "wide" | "double" => Ok(Precision::F64),
            other => Err(Error::Config(format!("unknown precision '{other}' (expected f32 or f64)"))),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// Scalar types the kernels can run in.
pub trait KernelReal: Float + Send + Sync + std::fmt::Debug + 'static {
    const PRECISION: Precision;

    fn of(x: f64) -> Self {
        Self::from(x).expect("representable")
    }

    fn wide(self) -> f64 {
        self.to_f64().expect("finite")
    }
}

impl KernelReal for f32 {
    const PRECISION: Precision = Precision::F32;
}

impl KernelReal for f64 {
    const PRECISION: Precision = Precision::F64;
}

/// Flat kernel arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelInputs<T> {
    pub plan: ExecutionPlan,
    pub exec_params: Vec<u32>,
    /// `[i_Q][i_D][i_DOF]`, `i_DOF` fastest.
    pub shape_table: Vec<T>,
    /// JAC: `[i_Q][xi1, xi2, xi3, w]`; NOJAC: `[i_Q][w]`.
    pub quadrature: Vec<T>,
    /// JAC only: `[e][vertex][coord]`.
    pub geometry: Option<Vec<T>>,
    /// NOJAC only: `[e][i_Q][det, inv row-major]`.
    pub jacobian_terms: Option<Vec<T>>,
    /// `[e][E, nu]`.
    pub material: Vec<T>,
}

/// Labels recorded in a barrier trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    LoadElement,
    LoadPoint,
    Barrier,
    Gradients,
    BlockUpdate,
    WriteBlocks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelOutput<T> {
    /// `elems_per_kernel` matrices in canonical layout.
    pub stiffness: Vec<T>,
    pub flop_counter: u64,
    /// `[e][i_DOF * N_sh + j_DOF]` write counts.
    pub write_counts: Vec<u8>,
    /// Writes attempted by padding slots; must stay zero.
    pub padding_writes: u64,
    pub barrier_trace: Option<Vec<Vec<Phase>>>,
}

impl<T: KernelReal> KernelOutput<T> {
    /// Zeroed output sized for `plan`.
    pub fn allocate(plan: &ExecutionPlan, trace: bool) -> Self {
        let n = plan.elems_per_kernel;
        Self {
            stiffness: vec![T::zero(); n * plan.matrix_dim() * plan.matrix_dim()],
            flop_counter: 0,
            write_counts: vec![0; n * plan.n_blocks],
            padding_writes: 0,
            barrier_trace: trace.then(|| vec![Vec::new(); plan.n_work_groups]),
        }
    }

    pub fn output_bytes(&self) -> usize {
        self.stiffness.len() * DEVICE_REAL_BYTES
    }

    /// True when every block of every element was written exactly once.
    pub fn coverage_exact(&self) -> bool {
        self.padding_writes == 0 && self.write_counts.iter().all(|&c| c == 1)
    }

    pub fn element(&self, plan: &ExecutionPlan, e: usize) -> ElementStiffness {
        let len = plan.matrix_dim() * plan.matrix_dim();
        ElementStiffness {
            order_p: plan.p,
            n_eq: plan.n_eq,
            data: self.stiffness[e * len..(e + 1) * len].iter().map(|x| x.wide()).collect(),
        }
    }

    pub fn elements(&self, plan: &ExecutionPlan) -> Vec<ElementStiffness> {
        (0..plan.elems_per_kernel).map(|e| self.element(plan, e)).collect()
    }
}

/// Execution-parameter array: sizes, plan shape and the variant code.
pub fn exec_params(plan: &ExecutionPlan) -> Vec<u32> {
    let variant = KernelVariant::ALL.iter().position(|v| *v == plan.variant).unwrap_or(0);
    let mut v = vec![
        plan.p,
        plan.n_eq,
        plan.n_sh,
        plan.n_q,
        plan.work_group_size,
        plan.blocks_per_thread,
        plan.n_parts,
        plan.elems_per_kernel,
        plan.elems_per_work_group,
        plan.n_work_groups,
        plan.n_blocks,
        variant,
    ];
    v.resize(EXEC_PARAMS_LEN, 0);
    v.into_iter().map(|x| x as u32).collect()
}

/// Builds kernel arguments for `geoms` (one per element of the invocation).
///
/// NOJAC Jacobian records are computed in `f64` and then rounded.
pub fn prepare_inputs<T: KernelReal>(
    plan: &ExecutionPlan,
    geoms: &[PrismGeometry],
    materials: &[MaterialData],
    rule: &QuadratureRule,
    shapes: &ShapeTable,
) -> Result<KernelInputs<T>> {
    if geoms.len() != plan.elems_per_kernel || materials.len() != geoms.len() {
        return Err(Error::ContractViolation(format!(
            "plan covers {} elements, got {} geometries and {} materials",
            plan.elems_per_kernel,
            geoms.len(),
            materials.len()
        )));
    }
    if rule.order_p != plan.p || shapes.order_p != plan.p {
        return Err(Error::OrderMismatch {
            expected: plan.p,
            found: if rule.order_p != plan.p { rule.order_p } else { shapes.order_p },
        });
    }
    for m in materials {
        m.validate()?;
    }
    let cast = |xs: &[f64]| xs.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
    let jac = plan.variant.computes_jacobian();
    let quadrature = if jac {
        rule.points
            .iter()
            .zip(&rule.weights)
            .flat_map(|(x, &w)| [x.xi1, x.xi2, x.xi3, w])
            .map(T::of)
            .collect()
    } else {
        cast(&rule.weights)
    };
    let (geometry, jacobian_terms) = if jac {
        (Some(geoms.iter().flat_map(|g| g.flat()).map(T::of).collect()), None)
    } else {
        (None, Some(cast(&precompute_all_jacobian_terms(geoms, rule)?)))
    };
    Ok(KernelInputs {
        plan: plan.clone(),
        exec_params: exec_params(plan),
        shape_table: shapes.flatten(),
        quadrature,
        geometry,
        jacobian_terms,
        material: materials.iter().flat_map(|m| [m.young_e, m.poisson_nu]).map(T::of).collect(),
    })
}

impl<T: KernelReal> KernelInputs<T> {
    /// Checks every buffer length against the plan's memory accounting.
    pub fn validate(&self) -> Result<()> {
        let plan = &self.plan;
        let acct = memory_accounting(plan);
        let words = |b: usize| b / DEVICE_REAL_BYTES;
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::ContractViolation(format!("{name} buffer has {got} entries, expected {want}")))
            }
        };
        check("exec_params", self.exec_params.len(), EXEC_PARAMS_LEN)?;
        check("shape_table", self.shape_table.len(), words(acct.shape_table))?;
        check("material", self.material.len(), words(acct.material))?;
        if plan.variant.computes_jacobian() {
            check("quadrature", self.quadrature.len(), words(acct.quadrature))?;
            let g = self
                .geometry
                .as_ref()
                .ok_or_else(|| Error::ContractViolation("JAC variant needs the geometry buffer".into()))?;
            check("geometry", g.len(), words(acct.geometry))?;
            if self.jacobian_terms.is_some() {
                return Err(Error::ContractViolation("JAC variant takes no Jacobian records".into()));
            }
        } else {
            check("quadrature", self.quadrature.len(), words(acct.quadrature_weights))?;
            let j = self
                .jacobian_terms
                .as_ref()
                .ok_or_else(|| Error::ContractViolation("NOJAC variant needs the Jacobian records".into()))?;
            check("jacobian_terms", j.len(), words(acct.jacobian_terms))?;
            if self.geometry.is_some() {
                return Err(Error::ContractViolation("NOJAC variant takes no geometry buffer".into()));
            }
        }
        Ok(())
    }

    /// Total argument bytes as the device would see them.
    pub fn input_bytes(&self) -> usize {
        self.exec_params.len() * 4
            + (self.shape_table.len()
                + self.quadrature.len()
                + self.material.len()
                + self.geometry.as_ref().map_or(0, Vec::len)
                + self.jacobian_terms.as_ref().map_or(0, Vec::len))
                * DEVICE_REAL_BYTES
    }

    /// Writes every buffer as little-endian 32-bit values plus a `layout.json`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut u = BufWriter::new(File::create(dir.join("exec_params.bin"))?);
        for x in &self.exec_params {
            u.write_all(&x.to_le_bytes())?;
        }
        u.flush()?;
        write_f32_buffer(&dir.join("shape_table.bin"), &self.shape_table)?;
        write_f32_buffer(&dir.join("quadrature.bin"), &self.quadrature)?;
        write_f32_buffer(&dir.join("material.bin"), &self.material)?;
        if let Some(g) = &self.geometry {
            write_f32_buffer(&dir.join("geometry.bin"), g)?;
        }
        if let Some(j) = &self.jacobian_terms {
            write_f32_buffer(&dir.join("jacobian_terms.bin"), j)?;
        }
        let layout = serde_json::json!({
            "variant": self.plan.variant.name(),
            "plan": self.plan,
            "exec_params": { "type": "u32le", "len": self.exec_params.len() },
            "shape_table": { "type": "f32le", "shape": [self.plan.n_q, N_DERIV, self.plan.n_sh] },
            "quadrature": {
                "type": "f32le",
                "shape": if self.geometry.is_some() { vec![self.plan.n_q, 4] } else { vec![self.plan.n_q] },
            },
            "geometry": self.geometry.as_ref().map(|_| serde_json::json!({
                "type": "f32le", "shape": [self.plan.elems_per_kernel, 6, 3]
            })),
            "jacobian_terms": self.jacobian_terms.as_ref().map(|_| serde_json::json!({
                "type": "f32le", "shape": [self.plan.elems_per_kernel, self.plan.n_q, JACOBIAN_RECORD_LEN]
            })),
            "material": { "type": "f32le", "shape": [self.plan.elems_per_kernel, MATERIAL_LEN] },
            "stiffness": {
                "type": "f32le",
                "shape": [self.plan.elems_per_kernel, self.plan.matrix_dim(), self.plan.matrix_dim()],
                "row": "i_dof * n_eq + i_eq",
            },
        });
        std::fs::write(dir.join("layout.json"), serde_json::to_string_pretty(&layout)?)?;
        Ok(())
    }
}

pub fn write_f32_buffer<T: KernelReal>(path: &Path, data: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in data {
        w.write_all(&(x.wide() as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Per-element flop breakdown of one kernel invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlopBreakdown {
    pub material: u64,
    pub jacobian: u64,
    pub scaling: u64,
    pub gradients: u64,
    pub block_updates: u64,
}

impl FlopBreakdown {
    pub fn total(&self) -> u64 {
        self.material + self.jacobian + self.scaling + self.gradients + self.block_updates
    }

    pub fn overhead(&self) -> u64 {
        self.total() - self.block_updates
    }
}

/// Closed-form flops for one element under `plan`.
pub fn flop_model_per_element(plan: &ExecutionPlan) -> FlopBreakdown {
    let passes = (plan.n_parts * plan.n_q) as u64;
    FlopBreakdown {
        material: MATERIAL_FLOPS,
        jacobian: if plan.variant.computes_jacobian() { passes * JACOBIAN_FLOPS } else { 0 },
        scaling: passes * SCALING_FLOPS,
        gradients: passes * PSI_FLOPS_PER_DOF * plan.n_sh as u64,
        block_updates: passes * plan.slots_per_part() as u64 * BLOCK_UPDATE_FLOPS,
    }
}

/// Closed-form counterpart of the instrumented counter for a whole invocation.
pub fn flop_model(variant: KernelVariant, plan: &ExecutionPlan) -> Result<u64> {
    if variant != plan.variant {
        return Err(Error::ContractViolation(format!(
            "plan was made for {}, not {variant}",
            plan.variant
        )));
    }
    Ok(flop_model_per_element(plan).total() * plan.elems_per_kernel as u64)
}

/// Lame parameters in kernel precision.
#[inline]
fn lame<T: KernelReal>(e: T, nu: T) -> (T, T) {
    let two = T::of(2.0);
    let one_nu = T::one() + nu;
    let mu = e / (two * one_nu);
    let lambda = e * nu / (one_nu * (T::one() - two * nu));
    (lambda, mu)
}

/// Determinant and row-major inverse of the Jacobian at `xi` from the 18 vertex
/// coordinates, in kernel precision.
#[inline]
pub fn device_jacobian<T: KernelReal>(x: &[T], xi: [T; 3]) -> (T, [T; 9]) {
    let half = T::of(0.5);
    let h = half * xi[2];
    let lo = half - h;
    let hi = half + h;
    let l = [T::one() - xi[0] - xi[1], xi[0], xi[1]];
    let mut m = [[T::zero(); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        let v = |k: usize| x[3 * k + i];
        row[0] = lo * (v(1) - v(0)) + hi * (v(4) - v(3));
        row[1] = lo * (v(2) - v(0)) + hi * (v(5) - v(3));
        row[2] = half * (l[0] * (v(3) - v(0)) + l[1] * (v(4) - v(1)) + l[2] * (v(5) - v(2)));
    }
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let r = T::one() / det;
    let inv = [
        c00 * r,
        (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * r,
        (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * r,
        c01 * r,
        (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * r,
        (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * r,
        c02 * r,
        (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * r,
        (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * r,
    ];
    (det, inv)
}

/// Slot-to-block map: `(i_DOF, j_DOF, real)` per slot, part-major.
fn slot_map(plan: &ExecutionPlan) -> Vec<(u32, u32, bool)> {
    let slots = plan.slots_per_part();
    let (n_sh, nb) = (plan.n_sh, plan.n_blocks);
    (0..plan.n_parts * slots)
        .map(|idx| {
            // Padding slots compute on a wrapped block and are never written.
            let real = idx < nb;
            let k = idx % nb;
            ((k / n_sh) as u32, (k % n_sh) as u32, real)
        })
        .collect()
}

struct GroupResult {
    flops: u64,
    padding_writes: u64,
    trace: Vec<Phase>,
}

/// Runs one kernel invocation on a pool of `workers` threads (`None`: all cores).
pub fn run_kernel<T: KernelReal>(
    variant: KernelVariant,
    inputs: &KernelInputs<T>,
    workers: Option<usize>,
    trace: bool,
) -> Result<KernelOutput<T>> {
    let mut out = KernelOutput::allocate(&inputs.plan, trace);
    run_kernel_into(variant, inputs, &mut out, workers)?;
    Ok(out)
}

/// As [`run_kernel`], writing into a preallocated output.
pub fn run_kernel_into<T: KernelReal>(
    variant: KernelVariant,
    inputs: &KernelInputs<T>,
    out: &mut KernelOutput<T>,
    workers: Option<usize>,
) -> Result<()> {
    let plan = &inputs.plan;
    if variant != plan.variant {
        return Err(Error::ContractViolation(format!(
            "kernel {variant} launched with a plan for {}",
            plan.variant
        )));
    }
    inputs.validate()?;
    let dim = plan.matrix_dim();
    let mat_len = dim * dim;
    if out.stiffness.len() != plan.elems_per_kernel * mat_len || out.write_counts.len() != plan.elems_per_kernel * plan.n_blocks
    {
        return Err(Error::ContractViolation("output buffer does not match the plan".into()));
    }
    if variant.is_shared() {
        let need = plan.slots_per_part() * ELASTICITY_EQS * ELASTICITY_EQS * DEVICE_REAL_BYTES;
        if need > plan.shared_scratch_bytes {
            return Err(Error::SharedMemoryExhausted {
                required: need,
                available: plan.shared_scratch_bytes,
            });
        }
    }
    out.stiffness.iter_mut().for_each(|x| *x = T::zero());
    out.write_counts.iter_mut().for_each(|c| *c = 0);

    let map = slot_map(plan);
    let epw = plan.elems_per_work_group;
    let want_trace = out.barrier_trace.is_some();
    let mut run = || -> Vec<Result<GroupResult>> {
        out.stiffness
            .par_chunks_mut(epw * mat_len)
            .zip(out.write_counts.par_chunks_mut(epw * plan.n_blocks))
            .enumerate()
            .map(|(g, (stiff, counts))| run_group(inputs, &map, g, stiff, counts, want_trace))
            .collect()
    };
    let results = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut flops = 0;
    let mut padding = 0;
    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        let r = r?;
        flops += r.flops;
        padding += r.padding_writes;
        traces.push(r.trace);
    }
    out.flop_counter = flops;
    out.padding_writes = padding;
    if want_trace {
        traces.resize(plan.n_work_groups, Vec::new());
        out.barrier_trace = Some(traces);
    }
    Ok(())
}

fn run_group<T: KernelReal>(
    inputs: &KernelInputs<T>,
    map: &[(u32, u32, bool)],
    g: usize,
    stiff: &mut [T],
    counts: &mut [u8],
    want_trace: bool,
) -> Result<GroupResult> {
    let plan = &inputs.plan;
    let (n_sh, n_q, ne) = (plan.n_sh, plan.n_q, ELASTICITY_EQS);
    let dim = plan.matrix_dim();
    let slots = plan.slots_per_part();
    let jac = plan.variant.computes_jacobian();
    let per_point = N_DERIV * n_sh;
    let mut res = GroupResult {
        flops: 0,
        padding_writes: 0,
        trace: Vec::new(),
    };
    let note = |t: &mut Vec<Phase>, p: Phase| {
        if want_trace {
            t.push(p);
        }
    };
    // Per-thread registers (REG) or the group's shared scratch (SHM); same shape.
    let mut acc = vec![[T::zero(); 9]; slots];
    // Shared gradient workspace, `[axis][i_DOF]`.
    let mut psi = vec![T::zero(); 3 * n_sh];

    for (local, e) in plan.group_elements(g).enumerate() {
        note(&mut res.trace, Phase::LoadElement);
        let (lambda, mu) = lame(inputs.material[2 * e], inputs.material[2 * e + 1]);
        res.flops += MATERIAL_FLOPS;
        let geom = inputs.geometry.as_ref().map(|g| &g[e * GEOMETRY_LEN..(e + 1) * GEOMETRY_LEN]);
        let out = &mut stiff[local * dim * dim..(local + 1) * dim * dim];
        let cnt = &mut counts[local * plan.n_blocks..(local + 1) * plan.n_blocks];

        for part in 0..plan.n_parts {
            let part_map = &map[part * slots..(part + 1) * slots];
            acc.iter_mut().for_each(|b| *b = [T::zero(); 9]);
            for q in 0..n_q {
                note(&mut res.trace, Phase::LoadPoint);
                let (det, inv, w) = if jac {
                    let rec = &inputs.quadrature[4 * q..4 * q + 4];
                    let (det, inv) = device_jacobian(geom.unwrap(), [rec[0], rec[1], rec[2]]);
                    res.flops += JACOBIAN_FLOPS;
                    if !(det > T::zero()) {
                        return Err(Error::InvertedElement {
                            element: Some(e),
                            xi: [rec[0].wide(), rec[1].wide(), rec[2].wide()],
                            det: det.wide(),
                        });
                    }
                    (det, inv, rec[3])
                } else {
                    let jt = inputs.jacobian_terms.as_ref().unwrap();
                    let r = &jt[(e * n_q + q) * JACOBIAN_RECORD_LEN..(e * n_q + q + 1) * JACOBIAN_RECORD_LEN];
                    let mut inv = [T::zero(); 9];
                    inv.copy_from_slice(&r[1..]);
                    (r[0], inv, inputs.quadrature[q])
                };
                let dw = det * w;
                let (lw, mw) = (lambda * dw, mu * dw);
                res.flops += SCALING_FLOPS;
                note(&mut res.trace, Phase::Barrier);

                note(&mut res.trace, Phase::Gradients);
                let phi = &inputs.shape_table[q * per_point..(q + 1) * per_point];
                let (d1, d2, d3) = (&phi[n_sh..2 * n_sh], &phi[2 * n_sh..3 * n_sh], &phi[3 * n_sh..]);
                for i in 0..3 {
                    let (a, b, c) = (inv[i], inv[3 + i], inv[6 + i]);
                    let row = &mut psi[i * n_sh..(i + 1) * n_sh];
                    for dof in 0..n_sh {
                        row[dof] = d1[dof] * a + d2[dof] * b + d3[dof] * c;
                    }
                }
                res.flops += PSI_FLOPS_PER_DOF * n_sh as u64;
                note(&mut res.trace, Phase::Barrier);

                note(&mut res.trace, Phase::BlockUpdate);
                let (gx, rest) = psi.split_at(n_sh);
                let (gy, gz) = rest.split_at(n_sh);
                for (slot, &(i, j, _)) in acc.iter_mut().zip(part_map) {
                    let (i, j) = (i as usize, j as usize);
                    elasticity_block_update([gx[i], gy[i], gz[i]], [gx[j], gy[j], gz[j]], lw, mw, slot);
                }
                res.flops += BLOCK_UPDATE_FLOPS * slots as u64;
                note(&mut res.trace, Phase::Barrier);
            }

            note(&mut res.trace, Phase::WriteBlocks);
            for (slot, &(i, j, real)) in acc.iter().zip(part_map) {
                if !real {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                let idx = i * n_sh + j;
                if idx >= plan.n_blocks {
                    res.padding_writes += 1;
                    continue;
                }
                cnt[idx] = cnt[idx].saturating_add(1);
                for ie in 0..ne {
                    let row = (i * ne + ie) * dim + j * ne;
                    out[row..row + ne].copy_from_slice(&slot[ie * 3..ie * 3 + ne]);
                }
            }
        }
    }
    Ok(res)
}

/// Result of integrating a whole mesh through one or more kernel invocations.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub matrices: Vec<ElementStiffness>,
    pub flops: u64,
    pub invocations: usize,
    pub coverage_exact: bool,
}

/// Options for [`run_batch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchOptions {
    pub precision: Precision,
    pub workers: Option<usize>,
}

/// Splits the mesh into invocations of `elems_per_kernel` elements (the last one
/// re-planned for the remainder) and collects canonical matrices in mesh order.
pub fn run_batch(
    variant: KernelVariant,
    dev: &DeviceSpec,
    opts: &PlanOptions,
    p: usize,
    mesh: &Mesh,
    mat: &MaterialField,
    batch: BatchOptions,
) -> Result<BatchResult> {
    if mesh.is_empty() {
        return Err(Error::Config("mesh has no elements".into()));
    }
    mat.validate(mesh.len())?;
    let rule = prism_quadrature(p)?;
    let shapes = tabulate_shapes(p, &rule)?;
    let geoms = mesh.geometries();
    let materials: Vec<MaterialData> = (0..mesh.len()).map(|e| mat.for_element(e)).collect();
    let mut result = BatchResult {
        matrices: Vec::with_capacity(mesh.len()),
        flops: 0,
        invocations: 0,
        coverage_exact: true,
    };
    let mut start = 0;
    while start < geoms.len() {
        let plan = plan_execution(dev, p, variant, geoms.len() - start, opts)?;
        let end = start + plan.elems_per_kernel;
        let offset = |err: Error| match err {
            Error::InvertedElement { element, xi, det } => Error::InvertedElement {
                element: element.map(|e| e + start),
                xi,
                det,
            },
            other => other,
        };
        let (g, m) = (&geoms[start..end], &materials[start..end]);
        match batch.precision {
            Precision::F32 => {
                invoke::<f32>(variant, &plan, g, m, &rule, &shapes, batch.workers, &mut result).map_err(offset)?
            }
            Precision::F64 => {
                invoke::<f64>(variant, &plan, g, m, &rule, &shapes, batch.workers, &mut result).map_err(offset)?
            }
        }
        start = end;
    }
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn invoke<T: KernelReal>(
    variant: KernelVariant,
    plan: &ExecutionPlan,
    geoms: &[PrismGeometry],
    materials: &[MaterialData],
    rule: &QuadratureRule,
    shapes: &ShapeTable,
    workers: Option<usize>,
    result: &mut BatchResult,
) -> Result<()> {
    let inputs = prepare_inputs::<T>(plan, geoms, materials, rule, shapes)?;
    let out = run_kernel(variant, &inputs, workers, false)?;
    result.flops += out.flop_counter;
    result.invocations += 1;
    result.coverage_exact &= out.coverage_exact();
    result.matrices.extend(out.elements(plan));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::jacobian_terms;
    use crate::integrate::integrate_optimized;
    use crate::mesh::generate_box_mesh;
    use crate::planner::DeviceProfile;
    use crate::quadrature::RefCoords;

    fn small_setup(p: usize, variant: KernelVariant, n: usize) -> (ExecutionPlan, Vec<PrismGeometry>, QuadratureRule, ShapeTable) {
        let mesh = generate_box_mesh(2, 2, 2, 0.1).unwrap();
        let plan = DeviceProfile::gtx580().plan(p, variant, n).unwrap();
        let rule = prism_quadrature(p).unwrap();
        let shapes = tabulate_shapes(p, &rule).unwrap();
        (plan, mesh.geometries()[..n].to_vec(), rule, shapes)
    }

    #[test]
    fn device_jacobian_matches_host() {
        let mesh = generate_box_mesh(2, 2, 2, 0.2).unwrap();
        let g = mesh.geometry(3);
        let x: Vec<f64> = g.flat().to_vec();
        let xi = RefCoords::new(0.2, 0.3, -0.4);
        let (det, inv) = device_jacobian(&x, xi.as_array());
        let jt = jacobian_terms(&g, xi).unwrap();
        assert!((det - jt.det).abs() < 1e-14);
        let rec = jt.to_record();
        for k in 0..9 {
            assert!((inv[k] - rec[k + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn lame_in_kernel_precision() {
        let (l, m) = lame(2.5f64, 0.25);
        assert!((l - 1.0).abs() < 1e-15 && (m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn counter_matches_model_and_coverage() {
        for v in KernelVariant::ALL {
            let (plan, geoms, rule, shapes) = small_setup(2, v, 3);
            let mats = vec![MaterialData::default(); 3];
            let inputs = prepare_inputs::<f32>(&plan, &geoms, &mats, &rule, &shapes).unwrap();
            let out = run_kernel(v, &inputs, Some(1), true).unwrap();
            assert_eq!(out.flop_counter, flop_model(v, &plan).unwrap());
            assert!(out.coverage_exact());
            assert_eq!(out.output_bytes(), plan.output_bytes);
            let trace = out.barrier_trace.as_ref().unwrap();
            assert_eq!(trace.len(), plan.n_work_groups);
        }
    }

    #[test]
    fn wide_kernel_matches_reference() {
        let (plan, geoms, rule, shapes) = small_setup(3, KernelVariant::SHM_JAC, 2);
        let mats = vec![MaterialData::default(); 2];
        let inputs = prepare_inputs::<f64>(&plan, &geoms, &mats, &rule, &shapes).unwrap();
        let out = run_kernel(KernelVariant::SHM_JAC, &inputs, None, false).unwrap();
        for (e, g) in geoms.iter().enumerate() {
            let r = integrate_optimized(g, &mats[e], &shapes, &rule).unwrap();
            assert!(out.element(&plan, e).rel_frobenius_diff(&r) < 1e-12);
        }
    }

    #[test]
    fn buffer_contract() {
        let (plan, geoms, rule, shapes) = small_setup(2, KernelVariant::REG_NOJAC, 2);
        let mats = vec![MaterialData::default(); 2];
        let mut inputs = prepare_inputs::<f32>(&plan, &geoms, &mats, &rule, &shapes).unwrap();
        inputs.material.pop();
        assert!(matches!(
            run_kernel(KernelVariant::REG_NOJAC, &inputs, Some(1), false),
            Err(Error::ContractViolation(_))
        ));
        assert!(prepare_inputs::<f32>(&plan, &geoms[..1], &mats[..1], &rule, &shapes).is_err());
    }

    #[test]
    fn inverted_element_reports_id() {
        let (plan, mut geoms, rule, shapes) = small_setup(2, KernelVariant::REG_JAC, 3);
        geoms[2].vertices.swap(1, 2);
        geoms[2].vertices.swap(4, 5);
        let mats = vec![MaterialData::default(); 3];
        let inputs = prepare_inputs::<f32>(&plan, &geoms, &mats, &rule, &shapes).unwrap();
        let err = run_kernel(KernelVariant::REG_JAC, &inputs, Some(1), false).unwrap_err();
        assert!(matches!(err, Error::InvertedElement { element: Some(2), .. }));
    }

    #[test]
    fn phases_follow_barriers() {
        let (plan, geoms, rule, shapes) = small_setup(1, KernelVariant::SHM_NOJAC, 1);
        assert_eq!(plan.n_work_groups, 1);
        let mats = vec![MaterialData::default()];
        let inputs = prepare_inputs::<f32>(&plan, &geoms, &mats, &rule, &shapes).unwrap();
        let out = run_kernel(KernelVariant::SHM_NOJAC, &inputs, Some(1), true).unwrap();
        let t = &out.barrier_trace.unwrap()[0];
        assert_eq!(t[0], Phase::LoadElement);
        let per_point = [
            Phase::LoadPoint,
            Phase::Barrier,
            Phase::Gradients,
            Phase::Barrier,
            Phase::BlockUpdate,
            Phase::Barrier,
        ];
        assert_eq!(&t[1..7], &per_point);
        assert_eq!(t.len(), 1 + plan.n_parts * (plan.n_q * 6 + 1));
        assert_eq!(*t.last().unwrap(), Phase::WriteBlocks);
    }

    #[test]
    fn exec_params_layout() {
        let (plan, ..) = small_setup(2, KernelVariant::SHM_JAC, 1);
        let e = exec_params(&plan);
        assert_eq!(e.len(), EXEC_PARAMS_LEN);
        assert_eq!(e[0], 2);
        assert_eq!(e[11], 2);
    }
}
