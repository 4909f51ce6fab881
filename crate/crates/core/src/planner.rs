//! Virtual device description and host-side execution planning.
//!
//! Given device limits and an approximation order, the planner chooses the
//! work-group size, the number of stiffness-matrix blocks each thread keeps per
//! pass (shared-memory variants), the number of passes ("parts") over the
//! quadrature loop, and how many elements one kernel invocation processes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::JACOBIAN_RECORD_LEN;
use crate::{check_order, n_quad, n_shape, ELASTICITY_EQS};

/// Bytes per scalar in device buffers.
pub const DEVICE_REAL_BYTES: usize = 4;

/// Integers in the execution-parameter array shipped with every kernel call.
pub const EXEC_PARAMS_LEN: usize = 16;

/// Per-group staging in shared memory besides shape functions: element geometry
/// (72 B), material (8 B), one quadrature point (16 B), one Jacobian record (40 B).
pub const DEFAULT_STAGING_RESERVE: usize = 72 + 8 + 16 + 40;

pub const GTX580_JSON: &str = include_str!("../profiles/gtx580.json");
pub const HD5870_JSON: &str = include_str!("../profiles/hd5870.json");

fn default_simd() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub name: String,
    pub global_mem_bytes: usize,
    pub max_alloc_bytes: usize,
    pub shared_mem_bytes: usize,
    pub constant_mem_bytes: usize,
    pub max_work_group: usize,
    pub compute_units: usize,
    #[serde(default = "default_simd")]
    pub simd_width: usize,
    pub max_total_threads: usize,
    /// Extra cap on the output array, below `max_alloc_bytes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_budget_bytes: Option<usize>,
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.simd_width == 0 || !self.max_work_group.is_multiple_of(self.simd_width) {
            return Err(Error::Config(format!(
                "simd width {} must divide max work-group size {}",
                self.simd_width, self.max_work_group
            )));
        }
        if self.max_alloc_bytes > self.global_mem_bytes {
            return Err(Error::Config("max_alloc_bytes exceeds global_mem_bytes".into()));
        }
        if self.compute_units == 0 || self.max_total_threads == 0 {
            return Err(Error::Config("compute_units and max_total_threads must be positive".into()));
        }
        Ok(())
    }
}

/// A per-order setting with a fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerOrder {
    pub default: usize,
    #[serde(default)]
    pub per_order: BTreeMap<String, usize>,
}

impl PerOrder {
    pub fn uniform(v: usize) -> Self {
        Self {
            default: v,
            per_order: BTreeMap::new(),
        }
    }

    pub fn get(&self, p: usize) -> usize {
        self.per_order.get(&p.to_string()).copied().unwrap_or(self.default)
    }
}

/// Planner knobs stored with a device profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningDefaults {
    /// Work-group size overrides; `None` lets the planner maximize.
    #[serde(default)]
    pub work_group_size: Option<PerOrder>,
    /// Active work-groups per compute unit used to size a kernel invocation.
    pub occupancy_groups: PerOrder,
    /// Work-groups per compute unit sharing the shared memory in SHM variants.
    #[serde(default = "one")]
    pub shm_groups_per_cu: usize,
    #[serde(default = "default_reserve")]
    pub staging_reserve_bytes: usize,
}

fn one() -> usize {
    1
}

fn default_reserve() -> usize {
    DEFAULT_STAGING_RESERVE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device: DeviceSpec,
    pub planning: PlanningDefaults,
}

impl DeviceProfile {
    pub fn from_json(text: &str) -> Result<Self> {
        let prof: DeviceProfile = serde_json::from_str(text)?;
        prof.device.validate()?;
        Ok(prof)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn gtx580() -> Self {
        Self::from_json(GTX580_JSON).expect("bundled profile")
    }

    pub fn hd5870() -> Self {
        Self::from_json(HD5870_JSON).expect("bundled profile")
    }

    /// Resolves a bundled profile name (`gtx580`, `hd5870`) or a JSON file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        let stem = Path::new(name_or_path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(name_or_path);
        let path = Path::new(name_or_path);
        if path.exists() {
            return Self::load(path);
        }
        match stem {
            "gtx580" => Ok(Self::gtx580()),
            "hd5870" => Ok(Self::hd5870()),
            _ => Err(Error::Config(format!("unknown device profile '{name_or_path}'"))),
        }
    }

    pub fn options(&self, p: usize) -> PlanOptions {
        PlanOptions {
            occupancy_groups: self.planning.occupancy_groups.get(p),
            wg_override: self.planning.work_group_size.as_ref().map(|w| w.get(p)),
            shm_groups_per_cu: self.planning.shm_groups_per_cu,
            staging_reserve_bytes: self.planning.staging_reserve_bytes,
        }
    }

    /// Plan with the profile's defaults.
    pub fn plan(&self, p: usize, variant: KernelVariant, n_elements_available: usize) -> Result<ExecutionPlan> {
        plan_execution(&self.device, p, variant, n_elements_available, &self.options(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Registers,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianSource {
    DeviceComputed,
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelVariant {
    pub storage: Storage,
    pub jacobian: JacobianSource,
}

impl KernelVariant {
    pub const REG_JAC: Self = Self::new(Storage::Registers, JacobianSource::DeviceComputed);
    pub const REG_NOJAC: Self = Self::new(Storage::Registers, JacobianSource::Precomputed);
    pub const SHM_JAC: Self = Self::new(Storage::Shared, JacobianSource::DeviceComputed);
    pub const SHM_NOJAC: Self = Self::new(Storage::Shared, JacobianSource::Precomputed);
    pub const ALL: [Self; 4] = [Self::REG_JAC, Self::REG_NOJAC, Self::SHM_JAC, Self::SHM_NOJAC];

    pub const fn new(storage: Storage, jacobian: JacobianSource) -> Self {
        Self { storage, jacobian }
    }

    pub fn is_shared(&self) -> bool {
        self.storage == Storage::Shared
    }

    pub fn computes_jacobian(&self) -> bool {
        self.jacobian == JacobianSource::DeviceComputed
    }

    /// Upper-case name such as `REG_JAC`.
    pub fn name(&self) -> &'static str {
        match (self.storage, self.jacobian) {
            (Storage::Registers, JacobianSource::DeviceComputed) => "REG_JAC",
            (Storage::Registers, JacobianSource::Precomputed) => "REG_NOJAC",
            (Storage::Shared, JacobianSource::DeviceComputed) => "SHM_JAC",
            (Storage::Shared, JacobianSource::Precomputed) => "SHM_NOJAC",
        }
    }

    /// Parses `reg-jac`, `shm-nojac`, ... or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        s.split(',').map(|v| v.trim().parse()).collect()
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "reg-jac" => Ok(Self::REG_JAC),
            "reg-nojac" => Ok(Self::REG_NOJAC),
            "shm-jac" => Ok(Self::SHM_JAC),
            "shm-nojac" => Ok(Self::SHM_NOJAC),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected reg-jac, reg-nojac, shm-jac, shm-nojac or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub occupancy_groups: usize,
    pub wg_override: Option<usize>,
    pub shm_groups_per_cu: usize,
    pub staging_reserve_bytes: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            occupancy_groups: 8,
            wg_override: None,
            shm_groups_per_cu: 1,
            staging_reserve_bytes: DEFAULT_STAGING_RESERVE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub variant: KernelVariant,
    pub p: usize,
    pub n_eq: usize,
    pub n_sh: usize,
    pub n_q: usize,
    pub work_group_size: usize,
    pub n_blocks: usize,
    pub blocks_per_thread: usize,
    pub n_parts: usize,
    pub elems_per_kernel: usize,
    pub elems_per_work_group: usize,
    pub n_work_groups: usize,
    /// Shared-memory scratch granted to one group for stiffness blocks (SHM only).
    pub shared_scratch_bytes: usize,
    pub output_bytes: usize,
    pub input_bytes_jac: usize,
    pub input_bytes_nojac: usize,
}

impl ExecutionPlan {
    pub fn matrix_dim(&self) -> usize {
        self.n_eq * self.n_sh
    }

    pub fn matrix_bytes(&self) -> usize {
        self.matrix_dim() * self.matrix_dim() * DEVICE_REAL_BYTES
    }

    pub fn total_threads(&self) -> usize {
        self.n_work_groups * self.work_group_size
    }

    /// Block slots processed per part (`wg * bpt`).
    pub fn slots_per_part(&self) -> usize {
        self.work_group_size * self.blocks_per_thread
    }

    pub fn input_bytes(&self) -> usize {
        if self.variant.computes_jacobian() {
            self.input_bytes_jac
        } else {
            self.input_bytes_nojac
        }
    }

    /// Elements handled by work-group `g` as a half-open range.
    pub fn group_elements(&self, g: usize) -> std::ops::Range<usize> {
        let start = (g * self.elems_per_work_group).min(self.elems_per_kernel);
        let end = ((g + 1) * self.elems_per_work_group).min(self.elems_per_kernel);
        start..end
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let mb = |b: usize| b as f64 / (1024.0 * 1024.0);
        let rows: Vec<(&str, String)> = vec![
            ("variant", self.variant.to_string()),
            ("order p", self.p.to_string()),
            ("shape functions", self.n_sh.to_string()),
            ("quadrature points", self.n_q.to_string()),
            ("work-group size", self.work_group_size.to_string()),
            ("blocks in A^e", self.n_blocks.to_string()),
            ("blocks per thread", self.blocks_per_thread.to_string()),
            ("parts of A^e", self.n_parts.to_string()),
            ("elements per kernel", self.elems_per_kernel.to_string()),
            ("elements per work-group", self.elems_per_work_group.to_string()),
            ("work-groups", self.n_work_groups.to_string()),
            ("input data JAC [MB]", format!("{:.2}", mb(self.input_bytes_jac))),
            ("input data NOJAC [MB]", format!("{:.2}", mb(self.input_bytes_nojac))),
            ("output data [MB]", format!("{:.2}", mb(self.output_bytes))),
        ];
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<w$}  {v:>12}\n"))
            .collect()
    }
}

/// Work-group size: the override if given, otherwise the largest multiple of the
/// SIMD width not above the device limit or the block count (at least one SIMD width).
pub fn work_group_size(dev: &DeviceSpec, p: usize, wg_override: Option<usize>) -> Result<usize> {
    check_order(p)?;
    let limit = dev.max_work_group.min(dev.max_total_threads);
    if let Some(wg) = wg_override {
        if wg == 0 || wg % dev.simd_width != 0 || wg > limit {
            return Err(Error::Config(format!(
                "work-group size {wg} must be a positive multiple of {} not above {limit}",
                dev.simd_width
            )));
        }
        return Ok(wg);
    }
    let n_blocks = n_shape(p) * n_shape(p);
    let wg = limit.min(n_blocks) / dev.simd_width * dev.simd_width;
    Ok(wg.max(dev.simd_width))
}

/// Bytes of shared memory reserved per group for shape-function workspace and staging.
pub fn shared_reserve_bytes(p: usize, staging: usize) -> usize {
    4 * n_shape(p) * DEVICE_REAL_BYTES + staging
}

/// Shared memory available to one group for stiffness blocks.
pub fn shared_scratch_budget(dev: &DeviceSpec, p: usize, shm_groups: usize, staging: usize) -> usize {
    (dev.shared_mem_bytes / shm_groups.max(1)).saturating_sub(shared_reserve_bytes(p, staging))
}

/// Blocks per thread within one part: 1 for register variants; for shared-memory
/// variants as many as the per-group budget holds, but no more than needed to cover
/// the matrix in a single part.
pub fn blocks_per_thread(
    dev: &DeviceSpec,
    wg: usize,
    variant: KernelVariant,
    p: usize,
    shm_groups: usize,
    staging: usize,
) -> Result<usize> {
    check_order(p)?;
    if !variant.is_shared() {
        return Ok(1);
    }
    let per_layer = wg * ELASTICITY_EQS * ELASTICITY_EQS * DEVICE_REAL_BYTES;
    let budget = shared_scratch_budget(dev, p, shm_groups, staging);
    let fit = budget / per_layer;
    if fit == 0 {
        return Err(Error::SharedMemoryExhausted {
            required: per_layer + shared_reserve_bytes(p, staging),
            available: dev.shared_mem_bytes / shm_groups.max(1),
        });
    }
    let n_blocks = n_shape(p) * n_shape(p);
    Ok(fit.min(n_blocks.div_ceil(wg)))
}

pub fn n_parts(n_blocks: usize, wg: usize, bpt: usize) -> usize {
    n_blocks.div_ceil(wg * bpt)
}

pub fn plan_execution(
    dev: &DeviceSpec,
    p: usize,
    variant: KernelVariant,
    n_elements_available: usize,
    opts: &PlanOptions,
) -> Result<ExecutionPlan> {
    check_order(p)?;
    dev.validate()?;
    if n_elements_available == 0 {
        return Err(Error::Config("at least one element is required".into()));
    }
    if opts.occupancy_groups == 0 {
        return Err(Error::Config("occupancy_groups must be positive".into()));
    }
    let n_sh = n_shape(p);
    let n_blocks = n_sh * n_sh;
    let wg = work_group_size(dev, p, opts.wg_override)?;
    let bpt = blocks_per_thread(dev, wg, variant, p, opts.shm_groups_per_cu, opts.staging_reserve_bytes)?;
    let parts = n_parts(n_blocks, wg, bpt);

    let dim = ELASTICITY_EQS * n_sh;
    let matrix_bytes = dim * dim * DEVICE_REAL_BYTES;
    let out_limit = dev
        .output_budget_bytes
        .map_or(dev.max_alloc_bytes, |b| b.min(dev.max_alloc_bytes));
    if matrix_bytes > out_limit {
        return Err(Error::Capacity {
            needed: matrix_bytes,
            limit: out_limit,
        });
    }
    let mem_cap = out_limit / matrix_bytes;

    // Full-capacity shape: the target group count, shrunk to a multiple of the
    // compute-unit count when memory cannot give every group an element.
    let target_groups = dev.compute_units * opts.occupancy_groups;
    let (mut groups, mut per_group) = if mem_cap >= target_groups {
        (target_groups, mem_cap / target_groups)
    } else if mem_cap >= dev.compute_units {
        (mem_cap / dev.compute_units * dev.compute_units, 1)
    } else {
        (mem_cap, 1)
    };

    // Clipping keeps every group full; the remainder goes to a later invocation.
    if n_elements_available < groups * per_group {
        per_group = n_elements_available.div_ceil(groups);
        groups = n_elements_available / per_group;
    }
    let max_groups = (dev.max_total_threads / wg).max(1);
    if groups > max_groups {
        let elems = groups * per_group;
        per_group = elems.div_ceil(max_groups);
        groups = elems / per_group;
    }
    let elems = groups * per_group;

    let acct = memory_accounting_for(p, elems);
    Ok(ExecutionPlan {
        variant,
        p,
        n_eq: ELASTICITY_EQS,
        n_sh,
        n_q: n_quad(p),
        work_group_size: wg,
        n_blocks,
        blocks_per_thread: bpt,
        n_parts: parts,
        elems_per_kernel: elems,
        elems_per_work_group: per_group,
        n_work_groups: groups,
        shared_scratch_bytes: if variant.is_shared() {
            shared_scratch_budget(dev, p, opts.shm_groups_per_cu, opts.staging_reserve_bytes)
        } else {
            0
        },
        output_bytes: acct.output_bytes,
        input_bytes_jac: acct.input_jac_bytes,
        input_bytes_nojac: acct.input_nojac_bytes,
    })
}

/// Itemized kernel-argument sizes in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryAccounting {
    pub elements: usize,
    pub exec_params: usize,
    /// Points and weights (JAC variants).
    pub quadrature: usize,
    /// Weights only (NOJAC variants).
    pub quadrature_weights: usize,
    pub shape_table: usize,
    pub geometry: usize,
    pub material: usize,
    pub jacobian_terms: usize,
    pub input_jac_bytes: usize,
    pub input_nojac_bytes: usize,
    pub output_bytes: usize,
}

pub fn memory_accounting_for(p: usize, elements: usize) -> MemoryAccounting {
    let r = DEVICE_REAL_BYTES;
    let (n_sh, n_q) = (n_shape(p), n_quad(p));
    let dim = ELASTICITY_EQS * n_sh;
    let exec_params = EXEC_PARAMS_LEN * 4;
    let quadrature = 4 * n_q * r;
    let quadrature_weights = n_q * r;
    let shape_table = 4 * n_sh * n_q * r;
    let geometry = elements * 18 * r;
    let material = elements * 2 * r;
    let jacobian_terms = elements * n_q * JACOBIAN_RECORD_LEN * r;
    MemoryAccounting {
        elements,
        exec_params,
        quadrature,
        quadrature_weights,
        shape_table,
        geometry,
        material,
        jacobian_terms,
        input_jac_bytes: exec_params + quadrature + shape_table + geometry + material,
        input_nojac_bytes: exec_params + quadrature_weights + shape_table + material + jacobian_terms,
        output_bytes: elements * dim * dim * r,
    }
}

pub fn memory_accounting(plan: &ExecutionPlan) -> MemoryAccounting {
    memory_accounting_for(plan.p, plan.elems_per_kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nvidia() -> DeviceProfile {
        DeviceProfile::gtx580()
    }

    fn amd() -> DeviceProfile {
        DeviceProfile::hd5870()
    }

    #[test]
    fn work_group_sizes() {
        let nv = nvidia();
        assert_eq!(work_group_size(&nv.device, 5, nv.options(5).wg_override).unwrap(), 512);
        assert_eq!(work_group_size(&nv.device, 2, nv.options(2).wg_override).unwrap(), 192);
        let a = amd();
        for p in 2..=7 {
            assert_eq!(work_group_size(&a.device, p, a.options(p).wg_override).unwrap(), 256);
        }
        let mut dev = nv.device.clone();
        dev.max_work_group = 1024;
        assert_eq!(work_group_size(&dev, 2, None).unwrap(), 320);
        assert_eq!(work_group_size(&dev, 1, None).unwrap(), 64);
        assert!(work_group_size(&dev, 2, Some(100)).is_err());
        assert!(work_group_size(&dev, 2, Some(2048)).is_err());
    }

    #[test]
    fn blocks_per_thread_examples() {
        let nv = nvidia();
        for p in 3..=7 {
            let bpt = blocks_per_thread(&nv.device, 512, KernelVariant::SHM_JAC, p, 1, DEFAULT_STAGING_RESERVE).unwrap();
            assert_eq!(bpt, 2, "p={p}");
        }
        let a = amd();
        let bpt = |p| blocks_per_thread(&a.device, 256, KernelVariant::SHM_NOJAC, p, 1, DEFAULT_STAGING_RESERVE).unwrap();
        assert_eq!(bpt(3), 3);
        assert_eq!(bpt(2), 2);
        assert_eq!(
            blocks_per_thread(&a.device, 256, KernelVariant::REG_JAC, 7, 1, DEFAULT_STAGING_RESERVE).unwrap(),
            1
        );
    }

    #[test]
    fn parts_examples() {
        assert_eq!(n_parts(15876, 512, 1), 32);
        assert_eq!(n_parts(82944, 256, 1), 324);
        assert_eq!(n_parts(38416, 256, 3), 51);
    }

    #[test]
    fn nvidia_p7_plan() {
        let plan = nvidia().plan(7, KernelVariant::REG_JAC, usize::MAX).unwrap();
        assert_eq!(plan.n_work_groups, 112);
        assert_eq!(plan.elems_per_work_group, 1);
        assert_eq!(plan.elems_per_kernel, 112);
        assert_eq!(plan.output_bytes, 334_430_208);
        let acct = memory_accounting(&plan);
        assert_eq!(acct.jacobian_terms, 1_505_280);
    }

    #[test]
    fn amd_p6_plan() {
        let plan = amd().plan(6, KernelVariant::SHM_JAC, usize::MAX).unwrap();
        assert_eq!(plan.elems_per_kernel, 80);
        assert_eq!(plan.output_bytes, 110_638_080);
        let p7 = amd().plan(7, KernelVariant::REG_NOJAC, usize::MAX).unwrap();
        assert_eq!((p7.n_work_groups, p7.elems_per_work_group), (40, 1));
    }

    #[test]
    fn availability_clipping() {
        let plan = nvidia().plan(2, KernelVariant::REG_JAC, 29056).unwrap();
        assert_eq!(plan.n_work_groups, 128);
        assert_eq!(plan.elems_per_work_group, 227);
        let plan = nvidia().plan(4, KernelVariant::REG_JAC, 10).unwrap();
        assert_eq!(plan.elems_per_kernel, 10);
        assert_eq!(plan.n_work_groups * plan.elems_per_work_group, 10);
        let plan = nvidia().plan(2, KernelVariant::REG_JAC, 133).unwrap();
        assert_eq!((plan.n_work_groups, plan.elems_per_work_group, plan.elems_per_kernel), (66, 2, 132));
    }

    #[test]
    fn shared_memory_exhaustion() {
        let mut dev = nvidia().device;
        dev.shared_mem_bytes = 4096;
        let err = blocks_per_thread(&dev, 512, KernelVariant::SHM_JAC, 7, 1, DEFAULT_STAGING_RESERVE);
        assert!(matches!(err, Err(Error::SharedMemoryExhausted { .. })));
        assert!(blocks_per_thread(&dev, 512, KernelVariant::REG_JAC, 7, 1, DEFAULT_STAGING_RESERVE).is_ok());
    }

    #[test]
    fn capacity_error() {
        let mut dev = nvidia().device;
        dev.max_alloc_bytes = 1000;
        let err = plan_execution(&dev, 3, KernelVariant::REG_JAC, 1, &PlanOptions::default());
        assert!(matches!(err, Err(Error::Capacity { .. })));
    }

    #[test]
    fn zero_element_accounting() {
        let a = memory_accounting_for(4, 0);
        assert_eq!(a.geometry + a.material + a.jacobian_terms + a.output_bytes, 0);
        assert!(a.shape_table > 0);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("shm-nojac".parse::<KernelVariant>().unwrap(), KernelVariant::SHM_NOJAC);
        assert_eq!("REG_JAC".parse::<KernelVariant>().unwrap(), KernelVariant::REG_JAC);
        assert_eq!(KernelVariant::parse_list("all").unwrap().len(), 4);
        assert!("gpu".parse::<KernelVariant>().is_err());
    }

    #[test]
    fn profile_roundtrip() {
        let nv = nvidia();
        let text = serde_json::to_string(&nv).unwrap();
        assert_eq!(DeviceProfile::from_json(&text).unwrap(), nv);
    }
}
