//! Shifted dyadic lattices on the discretized torus, cube enumeration,
//! the two-weight stopping time, and sparse families.
//!
//! A lattice `D^t` consists of the cubes `2^-k ([0,1)^d + m + (-1)^k t)`
//! for levels `k = 0..=L` and shift `t` with components in `{0, 1/3}`.
//! With `N = 3·2^L` cells per axis every such cube is a block of whole
//! cells, so cube membership and all measures below are exact integer
//! arithmetic. Cubes within a level are stored corner-lexicographically
//! and all iteration orders are deterministic.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{CellSet, GridSpec, MAX_DIM};
use crate::linalg::{op_norm, CMat};

/// Default starting threshold for the stopping time.
pub const LAMBDA_SEED: f64 = 4.0;
/// Hard cap for the auto-doubled threshold.
pub const LAMBDA_CAP: f64 = (1u64 << 20) as f64;

/// Per-axis 1/3-shift flags; bit `a` set means axis `a` is shifted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shift {
    mask: u8,
}

impl Shift {
    pub const NONE: Shift = Shift { mask: 0 };

    pub fn from_mask(mask: u8, dim: usize) -> Result<Self> {
        if usize::from(mask) >= 1 << dim {
            return Err(Error::InvalidParam(format!(
                "shift mask {mask} out of range for dimension {dim}"
            )));
        }
        Ok(Shift { mask })
    }

    /// All `2^d` shifts in mask order.
    pub fn all(dim: usize) -> Vec<Shift> {
        (0..1u8 << dim).map(|mask| Shift { mask }).collect()
    }

    pub fn axis(self, axis: usize) -> bool {
        self.mask >> axis & 1 == 1
    }

    pub fn mask(self) -> u8 {
        self.mask
    }
}

/// Identifies a cube within one lattice: level and position in the
/// corner-sorted level slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeId {
    pub level: u32,
    pub pos: u32,
}

/// One shifted dyadic cube, with exact cell-unit geometry.
#[derive(Debug, Clone)]
pub struct DyadicCube {
    /// Level k; side length is `2^-k`.
    pub level: u32,
    /// Lattice index m per axis, reduced modulo `2^k`.
    pub index: [u32; MAX_DIM],
    /// Cell coordinates of the corner cell (lowest coordinates before wrap).
    pub corner: [usize; MAX_DIM],
    /// Cells per axis covered by this cube, `3·2^(L-k)`.
    pub side_cells: usize,
    /// Shift tag of the owning lattice.
    pub shift: Shift,
    pub parent: Option<CubeId>,
    pub children: Vec<CubeId>,
}

impl DyadicCube {
    /// Sign `(-1)^k` applied to the shift at this level.
    pub fn parity(&self) -> i64 {
        if self.level % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn side_length(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    /// Number of grid cells covered, `(3·2^(L-k))^d`.
    pub fn volume_cells(&self, dim: usize) -> u64 {
        (self.side_cells as u64).pow(dim as u32)
    }

    /// Lebesgue measure `2^(-kd)`, exact in binary floating point.
    pub fn measure(&self, grid: &GridSpec) -> f64 {
        self.volume_cells(grid.dim) as f64 * grid.cell_volume()
    }

    /// Flattened indices of all covered cells, row-major with torus wrap.
    pub fn cells(&self, grid: &GridSpec) -> Vec<usize> {
        let n = grid.cells_per_axis();
        let s = self.side_cells;
        match grid.dim {
            1 => (0..s).map(|i| (self.corner[0] + i) % n).collect(),
            _ => {
                let mut out = Vec::with_capacity(s * s);
                for r in 0..s {
                    let y = (self.corner[1] + r) % n;
                    for c in 0..s {
                        out.push(y * n + (self.corner[0] + c) % n);
                    }
                }
                out
            }
        }
    }

    pub fn cell_set(&self, grid: &GridSpec) -> CellSet {
        CellSet::from_indices(grid.cell_count(), self.cells(grid))
    }

    pub fn contains_cell(&self, grid: &GridSpec, cell: usize) -> bool {
        let n = grid.cells_per_axis();
        let coords = grid.cell_coords(cell);
        (0..grid.dim).all(|a| (coords[a] + n - self.corner[a]) % n < self.side_cells)
    }
}

/// All cubes of one shifted dyadic lattice with parent/child adjacency.
#[derive(Debug, Clone)]
pub struct DyadicLattice {
    grid: GridSpec,
    shift: Shift,
    levels: Vec<Vec<DyadicCube>>,
    level_offsets: Vec<usize>,
    pos_by_index: Vec<Vec<u32>>,
}

/// Builds the full lattice for one shift tag.
pub fn build_lattice(grid: &GridSpec, shift: Shift) -> DyadicLattice {
    DyadicLattice::build(grid, shift)
}

impl DyadicLattice {
    pub fn build(grid: &GridSpec, shift: Shift) -> Self {
        let depth = grid.depth;
        let n = grid.cells_per_axis() as i64;
        let mut levels: Vec<Vec<DyadicCube>> = Vec::with_capacity(depth as usize + 1);
        let mut pos_by_index: Vec<Vec<u32>> = Vec::with_capacity(depth as usize + 1);

        for k in 0..=depth {
            let side = 3i64 << (depth - k);
            let off = 1i64 << (depth - k);
            let parity = if k % 2 == 0 { 1i64 } else { -1i64 };
            let per_axis = 1u32 << k;
            let count = (per_axis as usize).pow(grid.dim as u32);
            let mut cubes = Vec::with_capacity(count);
            for flat in 0..count {
                let m = match grid.dim {
                    1 => [flat as u32, 0],
                    _ => [(flat as u32) % per_axis, (flat as u32) / per_axis],
                };
                let mut corner = [0usize; MAX_DIM];
                for a in 0..grid.dim {
                    let s = if shift.axis(a) { 1 } else { 0 };
                    corner[a] =
                        (side * m[a] as i64 + parity * off * s).rem_euclid(n) as usize;
                }
                cubes.push(DyadicCube {
                    level: k,
                    index: m,
                    corner,
                    side_cells: side as usize,
                    shift,
                    parent: None,
                    children: Vec::new(),
                });
            }
            cubes.sort_by_key(|c| c.corner);
            let mut by_index = vec![0u32; count];
            for (pos, c) in cubes.iter().enumerate() {
                let flat = (c.index[1] * per_axis + c.index[0]) as usize;
                by_index[if grid.dim == 1 { c.index[0] as usize } else { flat }] = pos as u32;
            }
            levels.push(cubes);
            pos_by_index.push(by_index);
        }

        // Children are the 2^d exact half-cubes; link via corner lookup.
        for k in 0..depth as usize {
            let corner_to_pos: HashMap<[usize; MAX_DIM], u32> = levels[k + 1]
                .iter()
                .enumerate()
                .map(|(p, c)| (c.corner, p as u32))
                .collect();
            let half = levels[k][0].side_cells / 2;
            let n = grid.cells_per_axis();
            let parent_count = levels[k].len();
            for pos in 0..parent_count {
                let corner = levels[k][pos].corner;
                let mut kids = Vec::with_capacity(1 << grid.dim);
                for j in 0..1usize << grid.dim {
                    let mut cc = corner;
                    for a in 0..grid.dim {
                        if j >> a & 1 == 1 {
                            cc[a] = (cc[a] + half) % n;
                        }
                    }
                    kids.push(CubeId {
                        level: (k + 1) as u32,
                        pos: corner_to_pos[&cc],
                    });
                }
                kids.sort();
                for &kid in &kids {
                    levels[k + 1][kid.pos as usize].parent = Some(CubeId {
                        level: k as u32,
                        pos: pos as u32,
                    });
                }
                levels[k][pos].children = kids;
            }
        }

        let mut level_offsets = Vec::with_capacity(levels.len() + 1);
        let mut acc = 0usize;
        for l in &levels {
            level_offsets.push(acc);
            acc += l.len();
        }
        level_offsets.push(acc);

        DyadicLattice {
            grid: *grid,
            shift,
            levels,
            level_offsets,
            pos_by_index,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn shift(&self) -> Shift {
        self.shift
    }

    pub fn depth(&self) -> u32 {
        self.grid.depth
    }

    pub fn root(&self) -> CubeId {
        CubeId { level: 0, pos: 0 }
    }

    pub fn cube(&self, id: CubeId) -> &DyadicCube {
        &self.levels[id.level as usize][id.pos as usize]
    }

    pub fn level(&self, k: u32) -> &[DyadicCube] {
        &self.levels[k as usize]
    }

    pub fn cube_count(&self) -> usize {
        *self.level_offsets.last().unwrap()
    }

    /// Stable flat index of a cube, level-major then corner-lexicographic.
    pub fn ordinal(&self, id: CubeId) -> usize {
        self.level_offsets[id.level as usize] + id.pos as usize
    }

    /// All cube ids, level-major then corner-lexicographic.
    pub fn ids(&self) -> impl Iterator<Item = CubeId> + '_ {
        self.levels.iter().enumerate().flat_map(|(k, l)| {
            (0..l.len()).map(move |p| CubeId {
                level: k as u32,
                pos: p as u32,
            })
        })
    }

    /// Subtree `D(id)` including `id`, in breadth-first deterministic order.
    pub fn descendants(&self, id: CubeId) -> Vec<CubeId> {
        let mut out = vec![id];
        let mut head = 0;
        while head < out.len() {
            let cur = out[head];
            head += 1;
            out.extend_from_slice(&self.cube(cur).children);
        }
        out
    }

    /// The level-k cube containing the cell with the given coordinates.
    pub fn cube_at(&self, level: u32, coords: [usize; MAX_DIM]) -> CubeId {
        let n = self.grid.cells_per_axis() as i64;
        let side = 3i64 << (self.grid.depth - level);
        let off = 1i64 << (self.grid.depth - level);
        let parity = if level % 2 == 0 { 1i64 } else { -1i64 };
        let per_axis = 1u32 << level;
        let mut m = [0u32; MAX_DIM];
        for a in 0..self.grid.dim {
            let s = if self.shift.axis(a) { 1 } else { 0 };
            let r = (coords[a] as i64 - parity * off * s).rem_euclid(n);
            m[a] = (r / side) as u32;
        }
        let flat = if self.grid.dim == 1 {
            m[0] as usize
        } else {
            (m[1] * per_axis + m[0]) as usize
        };
        CubeId {
            level,
            pos: self.pos_by_index[level as usize][flat],
        }
    }

    /// The level-k cube containing a flattened cell index.
    pub fn cube_of_cell(&self, level: u32, cell: usize) -> CubeId {
        self.cube_at(level, self.grid.cell_coords(cell))
    }
}

/// An ordered family of cubes drawn from one or more shifted lattices;
/// the index set of every supremum computed by the other modules.
#[derive(Debug, Clone)]
pub struct CubeFamily {
    lattices: Vec<DyadicLattice>,
}

impl CubeFamily {
    /// All cubes of the single lattice with the given shift.
    pub fn single(grid: &GridSpec, shift: Shift) -> Self {
        CubeFamily {
            lattices: vec![DyadicLattice::build(grid, shift)],
        }
    }

    /// All cubes of all `2^d` shifted lattices, in shift-mask order.
    pub fn all_shifts(grid: &GridSpec) -> Self {
        CubeFamily {
            lattices: Shift::all(grid.dim)
                .into_iter()
                .map(|s| DyadicLattice::build(grid, s))
                .collect(),
        }
    }

    pub fn from_lattices(lattices: Vec<DyadicLattice>) -> Self {
        CubeFamily { lattices }
    }

    pub fn grid(&self) -> &GridSpec {
        self.lattices[0].grid()
    }

    pub fn lattices(&self) -> &[DyadicLattice] {
        &self.lattices
    }

    pub fn cube_count(&self) -> usize {
        self.lattices.iter().map(|l| l.cube_count()).sum()
    }

    /// Deterministic enumeration: lattices in stored order, cubes
    /// level-major and corner-lexicographic within each.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &DyadicLattice, CubeId)> + '_ {
        self.lattices
            .iter()
            .enumerate()
            .flat_map(|(li, lat)| lat.ids().map(move |id| (li, lat, id)))
    }

    /// Human-readable label for a member cube, stable across runs.
    pub fn cube_label(&self, lattice_index: usize, id: CubeId) -> String {
        let lat = &self.lattices[lattice_index];
        let c = lat.cube(id);
        format!(
            "shift{}:k{}:corner{:?}",
            lat.shift().mask(),
            id.level,
            &c.corner[..lat.grid().dim]
        )
    }

    pub fn descriptor(&self) -> String {
        let g = self.grid();
        let shifts: Vec<String> = self
            .lattices
            .iter()
            .map(|l| l.shift().mask().to_string())
            .collect();
        format!(
            "d={} L={} shifts=[{}] cubes={}",
            g.dim,
            g.depth,
            shifts.join(","),
            self.cube_count()
        )
    }
}

/// Stopping-time output: generations `J^j`, families `F^j`, and decay data.
///
/// `generations[0]` is the root; `families[j]` collects `F(K)` over the
/// members `K` of `generations[j]`, so the concatenation of all families
/// partitions the subtree of the root. The reducing-matrix tables are
/// retained so the same stopping time can be re-run at a larger threshold.
#[derive(Clone)]
pub struct StoppingLayers {
    pub root: CubeId,
    pub lambda: f64,
    pub generations: Vec<Vec<CubeId>>,
    /// Stopping children `J(K)` per member, parallel to `generations`.
    pub member_stops: Vec<Vec<Vec<CubeId>>>,
    pub families: Vec<Vec<CubeId>>,
    /// Cells covered by the union of each generation.
    pub generation_cover_cells: Vec<u64>,
    pub root_cells: u64,
    /// True when both the per-generation decay `|∪J^j| ≤ 2^-j |I|` and the
    /// per-member decay `|∪J(K)| ≤ |K|/2` hold.
    pub decay_ok: bool,
    /// Worst per-member ratio `|∪J(K)| / |K|` over all generation members.
    pub max_member_cover_ratio: f64,
    red_u: Vec<CMat>,
    red_u_inv: Vec<CMat>,
    red_v: Vec<CMat>,
    red_v_inv: Vec<CMat>,
}

fn invert_table(lattice: &DyadicLattice, table: &[CMat]) -> Result<Vec<CMat>> {
    let mut out = Vec::with_capacity(table.len());
    for (ord, m) in table.iter().enumerate() {
        let inv = m.clone().try_inverse().ok_or_else(|| Error::ReducingFailure {
            cube: format!("ordinal {ord} of {}", lattice.cube_count()),
            reason: "reducing matrix is singular".into(),
        })?;
        out.push(inv);
    }
    Ok(out)
}

/// Builds the two-weight stopping time from per-cube reducing matrices,
/// indexed by lattice ordinal (`red_u` for U, `red_v` for V, both the
/// primal kind). A descendant J of a member K stops when
/// `‖U_K U_J^-1‖ > λ` or `‖V_K^-1 V_J‖ > λ`.
pub fn stopping_from_reducing(
    lattice: &DyadicLattice,
    root: CubeId,
    lambda: f64,
    red_u: Vec<CMat>,
    red_v: Vec<CMat>,
) -> Result<StoppingLayers> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidParam(format!(
            "stopping threshold lambda must exceed 1, got {lambda}"
        )));
    }
    for (name, t) in [("u", &red_u), ("v", &red_v)] {
        if t.len() != lattice.cube_count() {
            return Err(Error::SizeMismatch {
                context: match name {
                    "u" => "reducing table for U",
                    _ => "reducing table for V",
                },
                expected: lattice.cube_count(),
                got: t.len(),
            });
        }
    }
    let red_u_inv = invert_table(lattice, &red_u)?;
    let red_v_inv = invert_table(lattice, &red_v)?;
    let mut layers = StoppingLayers {
        root,
        lambda,
        generations: Vec::new(),
        member_stops: Vec::new(),
        families: Vec::new(),
        generation_cover_cells: Vec::new(),
        root_cells: lattice.cube(root).volume_cells(lattice.grid().dim),
        decay_ok: false,
        max_member_cover_ratio: 0.0,
        red_u,
        red_u_inv,
        red_v,
        red_v_inv,
    };
    layers.run(lattice, lambda);
    Ok(layers)
}

impl StoppingLayers {
    /// Largest of the two stopping ratios for ancestor `k` and descendant `j`.
    fn ratio(&self, lattice: &DyadicLattice, k: CubeId, j: CubeId) -> f64 {
        let (ko, jo) = (lattice.ordinal(k), lattice.ordinal(j));
        let ru = op_norm(&(&self.red_u[ko] * &self.red_u_inv[jo]));
        let rv = op_norm(&(&self.red_v_inv[ko] * &self.red_v[jo]));
        ru.max(rv)
    }

    fn run(&mut self, lattice: &DyadicLattice, lambda: f64) {
        let dim = lattice.grid().dim;
        self.lambda = lambda;
        self.generations = vec![vec![self.root]];
        self.member_stops = Vec::new();
        self.families = Vec::new();
        self.generation_cover_cells = vec![self.root_cells];
        self.max_member_cover_ratio = 0.0;
        let mut per_generation_ok = true;
        let mut per_member_ok = true;

        loop {
            let current = self.generations.last().unwrap().clone();
            let mut family = Vec::new();
            let mut stops = Vec::with_capacity(current.len());
            let mut next = Vec::new();
            for &k_id in &current {
                family.push(k_id);
                let mut k_stops = Vec::new();
                let mut queue: Vec<CubeId> = lattice.cube(k_id).children.clone();
                let mut head = 0;
                while head < queue.len() {
                    let j_id = queue[head];
                    head += 1;
                    if self.ratio(lattice, k_id, j_id) > lambda {
                        k_stops.push(j_id);
                    } else {
                        family.push(j_id);
                        queue.extend_from_slice(&lattice.cube(j_id).children);
                    }
                }
                let k_cells = lattice.cube(k_id).volume_cells(dim);
                let cover: u64 = k_stops.iter().map(|&j| lattice.cube(j).volume_cells(dim)).sum();
                if 2 * cover > k_cells {
                    per_member_ok = false;
                }
                self.max_member_cover_ratio =
                    self.max_member_cover_ratio.max(cover as f64 / k_cells as f64);
                next.extend_from_slice(&k_stops);
                stops.push(k_stops);
            }
            self.member_stops.push(stops);
            self.families.push(family);
            if next.is_empty() {
                break;
            }
            let cover: u64 = next.iter().map(|&j| lattice.cube(j).volume_cells(dim)).sum();
            let j = self.generations.len() as u32;
            if cover << j > self.root_cells {
                per_generation_ok = false;
            }
            self.generation_cover_cells.push(cover);
            self.generations.push(next);
        }
        self.decay_ok = per_generation_ok && per_member_ok;
    }

    /// Re-runs the same stopping time at a different threshold.
    pub fn with_lambda(&self, lattice: &DyadicLattice, lambda: f64) -> StoppingLayers {
        let mut out = self.clone();
        out.run(lattice, lambda);
        out
    }

    /// Total number of generation members (sparse-family candidates).
    pub fn member_count(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }
}

/// One sparse-family member: a cube Q with `E_Q = Q \ ∪J(Q)`.
#[derive(Debug, Clone)]
pub struct SparseMember {
    pub id: CubeId,
    pub cube_cells: u64,
    pub ek_cells: u64,
    /// The stopping children removed from Q to form E_Q.
    pub removed: Vec<CubeId>,
}

impl SparseMember {
    pub fn ek_cell_set(&self, lattice: &DyadicLattice) -> CellSet {
        let grid = lattice.grid();
        let mut set = lattice.cube(self.id).cell_set(grid);
        for &r in &self.removed {
            for cell in lattice.cube(r).cells(grid) {
                set.remove(cell);
            }
        }
        set
    }
}

/// Sparse family extracted from a stopping time, with `|Q| ≤ 2|E_Q|`.
#[derive(Debug, Clone)]
pub struct SparseFamily {
    pub root: CubeId,
    pub members: Vec<SparseMember>,
    /// max over members of `|Q| / |E_Q|`.
    pub sparsity: f64,
    pub lambda_used: f64,
    pub doublings: u32,
}

/// Converts stopping layers into a sparse family, doubling the threshold
/// until both decay conditions hold.
pub fn sparse_from_stopping(
    lattice: &DyadicLattice,
    layers: &StoppingLayers,
) -> Result<SparseFamily> {
    let mut current = layers.clone();
    let mut doublings = 0u32;
    while !current.decay_ok {
        let next = current.lambda * 2.0;
        if next > LAMBDA_CAP {
            return Err(Error::LambdaCapExceeded { cap: LAMBDA_CAP });
        }
        current = current.with_lambda(lattice, next);
        doublings += 1;
    }
    let dim = lattice.grid().dim;
    let mut members = Vec::with_capacity(current.member_count());
    let mut sparsity = 1.0f64;
    for (gen, stops) in current.generations.iter().zip(&current.member_stops) {
        for (&id, removed) in gen.iter().zip(stops) {
            let cube_cells = lattice.cube(id).volume_cells(dim);
            let covered: u64 = removed.iter().map(|&r| lattice.cube(r).volume_cells(dim)).sum();
            let ek_cells = cube_cells - covered;
            sparsity = sparsity.max(cube_cells as f64 / ek_cells as f64);
            members.push(SparseMember {
                id,
                cube_cells,
                ek_cells,
                removed: removed.clone(),
            });
        }
    }
    Ok(SparseFamily {
        root: current.root,
        members,
        sparsity,
        lambda_used: current.lambda,
        doublings,
    })
}

/// Two-weight stopping time driven by the reducing matrices of U and V.
pub fn stopping_time(
    u: &crate::weights::MatrixWeight,
    v: &crate::weights::MatrixWeight,
    lattice: &DyadicLattice,
    root: CubeId,
    lambda: f64,
    p: f64,
) -> Result<StoppingLayers> {
    let red_u = crate::weights::reducing_matrices(u, lattice, p)?;
    let red_v = crate::weights::reducing_matrices(v, lattice, p)?;
    stopping_from_reducing(
        lattice,
        root,
        lambda,
        red_u.into_iter().map(|r| r.primal).collect(),
        red_v.into_iter().map(|r| r.primal).collect(),
    )
}
