//! Schedule synthesis.
//!
//! A registry state is the truth table held by every cell. One level applies
//! a library gate to an ordered tuple of cells, then refreshes or overwrites
//! each participating cell with a constant. Breadth-first search over
//! registry states finds schedules of minimal level count; every schedule
//! handed out is then checked by full simulation.
//!
//! Cells are interchangeable apart from their contents, so states are kept as
//! sorted multisets of masks.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CouplingConfig;
use crate::logic::{
    full_mask, projection_mask, row_bit, simulate_truth_table, GateLibraryEntry, LogicContext, LogicError,
    OperationMap, OperationSchedule, PostStep, RegistryCell, RegistrySpec, ScheduleLevel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("{function} not reachable within {max_levels} levels ({explored} registry states explored)")]
    Unreachable {
        function: BooleanFunction,
        max_levels: usize,
        explored: usize,
    },
    #[error("gate library has no usable entry")]
    EmptyLibrary,
    #[error("library is not universal: negation of an input is unreachable")]
    NotUniversal,
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("registry arity {registry} does not match function arity {function}")]
    ArityMismatch { registry: u8, function: u8 },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// Truth table of an `arity`-input function; row `r` assigns input `k` the
/// bit `(r >> (arity - 1 - k)) & 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BooleanFunction {
    pub arity: u8,
    pub mask: u8,
}

impl BooleanFunction {
    pub fn new(arity: u8, mask: u8) -> Result<Self, CompileError> {
        if !(1..=3).contains(&arity) {
            return Err(CompileError::InvalidFunction(format!("arity {arity} outside 1-3")));
        }
        if mask & !full_mask(arity as usize) != 0 {
            return Err(CompileError::InvalidFunction(format!(
                "mask {mask:#x} wider than {} rows",
                1 << arity
            )));
        }
        Ok(Self { arity, mask })
    }

    pub fn from_fn(arity: u8, f: impl Fn(&[bool]) -> bool) -> Self {
        let n = arity as usize;
        let mask = (0..1usize << n)
            .filter(|&r| f(&(0..n).map(|k| row_bit(r, k, n)).collect::<Vec<_>>()))
            .fold(0u8, |m, r| m | 1 << r);
        Self { arity, mask }
    }

    pub fn projection(arity: u8, input: u8) -> Self {
        Self {
            arity,
            mask: projection_mask(input as usize, arity as usize),
        }
    }

    pub fn constant(arity: u8, value: bool) -> Self {
        Self {
            arity,
            mask: if value { full_mask(arity as usize) } else { 0 },
        }
    }

    /// Decimal code of the truth table.
    pub fn code(&self) -> u8 {
        self.mask
    }

    pub fn eval(&self, inputs: &[bool]) -> bool {
        let row = inputs.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
        self.mask >> row & 1 == 1
    }

    /// All `2^(2^arity)` functions of the given arity.
    pub fn all(arity: u8) -> Vec<Self> {
        (0..=full_mask(arity as usize) as u16)
            .map(|m| Self { arity, mask: m as u8 })
            .collect()
    }
}

impl std::fmt::Display for BooleanFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "f{}[{:#04x}]", self.arity, self.mask)
    }
}

/// Gate entries available to the compiler, in tie-break order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateLibrary {
    pub entries: Vec<GateLibraryEntry>,
}

fn config_rank(c: &CouplingConfig) -> u8 {
    match c {
        CouplingConfig::TwoCell { index } => *index,
        CouplingConfig::ThreeCellFixed => 5,
    }
}

impl GateLibrary {
    /// Keeps one representative per distinct behavior: the entry smallest in
    /// (config, V1, V2). Entries without any readable row are dropped.
    pub fn from_entries(entries: impl IntoIterator<Item = GateLibraryEntry>) -> Self {
        let mut all: Vec<GateLibraryEntry> = entries
            .into_iter()
            .filter(|e| e.defined_rows != 0)
            .map(|mut e| {
                let d = e.defined_rows;
                e.outputs.iter_mut().for_each(|m| *m &= d);
                e
            })
            .collect();
        all.sort_by(|a, b| {
            config_rank(&a.config)
                .cmp(&config_rank(&b.config))
                .then(a.v1.total_cmp(&b.v1))
                .then(a.v2.total_cmp(&b.v2))
        });
        let mut seen = std::collections::HashSet::new();
        all.retain(|e| seen.insert((e.config.clone(), e.outputs.clone(), e.defined_rows)));
        Self { entries: all }
    }

    pub fn from_maps<'a>(maps: impl IntoIterator<Item = &'a OperationMap>) -> Self {
        Self::from_entries(maps.into_iter().flat_map(|m| m.entries.iter().cloned()))
    }

    /// Entries of one topology only.
    pub fn restricted_to(&self, config: &CouplingConfig) -> Self {
        Self {
            entries: self.entries.iter().filter(|e| &e.config == config).cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

const MAX_CELLS: usize = 8;

/// Sorted registry contents packed into one word (one byte per cell).
type Key = u64;

fn pack(vals: &[u8]) -> Key {
    vals.iter().fold(0, |k, &v| k << 8 | v as u64)
}

fn unpack(key: Key, len: usize, out: &mut [u8]) {
    for (i, o) in out[..len].iter_mut().enumerate() {
        *o = (key >> (8 * (len - 1 - i))) as u8;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Move {
    gate: u32,
    /// Canonical positions in the parent state.
    tuple: [u8; 3],
    /// 0: refresh, 1: write 0, 2: write 1, per tuple position.
    post: [u8; 3],
}

#[derive(Debug, Clone, Copy)]
struct Parent {
    key: Key,
    mv: Move,
}

/// Where a function first appeared.
#[derive(Debug, Clone, Copy)]
struct Found {
    depth: usize,
    /// State the last move was applied to (`None` for depth 0).
    from: Option<Key>,
    mv: Option<Move>,
    /// Tuple position holding the function after `mv`, or canonical
    /// position in the initial state.
    slot: usize,
}

struct Gate {
    arity: usize,
    outputs: [u8; 3],
    defined: u8,
}

/// Breadth-first exploration of registry states from one initial registry.
pub struct SearchGraph<'a> {
    library: &'a GateLibrary,
    registry: RegistrySpec,
    n: usize,
    size: usize,
    gates: Vec<Gate>,
    arities: Vec<usize>,
    parents: HashMap<Key, Option<Parent>>,
    frontier: Vec<Key>,
    depth: usize,
    found: HashMap<u8, Found>,
}

impl<'a> SearchGraph<'a> {
    pub fn new(library: &'a GateLibrary, registry: &RegistrySpec) -> Result<Self, CompileError> {
        registry.validate()?;
        if library.is_empty() {
            return Err(CompileError::EmptyLibrary);
        }
        let size = registry.size();
        if size > MAX_CELLS {
            return Err(CompileError::InvalidFunction(format!("registry of {size} cells exceeds {MAX_CELLS}")));
        }
        let gates: Vec<Gate> = library
            .entries
            .iter()
            .map(|e| {
                let mut outputs = [0u8; 3];
                outputs[..e.outputs.len()].copy_from_slice(&e.outputs);
                Gate {
                    arity: e.arity(),
                    outputs,
                    defined: e.defined_rows,
                }
            })
            .collect();
        let mut arities: Vec<usize> = gates.iter().map(|g| g.arity).filter(|&a| a <= size).collect();
        arities.sort_unstable();
        arities.dedup();
        let mut init = registry.initial_masks();
        init.sort_unstable();
        let key = pack(&init);
        let mut found = HashMap::new();
        for (slot, &m) in init.iter().enumerate() {
            found.entry(m).or_insert(Found {
                depth: 0,
                from: None,
                mv: None,
                slot,
            });
        }
        let mut parents = HashMap::new();
        parents.insert(key, None);
        Ok(Self {
            library,
            registry: registry.clone(),
            n: registry.arity as usize,
            size,
            gates,
            arities,
            parents,
            frontier: vec![key],
            depth: 0,
            found,
        })
    }

    /// Registry states stored so far.
    pub fn explored(&self) -> usize {
        self.parents.len()
    }

    /// Depth of the deepest stored layer.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Minimal level count found so far for `mask`.
    pub fn level_of(&self, mask: u8) -> Option<usize> {
        self.found.get(&mask).map(|f| f.depth)
    }

    /// Expands the current frontier by one level. With `store == false` the
    /// new states are only scanned for functions (used for the last level).
    pub fn expand(&mut self, store: bool) {
        let depth = self.depth + 1;
        let frontier = std::mem::take(&mut self.frontier);
        let mut next = Vec::new();
        let mut vals = [0u8; MAX_CELLS];
        let size = self.size;
        for &key in &frontier {
            unpack(key, size, &mut vals);
            for &k in &self.arities.clone() {
                self.for_each_tuple(&vals[..size], k, |this, tuple| {
                    this.expand_tuple(key, &vals[..size], tuple, k, depth, store, &mut next);
                });
            }
        }
        self.frontier = next;
        self.depth = depth;
    }

    /// Ordered tuples of distinct positions, skipping tuples that only differ
    /// by swapping cells with equal contents.
    fn for_each_tuple(&mut self, vals: &[u8], k: usize, mut f: impl FnMut(&mut Self, &[usize])) {
        let size = vals.len();
        let first: Vec<usize> = (0..size).map(|i| vals.iter().position(|&v| v == vals[i]).unwrap()).collect();
        let mut t = [0usize; 3];
        let canonical = |t: &[usize]| {
            t.iter().enumerate().all(|(m, &p)| {
                let same_before = t[..m].iter().filter(|&&q| vals[q] == vals[p]).count();
                p == first[p] + same_before
            })
        };
        match k {
            1 => {
                for i in 0..size {
                    t[0] = i;
                    if canonical(&t[..1]) {
                        f(self, &t[..1]);
                    }
                }
            }
            2 => {
                for i in 0..size {
                    for j in 0..size {
                        if i != j {
                            t[0] = i;
                            t[1] = j;
                            if canonical(&t[..2]) {
                                f(self, &t[..2]);
                            }
                        }
                    }
                }
            }
            3 => {
                for i in 0..size {
                    for j in 0..size {
                        for l in 0..size {
                            if i != j && j != l && i != l {
                                t[0] = i;
                                t[1] = j;
                                t[2] = l;
                                if canonical(&t[..3]) {
                                    f(self, &t[..3]);
                                }
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn expand_tuple(
        &mut self,
        key: Key,
        vals: &[u8],
        tuple: &[usize],
        k: usize,
        depth: usize,
        store: bool,
        next: &mut Vec<Key>,
    ) {
        let n = self.n;
        let rows = 1usize << n;
        let mut idx = [0u8; 8];
        let mut used = 0u8;
        for (r, slot) in idx.iter_mut().enumerate().take(rows) {
            let i = tuple.iter().fold(0u8, |acc, &p| acc << 1 | (vals[p] >> r & 1));
            *slot = i;
            used |= 1 << i;
        }
        let mut outcomes: Vec<([u8; 3], u32)> = Vec::new();
        for (g_id, g) in self.gates.iter().enumerate() {
            if g.arity != k || used & !g.defined != 0 {
                continue;
            }
            let mut out = [0u8; 3];
            for (m, o) in out.iter_mut().enumerate().take(k) {
                for (r, &i) in idx.iter().enumerate().take(rows) {
                    *o |= (g.outputs[m] >> i & 1) << r;
                }
            }
            if !outcomes.iter().any(|(o, _)| *o == out) {
                outcomes.push((out, g_id as u32));
            }
        }
        let mut child = [0u8; MAX_CELLS];
        let full = full_mask(n);
        for (out, g_id) in outcomes {
            let mut t = [0u8; 3];
            for (m, &p) in tuple.iter().enumerate() {
                t[m] = p as u8;
            }
            for (m, &o) in out.iter().enumerate().take(k) {
                self.found.entry(o).or_insert(Found {
                    depth,
                    from: Some(key),
                    mv: Some(Move {
                        gate: g_id,
                        tuple: t,
                        post: [0; 3],
                    }),
                    slot: m,
                });
            }
            if !store {
                continue;
            }
            let combos = 3usize.pow(k as u32);
            for c in 0..combos {
                let mut post = [0u8; 3];
                let mut q = c;
                child[..vals.len()].copy_from_slice(vals);
                for m in 0..k {
                    post[m] = (q % 3) as u8;
                    q /= 3;
                    child[tuple[m]] = match post[m] {
                        0 => out[m],
                        1 => 0,
                        _ => full,
                    };
                }
                let slice = &mut child[..vals.len()];
                slice.sort_unstable();
                let ck = pack(slice);
                if let std::collections::hash_map::Entry::Vacant(e) = self.parents.entry(ck) {
                    e.insert(Some(Parent {
                        key,
                        mv: Move { gate: g_id, tuple: t, post },
                    }));
                    next.push(ck);
                }
            }
        }
    }

    /// Explores until `mask` is found or `max_levels` is reached.
    pub fn search(&mut self, mask: u8, max_levels: usize) -> Option<usize> {
        while self.level_of(mask).is_none() && self.depth < max_levels && !self.frontier.is_empty() {
            let store = self.depth + 1 < max_levels;
            self.expand(store);
        }
        self.level_of(mask)
    }

    /// Rebuilds the schedule that first produced `mask`.
    pub fn schedule_for(&self, mask: u8) -> Option<OperationSchedule> {
        let found = *self.found.get(&mask)?;
        let mut chain: Vec<Move> = Vec::new();
        let mut cursor = found.from;
        while let Some(k) = cursor {
            match self.parents.get(&k)? {
                Some(p) => {
                    chain.push(p.mv);
                    cursor = Some(p.key);
                }
                None => cursor = None,
            }
        }
        chain.reverse();
        let mut phys = self.registry.initial_masks();
        let mut levels = Vec::new();
        let order_of = |phys: &[u8]| {
            let mut order: Vec<usize> = (0..phys.len()).collect();
            order.sort_by_key(|&i| (phys[i], i));
            order
        };
        let mut push_level = |phys: &mut Vec<u8>, mv: &Move, last: bool| -> Vec<usize> {
            let order = order_of(phys);
            let g = &self.gates[mv.gate as usize];
            let e = &self.library.entries[mv.gate as usize];
            let cells: Vec<usize> = mv.tuple[..g.arity].iter().map(|&p| order[p as usize]).collect();
            let ins: Vec<u8> = cells.iter().map(|&c| phys[c]).collect();
            let out = crate::logic::apply_gate(&e.outputs, e.defined_rows, &ins, self.n)
                .expect("search only applies gates on defined rows");
            let mut post = vec![PostStep::None; phys.len()];
            for (m, &c) in cells.iter().enumerate() {
                let p = if last { 0 } else { mv.post[m] };
                post[c] = [PostStep::Refresh, PostStep::Write0, PostStep::Write1][p as usize];
                phys[c] = match p {
                    0 => out[m],
                    1 => 0,
                    _ => full_mask(self.n),
                };
            }
            levels.push(ScheduleLevel {
                config: e.config.clone(),
                v1: e.v1,
                v2: e.v2,
                cells: cells.clone(),
                post,
                gate_outputs: e.outputs.clone(),
                gate_defined_rows: e.defined_rows,
            });
            cells
        };
        for mv in &chain {
            push_level(&mut phys, mv, false);
        }
        let output_cell = match found.mv {
            None => order_of(&phys)[found.slot],
            Some(mv) => push_level(&mut phys, &mv, true)[found.slot],
        };
        debug_assert_eq!(phys[output_cell], mask);
        Some(OperationSchedule {
            registry: self.registry.clone(),
            levels,
            output_cell,
        })
    }

    /// Function masks reached so far with their level counts.
    pub fn levels(&self) -> Vec<(u8, usize)> {
        let mut v: Vec<(u8, usize)> = self.found.iter().map(|(m, f)| (*m, f.depth)).collect();
        v.sort_unstable();
        v
    }
}

/// A schedule realizing a function, with its simulation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompilationResult {
    pub function: BooleanFunction,
    pub schedule: OperationSchedule,
    pub level_count: usize,
    /// Library entries (config, V1, V2) used by each level.
    pub gates: Vec<(CouplingConfig, f64, f64)>,
    pub verified: bool,
    /// Largest total energy over all input rows [fJ].
    pub worst_energy_fj: f64,
}

/// Schedule with no levels whose output is a constant written before the
/// first level, used when the registry does not hold the constant already.
fn constant_schedule(function: BooleanFunction, registry: &RegistrySpec) -> OperationSchedule {
    let value = function.mask != 0;
    let cell = registry
        .cells
        .iter()
        .position(|c| *c == RegistryCell::Const(value));
    match cell {
        Some(c) => OperationSchedule {
            registry: registry.clone(),
            levels: Vec::new(),
            output_cell: c,
        },
        None => {
            let mut reg = registry.clone();
            reg.cells.push(RegistryCell::Const(value));
            OperationSchedule {
                output_cell: reg.cells.len() - 1,
                registry: reg,
                levels: Vec::new(),
            }
        }
    }
}

/// Simulates `schedule` on every input row and compares with `function`.
pub fn verify(ctx: &LogicContext, function: BooleanFunction, schedule: &OperationSchedule) -> Result<(bool, f64), CompileError> {
    match simulate_truth_table(ctx, schedule) {
        Ok((mask, energy)) => Ok((mask == function.mask, energy)),
        Err(LogicError::Unreadable { .. }) => Ok((false, f64::NAN)),
        Err(e) => Err(e.into()),
    }
}

fn result_from(function: BooleanFunction, schedule: OperationSchedule, verified: bool, energy: f64) -> CompilationResult {
    CompilationResult {
        function,
        level_count: schedule.levels.len(),
        gates: schedule.levels.iter().map(|l| (l.config.clone(), l.v1, l.v2)).collect(),
        schedule,
        verified,
        worst_energy_fj: energy,
    }
}

/// Minimal-level schedule for `function` over the whole library, checked by
/// simulation. Constant functions are produced by a write and take no level.
pub fn compile_dynamic(
    ctx: &LogicContext,
    function: BooleanFunction,
    library: &GateLibrary,
    registry: &RegistrySpec,
    max_levels: usize,
) -> Result<CompilationResult, CompileError> {
    if registry.arity != function.arity {
        return Err(CompileError::ArityMismatch {
            registry: registry.arity,
            function: function.arity,
        });
    }
    if function.mask == 0 || function.mask == full_mask(function.arity as usize) {
        let s = constant_schedule(function, registry);
        let (ok, e) = verify(ctx, function, &s)?;
        return Ok(result_from(function, s, ok, e));
    }
    let mut graph = SearchGraph::new(library, registry)?;
    match graph.search(function.mask, max_levels) {
        Some(_) => {
            let schedule = graph.schedule_for(function.mask).expect("found functions have a schedule");
            let (ok, e) = verify(ctx, function, &schedule)?;
            Ok(result_from(function, schedule, ok, e))
        }
        None => Err(CompileError::Unreachable {
            function,
            max_levels,
            explored: graph.explored(),
        }),
    }
}

/// As [`compile_dynamic`], restricted to the fixed three-cell topology.
pub fn compile_fixed(
    ctx: &LogicContext,
    function: BooleanFunction,
    library: &GateLibrary,
    registry: &RegistrySpec,
    max_levels: usize,
) -> Result<CompilationResult, CompileError> {
    let fixed = library.restricted_to(&CouplingConfig::ThreeCellFixed);
    compile_dynamic(ctx, function, &fixed, registry, max_levels)
}

/// True when negating an input is reachable with the library.
pub fn negation_available(library: &GateLibrary, registry: &RegistrySpec, max_levels: usize) -> Result<bool, CompileError> {
    let mut graph = SearchGraph::new(library, registry)?;
    let not_a = full_mask(registry.arity as usize) & !projection_mask(0, registry.arity as usize);
    Ok(graph.search(not_a, max_levels).is_some())
}

/// Minimal level count of every function of the registry's arity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub arity: u8,
    /// Level count per code; `None` if unreachable within `max_levels`.
    pub levels: Vec<Option<usize>>,
    pub max_levels: usize,
    pub explored_states: usize,
}

impl Census {
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.max_levels + 1];
        for l in self.levels.iter().flatten() {
            h[*l] += 1;
        }
        h
    }

    pub fn unreachable(&self) -> Vec<u8> {
        (0..self.levels.len()).filter(|&c| self.levels[c].is_none()).map(|c| c as u8).collect()
    }

    pub fn max_level(&self) -> Option<usize> {
        self.levels.iter().flatten().copied().max()
    }

    /// CSV `code,levels`; unreachable codes have an empty level field.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("code,levels\n");
        for (c, l) in self.levels.iter().enumerate() {
            match l {
                Some(l) => s.push_str(&format!("{c},{l}\n")),
                None => s.push_str(&format!("{c},\n")),
            }
        }
        s
    }
}

/// One shared search from `registry` covering every function at once.
/// Returns the census and the search graph for schedule reconstruction.
pub fn level_census<'a>(
    library: &'a GateLibrary,
    registry: &RegistrySpec,
    max_levels: usize,
) -> Result<(Census, SearchGraph<'a>), CompileError> {
    let mut graph = SearchGraph::new(library, registry)?;
    let total = 1usize << (1 << registry.arity);
    let n = registry.arity as usize;
    let complete = |g: &SearchGraph<'_>| (1..total - 1).all(|m| g.level_of(m as u8).is_some());
    while graph.depth() < max_levels && !complete(&graph) {
        let store = graph.depth() + 1 < max_levels;
        graph.expand(store);
    }
    let levels = (0..total)
        .map(|c| {
            let m = c as u8;
            if m == 0 || m == full_mask(n) {
                Some(0)
            } else {
                graph.level_of(m)
            }
        })
        .collect();
    Ok((
        Census {
            arity: registry.arity,
            levels,
            max_levels,
            explored_states: graph.explored(),
        },
        graph,
    ))
}

/// Level census of all 256 three-input functions on the 5-cell registry.
pub fn three_bit_level_census(library: &GateLibrary, max_levels: usize) -> Result<Census, CompileError> {
    Ok(level_census(library, &RegistrySpec::three_bit(), max_levels)?.0)
}

/// Simulation check of census schedules for the given codes.
pub fn verify_census_sample(
    ctx: &LogicContext,
    graph: &SearchGraph<'_>,
    arity: u8,
    codes: &[u8],
) -> Result<Vec<CompilationResult>, CompileError> {
    codes
        .par_iter()
        .map(|&c| {
            let f = BooleanFunction::new(arity, c)?;
            let schedule = if c == 0 || c == full_mask(arity as usize) {
                constant_schedule(f, &graph.registry)
            } else {
                graph
                    .schedule_for(c)
                    .ok_or(CompileError::Unreachable {
                        function: f,
                        max_levels: graph.depth(),
                        explored: graph.explored(),
                    })?
            };
            let (ok, e) = verify(ctx, f, &schedule)?;
            Ok(result_from(f, schedule, ok, e))
        })
        .collect()
}

/// Throughput model of a DCRAM array against a CPU reading the same bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedupParams {
    pub parallel_bits: f64,
    pub bits_per_cpu_word: f64,
    pub cpu_access_ns: f64,
    pub dcram_levels: f64,
    pub level_ns: f64,
    pub outputs_per_gate: f64,
}

impl Default for SpeedupParams {
    fn default() -> Self {
        Self {
            parallel_bits: 65_536.0,
            bits_per_cpu_word: 64.0,
            cpu_access_ns: 10.0,
            dcram_levels: 4.0,
            level_ns: 5.0,
            outputs_per_gate: 2.0,
        }
    }
}

/// Ratio of DCRAM result bits per ns to CPU bits per ns.
///
/// Every coupled group delivers `outputs_per_gate` results per schedule, so
/// the DCRAM rate is `parallel_bits * outputs_per_gate / (levels * level_ns)`.
pub fn estimate_speedup(p: &SpeedupParams) -> Result<f64, CompileError> {
    let fields = [
        ("parallel_bits", p.parallel_bits),
        ("bits_per_cpu_word", p.bits_per_cpu_word),
        ("cpu_access_ns", p.cpu_access_ns),
        ("dcram_levels", p.dcram_levels),
        ("level_ns", p.level_ns),
        ("outputs_per_gate", p.outputs_per_gate),
    ];
    for (name, v) in fields {
        if !(v > 0.0) || v.is_nan() {
            return Err(CompileError::InvalidFunction(format!("{name} must be positive, got {v}")));
        }
    }
    if p.dcram_levels.is_infinite() || p.level_ns.is_infinite() {
        return Ok(0.0);
    }
    let dcram = p.parallel_bits / (p.dcram_levels * p.level_ns) * p.outputs_per_gate;
    let cpu = p.bits_per_cpu_word / p.cpu_access_ns;
    Ok(dcram / cpu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Region;

    fn entry(config: CouplingConfig, v1: f64, outputs: Vec<u8>, defined: u8) -> GateLibraryEntry {
        GateLibraryEntry {
            region: Region::classify(&outputs, defined),
            config,
            v1,
            v2: -v1,
            outputs,
            defined_rows: defined,
            max_energy_fj: 0.0,
        }
    }

    fn toy_library() -> GateLibrary {
        let c1 = CouplingConfig::TwoCell { index: 1 };
        let c2 = CouplingConfig::TwoCell { index: 2 };
        GateLibrary::from_entries(vec![
            // OR / AND
            entry(c2.clone(), 0.7, vec![0xE, 0x8], 0xF),
            // A + !B / !A + B
            entry(c1.clone(), 0.7, vec![0xD, 0xB], 0xF),
            // duplicate behavior at a larger amplitude
            entry(c2, 0.9, vec![0xE, 0x8], 0xF),
        ])
    }

    #[test]
    fn function_codes() {
        let xnor = BooleanFunction::from_fn(2, |x| x[0] == x[1]);
        assert_eq!(xnor.code(), 0x9);
        assert_eq!(BooleanFunction::projection(3, 0).code(), 0xF0);
        assert!(xnor.eval(&[true, true]));
        assert!(!xnor.eval(&[true, false]));
        assert!(BooleanFunction::new(2, 0x1F).is_err());
        assert_eq!(BooleanFunction::all(2).len(), 16);
        assert_eq!(BooleanFunction::all(3).len(), 256);
    }

    #[test]
    fn library_keeps_first_representative() {
        let lib = toy_library();
        assert_eq!(lib.len(), 2);
        assert_eq!(lib.entries[1].v1, 0.7);
    }

    #[test]
    fn toy_library_is_complete_on_two_bits() {
        let lib = toy_library();
        let (census, graph) = level_census(&lib, &RegistrySpec::two_bit(), 3).unwrap();
        assert!(census.unreachable().is_empty(), "{:?}", census.unreachable());
        assert_eq!(census.levels[0xC], Some(0));
        assert_eq!(census.levels[0x8], Some(1));
        for (mask, _) in graph.levels() {
            let s = graph.schedule_for(mask).unwrap();
            assert_eq!(s.predicted_output(), Some(mask));
        }
    }

    #[test]
    fn positive_unate_library_cannot_negate() {
        let lib = GateLibrary::from_entries(vec![entry(CouplingConfig::TwoCell { index: 2 }, 0.7, vec![0xE, 0x8], 0xF)]);
        assert!(!negation_available(&lib, &RegistrySpec::two_bit(), 4).unwrap());
    }

    #[test]
    fn partial_gate_used_only_on_defined_rows() {
        // Defined only where the first input is 1.
        let lib = GateLibrary::from_entries(vec![entry(CouplingConfig::TwoCell { index: 1 }, 0.7, vec![0x4, 0x8], 0xC)]);
        let (census, _) = level_census(&lib, &RegistrySpec::two_bit(), 2).unwrap();
        // (1, A) feeds rows 2 and 3 only: out0 = !A, out1 = A.
        assert_eq!(census.levels[0x3], Some(1));
        // (A, B) would feed undefined rows.
        assert_eq!(census.levels[0x8], None);
    }

    #[test]
    fn speedup_arithmetic() {
        let p = SpeedupParams::default();
        assert_eq!(estimate_speedup(&p).unwrap(), 1024.0);
        let one = SpeedupParams { outputs_per_gate: 1.0, ..p };
        assert_eq!(estimate_speedup(&one).unwrap(), 512.0);
        let inf = SpeedupParams { dcram_levels: f64::INFINITY, ..p };
        assert_eq!(estimate_speedup(&inf).unwrap(), 0.0);
        assert!(estimate_speedup(&SpeedupParams { cpu_access_ns: 0.0, ..p }).is_err());
    }
}
