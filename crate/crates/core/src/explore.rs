//! Synthetic 2D exploration: world generation, noisy scanning, MI surfaces
//! over candidate poses, information-ratio and nearest-frontier planners, and
//! the scan-update-plan-move loop tying them together.

use std::collections::BinaryHeap;
use std::io::Write;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::grid::{GridError, OccupancyGrid2D, Pose};
use crate::mi::{
    self, approx_fsmi, compute_ck_masked, compute_pe, csqmi_approx, fsmi, uniform_fsmi, BeamView,
    MiError, MiTables,
};
use crate::sensor::SensorModel;

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("world must be at least 32x32 cells, got {0}x{1}")]
    WorldTooSmall(usize, usize),
    #[error("failed to generate a connected world within {0} attempts")]
    RetryBudgetExhausted(usize),
    #[error("pose ({0}, {1}) lies in an occupied cell")]
    PoseOccupied(f64, f64),
    #[error("pose ({0}, {1}) outside the world")]
    PoseOutside(f64, f64),
    #[error("unknown algorithm tag `{0}`")]
    UnknownAlgorithm(String),
    #[error("start cell is not believed free")]
    StartBlocked,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Mi(#[from] MiError),
}

/// Ground-truth boolean occupancy world used to synthesize measurements.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub width_cells: usize,
    pub height_cells: usize,
    pub resolution: f64,
    pub seed: u64,
    occupied: Vec<bool>,
}

impl SyntheticWorld {
    #[inline]
    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width_cells + cx
    }

    #[inline]
    pub fn is_occupied(&self, cx: usize, cy: usize) -> bool {
        self.occupied[self.index(cx, cy)]
    }

    pub fn occupied_cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.width_cells as f64 * self.resolution,
            self.height_cells as f64 * self.resolution,
        )
    }

    /// Free cell closest to the world center; the canonical start pose.
    pub fn center_free_pose(&self) -> Pose {
        let (cx0, cy0) = (self.width_cells / 2, self.height_cells / 2);
        let mut best = (usize::MAX, cx0, cy0);
        for cy in 1..self.height_cells - 1 {
            for cx in 1..self.width_cells - 1 {
                if !self.is_occupied(cx, cy) {
                    let d = cx.abs_diff(cx0).pow(2) + cy.abs_diff(cy0).pow(2);
                    if d < best.0 {
                        best = (d, cx, cy);
                    }
                }
            }
        }
        Pose::new(
            (best.1 as f64 + 0.5) * self.resolution,
            (best.2 as f64 + 0.5) * self.resolution,
            0.0,
        )
    }

    pub fn free_cells_connected(&self) -> bool {
        let n = self.occupied.len();
        let free_total = self.occupied.iter().filter(|&&o| !o).count();
        if free_total == 0 {
            return false;
        }
        let start = self.occupied.iter().position(|&o| !o).unwrap();
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 0usize;
        while let Some(idx) = stack.pop() {
            reached += 1;
            let (cx, cy) = (idx % self.width_cells, idx / self.width_cells);
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                if nx < 0
                    || ny < 0
                    || nx >= self.width_cells as i64
                    || ny >= self.height_cells as i64
                {
                    continue;
                }
                let ni = self.index(nx as usize, ny as usize);
                if !self.occupied[ni] && !seen[ni] {
                    seen[ni] = true;
                    stack.push(ni);
                }
            }
        }
        reached == free_total
    }
}

/// Deterministic bordered world with rectangular room walls (with door gaps)
/// and scattered block obstacles; free space is guaranteed connected, with a
/// bounded number of seed perturbations if a draw disconnects it.
pub fn generate_world(
    seed: u64,
    size_m: f64,
    resolution: f64,
    obstacle_density: f64,
    room_count: usize,
) -> Result<SyntheticWorld, ExploreError> {
    let cells = (size_m / resolution).round() as usize;
    if cells < 32 {
        return Err(ExploreError::WorldTooSmall(cells, cells));
    }
    const MAX_ATTEMPTS: usize = 32;
    for attempt in 0..MAX_ATTEMPTS {
        let world_seed = seed.wrapping_add(1_000_003u64.wrapping_mul(attempt as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(world_seed);
        let mut occ = vec![false; cells * cells];
        for i in 0..cells {
            occ[i] = true; // bottom border
            occ[(cells - 1) * cells + i] = true; // top
            occ[i * cells] = true; // left
            occ[i * cells + cells - 1] = true; // right
        }

        for _ in 0..room_count {
            let w = rng.random_range(cells / 8..cells / 3);
            let h = rng.random_range(cells / 8..cells / 3);
            let x0 = rng.random_range(2..cells - w - 2);
            let y0 = rng.random_range(2..cells - h - 2);
            let door_side = rng.random_range(0..4u8);
            let door_at = rng.random_range(1..w.min(h).saturating_sub(3).max(2));
            let door_width = 3usize;
            for i in 0..w {
                for (side, cy) in [(0u8, y0), (1, y0 + h - 1)] {
                    if door_side == side && i >= door_at && i < door_at + door_width {
                        continue;
                    }
                    occ[cy * cells + x0 + i] = true;
                }
            }
            for j in 0..h {
                for (side, cx) in [(2u8, x0), (3, x0 + w - 1)] {
                    if door_side == side && j >= door_at && j < door_at + door_width {
                        continue;
                    }
                    occ[(y0 + j) * cells + cx] = true;
                }
            }
        }

        let block_budget = (obstacle_density * (cells * cells) as f64 / 9.0) as usize;
        for _ in 0..block_budget {
            let bw = rng.random_range(1..=3usize);
            let bh = rng.random_range(1..=3usize);
            let x0 = rng.random_range(1..cells - bw - 1);
            let y0 = rng.random_range(1..cells - bh - 1);
            for dy in 0..bh {
                for dx in 0..bw {
                    occ[(y0 + dy) * cells + x0 + dx] = true;
                }
            }
        }

        let world = SyntheticWorld {
            width_cells: cells,
            height_cells: cells,
            resolution,
            seed: world_seed,
            occupied: occ,
        };
        if world.free_cells_connected() {
            return Ok(world);
        }
    }
    Err(ExploreError::RetryBudgetExhausted(MAX_ATTEMPTS))
}

/// One simulated omnidirectional scan: evenly spaced beam angles and noisy
/// measured ranges, clipped to the sensor's limits.
#[derive(Debug, Clone)]
pub struct Scan {
    pub pose: Pose,
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
}

/// True range along a ray through the boolean world: the entry distance of
/// the first occupied cell, or `max_range`.
pub fn cast_true_range(world: &SyntheticWorld, pose: Pose, angle: f64, max_range: f64) -> f64 {
    let res = world.resolution;
    let (dx, dy) = (angle.cos(), angle.sin());
    let (mut cx, mut cy) = (
        ((pose.x / res) as usize).min(world.width_cells - 1),
        ((pose.y / res) as usize).min(world.height_cells - 1),
    );
    if world.is_occupied(cx, cy) {
        return 0.0;
    }
    let (step_x, mut line_x) = if dx > 0.0 {
        (1i64, cx as i64 + 1)
    } else {
        (-1, cx as i64)
    };
    let (step_y, mut line_y) = if dy > 0.0 {
        (1i64, cy as i64 + 1)
    } else {
        (-1, cy as i64)
    };
    loop {
        let tx = if dx == 0.0 {
            f64::INFINITY
        } else {
            (line_x as f64 * res - pose.x) / dx
        };
        let ty = if dy == 0.0 {
            f64::INFINITY
        } else {
            (line_y as f64 * res - pose.y) / dy
        };
        let t = tx.min(ty);
        if t >= max_range {
            return max_range;
        }
        let tie = 1e-12 * (t + res);
        let (mut ncx, mut ncy) = (cx as i64, cy as i64);
        if tx <= t + tie {
            ncx += step_x;
            line_x += step_x;
        }
        if ty <= t + tie {
            ncy += step_y;
            line_y += step_y;
        }
        if ncx < 0 || ncy < 0 || ncx >= world.width_cells as i64 || ncy >= world.height_cells as i64
        {
            return t.min(max_range);
        }
        cx = ncx as usize;
        cy = ncy as usize;
        if world.is_occupied(cx, cy) {
            return t;
        }
    }
}

/// Simulate a scan of `n_beams` evenly spaced beams with additive Gaussian
/// range noise, deterministic for a given noise rng.
pub fn simulate_scan(
    world: &SyntheticWorld,
    pose: Pose,
    sensor: &SensorModel,
    n_beams: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Scan, ExploreError> {
    let (ex, ey) = world.extent();
    if !(pose.x >= 0.0 && pose.x < ex && pose.y >= 0.0 && pose.y < ey) {
        return Err(ExploreError::PoseOutside(pose.x, pose.y));
    }
    let (cx, cy) = (
        (pose.x / world.resolution) as usize,
        (pose.y / world.resolution) as usize,
    );
    if world.is_occupied(cx, cy) {
        return Err(ExploreError::PoseOccupied(pose.x, pose.y));
    }
    let mut angles = Vec::with_capacity(n_beams);
    let mut ranges = Vec::with_capacity(n_beams);
    for b in 0..n_beams {
        let angle = pose.theta + b as f64 * std::f64::consts::TAU / n_beams as f64;
        let truth = cast_true_range(world, pose, angle, sensor.max_range);
        let noisy = truth + sensor.sigma * gaussian_sample(rng);
        angles.push(angle);
        ranges.push(noisy.clamp(0.0, sensor.max_range));
    }
    Ok(Scan {
        pose,
        angles,
        ranges,
    })
}

/// Standard normal draw via Box-Muller; two uniforms per sample keeps the
/// stream layout simple and reproducible.
pub fn gaussian_sample(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Which per-beam MI kernel a surface or planner runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiAlgorithm {
    Fsmi,
    ApproxFsmi { delta: u32 },
    UniformFsmi { h: u32 },
    CsqmiApprox { delta: u32 },
}

impl MiAlgorithm {
    /// Resolve a CLI tag; `delta`/`h` supply the variant parameters.
    pub fn from_tag(tag: &str, delta: u32, h: u32) -> Result<Self, ExploreError> {
        match tag {
            "fsmi" => Ok(Self::Fsmi),
            "approx_fsmi" => Ok(Self::ApproxFsmi { delta }),
            "uniform_fsmi" => Ok(Self::UniformFsmi { h }),
            "csqmi_approx" => Ok(Self::CsqmiApprox { delta }),
            other => Err(ExploreError::UnknownAlgorithm(other.to_string())),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Fsmi => "fsmi",
            Self::ApproxFsmi { .. } => "approx_fsmi",
            Self::UniformFsmi { .. } => "uniform_fsmi",
            Self::CsqmiApprox { .. } => "csqmi_approx",
        }
    }
}

/// MI of one resampled beam under the chosen algorithm.
pub fn beam_mi(
    grid: &OccupancyGrid2D,
    pose: Pose,
    angle: f64,
    sensor: &SensorModel,
    tables: &MiTables,
    algo: MiAlgorithm,
) -> Result<f64, MiError> {
    let beam = BeamView::resample(grid, pose, angle, sensor.max_range)?;
    let v = match algo {
        MiAlgorithm::Fsmi => fsmi(&beam, sensor, tables)?.mi,
        MiAlgorithm::ApproxFsmi { delta } => approx_fsmi(&beam, sensor, tables, delta)?.mi,
        MiAlgorithm::UniformFsmi { h } => uniform_fsmi(&beam, sensor, tables, h)?.mi,
        MiAlgorithm::CsqmiApprox { delta } => csqmi_approx(&beam, sensor, delta)?.mi,
    };
    Ok(v)
}

/// Scan MI at one pose: sum of per-beam MI over an evenly spaced fan.
pub fn scan_mi(
    grid: &OccupancyGrid2D,
    pose: Pose,
    sensor: &SensorModel,
    tables: &MiTables,
    algo: MiAlgorithm,
    n_beams: usize,
) -> Result<f64, MiError> {
    let mut total = 0.0;
    for b in 0..n_beams {
        let angle = pose.theta + b as f64 * std::f64::consts::TAU / n_beams as f64;
        total += beam_mi(grid, pose, angle, sensor, tables, algo)?;
    }
    Ok(total)
}

/// Per-pose scan MI over a candidate set. Candidate evaluations are
/// independent reads of the grid and run in parallel when the `parallel`
/// feature is enabled.
pub fn mi_surface(
    grid: &OccupancyGrid2D,
    sensor: &SensorModel,
    tables: &MiTables,
    candidates: &[Pose],
    algo: MiAlgorithm,
    n_beams: usize,
) -> Result<Vec<f64>, MiError> {
    #[cfg(feature = "parallel")]
    {
        candidates
            .par_iter()
            .map(|&p| scan_mi(grid, p, sensor, tables, algo, n_beams))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        mi_surface_seq(grid, sensor, tables, candidates, algo, n_beams)
    }
}

/// Sequential fallback of [`mi_surface`]; always available so benchmarks can
/// compare the two directly.
pub fn mi_surface_seq(
    grid: &OccupancyGrid2D,
    sensor: &SensorModel,
    tables: &MiTables,
    candidates: &[Pose],
    algo: MiAlgorithm,
    n_beams: usize,
) -> Result<Vec<f64>, MiError> {
    candidates
        .iter()
        .map(|&p| scan_mi(grid, p, sensor, tables, algo, n_beams))
        .collect()
}

/// Occupancy below which a cell is considered traversable free space.
pub const TRAVERSABLE_MAX_O: f64 = 0.3;
/// Cells within this band of 0.5 are treated as unknown for frontier tests.
pub const UNKNOWN_BAND: f64 = 0.05;
/// Spacing of MI evaluation poses along a candidate path.
pub const PATH_MI_INTERVAL_M: f64 = 0.2;

/// Belief-classification thresholds used by the planners.
#[derive(Debug, Clone, Copy)]
pub struct PlannerParams {
    /// Occupancy below which a cell counts as traversable free space.
    pub traversable_max_o: f64,
    /// Half-width of the occupancy band around 0.5 treated as unknown.
    pub unknown_band: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            traversable_max_o: TRAVERSABLE_MAX_O,
            unknown_band: UNKNOWN_BAND,
        }
    }
}

/// Total-ordered reversed f64 for the min-heap.
mod ordered {
    #[derive(PartialEq)]
    pub struct Rev(pub f64);
    impl Eq for Rev {}
    impl PartialOrd for Rev {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Rev {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other.0.total_cmp(&self.0)
        }
    }
}

/// Dijkstra over traversable cells, 8-connected with metric edge costs.
/// Returns per-cell distance (infinity when unreachable) and predecessors.
fn dijkstra(grid: &OccupancyGrid2D, start: usize, params: &PlannerParams) -> (Vec<f64>, Vec<usize>) {
    let (w, h) = (grid.width_cells, grid.height_cells);
    let n = w * h;
    let res = grid.resolution;
    let diag = res * std::f64::consts::SQRT_2;
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap: BinaryHeap<(ordered::Rev, usize)> = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push((ordered::Rev(0.0), start));
    let cells = grid.cells();
    while let Some((ordered::Rev(d), idx)) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let (cx, cy) = (idx % w, idx / w);
        for (dx, dy) in [
            (1i64, 0i64),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ] {
            let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let ni = ny as usize * w + nx as usize;
            if cells[ni] >= params.traversable_max_o {
                continue;
            }
            let cost = if dx != 0 && dy != 0 { diag } else { res };
            let nd = d + cost;
            if nd < dist[ni] {
                dist[ni] = nd;
                prev[ni] = idx;
                heap.push((ordered::Rev(nd), ni));
            }
        }
    }
    (dist, prev)
}

fn reconstruct_path(prev: &[usize], goal: usize) -> Vec<usize> {
    let mut path = vec![goal];
    let mut cur = goal;
    while prev[cur] != usize::MAX {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Frontier cells: believed-free cells 8-adjacent to an unknown cell.
pub fn frontier_cells(grid: &OccupancyGrid2D, params: &PlannerParams) -> Vec<usize> {
    let (w, h) = (grid.width_cells, grid.height_cells);
    let cells = grid.cells();
    let mut out = Vec::new();
    for cy in 0..h {
        for cx in 0..w {
            let idx = cy * w + cx;
            if cells[idx] >= params.traversable_max_o {
                continue;
            }
            let mut adjacent_unknown = false;
            'scan: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if (cells[ny as usize * w + nx as usize] - 0.5).abs() < params.unknown_band {
                        adjacent_unknown = true;
                        break 'scan;
                    }
                }
            }
            if adjacent_unknown {
                out.push(idx);
            }
        }
    }
    out
}

/// 8-connected clusters of frontier cells, each sorted ascending.
pub fn frontier_clusters(grid: &OccupancyGrid2D, params: &PlannerParams) -> Vec<Vec<usize>> {
    let frontier = frontier_cells(grid, params);
    let w = grid.width_cells;
    let set: std::collections::HashSet<usize> = frontier.iter().copied().collect();
    let mut seen: std::collections::HashSet<usize> = std::collections::HashSet::new();
    let mut clusters = Vec::new();
    for &start in &frontier {
        if seen.contains(&start) {
            continue;
        }
        let mut cluster = Vec::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(idx) = stack.pop() {
            cluster.push(idx);
            let (cx, cy) = (idx % w, idx / w);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 {
                        continue;
                    }
                    let ni = ny as usize * w + nx as usize;
                    if set.contains(&ni) && seen.insert(ni) {
                        stack.push(ni);
                    }
                }
            }
        }
        cluster.sort_unstable();
        clusters.push(cluster);
    }
    clusters
}

/// A planned motion: goal cell, path as cell indices from start, and metric
/// length.
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub goal: usize,
    pub path: Vec<usize>,
    pub length_m: f64,
    /// Objective the planner maximized (MI/length for the information
    /// planner, negative distance for the frontier planner).
    pub score: f64,
    /// Prefix of the path worth physically executing: where the accumulated
    /// MI profile reaches 90% of the path total. A scanning robot collects
    /// the information before arriving, so the remaining leg adds nothing.
    pub useful_len_m: f64,
    /// Beams evaluated and nanoseconds spent in MI kernels while planning.
    pub mi_beams: u64,
    pub mi_eval_ns: u64,
}

fn pose_of_cell(grid: &OccupancyGrid2D, idx: usize) -> Pose {
    let (cx, cy) = (idx % grid.width_cells, idx / grid.width_cells);
    Pose::new(
        (cx as f64 + 0.5) * grid.resolution,
        (cy as f64 + 0.5) * grid.resolution,
        0.0,
    )
}

/// Cap on candidate goals per information-planning round.
const MAX_CANDIDATES: usize = 24;

/// Information-ratio planner: Dijkstra paths to sampled frontier-adjacent
/// goals, ranked by path MI (accumulated at fixed intervals with counted
/// cells masked) divided by path length. Returns `None` when no reachable
/// frontier remains.
pub fn plan_information_path(
    grid: &OccupancyGrid2D,
    sensor: &SensorModel,
    tables: &MiTables,
    start: Pose,
    algo: MiAlgorithm,
    n_beams: usize,
    params: &PlannerParams,
) -> Result<Option<PlanResult>, ExploreError> {
    if !grid.contains_point(start.x, start.y) {
        return Err(ExploreError::PoseOutside(start.x, start.y));
    }
    let (scx, scy) = grid.cell_at(start.x, start.y);
    let start_idx = grid.index(scx, scy);
    if grid.cells()[start_idx] >= params.traversable_max_o {
        return Err(ExploreError::StartBlocked);
    }
    let (dist, prev) = dijkstra(grid, start_idx, params);

    // one goal candidate per frontier cluster (its centroid-nearest reachable
    // cell), largest clusters first when there are too many
    let mut clusters = frontier_clusters(grid, params);
    clusters.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let mut candidates = Vec::new();
    for cluster in &clusters {
        if candidates.len() >= MAX_CANDIDATES {
            break;
        }
        if let Some(goal) = centroid_nearest_reachable(grid, cluster, &dist, start_idx) {
            candidates.push(goal);
        }
    }
    if candidates.is_empty() {
        return Ok(None);
    }

    struct Scored {
        goal: usize,
        ratio: f64,
        length: f64,
        useful_len: f64,
        path: Vec<usize>,
        beams: u64,
        ns: u64,
    }
    let evaluate = |&goal: &usize| -> Result<Scored, ExploreError> {
        let path = reconstruct_path(&prev, goal);
        let length = dist[goal].max(grid.resolution);
        let mut marked = vec![false; grid.cells().len()];
        let mut beams = 0u64;
        let clock = Instant::now();
        // MI sampled along the path at fixed spacing, masking counted cells;
        // the running profile records where the information is collected
        let stride_cells = (PATH_MI_INTERVAL_M / grid.resolution).round().max(1.0) as usize;
        let mut samples: Vec<(usize, f64)> = Vec::new(); // (path index, length there)
        let mut walked = 0.0;
        for (i, w) in path.windows(2).enumerate() {
            if i % stride_cells == 0 {
                samples.push((i, walked));
            }
            let diag = (w[1] % grid.width_cells != w[0] % grid.width_cells)
                && (w[1] / grid.width_cells != w[0] / grid.width_cells);
            walked += if diag {
                grid.resolution * std::f64::consts::SQRT_2
            } else {
                grid.resolution
            };
        }
        samples.push((path.len() - 1, walked));
        let mut profile: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
        let mut path_mi = 0.0;
        for &(idx, len_here) in &samples {
            let pose = pose_of_cell(grid, path[idx]);
            path_mi += masked_scan_mi(grid, pose, sensor, tables, algo, n_beams, &mut marked)?;
            beams += n_beams as u64;
            profile.push((len_here, path_mi));
        }
        let mut useful_len = walked;
        for &(len_here, mi_here) in &profile {
            if mi_here >= 0.9 * path_mi {
                useful_len = len_here;
                break;
            }
        }
        Ok(Scored {
            goal,
            ratio: path_mi / length,
            length,
            useful_len: useful_len.max(grid.resolution),
            path,
            beams,
            ns: clock.elapsed().as_nanos() as u64,
        })
    };

    #[cfg(feature = "parallel")]
    let evaluated: Vec<Scored> = candidates
        .par_iter()
        .map(evaluate)
        .collect::<Result<_, _>>()?;
    #[cfg(not(feature = "parallel"))]
    let evaluated: Vec<Scored> = candidates.iter().map(evaluate).collect::<Result<_, _>>()?;

    // argmax of the ratio; ties resolve toward the lowest cell index
    let mut best: Option<&Scored> = None;
    for cand in &evaluated {
        best = match best {
            None => Some(cand),
            Some(b) if cand.ratio > b.ratio || (cand.ratio == b.ratio && cand.goal < b.goal) => {
                Some(cand)
            }
            Some(b) => Some(b),
        };
    }
    let total_beams: u64 = evaluated.iter().map(|c| c.beams).sum();
    let total_ns: u64 = evaluated.iter().map(|c| c.ns).sum();
    let b = best.unwrap();
    Ok(Some(PlanResult {
        goal: b.goal,
        path: b.path.clone(),
        length_m: b.length,
        score: b.ratio,
        useful_len_m: b.useful_len,
        mi_beams: total_beams,
        mi_eval_ns: total_ns,
    }))
}

/// Scan MI with per-cell double-count masking: cells already counted in this
/// planning round contribute no information terms (their occlusion still
/// attenuates deeper cells). Marks every cell the scan's beams cover.
fn masked_scan_mi(
    grid: &OccupancyGrid2D,
    pose: Pose,
    sensor: &SensorModel,
    tables: &MiTables,
    algo: MiAlgorithm,
    n_beams: usize,
    marked: &mut [bool],
) -> Result<f64, ExploreError> {
    let mut total = 0.0;
    let mut scan_cells: Vec<usize> = Vec::new();
    for b in 0..n_beams {
        let angle = pose.theta + b as f64 * std::f64::consts::TAU / n_beams as f64;
        let (beam, cells) = BeamView::resample_with_cells(grid, pose, angle, sensor.max_range)?;
        let mask: Vec<bool> = cells.iter().map(|&c| marked[c]).collect();
        let pe = compute_pe(&beam);
        let c = compute_ck_masked(&beam, &tables.f, &mask);
        match algo {
            MiAlgorithm::UniformFsmi { h } => {
                // prefix-window sum, mirroring the unmasked uniform evaluation
                let n = beam.len();
                let h = h as usize;
                let mut d = vec![0.0; n + 1];
                for k in 1..=n {
                    d[k] = d[k - 1] + c[k];
                }
                let mut acc = 0.0;
                for j in 0..=n {
                    let hi = (j + h).min(n);
                    let lo = j.saturating_sub(h + 1);
                    acc += pe.p[j] * (d[hi] - d[lo]);
                }
                total += acc / (2.0 * h as f64 + 1.0);
            }
            MiAlgorithm::Fsmi => {
                let (v, _) = mi::fsmi_windowed(&beam, sensor, tables, beam.len(), &pe, &c);
                total += v;
            }
            MiAlgorithm::ApproxFsmi { delta } => {
                let (v, _) = mi::fsmi_windowed(&beam, sensor, tables, delta as usize, &pe, &c);
                total += v;
            }
            MiAlgorithm::CsqmiApprox { delta } => {
                // CSQMI has no per-cell information decomposition; masking
                // instead snaps counted cells to their certain value, which
                // kills their contribution while preserving occlusion
                let eps = grid.clamp_eps;
                let occ_masked: Vec<f64> = beam
                    .occupancies
                    .iter()
                    .zip(&mask)
                    .map(|(&o, &m)| {
                        if !m {
                            o
                        } else if o < 0.5 {
                            eps
                        } else {
                            1.0 - eps
                        }
                    })
                    .collect();
                let w = beam.strict_uniform_width().unwrap_or(grid.resolution);
                let masked_beam = BeamView::uniform(occ_masked, w)?;
                total += csqmi_approx(&masked_beam, sensor, delta)?.mi;
            }
        }
        scan_cells.extend(cells);
    }
    for c in scan_cells {
        marked[c] = true;
    }
    Ok(total)
}

/// Centroid-nearest reachable member of a frontier cluster.
fn centroid_nearest_reachable(
    grid: &OccupancyGrid2D,
    cluster: &[usize],
    dist: &[f64],
    start_idx: usize,
) -> Option<usize> {
    let (mut mx, mut my) = (0.0, 0.0);
    for &c in cluster {
        mx += (c % grid.width_cells) as f64;
        my += (c / grid.width_cells) as f64;
    }
    mx /= cluster.len() as f64;
    my /= cluster.len() as f64;
    cluster
        .iter()
        .copied()
        .filter(|&c| dist[c].is_finite() && c != start_idx)
        .min_by(|&a, &b| {
            let da = ((a % grid.width_cells) as f64 - mx).powi(2)
                + ((a / grid.width_cells) as f64 - my).powi(2);
            let db = ((b % grid.width_cells) as f64 - mx).powi(2)
                + ((b / grid.width_cells) as f64 - my).powi(2);
            da.total_cmp(&db).then(a.cmp(&b))
        })
}

/// Nearest-frontier planner: goal is the centroid-nearest reachable cell of
/// the cluster closest by Dijkstra distance. Returns `None` on completion.
pub fn plan_nearest_frontier(
    grid: &OccupancyGrid2D,
    start: Pose,
    params: &PlannerParams,
) -> Result<Option<PlanResult>, ExploreError> {
    if !grid.contains_point(start.x, start.y) {
        return Err(ExploreError::PoseOutside(start.x, start.y));
    }
    let (scx, scy) = grid.cell_at(start.x, start.y);
    let start_idx = grid.index(scx, scy);
    if grid.cells()[start_idx] >= params.traversable_max_o {
        return Err(ExploreError::StartBlocked);
    }
    let (dist, prev) = dijkstra(grid, start_idx, params);
    let clusters = frontier_clusters(grid, params);
    let mut best_cluster: Option<(f64, &Vec<usize>)> = None;
    for cluster in &clusters {
        let d = cluster
            .iter()
            .map(|&c| dist[c])
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            best_cluster = match best_cluster {
                None => Some((d, cluster)),
                Some((bd, _)) if d < bd => Some((d, cluster)),
                keep => keep,
            };
        }
    }
    let Some((_, cluster)) = best_cluster else {
        return Ok(None);
    };
    let Some(goal) = centroid_nearest_reachable(grid, cluster, &dist, start_idx) else {
        return Ok(None);
    };
    let path = reconstruct_path(&prev, goal);
    Ok(Some(PlanResult {
        goal,
        length_m: dist[goal],
        score: -dist[goal],
        useful_len_m: dist[goal],
        path,
        mi_beams: 0,
        mi_eval_ns: 0,
    }))
}

/// Which planner drives an exploration run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planner {
    NearestFrontier,
    Information(MiAlgorithm),
}

impl Planner {
    pub fn tag(&self) -> String {
        match self {
            Self::NearestFrontier => "frontier".to_string(),
            Self::Information(a) => format!("info_{}", a.tag()),
        }
    }
}

/// Exploration configuration knobs with the defaults used by the experiment
/// harness.
#[derive(Debug, Clone, Copy)]
pub struct ExploreConfig {
    pub n_beams: usize,
    /// Stop once a step reduces map entropy by less than this many nats.
    pub entropy_stop_delta: f64,
    pub max_steps: usize,
    pub noise_seed: u64,
    pub params: PlannerParams,
    /// Execute at most this much of a planned path before replanning.
    /// Unbounded by default: the robot commits to each chosen goal, which
    /// keeps the nearest-frontier ordering stable between rounds.
    pub horizon_m: f64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            n_beams: 180,
            entropy_stop_delta: 0.5,
            max_steps: 200,
            noise_seed: 7,
            params: PlannerParams::default(),
            horizon_m: f64::INFINITY,
        }
    }
}

/// One exploration step as logged.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub pose: Pose,
    pub goal: Option<usize>,
    pub path_len_m: f64,
    pub entropy_nats: f64,
}

/// Full record of an exploration run.
#[derive(Debug, Clone)]
pub struct ExplorationLog {
    pub planner: String,
    pub steps: Vec<StepRecord>,
    pub total_path_m: f64,
    pub final_entropy: f64,
    pub termination: String,
    pub mi_beams: u64,
    pub mi_eval_ns: u64,
}

impl ExplorationLog {
    /// Mean microseconds per MI beam evaluation during planning.
    pub fn us_per_beam(&self) -> f64 {
        if self.mi_beams == 0 {
            0.0
        } else {
            self.mi_eval_ns as f64 / 1e3 / self.mi_beams as f64
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W, grid_width: usize, resolution: f64) -> std::io::Result<()> {
        writeln!(w, "step,x,y,goal_x,goal_y,path_len_m,entropy_nats")?;
        for s in &self.steps {
            let (gx, gy) = match s.goal {
                Some(g) => (
                    (g % grid_width) as f64 * resolution,
                    (g / grid_width) as f64 * resolution,
                ),
                None => (f64::NAN, f64::NAN),
            };
            writeln!(
                w,
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.6}",
                s.step, s.pose.x, s.pose.y, gx, gy, s.path_len_m, s.entropy_nats
            )?;
        }
        Ok(())
    }
}

/// Scan, update, plan, move until the entropy reduction per step falls below
/// the configured threshold (or steps run out, or no frontier remains).
/// Deterministic for fixed world and noise seeds.
pub fn run_exploration(
    world: &SyntheticWorld,
    sensor: &SensorModel,
    tables: &MiTables,
    planner: Planner,
    config: &ExploreConfig,
) -> Result<ExplorationLog, ExploreError> {
    let mut grid = OccupancyGrid2D::new(
        world.width_cells,
        world.height_cells,
        world.resolution,
        0.5,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
    let mut pose = world.center_free_pose();
    let mut steps = Vec::new();
    let mut total_path = 0.0;
    let mut mi_beams = 0u64;
    let mut mi_eval_ns = 0u64;
    let mut entropy_prev = grid.entropy();
    let mut termination = "max_steps".to_string();
    // convergence is judged over a fixed window of scans so that short
    // replanning rounds through already-mapped space do not masquerade as
    // the end of exploration
    const STOP_WINDOW_SCANS: usize = 60;
    let mut window_scans = 0usize;
    let mut window_entropy_start = entropy_prev;

    if config.max_steps == 0 {
        return Ok(ExplorationLog {
            planner: planner.tag(),
            steps: vec![StepRecord {
                step: 0,
                pose,
                goal: None,
                path_len_m: 0.0,
                entropy_nats: entropy_prev,
            }],
            total_path_m: 0.0,
            final_entropy: entropy_prev,
            termination,
            mi_beams: 0,
            mi_eval_ns: 0,
        });
    }

    let scan_update = |grid: &mut OccupancyGrid2D,
                           pose: Pose,
                           rng: &mut ChaCha8Rng|
     -> Result<(), ExploreError> {
        let scan = simulate_scan(world, pose, sensor, config.n_beams, rng)?;
        for (&angle, &range) in scan.angles.iter().zip(&scan.ranges) {
            let ray = grid.ray_trace(pose, angle, sensor.max_range)?;
            grid.bayes_update(&ray, range, sensor)?;
        }
        // footprint clearing: the robot standing in a cell is direct evidence
        // it is free, overriding noisy near-zero returns
        let (pcx, pcy) = grid.cell_at(pose.x, pose.y);
        let o_here = grid.get(pcx, pcy);
        grid.set(pcx, pcy, o_here.min(0.5 * config.params.traversable_max_o));
        Ok(())
    };
    let interval_cells =
        ((PATH_MI_INTERVAL_M / world.resolution).round() as usize).max(1);

    for step in 0..config.max_steps {
        scan_update(&mut grid, pose, &mut rng)?;
        let mut scans_this_round = 1usize;

        let plan = match planner {
            Planner::NearestFrontier => plan_nearest_frontier(&grid, pose, &config.params)?,
            Planner::Information(algo) => plan_information_path(
                &grid,
                sensor,
                tables,
                pose,
                algo,
                config.n_beams,
                &config.params,
            )?,
        };

        // follow the plan through the true world, scanning at the same
        // interval the planner assumed and stopping short of any cell that
        // turns out to be occupied (the belief at a frontier can be wrong)
        let mut traveled = 0.0;
        let mut reached: Option<usize> = None;
        if let Some(p) = &plan {
            mi_beams += p.mi_beams;
            mi_eval_ns += p.mi_eval_ns;
            let cap = config.horizon_m.min(p.useful_len_m);
            let mut cur = p.path[0];
            for (i, &next) in p.path[1..].iter().enumerate() {
                if traveled >= cap {
                    break;
                }
                let (nx, ny) = (next % world.width_cells, next / world.width_cells);
                if world.is_occupied(nx, ny) {
                    break;
                }
                let diag = (next % world.width_cells != cur % world.width_cells)
                    && (next / world.width_cells != cur / world.width_cells);
                traveled += if diag {
                    world.resolution * std::f64::consts::SQRT_2
                } else {
                    world.resolution
                };
                cur = next;
                if (i + 1) % interval_cells == 0 && i + 2 < p.path.len() {
                    let here = pose_of_cell(&grid, cur);
                    scan_update(&mut grid, here, &mut rng)?;
                    scans_this_round += 1;
                }
            }
            reached = Some(cur);
        }

        let entropy_now = grid.entropy();
        entropy_prev = entropy_now;
        steps.push(StepRecord {
            step,
            pose,
            goal: plan.as_ref().map(|p| p.goal),
            path_len_m: traveled,
            entropy_nats: entropy_now,
        });

        let Some(cell) = reached else {
            termination = "no_frontier".into();
            break;
        };
        total_path += traveled;
        pose = pose_of_cell(&grid, cell);

        window_scans += scans_this_round;
        if window_scans >= STOP_WINDOW_SCANS {
            let rate = (window_entropy_start - entropy_now) / window_scans as f64;
            if rate < config.entropy_stop_delta {
                termination = "entropy_converged".into();
                break;
            }
            window_scans = 0;
            window_entropy_start = entropy_now;
        }
    }

    Ok(ExplorationLog {
        planner: planner.tag(),
        steps,
        total_path_m: total_path,
        final_entropy: entropy_prev,
        termination,
        mi_beams,
        mi_eval_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CLAMP_EPS;
    use crate::sensor::NoiseKind;

    fn sensor() -> SensorModel {
        SensorModel::new(0.05, 1.5, 5.0, NoiseKind::Gaussian).unwrap()
    }

    /// Exploration-grade inverse model: one pass moves a cell out of the
    /// unknown band, so frontiers form after the first scan.
    fn explore_sensor() -> SensorModel {
        SensorModel::new(0.05, 3.0, 5.0, NoiseKind::Gaussian).unwrap()
    }

    fn tables(s: &SensorModel) -> MiTables {
        MiTables::build(s, CLAMP_EPS).unwrap()
    }

    #[test]
    fn world_determinism() {
        let a = generate_world(42, 10.0, 0.1, 0.02, 2).unwrap();
        let b = generate_world(42, 10.0, 0.1, 0.02, 2).unwrap();
        assert_eq!(a.occupied, b.occupied);
    }

    #[test]
    fn world_empty_arena() {
        let w = generate_world(1, 6.4, 0.1, 0.0, 0).unwrap();
        let interior_occupied = (1..63)
            .flat_map(|cy| (1..63).map(move |cx| (cx, cy)))
            .filter(|&(cx, cy)| w.is_occupied(cx, cy))
            .count();
        assert_eq!(interior_occupied, 0);
        assert!(w.is_occupied(0, 0));
        assert!(w.is_occupied(63, 63));
    }

    #[test]
    fn world_rejects_tiny() {
        assert!(generate_world(1, 1.0, 0.1, 0.0, 0).is_err());
    }

    #[test]
    fn world_free_space_connected_many_seeds() {
        for seed in 0..25 {
            let w = generate_world(seed, 8.0, 0.1, 0.05, 2).unwrap();
            assert!(w.free_cells_connected(), "seed={seed}");
        }
    }

    #[test]
    fn scan_zero_noise_exact_ranges() {
        let world = generate_world(3, 6.4, 0.1, 0.0, 0).unwrap();
        let mut s = sensor();
        s.sigma = 1e-300; // effectively noiseless while keeping the model valid
        let pose = world.center_free_pose();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = simulate_scan(&world, pose, &s, 8, &mut rng).unwrap();
        // beam straight +x: the border ring starts at x = 6.3, capped at 5 m
        assert!((scan.ranges[0] - (6.3 - pose.x).min(5.0)).abs() < 1e-9);
    }

    #[test]
    fn scan_caps_at_max_range() {
        let world = generate_world(5, 30.0, 0.1, 0.0, 0).unwrap();
        let mut s = sensor();
        s.sigma = 1e-300;
        let pose = world.center_free_pose();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = simulate_scan(&world, pose, &s, 4, &mut rng).unwrap();
        assert!(scan.ranges.iter().all(|&r| (r - 5.0).abs() < 1e-12));
    }

    #[test]
    fn scan_rejects_occupied_pose() {
        let world = generate_world(3, 6.4, 0.1, 0.0, 0).unwrap();
        let s = sensor();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            simulate_scan(&world, Pose::new(0.05, 0.05, 0.0), &s, 4, &mut rng),
            Err(ExploreError::PoseOccupied(_, _))
        ));
    }

    #[test]
    fn gaussian_noise_passes_ks_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000usize;
        let mut draws: Vec<f64> = (0..n).map(|_| gaussian_sample(&mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let mut d_stat = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let cdf = crate::sensor::normal_cdf(x);
            let hi = ((i + 1) as f64 / n as f64 - cdf).abs();
            let lo = (cdf - i as f64 / n as f64).abs();
            d_stat = d_stat.max(hi.max(lo));
        }
        // critical value at significance 0.01: 1.628 / sqrt(n)
        let crit = 1.628 / (n as f64).sqrt();
        assert!(d_stat < crit, "KS statistic {d_stat} vs {crit}");
    }

    #[test]
    fn mi_surface_zero_on_known_map() {
        let mut grid = OccupancyGrid2D::new(40, 40, 0.1, 0.5).unwrap();
        for cy in 0..40 {
            for cx in 0..40 {
                grid.set(cx, cy, CLAMP_EPS);
            }
        }
        let s = sensor();
        let t = tables(&s);
        let poses = vec![Pose::new(2.0, 2.0, 0.0), Pose::new(1.0, 3.0, 0.0)];
        let algo = MiAlgorithm::ApproxFsmi { delta: 3 };
        let vals = mi_surface(&grid, &s, &t, &poses, algo, 16).unwrap();
        assert!(vals.iter().all(|&v| v.abs() < 1e-3), "{vals:?}");
    }

    #[test]
    fn mi_surface_interior_beats_corner_on_prior_map() {
        let grid = OccupancyGrid2D::new(60, 60, 0.1, 0.5).unwrap();
        let s = sensor();
        let t = tables(&s);
        let poses = vec![Pose::new(3.0, 3.0, 0.0), Pose::new(0.3, 0.3, 0.0)];
        for algo in [
            MiAlgorithm::Fsmi,
            MiAlgorithm::ApproxFsmi { delta: 3 },
            MiAlgorithm::UniformFsmi { h: 0 },
            MiAlgorithm::CsqmiApprox { delta: 3 },
        ] {
            let vals = mi_surface(&grid, &s, &t, &poses, algo, 24).unwrap();
            assert!(vals[0] > vals[1], "{algo:?}: {vals:?}");
        }
    }

    #[test]
    fn mi_surface_parallel_matches_sequential() {
        let grid = OccupancyGrid2D::new(50, 50, 0.1, 0.5).unwrap();
        let s = sensor();
        let t = tables(&s);
        let poses: Vec<Pose> = (0..9)
            .map(|i| Pose::new(1.0 + 0.3 * i as f64, 2.0, 0.0))
            .collect();
        let algo = MiAlgorithm::ApproxFsmi { delta: 3 };
        let par = mi_surface(&grid, &s, &t, &poses, algo, 12).unwrap();
        let seq = mi_surface_seq(&grid, &s, &t, &poses, algo, 12).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn algorithm_tag_round_trip() {
        assert!(MiAlgorithm::from_tag("fsmi", 3, 0).is_ok());
        assert!(MiAlgorithm::from_tag("approx_fsmi", 3, 0).is_ok());
        assert!(MiAlgorithm::from_tag("uniform_fsmi", 3, 2).is_ok());
        assert!(MiAlgorithm::from_tag("csqmi_approx", 3, 0).is_ok());
        assert!(matches!(
            MiAlgorithm::from_tag("magic", 3, 0),
            Err(ExploreError::UnknownAlgorithm(_))
        ));
    }

    /// Belief grid with a scanned-free disk around the center, unknown
    /// elsewhere: the canonical state right after a first scan.
    fn half_explored_grid() -> OccupancyGrid2D {
        let mut g = OccupancyGrid2D::new(50, 50, 0.1, 0.5).unwrap();
        for cy in 0..50 {
            for cx in 0..50 {
                let d = ((cx as f64 - 25.0).powi(2) + (cy as f64 - 25.0).powi(2)).sqrt();
                if d < 10.0 {
                    g.set(cx, cy, 0.01);
                } else if d < 11.0 {
                    g.set(cx, cy, 0.9);
                }
            }
        }
        // open a corridor in the ring so frontier cells exist
        for cy in 20..30 {
            for cx in 33..40 {
                g.set(cx, cy, 0.01);
            }
        }
        g
    }

    #[test]
    fn frontier_detection_and_clustering() {
        let g = half_explored_grid();
        let params = PlannerParams::default();
        let cells = frontier_cells(&g, &params);
        assert!(!cells.is_empty());
        let clusters = frontier_clusters(&g, &params);
        let total: usize = clusters.iter().map(Vec::len).sum();
        assert_eq!(total, cells.len());
        // brute-force connected components must agree with the cluster count
        let mut remaining: std::collections::HashSet<usize> = cells.iter().copied().collect();
        let mut cc = 0;
        let w = g.width_cells as i64;
        while let Some(&seed) = remaining.iter().next() {
            cc += 1;
            let mut stack = vec![seed];
            remaining.remove(&seed);
            while let Some(c) = stack.pop() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let ni = c as i64 + dy * w + dx;
                        if ni >= 0 && remaining.contains(&(ni as usize)) {
                            // guard wrap-around on the row edges
                            let (cx, nx) = (c as i64 % w, ni % w);
                            if (cx - nx).abs() <= 1 {
                                remaining.remove(&(ni as usize));
                                stack.push(ni as usize);
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(clusters.len(), cc);
    }

    #[test]
    fn frontier_planner_completion_on_known_map() {
        let mut g = OccupancyGrid2D::new(40, 40, 0.1, 0.5).unwrap();
        for cy in 0..40 {
            for cx in 0..40 {
                g.set(cx, cy, CLAMP_EPS);
            }
        }
        let plan = plan_nearest_frontier(&g, Pose::new(2.0, 2.0, 0.0), &PlannerParams::default())
            .unwrap();
        assert!(plan.is_none());
    }

    #[test]
    fn frontier_planner_reaches_nearest_cluster() {
        let g = half_explored_grid();
        let plan = plan_nearest_frontier(&g, Pose::new(2.5, 2.5, 0.0), &PlannerParams::default())
            .unwrap()
            .expect("frontier exists");
        assert!(plan.length_m > 0.0);
        assert!(!plan.path.is_empty());
        // every path cell is believed free
        for &c in &plan.path {
            assert!(g.cells()[c] < PlannerParams::default().traversable_max_o);
        }
    }

    #[test]
    fn info_planner_single_candidate_returned() {
        let s = sensor();
        let t = tables(&s);
        let mut g = OccupancyGrid2D::new(40, 40, 0.1, 0.5).unwrap();
        for cy in 0..40 {
            for cx in 0..40 {
                g.set(cx, cy, CLAMP_EPS);
            }
        }
        // one unknown pocket adjacent to free space
        g.set(30, 30, 0.5);
        let plan = plan_information_path(
            &g,
            &s,
            &t,
            Pose::new(2.0, 2.0, 0.0),
            MiAlgorithm::ApproxFsmi { delta: 3 },
            16,
            &PlannerParams::default(),
        )
        .unwrap()
        .expect("one candidate reachable");
        // goal must be adjacent to the pocket
        let (gx, gy) = (plan.goal % 40, plan.goal / 40);
        assert!(gx.abs_diff(30) <= 1 && gy.abs_diff(30) <= 1);
    }

    #[test]
    fn info_planner_ratio_matches_recomputation() {
        let s = sensor();
        let t = tables(&s);
        let g = half_explored_grid();
        let algo = MiAlgorithm::ApproxFsmi { delta: 3 };
        let plan = plan_information_path(
            &g,
            &s,
            &t,
            Pose::new(2.5, 2.5, 0.0),
            algo,
            36,
            &PlannerParams::default(),
        )
        .unwrap()
        .expect("candidates exist");
        // independent second pass over the returned path
        let mut marked = vec![false; g.cells().len()];
        let stride = (PATH_MI_INTERVAL_M / g.resolution).round() as usize;
        let mut samples: Vec<usize> = plan.path.iter().copied().step_by(stride).collect();
        if samples.last() != Some(&plan.goal) {
            samples.push(plan.goal);
        }
        let mut mi = 0.0;
        for &cell in &samples {
            let pose = pose_of_cell(&g, cell);
            mi += masked_scan_mi(&g, pose, &s, &t, algo, 36, &mut marked).unwrap();
        }
        let ratio = mi / plan.length_m.max(g.resolution);
        assert!(
            (ratio - plan.score).abs() < 1e-9 * plan.score.abs().max(1.0),
            "{ratio} vs {}",
            plan.score
        );
    }

    #[test]
    fn exploration_deterministic_and_terminates() {
        let world = generate_world(11, 6.4, 0.1, 0.02, 1).unwrap();
        let s = explore_sensor();
        let t = tables(&s);
        let config = ExploreConfig {
            n_beams: 60,
            entropy_stop_delta: 0.5,
            max_steps: 40,
            noise_seed: 5,
            ..Default::default()
        };
        let a = run_exploration(&world, &s, &t, Planner::NearestFrontier, &config).unwrap();
        let b = run_exploration(&world, &s, &t, Planner::NearestFrontier, &config).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a, 64, 0.1).unwrap();
        b.write_csv(&mut csv_b, 64, 0.1).unwrap();
        assert_eq!(csv_a, csv_b);
        // meaningful progress: entropy dropped well below the uniform prior
        let h0 = 64.0 * 64.0 * std::f64::consts::LN_2;
        assert!(a.final_entropy < h0 - 100.0, "final {}", a.final_entropy);
        assert!(a.steps.len() > 1);
    }

    #[test]
    fn exploration_first_scan_reduces_entropy() {
        let world = generate_world(13, 6.4, 0.1, 0.0, 0).unwrap();
        let s = explore_sensor();
        let t = tables(&s);
        let config = ExploreConfig {
            n_beams: 90,
            entropy_stop_delta: 0.5,
            max_steps: 1,
            noise_seed: 3,
            ..Default::default()
        };
        let log = run_exploration(&world, &s, &t, Planner::NearestFrontier, &config).unwrap();
        let h0 = 64.0 * 64.0 * std::f64::consts::LN_2;
        assert!(log.steps[0].entropy_nats < h0 - 0.5);
    }

    #[test]
    fn exploration_max_steps_zero() {
        let world = generate_world(17, 6.4, 0.1, 0.0, 0).unwrap();
        let s = explore_sensor();
        let t = tables(&s);
        let config = ExploreConfig {
            max_steps: 0,
            ..Default::default()
        };
        let log = run_exploration(&world, &s, &t, Planner::NearestFrontier, &config).unwrap();
        assert_eq!(log.steps.len(), 1);
        let h0 = 64.0 * 64.0 * std::f64::consts::LN_2;
        assert!((log.steps[0].entropy_nats - h0).abs() < 1e-9);
    }
}
