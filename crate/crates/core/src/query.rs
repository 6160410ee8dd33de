//! Octree adaptive query: top-down subdivision driven by the inducing-point
//! three-case decision and the regional Slepian bound, with local-subset
//! propagation down the tree and Monte Carlo evaluation of the surviving
//! leaf cells.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound;
use crate::cell_lcp::{derive_cell_seed, mc_crossing_probability, std_normal_cdf, CORNER_OFFSETS};
use crate::corners::{cell_corner_positions, CornerPredictor, CornerSolve};
use crate::error::Result;
use crate::inference::{self, Precomp};
use crate::kernel;
use crate::model::{Aabb, GridSpec, QueryConfig, SparseGpModel, VolumeField, VolumeKind};
use crate::optim;

/// Counters and wall-time breakdown for one field reconstruction.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct QueryStats {
    pub nodes_visited: u64,
    pub nodes_pruned: u64,
    pub bound_evaluations: u64,
    pub minimizations_skipped: u64,
    pub leaf_cells: u64,
    /// Seconds in GP linear algebra: bound evaluations and corner solves.
    pub time_gp: f64,
    /// Seconds assembling cell Gaussians and Monte Carlo sampling.
    pub time_mc: f64,
    /// Remaining wall time: tree bookkeeping, subset filtering, output.
    pub time_overhead: f64,
}

impl QueryStats {
    pub fn total_seconds(&self) -> f64 {
        self.time_gp + self.time_mc + self.time_overhead
    }

    fn absorb(&mut self, o: &QueryStats) {
        self.nodes_visited += o.nodes_visited;
        self.nodes_pruned += o.nodes_pruned;
        self.bound_evaluations += o.bound_evaluations;
        self.minimizations_skipped += o.minimizations_skipped;
        self.leaf_cells += o.leaf_cells;
        self.time_gp += o.time_gp;
        self.time_mc += o.time_mc;
        self.time_overhead += o.time_overhead;
    }
}

/// Cell-centered volume of the octree depth at which each target cell's
/// region was finalized (small integers stored as f64 for uniform IO).
pub type LevelField = VolumeField;

/// One octree node over the target grid. Cell ranges are half-open and
/// already clipped to the grid; the virtual cube only overhangs on the high
/// side, so `cell_lo` is also the node's position in the virtual cube.
#[derive(Debug, Clone)]
pub struct NodeBox {
    /// World-space bounds of the clipped cell range.
    pub bounds: Aabb,
    pub cell_lo: [usize; 3],
    pub cell_hi: [usize; 3],
    pub level: u32,
    /// Inducing points inside `bounds`.
    pub inducing_inside: Vec<usize>,
    /// Inducing points inside `bounds` enlarged by beta times the
    /// lengthscale; always a superset of `inducing_inside`.
    pub local_subset: Vec<usize>,
}

impl NodeBox {
    /// Inclusive count of target grid points covered by the node.
    pub fn grid_point_count(&self) -> u64 {
        (0..3)
            .map(|a| (self.cell_hi[a] - self.cell_lo[a] + 1) as u64)
            .product()
    }
}

/// Largest probability of lying below (p1) and above (p2) the iso-value
/// among the given inducing points, under their marginal posteriors. An
/// empty index set yields (0, 0) so the caller falls through to the bound.
pub fn inducing_point_probabilities(
    model: &SparseGpModel,
    indices: &[usize],
    theta: f64,
) -> (f64, f64) {
    let mut p1 = 0.0f64;
    let mut p2 = 0.0f64;
    for &i in indices {
        let mean = model.inducing_value_mean(i);
        let var = model.inducing_cov[(i, i)].max(0.0);
        let (below, above) = if var == 0.0 {
            // Degenerate marginal: indicator probabilities; a point pinned
            // exactly at theta counts toward both sides.
            if mean == theta {
                (0.5, 0.5)
            } else if mean < theta {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        } else {
            let sd = var.sqrt();
            (
                std_normal_cdf((theta - mean) / sd),
                std_normal_cdf((mean - theta) / sd),
            )
        };
        p1 = p1.max(below);
        p2 = p2.max(above);
    }
    (p1, p2)
}

struct Ctx<'a> {
    model: &'a SparseGpModel,
    grid: &'a GridSpec,
    cfg: &'a QueryConfig,
    cells: [usize; 3],
    radius: f64,
}

#[derive(Default)]
struct Subtree {
    leaves: Vec<usize>,
    /// Finalized regions (cell_lo, cell_hi, level); together they partition
    /// the target grid exactly.
    regions: Vec<([usize; 3], [usize; 3], u32)>,
    stats: QueryStats,
}

impl Subtree {
    fn absorb(&mut self, mut o: Subtree) {
        self.leaves.append(&mut o.leaves);
        self.regions.append(&mut o.regions);
        self.stats.absorb(&o.stats);
    }
}

fn make_children(ctx: &Ctx, node: &NodeBox) -> Vec<NodeBox> {
    let half = (1usize << (ctx.cfg.max_depth - node.level)) / 2;
    let mut out = Vec::with_capacity(8);
    for child in 0..8usize {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for a in 0..3 {
            let vlo = node.cell_lo[a] + ((child >> a) & 1) * half;
            let clip = (vlo + half).min(ctx.cells[a]);
            if vlo >= clip {
                empty = true;
                break;
            }
            lo[a] = vlo;
            hi[a] = clip;
        }
        if empty {
            continue;
        }
        let bounds = Aabb::new(
            ctx.grid.position(lo[0], lo[1], lo[2]),
            ctx.grid.position(hi[0], hi[1], hi[2]),
        );
        let enlarged = bounds.enlarged(ctx.radius);
        let inducing_inside: Vec<usize> = node
            .inducing_inside
            .iter()
            .copied()
            .filter(|&i| bounds.contains(&ctx.model.inducing_positions[i]))
            .collect();
        let local_subset: Vec<usize> = node
            .local_subset
            .iter()
            .copied()
            .filter(|&i| enlarged.contains(&ctx.model.inducing_positions[i]))
            .collect();
        // Filtering the parent's subset must agree with a from-scratch scan
        // (the enlarged child box is contained in the enlarged parent box).
        debug_assert_eq!(
            local_subset,
            bound::select_subset(ctx.model, &bounds, ctx.cfg.beta)
        );
        debug_assert!(inducing_inside.iter().all(|i| local_subset.contains(i)));
        out.push(NodeBox {
            bounds,
            cell_lo: lo,
            cell_hi: hi,
            level: node.level + 1,
            inducing_inside,
            local_subset,
        });
    }
    out
}

fn process_node(ctx: &Ctx, node: NodeBox) -> Result<Subtree> {
    let mut st = Subtree::default();
    st.stats.nodes_visited = 1;
    if node.level >= ctx.cfg.max_depth {
        let idx = ctx
            .grid
            .cell_index(node.cell_lo[0], node.cell_lo[1], node.cell_lo[2]);
        st.leaves.push(idx);
        st.stats.leaf_cells = 1;
        st.regions.push((node.cell_lo, node.cell_hi, node.level));
        return Ok(st);
    }

    let alpha = ctx.cfg.alpha;
    let theta = ctx.cfg.iso_value;
    let (p1, p2) = inducing_point_probabilities(ctx.model, &node.inducing_inside, theta);
    let mut full_runs = 0u64;
    let subdivide = if !node.inducing_inside.is_empty() && p1 > alpha && p2 > alpha {
        // Case 1: likely values on both sides of theta inside the node; the
        // bound would exceed alpha, so subdivide without evaluating it.
        true
    } else {
        // Case 2 (p2 < alpha): only the all-below factor matters; case 3
        // (p1 < alpha): only the all-above factor. Boundary equality and an
        // empty node run both sides.
        let (eval_lower, eval_upper) = if node.inducing_inside.is_empty() {
            (true, true)
        } else {
            debug_assert!(
                !(p1 < alpha && p2 < alpha),
                "p1 and p2 cannot both fall below alpha < 0.5"
            );
            (!(p1 < alpha), !(p2 < alpha))
        };
        st.stats.bound_evaluations = 1;
        let t0 = Instant::now();
        let local = bound::local_gp_from_subset(ctx.model, node.local_subset.clone())?;
        let d = node.grid_point_count();
        // Probe F at the full start schedule first. True minima can only be
        // smaller, so a probe bound already above alpha decides subdivision
        // without running the minimizations.
        let mut bl = f64::INFINITY;
        let mut bu = f64::INFINITY;
        for s in optim::start_points(&node.bounds, optim::SCHEDULE_POINTS) {
            let f = local.f_value(&s, theta)?;
            bl = bl.min(f);
            bu = bu.min(1.0 - f);
        }
        let probe = bound::slepian_bound(
            eval_lower.then_some(bl),
            eval_upper.then_some(bu),
            d,
        );
        let value = if probe > alpha {
            probe
        } else {
            let out = bound::regional_upper_bound_sides(
                &local,
                &node.bounds,
                theta,
                d,
                &ctx.cfg.optimizer,
                eval_lower,
                eval_upper,
            )?;
            full_runs = eval_lower as u64 + eval_upper as u64;
            out.upper_bound
        };
        st.stats.time_gp = t0.elapsed().as_secs_f64();
        value > alpha
    };
    st.stats.minimizations_skipped = 2 - full_runs;

    if !subdivide {
        st.stats.nodes_pruned = 1;
        st.regions.push((node.cell_lo, node.cell_hi, node.level));
        return Ok(st);
    }
    let parts: Vec<Subtree> = make_children(ctx, &node)
        .into_par_iter()
        .map(|c| process_node(ctx, c))
        .collect::<Result<_>>()?;
    for p in parts {
        st.absorb(p);
    }
    Ok(st)
}

/// Runs the adaptive subdivision and returns the surviving leaf cells
/// (sorted flat cell indices), the per-cell finalization depth, and stats.
pub fn octree_query(
    model: &SparseGpModel,
    target: &GridSpec,
    cfg: &QueryConfig,
) -> Result<(Vec<usize>, LevelField, QueryStats)> {
    let t_total = Instant::now();
    target.validate()?;
    cfg.validate(target)?;
    let cells = target.cell_dims();
    let ctx = Ctx {
        model,
        grid: target,
        cfg,
        cells,
        radius: kernel::distance_threshold(&model.kernel, cfg.beta),
    };
    let root_bounds = Aabb::new(
        target.position(0, 0, 0),
        target.position(cells[0], cells[1], cells[2]),
    );
    let root = NodeBox {
        bounds: root_bounds,
        cell_lo: [0; 3],
        cell_hi: cells,
        level: 0,
        inducing_inside: (0..model.num_inducing())
            .filter(|&i| root_bounds.contains(&model.inducing_positions[i]))
            .collect(),
        local_subset: (0..model.num_inducing()).collect(),
    };
    let mut tree = process_node(&ctx, root)?;
    tree.leaves.sort_unstable();
    debug_assert!(tree.leaves.windows(2).all(|w| w[0] < w[1]));
    debug_assert_eq!(tree.leaves.len() as u64, tree.stats.leaf_cells);
    debug_assert!(tree.stats.leaf_cells <= target.cell_count() as u64);

    // Rasterize finalized regions; the sentinel check proves they tile the
    // grid exactly (no overlap, no gap).
    let mut level_field = VolumeField::new(
        *target,
        VolumeKind::CellCentered,
        vec![-1.0; target.cell_count()],
    )?;
    for &(lo, hi, level) in &tree.regions {
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let idx = target.cell_index(i, j, k);
                    assert!(
                        level_field.values[idx] < 0.0,
                        "octree regions overlap at cell ({i}, {j}, {k})"
                    );
                    level_field.values[idx] = level as f64;
                }
            }
        }
    }
    assert!(
        level_field.values.iter().all(|&v| v >= 0.0),
        "octree regions left cells uncovered"
    );

    let mut stats = tree.stats;
    let total = t_total.elapsed().as_secs_f64();
    stats.time_overhead = (total - stats.time_gp - stats.time_mc).max(0.0);
    Ok((tree.leaves, level_field, stats))
}

/// Evaluates the LCP of the given cells (sorted flat indices) into `out`,
/// sharing corner solves between adjacent cells: cells are processed in
/// z-slabs, each corner point of a slab is solved once, and the upper plane
/// is carried over to the next slab when contiguous. Used by both the
/// adaptive and dense paths so matched cells are evaluated bit-identically.
pub(crate) fn evaluate_cells(
    model: &SparseGpModel,
    precomp: &Precomp,
    grid: &GridSpec,
    cfg: &QueryConfig,
    cells: &[usize],
    out: &mut [f64],
    stats: &mut QueryStats,
) -> Result<()> {
    let predictor = CornerPredictor::new(model, precomp);
    let mut lower: HashMap<(usize, usize), CornerSolve> = HashMap::new();
    let mut lower_k = usize::MAX;
    let mut run_start = 0usize;
    while run_start < cells.len() {
        let k = grid.cell_coords(cells[run_start])[2];
        let run_len =
            cells[run_start..].partition_point(|&c| grid.cell_coords(c)[2] == k);
        let run = &cells[run_start..run_start + run_len];

        // Corner footprints of this slab's cells; identical on both planes.
        let mut needed: Vec<(usize, usize)> = run
            .iter()
            .flat_map(|&c| {
                let [i, j, _] = grid.cell_coords(c);
                [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
            })
            .collect();
        needed.sort_unstable();
        needed.dedup();

        let t_gp = Instant::now();
        if lower_k != k {
            lower.clear();
        }
        let missing: Vec<(usize, usize)> = needed
            .iter()
            .copied()
            .filter(|key| !lower.contains_key(key))
            .collect();
        lower.extend(
            missing
                .par_iter()
                .map(|&(i, j)| ((i, j), predictor.solve(&grid.position(i, j, k))))
                .collect::<Vec<_>>(),
        );
        let upper: HashMap<(usize, usize), CornerSolve> = needed
            .par_iter()
            .map(|&(i, j)| ((i, j), predictor.solve(&grid.position(i, j, k + 1))))
            .collect();
        stats.time_gp += t_gp.elapsed().as_secs_f64();

        let t_mc = Instant::now();
        let results: Vec<(usize, f64)> = run
            .par_iter()
            .map(|&cidx| {
                let cell = grid.cell_coords(cidx);
                let positions = cell_corner_positions(grid, cell);
                let solves: [&CornerSolve; 8] = CORNER_OFFSETS.map(|o| {
                    let key = (cell[0] + o[0], cell[1] + o[1]);
                    if o[2] == 0 {
                        &lower[&key]
                    } else {
                        &upper[&key]
                    }
                });
                let gauss = predictor.cell_gaussian(&positions, solves)?;
                let seed = derive_cell_seed(cfg.rng_seed, cidx as u64);
                let p =
                    mc_crossing_probability(&gauss, cfg.iso_value, cfg.mc_samples, seed)?;
                Ok((cidx, p))
            })
            .collect::<Result<_>>()?;
        for (cidx, p) in results {
            out[cidx] = p;
        }
        stats.time_mc += t_mc.elapsed().as_secs_f64();

        lower = upper;
        lower_k = k + 1;
        run_start += run_len;
    }
    Ok(())
}

/// Full adaptive reconstruction: octree query, then Monte Carlo LCP for the
/// leaf cells under the full model. Cells pruned by the octree stay 0.
pub fn lcp_field_adaptive(
    model: &SparseGpModel,
    target: &GridSpec,
    cfg: &QueryConfig,
) -> Result<(VolumeField, LevelField, QueryStats)> {
    let t_total = Instant::now();
    let (leaves, level_field, mut stats) = octree_query(model, target, cfg)?;
    let t0 = Instant::now();
    let precomp = inference::precompute(model)?;
    stats.time_gp += t0.elapsed().as_secs_f64();
    let mut lcp = VolumeField::zeros(*target, VolumeKind::CellCentered);
    evaluate_cells(model, &precomp, target, cfg, &leaves, &mut lcp.values, &mut stats)?;
    let total = t_total.elapsed().as_secs_f64();
    stats.time_overhead = (total - stats.time_gp - stats.time_mc).max(0.0);
    Ok((lcp, level_field, stats))
}
