//! One function per subcommand. Each echoes its resolved flags to stderr,
//! does the work through the library, writes outputs plus provenance, and
//! prints a short human-readable summary to stdout.

use std::path::{Path, PathBuf};

use gplcp::baseline::{absolute_error_field, compare_fields, lcp_field_dense};
use gplcp::fitting::{fit_sgpr, predict_mean_field, psnr, FitConfig, HyperSearch, InducingSelection};
use gplcp::io::{export_vtk_legacy, read_model, read_volume, write_model, write_volume, RawDtype};
use gplcp::query::{lcp_field_adaptive, QueryStats};
use gplcp::tangle::generate_tangle;
use gplcp::{Error, GridSpec, KernelParams, QueryConfig, Result, SparseGpModel};
use serde::Serialize;

use crate::provenance::{echo_config, sha256_hex, write_provenance, Provenance};
use crate::{dims_parser, iso_list_parser, Dims, IsoList};

fn config_value<T: Serialize>(config: &T) -> serde_json::Value {
    serde_json::to_value(config).expect("flag structs serialize")
}

/// Installs a rayon pool of the requested size for the whole process.
fn apply_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        None => Ok(()),
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}"))),
    }
}

fn write_stats(stats: &QueryStats, out: &Path) -> Result<()> {
    let mut name = out.as_os_str().to_owned();
    name.push(".stats.json");
    std::fs::write(
        PathBuf::from(name),
        serde_json::to_string_pretty(stats).map_err(Error::from)?,
    )?;
    Ok(())
}

fn read_stats(path: &Path) -> Result<QueryStats> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------- gen-tangle

#[derive(clap::Args, Serialize)]
pub struct GenTangleArgs {
    /// Grid points per axis, e.g. 32,32,32.
    #[arg(long, value_parser = dims_parser())]
    dims: Dims,
    /// Output volume base path (writes <out>.json and <out>.raw).
    #[arg(long)]
    out: PathBuf,
}

pub fn gen_tangle(args: &GenTangleArgs) -> Result<()> {
    echo_config("gen-tangle", args);
    let field = generate_tangle(args.dims.0);
    write_volume(&field, &args.out, RawDtype::F32Le)?;
    write_provenance(
        &args.out,
        &Provenance {
            subcommand: "gen-tangle",
            config: config_value(args),
            seed: None,
            model_sha256: None,
        },
    )?;
    let (lo, hi) = field.value_range();
    println!(
        "wrote {} points, values in [{lo:.4}, {hi:.4}]",
        field.values.len()
    );
    Ok(())
}

// ----------------------------------------------------------------------- fit

#[derive(clap::Args, Serialize)]
pub struct FitArgs {
    /// Training volume base path (point-centered).
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of inducing points.
    #[arg(long)]
    inducing: usize,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Fix the kernel lengthscale instead of searching.
    #[arg(long, conflicts_with = "search")]
    lengthscale: Option<f64>,
    /// Fix the kernel variance instead of searching.
    #[arg(long, conflicts_with = "search")]
    variance: Option<f64>,
    /// Fix the noise variance instead of searching.
    #[arg(long, conflicts_with = "search")]
    noise: Option<f64>,
    /// Grid-search hyperparameters on a held-out split (the default when no
    /// fixed values are given).
    #[arg(long)]
    search: bool,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    echo_config("fit", args);
    let training = read_volume(&args.input)?;
    let n = training.values.len() as f64;
    let mean = training.values.iter().sum::<f64>() / n;
    let sample_var = training
        .values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let bounds = training.spec.bounds();
    let extent = (0..3)
        .map(|a| bounds.hi[a] - bounds.lo[a])
        .fold(0.0f64, f64::max);

    let fixed_requested =
        args.lengthscale.is_some() || args.variance.is_some() || args.noise.is_some();
    let hyper = if fixed_requested {
        HyperSearch::Fixed {
            kernel: KernelParams::rbf(
                args.lengthscale.unwrap_or(0.2 * extent),
                args.variance.unwrap_or(sample_var),
            ),
            noise_variance: args.noise.unwrap_or(1e-4 * sample_var),
        }
    } else {
        HyperSearch::Search {
            lengthscales: [0.05, 0.1, 0.2, 0.4, 0.8, 1.2]
                .iter()
                .map(|m| m * extent)
                .collect(),
            variances: [1.0, 4.0, 16.0].iter().map(|m| m * sample_var).collect(),
            noise_variances: [1e-6, 1e-4, 1e-2].iter().map(|m| m * sample_var).collect(),
        }
    };
    let cfg = FitConfig {
        num_inducing: args.inducing,
        selection: InducingSelection::KmeansPositions,
        hyper,
        holdout_fraction: if fixed_requested { 0.0 } else { 0.1 },
    };
    let model = fit_sgpr(&training, &cfg)?;
    write_model(&model, &args.out)?;
    write_provenance(
        &args.out,
        &Provenance {
            subcommand: "fit",
            config: config_value(args),
            seed: None,
            model_sha256: Some(sha256_hex(&args.out)?),
        },
    )?;
    let recon = predict_mean_field(&model, &training.spec)?;
    let db = psnr(&training, &recon)?;
    println!(
        "fit {} inducing points: lengthscale {:.6}, variance {:.6}, noise {:.6e}",
        model.num_inducing(),
        model.kernel.lengthscale,
        model.kernel.variance,
        model.noise_variance
    );
    println!("PSNR: {db:.2} dB");
    Ok(())
}

// -------------------------------------------------------------- predict-mean

#[derive(clap::Args, Serialize)]
pub struct PredictMeanArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Output grid points per axis; the grid covers the model's domain.
    #[arg(long, value_parser = dims_parser())]
    dims: Dims,
    /// Output volume base path.
    #[arg(long)]
    out: PathBuf,
    /// Also export the field as legacy ASCII VTK.
    #[arg(long)]
    vtk: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

pub fn predict_mean(args: &PredictMeanArgs) -> Result<()> {
    echo_config("predict-mean", args);
    apply_threads(args.threads)?;
    let model = read_model(&args.model)?;
    let grid = GridSpec::covering(&model.domain_bounds, args.dims.0);
    let field = predict_mean_field(&model, &grid)?;
    write_volume(&field, &args.out, RawDtype::F32Le)?;
    if let Some(vtk) = &args.vtk {
        export_vtk_legacy(&field, vtk)?;
    }
    write_provenance(
        &args.out,
        &Provenance {
            subcommand: "predict-mean",
            config: config_value(args),
            seed: None,
            model_sha256: Some(sha256_hex(&args.model)?),
        },
    )?;
    let (lo, hi) = field.value_range();
    println!("mean field on {:?}: values in [{lo:.4}, {hi:.4}]", grid.dims);
    Ok(())
}

// --------------------------------------------------------- lcp-dense / -adaptive

#[derive(clap::Args, Serialize)]
pub struct LcpArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Iso-value whose crossing probability is computed.
    #[arg(long, allow_hyphen_values = true)]
    iso: f64,
    /// Grid points per axis; cells are the gaps between them.
    #[arg(long, value_parser = dims_parser())]
    dims: Dims,
    /// Pruning threshold: regions whose crossing bound stays below this are
    /// reported as zero.
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    /// Locality radius in lengthscales for the per-region GP subset.
    #[arg(long, default_value_t = 6.0)]
    beta: f64,
    /// Monte Carlo samples per cell.
    #[arg(long, default_value_t = 1600)]
    mc: u32,
    /// RNG seed; identical seeds give byte-identical volumes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output volume base path.
    #[arg(long)]
    out: PathBuf,
    /// Also export the LCP field as legacy ASCII VTK.
    #[arg(long)]
    vtk: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve_query(model: &SparseGpModel, args: &LcpArgs) -> Result<(GridSpec, QueryConfig)> {
    let grid = GridSpec::covering(&model.domain_bounds, args.dims.0);
    let mut cfg = QueryConfig::for_grid(&grid, args.iso);
    cfg.alpha = args.alpha;
    cfg.beta = args.beta;
    cfg.mc_samples = args.mc;
    cfg.rng_seed = args.seed;
    cfg.validate(&grid)?;
    Ok((grid, cfg))
}

fn finish_lcp(
    subcommand: &'static str,
    args: &LcpArgs,
    field: &gplcp::VolumeField,
    stats: &QueryStats,
) -> Result<()> {
    write_volume(field, &args.out, RawDtype::F32Le)?;
    write_stats(stats, &args.out)?;
    if let Some(vtk) = &args.vtk {
        export_vtk_legacy(field, vtk)?;
    }
    write_provenance(
        &args.out,
        &Provenance {
            subcommand,
            config: config_value(args),
            seed: Some(args.seed),
            model_sha256: Some(sha256_hex(&args.model)?),
        },
    )?;
    println!(
        "{subcommand}: {} cells in {:.3} s (gp {:.3} s, mc {:.3} s), {} nonzero",
        field.values.len(),
        stats.total_seconds(),
        stats.time_gp,
        stats.time_mc,
        field.count_nonzero()
    );
    Ok(())
}

pub fn lcp_dense(args: &LcpArgs) -> Result<()> {
    echo_config("lcp-dense", args);
    apply_threads(args.threads)?;
    let model = read_model(&args.model)?;
    let (grid, cfg) = resolve_query(&model, args)?;
    let (field, stats) = lcp_field_dense(&model, &grid, &cfg)?;
    finish_lcp("lcp-dense", args, &field, &stats)
}

#[derive(clap::Args, Serialize)]
pub struct LcpAdaptiveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    lcp: LcpArgs,
    /// Also write the per-cell refinement depth as a u8 volume.
    #[arg(long)]
    levels_out: Option<PathBuf>,
}

pub fn lcp_adaptive(args: &LcpAdaptiveArgs) -> Result<()> {
    echo_config("lcp-adaptive", args);
    apply_threads(args.lcp.threads)?;
    let model = read_model(&args.lcp.model)?;
    let (grid, cfg) = resolve_query(&model, &args.lcp)?;
    let (field, levels, stats) = lcp_field_adaptive(&model, &grid, &cfg)?;
    if let Some(levels_out) = &args.levels_out {
        write_volume(&levels, levels_out, RawDtype::U8)?;
        write_provenance(
            levels_out,
            &Provenance {
                subcommand: "lcp-adaptive",
                config: config_value(args),
                seed: Some(args.lcp.seed),
                model_sha256: Some(sha256_hex(&args.lcp.model)?),
            },
        )?;
    }
    finish_lcp("lcp-adaptive", &args.lcp, &field, &stats)?;
    println!(
        "octree: {} visited, {} pruned, {} bound evaluations, {} minimizations skipped",
        stats.nodes_visited, stats.nodes_pruned, stats.bound_evaluations, stats.minimizations_skipped
    );
    Ok(())
}

// ------------------------------------------------------------------- compare

#[derive(clap::Args, Serialize)]
pub struct CompareArgs {
    /// Truth volume base path (typically the dense run).
    #[arg(long)]
    truth: PathBuf,
    /// Test volume base path (typically the adaptive run).
    #[arg(long)]
    test: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Absolute-error volume base path; defaults to the report path with
    /// "-abserr" appended.
    #[arg(long)]
    error_out: Option<PathBuf>,
    /// Stats JSON of the truth run, to include a timing breakdown.
    #[arg(long, requires = "test_stats")]
    truth_stats: Option<PathBuf>,
    /// Stats JSON of the test run, to include a timing breakdown.
    #[arg(long, requires = "truth_stats")]
    test_stats: Option<PathBuf>,
}

fn default_error_out(report: &Path) -> PathBuf {
    let mut base = report.to_path_buf();
    base.set_extension("");
    let mut name = base.into_os_string();
    name.push("-abserr");
    PathBuf::from(name)
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    echo_config("compare", args);
    let truth = read_volume(&args.truth)?;
    let test = read_volume(&args.test)?;
    let mut report = compare_fields(&truth, &test)?;
    if let (Some(ts), Some(vs)) = (&args.truth_stats, &args.test_stats) {
        report = report.with_timing(read_stats(ts)?, read_stats(vs)?);
    }
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )?;
    let error_out = args
        .error_out
        .clone()
        .unwrap_or_else(|| default_error_out(&args.out));
    let error_field = absolute_error_field(&truth, &test)?;
    write_volume(&error_field, &error_out, RawDtype::F32Le)?;
    let record = Provenance {
        subcommand: "compare",
        config: config_value(args),
        seed: None,
        model_sha256: None,
    };
    write_provenance(&args.out, &record)?;
    write_provenance(&error_out, &record)?;
    println!(
        "rmse {:.6e}, max abs error {:.6e}, nonzero cells {} truth / {} test",
        report.rmse, report.max_abs_error, report.nonzero_cells_truth, report.nonzero_cells_test
    );
    if let Some(pct) = report.speedup_percent {
        println!("adaptive time is {pct:.1}% of dense");
    }
    Ok(())
}

// --------------------------------------------------------------------- bench

#[derive(clap::Args, Serialize)]
pub struct BenchArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated iso-values to sweep.
    #[arg(long, value_parser = iso_list_parser(), allow_hyphen_values = true,
          default_value = "-2.0,-1.5,-1.0,-0.5,0.0,0.5,1.0,1.5,2.0")]
    iso_list: IsoList,
    /// Grid points per axis for every sweep entry.
    #[arg(long, value_parser = dims_parser(), default_value = "32,32,32")]
    dims: Dims,
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    #[arg(long, default_value_t = 6.0)]
    beta: f64,
    #[arg(long, default_value_t = 1600)]
    mc: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    echo_config("bench", args);
    apply_threads(args.threads)?;
    let model = read_model(&args.model)?;
    let grid = GridSpec::covering(&model.domain_bounds, args.dims.0);
    println!(
        "{:>8} {:>9} {:>9} {:>7} {:>11} {:>11} {:>8} {:>8} {:>9}",
        "theta", "dense_s", "adapt_s", "ratio%", "rmse", "max_err", "visited", "pruned", "leaves"
    );
    for &iso in &args.iso_list.0 {
        let mut cfg = QueryConfig::for_grid(&grid, iso);
        cfg.alpha = args.alpha;
        cfg.beta = args.beta;
        cfg.mc_samples = args.mc;
        cfg.rng_seed = args.seed;
        cfg.validate(&grid)?;
        let (dense_field, dense_stats) = lcp_field_dense(&model, &grid, &cfg)?;
        let (adaptive_field, _, adaptive_stats) = lcp_field_adaptive(&model, &grid, &cfg)?;
        let report =
            compare_fields(&dense_field, &adaptive_field)?.with_timing(dense_stats, adaptive_stats);
        println!(
            "{:>8.2} {:>9.3} {:>9.3} {:>7.1} {:>11.4e} {:>11.4e} {:>8} {:>8} {:>9}",
            iso,
            dense_stats.total_seconds(),
            adaptive_stats.total_seconds(),
            report.speedup_percent.unwrap_or(f64::NAN),
            report.rmse,
            report.max_abs_error,
            adaptive_stats.nodes_visited,
            adaptive_stats.nodes_pruned,
            adaptive_stats.leaf_cells
        );
    }
    Ok(())
}
