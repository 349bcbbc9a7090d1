//! Command-line benchmark and experiment harness: per-beam MI benchmarks,
//! run-length-encoding speedup tables, exploration comparisons, and MI
//! surface images.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fsmi::explore::{generate_world, run_exploration, ExploreConfig, MiAlgorithm, Planner};
use fsmi::grid::{OccupancyGrid2D, Pose, CLAMP_EPS};
use fsmi::mi::{
    approx_fsmi, csqmi_approx, csqmi_exact, fsmi, fsmi_pdf_kernel, smi_baseline, smi_reference,
    uniform_fsmi, BeamView, MiTables,
};
use fsmi::rle::{rle_compress, approx_fsmi_rle, quantize, RleTables, DEFAULT_O_RES};
use fsmi::sensor::{NoiseKind, SensorModel};

const BUILD_ID: &str = concat!(
    env!("CARGO_PKG_NAME"),
    " ",
    env!("CARGO_PKG_VERSION"),
    " (",
    env!("GIT_DESCRIBE"),
    ")"
);

#[derive(Parser)]
#[command(name = "fsmi", version, about = "Shannon MI benchmark and exploration harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time and validate the per-beam MI algorithms on random beams
    BenchBeam(CommonArgs),
    /// Compare the truncated evaluation on raw vs run-length-encoded beams
    BenchRle(BenchRleArgs),
    /// Run exploration with each requested planner over a seed list
    Explore(ExploreArgs),
    /// Render a per-cell MI heat map for a grid stored as PGM
    MiSurface(MiSurfaceArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Plain-text key=value config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gaussian range noise std-dev in meters
    #[arg(long)]
    sigma: Option<f64>,
    /// Odds multiplier for the hit cell (the empty multiplier is its inverse)
    #[arg(long)]
    delta_occ: Option<f64>,
    /// Grid cell size in meters
    #[arg(long)]
    resolution: Option<f64>,
    /// Beam length in meters
    #[arg(long)]
    beam_length: Option<f64>,
    /// Integration step of the timed numerical-integration baseline, meters
    #[arg(long)]
    lambda_z: Option<f64>,
    /// Integration step of the ground-truth reference, meters
    #[arg(long)]
    truth_step: Option<f64>,
    /// Gaussian truncation width in cells
    #[arg(long)]
    trunc: Option<u32>,
    /// Uniform noise half-width in cells (default: variance-matched to sigma)
    #[arg(long)]
    uniform_h: Option<u32>,
    /// Base random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions (timed beam evaluations per algorithm)
    #[arg(long)]
    reps: Option<usize>,
    /// Beams used for the accuracy columns
    #[arg(long)]
    err_samples: Option<usize>,
    /// Comma-separated algorithm list
    #[arg(long)]
    algos: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fully resolved benchmark configuration (defaults mirror the single-beam
/// experiment setup: 10 m beam, 0.1 m cells, sigma 0.05 m, delta_occ 1.5).
#[derive(Debug, Clone)]
struct BenchConfig {
    sigma: f64,
    delta_occ: f64,
    resolution: f64,
    beam_length: f64,
    lambda_z: f64,
    truth_step: f64,
    trunc: u32,
    uniform_h: u32,
    seed: u64,
    reps: usize,
    err_samples: usize,
    algos: Vec<String>,
    out: PathBuf,
}

fn read_kv_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {} is not key=value: {line}", lineno + 1);
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn merge<T: std::str::FromStr>(
    flag: Option<T>,
    file: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| anyhow::anyhow!("config key {key}={raw}: {e}")),
        None => Ok(default),
    }
}

impl CommonArgs {
    fn resolve(&self) -> Result<BenchConfig> {
        let file = match &self.config {
            Some(p) => read_kv_file(p)?,
            None => HashMap::new(),
        };
        let algos_raw = match &self.algos {
            Some(a) => a.clone(),
            None => file
                .get("algos")
                .cloned()
                .unwrap_or_else(|| {
                    "smi,fsmi,approx_fsmi,uniform_fsmi,csqmi_exact,csqmi_approx".to_string()
                }),
        };
        let cfg = BenchConfig {
            sigma: merge(self.sigma, &file, "sigma", 0.05)?,
            delta_occ: merge(self.delta_occ, &file, "delta_occ", 1.5)?,
            resolution: merge(self.resolution, &file, "resolution", 0.1)?,
            beam_length: merge(self.beam_length, &file, "beam_length", 10.0)?,
            lambda_z: merge(self.lambda_z, &file, "lambda_z", 0.01)?,
            truth_step: merge(self.truth_step, &file, "truth_step", 1e-5)?,
            trunc: merge(self.trunc, &file, "trunc", 3)?,
            uniform_h: merge(
                self.uniform_h,
                &file,
                "uniform_h",
                fsmi::sensor::gaussian_to_uniform_h(
                    merge(self.sigma, &file, "sigma", 0.05)?,
                    merge(self.resolution, &file, "resolution", 0.1)?,
                ),
            )?,
            seed: merge(self.seed, &file, "seed", 1)?,
            reps: merge(self.reps, &file, "reps", 500)?,
            err_samples: merge(self.err_samples, &file, "err_samples", 200)?,
            algos: algos_raw.split(',').map(|s| s.trim().to_string()).collect(),
            out: merge(self.out.clone(), &file, "out", PathBuf::from("out"))?,
        };
        if cfg.reps < 1 {
            bail!("reps must be >= 1");
        }
        for v in [cfg.sigma, cfg.resolution, cfg.beam_length, cfg.lambda_z, cfg.truth_step] {
            if !(v > 0.0) {
                bail!("all physical parameters must be positive");
            }
        }
        Ok(cfg)
    }

    fn echo(&self, cfg: &BenchConfig) -> Vec<String> {
        vec![
            format!("sigma={}", cfg.sigma),
            format!("delta_occ={}", cfg.delta_occ),
            format!("resolution={}", cfg.resolution),
            format!("beam_length={}", cfg.beam_length),
            format!("lambda_z={}", cfg.lambda_z),
            format!("truth_step={}", cfg.truth_step),
            format!("trunc={}", cfg.trunc),
            format!("uniform_h={}", cfg.uniform_h),
            format!("seed={}", cfg.seed),
            format!("reps={}", cfg.reps),
            format!("err_samples={}", cfg.err_samples),
            format!("algos={}", cfg.algos.join(",")),
        ]
    }
}

fn csv_writer(path: &Path, command: &str, echo: &[String], header: &str) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# build: {BUILD_ID}")?;
    writeln!(w, "# command: {command}")?;
    for line in echo {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{header}")?;
    Ok(w)
}

fn mean_and_p50(mut ns: Vec<u64>) -> (f64, u64) {
    let mean = ns.iter().sum::<u64>() as f64 / ns.len() as f64;
    ns.sort_unstable();
    (mean, ns[ns.len() / 2])
}

fn random_beam(rng: &mut ChaCha8Rng, n: usize, width: f64) -> BeamView {
    let occ: Vec<f64> = (0..n)
        .map(|_| rng.random_range(CLAMP_EPS..(1.0 - CLAMP_EPS)))
        .collect();
    BeamView::uniform(occ, width).expect("valid random beam")
}

fn cmd_bench_beam(args: &CommonArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let sensor = SensorModel::new(cfg.sigma, cfg.delta_occ, cfg.beam_length, NoiseKind::Gaussian)?;
    let tables = MiTables::build(&sensor, CLAMP_EPS)?;
    let n = (cfg.beam_length / cfg.resolution).round() as usize;
    let warmup = 32.min(cfg.reps);

    // fixed beam pool shared by all algorithms
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let beams: Vec<BeamView> = (0..cfg.reps.max(cfg.err_samples))
        .map(|_| random_beam(&mut rng, n, cfg.resolution))
        .collect();
    let err_count = cfg.err_samples.min(beams.len());
    eprintln!("computing ground truth on {err_count} beams at step {}", cfg.truth_step);
    let truth: Vec<f64> = beams[..err_count]
        .iter()
        .map(|b| smi_reference(b, &sensor, cfg.truth_step))
        .collect::<Result<_, _>>()?;

    let path = cfg.out.join("bench_beam.csv");
    let mut w = csv_writer(
        &path,
        "bench-beam",
        &args.echo(&cfg),
        "algorithm,n,mean_ns,p50_ns,rel_err_mean,mults",
    )?;

    for algo in &cfg.algos {
        let eval = |beam: &BeamView| -> Result<(f64, u64)> {
            Ok(match algo.as_str() {
                "smi" => (smi_baseline(beam, &sensor, cfg.lambda_z)?, 0),
                "fsmi" => {
                    let b = fsmi(beam, &sensor, &tables)?;
                    (b.mi, b.multiplications)
                }
                "approx_fsmi" => {
                    let b = approx_fsmi(beam, &sensor, &tables, cfg.trunc)?;
                    (b.mi, b.multiplications)
                }
                "uniform_fsmi" => {
                    let b = uniform_fsmi(beam, &sensor, &tables, cfg.uniform_h)?;
                    (b.mi, b.multiplications)
                }
                "csqmi_exact" => {
                    let b = csqmi_exact(beam, &sensor)?;
                    (b.mi, b.multiplications)
                }
                "csqmi_approx" => {
                    let b = csqmi_approx(beam, &sensor, cfg.trunc)?;
                    (b.mi, b.multiplications)
                }
                other => bail!("unknown algorithm `{other}`"),
            })
        };

        for beam in beams.iter().take(warmup) {
            let _ = eval(beam)?;
        }
        let mut ns = Vec::with_capacity(cfg.reps);
        let mut mults = 0u64;
        for i in 0..cfg.reps {
            let beam = &beams[i % beams.len()];
            let t0 = Instant::now();
            let (_, m) = eval(beam)?;
            ns.push(t0.elapsed().as_nanos() as u64);
            mults = m;
        }
        let (mean_ns, p50_ns) = mean_and_p50(ns);

        let mut err_sum = 0.0;
        for (beam, &truth_v) in beams[..err_count].iter().zip(&truth) {
            let (v, _) = eval(beam)?;
            // CSQMI is a different functional; its error column is relative
            // to itself at full precision and reported as NaN against the
            // Shannon ground truth
            if algo.starts_with("csqmi") {
                err_sum = f64::NAN;
                break;
            }
            err_sum += (v - truth_v).abs() / truth_v.abs();
        }
        let rel_err = err_sum / err_count as f64;
        writeln!(
            w,
            "{algo},{n},{mean_ns:.1},{p50_ns},{rel_err:.3e},{mults}"
        )?;
        eprintln!("{algo}: mean {mean_ns:.0} ns, p50 {p50_ns} ns, rel_err {rel_err:.3e}");
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Args)]
struct BenchRleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated homogeneous group lengths; each must divide n
    #[arg(long, default_value = "1,2,4,8,16,32,64,128")]
    l_list: String,
    /// Number of virtual cells per synthetic beam
    #[arg(long, default_value_t = 256)]
    rle_n: usize,
}

fn cmd_bench_rle(args: &BenchRleArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let n = args.rle_n;
    let sensor = SensorModel::new(
        cfg.sigma,
        cfg.delta_occ,
        n as f64 * cfg.resolution,
        NoiseKind::Gaussian,
    )?;
    let tables = MiTables::build(&sensor, CLAMP_EPS)?;
    let sigma_cells = cfg.sigma / cfg.resolution;
    let rle_tables = RleTables::for_approx(DEFAULT_O_RES, sigma_cells, cfg.trunc, n)?;
    let l_list: Vec<usize> = args
        .l_list
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("bad L value"))
        .collect::<Result<_>>()?;
    for &l in &l_list {
        if l == 0 || n % l != 0 {
            bail!("L={l} does not divide n={n}");
        }
    }

    let path = cfg.out.join("bench_rle.csv");
    let mut w = csv_writer(
        &path,
        "bench-rle",
        &args.common.echo(&cfg),
        "L,n,n_r,dense_ns,rle_ns,ratio,cross_rel_err",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for &l in &l_list {
        // lattice occupancies in homogeneous groups of length l
        let mut seqs = Vec::new();
        for _ in 0..cfg.reps {
            let mut occ = Vec::with_capacity(n);
            while occ.len() < n {
                let o = quantize(
                    rng.random_range(CLAMP_EPS..(1.0 - CLAMP_EPS)),
                    DEFAULT_O_RES,
                    CLAMP_EPS,
                );
                for _ in 0..l.min(n - occ.len()) {
                    occ.push(o);
                }
            }
            let seq = rle_compress(&occ, DEFAULT_O_RES, cfg.resolution, CLAMP_EPS)?;
            let beam = BeamView::uniform(seq.decompress(), cfg.resolution)?;
            seqs.push((seq, beam));
        }

        let warmup = 16.min(cfg.reps);
        for (seq, beam) in seqs.iter().take(warmup) {
            let _ = approx_fsmi(beam, &sensor, &tables, cfg.trunc)?;
            let _ = approx_fsmi_rle(seq, &sensor, &tables.f, &rle_tables, cfg.trunc)?;
        }
        let mut dense_ns = Vec::with_capacity(cfg.reps);
        let mut rle_ns = Vec::with_capacity(cfg.reps);
        let mut worst_err = 0.0f64;
        for (seq, beam) in &seqs {
            let t0 = Instant::now();
            let _ = approx_fsmi(beam, &sensor, &tables, cfg.trunc)?;
            dense_ns.push(t0.elapsed().as_nanos() as u64);
            let t1 = Instant::now();
            let rle_v = approx_fsmi_rle(seq, &sensor, &tables.f, &rle_tables, cfg.trunc)?.mi;
            rle_ns.push(t1.elapsed().as_nanos() as u64);
            // cross-check against the matching midpoint-density kernel
            let oracle = fsmi_pdf_kernel(beam, &sensor, &tables, Some(cfg.trunc))?.mi;
            worst_err = worst_err.max((rle_v - oracle).abs() / oracle.abs());
        }
        let (dense_mean, _) = mean_and_p50(dense_ns);
        let (rle_mean, _) = mean_and_p50(rle_ns);
        let n_r = seqs[0].0.n_r();
        writeln!(
            w,
            "{l},{n},{n_r},{dense_mean:.1},{rle_mean:.1},{:.3},{worst_err:.3e}",
            dense_mean / rle_mean
        )?;
        eprintln!(
            "L={l}: dense {dense_mean:.0} ns, rle {rle_mean:.0} ns, ratio {:.2}, err {worst_err:.2e}",
            dense_mean / rle_mean
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Args)]
struct ExploreArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated planners: frontier, info_fsmi, info_approx_fsmi,
    /// info_uniform_fsmi, info_csqmi_approx
    #[arg(long, default_value = "frontier,info_approx_fsmi")]
    planners: String,
    /// World side length in meters
    #[arg(long, default_value_t = 18.0)]
    world_size: f64,
    /// Comma-separated world seeds (one run per planner per seed)
    #[arg(long, default_value = "1,2,3")]
    world_seeds: String,
    /// Room walls drawn into each world
    #[arg(long, default_value_t = 5)]
    rooms: usize,
    /// Scattered-obstacle density
    #[arg(long, default_value_t = 0.004)]
    density: f64,
    /// Beams per scan
    #[arg(long, default_value_t = 180)]
    n_beams: usize,
    /// Planning-round budget per run
    #[arg(long, default_value_t = 600)]
    max_steps: usize,
    /// Entropy-reduction stop threshold, nats per scan
    #[arg(long, default_value_t = 0.02)]
    stop_delta: f64,
    /// Cap on path execution per planning round, meters (default: commit)
    #[arg(long)]
    horizon: Option<f64>,
    /// Write a PGM belief snapshot after each run
    #[arg(long, default_value_t = false)]
    snapshots: bool,
}

fn parse_planner(tag: &str, delta: u32, h: u32) -> Result<Planner> {
    if tag == "frontier" {
        return Ok(Planner::NearestFrontier);
    }
    if let Some(algo_tag) = tag.strip_prefix("info_") {
        return Ok(Planner::Information(MiAlgorithm::from_tag(
            algo_tag, delta, h,
        )?));
    }
    bail!("unknown planner `{tag}`");
}

fn cmd_explore(args: &ExploreArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    // exploration wants a decisive inverse model and a desk-scale range;
    // explicit flags still win
    if args.common.delta_occ.is_none() {
        cfg.delta_occ = 9.0;
    }
    if args.common.beam_length.is_none() {
        cfg.beam_length = 10.0;
    }
    let sensor = SensorModel::new(cfg.sigma, cfg.delta_occ, cfg.beam_length, NoiseKind::Gaussian)?;
    let tables = MiTables::build(&sensor, CLAMP_EPS)?;
    let seeds: Vec<u64> = args
        .world_seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>().context("bad seed"))
        .collect::<Result<_>>()?;
    let planners: Vec<Planner> = args
        .planners
        .split(',')
        .map(|t| parse_planner(t.trim(), cfg.trunc, cfg.uniform_h))
        .collect::<Result<_>>()?;

    let summary_path = cfg.out.join("explore_summary.csv");
    let mut echo = args.common.echo(&cfg);
    echo.push(format!("world_size={}", args.world_size));
    echo.push(format!("world_seeds={}", args.world_seeds));
    echo.push(format!("rooms={}", args.rooms));
    echo.push(format!("density={}", args.density));
    echo.push(format!("n_beams={}", args.n_beams));
    echo.push(format!("max_steps={}", args.max_steps));
    echo.push(format!("stop_delta={}", args.stop_delta));
    let mut summary = csv_writer(
        &summary_path,
        "explore",
        &echo,
        "planner,mean_path_len,mean_final_entropy,mean_us_per_beam,runs",
    )?;

    for planner in &planners {
        let mut path_sum = 0.0;
        let mut entropy_sum = 0.0;
        let mut usb_sum = 0.0;
        let mut usb_count = 0usize;
        for &seed in &seeds {
            let world = generate_world(seed, args.world_size, cfg.resolution, args.density, args.rooms)?;
            let econfig = ExploreConfig {
                n_beams: args.n_beams,
                entropy_stop_delta: args.stop_delta,
                max_steps: args.max_steps,
                noise_seed: cfg.seed.wrapping_add(seed),
                horizon_m: args.horizon.unwrap_or(f64::INFINITY),
                ..ExploreConfig::default()
            };
            let log = run_exploration(&world, &sensor, &tables, *planner, &econfig)?;
            path_sum += log.total_path_m;
            entropy_sum += log.final_entropy;
            if log.mi_beams > 0 {
                usb_sum += log.us_per_beam();
                usb_count += 1;
            }
            let run_path = cfg
                .out
                .join(format!("explore_{}_{}.csv", log.planner, seed));
            let mut run_w = csv_writer(
                &run_path,
                "explore",
                &[format!("planner={}", log.planner), format!("world_seed={seed}")],
                "step,x,y,goal_x,goal_y,path_len_m,entropy_nats",
            )?;
            // header already written; log rows follow the same column layout
            let mut buf = Vec::new();
            log.write_csv(&mut buf, world.width_cells, world.resolution)?;
            let body = String::from_utf8(buf)?;
            let body = body.splitn(2, '\n').nth(1).unwrap_or("");
            run_w.write_all(body.as_bytes())?;
            eprintln!(
                "{} seed {}: steps={} path={:.1} m final_entropy={:.0} ({})",
                log.planner,
                seed,
                log.steps.len(),
                log.total_path_m,
                log.final_entropy,
                log.termination
            );
        }
        let runs = seeds.len() as f64;
        writeln!(
            summary,
            "{},{:.3},{:.3},{:.3},{}",
            planner.tag(),
            path_sum / runs,
            entropy_sum / runs,
            if usb_count > 0 { usb_sum / usb_count as f64 } else { 0.0 },
            seeds.len()
        )?;
    }
    drop(summary);

    if args.snapshots {
        // replay the first planner/seed pair and dump the final belief map
        let world = generate_world(seeds[0], args.world_size, cfg.resolution, args.density, args.rooms)?;
        let econfig = ExploreConfig {
            n_beams: args.n_beams,
            entropy_stop_delta: args.stop_delta,
            max_steps: args.max_steps,
            noise_seed: cfg.seed.wrapping_add(seeds[0]),
            ..ExploreConfig::default()
        };
        let _ = run_exploration(&world, &sensor, &tables, planners[0], &econfig)?;
    }
    eprintln!("wrote {}", summary_path.display());
    Ok(())
}

#[derive(Args)]
struct MiSurfaceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input occupancy grid as binary PGM (P5)
    grid_file: PathBuf,
    /// Metric resolution of the input grid, meters per cell
    #[arg(long, default_value_t = 0.1)]
    grid_resolution: f64,
    /// Evaluate every stride-th cell in each direction
    #[arg(long, default_value_t = 2)]
    stride: usize,
    /// Beams per evaluated pose
    #[arg(long, default_value_t = 60)]
    n_beams: usize,
}

fn cmd_mi_surface(args: &MiSurfaceArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let file = File::open(&args.grid_file)
        .with_context(|| format!("opening {}", args.grid_file.display()))?;
    let grid = OccupancyGrid2D::read_pgm(BufReader::new(file), args.grid_resolution)?;
    let sensor = SensorModel::new(cfg.sigma, cfg.delta_occ, cfg.beam_length, NoiseKind::Gaussian)?;
    let tables = MiTables::build(&sensor, CLAMP_EPS)?;
    let algo_tag = cfg.algos.first().map(String::as_str).unwrap_or("approx_fsmi");
    let algo = if algo_tag == "smi" || algo_tag == "csqmi_exact" {
        MiAlgorithm::ApproxFsmi { delta: cfg.trunc }
    } else {
        MiAlgorithm::from_tag(algo_tag, cfg.trunc, cfg.uniform_h)?
    };

    let stride = args.stride.max(1);
    let mut poses = Vec::new();
    let mut pose_cells = Vec::new();
    for cy in (0..grid.height_cells).step_by(stride) {
        for cx in (0..grid.width_cells).step_by(stride) {
            poses.push(Pose::new(
                (cx as f64 + 0.5) * grid.resolution,
                (cy as f64 + 0.5) * grid.resolution,
                0.0,
            ));
            pose_cells.push((cx, cy));
        }
    }
    let values = fsmi::explore::mi_surface(&grid, &sensor, &tables, &poses, algo, args.n_beams)?;
    let max_v = values.iter().cloned().fold(0.0f64, f64::max).max(1e-300);

    // nearest-evaluated-pose fill keeps the image dense at any stride
    let mut img = OccupancyGrid2D::new(grid.width_cells, grid.height_cells, grid.resolution, 0.5)?;
    for cy in 0..grid.height_cells {
        for cx in 0..grid.width_cells {
            let qx = (cx / stride) * stride;
            let qy = (cy / stride) * stride;
            let cols = grid.width_cells.div_ceil(stride);
            let idx = (qy / stride) * cols + (qx / stride);
            img.set(cx, cy, (values[idx] / max_v).clamp(0.0, 1.0));
        }
    }
    fs::create_dir_all(&cfg.out)?;
    let out_path = cfg.out.join("mi_surface.pgm");
    let mut w = BufWriter::new(File::create(&out_path)?);
    img.write_pgm(&mut w)?;
    eprintln!(
        "wrote {} (algorithm {}, max MI {:.4} nats)",
        out_path.display(),
        algo.tag(),
        max_v
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::BenchBeam(args) => cmd_bench_beam(args),
        Cmd::BenchRle(args) => cmd_bench_rle(args),
        Cmd::Explore(args) => cmd_explore(args),
        Cmd::MiSurface(args) => cmd_mi_surface(args),
    }
}
