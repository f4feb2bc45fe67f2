use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srcloc::data_io::{
    argmax_node, interpolate_invalid, load_dataset, read_node_list, remove_outlier,
    write_dataset, write_node_list, write_points, write_results, Dataset, Format, OutlierMode,
    Table,
};
use srcloc::experiments::{
    generate_planted_dataset, generate_sensor_graph, run_distance_theta_grid, run_k_sweep,
    run_snr_theta_grid, ExperimentGrid, GridSetup, KSweepOptions, OutlierSelection, PlantedSpec,
};
use srcloc::graph::{
    build_knn_graph, euclidean_distances, normalized_laplacian, spectral_decomposition, Graph,
    KnnInput, Sigma2,
};
use srcloc::metrics::hop_error;
use srcloc::solver::{alternating_solve, Observation, SolverConfig};
use srcloc::{Error, Result};

/// Sparse diffusion source localization on graphs.
#[derive(Parser)]
#[command(name = "srcloc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover sparse sources of a diffused signal observed on a dataset.
    Localize(LocalizeArgs),
    /// Hop error over spike distance and diffusion time on random sensor graphs.
    GridDistanceTheta(GridArgs),
    /// Hop error over noise level and diffusion time on random sensor graphs.
    ///
    /// Noise is Gaussian with standard deviation ||b|| / (sqrt(n) 10^(snr/20)),
    /// so the expected signal to noise energy ratio is `snr` decibels.
    GridSnrTheta(GridArgs),
    /// Hop error on a dataset as the number of graph neighbours k varies.
    KSweep(KSweepArgs),
    /// Write a random connected sensor graph (points and edges).
    GenSensor(GenSensorArgs),
    /// Write a synthetic dataset with planted sources.
    GenPlantedDataset(GenPlantedArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Weight of the l1 term.
    #[arg(long, default_value_t = 1e-3)]
    gamma: f64,
    /// Weight of the fidelity term.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Outer stopping tolerance on the energy change.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    #[arg(long, default_value_t = 50)]
    max_outer_iter: usize,
    #[arg(long, default_value_t = 1000)]
    fista_max_iter: usize,
    /// Relative objective change that stops FISTA.
    #[arg(long, default_value_t = 1e-8)]
    fista_tol: f64,
    /// Proximal weight of the theta step [default: 0.01 * alpha].
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 20)]
    newton_max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    theta_min: f64,
    #[arg(long, default_value_t = 50.0)]
    theta_max: f64,
}

impl SolverArgs {
    fn config(&self, fix_theta: bool) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma,
            alpha: self.alpha,
            epsilon: self.epsilon,
            max_outer_iter: self.max_outer_iter,
            fista_max_iter: self.fista_max_iter,
            fista_tol: self.fista_tol,
            mu: self.mu.unwrap_or(0.01 * self.alpha),
            newton_max_iter: self.newton_max_iter,
            theta_min: self.theta_min,
            theta_max: self.theta_max,
            fix_theta,
        }
    }
}

#[derive(Args, Clone)]
struct DatasetArgs {
    /// Node coordinates, `id,x,y[,...]`.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Observed signal, `id,value` with `NA` for invalid samples.
    #[arg(long)]
    signal: PathBuf,
    /// Square distance matrix with a header row of ids; used for the graph
    /// instead of the point coordinates.
    #[arg(long)]
    distances: Option<PathBuf>,
}

impl DatasetArgs {
    fn load(&self) -> Result<Dataset> {
        load_dataset(self.points.as_deref(), &self.signal, self.distances.as_deref())
    }
}

#[derive(Args, Clone)]
struct OutlierArgs {
    /// Neutralize the node with the largest observed value.
    #[arg(long, conflicts_with = "remove_node")]
    remove_max: bool,
    /// Neutralize the observation at this node id.
    #[arg(long)]
    remove_node: Option<String>,
    /// How the removed observation is handled: mask or interpolate.
    #[arg(long, default_value = "mask")]
    outlier_mode: OutlierMode,
}

impl OutlierArgs {
    fn selection(&self, data: &Dataset) -> Result<Option<OutlierSelection>> {
        if self.remove_max {
            return Ok(Some(OutlierSelection::Max));
        }
        match &self.remove_node {
            Some(id) => Ok(Some(OutlierSelection::Node(data.indices_of(
                std::slice::from_ref(id),
            )?[0]))),
            None => Ok(None),
        }
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    #[arg(long, short)]
    out: PathBuf,
    /// Table format: csv or json.
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl OutputArgs {
    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Number of nearest neighbours per node.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Gaussian kernel bandwidth: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    sigma2: Sigma2,
    /// Keep theta fixed at this value.
    #[arg(long, required_unless_present = "theta_init", conflicts_with = "theta_init")]
    fix_theta: Option<f64>,
    /// Learn theta jointly, starting from this value.
    #[arg(long)]
    theta_init: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    outlier: OutlierArgs,
    /// Ground-truth source ids (`id` list) to score the recovery against.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Output directory.
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GridArgs {
    /// Spike distances in hops [default: 1..10, or 6 for the SNR grid].
    #[arg(long = "h", value_delimiter = ',')]
    h: Vec<usize>,
    /// Diffusion times.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4,8,16")]
    theta: Vec<f64>,
    /// SNR levels in dB (SNR grid only).
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20")]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Nodes per sensor graph.
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "auto")]
    sigma2: Sigma2,
    /// Learn theta instead of using the true value.
    #[arg(long)]
    joint: bool,
    /// With --joint, theta starts at this multiple of the true value.
    #[arg(long, default_value_t = 1.0)]
    theta_init_factor: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Raw records; per-cell summaries go next to it with a `_summary` suffix.
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct KSweepArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Ground-truth source ids (`id` list).
    #[arg(long)]
    sources: PathBuf,
    /// Neighbour counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20,21,22,23,24,25")]
    k_values: Vec<usize>,
    #[arg(long, default_value = "auto")]
    sigma2: Sigma2,
    /// Diffusion time used for every k.
    #[arg(long)]
    fix_theta: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    outlier: OutlierArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GenSensorArgs {
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "auto")]
    sigma2: Sigma2,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `points.csv` and `edges.<format>`.
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GenPlantedArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "auto")]
    sigma2: Sigma2,
    /// Diffusion time of the planted snapshot.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Number of planted sources.
    #[arg(long, default_value_t = 1)]
    sources: usize,
    /// Share of non-source samples reported as `NA`.
    #[arg(long, default_value_t = 0.0)]
    missing_fraction: f64,
    /// Add Gaussian noise at this SNR in dB.
    #[arg(long)]
    snr: Option<f64>,
    /// Also write the Euclidean distance matrix.
    #[arg(long)]
    with_distances: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

fn graph_input(data: &Dataset) -> Result<KnnInput<'_>> {
    match (&data.distances, &data.coords) {
        (Some(d), _) => Ok(KnnInput::Distances(d.view())),
        (None, Some(c)) => Ok(KnnInput::Points(c.view())),
        (None, None) => Err(Error::InvalidInput(
            "the dataset needs coordinates or a distance matrix".into(),
        )),
    }
}

fn localize(args: &LocalizeArgs) -> Result<()> {
    let data = args.data.load()?;
    let cfg = args.solver.config(args.fix_theta.is_some());
    let theta_init = args.fix_theta.or(args.theta_init).expect("enforced by clap");
    let g = build_knn_graph(graph_input(&data)?, args.k, args.sigma2)?;
    let decomp = spectral_decomposition(normalized_laplacian(&g)?.view())?;

    let b = interpolate_invalid(&data.signal, &g)?;
    let mut obs = Observation::new(b)?;
    let mut removed = None;
    if let Some(sel) = args.outlier.selection(&data)? {
        let node = match sel {
            OutlierSelection::Max => argmax_node(&obs),
            OutlierSelection::Node(i) => i,
        };
        obs = remove_outlier(&obs, node, args.outlier.outlier_mode, &g)?;
        removed = Some(node);
    }
    let res = alternating_solve(&obs, &cfg, &decomp, None, theta_init)?;

    let out = &args.output;
    let ext = out.ext();
    let dir = &out.out;

    let mut x_table = Table::new(["id", "x"]);
    for (id, &v) in data.ids.iter().zip(&res.x) {
        x_table.push(vec![id.as_str().into(), v.into()]);
    }
    write_results(&x_table, &dir.join(format!("x.{ext}")), out.format)?;

    let mut trace = Table::new(["iteration", "energy"]);
    for &(it, e) in &res.energy_trace {
        trace.push(vec![it.into(), e.into()]);
    }
    write_results(&trace, &dir.join(format!("energy_trace.{ext}")), out.format)?;

    let peak = res
        .x
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, m)) if m >= v.abs() => best,
            _ if *v == 0.0 => best,
            _ => Some((i, v.abs())),
        })
        .map(|(i, _)| i);
    let id_or_empty = |i: Option<usize>| i.map_or_else(String::new, |i| data.ids[i].clone());

    let mut hop_total = None;
    if let Some(path) = &args.sources {
        let src = data.indices_of(&read_node_list(path)?)?;
        let mut x_ref = vec![0.0; data.n()];
        for s in src {
            x_ref[s] = 1.0;
        }
        let report = hop_error(&x_ref, res.x.as_slice().expect("contiguous"), &g, 0.0)?;
        let mut zones = Table::new(["source", "zone_size", "mass", "center_of_mass", "empty"]);
        for z in &report.per_source {
            zones.push(vec![
                data.ids[z.source].as_str().into(),
                z.zone_size.into(),
                z.mass.into(),
                z.center_of_mass.into(),
                z.empty.into(),
            ]);
        }
        write_results(&zones, &dir.join(format!("hop_error.{ext}")), out.format)?;
        hop_total = Some((report.total, report.excluded_mass_fraction));
    }

    let mut summary = Table::new([
        "theta",
        "converged",
        "outer_iterations",
        "final_energy",
        "peak_node",
        "removed_node",
        "hop_error",
        "excluded_mass_fraction",
    ]);
    summary.push(vec![
        res.theta.into(),
        res.converged.into(),
        res.outer_iterations.into(),
        res.final_energy().into(),
        id_or_empty(peak).into(),
        id_or_empty(removed).into(),
        hop_total.map_or(f64::NAN, |h| h.0).into(),
        hop_total.map_or(f64::NAN, |h| h.1).into(),
    ]);
    write_results(&summary, &dir.join(format!("result.{ext}")), out.format)?;

    print!(
        "theta {} after {} outer iterations (converged: {}), peak node '{}'",
        res.theta,
        res.outer_iterations,
        res.converged,
        id_or_empty(peak)
    );
    match hop_total {
        Some((h, _)) => println!(", hop error {h}"),
        None => println!(),
    }
    Ok(())
}

fn grid(args: &GridArgs, snr: bool) -> Result<()> {
    let h_values = if !args.h.is_empty() {
        args.h.clone()
    } else if snr {
        vec![6]
    } else {
        (1..=10).collect()
    };
    let grid = ExperimentGrid {
        h_values,
        theta_values: args.theta.clone(),
        snr_db: args.snr.clone(),
        k_values: vec![args.k],
        trials: args.trials,
        seed: args.seed,
    };
    let setup = GridSetup {
        n: args.n,
        k: args.k,
        sigma2: args.sigma2,
        cfg: args.solver.config(!args.joint),
        theta_init_factor: args.theta_init_factor,
        ..GridSetup::default()
    };
    let output = if snr {
        run_snr_theta_grid(&grid, &setup)?
    } else {
        run_distance_theta_grid(&grid, &setup)?
    };
    let (raw, summary) = output.write(&args.output.out, args.output.format)?;
    println!(
        "{} records written to {}, summaries to {}",
        output.records.len(),
        raw.display(),
        summary.display()
    );
    Ok(())
}

fn k_sweep(args: &KSweepArgs) -> Result<()> {
    let data = args.data.load()?;
    let sources = data.indices_of(&read_node_list(&args.sources)?)?;
    let selection = args.outlier.selection(&data)?;
    let opts = KSweepOptions {
        k_values: args.k_values.clone(),
        sigma2: args.sigma2,
        theta: args.fix_theta,
        cfg: args.solver.config(true),
        outlier: selection.map(|_| args.outlier.outlier_mode),
        selection: selection.unwrap_or(OutlierSelection::Max),
    };
    let out = run_k_sweep(&data, &sources, &opts)?;
    out.write(&args.output.out, args.output.format)?;
    let best = out
        .records
        .iter()
        .filter(|r| r.hop_error.is_finite())
        .min_by(|a, b| a.hop_error.total_cmp(&b.hop_error));
    match best {
        Some(r) => println!("best hop error {} at k = {}", r.hop_error, r.k),
        None => println!("no k produced a finite hop error"),
    }
    Ok(())
}

fn edge_table(g: &Graph) -> Table {
    let mut t = Table::new(["i", "j", "weight"]);
    for i in 0..g.n() {
        for &j in g.neighbors(i) {
            if i < j {
                t.push(vec![i.into(), j.into(), g.weight(i, j).into()]);
            }
        }
    }
    t
}

fn gen_sensor(args: &GenSensorArgs) -> Result<()> {
    let g = generate_sensor_graph(args.n, args.k, args.sigma2, args.seed)?;
    let dir = &args.output.out;
    let ids: Vec<String> = (0..args.n).map(|i| i.to_string()).collect();
    let coords = g.coords().expect("sensor graphs carry coordinates").to_owned();
    write_points(&dir.join("points.csv"), &ids, &coords)?;
    let edges = edge_table(&g);
    write_results(&edges, &dir.join(format!("edges.{}", args.output.ext())), args.output.format)?;
    println!("{} nodes, {} edges written to {}", g.n(), edges.len(), dir.display());
    Ok(())
}

fn gen_planted(args: &GenPlantedArgs) -> Result<()> {
    let spec = PlantedSpec {
        n: args.n,
        k: args.k,
        sigma2: args.sigma2,
        theta: args.theta,
        sources: args.sources,
        missing_fraction: args.missing_fraction,
        snr_db: args.snr,
        seed: args.seed,
    };
    let mut planted = generate_planted_dataset(&spec)?;
    if args.with_distances {
        let coords = planted.dataset.coords.as_ref().expect("planted data has coordinates");
        planted.dataset.distances = Some(euclidean_distances(coords.view()));
    }
    write_dataset(&args.out, &planted.dataset)?;
    write_node_list(&args.out.join("sources.csv"), &planted.source_ids())?;
    println!(
        "{} nodes with sources {} written to {}",
        planted.dataset.n(),
        planted.source_ids().join(","),
        args.out.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Localize(a) => localize(a),
        Command::GridDistanceTheta(a) => grid(a, false),
        Command::GridSnrTheta(a) => grid(a, true),
        Command::KSweep(a) => k_sweep(a),
        Command::GenSensor(a) => gen_sensor(a),
        Command::GenPlantedDataset(a) => gen_planted(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::FAILURE
        }
    }
}
