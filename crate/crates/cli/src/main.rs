use std::fmt::Write as _;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pfcm::data::{
    format_csv, generate_mixture, inject_missing, load_csv, write_csv, CsvOptions, InjectionConfig, InjectionSpec,
    LabelColumn, MixtureConfig, MixtureSpec,
};
use pfcm::engine::run_pfcm;
use pfcm::experiment::{
    aggregate, emit_report, format_summary, read_trials, run_base, run_grid, ClusterChoice, DatasetSource,
    ExperimentSpec, DEFAULT_FRACTIONS, DEFAULT_TRIALS,
};
use pfcm::impute::run_incomplete;
use pfcm::metrics::{cluster_sizes, select_cluster_count};
use pfcm::{DataSet, Error, ErrorKind, Hardening, Parameters, Result, Strategy, WeightForm};

#[derive(Parser)]
#[command(name = "pfcm", version, about = "Possibilistic fuzzy c-means for complete and incomplete data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one dataset and print the result.
    Cluster(ClusterArgs),
    /// Sweep the cluster count and pick the smallest Xie-Beni index.
    Validity(ValidityArgs),
    /// Sample a Gaussian mixture to CSV.
    Generate(GenerateArgs),
    /// Knock out a fraction of cells, writing `?` for each.
    Inject(InjectArgs),
    /// Run the strategy x fraction x trial grid and write the report.
    Experiment(ExperimentArgs),
    /// Re-aggregate an existing trials.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file; `?`, `NaN` and empty cells count as missing.
    #[arg(long)]
    data: PathBuf,
    /// Column holding class labels to drop: an index, `first` or `last`.
    #[arg(long)]
    label_column: Option<String>,
    /// The first row is a header.
    #[arg(long)]
    header: bool,
}

impl DataArgs {
    fn options(&self) -> Result<CsvOptions> {
        let mut opts = CsvOptions::default().with_header(self.header);
        if let Some(label) = &self.label_column {
            opts = opts.with_label_column(label.parse::<LabelColumn>()?);
        }
        Ok(opts)
    }

    fn load(&self, zscore: bool) -> Result<DataSet> {
        let data = load_csv(&self.data, &self.options()?)?;
        Ok(if zscore { data.zscore() } else { data })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Paper,
    Classic,
}

#[derive(Args)]
struct AlgoArgs {
    /// Fuzzifier.
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    /// Typicality exponent.
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Stop once the centroid shift falls below this.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Form::Paper)]
    weight_form: Form,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standardize every feature before clustering.
    #[arg(long)]
    zscore: bool,
}

impl AlgoArgs {
    fn params(&self, c: usize) -> Parameters {
        Parameters {
            m: self.m,
            tau: self.tau,
            alpha: self.alpha,
            beta: self.beta,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            weight_form: match self.weight_form {
                Form::Paper => WeightForm::PaperLiteral,
                Form::Classic => WeightForm::ClassicPfcm,
            },
            ..Parameters::new(c)
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Pfcm,
    Ocs,
    Nps,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long, default_value_t = 2)]
    c: usize,
    /// `pfcm` needs complete data.
    #[arg(long, value_enum, default_value_t = Algorithm::Nps)]
    strategy: Algorithm,
    /// Matrix used for crisp labels: `fuzzy` or `typicality`.
    #[arg(long, default_value_t = Hardening::default())]
    harden: Hardening,
    /// Directory for centroids.csv, labels.csv and imputed.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidityArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Inclusive range such as `2..5`.
    #[arg(long, default_value = "2..5", value_parser = parse_range)]
    c_range: RangeInclusive<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Mixture TOML (n, seed, means, optional weights, spreads or covariances).
    #[arg(long, conflicts_with_all = ["n", "dim"])]
    config: Option<PathBuf>,
    /// Points in the default two-blob mixture.
    #[arg(long)]
    n: Option<usize>,
    /// Features in the default two-blob mixture.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the component of each point as a final column.
    #[arg(long)]
    labels: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Injection TOML (fraction, seed).
    #[arg(long, conflicts_with = "fraction")]
    config: Option<PathBuf>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// CSV dataset. Use `--mixture` instead to sample one.
    #[arg(long, required_unless_present = "mixture", conflicts_with = "mixture")]
    data: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    header: bool,
    /// Mixture TOML to sample the dataset from.
    #[arg(long)]
    mixture: Option<PathBuf>,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Fixed cluster count.
    #[arg(long, conflicts_with = "c_range")]
    c: Option<usize>,
    /// Choose the count by Xie-Beni over this range.
    #[arg(long, value_parser = parse_range)]
    c_range: Option<RangeInclusive<usize>>,
    /// Missing fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "ocs,nps")]
    strategies: Vec<Strategy>,
    #[arg(long, default_value_t = Hardening::default())]
    harden: Hardening,
    /// Same missingness pattern in every trial.
    #[arg(long)]
    pin_pattern: bool,
    /// Same centroid initialization in every trial.
    #[arg(long)]
    pin_init: bool,
    /// Also draw SVG charts.
    #[arg(long)]
    plots: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A trials.csv written by `experiment`.
    #[arg(long)]
    trials: PathBuf,
    #[arg(long)]
    plots: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let (lo, hi) = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .or_else(|| s.split_once('-'))
        .ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok(lo..=hi)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
    }
    fs::write(path, body).map_err(|source| Error::Io { path: path.into(), source })
}

fn matrix_csv(rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let data = args.data.load(args.algo.zscore)?;
    let params = args.algo.params(args.c);
    let run = match args.strategy {
        Algorithm::Pfcm => run_pfcm(&data, &params, args.algo.seed)?,
        Algorithm::Ocs => run_incomplete(&data, &params, Strategy::Ocs, args.algo.seed)?,
        Algorithm::Nps => run_incomplete(&data, &params, Strategy::Nps, args.algo.seed)?,
    };
    let labels = args.harden.labels(&run.partition);
    println!(
        "n={} s={} missing={} c={} iterations={} converged={}",
        data.n(),
        data.s(),
        data.missing_count(),
        args.c,
        run.iterations,
        run.converged
    );
    println!("sizes {:?}", cluster_sizes(&labels, args.c));
    if let Some(j) = run.objective_trace.last() {
        println!("objective {j}");
    }
    for (i, v) in run.centroids.as_array().rows().into_iter().enumerate() {
        println!("v{i} {:?}", v.to_vec());
    }
    if let Some(out) = args.out {
        write_file(&out.join("centroids.csv"), &matrix_csv(run.centroids.as_array().rows().into_iter().map(|r| r.to_vec())))?;
        let body: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write_file(&out.join("labels.csv"), &body)?;
        if !data.is_complete() {
            write_csv(&run.imputed, out.join("imputed.csv"))?;
        }
    }
    Ok(())
}

fn validity(args: ValidityArgs) -> Result<()> {
    let data = args.data.load(args.algo.zscore)?;
    let params = args.algo.params(*args.c_range.start());
    let selection = select_cluster_count(&data, args.c_range, &params, args.algo.seed)?;
    println!("c,xie_beni");
    for entry in &selection.table {
        match &entry.xie_beni {
            Ok(xb) => println!("{},{xb}", entry.c),
            Err(e) => println!("{},NaN  # {e}", entry.c),
        }
    }
    println!("chosen c = {}", selection.chosen);
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let spec = match &args.config {
        Some(path) => MixtureConfig::load(path)?.into_spec()?,
        None => MixtureSpec::two_blobs(args.n.unwrap_or(1000), args.dim.unwrap_or(2), args.seed),
    };
    let (data, components) = generate_mixture(&spec)?;
    let body = if args.labels {
        format_csv(&data)
            .lines()
            .zip(&components)
            .map(|(line, k)| format!("{line},{k}\n"))
            .collect()
    } else {
        format_csv(&data)
    };
    write_file(&args.out, &body)
}

fn inject(args: InjectArgs) -> Result<()> {
    let data = args.data.load(false)?;
    let spec = match (&args.config, args.fraction) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
            InjectionConfig::from_toml(&text)?
        }
        (None, Some(fraction)) => InjectionSpec { fraction, seed: args.seed },
        (None, None) => {
            return Err(Error::Config {
                field: "fraction",
                message: "give --fraction or --config".into(),
            })
        }
    };
    let out = inject_missing(&data, &spec)?;
    write_file(&args.out, &format_csv(&out))
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let source = match (&args.data, &args.mixture) {
        (Some(path), _) => {
            let mut options = CsvOptions::default().with_header(args.header);
            if let Some(label) = &args.label_column {
                options = options.with_label_column(label.parse()?);
            }
            DatasetSource::File { path: path.clone(), options }
        }
        (None, Some(path)) => DatasetSource::Mixture(MixtureConfig::load(path)?.into_spec()?),
        (None, None) => unreachable!("clap requires one source"),
    };
    let clusters = match (args.c, args.c_range) {
        (_, Some(range)) => ClusterChoice::Sweep(range),
        (c, None) => ClusterChoice::Fixed(c.unwrap_or(2)),
    };
    let mut spec = ExperimentSpec::new(source, clusters);
    spec.params = args.algo.params(2);
    spec.fractions = args.fractions.unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());
    spec.trials = args.trials;
    spec.strategies = args.strategies;
    spec.base_seed = args.algo.seed;
    spec.zscore = args.algo.zscore;
    spec.hardening = args.harden;
    spec.pin_pattern = args.pin_pattern;
    spec.pin_init = args.pin_init;

    let base = run_base(&spec)?;
    eprintln!(
        "base: c={} iterations={} sizes {:?}",
        base.c(),
        base.run.iterations,
        cluster_sizes(&base.labels, base.c())
    );
    for (c, xb) in &base.validity {
        eprintln!("  xie-beni c={c}: {xb}");
    }
    let records = run_grid(&spec, &base)?;
    let aggregates = aggregate(&records);
    emit_report(&aggregates, &records, &args.out, args.plots)?;
    print!("{}", format_summary(&aggregates));
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let records = read_trials(&args.trials)?;
    let aggregates = aggregate(&records);
    emit_report(&aggregates, &records, &args.out, args.plots)?;
    print!("{}", format_summary(&aggregates));
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Runtime => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::Validity(a) => validity(a),
        Command::Generate(a) => generate(a),
        Command::Inject(a) => inject(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
