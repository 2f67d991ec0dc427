use clap::{Args, Parser, Subcommand, ValueEnum};
use mqc::circuit_ir::{
    deserialize, generate_qv_circuit, serialize_circuit, serialize_compiled, toffoli_mq_circuit, CircuitError, QvcDocument,
};
use mqc::mqlayer::nuclear_norm;
use mqc::noise::{NoiseKind, NoiseModel};
use mqc::optimizer::{cartan_baseline_nuc, compile, CompileError, CompileMode, CompileOptions};
use mqc::sim::{threshold_scan_batch, QVReport, QvBatch, QvConfig, Realization, SimError, MAX_SIM_QUBITS};
use mqc::{phase_distance, CircuitIR, CompiledCircuit};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "mqc", version, about = "Compile layered SU(4) circuits to multi-qubit ZZ layers and run QV benchmarks")]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "J")]
    jobs: Option<usize>,
    /// Output format (default: text, or csv for qv-scan).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a circuit file, a generated QV circuit, or the Toffoli gate.
    Compile(CompileArgs),
    /// Heavy-output benchmark of QV circuits at one noise level.
    Simulate(SimulateArgs),
    /// Threshold error rate per N and realization by bisection.
    QvScan(ScanArgs),
    /// Dense-unitary equivalence of two circuit files.
    Verify(VerifyArgs),
    /// Summarize a circuit file.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum NoiseArg {
    Depol,
    Dephase,
    None,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Depol => NoiseKind::Depolarization,
            NoiseArg::Dephase => NoiseKind::Dephasing,
            NoiseArg::None => NoiseKind::None,
        }
    }
}

#[derive(Args, Debug, Default)]
struct CompileFlags {
    /// naive3L, fused, fused+optimized; simulation also accepts tq.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ry_grid_points: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
}

#[derive(Args, Debug)]
struct CompileArgs {
    /// Source circuit file.
    input: Option<PathBuf>,
    /// Generate an N-qubit QV circuit instead of reading a file.
    #[arg(long, value_name = "N", conflicts_with = "input")]
    qv: Option<usize>,
    /// Compile the three-qubit Toffoli gate.
    #[arg(long, conflicts_with_all = ["input", "qv"])]
    toffoli: bool,
    #[command(flatten)]
    flags: CompileFlags,
    /// Compiled circuit output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Optimizer report output (default: next to --out).
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Also write the source circuit.
    #[arg(long, value_name = "PATH")]
    emit_source: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct BenchFlags {
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long, value_name = "X")]
    p_tq: Option<f64>,
    #[arg(long, value_name = "K")]
    circuits: Option<usize>,
    #[arg(long, value_name = "R")]
    shots: Option<usize>,
    #[arg(long, value_name = "R")]
    shot_cap: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_name = "N")]
    qv: Option<usize>,
    #[command(flatten)]
    compile: CompileFlags,
    #[command(flatten)]
    bench: BenchFlags,
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// Qubit counts.
    #[arg(long = "qv", value_name = "N", value_delimiter = ',', num_args = 1..)]
    ns: Vec<usize>,
    /// Realizations to compare (default: fused+optimized,tq).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    modes: Vec<String>,
    #[command(flatten)]
    compile: CompileFlags,
    #[command(flatten)]
    bench: BenchFlags,
    /// Upper end of the bisection interval.
    #[arg(long)]
    p_max: Option<f64>,
    /// Bisection resolution (default: the N-dependent schedule).
    #[arg(long)]
    delta_p: Option<f64>,
    /// Fit p = 1/(eps_eff N^s) per realization.
    #[arg(long)]
    fit: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    input: PathBuf,
}

/// Values accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    mode: Option<String>,
    modes: Option<Vec<String>>,
    seed: Option<u64>,
    qv: Option<usize>,
    ns: Option<Vec<usize>>,
    noise: Option<NoiseArg>,
    p_tq: Option<f64>,
    circuits: Option<usize>,
    shots: Option<usize>,
    shot_cap: Option<usize>,
    ry_grid_points: Option<usize>,
    sweeps: Option<usize>,
    p_max: Option<f64>,
    delta_p: Option<f64>,
    jobs: Option<usize>,
    format: Option<Format>,
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Input(String),
    Decomposition(String),
    Verify(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Input(_) => 2,
            Failure::Decomposition(_) => 3,
            Failure::Verify(_) => 4,
        }
    }

    fn render(&self) -> String {
        match self {
            Failure::Io(m) => format!("error[io]: {m}"),
            Failure::Input(m) => format!("error[input]: {m}"),
            Failure::Decomposition(m) => format!("error[decomposition]: {m}"),
            Failure::Verify(m) => format!("error[verify]: {m}"),
        }
    }
}

impl From<CircuitError> for Failure {
    fn from(e: CircuitError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Decomposition { .. } => Failure::Decomposition(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Compile(c) => c.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.render());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = read(p)?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| Failure::Input(format!("{}: {} at '{}'", p.display(), e.inner(), e.path())))?
        }
        None => FileConfig::default(),
    };
    if let Some(j) = cli.jobs.or(file.jobs) {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().map_err(|e| Failure::Io(e.to_string()))?;
    }
    let format = cli.format.or(file.format);
    match cli.command {
        Command::Compile(a) => cmd_compile(a, &file, format.unwrap_or(Format::Text)),
        Command::Simulate(a) => cmd_simulate(a, &file, format.unwrap_or(Format::Text)),
        Command::QvScan(a) => cmd_qv_scan(a, &file, format.unwrap_or(Format::Csv)),
        Command::Verify(a) => cmd_verify(a, format.unwrap_or(Format::Text)),
        Command::Report(a) => cmd_report(a, format.unwrap_or(Format::Text)),
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
}

fn write(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn parse_mode(s: &str) -> Result<CompileMode> {
    s.parse().map_err(Failure::Input)
}

fn parse_realization(s: &str) -> Result<Realization> {
    match s {
        "tq" | "tq-sequential" | "sequential" => Ok(Realization::SequentialTq),
        _ => Ok(Realization::Mq(parse_mode(s)?)),
    }
}

fn compile_options(flags: &CompileFlags, file: &FileConfig, mode: CompileMode) -> Result<CompileOptions> {
    let d = CompileOptions::default();
    let opts = CompileOptions {
        mode,
        ry_grid_points: flags.ry_grid_points.or(file.ry_grid_points).unwrap_or(d.ry_grid_points),
        sweeps: flags.sweeps.or(file.sweeps).unwrap_or(d.sweeps),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        ..d
    };
    opts.validate()?;
    Ok(opts)
}

fn noise_model(bench: &BenchFlags, file: &FileConfig, default: NoiseArg) -> Result<NoiseModel> {
    let kind: NoiseKind = bench.noise.or(file.noise).unwrap_or(default).into();
    let p = match kind {
        NoiseKind::None => 0.0,
        _ => bench.p_tq.or(file.p_tq).unwrap_or(0.0),
    };
    NoiseModel::new(kind, p).map_err(|e| Failure::Input(e.to_string()))
}

fn qv_config(
    n: usize,
    realization: Realization,
    noise: NoiseModel,
    opts: &CompileOptions,
    bench: &BenchFlags,
    file: &FileConfig,
) -> QvConfig {
    let mut cfg = QvConfig::new(n, realization, noise, opts.seed);
    cfg.n_circuits = bench.circuits.or(file.circuits).unwrap_or(cfg.n_circuits).max(1);
    cfg.shots = bench.shots.or(file.shots);
    cfg.shot_cap = bench.shot_cap.or(file.shot_cap);
    cfg.compile = opts.clone();
    cfg
}

#[derive(Serialize)]
struct CompiledSummary {
    n_qubits: usize,
    mq_layers: usize,
    couplings: usize,
    per_layer_nuc: Vec<f64>,
    total_nuc: f64,
}

fn summarize(c: &CompiledCircuit) -> CompiledSummary {
    let per_layer_nuc: Vec<f64> = c.mq_layers().map(nuclear_norm).collect();
    CompiledSummary {
        n_qubits: c.n_qubits,
        mq_layers: c.mq_count(),
        couplings: c.coupling_count(),
        total_nuc: per_layer_nuc.iter().sum(),
        per_layer_nuc,
    }
}

fn report_path(a: &CompileArgs, file: &FileConfig) -> Option<PathBuf> {
    a.report.clone().or_else(|| {
        a.out.as_ref().or(file.out.as_ref()).map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".report.json");
            PathBuf::from(s)
        })
    })
}

fn cmd_compile(a: CompileArgs, file: &FileConfig, format: Format) -> Result<()> {
    let out_path = a.out.clone().or_else(|| file.out.clone());
    let report_path = report_path(&a, file);
    if a.toffoli {
        let c = toffoli_mq_circuit();
        let summary = summarize(&c);
        if let Some(p) = &out_path {
            write(p, &serialize_compiled(&c))?;
        }
        if let Some(p) = &report_path {
            write(p, &to_json(&summary))?;
        }
        let mut s = String::new();
        match format {
            Format::Json => s = to_json(&summary),
            Format::Csv => {
                s.push_str("mq_layers,couplings,total_nuc\n");
                writeln!(s, "{},{},{}", summary.mq_layers, summary.couplings, summary.total_nuc).unwrap();
            }
            Format::Text => {
                writeln!(s, "mq_layers: {}", summary.mq_layers).unwrap();
                writeln!(s, "couplings: {}", summary.couplings).unwrap();
                writeln!(s, "total_nuc: {:.6}", summary.total_nuc).unwrap();
            }
        }
        print!("{s}");
        return Ok(());
    }

    let mode = match a.flags.mode.as_deref().or(file.mode.as_deref()) {
        Some(m) => parse_mode(m)?,
        None => CompileMode::FusedOptimized,
    };
    let opts = compile_options(&a.flags, file, mode)?;
    let source: CircuitIR = if let Some(input) = &a.input {
        match deserialize(&read(input)?)? {
            QvcDocument::Circuit(c) => c,
            QvcDocument::Compiled(_) => {
                return Err(Failure::Input(format!("{}: expected a circuit document, found a compiled one", input.display())))
            }
        }
    } else if let Some(n) = a.qv.or(file.qv) {
        generate_qv_circuit(n, opts.seed)?
    } else {
        return Err(Failure::Input("compile needs an input file, --qv N or --toffoli".into()));
    };
    if let Some(p) = &a.emit_source {
        write(p, &serialize_circuit(&source))?;
    }
    let (compiled, report) = compile(&source, &opts)?;
    if let Some(p) = &out_path {
        write(p, &serialize_compiled(&compiled))?;
    }
    if let Some(p) = &report_path {
        write(p, &to_json(&report))?;
    }
    let mut s = String::new();
    match format {
        Format::Json => s = to_json(&report),
        Format::Csv => {
            s.push_str("n_qubits,mode,mq_layers,couplings,total_nuc,cartan_baseline_nuc,ratio,fallback_to_fused\n");
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                report.n_qubits,
                report.mode,
                report.mq_layers,
                compiled.coupling_count(),
                report.total_nuc,
                report.cartan_baseline_nuc,
                report.ratio,
                report.fallback_to_fused
            )
            .unwrap();
        }
        Format::Text => {
            writeln!(s, "mode: {}", report.mode).unwrap();
            writeln!(s, "mq_layers: {}", report.mq_layers).unwrap();
            writeln!(s, "couplings: {}", compiled.coupling_count()).unwrap();
            writeln!(s, "total_nuc: {:.6}", report.total_nuc).unwrap();
            writeln!(s, "cartan_baseline_nuc: {:.6}", report.cartan_baseline_nuc).unwrap();
            writeln!(s, "ratio: {:.6}", report.ratio).unwrap();
            if report.fallback_to_fused {
                writeln!(s, "note: optimized result was worse than fused; fused kept").unwrap();
            }
        }
    }
    print!("{s}");
    Ok(())
}

fn qv_csv_header() -> &'static str {
    "n,realization,noise,p_tq,n_circuits,shots,mean_ideal_hop,mean_hop,stderr,lower_bound,pass\n"
}

fn qv_csv_row(r: &QVReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        r.n,
        r.realization,
        r.noise.kind.label(),
        r.noise.p_tq,
        r.n_circuits,
        r.shots_per_circuit,
        r.mean_ideal_hop,
        r.mean_hop,
        r.stderr,
        r.lower_bound,
        r.pass
    )
}

fn check_sim_size(n: usize) -> Result<()> {
    if n > MAX_SIM_QUBITS {
        return Err(Failure::Input(format!("simulation limited to N <= {MAX_SIM_QUBITS}, got {n}")));
    }
    if n < 2 {
        return Err(Failure::Input(format!("QV circuits need N >= 2, got {n}")));
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, file: &FileConfig, format: Format) -> Result<()> {
    let n = a.qv.or(file.qv).ok_or_else(|| Failure::Input("simulate needs --qv N".into()))?;
    check_sim_size(n)?;
    let realization = parse_realization(a.compile.mode.as_deref().or(file.mode.as_deref()).unwrap_or("fused+optimized"))?;
    let mode = match realization {
        Realization::Mq(m) => m,
        Realization::SequentialTq => CompileMode::Fused,
    };
    let opts = compile_options(&a.compile, file, mode)?;
    let noise = noise_model(&a.bench, file, NoiseArg::None)?;
    let cfg = qv_config(n, realization, noise, &opts, &a.bench, file);
    let report = QvBatch::prepare(&cfg)?.evaluate(&noise);
    let s = match format {
        Format::Json => to_json(&report),
        Format::Csv => format!("{}{}", qv_csv_header(), qv_csv_row(&report)),
        Format::Text => format!(
            "n: {}\nrealization: {}\nnoise: {} p_tq={}\nmean_hop: {:.6} (ideal {:.6})\nlower_bound: {:.6}\npass: {}\n",
            report.n,
            report.realization,
            report.noise.kind.label(),
            report.noise.p_tq,
            report.mean_hop,
            report.mean_ideal_hop,
            report.lower_bound,
            report.pass
        ),
    };
    print!("{s}");
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ScanRow {
    n: usize,
    compile_mode: String,
    noise: String,
    p_threshold: f64,
    delta_p: f64,
    shots: usize,
}

#[derive(Debug, Clone, Serialize)]
struct PowerLawFit {
    compile_mode: String,
    /// Exponent in `p = 1 / (eps_eff N^s)`.
    s: f64,
    eps_eff: f64,
    points: usize,
    note: &'static str,
}

/// Least squares of `ln p = -ln eps - s ln N` over rows with `p > 0`.
fn fit_power_law(points: &[(usize, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, p)| *p > 0.0).map(|&(n, p)| ((n as f64).ln(), p.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    Some((-slope, (-intercept).exp()))
}

fn cmd_qv_scan(a: ScanArgs, file: &FileConfig, format: Format) -> Result<()> {
    let ns = if !a.ns.is_empty() { a.ns.clone() } else { file.ns.clone().unwrap_or_default() };
    if ns.is_empty() {
        return Err(Failure::Input("qv-scan needs --qv N[,N...]".into()));
    }
    for &n in &ns {
        check_sim_size(n)?;
    }
    let modes = if !a.modes.is_empty() {
        a.modes.clone()
    } else {
        file.modes.clone().unwrap_or_else(|| vec!["fused+optimized".into(), "tq".into()])
    };
    let realizations = modes.iter().map(|m| parse_realization(m)).collect::<Result<Vec<_>>>()?;
    let kind: NoiseKind = a.bench.noise.or(file.noise).unwrap_or(NoiseArg::Dephase).into();
    if kind == NoiseKind::None {
        return Err(Failure::Input("qv-scan needs a noise model (depol or dephase)".into()));
    }
    let p_max = a.p_max.or(file.p_max).unwrap_or(0.2);
    if !(0.0..1.0).contains(&p_max) || p_max == 0.0 {
        return Err(Failure::Input(format!("p_max must lie in (0, 1), got {p_max}")));
    }
    let delta_p = a.delta_p.or(file.delta_p);
    let opts = compile_options(&a.compile, file, CompileMode::FusedOptimized)?;

    let mut rows = Vec::new();
    for &n in &ns {
        for &r in &realizations {
            let mode = match r {
                Realization::Mq(m) => m,
                Realization::SequentialTq => CompileMode::Fused,
            };
            let o = CompileOptions { mode, ..opts.clone() };
            let cfg = qv_config(n, r, NoiseModel { kind, p_tq: 0.0 }, &o, &a.bench, file);
            let batch = QvBatch::prepare(&cfg)?;
            let t = threshold_scan_batch(&batch, kind, p_max, delta_p);
            rows.push(ScanRow {
                n,
                compile_mode: r.to_string(),
                noise: kind.label().into(),
                p_threshold: t.p_threshold,
                delta_p: t.delta_p,
                shots: t.shots_per_circuit,
            });
        }
    }

    let mut fits = Vec::new();
    if a.fit {
        for r in &realizations {
            let label = r.to_string();
            let pts: Vec<(usize, f64)> = rows.iter().filter(|x| x.compile_mode == label).map(|x| (x.n, x.p_threshold)).collect();
            if let Some((s, eps_eff)) = fit_power_law(&pts) {
                fits.push(PowerLawFit {
                    compile_mode: label,
                    s,
                    eps_eff,
                    points: pts.iter().filter(|p| p.1 > 0.0).count(),
                    note: "desk-scale fit",
                });
            }
        }
    }

    let mut s = String::new();
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                rows: &'a [ScanRow],
                fits: &'a [PowerLawFit],
            }
            s = to_json(&Out { rows: &rows, fits: &fits });
        }
        Format::Csv | Format::Text => {
            s.push_str("N,compile_mode,noise,p_threshold,delta_p,shots\n");
            for r in &rows {
                writeln!(s, "{},{},{},{},{},{}", r.n, r.compile_mode, r.noise, r.p_threshold, r.delta_p, r.shots).unwrap();
            }
            for f in &fits {
                writeln!(s, "# fit {}: s={} eps_eff={} points={} ({})", f.compile_mode, f.s, f.eps_eff, f.points, f.note).unwrap();
            }
        }
    }
    print!("{s}");
    Ok(())
}

fn load(p: &Path) -> Result<QvcDocument> {
    deserialize(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
}

fn cmd_verify(a: VerifyArgs, format: Format) -> Result<()> {
    let (da, db) = (load(&a.a)?, load(&a.b)?);
    if da.n_qubits() != db.n_qubits() {
        return Err(Failure::Verify(format!("qubit counts differ: {} vs {}", da.n_qubits(), db.n_qubits())));
    }
    let distance = phase_distance(&da.unitary()?, &db.unitary()?);
    let equivalent = distance <= a.tol;
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out {
                phase_distance: f64,
                tolerance: f64,
                equivalent: bool,
            }
            print!("{}", to_json(&Out { phase_distance: distance, tolerance: a.tol, equivalent }));
        }
        Format::Csv => print!("phase_distance,tolerance,equivalent\n{distance:e},{},{equivalent}\n", a.tol),
        Format::Text => println!("phase_distance: {distance:e}"),
    }
    if equivalent {
        Ok(())
    } else {
        Err(Failure::Verify(format!("phase distance {distance:e} exceeds tolerance {:e}", a.tol)))
    }
}

fn cmd_report(a: ReportArgs, format: Format) -> Result<()> {
    #[derive(Serialize)]
    #[serde(tag = "kind", rename_all = "snake_case")]
    enum Summary {
        Circuit { n_qubits: usize, layers: usize, blocks: usize, cartan_baseline_nuc: f64 },
        Compiled(CompiledSummary),
    }
    let summary = match load(&a.input)? {
        QvcDocument::Circuit(c) => Summary::Circuit {
            n_qubits: c.n_qubits,
            layers: c.layers.len(),
            blocks: c.block_count(),
            cartan_baseline_nuc: cartan_baseline_nuc(&c)?,
        },
        QvcDocument::Compiled(c) => Summary::Compiled(summarize(&c)),
    };
    let s = match (&summary, format) {
        (_, Format::Json) => to_json(&summary),
        (Summary::Circuit { n_qubits, layers, blocks, cartan_baseline_nuc }, Format::Csv) => {
            format!("kind,n_qubits,layers,blocks,cartan_baseline_nuc\ncircuit,{n_qubits},{layers},{blocks},{cartan_baseline_nuc}\n")
        }
        (Summary::Circuit { n_qubits, layers, blocks, cartan_baseline_nuc }, Format::Text) => format!(
            "kind: circuit\nn_qubits: {n_qubits}\nlayers: {layers}\nblocks: {blocks}\ncartan_baseline_nuc: {cartan_baseline_nuc:.6}\n"
        ),
        (Summary::Compiled(c), Format::Csv) => {
            let mut s = String::from("layer,nuc\n");
            for (i, x) in c.per_layer_nuc.iter().enumerate() {
                writeln!(s, "{i},{x}").unwrap();
            }
            s
        }
        (Summary::Compiled(c), Format::Text) => format!(
            "kind: compiled\nn_qubits: {}\nmq_layers: {}\ncouplings: {}\ntotal_nuc: {:.6}\n",
            c.n_qubits, c.mq_layers, c.couplings, c.total_nuc
        ),
    };
    print!("{s}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_recovers_exact_parameters() {
        let pts: Vec<(usize, f64)> = [4usize, 6, 8, 10].iter().map(|&n| (n, 1.0 / (3.0 * (n as f64).powf(1.7)))).collect();
        let (s, eps) = fit_power_law(&pts).unwrap();
        assert!((s - 1.7).abs() < 1e-12 && (eps - 3.0).abs() < 1e-10);
    }

    #[test]
    fn power_law_skips_zero_thresholds() {
        assert!(fit_power_law(&[(4, 0.0), (6, 0.01)]).is_none());
        assert!(fit_power_law(&[(4, 0.02), (6, 0.01), (8, 0.0)]).is_some());
    }

    #[test]
    fn realization_names() {
        assert_eq!(parse_realization("tq").unwrap(), Realization::SequentialTq);
        assert_eq!(parse_realization("fused").unwrap(), Realization::Mq(CompileMode::Fused));
        assert!(parse_realization("bogus").is_err());
    }

    #[test]
    fn exit_codes() {
        let dec = CompileError::Decomposition { layer: 2, pair: (0, 3), stage: "lh", message: "x".into() };
        assert_eq!(Failure::from(dec.clone()).code(), 3);
        assert_eq!(Failure::from(SimError::Compile(dec)).code(), 3);
        assert_eq!(Failure::from(CompileError::Options("bad".into())).code(), 2);
        assert_eq!(Failure::from(CircuitError::TooLarge(20)).code(), 2);
        assert_eq!(Failure::Verify(String::new()).code(), 4);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
