use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mlht_core::lo::CostMetric;
use mlht_core::mc::Transport;
use mlht_core::mlht::{ClosureSource, Mlht};
use mlht_core::mlmc::{run_mlmc, MlmcSettings, VectorRule};
use mlht_core::reference::report::{self, MlhtRecord, MseRecord, Record, Table};
use mlht_core::reference::{
    aitken_reference, mse_study, single_level_study, sn_solve, Quadrature, ReferenceSettings, ReferenceSolution,
};
use mlht_core::{FunctionalSpec, Hierarchy, Method, Problem, ProblemConfig};

/// Exit status when a run completes but fails its weak-convergence or
/// consistency check under `--check`.
const CHECK_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "mlht", version, about = "Multilevel hybrid Monte Carlo / low-order transport in slab geometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-stage MLMC optimization of the sample counts.
    Mlmc(MlmcArgs),
    /// Multilevel estimate with prescribed sample counts.
    Mlht(MlhtArgs),
    /// Repeated single-grid hybrid solves scored against the reference flux.
    Single(SingleArgs),
    /// Extrapolated discrete-ordinates reference solution.
    Reference(ReferenceArgs),
    /// Tables from previously written JSON results.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Problem description (JSON). Defaults to the built-in single-region slab.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "hqd")]
    method: Method,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Overrides `L` from the configuration.
    #[arg(long)]
    levels: Option<usize>,
    /// Particle histories per realization on every level.
    #[arg(long, default_value_t = 10_000)]
    histories: u64,
    #[arg(long, default_value_t = 10)]
    n_ini: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// `domain`, `cell:<i>` or `all-cells`.
    #[arg(long, default_value = "domain")]
    functional: FunctionalSpec,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<ProblemConfig> {
        match &self.config {
            Some(p) => ProblemConfig::load(p).with_context(|| format!("reading {}", p.display())),
            None => Ok(ProblemConfig::test1()),
        }
    }

    fn setup(&self) -> Result<(Problem, Hierarchy)> {
        Ok(self.config()?.build(self.levels)?)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Args)]
struct MlmcArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "events")]
    cost: CostMetric,
    /// Fixed bias rate for the weak-convergence test instead of the fitted one.
    #[arg(long)]
    alpha: Option<f64>,
    /// Reduce vector functionals by the largest per-level variance instead of
    /// the largest per-component sample count.
    #[arg(long)]
    max_variance: bool,
    /// Independent runs; more than one writes an accuracy study instead.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Reference for the accuracy study; computed when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Pair every run of the accuracy study with a plain Monte Carlo estimate.
    #[arg(long)]
    plain_mc: bool,
    #[arg(long, default_value_t = 1_000_000)]
    max_realizations: usize,
    /// Exit with status 2 when weak convergence or the consistency check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct MlhtArgs {
    #[command(flatten)]
    common: Common,
    /// Realizations per level, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 50, 25, 10])]
    samples: Vec<usize>,
    /// Use closures of a fine discrete-ordinates solution instead of tallies.
    #[arg(long)]
    exact_closures: bool,
    /// Reference flux for the partial-sum errors; computed when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    common: Common,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 32, 64])]
    cells: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Run both methods; `--method` is ignored.
    #[arg(long)]
    both: bool,
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    common: Common,
    /// Cells of the output grid; defaults to the finest level.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    gauss_legendre: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON files written by the other commands.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn read_reference(path: &Path) -> Result<ReferenceSolution<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn reference_for(path: Option<&Path>, problem: &Problem, cells: usize) -> Result<ReferenceSolution<f64>> {
    match path {
        Some(p) => read_reference(p),
        None => {
            eprintln!("computing reference on {cells} cells");
            Ok(aitken_reference(problem, cells, &ReferenceSettings::default())?)
        }
    }
}

fn mlmc(args: MlmcArgs) -> Result<ExitCode> {
    let c = &args.common;
    let (problem, hierarchy) = c.setup()?;
    let transport = Transport::new(&problem, &hierarchy)?;
    let histories = vec![c.histories; hierarchy.finest_level() + 1];
    let mlht = Mlht {
        problem: &problem,
        hierarchy: &hierarchy,
        source: ClosureSource::MonteCarlo {
            transport: &transport,
            histories: &histories,
        },
        method: c.method,
        functional: c.functional,
        seed: c.seed,
        tag: 0,
    };
    let settings = MlmcSettings {
        epsilon: c.epsilon,
        n_ini: c.n_ini,
        alpha: args.alpha,
        cost_metric: args.cost,
        vector_rule: if args.max_variance {
            VectorRule::MaxVariance
        } else {
            VectorRule::PerComponentMax
        },
        max_realizations: args.max_realizations,
    };
    let out = c.out_dir()?;

    if args.runs > 1 {
        let reference = reference_for(args.reference.as_deref(), &problem, hierarchy.finest().cells())?;
        let exact = reference.functional(&c.functional, &hierarchy)?;
        let plain = args.plain_mc.then_some(&transport);
        let study = mse_study(&mlht, &settings, &exact, args.runs, c.seed, plain)?;
        let record = MseRecord {
            method: c.method,
            functional: c.functional.to_string(),
            study,
        };
        write_json(&out.join("mse.json"), &record)?;
        report::mse_table(std::slice::from_ref(&record)).save(out.join("mse.csv"))?;
        report::mse_runs_table(&record).save(out.join("mse_runs.csv"))?;
        let worst = record.study.worst_mean_mse();
        println!(
            "mean MSE {worst:.3e} over {} runs (epsilon^2 = {:.3e})",
            args.runs,
            record.study.epsilon_squared()
        );
        let failed = record.study.runs.iter().any(|r| !r.weak_pass || !r.eta_pass);
        return Ok(if args.check && failed {
            ExitCode::from(CHECK_FAILED)
        } else {
            ExitCode::SUCCESS
        });
    }

    let run = run_mlmc(&mlht, &settings)?;
    let r = &run.result;
    write_json(&out.join("result.json"), r)?;
    report::levels_table(r).save(out.join("levels.csv"))?;
    let f = fs::File::create(out.join("flux.csv"))?;
    run.solution.write_flux_csv(&hierarchy, BufWriter::new(f))?;

    let estimate: Vec<String> = r.estimate.iter().map(|v| format!("{v:.8e}")).collect();
    println!("F = {}", estimate.join(" "));
    println!("N = {:?}", r.samples());
    if let Some(rates) = r.rates.first() {
        println!("alpha = {:?}, beta = {:?}, gamma = {:?}", rates.alpha, rates.beta, rates.gamma);
    }
    let max_w = r.weak.iter().map(|w| w.max).fold(0.0, f64::max);
    println!(
        "max W = {max_w:.3e} ({}), max |eta| = {:.3} ({})",
        if r.weak_pass { "pass" } else { "FAIL" },
        r.max_abs_eta(),
        if r.eta_pass { "pass" } else { "FAIL" }
    );
    Ok(if args.check && !(r.weak_pass && r.eta_pass) {
        ExitCode::from(CHECK_FAILED)
    } else {
        ExitCode::SUCCESS
    })
}

fn mlht(args: MlhtArgs) -> Result<ExitCode> {
    let c = &args.common;
    let (problem, hierarchy) = c.setup()?;
    if args.samples.len() != hierarchy.finest_level() + 1 {
        bail!(
            "{} sample counts for {} levels",
            args.samples.len(),
            hierarchy.finest_level() + 1
        );
    }
    let histories = vec![c.histories; hierarchy.finest_level() + 1];
    let transport;
    let af;
    let source = if args.exact_closures {
        let fine = Hierarchy::single(&problem, hierarchy.finest().cells() * 16)?;
        af = sn_solve(&problem, fine.level(0), Quadrature::DoubleGauss, 64, 1e-12)?;
        ClosureSource::Exact(&af)
    } else {
        transport = Transport::new(&problem, &hierarchy)?;
        ClosureSource::MonteCarlo {
            transport: &transport,
            histories: &histories,
        }
    };
    let m = Mlht {
        problem: &problem,
        hierarchy: &hierarchy,
        source,
        method: c.method,
        functional: c.functional,
        seed: c.seed,
        tag: 0,
    };
    let solution = m.run(&args.samples)?;
    let mean_df: Vec<Vec<f64>> = solution.levels.iter().map(|e| e.mean_df()).collect();
    let comps = mean_df[0].len();
    let record = MlhtRecord {
        method: c.method,
        functional: c.functional.to_string(),
        samples: args.samples.clone(),
        histories: if args.exact_closures { vec![0; histories.len()] } else { histories },
        estimate: (0..comps).map(|k| mean_df.iter().map(|v| v[k]).sum()).collect(),
        var_df: solution.levels.iter().map(|e| e.var_df()).collect(),
        mean_df,
        partial: solution.partial.clone(),
    };
    let out = c.out_dir()?;
    write_json(&out.join("result.json"), &record)?;
    let f = fs::File::create(out.join("flux.csv"))?;
    solution.write_flux_csv(&hierarchy, BufWriter::new(f))?;

    let reference = reference_for(args.reference.as_deref(), &problem, hierarchy.finest().cells())?;
    let table = report::partial_error_table(&record, &reference)?;
    table.save(out.join("levels.csv"))?;
    for row in &table.rows {
        println!("level {} N={} RE_L2 = {}", row[1], row[2], row[4]);
    }
    Ok(ExitCode::SUCCESS)
}

fn single(args: SingleArgs) -> Result<ExitCode> {
    let c = &args.common;
    let problem: Problem = c.config()?.problem()?;
    let finest = args.cells.iter().copied().max().context("no grid sizes")?;
    if args.cells.iter().any(|&n| n == 0 || finest % n != 0) {
        bail!("every grid size must divide the largest one");
    }
    let reference = reference_for(args.reference.as_deref(), &problem, finest)?;
    let methods = if args.both {
        vec![Method::Hqd, Method::Hsm]
    } else {
        vec![c.method]
    };
    let mut studies = Vec::new();
    for &cells in &args.cells {
        let exact = reference.averaged(cells)?;
        for &method in &methods {
            let s = single_level_study(&problem, cells, method, c.histories, args.runs, c.seed, &exact)?;
            println!(
                "K={} dx={:.4e} {method}: RE_L2 = {:.3e} +- {:.2e}",
                c.histories,
                s.dx,
                s.mean(),
                s.std_error()
            );
            studies.push(s);
        }
    }
    let out = c.out_dir()?;
    write_json(&out.join("result.json"), &studies)?;
    report::single_level_table(&studies).save(out.join("single.csv"))?;
    Ok(ExitCode::SUCCESS)
}

fn reference(args: ReferenceArgs) -> Result<ExitCode> {
    let c = &args.common;
    let (problem, hierarchy) = c.setup()?;
    let cells = args.cells.unwrap_or(hierarchy.finest().cells());
    let settings = ReferenceSettings {
        quadrature: if args.gauss_legendre {
            Quadrature::GaussLegendre
        } else {
            Quadrature::DoubleGauss
        },
        ..ReferenceSettings::default()
    };
    let mut r = aitken_reference(&problem, cells, &settings)?;
    for spec in [FunctionalSpec::WholeDomain, FunctionalSpec::AllCoarseCells, c.functional] {
        r.register(&spec, &hierarchy)?;
    }
    let out = c.out_dir()?;
    write_json(&out.join("reference.json"), &r)?;
    let max_u = r.uncertainty.iter().copied().fold(0.0, f64::max);
    println!("F_D = {:.7}", r.functionals["domain"][0]);
    if let Some(v) = r.functionals.get(&c.functional.to_string()) {
        let v: Vec<String> = v.iter().map(|x| format!("{x:.7e}")).collect();
        println!("{} = {}", c.functional, v.join(" "));
    }
    println!(
        "max extrapolation correction {max_u:.2e}, {} fallback cells",
        r.fallback_cells.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn report_cmd(args: ReportArgs) -> Result<ExitCode> {
    let mut reference = args.reference.as_deref().map(read_reference).transpose()?;
    let mut single = Vec::new();
    let mut rates = Vec::new();
    let mut long: Option<Table> = None;
    let mut partial: Option<Table> = None;
    let mut mse = Vec::new();
    let mut mlht_records = Vec::new();
    for path in &args.inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let label = path.display().to_string().replace(',', ";");
        match Record::from_json(&text).with_context(|| format!("unrecognized result file {}", path.display()))? {
            Record::Mlmc(r) => {
                let t = report::level_long_table(&label, &r);
                match &mut long {
                    Some(acc) => acc.rows.extend(t.rows),
                    None => long = Some(t),
                }
                rates.push((label, *r));
            }
            Record::Mlht(r) => mlht_records.push(r),
            Record::Mse(r) => mse.push(r),
            Record::Single(s) => single.extend(s),
            Record::Reference(r) => reference = Some(r),
        }
    }
    for r in &mlht_records {
        let Some(reference) = &reference else {
            bail!("partial-sum errors need --reference");
        };
        let t = report::partial_error_table(r, reference)?;
        match &mut partial {
            Some(acc) => acc.rows.extend(t.rows),
            None => partial = Some(t),
        }
    }
    fs::create_dir_all(&args.out)?;
    let mut written = Vec::new();
    let mut save = |name: &str, t: &Table| -> Result<()> {
        t.save(args.out.join(name))?;
        written.push(name.to_string());
        Ok(())
    };
    if !single.is_empty() {
        save("single_level.csv", &report::single_level_table(&single))?;
    }
    if let Some(t) = &partial {
        save("partial_errors.csv", t)?;
    }
    if !rates.is_empty() {
        save("rates.csv", &report::rates_table(&rates))?;
    }
    if let Some(t) = &long {
        save("levels_long.csv", t)?;
    }
    if !mse.is_empty() {
        save("mse.csv", &report::mse_table(&mse))?;
        let mut runs = report::mse_runs_table(&mse[0]);
        for r in &mse[1..] {
            runs.rows.extend(report::mse_runs_table(r).rows);
        }
        save("mse_runs.csv", &runs)?;
    }
    if written.is_empty() {
        bail!("nothing to report");
    }
    println!("wrote {}", written.join(", "));
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Mlmc(a) => mlmc(a),
        Command::Mlht(a) => mlht(a),
        Command::Single(a) => single(a),
        Command::Reference(a) => reference(a),
        Command::Report(a) => report_cmd(a),
    }
}
