use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use tsqrf::eval::{self, Method, Scenario, SimulationGrid, Study};
use tsqrf::persist::{self, SavedModel};
use tsqrf::{embed, load_series_csv, log_returns, DgpSpec, Forest, Series, WnwModel};

use crate::args::{
    BenchArgs, FitArgs, InputArgs, MethodName, PlotArgs, PlotKind, PredictArgs, SimulateArgs,
};
use crate::plot;

const COVERAGE_TAUS: [f64; 5] = [0.025, 0.1, 0.5, 0.9, 0.975];
const GRID_TAUS: [f64; 3] = [0.1, 0.5, 0.9];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn quantile_header(lead: &[&str], taus: &[f64]) -> Vec<String> {
    lead.iter()
        .map(|s| s.to_string())
        .chain(taus.iter().map(|t| format!("q_{t}")))
        .collect()
}

fn load_input(input: &InputArgs) -> Result<Series> {
    let s = load_series_csv(&input.input, &input.column, input.drop_missing)?;
    Ok(if input.log_returns {
        log_returns(&s)?
    } else {
        s
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let spec = DgpSpec::new(args.model, args.error);
    let series = spec.simulate(args.t, args.burn_in, args.seed)?;
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(["t", "y"])?;
    for (i, y) in series.values().iter().enumerate() {
        w.write_record([(i + 1).to_string(), y.to_string()])?;
    }
    w.flush()?;

    let sidecar = args.quantiles_out.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".quantiles.csv");
        PathBuf::from(p)
    });
    let data = embed(&series, spec.p())?;
    let mut w = csv::Writer::from_writer(create(&sidecar)?);
    w.write_record(quantile_header(&["t"], &args.taus))?;
    for (i, x) in data.rows().enumerate() {
        let mut rec = vec![data.t(i).to_string()];
        for &tau in &args.taus {
            rec.push(spec.true_quantile(x, tau)?.to_string());
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(vec![args.out.clone(), sidecar])
}

pub fn fit(args: &FitArgs) -> Result<Vec<PathBuf>> {
    let series = load_input(&args.input)?;
    let data = embed(&series, args.p)?;
    let model = match args.method {
        MethodName::Tsqrf => SavedModel::Tsqrf(Forest::fit(&data, &args.forest.config(args.seed))?),
        MethodName::Wnw => SavedModel::Wnw(WnwModel::fit(&data, &args.wnw.config(&GRID_TAUS))?),
        MethodName::Oracle => bail!("the oracle method has nothing to fit"),
    };
    let mut w = create(&args.out)?;
    persist::write_model(&model, &mut w)?;
    w.flush()?;
    eprintln!(
        "fitted {} on {} pairs (p = {})",
        args.method
            .to_possible_value()
            .expect("no skipped variants")
            .get_name(),
        data.len(),
        args.p
    );
    Ok(vec![args.out.clone()])
}

pub fn predict(args: &PredictArgs) -> Result<Vec<PathBuf>> {
    let model = persist::load_model(&args.model)?;
    if let Some(p) = args.p {
        if p != model.p() {
            return Err(tsqrf::Error::DimensionMismatch {
                expected: model.p(),
                actual: p,
            }
            .into());
        }
    }
    let series = load_input(&args.input)?;
    let data = embed(&series, model.p())?;
    let queries: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
    let preds = model.predict(&queries, &args.taus);

    let lead: &[&str] = if args.with_y { &["t", "y"] } else { &["t"] };
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(quantile_header(lead, &args.taus))?;
    let mut failed = 0;
    for (i, pred) in preds.iter().enumerate() {
        let mut rec = vec![data.t(i).to_string()];
        if args.with_y {
            rec.push(data.y(i).to_string());
        }
        match pred {
            Ok(q) => rec.extend(q.iter().map(f64::to_string)),
            Err(e) => {
                // invalid levels fail every row; report that as an error
                if let tsqrf::Error::InvalidParameter(_) = e {
                    bail!("{e}");
                }
                failed += 1;
                rec.extend(args.taus.iter().map(|_| "NA".to_string()));
            }
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} rows could not be predicted (NA)",
            preds.len()
        );
    }
    Ok(vec![args.out.clone()])
}

fn methods(args: &BenchArgs, cv_taus: &[f64]) -> Vec<Method> {
    args.methods
        .iter()
        .map(|m| match m {
            MethodName::Tsqrf => Method::Tsqrf(args.forest.config(args.seed)),
            MethodName::Wnw => Method::Wnw(args.wnw.config(cv_taus)),
            MethodName::Oracle => Method::Oracle,
        })
        .collect()
}

pub fn bench(args: &BenchArgs) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    match &args.real {
        Some(path) => bench_real(args, path),
        None => bench_grid(args),
    }
}

fn bench_grid(args: &BenchArgs) -> Result<Vec<PathBuf>> {
    let taus = args.taus.clone().unwrap_or_else(|| GRID_TAUS.to_vec());
    let scenarios = args
        .models
        .iter()
        .flat_map(|&model| {
            args.errors.iter().flat_map(move |&error| {
                args.t.iter().map(move |&t_train| Scenario {
                    model,
                    error,
                    t_train,
                })
            })
        })
        .collect();
    let grid = SimulationGrid {
        scenarios,
        t_test: args.t_test,
        taus: taus.clone(),
        replicates: args.replicates,
        seed: args.seed,
        burn_in: args.burn_in,
        methods: methods(args, &taus),
    };
    let outcome = eval::run_simulation(&grid)?;

    let mut written = Vec::new();
    let mut studies = vec![(Study::Train, "train_metrics.csv")];
    if args.t_test > 0 {
        studies.push((Study::Test, "test_metrics.csv"));
    }
    for (study, name) in studies {
        let path = args.out_dir.join(name);
        eval::write_metrics_csv(outcome.study(study), create(&path)?)?;
        written.push(path);
    }
    let path = args.out_dir.join("report.json");
    eval::write_outcome_json(&outcome, create(&path)?)?;
    written.push(path);
    let path = args.out_dir.join("biases.csv");
    eval::write_biases_csv(&outcome.biases, create(&path)?)?;
    written.push(path);

    println!(
        "{:<6} {:<6} {:<8} {:>6} {:>6} {:>10} {:>10} {:>10}",
        "study", "model", "error", "T", "tau", "method", "mbias", "mse"
    );
    for r in &outcome.reports {
        println!(
            "{:<6} {:<6} {:<8} {:>6} {:>6} {:>10} {:>10.4} {:>10.4}",
            r.study, r.model, r.error, r.t, r.tau, r.method, r.mbias, r.mse
        );
    }
    Ok(written)
}

fn bench_real(args: &BenchArgs, path: &Path) -> Result<Vec<PathBuf>> {
    let taus = args.taus.clone().unwrap_or_else(|| COVERAGE_TAUS.to_vec());
    let raw = load_series_csv(path, &args.column, args.drop_missing)?;
    let series = if args.raw { raw } else { log_returns(&raw)? };
    let methods: Vec<Method> = methods(args, &taus);
    let out = eval::run_coverage(&series, args.train_frac, args.p, &taus, &methods, args.seed)?;

    let mut written = Vec::new();
    let cov = args.out_dir.join("coverage.csv");
    eval::write_coverage_csv(&out.rows, create(&cov)?)?;
    written.push(cov);
    for table in &out.predictions {
        let path = args
            .out_dir
            .join(format!("predictions_{}_{}.csv", table.method, table.split));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(quantile_header(&["t", "y"], &table.taus))?;
        for ((t, y), q) in table.t.iter().zip(&table.y).zip(&table.q) {
            let mut rec = vec![t.to_string(), y.to_string()];
            rec.extend(q.iter().map(f64::to_string));
            w.write_record(rec)?;
        }
        w.flush()?;
        written.push(path);
    }
    println!("training observations: {}", out.n_train);
    println!("{:<6} {:>8} {:>7} {:>8}", "split", "method", "tau", "theta");
    for r in &out.rows {
        println!(
            "{:<6} {:>8} {:>7} {:>8.4}",
            r.split, r.method, r.tau, r.theta
        );
    }
    Ok(written)
}

pub fn plot(args: &PlotArgs) -> Result<Vec<PathBuf>> {
    // render fully before touching the output path
    let svg = match args.kind {
        PlotKind::Band => {
            let data = plot::read_band(&args.input)?;
            plot::band_svg(
                &data,
                args.title.as_deref().unwrap_or("Conditional quantiles"),
            )
        }
        PlotKind::Hist => {
            if args.bins == 0 {
                bail!("--bins must be positive");
            }
            let values = plot::read_column(&args.input, &args.column)?;
            plot::hist_svg(
                &values,
                args.bins,
                args.title.as_deref().unwrap_or("Bias distribution"),
                &args.column,
            )
        }
    };
    let mut w = create(&args.out)?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(vec![args.out.clone()])
}
