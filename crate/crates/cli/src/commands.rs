use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cadapt_core::best_response::{find_cost_reducing_perturbation, flipset};
use cadapt_core::datasets::{read_csv, write_csv, LabelOracle};
use cadapt_core::evaluation::{cross_validate_with, evaluate_with, lambda_sweep_with, true_improvement, CVSummary};
use cadapt_core::seed::{self, Stream};
use cadapt_core::training::fit;
use cadapt_core::{
    generate_toy, make_folds, CostModel, CostSpec, Dataset, EvalOptions, EvalReport, Exec, FeatureKind,
    FeatureTaxonomy, LabelSpec, ToyParams, TrainConfig, TrainedModel,
};
use rand::seq::SliceRandom;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{Cli, Command, DataArgs, Failure};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::GenerateToy(a) => generate(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Flipset(a) => show_flipset(cli, a),
        Command::Perturb(a) => perturb(cli, a),
        Command::Sweep(a) => sweep(cli, a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).map_err(|_| Failure::Usage(format!("{} is not UTF-8", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Outcome {
    std::fs::write(path, contents).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit_manifest(m: &RunManifest, output: Option<&Path>) -> Outcome {
    m.emit(output)
        .map_err(|e| Failure::Usage(format!("cannot write manifest: {e}")))
}

fn with_context(path: &Path) -> impl Fn(cadapt_core::Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Usage(msg) => Failure::Usage(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn load_data(args: &DataArgs, m: &mut RunManifest) -> Result<Dataset, Failure> {
    let tax_text = read_text(&args.taxonomy)?;
    m.config(&args.taxonomy, tax_text.as_bytes());
    let tax = FeatureTaxonomy::from_json(&tax_text).map_err(with_context(&args.taxonomy))?;
    let bytes = read(&args.data)?;
    m.input(&args.data, &bytes);
    let name = args.data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let label = LabelSpec::new(args.label_column.clone(), args.positive.clone());
    let mut data = read_csv(&bytes[..], tax, &label, &name).map_err(with_context(&args.data))?;
    if let Some(path) = &args.oracle {
        let text = read_text(path)?;
        m.config(path, text.as_bytes());
        let oracle: LabelOracle = serde_json::from_str(&text).map_err(|e| with_context(path)(e.into()))?;
        data = data.with_oracle(oracle).map_err(with_context(path))?;
    }
    Ok(data)
}

fn load_cost(path: &Path, tax: &FeatureTaxonomy, m: &mut RunManifest) -> Result<CostModel, Failure> {
    let text = read_text(path)?;
    m.config(path, text.as_bytes());
    CostSpec::from_json(&text).and_then(|s| s.build(tax)).map_err(with_context(path))
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>, m: &mut RunManifest) -> Result<TrainConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = read_text(p)?;
            m.config(p, text.as_bytes());
            TrainConfig::from_json(&text).map_err(with_context(p))?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    m.seed = cfg.seed;
    Ok(cfg)
}

fn load_model(path: &Path, tax: &FeatureTaxonomy, m: &mut RunManifest) -> Result<TrainedModel, Failure> {
    let text = read_text(path)?;
    m.input(path, text.as_bytes());
    let model = TrainedModel::from_json(&text).map_err(with_context(path))?;
    model.check_taxonomy(tax).map_err(with_context(path))?;
    Ok(model)
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn generate(cli: &Cli, a: &crate::GenerateToyArgs) -> Outcome {
    let mut m = RunManifest::new("generate-toy", 0);
    let mut params = match &a.params {
        Some(p) => {
            let text = read_text(p)?;
            m.config(p, text.as_bytes());
            serde_json::from_str::<ToyParams>(&text).map_err(|e| with_context(p)(e.into()))?
        }
        None => ToyParams::default(),
    };
    if let Some(n) = a.n {
        params.n = n;
    }
    if let Some(s) = cli.seed {
        params.seed = s;
    }
    m.seed = params.seed;
    params.validate()?;
    let data = generate_toy(&params)?;

    let mut csv = Vec::new();
    write_csv(&data, "y", &mut csv)?;
    write(&a.out, &csv)?;
    write(&a.taxonomy, (data.taxonomy().to_json() + "\n").as_bytes())?;
    let oracle_path = a.oracle.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".oracle.json");
        PathBuf::from(s)
    });
    let oracle = serde_json::to_string_pretty(&params.oracle()).expect("oracle serializes") + "\n";
    write(&oracle_path, oracle.as_bytes())?;
    emit_manifest(&m, Some(&a.out))?;

    if cli.json {
        print_json(&json!({
            "rows": data.n(),
            "data": a.out,
            "taxonomy": a.taxonomy,
            "oracle": oracle_path,
            "params": params,
        }));
    } else {
        println!("wrote {} rows to {}", data.n(), a.out.display());
        println!("taxonomy: {}", a.taxonomy.display());
        println!("oracle:   {}", oracle_path.display());
    }
    Ok(())
}

fn train(cli: &Cli, a: &crate::TrainArgs) -> Outcome {
    let mut m = RunManifest::new("train", 0);
    let cfg = load_config(a.config.as_ref(), cli.seed, &mut m)?;
    let data = load_data(&a.data, &mut m)?;
    let cost = load_cost(&a.cost, data.taxonomy(), &mut m)?;
    let out = fit(&data, &cost, &cfg)?;
    let trained = TrainedModel::new(&out.model, data.taxonomy(), &cfg);
    write(&a.out, (trained.to_json() + "\n").as_bytes())?;
    emit_manifest(&m, Some(&a.out))?;

    if cli.json {
        print_json(&json!({
            "model": trained,
            "loss": out.loss,
            "converged": out.converged,
            "iterations": out.iterations,
        }));
    } else {
        println!(
            "{} on {} rows: loss {:.6}, {} iterations{}",
            cfg.method,
            data.n(),
            out.loss,
            out.iterations,
            if out.converged { "" } else { " (not converged)" }
        );
        println!("{:<16} {:>12}", "feature", "weight");
        println!("{:<16} {:>12.6}", "(intercept)", out.model.intercept);
        for (name, w) in data.taxonomy().names().zip(&out.model.weights) {
            println!("{name:<16} {w:>12.6}");
        }
        println!("model written to {}", a.out.display());
    }
    Ok(())
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn eval(cli: &Cli, a: &crate::EvalArgs) -> Outcome {
    let mut m = RunManifest::new("eval", 0);
    let data = load_data(&a.data, &mut m)?;
    let trained = load_model(&a.model, data.taxonomy(), &mut m)?;
    let cost = load_cost(&a.cost, data.taxonomy(), &mut m)?;
    let opts = EvalOptions {
        deployment_family: a.response.into(),
        improvement_base: a.improvement_base.into(),
    };
    let mut cfg = trained.config.clone();
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    m.seed = cfg.seed;

    match a.cv {
        Some(k) => {
            let folds = make_folds(data.n(), k, cfg.seed)?;
            let summary = cross_validate_with(&data, &cost, &cfg, &folds, &opts, Exec::default())?;
            report_cv(cli, a, &summary)?;
        }
        None => {
            let w = trained.linear();
            let report = evaluate_with(&w, &data, &cost, &opts, Exec::default())?
                .labelled(trained.method.to_string(), trained.config.lambda);
            let gain = match data.oracle() {
                Some(_) => Some(true_improvement(&w, &data, &cost)?),
                None => None,
            };
            report_single(cli, a, &report, gain)?;
        }
    }
    emit_manifest(&m, a.out.as_deref().or(a.csv.as_deref()))
}

fn report_single(cli: &Cli, a: &crate::EvalArgs, r: &EvalReport, gain: Option<f64>) -> Outcome {
    let mut value = serde_json::to_value(r).expect("report serializes");
    if let Some(g) = gain {
        value["true_improvement"] = json!(g);
    }
    let text = serde_json::to_string_pretty(&value).expect("report serializes") + "\n";
    if let Some(out) = &a.out {
        write(out, text.as_bytes())?;
    }
    if let Some(path) = &a.csv {
        let summary = CVSummary::single(r.clone());
        let mut buf = Vec::new();
        summary.write_csv(&mut buf)?;
        write(path, &buf)?;
    }
    if cli.json {
        print!("{text}");
    } else {
        println!("method {} (lambda {}), {} rows", r.method, r.lambda, r.n_eval);
        println!("{:<20} {:>10}", "metric", "value");
        println!("{:<20} {:>10}", "test error", pct(r.test_error));
        println!("{:<20} {:>10}", "deployment error", pct(r.deployment_error));
        println!(
            "{:<20} {:>10}",
            "improvement rate",
            r.improvement_rate.map(pct).unwrap_or_else(|| "n/a".into())
        );
        if let Some(g) = gain {
            println!("{:<20} {:>10.4}", "true improvement", g);
        }
    }
    Ok(())
}

fn report_cv(cli: &Cli, a: &crate::EvalArgs, s: &CVSummary) -> Outcome {
    let text = serde_json::to_string_pretty(s).expect("summary serializes") + "\n";
    if let Some(out) = &a.out {
        write(out, text.as_bytes())?;
    }
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        write(path, &buf)?;
    }
    if cli.json {
        print!("{text}");
    } else {
        println!("method {} (lambda {}), {}-fold cross-validation", s.method, s.lambda, s.folds.len());
        println!("{:<20} {:>10} {:>10}", "metric", "mean", "std");
        let row = |name: &str, v: Option<cadapt_core::evaluation::MeanStd>| match v {
            Some(v) => println!("{name:<20} {:>10} {:>10}", pct(v.mean), pct(v.std)),
            None => println!("{name:<20} {:>10} {:>10}", "n/a", "n/a"),
        };
        row("test error", Some(s.test_error));
        row("deployment error", Some(s.deployment_error));
        row("improvement rate", s.improvement_rate);
    }
    Ok(())
}

fn show_flipset(cli: &Cli, a: &crate::FlipsetArgs) -> Outcome {
    let mut m = RunManifest::new("flipset", cli.seed.unwrap_or(0));
    let data = load_data(&a.data, &mut m)?;
    let trained = load_model(&a.model, data.taxonomy(), &mut m)?;
    let cost = load_cost(&a.cost, data.taxonomy(), &mut m)?;
    if a.row >= data.n() {
        return Err(Failure::Usage(format!("row {} out of range (data has {} rows)", a.row, data.n())));
    }
    let fs = flipset(data.row(a.row), &trained.linear(), &cost, data.taxonomy(), a.family.into())?;
    if cli.json {
        print_json(&fs);
    } else {
        print!("{}", fs.to_markdown(a.round));
    }
    emit_manifest(&m, None)
}

fn perturb(cli: &Cli, a: &crate::PerturbArgs) -> Outcome {
    let mut m = RunManifest::new("perturb", cli.seed.unwrap_or(0));
    let data = load_data(&a.data, &mut m)?;
    let trained = load_model(&a.model, data.taxonomy(), &mut m)?;
    let cost = load_cost(&a.cost, data.taxonomy(), &mut m)?;
    let w = trained.linear();
    let mut rejected: Vec<usize> = (0..data.n()).filter(|&i| w.predict(data.row(i)) == -1).collect();
    if rejected.is_empty() {
        return Err(Failure::Runtime("the model rejects no subject in the data".into()));
    }
    rejected.shuffle(&mut seed::rng(m.seed, Stream::Sample, 0));
    rejected.truncate(a.sample.max(1));
    rejected.sort_unstable();
    let sample: Vec<Vec<f64>> = rejected.iter().map(|&i| data.row(i).to_vec()).collect();
    let p = find_cost_reducing_perturbation(&cost, &w, data.taxonomy(), &sample)?;
    let spec = p.new_model.to_spec();
    let tax = data.taxonomy();
    let (fi, fj) = (&tax.feature(p.i).name, &tax.feature(p.j).name);
    let block = p.new_model.inv_cov(p.block);

    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&spec).expect("spec serializes") + "\n";
        write(out, text.as_bytes())?;
    }
    if cli.json {
        print_json(&json!({
            "block": p.block,
            "i": fi,
            "j": fj,
            "tau": p.tau,
            "rows": rejected,
            "costs_before": p.costs_before,
            "costs_after": p.costs_after,
            "cost_model": spec,
        }));
    } else {
        let kind = match p.block {
            FeatureKind::Improvable => "improvable",
            FeatureKind::Manipulable => "manipulable",
            FeatureKind::Immutable => "immutable",
        };
        println!("perturb {kind} block at ({fi}, {fj}) with tau = {}", p.tau);
        println!("{:>6} {:>14} {:>14} {:>14}", "row", "cost before", "cost after", "reduction");
        for ((row, b), c) in rejected.iter().zip(&p.costs_before).zip(&p.costs_after) {
            println!("{row:>6} {b:>14.6} {c:>14.6} {:>14.6}", b - c);
        }
        let mut text = String::from("perturbed inverse covariance:\n");
        for r in 0..block.nrows() {
            let cells: Vec<String> = (0..block.ncols()).map(|c| format!("{:>10.6}", block[(r, c)])).collect();
            let _ = writeln!(text, "  [{}]", cells.join(" "));
        }
        print!("{text}");
    }
    emit_manifest(&m, a.out.as_deref())
}

fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let grid: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Failure::Usage(format!("--grid: `{s}` is not a number"))))
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err(Failure::Usage("--grid: no lambda values given".into()));
    }
    Ok(grid)
}

fn sweep(cli: &Cli, a: &crate::SweepArgs) -> Outcome {
    let grid = parse_grid(&a.grid)?;
    let mut m = RunManifest::new("sweep", 0);
    let cfg = load_config(a.config.as_ref(), cli.seed, &mut m)?;
    let data = load_data(&a.data, &mut m)?;
    let cost = load_cost(&a.cost, data.taxonomy(), &mut m)?;
    let folds = make_folds(data.n(), a.folds, cfg.seed)?;
    let result = lambda_sweep_with(&data, &cost, &cfg, &grid, &folds, &EvalOptions::default(), Exec::default())?;
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    write(&a.out, &buf)?;
    emit_manifest(&m, Some(&a.out))?;

    if cli.json {
        print_json(&result);
    } else {
        println!("{:>10} {:>12} {:>12} {:>12}", "lambda", "test error", "deployment", "improvement");
        for s in &result.summaries {
            println!(
                "{:>10} {:>12} {:>12} {:>12}",
                s.lambda,
                pct(s.test_error.mean),
                pct(s.deployment_error.mean),
                s.improvement_rate.map(|v| pct(v.mean)).unwrap_or_else(|| "n/a".into())
            );
        }
        println!("sweep written to {}", a.out.display());
    }
    Ok(())
}
