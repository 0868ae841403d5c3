use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use clap::Parser;
use ndarray::{concatenate, Array2, Axis};

use idgnn_core::analytic::walk_count_features;
use idgnn_core::dataset::{read_jsonl, GraphRecord};
use idgnn_core::expressiveness::{render_csv, run_regular_experiment};
use idgnn_core::generators::{gen_dataset_sweep, Family, GeneratorSpec};
use idgnn_core::graph::GraphJson;
use idgnn_core::nn::{
    init_model, match_budget, read_checkpoint, write_checkpoint, Aggregation, Flavor, HeadKind,
    Model, ModelConfig, Variant,
};
use idgnn_core::tasks::{
    evaluate, make_graph_cc_task, make_node_cc_task, make_spd_task, serde_name, split, train,
    TaskData, TrainConfig, TrainReport,
};
use idgnn_core::wl::{are_isomorphic, dedupe_isomorphic, wl_graph_hash};
use idgnn_core::{Error, Graph, Result};

use crate::manifest::{write_atomic, RunManifest};
use crate::*;

pub const STANDARD_SETTINGS: [(usize, usize); 3] = [(64, 4), (40, 5), (96, 6)];

pub fn run(argv: &[String]) -> Result<()> {
    let cli =
        match Cli::try_parse_from(std::iter::once("idgnn".to_string()).chain(argv.iter().cloned()))
        {
            Ok(c) => c,
            Err(e) => {
                let usage = e.use_stderr();
                e.print()?;
                return if usage {
                    Err(Error::Input("invalid arguments".into()))
                } else {
                    Ok(())
                };
            }
        };
    match cli.command {
        Command::Generate(a) => generate(a, argv),
        Command::Features(a) => features(a, argv),
        Command::Wl(c) => wl(c, argv),
        Command::Expressiveness(a) => expressiveness(a, argv),
        Command::Train(a) => train_cmd(a, argv),
        Command::Eval(a) => eval_cmd(a, argv),
        Command::Report(a) => report(a, argv),
        Command::Replay { manifest } => {
            let m: RunManifest = serde_json::from_slice(&read_bytes(&manifest)?)?;
            if m.argv.first().is_some_and(|c| c == "replay") {
                return Err(Error::Input("a manifest cannot replay a replay".into()));
            }
            run(&m.argv)
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn read_dataset(path: &Path) -> Result<Vec<GraphRecord>> {
    read_jsonl(BufReader::new(open(path)?))
}

fn records_to_bytes(records: &[GraphRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    idgnn_core::dataset::write_jsonl(&mut out, records).expect("writing to memory");
    out
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

/// Graphs of a single-graph JSON document or of a JSONL dataset.
fn read_graphs(path: &Path) -> Result<Vec<Graph>> {
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| Error::Input(format!("{} is not UTF-8", path.display())))?;
    if let Ok(g) = serde_json::from_str::<GraphJson>(&text) {
        return Ok(vec![g.into_graph()?]);
    }
    Ok(read_jsonl(text.as_bytes())?
        .into_iter()
        .map(|r| r.graph)
        .collect())
}

fn read_graph(path: &Path) -> Result<Graph> {
    read_graphs(path)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Input(format!("{} holds no graph", path.display())))
}

fn generate(a: GenerateArgs, argv: &[String]) -> Result<()> {
    let (family, degree, name) = match a.family {
        FamilyArg::DRegular => (Family::DRegular, a.d, "--d"),
        FamilyArg::SmallWorld => (Family::SmallWorld, a.k, "--k"),
        FamilyArg::ScaleFree => (Family::ScaleFree, a.m, "--m"),
    };
    let degree =
        degree.ok_or_else(|| Error::Input(format!("{name} is required for this family")))?;
    let spec = GeneratorSpec {
        family,
        num_nodes: a.n,
        degree_param: degree,
        prob: a.p[0],
        seed: a.seed,
    };
    let graphs = gen_dataset_sweep(&spec, &a.p, a.count, a.seed)?;
    let records: Vec<_> = graphs.into_iter().map(GraphRecord::unlabeled).collect();
    write_atomic(&a.out, &records_to_bytes(&records))?;
    let mut m = RunManifest::new("generate", argv);
    m.seeds.push(a.seed);
    m.outputs.push(a.out.display().to_string());
    m.write_beside_outputs()
}

fn features(a: FeaturesArgs, argv: &[String]) -> Result<()> {
    let mut records = read_dataset(&a.input)?;
    for r in &mut records {
        let counts = walk_count_features(&r.graph, a.k)?;
        let n = r.graph.num_nodes();
        let extra = Array2::from_shape_fn((n, a.k), |(v, j)| counts[v][j] as f64);
        let x = match r.graph.node_features() {
            Some(x) => concatenate![Axis(1), x.view(), extra.view()],
            None => extra,
        };
        r.graph = r.graph.with_node_features(x)?;
    }
    write_atomic(&a.out, &records_to_bytes(&records))?;
    let mut m = RunManifest::new("features", argv);
    m.input(&a.input)?;
    m.outputs.push(a.out.display().to_string());
    m.write_beside_outputs()
}

fn wl(c: WlCommand, argv: &[String]) -> Result<()> {
    match c {
        WlCommand::Hash { input, out } => {
            let graphs = read_graphs(&input)?;
            let text: String = graphs
                .iter()
                .map(|g| format!("{:016x}\n", wl_graph_hash(g)))
                .collect();
            match out {
                Some(out) => {
                    write_atomic(&out, text.as_bytes())?;
                    let mut m = RunManifest::new("wl", argv);
                    m.input(&input)?;
                    m.outputs.push(out.display().to_string());
                    m.write_beside_outputs()?;
                }
                None => print!("{text}"),
            }
        }
        WlCommand::Compare { a, b } => {
            let (ga, gb) = (read_graph(&a)?, read_graph(&b)?);
            let (ha, hb) = (wl_graph_hash(&ga), wl_graph_hash(&gb));
            println!("{ha:016x}\n{hb:016x}");
            let verdict = if are_isomorphic(&ga, &gb)? {
                "isomorphic"
            } else if ha == hb {
                "WL-indistinguishable, NOT isomorphic"
            } else {
                "WL-distinguishable, NOT isomorphic"
            };
            println!("{verdict}");
        }
        WlCommand::Dedupe { input, out } => {
            let records = read_dataset(&input)?;
            let graphs: Vec<Graph> = records.iter().map(|r| r.graph.clone()).collect();
            let kept = dedupe_isomorphic(&graphs)?;
            let kept: Vec<GraphRecord> = kept.into_iter().map(|i| records[i].clone()).collect();
            eprintln!("kept {} of {} graphs", kept.len(), records.len());
            write_atomic(&out, &records_to_bytes(&kept))?;
            let mut m = RunManifest::new("wl", argv);
            m.input(&input)?;
            m.outputs.push(out.display().to_string());
            m.write_beside_outputs()?;
        }
    }
    Ok(())
}

fn expressiveness(a: ExpressivenessArgs, argv: &[String]) -> Result<()> {
    let settings: Vec<(usize, usize)> = if a.standard_settings {
        STANDARD_SETTINGS.to_vec()
    } else {
        if a.n.len() != a.d.len() {
            return Err(Error::Input(
                "--n and --d need the same number of values".into(),
            ));
        }
        a.n.iter().copied().zip(a.d.iter().copied()).collect()
    };
    let mut reports = Vec::with_capacity(settings.len());
    for (n, d) in settings {
        reports.push(run_regular_experiment(n, d, a.count, &a.k, a.seed)?);
    }
    let csv = a.csv.unwrap_or_else(|| a.out.with_extension("csv"));
    write_atomic(&a.out, &json_bytes(&reports)?)?;
    write_atomic(&csv, render_csv(&reports).as_bytes())?;
    print!("{}", render_csv(&reports));
    let mut m = RunManifest::new("expressiveness", argv);
    m.seeds.push(a.seed);
    m.outputs.push(a.out.display().to_string());
    m.outputs.push(csv.display().to_string());
    m.write_beside_outputs()
}

fn build_task(t: &TaskArgs, records: &[GraphRecord]) -> Result<TaskData> {
    let graphs: Vec<Graph> = records.iter().map(|r| r.graph.clone()).collect();
    match t.task {
        TaskArg::NodeCc => make_node_cc_task(&graphs),
        TaskArg::GraphCc => make_graph_cc_task(&graphs),
        TaskArg::EdgeSpd => make_spd_task(&graphs, t.pairs_per_graph, t.seed),
    }
}

fn feature_width(records: &[GraphRecord]) -> Result<usize> {
    let widths: Vec<usize> = records
        .iter()
        .map(|r| r.graph.node_features().map_or(1, |x| x.ncols()))
        .collect();
    match widths.first() {
        None => Err(Error::Input("dataset is empty".into())),
        Some(&w) if widths.iter().all(|&x| x == w) => Ok(w),
        Some(_) => Err(Error::Input("graphs disagree on node feature width".into())),
    }
}

fn model_config(a: &TrainArgs, input_dim: usize, num_classes: usize) -> Result<ModelConfig> {
    let flavor = match a.flavor {
        FlavorArg::Gcn => Flavor::Gcn,
        FlavorArg::Sage => Flavor::Sage,
        FlavorArg::Gin => Flavor::Gin,
    };
    let variant = match a.variant {
        VariantArg::Plain => Variant::Plain,
        VariantArg::IdFull => Variant::IdFull,
        VariantArg::IdFast => Variant::IdFast,
    };
    let mut c = ModelConfig::new(flavor, variant, input_dim, num_classes);
    let edge = a.task.task == TaskArg::EdgeSpd;
    c.num_layers = a.layers.unwrap_or(if edge { 5 } else { 3 });
    c.hidden_dim = a.hidden;
    c.fast_k = a.fast_k;
    c.seed = a.task.seed;
    if let Some(agg) = a.aggregation {
        c.aggregation = match agg {
            AggArg::Sum => Aggregation::Sum,
            AggArg::Mean => Aggregation::Mean,
            AggArg::Max => Aggregation::Max,
        };
    }
    if edge && variant != Variant::IdFull {
        c.head = HeadKind::PairMlp { hidden: a.hidden };
    }
    if a.match_params && variant != Variant::Plain {
        let plain = Model::zeros(ModelConfig {
            variant: Variant::Plain,
            ..c
        })?;
        c.hidden_dim = match_budget(c, plain.param_count(), a.hidden)?.ok_or_else(|| {
            Error::Input("no hidden width fits the plain parameter budget".into())
        })?;
        if let HeadKind::PairMlp { .. } = c.head {
            c.head = HeadKind::PairMlp {
                hidden: c.hidden_dim,
            };
        }
    }
    Ok(c)
}

fn train_cmd(a: TrainArgs, argv: &[String]) -> Result<()> {
    let records = read_dataset(&a.task.data)?;
    let task = build_task(&a.task, &records)?;
    let config = model_config(&a, feature_width(&records)?, task.spec.num_classes)?;
    let mut model = init_model(config)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.task.seed,
        batch_size: a.batch_size,
        train_fraction: a.task.train_fraction,
        record_wall_clock: a.timing,
    };
    let report = train(&mut model, &task, &cfg)?;
    let mut ckpt = Vec::new();
    write_checkpoint(&model, &mut ckpt)?;
    write_atomic(&a.out_model, &ckpt)?;
    write_atomic(&a.out_report, &json_bytes(&report)?)?;
    println!(
        "{} {} {}: val accuracy {:.4} ({})",
        serde_name(&task.spec.kind),
        serde_name(&config.flavor),
        serde_name(&config.variant),
        report.val_accuracy,
        serde_name(&report.wiring)
    );
    let mut m = RunManifest::new("train", argv);
    m.seeds.extend([a.task.seed, config.seed]);
    m.input(&a.task.data)?;
    m.outputs.push(a.out_model.display().to_string());
    m.outputs.push(a.out_report.display().to_string());
    m.write_beside_outputs()
}

#[derive(serde::Serialize)]
struct EvalReport<'a> {
    model: ModelConfig,
    task: &'a idgnn_core::tasks::TaskSpec,
    split: &'a str,
    num_graphs: usize,
    accuracy: f64,
}

fn eval_cmd(a: EvalArgs, argv: &[String]) -> Result<()> {
    let records = read_dataset(&a.task.data)?;
    let task = build_task(&a.task, &records)?;
    let model = read_checkpoint(BufReader::new(open(&a.model)?))?;
    let idx: Vec<usize> = match a.split {
        SplitArg::All => (0..task.items.len()).collect(),
        s => {
            let (tr, va) = split(task.items.len(), a.task.train_fraction, a.task.seed)?;
            if s == SplitArg::Train {
                tr
            } else {
                va
            }
        }
    };
    let items: Vec<_> = idx.iter().map(|&i| &task.items[i]).collect();
    let accuracy = evaluate(&model, &items)?;
    let split_name = match a.split {
        SplitArg::All => "all",
        SplitArg::Train => "train",
        SplitArg::Val => "val",
    };
    let report = EvalReport {
        model: model.config,
        task: &task.spec,
        split: split_name,
        num_graphs: items.len(),
        accuracy,
    };
    println!(
        "accuracy {accuracy:.4} on {} graphs ({split_name})",
        items.len()
    );
    if let Some(out) = a.out {
        write_atomic(&out, &json_bytes(&report)?)?;
        let mut m = RunManifest::new("eval", argv);
        m.seeds.push(a.task.seed);
        m.input(&a.task.data)?;
        m.input(&a.model)?;
        m.outputs.push(out.display().to_string());
        m.write_beside_outputs()?;
    }
    Ok(())
}

fn report(a: ReportArgs, argv: &[String]) -> Result<()> {
    let mut csv = format!("{}\n", TrainReport::CSV_HEADER);
    let mut m = RunManifest::new("report", argv);
    for path in &a.reports {
        let r: TrainReport = serde_json::from_slice(&read_bytes(path)?)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        csv.push_str(&r.csv_row(&name));
        csv.push('\n');
        m.input(path)?;
    }
    write_atomic(&a.out, csv.as_bytes())?;
    m.outputs.push(a.out.display().to_string());
    m.write_beside_outputs()
}
