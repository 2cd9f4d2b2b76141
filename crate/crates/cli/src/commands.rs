use std::path::Path;

use anyhow::Result;
use hsad::detector::{read_model, train, write_model};
use hsad::evaluation::{evaluate, split};
use hsad::features::{featurize, read_features, write_features};
use hsad::signal::parse_nodes;
use hsad::synthetic::generate_synthetic;
use hsad::trace::{write_traces, TraceReader};
use hsad::{
    Error, EvalReport, FeatureMode, FeatureSet, FeaturizeOptions, LabelRule, LayerSelection, NodeTag,
    ObservationPoint, SelectionSpec, SyntheticSpec,
};
use serde::Serialize;

use crate::args::{AblateArgs, EvalArgs, FeaturizeArgs, SelectArgs, SplitArgs, Suite, SynthArgs, TrainArgs};
use crate::run::{open_input, read_input, sha256_hex, thread_budget, write_atomic, write_json_atomic, Run};

fn parse_points(s: &str) -> Result<Vec<ObservationPoint>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(ObservationPoint::ALL.to_vec());
    }
    Ok(s.split(',').map(str::parse).collect::<hsad::Result<Vec<_>>>()?)
}

fn parse_obs_filter(s: &str) -> Result<Option<ObservationPoint>> {
    if s.trim().eq_ignore_ascii_case("any") {
        return Ok(None);
    }
    Ok(Some(s.parse()?))
}

fn label_rule(tau: Option<f64>) -> Result<Option<LabelRule>> {
    match tau {
        Some(t) if !t.is_finite() => Err(Error::Config(format!("tau must be finite, got {t}")).into()),
        Some(t) => Ok(Some(LabelRule { tau: t })),
        None => Ok(None),
    }
}

impl SelectArgs {
    fn spec(&self) -> Result<SelectionSpec> {
        Ok(SelectionSpec { layers: self.layers.clone(), nodes: parse_nodes(&self.nodes)? })
    }

    fn options(&self, threads: usize) -> Result<FeaturizeOptions> {
        Ok(FeaturizeOptions {
            obs_point: parse_obs_filter(&self.obs_point)?,
            label_rule: label_rule(self.tau)?,
            threads,
        })
    }
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut run = Run::start("synth", args)?;
    let anomaly_dims = match &args.anomaly_dim_list {
        Some(list) => list.clone(),
        None => (0..args.anomaly_dims).collect(),
    };
    let spec = SyntheticSpec {
        anomaly_dims,
        anomaly_bin: args.anomaly_bin,
        anomaly_amplitude: args.amplitude,
        positive_fraction: args.pos_frac,
        seed: args.seed,
        column_offset_range: args.offset_range,
        observation_points: parse_points(&args.obs_points)?,
        ..SyntheticSpec::new(args.layers, args.dim, args.count)
    };
    let (header, records) = generate_synthetic(&spec)?;
    write_atomic(&args.out, |w| write_traces(&header, &records, w))?;
    run.seed(args.seed);
    run.finish(&[&args.out])?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

pub fn featurize_cmd(args: &FeaturizeArgs) -> Result<()> {
    let mut run = Run::start("featurize", args)?;
    let select = args.select.spec()?;
    let opts = args.select.options(thread_budget()?)?;
    let set = featurize(open_input(&args.traces)?, &select, args.mode.into(), &opts)?;
    write_atomic(&args.out, |w| write_features(&set, w))?;
    run.input(&args.traces, set.header.source_digest.clone());
    if let LayerSelection::Random { seed, .. } = args.select.layers {
        run.seed(seed);
    }
    run.finish(&[&args.out])?;
    println!(
        "wrote {} feature records (dim {}, layers {:?}, N {}) to {}",
        set.records.len(),
        set.header.dim,
        set.header.layers,
        set.header.signal_len,
        args.out.display()
    );
    Ok(())
}

fn load_features(path: &Path, run: &mut Run) -> Result<FeatureSet> {
    let bytes = read_input(path)?;
    run.input(path, sha256_hex(&bytes));
    Ok(read_features(bytes.as_slice()).map_err(|e| e.context(path.display()))?)
}

pub fn split_cmd(args: &SplitArgs) -> Result<()> {
    let mut run = Run::start("split", args)?;
    let set = load_features(&args.features, &mut run)?;
    let (train_records, test_records) = split(&set.records, args.test_fraction, args.seed)?;
    let (train_set, test_set) = (set.with_records(train_records), set.with_records(test_records));
    write_atomic(&args.train_out, |w| write_features(&train_set, w))?;
    write_atomic(&args.test_out, |w| write_features(&test_set, w))?;
    run.seed(args.seed);
    run.finish(&[&args.train_out, &args.test_out])?;
    println!("split {} records: {} train, {} test", set.records.len(), train_set.records.len(), test_set.records.len());
    Ok(())
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let mut run = Run::start("train", args)?;
    let set = load_features(&args.features, &mut run)?;
    let (model, report) = train(&set, &args.hyper.config(args.seed))?;
    write_atomic(&args.out, |w| write_model(&model, w))?;
    run.seed(args.seed);
    run.finish(&[&args.out])?;
    println!("final train loss: {:.6}", report.final_loss().unwrap_or(f64::NAN));
    Ok(())
}

pub fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let mut run = Run::start("eval", args)?;
    let set = load_features(&args.features, &mut run)?;
    let model_bytes = read_input(&args.model)?;
    run.input(&args.model, sha256_hex(&model_bytes));
    let model = read_model(model_bytes.as_slice()).map_err(|e| e.context(args.model.display()))?;
    let report = evaluate(&model, &set)?;
    write_json_atomic(&args.report, &report)?;
    run.seed(model.seed);
    run.finish(&[&args.report])?;
    println!("acc {:.4}  auroc {:.4}  (tp {} fp {} fn {} tn {})", report.acc, report.auroc, report.tp, report.fp, report.fn_, report.tn);
    Ok(())
}

#[derive(Clone, Debug)]
struct Condition {
    name: String,
    select: SelectionSpec,
    mode: FeatureMode,
    obs_point: Option<ObservationPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub condition: String,
    pub seed: u64,
    pub mode: FeatureMode,
    pub layers: Vec<usize>,
    pub nodes: Vec<NodeTag>,
    pub obs_point: Option<ObservationPoint>,
    pub n_train: usize,
    pub n_test: usize,
    pub auroc: f64,
    pub acc: f64,
}

#[derive(Debug, Serialize)]
pub struct AblationTable {
    pub suite: Suite,
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

fn observation_points_present(bytes: &[u8]) -> hsad::Result<Vec<ObservationPoint>> {
    let mut seen = Vec::new();
    let mut reader = TraceReader::new(bytes)?;
    while let Some(r) = reader.next_record()? {
        if !seen.contains(&r.observation_point) {
            seen.push(r.observation_point);
        }
    }
    Ok(seen)
}

fn conditions(args: &AblateArgs, bytes: &[u8]) -> Result<Vec<Condition>> {
    let base = args.select.spec()?;
    let obs = parse_obs_filter(&args.select.obs_point)?;
    let mode: FeatureMode = args.mode.into();
    let cond = |name: String, select: SelectionSpec, mode: FeatureMode, obs_point| Condition { name, select, mode, obs_point };
    Ok(match args.suite {
        Suite::TimeVsFreq => [FeatureMode::FftMax, FeatureMode::TimeMax]
            .into_iter()
            .map(|m| cond(m.to_string(), base.clone(), m, obs))
            .collect(),
        Suite::Nodes => NodeTag::ALL
            .iter()
            .map(|&n| cond(n.to_string(), SelectionSpec { nodes: vec![n], ..base.clone() }, mode, obs))
            .chain([cond("all".into(), SelectionSpec { nodes: NodeTag::ALL.to_vec(), ..base.clone() }, mode, obs)])
            .collect(),
        Suite::Layers => {
            let layers = TraceReader::new(bytes)?.header().num_layers;
            let with = |layers: LayerSelection| SelectionSpec { layers, ..base.clone() };
            let quarter = (layers / 4).max(1);
            let half = (layers / 2).max(1);
            vec![
                cond("single".into(), with(LayerSelection::Explicit(vec![layers])), mode, obs),
                cond(format!("random:{quarter}"), with(LayerSelection::Random { k: quarter, seed: args.seed + 1 }), mode, obs),
                cond(format!("random:{half}"), with(LayerSelection::Random { k: half, seed: args.seed + 2 }), mode, obs),
                cond("all".into(), with(LayerSelection::All), mode, obs),
            ]
        }
        Suite::ObsPoints => {
            let present = observation_points_present(bytes)?;
            let absent: Vec<&str> =
                ObservationPoint::ALL.iter().filter(|p| !present.contains(p)).map(|p| p.as_str()).collect();
            if !absent.is_empty() {
                return Err(Error::Data(format!("trace file lacks observation points: {}", absent.join(", "))).into());
            }
            ObservationPoint::ALL.iter().map(|&p| cond(p.to_string(), base.clone(), mode, Some(p))).collect()
        }
    })
}

pub fn ablate_cmd(args: &AblateArgs) -> Result<()> {
    let mut run = Run::start("ablate", args)?;
    let bytes = read_input(&args.traces)?;
    run.input(&args.traces, sha256_hex(&bytes));
    let threads = thread_budget()?;
    let rule = label_rule(args.select.tau)?;

    let mut rows = Vec::new();
    for (i, c) in conditions(args, &bytes)?.into_iter().enumerate() {
        let seed = args.seed + i as u64;
        let opts = FeaturizeOptions { obs_point: c.obs_point, label_rule: rule, threads };
        let set = featurize(bytes.as_slice(), &c.select, c.mode, &opts).map_err(|e| e.context(&c.name))?;
        let (train_records, test_records) = split(&set.records, args.test_fraction, seed)?;
        let (train_set, test_set) = (set.with_records(train_records), set.with_records(test_records));
        let (model, _) = train(&train_set, &args.hyper.config(seed)).map_err(|e| e.context(&c.name))?;
        let report: EvalReport = evaluate(&model, &test_set).map_err(|e| e.context(&c.name))?;
        println!("{:<12} auroc {:.4}  acc {:.4}", c.name, report.auroc, report.acc);
        rows.push(AblationRow {
            condition: c.name,
            seed,
            mode: c.mode,
            layers: set.header.layers.clone(),
            nodes: set.header.nodes.clone(),
            obs_point: c.obs_point,
            n_train: train_set.records.len(),
            n_test: test_set.records.len(),
            auroc: report.auroc,
            acc: report.acc,
        });
    }
    let table = AblationTable { suite: args.suite, seed: args.seed, rows };
    write_json_atomic(&args.out, &table)?;
    run.seed(args.seed);
    run.condition_seeds(table.rows.iter().map(|r| (r.condition.clone(), r.seed)).collect());
    run.finish(&[&args.out])?;
    Ok(())
}
