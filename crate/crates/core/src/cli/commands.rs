use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gaitfeat::{
    aggregate_features, extract_from_segments, extract_transitions, mean_transition_table, read_features,
    render_table, write_features, write_table_csv, Transition,
};
use crate::harness::forest::{ForestParams, RandomForest};
use crate::harness::protocol::{
    decode_ranges, evaluate_trained, folds, gait_ranges, run_fold, summarize, FoldAudit, FoldOutcome, FoldReport,
    Protocol, ProtocolData, ProtocolSummary, Trained, Variant,
};
use crate::harness::train::{Hyper, TrainHistory};
use crate::medstate::{demographic_samples, gait_samples, run_med_protocol, FeatureSource, MedReport};
use crate::net::{load_checkpoint, save_checkpoint};
use crate::pipeline::{cohort_windows, load_windows, save_windows, index_path, ChannelLayout, WindowSet};
use crate::rng::derive_seed;
use crate::simhome::cohort::{generate_cohort, Cohort};
use crate::simhome::io::{load_cohort, read_file, save_cohort, write_file, MANIFEST_NAME};
use crate::stats::{on_off_table, render_on_off, write_on_off_csv, StateDurations};

use super::manifest::{hash_files, sha256_bytes, RunManifest, RUN_FORMAT, RUN_VERSION};
use super::report::{localisation_table, medication_table, protocol_stats, StatsSection};

const FOLD_REPORTS: &str = "fold-reports.csv";
const FOLD_RECORD: &str = "fold.json";
const CHECKPOINT: &str = "model.ckpt";
const FOREST: &str = "forest.json";
const GAIT_FEATURES: &str = "gait-features.csv";

/// Resolved configuration and output directory for one command.
pub struct Context {
    pub cfg: RunConfig,
    pub config_path: Option<PathBuf>,
    pub config_sha256: String,
    pub out: PathBuf,
    started: Instant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FoldRecord {
    config_sha256: String,
    report: FoldReport,
    audit: FoldAudit,
    hyper: Option<Hyper>,
    forest: Option<ForestParams>,
    history: Option<TrainHistory>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryRecord {
    protocol: String,
    variant: String,
    folds: usize,
    f1_mean: f64,
    f1_sd: f64,
    precision_mean: f64,
    precision_sd: f64,
    med_f1_mean: Option<f64>,
    med_f1_sd: Option<f64>,
    med_auroc_mean: Option<f64>,
    med_auroc_sd: Option<f64>,
}

impl From<&ProtocolSummary> for SummaryRecord {
    fn from(s: &ProtocolSummary) -> Self {
        SummaryRecord {
            protocol: s.protocol.name().into(),
            variant: s.variant.name().into(),
            folds: s.n_folds,
            f1_mean: s.f1.0,
            f1_sd: s.f1.1,
            precision_mean: s.precision.0,
            precision_sd: s.precision.1,
            med_f1_mean: s.med_f1.map(|x| x.0),
            med_f1_sd: s.med_f1.map(|x| x.1),
            med_auroc_mean: s.med_auroc.map(|x| x.0),
            med_auroc_sd: s.med_auroc.map(|x| x.1),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EvaluationRecord {
    fold: String,
    precision: f64,
    f1: f64,
    trained_precision: f64,
    trained_f1: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::MissingInput {
        path: path.into(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn existing_manifest(dir: &Path) -> Vec<PathBuf> {
    let p = RunManifest::path_in(dir);
    if p.exists() {
        vec![p]
    } else {
        vec![]
    }
}

fn load_trained(dir: &Path, variant: Variant) -> Result<Trained> {
    Ok(match variant {
        Variant::Rf => Trained::Forest(read_json::<RandomForest>(&dir.join(FOREST))?),
        _ => Trained::Net(load_checkpoint(&dir.join(CHECKPOINT))?),
    })
}

fn train_params(m: &RunManifest) -> Result<(Protocol, Variant)> {
    Ok((Protocol::parse(m.param("protocol")?)?, Variant::parse(m.param("variant")?)?))
}

fn fold_dir(run: &Path, fold: &str) -> PathBuf {
    run.join("folds").join(fold)
}

fn read_fold_reports(run: &Path) -> Result<Vec<FoldReport>> {
    read_file(&run.join(FOLD_REPORTS), "fold-reports")
}

impl Context {
    pub fn new(mut cfg: RunConfig, config_path: Option<PathBuf>, out: PathBuf) -> Result<Self> {
        let root = cfg.seed;
        cfg.eval.train.seed = derive_seed(root, "batching", &[]);
        cfg.eval.forest.seed = derive_seed(root, "bootstrap", &[]);
        cfg.eval.med_forest.seed = derive_seed(root, "medstate", &[]);
        let config_sha256 = sha256_bytes(cfg.to_toml()?.as_bytes());
        Ok(Context {
            cfg,
            config_path,
            config_sha256,
            out,
            started: Instant::now(),
        })
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("cannot create {}: {e}", self.out.display())))
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        command: &str,
        links: &[(&str, &Path)],
        params: &[(&str, String)],
        input_manifests: Vec<PathBuf>,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> Result<()> {
        let m = RunManifest {
            format: RUN_FORMAT.into(),
            version: RUN_VERSION,
            command: command.into(),
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            config_sha256: self.config_sha256.clone(),
            seed: self.cfg.seed,
            links: links.iter().map(|(k, v)| (k.to_string(), v.display().to_string())).collect(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            input_manifests: input_manifests.iter().map(|p| p.display().to_string()).collect(),
            inputs: hash_files(inputs)?,
            outputs: hash_files(outputs)?,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        let path = m.write(&self.out)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    pub fn simulate(&self, pairs: Option<u32>, days: Option<u32>, streams: bool) -> Result<()> {
        let pairs = pairs.unwrap_or(self.cfg.simulate.pairs);
        let days = days.unwrap_or(self.cfg.simulate.days);
        let streams = streams || self.cfg.simulate.streams;
        let cohort = generate_cohort(pairs, days, self.cfg.seed, &self.cfg.simulate.sim)?;
        self.prepare_out()?;
        let written = save_cohort(&cohort, &self.out, streams)?;
        let annotated_h: f64 = cohort
            .sessions
            .iter()
            .flatten()
            .map(|(a, b)| (b - a) as f64 / 3.6e6)
            .sum();
        println!(
            "{} participants ({} PD, {} HC), {} days, {:.2} annotated hours per pair, {} schedule windows",
            cohort.participants.len(),
            cohort.pd().count(),
            cohort.controls().count(),
            days,
            annotated_h / cohort.sessions.len().max(1) as f64,
            cohort.pd().filter_map(|p| p.schedule.as_ref()).map(|s| s.day_windows.len()).sum::<usize>(),
        );
        if streams {
            let packets: usize = written
                .iter()
                .filter(|p| p.to_string_lossy().ends_with(".rssi.csv"))
                .map(|p| fs::read_to_string(p).map(|t| t.lines().count().saturating_sub(2)).unwrap_or(0))
                .sum();
            println!("{packets} RSSI packets in annotated sessions");
        }
        self.finish(
            "simulate",
            &[("cohort", &self.out)],
            &[("pairs", pairs.to_string()), ("days", days.to_string())],
            vec![],
            &[],
            &written,
        )
    }

    pub fn preprocess(&self, input: &Path) -> Result<()> {
        let cohort = load_cohort(input)?;
        let per: Vec<(String, Vec<_>)> = cohort_windows(&cohort);
        for (id, ws) in &per {
            println!("{id}: {} windows", ws.len());
        }
        let set = WindowSet {
            layout: ChannelLayout::full(),
            windows: per.into_iter().flat_map(|(_, w)| w).collect(),
        };
        self.prepare_out()?;
        let path = self.out.join("windows.bin");
        save_windows(&set, &path)?;
        self.finish(
            "preprocess",
            &[("cohort", input), ("windows", &path)],
            &[("windows", set.windows.len().to_string())],
            existing_manifest(input),
            &[input.join(MANIFEST_NAME)],
            &[path.clone(), index_path(&path)],
        )
    }

    fn load_data(&self, m: &RunManifest) -> Result<(Cohort, WindowSet)> {
        let cohort = load_cohort(&m.link("cohort")?)?;
        let set = load_windows(&m.link("windows")?)?;
        Ok((cohort, set))
    }

    fn resume(&self, dir: &Path) -> Result<Option<FoldRecord>> {
        let path = dir.join(FOLD_RECORD);
        if !path.exists() {
            return Ok(None);
        }
        let rec: FoldRecord = read_json(&path)?;
        Ok((rec.config_sha256 == self.config_sha256).then_some(rec))
    }

    fn save_fold(&self, dir: &Path, o: &FoldOutcome) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = vec![];
        match &o.trained {
            Trained::Net(ckpt) => {
                let p = dir.join(CHECKPOINT);
                save_checkpoint(ckpt, &p)?;
                written.push(p);
            }
            Trained::Forest(f) => {
                let p = dir.join(FOREST);
                write_json(&p, f)?;
                written.push(p);
            }
        }
        let p = dir.join("predictions.csv");
        write_file(&p, "predictions", &o.predictions)?;
        written.push(p);
        if !o.gait_rows.is_empty() {
            let p = dir.join(GAIT_FEATURES);
            write_features(&p, &o.gait_rows)?;
            written.push(p);
        }
        // the record goes last so an interrupted fold is retrained
        let p = dir.join(FOLD_RECORD);
        write_json(
            &p,
            &FoldRecord {
                config_sha256: self.config_sha256.clone(),
                report: o.report.clone(),
                audit: o.audit.clone(),
                hyper: o.hyper,
                forest: o.forest.clone(),
                history: o.history.clone(),
            },
        )?;
        written.push(p);
        Ok(written)
    }

    pub fn train(&self, input: &Path, protocol: Protocol, variant: Variant) -> Result<()> {
        let pm = RunManifest::expect(input, "preprocess")?;
        let (cohort, set) = self.load_data(&pm)?;
        let data = ProtocolData::from_set(&cohort, set);
        let folds = folds(protocol, &cohort, self.cfg.eval.four_minute_windows)?;
        self.prepare_out()?;
        let one = |fold: &crate::harness::protocol::Fold| -> Result<(FoldReport, Vec<PathBuf>)> {
            let dir = fold_dir(&self.out, &fold.id);
            if let Some(rec) = self.resume(&dir)? {
                eprintln!("fold {}: reusing saved result", fold.id);
                return Ok((rec.report, vec![]));
            }
            let o = run_fold(&data, protocol, variant, fold, &self.cfg.eval)?;
            eprintln!("fold {}: F1 {:.4}, precision {:.4}", fold.id, o.report.f1, o.report.precision);
            let written = self.save_fold(&dir, &o)?;
            Ok((o.report, written))
        };
        let results: Vec<(FoldReport, Vec<PathBuf>)> = if self.cfg.eval.parallel_folds {
            folds.par_iter().map(one).collect::<Result<_>>()?
        } else {
            folds.iter().map(one).collect::<Result<_>>()?
        };
        let reports: Vec<FoldReport> = results.iter().map(|r| r.0.clone()).collect();
        let mut outputs = vec![];
        for f in &folds {
            let dir = fold_dir(&self.out, &f.id);
            for name in [FOLD_RECORD, CHECKPOINT, FOREST, "predictions.csv", GAIT_FEATURES] {
                let p = dir.join(name);
                if p.exists() {
                    outputs.push(p);
                }
            }
        }
        let summary = summarize(&reports)?;
        let p = self.out.join(FOLD_REPORTS);
        write_file(&p, "fold-reports", &reports)?;
        outputs.push(p);
        let p = self.out.join("summary.json");
        write_json(&p, &summary)?;
        outputs.push(p);
        let table = localisation_table(std::slice::from_ref(&summary));
        let p = self.out.join("table.txt");
        write_text(&p, &table)?;
        outputs.push(p);
        print!("{table}");
        self.finish(
            "train",
            &[("cohort", &pm.link("cohort")?), ("windows", &pm.link("windows")?), ("preprocess", input)],
            &[("protocol", protocol.name().into()), ("variant", variant.name().into())],
            existing_manifest(input),
            &[pm.link("windows")?],
            &outputs,
        )
    }

    pub fn evaluate(&self, input: &Path) -> Result<()> {
        let tm = RunManifest::expect(input, "train")?;
        let (_, variant) = train_params(&tm)?;
        let (cohort, set) = self.load_data(&tm)?;
        let data = ProtocolData::from_set(&cohort, set);
        let mut rows = vec![];
        let mut inputs = vec![];
        for r in read_fold_reports(input)? {
            let dir = fold_dir(input, &r.fold);
            let rec: FoldRecord = read_json(&dir.join(FOLD_RECORD))?;
            let trained = load_trained(&dir, variant)?;
            inputs.push(dir.join(if variant == Variant::Rf { FOREST } else { CHECKPOINT }));
            let (precision, f1, _) = evaluate_trained(
                &data,
                &trained,
                &rec.audit.layout,
                &rec.audit.test_participants,
                self.cfg.eval.max_test_windows,
            )?;
            println!("fold {}: F1 {f1:.4} (trained run {:.4}), precision {precision:.4}", r.fold, r.f1);
            rows.push(EvaluationRecord {
                fold: r.fold,
                precision,
                f1,
                trained_precision: r.precision,
                trained_f1: r.f1,
            });
        }
        self.prepare_out()?;
        let p = self.out.join("evaluation.csv");
        write_file(&p, "evaluation", &rows)?;
        self.finish(
            "evaluate",
            &[("train", input)],
            &[],
            existing_manifest(input),
            &inputs,
            &[p],
        )
    }

    pub fn gait(&self, input: &Path, model: Option<&Path>) -> Result<()> {
        let cohort = load_cohort(input)?;
        let days = cohort.days;
        let pd: Vec<_> = cohort.pd().collect();

        let truth: Vec<(String, Vec<Transition>)> = pd
            .iter()
            .map(|p| (p.id().to_string(), extract_from_segments(&cohort.full_truth(p))))
            .collect();
        let durations: Vec<StateDurations> = pd
            .iter()
            .zip(&truth)
            .map(|(p, (_, t))| StateDurations::from_transitions(p.id(), t, p.schedule.as_ref().expect("PD schedule")))
            .collect();
        let on_off = on_off_table(&durations, self.cfg.stats.continuity)?;

        let (table_groups, feature_source, features_from, mut links, mut inputs) = match model {
            None => {
                let all: Vec<Transition> = truth.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
                (vec![("ground truth".to_string(), all)], FeatureSource::GaitFromTruth, truth.clone(), vec![], vec![])
            }
            Some(run) => {
                let tm = RunManifest::expect(run, "train")?;
                let (protocol, variant) = train_params(&tm)?;
                let fold = match &self.cfg.gait.fold {
                    Some(f) => f.clone(),
                    None => read_fold_reports(run)?
                        .first()
                        .map(|r| r.fold.clone())
                        .ok_or_else(|| Error::invalid("train run has no folds"))?,
                };
                let dir = fold_dir(run, &fold);
                let rec: FoldRecord = read_json(&dir.join(FOLD_RECORD))?;
                let trained = load_trained(&dir, variant)?;
                let ranges = gait_ranges(days, self.cfg.gait.minutes_per_slot);
                let decoded: Vec<(String, Vec<Transition>, Vec<Transition>)> = pd
                    .iter()
                    .map(|p| {
                        let (t, d) = decode_ranges(&cohort, &trained, &ChannelLayout::full(), &rec.audit.layout, p.id(), &ranges)?;
                        Ok((p.id().to_string(), extract_transitions(&t), extract_transitions(&d)))
                    })
                    .collect::<Result<_>>()?;
                let label = format!("{} {} fold {fold}", protocol.name(), variant.name());
                let groups = vec![
                    ("ground truth".to_string(), decoded.iter().flat_map(|x| x.1.iter().cloned()).collect()),
                    (label, decoded.iter().flat_map(|x| x.2.iter().cloned()).collect()),
                ];
                let from: Vec<(String, Vec<Transition>)> = decoded.into_iter().map(|(id, _, d)| (id, d)).collect();
                let model_file = dir.join(if variant == Variant::Rf { FOREST } else { CHECKPOINT });
                (groups, FeatureSource::GaitFromModel, from, vec![("model", run.to_path_buf())], vec![model_file])
            }
        };
        links.insert(0, ("cohort", input.to_path_buf()));
        inputs.insert(0, input.join(MANIFEST_NAME));

        let rows: Vec<_> = pd
            .iter()
            .zip(&features_from)
            .flat_map(|(p, (_, t))| aggregate_features(p.id(), t, p.schedule.as_ref().expect("PD schedule"), days))
            .collect();

        self.prepare_out()?;
        let table = mean_transition_table(&table_groups);
        let text = render_table(&table);
        let oo = render_on_off(&on_off);
        print!("{text}\n{oo}");
        let mut outputs = vec![];
        for (name, body) in [("transition-table.txt", &text), ("on-off.txt", &oo)] {
            let p = self.out.join(name);
            write_text(&p, body)?;
            outputs.push(p);
        }
        let p = self.out.join("transition-table.csv");
        write_table_csv(&p, &table)?;
        outputs.push(p);
        let p = self.out.join("on-off.csv");
        write_on_off_csv(&p, &on_off)?;
        outputs.push(p);
        let p = self.out.join(GAIT_FEATURES);
        write_features(&p, &rows)?;
        outputs.push(p);
        let mut manifests = existing_manifest(input);
        if let Some(run) = model {
            manifests.extend(existing_manifest(run));
        }
        let links: Vec<(&str, &Path)> = links.iter().map(|(k, v)| (*k, v.as_path())).collect();
        self.finish(
            "gait",
            &links,
            &[("features", feature_source.name().into())],
            manifests,
            &inputs,
            &outputs,
        )
    }

    pub fn medstate(&self, input: &Path, source: Option<FeatureSource>) -> Result<()> {
        let gm = RunManifest::expect(input, "gait")?;
        let cohort_dir = gm.link("cohort")?;
        let cohort = load_cohort(&cohort_dir)?;
        let available = FeatureSource::parse(gm.param("features")?)?;
        let source = source.unwrap_or(available);
        let features = input.join(GAIT_FEATURES);
        let samples = match source {
            FeatureSource::GaitFromModel | FeatureSource::GaitFromTruth => {
                if source != available {
                    return Err(Error::invalid(format!(
                        "{} holds {} features, not {}",
                        input.display(),
                        available.name(),
                        source.name()
                    )));
                }
                gait_samples(&read_features(&features)?)
            }
            FeatureSource::Demographic => demographic_samples(&cohort, true),
            FeatureSource::DemographicNoLeak => demographic_samples(&cohort, false),
        };
        let report = run_med_protocol(source.name(), &samples, &self.cfg.eval.med_forest)?;
        self.prepare_out()?;
        let text = medication_table(std::slice::from_ref(&report));
        print!("{text}");
        let mut outputs = vec![];
        let p = self.out.join("medstate-folds.csv");
        write_file(&p, "medstate-folds", &report.folds)?;
        outputs.push(p);
        let p = self.out.join("medstate.json");
        write_json(&p, &report)?;
        outputs.push(p);
        let p = self.out.join("medstate.txt");
        write_text(&p, &text)?;
        outputs.push(p);
        self.finish(
            "medstate",
            &[("gait", input), ("cohort", &cohort_dir)],
            &[("source", source.name().into())],
            existing_manifest(input),
            &[features, cohort_dir.join(MANIFEST_NAME)],
            &outputs,
        )
    }

    fn gather_train_runs(&self, dirs: &[PathBuf]) -> Result<BTreeMap<Protocol, BTreeMap<Variant, Vec<FoldReport>>>> {
        let mut runs: BTreeMap<Protocol, BTreeMap<Variant, Vec<FoldReport>>> = BTreeMap::new();
        for d in dirs {
            let m = RunManifest::expect(d, "train")?;
            let (protocol, variant) = train_params(&m)?;
            let by_variant = runs.entry(protocol).or_default();
            if by_variant.contains_key(&variant) {
                return Err(Error::invalid(format!(
                    "two runs of {} under {}",
                    variant.name(),
                    protocol.name()
                )));
            }
            by_variant.insert(variant, read_fold_reports(d)?);
        }
        Ok(runs)
    }

    /// Stats text plus the rank files it refers to.
    fn stats_section(
        &self,
        runs: &BTreeMap<Protocol, BTreeMap<Variant, Vec<FoldReport>>>,
        write_ranks: bool,
    ) -> Result<(String, Vec<PathBuf>)> {
        let mut text = String::new();
        let mut written = vec![];
        for (protocol, by_variant) in runs {
            match protocol_stats(*protocol, by_variant, self.cfg.stats.alpha)? {
                StatsSection::Skipped(why) => {
                    text.push_str(&format!("notice: stats skipped for {why}\n"));
                }
                StatsSection::Compared(cmps) => {
                    for (c, metric) in cmps.iter().zip(["f1", "precision"]) {
                        text.push_str(&c.render());
                        text.push('\n');
                        if write_ranks {
                            let p = self.out.join(format!("rank-{}-{metric}.csv", protocol.name()));
                            c.diagram.write_plot_data(&p)?;
                            written.push(p);
                        }
                    }
                }
            }
        }
        Ok((text, written))
    }

    pub fn stats(&self, inputs: &[PathBuf]) -> Result<()> {
        let runs = self.gather_train_runs(inputs)?;
        self.prepare_out()?;
        let (text, mut outputs) = self.stats_section(&runs, true)?;
        print!("{text}");
        let p = self.out.join("stats.txt");
        write_text(&p, &text)?;
        outputs.push(p);
        let manifests = inputs.iter().flat_map(|d| existing_manifest(d)).collect();
        let reports: Vec<PathBuf> = inputs.iter().map(|d| d.join(FOLD_REPORTS)).collect();
        self.finish("stats", &[], &[], manifests, &reports, &outputs)
    }

    pub fn report(&self, inputs: &[PathBuf]) -> Result<()> {
        let mut train_dirs = vec![];
        let mut summaries = vec![];
        let mut gait = vec![];
        let mut med: Vec<MedReport> = vec![];
        let mut read = vec![];
        for d in inputs {
            let m = RunManifest::read(d)?;
            match m.command.as_str() {
                "train" => {
                    summaries.push(read_json::<ProtocolSummary>(&d.join("summary.json"))?);
                    train_dirs.push(d.clone());
                    read.push(d.join(FOLD_REPORTS));
                }
                "gait" => {
                    let t = fs::read_to_string(d.join("transition-table.txt"))?;
                    let o = fs::read_to_string(d.join("on-off.txt"))?;
                    gait.push((m.param("features")?.to_string(), t, o));
                    read.push(d.join("transition-table.csv"));
                }
                "medstate" => {
                    med.push(read_json(&d.join("medstate.json"))?);
                    read.push(d.join("medstate.json"));
                }
                other => {
                    return Err(Error::invalid(format!(
                        "{}: cannot report on a `{other}` run",
                        d.display()
                    )))
                }
            }
        }
        let mut s = String::new();
        if !summaries.is_empty() {
            s.push_str("== room-level localisation and medication state ==\n");
            s.push_str(&localisation_table(&summaries));
            s.push('\n');
        }
        for (features, t, o) in &gait {
            s.push_str(&format!("== room-to-room transition duration (s), {features} ==\n{t}\n"));
            s.push_str(&format!("== ON vs OFF transition duration, one-sided Wilcoxon ==\n{o}\n"));
        }
        if !med.is_empty() {
            s.push_str("== medication state, leave one participant out ==\n");
            s.push_str(&medication_table(&med));
            s.push('\n');
        }
        self.prepare_out()?;
        let mut outputs = vec![];
        if !train_dirs.is_empty() {
            let runs = self.gather_train_runs(&train_dirs)?;
            let (text, written) = self.stats_section(&runs, true)?;
            s.push_str("== model comparison ==\n");
            s.push_str(&text);
            outputs.extend(written);
            let p = self.out.join("localisation.csv");
            let mut recs: Vec<SummaryRecord> = summaries.iter().map(SummaryRecord::from).collect();
            recs.sort_by(|a, b| (&a.protocol, &a.variant).cmp(&(&b.protocol, &b.variant)));
            write_file(&p, "localisation", &recs)?;
            outputs.push(p);
        }
        print!("{s}");
        let p = self.out.join("report.txt");
        write_text(&p, &s)?;
        outputs.push(p);
        let manifests = inputs.iter().flat_map(|d| existing_manifest(d)).collect();
        self.finish("report", &[], &[], manifests, &read, &outputs)
    }
}
