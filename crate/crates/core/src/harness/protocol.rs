//! Cross-validation protocols over a cohort and the per-fold pipeline.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaitfeat::{aggregate_features, extract_transitions, GaitFeatureRow, RoomSequence};
use crate::medstate::{default_med_forest, gait_samples, run_med_protocol};
use crate::net::Checkpoint;
use crate::pipeline::{
    cohort_windows, mask_channels, masked_layout, range_windows, top_aps, ChannelLayout, NormalizationStats,
    SensorWindow, WindowSet,
};
use crate::room::Room;
use crate::simhome::cohort::Cohort;
use crate::simhome::profile::{slot_start_ms, MS_PER_HOUR, SLOTS_PER_DAY};

use super::forest::{ForestParams, RandomForest};
use super::metrics::{mean_sd, weighted_metrics};
use super::train::{chronological_split, evenly_spaced, grid_search, train_model, Hyper, TrainConfig, TrainHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "ALL-HC")]
    AllHc,
    #[serde(rename = "LOO-HC")]
    LooHc,
    #[serde(rename = "LOO-PD")]
    LooPd,
    #[serde(rename = "4m-HC")]
    FourMinHc,
    #[serde(rename = "4m-PD")]
    FourMinPd,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::AllHc,
        Protocol::LooHc,
        Protocol::LooPd,
        Protocol::FourMinHc,
        Protocol::FourMinPd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::AllHc => "ALL-HC",
            Protocol::LooHc => "LOO-HC",
            Protocol::LooPd => "LOO-PD",
            Protocol::FourMinHc => "4m-HC",
            Protocol::FourMinPd => "4m-PD",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown protocol {s:?}; expected one of ALL-HC, LOO-HC, LOO-PD, 4m-HC, 4m-PD")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "MDCSA")]
    Mdcsa,
    #[serde(rename = "MDCSA-RSSI")]
    MdcsaRssi,
    #[serde(rename = "MDCSA-4APS")]
    Mdcsa4Aps,
    #[serde(rename = "MDCSA-4APS-RSSI")]
    Mdcsa4ApsRssi,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Rf,
        Variant::Mdcsa,
        Variant::MdcsaRssi,
        Variant::Mdcsa4Aps,
        Variant::Mdcsa4ApsRssi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rf => "RF",
            Variant::Mdcsa => "MDCSA",
            Variant::MdcsaRssi => "MDCSA-RSSI",
            Variant::Mdcsa4Aps => "MDCSA-4APS",
            Variant::Mdcsa4ApsRssi => "MDCSA-4APS-RSSI",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown variant {s:?}")))
    }

    pub fn uses_accel(self) -> bool {
        matches!(self, Variant::Rf | Variant::Mdcsa | Variant::Mdcsa4Aps)
    }

    pub fn four_aps(self) -> bool {
        matches!(self, Variant::Mdcsa4Aps | Variant::Mdcsa4ApsRssi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub id: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// Contiguous training windows kept per participant, from the first.
    pub window_budget: Option<usize>,
}

pub fn folds(protocol: Protocol, cohort: &Cohort, four_minute_windows: usize) -> Result<Vec<Fold>> {
    let pd: Vec<String> = cohort.pd().map(|p| p.id().to_string()).collect();
    let hc: Vec<String> = cohort.controls().map(|p| p.id().to_string()).collect();
    let infeasible = |reason: String| Error::InfeasibleProtocol {
        protocol: protocol.name().into(),
        reason,
    };
    if pd.is_empty() || hc.is_empty() {
        return Err(infeasible("the cohort needs both PD and HC participants".into()));
    }
    let needs_pairs = !matches!(protocol, Protocol::AllHc);
    if needs_pairs && cohort.n_pairs() < 2 {
        return Err(infeasible(format!("needs at least 2 pairs, cohort has {}", cohort.n_pairs())));
    }
    let budget = matches!(protocol, Protocol::FourMinHc | Protocol::FourMinPd).then_some(four_minute_windows);
    Ok(match protocol {
        Protocol::AllHc => vec![Fold {
            id: "ALL".into(),
            train: hc,
            test: pd,
            window_budget: None,
        }],
        Protocol::LooHc | Protocol::FourMinHc => hc
            .iter()
            .map(|h| Fold {
                id: h.clone(),
                train: vec![h.clone()],
                test: pd.clone(),
                window_budget: budget,
            })
            .collect(),
        Protocol::LooPd | Protocol::FourMinPd => pd
            .iter()
            .map(|p| Fold {
                id: p.clone(),
                train: vec![p.clone()],
                test: pd.iter().filter(|q| *q != p).cloned().collect(),
                window_budget: budget,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub train: TrainConfig,
    pub forest: ForestParams,
    /// Search the 8-point forest grid on the validation split.
    pub forest_grid: bool,
    /// Evenly spaced cap on forest training windows.
    pub max_rf_train_windows: Option<usize>,
    pub four_minute_windows: usize,
    pub n_top_aps: usize,
    /// Evenly spaced cap on test windows per participant.
    pub max_test_windows: Option<usize>,
    /// Classify medication state from gait features of the predicted rooms.
    pub medication: bool,
    /// Minutes at the start of each 4-hour slot on which rooms are predicted
    /// for gait features.
    pub gait_minutes_per_slot: u32,
    pub med_forest: ForestParams,
    /// Run folds in parallel.
    pub parallel_folds: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train: TrainConfig::default(),
            forest: ForestParams::default(),
            forest_grid: true,
            max_rf_train_windows: None,
            four_minute_windows: 48,
            n_top_aps: 4,
            max_test_windows: None,
            medication: true,
            gait_minutes_per_slot: 20,
            med_forest: default_med_forest(0),
            parallel_folds: false,
        }
    }
}

/// Annotated windows of every participant at full channel layout.
#[derive(Debug, Clone)]
pub struct ProtocolData<'c> {
    pub cohort: &'c Cohort,
    pub layout: ChannelLayout,
    pub windows: BTreeMap<String, Vec<SensorWindow>>,
}

impl<'c> ProtocolData<'c> {
    pub fn from_cohort(cohort: &'c Cohort) -> Self {
        ProtocolData {
            cohort,
            layout: ChannelLayout::full(),
            windows: cohort_windows(cohort).into_iter().collect(),
        }
    }

    pub fn from_set(cohort: &'c Cohort, set: WindowSet) -> Self {
        let mut windows: BTreeMap<String, Vec<SensorWindow>> = BTreeMap::new();
        for w in set.windows {
            windows.entry(w.participant.clone()).or_default().push(w);
        }
        ProtocolData {
            cohort,
            layout: set.layout,
            windows,
        }
    }

    fn of(&self, id: &str) -> Result<&[SensorWindow]> {
        self.windows.get(id).map(|v| v.as_slice()).ok_or_else(|| Error::MissingInput {
            path: id.into(),
            reason: "no windows for participant".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub protocol: Protocol,
    pub variant: Variant,
    pub fold: String,
    pub precision: f64,
    pub f1: f64,
    pub med_f1: Option<f64>,
    pub med_auroc: Option<f64>,
}

/// One test window's decoded rooms next to the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub participant: String,
    pub start_ms: i64,
    /// Room indices, one digit per step.
    pub truth: String,
    pub predicted: String,
}

pub fn encode_rooms(rooms: &[Room]) -> String {
    rooms.iter().map(|r| char::from(b'0' + r.index() as u8)).collect()
}

pub fn decode_rooms(s: &str) -> Result<Vec<Room>> {
    s.bytes()
        .map(|b| {
            b.checked_sub(b'0')
                .and_then(|i| Room::from_index(i as usize))
                .ok_or_else(|| Error::invalid(format!("bad room code {:?}", b as char)))
        })
        .collect()
}

/// Which windows and channels a fold touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub train_participants: Vec<String>,
    pub test_participants: Vec<String>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub layout: ChannelLayout,
}

#[derive(Debug, Clone)]
pub enum Trained {
    Net(Checkpoint),
    Forest(RandomForest),
}

impl Trained {
    pub fn predict(&self, w: &SensorWindow) -> Result<Vec<Room>> {
        match self {
            Trained::Net(ckpt) => {
                let w = match &ckpt.normalization {
                    Some(s) => s.apply(w)?,
                    None => w.clone(),
                };
                ckpt.model.predict(&w)
            }
            Trained::Forest(f) => {
                let x = flatten(w);
                let c = f.predict(x.view());
                Ok(vec![Room::from_index(c).expect("class in range"); w.len()])
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub report: FoldReport,
    pub audit: FoldAudit,
    pub hyper: Option<Hyper>,
    pub forest: Option<ForestParams>,
    pub history: Option<TrainHistory>,
    pub predictions: Vec<PredictionRecord>,
    pub gait_rows: Vec<GaitFeatureRow>,
    pub trained: Trained,
}

fn flatten(w: &SensorWindow) -> ndarray::Array1<f64> {
    let f = w.features();
    ndarray::Array1::from_iter(f.iter().copied())
}

fn flatten_all(ws: &[SensorWindow]) -> Array2<f64> {
    let p = ws[0].features().len();
    let mut x = Array2::zeros((ws.len(), p));
    for (i, w) in ws.iter().enumerate() {
        x.row_mut(i).assign(&flatten(w));
    }
    x
}

/// First `budget` windows in time order.
fn budgeted(ws: &[SensorWindow], budget: Option<usize>) -> Vec<SensorWindow> {
    let mut v = ws.to_vec();
    v.sort_by_key(|w| w.start_ms);
    if let Some(b) = budget {
        v.truncate(b);
    }
    v
}

/// `(start, start + minutes)` at the top of every slot of every day.
pub fn gait_ranges(days: u32, minutes_per_slot: u32) -> Vec<(i64, i64)> {
    let len = (minutes_per_slot as i64 * 60_000).min(4 * MS_PER_HOUR);
    (1..=days)
        .flat_map(|d| (0..SLOTS_PER_DAY).map(move |s| (slot_start_ms(d, s), slot_start_ms(d, s) + len)))
        .collect()
}

/// Applies the variant's channel mask. The AP subset is chosen on `pick_from`.
pub fn variant_layout(
    variant: Variant,
    pick_from: &[SensorWindow],
    layout: &ChannelLayout,
    n_top_aps: usize,
) -> Result<ChannelLayout> {
    let aps = if variant.four_aps() {
        top_aps(pick_from, layout, n_top_aps)
    } else {
        layout.aps.clone()
    };
    masked_layout(layout, &aps, variant.uses_accel() && layout.accel)
}

fn mask_all(ws: &[SensorWindow], from: &ChannelLayout, to: &ChannelLayout) -> Result<Vec<SensorWindow>> {
    ws.iter().map(|w| mask_channels(w, from, &to.aps, to.accel).map(|x| x.0)).collect()
}

fn step_metrics(pred: &[Vec<Room>], truth: &[&[Room]]) -> Result<(f64, f64)> {
    let p: Vec<usize> = pred.iter().flatten().map(|r| r.index()).collect();
    let t: Vec<usize> = truth.iter().flat_map(|x| x.iter().map(|r| r.index())).collect();
    let m = weighted_metrics(&p, &t, crate::room::N_ROOMS)?;
    Ok((m.precision, m.f1))
}

pub fn run_fold(
    data: &ProtocolData,
    protocol: Protocol,
    variant: Variant,
    fold: &Fold,
    cfg: &EvalConfig,
) -> Result<FoldOutcome> {
    let mut pool = vec![];
    for id in &fold.train {
        pool.extend(budgeted(data.of(id)?, fold.window_budget));
    }
    if pool.len() < 2 {
        return Err(Error::InfeasibleProtocol {
            protocol: protocol.name().into(),
            reason: format!("fold {} has {} training windows", fold.id, pool.len()),
        });
    }
    let (train_raw, val_raw) = chronological_split(&pool, cfg.train.val_fraction.max(1e-9));
    let layout = variant_layout(variant, &train_raw, &data.layout, cfg.n_top_aps)?;
    let train = mask_all(&train_raw, &data.layout, &layout)?;
    let val = mask_all(&val_raw, &data.layout, &layout)?;

    let (trained, hyper, forest, history) = match variant {
        Variant::Rf => {
            let fit_on = evenly_spaced(&train, cfg.max_rf_train_windows);
            let x = flatten_all(&fit_on);
            let y: Vec<usize> = fit_on.iter().map(|w| w.mode_label().index()).collect();
            let xv = flatten_all(&val);
            let vt: Vec<&[Room]> = val.iter().map(|w| w.labels.as_slice()).collect();
            let grid = if cfg.forest_grid {
                ForestParams::grid(&cfg.forest)
            } else {
                vec![cfg.forest.clone()]
            };
            // warm start lets later grid points reuse trees of earlier ones
            let mut cache: Option<RandomForest> = None;
            let mut fitted = vec![];
            let (best, _) = grid_search(&grid, 1, |p, _| {
                let mut f = match cache.take() {
                    Some(mut f) if p.warm_start && f.params.min_samples_leaf == p.min_samples_leaf => {
                        f.params = p.clone();
                        f
                    }
                    _ => RandomForest::new(p.clone(), crate::room::N_ROOMS),
                };
                f.fit(&x, &y, None)?;
                let pred: Vec<Vec<Room>> = f
                    .predict_all(&xv)
                    .into_iter()
                    .map(|c| vec![Room::from_index(c).unwrap(); val[0].len()])
                    .collect();
                let score = step_metrics(&pred, &vt)?.1;
                fitted.push(f.clone());
                cache = Some(f);
                Ok(score)
            })?;
            let idx = grid.iter().position(|p| *p == best).unwrap();
            (Trained::Forest(fitted.swap_remove(idx)), None, Some(best), None)
        }
        _ => {
            let stats = NormalizationStats::fit(&train, &layout)?;
            let tn = stats.apply_all(&train)?;
            let vn = stats.apply_all(&val)?;
            let points = cfg.train.grid.points();
            let mut outcomes = vec![];
            let (best, _) = grid_search(&points, 1, |h, _| {
                let out = train_model(&tn, &vn, &cfg.train, h)?;
                let score = out.history.best_val_f1;
                outcomes.push(out);
                Ok(score)
            })?;
            let idx = points.iter().position(|p| *p == best).unwrap();
            let out = outcomes.swap_remove(idx);
            let ckpt = Checkpoint {
                model: out.model,
                normalization: Some(stats),
            };
            (Trained::Net(ckpt), Some(best), None, Some(out.history))
        }
    };

    let (precision, f1, predictions) = evaluate_trained(data, &trained, &layout, &fold.test, cfg.max_test_windows)?;
    let n_test = predictions.len();

    let mut gait_rows = vec![];
    let (mut med_f1, mut med_auroc) = (None, None);
    let test_pd: Vec<&String> = fold.test.iter().filter(|id| data.cohort.participant(id).is_ok_and(|p| p.is_pd())).collect();
    if cfg.medication && test_pd.len() >= 2 {
        let ranges = gait_ranges(data.cohort.days, cfg.gait_minutes_per_slot);
        for id in &test_pd {
            let p = data.cohort.participant(id)?;
            let (_, seq) = decode_ranges(data.cohort, &trained, &data.layout, &layout, p.id(), &ranges)?;
            let schedule = p.schedule.as_ref().expect("PD participants have a schedule");
            gait_rows.extend(aggregate_features(p.id(), &extract_transitions(&seq), schedule, data.cohort.days));
        }
        let mut params = cfg.med_forest.clone();
        params.seed = cfg.train.seed;
        let r = run_med_protocol("gait-from-model", &gait_samples(&gait_rows), &params)?;
        med_f1 = Some(r.f1_mean);
        med_auroc = r.auroc_mean;
    }

    Ok(FoldOutcome {
        report: FoldReport {
            protocol,
            variant,
            fold: fold.id.clone(),
            precision,
            f1,
            med_f1,
            med_auroc,
        },
        audit: FoldAudit {
            train_participants: fold.train.clone(),
            test_participants: fold.test.clone(),
            n_train: train.len(),
            n_val: val.len(),
            n_test,
            layout,
        },
        hyper,
        forest,
        history,
        predictions,
        gait_rows,
        trained,
    })
}

/// Pooled weighted precision and F1 of `trained` on the test participants,
/// with one record per window.
pub fn evaluate_trained(
    data: &ProtocolData,
    trained: &Trained,
    layout: &ChannelLayout,
    test: &[String],
    max_test_windows: Option<usize>,
) -> Result<(f64, f64, Vec<PredictionRecord>)> {
    let mut predictions = vec![];
    let mut preds = vec![];
    let mut truths = vec![];
    for id in test {
        let ws = evenly_spaced(data.of(id)?, max_test_windows);
        let ws = mask_all(&ws, &data.layout, layout)?;
        let p: Vec<Vec<Room>> = ws.par_iter().map(|w| trained.predict(w)).collect::<Result<_>>()?;
        for (w, r) in ws.iter().zip(&p) {
            predictions.push(PredictionRecord {
                participant: id.clone(),
                start_ms: w.start_ms,
                truth: encode_rooms(&w.labels),
                predicted: encode_rooms(r),
            });
        }
        truths.extend(ws.into_iter().map(|w| w.labels));
        preds.extend(p);
    }
    let truth_refs: Vec<&[Room]> = truths.iter().map(|t| t.as_slice()).collect();
    let (precision, f1) = step_metrics(&preds, &truth_refs)?;
    Ok((precision, f1, predictions))
}

/// True and decoded room sequences of one participant over `ranges`.
pub fn decode_ranges(
    cohort: &Cohort,
    trained: &Trained,
    full: &ChannelLayout,
    layout: &ChannelLayout,
    participant: &str,
    ranges: &[(i64, i64)],
) -> Result<(RoomSequence, RoomSequence)> {
    let p = cohort.participant(participant)?;
    let ws = range_windows(cohort, p, ranges);
    let ws = mask_all(&ws, full, layout)?;
    let rooms: Vec<Vec<Room>> = ws.par_iter().map(|w| trained.predict(w)).collect::<Result<_>>()?;
    let empty = RoomSequence {
        participant: participant.to_string(),
        ..Default::default()
    };
    let (mut truth, mut decoded) = (empty.clone(), empty);
    for (w, r) in ws.iter().zip(&rooms) {
        truth.push_window(w.start_ms, &w.labels);
        decoded.push_window(w.start_ms, r);
    }
    Ok((truth, decoded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub protocol: Protocol,
    pub variant: Variant,
    pub n_folds: usize,
    pub precision: (f64, f64),
    pub f1: (f64, f64),
    pub med_f1: Option<(f64, f64)>,
    pub med_auroc: Option<(f64, f64)>,
}

pub fn summarize(reports: &[FoldReport]) -> Result<ProtocolSummary> {
    let first = reports.first().ok_or_else(|| Error::invalid("no folds to summarise"))?;
    let col = |f: &dyn Fn(&FoldReport) -> Option<f64>| -> Option<(f64, f64)> {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| mean_sd(&v))
    };
    Ok(ProtocolSummary {
        protocol: first.protocol,
        variant: first.variant,
        n_folds: reports.len(),
        precision: col(&|r| Some(r.precision)).unwrap(),
        f1: col(&|r| Some(r.f1)).unwrap(),
        med_f1: col(&|r| r.med_f1),
        med_auroc: col(&|r| r.med_auroc),
    })
}

pub fn run_protocol(
    data: &ProtocolData,
    protocol: Protocol,
    variant: Variant,
    cfg: &EvalConfig,
) -> Result<(Vec<FoldOutcome>, ProtocolSummary)> {
    let folds = folds(protocol, data.cohort, cfg.four_minute_windows)?;
    let outcomes: Vec<FoldOutcome> = if cfg.parallel_folds {
        folds.par_iter().map(|f| run_fold(data, protocol, variant, f, cfg)).collect::<Result<_>>()?
    } else {
        folds.iter().map(|f| run_fold(data, protocol, variant, f, cfg)).collect::<Result<_>>()?
    };
    let reports: Vec<FoldReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    let summary = summarize(&reports)?;
    Ok((outcomes, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::train::TrainGrid;
    use crate::simhome::{generate_cohort, SimConfig};

    fn small_cohort(pairs: u32) -> Cohort {
        generate_cohort(pairs, 1, 11, &SimConfig {
            annotated_hours_per_day: 0.1,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn fold_arithmetic() {
        let c = generate_cohort(12, 1, 1, &SimConfig::default()).unwrap();
        let all = folds(Protocol::AllHc, &c, 48).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].test.len(), 12);
        assert_eq!(all[0].train.len(), 12);
        for p in [Protocol::LooHc, Protocol::LooPd, Protocol::FourMinHc, Protocol::FourMinPd] {
            let f = folds(p, &c, 48).unwrap();
            assert_eq!(f.len(), 12, "{}", p.name());
            for fold in &f {
                assert!(fold.test.iter().all(|t| !fold.train.contains(t)));
                assert!(fold.test.iter().all(|t| t.starts_with("PD")));
            }
        }
        let f = folds(Protocol::LooPd, &c, 48).unwrap();
        assert!(f.iter().all(|x| x.test.len() == 11));
        assert!(folds(Protocol::FourMinHc, &c, 48).unwrap().iter().all(|x| x.window_budget == Some(48)));
        let one = generate_cohort(1, 1, 1, &SimConfig::default()).unwrap();
        assert!(matches!(folds(Protocol::LooPd, &one, 48), Err(Error::InfeasibleProtocol { .. })));
        assert!(folds(Protocol::AllHc, &one, 48).is_ok());
        assert_eq!(Protocol::parse("4m-pd").unwrap(), Protocol::FourMinPd);
        assert_eq!(Variant::parse("mdcsa-4aps-rssi").unwrap(), Variant::Mdcsa4ApsRssi);
        assert!(Protocol::parse("LOO").is_err());
    }

    fn quick_cfg() -> EvalConfig {
        EvalConfig {
            train: TrainConfig {
                grid: TrainGrid {
                    d: vec![8],
                    epochs: vec![2],
                    learning_rate: vec![0.01],
                },
                batch_size: 16,
                ..Default::default()
            },
            forest: ForestParams {
                n_trees: 5,
                ..Default::default()
            },
            forest_grid: false,
            gait_minutes_per_slot: 2,
            ..Default::default()
        }
    }

    #[test]
    fn four_minute_budget_and_reports_reproduce_from_predictions() {
        let c = small_cohort(2);
        let data = ProtocolData::from_cohort(&c);
        let cfg = quick_cfg();
        let (outs, summary) = run_protocol(&data, Protocol::FourMinHc, Variant::Mdcsa4Aps, &cfg).unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(summary.n_folds, 2);
        for o in &outs {
            assert!(o.audit.n_train + o.audit.n_val <= 48);
            assert_eq!(o.audit.layout.aps.len(), 4);
            let p: Vec<usize> =
                o.predictions.iter().flat_map(|r| decode_rooms(&r.predicted).unwrap()).map(|r| r.index()).collect();
            let t: Vec<usize> =
                o.predictions.iter().flat_map(|r| decode_rooms(&r.truth).unwrap()).map(|r| r.index()).collect();
            let m = weighted_metrics(&p, &t, 6).unwrap();
            assert_eq!((m.precision, m.f1), (o.report.precision, o.report.f1));
            assert!(o.predictions.iter().all(|r| r.participant.starts_with("PD")));
            assert!(o.report.med_auroc.is_some());
            assert_eq!(o.gait_rows.len(), 2 * 4);
        }
    }

    #[test]
    fn forest_fold_and_determinism() {
        let c = small_cohort(2);
        let data = ProtocolData::from_cohort(&c);
        let cfg = EvalConfig {
            medication: false,
            ..quick_cfg()
        };
        let (a, _) = run_protocol(&data, Protocol::LooPd, Variant::Rf, &cfg).unwrap();
        let (b, _) = run_protocol(&data, Protocol::LooPd, Variant::Rf, &cfg).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.report, y.report);
            assert_eq!(x.predictions, y.predictions);
            assert_eq!(x.audit.test_participants.len(), 1);
            assert!(!x.audit.test_participants.contains(&x.report.fold));
        }
    }

    #[test]
    fn room_codes_round_trip() {
        let r = vec![Room::Kitchen, Room::Porch, Room::Hallway];
        assert_eq!(encode_rooms(&r), "051");
        assert_eq!(decode_rooms("051").unwrap(), r);
        assert!(decode_rooms("7").is_err());
        assert_eq!(gait_ranges(2, 20).len(), 8);
    }
}
