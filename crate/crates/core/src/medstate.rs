//! ON/OFF medication-state classification from gait or demographic features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaitfeat::GaitFeatureRow;
use crate::harness::forest::{ClassWeight, ForestParams, RandomForest};
use crate::harness::metrics::{mean_sd, weighted_metrics};
use crate::simhome::cohort::Cohort;
use crate::simhome::profile::{Gender, MedState, SLOTS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    GaitFromModel,
    GaitFromTruth,
    /// Age, gender, years since diagnosis and the state-matched UPDRS-III.
    Demographic,
    /// The same without UPDRS-III, which would reveal the state.
    DemographicNoLeak,
}

impl FeatureSource {
    pub fn name(self) -> &'static str {
        match self {
            FeatureSource::GaitFromModel => "gait-from-model",
            FeatureSource::GaitFromTruth => "gait-from-truth",
            FeatureSource::Demographic => "demographic",
            FeatureSource::DemographicNoLeak => "demographic-no-leak",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            FeatureSource::GaitFromModel,
            FeatureSource::GaitFromTruth,
            FeatureSource::Demographic,
            FeatureSource::DemographicNoLeak,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| Error::invalid(format!("unknown feature source {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedSample {
    pub participant: String,
    pub features: Vec<f64>,
    pub label: MedState,
}

fn class_of(s: MedState) -> usize {
    match s {
        MedState::On => 0,
        MedState::Off => 1,
    }
}

/// Groups rows by participant, preserving row order.
pub fn gait_samples(rows: &[GaitFeatureRow]) -> BTreeMap<String, Vec<MedSample>> {
    let mut out: BTreeMap<String, Vec<MedSample>> = BTreeMap::new();
    for r in rows {
        out.entry(r.participant.clone()).or_default().push(MedSample {
            participant: r.participant.clone(),
            features: r.features().to_vec(),
            label: r.state,
        });
    }
    out
}

/// One sample per PD participant per 4-hour slot.
pub fn demographic_samples(cohort: &Cohort, include_updrs: bool) -> BTreeMap<String, Vec<MedSample>> {
    let mut out = BTreeMap::new();
    for p in cohort.pd() {
        let d = &p.profile.demographics;
        let mut rows = vec![];
        for day in 1..=cohort.days {
            for slot in 0..SLOTS_PER_DAY {
                let state = p.schedule.as_ref().and_then(|s| s.state_of(day, slot)).unwrap_or(MedState::On);
                let mut f = vec![
                    d.age,
                    if d.gender == Gender::Female { 1.0 } else { 0.0 },
                    d.years_since_diagnosis,
                ];
                if include_updrs {
                    f.push(match state {
                        MedState::On => d.updrs_on,
                        MedState::Off => d.updrs_off,
                    });
                }
                rows.push(MedSample {
                    participant: p.id().to_string(),
                    features: f,
                    label: state,
                });
            }
        }
        out.insert(p.id().to_string(), rows);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedClassifier {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub forest: RandomForest,
}

impl MedClassifier {
    fn normalise(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }

    /// Fraction of trees voting OFF.
    pub fn score(&self, features: &[f64]) -> f64 {
        let x = ndarray::Array1::from(self.normalise(features));
        self.forest.votes(x.view())[1]
    }

    pub fn predict(&self, features: &[f64]) -> MedState {
        if self.score(features) > 0.5 {
            MedState::Off
        } else {
            MedState::On
        }
    }
}

pub fn default_med_forest(seed: u64) -> ForestParams {
    ForestParams {
        n_trees: 200,
        min_samples_leaf: 1,
        class_weight: ClassWeight::Balanced,
        seed,
        ..Default::default()
    }
}

/// z-scores features over the training samples, then fits the forest with
/// inverse-frequency class weights.
pub fn train_med_classifier(samples: &[MedSample], params: &ForestParams) -> Result<MedClassifier> {
    if samples.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let has = |s: MedState| samples.iter().any(|x| x.label == s);
    if !has(MedState::On) || !has(MedState::Off) {
        return Err(Error::invalid("medication classifier needs both ON and OFF samples"));
    }
    let p = samples[0].features.len();
    if samples.iter().any(|s| s.features.len() != p) {
        return Err(Error::invalid("samples disagree on feature count"));
    }
    let mut mean = vec![0.0; p];
    let mut std = vec![0.0; p];
    for j in 0..p {
        let col: Vec<f64> = samples.iter().map(|s| s.features[j]).collect();
        let (m, sd) = mean_sd(&col);
        mean[j] = m;
        std[j] = if sd > 1e-12 { sd } else { 1.0 };
    }
    let mut clf = MedClassifier {
        mean,
        std,
        forest: RandomForest::new(
            ForestParams {
                class_weight: ClassWeight::Balanced,
                ..params.clone()
            },
            2,
        ),
    };
    let x = ndarray::Array2::from_shape_fn((samples.len(), p), |(i, j)| clf.normalise(&samples[i].features)[j]);
    let y: Vec<usize> = samples.iter().map(|s| class_of(s.label)).collect();
    clf.forest.fit(&x, &y, None)?;
    Ok(clf)
}

/// Area under the ROC curve with OFF as the positive class; tied scores
/// share their average rank. `None` unless both classes are present.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n1 = positive.iter().filter(|&&p| p).count();
    let n0 = positive.len() - n1;
    if n1 == 0 || n0 == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let r1: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    Some((r1 - (n1 * (n1 + 1)) as f64 / 2.0) / (n1 * n0) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedEval {
    pub f1: f64,
    pub auroc: Option<f64>,
}

pub fn evaluate_med(clf: &MedClassifier, test: &[MedSample]) -> Result<MedEval> {
    if test.is_empty() {
        return Err(Error::invalid("no test samples"));
    }
    let scores: Vec<f64> = test.iter().map(|s| clf.score(&s.features)).collect();
    let pred: Vec<usize> = scores.iter().map(|&s| usize::from(s > 0.5)).collect();
    let truth: Vec<usize> = test.iter().map(|s| class_of(s.label)).collect();
    let positive: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
    Ok(MedEval {
        f1: weighted_metrics(&pred, &truth, 2)?.f1,
        auroc: auroc(&scores, &positive),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedFold {
    pub participant: String,
    pub f1: f64,
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedReport {
    pub source: String,
    pub folds: Vec<MedFold>,
    pub f1_mean: f64,
    pub f1_sd: f64,
    /// Over folds with a defined AUROC; `None` if there are none.
    pub auroc_mean: Option<f64>,
    pub auroc_sd: Option<f64>,
}

/// Leave-one-participant-out over the groups in `samples`.
pub fn run_med_protocol(
    source: &str,
    samples: &BTreeMap<String, Vec<MedSample>>,
    params: &ForestParams,
) -> Result<MedReport> {
    if samples.len() < 2 {
        return Err(Error::InfeasibleProtocol {
            protocol: "medication LOO".into(),
            reason: format!("needs at least 2 PD participants, got {}", samples.len()),
        });
    }
    let mut folds = vec![];
    for (held, test) in samples {
        let train: Vec<MedSample> =
            samples.iter().filter(|(k, _)| *k != held).flat_map(|(_, v)| v.iter().cloned()).collect();
        let clf = train_med_classifier(&train, params)?;
        let e = evaluate_med(&clf, test)?;
        folds.push(MedFold {
            participant: held.clone(),
            f1: e.f1,
            auroc: e.auroc,
        });
    }
    let f1: Vec<f64> = folds.iter().map(|f| f.f1).collect();
    let au: Vec<f64> = folds.iter().filter_map(|f| f.auroc).collect();
    let (f1_mean, f1_sd) = mean_sd(&f1);
    let (am, asd) = mean_sd(&au);
    Ok(MedReport {
        source: source.to_string(),
        folds,
        f1_mean,
        f1_sd,
        auroc_mean: (!au.is_empty()).then_some(am),
        auroc_sd: (!au.is_empty()).then_some(asd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn auroc_cases() {
        assert_eq!(auroc(&[0.9, 0.8, 0.4, 0.2], &[true, false, true, false]), Some(0.75));
        assert_eq!(auroc(&[0.9, 0.8, 0.1], &[true, true, false]), Some(1.0));
        assert_eq!(auroc(&[0.3; 5], &[true, false, false, true, false]), Some(0.5));
        assert_eq!(auroc(&[0.3, 0.4], &[true, true]), None);
        // strictly monotone transforms leave it unchanged
        let mut rng = substream(1, "auc", &[]);
        let s: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<bool> = (0..40).map(|_| rng.random_bool(0.4)).collect();
        let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
        assert_eq!(auroc(&s, &y), auroc(&t, &y));
    }

    fn sample(p: &str, f: Vec<f64>, off: bool) -> MedSample {
        MedSample {
            participant: p.into(),
            features: f,
            label: if off { MedState::Off } else { MedState::On },
        }
    }

    #[test]
    fn separable_training_set_is_fit_exactly() {
        let s: Vec<MedSample> = (0..20).map(|i| sample("a", vec![i as f64, 0.0], i >= 17)).collect();
        let clf = train_med_classifier(&s, &default_med_forest(1)).unwrap();
        assert!(s.iter().all(|x| clf.predict(&x.features) == x.label));
        let again = train_med_classifier(&s, &default_med_forest(1)).unwrap();
        assert_eq!(clf, again);
        let e = evaluate_med(&clf, &s).unwrap();
        assert_eq!((e.f1, e.auroc), (1.0, Some(1.0)));
        let single: Vec<MedSample> = s.iter().filter(|x| x.label == MedState::On).cloned().collect();
        assert!(train_med_classifier(&single, &default_med_forest(1)).is_err());
    }

    #[test]
    fn shuffled_labels_give_chance_auroc() {
        let mut rng = substream(2, "null", &[]);
        let mut total = 0.0;
        let mut n = 0;
        for shuffle in 0..20u64 {
            let mut groups = BTreeMap::new();
            for p in 0..6 {
                let off = rng.random_range(0..20);
                let rows: Vec<MedSample> = (0..20)
                    .map(|i| sample(&format!("P{p}"), (0..6).map(|_| rng.random_range(0.0..1.0)).collect(), i == off))
                    .collect();
                groups.insert(format!("P{p}"), rows);
            }
            let params = ForestParams {
                n_trees: 25,
                ..default_med_forest(shuffle)
            };
            let r = run_med_protocol("null", &groups, &params).unwrap();
            total += r.auroc_mean.unwrap();
            n += 1;
        }
        let mean = total / n as f64;
        assert!((0.4..=0.6).contains(&mean), "{mean}");
    }

    #[test]
    fn protocol_needs_two_participants() {
        let mut g = BTreeMap::new();
        g.insert("P".to_string(), vec![sample("P", vec![0.0], true)]);
        assert!(matches!(
            run_med_protocol("x", &g, &default_med_forest(0)),
            Err(Error::InfeasibleProtocol { .. })
        ));
        assert_eq!(FeatureSource::parse("gait-from-truth").unwrap(), FeatureSource::GaitFromTruth);
    }
}
