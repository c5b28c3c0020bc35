use serde::{Deserialize, Serialize};

/// ROC-AUC with mid-ranks for ties, so every tied positive/negative pair
/// counts ½. `None` when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len() as f64;
    (pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n).sqrt()
}

pub fn mae(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len() as f64;
    pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n
}

/// `1 − SS_res/SS_tot` about the truth's own mean; `None` when the truth
/// is constant.
pub fn r2(pred: &[f64], truth: &[f64]) -> Option<f64> {
    assert_eq!(pred.len(), truth.len());
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Some(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    RocAuc,
    Rmse,
    Mae,
    R2,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::RocAuc => "roc_auc",
            MetricKind::Rmse => "rmse",
            MetricKind::Mae => "mae",
            MetricKind::R2 => "r2",
        }
    }

    pub fn parse(s: &str) -> Option<MetricKind> {
        [
            MetricKind::RocAuc,
            MetricKind::Rmse,
            MetricKind::Mae,
            MetricKind::R2,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::RocAuc | MetricKind::R2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub metric: MetricKind,
    pub split: String,
    pub seed: u64,
    pub per_task: Vec<TaskMetric>,
    /// Mean over tasks that were scored; `None` when none were.
    pub macro_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskMetric {
    pub task: String,
    pub value: Option<f64>,
    pub n: usize,
    /// Why the task was not scored.
    pub note: Option<String>,
}

/// Scores each task over rows whose label is present. Classification
/// tasks need both classes to be scored.
pub fn score_tasks(
    metric: MetricKind,
    task_names: &[String],
    outputs: &[Vec<f64>],
    targets: &[Vec<Option<f64>>],
) -> Vec<TaskMetric> {
    task_names
        .iter()
        .enumerate()
        .map(|(t, name)| {
            let (pred, truth): (Vec<f64>, Vec<f64>) = outputs
                .iter()
                .zip(targets)
                .filter_map(|(o, y)| y[t].map(|v| (o[t], v)))
                .unzip();
            let n = pred.len();
            let (value, note) = if n == 0 {
                (None, Some("no labelled rows".to_string()))
            } else {
                match metric {
                    MetricKind::RocAuc => {
                        let labels: Vec<bool> = truth.iter().map(|&v| v == 1.0).collect();
                        match roc_auc(&pred, &labels) {
                            Some(v) => (Some(v), None),
                            None => (None, Some("only one class present".into())),
                        }
                    }
                    MetricKind::Rmse => (Some(rmse(&pred, &truth)), None),
                    MetricKind::Mae => (Some(mae(&pred, &truth)), None),
                    MetricKind::R2 => match r2(&pred, &truth) {
                        Some(v) => (Some(v), None),
                        None => (None, Some("constant targets".into())),
                    },
                }
            };
            TaskMetric {
                task: name.clone(),
                value,
                n,
                note,
            }
        })
        .collect()
}

pub fn macro_average(per_task: &[TaskMetric]) -> Option<f64> {
    let vals: Vec<f64> = per_task.iter().filter_map(|t| t.value).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_auc() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [false, false, true, true];
        assert_eq!(roc_auc(&s, &l), Some(0.75));
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]), Some(0.5));
        assert_eq!(roc_auc(&[0.1, 0.9], &[false, true]), Some(1.0));
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, true]), None);
    }

    #[test]
    fn regression_metrics() {
        let p = [1.0, 2.0, 4.0];
        let t = [1.0, 3.0, 2.0];
        assert!((rmse(&p, &t) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mae(&p, &t), 1.0);
        // mean 2, SS_tot 2, SS_res 5
        assert_eq!(r2(&p, &t), Some(1.0 - 5.0 / 2.0));
        assert_eq!(r2(&p, &[1.0; 3]), None);
    }

    #[test]
    fn tasks_skip_degenerate() {
        let names = vec!["a".to_string(), "b".to_string()];
        let out = vec![vec![0.9, 0.1], vec![0.2, 0.3], vec![0.5, 0.5]];
        let y = vec![
            vec![Some(1.0), Some(1.0)],
            vec![Some(0.0), None],
            vec![None, Some(1.0)],
        ];
        let r = score_tasks(MetricKind::RocAuc, &names, &out, &y);
        assert_eq!(r[0].value, Some(1.0));
        assert_eq!(r[1].value, None);
        assert_eq!(r[1].n, 2);
        assert_eq!(macro_average(&r), Some(1.0));
    }
}
