use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ScoreStream;
use crate::error::{Error, Result};
use crate::motiondetect::Mdi;

/// Names of the five auxiliary tasks, in loss order.
pub const AUX_TASKS: [&str; 5] = [
    "handedness",
    "major_location",
    "movement_type",
    "activity_or_sign",
    "strokes",
];

/// Per-class labels for the auxiliary tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassAttributes {
    /// "one", "two" or "none" (gross motor activities).
    pub handedness: String,
    pub major_location: String,
    pub movement_type: String,
    /// "activity" or "sign".
    pub activity_or_sign: String,
    pub strokes: u8,
}

impl ClassAttributes {
    fn value(&self, task: usize) -> String {
        match task {
            0 => self.handedness.clone(),
            1 => self.major_location.clone(),
            2 => self.movement_type.clone(),
            3 => self.activity_or_sign.clone(),
            _ => self.strokes.to_string(),
        }
    }
}

fn attrs(hand: &str, loc: &str, mov: &str, kind: &str, strokes: u8) -> ClassAttributes {
    ClassAttributes {
        handedness: hand.into(),
        major_location: loc.into(),
        movement_type: mov.into(),
        activity_or_sign: kind.into(),
        strokes,
    }
}

/// Attribute table for the three gross motor activities and fifteen signs
/// used by the synthetic sequence corpus.
pub fn default_attribute_table() -> BTreeMap<String, ClassAttributes> {
    let rows = [
        ("walk", attrs("none", "body", "translation", "activity", 0)),
        ("sit", attrs("none", "body", "transition", "activity", 1)),
        ("stand", attrs("none", "body", "transition", "activity", 1)),
        ("tired", attrs("two", "chest", "arc", "sign", 1)),
        ("book", attrs("two", "neutral", "hinge", "sign", 2)),
        ("sleep", attrs("one", "head", "straight", "sign", 1)),
        ("evening", attrs("two", "neutral", "tap", "sign", 2)),
        ("ready", attrs("two", "neutral", "wiggle", "sign", 3)),
        ("hot", attrs("one", "mouth", "twist", "sign", 1)),
        ("month", attrs("two", "neutral", "straight", "sign", 2)),
        ("cook", attrs("two", "neutral", "flip", "sign", 2)),
        ("again", attrs("two", "neutral", "arc", "sign", 1)),
        ("summon", attrs("one", "neutral", "wiggle", "sign", 3)),
        ("maybe", attrs("two", "neutral", "alternate", "sign", 4)),
        ("night", attrs("two", "neutral", "arc", "sign", 1)),
        ("something", attrs("one", "neutral", "circle", "sign", 2)),
        ("teacher", attrs("two", "head", "straight", "sign", 2)),
        ("teach", attrs("two", "head", "straight", "sign", 2)),
    ];
    rows.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Cross-entropy of each auxiliary task over an MDI. The predicted
/// distribution of a task is the mean over steps of the class posteriors
/// (blank excluded, renormalized) marginalized onto that task's values.
pub fn mdi_task_losses(
    stream: &ScoreStream,
    mdi: &Mdi,
    true_label: &str,
    table: &BTreeMap<String, ClassAttributes>,
) -> Result<[f64; 5]> {
    stream.check_mdi(mdi)?;
    let truth = table
        .get(true_label)
        .ok_or_else(|| Error::invalid(format!("no attributes for class `{true_label}`")))?;
    let labels = stream.labels();
    for l in &labels[1..] {
        if !table.contains_key(l) {
            return Err(Error::invalid(format!("no attributes for class `{l}`")));
        }
    }
    let mut mean = vec![0.0; labels.len()];
    for t in mdi.start_step..=mdi.end_step {
        let row = stream.row(t);
        let mass: f64 = row[1..].iter().sum();
        if mass > 0.0 {
            for c in 1..labels.len() {
                mean[c] += row[c] / mass;
            }
        }
    }
    let total: f64 = mean.iter().sum();
    let mut losses = [0.0; 5];
    for (task, loss) in losses.iter_mut().enumerate() {
        let want = truth.value(task);
        let p: f64 = (1..labels.len())
            .filter(|&c| table[&labels[c]].value(task) == want)
            .map(|c| if total > 0.0 { mean[c] / total } else { 0.0 })
            .sum();
        *loss = -p.max(1e-12).ln();
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdecode::{mtl_total_loss, BLANK};

    #[test]
    fn table_covers_eighteen_classes_and_serializes() {
        let t = default_attribute_table();
        assert_eq!(t.len(), 18);
        assert_eq!(
            t.values().filter(|a| a.activity_or_sign == "sign").count(),
            15
        );
        let json = serde_json::to_string(&t).unwrap();
        let back: BTreeMap<String, ClassAttributes> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn confident_correct_prediction_has_small_losses() {
        let table = default_attribute_table();
        let labels: Vec<String> = std::iter::once(BLANK.to_string())
            .chain(table.keys().cloned())
            .collect();
        let k = labels.iter().position(|l| l == "book").unwrap();
        let probs = (0..5)
            .map(|_| {
                (0..labels.len())
                    .map(|c| if c == k { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let s = ScoreStream::new(probs, labels, 0.2).unwrap();
        let l = mdi_task_losses(&s, &Mdi::new(0, 4, 0.2), "book", &table).unwrap();
        assert!(l.iter().all(|&x| x.abs() < 1e-9));
        let wrong = mdi_task_losses(&s, &Mdi::new(0, 4, 0.2), "walk", &table).unwrap();
        assert!(wrong[3] > 10.0);
        let total = mtl_total_loss(0.0, 1.0, &wrong, &[0.2; 5]).unwrap();
        assert!(total > 0.0);
    }
}
