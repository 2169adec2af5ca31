use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::unit_hash;
use crate::error::{invalid, Result};
use crate::text::{DocumentLayout, Label};

/// A simulated reader.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    /// Frequency-rank threshold: content words ranked beyond it are
    /// candidates for being unknown.
    pub proficiency: f64,
    /// Probability that a content word's knowledge flips relative to the
    /// threshold rule. Drawn once per word type, so a flipped word stays
    /// flipped across documents.
    pub label_noise: f64,
    /// Fixation-duration multiplier on unknown words.
    pub dwell_gain: f64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.proficiency > 0.0) {
            return invalid(format!("{}: proficiency must be positive", self.user_id));
        }
        if !(0.0..=0.2).contains(&self.label_noise) {
            return invalid(format!("{}: label_noise must lie in [0, 0.2]", self.user_id));
        }
        if !(self.dwell_gain > 0.0) {
            return invalid(format!("{}: dwell_gain must be positive", self.user_id));
        }
        Ok(())
    }
}

/// Labels every word of `layout` for `profile`; function words are always
/// known. `ranks` maps normalized words to 1-based frequency ranks (words
/// missing from it count as rarer than anything ranked).
pub fn assign_labels(
    profile: &UserProfile,
    layout: &DocumentLayout,
    ranks: &HashMap<String, usize>,
    seed: u64,
) -> Result<Vec<Label>> {
    profile.validate()?;
    Ok(layout
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let unknown = if w.is_function_word() {
                false
            } else {
                let norm = w.normalized();
                let rare = ranks.get(&norm).map_or(true, |&r| r as f64 > profile.proficiency);
                let flip = unit_hash(seed, &["label", &profile.user_id, &norm]) < profile.label_noise;
                rare != flip
            };
            Label {
                user_id: profile.user_id.clone(),
                doc_id: layout.doc_id.clone(),
                word_index: i,
                unknown,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::text::LayoutWord;

    fn doc(words: &[&str]) -> DocumentLayout {
        DocumentLayout {
            doc_id: "d".into(),
            line_height: 20.0,
            words: words
                .iter()
                .enumerate()
                .map(|(i, t)| LayoutWord {
                    text: t.to_string(),
                    bbox: BoundingBox::new(i as f64 * 50.0, 0.0, i as f64 * 50.0 + 40.0, 14.0),
                    line_index: 0,
                })
                .collect(),
            columns: vec![],
        }
    }

    fn user(p: f64, noise: f64) -> UserProfile {
        UserProfile {
            user_id: "u".into(),
            proficiency: p,
            label_noise: noise,
            dwell_gain: 3.0,
        }
    }

    #[test]
    fn noise_free_threshold_rule() {
        let d = doc(&["the", "alpha", "beta", "gamma."]);
        let ranks: HashMap<String, usize> =
            [("the", 1), ("alpha", 10), ("beta", 100), ("gamma", 1000)].iter().map(|(w, r)| (w.to_string(), *r)).collect();
        let ls = assign_labels(&user(50.0, 0.0), &d, &ranks, 1).unwrap();
        assert_eq!(ls.iter().map(|l| l.unknown).collect::<Vec<_>>(), vec![false, false, true, true]);
        let none = assign_labels(&user(1e9, 0.0), &d, &ranks, 1).unwrap();
        assert!(none.iter().all(|l| !l.unknown));
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let d = doc(&["x"]);
        assert!(assign_labels(&user(0.0, 0.0), &d, &HashMap::new(), 1).is_err());
        assert!(assign_labels(&user(5.0, 0.3), &d, &HashMap::new(), 1).is_err());
    }
}
