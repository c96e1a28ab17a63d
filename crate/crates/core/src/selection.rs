//! Threshold nomination of favoured learning styles.
//!
//! Raw predictions are clamped to [0, 1]; a style is nominated when its gap
//! to the top style is at most the threshold. The comparison allows
//! [`GAP_TOLERANCE`] of slack so that decimal inputs behave as written
//! (0.4 − 0.3 is 0.10000000000000003 in binary floating point).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Style, StyleProbabilities};

pub const GAP_TOLERANCE: f64 = 1e-9;

/// Conventional threshold when the caller does not choose one.
pub const DEFAULT_THRESHOLD: f64 = 0.15;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("prediction for {0} is not finite")]
    NonFinitePrediction(Style),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nomination {
    /// Descending by clamped probability, canonical order on ties.
    pub styles: Vec<Style>,
    pub threshold: f64,
    /// Clamped predictions the decision was made on.
    pub clamped: [f64; 4],
    /// Clamped predictions rescaled to sum to one (uniform when degenerate).
    pub normalized_probs: StyleProbabilities,
    /// Every prediction clamped to zero; all four styles are returned.
    pub degenerate: bool,
}

pub fn nominate(raw: [f64; 4], threshold: f64) -> Result<Nomination, SelectionError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(SelectionError::InvalidThreshold(threshold));
    }
    if let Some(s) = Style::ALL.into_iter().find(|s| !raw[s.index()].is_finite()) {
        return Err(SelectionError::NonFinitePrediction(s));
    }
    let clamped = raw.map(|x| x.clamp(0.0, 1.0));
    let mut order = Style::ALL.to_vec();
    // stable sort keeps canonical order among equal values
    order.sort_by(|a, b| clamped[b.index()].total_cmp(&clamped[a.index()]));

    let total: f64 = clamped.iter().sum();
    if total == 0.0 {
        return Ok(Nomination {
            styles: order,
            threshold,
            clamped,
            normalized_probs: StyleProbabilities([0.25; 4]),
            degenerate: true,
        });
    }
    let top = clamped[order[0].index()];
    let styles = order
        .into_iter()
        .take_while(|s| top - clamped[s.index()] <= threshold + GAP_TOLERANCE)
        .collect();
    Ok(Nomination {
        styles,
        threshold,
        clamped,
        normalized_probs: StyleProbabilities(clamped.map(|x| x / total)),
        degenerate: false,
    })
}

/// Comma-separated letters, e.g. `R,A,V`.
pub fn format_styles(styles: &[Style]) -> String {
    styles.iter().map(|s| s.letter().to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Style::*;

    const EXAMPLE: [f64; 4] = [0.3, 0.22, 0.08, 0.4];

    #[test]
    fn worked_examples() {
        assert_eq!(nominate(EXAMPLE, 0.2).unwrap().styles, vec![R, A, V]);
        assert_eq!(nominate(EXAMPLE, 0.1).unwrap().styles, vec![R, A]);
        assert_eq!(nominate(EXAMPLE, 1.0).unwrap().styles, vec![R, A, V, K]);
        assert_eq!(nominate(EXAMPLE, 0.0).unwrap().styles, vec![R]);
    }

    #[test]
    fn clamping_and_degeneracy() {
        let n = nominate([1.3, -0.2, 0.95, 0.1], 0.1).unwrap();
        assert_eq!(n.clamped, [1.0, 0.0, 0.95, 0.1]);
        assert_eq!(n.styles, vec![A, K]);
        let d = nominate([-0.1, -0.3, 0.0, -2.0], 0.05).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.styles, vec![A, V, K, R]);
        assert_eq!(nominate(EXAMPLE, 1.5), Err(SelectionError::InvalidThreshold(1.5)));
        assert_eq!(nominate(EXAMPLE, -0.1), Err(SelectionError::InvalidThreshold(-0.1)));
        assert!(nominate([f64::NAN, 0.0, 0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn zero_threshold_keeps_ties() {
        assert_eq!(nominate([0.2, 0.4, 0.4, 0.0], 0.0).unwrap().styles, vec![V, K]);
        assert_eq!(format_styles(&[R, A, V]), "R,A,V");
    }

    proptest! {
        #[test]
        fn monotone_in_threshold(p in proptest::array::uniform4(0.0f64..1.0), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = nominate(p, lo).unwrap().styles;
            let b = nominate(p, hi).unwrap().styles;
            prop_assert!(a.len() <= b.len());
            prop_assert_eq!(&b[..a.len()], &a[..]);
            prop_assert_eq!(a[0], b[0]);
        }

        #[test]
        fn shift_invariant_without_clamping(p in proptest::array::uniform4(0.2f64..0.6), c in -0.2f64..0.4, t in 0.0f64..1.0) {
            let shifted = p.map(|x| x + c);
            prop_assert_eq!(nominate(p, t).unwrap().styles, nominate(shifted, t).unwrap().styles);
        }
    }
}
