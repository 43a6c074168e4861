//! Agreement between a predicted and a ground-truth index map.
//!
//! Dice and IoU are computed per domain and averaged with equal weight over the
//! two domains. A domain absent from both maps scores 1.

use serde::{Deserialize, Serialize};

use crate::cluster::IndexMap;
use crate::error::{Error, Result};

/// Per-domain `|A ∩ B|`, `|A|`, `|B|` for labels 0 and 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Counts {
    both: [usize; 2],
    pred: [usize; 2],
    truth: [usize; 2],
    total: usize,
}

fn counts(pred: &IndexMap, truth: &IndexMap) -> Result<Counts> {
    if pred.dims() != truth.dims() {
        let (ph, pw) = pred.dims();
        let (th, tw) = truth.dims();
        return Err(Error::input(format!(
            "prediction is {pw}x{ph} but ground truth is {tw}x{th}"
        )));
    }
    let mut c = Counts::default();
    for (&p, &t) in pred.labels.as_slice().iter().zip(truth.labels.as_slice()) {
        let (p, t) = (usize::from(p.min(1)), usize::from(t.min(1)));
        c.pred[p] += 1;
        c.truth[t] += 1;
        if p == t {
            c.both[p] += 1;
        }
        c.total += 1;
    }
    Ok(c)
}

/// Overall score plus the `[dark, light]` components it averages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub overall: f64,
    pub per_domain: [f64; 2],
}

impl Overlap {
    /// Builds the score from per-domain ratios `num / den`; a zero denominator scores 1.
    /// The mean is formed as one fraction so that exact rationals round only once.
    fn from_ratios(num: [usize; 2], den: [usize; 2]) -> Self {
        let (num, den) = if den[0] == 0 || den[1] == 0 {
            let fix = |i: usize| if den[i] == 0 { (1, 1) } else { (num[i], den[i]) };
            let (a, b) = (fix(0), fix(1));
            ([a.0, b.0], [a.1, b.1])
        } else {
            (num, den)
        };
        let (n0, n1, d0, d1) = (num[0] as u128, num[1] as u128, den[0] as u128, den[1] as u128);
        Overlap {
            overall: (n0 * d1 + n1 * d0) as f64 / (2 * d0 * d1) as f64,
            per_domain: [num[0] as f64 / den[0] as f64, num[1] as f64 / den[1] as f64],
        }
    }
}

/// Fraction of cells whose labels agree.
pub fn accuracy(pred: &IndexMap, truth: &IndexMap) -> Result<f64> {
    let c = counts(pred, truth)?;
    if c.total == 0 {
        return Ok(1.0);
    }
    Ok((c.both[0] + c.both[1]) as f64 / c.total as f64)
}

/// `Dice_i = 2|A_i ∩ B_i| / (|A_i| + |B_i|)`.
pub fn dice(pred: &IndexMap, truth: &IndexMap) -> Result<Overlap> {
    let c = counts(pred, truth)?;
    Ok(Overlap::from_ratios(
        [2 * c.both[0], 2 * c.both[1]],
        [c.pred[0] + c.truth[0], c.pred[1] + c.truth[1]],
    ))
}

/// `IoU_i = |A_i ∩ B_i| / |A_i ∪ B_i|`.
pub fn iou(pred: &IndexMap, truth: &IndexMap) -> Result<Overlap> {
    let c = counts(pred, truth)?;
    let union = |i: usize| c.pred[i] + c.truth[i] - c.both[i];
    Ok(Overlap::from_ratios(c.both, [union(0), union(1)]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationScore {
    pub accuracy: f64,
    pub dice: f64,
    pub iou: f64,
    pub dice_per_domain: [f64; 2],
    pub iou_per_domain: [f64; 2],
}

pub fn score(pred: &IndexMap, truth: &IndexMap) -> Result<SegmentationScore> {
    let d = dice(pred, truth)?;
    let j = iou(pred, truth)?;
    Ok(SegmentationScore {
        accuracy: accuracy(pred, truth)?,
        dice: d.overall,
        iou: j.overall,
        dice_per_domain: d.per_domain,
        iou_per_domain: j.per_domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, labels: &[u8]) -> IndexMap {
        IndexMap::new(Grid::from_vec(w, h, labels.to_vec()).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn hand_pair() {
        let pred = map(2, 2, &[1, 1, 0, 0]);
        let truth = map(2, 2, &[1, 0, 0, 0]);
        assert_eq!(accuracy(&pred, &truth).unwrap(), 0.75);
        let d = dice(&pred, &truth).unwrap();
        assert_eq!(d.per_domain, [4.0 / 5.0, 2.0 / 3.0]);
        assert_eq!(d.overall, 11.0 / 15.0);
        let j = iou(&pred, &truth).unwrap();
        assert_eq!(j.per_domain, [2.0 / 3.0, 0.5]);
        assert_eq!(j.overall, 7.0 / 12.0);
    }

    #[test]
    fn identity_and_complement() {
        let a = map(3, 2, &[1, 0, 1, 1, 0, 0]);
        let s = score(&a, &a).unwrap();
        assert_eq!((s.accuracy, s.dice, s.iou), (1.0, 1.0, 1.0));
        assert_eq!(accuracy(&a, &a.flipped()).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports() {
        let ones = map(2, 2, &[1; 4]);
        let zeros = map(2, 2, &[0; 4]);
        let d = dice(&ones, &zeros).unwrap();
        assert_eq!(d.per_domain, [0.0, 0.0]);
        assert_eq!(d.overall, 0.0);
    }

    #[test]
    fn single_domain_images_do_not_nan() {
        let zeros = map(2, 2, &[0; 4]);
        let s = score(&zeros, &zeros).unwrap();
        assert_eq!(s.dice_per_domain, [1.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(score(&map(2, 2, &[0; 4]), &map(4, 1, &[0; 4])).is_err());
    }

    #[test]
    fn json_keys() {
        let a = map(2, 1, &[0, 1]);
        let v = serde_json::to_value(score(&a, &a).unwrap()).unwrap();
        for key in ["accuracy", "dice", "iou", "dice_per_domain", "iou_per_domain"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn invariants(bits in prop::collection::vec(0u8..2, 32), other in prop::collection::vec(0u8..2, 32)) {
            let (a, b) = (map(8, 4, &bits), map(8, 4, &other));
            let (d, j) = (dice(&a, &b).unwrap(), iou(&a, &b).unwrap());
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert_eq!(j, iou(&b, &a).unwrap());
            prop_assert!(j.overall <= d.overall + 1e-15);
            for i in 0..2 {
                prop_assert!((d.per_domain[i] - 2.0 * j.per_domain[i] / (1.0 + j.per_domain[i])).abs() <= 1e-12);
            }
            let flipped = score(&a.flipped(), &b.flipped()).unwrap();
            let s = score(&a, &b).unwrap();
            prop_assert_eq!((s.accuracy, s.dice, s.iou), (flipped.accuracy, flipped.dice, flipped.iou));
            let perfect = s.accuracy == 1.0;
            prop_assert_eq!(perfect, s.dice == 1.0);
            prop_assert_eq!(perfect, s.iou == 1.0);
        }
    }
}
