use serde::{Deserialize, Serialize};

/// Holm's step-down procedure over one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityResult {
    pub fwer: f64,
    /// Original indices in ascending p order (ties keep input order).
    pub order: Vec<usize>,
    pub sorted_p: Vec<f64>,
    /// `fwer / (m - k)` for the `k`-th smallest p (0-based).
    pub thresholds: Vec<f64>,
    /// Rejection flags in input order.
    pub rejected: Vec<bool>,
}

impl MultiplicityResult {
    pub fn rejections(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

/// Rejects the `k` smallest p-values, where `k` is the first position at
/// which `p_(k) > fwer / (m - k)`.
pub fn holm_bonferroni(p_values: &[f64], fwer: f64) -> MultiplicityResult {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let sorted_p: Vec<f64> = order.iter().map(|&i| p_values[i]).collect();
    let thresholds: Vec<f64> = (0..m).map(|k| fwer / (m - k) as f64).collect();
    let mut rejected = vec![false; m];
    for (k, &i) in order.iter().enumerate() {
        if sorted_p[k] > thresholds[k] {
            break;
        }
        rejected[i] = true;
    }
    MultiplicityResult {
        fwer,
        order,
        sorted_p,
        thresholds,
        rejected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_stepped_example() {
        let r = holm_bonferroni(&[0.04, 0.001, 0.01], 0.05);
        assert_eq!(r.rejected, vec![true, true, true]);
        assert_eq!(r.order, vec![1, 2, 0]);
        assert!((r.thresholds[0] - 0.05 / 3.0).abs() < 1e-15);
        assert!((r.thresholds[1] - 0.025).abs() < 1e-15);
    }

    #[test]
    fn stops_at_first_failure() {
        let r = holm_bonferroni(&[0.001, 0.03, 0.04], 0.05);
        assert_eq!(r.rejected, vec![true, false, false]);
        assert_eq!(holm_bonferroni(&[1.0, 1.0], 0.05).rejections(), 0);
        assert!(holm_bonferroni(&[], 0.05).rejected.is_empty());
    }

    #[test]
    fn ties_keep_input_order() {
        let r = holm_bonferroni(&[0.02, 0.01, 0.02], 0.05);
        assert_eq!(r.order, vec![1, 0, 2]);
    }

    proptest! {
        #[test]
        fn rejections_form_a_down_set(p in prop::collection::vec(0.0f64..=1.0, 0..30), fwer in 0.001f64..0.5) {
            let r = holm_bonferroni(&p, fwer);
            let flags: Vec<bool> = r.order.iter().map(|&i| r.rejected[i]).collect();
            let k = flags.iter().take_while(|&&f| f).count();
            prop_assert!(flags[k..].iter().all(|&f| !f));
            // Never rejects more than Bonferroni-at-the-first-step would allow per position.
            for (j, &i) in r.order.iter().enumerate().take(k) {
                prop_assert!(p[i] <= fwer / (p.len() - j) as f64);
            }
        }
    }
}
