//! Small descriptive statistics used by the Monte Carlo harnesses.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

/// Quantile by linear interpolation between order statistics (Hyndman–Fan type 7).
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quartiles of the finite values in `sample`; NaN quartiles if there are none.
pub fn quartiles(sample: &[f64]) -> Quartiles {
    let mut finite: Vec<f64> = sample.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        return Quartiles {
            q25: f64::NAN,
            q50: f64::NAN,
            q75: f64::NAN,
        };
    }
    finite.sort_by(f64::total_cmp);
    Quartiles {
        q25: quantile_sorted(&finite, 0.25),
        q50: quantile_sorted(&finite, 0.5),
        q75: quantile_sorted(&finite, 0.75),
    }
}

pub fn median(sample: &[f64]) -> f64 {
    quartiles(sample).q50
}

pub fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Unbiased sample variance.
pub fn variance(sample: &[f64]) -> f64 {
    let m = mean(sample);
    sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (sample.len() as f64 - 1.0)
}
