/// Linear-interpolation quantile of an ascending slice (the "type 7"
/// definition: position `p (n - 1)`).
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Box-plot summary with 1.5 IQR outliers and the empirical 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
    /// 2.5% quantile
    pub lower_95: f64,
    /// 97.5% quantile
    pub upper_95: f64,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.to_vec();
        if v.is_empty() || v.iter().any(|x| x.is_nan()) {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p| quantile(&v, p).expect("non-empty");
        let (q1, q3) = (q(0.25), q(0.75));
        let iqr = q3 - q1;
        let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        Some(Self {
            n: v.len(),
            min: v[0],
            q1,
            median: q(0.5),
            q3,
            max: v[v.len() - 1],
            outliers: v.iter().copied().filter(|&x| x < fence_lo || x > fence_hi).collect(),
            lower_95: q(0.025),
            upper_95: q(0.975),
        })
    }
}
