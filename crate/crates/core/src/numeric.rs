//! Small numerical accumulators shared by the enumeration and sampling code.

/// Compensated (Kahan-Babuska/Neumaier) summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// Sum of non-negative terms kept as `exp(shift) * mantissa`, so that terms
/// far below the f64 range (e.g. `exp(-1000)`) still add up correctly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSum {
    shift: f64,
    mantissa: KahanSum,
}

impl Default for LogSum {
    fn default() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            mantissa: KahanSum::new(),
        }
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `exp(log_term)`.
    pub fn add_log(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term > self.shift {
            // rescale so the largest term seen has mantissa ~1
            let factor = (self.shift - log_term).exp();
            let old = self.mantissa.value() * factor;
            self.mantissa = KahanSum::new();
            self.mantissa.add(old);
            self.shift = log_term;
        }
        self.mantissa.add((log_term - self.shift).exp());
    }

    pub fn merge(&mut self, other: &LogSum) {
        if other.is_zero() {
            return;
        }
        self.add_log(other.ln());
    }

    pub fn is_zero(&self) -> bool {
        self.shift == f64::NEG_INFINITY || self.mantissa.value() == 0.0
    }

    /// Natural log of the sum; `-inf` for an empty sum.
    pub fn ln(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.shift + self.mantissa.value().ln()
        }
    }

    /// The sum itself (may underflow to 0).
    pub fn value(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa.value() * self.shift.exp()
        }
    }
}

/// Serialises as the natural log of the sum.
impl serde::Serialize for LogSum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.ln())
    }
}

/// Numerically stable `log(sum(exp(x)))` over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: KahanSum = xs.iter().map(|x| (x - m).exp()).collect();
    m + s.value().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..1_000_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-10)).abs() < 1e-15);
    }

    #[test]
    fn logsum_handles_underflow() {
        let mut s = LogSum::new();
        s.add_log(-1000.0);
        s.add_log(-1000.0);
        assert!((s.ln() - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(LogSum::new().ln(), f64::NEG_INFINITY);
    }

    #[test]
    fn logsum_merge_matches_direct() {
        let mut a = LogSum::new();
        let mut b = LogSum::new();
        a.add_log(0.5f64.ln());
        b.add_log(0.25f64.ln());
        b.add_log(0.25f64.ln());
        a.merge(&b);
        assert!((a.value() - 1.0).abs() < 1e-15);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }
}
