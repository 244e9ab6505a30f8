//! Compensated summation with a fixed reduction order.
//!
//! All parallel loops in the crate collect their partial results into a
//! vector in canonical order and reduce it here, so totals do not depend on
//! the number of worker threads.

use crate::cplx::C64;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Componentwise compensated accumulator for complex values.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Sums in iteration order.
pub fn sum_ordered<I: IntoIterator<Item = C64>>(items: I) -> C64 {
    let mut acc = ComplexSum::new();
    for z in items {
        acc.add(z);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        let mut s = NeumaierSum::new();
        for x in xs {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn complex_sum_matches_exact_small_case() {
        let z = sum_ordered([C64::new(0.1, 0.2), C64::new(0.2, -0.2), C64::new(0.3, 1.0)]);
        assert!((z.re - 0.6).abs() < 1e-16);
        assert!((z.im - 1.0).abs() < 1e-16);
    }
}
