//! Small numeric helpers shared by several modules.

use std::sync::OnceLock;

/// Largest `n` for which `ln_factorial(n)` is tabulated.
pub const LN_FACTORIAL_MAX: usize = 4096;

static LN_FACTORIAL: OnceLock<Vec<f64>> = OnceLock::new();

/// ln(n!) from a lazily built table, accumulated with compensated summation
/// so the absolute error stays near one ulp over the whole table.
///
/// Panics if `n > LN_FACTORIAL_MAX`; Fock cutoffs in this library stay far
/// below that bound.
pub fn ln_factorial(n: usize) -> f64 {
    assert!(
        n <= LN_FACTORIAL_MAX,
        "ln_factorial: n = {n} exceeds table size {LN_FACTORIAL_MAX}"
    );
    let table = LN_FACTORIAL.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_MAX + 1);
        table.push(0.0);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for k in 1..=LN_FACTORIAL_MAX {
            let term = (k as f64).ln() - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
            table.push(sum);
        }
        table
    });
    table[n]
}

/// Compensated (Kahan) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    /// Fresh accumulator at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one term.
    pub fn add(&mut self, x: f64) {
        let term = x - self.comp;
        let next = self.sum + term;
        self.comp = (next - self.sum) - term;
        self.sum = next;
    }

    /// Current value of the sum.
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// √n for n = 0..=cutoff as a lookup table.
pub fn sqrt_table(cutoff: usize) -> Vec<f64> {
    (0..=cutoff).map(|n| (n as f64).sqrt()).collect()
}
