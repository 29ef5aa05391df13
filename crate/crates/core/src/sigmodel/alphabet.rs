use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolAlphabet {
    name: String,
    points: Vec<Complex64>,
}

impl SymbolAlphabet {
    pub fn new(name: impl Into<String>, points: Vec<Complex64>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }

    /// Unit-power QPSK, {(±1 ± j)/√2}, listed counter-clockwise from the
    /// first quadrant.
    pub fn qpsk() -> Self {
        let a = FRAC_1_SQRT_2;
        Self::new(
            "QPSK",
            vec![
                Complex64::new(a, a),
                Complex64::new(-a, a),
                Complex64::new(-a, -a),
                Complex64::new(a, -a),
            ],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, symbol: Complex64) -> bool {
        self.points.contains(&symbol)
    }

    /// Index of the Euclidean-nearest point; ties go to the earlier point.
    pub fn nearest(&self, t: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (t - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}
