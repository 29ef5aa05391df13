use num_complex::Complex64;

use crate::error::{Error, Result};

/// S×N spreading-code matrix with unit-norm columns, stored column-major so
/// that each user's code is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingMatrix {
    spreading_factor: usize,
    num_users: usize,
    entries: Vec<Complex64>,
}

impl SpreadingMatrix {
    /// Builds a matrix from column-major entries; every column must already
    /// have unit norm.
    pub fn from_columns(
        spreading_factor: usize,
        num_users: usize,
        entries: Vec<Complex64>,
    ) -> Result<Self> {
        if spreading_factor == 0 || num_users == 0 {
            return Err(Error::InvalidConfig(
                "spreading matrix needs at least one chip and one user".into(),
            ));
        }
        if entries.len() != spreading_factor * num_users {
            return Err(Error::shape(
                "spreading matrix",
                spreading_factor * num_users,
                entries.len(),
            ));
        }
        let m = Self {
            spreading_factor,
            num_users,
            entries,
        };
        for i in 0..num_users {
            let norm = m.column(i).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "code {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(m)
    }

    pub fn spreading_factor(&self) -> usize {
        self.spreading_factor
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn column(&self, user: usize) -> &[Complex64] {
        let s = self.spreading_factor;
        &self.entries[user * s..(user + 1) * s]
    }

    pub fn get(&self, chip: usize, user: usize) -> Complex64 {
        self.entries[user * self.spreading_factor + chip]
    }

    /// Largest absolute deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.num_users {
            for j in 0..self.num_users {
                let dot: Complex64 = self
                    .column(i)
                    .iter()
                    .zip(self.column(j))
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

/// Sylvester Walsh–Hadamard codes, N = S, entries ±1/√S.
pub fn hadamard_codes(spreading_factor: usize) -> Result<SpreadingMatrix> {
    if !spreading_factor.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(spreading_factor));
    }
    let s = spreading_factor;
    let amp = 1.0 / (s as f64).sqrt();
    // Sylvester ordering: H[k][i] = (-1)^popcount(k & i).
    let entries = (0..s)
        .flat_map(|user| {
            (0..s).map(move |chip| {
                let sign = if (chip & user).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * amp, 0.0)
            })
        })
        .collect();
    Ok(SpreadingMatrix {
        spreading_factor: s,
        num_users: s,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case() {
        let h = hadamard_codes(2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert_eq!(h.column(0), &[Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
        assert_eq!(h.column(1), &[Complex64::new(r, 0.0), Complex64::new(-r, 0.0)]);
    }

    #[test]
    fn orthonormal() {
        assert!(hadamard_codes(4).unwrap().orthonormality_error() < 1e-12);
        assert!(hadamard_codes(128).unwrap().orthonormality_error() < 1e-10);
    }

    #[test]
    fn entry_magnitude() {
        let h = hadamard_codes(128).unwrap();
        let expected = 1.0 / 128f64.sqrt();
        assert!((expected - 0.08839).abs() < 1e-5);
        for u in 0..128 {
            for c in h.column(u) {
                assert!((c.norm() - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(hadamard_codes(12), Err(Error::NotPowerOfTwo(12))));
        assert!(matches!(hadamard_codes(0), Err(Error::NotPowerOfTwo(0))));
    }

    #[test]
    fn from_columns_checks_norm() {
        let bad = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(SpreadingMatrix::from_columns(2, 1, bad).is_err());
        let good = vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        assert!(SpreadingMatrix::from_columns(2, 1, good).is_ok());
    }
}
