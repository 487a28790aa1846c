//! Arithmetic over a prime field `F_q`, elements stored as `u32` in `0..q`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PrimeField {
    q: u32,
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(q: u32) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::invalid(format!("field order {q} is not prime")));
        }
        Ok(PrimeField { q })
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    pub fn reduce(&self, v: u64) -> u32 {
        (v % self.q as u64) as u32
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 + b as u64)
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 + self.q as u64 - b as u64)
    }

    pub fn neg(&self, a: u32) -> u32 {
        self.sub(0, a)
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 * b as u64)
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1 % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        let a = a % self.q;
        (a != 0).then(|| self.pow(a, self.q as u64 - 2))
    }

    /// `sum_i coeffs[i] * values[i]`.
    pub fn dot(&self, coeffs: &[u32], values: &[u32]) -> u32 {
        coeffs
            .iter()
            .zip(values)
            .fold(0, |acc, (&c, &v)| self.add(acc, self.mul(c, v)))
    }

    /// Reduces `rows` (each `cols` wide, with any trailing payload columns)
    /// to reduced row-echelon form over the first `cols` columns. Returns the
    /// pivot column of each leading row.
    pub fn row_reduce(&self, rows: &mut [Vec<u32>], cols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            let Some(p) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
                continue;
            };
            rows.swap(r, p);
            let inv = self.inv(rows[r][c]).expect("nonzero pivot");
            for v in rows[r].iter_mut() {
                *v = self.mul(*v, inv);
            }
            for i in 0..rows.len() {
                if i != r && rows[i][c] != 0 {
                    let f = rows[i][c];
                    for j in 0..rows[i].len() {
                        let sub = self.mul(f, rows[r][j]);
                        rows[i][j] = self.sub(rows[i][j], sub);
                    }
                }
            }
            pivots.push(c);
            r += 1;
            if r == rows.len() {
                break;
            }
        }
        pivots
    }

    pub fn rank(&self, rows: &[Vec<u32>], cols: usize) -> usize {
        let mut m: Vec<Vec<u32>> = rows.iter().map(|r| r[..cols].to_vec()).collect();
        self.row_reduce(&mut m, cols).len()
    }
}

impl TryFrom<u32> for PrimeField {
    type Error = Error;

    fn try_from(q: u32) -> Result<Self> {
        PrimeField::new(q)
    }
}

impl From<PrimeField> for u32 {
    fn from(f: PrimeField) -> u32 {
        f.q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PRIMES: [u32; 5] = [2, 3, 5, 7, 257];

    #[test]
    fn rejects_composites() {
        for q in [0, 1, 4, 9, 256] {
            assert!(PrimeField::new(q).is_err());
        }
        for q in PRIMES {
            assert!(PrimeField::new(q).is_ok());
        }
    }

    #[test]
    fn small_cases() {
        let f = PrimeField::new(5).unwrap();
        assert_eq!(f.add(2, 3), 0);
        assert_eq!(f.mul(3, 4), 2);
        assert_eq!(f.inv(2), Some(3));
        assert_eq!(f.inv(0), None);
        assert_eq!(f.neg(1), 4);
    }

    #[test]
    fn rank_examples() {
        let f = PrimeField::new(2).unwrap();
        assert_eq!(f.rank(&[vec![1, 1], vec![1, 1]], 2), 1);
        assert_eq!(f.rank(&[vec![1, 0], vec![1, 1]], 2), 2);
        assert_eq!(f.rank(&[], 2), 0);
    }

    fn field_and_elems() -> impl Strategy<Value = (PrimeField, u32, u32, u32)> {
        prop::sample::select(PRIMES.to_vec())
            .prop_flat_map(|q| (Just(PrimeField::new(q).unwrap()), 0..q, 0..q, 0..q))
    }

    proptest! {
        #[test]
        fn field_laws((f, a, b, c) in field_and_elems()) {
            prop_assert_eq!(f.add(a, b), f.add(b, a));
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.add(a, f.neg(a)), 0);
            prop_assert_eq!(f.add(a, 0), a);
            prop_assert_eq!(f.mul(a, 1), a);
            if a != 0 {
                prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
    }
}
