//! Destination-side recovery by Gaussian elimination over `F_q`.

use serde::Serialize;

use super::field::PrimeField;

/// One correctly received frame: `coefficients · sources = payload`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub coefficients: Vec<u32>,
    pub payload: Vec<u32>,
}

impl Equation {
    /// Direct frame of source `index` out of `k`.
    pub fn direct(index: usize, k: usize, payload: Vec<u32>) -> Self {
        let mut coefficients = vec![0; k];
        coefficients[index] = 1;
        Equation {
            coefficients,
            payload,
        }
    }

    pub fn coded(alpha: Vec<u32>, payload: Vec<u32>) -> Self {
        Equation {
            coefficients: alpha,
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DecodeOutcome {
    Recovered(Vec<Vec<u32>>),
    /// Stacked coefficients have rank below K.
    Outage {
        rank: usize,
    },
}

impl DecodeOutcome {
    pub fn is_outage(&self) -> bool {
        matches!(self, DecodeOutcome::Outage { .. })
    }
}

/// Solves for the K source frames from every correctly received equation.
pub fn destination_decode(equations: &[Equation], k: usize, field: &PrimeField) -> DecodeOutcome {
    let frame_len = equations.first().map_or(0, |e| e.payload.len());
    let mut rows: Vec<Vec<u32>> = equations
        .iter()
        .map(|e| {
            let mut r = e.coefficients.clone();
            r.extend_from_slice(&e.payload);
            r
        })
        .collect();
    let pivots = field.row_reduce(&mut rows, k);
    if pivots.len() < k {
        return DecodeOutcome::Outage { rank: pivots.len() };
    }
    // full rank: the first k rows are the identity block
    DecodeOutcome::Recovered(
        rows[..k]
            .iter()
            .map(|r| r[k..k + frame_len].to_vec())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_direct_frames() {
        let f = PrimeField::new(7).unwrap();
        let frames = vec![vec![1, 2, 3], vec![6, 0, 4]];
        let eq: Vec<Equation> = frames
            .iter()
            .enumerate()
            .map(|(i, p)| Equation::direct(i, 2, p.clone()))
            .collect();
        assert_eq!(
            destination_decode(&eq, 2, &f),
            DecodeOutcome::Recovered(frames)
        );
    }

    #[test]
    fn xor_parity_repair() {
        let f = PrimeField::new(2).unwrap();
        let s0 = vec![1, 0, 1, 1];
        let s1 = vec![0, 1, 1, 0];
        let parity: Vec<u32> = s0.iter().zip(&s1).map(|(a, b)| a ^ b).collect();
        let eq = vec![
            Equation::direct(0, 2, s0.clone()),
            Equation::coded(vec![1, 1], parity),
        ];
        assert_eq!(
            destination_decode(&eq, 2, &f),
            DecodeOutcome::Recovered(vec![s0, s1])
        );
    }

    #[test]
    fn deficient_system_is_outage() {
        let f = PrimeField::new(5).unwrap();
        let eq = vec![
            Equation::coded(vec![1, 2], vec![3]),
            Equation::coded(vec![2, 4], vec![1]),
        ];
        assert_eq!(
            destination_decode(&eq, 2, &f),
            DecodeOutcome::Outage { rank: 1 }
        );
        assert_eq!(
            destination_decode(&[], 3, &f),
            DecodeOutcome::Outage { rank: 0 }
        );
    }
}
