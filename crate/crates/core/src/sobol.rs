//! Sobol low-discrepancy points with an optional random digital shift.
//!
//! Direction numbers are the first entries of the Joe & Kuo (2008)
//! `new-joe-kuo-6.21201` table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const BITS: usize = 32;

/// (degree s, polynomial coefficients a, initial m_1..m_s) for dimensions 2..
const JOE_KUO: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

pub const MAX_DIMS: usize = JOE_KUO.len() + 1;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
}

impl Sobol {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::InvalidParameter(format!(
                "sobol dimension must be in 1..={MAX_DIMS}, got {dims}"
            )));
        }
        let mut directions = Vec::with_capacity(dims);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - k);
        }
        directions.push(first);
        for &(s, a, m) in &JOE_KUO[..dims - 1] {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..s.min(BITS) {
                v[k] = m[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for j in 1..s {
                    if (a >> (s - 1 - j)) & 1 == 1 {
                        x ^= v[k - j];
                    }
                }
                v[k] = x;
            }
            directions.push(v);
        }
        Ok(Self {
            directions,
            shift: vec![0; dims],
        })
    }

    /// Sobol points XOR-shifted by a seeded random word per dimension. The
    /// shift keeps the net structure while avoiding the origin corner.
    pub fn scrambled(dims: usize, seed: u64) -> Result<Self> {
        let mut s = Self::new(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50b0_1a5e_ed00_0001);
        s.shift = (0..dims).map(|_| rng.random::<u32>()).collect();
        Ok(s)
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    pub fn point(&self, index: u32) -> Vec<f64> {
        self.directions
            .iter()
            .zip(&self.shift)
            .map(|(v, shift)| {
                let mut x = 0u32;
                let mut i = index;
                let mut k = 0;
                while i != 0 {
                    if i & 1 == 1 {
                        x ^= v[k];
                    }
                    i >>= 1;
                    k += 1;
                }
                (x ^ shift) as f64 / 4_294_967_296.0
            })
            .collect()
    }

    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n as u32).map(|i| self.point(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_projections_are_stratified() {
        let s = Sobol::new(MAX_DIMS).unwrap();
        let n = 256;
        let pts = s.points(n);
        for d in 0..MAX_DIMS {
            let mut cells: Vec<usize> = pts.iter().map(|p| (p[d] * n as f64) as usize).collect();
            cells.sort_unstable();
            assert_eq!(cells, (0..n).collect::<Vec<_>>(), "dimension {d}");
        }
    }

    #[test]
    fn two_dimensional_net_property() {
        // first 16 points of dims (1, 2) hit every cell of a 4x4 grid once
        let s = Sobol::new(2).unwrap();
        let mut seen = [[0; 4]; 4];
        for p in s.points(16) {
            seen[(p[0] * 4.0) as usize][(p[1] * 4.0) as usize] += 1;
        }
        assert!(seen.iter().flatten().all(|&c| c == 1));
    }

    #[test]
    fn scrambled_points_stay_in_unit_cube_and_are_seeded() {
        let a = Sobol::scrambled(3, 5).unwrap().points(64);
        let b = Sobol::scrambled(3, 5).unwrap().points(64);
        let c = Sobol::scrambled(3, 6).unwrap().points(64);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn rejects_unsupported_dimension() {
        assert!(Sobol::new(0).is_err());
        assert!(Sobol::new(MAX_DIMS + 1).is_err());
    }
}
