use crate::error::{Error, Result};

/// Spins `σ_1..σ_n`, bit-packed: bit `i` set means `σ_{i+1} = +1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    n: usize,
    words: Vec<u64>,
}

impl SpinConfiguration {
    /// All spins down.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            words: vec![0; n.div_ceil(64).max(1)],
        }
    }

    pub fn all_up(n: usize) -> Self {
        let mut s = Self::new(n);
        for i in 0..n {
            s.set(i, 1);
        }
        s
    }

    /// Configuration whose bits are the low `n` bits of `index`.
    pub fn from_index(n: usize, index: u64) -> Result<Self> {
        if n > 64 {
            return Err(Error::Capacity {
                what: "index-encoded configuration",
                n,
                cap: 64,
            });
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut s = Self::new(n);
        s.words[0] = index & mask;
        Ok(s)
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let mut s = Self::new(spins.len());
        for (i, &v) in spins.iter().enumerate() {
            match v {
                1 | -1 => s.set(i, v),
                _ => return Err(Error::InvalidSign { index: i, value: v }),
            }
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The configuration as an index, for `n ≤ 64`.
    pub fn index(&self) -> u64 {
        self.words[0]
    }

    /// `σ_{i+1}` as ±1.
    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        if (self.words[i / 64] >> (i % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: i8) {
        let bit = 1u64 << (i % 64);
        if value > 0 {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn magnetization(&self) -> i64 {
        let up: u32 = self.words.iter().map(|w| w.count_ones()).sum();
        2 * up as i64 - self.n as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.n).map(move |i| self.get(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.iter().map(f64::from).collect()
    }
}
