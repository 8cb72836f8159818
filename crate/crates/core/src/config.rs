use std::fmt;

/// An element of `{0,1}^S`, bit-packed. Site `i` occupies bit `i`, so for
/// `n <= 63` the packed word is the state index used by the exact solvers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    n_sites: usize,
    words: Vec<u64>,
}

impl SpinConfiguration {
    pub fn zeros(n_sites: usize) -> Self {
        Self {
            n_sites,
            words: vec![0; n_sites.div_ceil(64)],
        }
    }

    pub fn ones(n_sites: usize) -> Self {
        let mut c = Self::zeros(n_sites);
        for (i, w) in c.words.iter_mut().enumerate() {
            let remaining = n_sites - 64 * i;
            *w = if remaining >= 64 { u64::MAX } else { (1u64 << remaining) - 1 };
        }
        c
    }

    /// Configuration with bit `i` equal to bit `i` of `index`.
    pub fn from_index(index: u64, n_sites: usize) -> Self {
        assert!(n_sites <= 64, "state index only defined for at most 64 sites");
        let mut c = Self::zeros(n_sites);
        if n_sites > 0 {
            let mask = if n_sites == 64 { u64::MAX } else { (1u64 << n_sites) - 1 };
            c.words[0] = index & mask;
        }
        c
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut c = Self::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            c.set(i, b);
        }
        c
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n_sites == 0
    }

    #[inline]
    pub fn get(&self, site: usize) -> bool {
        debug_assert!(site < self.n_sites);
        (self.words[site / 64] >> (site % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, site: usize, value: bool) {
        debug_assert!(site < self.n_sites);
        let bit = 1u64 << (site % 64);
        if value {
            self.words[site / 64] |= bit;
        } else {
            self.words[site / 64] &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, site: usize) {
        self.words[site / 64] ^= 1u64 << (site % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Packed state index; panics above 64 sites.
    pub fn index(&self) -> u64 {
        assert!(self.n_sites <= 64, "state index only defined for at most 64 sites");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n_sites).map(move |i| self.get(i))
    }
}

impl fmt::Debug for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfiguration(")?;
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        write!(f, ")")
    }
}
