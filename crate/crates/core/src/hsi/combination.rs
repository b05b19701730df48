use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A strictly increasing, non-empty set of band indices.
///
/// Ordering is lexicographic on the index sequence, which is the tie-break
/// rule used throughout the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct BandCombination(Vec<usize>);

impl BandCombination {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("band combination must contain at least one band"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "band indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(Self(indices))
    }

    /// Sorts and validates an unordered band list.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices)
    }

    /// A validated combination that must also fit within `num_bands`.
    pub fn for_bands(indices: Vec<usize>, num_bands: usize) -> Result<Self> {
        let bc = Self::new(indices)?;
        bc.check_bands(num_bands)?;
        Ok(bc)
    }

    pub fn check_bands(&self, num_bands: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= num_bands => Err(Error::BandOutOfRange {
                index: last,
                num_bands,
            }),
            _ => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, band: usize) -> bool {
        self.0.binary_search(&band).is_ok()
    }
}

impl fmt::Display for BandCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for BandCombination {
    type Err = Error;

    /// Parses the `i-j-k` rendering (commas are accepted too).
    fn from_str(s: &str) -> Result<Self> {
        let indices = s
            .split(['-', ','])
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad band index {part:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_unsorted(indices)
    }
}

impl<'de> Deserialize<'de> for BandCombination {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let indices = Vec::<usize>::deserialize(deserializer)?;
        BandCombination::new(indices).map_err(serde::de::Error::custom)
    }
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n-k+i) is always divisible by i
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(acc)
}

/// Exact binomial coefficient `C(n, k)`.
pub fn count_combinations(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Err(Error::invalid(format!("subset size {k} exceeds set size {n}")));
    }
    binomial(n, k)
        .and_then(|c| u64::try_from(c).ok())
        .ok_or(Error::Overflow { n, k })
}

/// Lexicographic rank of `bc` among all `k`-subsets of `0..n`.
pub fn rank_combination(bc: &BandCombination, n: usize) -> Result<u64> {
    bc.check_bands(n)?;
    let k = bc.len();
    let mut rank: u128 = 0;
    let mut next = 0usize;
    for (i, &b) in bc.indices().iter().enumerate() {
        for x in next..b {
            rank += binomial((n - 1 - x) as u64, (k - 1 - i) as u64).ok_or(Error::Overflow {
                n: n as u64,
                k: k as u64,
            })?;
        }
        next = b + 1;
    }
    u64::try_from(rank).map_err(|_| Error::Overflow {
        n: n as u64,
        k: k as u64,
    })
}

/// Inverse of [`rank_combination`].
pub fn unrank_combination(n: usize, k: usize, rank: u64) -> Result<BandCombination> {
    let total = count_combinations(n as u64, k as u64)?;
    if k == 0 || rank >= total {
        return Err(Error::invalid(format!("rank {rank} out of range for C({n}, {k}) = {total}")));
    }
    let mut rest = rank as u128;
    let mut indices = Vec::with_capacity(k);
    let mut x = 0usize;
    for i in 0..k {
        loop {
            // fits: bounded by C(n, k) which fit above
            let c = binomial((n - 1 - x) as u64, (k - 1 - i) as u64).unwrap_or(u128::MAX);
            if c <= rest {
                rest -= c;
                x += 1;
            } else {
                break;
            }
        }
        indices.push(x);
        x += 1;
    }
    Ok(BandCombination(indices))
}
