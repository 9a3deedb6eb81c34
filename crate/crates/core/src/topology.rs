//! Coupling topologies.
//!
//! Ring and small-world lattices keep an explicit, ordered neighbor list per
//! site. Global coupling has no list: every site sees the sum over all sites.
//!
//! Small-world rewiring uses ChaCha8 seeded through `SeedableRng::seed_from_u64`,
//! so an adjacency is fully determined by `(N, p, seed)`.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologyKind {
    Ring,
    Global,
    SmallWorld { rewire_p: f64, seed: u64 },
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Ring => f.write_str("ring"),
            TopologyKind::Global => f.write_str("global"),
            TopologyKind::SmallWorld { .. } => f.write_str("small-world"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    kind: TopologyKind,
    size: usize,
    degree: usize,
    // Row-major, `degree` entries per site. Empty for global coupling.
    neighbors: Vec<usize>,
}

impl Topology {
    /// Periodic chain: site `i` couples to `(i-1) mod N` and `(i+1) mod N`.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain("N", n, "N >= 3 for a ring"));
        }
        let mut neighbors = Vec::with_capacity(2 * n);
        for i in 0..n {
            neighbors.push((i + n - 1) % n);
            neighbors.push((i + 1) % n);
        }
        Ok(Topology {
            kind: TopologyKind::Ring,
            size: n,
            degree: 2,
            neighbors,
        })
    }

    /// All-to-all coupling. The coupling sum runs over every site, self included.
    pub fn global(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("N", n, "N >= 1"));
        }
        Ok(Topology {
            kind: TopologyKind::Global,
            size: n,
            degree: n,
            neighbors: Vec::new(),
        })
    }

    /// Four-neighbor ring `[i-2, i-1, i+1, i+2]` where each slot is, with
    /// probability `p`, replaced by a uniformly drawn site. Draws equal to the
    /// site itself or to another entry of its list are rejected and redrawn.
    /// Lists are per-site (directed): rewiring slot `k` of site `i` does not
    /// touch the list of the new neighbor.
    pub fn small_world(n: usize, p: f64, seed: u64) -> Result<Self> {
        if n < 6 {
            return Err(Error::domain("N", n, "N >= 6 for a small-world lattice"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("rewire_p", p, "0 <= p <= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut neighbors = Vec::with_capacity(4 * n);
        for i in 0..n {
            let mut list = [(i + n - 2) % n, (i + n - 1) % n, (i + 1) % n, (i + 2) % n];
            for slot in 0..4 {
                if rng.random::<f64>() < p {
                    list[slot] = loop {
                        let candidate = rng.random_range(0..n);
                        let taken = list
                            .iter()
                            .enumerate()
                            .any(|(k, &j)| k != slot && j == candidate);
                        if candidate != i && !taken {
                            break candidate;
                        }
                    };
                }
            }
            neighbors.extend_from_slice(&list);
        }
        Ok(Topology {
            kind: TopologyKind::SmallWorld { rewire_p: p, seed },
            size: n,
            degree: 4,
            neighbors,
        })
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of terms in a site's coupling sum.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Ordered neighbor list of `site`; `None` for global coupling.
    pub fn neighbors(&self, site: usize) -> Option<&[usize]> {
        if self.neighbors.is_empty() {
            None
        } else {
            let d = self.degree;
            self.neighbors.get(site * d..site * d + d)
        }
    }

    /// Sum of `values` over the coupling neighborhood of `site`.
    pub fn neighbor_sum(&self, site: usize, values: &[f64]) -> Result<f64> {
        if values.len() != self.size {
            return Err(Error::Shape {
                expected: self.size,
                got: values.len(),
            });
        }
        if site >= self.size {
            return Err(Error::Index {
                index: site,
                lo: 0,
                hi: self.size - 1,
            });
        }
        Ok(match self.kind {
            TopologyKind::Global => values.iter().sum(),
            _ => self.local_sum(site, values),
        })
    }

    /// Neighbor sum for list-based topologies, summed in list order.
    #[inline]
    pub(crate) fn local_sum(&self, site: usize, values: &[f64]) -> f64 {
        let d = self.degree;
        let list = &self.neighbors[site * d..site * d + d];
        let mut sum = values[list[0]];
        for &j in &list[1..] {
            sum += values[j];
        }
        sum
    }

    /// Writes the adjacency as `site,slot,neighbor` rows.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "site,slot,neighbor").map_err(io)?;
        for i in 0..self.size {
            match self.neighbors(i) {
                Some(list) => {
                    for (slot, j) in list.iter().enumerate() {
                        writeln!(out, "{i},{slot},{j}").map_err(io)?;
                    }
                }
                None => {
                    for j in 0..self.size {
                        writeln!(out, "{i},{j},{j}").map_err(io)?;
                    }
                }
            }
        }
        out.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ring_lists() {
        let t = Topology::ring(3).unwrap();
        assert_eq!(t.neighbors(0).unwrap(), &[2, 1]);
        let t = Topology::ring(100).unwrap();
        assert_eq!(t.neighbors(99).unwrap(), &[98, 0]);
        assert!(Topology::ring(2).is_err());
    }

    #[test]
    fn ring_is_regular() {
        let t = Topology::ring(5).unwrap();
        let mut count = [0; 5];
        for i in 0..5 {
            for &j in t.neighbors(i).unwrap() {
                count[j] += 1;
            }
        }
        assert_eq!(count, [2; 5]);
    }

    #[test]
    fn neighbor_sum_examples() {
        let g = Topology::global(10).unwrap();
        assert_eq!(g.neighbor_sum(3, &[0.25; 10]).unwrap(), 2.5);

        let r = Topology::ring(6).unwrap();
        assert_eq!(
            r.neighbor_sum(0, &[5.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap(),
            3.0
        );

        let sw = Topology::small_world(8, 0.0, 1).unwrap();
        let v: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        assert_eq!(sw.neighbor_sum(0, &v).unwrap(), v[6] + v[7] + v[1] + v[2]);
    }

    #[test]
    fn neighbor_sum_errors() {
        let r = Topology::ring(6).unwrap();
        assert!(matches!(
            r.neighbor_sum(0, &[1.0; 5]),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            r.neighbor_sum(6, &[1.0; 6]),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn small_world_without_rewiring_is_the_four_ring() {
        let sw = Topology::small_world(10, 0.0, 99).unwrap();
        for i in 0..10 {
            assert_eq!(
                sw.neighbors(i).unwrap(),
                &[(i + 8) % 10, (i + 9) % 10, (i + 1) % 10, (i + 2) % 10]
            );
        }
    }

    #[test]
    fn small_world_domain_errors() {
        assert!(Topology::small_world(100, 1.5, 0).is_err());
        assert!(Topology::small_world(100, -0.1, 0).is_err());
        assert!(Topology::small_world(5, 0.5, 0).is_err());
    }

    #[test]
    fn small_world_is_seed_deterministic() {
        let a = Topology::small_world(100, 0.7, 42).unwrap();
        let b = Topology::small_world(100, 0.7, 42).unwrap();
        let c = Topology::small_world(100, 0.7, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn full_rewiring_is_uniform_over_other_sites() {
        // Chi-square on the offset (j - i) mod N, which should be uniform on
        // 1..N-1 when every slot is redrawn.
        let n = 4000;
        let bins = 20;
        let mut counts = vec![0u64; bins];
        let mut total = 0u64;
        for seed in 0..5 {
            let t = Topology::small_world(n, 1.0, seed).unwrap();
            for i in 0..n {
                for &j in t.neighbors(i).unwrap() {
                    assert_ne!(j, i);
                    let offset = (j + n - i) % n - 1;
                    counts[offset * bins / (n - 1)] += 1;
                    total += 1;
                }
            }
        }
        let expected = total as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 19 degrees of freedom, 0.999 quantile ≈ 43.8.
        assert!(chi2 < 43.8, "chi2 = {chi2}");

        // The original ring offsets (±1, ±2) must not dominate.
        let t = Topology::small_world(n, 1.0, 7).unwrap();
        let kept = (0..n)
            .flat_map(|i| {
                t.neighbors(i)
                    .unwrap()
                    .iter()
                    .map(move |&j| (j + n - i) % n)
            })
            .filter(|&d| d == 1 || d == 2 || d == n - 1 || d == n - 2)
            .count();
        assert!(kept < 20, "{kept}");
    }

    #[test]
    fn edge_list_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.csv");
        Topology::ring(4).unwrap().write_edge_list(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert_eq!(text.lines().nth(1), Some("0,0,3"));
    }

    proptest! {
        #[test]
        fn small_world_lists_are_valid(n in 6usize..200, p in 0.0f64..=1.0, seed: u64) {
            let t = Topology::small_world(n, p, seed).unwrap();
            for i in 0..n {
                let list = t.neighbors(i).unwrap();
                prop_assert_eq!(list.len(), 4);
                for (a, &x) in list.iter().enumerate() {
                    prop_assert!(x < n && x != i);
                    for &y in &list[a + 1..] {
                        prop_assert_ne!(x, y);
                    }
                }
            }
        }

        #[test]
        fn uniform_field_closure(n in 6usize..64, p in 0.0f64..=1.0, seed: u64, c in -2.0f64..2.0) {
            let values = vec![c; n];
            for t in [Topology::ring(n).unwrap(), Topology::global(n).unwrap(),
                      Topology::small_world(n, p, seed).unwrap()] {
                for i in 0..n {
                    let s = t.neighbor_sum(i, &values).unwrap();
                    // Sequential sums of a repeated value agree exactly across sites.
                    prop_assert_eq!(s, t.neighbor_sum(0, &values).unwrap());
                    prop_assert!((s - t.degree() as f64 * c).abs() <= 1e-12 * n as f64);
                }
            }
        }
    }
}
