//! Grouped train/val/test partitioning.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClusterAssignment, DatasetError, PreferencePair, Split, UISample};
use crate::seed::seeded_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    /// Synthetic data: 80/10/10 by url.
    pub const SYNTHETIC: SplitRatios = SplitRatios {
        train: 0.8,
        val: 0.1,
        test: 0.1,
    };
    /// Human-rated data: 70/10/20 by cluster.
    pub const RATED: SplitRatios = SplitRatios {
        train: 0.7,
        val: 0.1,
        test: 0.2,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DatasetError> {
        let r = SplitRatios { train, val, test };
        if [train, val, test].iter().any(|x| !(0.0..=1.0).contains(x))
            || (train + val + test - 1.0).abs() > 1e-6
        {
            return Err(DatasetError::Validation(format!(
                "split ratios {train},{val},{test} must be in [0,1] and sum to 1"
            )));
        }
        Ok(r)
    }
}

impl FromStr for SplitRatios {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DatasetError::Validation(format!("bad ratios `{s}`: {e}")))?;
        match parts.as_slice() {
            [a, b, c] => SplitRatios::new(*a, *b, *c),
            _ => Err(DatasetError::Validation(format!(
                "expected three ratios, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKey {
    Url,
    Cluster,
}

impl FromStr for SplitKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "url" => Ok(SplitKey::Url),
            "cluster" => Ok(SplitKey::Cluster),
            other => Err(format!("unknown split key `{other}`")),
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn group_key(sample: &UISample, key: SplitKey, clusters: Option<&ClusterAssignment>) -> String {
    match key {
        SplitKey::Url => format!("url:{}", sample.key),
        SplitKey::Cluster => match clusters.and_then(|c| c.get(&sample.id)) {
            Some(c) => format!("cluster:{c}"),
            // noise samples fall back to their own page key
            None => format!("url:{}", sample.key),
        },
    }
}

/// Assigns every sample and pair a split. Samples sharing a key (url or
/// cluster) always land together, and keys linked by a pair are merged first
/// so pair members never straddle splits. Key groups are shuffled with `seed`;
/// `round(train·n)` groups go to train, `round(val·n)` to val, the rest to test.
/// Returns the number of key groups per split.
pub fn assign_splits(
    samples: &mut [UISample],
    pairs: &mut [PreferencePair],
    ratios: SplitRatios,
    key: SplitKey,
    clusters: Option<&ClusterAssignment>,
    seed: u64,
) -> Result<BTreeMap<Split, usize>, DatasetError> {
    let ratios = SplitRatios::new(ratios.train, ratios.val, ratios.test)?;
    let keys: Vec<String> = samples
        .iter()
        .map(|s| group_key(s, key, clusters))
        .collect();
    let distinct: Vec<String> = keys
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let key_index: BTreeMap<&str, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();
    let sample_key: BTreeMap<String, usize> = samples
        .iter()
        .zip(&keys)
        .map(|(s, k)| (s.id.clone(), key_index[k.as_str()]))
        .collect();

    let mut uf = UnionFind((0..distinct.len()).collect());
    for p in pairs.iter() {
        let (Some(&a), Some(&b)) = (sample_key.get(&p.a), sample_key.get(&p.b)) else {
            return Err(DatasetError::Validation(format!(
                "pair {} references unknown samples",
                p.pair_id
            )));
        };
        uf.union(a, b);
    }
    let mut roots: Vec<usize> = (0..distinct.len())
        .map(|i| uf.find(i))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    roots.shuffle(&mut seeded_rng(seed));

    let n = roots.len();
    let n_train = ((ratios.train * n as f64).round() as usize).min(n);
    let n_val = ((ratios.val * n as f64).round() as usize).min(n - n_train);
    let mut root_split = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (i, r) in roots.into_iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        root_split.insert(r, split);
        *counts.entry(split).or_insert(0) += 1;
    }
    let split_of = |k: usize, uf: &mut UnionFind| root_split[&uf.find(k)];
    let mut by_id = BTreeMap::new();
    for s in samples.iter_mut() {
        let k = sample_key[&s.id];
        s.split = split_of(k, &mut uf);
        by_id.insert(s.id.clone(), s.split);
    }
    for p in pairs.iter_mut() {
        p.split = by_id[&p.a];
    }
    Ok(counts)
}
