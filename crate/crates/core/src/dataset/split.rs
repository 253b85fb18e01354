use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledSample, Split};

pub const DEFAULT_HELDOUT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    #[default]
    Default,
    ProjectHeldout,
}

impl std::str::FromStr for SplitMode {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(SplitMode::Default),
            "project-heldout" | "heldout" => Ok(SplitMode::ProjectHeldout),
            _ => Err(DatasetError::BadSplitMode(s.to_string())),
        }
    }
}

/// Picks `n` of `pool` uniformly without replacement. The pool is sorted by
/// id first so the draw depends only on membership and seed.
pub fn balance_negatives(
    with_issues: Vec<LabeledSample>,
    mut negative_pool: Vec<LabeledSample>,
    seed: u64,
) -> Result<Vec<LabeledSample>, DatasetError> {
    let need = with_issues.len();
    if negative_pool.len() < need {
        return Err(DatasetError::InsufficientNegatives {
            required: need,
            available: negative_pool.len(),
        });
    }
    negative_pool.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, negative_pool.len(), need).into_vec();
    picked.sort_unstable();
    let mut pool: Vec<Option<LabeledSample>> = negative_pool.into_iter().map(Some).collect();
    let mut out = with_issues;
    out.extend(picked.into_iter().map(|i| pool[i].take().expect("indices are distinct")));
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Assigns TRAIN/VAL/TEST to every sample whose split is not HELDOUT.
/// Each has-issue stratum is shuffled and cut so that VAL and TEST each get
/// `n / 10` rounded to nearest and TRAIN the rest, which keeps every split
/// within one sample of 80/10/10.
pub fn split_default(samples: &mut [LabeledSample], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for positive in [true, false] {
        let mut stratum: Vec<usize> = (0..samples.len())
            .filter(|&i| samples[i].split != Split::Heldout && samples[i].has_issue() == positive)
            .collect();
        stratum.sort_by(|&a, &b| samples[a].id.cmp(&samples[b].id));
        stratum.shuffle(&mut rng);
        let tenth = (stratum.len() + 5) / 10;
        for (k, &i) in stratum.iter().enumerate() {
            samples[i].split = if k < tenth {
                Split::Test
            } else if k < 2 * tenth {
                Split::Val
            } else {
                Split::Train
            };
        }
    }
}

/// Summary of a project-held-out draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutSummary {
    pub projects: Vec<String>,
    pub samples: usize,
    pub fraction: f64,
}

/// Withholds whole projects, alternating between CSN and non-CSN projects
/// in seeded random order, until at least `fraction` of the samples are
/// withheld. The rest is split as in [`split_default`].
pub fn split_project_heldout(
    samples: &mut [LabeledSample],
    seed: u64,
    fraction: f64,
) -> Result<HeldoutSummary, DatasetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DatasetError::BadFraction(fraction));
    }
    let mut sizes: BTreeMap<&str, (bool, usize)> = BTreeMap::new();
    for s in samples.iter() {
        sizes.entry(s.project.as_str()).or_insert((s.in_csn, 0)).1 += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for (&name, &(csn, _)) in &sizes {
        pools[usize::from(!csn)].push(name);
    }
    if pools.iter().any(Vec::is_empty) {
        return Err(DatasetError::EmptyPool);
    }
    for p in pools.iter_mut() {
        p.shuffle(&mut rng);
    }

    let total = samples.len();
    // the tolerance keeps e.g. 0.1 * 100 from rounding up to 11
    let target = ((fraction * total as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut withheld = Vec::new();
    let mut count = 0;
    let mut turn = 0;
    while count < target {
        let Some(name) = pools[turn % 2].pop() else {
            return Err(DatasetError::PoolExhausted {
                achieved: count as f64 / total as f64,
                target: fraction,
            });
        };
        count += sizes[name].1;
        withheld.push(name.to_string());
        turn += 1;
    }
    for s in samples.iter_mut() {
        s.split = if withheld.contains(&s.project) {
            Split::Heldout
        } else {
            Split::Unassigned
        };
    }
    split_default(samples, seed);
    withheld.sort();
    Ok(HeldoutSummary {
        projects: withheld,
        samples: count,
        fraction: count as f64 / total as f64,
    })
}

pub fn split_counts(samples: &[LabeledSample]) -> BTreeMap<Split, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.split).or_insert(0) += 1;
    }
    counts
}
