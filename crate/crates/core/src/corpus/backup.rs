use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Narrative, Split};

/// Number of narratives to hold back from each split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackupCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl BackupCounts {
    pub fn new(train: usize, valid: usize, test: usize) -> Self {
        Self { train, valid, test }
    }

    fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }
}

/// Samples backup narratives uniformly per split and flags them.
///
/// Both returned lists keep the input order.
pub fn reserve_backup(
    narratives: Vec<Narrative>,
    counts: BackupCounts,
    seed: u64,
) -> Result<(Vec<Narrative>, Vec<Narrative>), CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; narratives.len()];
    for split in Split::ALL {
        let members: Vec<usize> =
            narratives.iter().enumerate().filter(|(_, n)| n.split == split).map(|(i, _)| i).collect();
        let requested = counts.get(split);
        if requested > members.len() {
            return Err(CorpusError::BackupCount { split, requested, available: members.len() });
        }
        for picked in sample(&mut rng, members.len(), requested) {
            chosen[members[picked]] = true;
        }
    }

    let mut working = Vec::new();
    let mut backup = Vec::new();
    for (mut narrative, is_backup) in narratives.into_iter().zip(chosen) {
        if is_backup {
            narrative.is_backup = true;
            backup.push(narrative);
        } else {
            working.push(narrative);
        }
    }
    Ok((working, backup))
}
