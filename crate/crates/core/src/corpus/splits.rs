use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CorpusError;

pub const TRAIN_FILE: &str = "train.txt";
pub const VAL_FILE: &str = "val.txt";
pub const TEST_FILE: &str = "test.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        })
    }
}

impl std::str::FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "val" | "valid" | "validation" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(format!("unknown split {other:?} (expected train, val or test)")),
        }
    }
}

/// Disjoint train/validation/test track-id lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn new(train: Vec<String>, val: Vec<String>, test: Vec<String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(train.len() + val.len() + test.len());
        for id in train.iter().chain(&val).chain(&test) {
            if !seen.insert(id.as_str()) {
                return Err(CorpusError::Invalid(format!(
                    "track {id} appears more than once across splits"
                )));
            }
        }
        Ok(Self { train, val, test })
    }

    pub fn get(&self, name: SplitName) -> &[String] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    /// Loads `train.txt`, `val.txt` and `test.txt` (one track id per line).
    pub fn load_dir(dir: &Path) -> Result<Self, CorpusError> {
        let read = |name: &str| -> Result<Vec<String>, CorpusError> {
            let path = dir.join(name);
            let text = fs::read_to_string(&path).map_err(|e| CorpusError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            Ok(text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_owned)
                .collect())
        };
        Self::new(read(TRAIN_FILE)?, read(VAL_FILE)?, read(TEST_FILE)?)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(|e| CorpusError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        for (name, ids) in [(TRAIN_FILE, &self.train), (VAL_FILE, &self.val), (TEST_FILE, &self.test)] {
            let path = dir.join(name);
            let mut body = ids.join("\n");
            if !body.is_empty() {
                body.push('\n');
            }
            fs::write(&path, body).map_err(|e| CorpusError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
        Ok(())
    }
}

/// Seeded uniform random split. Sizes are `floor(f_train N)`, `floor(f_val N)`
/// and the remainder. The result does not depend on the input order.
pub fn make_splits(
    track_ids: &[String],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    let (f_train, f_val, f_test) = fractions;
    if [f_train, f_val, f_test].iter().any(|f| !(0.0..=1.0).contains(f))
        || (f_train + f_val + f_test - 1.0).abs() > 1e-9
    {
        return Err(CorpusError::Invalid(format!(
            "split fractions {fractions:?} must be in [0,1] and sum to 1"
        )));
    }
    let mut ids: Vec<String> = track_ids.to_vec();
    ids.sort();
    ids.dedup();
    let n = ids.len();
    if n < 3 {
        return Err(CorpusError::Invalid(format!("need at least 3 tracks to split, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    // the epsilon absorbs products like 0.29 * 100 = 28.999999999999996
    let n_train = (f_train * n as f64 + 1e-9).floor() as usize;
    let n_val = (f_val * n as f64 + 1e-9).floor() as usize;
    let test = ids.split_off(n_train + n_val);
    let val = ids.split_off(n_train);
    DatasetSplit::new(ids, val, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i:03}")).collect()
    }

    #[test]
    fn ten_tracks_split_eight_one_one() {
        let s = make_splits(&ids(10), (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!(s.sizes(), (8, 1, 1));
    }

    #[test]
    fn same_seed_same_split() {
        let a = make_splits(&ids(50), (0.8, 0.1, 0.1), 3).unwrap();
        let b = make_splits(&ids(50), (0.8, 0.1, 0.1), 3).unwrap();
        assert_eq!(a, b);
        let c = make_splits(&ids(50), (0.8, 0.1, 0.1), 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut rev = ids(30);
        rev.reverse();
        assert_eq!(
            make_splits(&ids(30), (0.8, 0.1, 0.1), 1).unwrap(),
            make_splits(&rev, (0.8, 0.1, 0.1), 1).unwrap()
        );
    }

    #[test]
    fn too_few_tracks_or_bad_fractions() {
        assert!(make_splits(&ids(2), (0.8, 0.1, 0.1), 0).is_err());
        assert!(make_splits(&ids(10), (0.8, 0.1, 0.2), 0).is_err());
    }

    #[test]
    fn dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = make_splits(&ids(20), (0.8, 0.1, 0.1), 9).unwrap();
        s.write_dir(dir.path()).unwrap();
        assert_eq!(DatasetSplit::load_dir(dir.path()).unwrap(), s);
    }

    #[test]
    fn overlapping_split_files_are_rejected() {
        let v = |x: &[&str]| x.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(DatasetSplit::new(v(&["a", "b"]), v(&["b"]), v(&["c"])).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_the_input(n in 3usize..60, seed in any::<u64>()) {
            let all = ids(n);
            let s = make_splits(&all, (0.8, 0.1, 0.1), seed).unwrap();
            let mut union: Vec<String> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
            union.sort();
            prop_assert_eq!(union, all);
            prop_assert_eq!(s.train.len(), (0.8 * n as f64 + 1e-9).floor() as usize);
            prop_assert_eq!(s.val.len(), (0.1 * n as f64 + 1e-9).floor() as usize);
        }
    }
}
