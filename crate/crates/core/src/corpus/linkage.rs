//! Fuzzy catalog linkage on artist/title names with a duration gate.

use std::cmp::Ordering;

/// Catalog entry used for linkage.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: String,
    pub artist_name: String,
    pub track_name: String,
    /// Seconds, nonnegative.
    pub duration: f64,
}

impl Track {
    pub fn new(id: &str, artist: &str, title: &str, duration: f64) -> Self {
        Self {
            track_id: id.to_owned(),
            artist_name: artist.to_owned(),
            track_name: title.to_owned(),
            duration,
        }
    }
}

pub const DEFAULT_MAX_DURATION_DELTA: f64 = 10.0;
pub const DEFAULT_MIN_NAME_SIMILARITY: f64 = 0.85;

const ARTICLES: [&str; 2] = ["the", "a"];

/// Lowercases, strips punctuation, drops the articles "the"/"a" and collapses whitespace.
///
/// Apostrophes vanish ("don't" -> "dont"); other punctuation separates words.
pub fn canonicalize(name: &str) -> String {
    let mut spaced = String::with_capacity(name.len());
    for ch in name.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            spaced.push(ch);
        } else if ch == '\'' || ch == '\u{2019}' {
            // dropped
        } else {
            spaced.push(' ');
        }
    }
    spaced
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `1 - levenshtein / max_len` over characters of the canonical forms.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    let (a, b) = (canonicalize(a), canonicalize(b));
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(&a, &b) as f64 / max_len as f64
}

/// Pair score: the weaker of artist and title similarity.
pub fn track_similarity(a: &Track, b: &Track) -> f64 {
    name_similarity(&a.artist_name, &b.artist_name)
        .min(name_similarity(&a.track_name, &b.track_name))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMatch {
    pub left_id: String,
    pub right_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub matches: Vec<LinkMatch>,
    pub unmatched_left: usize,
    pub unmatched_right: usize,
}

impl LinkReport {
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.matches
            .iter()
            .map(|m| (m.left_id.clone(), m.right_id.clone()))
            .collect()
    }
}

/// One-to-one matching of `left` against `right`.
///
/// A pair is a candidate iff its durations are within `max_duration_delta`
/// seconds and its name similarity reaches `min_name_similarity`. Candidates are
/// accepted greedily from the highest similarity down (ties: smaller duration
/// gap, then input order) so every track is used at most once.
pub fn link_catalogs(
    left: &[Track],
    right: &[Track],
    max_duration_delta: f64,
    min_name_similarity: f64,
) -> LinkReport {
    // Right side sorted by duration so each left track only scans its window.
    let mut by_duration: Vec<usize> = (0..right.len()).collect();
    by_duration.sort_by(|&a, &b| {
        right[a]
            .duration
            .partial_cmp(&right[b].duration)
            .unwrap_or(Ordering::Equal)
    });
    let durations: Vec<f64> = by_duration.iter().map(|&i| right[i].duration).collect();

    let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
    for (li, l) in left.iter().enumerate() {
        let lo = durations.partition_point(|&d| d < l.duration - max_duration_delta);
        for &ri in &by_duration[lo..] {
            let r = &right[ri];
            let gap = (r.duration - l.duration).abs();
            if r.duration > l.duration + max_duration_delta {
                break;
            }
            if gap > max_duration_delta {
                continue;
            }
            let sim = track_similarity(l, r);
            if sim >= min_name_similarity {
                candidates.push((sim, gap, li, ri));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });

    let mut left_used = vec![false; left.len()];
    let mut right_used = vec![false; right.len()];
    let mut matches = Vec::new();
    for (sim, _, li, ri) in candidates {
        if left_used[li] || right_used[ri] {
            continue;
        }
        left_used[li] = true;
        right_used[ri] = true;
        matches.push(LinkMatch {
            left_id: left[li].track_id.clone(),
            right_id: right[ri].track_id.clone(),
            similarity: sim,
        });
    }
    let unmatched_left = left.len() - matches.len();
    let unmatched_right = right.len() - matches.len();
    if unmatched_left > 0 {
        log::info!("{unmatched_left} of {} left tracks unmatched", left.len());
    }
    LinkReport {
        matches,
        unmatched_left,
        unmatched_right,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain two-row dynamic-programming edit distance, independent of strsim.
    fn edit_distance(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut prev: Vec<usize> = (0..=b.len()).collect();
        for i in 1..=a.len() {
            let mut cur = vec![i; b.len() + 1];
            for j in 1..=b.len() {
                let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
            }
            prev = cur;
        }
        prev[b.len()]
    }

    fn reference_similarity(a: &str, b: &str) -> f64 {
        let (a, b) = (canonicalize(a), canonicalize(b));
        let n = a.chars().count().max(b.chars().count());
        if n == 0 {
            1.0
        } else {
            1.0 - edit_distance(&a, &b) as f64 / n as f64
        }
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(canonicalize("Beatles, The"), "beatles");
        assert_eq!(canonicalize("The Beatles"), "beatles");
        assert_eq!(canonicalize("  Let It   Be "), "let it be");
        assert_eq!(canonicalize("Don't Stop!"), "dont stop");
        assert_eq!(canonicalize("A Day in the Life"), "day in life");
    }

    #[test]
    fn exact_match_links() {
        let l = [Track::new("l1", "Nina Simone", "Feeling Good", 172.0)];
        let r = [Track::new("r1", "Nina Simone", "Feeling Good", 172.0)];
        let rep = link_catalogs(&l, &r, 10.0, 0.85);
        assert_eq!(rep.pairs(), vec![("l1".into(), "r1".into())]);
    }

    #[test]
    fn duration_gate_is_inclusive_at_ten_seconds() {
        let l = [Track::new("l1", "X", "Y", 100.0)];
        let far = [Track::new("r1", "X", "Y", 111.0)];
        assert!(link_catalogs(&l, &far, 10.0, 0.85).matches.is_empty());
        let edge = [Track::new("r1", "X", "Y", 110.0)];
        assert_eq!(link_catalogs(&l, &edge, 10.0, 0.85).matches.len(), 1);
    }

    #[test]
    fn article_reordering_still_links() {
        let a = Track::new("l", "The Beatles", "Let It Be", 243.0);
        let b = Track::new("r", "Beatles, The", "Let It Be ", 243.0);
        let artist = reference_similarity("The Beatles", "Beatles, The");
        let title = reference_similarity("Let It Be", "Let It Be ");
        let expected = artist.min(title);
        assert_eq!(expected, 1.0);
        assert!((track_similarity(&a, &b) - expected).abs() < 1e-12);
        assert_eq!(link_catalogs(&[a], &[b], 10.0, 0.85).matches.len(), 1);
    }

    #[test]
    fn highest_similarity_wins_and_matching_is_one_to_one() {
        let l = [
            Track::new("l1", "Air", "Sexy Boy", 300.0),
            Track::new("l2", "Air", "Sexy Boys", 300.0),
        ];
        let r = [Track::new("r1", "Air", "Sexy Boy", 301.0)];
        let rep = link_catalogs(&l, &r, 10.0, 0.8);
        assert_eq!(rep.pairs(), vec![("l1".into(), "r1".into())]);
        assert_eq!(rep.unmatched_left, 1);
    }

    #[test]
    fn similarity_matches_reference_edit_distance() {
        let cases = [
            ("Radiohead", "Radio Head"),
            ("Björk", "Bjork"),
            ("Sigur Rós", "Sigur Ros"),
            ("Massive Attack", "Massive Atack"),
            ("", ""),
            ("Portishead", ""),
        ];
        for (a, b) in cases {
            assert!((name_similarity(a, b) - reference_similarity(a, b)).abs() < 1e-12, "{a}/{b}");
        }
    }

    fn arb_track(prefix: &'static str) -> impl Strategy<Value = Track> {
        ("[a-c ]{0,6}", "[a-c]{1,5}", 0.0f64..60.0).prop_map(move |(a, t, d)| Track {
            track_id: format!("{prefix}{a}{t}{d}"),
            artist_name: a,
            track_name: t,
            duration: d,
        })
    }

    proptest! {
        #[test]
        fn similarity_is_symmetric(a in ".{0,12}", b in ".{0,12}") {
            prop_assert_eq!(name_similarity(&a, &b), name_similarity(&b, &a));
        }

        #[test]
        fn raising_threshold_never_adds_matches(
            left in proptest::collection::vec(arb_track("l"), 1..8),
            right in proptest::collection::vec(arb_track("r"), 1..8),
            lo in 0.0f64..1.0,
            bump in 0.0f64..0.5,
        ) {
            let a = link_catalogs(&left, &right, 10.0, lo).matches.len();
            let b = link_catalogs(&left, &right, 10.0, lo + bump).matches.len();
            prop_assert!(b <= a);
        }
    }
}
