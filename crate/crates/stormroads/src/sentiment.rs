//! Rule-based lexicon sentiment scoring of token sequences.
//!
//! Each token's valence is looked up in the lexicon, adjusted for a
//! negation cue or degree modifier appearing shortly before it, and the
//! adjusted valences are summed and squashed to a compound score in
//! (-1, 1). The scorer sees the post-tokenization stream, so punctuation
//! and capitalization carry no signal here.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::GeoPost;
use crate::textproc::{parse_word_list, TokenizedPost};
use crate::{Error, Result};

/// Modifier window: cues within this many tokens before a valenced token
/// apply to it.
const WINDOW: usize = 3;

#[derive(Debug, Clone)]
pub struct SentimentLexicon {
    valence: HashMap<String, f64>,
    boosters: HashMap<String, f64>,
    negators: HashSet<String>,
    /// Normalization constant in compound = s/sqrt(s^2 + alpha).
    pub alpha: f64,
    /// Factor applied to a valence when a negator precedes it.
    pub negation_factor: f64,
    /// Booster increment scaling at distances 1, 2, 3.
    pub booster_decay: [f64; 3],
}

/// Parses a `token<TAB>value` table; extra columns ignored, `#` comments
/// and blank lines skipped. `range` bounds each value.
fn parse_valued_table(
    s: &str,
    what: &str,
    range: Option<(f64, f64)>,
) -> Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for (i, line) in s.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (tok, val) = match (parts.next(), parts.next()) {
            (Some(t), Some(v)) if !t.is_empty() => (t, v),
            _ => {
                return Err(Error::data(format!(
                    "{what} line {}: expected token<TAB>value",
                    i + 1
                )))
            }
        };
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("{what} line {}: bad value {val:?}", i + 1)))?;
        if !v.is_finite() {
            return Err(Error::data(format!(
                "{what} line {}: value must be finite",
                i + 1
            )));
        }
        if let Some((lo, hi)) = range {
            if !(lo..=hi).contains(&v) {
                return Err(Error::data(format!(
                    "{what} line {}: value {v} outside [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        map.insert(tok.to_lowercase(), v);
    }
    Ok(map)
}

impl SentimentLexicon {
    /// Builds a lexicon from the three data files: valence TSV, booster
    /// TSV, and a negator word list.
    pub fn parse(valence_tsv: &str, boosters_tsv: &str, negators_txt: &str) -> Result<Self> {
        let valence = parse_valued_table(valence_tsv, "sentiment lexicon", Some((-4.0, 4.0)))?;
        if valence.is_empty() {
            return Err(Error::data("sentiment lexicon is empty"));
        }
        let boosters = parse_valued_table(boosters_tsv, "booster table", None)?;
        Ok(SentimentLexicon {
            valence,
            boosters,
            negators: parse_word_list(negators_txt),
            alpha: 15.0,
            negation_factor: -0.74,
            booster_decay: [1.0, 0.95, 0.9],
        })
    }

    pub fn valence_of(&self, token: &str) -> Option<f64> {
        self.valence.get(token).copied()
    }

    /// Compound score of a token sequence. For each token with a nonzero
    /// valence entry: flip and damp it if a negator occurs within the
    /// preceding window, then add each in-window booster's increment
    /// (decayed by distance) in the direction of the adjusted valence.
    /// The valence sum s is squashed to s/sqrt(s^2 + alpha).
    pub fn score_tokens(&self, tokens: &[String]) -> f64 {
        let mut s = 0.0;
        for (i, tok) in tokens.iter().enumerate() {
            let Some(&val) = self.valence.get(tok.as_str()) else {
                continue;
            };
            if val == 0.0 {
                continue;
            }
            let mut v = val;
            let window = &tokens[i.saturating_sub(WINDOW)..i];
            if window.iter().any(|t| self.negators.contains(t.as_str())) {
                v *= self.negation_factor;
            }
            let sign = if v < 0.0 { -1.0 } else { 1.0 };
            for (back, t) in window.iter().rev().enumerate() {
                if let Some(&inc) = self.boosters.get(t.as_str()) {
                    v += inc * self.booster_decay[back] * sign;
                }
            }
            s += v;
        }
        s / (s * s + self.alpha).sqrt()
    }
}

/// A post with its compound sentiment; location and timestamp carried
/// through for the spatial stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPost {
    pub post_id: String,
    pub ts: DateTime<Utc>,
    pub lon: f64,
    pub lat: f64,
    pub compound: f64,
}

/// Scores token lists against their source posts, pairwise in order.
pub fn score_posts(
    lexicon: &SentimentLexicon,
    posts: &[GeoPost],
    tokens: &[TokenizedPost],
) -> Result<Vec<ScoredPost>> {
    if posts.len() != tokens.len() {
        return Err(Error::data(format!(
            "post/token list length mismatch: {} vs {}",
            posts.len(),
            tokens.len()
        )));
    }
    Ok(posts
        .iter()
        .zip(tokens)
        .map(|(p, t)| {
            debug_assert_eq!(p.id, t.post_id);
            ScoredPost {
                post_id: p.id.clone(),
                ts: p.ts,
                lon: p.lon,
                lat: p.lat,
                compound: lexicon.score_tokens(&t.tokens),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::testkit;
    use crate::textproc::{parse_lemma_table, tokenize};

    fn bundled() -> SentimentLexicon {
        SentimentLexicon::parse(data::SENTIMENT_LEXICON, data::BOOSTERS, data::NEGATORS).unwrap()
    }

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_and_valence_free_lists_score_zero() {
        let lex = bundled();
        assert_eq!(lex.score_tokens(&[]), 0.0);
        assert_eq!(lex.score_tokens(&toks(&["sunset", "flag", "okwx"])), 0.0);
    }

    #[test]
    fn reference_token_lists_reproduce_known_scores() {
        let lex = bundled();
        for (list, want) in testkit::REFERENCE_TOKENS
            .iter()
            .zip(testkit::REFERENCE_SCORES)
        {
            let got = lex.score_tokens(&toks(list));
            assert!(
                (got - want).abs() <= testkit::REFERENCE_SCORE_TOL,
                "expected {want} ± {}, got {got} for {list:?}",
                testkit::REFERENCE_SCORE_TOL
            );
        }
    }

    #[test]
    fn reference_texts_score_through_full_text_path() {
        let lex = bundled();
        let stop = parse_word_list(data::STOPWORDS);
        let lem = parse_lemma_table(data::LEMMAS).unwrap();
        for (text, want) in testkit::REFERENCE_TEXTS
            .iter()
            .zip(testkit::REFERENCE_SCORES)
        {
            let got = lex.score_tokens(&tokenize(text, &stop, &lem));
            assert!(
                (got - want).abs() <= testkit::REFERENCE_SCORE_TOL,
                "expected {want}, got {got} for {text:?}"
            );
        }
    }

    #[test]
    fn single_word_normalization() {
        let lex = bundled();
        let got = lex.score_tokens(&toks(&["good"]));
        let want = 1.9 / (1.9f64 * 1.9 + 15.0).sqrt();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.4404).abs() < 1e-3);
    }

    #[test]
    fn negation_flips_and_damps() {
        let lex = bundled();
        let v = 1.9f64 * -0.74;
        let want = v / (v * v + 15.0).sqrt();
        assert!((lex.score_tokens(&toks(&["not", "good"])) - want).abs() < 1e-12);
        // Cue outside the 3-token window has no effect.
        let plain = lex.score_tokens(&toks(&["good"]));
        assert_eq!(
            lex.score_tokens(&toks(&["not", "ice", "storm", "road", "good"])),
            plain
        );
    }

    #[test]
    fn boosters_decay_with_distance_and_align_with_sign() {
        let lex = bundled();
        let compound = |v: f64| v / (v * v + 15.0).sqrt();
        let got1 = lex.score_tokens(&toks(&["very", "good"]));
        assert!((got1 - compound(1.9 + 0.293)).abs() < 1e-12);
        let got2 = lex.score_tokens(&toks(&["very", "ice", "good"]));
        assert!((got2 - compound(1.9 + 0.293 * 0.95)).abs() < 1e-12);
        let got3 = lex.score_tokens(&toks(&["very", "ice", "storm", "good"]));
        assert!((got3 - compound(1.9 + 0.293 * 0.9)).abs() < 1e-12);
        // Negative carrier: the increment pushes further negative.
        let gotn = lex.score_tokens(&toks(&["extremely", "challenging"]));
        assert!((gotn - compound(-1.1 - 0.293)).abs() < 1e-12);
        // Negation first, then the booster aligns with the flipped sign.
        let gotnb = lex.score_tokens(&toks(&["not", "very", "good"]));
        assert!((gotnb - compound(1.9 * -0.74 - 0.293)).abs() < 1e-12);
        // Zero-valence tokens take no modifiers at all.
        assert_eq!(lex.score_tokens(&toks(&["very", "ice"])), 0.0);
    }

    #[test]
    fn compound_is_odd_in_the_valence_sum() {
        let lex = bundled();
        let mut mirrored = lex.clone();
        for v in mirrored.valence.values_mut() {
            *v = -*v;
        }
        let vocab: Vec<&String> = lex.valence.keys().collect();
        let mut rng = testkit::seeded_rng(7);
        for _ in 0..200 {
            let n = 1 + (testkit::unit_f64(&mut rng) * 8.0) as usize;
            let list: Vec<String> = (0..n)
                .map(|_| vocab[(testkit::unit_f64(&mut rng) * vocab.len() as f64) as usize].clone())
                .collect();
            let a = lex.score_tokens(&list);
            let b = mirrored.score_tokens(&list);
            assert!((a + b).abs() < 1e-12, "not odd on {list:?}: {a} vs {b}");
        }
    }

    #[test]
    fn appending_positive_token_never_decreases_compound() {
        let lex = bundled();
        let vocab: Vec<&String> = lex.valence.keys().collect();
        let mut rng = testkit::seeded_rng(8);
        for _ in 0..200 {
            let n = (testkit::unit_f64(&mut rng) * 6.0) as usize;
            let mut list: Vec<String> = (0..n)
                .map(|_| vocab[(testkit::unit_f64(&mut rng) * vocab.len() as f64) as usize].clone())
                .collect();
            let before = lex.score_tokens(&list);
            // Pad the window so no earlier negator/booster reaches the new token.
            list.extend(["ice", "storm", "road"].map(String::from));
            list.push("good".to_string());
            let after = lex.score_tokens(&list);
            assert!(
                after >= before - 1e-12,
                "compound dropped: {before} -> {after}"
            );
        }
    }

    #[test]
    fn compound_stays_in_range() {
        let lex = bundled();
        let vocab: Vec<&String> = lex.valence.keys().collect();
        let mut rng = testkit::seeded_rng(9);
        for _ in 0..300 {
            let n = (testkit::unit_f64(&mut rng) * 30.0) as usize;
            let list: Vec<String> = (0..n)
                .map(|_| vocab[(testkit::unit_f64(&mut rng) * vocab.len() as f64) as usize].clone())
                .collect();
            let c = lex.score_tokens(&list);
            assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn lexicon_parse_rules() {
        assert!(
            SentimentLexicon::parse("", "", "").is_err(),
            "empty valence map rejected"
        );
        assert!(
            SentimentLexicon::parse("good\t9.5", "", "").is_err(),
            "out-of-range valence rejected"
        );
        let lex = SentimentLexicon::parse(
            "# comment\ngood\t1.9\textra-column-ignored\n\nbad\t-2.5\n",
            "very\t0.293\n",
            "not\n",
        )
        .unwrap();
        assert_eq!(lex.valence_of("good"), Some(1.9));
        assert_eq!(lex.valence_of("bad"), Some(-2.5));
    }

    #[test]
    fn score_posts_carries_location_and_order() {
        let lex = bundled();
        let posts = vec![
            GeoPost {
                id: "a".into(),
                author_id: "u".into(),
                ts: DateTime::parse_from_rfc3339("2020-10-27T14:00:00Z")
                    .unwrap()
                    .with_timezone(&Utc),
                lon: -97.5,
                lat: 35.4,
                text: "good".into(),
                lang: None,
            },
            GeoPost {
                id: "b".into(),
                author_id: "u".into(),
                ts: DateTime::parse_from_rfc3339("2020-10-27T15:00:00Z")
                    .unwrap()
                    .with_timezone(&Utc),
                lon: -97.6,
                lat: 35.5,
                text: "".into(),
                lang: None,
            },
        ];
        let tokens = vec![
            TokenizedPost {
                post_id: "a".into(),
                tokens: toks(&["good"]),
            },
            TokenizedPost {
                post_id: "b".into(),
                tokens: vec![],
            },
        ];
        let scored = score_posts(&lex, &posts, &tokens).unwrap();
        assert_eq!(scored.len(), 2);
        assert_eq!(scored[0].post_id, "a");
        assert_eq!(scored[0].lon, -97.5);
        assert!(scored[0].compound > 0.0);
        assert_eq!(scored[1].compound, 0.0);
        assert!(score_posts(&lex, &posts, &tokens[..1]).is_err());
    }
}
