//! Text processing: tokenization, keyword relevance filtering, and the
//! temporal word-frequency matrix.
//!
//! Tokenization is a fixed normalization pipeline (URLs out, mentions
//! out, hashtags keep their word, entities and non-ASCII stripped,
//! lowercase, split on non-alphanumerics, stopword and length filters,
//! light lemmatization). It is deliberately rule-based and deterministic:
//! the sentiment lexicon downstream is keyed on exactly these token
//! forms.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parses a one-word-per-line list; blank lines and `#` comments are
/// skipped, entries are lowercased.
pub fn parse_word_list(s: &str) -> HashSet<String> {
    s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Parses a `token<TAB>lemma` table; blank lines and `#` comments are
/// skipped.
pub fn parse_lemma_table(s: &str) -> Result<HashMap<String, String>> {
    let mut table = HashMap::new();
    for (i, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next()) {
            (Some(tok), Some(lemma)) if !tok.is_empty() && !lemma.is_empty() => {
                table.insert(tok.to_lowercase(), lemma.to_lowercase());
            }
            _ => {
                return Err(Error::data(format!(
                    "lemma table line {}: expected token<TAB>lemma",
                    i + 1
                )));
            }
        }
    }
    Ok(table)
}

/// Event-relevance keyword set; a post is relevant when any processed
/// token matches.
#[derive(Debug, Clone)]
pub struct RelevanceLexicon {
    pub keywords: HashSet<String>,
}

impl RelevanceLexicon {
    pub fn parse(s: &str) -> Result<Self> {
        let keywords = parse_word_list(s);
        if keywords.is_empty() {
            return Err(Error::data("relevance lexicon is empty"));
        }
        Ok(RelevanceLexicon { keywords })
    }
}

/// True when at least one token is a relevance keyword.
pub fn is_relevant(tokens: &[String], lexicon: &RelevanceLexicon) -> bool {
    tokens.iter().any(|t| lexicon.keywords.contains(t))
}

/// A post reduced to its processed tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedPost {
    pub post_id: String,
    pub tokens: Vec<String>,
}

/// Decodes the common HTML entities to their character and drops any
/// other `&name;` / `&#nn;` sequence outright.
fn strip_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let entity_len = tail[1..]
            .find(';')
            .filter(|&semi| semi > 0 && semi <= 10)
            .filter(|&semi| {
                tail[1..1 + semi]
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '#')
            })
            .map(|semi| semi + 2);
        match entity_len {
            Some(len) => {
                match &tail[1..len - 1] {
                    "amp" => out.push('&'),
                    "lt" => out.push('<'),
                    "gt" => out.push('>'),
                    "quot" => out.push('"'),
                    "apos" | "#39" => out.push('\''),
                    _ => {}
                }
                rest = &tail[len..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Dictionary lookup first, then the trailing-'s' rule: strip a final
/// 's' when the stem keeps at least 3 letters and does not itself end in
/// 's' or 'u' (protects "glass", "status", and friends).
fn lemmatize(token: &str, lemmas: &HashMap<String, String>) -> String {
    if let Some(lemma) = lemmas.get(token) {
        return lemma.clone();
    }
    if let Some(stem) = token.strip_suffix('s') {
        if stem.len() >= 3 && !stem.ends_with('s') && !stem.ends_with('u') {
            return stem.to_string();
        }
    }
    token.to_string()
}

/// Tokenizes raw post text. Steps, in order: drop URLs and @mentions,
/// decode/drop HTML entities, drop non-ASCII (emoji) and control
/// characters, lowercase, split on non-alphanumerics (this strips '#'
/// but keeps the tag word), drop stopwords and tokens shorter than 2,
/// lemmatize, and re-apply the stopword/length filter so the output is a
/// fixed point of the whole pipeline.
pub fn tokenize(
    text: &str,
    stopwords: &HashSet<String>,
    lemmas: &HashMap<String, String>,
) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for chunk in text.split_whitespace() {
        if chunk.starts_with('@') {
            continue;
        }
        let lower = chunk.to_ascii_lowercase();
        if lower.starts_with("www.") {
            continue;
        }
        if let Some(i) = lower.find("https://").or_else(|| lower.find("http://")) {
            cleaned.push_str(&chunk[..i]);
        } else {
            cleaned.push_str(chunk);
        }
        cleaned.push(' ');
    }
    let decoded = strip_entities(&cleaned);
    let ascii_lower: String = decoded
        .chars()
        .filter(|c| c.is_ascii() && !c.is_ascii_control())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    ascii_lower
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() >= 2 && !stopwords.contains(*t))
        .map(|t| lemmatize(t, lemmas))
        .filter(|t| t.len() >= 2 && !stopwords.contains(t.as_str()))
        .collect()
}

/// Temporal word-frequency matrix: per-UTC-day occurrence counts of the
/// top-k words by total count.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyMatrix {
    pub words: Vec<String>,
    pub days: Vec<NaiveDate>,
    /// `counts[w][d]`: occurrences of `words[w]` on `days[d]`.
    pub counts: Vec<Vec<u64>>,
    pub totals: Vec<u64>,
    /// Share of all token occurrences covered by the selected words.
    pub coverage_share: f64,
    /// Set when k exceeded the vocabulary and the full vocabulary was
    /// returned instead.
    pub k_exceeds_vocab: bool,
}

/// Builds the frequency matrix over `(timestamp, tokens)` pairs. Words
/// are ranked by total occurrences (ties broken lexicographically);
/// `k = 0` is a config error; `k` beyond the vocabulary returns the full
/// vocabulary and flags it.
pub fn frequency_matrix<'a, I>(posts: I, k: usize) -> Result<FrequencyMatrix>
where
    I: IntoIterator<Item = (DateTime<Utc>, &'a [String])>,
{
    if k == 0 {
        return Err(Error::config("top-k word count must be at least 1"));
    }
    let mut day_set: Vec<NaiveDate> = Vec::new();
    let mut per_word: BTreeMap<&str, (u64, BTreeMap<NaiveDate, u64>)> = BTreeMap::new();
    let mut total_occurrences = 0u64;
    for (ts, tokens) in posts {
        let day = ts.date_naive();
        day_set.push(day);
        for t in tokens {
            let entry = per_word.entry(t).or_default();
            entry.0 += 1;
            *entry.1.entry(day).or_default() += 1;
            total_occurrences += 1;
        }
    }
    day_set.sort_unstable();
    day_set.dedup();

    let mut order: Vec<(&str, u64)> = per_word.iter().map(|(w, (tot, _))| (*w, *tot)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let k_exceeds_vocab = k > order.len();
    let kept = order.len().min(k);

    let mut words = Vec::with_capacity(kept);
    let mut totals = Vec::with_capacity(kept);
    let mut counts = Vec::with_capacity(kept);
    let mut covered = 0u64;
    for &(word, total) in order.iter().take(kept) {
        let by_day = &per_word[word].1;
        counts.push(
            day_set
                .iter()
                .map(|d| by_day.get(d).copied().unwrap_or(0))
                .collect(),
        );
        words.push(word.to_string());
        totals.push(total);
        covered += total;
    }
    let coverage_share = if total_occurrences == 0 {
        0.0
    } else {
        covered as f64 / total_occurrences as f64
    };
    Ok(FrequencyMatrix {
        words,
        days: day_set,
        counts,
        totals,
        coverage_share,
        k_exceeds_vocab,
    })
}

impl FrequencyMatrix {
    /// Writes the matrix as CSV with header `word,total,<date>...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "word,total")?;
        for d in &self.days {
            write!(w, ",{}", d.format("%Y-%m-%d"))?;
        }
        writeln!(w)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{},{}", word, self.totals[i])?;
            for c in &self.counts[i] {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::testkit;

    fn bundled() -> (HashSet<String>, HashMap<String, String>) {
        (
            parse_word_list(data::STOPWORDS),
            parse_lemma_table(data::LEMMAS).unwrap(),
        )
    }

    #[test]
    fn reference_post_tokens_match_exactly() {
        let (stop, lem) = bundled();
        let got = tokenize(testkit::REFERENCE_TEXTS[1], &stop, &lem);
        assert_eq!(
            got,
            [
                "good", "morning", "oklahoma", "start", "ice", "storm", "debris", "removal",
                "today"
            ]
        );
    }

    #[test]
    fn reference_corpus_token_sets_are_close() {
        let (stop, lem) = bundled();
        for (text, expected) in testkit::REFERENCE_TEXTS
            .iter()
            .zip(testkit::REFERENCE_TOKENS)
        {
            let got = tokenize(text, &stop, &lem);
            let got_set: HashSet<&str> = got.iter().map(String::as_str).collect();
            let want_set: HashSet<&str> = expected.iter().copied().collect();
            let inter = got_set.intersection(&want_set).count() as f64;
            let union = got_set.union(&want_set).count() as f64;
            assert!(
                inter / union >= 0.9,
                "token sets too far apart for {text:?}: got {got:?}"
            );
        }
    }

    #[test]
    fn hashtags_urls_and_emphasis() {
        let (stop, lem) = bundled();
        assert_eq!(
            tokenize("#okctraffic https://t.co/x ICE!!", &stop, &lem),
            ["okctraffic", "ice"]
        );
        assert_eq!(tokenize("", &stop, &lem), Vec::<String>::new());
        assert_eq!(
            tokenize(
                "Rain &amp; sleet tonight \u{1F327} @weatherguy knows",
                &stop,
                &lem
            ),
            ["rain", "sleet", "tonight", "know"]
        );
    }

    #[test]
    fn tokenize_is_idempotent_on_its_output() {
        let (stop, lem) = bundled();
        let mut corpora: Vec<String> = testkit::REFERENCE_TEXTS
            .iter()
            .map(|s| s.to_string())
            .collect();
        corpora.push("thats crews buses glass news analysis 12s a9 9a x".to_string());
        for text in &corpora {
            let once = tokenize(text, &stop, &lem);
            let again = tokenize(&once.join(" "), &stop, &lem);
            assert_eq!(once, again, "not a fixed point for {text:?}");
        }
    }

    #[test]
    fn relevance_membership() {
        let lex = RelevanceLexicon::parse(data::RELEVANCE).unwrap();
        let toks = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(is_relevant(&toks(&["ice", "storm", "night"]), &lex));
        assert!(!is_relevant(&toks(&[]), &lex));
        assert!(!is_relevant(&toks(&["sunset", "flag"]), &lex));
    }

    fn at(ts: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(ts)
            .unwrap()
            .with_timezone(&Utc)
    }

    #[test]
    fn frequency_matrix_hand_count() {
        let a = ["ice", "storm", "ice"].map(String::from).to_vec();
        let b = ["storm", "power"].map(String::from).to_vec();
        let ts = at("2020-10-27T12:00:00Z");
        let m = frequency_matrix([(ts, a.as_slice()), (ts, b.as_slice())], 2).unwrap();
        assert_eq!(m.words, ["ice", "storm"]);
        assert_eq!(m.totals, [2, 2]);
        assert_eq!(m.counts, [[2], [2]]);
        assert!((m.coverage_share - 0.8).abs() < 1e-15);
        assert!(!m.k_exceeds_vocab);
    }

    #[test]
    fn frequency_matrix_buckets_by_utc_day() {
        let toks = ["storm"].map(String::from).to_vec();
        let m = frequency_matrix(
            [
                (at("2020-10-27T23:59:59Z"), toks.as_slice()),
                (at("2020-10-28T00:00:01Z"), toks.as_slice()),
            ],
            1,
        )
        .unwrap();
        assert_eq!(m.days.len(), 2);
        assert_eq!(m.counts, [[1, 1]]);
    }

    #[test]
    fn frequency_matrix_k_bounds() {
        assert!(
            frequency_matrix(std::iter::empty(), 0)
                .unwrap_err()
                .exit_code()
                == 2
        );

        let empty = frequency_matrix(std::iter::empty(), 5).unwrap();
        assert!(empty.words.is_empty());
        assert_eq!(empty.coverage_share, 0.0);

        let toks = ["ice", "storm"].map(String::from).to_vec();
        let ts = at("2020-10-27T12:00:00Z");
        let m = frequency_matrix([(ts, toks.as_slice())], 50).unwrap();
        assert!(m.k_exceeds_vocab);
        assert_eq!(m.words.len(), 2);
        assert_eq!(m.coverage_share, 1.0);
    }

    #[test]
    fn coverage_share_is_monotone_in_k() {
        let mut rng = testkit::seeded_rng(12);
        let vocab = [
            "ice", "storm", "road", "power", "tree", "snow", "wind", "cold",
        ];
        let ts = at("2020-10-27T12:00:00Z");
        let posts: Vec<Vec<String>> = (0..30)
            .map(|_| {
                (0..(1 + (testkit::unit_f64(&mut rng) * 6.0) as usize))
                    .map(|_| {
                        vocab[(testkit::unit_f64(&mut rng) * vocab.len() as f64) as usize]
                            .to_string()
                    })
                    .collect()
            })
            .collect();
        let mut prev = 0.0;
        for k in 1..=vocab.len() {
            let m = frequency_matrix(posts.iter().map(|t| (ts, t.as_slice())), k).unwrap();
            assert!(
                m.coverage_share >= prev - 1e-12,
                "coverage share dropped at k={k}"
            );
            prev = m.coverage_share;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frequency_csv_shape() {
        let toks = ["ice", "storm", "ice"].map(String::from).to_vec();
        let m = frequency_matrix([(at("2020-10-27T12:00:00Z"), toks.as_slice())], 2).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "word,total,2020-10-27\nice,2,2\nstorm,1,1\n");
    }

    #[test]
    fn lemma_rule_edge_cases() {
        let (stop, lem) = bundled();
        let one = |s: &str| tokenize(s, &stop, &lem);
        assert_eq!(one("days"), ["day"]);
        assert_eq!(one("debris"), ["debris"]);
        assert_eq!(one("glass"), ["glass"]);
        assert_eq!(one("status campus"), ["status", "campus"]);
        assert_eq!(one("buses"), ["bus"]);
        assert_eq!(one("gas"), ["gas"], "two-letter stem is kept whole");
        assert_eq!(one("oklahomans"), ["oklahoman"]);
    }
}
