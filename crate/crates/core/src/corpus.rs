//! Labeled input records for the target (micro-blog) and source (review)
//! domains, token cleaning, and per-user virtual documents.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    /// Class index used by the classifiers; declaration order.
    pub fn index(self) -> usize {
        match self {
            Gender::Male => 0,
            Gender::Female => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Gender> {
        Gender::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(format!("unknown gender `{other}` (expected male|female)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    /// 1.0 for positive, 0.0 for negative.
    pub fn target(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            other => Err(format!(
                "unknown polarity `{other}` (expected positive|negative)"
            )),
        }
    }
}

/// One labeled micro-blog user: a gender label and the user's segmented posts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub gender: Gender,
    pub posts: Vec<Vec<String>>,
}

/// One polarity-labeled review from the source domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReview {
    pub review_id: String,
    pub polarity: Polarity,
    pub tokens: Vec<String>,
}

/// A hand-labeled target-domain sample used to augment the source set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualSample {
    pub id: String,
    pub user_id: String,
    pub polarity: Polarity,
    pub tokens: Vec<String>,
}

/// All of one user's cleaned posts concatenated in post order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualDocument {
    pub user_id: String,
    pub gender: Gender,
    pub tokens: Vec<String>,
    pub token_count: usize,
}

#[derive(Deserialize)]
struct RawUser {
    user_id: String,
    gender: String,
    posts: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct RawReview {
    review_id: String,
    polarity: String,
    tokens: Vec<String>,
}

#[derive(Deserialize)]
struct RawManual {
    #[serde(default)]
    id: Option<String>,
    user_id: String,
    polarity: String,
    tokens: Vec<String>,
}

/// Iterates the non-blank lines of a JSONL file as (1-based line number, text).
fn read_jsonl(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect();
    if lines.is_empty() {
        log::warn!("{}: no records", path.display());
    }
    Ok(lines)
}

fn parse_line<T: for<'de> Deserialize<'de>>(path: &Path, line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

fn schema_err(path: &Path, line: usize, message: String) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn check_unique(seen: &mut HashSet<String>, path: &Path, line: usize, id: &str) -> Result<()> {
    if !seen.insert(id.to_string()) {
        return Err(Error::DuplicateKey {
            path: path.to_path_buf(),
            line,
            id: id.to_string(),
        });
    }
    Ok(())
}

/// Loads target-domain users from JSONL. Empty posts are dropped; a user left
/// with no posts is rejected.
pub fn load_user_records(path: impl AsRef<Path>) -> Result<Vec<UserRecord>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, text) in read_jsonl(path)? {
        let raw: RawUser = parse_line(path, line, &text)?;
        let gender = raw
            .gender
            .parse::<Gender>()
            .map_err(|m| schema_err(path, line, m))?;
        check_unique(&mut seen, path, line, &raw.user_id)?;
        let posts: Vec<Vec<String>> = raw.posts.into_iter().filter(|p| !p.is_empty()).collect();
        if posts.is_empty() {
            return Err(Error::EmptyContent { id: raw.user_id });
        }
        out.push(UserRecord {
            user_id: raw.user_id,
            gender,
            posts,
        });
    }
    Ok(out)
}

pub fn load_source_reviews(path: impl AsRef<Path>) -> Result<Vec<SourceReview>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, text) in read_jsonl(path)? {
        let raw: RawReview = parse_line(path, line, &text)?;
        let polarity = raw
            .polarity
            .parse::<Polarity>()
            .map_err(|m| schema_err(path, line, m))?;
        check_unique(&mut seen, path, line, &raw.review_id)?;
        if raw.tokens.is_empty() {
            return Err(Error::EmptyContent { id: raw.review_id });
        }
        out.push(SourceReview {
            review_id: raw.review_id,
            polarity,
            tokens: raw.tokens,
        });
    }
    Ok(out)
}

/// Loads manually labeled target samples. A missing `id` defaults to
/// `<user_id>#<line>`.
pub fn load_manual_samples(path: impl AsRef<Path>) -> Result<Vec<ManualSample>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, text) in read_jsonl(path)? {
        let raw: RawManual = parse_line(path, line, &text)?;
        let polarity = raw
            .polarity
            .parse::<Polarity>()
            .map_err(|m| schema_err(path, line, m))?;
        let id = raw.id.unwrap_or_else(|| format!("{}#{line}", raw.user_id));
        check_unique(&mut seen, path, line, &id)?;
        if raw.tokens.is_empty() {
            return Err(Error::EmptyContent { id });
        }
        out.push(ManualSample {
            id,
            user_id: raw.user_id,
            polarity,
            tokens: raw.tokens,
        });
    }
    Ok(out)
}

/// Reads a stopword list: one token per line, `#` comments and blank lines ignored.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalRule {
    Stopword,
    /// Tokens beginning with `http` (covers `https`).
    HyperLink,
    /// Tokens without a single letter or ideograph.
    NoWordCharacter,
}

impl RemovalRule {
    pub const DEFAULT: [RemovalRule; 3] = [
        RemovalRule::Stopword,
        RemovalRule::HyperLink,
        RemovalRule::NoWordCharacter,
    ];

    fn matches(self, token: &str, stopwords: &HashSet<String>) -> bool {
        match self {
            RemovalRule::Stopword => stopwords.contains(token),
            RemovalRule::HyperLink => token
                .get(..4)
                .is_some_and(|p| p.eq_ignore_ascii_case("http")),
            RemovalRule::NoWordCharacter => !token.chars().any(char::is_alphabetic),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cleaner {
    pub stopwords: HashSet<String>,
    pub rules: Vec<RemovalRule>,
}

impl Default for Cleaner {
    fn default() -> Self {
        Cleaner::new(HashSet::new())
    }
}

impl Cleaner {
    pub fn new(stopwords: HashSet<String>) -> Self {
        Cleaner {
            stopwords,
            rules: RemovalRule::DEFAULT.to_vec(),
        }
    }

    pub fn removes(&self, token: &str) -> bool {
        self.rules.iter().any(|r| r.matches(token, &self.stopwords))
    }

    pub fn clean_tokens(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().filter(|t| !self.removes(t)).cloned().collect()
    }

    /// Concatenates the user's cleaned posts in order.
    pub fn build_virtual_document(&self, record: &UserRecord) -> Result<VirtualDocument> {
        let tokens: Vec<String> = record
            .posts
            .iter()
            .flat_map(|post| self.clean_tokens(post))
            .collect();
        if tokens.is_empty() {
            return Err(Error::EmptyDocument {
                id: record.user_id.clone(),
            });
        }
        Ok(VirtualDocument {
            user_id: record.user_id.clone(),
            gender: record.gender,
            token_count: tokens.len(),
            tokens,
        })
    }

    /// Builds virtual documents for every user, dropping (and logging) users
    /// whose documents are empty after cleaning.
    pub fn build_virtual_documents(&self, records: &[UserRecord]) -> Vec<VirtualDocument> {
        records
            .iter()
            .filter_map(|r| match self.build_virtual_document(r) {
                Ok(doc) => Some(doc),
                Err(e) => {
                    log::warn!("dropping user: {e}");
                    None
                }
            })
            .collect()
    }
}

/// Indexes records by id for lookups across pipeline stages.
pub fn index_by_user(records: &[UserRecord]) -> HashMap<&str, &UserRecord> {
    records.iter().map(|r| (r.user_id.as_str(), r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn cleaning_applies_three_rules() {
        let cleaner = Cleaner::new(["I".to_string()].into_iter().collect());
        let out = cleaner.clean_tokens(&toks(&["I", "love", "http://a.b", "!!"]));
        assert_eq!(out, toks(&["love"]));
        assert!(cleaner.clean_tokens(&[]).is_empty());
        let keep = toks(&["好", "day", "x1"]);
        assert_eq!(cleaner.clean_tokens(&keep), keep);
    }

    #[test]
    fn https_and_digits_removed() {
        let cleaner = Cleaner::default();
        let out = cleaner.clean_tokens(&toks(&["HTTPS://x", "2024", "ok", "..."]));
        assert_eq!(out, toks(&["ok"]));
    }

    #[test]
    fn virtual_document_concatenates_posts() {
        let cleaner = Cleaner::default();
        let rec = UserRecord {
            user_id: "u".into(),
            gender: Gender::Female,
            posts: vec![toks(&["a", "b"]), toks(&["c"])],
        };
        let doc = cleaner.build_virtual_document(&rec).unwrap();
        assert_eq!(doc.tokens, toks(&["a", "b", "c"]));
        assert_eq!(doc.token_count, 3);

        let rec = UserRecord {
            posts: vec![toks(&["x", "http://y"])],
            ..rec
        };
        let doc = cleaner.build_virtual_document(&rec).unwrap();
        assert_eq!(doc.tokens, toks(&["x"]));
        assert_eq!(doc.token_count, 1);
    }

    #[test]
    fn all_stopword_user_is_empty_document() {
        let cleaner = Cleaner::new(["a".to_string(), "b".to_string()].into_iter().collect());
        let rec = UserRecord {
            user_id: "u9".into(),
            gender: Gender::Male,
            posts: vec![toks(&["a"]), toks(&["b", "a"])],
        };
        match cleaner.build_virtual_document(&rec) {
            Err(Error::EmptyDocument { id }) => assert_eq!(id, "u9"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(cleaner.build_virtual_documents(&[rec]).is_empty());
    }

    #[test]
    fn loads_users() {
        let f = write_tmp(
            "{\"user_id\":\"a\",\"gender\":\"male\",\"posts\":[[\"x\"],[]]}\n\
             {\"user_id\":\"b\",\"gender\":\"female\",\"posts\":[[\"y\",\"z\"]]}\n",
        );
        let users = load_user_records(f.path()).unwrap();
        assert_eq!(users.len(), 2);
        assert_eq!(users[0].user_id, "a");
        assert_eq!(users[0].posts.len(), 1);
        assert_eq!(users[1].gender, Gender::Female);
    }

    #[test]
    fn unknown_gender_is_schema_error_with_line() {
        let f = write_tmp(
            "{\"user_id\":\"a\",\"gender\":\"male\",\"posts\":[[\"x\"]]}\n\
             {\"user_id\":\"b\",\"gender\":\"other\",\"posts\":[[\"y\"]]}\n",
        );
        match load_user_records(f.path()) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_malformed_and_empty() {
        let f = write_tmp(
            "{\"user_id\":\"a\",\"gender\":\"male\",\"posts\":[[\"x\"]]}\n\
             {\"user_id\":\"a\",\"gender\":\"male\",\"posts\":[[\"x\"]]}\n",
        );
        assert!(matches!(
            load_user_records(f.path()),
            Err(Error::DuplicateKey { line: 2, .. })
        ));
        let f = write_tmp("{\"user_id\": \"a\", \n");
        assert!(matches!(
            load_user_records(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
        let f = write_tmp("{\"user_id\":\"a\",\"gender\":\"male\",\"posts\":[[]]}\n");
        assert!(matches!(
            load_user_records(f.path()),
            Err(Error::EmptyContent { .. })
        ));
    }

    #[test]
    fn loads_reviews() {
        let f = write_tmp(
            "{\"review_id\":\"1\",\"polarity\":\"positive\",\"tokens\":[\"good\"]}\n\
             {\"review_id\":\"2\",\"polarity\":\"negative\",\"tokens\":[\"bad\"]}\n\
             {\"review_id\":\"3\",\"polarity\":\"positive\",\"tokens\":[\"nice\",\"one\"]}\n",
        );
        let reviews = load_source_reviews(f.path()).unwrap();
        assert_eq!(reviews.len(), 3);
        assert_eq!(reviews[1].polarity, Polarity::Negative);

        let f = write_tmp("{\"review_id\":\"1\",\"polarity\":\"3-stars\",\"tokens\":[\"x\"]}\n");
        assert!(matches!(
            load_source_reviews(f.path()),
            Err(Error::Schema { line: 1, .. })
        ));
        let f = write_tmp("");
        assert!(load_source_reviews(f.path()).unwrap().is_empty());
    }

    #[test]
    fn manual_ids_default_from_user_and_line() {
        let f = write_tmp(
            "{\"user_id\":\"u1\",\"polarity\":\"positive\",\"tokens\":[\"x\"]}\n\
             {\"id\":\"m2\",\"user_id\":\"u1\",\"polarity\":\"negative\",\"tokens\":[\"y\"]}\n",
        );
        let m = load_manual_samples(f.path()).unwrap();
        assert_eq!(m[0].id, "u1#1");
        assert_eq!(m[1].id, "m2");
    }

    #[test]
    fn stopword_file_skips_comments() {
        let f = write_tmp("# list\nthe\n\n  a  \n");
        let s = load_stopwords(f.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains("a"));
        let f = write_tmp("");
        assert!(load_stopwords(f.path()).unwrap().is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn token() -> impl Strategy<Value = String> {
            prop_oneof![
                "[a-z]{1,4}",
                "http[s]?://[a-z]{1,3}",
                "[!?.0-9]{1,3}",
                Just("the".to_string()),
            ]
        }

        proptest! {
            #[test]
            fn cleaning_is_idempotent_subsequence(tokens in proptest::collection::vec(token(), 0..20)) {
                let cleaner = Cleaner::new(["the".to_string()].into_iter().collect());
                let once = cleaner.clean_tokens(&tokens);
                prop_assert_eq!(cleaner.clean_tokens(&once), once.clone());
                // subsequence; every dropped token matches a rule
                let mut it = once.iter().peekable();
                for t in &tokens {
                    if it.peek() == Some(&t) {
                        it.next();
                    } else {
                        prop_assert!(cleaner.removes(t));
                    }
                }
                prop_assert!(it.next().is_none());
            }

            #[test]
            fn token_count_sums_cleaned_posts(posts in proptest::collection::vec(proptest::collection::vec(token(), 1..6), 1..5)) {
                let cleaner = Cleaner::new(["the".to_string()].into_iter().collect());
                let rec = UserRecord { user_id: "u".into(), gender: Gender::Male, posts: posts.clone() };
                let expected: usize = posts.iter().map(|p| cleaner.clean_tokens(p).len()).sum();
                match cleaner.build_virtual_document(&rec) {
                    Ok(doc) => {
                        prop_assert_eq!(doc.token_count, expected);
                        prop_assert_eq!(doc.tokens.len(), expected);
                        prop_assert_eq!(cleaner.build_virtual_document(&rec).unwrap(), doc);
                    }
                    Err(_) => prop_assert_eq!(expected, 0),
                }
            }
        }
    }
}
