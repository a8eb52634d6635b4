//! Metadata text normalization.
//!
//! Pipeline: lowercase → strip HTML/entities/hyperlinks → expand 4-digit
//! years into Roman-numeral decade/century tokens → drop digits, map
//! punctuation and symbols to spaces → split → remove stopwords (union over
//! en/de/it/fr/ro) → drop tokens shorter than 3 characters.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Maximum lookahead when scanning for a closing `>`; an unbalanced `<`
/// beyond this is kept as literal text.
const TAG_LOOKAHEAD: usize = 256;
/// Maximum length of an HTML entity body between `&` and `;`.
const ENTITY_LOOKAHEAD: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Language {
    En,
    De,
    It,
    Fr,
    Ro,
}

impl Language {
    pub const ALL: [Language; 5] =
        [Language::En, Language::De, Language::It, Language::Fr, Language::Ro];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
            Language::It => "it",
            Language::Fr => "fr",
            Language::Ro => "ro",
        }
    }
}

/// Per-language stopword sets; lookups use the union over all five.
#[derive(Clone, Debug)]
pub struct StopwordTable {
    sets: BTreeMap<Language, BTreeSet<String>>,
}

impl StopwordTable {
    /// The bundled lists (one file per language, one lowercase word per line).
    pub fn bundled() -> Self {
        let lists = [
            (Language::En, include_str!("stopwords/stopwords_en.txt")),
            (Language::De, include_str!("stopwords/stopwords_de.txt")),
            (Language::It, include_str!("stopwords/stopwords_it.txt")),
            (Language::Fr, include_str!("stopwords/stopwords_fr.txt")),
            (Language::Ro, include_str!("stopwords/stopwords_ro.txt")),
        ];
        Self::from_lists(&lists)
    }

    /// Parse `(language, list)` pairs; entries are trimmed, empty lines
    /// skipped, words lowercased. All five languages must be supplied.
    pub fn from_lists(lists: &[(Language, &str)]) -> Self {
        let mut sets = BTreeMap::new();
        for &(lang, text) in lists {
            let set: BTreeSet<String> = text
                .lines()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(|w| w.to_lowercase())
                .collect();
            sets.insert(lang, set);
        }
        for lang in Language::ALL {
            assert!(sets.contains_key(&lang), "missing stopword list for {:?}", lang);
        }
        StopwordTable { sets }
    }

    pub fn set(&self, lang: Language) -> &BTreeSet<String> {
        &self.sets[&lang]
    }

    pub fn union_contains(&self, word: &str) -> bool {
        self.sets.values().any(|s| s.contains(word))
    }
}

/// Ordered lowercase tokens; no whitespace, markup, digits, or punctuation,
/// every token at least 3 characters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenList {
    pub tokens: Vec<String>,
}

impl TokenList {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(t);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TextprepError {
    /// Year outside 1000..=2099; callers delete the digits instead.
    OutOfRange(i64),
}

impl fmt::Display for TextprepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextprepError::OutOfRange(y) => write!(f, "year {y} outside 1000..=2099"),
        }
    }
}

/// Full normalization pipeline.
pub fn preprocess(text: &str, stopwords: &StopwordTable) -> TokenList {
    let lower = text.to_lowercase();
    let stripped = strip_html(&lower);
    let expanded = expand_years(&stripped);
    let cleaned = normalize_chars(&expanded);
    let tokens = cleaned
        .split_whitespace()
        .filter(|t| !stopwords.union_contains(t))
        .filter(|t| t.chars().count() >= 3)
        .map(|t| t.to_string())
        .collect();
    TokenList { tokens }
}

/// Remove `<...>` tag spans, `&...;` entities, and `http(s)://`/`www.`
/// hyperlink tokens. Removed spans leave no replacement character behind.
pub fn strip_html(text: &str) -> String {
    strip_entities(&strip_links(&strip_tags(text)))
}

fn strip_tags(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            let limit = (i + 1 + TAG_LOOKAHEAD).min(chars.len());
            if let Some(close) = (i + 1..limit).find(|&j| chars[j] == '>') {
                i = close + 1;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn strip_links(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token_start = true;
    let mut skipping = false;
    let mut rest = text;
    while let Some(ch) = rest.chars().next() {
        if skipping {
            if ch.is_whitespace() {
                skipping = false;
                token_start = true;
                out.push(ch);
            }
        } else if token_start && is_link_start(rest) {
            skipping = true;
            token_start = false;
        } else {
            out.push(ch);
            token_start = ch.is_whitespace();
        }
        rest = &rest[ch.len_utf8()..];
    }
    out
}

fn is_link_start(s: &str) -> bool {
    let lower_prefix: String = s.chars().take(8).flat_map(char::to_lowercase).collect();
    lower_prefix.starts_with("http://")
        || lower_prefix.starts_with("https://")
        || lower_prefix.starts_with("www.")
}

fn strip_entities(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '&' {
            if let Some(close) = entity_end(&chars, i) {
                i = close + 1;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

/// Index of the terminating `;` if `chars[start..]` opens a named
/// (`&amp;`) or numeric (`&#233;`, `&#x1f600;`) entity.
fn entity_end(chars: &[char], start: usize) -> Option<usize> {
    let limit = (start + 1 + ENTITY_LOOKAHEAD).min(chars.len());
    let mut j = start + 1;
    if j < limit && chars[j] == '#' {
        j += 1;
        if j < limit && (chars[j] == 'x' || chars[j] == 'X') {
            j += 1;
        }
        let digits_start = j;
        while j < limit && chars[j].is_ascii_hexdigit() {
            j += 1;
        }
        if j > digits_start && j < chars.len() && chars[j] == ';' {
            return Some(j);
        }
        return None;
    }
    let name_start = j;
    while j < limit && chars[j].is_ascii_alphanumeric() {
        j += 1;
    }
    if j > name_start && j < chars.len() && chars[j] == ';' {
        Some(j)
    } else {
        None
    }
}

/// Replace each standalone 4-digit year in 1000..=2099 with its decade and
/// century tokens. Standalone means the digit run is exactly 4 long and not
/// adjacent to a letter or digit. Other digit runs are left for
/// [`normalize_chars`] to delete.
fn expand_years(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let before_ok = i == 0 || !chars[i - 1].is_alphanumeric();
            let after_ok = j == chars.len() || !chars[j].is_alphanumeric();
            if j - i == 4 && before_ok && after_ok {
                let year = chars[i..j].iter().collect::<String>().parse::<i64>().unwrap();
                if let Ok((decade, century)) = year_to_tokens(year) {
                    out.push_str(&decade);
                    out.push(' ');
                    out.push_str(&century);
                    i = j;
                    continue;
                }
            }
            for &c in &chars[i..j] {
                out.push(c);
            }
            i = j;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// Decade token `decade_` + roman(floor(year/10)·10) and century token
/// `century_` + roman(ceil(year/100)), lowercase.
pub fn year_to_tokens(year: i64) -> Result<(String, String), TextprepError> {
    if !(1000..=2099).contains(&year) {
        return Err(TextprepError::OutOfRange(year));
    }
    let decade = (year / 10) * 10;
    let century = (year + 99) / 100;
    let mut d = String::from("decade_");
    d.push_str(&roman(decade as u32));
    let mut c = String::from("century_");
    c.push_str(&roman(century as u32));
    Ok((d, c))
}

/// Standard subtractive Roman numerals, lowercase.
fn roman(mut n: u32) -> String {
    const TABLE: [(u32, &str); 13] = [
        (1000, "m"),
        (900, "cm"),
        (500, "d"),
        (400, "cd"),
        (100, "c"),
        (90, "xc"),
        (50, "l"),
        (40, "xl"),
        (10, "x"),
        (9, "ix"),
        (5, "v"),
        (4, "iv"),
        (1, "i"),
    ];
    let mut out = String::new();
    for (value, digits) in TABLE {
        while n >= value {
            out.push_str(digits);
            n -= value;
        }
    }
    out
}

/// Keep letters and `_`, delete digits, map everything else to a space.
fn normalize_chars(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch == '_' || ch.is_alphabetic() {
            out.push(ch);
        } else if ch.is_numeric() {
            // deleted
        } else {
            out.push(' ');
        }
    }
    out
}
