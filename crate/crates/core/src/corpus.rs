//! Record and corpus data model.
//!
//! A `Record` carries the descriptive metadata attributes used to compute
//! text relatedness plus the link to its audio file. A `Corpus` fixes the
//! ordinal order that every downstream matrix (tf-idf columns, embedding
//! rows) is keyed by.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// One archival record. `record_id` and `collection_id` are mandatory;
/// absent optional attributes are `None`/empty, never `""` sentinels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Record {
    pub record_id: String,
    pub collection_id: String,
    pub collection_name: Option<String>,
    pub data_provider: Option<String>,
    pub provider: Option<String>,
    pub language: Option<String>,
    pub country: Option<String>,
    pub title: Option<String>,
    pub subject: Vec<String>,
    pub description: Option<String>,
    pub kind: Option<String>,
    pub contributor: Vec<String>,
    pub date: Option<String>,
    pub year: Option<String>,
    pub coverage: Option<String>,
    pub terms_spatial: Option<String>,
    pub terms_temporal: Option<String>,
    pub terms_created: Option<String>,
    pub terms_medium: Option<String>,
    /// Path to the audio file; plumbing, not a metadata attribute.
    pub audio_path: Option<String>,
    /// Remaining attributes, keyed by attribute name.
    pub extra: BTreeMap<String, String>,
}

impl Record {
    /// A record with just the mandatory identifiers set.
    pub fn new(record_id: String, collection_id: String) -> Self {
        Record { record_id, collection_id, ..Record::default() }
    }

    /// All present metadata attribute values joined by single spaces, in
    /// declared field order with the free mapping last (keys sorted).
    /// `record_id` and `audio_path` are identifiers/plumbing and excluded.
    pub fn concat_metadata(&self) -> String {
        fn push_opt<'a>(parts: &mut Vec<&'a str>, v: &'a Option<String>) {
            if let Some(s) = v {
                parts.push(s.as_str());
            }
        }
        let mut parts: Vec<&str> = Vec::new();
        parts.push(self.collection_id.as_str());
        push_opt(&mut parts, &self.collection_name);
        push_opt(&mut parts, &self.data_provider);
        push_opt(&mut parts, &self.provider);
        push_opt(&mut parts, &self.language);
        push_opt(&mut parts, &self.country);
        push_opt(&mut parts, &self.title);
        parts.extend(self.subject.iter().map(String::as_str));
        push_opt(&mut parts, &self.description);
        push_opt(&mut parts, &self.kind);
        parts.extend(self.contributor.iter().map(String::as_str));
        push_opt(&mut parts, &self.date);
        push_opt(&mut parts, &self.year);
        push_opt(&mut parts, &self.coverage);
        push_opt(&mut parts, &self.terms_spatial);
        push_opt(&mut parts, &self.terms_temporal);
        push_opt(&mut parts, &self.terms_created);
        push_opt(&mut parts, &self.terms_medium);
        parts.extend(self.extra.values().map(String::as_str));
        let mut out = String::new();
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(p);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CorpusError {
    DuplicateId(String),
    /// `record_id` or `collection_id` empty.
    MissingField(&'static str),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::DuplicateId(id) => write!(f, "duplicate record_id {id:?}"),
            CorpusError::MissingField(name) => write!(f, "mandatory field {name} is empty"),
        }
    }
}

/// Ordered record set. Ordinals 0..n−1 follow insertion order and never
/// change afterwards; `index` is a bijection record_id ↔ ordinal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<Record>,
    index: BTreeMap<String, usize>,
    collections: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    pub fn new() -> Self {
        Corpus::default()
    }

    pub fn from_records(records: Vec<Record>) -> Result<Self, CorpusError> {
        let mut c = Corpus::new();
        for r in records {
            c.push(r)?;
        }
        Ok(c)
    }

    /// Append a record, assigning the next ordinal.
    pub fn push(&mut self, record: Record) -> Result<usize, CorpusError> {
        if record.record_id.is_empty() {
            return Err(CorpusError::MissingField("record_id"));
        }
        if record.collection_id.is_empty() {
            return Err(CorpusError::MissingField("collection_id"));
        }
        if self.index.contains_key(&record.record_id) {
            return Err(CorpusError::DuplicateId(record.record_id));
        }
        let ordinal = self.records.len();
        self.index.insert(record.record_id.clone(), ordinal);
        self.collections.entry(record.collection_id.clone()).or_default().push(ordinal);
        self.records.push(record);
        Ok(ordinal)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, ordinal: usize) -> &Record {
        &self.records[ordinal]
    }

    pub fn ordinal_of(&self, record_id: &str) -> Option<usize> {
        self.index.get(record_id).copied()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// collection_id → ordinals of its members, in corpus order.
    pub fn collections(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.collections
    }

    /// collection_id of each record, by ordinal.
    pub fn collection_labels(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.collection_id.as_str()).collect()
    }
}
