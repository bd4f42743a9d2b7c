//! MBIC-style annotated sentences, group specifications and identity counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::Label;
use crate::error::DatasetError;
use crate::metrics::GroupOutcome;
use crate::recognition::normalize_term;
use crate::text::tokenize;

const DEFAULT_GROUPS: &str = include_str!("../config/groups.toml");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MbicRecord {
    pub sentence: String,
    #[serde(default)]
    pub news_link: String,
    #[serde(default)]
    pub outlet: String,
    #[serde(default)]
    pub topic: String,
    /// Raw years or, after [`bucketize`], one of young/adult/elder/unknown.
    #[serde(default)]
    pub annotator_age: String,
    #[serde(default)]
    pub annotator_gender: String,
    #[serde(default)]
    pub annotator_education: String,
    #[serde(default)]
    pub biased_words: Vec<String>,
    pub label: Label,
}

/// Column mapping and cell conventions of an MBIC export.
///
/// `sentence` and `label` are always required; the other columns are read
/// only when named, and a named column missing from the header is an error.
/// An empty name leaves a column unmapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvDialect {
    pub delimiter: char,
    pub sentence: String,
    pub label: String,
    pub news_link: Option<String>,
    pub outlet: Option<String>,
    pub topic: Option<String>,
    pub age: Option<String>,
    pub gender: Option<String>,
    pub education: Option<String>,
    pub biased_words: Option<String>,
    /// Separator inside the biased-words cell. Cells written as a bracketed
    /// list (`['a', 'b']`) are also understood.
    pub biased_words_delimiter: char,
    pub biased_values: Vec<String>,
    pub non_biased_values: Vec<String>,
}

impl Default for CsvDialect {
    fn default() -> Self {
        Self {
            delimiter: ',',
            sentence: "sentence".into(),
            label: "label".into(),
            news_link: Some("news_link".into()),
            outlet: Some("outlet".into()),
            topic: Some("topic".into()),
            age: Some("age".into()),
            gender: Some("gender".into()),
            education: Some("education".into()),
            biased_words: Some("biased_words".into()),
            biased_words_delimiter: ';',
            biased_values: vec!["biased".into(), "1".into(), "true".into()],
            non_biased_values: vec![
                "non-biased".into(),
                "non biased".into(),
                "unbiased".into(),
                "not biased".into(),
                "0".into(),
                "false".into(),
            ],
        }
    }
}

impl CsvDialect {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let text = read_to_string(path.as_ref())?;
        Ok(toml::from_str(&text)?)
    }

    fn parse_label(&self, raw: &str) -> Option<Label> {
        let raw = raw.trim();
        let is = |values: &[String]| values.iter().any(|v| v.eq_ignore_ascii_case(raw));
        if is(&self.biased_values) {
            Some(Label::Biased)
        } else if is(&self.non_biased_values) {
            Some(Label::NonBiased)
        } else {
            None
        }
    }

    fn delimiter_byte(&self) -> Result<u8, DatasetError> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(|b| b.is_ascii())
            .ok_or_else(|| DatasetError::InvalidConfig("CSV delimiter must be ASCII".into()))
    }
}

fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits a biased-words cell into trimmed, non-empty phrases.
pub fn parse_biased_words(cell: &str, delimiter: char) -> Vec<String> {
    let cell = cell.trim();
    if let Some(inner) = cell.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
        let mut out = Vec::new();
        let mut current = String::new();
        let mut quote: Option<char> = None;
        for c in inner.chars() {
            match (quote, c) {
                (None, '\'' | '"') => quote = Some(c),
                (Some(q), _) if c == q => quote = None,
                (None, ',') => out.push(std::mem::take(&mut current)),
                _ => current.push(c),
            }
        }
        out.push(current);
        return out
            .into_iter()
            .map(|w| w.trim().to_string())
            .filter(|w| !w.is_empty())
            .collect();
    }
    cell.split(delimiter)
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MalformedRow {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub records: Vec<MbicRecord>,
    pub malformed: Vec<MalformedRow>,
}

impl LoadReport {
    pub fn label_counts(&self) -> (usize, usize) {
        let biased = self.records.iter().filter(|r| r.label.is_biased()).count();
        (biased, self.records.len() - biased)
    }
}

pub fn load_mbic(path: impl AsRef<Path>, dialect: &CsvDialect) -> Result<LoadReport, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    read_mbic(file, dialect)
}

/// Reads records from CSV. Rows that fail to parse are reported, not dropped
/// silently.
pub fn read_mbic<R: Read>(input: R, dialect: &CsvDialect) -> Result<LoadReport, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(dialect.delimiter_byte()?)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize, DatasetError> {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let optional = |name: &Option<String>| {
        name.as_deref()
            .filter(|n| !n.is_empty())
            .map(&column)
            .transpose()
    };

    let sentence_col = column(&dialect.sentence)?;
    let label_col = column(&dialect.label)?;
    let link_col = optional(&dialect.news_link)?;
    let outlet_col = optional(&dialect.outlet)?;
    let topic_col = optional(&dialect.topic)?;
    let age_col = optional(&dialect.age)?;
    let gender_col = optional(&dialect.gender)?;
    let education_col = optional(&dialect.education)?;
    let words_col = optional(&dialect.biased_words)?;

    let mut report = LoadReport::default();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                report.malformed.push(MalformedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if row.len() != headers.len() {
            report.malformed.push(MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", headers.len(), row.len()),
            });
            continue;
        }
        let cell = |col: Option<usize>| {
            col.and_then(|c| row.get(c))
                .map(|s| s.trim().to_string())
                .unwrap_or_default()
        };
        let sentence = cell(Some(sentence_col));
        if sentence.is_empty() {
            report.malformed.push(MalformedRow {
                line,
                reason: "empty sentence".into(),
            });
            continue;
        }
        let raw_label = cell(Some(label_col));
        let Some(label) = dialect.parse_label(&raw_label) else {
            report.malformed.push(MalformedRow {
                line,
                reason: format!("unrecognized label {raw_label:?}"),
            });
            continue;
        };
        report.records.push(MbicRecord {
            sentence,
            news_link: cell(link_col),
            outlet: cell(outlet_col),
            topic: cell(topic_col),
            annotator_age: cell(age_col),
            annotator_gender: cell(gender_col),
            annotator_education: cell(education_col),
            biased_words: parse_biased_words(&cell(words_col), dialect.biased_words_delimiter),
            label,
        });
    }
    Ok(report)
}

/// Writes records in the given dialect (first configured value per label).
pub fn write_mbic<'a, W: Write>(
    out: W,
    records: &[MbicRecord],
    dialect: &'a CsvDialect,
) -> Result<(), DatasetError> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(dialect.delimiter_byte()?)
        .from_writer(out);
    type Getter = fn(&MbicRecord) -> String;
    let mut columns: Vec<(&str, Getter)> =
        vec![(dialect.sentence.as_str(), |r| r.sentence.clone())];
    let optional: [(&Option<String>, Getter); 6] = [
        (&dialect.news_link, |r| r.news_link.clone()),
        (&dialect.outlet, |r| r.outlet.clone()),
        (&dialect.topic, |r| r.topic.clone()),
        (&dialect.age, |r| r.annotator_age.clone()),
        (&dialect.gender, |r| r.annotator_gender.clone()),
        (&dialect.education, |r| r.annotator_education.clone()),
    ];
    let mapped = |name: &'a Option<String>| name.as_deref().filter(|n| !n.is_empty());
    for (name, get) in optional {
        if let Some(name) = mapped(name) {
            columns.push((name, get));
        }
    }
    let biased = first_value(&dialect.biased_values, "biased")?;
    let non_biased = first_value(&dialect.non_biased_values, "non-biased")?;
    let mut header: Vec<&str> = columns.iter().map(|c| c.0).collect();
    let words_column = mapped(&dialect.biased_words);
    if let Some(words) = words_column {
        header.push(words);
    }
    header.push(&dialect.label);
    writer.write_record(&header)?;

    let separator = dialect.biased_words_delimiter.to_string();
    for r in records {
        let mut row: Vec<String> = columns.iter().map(|(_, get)| get(r)).collect();
        if words_column.is_some() {
            row.push(r.biased_words.join(&separator));
        }
        row.push(
            if r.label.is_biased() {
                biased
            } else {
                non_biased
            }
            .to_string(),
        );
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn first_value<'a>(values: &'a [String], what: &str) -> Result<&'a str, DatasetError> {
    values
        .first()
        .map(String::as_str)
        .ok_or_else(|| DatasetError::InvalidConfig(format!("no {what} label value configured")))
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, items: &[T]) -> Result<(), DatasetError> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(
    input: R,
) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeBounds {
    /// Ages strictly below this are "young".
    pub young_below: u32,
    /// Ages strictly above this are "elder"; the rest are "adult".
    pub elder_above: u32,
}

impl Default for AgeBounds {
    fn default() -> Self {
        Self {
            young_below: 30,
            elder_above: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EducationBucket {
    pub bucket: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub attribute: String,
    pub privileged: BTreeSet<String>,
    pub unprivileged: BTreeSet<String>,
    /// Identity value → terms whose mention links a sentence to it.
    #[serde(default)]
    pub identity_terms: BTreeMap<String, Vec<String>>,
}

impl GroupSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.privileged.is_empty() || self.unprivileged.is_empty() {
            return Err(DatasetError::InvalidConfig(format!(
                "attribute {:?} needs privileged and unprivileged values",
                self.attribute
            )));
        }
        if let Some(v) = self.privileged.intersection(&self.unprivileged).next() {
            return Err(DatasetError::InvalidConfig(format!(
                "attribute {:?}: value {v:?} is both privileged and unprivileged",
                self.attribute
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = &String> {
        self.unprivileged.iter().chain(&self.privileged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    #[serde(default)]
    pub age: AgeBounds,
    #[serde(default)]
    pub education: Vec<EducationBucket>,
    pub groups: Vec<GroupSpec>,
}

impl GroupConfig {
    /// The bundled configuration.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_GROUPS).expect("bundled group config is valid")
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let config: Self = toml::from_str(text)?;
        for g in &config.groups {
            g.validate()?;
        }
        if config.age.young_below > config.age.elder_above + 1 {
            return Err(DatasetError::InvalidConfig(
                "age.young_below must not exceed age.elder_above + 1".into(),
            ));
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::parse(&read_to_string(path.as_ref())?)
    }

    pub fn group(&self, attribute: &str) -> Option<&GroupSpec> {
        self.groups.iter().find(|g| g.attribute == attribute)
    }
}

pub const UNKNOWN_BUCKET: &str = "unknown";
const AGE_BUCKETS: [&str; 3] = ["young", "adult", "elder"];

pub fn age_bucket(raw: &str, bounds: &AgeBounds) -> String {
    let raw = raw.trim();
    if let Ok(years) = raw.parse::<f64>() {
        if years.is_finite() && years >= 0.0 {
            let bucket = if years < f64::from(bounds.young_below) {
                "young"
            } else if years > f64::from(bounds.elder_above) {
                "elder"
            } else {
                "adult"
            };
            return bucket.to_string();
        }
        return UNKNOWN_BUCKET.to_string();
    }
    let lower = raw.to_lowercase();
    if AGE_BUCKETS.contains(&lower.as_str()) {
        lower
    } else {
        UNKNOWN_BUCKET.to_string()
    }
}

pub fn education_bucket(raw: &str, buckets: &[EducationBucket]) -> String {
    let lower = raw.trim().to_lowercase();
    if lower.is_empty() {
        return UNKNOWN_BUCKET.to_string();
    }
    if buckets.iter().any(|b| b.bucket == lower) {
        return lower;
    }
    buckets
        .iter()
        .find(|b| b.keywords.iter().any(|k| lower.contains(k.as_str())))
        .map(|b| b.bucket.clone())
        .unwrap_or_else(|| UNKNOWN_BUCKET.to_string())
}

/// Replaces raw annotator age and education with categorical buckets.
pub fn bucketize(record: &MbicRecord, config: &GroupConfig) -> MbicRecord {
    MbicRecord {
        annotator_age: age_bucket(&record.annotator_age, &config.age),
        annotator_education: education_bucket(&record.annotator_education, &config.education),
        ..record.clone()
    }
}

/// Finds which identity values a sentence mentions.
#[derive(Debug, Clone)]
pub struct IdentityMatcher {
    /// (attribute, value, term tokens)
    terms: Vec<(String, String, Vec<String>)>,
}

impl IdentityMatcher {
    pub fn new<'a>(groups: impl IntoIterator<Item = &'a GroupSpec>) -> Self {
        let mut terms = Vec::new();
        for g in groups {
            for (value, list) in &g.identity_terms {
                for term in list {
                    if let Some(key) = normalize_term(term) {
                        let toks = key.split(' ').map(String::from).collect();
                        terms.push((g.attribute.clone(), value.clone(), toks));
                    }
                }
            }
        }
        Self { terms }
    }

    /// `(attribute, value)` pairs mentioned in `sentence`.
    pub fn mentions(&self, sentence: &str) -> BTreeSet<(&str, &str)> {
        let doc = tokenize(sentence);
        let tokens = doc.normalized_tokens();
        self.terms
            .iter()
            .filter(|(_, _, term)| tokens.windows(term.len()).any(|w| w == term.as_slice()))
            .map(|(a, v, _)| (a.as_str(), v.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Unprivileged,
    Privileged,
}

/// Side of `spec` a sentence falls on; sentences mentioning both sides or
/// neither are excluded.
pub fn side_of(spec: &GroupSpec, mentions: &BTreeSet<(&str, &str)>) -> Option<Side> {
    let mentioned = |values: &BTreeSet<String>| {
        mentions
            .iter()
            .any(|(a, v)| *a == spec.attribute && values.contains(*v))
    };
    match (mentioned(&spec.unprivileged), mentioned(&spec.privileged)) {
        (true, false) => Some(Side::Unprivileged),
        (false, true) => Some(Side::Privileged),
        _ => None,
    }
}

/// Positive and instance counts on each side of `spec`.
///
/// `items` pairs each sentence with whether it counts as a positive outcome.
pub fn group_outcomes<S: AsRef<str>>(
    items: &[(S, bool)],
    spec: &GroupSpec,
) -> Result<(GroupOutcome, GroupOutcome), DatasetError> {
    let matcher = IdentityMatcher::new([spec]);
    let sides: Vec<Option<Side>> = items
        .iter()
        .map(|(s, _)| side_of(spec, &matcher.mentions(s.as_ref())))
        .collect();
    outcomes_from_sides(items.iter().map(|(_, p)| *p), &sides, spec)
}

pub(crate) fn outcomes_from_sides(
    positives: impl Iterator<Item = bool>,
    sides: &[Option<Side>],
    spec: &GroupSpec,
) -> Result<(GroupOutcome, GroupOutcome), DatasetError> {
    let mut counts = [(0u64, 0u64); 2];
    for (positive, side) in positives.zip(sides) {
        let slot = match side {
            Some(Side::Unprivileged) => 0,
            Some(Side::Privileged) => 1,
            None => continue,
        };
        counts[slot].1 += 1;
        if positive {
            counts[slot].0 += 1;
        }
    }
    let outcome = |slot: usize, privileged: bool| -> Result<GroupOutcome, DatasetError> {
        let (num_positives, num_instances) = counts[slot];
        let group_id = format!(
            "{}:{}",
            spec.attribute,
            if privileged {
                "privileged"
            } else {
                "unprivileged"
            }
        );
        if num_instances == 0 {
            return Err(DatasetError::EmptyGroup(group_id));
        }
        Ok(GroupOutcome {
            group_id,
            privileged,
            num_positives,
            num_instances,
        })
    };
    Ok((outcome(0, false)?, outcome(1, true)?))
}

/// [`group_outcomes`] with the record's label as the outcome.
pub fn record_group_outcomes(
    records: &[MbicRecord],
    spec: &GroupSpec,
) -> Result<(GroupOutcome, GroupOutcome), DatasetError> {
    let items: Vec<(&str, bool)> = records
        .iter()
        .map(|r| (r.sentence.as_str(), r.label.is_biased()))
        .collect();
    group_outcomes(&items, spec)
}

/// Per identity value, the number of biased words in sentences mentioning it.
/// Values never mentioned are absent.
pub fn identity_bias_counts(records: &[MbicRecord], config: &GroupConfig) -> BTreeMap<String, u64> {
    let matcher = IdentityMatcher::new(&config.groups);
    let mut counts = BTreeMap::new();
    for record in records {
        let values: BTreeSet<&str> = matcher
            .mentions(&record.sentence)
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        for value in values {
            *counts.entry(value.to_string()).or_insert(0) += record.biased_words.len() as u64;
        }
    }
    counts
}
