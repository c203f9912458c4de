//! Post ingestion: delimited-text parsing, domain-to-reliability mapping,
//! bot/duplicate removal and wall-clock localization.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("required column {0:?} not found in header")]
    MissingColumn(String),
    #[error("schema names neither a domain nor a category column")]
    NoCategorySource,
    #[error("{rejected} of {rows} rows rejected, above threshold {threshold}")]
    TooManyRejects { rejected: u64, rows: u64, threshold: f64 },
    #[error("unknown timezone rule {0:?}")]
    UnknownTz(String),
    #[error("bad line {line} in {what}: {reason}")]
    BadAuxLine { what: &'static str, line: usize, reason: String },
}

/// Kind of post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostKind {
    Tweet,
    Retweet,
    Reply,
}

impl PostKind {
    fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "tweet" => Some(Self::Tweet),
            "retweet" => Some(Self::Retweet),
            "reply" => Some(Self::Reply),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tweet => "tweet",
            Self::Retweet => "retweet",
            Self::Reply => "reply",
        }
    }
}

/// Source-reliability category of a post's linked domain.
///
/// `Political`, `FakeOrHoax` and `ConspiracyJunkScience` form the
/// potentially disinformative composite. `Other` collects posts without a
/// link or with an unmapped domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentCategory {
    Science,
    MainstreamMedia,
    Satire,
    Clickbait,
    Other,
    Political,
    FakeOrHoax,
    ConspiracyJunkScience,
}

impl ContentCategory {
    /// The full category set F.
    pub const ALL: [ContentCategory; 8] = [
        Self::Science,
        Self::MainstreamMedia,
        Self::Satire,
        Self::Clickbait,
        Self::Other,
        Self::Political,
        Self::FakeOrHoax,
        Self::ConspiracyJunkScience,
    ];

    /// F^K: every category except `Other`.
    pub const KNOWN: [ContentCategory; 7] = [
        Self::Science,
        Self::MainstreamMedia,
        Self::Satire,
        Self::Clickbait,
        Self::Political,
        Self::FakeOrHoax,
        Self::ConspiracyJunkScience,
    ];

    /// F^H: the potentially disinformative composite.
    pub const DISINFORMATIVE: [ContentCategory; 3] =
        [Self::Political, Self::FakeOrHoax, Self::ConspiracyJunkScience];

    pub fn is_disinformative(self) -> bool {
        matches!(self, Self::Political | Self::FakeOrHoax | Self::ConspiracyJunkScience)
    }

    /// Stable index into `ALL`, handy for count arrays.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "science" => Some(Self::Science),
            "mainstream_media" | "mainstream" => Some(Self::MainstreamMedia),
            "satire" => Some(Self::Satire),
            "clickbait" => Some(Self::Clickbait),
            "other" | "shadow" => Some(Self::Other),
            "political" => Some(Self::Political),
            "fake_or_hoax" | "fake" => Some(Self::FakeOrHoax),
            "conspiracy_junk_science" | "conspiracy" => Some(Self::ConspiracyJunkScience),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Science => "science",
            Self::MainstreamMedia => "mainstream_media",
            Self::Satire => "satire",
            Self::Clickbait => "clickbait",
            Self::Other => "other",
            Self::Political => "political",
            Self::FakeOrHoax => "fake_or_hoax",
            Self::ConspiracyJunkScience => "conspiracy_junk_science",
        }
    }
}

/// Wall-clock annotation attached by [`localize`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalStamp {
    pub date: NaiveDate,
    pub minute_of_day: u32,
    /// True for instants in the hour right after a spring-forward
    /// transition, whose wall-clock label sits past the skipped hour.
    pub dst_gap: bool,
}

/// One post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub timestamp: DateTime<Utc>,
    pub user: String,
    pub kind: PostKind,
    pub domain: Option<String>,
    pub category: Option<ContentCategory>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub local: Option<LocalStamp>,
}

impl PostRecord {
    /// Category with unmapped rows folded into `Other`.
    pub fn category_or_other(&self) -> ContentCategory {
        self.category.unwrap_or(ContentCategory::Other)
    }

    fn dedup_key(&self) -> (&str, DateTime<Utc>, PostKind, Option<&str>) {
        (&self.user, self.timestamp, self.kind, self.domain.as_deref())
    }
}

/// Inclusive date span of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisSpan {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl AnalysisSpan {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        assert!(start <= end, "span start after end");
        Self { start, end }
    }

    /// UTC instant bounds `[start 00:00Z, end+1d 00:00Z)`.
    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        let lo = Utc.from_utc_datetime(&self.start.and_hms_opt(0, 0, 0).unwrap());
        let hi = Utc.from_utc_datetime(
            &(self.end + chrono::Duration::days(1)).and_hms_opt(0, 0, 0).unwrap(),
        );
        ts >= lo && ts < hi
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

/// Row-accounting counters. Input rows = surviving rows + `duplicates`
/// + `rejected` + `out_of_span` + `bots_removed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounters {
    pub rows_read: u64,
    pub duplicates: u64,
    pub rejected: u64,
    pub out_of_span: u64,
    pub bots_removed: u64,
    pub dst_gap_flagged: u64,
}

/// A rejected input row, kept for the rejects report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

const MAX_KEPT_REJECTS: usize = 1000;

/// Cleaned, deduplicated post table, sorted by (user, timestamp).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostTable {
    records: Vec<PostRecord>,
    pub span: AnalysisSpan,
    pub tz_rule: String,
    pub counters: IngestCounters,
    pub rejects: Vec<RejectedRow>,
}

impl PostTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PostRecord] {
        &self.records
    }

    /// Posts of one user (records are sorted by user, so this is a
    /// contiguous run located by binary search).
    pub fn posts_of(&self, user: &str) -> impl Iterator<Item = &PostRecord> {
        let lo = self.records.partition_point(|r| r.user.as_str() < user);
        let hi = self.records.partition_point(|r| r.user.as_str() <= user);
        self.records[lo..hi].iter()
    }

    /// Users in sorted order with their post runs.
    pub fn users(&self) -> impl Iterator<Item = (&str, &[PostRecord])> {
        UserRuns { records: &self.records, pos: 0 }
    }

    /// Distinct user count.
    pub fn user_count(&self) -> usize {
        self.users().count()
    }

    /// Sorts by (user, timestamp, kind, domain) and drops duplicate rows,
    /// returning how many were removed.
    pub(crate) fn sort_and_dedup(records: &mut Vec<PostRecord>) -> u64 {
        records.sort_by(|a, b| a.dedup_key().cmp(&b.dedup_key()));
        let before = records.len();
        records.dedup_by(|a, b| a.dedup_key() == b.dedup_key());
        (before - records.len()) as u64
    }

    /// Assembles a table from already sorted and deduplicated records.
    pub(crate) fn from_parts(
        records: Vec<PostRecord>,
        span: AnalysisSpan,
        tz_rule: String,
        counters: IngestCounters,
    ) -> Self {
        Self { records, span, tz_rule, counters, rejects: Vec::new() }
    }
}

struct UserRuns<'a> {
    records: &'a [PostRecord],
    pos: usize,
}

impl<'a> Iterator for UserRuns<'a> {
    type Item = (&'a str, &'a [PostRecord]);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.records.len() {
            return None;
        }
        let start = self.pos;
        let user = self.records[start].user.as_str();
        let mut end = start + 1;
        while end < self.records.len() && self.records[end].user == user {
            end += 1;
        }
        self.pos = end;
        Some((user, &self.records[start..end]))
    }
}

/// Column map for the delimited posts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub ts: String,
    pub user: String,
    pub kind: String,
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub lat: Option<String>,
    #[serde(default)]
    pub lon: Option<String>,
    /// Field delimiter, `\t` by default.
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    '\t'
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            ts: "ts".into(),
            user: "user".into(),
            kind: "kind".into(),
            domain: Some("domain".into()),
            category: Some("category".into()),
            lat: Some("lat".into()),
            lon: Some("lon".into()),
            delimiter: '\t',
        }
    }
}

/// Fraction of malformed rows tolerated before parsing fails outright.
pub const DEFAULT_REJECT_THRESHOLD: f64 = 0.05;

fn parse_timestamp(token: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(token) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(token, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    None
}

struct ColumnIndices {
    ts: usize,
    user: usize,
    kind: usize,
    domain: Option<usize>,
    category: Option<usize>,
    lat: Option<usize>,
    lon: Option<usize>,
}

fn resolve_columns(headers: &csv::StringRecord, schema: &Schema) -> Result<ColumnIndices, IngestError> {
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()));
    let optional = |name: &Option<String>| name.as_deref().and_then(find);

    if schema.domain.is_none() && schema.category.is_none() {
        return Err(IngestError::NoCategorySource);
    }
    Ok(ColumnIndices {
        ts: required(&schema.ts)?,
        user: required(&schema.user)?,
        kind: required(&schema.kind)?,
        domain: optional(&schema.domain),
        category: optional(&schema.category),
        lat: optional(&schema.lat),
        lon: optional(&schema.lon),
    })
}

/// Parses a delimited posts file into a deduplicated, user-sorted table.
///
/// Malformed rows are collected into the rejects report rather than
/// aborting the parse, unless their fraction exceeds `reject_threshold`.
pub fn parse_posts<R: Read>(
    reader: R,
    schema: &Schema,
    span: AnalysisSpan,
    reject_threshold: f64,
) -> Result<PostTable, IngestError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_reader(reader);
    let cols = resolve_columns(csv_reader.headers()?, schema)?;

    let mut records = Vec::new();
    let mut counters = IngestCounters::default();
    let mut rejects = Vec::new();
    let reject = |line: u64, reason: String, counters: &mut IngestCounters, rejects: &mut Vec<RejectedRow>| {
        counters.rejected += 1;
        if rejects.len() < MAX_KEPT_REJECTS {
            rejects.push(RejectedRow { line, reason });
        }
    };

    for (i, row) in csv_reader.records().enumerate() {
        let line = i as u64 + 2; // header is line 1
        counters.rows_read += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                reject(line, format!("unreadable row: {e}"), &mut counters, &mut rejects);
                continue;
            }
        };
        let field = |idx: usize| row.get(idx).map(str::trim).filter(|s| !s.is_empty());
        let opt_field = |idx: Option<usize>| idx.and_then(field);

        let ts = match field(cols.ts).and_then(parse_timestamp) {
            Some(ts) => ts,
            None => {
                reject(line, "bad timestamp".into(), &mut counters, &mut rejects);
                continue;
            }
        };
        let user = match field(cols.user) {
            Some(u) => u.to_string(),
            None => {
                reject(line, "missing user".into(), &mut counters, &mut rejects);
                continue;
            }
        };
        let kind = match field(cols.kind).and_then(PostKind::parse) {
            Some(k) => k,
            None => {
                reject(line, "bad post kind".into(), &mut counters, &mut rejects);
                continue;
            }
        };
        let category = match opt_field(cols.category) {
            Some(token) => match ContentCategory::parse(token) {
                Some(c) => Some(c),
                None => {
                    reject(line, format!("unknown category {token:?}"), &mut counters, &mut rejects);
                    continue;
                }
            },
            None => None,
        };
        let coord = |idx: Option<usize>| -> Result<Option<f64>, ()> {
            match opt_field(idx) {
                Some(tok) => tok.parse::<f64>().map(Some).map_err(|_| ()),
                None => Ok(None),
            }
        };
        let (lat, lon) = match (coord(cols.lat), coord(cols.lon)) {
            (Ok(lat), Ok(lon)) => (lat, lon),
            _ => {
                reject(line, "bad coordinate".into(), &mut counters, &mut rejects);
                continue;
            }
        };

        if !span.contains(ts) {
            counters.out_of_span += 1;
            continue;
        }

        records.push(PostRecord {
            timestamp: ts,
            user,
            kind,
            domain: opt_field(cols.domain).map(str::to_string),
            category,
            lat,
            lon,
            local: None,
        });
    }

    if counters.rows_read > 0 {
        let fraction = counters.rejected as f64 / counters.rows_read as f64;
        if fraction > reject_threshold {
            return Err(IngestError::TooManyRejects {
                rejected: counters.rejected,
                rows: counters.rows_read,
                threshold: reject_threshold,
            });
        }
    }

    counters.duplicates = PostTable::sort_and_dedup(&mut records);
    Ok(PostTable { records, span, tz_rule: "UTC".into(), counters, rejects })
}

/// Domain-to-category map with lowercase hostname keys.
pub type CategoryMap = BTreeMap<String, ContentCategory>;

/// Assigns every row exactly one category and removes bot users.
///
/// A pre-resolved category on the row wins; otherwise the domain is looked
/// up in `category_map`; rows without a domain or with an unmapped domain
/// fall into `Other`. Applying this twice equals applying it once.
pub fn map_and_filter(table: &PostTable, category_map: &CategoryMap, bot_list: &BTreeSet<String>) -> PostTable {
    let mut counters = table.counters;
    let mut records: Vec<PostRecord> = Vec::with_capacity(table.records.len());
    for rec in &table.records {
        if bot_list.contains(&rec.user) {
            counters.bots_removed += 1;
            continue;
        }
        let mut rec = rec.clone();
        rec.category = Some(match rec.category {
            Some(c) => c,
            None => rec
                .domain
                .as_deref()
                .and_then(|d| category_map.get(&d.to_ascii_lowercase()).copied())
                .unwrap_or(ContentCategory::Other),
        });
        records.push(rec);
    }
    PostTable {
        records,
        span: table.span,
        tz_rule: table.tz_rule.clone(),
        counters,
        rejects: table.rejects.clone(),
    }
}

/// Timezone rule mapping UTC instants to wall-clock offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TzRule {
    Utc,
    /// Central European Time with EU daylight-saving rules: UTC+1, switching
    /// to UTC+2 between 01:00 UTC on the last Sunday of March and 01:00 UTC
    /// on the last Sunday of October.
    CetCest,
}

fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let last_day = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1).unwrap()
    } - chrono::Duration::days(1);
    let back = last_day.weekday().num_days_from_sunday();
    last_day - chrono::Duration::days(back as i64)
}

impl TzRule {
    pub fn parse(id: &str) -> Result<Self, IngestError> {
        match id.to_ascii_uppercase().as_str() {
            "UTC" => Ok(Self::Utc),
            "CET" | "CET/CEST" | "CEST" => Ok(Self::CetCest),
            other => Err(IngestError::UnknownTz(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Utc => "UTC",
            Self::CetCest => "CET",
        }
    }

    /// UTC offset in seconds at `ts`, plus whether `ts` falls in the hour
    /// right after a spring-forward transition.
    pub fn offset_at(&self, ts: DateTime<Utc>) -> (i32, bool) {
        match self {
            Self::Utc => (0, false),
            Self::CetCest => {
                let year = ts.year();
                let spring = Utc
                    .from_utc_datetime(&last_sunday(year, 3).and_hms_opt(1, 0, 0).unwrap());
                let autumn = Utc
                    .from_utc_datetime(&last_sunday(year, 10).and_hms_opt(1, 0, 0).unwrap());
                if ts >= spring && ts < autumn {
                    let gap = ts < spring + chrono::Duration::hours(1);
                    (2 * 3600, gap)
                } else {
                    (3600, false)
                }
            }
        }
    }
}

/// Annotates every record with its local wall-clock date and time of day.
pub fn localize(table: &PostTable, tz: TzRule) -> PostTable {
    let mut counters = table.counters;
    counters.dst_gap_flagged = 0;
    let records = table
        .records
        .iter()
        .map(|rec| {
            let (offset, gap) = tz.offset_at(rec.timestamp);
            if gap {
                counters.dst_gap_flagged += 1;
            }
            let local_dt = rec.timestamp.naive_utc() + chrono::Duration::seconds(offset as i64);
            let minute_of_day = (local_dt.time() - chrono::NaiveTime::from_hms_opt(0, 0, 0).unwrap())
                .num_minutes() as u32;
            let mut rec = rec.clone();
            rec.local = Some(LocalStamp { date: local_dt.date(), minute_of_day, dst_gap: gap });
            rec
        })
        .collect();
    PostTable {
        records,
        span: table.span,
        tz_rule: tz.id().to_string(),
        counters,
        rejects: table.rejects.clone(),
    }
}

/// Loads a `domain<TAB>category` map; keys are lowercased.
pub fn load_category_map(path: &Path) -> Result<CategoryMap, IngestError> {
    let file = std::fs::File::open(path)?;
    let mut map = CategoryMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (domain, token) = trimmed.split_once('\t').ok_or_else(|| IngestError::BadAuxLine {
            what: "category map",
            line: i + 1,
            reason: "expected domain<TAB>category".into(),
        })?;
        let category = ContentCategory::parse(token).ok_or_else(|| IngestError::BadAuxLine {
            what: "category map",
            line: i + 1,
            reason: format!("unknown category {token:?}"),
        })?;
        map.insert(domain.trim().to_ascii_lowercase(), category);
    }
    Ok(map)
}

/// Loads a one-user-per-line bot exclusion list.
pub fn load_bot_list(path: &Path) -> Result<BTreeSet<String>, IngestError> {
    let file = std::fs::File::open(path)?;
    let mut set = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            set.insert(trimmed.to_string());
        }
    }
    Ok(set)
}

/// Loads a `user<TAB>lat<TAB>lon` fallback coordinate file.
pub fn load_user_coords(path: &Path) -> Result<BTreeMap<String, (f64, f64)>, IngestError> {
    let file = std::fs::File::open(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = || IngestError::BadAuxLine {
            what: "coordinate file",
            line: i + 1,
            reason: "expected user<TAB>lat<TAB>lon".into(),
        };
        let mut parts = trimmed.split('\t');
        let user = parts.next().ok_or_else(bad)?;
        let lat: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let lon: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        map.insert(user.to_string(), (lat, lon));
    }
    Ok(map)
}

/// Builds a small localized table directly from (user, bin) pairs.
#[cfg(test)]
pub(crate) fn test_table(posts: &[(&str, usize)]) -> PostTable {
    let cat = posts.iter().map(|(u, b)| (*u, *b, ContentCategory::Other)).collect::<Vec<_>>();
    test_table_cat(&cat)
}

/// Builds a small localized table from (user, bin, category) triples.
#[cfg(test)]
pub(crate) fn test_table_cat(posts: &[(&str, usize, ContentCategory)]) -> PostTable {
    use std::collections::HashMap;
    let span = AnalysisSpan::new(
        NaiveDate::from_ymd_opt(2021, 6, 1).unwrap(),
        NaiveDate::from_ymd_opt(2021, 6, 30).unwrap(),
    );
    let mut seen: HashMap<(String, usize), u32> = HashMap::new();
    let mut records: Vec<PostRecord> = posts
        .iter()
        .map(|(user, bin, category)| {
            let k = seen.entry((user.to_string(), *bin)).or_insert(0);
            let jiggle = *k;
            *k += 1;
            assert!(jiggle < 15 * 60, "too many posts in one (user, bin)");
            let naive = NaiveDate::from_ymd_opt(2021, 6, 10)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap()
                + chrono::Duration::minutes(*bin as i64 * 15 + (jiggle / 60) as i64)
                + chrono::Duration::seconds((jiggle % 60) as i64);
            PostRecord {
                timestamp: Utc.from_utc_datetime(&naive),
                user: user.to_string(),
                kind: PostKind::Tweet,
                domain: None,
                category: Some(*category),
                lat: None,
                lon: None,
                local: None,
            }
        })
        .collect();
    let dups = PostTable::sort_and_dedup(&mut records);
    assert_eq!(dups, 0, "test fixture produced duplicate rows");
    let table = PostTable {
        records,
        span,
        tz_rule: "UTC".into(),
        counters: IngestCounters::default(),
        rejects: Vec::new(),
    };
    localize(&table, TzRule::Utc)
}

/// Duplicates every post with a different kind (so deduplication keeps
/// both copies). Used to test reweighting invariance.
#[cfg(test)]
pub(crate) fn double_posts_for_test(table: &PostTable) -> PostTable {
    let mut records = table.records().to_vec();
    for rec in table.records() {
        let mut copy = rec.clone();
        copy.kind = match rec.kind {
            PostKind::Tweet => PostKind::Reply,
            PostKind::Reply => PostKind::Retweet,
            PostKind::Retweet => PostKind::Tweet,
        };
        records.push(copy);
    }
    let dups = PostTable::sort_and_dedup(&mut records);
    assert_eq!(dups, 0, "doubling produced colliding rows");
    PostTable {
        records,
        span: table.span,
        tz_rule: table.tz_rule.clone(),
        counters: table.counters,
        rejects: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POSTS_TSV: &str = "ts\tuser\tkind\tdomain\tcategory\tlat\tlon\n\
        2020-05-01T10:00:00Z\talice\ttweet\texample.org\t\t41.9\t12.5\n\
        2020-05-01T10:00:00Z\talice\ttweet\texample.org\t\t41.9\t12.5\n\
        2020-05-02T23:59:00Z\tbob\treply\t\tpolitical\t\t\n\
        2020-05-03T00:00:00Z\tbob\tretweet\tNEWS.example.COM\t\t\t\n\
        2019-01-01T00:00:00Z\told\ttweet\t\t\t\t\n";

    fn span_2020() -> AnalysisSpan {
        AnalysisSpan::new(
            NaiveDate::from_ymd_opt(2020, 1, 22).unwrap(),
            NaiveDate::from_ymd_opt(2022, 8, 1).unwrap(),
        )
    }

    #[test]
    fn parse_dedups_and_counts() {
        let table =
            parse_posts(POSTS_TSV.as_bytes(), &Schema::default(), span_2020(), 0.5).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.counters.rows_read, 5);
        assert_eq!(table.counters.duplicates, 1);
        assert_eq!(table.counters.out_of_span, 1);
        assert_eq!(table.counters.rejected, 0);
        // sorted by user then timestamp
        let users: Vec<&str> = table.records().iter().map(|r| r.user.as_str()).collect();
        assert_eq!(users, vec!["alice", "bob", "bob"]);
    }

    #[test]
    fn parse_empty_stream() {
        let table = parse_posts(
            "ts\tuser\tkind\tdomain\n".as_bytes(),
            &Schema::default(),
            span_2020(),
            0.05,
        )
        .unwrap();
        assert!(table.is_empty());
        assert_eq!(table.counters, IngestCounters::default());
    }

    #[test]
    fn parse_rejects_bad_timestamp() {
        let tsv = "ts\tuser\tkind\n\
            2020-05-01T10:00:00Z\ta\ttweet\n\
            not-a-time\ta\ttweet\n\
            2020-05-01T11:00:00Z\ta\ttweet\n\
            2020-05-01T12:00:00Z\ta\treply\n\
            2020-05-01T13:00:00Z\tb\ttweet\n";
        let schema = Schema { domain: None, category: Some("category".into()), ..Schema::default() };
        let table = parse_posts(tsv.as_bytes(), &schema, span_2020(), 0.5).unwrap();
        assert_eq!(table.len(), 4);
        assert_eq!(table.counters.rejected, 1);
        assert_eq!(table.rejects.len(), 1);
        assert_eq!(table.rejects[0].line, 3);
    }

    #[test]
    fn parse_fails_above_reject_threshold() {
        let tsv = "ts\tuser\tkind\n\
            bad\ta\ttweet\n\
            2020-05-01T10:00:00Z\ta\ttweet\n";
        let schema = Schema { domain: None, ..Schema::default() };
        let err = parse_posts(tsv.as_bytes(), &schema, span_2020(), 0.05).unwrap_err();
        assert!(matches!(err, IngestError::TooManyRejects { rejected: 1, rows: 2, .. }));
    }

    #[test]
    fn parse_requires_named_columns() {
        let err = parse_posts(
            "time\twho\twhat\n".as_bytes(),
            &Schema::default(),
            span_2020(),
            0.05,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "ts"));
    }

    #[test]
    fn row_conservation() {
        let table =
            parse_posts(POSTS_TSV.as_bytes(), &Schema::default(), span_2020(), 0.5).unwrap();
        let c = table.counters;
        assert_eq!(
            c.rows_read,
            table.len() as u64 + c.duplicates + c.rejected + c.out_of_span + c.bots_removed
        );
    }

    #[test]
    fn mapping_assigns_categories() {
        let table =
            parse_posts(POSTS_TSV.as_bytes(), &Schema::default(), span_2020(), 0.5).unwrap();
        let mut map = CategoryMap::new();
        map.insert("news.example.com".into(), ContentCategory::FakeOrHoax);
        let mapped = map_and_filter(&table, &map, &BTreeSet::new());

        let by_user: BTreeMap<&str, Vec<ContentCategory>> =
            mapped.users().map(|(u, recs)| (u, recs.iter().map(|r| r.category.unwrap()).collect())).collect();
        // alice: unmapped domain -> Other
        assert_eq!(by_user["alice"], vec![ContentCategory::Other]);
        // bob: direct category kept, mapped domain (case-insensitive) applied
        assert!(by_user["bob"].contains(&ContentCategory::Political));
        assert!(by_user["bob"].contains(&ContentCategory::FakeOrHoax));
    }

    #[test]
    fn mapping_is_idempotent_and_removes_bots() {
        let table =
            parse_posts(POSTS_TSV.as_bytes(), &Schema::default(), span_2020(), 0.5).unwrap();
        let map = CategoryMap::new();
        let bots: BTreeSet<String> = ["bob".to_string()].into();
        let once = map_and_filter(&table, &map, &bots);
        assert_eq!(once.counters.bots_removed, 2);
        assert!(once.users().all(|(u, _)| u != "bob"));
        let twice = map_and_filter(&once, &map, &bots);
        assert_eq!(once.records(), twice.records());
        assert_eq!(once.counters, twice.counters);
        // category totality
        assert!(once.records().iter().all(|r| r.category.is_some()));
    }

    #[test]
    fn cet_winter_offset() {
        let table = parse_posts(
            "ts\tuser\tkind\tdomain\n2020-01-22T11:00:00Z\ta\ttweet\t\n".as_bytes(),
            &Schema::default(),
            span_2020(),
            0.05,
        )
        .unwrap();
        let local = localize(&table, TzRule::CetCest);
        let stamp = local.records()[0].local.as_ref().unwrap();
        assert_eq!(stamp.minute_of_day, 12 * 60);
        assert!(!stamp.dst_gap);
    }

    #[test]
    fn cest_summer_offset() {
        let table = parse_posts(
            "ts\tuser\tkind\tdomain\n2020-06-01T11:00:00Z\ta\ttweet\t\n".as_bytes(),
            &Schema::default(),
            span_2020(),
            0.05,
        )
        .unwrap();
        let local = localize(&table, TzRule::CetCest);
        let stamp = local.records()[0].local.as_ref().unwrap();
        assert_eq!(stamp.minute_of_day, 13 * 60);
    }

    #[test]
    fn dst_transition_gap_flagged() {
        // EU spring transition 2020: March 29, 01:00 UTC.
        let table = parse_posts(
            "ts\tuser\tkind\tdomain\n2020-03-29T01:30:00Z\ta\ttweet\t\n".as_bytes(),
            &Schema::default(),
            span_2020(),
            0.05,
        )
        .unwrap();
        let local = localize(&table, TzRule::CetCest);
        let stamp = local.records()[0].local.as_ref().unwrap();
        assert_eq!(stamp.minute_of_day, 3 * 60 + 30);
        assert!(stamp.dst_gap);
        assert_eq!(local.counters.dst_gap_flagged, 1);
    }

    #[test]
    fn eu_transition_dates() {
        assert_eq!(last_sunday(2020, 3), NaiveDate::from_ymd_opt(2020, 3, 29).unwrap());
        assert_eq!(last_sunday(2020, 10), NaiveDate::from_ymd_opt(2020, 10, 25).unwrap());
        assert_eq!(last_sunday(2021, 3), NaiveDate::from_ymd_opt(2021, 3, 28).unwrap());
        assert_eq!(last_sunday(2022, 10), NaiveDate::from_ymd_opt(2022, 10, 30).unwrap());
    }

    #[test]
    fn category_flags() {
        use ContentCategory::*;
        for c in ContentCategory::ALL {
            assert_eq!(
                c.is_disinformative(),
                matches!(c, Political | FakeOrHoax | ConspiracyJunkScience)
            );
            assert_eq!(ContentCategory::parse(c.as_str()), Some(c));
        }
        assert_eq!(ContentCategory::KNOWN.len(), 7);
        assert!(!ContentCategory::KNOWN.contains(&Other));
        assert_eq!(ContentCategory::DISINFORMATIVE.len(), 3);
    }
}
