//! Synthetic population generator for pipeline verification.
//!
//! Posting times come from circular von Mises mixtures, categories from
//! time-of-day dependent propensities. Every user draws from an own RNG
//! stream keyed by (population, user), so output is deterministic for a
//! given (spec, seed) regardless of generation order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    localize, AnalysisSpan, ContentCategory, PostKind, PostRecord, PostTable, TzRule,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("population {0:?}: {1}")]
    BadPopulation(String, String),
    #[error("spec has no populations")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One von Mises component of an activity mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    /// Peak hour of day in `[0, 24)`.
    pub peak_hour: f64,
    /// Concentration; 0 is uniform over the day.
    pub kappa: f64,
    /// Relative weight within the mixture.
    pub weight: f64,
}

/// Multiplies one category's propensity inside a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensityWindow {
    pub start_hour: f64,
    pub end_hour: f64,
    pub category: ContentCategory,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub name: String,
    pub size: usize,
    /// Posts per user drawn uniformly from this inclusive range.
    pub posts_per_user: (usize, usize),
    pub activity: Vec<MixtureComponent>,
    /// Base category propensities; normalized internally.
    pub category_weights: Vec<(ContentCategory, f64)>,
    #[serde(default)]
    pub windows: Vec<PropensityWindow>,
    /// Post-rate multiplier inside the lockdown period (1 = no shock).
    #[serde(default = "one")]
    pub lockdown_rate_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub populations: Vec<PopulationSpec>,
    #[serde(default = "default_span_start")]
    pub span_start: NaiveDate,
    #[serde(default = "default_span_end")]
    pub span_end: NaiveDate,
    #[serde(default = "default_lockdown")]
    pub lockdown: Option<(NaiveDate, NaiveDate)>,
}

fn default_span_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).unwrap()
}

fn default_span_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 8, 1).unwrap()
}

fn default_lockdown() -> Option<(NaiveDate, NaiveDate)> {
    Some((
        NaiveDate::from_ymd_opt(2020, 3, 9).unwrap(),
        NaiveDate::from_ymd_opt(2020, 5, 18).unwrap(),
    ))
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        toml::from_str(&text).map_err(|e| e.to_string())
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.populations.is_empty() {
            return Err(SynthError::Empty);
        }
        for p in &self.populations {
            let bad = |msg: &str| SynthError::BadPopulation(p.name.clone(), msg.to_string());
            if p.size == 0 {
                return Err(bad("size must be at least 1"));
            }
            if p.posts_per_user.0 == 0 || p.posts_per_user.0 > p.posts_per_user.1 {
                return Err(bad("posts_per_user range invalid"));
            }
            if p.activity.is_empty() || p.activity.iter().any(|c| c.weight <= 0.0 || c.kappa < 0.0) {
                return Err(bad("activity mixture invalid"));
            }
            let total: f64 = p.category_weights.iter().map(|(_, w)| w).sum();
            if p.category_weights.is_empty() || total <= 0.0 {
                return Err(bad("category weights must have positive mass"));
            }
            if p.category_weights.iter().any(|(_, w)| *w < 0.0) {
                return Err(bad("category weights must be non-negative"));
            }
            if p.windows.iter().any(|w| w.multiplier < 0.0) {
                return Err(bad("window multipliers must be non-negative"));
            }
            if p.lockdown_rate_multiplier <= 0.0 {
                return Err(bad("lockdown multiplier must be positive"));
            }
        }
        Ok(())
    }
}

/// Best-Fisher rejection sampling from a von Mises distribution centred
/// at 0; returns an angle in `(-pi, pi]`.
fn sample_von_mises(rng: &mut ChaCha8Rng, kappa: f64) -> f64 {
    use std::f64::consts::PI;
    if kappa < 1e-9 {
        return rng.gen_range(-PI..PI);
    }
    let a = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let b = (a - (2.0 * a).sqrt()) / (2.0 * kappa);
    let r = (1.0 + b * b) / (2.0 * b);
    loop {
        let u1: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.gen();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen();
            return if u3 > 0.5 { f.acos() } else { -f.acos() };
        }
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Deterministic synthetic posts plus the user-to-population ground truth.
pub fn generate(
    spec: &SynthSpec,
    seed: u64,
) -> Result<(Vec<PostRecord>, BTreeMap<String, String>), SynthError> {
    spec.validate()?;
    let span = AnalysisSpan::new(spec.span_start, spec.span_end);
    let n_days = span.days();

    // day weights carry the lockdown rate shock
    let lockdown_days: Option<(i64, i64)> = spec.lockdown.map(|(from, to)| {
        ((from - span.start).num_days(), (to - span.start).num_days())
    });

    let mut records = Vec::new();
    let mut truth = BTreeMap::new();
    for (pi, pop) in spec.populations.iter().enumerate() {
        let day_weights: Vec<f64> = (0..n_days)
            .map(|d| match lockdown_days {
                Some((lo, hi)) if d >= lo && d <= hi => pop.lockdown_rate_multiplier,
                _ => 1.0,
            })
            .collect();
        let mix_weights: Vec<f64> = pop.activity.iter().map(|c| c.weight).collect();
        let base_cats: Vec<ContentCategory> =
            pop.category_weights.iter().map(|(c, _)| *c).collect();
        let base_weights: Vec<f64> = pop.category_weights.iter().map(|(_, w)| *w).collect();

        for ui in 0..pop.size {
            let user = format!("{}_{ui:05}", pop.name);
            truth.insert(user.clone(), pop.name.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((pi as u64) << 32) | ui as u64);

            let n_posts = rng.gen_range(pop.posts_per_user.0..=pop.posts_per_user.1);
            for _ in 0..n_posts {
                let day = pick_weighted(&mut rng, &day_weights) as i64;
                let date = span.start + chrono::Duration::days(day);

                let comp = &pop.activity[pick_weighted(&mut rng, &mix_weights)];
                let angle = sample_von_mises(&mut rng, comp.kappa);
                let hour = (comp.peak_hour + angle * 24.0 / (2.0 * std::f64::consts::PI))
                    .rem_euclid(24.0);
                let secs = (hour * 3600.0) as u32;
                let local = date.and_hms_opt(0, 0, 0).unwrap()
                    + chrono::Duration::seconds(secs.min(86_399) as i64);

                let hour_of_day = hour;
                let mut weights = base_weights.clone();
                for w in &pop.windows {
                    if hour_in_window(hour_of_day, w.start_hour, w.end_hour) {
                        if let Some(i) = base_cats.iter().position(|c| *c == w.category) {
                            weights[i] *= w.multiplier;
                        }
                    }
                }
                let category = base_cats[pick_weighted(&mut rng, &weights)];

                let kind = match pick_weighted(&mut rng, &[0.7, 0.2, 0.1]) {
                    0 => PostKind::Tweet,
                    1 => PostKind::Retweet,
                    _ => PostKind::Reply,
                };

                records.push(PostRecord {
                    // local wall time re-read as UTC keeps the planted
                    // time-of-day structure exact under TzRule::Utc
                    timestamp: Utc.from_utc_datetime(&local),
                    user: user.clone(),
                    kind,
                    domain: None,
                    category: Some(category),
                    lat: None,
                    lon: None,
                    local: None,
                });
            }
        }
    }
    Ok((records, truth))
}

fn hour_in_window(hour: f64, start: f64, end: f64) -> bool {
    if start <= end {
        hour >= start && hour < end
    } else {
        hour >= start || hour < end
    }
}

/// Builds a localized table straight from generated records.
pub fn generate_table(
    spec: &SynthSpec,
    seed: u64,
) -> Result<(PostTable, BTreeMap<String, String>), SynthError> {
    let (records, truth) = generate(spec, seed)?;
    let table = assemble_table(records, AnalysisSpan::new(spec.span_start, spec.span_end));
    Ok((localize(&table, TzRule::Utc), truth))
}

/// Sorts, deduplicates and wraps records into an (unlocalized) table.
/// Mainly useful for tests that construct posts directly.
pub fn assemble_table(mut records: Vec<PostRecord>, span: AnalysisSpan) -> PostTable {
    let duplicates = PostTable::sort_and_dedup(&mut records);
    let counters = crate::ingest::IngestCounters {
        rows_read: records.len() as u64 + duplicates,
        duplicates,
        ..Default::default()
    };
    PostTable::from_parts(records, span, "UTC".into(), counters)
}

/// Writes generated posts as the standard TSV format.
pub fn write_posts_tsv(path: &Path, records: &[PostRecord]) -> Result<(), SynthError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "ts\tuser\tkind\tdomain\tcategory\tlat\tlon")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.timestamp.format("%Y-%m-%dT%H:%M:%SZ"),
            r.user,
            r.kind.as_str(),
            r.domain.as_deref().unwrap_or(""),
            r.category.map(|c| c.as_str()).unwrap_or(""),
            r.lat.map(|v| v.to_string()).unwrap_or_default(),
            r.lon.map(|v| v.to_string()).unwrap_or_default(),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the ground-truth labels as `user,population` CSV.
pub fn write_truth_csv(path: &Path, truth: &BTreeMap<String, String>) -> Result<(), SynthError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "user,population")?;
    for (user, pop) in truth {
        writeln!(out, "{user},{pop}")?;
    }
    out.flush()?;
    Ok(())
}

/// Three chronotype populations (morning, intermediate, evening peaks)
/// plus a low-volume casual one, each with a nocturnal surge in
/// disinformative propensity. Used by tests and the demo subcommand.
pub fn demo_spec(users_per_population: usize, posts: (usize, usize)) -> SynthSpec {
    use ContentCategory::*;
    let base = vec![
        (Science, 0.02),
        (MainstreamMedia, 0.55),
        (Satire, 0.01),
        (Clickbait, 0.02),
        (Other, 0.25),
        (Political, 0.08),
        (FakeOrHoax, 0.035),
        (ConspiracyJunkScience, 0.035),
    ];
    let night_surge = vec![
        PropensityWindow { start_hour: 2.5, end_hour: 4.25, category: Political, multiplier: 3.0 },
        PropensityWindow { start_hour: 2.5, end_hour: 4.25, category: FakeOrHoax, multiplier: 3.0 },
        PropensityWindow {
            start_hour: 2.5,
            end_hour: 4.25,
            category: ConspiracyJunkScience,
            multiplier: 3.0,
        },
        PropensityWindow { start_hour: 22.0, end_hour: 6.0, category: Political, multiplier: 1.6 },
        PropensityWindow { start_hour: 22.0, end_hour: 6.0, category: FakeOrHoax, multiplier: 1.6 },
        PropensityWindow {
            start_hour: 22.0,
            end_hour: 6.0,
            category: ConspiracyJunkScience,
            multiplier: 1.6,
        },
    ];
    let pop = |name: &str, peaks: Vec<MixtureComponent>, posts: (usize, usize), size| PopulationSpec {
        name: name.into(),
        size,
        posts_per_user: posts,
        activity: peaks,
        category_weights: base.clone(),
        windows: night_surge.clone(),
        lockdown_rate_multiplier: 1.4,
    };
    // each chronotype keeps a broad low-concentration component: real
    // activity curves bottom out around a tenth of their mean, not at zero
    SynthSpec {
        populations: vec![
            pop(
                "morning",
                vec![
                    MixtureComponent { peak_hour: 9.25, kappa: 6.0, weight: 0.65 },
                    MixtureComponent { peak_hour: 16.75, kappa: 3.0, weight: 0.17 },
                    MixtureComponent { peak_hour: 9.25, kappa: 0.2, weight: 0.18 },
                ],
                posts,
                users_per_population,
            ),
            pop(
                "intermediate",
                vec![
                    MixtureComponent { peak_hour: 12.0, kappa: 6.0, weight: 0.6 },
                    MixtureComponent { peak_hour: 18.25, kappa: 3.0, weight: 0.22 },
                    MixtureComponent { peak_hour: 12.0, kappa: 0.2, weight: 0.18 },
                ],
                posts,
                users_per_population,
            ),
            pop(
                "evening",
                vec![
                    MixtureComponent { peak_hour: 22.25, kappa: 6.0, weight: 0.65 },
                    MixtureComponent { peak_hour: 16.0, kappa: 3.0, weight: 0.17 },
                    MixtureComponent { peak_hour: 22.25, kappa: 0.2, weight: 0.18 },
                ],
                posts,
                users_per_population,
            ),
            pop(
                "casual",
                vec![MixtureComponent { peak_hour: 14.0, kappa: 0.4, weight: 1.0 }],
                (5, 40),
                users_per_population,
            ),
        ],
        span_start: default_span_start(),
        span_end: default_span_end(),
        lockdown: default_lockdown(),
    }
}
