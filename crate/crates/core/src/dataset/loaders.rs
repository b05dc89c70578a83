//! Native dataset readers and the normalized on-disk format.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{DatasetError, ItemRecord, Loaded, NormalizedDataset, RawInteraction, STARS_ATTR};

const RATING_SCALE: (f64, f64) = (1.0, 5.0);

const ML100K_GENRES: [&str; 19] = [
    "unknown",
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

pub const INTERACTIONS_FILE: &str = "interactions.jsonl";
pub const ITEMS_FILE: &str = "items.jsonl";

fn check_rating(path: &Path, line: usize, rating: f64) -> Result<f64, DatasetError> {
    if rating.is_finite() && (RATING_SCALE.0..=RATING_SCALE.1).contains(&rating) {
        Ok(rating)
    } else {
        Err(DatasetError::malformed(
            path,
            line,
            format!("rating {rating} outside [1, 5]"),
        ))
    }
}

fn check_id(path: &Path, line: usize, what: &str, id: i64) -> Result<u32, DatasetError> {
    u32::try_from(id)
        .ok()
        .filter(|&v| v >= 1)
        .ok_or_else(|| DatasetError::malformed(path, line, format!("{what} id {id} is not a positive integer")))
}

fn open(path: &Path) -> Result<BufReader<File>, DatasetError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| DatasetError::io(path, e))
}

/// Calls `f` with (1-based line number, record) for each non-blank JSON line.
fn for_each_json_line<T, F>(path: &Path, mut f: F) -> Result<(), DatasetError>
where
    T: DeserializeOwned,
    F: FnMut(usize, T) -> Result<(), DatasetError>,
{
    let reader = open(path)?;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T =
            serde_json::from_str(&line).map_err(|e| DatasetError::malformed(path, lineno, e.to_string()))?;
        f(lineno, record)?;
    }
    Ok(())
}

fn first_existing(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

fn require(dir: &Path, names: &[&str]) -> Result<PathBuf, DatasetError> {
    first_existing(dir, names).ok_or_else(|| {
        DatasetError::io(
            &dir.join(names[0]),
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("expected one of {names:?}")),
        )
    })
}

/// Assigns dense positive ids to string keys in order of first appearance.
#[derive(Default)]
struct IdMap(HashMap<String, u32>);

impl IdMap {
    fn id(&mut self, key: &str) -> u32 {
        let next = self.0.len() as u32 + 1;
        *self.0.entry(key.to_string()).or_insert(next)
    }

    fn get(&self, key: &str) -> Option<u32> {
        self.0.get(key).copied()
    }
}

fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

pub(crate) fn load_ml100k(source: &Path) -> Result<Loaded, DatasetError> {
    let dir = if source.is_file() {
        source.parent().unwrap_or(Path::new("."))
    } else {
        source
    };
    let data_path = dir.join("u.data");
    let item_path = dir.join("u.item");

    let mut interactions = Vec::with_capacity(100_000);
    let reader = open(&data_path)?;
    for (idx, line) in reader.split(b'\n').enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DatasetError::io(&data_path, e))?;
        let line = latin1(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(DatasetError::malformed(
                &data_path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<i64, DatasetError> {
            fields[i]
                .parse::<i64>()
                .map_err(|e| DatasetError::malformed(&data_path, lineno, format!("field {}: {e}", i + 1)))
        };
        let rating = fields[2]
            .parse::<f64>()
            .map_err(|e| DatasetError::malformed(&data_path, lineno, format!("rating: {e}")))?;
        interactions.push(RawInteraction {
            user_id: check_id(&data_path, lineno, "user", num(0)?)?,
            item_id: check_id(&data_path, lineno, "item", num(1)?)?,
            rating: check_rating(&data_path, lineno, rating)?,
            timestamp: num(3)?,
        });
    }

    let mut catalog = BTreeMap::new();
    let bytes = fs::read(&item_path).map_err(|e| DatasetError::io(&item_path, e))?;
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let lineno = idx + 1;
        let line = latin1(raw);
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() < 5 {
            return Err(DatasetError::malformed(
                &item_path,
                lineno,
                "expected id|title|release|video release|url|genre flags",
            ));
        }
        let id = fields[0]
            .trim()
            .parse::<i64>()
            .map_err(|e| DatasetError::malformed(&item_path, lineno, format!("item id: {e}")))?;
        let mut record = ItemRecord::new(check_id(&item_path, lineno, "item", id)?);
        let genres: Vec<&str> = fields[5..]
            .iter()
            .zip(ML100K_GENRES)
            .filter(|(flag, _)| flag.trim() == "1")
            .map(|(_, g)| g)
            .collect();
        for (key, value) in [
            ("title", fields[1].to_string()),
            ("release_date", fields[2].to_string()),
            ("imdb_url", fields[4].to_string()),
            ("category", genres.join(", ")),
        ] {
            if !value.trim().is_empty() {
                record.attributes.insert(key.to_string(), value);
            }
        }
        catalog.insert(record.item_id, record);
    }

    Ok(Loaded { interactions, catalog })
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct AmazonReview {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    overall: f64,
    unix_review_time: i64,
}

#[derive(Deserialize)]
struct AmazonMeta {
    asin: String,
    #[serde(default)]
    title: Option<serde_json::Value>,
    #[serde(default)]
    brand: Option<serde_json::Value>,
    #[serde(default)]
    rank: Option<serde_json::Value>,
    #[serde(default)]
    description: Option<serde_json::Value>,
    #[serde(default)]
    category: Option<serde_json::Value>,
}

/// Flattens the string-or-list values the Amazon metadata dumps use.
fn text_of(value: &Option<serde_json::Value>, sep: &str) -> String {
    match value {
        Some(serde_json::Value::String(s)) => s.trim().to_string(),
        Some(serde_json::Value::Array(xs)) => xs
            .iter()
            .filter_map(|x| x.as_str())
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .collect::<Vec<_>>()
            .join(sep),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => String::new(),
    }
}

pub(crate) fn load_beauty(source: &Path) -> Result<Loaded, DatasetError> {
    let (reviews_path, meta_path) = if source.is_file() {
        (source.to_path_buf(), None)
    } else {
        (
            require(
                source,
                &[
                    "reviews.jsonl",
                    "reviews.json",
                    "Beauty.json",
                    "All_Beauty.json",
                    "Beauty_5.json",
                ],
            )?,
            first_existing(
                source,
                &["meta.jsonl", "meta.json", "meta_Beauty.json", "meta_All_Beauty.json"],
            ),
        )
    };

    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut interactions = Vec::new();
    for_each_json_line(&reviews_path, |lineno, r: AmazonReview| {
        interactions.push(RawInteraction {
            user_id: users.id(&r.reviewer_id),
            item_id: items.id(&r.asin),
            rating: check_rating(&reviews_path, lineno, r.overall)?,
            timestamp: r.unix_review_time,
        });
        Ok(())
    })?;

    let mut catalog = BTreeMap::new();
    if let Some(meta_path) = meta_path {
        for_each_json_line(&meta_path, |_, m: AmazonMeta| {
            // Products nobody reviewed stay outside the item universe.
            let Some(item_id) = items.get(&m.asin) else {
                return Ok(());
            };
            let mut record = ItemRecord::new(item_id);
            for (key, value) in [
                ("title", text_of(&m.title, " ")),
                ("brand", text_of(&m.brand, " ")),
                ("rank", text_of(&m.rank, " ")),
                ("description", text_of(&m.description, " ")),
                ("category", text_of(&m.category, ", ")),
            ] {
                if !value.is_empty() {
                    record.attributes.insert(key.to_string(), value);
                }
            }
            catalog.insert(item_id, record);
            Ok(())
        })?;
    }
    Ok(Loaded { interactions, catalog })
}

#[derive(Deserialize)]
struct YelpReview {
    user_id: String,
    business_id: String,
    stars: f64,
    date: String,
}

#[derive(Deserialize)]
struct YelpBusiness {
    business_id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    stars: Option<f64>,
    #[serde(default)]
    categories: Option<serde_json::Value>,
}

fn parse_yelp_date(path: &Path, line: usize, date: &str) -> Result<i64, DatasetError> {
    let date = date.trim();
    chrono::NaiveDateTime::parse_from_str(date, "%Y-%m-%d %H:%M:%S")
        .or_else(|_| {
            chrono::NaiveDate::parse_from_str(date, "%Y-%m-%d")
                .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight is valid"))
        })
        .map(|dt| dt.and_utc().timestamp())
        .map_err(|e| DatasetError::malformed(path, line, format!("date `{date}`: {e}")))
}

pub(crate) fn load_yelp(source: &Path) -> Result<Loaded, DatasetError> {
    let (review_path, business_path) = if source.is_file() {
        (source.to_path_buf(), None)
    } else {
        (
            require(
                source,
                &["yelp_academic_dataset_review.json", "review.json", "review.jsonl"],
            )?,
            first_existing(
                source,
                &["yelp_academic_dataset_business.json", "business.json", "business.jsonl"],
            ),
        )
    };

    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut interactions = Vec::new();
    for_each_json_line(&review_path, |lineno, r: YelpReview| {
        interactions.push(RawInteraction {
            user_id: users.id(&r.user_id),
            item_id: items.id(&r.business_id),
            rating: check_rating(&review_path, lineno, r.stars)?,
            timestamp: parse_yelp_date(&review_path, lineno, &r.date)?,
        });
        Ok(())
    })?;

    let mut catalog = BTreeMap::new();
    if let Some(business_path) = business_path {
        for_each_json_line(&business_path, |_, b: YelpBusiness| {
            let Some(item_id) = items.get(&b.business_id) else {
                return Ok(());
            };
            let mut record = ItemRecord::new(item_id);
            if let Some(name) = b.name.filter(|n| !n.trim().is_empty()) {
                record.attributes.insert("title".into(), name);
            }
            if let Some(stars) = b.stars.filter(|s| s.is_finite()) {
                record.attributes.insert(STARS_ATTR.into(), stars.to_string());
            }
            let categories = text_of(&b.categories, ", ");
            if !categories.is_empty() {
                record.attributes.insert("category".into(), categories);
            }
            catalog.insert(item_id, record);
            Ok(())
        })?;
    }
    Ok(Loaded { interactions, catalog })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractionLine {
    user: i64,
    item: i64,
    rating: f64,
    ts: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemLine {
    item: i64,
    attrs: IndexMap<String, String>,
}

pub(crate) fn load_normalized(source: &Path) -> Result<Loaded, DatasetError> {
    let dir = if source.is_file() {
        source.parent().unwrap_or(Path::new("."))
    } else {
        source
    };
    let (interactions, catalog) = read_normalized(dir)?;
    Ok(Loaded {
        interactions,
        catalog: catalog.into_iter().map(|r| (r.item_id, r)).collect(),
    })
}

/// Reads `interactions.jsonl` and (if present) `items.jsonl` from `dir`.
pub fn read_normalized(dir: &Path) -> Result<(Vec<RawInteraction>, Vec<ItemRecord>), DatasetError> {
    let inter_path = dir.join(INTERACTIONS_FILE);
    let mut interactions = Vec::new();
    for_each_json_line(&inter_path, |lineno, l: InteractionLine| {
        interactions.push(RawInteraction {
            user_id: check_id(&inter_path, lineno, "user", l.user)?,
            item_id: check_id(&inter_path, lineno, "item", l.item)?,
            rating: check_rating(&inter_path, lineno, l.rating)?,
            timestamp: l.ts,
        });
        Ok(())
    })?;

    let items_path = dir.join(ITEMS_FILE);
    let mut catalog: BTreeMap<u32, ItemRecord> = BTreeMap::new();
    if items_path.is_file() {
        for_each_json_line(&items_path, |lineno, l: ItemLine| {
            let item_id = check_id(&items_path, lineno, "item", l.item)?;
            if catalog.contains_key(&item_id) {
                return Err(DatasetError::malformed(
                    &items_path,
                    lineno,
                    format!("duplicate catalog entry for item {item_id}"),
                ));
            }
            catalog.insert(
                item_id,
                ItemRecord {
                    item_id,
                    attributes: l.attrs,
                },
            );
            Ok(())
        })?;
    }
    Ok((interactions, catalog.into_values().collect()))
}

/// Writes the dataset in the normalized interchange format (UTF-8, LF).
pub fn write_normalized(dataset: &NormalizedDataset, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;

    let inter_path = dir.join(INTERACTIONS_FILE);
    let file = File::create(&inter_path).map_err(|e| DatasetError::io(&inter_path, e))?;
    let mut out = BufWriter::new(file);
    for it in &dataset.interactions {
        let line = InteractionLine {
            user: it.user_id.into(),
            item: it.item_id.into(),
            rating: it.rating,
            ts: it.timestamp,
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| DatasetError::io(&inter_path, e.into()))?;
        out.write_all(b"\n").map_err(|e| DatasetError::io(&inter_path, e))?;
    }
    out.flush().map_err(|e| DatasetError::io(&inter_path, e))?;

    let items_path = dir.join(ITEMS_FILE);
    let file = File::create(&items_path).map_err(|e| DatasetError::io(&items_path, e))?;
    let mut out = BufWriter::new(file);
    for record in &dataset.catalog {
        let line = ItemLine {
            item: record.item_id.into(),
            attrs: record.attributes.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| DatasetError::io(&items_path, e.into()))?;
        out.write_all(b"\n").map_err(|e| DatasetError::io(&items_path, e))?;
    }
    out.flush().map_err(|e| DatasetError::io(&items_path, e))
}
