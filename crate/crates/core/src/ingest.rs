//! Rating file parsers and the synthetic rating generator.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::data::{Dataset, IdMap, IdMaps, Interaction};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormatTag {
    MovieLens1M,
    ComodaCsv,
    GenericCsv,
}

impl FormatTag {
    pub fn name(self) -> &'static str {
        match self {
            FormatTag::MovieLens1M => "movielens-1m",
            FormatTag::ComodaCsv => "comoda-csv",
            FormatTag::GenericCsv => "generic-csv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "movielens-1m" => Some(FormatTag::MovieLens1M),
            "comoda-csv" => Some(FormatTag::ComodaCsv),
            "generic-csv" => Some(FormatTag::GenericCsv),
            _ => None,
        }
    }
}

/// Layout of a ratings file. Header rows are declared, never sniffed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFormat {
    pub tag: FormatTag,
    pub separator: String,
    pub user_column: usize,
    pub item_column: usize,
    pub rating_column: usize,
    pub header_rows: usize,
}

impl SourceFormat {
    /// `user::movie::rating::timestamp`, no header.
    pub fn movielens_1m() -> Self {
        Self {
            tag: FormatTag::MovieLens1M,
            separator: "::".into(),
            user_column: 0,
            item_column: 1,
            rating_column: 2,
            header_rows: 0,
        }
    }

    /// LDOS-CoMoDa export: comma separated with one header row. Only the
    /// leading user, item and rating columns are read.
    pub fn comoda_csv() -> Self {
        Self {
            tag: FormatTag::ComodaCsv,
            separator: ",".into(),
            user_column: 0,
            item_column: 1,
            rating_column: 2,
            header_rows: 1,
        }
    }

    pub fn generic_csv(
        separator: &str,
        columns: (usize, usize, usize),
        header_rows: usize,
    ) -> Self {
        Self {
            tag: FormatTag::GenericCsv,
            separator: separator.into(),
            user_column: columns.0,
            item_column: columns.1,
            rating_column: columns.2,
            header_rows,
        }
    }

    pub fn for_tag(tag: FormatTag) -> Self {
        match tag {
            FormatTag::MovieLens1M => Self::movielens_1m(),
            FormatTag::ComodaCsv => Self::comoda_csv(),
            FormatTag::GenericCsv => Self::generic_csv(",", (0, 1, 2), 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.separator.is_empty() {
            return Err(Error::InvalidInput("separator must be non-empty".into()));
        }
        let (u, i, r) = (self.user_column, self.item_column, self.rating_column);
        if u == i || u == r || i == r {
            return Err(Error::InvalidInput(format!(
                "column positions ({u}, {i}, {r}) must be distinct"
            )));
        }
        Ok(())
    }

    fn max_column(&self) -> usize {
        self.user_column
            .max(self.item_column)
            .max(self.rating_column)
    }
}

/// A parsed file together with the lines that did not make it in.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRatings {
    pub dataset: Dataset,
    /// Data lines read (header rows excluded).
    pub lines: usize,
    pub malformed: usize,
    /// Repeated `(user, item)` pairs; the last rating wins.
    pub duplicates: usize,
}

impl ParsedRatings {
    pub fn valid_records(&self) -> usize {
        self.lines - self.malformed
    }
}

pub fn parse_ratings_file(path: &Path, format: &SourceFormat) -> Result<ParsedRatings> {
    parse_ratings_file_head(path, format, None)
}

/// Like [`parse_ratings_file`] but stops after `max_lines` data lines.
pub fn parse_ratings_file_head(
    path: &Path,
    format: &SourceFormat,
    max_lines: Option<usize>,
) -> Result<ParsedRatings> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings_reader(BufReader::new(file), format, max_lines).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_ratings_reader<R: BufRead>(
    reader: R,
    format: &SourceFormat,
    max_lines: Option<usize>,
) -> Result<ParsedRatings> {
    format.validate()?;
    let mut maps = IdMaps::default();
    let mut interactions: Vec<Interaction> = Vec::new();
    let mut slot: HashMap<(usize, usize), usize> = HashMap::new();
    let (mut lines, mut malformed, mut duplicates) = (0usize, 0usize, 0usize);

    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if n < format.header_rows {
            continue;
        }
        if max_lines.is_some_and(|m| lines >= m) {
            break;
        }
        lines += 1;
        let Some((user, item, rating)) = split_record(&line, format) else {
            malformed += 1;
            continue;
        };
        let x = Interaction {
            user: maps.users.intern(user),
            item: maps.items.intern(item),
            rating,
        };
        match slot.get(&(x.user, x.item)) {
            Some(&at) => {
                interactions[at].rating = rating;
                duplicates += 1;
            }
            None => {
                slot.insert((x.user, x.item), interactions.len());
                interactions.push(x);
            }
        }
    }
    if interactions.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no valid records ({lines} lines, {malformed} malformed)"
        )));
    }
    Ok(ParsedRatings {
        dataset: Dataset::from_observed(interactions, maps)?,
        lines,
        malformed,
        duplicates,
    })
}

fn split_record<'a>(line: &'a str, format: &SourceFormat) -> Option<(&'a str, &'a str, f64)> {
    let line = line.trim_end_matches('\r');
    let fields: Vec<&str> = line
        .split(format.separator.as_str())
        .map(str::trim)
        .collect();
    if fields.len() <= format.max_column() {
        return None;
    }
    let user = fields[format.user_column];
    let item = fields[format.item_column];
    if user.is_empty() || item.is_empty() {
        return None;
    }
    let rating: f64 = fields[format.rating_column].parse().ok()?;
    if !rating.is_finite() || rating < 0.0 {
        return None;
    }
    Some((user, item, rating))
}

/// Rating level weights proportional to `level / r_max`, normalized.
pub fn zipf_level_weights(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.is_empty() {
        return Err(Error::InvalidInput(
            "rating_levels must be non-empty".into(),
        ));
    }
    if levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidInput("rating levels must be positive".into()));
    }
    let total: f64 = levels.iter().sum();
    Ok(levels.iter().map(|l| l / total).collect())
}

/// Draws `n_ratings` distinct cells uniformly and gives each a rating level
/// with probability proportional to the level's value.
pub fn generate_zipf_dataset(
    n_users: usize,
    n_items: usize,
    n_ratings: usize,
    rating_levels: &[f64],
    seed: u64,
) -> Result<Dataset> {
    let weights = zipf_level_weights(rating_levels)?;
    let cells = n_users
        .checked_mul(n_items)
        .ok_or_else(|| Error::InvalidInput("n_users * n_items overflows".into()))?;
    if n_ratings == 0 || n_ratings > cells {
        return Err(Error::InvalidInput(format!(
            "n_ratings {n_ratings} not in 1..={cells}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let picks = rand::seq::index::sample(&mut rng, cells, n_ratings);
    let level = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidInput(format!("rating weights: {e}")))?;
    let interactions: Vec<Interaction> = picks
        .into_iter()
        .map(|cell| Interaction {
            user: cell / n_items,
            item: cell % n_items,
            rating: rating_levels[level.sample(&mut rng)],
        })
        .collect();
    let maps = IdMaps {
        users: IdMap::identity(n_users),
        items: IdMap::identity(n_items),
    };
    let lo = rating_levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rating_levels
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Dataset::new(interactions, maps, lo.min(hi), hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str, format: &SourceFormat) -> Result<ParsedRatings> {
        parse_ratings_reader(Cursor::new(text), format, None)
    }

    #[test]
    fn movielens_line() {
        let p = parse("1::1193::5::978300760\n", &SourceFormat::movielens_1m()).unwrap();
        let x = p.dataset.interactions()[0];
        assert_eq!((x.user, x.item, x.rating), (0, 0, 5.0));
        assert_eq!(p.dataset.id_maps().users.original(0), Some("1"));
        assert_eq!(p.dataset.id_maps().items.original(0), Some("1193"));
    }

    #[test]
    fn generic_csv_line() {
        let f = SourceFormat::generic_csv(",", (0, 1, 2), 0);
        let p = parse("7,3,4.0\n", &f).unwrap();
        let x = p.dataset.interactions()[0];
        assert_eq!(x.rating, 4.0);
        assert_eq!(p.dataset.id_maps().users.index_of("7"), Some(x.user));
        assert_eq!(p.dataset.id_maps().items.index_of("3"), Some(x.item));
    }

    #[test]
    fn malformed_lines_are_counted() {
        let f = SourceFormat::generic_csv(",", (0, 1, 2), 0);
        let p = parse("1,1,3\n1,2\n2,1,4\nfoo,bar,baz\n3,3,5\n", &f).unwrap();
        assert_eq!(p.dataset.len(), 3);
        assert_eq!(p.malformed, 2);
        assert_eq!(p.valid_records() + p.malformed, p.lines);
    }

    #[test]
    fn comoda_header_and_context_columns() {
        let text = "userID,itemID,rating,age,sex\n15,2000,4,21,1\n15,2001,2,21,1\n";
        let p = parse(text, &SourceFormat::comoda_csv()).unwrap();
        assert_eq!(p.lines, 2);
        assert_eq!(p.dataset.len(), 2);
        assert_eq!(p.malformed, 0);
    }

    #[test]
    fn duplicates_keep_last() {
        let f = SourceFormat::generic_csv(",", (0, 1, 2), 0);
        let p = parse("1,1,3\n1,2,1\n1,1,5\n", &f).unwrap();
        assert_eq!(p.duplicates, 1);
        assert_eq!(p.dataset.len(), 2);
        assert_eq!(p.dataset.interactions()[0].rating, 5.0);
    }

    #[test]
    fn empty_and_unreadable() {
        let f = SourceFormat::movielens_1m();
        assert!(matches!(parse("junk\n", &f), Err(Error::EmptyDataset(_))));
        let missing = Path::new("/definitely/not/here.dat");
        assert!(matches!(
            parse_ratings_file(missing, &f),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn head_limit() {
        let f = SourceFormat::generic_csv(",", (0, 1, 2), 0);
        let p = parse_ratings_reader(Cursor::new("1,1,3\n1,2,4\n2,1,5\n"), &f, Some(2)).unwrap();
        assert_eq!(p.lines, 2);
        assert_eq!(p.dataset.len(), 2);
    }

    #[test]
    fn format_validation() {
        let f = SourceFormat::generic_csv("", (0, 1, 2), 0);
        assert!(f.validate().is_err());
        let f = SourceFormat::generic_csv(",", (0, 0, 2), 0);
        assert!(f.validate().is_err());
    }

    #[test]
    fn level_weights() {
        let w = zipf_level_weights(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((w[4] - 1.0 / 3.0).abs() < 1e-15);
        assert!(zipf_level_weights(&[]).is_err());
        assert!(zipf_level_weights(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn single_level() {
        let d = generate_zipf_dataset(10, 10, 50, &[5.0], 1).unwrap();
        assert!(d.interactions().iter().all(|x| x.rating == 5.0));
    }

    #[test]
    fn generator_feasibility_and_determinism() {
        assert!(generate_zipf_dataset(3, 3, 10, &[1.0], 0).is_err());
        let a = generate_zipf_dataset(20, 30, 100, &[1.0, 2.0, 3.0], 5).unwrap();
        let b = generate_zipf_dataset(20, 30, 100, &[1.0, 2.0, 3.0], 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.r_max(), 3.0);
        // a full matrix is feasible
        let full = generate_zipf_dataset(4, 5, 20, &[1.0, 2.0], 5).unwrap();
        assert_eq!(full.len(), 20);
    }
}
