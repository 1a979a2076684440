//! Loading the daily city-temperature archive.
//!
//! The archive is a CSV with the columns `Region, Country, State, City, Month,
//! Day, Year, AvgTemperature` (any order, case-insensitive). Missing readings are
//! encoded as `-99`. Region and State are read but never used as keys.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{month_end, Frequency, TimeSeries};

/// Value used by the archive for a missing reading.
pub const SENTINEL: f64 = -99.0;

fn is_sentinel(v: f64) -> bool {
    (v - SENTINEL).abs() < 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub region: String,
    pub country: String,
    pub state: Option<String>,
    pub city: String,
    pub date: NaiveDate,
    /// Degrees Fahrenheit; [`SENTINEL`] marks a missing reading.
    pub avg_temp: f64,
}

impl RawRecord {
    pub fn key(&self) -> CityKey {
        CityKey::new(&self.country, &self.city)
    }
}

/// (country, city) pair. Matching trims whitespace and ignores case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CityKey {
    pub country: String,
    pub city: String,
}

impl CityKey {
    pub fn new(country: &str, city: &str) -> Self {
        CityKey {
            country: country.trim().to_string(),
            city: city.trim().to_string(),
        }
    }

    fn norm(&self) -> (String, String) {
        (self.country.to_lowercase(), self.city.to_lowercase())
    }
}

impl PartialEq for CityKey {
    fn eq(&self, other: &Self) -> bool {
        self.norm() == other.norm()
    }
}

impl Eq for CityKey {}

impl std::hash::Hash for CityKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.norm().hash(state)
    }
}

impl std::str::FromStr for CityKey {
    type Err = Error;

    /// Parses `"Country/City"`.
    fn from_str(s: &str) -> Result<Self> {
        let (country, city) = s
            .split_once('/')
            .ok_or_else(|| Error::InvalidArgument(format!("city must be \"Country/City\", got {s:?}")))?;
        let key = CityKey::new(country, city);
        if key.country.is_empty() || key.city.is_empty() {
            return Err(Error::InvalidArgument(format!("empty country or city in {s:?}")));
        }
        Ok(key)
    }
}

impl std::fmt::Display for CityKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.country, self.city)
    }
}

/// A data row that could not be turned into a [`RawRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the source, header being line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParsedArchive {
    pub records: Vec<RawRecord>,
    pub rejections: Vec<Rejection>,
}

const COLUMNS: [&str; 8] = [
    "region",
    "country",
    "state",
    "city",
    "month",
    "day",
    "year",
    "avgtemperature",
];

/// Parses the archive. Rows with impossible dates or unparseable fields are
/// collected in the rejection report; a missing header column is fatal.
pub fn parse_archive<R: Read>(source: R) -> Result<ParsedArchive> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr.headers()?.clone();
    let index: HashMap<String, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect();
    let missing: Vec<&str> = COLUMNS.iter().copied().filter(|c| !index.contains_key(*c)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingHeader(missing.join(", ")));
    }
    let col = |name: &str| index[name];
    let (ci_region, ci_country, ci_state, ci_city) = (col("region"), col("country"), col("state"), col("city"));
    let (ci_month, ci_day, ci_year, ci_temp) = (col("month"), col("day"), col("year"), col("avgtemperature"));

    let mut out = ParsedArchive::default();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                out.rejections.push(Rejection {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let int = |i: usize, name: &str| {
            field(i)
                .parse::<i64>()
                .map_err(|_| format!("unparseable {name} {:?}", field(i)))
        };
        let parsed = (|| -> std::result::Result<RawRecord, String> {
            let month = int(ci_month, "month")?;
            let day = int(ci_day, "day")?;
            let year = int(ci_year, "year")?;
            let date = u32::try_from(month)
                .ok()
                .zip(u32::try_from(day).ok())
                .zip(i32::try_from(year).ok())
                .and_then(|((m, d), y)| NaiveDate::from_ymd_opt(y, m, d))
                .ok_or_else(|| format!("invalid date {year}-{month}-{day}"))?;
            let avg_temp: f64 = field(ci_temp)
                .parse()
                .map_err(|_| format!("unparseable temperature {:?}", field(ci_temp)))?;
            if !avg_temp.is_finite() {
                return Err(format!("non-finite temperature {avg_temp}"));
            }
            let country = field(ci_country).to_string();
            let city = field(ci_city).to_string();
            if country.is_empty() || city.is_empty() {
                return Err("empty country or city".into());
            }
            let state = Some(field(ci_state).to_string()).filter(|s| !s.is_empty());
            Ok(RawRecord {
                region: field(ci_region).to_string(),
                country,
                state,
                city,
                date,
                avg_temp,
            })
        })();
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejections.push(Rejection { line, reason }),
        }
    }
    Ok(out)
}

/// Replaces each sentinel with the previous reading of the same city; a leading
/// run of sentinels takes the first valid reading that follows it. Records must
/// be date-sorted within each city. Returns the repaired records and the number
/// of replacements.
pub fn impute_sentinels(records: &[RawRecord]) -> Result<(Vec<RawRecord>, usize)> {
    let mut out = records.to_vec();
    let mut groups: HashMap<CityKey, Vec<usize>> = HashMap::new();
    let mut order = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let key = r.key();
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(i);
    }
    let mut count = 0;
    for key in order {
        let idx = &groups[&key];
        let first_valid = idx
            .iter()
            .map(|&i| records[i].avg_temp)
            .find(|v| !is_sentinel(*v))
            .ok_or_else(|| Error::AllMissing(key.to_string()))?;
        let mut last = first_valid;
        for &i in idx {
            if is_sentinel(out[i].avg_temp) {
                out[i].avg_temp = last;
                count += 1;
            } else {
                last = out[i].avg_temp;
            }
        }
    }
    Ok((out, count))
}

/// Distinct city keys in order of first appearance.
pub fn cities(records: &[RawRecord]) -> Vec<CityKey> {
    let mut seen = std::collections::HashSet::new();
    records
        .iter()
        .map(RawRecord::key)
        .filter(|k| seen.insert(k.clone()))
        .collect()
}

/// Extracts one city's series. Monthly points are the mean of the month's daily
/// readings, stamped at month end.
pub fn to_series(records: &[RawRecord], key: &CityKey, frequency: Frequency) -> Result<TimeSeries> {
    let mut rows: Vec<(NaiveDate, f64)> = records
        .iter()
        .filter(|r| &r.key() == key)
        .map(|r| (r.date, r.avg_temp))
        .collect();
    if rows.is_empty() {
        return Err(Error::UnknownCity(key.to_string()));
    }
    rows.sort_by_key(|r| r.0);
    let mut dups: Vec<NaiveDate> = rows.windows(2).filter(|w| w[0].0 == w[1].0).map(|w| w[0].0).collect();
    if !dups.is_empty() {
        dups.dedup();
        return Err(Error::DuplicateDates(dups));
    }
    match frequency {
        Frequency::Daily => {
            let (dates, values) = rows.into_iter().unzip();
            TimeSeries::new(dates, values, Frequency::Daily)
        }
        Frequency::Monthly => {
            let mut months: BTreeMap<(i32, u32), (f64, usize)> = BTreeMap::new();
            for (d, v) in rows {
                let e = months.entry((d.year(), d.month())).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
            let (dates, values) = months
                .into_iter()
                .map(|((y, m), (sum, n))| (month_end(y, m), sum / n as f64))
                .unzip();
            TimeSeries::new(dates, values, Frequency::Monthly)
        }
    }
}

/// Parse, impute and extract in one go.
#[derive(Debug, Clone)]
pub struct LoadedCity {
    pub series: TimeSeries,
    pub imputed: usize,
    pub rejections: Vec<Rejection>,
}

pub fn load_city<R: Read>(source: R, key: &CityKey, frequency: Frequency) -> Result<LoadedCity> {
    let parsed = parse_archive(source)?;
    let city_rows: Vec<RawRecord> = parsed.records.into_iter().filter(|r| &r.key() == key).collect();
    if city_rows.is_empty() {
        return Err(Error::UnknownCity(key.to_string()));
    }
    let mut sorted = city_rows;
    sorted.sort_by_key(|r| r.date);
    let (clean, imputed) = impute_sentinels(&sorted)?;
    Ok(LoadedCity {
        series: to_series(&clean, key, frequency)?,
        imputed,
        rejections: parsed.rejections,
    })
}

pub fn load_city_path(path: &std::path::Path, key: &CityKey, frequency: Frequency) -> Result<LoadedCity> {
    load_city(std::fs::File::open(path)?, key, frequency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "Region,Country,State,City,Month,Day,Year,AvgTemperature\n";

    fn rec(city: &str, day: u32, temp: f64) -> RawRecord {
        RawRecord {
            region: "Africa".into(),
            country: "Algeria".into(),
            state: None,
            city: city.into(),
            date: NaiveDate::from_ymd_opt(1995, 1, day).unwrap(),
            avg_temp: temp,
        }
    }

    fn temps(rs: &[RawRecord]) -> Vec<f64> {
        rs.iter().map(|r| r.avg_temp).collect()
    }

    #[test]
    fn parses_archive_row() {
        let src = format!("{HEADER}Africa,Algeria,,Algiers,1,1,1995,64.2\n");
        let parsed = parse_archive(src.as_bytes()).unwrap();
        assert!(parsed.rejections.is_empty());
        let r = &parsed.records[0];
        assert_eq!(r.city, "Algiers");
        assert_eq!(r.country, "Algeria");
        assert_eq!(r.state, None);
        assert_eq!(r.date, NaiveDate::from_ymd_opt(1995, 1, 1).unwrap());
        assert_eq!(r.avg_temp, 64.2);
    }

    #[test]
    fn header_only_is_empty() {
        let parsed = parse_archive(HEADER.as_bytes()).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parsed.rejections.is_empty());
    }

    #[test]
    fn header_order_and_case_insensitive() {
        let src = "avgtemperature,CITY,country,state,region,year,day,month\n50.5,Algiers,Algeria,,Africa,1995,3,2\n";
        let parsed = parse_archive(src.as_bytes()).unwrap();
        assert_eq!(parsed.records[0].date, NaiveDate::from_ymd_opt(1995, 2, 3).unwrap());
        assert_eq!(parsed.records[0].avg_temp, 50.5);
    }

    #[test]
    fn missing_header_is_fatal() {
        let err = parse_archive("Region,Country,City,Month,Day,Year\n".as_bytes()).unwrap_err();
        match err {
            Error::MissingHeader(cols) => {
                assert!(cols.contains("state"));
                assert!(cols.contains("avgtemperature"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn invalid_date_is_rejected_with_line() {
        let src = format!(
            "{HEADER}Africa,Algeria,,Algiers,1,1,1995,64.2\nAfrica,Algeria,,Algiers,2,30,1995,50.0\nAfrica,Algeria,,Algiers,x,1,1995,50.0\n"
        );
        let parsed = parse_archive(src.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.rejections.len(), 2);
        assert_eq!(parsed.rejections[0].line, 3);
        assert!(parsed.rejections[0].reason.contains("invalid date"));
        assert_eq!(parsed.rejections[1].line, 4);
    }

    #[test]
    fn imputation_examples() {
        let (out, n) = impute_sentinels(&[rec("A", 1, 64.2), rec("A", 2, -99.0), rec("A", 3, 48.8)]).unwrap();
        assert_eq!(temps(&out), vec![64.2, 64.2, 48.8]);
        assert_eq!(n, 1);
        let (out, n) = impute_sentinels(&[rec("A", 1, -99.0), rec("A", 2, 50.0)]).unwrap();
        assert_eq!(temps(&out), vec![50.0, 50.0]);
        assert_eq!(n, 1);
        let (out, n) = impute_sentinels(&[rec("A", 1, 10.0), rec("A", 2, 20.0)]).unwrap();
        assert_eq!(temps(&out), vec![10.0, 20.0]);
        assert_eq!(n, 0);
    }

    #[test]
    fn imputation_respects_city_boundaries() {
        let rows = [rec("A", 1, 30.0), rec("B", 1, -99.0), rec("A", 2, -99.0), rec("B", 2, 70.0)];
        let (out, n) = impute_sentinels(&rows).unwrap();
        assert_eq!(temps(&out), vec![30.0, 70.0, 30.0, 70.0]);
        assert_eq!(n, 2);
    }

    #[test]
    fn all_missing_city_errors() {
        let err = impute_sentinels(&[rec("A", 1, 5.0), rec("Ghost", 1, -99.0), rec("Ghost", 2, -99.0)]).unwrap_err();
        assert!(matches!(err, Error::AllMissing(ref c) if c.contains("Ghost")));
    }

    #[test]
    fn daily_series_from_archive_rows() {
        let rows: Vec<RawRecord> = [64.2, 49.4, 48.8, 46.4, 47.9]
            .iter()
            .enumerate()
            .map(|(i, &t)| rec("Algiers", i as u32 + 1, t))
            .collect();
        let key: CityKey = " algeria / ALGIERS ".parse().unwrap();
        let s = to_series(&rows, &key, Frequency::Daily).unwrap();
        assert_eq!(s.values(), &[64.2, 49.4, 48.8, 46.4, 47.9]);
        assert_eq!(s.first_date(), NaiveDate::from_ymd_opt(1995, 1, 1).unwrap());
    }

    #[test]
    fn monthly_aggregation() {
        let single = to_series(&[rec("A", 7, 42.5)], &CityKey::new("Algeria", "A"), Frequency::Monthly).unwrap();
        assert_eq!(single.values(), &[42.5]);
        let full: Vec<RawRecord> = (1..=31).map(|d| rec("A", d, 50.0)).collect();
        let m = to_series(&full, &CityKey::new("Algeria", "A"), Frequency::Monthly).unwrap();
        assert_eq!(m.dates(), &[NaiveDate::from_ymd_opt(1995, 1, 31).unwrap()]);
        assert_eq!(m.values(), &[50.0]);
    }

    #[test]
    fn to_series_errors() {
        let rows = [rec("A", 1, 1.0), rec("A", 1, 2.0)];
        assert!(matches!(
            to_series(&rows, &CityKey::new("Algeria", "A"), Frequency::Daily),
            Err(Error::DuplicateDates(_))
        ));
        assert!(matches!(
            to_series(&rows, &CityKey::new("Algeria", "Oran"), Frequency::Daily),
            Err(Error::UnknownCity(_))
        ));
    }

    fn arb_temps() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(-99.0), (-30.0f64..110.0)], 1..60)
    }

    proptest! {
        #[test]
        fn imputation_idempotent_and_complete(ts in arb_temps()) {
            let rows: Vec<RawRecord> = ts.iter().enumerate().map(|(i, &t)| RawRecord {
                date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Days::new(i as u64),
                ..rec("A", 1, t)
            }).collect();
            match impute_sentinels(&rows) {
                Ok((once, _)) => {
                    prop_assert!(once.iter().all(|r| !is_sentinel(r.avg_temp)));
                    let (twice, n) = impute_sentinels(&once).unwrap();
                    prop_assert_eq!(n, 0);
                    prop_assert_eq!(twice, once);
                }
                Err(_) => prop_assert!(ts.iter().all(|&t| is_sentinel(t))),
            }
        }

        #[test]
        fn monthly_length_is_distinct_months(days in proptest::collection::btree_set(0u64..2000, 1..200)) {
            let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
            let rows: Vec<RawRecord> = days.iter().map(|&d| RawRecord { date: start + chrono::Days::new(d), ..rec("A", 1, 1.0) }).collect();
            let months: std::collections::HashSet<(i32, u32)> = rows.iter().map(|r| (r.date.year(), r.date.month())).collect();
            let s = to_series(&rows, &CityKey::new("Algeria", "A"), Frequency::Monthly).unwrap();
            prop_assert_eq!(s.len(), months.len());
        }
    }
}
