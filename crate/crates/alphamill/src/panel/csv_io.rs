//! CSV ingestion. Two layouts are supported:
//!
//! - `long`: header `date,symbol,field,value`, one observation per row;
//! - `wide_ohlcv`: header `date,symbol,open,high,low,close,volume`, one
//!   row per (date, symbol) carrying five fields.
//!
//! The calendar is the union of observed dates and the symbol list the
//! union of observed symbols, both sorted. Absent cells stay missing —
//! ingest never fills. A `returns` field is derived whenever `close`
//! exists. Empty value strings in the wide layout mark the cell missing;
//! anything else unparsable is a malformed row.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{derive_returns, Date, PanelError, PanelField, PanelSet, TradingCalendar};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvLayout {
    Long,
    WideOhlcv,
}

struct Obs {
    date: Date,
    symbol: String,
    field: String,
    value: f64,
}

pub fn ingest_csv(path: &Path, layout: CsvLayout) -> Result<PanelSet, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut observations: Vec<Obs> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let record = record?;
        match layout {
            CsvLayout::Long => {
                if record.len() != 4 {
                    return Err(PanelError::MalformedRow {
                        line,
                        reason: format!("expected 4 columns, got {}", record.len()),
                    });
                }
                let date = parse_date(&record[0], line)?;
                let value = parse_value(&record[3], line)?.ok_or(PanelError::MalformedRow {
                    line,
                    reason: "empty value".to_string(),
                })?;
                observations.push(Obs {
                    date,
                    symbol: record[1].to_string(),
                    field: record[2].to_string(),
                    value,
                });
            }
            CsvLayout::WideOhlcv => {
                if record.len() != 7 {
                    return Err(PanelError::MalformedRow {
                        line,
                        reason: format!("expected 7 columns, got {}", record.len()),
                    });
                }
                let date = parse_date(&record[0], line)?;
                let symbol = record[1].to_string();
                for (col, field) in ["open", "high", "low", "close", "volume"]
                    .iter()
                    .enumerate()
                {
                    if let Some(value) = parse_value(&record[col + 2], line)? {
                        observations.push(Obs {
                            date,
                            symbol: symbol.clone(),
                            field: field.to_string(),
                            value,
                        });
                    }
                }
            }
        }
    }
    if observations.is_empty() {
        return Err(PanelError::EmptyInput);
    }
    build_panel(observations)
}

fn parse_date(raw: &str, line: usize) -> Result<Date, PanelError> {
    raw.parse().map_err(|_| PanelError::MalformedRow {
        line,
        reason: format!("bad date `{raw}`"),
    })
}

/// None for an empty cell (missing), Some for a finite number.
fn parse_value(raw: &str, line: usize) -> Result<Option<f64>, PanelError> {
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| PanelError::MalformedRow {
        line,
        reason: format!("bad value `{raw}`"),
    })?;
    if !v.is_finite() {
        return Err(PanelError::MalformedRow {
            line,
            reason: format!("non-finite value `{raw}`"),
        });
    }
    Ok(Some(v))
}

fn build_panel(observations: Vec<Obs>) -> Result<PanelSet, PanelError> {
    let dates: BTreeSet<Date> = observations.iter().map(|o| o.date).collect();
    let symbols: BTreeSet<String> = observations.iter().map(|o| o.symbol.clone()).collect();
    let field_names: BTreeSet<String> = observations.iter().map(|o| o.field.clone()).collect();

    let dates: Vec<Date> = dates.into_iter().collect();
    let symbols: Vec<String> = symbols.into_iter().collect();
    let date_idx: BTreeMap<Date, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let sym_idx: BTreeMap<&str, usize> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut fields: BTreeMap<String, PanelField> = field_names
        .into_iter()
        .map(|name| {
            let values = Matrix::missing(dates.len(), symbols.len());
            (name.clone(), PanelField { name, values })
        })
        .collect();

    for obs in observations {
        let t = date_idx[&obs.date];
        let i = sym_idx[obs.symbol.as_str()];
        let field = fields.get_mut(&obs.field).expect("field pre-registered");
        if !crate::matrix::is_missing(field.values.get(t, i)) {
            return Err(PanelError::DuplicateRecord {
                date: obs.date.to_string(),
                symbol: obs.symbol,
                field: obs.field,
            });
        }
        field.values.set(t, i, obs.value);
    }

    if let Some(close) = fields.get("close") {
        let returns = derive_returns(&close.values);
        fields.insert(
            "returns".to_string(),
            PanelField {
                name: "returns".to_string(),
                values: returns,
            },
        );
    }

    Ok(PanelSet::new(
        TradingCalendar::new(dates),
        symbols,
        fields,
        None,
    ))
}

/// Optional `symbol,group` CSV mapping symbols to group labels.
pub fn load_groups(path: &Path) -> Result<BTreeMap<String, String>, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut groups = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(PanelError::MalformedRow {
                line: idx + 2,
                reason: format!("expected 2 columns, got {}", record.len()),
            });
        }
        groups.insert(record[0].to_string(), record[1].to_string());
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::is_missing;
    use std::io::Write;

    fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("alphamill_{}_{}", std::process::id(), name));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn long_layout_builds_aligned_matrix() {
        let path = write_temp(
            "long.csv",
            "date,symbol,field,value\n\
             2020-01-01,A,close,10\n\
             2020-01-02,A,close,11\n\
             2020-01-01,B,close,5\n",
        );
        let panel = ingest_csv(&path, CsvLayout::Long).unwrap();
        assert_eq!(panel.n_dates(), 2);
        assert_eq!(panel.symbols(), ["A", "B"]);
        let close = &panel.get_field("close").unwrap().values;
        assert_eq!(close.get(0, 0), 10.0);
        assert_eq!(close.get(1, 0), 11.0);
        assert_eq!(close.get(0, 1), 5.0);
        assert!(is_missing(close.get(1, 1)));
        // returns derived from close
        let ret = &panel.get_field("returns").unwrap().values;
        assert!((ret.get(1, 0) - 0.1).abs() < 1e-12);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn duplicate_record_rejected() {
        let path = write_temp(
            "dup.csv",
            "date,symbol,field,value\n\
             2020-01-01,A,close,10\n\
             2020-01-01,A,close,11\n",
        );
        let err = ingest_csv(&path, CsvLayout::Long).unwrap_err();
        assert!(matches!(err, PanelError::DuplicateRecord { .. }));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn rows_out_of_order_are_sorted() {
        let path = write_temp(
            "unordered.csv",
            "date,symbol,field,value\n\
             2020-01-02,A,close,11\n\
             2020-01-01,A,close,10\n",
        );
        let panel = ingest_csv(&path, CsvLayout::Long).unwrap();
        assert_eq!(panel.calendar().date(0).to_string(), "2020-01-01");
        assert_eq!(panel.get_field("close").unwrap().values.get(0, 0), 10.0);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn ingestion_is_row_order_insensitive() {
        let a = write_temp(
            "perm_a.csv",
            "date,symbol,field,value\n\
             2020-01-01,A,close,10\n\
             2020-01-02,A,close,11\n\
             2020-01-01,B,volume,100\n",
        );
        let b = write_temp(
            "perm_b.csv",
            "date,symbol,field,value\n\
             2020-01-01,B,volume,100\n\
             2020-01-02,A,close,11\n\
             2020-01-01,A,close,10\n",
        );
        let pa = ingest_csv(&a, CsvLayout::Long).unwrap();
        let pb = ingest_csv(&b, CsvLayout::Long).unwrap();
        assert_eq!(pa, pb);
        std::fs::remove_file(a).ok();
        std::fs::remove_file(b).ok();
    }

    #[test]
    fn malformed_and_empty_inputs() {
        let bad = write_temp(
            "bad.csv",
            "date,symbol,field,value\n2020-01-99,A,close,10\n",
        );
        assert!(matches!(
            ingest_csv(&bad, CsvLayout::Long).unwrap_err(),
            PanelError::MalformedRow { .. }
        ));
        std::fs::remove_file(bad).ok();

        let empty = write_temp("empty.csv", "date,symbol,field,value\n");
        assert!(matches!(
            ingest_csv(&empty, CsvLayout::Long).unwrap_err(),
            PanelError::EmptyInput
        ));
        std::fs::remove_file(empty).ok();
    }

    #[test]
    fn wide_layout_emits_five_fields_plus_returns() {
        let path = write_temp(
            "wide.csv",
            "date,symbol,open,high,low,close,volume\n\
             2020-01-01,A,1,2,0.5,1.5,100\n\
             2020-01-02,A,1.5,2.5,1.0,2.0,\n",
        );
        let panel = ingest_csv(&path, CsvLayout::WideOhlcv).unwrap();
        let mut names = panel.field_names();
        names.sort();
        assert_eq!(names, ["close", "high", "low", "open", "returns", "volume"]);
        // empty volume cell stays missing
        assert!(is_missing(panel.get_field("volume").unwrap().values.get(1, 0)));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn group_labels_load_and_attach() {
        let data = write_temp(
            "grouped.csv",
            "date,symbol,field,value\n\
             2020-01-01,A,close,10\n\
             2020-01-01,B,close,20\n\
             2020-01-01,C,close,30\n",
        );
        let groups_path = write_temp("groups.csv", "symbol,group\nA,tech\nB,tech\nC,energy\n");
        let panel = ingest_csv(&data, CsvLayout::Long)
            .unwrap()
            .with_groups(load_groups(&groups_path).unwrap());
        assert!(panel.has_groups());
        let labels = panel.group_labels().unwrap();
        assert_eq!(labels, vec![Some("tech"), Some("tech"), Some("energy")]);
        // group ops become usable once labels exist
        let expr = crate::lang::parse("group_mean(close)").unwrap();
        let out = crate::eval::evaluate(&expr, &panel).unwrap();
        assert_eq!(out.values.row(0), vec![15.0, 15.0, 30.0]);
        std::fs::remove_file(data).ok();
        std::fs::remove_file(groups_path).ok();
    }

    #[test]
    fn all_fields_share_shape() {
        let path = write_temp(
            "shapes.csv",
            "date,symbol,field,value\n\
             2020-01-01,A,close,10\n\
             2020-01-02,B,volume,7\n",
        );
        let panel = ingest_csv(&path, CsvLayout::Long).unwrap();
        let shapes: Vec<_> = panel
            .field_names()
            .iter()
            .map(|n| panel.get_field(n).unwrap().values.shape())
            .collect();
        assert!(shapes.windows(2).all(|w| w[0] == w[1]));
        std::fs::remove_file(path).ok();
    }
}
