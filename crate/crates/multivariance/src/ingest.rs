//! CSV ingestion with column grouping.

use std::io::Read;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use multivariance_core::{Dataset, Error, Result};

/// One named group of consecutive columns, 0-based and half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupItem {
    pub name: Option<String>,
    pub columns: Range<usize>,
}

/// Grouping of CSV columns into variables.
///
/// The text form is a comma-separated list of `name:first-last` items with
/// 1-based inclusive column numbers, e.g. `x:1-2,y:3`. The name may be left
/// out. An empty layout puts every column in its own group. Columns not named
/// by any item are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupSpec {
    pub items: Vec<GroupItem>,
}

fn parse_column(text: &str, item: &str) -> Result<usize> {
    match text.trim().parse::<usize>() {
        Ok(c) if c >= 1 => Ok(c),
        _ => Err(Error::Usage(format!("invalid column '{text}' in group '{item}' (columns start at 1)"))),
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut items = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, range) = match item.rsplit_once(':') {
                Some((name, range)) => (Some(name.trim().to_string()), range),
                None => (None, item),
            };
            let (first, last) = match range.split_once('-') {
                Some((a, b)) => (parse_column(a, item)?, parse_column(b, item)?),
                None => {
                    let c = parse_column(range, item)?;
                    (c, c)
                }
            };
            if last < first {
                return Err(Error::Usage(format!("empty column range in group '{item}'")));
            }
            items.push(GroupItem { name, columns: first - 1..last });
        }
        let spec = GroupSpec { items };
        spec.check_disjoint()?;
        Ok(spec)
    }
}

impl GroupSpec {
    fn check_disjoint(&self) -> Result<()> {
        for (i, a) in self.items.iter().enumerate() {
            for b in &self.items[i + 1..] {
                if a.columns.start < b.columns.end && b.columns.start < a.columns.end {
                    return Err(Error::Usage(format!(
                        "groups overlap: columns {}-{} and {}-{}",
                        a.columns.start + 1,
                        a.columns.end,
                        b.columns.start + 1,
                        b.columns.end
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resolved groups for a file of `width` columns with the given header.
    fn resolve(&self, header: &[String]) -> Result<Vec<GroupItem>> {
        let width = header.len();
        if self.items.is_empty() {
            return Ok((0..width)
                .map(|c| GroupItem { name: Some(header[c].clone()), columns: c..c + 1 })
                .collect());
        }
        self.items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                if item.columns.end > width {
                    return Err(Error::Usage(format!(
                        "group {} ends at column {} but the file has {width} columns",
                        i + 1,
                        item.columns.end
                    )));
                }
                let name = item.name.clone().unwrap_or_else(|| {
                    if item.columns.len() == 1 {
                        header[item.columns.start].clone()
                    } else {
                        format!("X{}", i + 1)
                    }
                });
                Ok(GroupItem { name: Some(name), columns: item.columns.clone() })
            })
            .collect()
    }
}

/// Reads a CSV file whose first row is a header.
pub fn ingest_csv(path: impl AsRef<Path>, spec: &GroupSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    ingest_reader(file, spec)
}

/// Like [`ingest_csv`] for any reader. Rows and columns in error messages are
/// 1-based; row 1 is the first data row after the header.
pub fn ingest_reader(reader: impl Read, spec: &GroupSpec) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Data("file has no header".into()));
    }
    let groups = spec.resolve(&header)?;
    let width = header.len();
    let mut selected: Vec<usize> = Vec::new();
    let mut ranges = Vec::with_capacity(groups.len());
    for g in &groups {
        let start = selected.len();
        selected.extend(g.columns.clone());
        ranges.push(start..selected.len());
    }
    let mut values = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        if record.len() != width {
            return Err(Error::Data(format!(
                "row {row}: expected {width} columns, found {}",
                record.len()
            )));
        }
        for &c in &selected {
            let cell = record[c].trim();
            if cell.is_empty() {
                return Err(Error::Data(format!("row {row}, column {}: missing value", c + 1)));
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::Data(format!(
                        "row {row}, column {}: '{cell}' is not a finite number",
                        c + 1
                    )))
                }
            }
        }
    }
    let names = groups.into_iter().map(|g| g.name.unwrap_or_default()).collect();
    Dataset::new(values, selected.len(), ranges, Some(names))
}

/// Writes a dataset as CSV with one header name per column.
pub fn write_csv(data: &Dataset, out: impl std::io::Write) -> Result<()> {
    let io = |e: csv::Error| Error::Data(format!("cannot write CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::with_capacity(data.columns());
    for (i, g) in data.groups().iter().enumerate() {
        let name = &data.names()[i];
        if g.len() == 1 {
            header.push(name.clone());
        } else {
            header.extend((1..=g.len()).map(|k| format!("{name}.{k}")));
        }
    }
    w.write_record(&header).map_err(io)?;
    for s in 0..data.samples() {
        w.write_record(data.row(s).iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Data(format!("cannot write CSV: {e}")))
}

/// Group layout of a dataset in `--groups` form, e.g. `X1:1-2,X2:3`.
pub fn describe_groups(data: &Dataset) -> String {
    data.groups()
        .iter()
        .zip(data.names())
        .map(|(g, name)| {
            if g.len() == 1 {
                format!("{name}:{}", g.start + 1)
            } else {
                format!("{name}:{}-{}", g.start + 1, g.end)
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, spec: &str) -> Result<Dataset> {
        ingest_reader(text.as_bytes(), &spec.parse()?)
    }

    #[test]
    fn default_spec() {
        let ds = read("a,b,c\n1,2,3\n4,5,6\n", "").unwrap();
        assert_eq!(ds.variables(), 3);
        assert_eq!(ds.names(), ["a", "b", "c"]);
    }

    #[test]
    fn grouped_columns() {
        let ds = read("a,b,c\n1,2,3\n4,5,6\n", "x:1-2,y:3").unwrap();
        assert_eq!(ds.variables(), 2);
        assert_eq!((ds.dim(0), ds.dim(1)), (2, 1));
        assert_eq!(describe_groups(&ds), "x:1-2,y:3");
    }

    #[test]
    fn cell_errors_name_location() {
        let text = "a,b\n1,2\n3,4\n5,6\n7,8\n9,oops\n";
        let err = read(text, "").unwrap_err();
        assert!(matches!(&err, Error::Data(m) if m.contains("row 5, column 2")), "{err}");
        let err = read("a,b\n1,2\n3\n", "").unwrap_err();
        assert!(matches!(&err, Error::Data(m) if m.contains("row 2")), "{err}");
        let err = read("a,b\n1,\n3,4\n", "").unwrap_err();
        assert!(err.to_string().contains("missing"));
        assert!(read("a,b\n1,inf\n3,4\n", "").is_err());
    }

    #[test]
    fn spec_errors() {
        assert!(matches!("x:1-2,y:2-3".parse::<GroupSpec>(), Err(Error::Usage(_))));
        assert!("x:0-1".parse::<GroupSpec>().is_err());
        assert!("x:3-1".parse::<GroupSpec>().is_err());
        assert!(matches!(read("a,b\n1,2\n3,4\n", "x:1-3"), Err(Error::Usage(_))));
    }

    #[test]
    fn csv_round_trip() {
        let ds = read("a,b,c\n1,2,3\n4,5,6.5\n", "x:1-2,y:3").unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x.1,x.2,y\n"));
        let back = read(&text, "x:1-2,y:3").unwrap();
        assert_eq!(back.values(), ds.values());
    }
}
