//! In-memory form of the results CSV and its column layout.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::BatchError;
use crate::config::TaskSpec;

pub const IMAGE_COLUMN: &str = "image";
pub const NA: &str = "NA";

/// Columns one task contributes, in order: value, reasoning (if enabled),
/// consensus/agreement/runs (if consensus), truncated.
pub fn column_group(task: &TaskSpec) -> Vec<String> {
    let c = &task.column;
    let mut cols = vec![c.clone()];
    if task.reasoning_enabled {
        cols.push(format!("{c}_reasoning"));
    }
    if task.consensus_enabled {
        cols.push(format!("{c}_consensus"));
        cols.push(format!("{c}_agreement"));
        cols.push(format!("{c}_runs"));
    }
    cols.push(format!("{c}_truncated"));
    cols
}

/// Full header for a fresh results file.
pub fn header_for(tasks: &[TaskSpec]) -> Vec<String> {
    std::iter::once(IMAGE_COLUMN.to_string())
        .chain(tasks.iter().flat_map(column_group))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResultsRow {
    pub image: String,
    pub cells: BTreeMap<String, String>,
}

impl ResultsRow {
    pub fn new(image: impl Into<String>) -> Self {
        ResultsRow {
            image: image.into(),
            cells: BTreeMap::new(),
        }
    }

    /// Cell text, empty when absent.
    pub fn get(&self, column: &str) -> &str {
        self.cells.get(column).map_or("", String::as_str)
    }

    /// Copies every non-empty cell of `newer` over this row.
    pub fn merge_from(&mut self, newer: ResultsRow) {
        for (k, v) in newer.cells {
            if !v.is_empty() {
                self.cells.insert(k, v);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultsTable {
    pub header: Vec<String>,
    pub rows: Vec<ResultsRow>,
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

impl ResultsTable {
    pub fn new(header: Vec<String>) -> Self {
        ResultsTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn row(&self, image: &str) -> Option<&ResultsRow> {
        self.rows.iter().find(|r| r.image == image)
    }

    pub fn has_column(&self, column: &str) -> bool {
        self.header.iter().any(|h| h == column)
    }

    /// Inserts `row`, merging into an existing row with the same image.
    pub fn upsert(&mut self, row: ResultsRow) {
        match self.rows.iter_mut().find(|r| r.image == row.image) {
            Some(existing) => existing.merge_from(row),
            None => self.rows.push(row),
        }
    }

    /// Byte-wise ascending by image name.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.image.as_bytes().cmp(b.image.as_bytes()));
    }

    /// Parses a results CSV. Repeated image rows (left by appends that
    /// completed a row) are merged, later non-empty cells winning.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(str::to_string)
            .collect();
        if header.first().map(String::as_str) != Some(IMAGE_COLUMN) {
            return Err(format!("first column must be `{IMAGE_COLUMN}`"));
        }
        for (i, h) in header.iter().enumerate() {
            if header[..i].contains(h) {
                return Err(format!("duplicate column `{h}`"));
            }
        }
        let mut table = ResultsTable::new(header);
        for (n, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            if record.len() > table.header.len() {
                return Err(format!("row {} has more cells than the header", n + 1));
            }
            let image = record.get(0).unwrap_or_default();
            if image.is_empty() {
                continue;
            }
            let mut row = ResultsRow::new(image);
            for (col, cell) in table.header.iter().zip(record.iter()).skip(1) {
                if !cell.is_empty() {
                    row.cells.insert(col.clone(), cell.to_string());
                }
            }
            table.upsert(row);
        }
        Ok(table)
    }

    pub fn read_csv(path: &Path) -> Result<Self, BatchError> {
        let file = std::fs::File::open(path).map_err(|e| BatchError::io(path, e))?;
        Self::from_reader(file).map_err(|message| BatchError::Csv {
            path: path.to_path_buf(),
            message,
        })
    }

    fn record<'a>(&self, row: &'a ResultsRow) -> Vec<&'a str> {
        std::iter::once(row.image.as_str())
            .chain(self.header[1..].iter().map(|c| row.get(c)))
            .collect()
    }

    /// One CSV line for `row` under this table's header.
    pub fn row_bytes(&self, row: &ResultsRow) -> Vec<u8> {
        let mut w = csv_writer(Vec::new());
        w.write_record(self.record(row)).expect("in-memory write");
        w.into_inner().expect("in-memory flush")
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(self.record(row)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Replaces `path` with this table via a temporary file and rename.
    pub fn write_csv(&self, path: &Path) -> Result<(), BatchError> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        std::fs::write(&tmp, self.to_csv_bytes()).map_err(|e| BatchError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| BatchError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TaskType;

    #[test]
    fn layout_order() {
        let mut a = TaskSpec::new("vehicles", TaskType::Numeric);
        a.consensus_enabled = true;
        a.reasoning_enabled = true;
        let b = TaskSpec::new("sidewalk", TaskType::Boolean);
        assert_eq!(
            header_for(&[a, b]),
            [
                "image",
                "vehicles",
                "vehicles_reasoning",
                "vehicles_consensus",
                "vehicles_agreement",
                "vehicles_runs",
                "vehicles_truncated",
                "sidewalk",
                "sidewalk_truncated"
            ]
        );
    }

    #[test]
    fn quoting_and_reading_back() {
        let mut t = ResultsTable::new(vec!["image".into(), "desc".into(), "n".into()]);
        let mut r = ResultsRow::new("b.jpg");
        r.cells.insert("desc".into(), "a, \"quoted\"\nline".into());
        r.cells.insert("n".into(), "3".into());
        t.upsert(r);
        t.upsert(ResultsRow::new("a.jpg"));
        t.sort();
        let bytes = t.to_csv_bytes();
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            "image,desc,n\na.jpg,,\nb.jpg,\"a, \"\"quoted\"\"\nline\",3\n"
        );
        assert_eq!(ResultsTable::from_reader(&bytes[..]).unwrap(), t);
    }

    #[test]
    fn duplicate_rows_merge() {
        let csv = "image,x,y\na.jpg,1,\nb.jpg,2,2\na.jpg,,5\n";
        let t = ResultsTable::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.row("a.jpg").unwrap().get("x"), "1");
        assert_eq!(t.row("a.jpg").unwrap().get("y"), "5");
    }

    #[test]
    fn short_rows_and_bad_headers() {
        let t = ResultsTable::from_reader("image,x,y\na.jpg,1\n".as_bytes()).unwrap();
        assert_eq!(t.row("a.jpg").unwrap().get("y"), "");
        assert!(ResultsTable::from_reader("x,image\n".as_bytes()).is_err());
        assert!(ResultsTable::from_reader("image,x,x\n".as_bytes()).is_err());
        assert!(ResultsTable::from_reader("image,x\na,1,2\n".as_bytes()).is_err());
    }
}
