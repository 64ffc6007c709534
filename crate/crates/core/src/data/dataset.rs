use super::DataError;
use std::io::{Read, Write};

/// Dense row-major matrix of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "matrix shape mismatch");
        Self { nrows, ncols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), ncols, data)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.nrows).map(move |i| self.get(i, j))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Feature column contents. `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical { levels: Vec<String>, codes: Vec<Option<usize>> },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_missing(&self) -> bool {
        match self {
            ColumnData::Numeric(v) => v.iter().any(Option::is_none),
            ColumnData::Categorical { codes, .. } => codes.iter().any(Option::is_none),
        }
    }

    fn subset(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical { levels, codes } => {
                ColumnData::Categorical { levels: levels.clone(), codes: rows.iter().map(|&i| codes[i]).collect() }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), data: ColumnData::Numeric(values.into_iter().map(Some).collect()) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

/// Target vector: real responses or class indices into `classes`.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Regression(Vec<f64>),
    Classes { classes: Vec<String>, labels: Vec<usize> },
}

impl Target {
    /// Class target with classes named `"0"`, `"1"`, ...
    pub fn classes(labels: Vec<usize>, n_classes: usize) -> Self {
        Target::Classes { classes: (0..n_classes).map(|k| k.to_string()).collect(), labels }
    }

    pub fn len(&self) -> usize {
        match self {
            Target::Regression(v) => v.len(),
            Target::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            Target::Regression(_) => TaskKind::Regression,
            Target::Classes { .. } => TaskKind::Classification,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Target::Regression(_) => 0,
            Target::Classes { classes, .. } => classes.len(),
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match self {
            Target::Classes { labels, .. } => Some(labels),
            Target::Regression(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Target::Regression(v) => Some(v),
            Target::Classes { .. } => None,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        match self {
            Target::Regression(_) => Vec::new(),
            Target::Classes { classes, labels } => {
                let mut c = vec![0; classes.len()];
                for &l in labels {
                    c[l] += 1;
                }
                c
            }
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Target {
        match self {
            Target::Regression(v) => Target::Regression(rows.iter().map(|&i| v[i]).collect()),
            Target::Classes { classes, labels } => {
                Target::Classes { classes: classes.clone(), labels: rows.iter().map(|&i| labels[i]).collect() }
            }
        }
    }
}

/// A supervised dataset: typed feature columns plus a complete target.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    target_name: String,
    target: Target,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, target_name: impl Into<String>, target: Target) -> Result<Self, DataError> {
        let n = target.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        let target_name = target_name.into();
        let mut names = std::collections::HashSet::new();
        names.insert(target_name.clone());
        for c in &columns {
            if !names.insert(c.name.clone()) {
                return Err(DataError::DuplicateColumn(c.name.clone()));
            }
            if c.data.len() != n {
                return Err(DataError::Shape(format!("column `{}` has {} rows, target has {n}", c.name, c.data.len())));
            }
        }
        if let Target::Classes { classes, labels } = &target {
            if labels.iter().any(|&l| l >= classes.len()) {
                return Err(DataError::Shape("class label out of range".into()));
            }
        }
        if let Target::Regression(v) = &target {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DataError::MissingTarget);
            }
        }
        Ok(Self { columns, target_name, target })
    }

    /// All-numeric dataset from a row-major matrix.
    pub fn from_matrix(x: &Matrix, target: Target) -> Result<Self, DataError> {
        let columns = (0..x.ncols()).map(|j| Column::numeric(format!("x{}", j + 1), x.column(j).collect())).collect();
        Self::new(columns, "y", target)
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn task(&self) -> TaskKind {
        self.target.kind()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.iter().map(|c| Column { name: c.name.clone(), data: c.data.subset(rows) }).collect(),
            target_name: self.target_name.clone(),
            target: self.target.subset(rows),
        }
    }

    /// Same rows and target, new feature columns.
    pub fn with_columns(&self, columns: Vec<Column>) -> Result<Dataset, DataError> {
        Dataset::new(columns, self.target_name.clone(), self.target.clone())
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.data.has_missing())
    }

    pub fn has_categorical(&self) -> bool {
        self.columns.iter().any(|c| matches!(c.data, ColumnData::Categorical { .. }))
    }

    /// Feature matrix; fails on categorical or missing cells.
    pub fn numeric_matrix(&self) -> Result<Matrix, DataError> {
        let n = self.n();
        let p = self.p();
        let mut data = vec![0.0; n * p];
        for (j, c) in self.columns.iter().enumerate() {
            let ColumnData::Numeric(v) = &c.data else {
                return Err(DataError::NotNumeric(c.name.clone()));
            };
            for (i, x) in v.iter().enumerate() {
                data[i * p + j] = x.ok_or_else(|| DataError::MissingFeature(c.name.clone()))?;
            }
        }
        Ok(Matrix::new(n, p, data))
    }

    /// Reads a CSV with a header row. Cells that are empty or `NA` are
    /// missing. A column is numeric when all present cells parse as reals.
    pub fn from_csv<R: Read>(reader: R, target: &str, task: TaskKind) -> Result<Dataset, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let t_idx = headers.iter().position(|h| h == target).ok_or_else(|| DataError::NoTarget(target.to_string()))?;
        let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(DataError::Shape(format!("record has {} fields, header has {}", rec.len(), headers.len())));
            }
            for (j, f) in rec.iter().enumerate() {
                let f = f.trim();
                cells[j].push(if f.is_empty() || f == "NA" { None } else { Some(f.to_string()) });
            }
        }
        let target_cells = std::mem::take(&mut cells[t_idx]);
        if target_cells.iter().any(Option::is_none) {
            return Err(DataError::MissingTarget);
        }
        let target_strs: Vec<String> = target_cells.into_iter().flatten().collect();
        let tgt = match task {
            TaskKind::Regression => Target::Regression(
                target_strs
                    .iter()
                    .map(|s| s.parse::<f64>().map_err(|_| DataError::Parse(format!("target value `{s}`"))))
                    .collect::<Result<_, _>>()?,
            ),
            TaskKind::Classification => {
                let (classes, codes) = encode_levels(&target_strs.iter().cloned().map(Some).collect::<Vec<_>>());
                Target::Classes { classes, labels: codes.into_iter().map(|c| c.expect("target complete")).collect() }
            }
        };
        let columns = headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != t_idx)
            .map(|(j, name)| Column { name: name.clone(), data: infer_column(&cells[j]) })
            .collect();
        Dataset::new(columns, target, tgt)
    }

    /// Writes features followed by the target column.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        header.push(&self.target_name);
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self
                .columns
                .iter()
                .map(|c| match &c.data {
                    ColumnData::Numeric(v) => v[i].map(|x| x.to_string()).unwrap_or_else(|| "NA".into()),
                    ColumnData::Categorical { levels, codes } => {
                        codes[i].map(|k| levels[k].clone()).unwrap_or_else(|| "NA".into())
                    }
                })
                .collect();
            rec.push(match &self.target {
                Target::Regression(v) => v[i].to_string(),
                Target::Classes { classes, labels } => classes[labels[i]].clone(),
            });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn infer_column(cells: &[Option<String>]) -> ColumnData {
    let parsed: Option<Vec<Option<f64>>> = cells
        .iter()
        .map(|c| match c {
            None => Some(None),
            Some(s) => s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Some),
        })
        .collect();
    match parsed {
        Some(v) => ColumnData::Numeric(v),
        None => {
            let (levels, codes) = encode_levels(cells);
            ColumnData::Categorical { levels, codes }
        }
    }
}

/// Sorted level set (numerically when every level parses as an integer).
fn encode_levels(cells: &[Option<String>]) -> (Vec<String>, Vec<Option<usize>>) {
    let mut levels: Vec<String> = cells.iter().flatten().cloned().collect();
    levels.sort();
    levels.dedup();
    if levels.iter().all(|l| l.parse::<i64>().is_ok()) {
        levels.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    let codes = cells.iter().map(|c| c.as_ref().map(|s| levels.binary_search_by(|l| cmp_level(l, s)).unwrap())).collect();
    (levels, codes)
}

fn cmp_level(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_missing_and_categorical() {
        let text = "a,b,y\n1.5,red,1\nNA,blue,0\n2,,1\n";
        let d = Dataset::from_csv(text.as_bytes(), "y", TaskKind::Classification).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.columns()[0].data, ColumnData::Numeric(vec![Some(1.5), None, Some(2.0)]));
        let ColumnData::Categorical { levels, codes } = &d.columns()[1].data else { panic!() };
        assert_eq!(levels, &vec!["blue".to_string(), "red".to_string()]);
        assert_eq!(codes, &vec![Some(1), Some(0), None]);
        assert_eq!(d.target().labels().unwrap(), &[1, 0, 1]);
        assert!(d.numeric_matrix().is_err());
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            Dataset::from_csv("a,y\n1,\n".as_bytes(), "y", TaskKind::Regression),
            Err(DataError::MissingTarget)
        ));
        assert!(matches!(Dataset::from_csv("a,y\n1,2\n".as_bytes(), "z", TaskKind::Regression), Err(DataError::NoTarget(_))));
        assert!(matches!(Dataset::from_csv("a,y\n".as_bytes(), "y", TaskKind::Regression), Err(DataError::Empty)));
    }

    #[test]
    fn numeric_class_levels_sort_numerically() {
        let text = "x,y\n1,10\n2,9\n3,2\n";
        let d = Dataset::from_csv(text.as_bytes(), "y", TaskKind::Classification).unwrap();
        let Target::Classes { classes, labels } = d.target() else { panic!() };
        assert_eq!(classes, &vec!["2".to_string(), "9".into(), "10".into()]);
        assert_eq!(labels, &vec![2, 1, 0]);
    }
}
