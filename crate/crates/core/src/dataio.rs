//! Return-panel ingestion, date alignment, excess-return construction and
//! model definitions.
//!
//! Returns CSV layout: a header row `date,<name>,...`, then one row per month
//! with the date as a `YYYYMM` integer and values in percent per month.
//! Lines starting with `#` are comments. Rows containing a missing-value code
//! (or an empty cell) are dropped whole.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Missing-value codes used by the Ken French data library.
pub const DEFAULT_MISSING_CODES: [f64; 2] = [-99.99, -999.0];

/// Monthly return matrix indexed by `YYYYMM` dates, one column per series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<u32>,
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnsPanel {
    pub fn new(dates: Vec<u32>, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != dates.len() {
            return Err(Error::DimMismatch {
                expected: dates.len(),
                got: values.nrows(),
            });
        }
        if values.ncols() != names.len() {
            return Err(Error::DimMismatch {
                expected: names.len(),
                got: values.ncols(),
            });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Parse {
                    path: "<panel>".into(),
                    line: 0,
                    message: format!("dates not strictly increasing at {}", w[1]),
                });
            }
        }
        Ok(ReturnsPanel {
            dates,
            names,
            values,
        })
    }

    pub fn dates(&self) -> &[u32] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        self.column_index(name)
            .map(|j| DVector::from_column_slice(self.values.column(j).as_slice()))
    }

    /// Keeps only rows whose date is in `keep` (which must be sorted).
    pub fn restrict_to_dates(&self, keep: &[u32]) -> ReturnsPanel {
        let rows: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| keep.binary_search(d).is_ok())
            .map(|(i, _)| i)
            .collect();
        self.select_rows(&rows)
    }

    fn select_rows(&self, rows: &[usize]) -> ReturnsPanel {
        let values = DMatrix::from_fn(rows.len(), self.n_cols(), |i, j| self.values[(rows[i], j)]);
        ReturnsPanel {
            dates: rows.iter().map(|&i| self.dates[i]).collect(),
            names: self.names.clone(),
            values,
        }
    }

    /// Drops the named column.
    pub fn without_column(&self, name: &str) -> ReturnsPanel {
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&j| self.names[j] != name)
            .collect();
        ReturnsPanel {
            dates: self.dates.clone(),
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            values: self.values.select_columns(&keep),
        }
    }

    /// Columns in the given order, as a `T x names.len()` matrix.
    pub fn select_columns(&self, names: &[String]) -> Option<DMatrix<f64>> {
        let idx: Option<Vec<usize>> = names.iter().map(|n| self.column_index(n)).collect();
        Some(self.values.select_columns(&idx?))
    }

    /// Writes the panel in the returns CSV layout. `comment`, if given, is
    /// emitted as a leading `# ...` line.
    pub fn to_csv_string(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("date");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            let _ = write!(out, "{d}");
            for j in 0..self.n_cols() {
                // Shortest round-trip representation keeps re-ingestion lossless.
                let _ = write!(out, ",{}", self.values[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

fn is_missing(v: f64, codes: &[f64]) -> bool {
    v.is_nan()
        || codes
            .iter()
            .any(|&c| (v - c).abs() <= 1e-9 * c.abs().max(1.0))
}

fn parse_yyyymm(s: &str) -> Option<u32> {
    let d: u32 = s.parse().ok()?;
    let (year, month) = (d / 100, d % 100);
    ((1..=12).contains(&month) && (1000..=9999).contains(&year)).then_some(d)
}

/// Parses a returns CSV from any reader. `label` identifies the source in errors.
pub fn parse_panel<R: Read>(reader: R, label: &str, missing_codes: &[f64]) -> Result<ReturnsPanel> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: label.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let header_line = headers.position().map_or(1, |p| p.line() as usize);
    if headers.len() < 2 {
        return Err(parse_err(
            header_line,
            "header needs a date column and at least one series".into(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for n in &names {
        if n.is_empty() {
            return Err(parse_err(header_line, "empty column name".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(parse_err(header_line, format!("duplicate column `{n}`")));
        }
    }

    let mut rows: Vec<(u32, usize, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != names.len() + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", names.len() + 1, rec.len()),
            ));
        }
        let date = parse_yyyymm(&rec[0])
            .ok_or_else(|| parse_err(line, format!("bad YYYYMM date `{}`", &rec[0])))?;
        let mut vals = Vec::with_capacity(names.len());
        for field in rec.iter().skip(1) {
            let v = if field.is_empty() {
                f64::NAN
            } else {
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("non-numeric value `{field}`")))?
            };
            vals.push(v);
        }
        rows.push((date, line, vals));
    }

    rows.sort_by_key(|r| r.0);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateDate {
                path: label.to_string(),
                date: w[0].0,
            });
        }
    }
    rows.retain(|(_, _, vals)| !vals.iter().any(|&v| is_missing(v, missing_codes)));
    if rows.is_empty() {
        return Err(Error::EmptyPanel {
            path: label.to_string(),
        });
    }
    let dates: Vec<u32> = rows.iter().map(|r| r.0).collect();
    let values = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i].2[j]);
    ReturnsPanel::new(dates, names, values)
}

pub fn load_panel(path: impl AsRef<Path>, missing_codes: &[f64]) -> Result<ReturnsPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_panel(file, &path.display().to_string(), missing_codes)
}

fn intersect_dates<'a>(panels: impl IntoIterator<Item = &'a ReturnsPanel>) -> Vec<u32> {
    let mut iter = panels.into_iter();
    let mut common: Vec<u32> = match iter.next() {
        Some(p) => p.dates.clone(),
        None => return Vec::new(),
    };
    for p in iter {
        common.retain(|d| p.dates.binary_search(d).is_ok());
    }
    common
}

/// Column-concatenates panels over their common dates. Clashing column names
/// get a `.2`, `.3`, ... suffix.
pub fn concat_columns(panels: &[ReturnsPanel]) -> Result<ReturnsPanel> {
    let common = intersect_dates(panels);
    if common.is_empty() {
        return Err(Error::NoOverlap);
    }
    let aligned: Vec<ReturnsPanel> = panels.iter().map(|p| p.restrict_to_dates(&common)).collect();
    let total: usize = aligned.iter().map(ReturnsPanel::n_cols).sum();
    let mut names = Vec::with_capacity(total);
    let mut seen = HashSet::new();
    for p in &aligned {
        for n in &p.names {
            let mut candidate = n.clone();
            let mut suffix = 2;
            while !seen.insert(candidate.clone()) {
                candidate = format!("{n}.{suffix}");
                suffix += 1;
            }
            names.push(candidate);
        }
    }
    let mut values = DMatrix::zeros(common.len(), total);
    let mut col = 0;
    for p in &aligned {
        values.columns_mut(col, p.n_cols()).copy_from(&p.values);
        col += p.n_cols();
    }
    ReturnsPanel::new(common, names, values)
}

/// Identifies a cross section for ranking comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrossSection {
    pub n: usize,
    pub t: usize,
    pub first_date: u32,
    pub last_date: u32,
}

/// Aligned excess portfolio returns and factor returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub portfolios: ReturnsPanel,
    pub factors: ReturnsPanel,
    /// Risk-free series removed from the factor panel, if one was used.
    pub riskfree: Option<Vec<f64>>,
}

impl Dataset {
    /// Pairs already-excess portfolio returns with factors on identical dates.
    pub fn new(portfolios: ReturnsPanel, factors: ReturnsPanel) -> Result<Self> {
        if portfolios.dates != factors.dates {
            return Err(Error::DimMismatch {
                expected: portfolios.n_rows(),
                got: factors.n_rows(),
            });
        }
        Ok(Dataset {
            portfolios,
            factors,
            riskfree: None,
        })
    }

    pub fn t(&self) -> usize {
        self.portfolios.n_rows()
    }

    pub fn n(&self) -> usize {
        self.portfolios.n_cols()
    }

    pub fn cross_section(&self) -> CrossSection {
        let dates = self.portfolios.dates();
        CrossSection {
            n: self.n(),
            t: self.t(),
            first_date: dates.first().copied().unwrap_or(0),
            last_date: dates.last().copied().unwrap_or(0),
        }
    }
}

/// Aligns both panels on their common dates, subtracts the risk-free column
/// from every portfolio and drops it from the factor set.
pub fn build_dataset(
    portfolios: &ReturnsPanel,
    factors: &ReturnsPanel,
    riskfree_name: &str,
) -> Result<Dataset> {
    if factors.column_index(riskfree_name).is_none() {
        return Err(Error::MissingRiskfree(riskfree_name.to_string()));
    }
    let common = intersect_dates([portfolios, factors]);
    if common.is_empty() {
        return Err(Error::NoOverlap);
    }
    let p = portfolios.restrict_to_dates(&common);
    let f = factors.restrict_to_dates(&common);
    let rf = f.column(riskfree_name).expect("checked above");
    let mut excess = p.values.clone();
    for mut col in excess.column_iter_mut() {
        col -= &rf;
    }
    let portfolios = ReturnsPanel {
        values: excess,
        ..p
    };
    let factors = f.without_column(riskfree_name);
    Ok(Dataset {
        portfolios,
        factors,
        riskfree: Some(rf.as_slice().to_vec()),
    })
}

/// A named factor subset defining one asset-pricing model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub name: String,
    pub factor_names: Vec<String>,
}

impl ModelSpec {
    pub fn new<S: Into<String>>(name: S, factors: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let factor_names: Vec<String> = factors.into_iter().map(Into::into).collect();
        if name.is_empty() {
            return Err(Error::BadModel {
                name,
                reason: "empty name".into(),
            });
        }
        if factor_names.is_empty() {
            return Err(Error::BadModel {
                name,
                reason: "no factors".into(),
            });
        }
        let mut seen = HashSet::new();
        for f in &factor_names {
            if f.is_empty() || !seen.insert(f.as_str()) {
                return Err(Error::BadModel {
                    name: name.clone(),
                    reason: format!("empty or repeated factor `{f}`"),
                });
            }
        }
        Ok(ModelSpec { name, factor_names })
    }

    pub fn k(&self) -> usize {
        self.factor_names.len()
    }
}

/// Parses model definitions: one `NAME = F1,F2,...` per line, `#` starts a comment.
pub fn parse_models(text: &str, label: &str) -> Result<Vec<ModelSpec>> {
    let mut models: Vec<ModelSpec> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, factors) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: label.to_string(),
            line: i + 1,
            message: "expected `NAME = F1,F2,...`".into(),
        })?;
        let factors: Vec<&str> = factors.split(',').map(str::trim).collect();
        let model = ModelSpec::new(name.trim(), factors)?;
        if models.iter().any(|m| m.name == model.name) {
            return Err(Error::DuplicateModelName(model.name));
        }
        models.push(model);
    }
    Ok(models)
}

pub fn load_models(path: impl AsRef<Path>) -> Result<Vec<ModelSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_models(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(text: &str) -> Result<ReturnsPanel> {
        parse_panel(text.as_bytes(), "test.csv", &DEFAULT_MISSING_CODES)
    }

    #[test]
    fn drops_missing_code_rows() {
        let p = panel("date,MKT\n196701,0.5\n196702,-99.99\n196703,1.0").unwrap();
        assert_eq!(p.dates(), &[196701, 196703]);
        assert_eq!(p.values().as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn empty_cells_and_other_codes_are_missing() {
        let p = panel("date,A,B\n196701,1,\n196702,2,-999\n196703,3,4\n").unwrap();
        assert_eq!(p.dates(), &[196703]);
    }

    #[test]
    fn custom_missing_codes() {
        let p = parse_panel("date,A\n200001,-1\n200002,2\n".as_bytes(), "x", &[-1.0]).unwrap();
        assert_eq!(p.dates(), &[200002]);
    }

    #[test]
    fn comments_and_whitespace() {
        let p = panel("# generated\ndate, A , B\n 200001 , 1.5, 2\n\n200002,3,4\n").unwrap();
        assert_eq!(p.names(), &["A".to_string(), "B".to_string()]);
        assert_eq!(p.n_rows(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match panel("date,A\n200001,1\n200002,abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match panel("date,A\n200001,1\n200013,2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            panel("date,A,B\n200001,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_and_empty() {
        assert!(matches!(
            panel("date,A\n200001,1\n200001,2\n"),
            Err(Error::DuplicateDate { date: 200001, .. })
        ));
        assert!(matches!(
            panel("date,A\n200001,-99.99\n"),
            Err(Error::EmptyPanel { .. })
        ));
        assert!(matches!(panel("date,A\n"), Err(Error::EmptyPanel { .. })));
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let p = panel("date,A\n200003,3\n200001,1\n200002,2\n").unwrap();
        assert_eq!(p.dates(), &[200001, 200002, 200003]);
        assert_eq!(p.values().as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn csv_round_trip() {
        let p = panel("date,A,B\n200001,0.1,-2.25\n200002,1e-3,4\n").unwrap();
        let back = panel(&p.to_csv_string(Some("meta"))).unwrap();
        assert_eq!(p, back);
    }

    fn months(start_year: u32, end_year: u32) -> Vec<u32> {
        (start_year..=end_year)
            .flat_map(|y| (1..=12).map(move |m| y * 100 + m))
            .collect()
    }

    #[test]
    fn six_hundred_months() {
        let dates = months(1967, 2016);
        let mut text = String::from("date,MKT\n");
        for d in &dates {
            text.push_str(&format!("{d},0.5\n"));
        }
        assert_eq!(panel(&text).unwrap().n_rows(), 600);
    }

    #[test]
    fn excess_returns_and_alignment() {
        let pd = months(1967, 2016);
        let fd = months(1970, 2010);
        let p = ReturnsPanel::new(
            pd.clone(),
            vec!["P1".into()],
            DMatrix::from_element(pd.len(), 1, 1.0),
        )
        .unwrap();
        let f = ReturnsPanel::new(
            fd.clone(),
            vec!["MKT".into(), "RF".into()],
            DMatrix::from_fn(fd.len(), 2, |_, j| if j == 0 { 0.7 } else { 0.4 }),
        )
        .unwrap();
        let ds = build_dataset(&p, &f, "RF").unwrap();
        assert_eq!(ds.portfolios.dates().first(), Some(&197001));
        assert_eq!(ds.portfolios.dates().last(), Some(&201012));
        assert_eq!(ds.t(), fd.len());
        assert_eq!(ds.factors.names(), &["MKT".to_string()]);
        assert!(ds.portfolios.values().iter().all(|&v| (v - 0.6).abs() < 1e-15));
        assert_eq!(ds.portfolios.dates(), ds.factors.dates());
    }

    #[test]
    fn riskfree_and_overlap_errors() {
        let p = panel("date,P\n200001,1\n").unwrap();
        let f = panel("date,MKT\n200001,1\n").unwrap();
        assert!(matches!(build_dataset(&p, &f, "RF"), Err(Error::MissingRiskfree(_))));
        let f = panel("date,MKT,RF\n199901,1,0.1\n").unwrap();
        assert!(matches!(build_dataset(&p, &f, "RF"), Err(Error::NoOverlap)));
    }

    #[test]
    fn concat_renames_clashes() {
        let a = panel("date,X,Y\n200001,1,2\n200002,3,4\n").unwrap();
        let b = panel("date,X\n200002,5\n200003,6\n").unwrap();
        let c = concat_columns(&[a, b]).unwrap();
        assert_eq!(c.dates(), &[200002]);
        assert_eq!(c.names(), &["X".to_string(), "Y".into(), "X.2".into()]);
        assert_eq!(c.values().as_slice(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn model_file() {
        let text = "# models\nCAPM = MKT\nFF3 = MKT, SMB,HML  # three factors\n\n";
        let m = parse_models(text, "models.txt").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0], ModelSpec::new("CAPM", ["MKT"]).unwrap());
        assert_eq!(m[0].k(), 1);
        assert_eq!(m[1].factor_names, vec!["MKT", "SMB", "HML"]);
    }

    #[test]
    fn model_file_errors() {
        assert!(matches!(
            parse_models("FF3 = MKT\nFF3 = SMB\n", "m"),
            Err(Error::DuplicateModelName(n)) if n == "FF3"
        ));
        assert!(matches!(parse_models("FF3 MKT\n", "m"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_models("X = MKT,MKT\n", "m"), Err(Error::BadModel { .. })));
        assert!(matches!(parse_models("X = \n", "m"), Err(Error::BadModel { .. })));
    }

    #[test]
    fn ingestion_is_deterministic() {
        let text = "date,A,B\n200001,0.1,0.2\n200002,-99.99,1\n200003,0.3,0.4\n";
        assert_eq!(panel(text).unwrap(), panel(text).unwrap());
    }
}
