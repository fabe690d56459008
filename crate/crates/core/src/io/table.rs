use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmc::WeatherRow;
use crate::rnn::Matrix;
use crate::training::SparseSeries;

fn parse_err(path: &Path, row: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), row, msg: msg.into() }
}

fn open(path: &Path) -> Result<(csv::Reader<File>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.iter().map(str::to_string).collect();
    Ok((rdr, headers))
}

fn column(path: &Path, headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| parse_err(path, 1, format!("missing column {name:?}")))
}

fn parse_value(path: &Path, row: usize, name: &str, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_err(path, row, format!("column {name:?}: cannot parse {field:?} as a number")))
}

fn parse_missing(path: &Path, row: usize, name: &str, field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    let v = parse_value(path, row, name, field)?;
    Ok(v.is_finite().then_some(v))
}

fn parse_time(path: &Path, row: usize, field: &str, prev: Option<i64>) -> Result<i64> {
    let t = field.parse::<i64>().map_err(|_| parse_err(path, row, format!("time {field:?} is not an integer hour")))?;
    if let Some(p) = prev {
        if t <= p {
            return Err(parse_err(path, row, format!("time {t} does not increase (previous {p})")));
        }
        if t != p + 1 {
            return Err(parse_err(path, row, format!("time {t} skips hours after {p}")));
        }
    }
    Ok(t)
}

/// Reads an hourly series. Rows are numbered from 1 for the header, so the
/// first data row is row 2 in error messages. Empty or NaN targets are
/// missing; feature gaps are errors.
pub fn read_sparse_series(path: &Path, time_col: &str, feature_cols: &[&str], target_col: &str) -> Result<SparseSeries> {
    let (mut rdr, headers) = open(path)?;
    let t_idx = column(path, &headers, time_col)?;
    let f_idx = feature_cols.iter().map(|c| column(path, &headers, c)).collect::<Result<Vec<_>>>()?;
    let y_idx = column(path, &headers, target_col)?;

    let mut t = Vec::new();
    let mut data = Vec::new();
    let mut target = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| parse_err(path, row, e.to_string()))?;
        t.push(parse_time(path, row, &rec[t_idx], t.last().copied())?);
        for (&j, name) in f_idx.iter().zip(feature_cols) {
            let field = &rec[j];
            let v = if field.is_empty() { f64::NAN } else { parse_value(path, row, name, field)? };
            if !v.is_finite() {
                return Err(parse_err(path, row, format!("feature {name:?} is missing")));
            }
            data.push(v);
        }
        target.push(parse_missing(path, row, target_col, &rec[y_idx])?);
    }
    let features = Matrix::from_vec(t.len(), feature_cols.len(), data)?;
    SparseSeries::new(t, features, target)?.with_feature_names(feature_cols.iter().map(|s| s.to_string()).collect())
}

pub fn write_sparse_series(series: &SparseSeries, path: &Path, target_col: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(series.feature_names.iter().cloned());
    header.push(target_col.to_string());
    w.write_record(&header)?;
    for k in 0..series.len() {
        let mut rec = vec![series.t[k].to_string()];
        rec.extend(series.features.row(k).iter().map(f64::to_string));
        rec.push(if series.mask[k] { series.target[k].to_string() } else { String::new() });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Weather CSV with columns `t, temp_c, rh, rain` and optional `solar`, `wind`.
pub fn read_weather(path: &Path) -> Result<(Vec<i64>, Vec<WeatherRow>)> {
    let (mut rdr, headers) = open(path)?;
    let idx = |n: &str| column(path, &headers, n);
    let (t_i, temp_i, rh_i, rain_i) = (idx("t")?, idx("temp_c")?, idx("rh")?, idx("rain")?);
    let solar_i = headers.iter().position(|h| h == "solar");
    let wind_i = headers.iter().position(|h| h == "wind");
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| parse_err(path, row, e.to_string()))?;
        times.push(parse_time(path, row, &rec[t_i], times.last().copied())?);
        let w = WeatherRow {
            temp_c: parse_value(path, row, "temp_c", &rec[temp_i])?,
            rh: parse_value(path, row, "rh", &rec[rh_i])?,
            rain: parse_value(path, row, "rain", &rec[rain_i])?,
            solar: solar_i.map(|j| parse_missing(path, row, "solar", &rec[j])).transpose()?.flatten(),
            wind: wind_i.map(|j| parse_missing(path, row, "wind", &rec[j])).transpose()?.flatten(),
        };
        w.validate().map_err(|e| parse_err(path, row, e.to_string()))?;
        rows.push(w);
    }
    Ok((times, rows))
}

pub fn write_weather(times: &[i64], rows: &[WeatherRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "temp_c", "rh", "rain"])?;
    for (t, r) in times.iter().zip(rows) {
        w.write_record([t.to_string(), r.temp_c.to_string(), r.rh.to_string(), r.rain.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes equal-length numeric columns under the given headers.
pub fn write_columns(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    if headers.len() != columns.len() {
        return Err(Error::shape("header and column counts differ"));
    }
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::shape("columns differ in length"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for k in 0..n {
        w.write_record(columns.iter().map(|c| c[k].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every named column as numbers; empty fields become NaN.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let (mut rdr, headers) = open(path)?;
    let idx = names.iter().map(|n| column(path, &headers, n)).collect::<Result<Vec<_>>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| parse_err(path, row, e.to_string()))?;
        for ((col, &j), name) in out.iter_mut().zip(&idx).zip(names) {
            col.push(parse_missing(path, row, name, &rec[j])?.unwrap_or(f64::NAN));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_masked_targets() {
        let dir = tempfile::tempdir().unwrap();
        let names: Vec<String> = (0..10).map(|k| format!("f{k}")).collect();
        let mut text = format!("t,{},fm\n", names.join(","));
        for r in 0..48 {
            let feats: Vec<String> = (0..10).map(|k| (r * k) as f64 * 0.1).map(|v| v.to_string()).collect();
            let y = match r {
                3 | 17 => "12.5".to_string(),
                20 => "NaN".to_string(),
                30 | 40 => "9".to_string(),
                _ => String::new(),
            };
            writeln!(text, "{},{},{}", 1000 + r, feats.join(","), y).unwrap();
        }
        let p = write(dir.path(), "s.csv", &text);
        let cols: Vec<&str> = names.iter().map(String::as_str).collect();
        let s = read_sparse_series(&p, "t", &cols, "fm").unwrap();
        assert_eq!(s.len(), 48);
        assert_eq!(s.observed_count(), 4);
        assert_eq!(s.feature_names, names);

        let out = dir.path().join("copy.csv");
        write_sparse_series(&s, &out, "fm").unwrap();
        let again = read_sparse_series(&out, "t", &cols, "fm").unwrap();
        assert_eq!(again.features, s.features);
        assert_eq!(again.mask, s.mask);
    }

    #[test]
    fn empty_target_column_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", "t,x,y\n0,1,\n1,2,\n");
        let s = read_sparse_series(&p, "t", &["x"], "y").unwrap();
        assert_eq!(s.observed_count(), 0);
    }

    #[test]
    fn errors_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.csv", "t,x,y\n0,1,2\n1,2,3\n1,3,4\n");
        match read_sparse_series(&p, "t", &["x"], "y") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
        let p = write(dir.path(), "g.csv", "t,x,y\n0,1,2\n1,,3\n");
        assert!(matches!(read_sparse_series(&p, "t", &["x"], "y"), Err(Error::Parse { row: 3, .. })));
        assert!(matches!(read_sparse_series(&p, "t", &["z"], "y"), Err(Error::Parse { .. })));
    }

    #[test]
    fn weather_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = crate::fmc::synthetic_weather(30, 1);
        let times: Vec<i64> = (0..30).collect();
        let p = dir.path().join("w.csv");
        write_weather(&times, &rows, &p).unwrap();
        let (t, back) = read_weather(&p).unwrap();
        assert_eq!(t, times);
        assert_eq!(back, rows);
        let bad = write(dir.path(), "b.csv", "t,temp_c,rh,rain\n0,20,120,0\n");
        assert!(matches!(read_weather(&bad), Err(Error::Parse { row: 2, .. })));
    }

    #[test]
    fn columns_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let a = [0.1, 1.0 / 3.0, -2e-300];
        let b = [1.0, 2.0, 3.0];
        write_columns(&p, &["a", "b"], &[&a, &b]).unwrap();
        let back = read_columns(&p, &["b", "a"]).unwrap();
        assert_eq!(back[0], b);
        assert_eq!(back[1], a);
    }
}
