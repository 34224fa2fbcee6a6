//! CSV interchange for point clouds, embeddings, classifiers, barcodes and
//! training metrics. Every file has a header row; floats are written in
//! shortest round-trip form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::fewshot::{BaseClassifier, EmbeddingDataset, EpochMetrics, Split};
use crate::persistence::Barcode;
use crate::PointCloud;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn parse_f64(s: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("row {row}, column {col}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!(
            "row {row}, column {col}: non-finite value {s}"
        )));
    }
    Ok(v)
}

fn parse_index(s: &str, row: usize, col: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| {
        Error::invalid(format!(
            "row {row}, column {col}: not a non-negative integer: {s:?}"
        ))
    })
}

/// A numeric table with an optional integer key column picked out by name.
struct Table {
    keys: Option<Vec<usize>>,
    rows: Vec<Vec<f64>>,
    width: usize,
}

fn read_table(reader: impl Read, key_column: &str, key_required: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::invalid("missing header row"));
    }
    let key_at = headers.iter().position(|h| h == key_column);
    if key_required && key_at.is_none() {
        return Err(Error::invalid(format!(
            "missing required column {key_column:?}"
        )));
    }
    let value_cols: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != key_at).collect();
    if value_cols.is_empty() {
        return Err(Error::invalid("no coordinate columns"));
    }
    let mut keys = key_at.map(|_| Vec::new());
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if let (Some(k), Some(keys)) = (key_at, keys.as_mut()) {
            keys.push(parse_index(&record[k], r, key_column)?);
        }
        let row = value_cols
            .iter()
            .map(|&c| parse_f64(&record[c], r, &headers[c]))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table {
        keys,
        rows,
        width: value_cols.len(),
    })
}

fn to_matrix(rows: &[Vec<f64>], width: usize) -> Result<Array2<f64>> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::invalid(e.to_string()))
}

/// Point cloud CSV: one row per point, a header row, every column numeric
/// except an optional `label` column, which is ignored.
pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    read_point_cloud_from(open(path)?)
}

pub fn read_point_cloud_from(reader: impl Read) -> Result<PointCloud> {
    let table = read_table(reader, "label", false)?;
    if table.rows.is_empty() {
        return Err(Error::invalid("point cloud has no rows"));
    }
    PointCloud::new(to_matrix(&table.rows, table.width)?)
}

/// Embedding CSV with header `label,e0,...`. `class_count` defaults to the
/// largest label plus one.
pub fn read_embeddings(
    path: &Path,
    split: Split,
    class_count: Option<usize>,
) -> Result<EmbeddingDataset> {
    read_embeddings_from(open(path)?, split, class_count)
}

pub fn read_embeddings_from(
    reader: impl Read,
    split: Split,
    class_count: Option<usize>,
) -> Result<EmbeddingDataset> {
    let table = read_table(reader, "label", true)?;
    let labels = table.keys.expect("label column is required");
    let k = class_count.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    EmbeddingDataset::new(to_matrix(&table.rows, table.width)?, labels, k, split)
}

/// Class-keyed matrix with header `class,e0,...`: exactly one row per class
/// `0..K`, in any order.
pub fn read_class_matrix(path: &Path) -> Result<Array2<f64>> {
    read_class_matrix_from(open(path)?)
}

pub fn read_class_matrix_from(reader: impl Read) -> Result<Array2<f64>> {
    let table = read_table(reader, "class", true)?;
    let keys = table.keys.expect("class column is required");
    let k = keys.len();
    let mut slots: Vec<Option<&Vec<f64>>> = vec![None; k];
    for (row, &class) in table.rows.iter().zip(&keys) {
        if class >= k {
            return Err(Error::invalid(format!(
                "class {class} out of range for {k} rows"
            )));
        }
        if slots[class].replace(row).is_some() {
            return Err(Error::invalid(format!("class {class} appears twice")));
        }
    }
    let ordered: Vec<Vec<f64>> = slots
        .into_iter()
        .map(|r| r.expect("every slot filled").clone())
        .collect();
    to_matrix(&ordered, table.width)
}

pub fn read_base_classifier(path: &Path) -> Result<BaseClassifier> {
    BaseClassifier::new(read_class_matrix(path)?)
}

fn embedding_header(key: &str, d: usize) -> Vec<String> {
    std::iter::once(key.to_string())
        .chain((0..d).map(|j| format!("e{j}")))
        .collect()
}

fn write_keyed_rows(
    writer: impl Write,
    key: &str,
    keys: &[usize],
    rows: ArrayView2<'_, f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(embedding_header(key, rows.ncols()))?;
    for (k, row) in keys.iter().zip(rows.rows()) {
        let record: Vec<String> = std::iter::once(k.to_string())
            .chain(row.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_embeddings(path: &Path, ds: &EmbeddingDataset) -> Result<()> {
    write_keyed_rows(create(path)?, "label", ds.labels(), ds.embeddings())
}

/// Writes a `K x D` class-keyed matrix (base classifier or residual).
pub fn write_class_matrix(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    write_class_matrix_to(create(path)?, m)
}

pub fn write_class_matrix_to(writer: impl Write, m: ArrayView2<'_, f64>) -> Result<()> {
    let keys: Vec<usize> = (0..m.nrows()).collect();
    write_keyed_rows(writer, "class", &keys, m)
}

/// Point cloud CSV with header `x0,x1,...`.
pub fn write_point_cloud_to(writer: impl Write, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((0..cloud.d()).map(|j| format!("x{j}")))?;
    for row in cloud.points().rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

fn format_death(d: f64) -> String {
    if d == f64::INFINITY {
        "inf".to_string()
    } else {
        d.to_string()
    }
}

/// Barcode CSV: `dim,birth,death` with `inf` for classes that never die.
pub fn write_barcode_to(writer: impl Write, barcode: &Barcode) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dim", "birth", "death"])?;
    for p in barcode.pairs() {
        w.write_record([
            p.dim.to_string(),
            p.birth.to_string(),
            format_death(p.death),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Parses barcode CSV back into `(dim, birth, death)` triples.
pub fn read_barcode_from(reader: impl Read) -> Result<Vec<(usize, f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::invalid(format!(
                "barcode row {r} has {} fields",
                rec.len()
            )));
        }
        let death = if &rec[2] == "inf" {
            f64::INFINITY
        } else {
            parse_f64(&rec[2], r, "death")?
        };
        out.push((
            parse_index(&rec[0], r, "dim")?,
            parse_f64(&rec[1], r, "birth")?,
            death,
        ));
    }
    Ok(out)
}

pub fn write_metrics(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    write_metrics_to(create(path)?, metrics)
}

/// Metrics CSV: `epoch,l_ce,l_rtd,l_total,train_acc`.
pub fn write_metrics_to(writer: impl Write, metrics: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "l_ce", "l_rtd", "l_total", "train_acc"])?;
    for m in metrics {
        w.write_record([
            m.epoch.to_string(),
            m.l_ce.to_string(),
            m.l_rtd.to_string(),
            m.l_total.to_string(),
            m.train_acc.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
