//! File formats: two-column trace CSV and flat feature CSV.
//!
//! Floats are written with 17 significant digits so that a write/read
//! round trip reproduces every finite `f64` bit-exactly.

use crate::error::{Error, Result};
use crate::types::{FeatureLabels, FeatureVector, VibrationTrace};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// 17 significant digits: enough to round-trip any finite f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason: format!("not a number: {s:?}"),
    })
}

fn open_reader(path: &Path) -> Result<BufReader<fs::File>> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write one sensor channel as `time_s,amplitude` rows.
pub fn write_trace_csv(trace: &VibrationTrace, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "time_s,amplitude").map_err(io_err(path))?;
    let dt = 1.0 / trace.sample_rate_hz();
    for (i, s) in trace.samples().iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(i as f64 * dt), fmt_f64(*s)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read a `time_s,amplitude` CSV back into a trace. The sample rate is
/// recovered from the first two timestamps; sensor metadata is supplied
/// by the caller (it lives in the manifest, not the file).
pub fn read_trace_csv(path: &Path, sensor_id: &str, sensor_position_m: f64) -> Result<VibrationTrace> {
    let reader = open_reader(path)?;
    let mut samples = Vec::new();
    let mut times = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != "time_s,amplitude" {
                return Err(Error::MalformedRow {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: format!("expected header 'time_s,amplitude', got {:?}", line.trim()),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(2, ',');
        let t = cols.next().unwrap_or("");
        let a = cols.next().ok_or_else(|| Error::MalformedRow {
            path: path.to_path_buf(),
            line: lineno,
            reason: "expected two columns".into(),
        })?;
        let t = parse_f64(t, path, lineno)?;
        let a = parse_f64(a, path, lineno)?;
        if !a.is_finite() {
            return Err(Error::NonFiniteSample {
                path: path.to_path_buf(),
                line: lineno,
            });
        }
        times.push(t);
        samples.push(a);
    }
    if samples.len() < 2 {
        return Err(Error::MalformedManifest {
            path: path.to_path_buf(),
            reason: format!("trace needs at least 2 samples, found {}", samples.len()),
        });
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 3,
            reason: "timestamps must be strictly increasing".into(),
        });
    }
    VibrationTrace::new(samples, 1.0 / dt, sensor_id, sensor_position_m)
}

fn label_cell(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("")
}

fn cell_label(s: &str) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

/// Write features as CSV. Layout:
///
/// ```text
/// band_edges_hz,<e0>,...,<ed>
/// band_0,...,band_{d-1},person_id,location_id,structure_id
/// <v0>,...,<v_{d-1}>,p03,loc4,wood
/// ```
///
/// The first line pins the shared band partition; empty label cells mean
/// "unknown". An empty feature list writes a headers-only file.
pub fn save_features(features: &[FeatureVector], path: &Path) -> Result<()> {
    let d = features.first().map(|f| f.dim()).unwrap_or(0);
    for f in features {
        if f.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: f.dim(),
            });
        }
        if f.band_edges_hz() != features[0].band_edges_hz() {
            return Err(Error::DegenerateData {
                reason: "all feature vectors in one file must share band edges".into(),
            });
        }
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);

    let mut edge_line = String::from("band_edges_hz");
    if let Some(first) = features.first() {
        for e in first.band_edges_hz() {
            edge_line.push(',');
            edge_line.push_str(&fmt_f64(*e));
        }
    }
    writeln!(w, "{edge_line}").map_err(io_err(path))?;

    let mut header = String::new();
    for i in 0..d {
        header.push_str(&format!("band_{i},"));
    }
    header.push_str("person_id,location_id,structure_id");
    writeln!(w, "{header}").map_err(io_err(path))?;

    for f in features {
        let mut row = String::new();
        for v in f.values() {
            row.push_str(&fmt_f64(*v));
            row.push(',');
        }
        row.push_str(&format!(
            "{},{},{}",
            label_cell(&f.labels.person_id),
            label_cell(&f.labels.location_id),
            label_cell(&f.labels.structure_id)
        ));
        writeln!(w, "{row}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Inverse of [`save_features`].
pub fn load_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let reader = open_reader(path)?;
    let mut lines = reader.lines().enumerate();

    let (_, edge_line) = lines.next().ok_or_else(|| Error::MalformedManifest {
        path: path.to_path_buf(),
        reason: "empty feature file".into(),
    })?;
    let edge_line = edge_line.map_err(io_err(path))?;
    let mut edge_cells = edge_line.split(',');
    if edge_cells.next() != Some("band_edges_hz") {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            reason: "expected 'band_edges_hz' preamble".into(),
        });
    }
    let band_edges: Vec<f64> = edge_cells
        .map(|c| parse_f64(c, path, 1))
        .collect::<Result<_>>()?;

    let (_, header) = lines.next().ok_or_else(|| Error::MalformedRow {
        path: path.to_path_buf(),
        line: 2,
        reason: "missing header row".into(),
    })?;
    let header = header.map_err(io_err(path))?;
    let d = header
        .split(',')
        .take_while(|c| c.starts_with("band_"))
        .count();
    if !band_edges.is_empty() && band_edges.len() != d + 1 {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("{} band edges for {} band columns", band_edges.len(), d),
        });
    }

    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(io_err(path))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 3 {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line: lineno,
                reason: format!("expected {} cells, got {}", d + 3, cells.len()),
            });
        }
        let values: Vec<f64> = cells[..d]
            .iter()
            .map(|c| parse_f64(c, path, lineno))
            .collect::<Result<_>>()?;
        let labels = FeatureLabels {
            person_id: cell_label(cells[d]),
            location_id: cell_label(cells[d + 1]),
            structure_id: cell_label(cells[d + 2]),
        };
        out.push(
            FeatureVector::new(values, band_edges.clone(), labels).map_err(|e| {
                Error::MalformedRow {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: e.to_string(),
                }
            })?,
        );
    }
    Ok(out)
}
