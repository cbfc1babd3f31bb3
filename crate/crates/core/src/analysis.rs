//! Binned views of ranking score against contradiction salience, and of
//! salience over publication time.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Number of bins along each axis.
pub const BINS: usize = 5;
/// First year of the first interval.
pub const INTERVAL_ANCHOR: i32 = 1975;
/// Last year covered; the final interval absorbs it.
pub const INTERVAL_END: i32 = 2025;
pub const INTERVAL_WIDTH: i32 = 5;
/// 1975-1979 through 2020-2025.
pub const INTERVALS: usize = ((INTERVAL_END - INTERVAL_ANCHOR) / INTERVAL_WIDTH) as usize;

/// Equal-width bins on [0, 1]: left-closed, right-open, last bin closed.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSpec {
    edges: [f64; BINS + 1],
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            edges: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

impl BinSpec {
    pub fn edges(&self) -> &[f64; BINS + 1] {
        &self.edges
    }

    /// Bin index and whether `v` had to be clamped into range.
    pub fn locate(&self, v: f64) -> (usize, bool) {
        if v.is_nan() {
            return (0, true);
        }
        if v < self.edges[0] {
            return (0, true);
        }
        if v > self.edges[BINS] {
            return (BINS - 1, true);
        }
        let idx = self.edges[1..BINS].iter().take_while(|&&e| e <= v).count();
        (idx, false)
    }

    pub fn label(&self, i: usize) -> String {
        let close = if i == BINS - 1 { ']' } else { ')' };
        format!("[{:.1}-{:.1}{close}", self.edges[i], self.edges[i + 1])
    }
}

/// Document counts with salience bins as rows and ranking-score bins as
/// columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointHistogram {
    pub counts: [[u64; BINS]; BINS],
    /// Points whose S fell outside [0, 1] and were clamped.
    pub score_out_of_range: u64,
    /// Points whose salience fell outside [0, 1] and were clamped.
    pub salience_out_of_range: u64,
}

impl JointHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Bin `(score, salience)` points.
pub fn joint_histogram(points: &[(f64, f64)]) -> JointHistogram {
    let spec = BinSpec::default();
    let mut h = JointHistogram {
        counts: [[0; BINS]; BINS],
        score_out_of_range: 0,
        salience_out_of_range: 0,
    };
    for &(score, salience) in points {
        let (col, s_clamped) = spec.locate(score);
        let (row, c_clamped) = spec.locate(salience);
        h.counts[row][col] += 1;
        h.score_out_of_range += u64::from(s_clamped);
        h.salience_out_of_range += u64::from(c_clamped);
    }
    h
}

/// Interval index for a year, with the clamp flag for years outside
/// [1975, 2025].
pub fn interval_of(year: i32) -> (usize, bool) {
    if year < INTERVAL_ANCHOR {
        return (0, true);
    }
    if year > INTERVAL_END {
        return (INTERVALS - 1, true);
    }
    let idx = ((year - INTERVAL_ANCHOR) / INTERVAL_WIDTH) as usize;
    (idx.min(INTERVALS - 1), false)
}

pub fn interval_label(i: usize) -> String {
    let start = INTERVAL_ANCHOR + i as i32 * INTERVAL_WIDTH;
    let end = if i == INTERVALS - 1 {
        INTERVAL_END
    } else {
        start + INTERVAL_WIDTH - 1
    };
    format!("{start}-{end}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub interval: String,
    pub documents: u64,
    /// Share of the interval's documents per salience bin; all zero when
    /// the interval is empty.
    pub proportions: [f64; BINS],
}

impl TemporalRow {
    pub fn is_empty(&self) -> bool {
        self.documents == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalDistribution {
    pub rows: Vec<TemporalRow>,
    pub year_out_of_range: u64,
    pub salience_out_of_range: u64,
}

/// Salience proportions per 5-year interval from `(year, salience)` points.
pub fn temporal_distribution(points: &[(i32, f64)]) -> TemporalDistribution {
    let spec = BinSpec::default();
    let mut counts = vec![[0u64; BINS]; INTERVALS];
    let mut year_oor = 0;
    let mut sal_oor = 0;
    for &(year, salience) in points {
        let (row, y_clamped) = interval_of(year);
        let (col, s_clamped) = spec.locate(salience);
        counts[row][col] += 1;
        year_oor += u64::from(y_clamped);
        sal_oor += u64::from(s_clamped);
    }
    let rows = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let n: u64 = c.iter().sum();
            let mut proportions = [0.0; BINS];
            if n > 0 {
                for (p, &k) in proportions.iter_mut().zip(c) {
                    *p = k as f64 / n as f64;
                }
            }
            TemporalRow {
                interval: interval_label(i),
                documents: n,
                proportions,
            }
        })
        .collect();
    TemporalDistribution {
        rows,
        year_out_of_range: year_oor,
        salience_out_of_range: sal_oor,
    }
}

/// Table layout: `salience_bin` then one count column per score bin.
pub fn write_joint_csv(mut out: impl Write, h: &JointHistogram) -> io::Result<()> {
    let spec = BinSpec::default();
    write!(out, "salience_bin")?;
    for c in 0..BINS {
        write!(out, ",S_{}", spec.label(c))?;
    }
    writeln!(out)?;
    for (r, row) in h.counts.iter().enumerate() {
        write!(out, "{}", spec.label(r))?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One row per interval: label, document count, empty flag, proportions.
pub fn write_temporal_csv(mut out: impl Write, t: &TemporalDistribution) -> io::Result<()> {
    let spec = BinSpec::default();
    write!(out, "interval,documents,empty")?;
    for c in 0..BINS {
        write!(out, ",salience_{}", spec.label(c))?;
    }
    writeln!(out)?;
    for row in &t.rows {
        write!(out, "{},{},{}", row.interval, row.documents, row.is_empty())?;
        for p in row.proportions {
            write!(out, ",{p}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalysisSummary {
    documents: u64,
    score_out_of_range: u64,
    salience_out_of_range: u64,
    year_out_of_range: u64,
    empty_intervals: Vec<String>,
}

pub const JOINT_CSV: &str = "score_salience.csv";
pub const TEMPORAL_CSV: &str = "temporal_salience.csv";
pub const SUMMARY_JSON: &str = "analysis_summary.json";

/// Write whichever grids are given into `dir`, plus a summary of clamped
/// and empty cells. With `png` set and the `plot` feature on, each grid
/// also gets a heatmap next to its CSV.
pub fn export_analysis(
    dir: &Path,
    joint: Option<&JointHistogram>,
    temporal: Option<&TemporalDistribution>,
    png: bool,
) -> io::Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut summary = AnalysisSummary {
        documents: 0,
        score_out_of_range: 0,
        salience_out_of_range: 0,
        year_out_of_range: 0,
        empty_intervals: Vec::new(),
    };
    if let Some(h) = joint {
        let mut buf = Vec::new();
        write_joint_csv(&mut buf, h)?;
        let path = dir.join(JOINT_CSV);
        fs::write(&path, buf)?;
        written.push(path);
        summary.documents = h.total();
        summary.score_out_of_range = h.score_out_of_range;
        summary.salience_out_of_range = h.salience_out_of_range;
        if png {
            let cells: Vec<Vec<f64>> = h
                .counts
                .iter()
                .rev()
                .map(|r| r.iter().map(|&c| c as f64).collect())
                .collect();
            written.extend(heatmap(&dir.join("score_salience.png"), &cells)?);
        }
    }
    if let Some(t) = temporal {
        let mut buf = Vec::new();
        write_temporal_csv(&mut buf, t)?;
        let path = dir.join(TEMPORAL_CSV);
        fs::write(&path, buf)?;
        written.push(path);
        summary.documents = summary
            .documents
            .max(t.rows.iter().map(|r| r.documents).sum());
        summary.year_out_of_range = t.year_out_of_range;
        summary.salience_out_of_range = summary.salience_out_of_range.max(t.salience_out_of_range);
        summary.empty_intervals = t
            .rows
            .iter()
            .filter(|r| r.is_empty())
            .map(|r| r.interval.clone())
            .collect();
        if png {
            // salience bins as rows (high on top), intervals as columns
            let cells: Vec<Vec<f64>> = (0..BINS)
                .rev()
                .map(|b| t.rows.iter().map(|r| r.proportions[b]).collect())
                .collect();
            written.extend(heatmap(&dir.join("temporal_salience.png"), &cells)?);
        }
    }
    let path = dir.join(SUMMARY_JSON);
    let mut json = serde_json::to_vec_pretty(&summary).map_err(io::Error::other)?;
    json.push(b'\n');
    fs::write(&path, json)?;
    written.push(path);
    Ok(written)
}

#[cfg(feature = "plot")]
fn heatmap(path: &Path, cells: &[Vec<f64>]) -> io::Result<Option<std::path::PathBuf>> {
    const CELL: u32 = 32;
    let rows = cells.len() as u32;
    let cols = cells.first().map_or(0, Vec::len) as u32;
    let max = cells.iter().flatten().copied().fold(0.0f64, f64::max);
    let img = image::RgbImage::from_fn(cols * CELL, rows * CELL, |x, y| {
        let v = cells[(y / CELL) as usize][(x / CELL) as usize];
        let t = if max > 0.0 { v / max } else { 0.0 };
        // white to dark red
        let r = 255.0 - 100.0 * t;
        let gb = 255.0 * (1.0 - t);
        image::Rgb([r as u8, gb as u8, gb as u8])
    });
    img.save(path).map_err(io::Error::other)?;
    Ok(Some(path.to_path_buf()))
}

#[cfg(not(feature = "plot"))]
fn heatmap(path: &Path, _cells: &[Vec<f64>]) -> io::Result<Option<std::path::PathBuf>> {
    log::warn!(
        "built without the plot feature, skipping {}",
        path.display()
    );
    Ok(None)
}
