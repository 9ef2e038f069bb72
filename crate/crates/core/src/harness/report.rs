//! Table-style CSV reports and run artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MethodReport, RunReport};
use crate::error::{Error, Result};
use crate::grid::ImageSequence;
use crate::transform::{transform_image, AffineStack};

/// Column order of `report.csv`.
pub const REPORT_HEADER: [&str; 20] = [
    "level",
    "grid",
    "frames",
    "min_rho",
    "lambda",
    "reduction_spml_pct",
    "reduction_stml_pct",
    "rel_diff_y_pct",
    "time_spml_s",
    "time_stml_s",
    "speedup",
    "evals_spml",
    "evals_stml",
    "frame_evals_spml",
    "frame_evals_stml",
    "frame_eval_ratio",
    "gt_trans_err_spml_cells",
    "gt_trans_err_stml_cells",
    "gt_matrix_err_spml",
    "gt_matrix_err_stml",
];

/// One row of `report.csv`: a spatial level (coarse first) or `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub level: String,
    pub grid: String,
    pub frames: usize,
    pub min_rho: f64,
    pub lambda: f64,
    pub reduction_spml_pct: Option<f64>,
    pub reduction_stml_pct: Option<f64>,
    pub rel_diff_y_pct: Option<f64>,
    pub time_spml_s: Option<f64>,
    pub time_stml_s: Option<f64>,
    pub speedup: Option<f64>,
    pub evals_spml: Option<usize>,
    pub evals_stml: Option<usize>,
    pub frame_evals_spml: Option<f64>,
    pub frame_evals_stml: Option<f64>,
    pub frame_eval_ratio: Option<f64>,
    pub gt_trans_err_spml_cells: Option<f64>,
    pub gt_trans_err_stml_cells: Option<f64>,
    pub gt_matrix_err_spml: Option<f64>,
    pub gt_matrix_err_stml: Option<f64>,
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

impl RunReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let level = |m: &Option<MethodReport>, l: usize| m.as_ref().map(|m| m.levels[l].clone());
        let mut rows: Vec<ReportRow> = (0..self.grids.len())
            .map(|l| {
                let (a, b) = (level(&self.spml, l), level(&self.stml, l));
                let fa = a.as_ref().map(|s| s.frame_evaluations);
                let fb = b.as_ref().map(|s| s.frame_evaluations);
                ReportRow {
                    level: l.to_string(),
                    grid: self.grids[l].clone(),
                    frames: self.frames,
                    min_rho: self.min_rho,
                    lambda: self.lambda,
                    reduction_spml_pct: a.as_ref().and_then(|s| s.reduction_pct),
                    reduction_stml_pct: b.as_ref().and_then(|s| s.reduction_pct),
                    rel_diff_y_pct: self.rel_diff_y_pct.get(l).copied().flatten(),
                    time_spml_s: a.as_ref().map(|s| s.time_s),
                    time_stml_s: b.as_ref().map(|s| s.time_s),
                    speedup: ratio(a.as_ref().map(|s| s.time_s), b.as_ref().map(|s| s.time_s)),
                    evals_spml: a.as_ref().map(|s| s.evaluations),
                    evals_stml: b.as_ref().map(|s| s.evaluations),
                    frame_evals_spml: fa,
                    frame_evals_stml: fb,
                    frame_eval_ratio: ratio(fb, fa),
                    gt_trans_err_spml_cells: None,
                    gt_trans_err_stml_cells: None,
                    gt_matrix_err_spml: None,
                    gt_matrix_err_stml: None,
                }
            })
            .collect();

        let (a, b) = (self.spml.as_ref(), self.stml.as_ref());
        let fa = a.map(|m| m.total_frame_evaluations);
        let fb = b.map(|m| m.total_frame_evaluations);
        let last = self.grids.len().saturating_sub(1);
        rows.push(ReportRow {
            level: "total".into(),
            grid: self.grids.last().cloned().unwrap_or_default(),
            frames: self.frames,
            min_rho: self.min_rho,
            lambda: self.lambda,
            reduction_spml_pct: a.and_then(|m| m.levels[last].reduction_pct),
            reduction_stml_pct: b.and_then(|m| m.levels[last].reduction_pct),
            rel_diff_y_pct: self.rel_diff_y_pct.last().copied().flatten(),
            time_spml_s: a.map(|m| m.total_time_s),
            time_stml_s: b.map(|m| m.total_time_s),
            speedup: self.speedup,
            evals_spml: a.map(|m| m.total_evaluations),
            evals_stml: b.map(|m| m.total_evaluations),
            frame_evals_spml: fa,
            frame_evals_stml: fb,
            frame_eval_ratio: ratio(fb, fa),
            gt_trans_err_spml_cells: a.and_then(|m| m.recovery).map(|r| r.max_translation_cells),
            gt_trans_err_stml_cells: b.and_then(|m| m.recovery).map(|r| r.max_translation_cells),
            gt_matrix_err_spml: a.and_then(|m| m.recovery).map(|r| r.max_matrix),
            gt_matrix_err_stml: b.and_then(|m| m.recovery).map(|r| r.max_matrix),
        });
        rows
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for row in self.rows() {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per registration solve, tagged with the method.
    pub fn write_level_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        for m in [&self.spml, &self.stml].into_iter().flatten() {
            for run in &m.runs {
                let mut value = serde_json::to_value(run)?;
                value
                    .as_object_mut()
                    .expect("LevelRun serializes to an object")
                    .insert("method".into(), m.method.clone().into());
                serde_json::to_writer(&mut out, &value)?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `report.csv`, `report.json`, `levels.jsonl` and the transforms.
    /// `transforms.txt` holds the STML result when it ran, else SpML's.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.write_csv(dir.join("report.csv"))?;
        self.write_level_log(dir.join("levels.jsonl"))?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        let primary = self.stml.as_ref().or(self.spml.as_ref());
        if let Some(y) = primary.and_then(|m| m.transforms.as_ref()) {
            fs::write(dir.join("transforms.txt"), y.to_text())?;
        }
        if let (Some(_), Some(spml)) = (&self.stml, &self.spml) {
            if let Some(y) = &spml.transforms {
                fs::write(dir.join("transforms_spml.txt"), y.to_text())?;
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Concatenates the `report.csv` of every run directory below `runs_dir`
/// (sorted by name) into one CSV with a leading `run` column.
pub fn aggregate_reports(runs_dir: impl AsRef<Path>, out: impl Write) -> Result<usize> {
    let mut dirs: Vec<_> = fs::read_dir(runs_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("report.csv").is_file())
        .collect();
    dirs.sort();

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["run"];
    header.extend(REPORT_HEADER);
    w.write_record(&header).map_err(csv_err)?;
    for dir in &dirs {
        let path = dir.join("report.csv");
        let mut r = csv::Reader::from_path(&path).map_err(csv_err)?;
        let found: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if found != REPORT_HEADER {
            return Err(Error::Parse(format!("{} has unexpected columns", path.display())));
        }
        let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for record in r.records() {
            let record = record.map_err(csv_err)?;
            let mut fields = vec![name.as_str()];
            fields.extend(record.iter());
            w.write_record(&fields).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(dirs.len())
}

/// Intensity along the first axis through the grid center, for every frame,
/// before and after applying each named transform stack.
pub fn write_line_profile(path: impl AsRef<Path>, seq: &ImageSequence, stacks: &[(&str, &AffineStack)]) -> Result<()> {
    let grid = seq.grid();
    let dims = grid.dims();
    let strides = grid.strides();
    let offset: usize = (1..dims.len()).map(|a| (dims[a] / 2) * strides[a]).sum();

    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["frame".to_string(), "time".into(), "position".into(), "unregistered".into()];
    header.extend(stacks.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header).map_err(csv_err)?;

    for k in 1..=seq.len() {
        let frame = seq.frame(k);
        let warped = stacks
            .iter()
            .map(|(name, y)| {
                y.get(k)
                    .map(|t| transform_image(frame, t))
                    .ok_or_else(|| Error::ShapeMismatch(format!("{name} lacks frame {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        for i in 0..dims[0] {
            let idx = offset + i;
            let x = grid.origin()[0] + (i as f64 + 0.5) * grid.spacing()[0];
            let mut rec = vec![k.to_string(), seq.time(k).to_string(), x.to_string(), frame.values()[idx].to_string()];
            rec.extend(warped.iter().map(|img| img.values()[idx].to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
