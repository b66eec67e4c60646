use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use vhip::simulator::{ComparisonReport, Sample, Summary, ThresholdResult};
use vhip::{Scenario, Trajectory};

use crate::config::OutputFormat;

pub const TRAJECTORY_COLUMNS: [&str; 22] = [
    "t", "c_x", "c_y", "c_z", "cd_x", "cd_y", "cd_z", "xi_x", "xi_y", "xi_z", "omega", "lambda", "z_x", "z_y", "z_z",
    "sigma_x", "sigma_y", "sigma_z", "sat_zmp", "sat_lambda", "sat_omega", "sat_height",
];

/// One trajectory line; field order is the file schema.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub c_z: f64,
    pub cd_x: f64,
    pub cd_y: f64,
    pub cd_z: f64,
    pub xi_x: f64,
    pub xi_y: f64,
    pub xi_z: f64,
    pub omega: f64,
    pub lambda: f64,
    pub z_x: f64,
    pub z_y: f64,
    pub z_z: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    pub sat_zmp: u8,
    pub sat_lambda: u8,
    pub sat_omega: u8,
    pub sat_height: u8,
}

impl From<&Sample> for TrajectoryRow {
    fn from(s: &Sample) -> Self {
        Self {
            t: s.t,
            c_x: s.c.x,
            c_y: s.c.y,
            c_z: s.c.z,
            cd_x: s.c_dot.x,
            cd_y: s.c_dot.y,
            cd_z: s.c_dot.z,
            xi_x: s.xi.x,
            xi_y: s.xi.y,
            xi_z: s.xi.z,
            omega: s.omega,
            lambda: s.lambda,
            z_x: s.z.x,
            z_y: s.z.y,
            z_z: s.z.z,
            sigma_x: s.sigma.x,
            sigma_y: s.sigma.y,
            sigma_z: s.sigma.z,
            sat_zmp: s.saturation.zmp.into(),
            sat_lambda: s.saturation.lambda.into(),
            sat_omega: s.saturation.omega.into(),
            sat_height: s.saturation.height.into(),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn write_trajectory(path: &Path, trajectory: &Trajectory, format: OutputFormat) -> Result<()> {
    let rows = trajectory.samples.iter().map(TrajectoryRow::from);
    let mut out = create(path)?;
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            writer.write_record(TRAJECTORY_COLUMNS)?;
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer(&mut out, &rows.collect::<Vec<_>>())?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub summary: &'a Summary,
    pub reference_omega: f64,
    pub reference_lambda: f64,
    pub median_solve_time_us: Option<f64>,
    pub scenario: &'a Scenario,
}

impl<'a> RunRecord<'a> {
    pub fn new(trajectory: &'a Trajectory, scenario: &'a Scenario) -> Self {
        Self {
            summary: &trajectory.summary,
            reference_omega: trajectory.reference.omega,
            reference_lambda: trajectory.reference.lambda,
            median_solve_time_us: trajectory.median_solve_time().map(|d| d.as_secs_f64() * 1e6),
            scenario,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRecord<'a> {
    pub result: &'a ThresholdResult,
    pub scenario: &'a Scenario,
}

#[derive(Debug, Serialize)]
pub struct ComparisonLine {
    pub magnitude: f64,
    pub baseline_outcome: String,
    pub candidate_outcome: String,
    pub max_zmp_difference: f64,
    pub max_dcm_difference: f64,
    pub max_candidate_delta_omega: f64,
    pub baseline_file: String,
    pub candidate_file: String,
}

#[derive(Debug, Serialize)]
pub struct ComparisonRecord {
    pub baseline: String,
    pub candidate: String,
    pub entries: Vec<ComparisonLine>,
}

impl ComparisonRecord {
    pub fn new(report: &ComparisonReport, files: &[(String, String)]) -> Self {
        Self {
            baseline: report.baseline.clone(),
            candidate: report.candidate.clone(),
            entries: report
                .entries
                .iter()
                .zip(files)
                .map(|(e, (baseline_file, candidate_file))| ComparisonLine {
                    magnitude: e.magnitude,
                    baseline_outcome: e.baseline.outcome().as_str().into(),
                    candidate_outcome: e.candidate.outcome().as_str().into(),
                    max_zmp_difference: e.max_zmp_difference,
                    max_dcm_difference: e.max_dcm_difference,
                    max_candidate_delta_omega: e.max_candidate_delta_omega,
                    baseline_file: baseline_file.clone(),
                    candidate_file: candidate_file.clone(),
                })
                .collect(),
        }
    }
}
