//! CSV and JSON artifacts. Every file is written atomically through a
//! temporary file in the target directory.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_points::{Corroboration, FixedPointReport};
use crate::lyapunov::DescentSample;
use crate::model::{ClassId, EmpiricalVector, Trajectory};

/// Writes `contents` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `t,q.<j>.<c|p>.<z>,...` with 1-based block and state labels.
pub fn trajectory_header(r: usize, k: usize) -> String {
    let mut h = String::from("t");
    for class in ClassId::all(r) {
        for z in 1..=k {
            let _ = write!(h, ",q.{}.{}.{z}", class.block + 1, class.role.tag());
        }
    }
    h
}

fn push_float(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.16e}");
}

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let (r, k) = traj
        .values
        .first()
        .map_or((0, 0), |q| (q.n_blocks(), q.k()));
    let mut out = trajectory_header(r, k);
    out.push('\n');
    for (t, q) in traj.times.iter().zip(&traj.values) {
        push_float(&mut out, *t);
        for &x in q.as_slice() {
            out.push(',');
            push_float(&mut out, x);
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_atomic(path, trajectory_to_csv(traj).as_bytes())
}

/// Parses the output of [`trajectory_to_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"t") {
        return Err(Error::Parse("trajectory header must start with t".into()));
    }
    let mut k = 0;
    for col in &columns[1..] {
        let z: usize = col
            .rsplit('.')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad column {col}")))?;
        k = k.max(z);
    }
    let width = columns.len() - 1;
    if k == 0 || width % (2 * k) != 0 || trajectory_header(width / (2 * k), k) != header {
        return Err(Error::Parse(format!("unexpected header {header}")));
    }
    let mut traj = Trajectory::with_capacity(0);
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let values: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", n + 2)))?;
        if values.len() != width + 1 {
            return Err(Error::Parse(format!("row {} has {} fields", n + 2, values.len())));
        }
        traj.push(values[0], EmpiricalVector::from_flat_unchecked(k, values[1..].to_vec()));
    }
    Ok(traj)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    parse_trajectory_csv(&std::fs::read_to_string(path)?)
}

/// `t,F,dFdt,flag` with `flag` 0 or 1.
pub fn descent_to_csv(rows: &[DescentSample]) -> String {
    let mut out = String::from("t,F,dFdt,flag\n");
    for s in rows {
        push_float(&mut out, s.t);
        out.push(',');
        push_float(&mut out, s.f);
        out.push(',');
        push_float(&mut out, s.dfdt);
        let _ = writeln!(out, ",{}", u8::from(s.flag));
    }
    out
}

#[derive(Serialize)]
struct FixedPointRecord<'a> {
    point: Vec<Vec<f64>>,
    residual: f64,
    field_residual: f64,
    #[serde(rename = "F_value")]
    f_value: f64,
    classification: Option<&'static str>,
    eigen_real_parts: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    corroboration: Option<&'a Corroboration>,
}

pub fn fixed_points_to_json(reports: &[FixedPointReport]) -> String {
    let records: Vec<FixedPointRecord<'_>> = reports
        .iter()
        .map(|r| FixedPointRecord {
            point: r.point.components(),
            residual: r.residual,
            field_residual: r.field_residual,
            f_value: r.f_value,
            classification: r.classification.map(|c| c.as_str()),
            eigen_real_parts: &r.eigen_real_parts,
            corroboration: r.corroboration.as_ref(),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&records).expect("records serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            trajectory_header(1, 2),
            "t,q.1.c.1,q.1.c.2,q.1.p.1,q.1.p.2"
        );
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let mut traj = Trajectory::with_capacity(2);
        traj.push(0.0, EmpiricalVector::from_components(&[vec![0.1, 0.9], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap());
        traj.push(0.01, EmpiricalVector::uniform(1, 2));
        let text = trajectory_to_csv(&traj);
        assert!(text.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,1.0000000000000001e-1"));
        assert_eq!(parse_trajectory_csv(&text).unwrap(), traj);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
