//! CSV readers and writers for the file schemas the toolkit accepts.
//!
//! Right-censored: header `time,status[,group][,z1,...]` where any column
//! other than time/status/group is treated as a numeric covariate in header
//! order. Interval-censored: header `left,right` with `inf` accepted for an
//! infinite right endpoint. Multi-state: header `id,time,from,to` with
//! censoring rows encoded as `to = -1`. Bivariate pairs: header
//! `t1,status1,t2,status2`. All parse failures carry 1-based line numbers.

use crate::data::{
    BivariatePair, IntervalCensoredRecord, IntervalCensoredSample, MultiStateHistory,
    RightCensoredRecord, RightCensoredSample, SubjectPath,
};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

fn parse_f64(field: &str, line: usize, col: &str) -> Result<f64> {
    let s = field.trim();
    let lowered = s.to_ascii_lowercase();
    if lowered == "inf" || lowered == "+inf" || lowered == "infinity" {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("column '{col}': '{s}' is not a number"),
    })
}

fn parse_i64(field: &str, line: usize, col: &str) -> Result<i64> {
    let s = field.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    // Tolerate integer-valued floats such as "1.0".
    if let Ok(v) = s.parse::<f64>() {
        if v.fract() == 0.0 && v.abs() < 9e15 {
            return Ok(v as i64);
        }
    }
    Err(Error::Parse {
        line,
        msg: format!("column '{col}': '{s}' is not an integer label"),
    })
}

struct Table {
    headers: Vec<String>,
    /// (1-based line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_path(path)
            .map_err(|e| Error::validation(format!("cannot open {}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2; // header is line 1
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            rows.push((line, rec.iter().map(|f| f.to_string()).collect()));
        }
        if rows.is_empty() {
            return Err(Error::validation(format!("{} has no data rows", path.display())));
        }
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("missing required column '{name}'")))
    }
}

/// Options for reading the right-censored schema with renamed label columns.
#[derive(Debug, Clone, Default)]
pub struct RightCensoredReadOptions {
    /// Column holding the group label; defaults to `group` when present.
    pub group_col: Option<String>,
    /// Column holding a stratum label, returned alongside the sample.
    pub strata_col: Option<String>,
}

/// A right-censored sample plus optional per-record stratum labels.
pub struct RightCensoredFile {
    pub sample: RightCensoredSample,
    /// Parallel to `sample.records()` when a strata column was requested.
    pub strata: Option<Vec<i64>>,
}

/// Reads the right-censored schema `time,status[,group][,covariates...]`.
pub fn read_right_censored(path: &Path) -> Result<RightCensoredSample> {
    Ok(read_right_censored_with(path, &RightCensoredReadOptions::default())?.sample)
}

/// Reads the right-censored schema with configurable label columns.
pub fn read_right_censored_with(
    path: &Path,
    opts: &RightCensoredReadOptions,
) -> Result<RightCensoredFile> {
    let table = Table::read(path)?;
    let time_idx = table.column("time")?;
    let status_idx = table.column("status")?;
    let group_name = opts.group_col.clone().unwrap_or_else(|| "group".to_string());
    let group_idx = if opts.group_col.is_some() {
        Some(table.column(&group_name)?)
    } else {
        table.headers.iter().position(|h| h == "group")
    };
    let strata_idx = match &opts.strata_col {
        Some(name) => Some(table.column(name)?),
        None => None,
    };
    let special: Vec<usize> = [Some(time_idx), Some(status_idx), group_idx, strata_idx]
        .into_iter()
        .flatten()
        .collect();
    let covariate_idx: Vec<usize> = (0..table.headers.len())
        .filter(|i| !special.contains(i))
        .collect();

    let mut records = Vec::with_capacity(table.rows.len());
    let mut strata = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let time = parse_f64(&fields[time_idx], *line, "time")?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Parse {
                line: *line,
                msg: format!("time {time} is not finite and nonnegative"),
            });
        }
        let status_val = parse_i64(&fields[status_idx], *line, "status")?;
        if status_val != 0 && status_val != 1 {
            return Err(Error::Parse {
                line: *line,
                msg: format!("status {status_val} is not 0 or 1"),
            });
        }
        let group = match group_idx {
            Some(idx) => Some(parse_i64(&fields[idx], *line, &group_name)?),
            None => None,
        };
        if let Some(idx) = strata_idx {
            strata.push(parse_i64(&fields[idx], *line, opts.strata_col.as_ref().unwrap())?);
        }
        let mut covariates = Vec::with_capacity(covariate_idx.len());
        for &ci in &covariate_idx {
            let v = parse_f64(&fields[ci], *line, &table.headers[ci])?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("column '{}': non-finite covariate", table.headers[ci]),
                });
            }
            covariates.push(v);
        }
        records.push(RightCensoredRecord { time, status: status_val as u8, group, covariates });
    }
    Ok(RightCensoredFile {
        sample: RightCensoredSample::new(records)?,
        strata: if strata_idx.is_some() { Some(strata) } else { None },
    })
}

/// Reads the interval-censored schema `left,right` ((L, R], `inf` allowed).
pub fn read_interval_censored(path: &Path) -> Result<IntervalCensoredSample> {
    let table = Table::read(path)?;
    let left_idx = table.column("left")?;
    let right_idx = table.column("right")?;
    let mut records = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let left = parse_f64(&fields[left_idx], *line, "left")?;
        let right = parse_f64(&fields[right_idx], *line, "right")?;
        if !left.is_finite() || left < 0.0 {
            return Err(Error::Parse {
                line: *line,
                msg: format!("left endpoint {left} is not finite and nonnegative"),
            });
        }
        if right < left {
            return Err(Error::Parse {
                line: *line,
                msg: format!("right endpoint {right} is below left endpoint {left}"),
            });
        }
        records.push(IntervalCensoredRecord { left, right });
    }
    IntervalCensoredSample::new(records)
}

/// Reads the multi-state schema `id,time,from,to` (censor rows have to = -1).
pub fn read_multistate(path: &Path, n_states: usize) -> Result<MultiStateHistory> {
    let table = Table::read(path)?;
    let id_idx = table.column("id")?;
    let time_idx = table.column("time")?;
    let from_idx = table.column("from")?;
    let to_idx = table.column("to")?;

    // Row order within a subject is not trusted; sort by time per subject.
    let mut per_subject: BTreeMap<i64, Vec<(usize, f64, i64, i64)>> = BTreeMap::new();
    for (line, fields) in &table.rows {
        let id = parse_i64(&fields[id_idx], *line, "id")?;
        let time = parse_f64(&fields[time_idx], *line, "time")?;
        let from = parse_i64(&fields[from_idx], *line, "from")?;
        let to = parse_i64(&fields[to_idx], *line, "to")?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Parse {
                line: *line,
                msg: format!("time {time} is not finite and nonnegative"),
            });
        }
        if from < 0 || from as usize >= n_states {
            return Err(Error::Parse {
                line: *line,
                msg: format!("from-state {from} outside 0..{n_states}"),
            });
        }
        if to < -1 || to as usize >= n_states && to != -1 {
            return Err(Error::Parse {
                line: *line,
                msg: format!("to-state {to} outside 0..{n_states} (or -1 for censoring)"),
            });
        }
        per_subject.entry(id).or_default().push((*line, time, from, to));
    }

    let mut subjects = Vec::with_capacity(per_subject.len());
    for (id, mut rows) in per_subject {
        rows.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let initial_state = rows[0].2 as usize;
        let mut transitions = Vec::new();
        let mut censor_time = None;
        for (line, time, from, to) in rows {
            if censor_time.is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("subject {id}: row after censoring row"),
                });
            }
            if to == -1 {
                censor_time = Some(time);
                let _ = from; // the from-state of a censor row is checked by the history
            } else {
                transitions.push((time, from as usize, to as usize));
            }
        }
        subjects.push(SubjectPath { id, initial_state, transitions, censor_time });
    }
    MultiStateHistory::new(n_states, subjects)
}

/// Reads the bivariate pairs schema `t1,status1,t2,status2`.
pub fn read_pairs(path: &Path) -> Result<Vec<BivariatePair>> {
    let table = Table::read(path)?;
    let idx = [
        table.column("t1")?,
        table.column("status1")?,
        table.column("t2")?,
        table.column("status2")?,
    ];
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let t1 = parse_f64(&fields[idx[0]], *line, "t1")?;
        let t2 = parse_f64(&fields[idx[2]], *line, "t2")?;
        for (name, t) in [("t1", t1), ("t2", t2)] {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("{name} = {t} is not finite and nonnegative"),
                });
            }
        }
        let s1 = parse_i64(&fields[idx[1]], *line, "status1")?;
        let s2 = parse_i64(&fields[idx[3]], *line, "status2")?;
        for (name, s) in [("status1", s1), ("status2", s2)] {
            if s != 0 && s != 1 {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("{name} = {s} is not 0 or 1"),
                });
            }
        }
        out.push(BivariatePair { t1, status1: s1 as u8, t2, status2: s2 as u8 });
    }
    Ok(out)
}

/// Writes a right-censored sample in the `time,status[,group][,z...]` schema.
pub fn write_right_censored<W: Write>(sample: &RightCensoredSample, mut w: W) -> Result<()> {
    let d = sample.n_covariates();
    let has_group = sample.records().iter().any(|r| r.group.is_some());
    let mut header = vec!["time".to_string(), "status".to_string()];
    if has_group {
        header.push("group".to_string());
    }
    for j in 1..=d {
        header.push(format!("z{j}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for r in sample.records() {
        let mut fields = vec![format_csv_f64(r.time), r.status.to_string()];
        if has_group {
            fields.push(r.group.map(|g| g.to_string()).unwrap_or_default());
        }
        for z in &r.covariates {
            fields.push(format_csv_f64(*z));
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Writes a multi-state history in the `id,time,from,to` schema.
pub fn write_multistate<W: Write>(history: &MultiStateHistory, mut w: W) -> Result<()> {
    writeln!(w, "id,time,from,to")?;
    for s in history.subjects() {
        let mut state = s.initial_state;
        for &(t, from, to) in &s.transitions {
            writeln!(w, "{},{},{},{}", s.id, format_csv_f64(t), from, to)?;
            state = to;
        }
        if let Some(c) = s.censor_time {
            writeln!(w, "{},{},{},-1", s.id, format_csv_f64(c), state)?;
        }
    }
    Ok(())
}

/// Deterministic float formatting for CSV output (`inf` for +infinity).
pub fn format_csv_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        // Shortest round-trip representation, stable across runs.
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn reads_right_censored_with_covariates_and_group() {
        let f = write_temp("time,status,group,age,dose\n1.5,1,0,63,1.2\n2.0,0,1,41,0.7\n");
        let sample = read_right_censored(f.path()).unwrap();
        assert_eq!(sample.n(), 2);
        assert_eq!(sample.n_covariates(), 2);
        assert_eq!(sample.records()[0].group, Some(0));
        assert_eq!(sample.records()[1].covariates, vec![41.0, 0.7]);
    }

    #[test]
    fn line_numbers_on_bad_fields() {
        let f = write_temp("time,status\n1.0,1\nx,1\n");
        match read_right_censored(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write_temp("time,status\n1.0,2\n");
        match read_right_censored(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected status error, got {other:?}"),
        }
        let f = write_temp("time,wrong\n1.0,1\n");
        assert!(matches!(read_right_censored(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn reads_intervals_with_inf() {
        let f = write_temp("left,right\n0.0,1.0\n2.0,inf\n3.0,3.0\n");
        let s = read_interval_censored(f.path()).unwrap();
        assert_eq!(s.records()[1].right, f64::INFINITY);
        assert!(s.records()[2].is_exact());
        let f = write_temp("left,right\n2.0,1.0\n");
        assert!(matches!(read_interval_censored(f.path()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn reads_multistate_with_censor_rows() {
        let f = write_temp("id,time,from,to\n1,1.0,0,1\n1,2.5,1,2\n2,0.8,0,-1\n");
        let h = read_multistate(f.path(), 3).unwrap();
        assert_eq!(h.n_subjects(), 2);
        assert_eq!(h.subjects()[0].transitions.len(), 2);
        assert_eq!(h.subjects()[1].censor_time, Some(0.8));
    }

    #[test]
    fn round_trips_right_censored() {
        let f = write_temp("time,status,group\n1.5,1,0\n2.25,0,1\n");
        let sample = read_right_censored(f.path()).unwrap();
        let mut buf = Vec::new();
        write_right_censored(&sample, &mut buf).unwrap();
        let f2 = write_temp(std::str::from_utf8(&buf).unwrap());
        let again = read_right_censored(f2.path()).unwrap();
        assert_eq!(sample, again);
    }

    #[test]
    fn reads_pairs_schema() {
        let f = write_temp("t1,status1,t2,status2\n1.0,1,2.0,0\n0.5,0,0.5,1\n");
        let pairs = read_pairs(f.path()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].status2, 0);
    }
}
