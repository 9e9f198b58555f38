//! GeoLife `.plt` trajectory files.
//!
//! Six header lines, then one record per line:
//! `lat,lon,0,altitude_ft,days_since_1899,yyyy-mm-dd,hh:mm:ss`.
//! Only latitude, longitude, date and time are kept.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, Trace};

const HEADER_LINES: usize = 6;

/// Parses the text of one PLT file. `source` names it in error messages.
pub fn parse_plt_str(text: &str, source: &str) -> Result<Vec<GeoPoint>> {
    let mut points = Vec::new();
    for (k, line) in text.lines().enumerate().skip(HEADER_LINES) {
        let line_no = k + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        points.push(parse_record(line).map_err(|m| Error::parse(source, line_no, m))?);
    }
    Ok(points)
}

fn parse_record(line: &str) -> std::result::Result<GeoPoint, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 7 {
        return Err(format!(
            "expected 7 comma-separated fields, found {}",
            fields.len()
        ));
    }
    let lat: f64 = fields[0]
        .parse()
        .map_err(|_| format!("bad latitude '{}'", fields[0]))?;
    let lon: f64 = fields[1]
        .parse()
        .map_err(|_| format!("bad longitude '{}'", fields[1]))?;
    let date = NaiveDate::parse_from_str(fields[5], "%Y-%m-%d")
        .map_err(|_| format!("bad date '{}'", fields[5]))?;
    let time = NaiveTime::parse_from_str(fields[6], "%H:%M:%S")
        .map_err(|_| format!("bad time '{}'", fields[6]))?;
    GeoPoint::new(lat, lon, date.and_time(time)).map_err(|e| e.to_string())
}

/// Reads one PLT file as a single-session trace.
pub fn parse_plt(path: &Path, user_id: &str) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let points = parse_plt_str(&text, &path.display().to_string())?;
    Ok(Trace::new(user_id, points))
}

/// Reads every `.plt` file below `dir` (sorted by path) as one user's trace,
/// one session per file. Overlapping files are merged into a single session.
pub fn read_plt_user(dir: &Path, user_id: &str) -> Result<Trace> {
    let files = plt_files(dir)?;
    let mut points: Vec<GeoPoint> = Vec::new();
    let mut sessions = Vec::new();
    let mut overlapping = false;
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let chunk = parse_plt_str(&text, &file.display().to_string())?;
        if chunk.is_empty() {
            continue;
        }
        if points
            .last()
            .is_some_and(|last| chunk[0].timestamp < last.timestamp)
            || chunk.windows(2).any(|w| w[1].timestamp < w[0].timestamp)
        {
            overlapping = true;
        }
        let start = points.len();
        points.extend(chunk);
        sessions.push(start..points.len());
    }
    if overlapping {
        log::warn!("{user_id}: overlapping trajectory files, sessions merged");
        return Ok(Trace::new(user_id, points));
    }
    Trace::with_sessions(user_id, points, sessions)
}

fn plt_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file()
            && entry
                .path()
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("plt"))
        {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Reads a GeoLife `Data/` directory: one sub-directory per user.
pub fn read_geolife_dir(root: &Path) -> Result<Vec<Trace>> {
    let mut users: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    users.sort();
    let mut traces = Vec::new();
    for dir in users {
        let id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let trace = read_plt_user(&dir, &id)?;
        if !trace.is_empty() {
            traces.push(trace);
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n0,2,255,My Track,0,0,2,8421376\n0\n";

    #[test]
    fn parses_a_record() {
        let text =
            format!("{HEADER}39.906631,116.385564,0,492,39925.4486111111,2009-04-22,10:46:00\n");
        let pts = parse_plt_str(&text, "t.plt").unwrap();
        let want = GeoPoint::new(
            39.906631,
            116.385564,
            NaiveDate::from_ymd_opt(2009, 4, 22)
                .unwrap()
                .and_hms_opt(10, 46, 0)
                .unwrap(),
        )
        .unwrap();
        assert_eq!(pts, vec![want]);
    }

    #[test]
    fn out_of_range_latitude_reports_line() {
        let text = format!("{HEADER}91.0,0,0,0,0,2009-01-01,00:00:00\n");
        let err = parse_plt_str(&text, "t.plt").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 7);
                assert!(message.contains("latitude out of range"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_line() {
        let text = format!("{HEADER}39.9,116.3,0\n");
        assert!(matches!(
            parse_plt_str(&text, "t.plt"),
            Err(Error::Parse { line: 7, .. })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_plt_str(HEADER, "t.plt").unwrap().is_empty());
    }

    #[test]
    fn crlf_and_lf_agree() {
        let lf = format!(
            "{HEADER}39.906631,116.385564,0,492,39925.4486111111,2009-04-22,10:46:00\n39.906554,116.385625,0,492,39925.4486689815,2009-04-22,10:46:05\n"
        );
        let crlf = lf.replace('\n', "\r\n");
        assert_eq!(
            parse_plt_str(&lf, "a").unwrap(),
            parse_plt_str(&crlf, "b").unwrap()
        );
    }

    #[test]
    fn user_directory_gives_one_session_per_file() {
        let dir = tempfile::tempdir().unwrap();
        let traj = dir.path().join("Trajectory");
        fs::create_dir(&traj).unwrap();
        fs::write(
            traj.join("20090422104600.plt"),
            format!("{HEADER}39.9,116.3,0,0,0,2009-04-22,10:46:00\n39.9,116.3,0,0,0,2009-04-22,10:47:00\n"),
        )
        .unwrap();
        fs::write(
            traj.join("20090423080000.plt"),
            format!("{HEADER}39.8,116.2,0,0,0,2009-04-23,08:00:00\n"),
        )
        .unwrap();
        let t = read_plt_user(dir.path(), "000").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.sessions, vec![0..2, 2..3]);
    }
}
