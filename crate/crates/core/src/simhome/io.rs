//! On-disk cohort: a JSON manifest plus line-delimited record files.
//!
//! Every record file starts with a `# mdcsa-<stream> v<version>` line and a
//! column header. Field order:
//!
//! | stream | columns |
//! |--------|---------|
//! | rssi   | `timestamp_ms, wearable, ap, dbm` |
//! | accel  | `timestamp_ms, wearable, x, y, z` |
//! | truth  | `start_ms, end_ms, room` (run-length encoded 5 Hz ticks) |
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory values exactly.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::accel::AccelSample;
use super::cohort::{generate_cohort, Cohort, Participant, RawTrace, TruthSegment};
use super::profile::{MedicationSchedule, ParticipantProfile};
use super::radio::RssiPacket;
use super::SimConfig;

pub const STREAM_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "cohort.json";
pub const MANIFEST_FORMAT: &str = "mdcsa-cohort";

fn header(stream: &str) -> String {
    format!("# mdcsa-{stream} v{STREAM_VERSION}")
}

pub fn write_records<W: Write, T: Serialize>(out: W, stream: &str, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", header(stream))?;
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read, T: DeserializeOwned>(
    input: R,
    stream: &str,
    path: &Path,
) -> Result<Vec<T>> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    if first.trim_end() != header(stream) {
        return Err(Error::format(
            path,
            format!(
                "expected header `{}`, found `{}`",
                header(stream),
                first.trim_end()
            ),
        ));
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|rec| rec.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

pub fn write_file<T: Serialize>(path: &Path, stream: &str, records: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_records(File::create(path)?, stream, records)
}

pub fn read_file<T: DeserializeOwned>(path: &Path, stream: &str) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::MissingInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    read_records(f, stream, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub n_pairs: u32,
    pub days: u32,
    pub config: SimConfig,
    pub profiles: Vec<ParticipantProfile>,
    pub schedules: Vec<MedicationSchedule>,
    pub sessions: Vec<Vec<(i64, i64)>>,
    /// True when sensor record files for the annotated sessions were written.
    pub streams: bool,
}

impl CohortManifest {
    pub fn of(cohort: &Cohort, streams: bool) -> Self {
        CohortManifest {
            format: MANIFEST_FORMAT.into(),
            version: STREAM_VERSION,
            seed: cohort.seed,
            n_pairs: cohort.n_pairs(),
            days: cohort.days,
            config: cohort.config.clone(),
            profiles: cohort
                .participants
                .iter()
                .map(|p| p.profile.clone())
                .collect(),
            schedules: cohort
                .participants
                .iter()
                .filter_map(|p| p.schedule.clone())
                .collect(),
            sessions: cohort.sessions.clone(),
            streams,
        }
    }
}

pub fn rssi_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("streams").join(format!("{id}.rssi.csv"))
}

pub fn accel_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("streams").join(format!("{id}.accel.csv"))
}

pub fn truth_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("truth").join(format!("{id}.truth.csv"))
}

/// Sensor streams of one participant concatenated over the annotated sessions.
pub fn session_trace(cohort: &Cohort, participant: &Participant) -> RawTrace {
    let mut out = RawTrace {
        participant: participant.id().to_string(),
        ..Default::default()
    };
    for &(a, b) in cohort.sessions_of(participant) {
        let t = cohort.raw_trace(participant, a, b);
        out.rssi.extend(t.rssi);
        out.accel.extend(t.accel);
        out.truth.extend(t.truth);
    }
    out
}

/// Writes the manifest and full-day truth, plus session sensor streams when
/// `streams` is set. Returns every path written, manifest first.
pub fn save_cohort(cohort: &Cohort, dir: &Path, streams: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(&CohortManifest::of(cohort, streams))?;
    text.push('\n');
    fs::write(&manifest, text)?;
    let mut written = vec![manifest];
    for p in &cohort.participants {
        let path = truth_path(dir, p.id());
        write_file(&path, "truth", &cohort.full_truth(p))?;
        written.push(path);
        if streams {
            let trace = session_trace(cohort, p);
            let path = rssi_path(dir, p.id());
            write_file(&path, "rssi", &trace.rssi)?;
            written.push(path);
            let path = accel_path(dir, p.id());
            write_file(&path, "accel", &trace.accel)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn read_manifest(dir: &Path) -> Result<CohortManifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::MissingInput {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let m: CohortManifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.format != MANIFEST_FORMAT || m.version != STREAM_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported manifest {} v{}", m.format, m.version),
        ));
    }
    Ok(m)
}

/// Rebuilds the cohort from its manifest and checks that the regenerated
/// profiles, schedules and sessions agree with the recorded ones.
pub fn load_cohort(dir: &Path) -> Result<Cohort> {
    let m = read_manifest(dir)?;
    let cohort = generate_cohort(m.n_pairs, m.days, m.seed, &m.config)?;
    if CohortManifest::of(&cohort, m.streams) != m {
        return Err(Error::format(
            dir.join(MANIFEST_NAME),
            "recorded participants differ from the cohort regenerated from seed and config",
        ));
    }
    Ok(cohort)
}

pub fn read_truth(dir: &Path, id: &str) -> Result<Vec<TruthSegment>> {
    read_file(&truth_path(dir, id), "truth")
}

pub fn read_rssi(dir: &Path, id: &str) -> Result<Vec<RssiPacket>> {
    read_file(&rssi_path(dir, id), "rssi")
}

pub fn read_accel(dir: &Path, id: &str) -> Result<Vec<AccelSample>> {
    read_file(&accel_path(dir, id), "accel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::Room;
    use crate::simhome::radio::Wearable;

    #[test]
    fn records_round_trip_exactly() {
        let packets = vec![
            RssiPacket {
                timestamp_ms: 21_600_000,
                wearable: Wearable::Left,
                ap: 3,
                dbm: -63.123456789012345,
            },
            RssiPacket {
                timestamp_ms: 21_600_200,
                wearable: Wearable::Right,
                ap: 10,
                dbm: -99.99999999999999,
            },
        ];
        let mut buf = vec![];
        write_records(&mut buf, "rssi", &packets).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# mdcsa-rssi v1\ntimestamp_ms,wearable,ap,dbm\n"));
        let back: Vec<RssiPacket> = read_records(&buf[..], "rssi", Path::new("mem")).unwrap();
        assert_eq!(back, packets);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let segs = vec![TruthSegment {
            start_ms: 0,
            end_ms: 200,
            room: Room::Porch,
        }];
        let mut buf = vec![];
        write_records(&mut buf, "truth", &segs).unwrap();
        let err = read_records::<_, TruthSegment>(&buf[..], "rssi", Path::new("mem"));
        assert!(matches!(err, Err(Error::Format { .. })));
    }

    #[test]
    fn cohort_directory_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cohort = generate_cohort(
            1,
            1,
            5,
            &SimConfig {
                annotated_hours_per_day: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        let written = save_cohort(&cohort, dir.path(), true).unwrap();
        assert_eq!(written.len(), 1 + 2 * 3);
        let back = load_cohort(dir.path()).unwrap();
        assert_eq!(back, cohort);
        let p = &cohort.participants[0];
        assert_eq!(
            read_truth(dir.path(), p.id()).unwrap(),
            cohort.full_truth(p)
        );
        let trace = session_trace(&cohort, p);
        assert_eq!(read_rssi(dir.path(), p.id()).unwrap(), trace.rssi);
        assert_eq!(read_accel(dir.path(), p.id()).unwrap(), trace.accel);
    }

    #[test]
    fn identical_seeds_give_identical_bytes() {
        let cfg = SimConfig {
            annotated_hours_per_day: 0.05,
            ..Default::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files_a =
            save_cohort(&generate_cohort(1, 1, 8, &cfg).unwrap(), a.path(), true).unwrap();
        save_cohort(&generate_cohort(1, 1, 8, &cfg).unwrap(), b.path(), true).unwrap();
        for f in files_a {
            let rel = f.strip_prefix(a.path()).unwrap();
            assert_eq!(
                fs::read(&f).unwrap(),
                fs::read(b.path().join(rel)).unwrap(),
                "{rel:?}"
            );
        }
    }
}
