use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::room::Room;
use crate::simhome::io::write_file;
use crate::tensorfile::{NamedTensor, TensorFile};

use super::{ChannelLayout, SensorWindow, WINDOW_LEN};

pub const WINDOW_MAGIC: &[u8; 8] = b"MDCSAWIN";
pub const WINDOW_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub layout: ChannelLayout,
    pub windows: Vec<SensorWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowIndexRow {
    pub id: usize,
    pub participant: String,
    pub start_ms: i64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    layout: ChannelLayout,
    channels: Vec<String>,
    window_len: usize,
    index: Vec<WindowIndexRow>,
}

pub fn index_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".index.csv");
    PathBuf::from(s)
}

/// Writes the binary window file and a `<path>.index.csv` mapping window
/// ids to participant and start time.
pub fn save_windows(set: &WindowSet, path: &Path) -> Result<()> {
    let n = set.windows.len();
    let (r, a) = (set.layout.n_rssi(), set.layout.n_accel());
    let mut rssi = Vec::with_capacity(n * WINDOW_LEN * r);
    let mut accel = Vec::with_capacity(n * WINDOW_LEN * a);
    let mut labels = Vec::with_capacity(n * WINDOW_LEN);
    for w in &set.windows {
        if w.len() != WINDOW_LEN || w.rssi.dim() != (WINDOW_LEN, r) {
            return Err(Error::shape(format!("{WINDOW_LEN}x{r} RSSI"), format!("{:?}", w.rssi.dim())));
        }
        rssi.extend(w.rssi.iter());
        match (&w.accel, set.layout.accel) {
            (Some(x), true) if x.dim() == (WINDOW_LEN, a) => accel.extend(x.iter()),
            (None, false) => {}
            _ => return Err(Error::shape("accelerometer block matching the layout", "mismatch")),
        }
        labels.extend(w.labels.iter().map(|l| l.index() as f64));
    }
    let index: Vec<WindowIndexRow> = set
        .windows
        .iter()
        .enumerate()
        .map(|(id, w)| WindowIndexRow {
            id,
            participant: w.participant.clone(),
            start_ms: w.start_ms,
        })
        .collect();
    let header = Header {
        layout: set.layout.clone(),
        channels: set.layout.channel_names(),
        window_len: WINDOW_LEN,
        index: index.clone(),
    };
    let mut tensors = vec![
        NamedTensor::new("rssi", vec![n, WINDOW_LEN, r], rssi),
        NamedTensor::new("labels", vec![n, WINDOW_LEN], labels),
    ];
    if set.layout.accel {
        tensors.push(NamedTensor::new("accel", vec![n, WINDOW_LEN, a], accel));
    }
    TensorFile {
        header: serde_json::to_value(header)?,
        tensors,
    }
    .save(WINDOW_MAGIC, WINDOW_VERSION, path)?;
    write_file(&index_path(path), "window-index", &index)
}

pub fn load_windows(path: &Path) -> Result<WindowSet> {
    let file = TensorFile::load(WINDOW_MAGIC, WINDOW_VERSION, path)?;
    let bad = |reason: &str| Error::format(path, reason.to_string());
    let header: Header = serde_json::from_value(file.header.clone()).map_err(|e| bad(&e.to_string()))?;
    if header.window_len != WINDOW_LEN {
        return Err(bad("unsupported window length"));
    }
    let n = header.index.len();
    let (r, a) = (header.layout.n_rssi(), header.layout.n_accel());
    let tensor = |name: &str, shape: Vec<usize>| -> Result<&NamedTensor> {
        let t = file.get(name).ok_or_else(|| bad(&format!("missing tensor {name}")))?;
        if t.shape != shape {
            return Err(bad(&format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape)));
        }
        Ok(t)
    };
    let rssi = tensor("rssi", vec![n, WINDOW_LEN, r])?;
    let labels = tensor("labels", vec![n, WINDOW_LEN])?;
    let accel = if header.layout.accel {
        Some(tensor("accel", vec![n, WINDOW_LEN, a])?)
    } else {
        None
    };
    let mut windows = Vec::with_capacity(n);
    for (i, row) in header.index.iter().enumerate() {
        let block = |t: &NamedTensor, c: usize| {
            Array2::from_shape_vec((WINDOW_LEN, c), t.data[i * WINDOW_LEN * c..(i + 1) * WINDOW_LEN * c].to_vec())
                .unwrap()
        };
        let ls = labels.data[i * WINDOW_LEN..(i + 1) * WINDOW_LEN]
            .iter()
            .map(|&v| Room::from_index(v as usize).ok_or_else(|| bad("label out of range")))
            .collect::<Result<Vec<_>>>()?;
        windows.push(SensorWindow {
            rssi: block(rssi, r),
            accel: accel.map(|t| block(t, a)),
            labels: ls,
            participant: row.participant.clone(),
            start_ms: row.start_ms,
        });
    }
    Ok(WindowSet {
        layout: header.layout,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{annotated_windows, mask_channels};
    use crate::simhome::{generate_cohort, SimConfig};

    #[test]
    fn window_file_round_trips() {
        let cohort = generate_cohort(1, 1, 3, &SimConfig {
            annotated_hours_per_day: 0.05,
            ..Default::default()
        })
        .unwrap();
        let windows = annotated_windows(&cohort, &cohort.participants[0]);
        let set = WindowSet {
            layout: ChannelLayout::full(),
            windows,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_windows(&set, &path).unwrap();
        assert_eq!(load_windows(&path).unwrap(), set);
        assert!(index_path(&path).exists());

        let masked: Vec<SensorWindow> = set
            .windows
            .iter()
            .map(|w| mask_channels(w, &set.layout, &[2, 5, 6, 9], false).unwrap().0)
            .collect();
        let set2 = WindowSet {
            layout: crate::pipeline::masked_layout(&set.layout, &[2, 5, 6, 9], false).unwrap(),
            windows: masked,
        };
        save_windows(&set2, &path).unwrap();
        assert_eq!(load_windows(&path).unwrap(), set2);
    }
}
