//! Ingestion and corpus formats: IMU CSV/JSONL, portable graymap frames,
//! raw float frames with sidecar shape headers, label files, and the split
//! manifest.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::{DataError, DatasetSplit, Result, Scenario, ScenarioKind};
use crate::imu::ImuSample;
use crate::vision::Frame;

pub const IMU_CSV_HEADER: &str = "t,a_x,a_y,a_z,l_x,l_y,l_z";

/// A recoverable per-record ingestion problem (malformed line); the stream
/// continues past it.
#[derive(Clone, Debug)]
pub struct RecordIssue {
    pub line: usize,
    pub message: String,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ImuRecord {
    t: f64,
    a_x: f64,
    a_y: f64,
    a_z: f64,
    l_x: f64,
    l_y: f64,
    l_z: f64,
}

impl From<&ImuSample> for ImuRecord {
    fn from(s: &ImuSample) -> Self {
        ImuRecord {
            t: s.t,
            a_x: s.angular[0],
            a_y: s.angular[1],
            a_z: s.angular[2],
            l_x: s.linear[0],
            l_y: s.linear[1],
            l_z: s.linear[2],
        }
    }
}

impl ImuRecord {
    fn into_sample(self) -> ImuSample {
        ImuSample {
            t: self.t,
            angular: [self.a_x, self.a_y, self.a_z],
            linear: [self.l_x, self.l_y, self.l_z],
        }
    }
}

// ── IMU CSV ───────────────────────────────────────────────────────────────

pub fn write_imu_csv(path: &Path, samples: &[ImuSample]) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 64);
    out.push_str(IMU_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t, s.angular[0], s.angular[1], s.angular[2], s.linear[0], s.linear[1], s.linear[2]
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn parse_imu_line(line: &str) -> std::result::Result<ImuSample, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(format!("expected 7 fields, got {}", fields.len()));
    }
    let mut vals = [0.0f64; 7];
    for (i, f) in fields.iter().enumerate() {
        vals[i] = f
            .trim()
            .parse()
            .map_err(|_| format!("field {} is not a number: {f:?}", i + 1))?;
    }
    Ok(ImuSample {
        t: vals[0],
        angular: [vals[1], vals[2], vals[3]],
        linear: [vals[4], vals[5], vals[6]],
    })
}

/// Reads an IMU CSV, collecting malformed records as issues (with their line
/// numbers) instead of failing.
pub fn read_imu_csv_lenient(path: &Path) -> Result<(Vec<ImuSample>, Vec<RecordIssue>)> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if idx == 0 && trimmed == IMU_CSV_HEADER {
            continue;
        }
        match parse_imu_line(trimmed) {
            Ok(s) => samples.push(s),
            Err(message) => issues.push(RecordIssue {
                line: lineno,
                message,
            }),
        }
    }
    Ok((samples, issues))
}

/// Strict variant: the first malformed record is an error.
pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>> {
    let (samples, issues) = read_imu_csv_lenient(path)?;
    if let Some(issue) = issues.first() {
        return Err(DataError::Parse {
            path: path.display().to_string(),
            line: issue.line,
            msg: issue.message.clone(),
        });
    }
    Ok(samples)
}

// ── IMU JSONL ─────────────────────────────────────────────────────────────

pub fn write_imu_jsonl(path: &Path, samples: &[ImuSample]) -> Result<()> {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(&ImuRecord::from(s)).expect("serializable"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_imu_jsonl_lenient(path: &Path) -> Result<(Vec<ImuSample>, Vec<RecordIssue>)> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ImuRecord>(line) {
            Ok(r) => samples.push(r.into_sample()),
            Err(e) => issues.push(RecordIssue {
                line: idx + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok((samples, issues))
}

// ── label files ───────────────────────────────────────────────────────────

/// IMU labels: `t,label` rows with label 0/1.
pub fn write_imu_labels(path: &Path, samples: &[ImuSample], labels: &[bool]) -> Result<()> {
    let mut out = String::from("t,label\n");
    for (s, &l) in samples.iter().zip(labels) {
        out.push_str(&format!("{},{}\n", s.t, l as u8));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_imu_labels(path: &Path) -> Result<Vec<(f64, bool)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed == "t,label" || trimmed.starts_with('#') {
            continue;
        }
        let (t, l) = trimmed.split_once(',').ok_or_else(|| DataError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: "expected t,label".into(),
        })?;
        let t: f64 = t.trim().parse().map_err(|_| DataError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: format!("bad timestamp {t:?}"),
        })?;
        let l = match l.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(DataError::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("bad label {other:?}"),
                })
            }
        };
        out.push((t, l));
    }
    Ok(out)
}

/// Frame labels: `index,label` rows.
pub fn write_frame_labels(path: &Path, labels: &[bool]) -> Result<()> {
    let mut out = String::from("index,label\n");
    for (i, &l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", l as u8));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_frame_labels(path: &Path) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed == "index,label" || trimmed.starts_with('#') {
            continue;
        }
        let (_, l) = trimmed.split_once(',').ok_or_else(|| DataError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: "expected index,label".into(),
        })?;
        out.push(l.trim() == "1");
    }
    Ok(out)
}

// ── frames: portable graymap and raw floats ───────────────────────────────

/// Writes binary PGM (P5, maxval 255).
pub fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = Vec::with_capacity(frame.data.len() + 32);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", frame.size, frame.size).as_bytes());
    out.extend_from_slice(&frame.to_u8());
    fs::write(path, out)?;
    Ok(())
}

fn pnm_tokens(data: &[u8], n: usize) -> std::result::Result<(Vec<usize>, usize), String> {
    // first n whitespace-separated tokens after the magic, skipping comments;
    // returns the tokens and the offset just past the final whitespace
    let mut tokens = Vec::with_capacity(n);
    let mut i = 2; // past magic
    while tokens.len() < n && i < data.len() {
        while i < data.len() && (data[i].is_ascii_whitespace() || data[i] == b'#') {
            if data[i] == b'#' {
                while i < data.len() && data[i] != b'\n' {
                    i += 1;
                }
            }
            i += 1;
        }
        let start = i;
        while i < data.len() && !data[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err("truncated header".into());
        }
        let tok = std::str::from_utf8(&data[start..i]).map_err(|_| "non-ascii header")?;
        tokens.push(tok.parse().map_err(|_| format!("bad header token {tok:?}"))?);
    }
    if tokens.len() < n {
        return Err("truncated header".into());
    }
    Ok((tokens, i + 1))
}

/// Reads P5/P2 graymaps and P6 color maps (converted to grayscale with the
/// ITU-R 601 luma weights), bilinearly resized to `target_size`, normalized
/// to [−1, 1].
pub fn read_frame_image(path: &Path, target_size: usize, t: f64) -> Result<Frame> {
    let data = fs::read(path)?;
    let bad = |msg: &str| DataError::BadImage(format!("{}: {msg}", path.display()));
    if data.len() < 2 {
        return Err(bad("too short"));
    }
    let magic = &data[..2];
    let (header, offset) = pnm_tokens(&data, 3).map_err(|m| bad(&m))?;
    let (w, h, maxval) = (header[0], header[1], header[2]);
    if maxval != 255 {
        return Err(bad("only maxval 255 supported"));
    }
    let gray: Vec<f64> = match magic {
        b"P5" => {
            let body = &data[offset..];
            if body.len() < w * h {
                return Err(bad("truncated pixel data"));
            }
            body[..w * h].iter().map(|&p| p as f64).collect()
        }
        b"P6" => {
            let body = &data[offset..];
            if body.len() < 3 * w * h {
                return Err(bad("truncated pixel data"));
            }
            body[..3 * w * h]
                .chunks_exact(3)
                .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
                .collect()
        }
        b"P2" => {
            let text = std::str::from_utf8(&data).map_err(|_| bad("non-ascii P2"))?;
            let vals: Vec<f64> = text
                .split_whitespace()
                .skip(4) // magic, w, h, maxval
                .filter_map(|tok| tok.parse().ok())
                .collect();
            if vals.len() < w * h {
                return Err(bad("truncated pixel data"));
            }
            vals[..w * h].to_vec()
        }
        _ => return Err(bad("unsupported magic (want P2/P5/P6)")),
    };
    let resized = resize_bilinear(&gray, h, w, target_size);
    let norm: Vec<f64> = resized.iter().map(|&v| (v / 127.5 - 1.0).clamp(-1.0, 1.0)).collect();
    Frame::new(norm, target_size, t).map_err(Into::into)
}

/// Bilinear resample of an h×w grid to target×target.
pub fn resize_bilinear(data: &[f64], h: usize, w: usize, target: usize) -> Vec<f64> {
    if h == target && w == target {
        return data.to_vec();
    }
    let mut out = vec![0.0; target * target];
    let sy = h as f64 / target as f64;
    let sx = w as f64 / target as f64;
    for r in 0..target {
        for c in 0..target {
            let y = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, h as f64 - 1.0);
            let x = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, w as f64 - 1.0);
            let (y0, x0) = (y.floor() as usize, x.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (dy, dx) = (y - y0 as f64, x - x0 as f64);
            out[r * target + c] = data[y0 * w + x0] * (1.0 - dy) * (1.0 - dx)
                + data[y0 * w + x1] * (1.0 - dy) * dx
                + data[y1 * w + x0] * dy * (1.0 - dx)
                + data[y1 * w + x1] * dy * dx;
        }
    }
    out
}

/// Raw little-endian f64 frame with a sidecar shape header `<path>.shape`
/// containing "H W".
pub fn write_raw_frame(path: &Path, frame: &Frame) -> Result<()> {
    let mut bytes = Vec::with_capacity(frame.data.len() * 8);
    for v in &frame.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let sidecar = sidecar_path(path);
    fs::write(sidecar, format!("{} {}\n", frame.size, frame.size))?;
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".shape");
    PathBuf::from(p)
}

pub fn read_raw_frame(path: &Path, target_size: usize, t: f64) -> Result<Frame> {
    let bad = |msg: &str| DataError::BadImage(format!("{}: {msg}", path.display()));
    let shape_text = fs::read_to_string(sidecar_path(path))?;
    let dims: Vec<usize> = shape_text
        .split_whitespace()
        .filter_map(|tok| tok.parse().ok())
        .collect();
    if dims.len() != 2 {
        return Err(bad("sidecar must contain H W"));
    }
    let (h, w) = (dims[0], dims[1]);
    let bytes = fs::read(path)?;
    if bytes.len() < h * w * 8 {
        return Err(bad("truncated float payload"));
    }
    let vals: Vec<f64> = bytes[..h * w * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if !vals.iter().all(|v| v.is_finite()) {
        return Err(bad("non-finite pixel"));
    }
    let resized = resize_bilinear(&vals, h, w, target_size);
    let clamped: Vec<f64> = resized.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    Frame::new(clamped, target_size, t).map_err(Into::into)
}

// ── split manifest ────────────────────────────────────────────────────────

pub fn write_manifest(path: &Path, split: &DatasetSplit) -> Result<()> {
    let mut out = String::new();
    for (section, ids) in [
        ("train", &split.train),
        ("threshold", &split.threshold),
        ("test", &split.test),
    ] {
        out.push_str(&format!("[{section}]\n"));
        for id in ids {
            out.push_str(id);
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetSplit> {
    let text = fs::read_to_string(path)?;
    let mut split = DatasetSplit::default();
    let mut current: Option<&mut Vec<String>> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "[train]" => current = Some(&mut split.train),
            "[threshold]" => current = Some(&mut split.threshold),
            "[test]" => current = Some(&mut split.test),
            other if other.starts_with('[') => {
                return Err(DataError::BadManifest(format!("unknown section {other}")))
            }
            id => match current.as_deref_mut() {
                Some(v) => v.push(id.to_string()),
                None => {
                    return Err(DataError::BadManifest(format!(
                        "scenario id {id} before any section"
                    )))
                }
            },
        }
    }
    split.validate()?;
    Ok(split)
}

// ── corpus layout ─────────────────────────────────────────────────────────

/// Writes scenarios under `dir` as `imu/<id>/stream.csv` + `labels.csv` and
/// `frames/<id>/frame_NNNN.pgm` + `labels.csv`, plus `split.txt`.
pub fn write_corpus(dir: &Path, scenarios: &[Scenario], split: &DatasetSplit) -> Result<()> {
    split.validate()?;
    for sc in scenarios {
        let imu_dir = dir.join("imu").join(&sc.id);
        fs::create_dir_all(&imu_dir)?;
        write_imu_csv(&imu_dir.join("stream.csv"), &sc.imu)?;
        write_imu_labels(&imu_dir.join("labels.csv"), &sc.imu, &sc.imu_labels)?;
        let frame_dir = dir.join("frames").join(&sc.id);
        fs::create_dir_all(&frame_dir)?;
        for (i, f) in sc.frames.iter().enumerate() {
            write_pgm(&frame_dir.join(format!("frame_{i:04}.pgm")), f)?;
        }
        write_frame_labels(&frame_dir.join("labels.csv"), &sc.frame_labels)?;
        let mut meta = fs::File::create(frame_dir.join("timestamps.csv"))?;
        writeln!(meta, "index,t")?;
        for (i, f) in sc.frames.iter().enumerate() {
            writeln!(meta, "{i},{}", f.t)?;
        }
    }
    write_manifest(&dir.join("split.txt"), split)?;
    Ok(())
}

/// IMU stream and labels of one scenario.
pub fn read_imu_stream(dir: &Path, id: &str) -> Result<(Vec<ImuSample>, Vec<(f64, bool)>)> {
    let imu_dir = dir.join("imu").join(id);
    let samples = read_imu_csv(&imu_dir.join("stream.csv"))?;
    let labels = read_imu_labels(&imu_dir.join("labels.csv"))?;
    Ok((samples, labels))
}

/// Frame stream (with timestamps) and labels of one scenario. Ids with a
/// `-mirror` suffix are reconstructed by flipping the base scenario.
pub fn read_frame_stream(
    dir: &Path,
    id: &str,
    frame_size: usize,
) -> Result<(Vec<Frame>, Vec<bool>)> {
    if let Some(base) = id.strip_suffix("-mirror") {
        let (frames, labels) = read_frame_stream(dir, base, frame_size)?;
        return Ok((frames.iter().map(crate::vision::flip_h).collect(), labels));
    }
    let frame_dir = dir.join("frames").join(id);
    let labels = read_frame_labels(&frame_dir.join("labels.csv"))?;
    let text = fs::read_to_string(frame_dir.join("timestamps.csv"))?;
    let times: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once(',')
                .and_then(|(_, t)| t.trim().parse().ok())
                .ok_or_else(|| DataError::BadManifest("bad timestamps.csv".into()))
        })
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        frames.push(read_frame_image(
            &frame_dir.join(format!("frame_{i:04}.pgm")),
            frame_size,
            t,
        )?);
    }
    Ok((frames, labels))
}

/// Loads one scenario back from a corpus directory.
pub fn read_scenario(dir: &Path, id: &str, kind: ScenarioKind, frame_size: usize) -> Result<Scenario> {
    let imu_dir = dir.join("imu").join(id);
    let imu = read_imu_csv(&imu_dir.join("stream.csv"))?;
    let imu_labels: Vec<bool> = read_imu_labels(&imu_dir.join("labels.csv"))?
        .into_iter()
        .map(|(_, l)| l)
        .collect();
    let frame_dir = dir.join("frames").join(id);
    let frame_labels = read_frame_labels(&frame_dir.join("labels.csv"))?;
    let times: Vec<f64> = {
        let text = fs::read_to_string(frame_dir.join("timestamps.csv"))?;
        text.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once(',')
                    .and_then(|(_, t)| t.trim().parse().ok())
                    .ok_or_else(|| DataError::BadManifest("bad timestamps.csv".into()))
            })
            .collect::<Result<_>>()?
    };
    let mut frames = Vec::with_capacity(frame_labels.len());
    for (i, &t) in times.iter().enumerate() {
        frames.push(read_frame_image(
            &frame_dir.join(format!("frame_{i:04}.pgm")),
            frame_size,
            t,
        )?);
    }
    Ok(Scenario {
        id: id.to_string(),
        kind,
        imu,
        imu_labels,
        frames,
        frame_labels,
    })
}
